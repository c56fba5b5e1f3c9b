//! CSV and JSON emission. Floats are written with 17 significant digits so
//! that every value round-trips exactly.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::estimators::{CorrelationEstimate, DlogCurve, VarianceCurve};
use crate::generators::{ProcessModel, Seed};
use crate::geometry::PointConfiguration;
use crate::lpx::{CandidateT2, Discretization};
use crate::onedim::{FreeEnergyScan, NeighborDensity};

/// `{:.16e}` for finite values; `NaN`, `inf` and `-inf` otherwise.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format!("{value:.16e}").as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with fields in declaration order, floats to 17 digits and a
/// trailing newline. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| Error::Argument(format!("JSON serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// A CSV document: optional `#` comment lines, a header row, numeric rows.
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { comments: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row.into_iter().map(Some).collect());
    }

    /// Row with missing cells written empty.
    pub fn push_optional(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row);
    }
}

impl fmt::Display for CsvTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = Vec::new();
        for c in &self.comments {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            w.write_record(&self.header).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row.iter().map(|x| x.map(format_f64).unwrap_or_default())).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        f.write_str(std::str::from_utf8(&out).expect("ASCII output"))
    }
}

pub fn configuration_csv(config: &PointConfiguration, model: &ProcessModel, seed: Seed) -> Result<CsvTable> {
    let d = config.dim();
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = CsvTable::new(&header);
    t.comments.push(format!("d={d}"));
    t.comments.push(format!("R={}", format_f64(config.window().side())));
    t.comments.push(format!("model={}", serde_json::to_string(model).map_err(|e| Error::Argument(e.to_string()))?));
    t.comments.push(format!("seed={},{}", seed.master, seed.replica));
    for p in config.points() {
        t.push(p.to_vec());
    }
    Ok(t)
}

pub fn correlation_csv(est: &CorrelationEstimate) -> CsvTable {
    let mut t = CsvTable::new(&["bin_center", "value", "stderr"]);
    for ((c, v), s) in est.centers().into_iter().zip(&est.values).zip(&est.stderr) {
        t.push(vec![c, *v, *s]);
    }
    t
}

pub fn variance_csv(curve: &VarianceCurve) -> CsvTable {
    let mut t = CsvTable::new(&["R", "var", "stderr"]);
    for e in &curve.entries {
        t.push(vec![e.r, e.var, e.stderr]);
    }
    t
}

pub fn dlog_csv(curve: &DlogCurve) -> CsvTable {
    let mut t = CsvTable::new(&["R", "value", "stderr"]);
    for e in &curve.entries {
        t.push(vec![e.r, e.value, e.stderr]);
    }
    t
}

pub fn energy_csv(report: &EnergyReport) -> CsvTable {
    let mut t = CsvTable::new(&["R", "value", "stderr"]);
    for e in &report.entries {
        t.push_optional(vec![Some(e.r), Some(e.value), e.stderr]);
    }
    t
}

pub fn scan_csv(scan: &FreeEnergyScan) -> CsvTable {
    let mut t = CsvTable::new(&["theta", "wint", "ers", "f"]);
    for e in &scan.entries {
        t.push_optional(vec![Some(e.theta), e.wint, Some(e.ers), e.f]);
    }
    t
}

pub fn neighbor_csv(dens: &[NeighborDensity]) -> CsvTable {
    let mut t = CsvTable::new(&["k", "x", "value", "stderr"]);
    for d in dens {
        for (j, x) in d.centers().into_iter().enumerate() {
            t.push(vec![d.k as f64, x, d.values[j], d.stderr[j]]);
        }
    }
    t
}

pub fn candidate_csv(c: &CandidateT2, disc: &Discretization) -> CsvTable {
    let mut t = CsvTable::new(&["v", "T2"]);
    for (v, x) in disc.grid().into_iter().zip(&c.values) {
        t.push(vec![v, *x]);
    }
    t
}
