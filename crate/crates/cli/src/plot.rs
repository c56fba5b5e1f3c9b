//! Gnuplot scripts for the CSV outputs. Inputs are validated first so that
//! an empty or malformed table is reported instead of plotted.

use std::fs;
use std::path::Path;

use rieszlab::stats::fit_line;
use serde_json::Value;

use crate::spec::PlotKind;
use crate::CliError;

fn invalid(msg: String) -> CliError {
    CliError::Validation(vec![msg])
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| invalid(format!("csv: {e}")))?.iter().map(str::to_owned).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(invalid(format!("csv: {} has no header", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| invalid(format!("csv: row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .map(|f| match f.trim() {
                "" => Ok(f64::NAN),
                t => t.parse::<f64>().map_err(|_| invalid(format!("csv: row {}: not a number: {f:?}", i + 1))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid(format!("csv: {} has no data rows", path.display())));
    }
    Ok(Table { header, rows })
}

fn column(t: &Table, name: &str) -> Result<usize, CliError> {
    t.header.iter().position(|h| h == name).ok_or_else(|| invalid(format!("csv: missing column {name:?} (found {})", t.header.join(","))))
}

fn read_summary(path: Option<&Path>) -> Result<Option<Value>, CliError> {
    let Some(p) = path else { return Ok(None) };
    let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map(Some).map_err(|e| invalid(format!("summary: {e}")))
}

/// Build a gnuplot script for `csv`, using `summary` for annotations.
pub fn emit_plot_script(kind: PlotKind, csv: &Path, summary: Option<&Path>) -> Result<String, CliError> {
    let t = read_table(csv)?;
    let summary = read_summary(summary)?;
    let file = csv.display().to_string().replace('\'', "''");
    let mut s = String::from("set datafile separator ','\nset datafile commentschars '#'\nset key top right\n");
    match kind {
        PlotKind::Variance => {
            let (r, v) = (column(&t, "R")?, column(&t, "var")?);
            column(&t, "stderr")?;
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                t.rows.iter().filter(|row| row[r] > 0.0 && row[v] > 0.0).map(|row| (row[r].ln(), row[v].ln())).unzip();
            s += "set logscale xy\nset xlabel 'R'\nset ylabel 'Var N(C_R)'\n";
            if let Ok(fit) = fit_line(&xs, &ys) {
                s += &format!("set label 1 sprintf('slope %.3f', {}) at graph 0.05, graph 0.92\n", fit.slope);
            }
            s += &format!("plot '{file}' using 1:2:3 with yerrorbars title 'variance'\n");
        }
        PlotKind::Rho2 => {
            column(&t, "bin_center")?;
            column(&t, "value")?;
            s += "set xlabel 'v'\nset ylabel 'rho_2'\nset yrange [0:*]\n";
            s += &format!("plot '{file}' using 1:2:3 with yerrorbars title 'rho_2', 1 with lines dt 2 title 'Poisson'\n");
        }
        PlotKind::Energy => {
            column(&t, "R")?;
            let w = column(&t, "value")?;
            s += "set logscale x\nset xlabel 'R'\nset ylabel 'W_R'\n";
            let asym = summary.as_ref().and_then(|v| v.get("extrapolated")).and_then(Value::as_f64);
            let err_col = t.header.iter().position(|h| h == "stderr").filter(|e| t.rows.iter().any(|row| row[*e].is_finite()));
            let data = match err_col {
                Some(e) => format!("'{file}' using 1:{}:{} with yerrorbars title 'W_R'", w + 1, e + 1),
                None => format!("'{file}' using 1:{} with linespoints title 'W_R'", w + 1),
            };
            match asym {
                Some(a) => s += &format!("plot {data}, {a} with lines dt 2 title 'extrapolated'\n"),
                None => s += &format!("plot {data}\n"),
            }
        }
        PlotKind::Freemin => {
            column(&t, "theta")?;
            column(&t, "f")?;
            s += "set logscale x\nset xlabel 'theta'\nset ylabel 'beta W + ERS'\n";
            if let Some(th) = summary.as_ref().and_then(|v| v.get("argmin_theta")).and_then(Value::as_f64) {
                s += &format!("set arrow from {th}, graph 0 to {th}, graph 1 nohead dt 2\n");
            }
            s += &format!("plot '{file}' using 1:4 with linespoints title 'free energy'\n");
        }
    }
    Ok(s)
}
