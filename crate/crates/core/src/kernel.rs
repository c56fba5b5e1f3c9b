//! Interaction kernels: -log|x| in one and two dimensions and the Riesz
//! kernel |x|^{-s} with max(0, d-2) <= s < d.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Log1d,
    Log2d,
    Riesz,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    family: KernelFamily,
    #[serde(default)]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
}

/// A validated pair interaction `g`. Serialises as `{family, d, s}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Kernel {
    family: KernelFamily,
    d: usize,
    s: f64,
}

impl TryFrom<KernelRepr> for Kernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        let k = match r.family {
            KernelFamily::Log1d => Kernel::log1d(),
            KernelFamily::Log2d => Kernel::log2d(),
            KernelFamily::Riesz => {
                let d = r.d.ok_or_else(|| Error::Argument("riesz kernel requires d".into()))?;
                let s = r.s.ok_or_else(|| Error::Argument("riesz kernel requires s".into()))?;
                return Kernel::riesz(d, s);
            }
        };
        if let Some(d) = r.d {
            ensure!(d == k.d, Argument, "{:?} kernel lives in dimension {}, got d = {d}", r.family, k.d);
        }
        ensure!(r.s.is_none(), Argument, "log kernels take no exponent s");
        Ok(k)
    }
}

impl From<Kernel> for KernelRepr {
    fn from(k: Kernel) -> Self {
        KernelRepr { family: k.family, d: Some(k.d), s: (k.family == KernelFamily::Riesz).then_some(k.s) }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Log1d => write!(f, "log1d"),
            KernelFamily::Log2d => write!(f, "log2d"),
            KernelFamily::Riesz => write!(f, "riesz(d={}, s={})", self.d, self.s),
        }
    }
}

impl Kernel {
    pub fn log1d() -> Self {
        Kernel { family: KernelFamily::Log1d, d: 1, s: 0.0 }
    }

    pub fn log2d() -> Self {
        Kernel { family: KernelFamily::Log2d, d: 2, s: 0.0 }
    }

    /// Riesz kernel `|x|^{-s}` in dimension `d`; requires
    /// `max(0, d-2) <= s < d`, `s > 0` and `1 <= d <= 3`.
    pub fn riesz(d: usize, s: f64) -> Result<Self> {
        ensure!((1..=3).contains(&d), Argument, "dimension must be 1, 2 or 3, got {d}");
        ensure!(s.is_finite(), Argument, "exponent must be finite");
        ensure!(s > 0.0, Argument, "riesz exponent must be positive (use a log kernel for s = 0)");
        ensure!(s >= (d as f64 - 2.0).max(0.0) && s < d as f64, Argument, "need max(0, d-2) <= s < d, got d = {d}, s = {s}");
        Ok(Kernel { family: KernelFamily::Riesz, d, s })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Exponent `s`; 0 for the logarithmic families.
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn is_log(&self) -> bool {
        self.family != KernelFamily::Riesz
    }

    /// g as a function of the distance r > 0.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Riesz => {
                if self.s == 0.5 {
                    1.0 / r.sqrt()
                } else if self.s == 1.0 {
                    1.0 / r
                } else {
                    r.powf(-self.s)
                }
            }
            _ => -r.ln(),
        }
    }

    /// g evaluated at the separation vector `v`.
    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        ensure!(v.len() == self.d, Argument, "vector of dimension {} for a kernel in dimension {}", v.len(), self.d);
        let r = norm(v);
        if r == 0.0 {
            return Err(Error::Singularity("kernel evaluated at the zero vector".into()));
        }
        Ok(self.radial(r))
    }

    /// Antiderivative of r^n g(r) vanishing at 0 (requires n + 1 - s > 0).
    pub(crate) fn moment_primitive(&self, n: i32, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let p = n as f64 + 1.0;
        if self.is_log() {
            -r.powi(n + 1) / p * (r.ln() - 1.0 / p)
        } else {
            r.powf(p - self.s) / (p - self.s)
        }
    }

    /// Closed-form `int_a^b r^n g(r) dr` for 0 <= a <= b.
    pub(crate) fn moment(&self, n: i32, a: f64, b: f64) -> f64 {
        self.moment_primitive(n, b) - self.moment_primitive(n, a)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;

    #[test]
    fn kernel_examples() {
        assert_eq!(Kernel::log1d().eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(Kernel::riesz(1, 0.5).unwrap().eval(&[4.0]).unwrap(), 0.5);
        let e = std::f64::consts::E;
        assert!((Kernel::log2d().eval(&[e, 0.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((Kernel::riesz(3, 1.5).unwrap().eval(&[0.0, 4.0, 0.0]).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_and_dimension_errors() {
        assert!(matches!(Kernel::log1d().eval(&[0.0]), Err(Error::Singularity(_))));
        assert!(matches!(Kernel::log1d().eval(&[1.0, 2.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn riesz_parameter_constraints() {
        assert!(Kernel::riesz(1, 0.0).is_err());
        assert!(Kernel::riesz(1, 1.0).is_err());
        assert!(Kernel::riesz(2, 1.9).is_ok());
        assert!(Kernel::riesz(3, 0.5).is_err());
        assert!(Kernel::riesz(3, 1.0).is_ok());
        assert!(Kernel::riesz(4, 2.5).is_err());
    }

    #[test]
    fn json_shape() {
        let k = Kernel::riesz(1, 0.5).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"family":"riesz","d":1,"s":0.5}"#);
        let back: Kernel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        let bad: std::result::Result<Kernel, _> = serde_json::from_str(r#"{"family":"riesz","d":1,"s":1.5}"#);
        assert!(bad.is_err());
        let log: Kernel = serde_json::from_str(r#"{"family":"log1d"}"#).unwrap();
        assert_eq!(log, Kernel::log1d());
    }

    #[test]
    fn moments_match_quadrature() {
        for k in [Kernel::log1d(), Kernel::riesz(1, 0.5).unwrap(), Kernel::riesz(1, 0.9).unwrap()] {
            for n in 0..4 {
                for (a, b) in [(0.0, 0.3), (0.0, 2.5), (1.5, 7.0)] {
                    let exact = k.moment(n, a, b);
                    let q = adaptive(|r: f64| r.powi(n) * k.radial(r), a, b, 1e-13, 1e-13).unwrap();
                    assert!((exact - q).abs() < 1e-9 * (1.0 + q.abs()), "{k} n={n} [{a},{b}]: {exact} vs {q}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn radial_and_decreasing(x in -50.0f64..50.0, y in -50.0f64..50.0, t in 1.01f64..3.0) {
            proptest::prop_assume!(x.abs() + y.abs() > 1e-6);
            for k in [Kernel::log2d(), Kernel::riesz(2, 1.3).unwrap()] {
                let a = k.eval(&[x, y]).unwrap();
                proptest::prop_assert_eq!(a, k.eval(&[-x, -y]).unwrap());
                proptest::prop_assert!(k.eval(&[t * x, t * y]).unwrap() < a);
            }
        }
    }
}
