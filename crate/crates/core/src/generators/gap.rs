use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{ensure, Result};

/// Mean-one gap law of a renewal process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum GapLaw {
    Exponential,
    /// Gamma(shape, rate = shape).
    Gamma {
        shape: f64,
    },
    /// Law of `1 + V' - V` with V, V' uniform on [-1/k, 1/k]: triangular on
    /// [1 - 2/k, 1 + 2/k].
    UniformHat {
        k: u32,
    },
}

impl GapLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GapLaw::Exponential => Ok(()),
            GapLaw::Gamma { shape } => {
                ensure!(shape > 0.0 && shape.is_finite(), Argument, "gamma shape must be positive, got {shape}");
                Ok(())
            }
            GapLaw::UniformHat { k } => {
                ensure!(k >= 2, Argument, "uniform-hat gaps need k >= 2 to stay non-negative, got {k}");
                Ok(())
            }
        }
    }

    fn gamma_shape(&self) -> Option<f64> {
        match *self {
            GapLaw::Exponential => Some(1.0),
            GapLaw::Gamma { shape } => Some(shape),
            GapLaw::UniformHat { .. } => None,
        }
    }

    fn hat_halfwidth(&self) -> f64 {
        match *self {
            GapLaw::UniformHat { k } => 2.0 / k as f64,
            _ => unreachable!(),
        }
    }

    /// Support `[lo, hi]`; `hi` is infinite for gamma-type laws.
    pub fn support(&self) -> (f64, f64) {
        match self.gamma_shape() {
            Some(_) => (0.0, f64::INFINITY),
            None => {
                let a = self.hat_halfwidth();
                (1.0 - a, 1.0 + a)
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self.gamma_shape() {
            Some(t) => 1.0 / t,
            None => {
                let a = self.hat_halfwidth();
                a * a / 6.0
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.gamma_shape() {
            Some(t) => {
                if x <= 0.0 {
                    return if x == 0.0 && t < 1.0 {
                        f64::INFINITY
                    } else if x == 0.0 && t == 1.0 {
                        1.0
                    } else {
                        0.0
                    };
                }
                (t * t.ln() + (t - 1.0) * x.ln() - t * x - ln_gamma(t)).exp()
            }
            None => {
                let a = self.hat_halfwidth();
                ((1.0 - (x - 1.0).abs() / a) / a).max(0.0)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.gamma_shape() {
            Some(t) => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(t, t * x)
                }
            }
            None => {
                let a = self.hat_halfwidth();
                let y = (x - 1.0).clamp(-a, a);
                if y <= 0.0 {
                    (y + a).powi(2) / (2.0 * a * a)
                } else {
                    1.0 - (a - y).powi(2) / (2.0 * a * a)
                }
            }
        }
    }

    /// Upper tail `P(X > x)`, accurate where the CDF is close to one.
    pub fn sf(&self, x: f64) -> f64 {
        match self.gamma_shape() {
            Some(t) => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_ur(t, t * x)
                }
            }
            None => 1.0 - self.cdf(x),
        }
    }

    /// `int_0^x t f(t) dt`.
    pub fn partial_mean(&self, x: f64) -> f64 {
        match self.gamma_shape() {
            Some(t) => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(t + 1.0, t * x)
                }
            }
            None => {
                let a = self.hat_halfwidth();
                let y = (x - 1.0).clamp(-a, a);
                let first = if y <= 0.0 {
                    (a * y * y / 2.0 + y.powi(3) / 3.0 - a.powi(3) / 6.0) / (a * a)
                } else {
                    -a / 6.0 + (a * y * y / 2.0 - y.powi(3) / 3.0) / (a * a)
                };
                self.cdf(x) + first
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.gamma_shape() {
            Some(1.0) => -(1.0 - rng.random::<f64>()).ln(),
            Some(t) => Gamma::new(t, 1.0 / t).expect("validated shape").sample(rng),
            None => {
                let half = 0.5 * self.hat_halfwidth();
                1.0 + rng.random_range(-half..=half) - rng.random_range(-half..=half)
            }
        }
    }

    /// Draw from the length-biased law `x f(x)` (mean one).
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.gamma_shape() {
            Some(t) => Gamma::new(t + 1.0, 1.0 / t).expect("validated shape").sample(rng),
            None => {
                let hi = self.support().1;
                loop {
                    let x = self.sample(rng);
                    if rng.random::<f64>() * hi <= x {
                        return x;
                    }
                }
            }
        }
    }
}
