//! Numerical laboratory for the intrinsic energy of stationary point
//! processes under logarithmic, Coulomb and Riesz interactions.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`] and [`geometry`]: interactions, windows, configurations,
//!   tent and psi weights, discrepancies.
//! * [`generators`]: samplers for Poisson, lattice, Bernoulli-block,
//!   vibrating-lattice and renewal processes, with their two-point
//!   correlation functions.
//! * [`estimators`]: Monte Carlo estimators of pair correlations, number
//!   variance, the logarithmic discrepancy term and total variation.
//! * [`energy`]: the intrinsic energy by pair sums, by correlation-function
//!   quadrature and by the lattice series.
//! * [`onedim`]: k-th neighbour correlations, the crystallization gap,
//!   renewal entropy rates and free-energy scans.
//! * [`lpx`]: the discretized minimization over admissible correlation
//!   deficits.

pub mod energy;
mod error;
pub mod estimators;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod lpx;
pub mod onedim;
pub(crate) mod par;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{discrepancy, psi_weight, tent_weight, DiscrepancyStat, PointConfiguration, Window};
pub use kernel::{Kernel, KernelFamily};
