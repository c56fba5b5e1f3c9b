//! Extrapolation of finite-R energy ladders to R = infinity.

use crate::error::{ensure, Result};
use crate::kernel::Kernel;
use crate::stats::solve_dense;

/// Correction terms in the large-R expansion of a tent-weighted energy:
/// the constant, `1/R`, the lattice-sum term (`log R / R` for log kernels,
/// `R^{-1-s}` for Riesz kernels) and `1/R^2`.
pub fn correction_basis(kernel: &Kernel) -> Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let s = kernel.s();
    let lattice: Box<dyn Fn(f64) -> f64 + Send + Sync> =
        if kernel.is_log() { Box::new(|r: f64| r.ln() / r) } else { Box::new(move |r: f64| r.powf(-1.0 - s)) };
    vec![Box::new(|_| 1.0), Box::new(|r: f64| 1.0 / r), lattice, Box::new(|r: f64| 1.0 / (r * r))]
}

fn intercept_through(rs: &[f64], ys: &[f64], basis: &[Box<dyn Fn(f64) -> f64 + Send + Sync>]) -> Result<f64> {
    let m = basis.len();
    let mut a: Vec<Vec<f64>> = rs.iter().map(|r| basis.iter().map(|f| f(*r)).collect()).collect();
    // column scaling keeps the small correction columns well conditioned
    let scale: Vec<f64> = (0..m).map(|j| a.iter().map(|row| row[j].abs()).fold(0.0, f64::max).max(1e-300)).collect();
    for row in &mut a {
        for (x, s) in row.iter_mut().zip(&scale) {
            *x /= s;
        }
    }
    let c = solve_dense(a, ys.to_vec())?;
    Ok(c[0] / scale[0])
}

/// Generalized Richardson extrapolation: interpolate the last `m` points
/// with the first `m` basis functions, where `m` is as large as the ladder
/// allows while keeping one spare point. Returns the top estimate and its
/// distance to the estimate from the ladder shifted down by one.
pub fn richardson(rs: &[f64], ys: &[f64], basis: &[Box<dyn Fn(f64) -> f64 + Send + Sync>]) -> Result<(f64, f64)> {
    let n = rs.len();
    ensure!(n == ys.len(), Argument, "ladder length mismatch");
    ensure!(n >= 2, Insufficient, "extrapolation needs at least two ladder points");
    let m = basis.len().min(n - 1);
    let top = intercept_through(&rs[n - m..], &ys[n - m..], &basis[..m])?;
    let prev = intercept_through(&rs[n - m - 1..n - 1], &ys[n - m - 1..n - 1], &basis[..m])?;
    Ok((top, (top - prev).abs()))
}

/// Least-squares intercept of `y = a + b / R` weighted by `1/var_i`, with
/// its standard error from the full covariance of the ladder means.
pub fn weighted_intercept(rs: &[f64], ys: &[f64], cov: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = rs.len();
    ensure!(n >= 2, Insufficient, "need at least two ladder points");
    let w: Vec<f64> = (0..n).map(|i| if cov[i][i] > 0.0 { 1.0 / cov[i][i] } else { 1.0 }).collect();
    let x: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        s0 += w[i];
        s1 += w[i] * x[i];
        s2 += w[i] * x[i] * x[i];
    }
    let det = s0 * s2 - s1 * s1;
    ensure!(det.abs() > 1e-300, Insufficient, "degenerate ladder");
    // intercept = sum_i c_i y_i
    let c: Vec<f64> = (0..n).map(|i| w[i] * (s2 - s1 * x[i]) / det).collect();
    let est = c.iter().zip(ys).map(|(c, y)| c * y).sum();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += c[i] * c[j] * cov[i][j];
        }
    }
    Ok((est, var.max(0.0).sqrt()))
}

/// Intercept of a least-squares fit of `ys` on `basis` (first function the
/// constant) with weights `1/var_i`.
pub fn weighted_basis_intercept(rs: &[f64], ys: &[f64], variances: &[f64], basis: &[Box<dyn Fn(f64) -> f64 + Send + Sync>]) -> Result<f64> {
    let m = basis.len();
    ensure!(rs.len() >= m, Insufficient, "need at least {m} ladder points");
    let w: Vec<f64> = variances.iter().map(|v| if *v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let cols: Vec<Vec<f64>> = basis.iter().map(|f| rs.iter().map(|r| f(*r)).collect()).collect();
    let scale: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300)).collect();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for i in 0..rs.len() {
        for j in 0..m {
            let xj = cols[j][i] / scale[j];
            b[j] += w[i] * xj * ys[i];
            for k in 0..m {
                a[j][k] += w[i] * xj * cols[k][i] / scale[k];
            }
        }
    }
    Ok(solve_dense(a, b)?[0] / scale[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_is_exact_on_basis_combinations() {
        let k = Kernel::log1d();
        let basis = correction_basis(&k);
        let rs: Vec<f64> = (4..12).map(|e| 2f64.powi(e)).collect();
        let ys: Vec<f64> = rs.iter().map(|r| -1.5 + 0.3 / r + 0.7 * r.ln() / r - 2.0 / (r * r)).collect();
        let (est, err) = richardson(&rs, &ys, &basis).unwrap();
        assert!((est + 1.5).abs() < 1e-11 && err < 1e-11, "{est} {err}");
    }

    #[test]
    fn richardson_short_ladder() {
        let k = Kernel::riesz(1, 0.5).unwrap();
        let basis = correction_basis(&k);
        let (est, err) = richardson(&[10.0, 20.0], &[1.1, 1.05], &basis).unwrap();
        // two points leave room for the constant term only
        assert!((est - 1.05).abs() < 1e-15 && (err - 0.05).abs() < 1e-12);
    }

    #[test]
    fn weighted_basis_intercept_is_exact_on_the_basis() {
        let k = Kernel::riesz(1, 0.5).unwrap();
        let basis: Vec<_> = correction_basis(&k).into_iter().take(3).collect();
        let rs = [8.0, 16.0, 32.0, 64.0, 128.0];
        let ys: Vec<f64> = rs.iter().map(|r: &f64| 0.25 - 1.0 / r + 4.0 * r.powf(-1.5)).collect();
        let est = weighted_basis_intercept(&rs, &ys, &[1.0, 2.0, 3.0, 4.0, 5.0], &basis).unwrap();
        assert!((est - 0.25).abs() < 1e-12, "{est}");
    }

    #[test]
    fn weighted_intercept_recovers_line_and_error() {
        let rs = [8.0, 16.0, 32.0, 64.0];
        let ys: Vec<f64> = rs.iter().map(|r| 2.0 - 3.0 / r).collect();
        let cov: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 0.01 } else { 0.0 }).collect()).collect();
        let (est, se) = weighted_intercept(&rs, &ys, &cov).unwrap();
        assert!((est - 2.0).abs() < 1e-12);
        // independent oracle: variance of the OLS intercept with equal weights
        let x: Vec<f64> = rs.iter().map(|r| 1.0 / r).collect();
        let mx = x.iter().sum::<f64>() / 4.0;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let var = 0.01 * (0.25 + mx * mx / sxx);
        assert!((se - var.sqrt()).abs() < 1e-12);
    }
}
