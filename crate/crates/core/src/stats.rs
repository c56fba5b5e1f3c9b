//! Small statistics helpers: ordered reductions, replica summaries, fits.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how callers parallelised the production of the terms.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean across replicas.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Covariance matrix of the column means of `rows` (replica x observable).
pub fn covariance_of_means(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let means: Vec<f64> = (0..m).map(|j| pairwise_sum(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()) / n as f64).collect();
    let mut cov = vec![vec![0.0; m]; m];
    if n < 2 {
        return cov;
    }
    for a in 0..m {
        for b in a..m {
            let terms: Vec<f64> = rows.iter().map(|r| (r[a] - means[a]) * (r[b] - means[b])).collect();
            let c = pairwise_sum(&terms) / ((n - 1) as f64 * n as f64);
            cov[a][b] = c;
            cov[b][a] = c;
        }
    }
    cov
}

/// Straight-line least squares fit y = intercept + slope * x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    ensure!(xs.len() == ys.len(), Argument, "fit_line: length mismatch");
    let n = xs.len();
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    ensure!(distinct.len() >= 2, Insufficient, "degenerate fit: fewer than 2 distinct abscissae");
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

/// Solve the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting.
pub(crate) fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("non-empty");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Argument("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, below) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (i, row) in below.iter_mut().enumerate() {
            let factor = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= factor * p;
            }
            b[col + 1 + i] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}
