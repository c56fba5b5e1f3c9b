//! Integrals of the kernel against the uniform background on a cube.
//!
//! Box integrals of a homogeneous kernel reduce to face integrals through
//! div(x g) = (d - s) g (Riesz) or div(x g) = d g - 1 (log). The cube
//! self-interaction is computed with a Duffy split, which makes the radial
//! part exact for polynomial weights.

use crate::kernel::{Kernel, KernelFamily};
use crate::quad::{adaptive, rule};

const TOL: f64 = 1e-13;

/// `int_0^L (h^2 + y^2)^{-s/2} dy` with y = h sinh(u).
fn riesz_line(h: f64, len: f64, s: f64) -> f64 {
    if len == 0.0 {
        return 0.0;
    }
    let umax = (len / h).asinh();
    let inner = adaptive(|u: f64| u.cosh().powf(1.0 - s), 0.0, umax, TOL, TOL).expect("smooth integrand");
    h.powf(1.0 - s) * inner
}

/// `int_0^L -log sqrt(h^2 + y^2) dy`.
fn log_line(h: f64, len: f64) -> f64 {
    if len == 0.0 {
        return 0.0;
    }
    -(len * 0.5 * (h * h + len * len).ln() - len + h * (len / h).atan())
}

/// `int_{[0,L1]x[0,L2]} (h^2 + |y|^2)^{-s/2} dy` in polar coordinates
/// around the corner, with the radial integral in closed form.
fn riesz_face(h: f64, l1: f64, l2: f64, s: f64) -> f64 {
    if l1 == 0.0 || l2 == 0.0 {
        return 0.0;
    }
    let radial = |rho: f64| {
        if (s - 2.0).abs() < 1e-14 {
            0.5 * (1.0 + (rho / h).powi(2)).ln()
        } else {
            ((h * h + rho * rho).powf(1.0 - 0.5 * s) - h.powf(2.0 - s)) / (2.0 - s)
        }
    };
    let split = (l2 / l1).atan();
    let t1 = adaptive(|th: f64| radial(l1 / th.cos()), 0.0, split, TOL, TOL).expect("smooth integrand");
    let t2 = adaptive(|th: f64| radial(l2 / th.sin()), split, std::f64::consts::FRAC_PI_2, TOL, TOL).expect("smooth integrand");
    t1 + t2
}

/// `int_{prod [0, a_i]} g(x) dx`.
pub fn corner_box(kernel: &Kernel, ext: &[f64]) -> f64 {
    if ext.iter().any(|&a| a <= 0.0) {
        return 0.0;
    }
    let s = kernel.s();
    match (kernel.family(), ext.len()) {
        (_, 1) => kernel.moment_primitive(0, ext[0]),
        (KernelFamily::Log2d, 2) => {
            let (a, b) = (ext[0], ext[1]);
            0.5 * (a * log_line(a, b) + b * log_line(b, a) + a * b)
        }
        (KernelFamily::Riesz, 2) => {
            let (a, b) = (ext[0], ext[1]);
            (a * riesz_line(a, b, s) + b * riesz_line(b, a, s)) / (2.0 - s)
        }
        (KernelFamily::Riesz, 3) => {
            let (a, b, c) = (ext[0], ext[1], ext[2]);
            (a * riesz_face(a, b, c, s) + b * riesz_face(b, a, c, s) + c * riesz_face(c, a, b, s)) / (3.0 - s)
        }
        (f, d) => unreachable!("kernel {f:?} does not live in dimension {d}"),
    }
}

/// `int_{C_R} g(p - y) dy` for `p` given relative to the cube center.
pub fn point_background(kernel: &Kernel, p: &[f64], side: f64) -> f64 {
    let d = p.len();
    let half = 0.5 * side;
    let mut total = 0.0;
    let mut ext = vec![0.0; d];
    for mask in 0..(1usize << d) {
        for (i, e) in ext.iter_mut().enumerate() {
            *e = if mask >> i & 1 == 1 { half - p[i] } else { half + p[i] };
        }
        total += corner_box(kernel, &ext);
    }
    total
}

/// `iint_{C_R^2} g(x - y) dx dy = int_{[-R,R]^d} g(v) prod (R - |v_i|) dv`.
pub fn background_background(kernel: &Kernel, side: f64) -> f64 {
    let d = kernel.dim();
    let factors = vec![vec![side, -1.0]; d];
    (1u32 << d) as f64 * cube_polynomial_integral(kernel, side, &factors)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `int_{[0,L]^d} g(u) prod_i p_i(u_i) du` where `factors[i]` holds the
/// monomial coefficients of `p_i`.
pub fn cube_polynomial_integral(kernel: &Kernel, len: f64, factors: &[Vec<f64>]) -> f64 {
    let d = factors.len();
    assert_eq!(d, kernel.dim());
    let (nodes, weights) = rule(24);
    let to_unit = |x: f64| 0.5 * (x + 1.0);

    // Sector m: u_m = L t, u_j = L t a_j (j != m), Jacobian L^d t^{d-1}.
    let radial = |coeffs: &[f64], w: f64| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let p = (d + j) as f64;
                let base =
                    if kernel.is_log() { -(len * w).ln() / p + 1.0 / (p * p) } else { (len * w).powf(-kernel.s()) / (p - kernel.s()) };
                c * base
            })
            .sum::<f64>()
            * len.powi(d as i32)
    };
    let scaled = |coeffs: &[f64], a: f64| -> Vec<f64> {
        // p(L t a) as polynomial in t
        let mut out = Vec::with_capacity(coeffs.len());
        let mut f = 1.0;
        for c in coeffs {
            out.push(c * f);
            f *= len * a;
        }
        out
    };

    let mut total = 0.0;
    for m in 0..d {
        match d {
            1 => total += radial(&scaled(&factors[0], 1.0), 1.0),
            2 => {
                let other = 1 - m;
                for (x, wx) in nodes.iter().zip(weights) {
                    let a = to_unit(*x);
                    let q = poly_mul(&scaled(&factors[m], 1.0), &scaled(&factors[other], a));
                    total += 0.5 * wx * radial(&q, (1.0 + a * a).sqrt());
                }
            }
            3 => {
                let others: Vec<usize> = (0..3).filter(|&j| j != m).collect();
                for (x, wx) in nodes.iter().zip(weights) {
                    let a = to_unit(*x);
                    let qa = poly_mul(&scaled(&factors[m], 1.0), &scaled(&factors[others[0]], a));
                    for (y, wy) in nodes.iter().zip(weights) {
                        let b = to_unit(*y);
                        let q = poly_mul(&qa, &scaled(&factors[others[1]], b));
                        total += 0.25 * wx * wy * radial(&q, (1.0 + a * a + b * b).sqrt());
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    total
}
