//! Small numerical building blocks shared across modules.

use crate::{Error, Result};
use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 1024;

static LN_FACT: OnceLock<Vec<f64>> = OnceLock::new();

/// ln(n!) exact-cumulative for n < 1024, Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    let table = LN_FACT.get_or_init(|| {
        let mut t = vec![0.0f64; LN_FACT_TABLE];
        for k in 1..LN_FACT_TABLE {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    });
    if n < LN_FACT_TABLE {
        return table[n];
    }
    // error ~ 1/(1188 n^9), far below f64 resolution here
    let z = n as f64;
    let z2 = z * z;
    z * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI * z).ln() + 1.0 / (12.0 * z)
        - 1.0 / (360.0 * z * z2)
        + 1.0 / (1260.0 * z * z2 * z2)
        - 1.0 / (1680.0 * z * z2 * z2 * z2)
}

/// 16-point Gauss-Legendre rule on [-1, 1], nodes found by Newton iteration
/// on the Legendre recurrence (no baked-in decimal constants to mistype).
fn gl16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: OnceLock<([f64; 16], [f64; 16])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = 16usize;
        let mut nodes = [0.0f64; 16];
        let mut weights = [0.0f64; 16];
        for i in 0..n {
            // Chebyshev-like initial guess, then Newton on P_16
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl16_panel<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
    let (nodes, weights) = gl16();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = [0.0f64; N];
    for i in 0..16 {
        let v = f(mid + half * nodes[i]);
        for j in 0..N {
            acc[j] += weights[i] * v[j];
        }
    }
    for j in 0..N {
        acc[j] *= half;
    }
    acc
}

/// Adaptive bisection quadrature for a vector-valued integrand. The
/// tolerance is absolute and budgeted proportionally to panel length.
pub fn integrate_adaptive<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    tol: f64,
) -> Result<[f64; N]> {
    if !(b >= a) {
        return Err(Error::InvalidParameter(format!(
            "integration interval [{a}, {b}] is reversed"
        )));
    }
    if a == b {
        return Ok([0.0; N]);
    }
    let total_len = b - a;
    let whole = gl16_panel(&mut f, a, b);
    let mut acc = [0.0f64; N];
    // (a, b, coarse estimate, depth)
    let mut stack: Vec<(f64, f64, [f64; N], u32)> = vec![(a, b, whole, 0)];
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl16_panel(&mut f, lo, mid);
        let right = gl16_panel(&mut f, mid, hi);
        let mut err = 0.0f64;
        for j in 0..N {
            err = err.max((left[j] + right[j] - coarse[j]).abs());
        }
        if err <= tol * ((hi - lo) / total_len).max(1e-3) || hi - lo < 1e-13 * total_len {
            for j in 0..N {
                acc[j] += left[j] + right[j];
            }
        } else {
            if depth >= 48 {
                return Err(Error::QuadratureNotConverged(format!(
                    "panel [{lo}, {hi}] still off by {err:.3e} at depth {depth}"
                )));
            }
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(acc)
}

/// Halton low-discrepancy point, radical-inverse in the given base.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0f64;
    let mut r = 0.0f64;
    let bf = base as f64;
    while index > 0 {
        f /= bf;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Rotation block [[cos, sin], [-sin, cos]].
pub fn rot2(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    [[c, s], [-s, c]]
}
