//! Coherent-state overlaps, displaced-parity matrix elements, and Gaussian
//! characteristic-function kernels.
//!
//! Conventions used throughout: D(b) = exp(b a+ - b* a), the parity point
//! operator is Pi(b) = D(b) (-1)^n D(-b), quadratures are q = (a + a+)/sqrt(2)
//! and p = -i(a - a+)/sqrt(2), and the characteristic function of an operator
//! X is chi(u, v) = Tr[X exp(i(u p - v q))] = Tr[X D(L)] with
//! L = -(u + iv)/sqrt(2).

use crate::numerics::{ln_factorial, mat2_mul, mat2_transpose, rot2};
use crate::{Error, Result};
use num_complex::Complex64 as C64;

pub use crate::numerics::Mat2;

/// Hard cap on the displaced-parity ladder sum. Generous: for the |b| <= 3,
/// index <= 120 regime the sum converges in well under 100 terms.
const PARITY_TERM_CAP: usize = 500;
const PARITY_TOL: f64 = 1e-12;

/// Qubit basis label. `Up` pairs with the +D coherent branch, `Down` with -D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    /// Coherent amplitude of this spin's oscillator branch, +D or -D.
    pub fn branch_amplitude(self, d: f64) -> f64 {
        self.sign() * d
    }
}

/// The entangled qubit-oscillator state (|up, D> + |down, -D>)/sqrt(2).
/// Normalization is exact for every D because the spin components are
/// orthogonal.
#[derive(Clone, Copy, Debug)]
pub struct CatState {
    d: f64,
}

impl CatState {
    pub fn new(d: f64) -> Result<Self> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cat displacement must be finite and >= 0, got {d}"
            )));
        }
        Ok(CatState { d })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// Fock amplitude <n|D> = exp(-D^2/2) D^n / sqrt(n!) of the +D branch.
    pub fn branch_weight(&self, n: usize) -> f64 {
        if self.d == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (-0.5 * self.d * self.d + n as f64 * self.d.ln() - 0.5 * ln_factorial(n)).exp()
    }
}

/// Generalized Laguerre polynomial L_p^(l)(x) by the three-term recurrence.
/// The recurrence is the polynomial's defining one and stays valid for
/// negative integer l, which the displaced-parity ladder formulas need.
pub fn laguerre(p: usize, l: i64, x: f64) -> f64 {
    let alpha = l as f64;
    if p == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0f64;
    let mut lcur = 1.0 + alpha - x;
    for k in 1..p {
        let kf = k as f64;
        let lnext = ((2.0 * kf + 1.0 + alpha - x) * lcur - (kf + alpha) * lm1) / (kf + 1.0);
        lm1 = lcur;
        lcur = lnext;
    }
    lcur
}

/// <xi1|xi2> = exp(-|xi1|^2/2 - |xi2|^2/2 + conj(xi1) xi2).
pub fn coherent_overlap(xi1: C64, xi2: C64) -> C64 {
    (-0.5 * xi1.norm_sqr() - 0.5 * xi2.norm_sqr() + xi1.conj() * xi2).exp()
}

/// <xi1|Pi(b)|xi2>. Uses Pi(b)|xi> = exp(b* xi - b xi*) |2b - xi>, which
/// follows from the displacement composition law.
pub fn displaced_parity_coherent(beta: C64, xi1: C64, xi2: C64) -> C64 {
    let phase = (beta.conj() * xi2 - beta * xi2.conj()).exp();
    phase * coherent_overlap(xi1, 2.0 * beta - xi2)
}

/// <s|D(b)|r>. For s >= r this is
///   prod_{j=r+1..s} (b / sqrt(j)) * exp(-|b|^2/2) * L_r^(s-r)(|b|^2);
/// the s < r case routes through conj(<r|D(-b)|s>) so there is a single
/// evaluation path. The prefactor is accumulated as a product of b/sqrt(j)
/// factors, which keeps intermediates scaled even for s - r of a few hundred.
pub fn displaced_fock_element(s: usize, r: usize, beta: C64) -> C64 {
    if s < r {
        return displaced_fock_element(r, s, -beta).conj();
    }
    let x = beta.norm_sqr();
    let mut pref = C64::new((-0.5 * x).exp(), 0.0);
    for j in (r + 1)..=s {
        pref *= beta / (j as f64).sqrt();
    }
    pref * laguerre(r, (s - r) as i64, x)
}

/// <m|Pi(b)|n>, summing the parity ladder in pairs j = 2h, 2h + 1. Each pair
/// collapses to one of four closed bracket forms depending on where m and n
/// sit relative to k = 2h; the four cases cover every (m, n, k) exactly once.
/// Terms decay superexponentially once k passes |b|^2 + max(m, n); the sum
/// stops after two consecutive increments below 1e-12 and errors out at the
/// term cap instead of returning a half-converged value.
pub fn displaced_parity_fock(m: usize, n: usize, beta: C64) -> Result<C64> {
    let x = beta.norm_sqr();
    if x == 0.0 {
        // Pi(0) = (-1)^n
        return Ok(if m == n {
            C64::new(if m % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            C64::new(0.0, 0.0)
        });
    }
    let emx = (-x).exp();
    let mut total = C64::new(0.0, 0.0);
    let mut small_streak = 0usize;
    for half in 0..PARITY_TERM_CAP {
        let k = 2 * half;
        let term = if m > k && n > k {
            let mut pref = C64::new(emx, 0.0);
            for j in (k + 1)..=m {
                pref *= beta / (j as f64).sqrt();
            }
            for j in (k + 1)..=n {
                pref *= beta.conj() / (j as f64).sqrt();
            }
            let bracket = laguerre(k, (m - k) as i64, x) * laguerre(k, (n - k) as i64, x)
                - (k as f64 + 1.0) / x
                    * laguerre(k + 1, (m - k) as i64 - 1, x)
                    * laguerre(k + 1, (n - k) as i64 - 1, x);
            pref * bracket
        } else if m <= k && n <= k {
            let mut pref = C64::new(emx, 0.0);
            for j in (m + 1)..=k {
                pref *= -beta.conj() / (j as f64).sqrt();
            }
            for j in (n + 1)..=k {
                pref *= -beta / (j as f64).sqrt();
            }
            let bracket = laguerre(m, (k - m) as i64, x) * laguerre(n, (k - n) as i64, x)
                - x / (k as f64 + 1.0)
                    * laguerre(m, (k - m) as i64 + 1, x)
                    * laguerre(n, (k - n) as i64 + 1, x);
            pref * bracket
        } else if m > k {
            // n <= k < m
            let sign = if (k - n) % 2 == 0 { 1.0 } else { -1.0 };
            let mut pref = C64::new(sign * emx, 0.0);
            for j in (n + 1)..=m {
                pref *= beta / (j as f64).sqrt();
            }
            let bracket = laguerre(k, (m - k) as i64, x) * laguerre(n, (k - n) as i64, x)
                + laguerre(k + 1, (m - k) as i64 - 1, x) * laguerre(n, (k - n) as i64 + 1, x);
            pref * bracket
        } else {
            // m <= k < n
            let sign = if (k - m) % 2 == 0 { 1.0 } else { -1.0 };
            let mut pref = C64::new(sign * emx, 0.0);
            for j in (m + 1)..=n {
                pref *= beta.conj() / (j as f64).sqrt();
            }
            let bracket = laguerre(m, (k - m) as i64, x) * laguerre(k, (n - k) as i64, x)
                + laguerre(m, (k - m) as i64 + 1, x) * laguerre(k + 1, (n - k) as i64 - 1, x);
            pref * bracket
        };
        total += term;
        if term.norm() < PARITY_TOL {
            small_streak += 1;
            // require the ladder to have cleared both indices so an
            // accidentally tiny early term cannot end the sum
            if small_streak >= 2 && k >= m.max(n) {
                return Ok(total);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::TruncationNotConverged(format!(
        "displaced parity element ({m}, {n}) at beta = {beta} still moving after {PARITY_TERM_CAP} ladder pairs"
    )))
}

/// Gaussian characteristic-function kernel
///   chi(u, v) = scale * exp(-z^T quad z + i lin . z),   z = (u, v).
///
/// quad is real symmetric. lin and scale are stored complex because a single
/// coherent block |xi1><xi2| is not Hermitian; for any Hermitian combination
/// they come out real (tested). Tr X = chi(0, 0) = scale.
#[derive(Clone, Copy, Debug)]
pub struct GaussianKernel {
    pub quad: Mat2,
    pub lin: [C64; 2],
    pub scale: C64,
}

impl GaussianKernel {
    /// Kernel of the operator |xi1><xi2|.
    pub fn coherent_pair(xi1: C64, xi2: C64) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        let i = C64::new(0.0, 1.0);
        GaussianKernel {
            quad: [[0.25, 0.0], [0.0, 0.25]],
            lin: [
                -i * (xi1 - xi2.conj()) / sqrt2,
                -(xi1 + xi2.conj()) / sqrt2,
            ],
            scale: coherent_overlap(xi2, xi1),
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> C64 {
        let z = [u, v];
        let mut quad_form = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                quad_form += z[a] * self.quad[a][b] * z[b];
            }
        }
        let i = C64::new(0.0, 1.0);
        (C64::new(-quad_form, 0.0) + i * (self.lin[0] * u + self.lin[1] * v)).exp() * self.scale
    }

    /// Tr X, since chi(0, 0) traces the operator.
    pub fn trace(&self) -> C64 {
        self.scale
    }

    pub fn scaled(&self, factor: C64) -> Self {
        GaussianKernel {
            quad: self.quad,
            lin: self.lin,
            scale: self.scale * factor,
        }
    }

    /// Gaussian-channel update: the argument is contracted and rotated,
    /// z -> c R(angle)^T z, and the added-noise form wbar joins the
    /// quadratic block:
    ///   quad' = wbar + c^2 R quad R^T,  lin' = c R lin,  scale' = scale.
    pub fn evolved(&self, contraction: f64, angle: f64, wbar: &Mat2) -> Self {
        let r = rot2(angle);
        let rq = mat2_mul(&r, &self.quad);
        let rqrt = mat2_mul(&rq, &mat2_transpose(&r));
        let c = contraction;
        let mut quad = *wbar;
        for a in 0..2 {
            for b in 0..2 {
                quad[a][b] += c * c * rqrt[a][b];
            }
        }
        let lin = [
            c * (r[0][0] * self.lin[0] + r[0][1] * self.lin[1]),
            c * (r[1][0] * self.lin[0] + r[1][1] * self.lin[1]),
        ];
        GaussianKernel { quad, lin, scale: self.scale }
    }
}

/// <Pi(b)> of the operator behind the kernel, i.e. (pi/2) times its Wigner
/// transform at b. Closed Gaussian integral of
/// (1/4pi) Int chi(u, v) exp(-i(u p - v q)) du dv at q = sqrt(2) Re b,
/// p = sqrt(2) Im b:
///   scale / (4 sqrt(det Q)) * exp(-(1/4) m^T Q^{-1} m),
/// m = (lin_u - sqrt(2) Im b, lin_v + sqrt(2) Re b).
pub fn wigner_from_kernel(kernel: &GaussianKernel, beta: C64) -> Result<C64> {
    let q = &kernel.quad;
    let det = q[0][0] * q[1][1] - q[0][1] * q[1][0];
    if q[0][0] <= 0.0 || det <= 0.0 {
        return Err(Error::NonintegrableKernel(format!(
            "quadratic block not positive definite: diag = ({}, {}), det = {det}",
            q[0][0], q[1][1]
        )));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let m = [
        kernel.lin[0] - sqrt2 * beta.im,
        kernel.lin[1] + sqrt2 * beta.re,
    ];
    // Q^{-1} contracted with m on both sides
    let quad_form = (q[1][1] * m[0] * m[0] - (q[0][1] + q[1][0]) * m[0] * m[1]
        + q[0][0] * m[1] * m[1])
        / det;
    Ok(kernel.scale / (4.0 * det.sqrt()) * (-0.25 * quad_form).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_adaptive;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn assert_c_close(a: C64, b: C64, eps: f64) {
        assert!(
            (a - b).norm() <= eps,
            "complex values differ: {a} vs {b} (|diff| = {:.3e}, eps = {eps:.1e})",
            (a - b).norm()
        );
    }

    #[test]
    fn laguerre_small_orders_match_hand_values() {
        assert_abs_diff_eq!(laguerre(0, 3, 7.5), 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(laguerre(1, 0, 2.0), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laguerre(2, 0, 2.0), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(laguerre(2, 1, 0.5), 1.625, epsilon = 1e-14);
        // L_3^(2)(x) = 10 - 10x + 5x^2/2 - x^3/6 at x = 1
        assert_abs_diff_eq!(laguerre(3, 2, 1.0), 10.0 - 10.0 + 2.5 - 1.0 / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn laguerre_negative_superscript_identity() {
        // L_n^(-m)(x) = (-x)^m (n-m)!/n! L_{n-m}^(m)(x) for n >= m
        for &(n, m) in &[(3usize, 1usize), (5, 2), (7, 3), (9, 4)] {
            for &x in &[0.3, 1.7, 4.2] {
                let lhs = laguerre(n, -(m as i64), x);
                let mut ratio = 1.0;
                for j in (n - m + 1)..=n {
                    ratio /= j as f64;
                }
                let rhs = (-x).powi(m as i32) * ratio * laguerre(n - m, m as i64, x);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn laguerre_matches_series_sum(p in 0usize..8, l in 0i64..5, x in 0.0f64..8.0) {
            // direct series: sum_k (-1)^k C(p + l, p - k) x^k / k!
            let mut sum = 0.0f64;
            for k in 0..=p {
                let mut binom = 1.0f64;
                // C(p + l, p - k) with integer l >= 0
                let top = p as i64 + l;
                let pick = (p - k) as i64;
                for j in 0..pick {
                    binom *= (top - j) as f64 / (pick - j) as f64;
                }
                let mut xk = 1.0f64;
                for j in 0..k {
                    xk *= x / (j as f64 + 1.0);
                }
                sum += if k % 2 == 0 { binom * xk } else { -binom * xk };
            }
            let got = laguerre(p, l, x);
            prop_assert!((got - sum).abs() <= 1e-10 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn coherent_overlap_worked_value() {
        // <1+i|1-i> = exp(-2 - 2i)
        let got = coherent_overlap(c(1.0, 1.0), c(1.0, -1.0));
        let want = (-2.0f64).exp() * c(2.0f64.cos(), -(2.0f64.sin()));
        assert_c_close(got, want, 1e-15);
    }

    #[test]
    fn coherent_overlap_is_normalized_and_conjugate_symmetric() {
        let xi = c(0.7, -1.3);
        assert_c_close(coherent_overlap(xi, xi), c(1.0, 0.0), 1e-15);
        let a = c(0.4, 0.9);
        let b = c(-1.1, 0.2);
        assert_c_close(coherent_overlap(a, b), coherent_overlap(b, a).conj(), 1e-15);
    }

    proptest! {
        #[test]
        fn coherent_overlap_within_unit_disk(
            ar in -2.0f64..2.0, ai in -2.0f64..2.0,
            br in -2.0f64..2.0, bi in -2.0f64..2.0,
        ) {
            let ov = coherent_overlap(c(ar, ai), c(br, bi));
            prop_assert!(ov.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn displaced_parity_coherent_reduces_to_bare_parity_at_origin() {
        let xi1 = c(0.8, -0.4);
        let xi2 = c(-0.3, 1.1);
        // Pi(0)|xi> = |-xi>
        assert_c_close(
            displaced_parity_coherent(c(0.0, 0.0), xi1, xi2),
            coherent_overlap(xi1, -xi2),
            1e-15,
        );
    }

    #[test]
    fn displaced_parity_coherent_is_hermitian() {
        let beta = c(0.6, -0.9);
        let xi1 = c(1.2, 0.3);
        let xi2 = c(-0.5, 0.7);
        assert_c_close(
            displaced_parity_coherent(beta, xi1, xi2),
            displaced_parity_coherent(beta, xi2, xi1).conj(),
            1e-14,
        );
    }

    #[test]
    fn displaced_parity_coherent_matches_fock_expansion() {
        let cutoff = 48usize;
        for &(beta, xi1, xi2) in &[
            (c(0.5, 0.2), c(1.0, -0.3), c(-0.8, 0.6)),
            (c(-0.4, 0.9), c(0.0, 0.0), c(1.2, 0.5)),
            (c(1.1, -0.6), c(-0.7, -0.7), c(0.3, 1.0)),
        ] {
            // expand both coherent states in Fock space and contract through
            // the ladder-sum matrix elements
            let coeff = |xi: C64| {
                let mut v = vec![C64::new(0.0, 0.0); cutoff];
                let mut cur = C64::new((-0.5 * xi.norm_sqr()).exp(), 0.0);
                for (n, slot) in v.iter_mut().enumerate() {
                    *slot = cur;
                    cur *= xi / ((n + 1) as f64).sqrt();
                }
                v
            };
            let c1 = coeff(xi1);
            let c2 = coeff(xi2);
            let mut sum = C64::new(0.0, 0.0);
            for m in 0..cutoff {
                for n in 0..cutoff {
                    sum += c1[m].conj() * c2[n] * displaced_parity_fock(m, n, beta).unwrap();
                }
            }
            assert_c_close(displaced_parity_coherent(beta, xi1, xi2), sum, 1e-9);
        }
    }

    #[test]
    fn displaced_fock_element_identity_at_zero() {
        for s in 0..6 {
            for r in 0..6 {
                let want = if s == r { 1.0 } else { 0.0 };
                assert_c_close(displaced_fock_element(s, r, c(0.0, 0.0)), c(want, 0.0), 1e-15);
            }
        }
    }

    #[test]
    fn displaced_fock_element_known_entries() {
        let beta = c(0.9, -0.5);
        let x = beta.norm_sqr();
        // <1|D|0> = b exp(-x/2), <0|D|r> = (-b*)^r exp(-x/2)/sqrt(r!)
        assert_c_close(
            displaced_fock_element(1, 0, beta),
            beta * (-0.5 * x).exp(),
            1e-15,
        );
        let r = 5usize;
        let mut want = C64::new((-0.5 * x).exp(), 0.0);
        for j in 1..=r {
            want *= -beta.conj() / (j as f64).sqrt();
        }
        assert_c_close(displaced_fock_element(0, r, beta), want, 1e-15);
    }

    #[test]
    fn displaced_fock_columns_are_unit_vectors() {
        // D is unitary, so each column has unit norm once the ladder is summed far enough
        let beta = c(1.3, 0.8);
        for r in [0usize, 3, 11] {
            let mut norm = 0.0;
            for s in 0..80 {
                norm += displaced_fock_element(s, r, beta).norm_sqr();
            }
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn displaced_parity_fock_at_origin_is_signed_identity() {
        for m in 0..5 {
            for n in 0..5 {
                let want = if m == n {
                    if m % 2 == 0 { 1.0 } else { -1.0 }
                } else {
                    0.0
                };
                assert_c_close(displaced_parity_fock(m, n, c(0.0, 0.0)).unwrap(), c(want, 0.0), 0.0);
            }
        }
    }

    #[test]
    fn displaced_parity_fock_vacuum_expectation() {
        for &beta in &[c(0.3, 0.0), c(0.0, 1.2), c(-0.9, 0.7)] {
            let want = (-2.0 * beta.norm_sqr()).exp();
            assert_c_close(displaced_parity_fock(0, 0, beta).unwrap(), c(want, 0.0), 1e-14);
        }
    }

    #[test]
    fn displaced_parity_fock_is_hermitian() {
        let beta = c(0.8, -1.1);
        for m in [0usize, 2, 7, 15] {
            for n in [1usize, 3, 8, 14] {
                let a = displaced_parity_fock(m, n, beta).unwrap();
                let b = displaced_parity_fock(n, m, beta).unwrap();
                assert_c_close(a, b.conj(), 1e-13);
            }
        }
    }

    #[test]
    fn displaced_parity_fock_matches_ladder_contraction() {
        // independent route: <m|Pi|n> = sum_j (-1)^j <m|D|j> conj(<n|D|j>)
        let cutoff = 140usize;
        for &beta in &[c(0.5, 0.4), c(-1.6, 0.9), c(2.4, -1.3)] {
            for &(m, n) in &[(0usize, 0usize), (1, 0), (3, 2), (7, 7), (12, 5), (20, 17)] {
                let mut sum = C64::new(0.0, 0.0);
                for j in 0..cutoff {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sum += sign
                        * displaced_fock_element(m, j, beta)
                        * displaced_fock_element(n, j, beta).conj();
                }
                let closed = displaced_parity_fock(m, n, beta).unwrap();
                assert_c_close(closed, sum, 1e-8);
            }
        }
    }

    #[test]
    fn kernel_trace_is_coherent_overlap() {
        let xi1 = c(0.8, -0.2);
        let xi2 = c(-0.4, 0.5);
        let k = GaussianKernel::coherent_pair(xi1, xi2);
        // Tr |xi1><xi2| = <xi2|xi1>
        assert_c_close(k.trace(), coherent_overlap(xi2, xi1), 1e-15);
        assert_c_close(k.eval(0.0, 0.0), k.trace(), 1e-15);
    }

    #[test]
    fn kernel_of_projector_has_real_lin_and_scale() {
        let xi = c(0.9, -1.4);
        let k = GaussianKernel::coherent_pair(xi, xi);
        assert!(k.lin[0].im.abs() < 1e-15 && k.lin[1].im.abs() < 1e-15);
        assert!(k.scale.im.abs() < 1e-15);
        assert_abs_diff_eq!(k.scale.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kernel_eval_matches_displacement_expectation() {
        // chi(u, v) = <xi|D(L)|xi> with L = -(u + iv)/sqrt(2)
        let xi = c(0.6, 0.3);
        let k = GaussianKernel::coherent_pair(xi, xi);
        for &(u, v) in &[(0.4, -0.9), (1.3, 0.2), (-0.5, -0.6)] {
            let lam = -c(u, v) / std::f64::consts::SQRT_2;
            // <xi|D(L)|xi> = exp((L xi* - L* xi)/2) <xi|L + xi>
            let want = ((lam * xi.conj() - lam.conj() * xi) / 2.0).exp()
                * coherent_overlap(xi, lam + xi);
            assert_c_close(k.eval(u, v), want, 1e-14);
        }
    }

    #[test]
    fn wigner_of_coherent_projector_is_displaced_gaussian() {
        let xi = c(0.7, -0.4);
        let k = GaussianKernel::coherent_pair(xi, xi);
        for &beta in &[c(0.0, 0.0), c(0.7, -0.4), c(-0.3, 1.0)] {
            let want = (-2.0 * (beta - xi).norm_sqr()).exp();
            let got = wigner_from_kernel(&k, beta).unwrap();
            assert_c_close(got, c(want, 0.0), 1e-13);
        }
    }

    #[test]
    fn wigner_from_kernel_matches_direct_quadrature() {
        // kernel with anisotropic quadratic block, checked against the
        // defining double integral
        let kernel = GaussianKernel {
            quad: [[0.6, 0.0], [0.0, 0.4]],
            lin: [c(0.3, 0.0), c(-0.2, 0.0)],
            scale: c(1.1, 0.0),
        };
        let beta = c(0.35, -0.15);
        let q = std::f64::consts::SQRT_2 * beta.re;
        let p = std::f64::consts::SQRT_2 * beta.im;
        let inner = |u: f64| {
            integrate_adaptive(
                |v: f64| {
                    let val = kernel.eval(u, v) * (C64::new(0.0, -(u * p - v * q))).exp();
                    [val.re, val.im]
                },
                -14.0,
                14.0,
                1e-11,
            )
            .unwrap()
        };
        let outer = integrate_adaptive(|u| inner(u), -12.0, 12.0, 1e-10).unwrap();
        let want = c(outer[0], outer[1]) / (4.0 * std::f64::consts::PI);
        let got = wigner_from_kernel(&kernel, beta).unwrap();
        assert_c_close(got, want, 1e-8);
    }

    #[test]
    fn wigner_rejects_nonintegrable_kernels() {
        let bad = GaussianKernel {
            quad: [[-0.1, 0.0], [0.0, 0.4]],
            lin: [c(0.0, 0.0), c(0.0, 0.0)],
            scale: c(1.0, 0.0),
        };
        assert!(matches!(
            wigner_from_kernel(&bad, c(0.0, 0.0)),
            Err(Error::NonintegrableKernel(_))
        ));
        let degenerate = GaussianKernel {
            quad: [[0.3, 0.3], [0.3, 0.3]],
            lin: [c(0.0, 0.0), c(0.0, 0.0)],
            scale: c(1.0, 0.0),
        };
        assert!(wigner_from_kernel(&degenerate, c(0.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn kernel_wigner_agrees_with_parity_closed_form(
            br in -1.5f64..1.5, bi in -1.5f64..1.5,
            x1r in -1.5f64..1.5, x1i in -1.5f64..1.5,
            x2r in -1.5f64..1.5, x2i in -1.5f64..1.5,
        ) {
            // Tr[|xi1><xi2| Pi(b)] = <xi2|Pi(b)|xi1>, both routes closed-form
            let beta = c(br, bi);
            let xi1 = c(x1r, x1i);
            let xi2 = c(x2r, x2i);
            let k = GaussianKernel::coherent_pair(xi1, xi2);
            let via_kernel = wigner_from_kernel(&k, beta).unwrap();
            let direct = displaced_parity_coherent(beta, xi2, xi1);
            prop_assert!((via_kernel - direct).norm() <= 1e-12);
        }
    }

    #[test]
    fn evolved_kernel_with_pure_rotation_rotates_wigner() {
        // no contraction, no added noise: the Wigner function rotates rigidly
        let xi = c(0.9, 0.2);
        let k = GaussianKernel::coherent_pair(xi, xi);
        let angle = 0.7;
        let evolved = k.evolved(1.0, angle, &[[0.0; 2]; 2]);
        for &beta in &[c(0.5, 0.1), c(-0.2, 0.8)] {
            let rotated = beta * c(0.0, angle).exp();
            let got = wigner_from_kernel(&evolved, beta).unwrap();
            let want = wigner_from_kernel(&k, rotated).unwrap();
            assert_c_close(got, want, 1e-12);
        }
    }

    #[test]
    fn cat_state_weights_are_poissonian() {
        let cat = CatState::new(2.0).unwrap();
        let mut norm = 0.0;
        for n in 0..64 {
            norm += cat.branch_weight(n).powi(2);
        }
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cat.branch_weight(0), (-2.0f64).exp(), epsilon = 1e-15);
        assert!(CatState::new(-0.5).is_err());
        assert!(CatState::new(f64::NAN).is_err());
    }

    #[test]
    fn spin_branch_amplitudes() {
        assert_abs_diff_eq!(Spin::Up.branch_amplitude(2.0), 2.0, epsilon = 0.0);
        assert_abs_diff_eq!(Spin::Down.branch_amplitude(2.0), -2.0, epsilon = 0.0);
    }
}
