//! Brownian motion of the oscillator branch: an Ohmic bath with cutoff
//! ratio x = omega_c/omega_O drives time-dependent diffusion Delta(t),
//! Xi(t) and damping gamma(t). Gaussian Weyl kernels propagate each cat
//! block exactly, so no Fock truncation enters the production path.

use crate::bell::{CorrelationModel, SearchBox};
use crate::numerics::{integrate_adaptive, mat2_mul, mat2_transpose, rot2, Mat2};
use crate::phase_space::{wigner_from_kernel, CatState, GaussianKernel, Spin};
use crate::{Error, Result};
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::sync::RwLock;

#[derive(Clone, Copy, Debug)]
pub struct BrownianParams {
    /// Dimensionless system-bath coupling.
    pub g: f64,
    /// Cutoff ratio omega_c / omega_O. Large x is the Markovian regime.
    pub x: f64,
    /// Bath temperature in cutoff units, k_B T / (hbar omega_c).
    pub k_t: f64,
    /// Oscillator frequency; everything else is expressed through it.
    pub omega_o: f64,
    /// Off by default: the damping exponent Gamma(t) is kept at zero (the
    /// short-time setting). Switching it on folds the quadrature-computed
    /// Gamma into both the kernel contraction and the noise integral.
    pub include_gamma_integral: bool,
}

impl BrownianParams {
    pub fn new(g: f64, x: f64, k_t: f64) -> Result<Self> {
        if !(g > 0.0) || !(x > 0.0) || !(k_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling, cutoff ratio and temperature must all be positive, got g={g}, x={x}, kT={k_t}"
            )));
        }
        Ok(BrownianParams { g, x, k_t, omega_o: 1.0, include_gamma_integral: false })
    }

    pub fn with_gamma_integral(mut self) -> Self {
        self.include_gamma_integral = true;
        self
    }

    /// g^2 omega_O x^2 / (2 (1 + x^2)), the common rate prefactor.
    fn prefactor(&self) -> f64 {
        self.g * self.g * self.omega_o * self.x * self.x / (2.0 * (1.0 + self.x * self.x))
    }
}

/// The coefficient vector (Delta, Xi, gamma) at scaled time tau = omega_c t.
#[derive(Clone, Copy, Debug)]
pub struct BrownianCoefficients {
    pub delta: f64,
    pub xi: f64,
    pub gamma: f64,
}

/// Weak-coupling Ohmic coefficients. All three share the shape
///   pref * f * { a - e^{-tau} [ a cos(tau/x) + b sin(tau/x) ] }
/// with (a, b, f) = (x, -1, kT) for Delta, (1, x, kT) for Xi and (1, x, 1)
/// for gamma.
pub fn coefficients(tau: f64, p: &BrownianParams) -> Result<BrownianCoefficients> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
    }
    let pref = p.prefactor();
    let decay = (-tau).exp();
    let (c, s) = {
        let phase = tau / p.x;
        (phase.cos(), phase.sin())
    };
    let delta = pref * p.k_t * (p.x - decay * (p.x * c - s));
    let xi = pref * p.k_t * (1.0 - decay * (c + p.x * s));
    let gamma = pref * (1.0 - decay * (c + p.x * s));
    Ok(BrownianCoefficients { delta, xi, gamma })
}

/// Damping exponent Gamma(t) = 2 int_0^t gamma dt', in closed form (the
/// gamma integrand is elementary). sigma = omega_O t.
fn gamma_exponent(sigma: f64, p: &BrownianParams) -> f64 {
    let x = p.x;
    let denom = 1.0 + x * x;
    let e = (-x * sigma).exp();
    // int_0^sigma e^{-x s} cos s ds and ... sin s ds
    let int_cos = (e * (sigma.sin() - x * sigma.cos()) + x) / denom;
    let int_sin = (1.0 - e * (sigma.cos() + x * sigma.sin())) / denom;
    2.0 * p.prefactor() / p.omega_o * (sigma - int_cos - x * int_sin)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Absolute tolerance per matrix entry of the noise integral.
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { tol: 1e-10 }
    }
}

/// Everything needed to evolve a Weyl kernel to time t: the rotation angle
/// omega_O t, the accumulated noise matrix, and the damping exponent.
#[derive(Clone, Copy, Debug)]
pub struct PropagatedState {
    pub angle: f64,
    pub wbar: Mat2,
    pub big_gamma: f64,
}

/// Accumulated noise
///   Wbar(t) = e^{-Gamma(t)}/2 R(t) [ int_0^t e^{Gamma(s)} R(s)^T M(s) R(s) ds ] R(t)^T,
/// M(s) = [[2 Delta, -Xi], [-Xi, 0]], by adaptive quadrature in sigma =
/// omega_O s. Noise injected at s is damped by the remaining evolution and
/// rotated into the frame at t; the signs match the Weyl-space generator
/// (the -Delta [q,[q,.]] + Xi [q,[p,.]] convention of the Fock-space
/// reference integrator).
pub fn propagate(t: f64, p: &BrownianParams, quad: &QuadratureConfig) -> Result<PropagatedState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    let sigma_end = p.omega_o * t;
    let big_gamma = if p.include_gamma_integral { gamma_exponent(sigma_end, p) } else { 0.0 };

    let integrand = |s: f64| -> [f64; 3] {
        let c = coefficients(p.x * s, p).expect("tau >= 0 inside the integral");
        let m: Mat2 = [[2.0 * c.delta, -c.xi], [-c.xi, 0.0]];
        let rs = rot2(s);
        let g = mat2_mul(&mat2_transpose(&rs), &mat2_mul(&m, &rs));
        let grow = if p.include_gamma_integral { gamma_exponent(s, p).exp() } else { 1.0 };
        let scale = grow / p.omega_o;
        [g[0][0] * scale, g[0][1] * scale, g[1][1] * scale]
    };
    let acc = integrate_adaptive(integrand, 0.0, sigma_end, quad.tol)?;

    let damp = 0.5 * (-big_gamma).exp();
    let inner: Mat2 = [[acc[0], acc[1]], [acc[1], acc[2]]];
    let r = rot2(sigma_end);
    let outer = mat2_mul(&r, &mat2_mul(&inner, &mat2_transpose(&r)));
    // symmetric up to rounding; pin it exactly
    let cross = damp * 0.5 * (outer[0][1] + outer[1][0]);
    let wbar: Mat2 = [
        [damp * outer[0][0], cross],
        [cross, damp * outer[1][1]],
    ];
    Ok(PropagatedState { angle: sigma_end, wbar, big_gamma })
}

/// Weyl kernel of the evolved block |xi_i><xi_j| (xi_up = D, xi_down = -D):
/// the initial coherent-pair kernel composed with the contracted, rotated
/// argument and multiplied by the Gaussian noise prefactor.
pub fn evolved_block_kernel(
    i: Spin,
    j: Spin,
    st: &PropagatedState,
    cat: &CatState,
) -> GaussianKernel {
    let xi_i = C64::new(i.branch_amplitude(cat.d()), 0.0);
    let xi_j = C64::new(j.branch_amplitude(cat.d()), 0.0);
    let base = GaussianKernel::coherent_pair(xi_i, xi_j);
    base.evolved((-0.5 * st.big_gamma).exp(), st.angle, &st.wbar)
}

/// Correlation model built from the four block Wigner functions:
///   C = (1/2) [ sin(theta) (W_ud + W_du) + cos(theta) (W_uu - W_dd) ] * (pi/2-normalized)
/// The sweep variable handed to `components` is tau = omega_c t, matching
/// the figure axes; physical time is tau / (x omega_O).
pub struct BrownianModel {
    pub params: BrownianParams,
    pub cat: CatState,
    pub quadrature: QuadratureConfig,
    cache: RwLock<HashMap<u64, PropagatedState>>,
}

impl BrownianModel {
    pub fn new(params: BrownianParams, cat: CatState) -> Self {
        BrownianModel {
            params,
            cat,
            quadrature: QuadratureConfig::default(),
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn state_at(&self, tau: f64) -> Result<PropagatedState> {
        let key = tau.to_bits();
        if let Some(st) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*st);
        }
        let t = tau / (self.params.x * self.params.omega_o);
        let st = propagate(t, &self.params, &self.quadrature)?;
        self.cache.write().expect("cache lock").insert(key, st);
        Ok(st)
    }
}

impl CorrelationModel for BrownianModel {
    fn components(&self, beta: C64, t: f64) -> Result<(f64, f64)> {
        let st = self.state_at(t)?;
        let block = |i: Spin, j: Spin| -> Result<C64> {
            wigner_from_kernel(&evolved_block_kernel(i, j, &st, &self.cat), beta)
        };
        let ud = block(Spin::Up, Spin::Down)?;
        let du = block(Spin::Down, Spin::Up)?;
        let uu = block(Spin::Up, Spin::Up)?;
        let dd = block(Spin::Down, Spin::Down)?;
        let fs = 0.5 * (ud + du);
        let fc = 0.5 * (uu - dd);
        debug_assert!(fs.im.abs() < 1e-12 && fc.im.abs() < 1e-12);
        Ok((fs.re, fc.re))
    }

    fn descriptor(&self) -> String {
        format!(
            "brownian(g={}, x={}, kT={}, D={})",
            self.params.g,
            self.params.x,
            self.params.k_t,
            self.cat.d()
        )
    }

    fn search_box(&self) -> SearchBox {
        // blocks rotate in phase space, so the optimum leaves the real axis
        SearchBox::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{maximize_bell, pure_state_correlation, OptimizerConfig};
    use crate::phase_space::displaced_parity_coherent;
    use approx::assert_abs_diff_eq;

    fn params_a() -> BrownianParams {
        BrownianParams::new(0.3, 10.0, 25.0).unwrap()
    }

    fn params_b() -> BrownianParams {
        BrownianParams::new(0.05, 0.2, 25.0).unwrap()
    }

    #[test]
    fn coefficients_vanish_at_zero() {
        for p in [params_a(), params_b()] {
            let c = coefficients(0.0, &p).unwrap();
            assert_eq!((c.delta, c.xi, c.gamma), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn coefficients_reach_asymptotic_rates() {
        let p = params_a();
        let c = coefficients(800.0, &p).unwrap();
        let pref = p.g * p.g * p.omega_o * p.x * p.x / (2.0 * (1.0 + p.x * p.x));
        assert_abs_diff_eq!(c.delta, pref * p.x * p.k_t, epsilon = 1e-14);
        assert_abs_diff_eq!(c.xi, pref * p.k_t, epsilon = 1e-14);
        assert_abs_diff_eq!(c.gamma, pref, epsilon = 1e-14);
    }

    #[test]
    fn diffusion_rate_goes_negative_in_the_structured_regime() {
        let p = params_b();
        let mut most_negative = f64::INFINITY;
        for i in 0..=4000 {
            let tau = i as f64 * 0.0025;
            most_negative = most_negative.min(coefficients(tau, &p).unwrap().delta);
        }
        assert!(
            most_negative < 0.0,
            "Delta stayed nonnegative, min {most_negative:.3e}"
        );
    }

    #[test]
    fn propagate_at_zero_is_empty() {
        let st = propagate(0.0, &params_a(), &QuadratureConfig::default()).unwrap();
        assert_eq!(st.angle, 0.0);
        assert_eq!(st.wbar, [[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(st.big_gamma, 0.0);
    }

    #[test]
    fn propagate_matches_tighter_quadrature() {
        // refinement control: the 1e-10 path against a 1000x tighter one
        let p = params_a();
        let t = 5.0 / (p.x * p.omega_o);
        let coarse = propagate(t, &p, &QuadratureConfig { tol: 1e-10 }).unwrap();
        let fine = propagate(t, &p, &QuadratureConfig { tol: 1e-13 }).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_abs_diff_eq!(coarse.wbar[r][c], fine.wbar[r][c], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn wbar_stays_symmetric() {
        for p in [params_a(), params_b()] {
            for tau in [0.3, 1.7, 6.0] {
                let st = propagate(tau / p.x, &p, &QuadratureConfig::default()).unwrap();
                assert_eq!(st.wbar[0][1], st.wbar[1][0]);
            }
        }
    }

    #[test]
    fn gamma_exponent_agrees_with_quadrature() {
        let p = params_b().with_gamma_integral();
        for sigma in [0.4, 2.0, 9.0] {
            let closed = gamma_exponent(sigma, &p);
            let numeric = integrate_adaptive(
                |s| [2.0 * coefficients(p.x * s, &p).unwrap().gamma / p.omega_o],
                0.0,
                sigma,
                1e-13,
            )
            .unwrap()[0];
            assert_abs_diff_eq!(closed, numeric, epsilon = 1e-11);
        }
    }

    #[test]
    fn unevolved_diagonal_block_is_the_coherent_projector() {
        let cat = CatState::new(2.0).unwrap();
        let st = propagate(0.0, &params_a(), &QuadratureConfig::default()).unwrap();
        let k = evolved_block_kernel(Spin::Up, Spin::Up, &st, &cat);
        for &(br, bi) in &[(0.0, 0.0), (1.5, 0.0), (2.0, -0.7)] {
            let beta = C64::new(br, bi);
            let got = wigner_from_kernel(&k, beta).unwrap();
            let want = (-2.0 * (beta - cat.d()).norm_sqr()).exp();
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unevolved_cross_block_matches_coherent_parity_element() {
        let cat = CatState::new(2.0).unwrap();
        let d = cat.d();
        let st = propagate(0.0, &params_a(), &QuadratureConfig::default()).unwrap();
        let k = evolved_block_kernel(Spin::Up, Spin::Down, &st, &cat);
        let got = wigner_from_kernel(&k, C64::new(0.0, 0.0)).unwrap();
        // Tr[|D><-D| Pi(0)] = <-D|Pi(0)|D>
        let want = displaced_parity_coherent(
            C64::new(0.0, 0.0),
            C64::new(-d, 0.0),
            C64::new(d, 0.0),
        );
        assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-12);
        assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-12);
    }

    #[test]
    fn model_at_time_zero_is_pure() {
        let model = BrownianModel::new(params_a(), CatState::new(2.0).unwrap());
        for &(br, bi) in &[(0.0, 0.0), (0.6, -0.3), (-1.1, 0.8)] {
            let beta = C64::new(br, bi);
            for &theta in &[0.0, 0.9, std::f64::consts::FRAC_PI_2] {
                let (fs, fc) = model.components(beta, 0.0).unwrap();
                let got = theta.sin() * fs + theta.cos() * fc;
                let want = pure_state_correlation(theta, beta, 2.0);
                assert_abs_diff_eq!(got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn cross_blocks_are_conjugate_and_correlation_real() {
        let model = BrownianModel::new(params_b(), CatState::new(2.0).unwrap());
        for tau in [0.5, 3.0, 11.0] {
            let st = model.state_at(tau).unwrap();
            for &(br, bi) in &[(0.4, 0.2), (-0.9, 1.3)] {
                let beta = C64::new(br, bi);
                let ud =
                    wigner_from_kernel(&evolved_block_kernel(Spin::Up, Spin::Down, &st, &model.cat), beta)
                        .unwrap();
                let du =
                    wigner_from_kernel(&evolved_block_kernel(Spin::Down, Spin::Up, &st, &model.cat), beta)
                        .unwrap();
                assert_abs_diff_eq!(ud.re, du.re, epsilon = 1e-12);
                assert_abs_diff_eq!(ud.im, -du.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn evolution_preserves_block_traces() {
        // chi(0) is the block trace; diagonal blocks each carry weight 1/2
        let cat = CatState::new(2.0).unwrap();
        for p in [params_a(), params_b()] {
            for tau in [0.0, 0.8, 4.0] {
                let st = propagate(tau / p.x, &p, &QuadratureConfig::default()).unwrap();
                let uu = evolved_block_kernel(Spin::Up, Spin::Up, &st, &cat).trace();
                let dd = evolved_block_kernel(Spin::Down, Spin::Down, &st, &cat).trace();
                let total = 0.5 * (uu + dd);
                assert_abs_diff_eq!(total.re, 1.0, epsilon = 1e-8);
                assert_abs_diff_eq!(total.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn markovian_regime_decays_without_revival() {
        // light version of the full sweep: a short nonincreasing prefix
        let model = BrownianModel::new(params_a(), CatState::new(2.0).unwrap());
        let cfg = OptimizerConfig { restarts: 12, ..OptimizerConfig::default() };
        let mut prev = f64::INFINITY;
        for tau in [0.0, 0.5, 1.0, 2.0] {
            let m = maximize_bell(&model, tau, &cfg).unwrap();
            assert!(
                m.value <= prev + 1e-7,
                "maxB rose from {prev} to {} at tau={tau}",
                m.value
            );
            prev = m.value;
        }
    }
}
