//! Pure dephasing of the qubit by a star of N_s environment spins coupled
//! sigma_z x sigma_z, star prepared maximally mixed. Exactly solvable: the
//! qubit coherence is multiplied by [cos 2 tau_s]^{N_s} and populations are
//! untouched, so the correlation keeps its closed form and the trace
//! distance of antipodal equatorial states is |cos 2 tau_s|^{N_s}.

use crate::bell::{pure_components, CorrelationModel, SearchBox};
use crate::phase_space::CatState;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug)]
pub struct SpinStarParams {
    pub n_spins: usize,
}

impl SpinStarParams {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::InvalidParameter("spin star needs at least one spin".into()));
        }
        Ok(SpinStarParams { n_spins })
    }
}

/// [cos 2 tau_s]^{N_s}. Evaluated in log domain for large stars so a 100-spin
/// factor decays smoothly instead of flushing to zero early.
pub fn decoherence_factor(tau_s: f64, n_spins: usize) -> f64 {
    let c = (2.0 * tau_s).cos();
    if n_spins <= 32 {
        return c.powi(n_spins as i32);
    }
    if c == 0.0 {
        return 0.0;
    }
    let sign = if c < 0.0 && n_spins % 2 == 1 { -1.0 } else { 1.0 };
    let ln = n_spins as f64 * c.abs().ln();
    if ln < -746.0 {
        0.0
    } else {
        sign * ln.exp()
    }
}

/// Correlation of the cat state dephased by the star: the sin(theta)
/// component carries the decoherence factor, the cos(theta) component is
/// untouched.
pub fn corr_spinstar(theta: f64, beta: C64, tau_s: f64, p: SpinStarParams, d: f64) -> f64 {
    let (fs, fc) = pure_components(beta, d);
    theta.sin() * decoherence_factor(tau_s, p.n_spins) * fs + theta.cos() * fc
}

/// Trace distance of the evolved equatorial pair (|up> +- |down>)/sqrt(2):
/// delta(tau_s) = |cos 2 tau_s|^{N_s}. Its revivals are the back-flow
/// witness plotted alongside the Bell maximum.
pub fn trace_distance(tau_s: f64, n_spins: usize) -> f64 {
    decoherence_factor(tau_s, n_spins).abs()
}

pub struct SpinStarModel {
    pub params: SpinStarParams,
    pub cat: CatState,
}

impl SpinStarModel {
    pub fn new(params: SpinStarParams, cat: CatState) -> Self {
        SpinStarModel { params, cat }
    }
}

impl CorrelationModel for SpinStarModel {
    /// The sweep variable is tau_s = A t.
    fn components(&self, beta: C64, t: f64) -> Result<(f64, f64)> {
        let (fs, fc) = pure_components(beta, self.cat.d());
        Ok((decoherence_factor(t, self.params.n_spins) * fs, fc))
    }

    fn descriptor(&self) -> String {
        format!("spinstar(N={}, D={})", self.params.n_spins, self.cat.d())
    }

    fn search_box(&self) -> SearchBox {
        SearchBox::real_axis()
    }
}
