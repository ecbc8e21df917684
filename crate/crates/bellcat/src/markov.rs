//! Amplitude- and phase-damping benchmark channels, acting on either the
//! qubit or the oscillator, with closed-form correlation components.
//!
//! Parameter conventions: eta = exp(-gamma t) is the energy-keeping factor
//! of amplitude damping (damping probability P = sqrt(1 - eta)); tau_pd is
//! the scaled dephasing time (P = sqrt(1 - exp(-tau_pd^2))). The sweep
//! variable `t` handed to `MarkovModel` is the probability P itself.

use crate::bell::{pure_components, CorrelationModel, SearchBox};
use crate::numerics::ln_factorial;
use crate::oracle::FockOperator;
use crate::phase_space::CatState;
use crate::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DampingKind {
    Amplitude,
    Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DampingTarget {
    Spin,
    Oscillator,
}

#[derive(Clone, Copy, Debug)]
pub struct AdParams {
    pub eta: f64,
}

impl AdParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "amplitude-damping eta must lie in [0, 1], got {eta}"
            )));
        }
        Ok(AdParams { eta })
    }

    pub fn damping_probability(&self) -> f64 {
        (1.0 - self.eta).sqrt()
    }

    pub fn from_probability(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "damping probability must lie in [0, 1], got {p}"
            )));
        }
        AdParams::new(1.0 - p * p)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PdParams {
    pub tau_pd: f64,
}

impl PdParams {
    pub fn new(tau_pd: f64) -> Result<Self> {
        if !(tau_pd >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dephasing time must be >= 0, got {tau_pd}"
            )));
        }
        Ok(PdParams { tau_pd })
    }

    pub fn damping_probability(&self) -> f64 {
        (1.0 - (-self.tau_pd * self.tau_pd).exp()).sqrt()
    }

    /// tau_pd = sqrt(-ln(1 - P^2)); P = 1 maps to infinite dephasing time.
    pub fn from_probability(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "damping probability must lie in [0, 1], got {p}"
            )));
        }
        PdParams::new((-(1.0 - p * p).ln()).sqrt())
    }
}

/// Truncation controls for the oscillator phase-damping sums.
#[derive(Clone, Copy, Debug)]
pub struct PdCvTruncation {
    /// Fock cutoff of the double sum (inclusive index bound).
    pub n_max: usize,
    /// Kraus-index ceiling. The weight sum walks a window around its Poisson
    /// mode; hitting this ceiling is an error, not a silent truncation.
    pub k_max: usize,
    pub tail_tol: f64,
}

impl Default for PdCvTruncation {
    fn default() -> Self {
        // k_max must majorize tau^2 * n_max^2 plus the window margin; the
        // default is deliberately generous because the walk only visits
        // O(sqrt(x)) of it per element.
        PdCvTruncation { n_max: 40, k_max: 500_000, tail_tol: 1e-9 }
    }
}

impl PdCvTruncation {
    fn check_for(&self, d: f64) -> Result<()> {
        let need = (d * d + 10.0 * d).ceil() as usize;
        if self.n_max < need {
            return Err(Error::InvalidParameter(format!(
                "n_max = {} too small for D = {d}; need at least {need}",
                self.n_max
            )));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidParameter("tail tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// k-th amplitude-damping Kraus operator on a d-level ladder:
/// A_k[n-k, n] = sqrt(C(n, k)) eta^{(n-k)/2} (1-eta)^{k/2}.
pub fn ad_kraus(d: usize, k: usize, eta: f64) -> Result<FockOperator> {
    if d == 0 || k >= d {
        return Err(Error::InvalidParameter(format!(
            "Kraus index {k} outside a {d}-level ladder"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    let mut m = Array2::<C64>::zeros((d, d));
    for n in k..d {
        m[[n - k, n]] = C64::new(ad_coefficient(k, n - k, eta), 0.0);
    }
    Ok(FockOperator { data: m })
}

/// sqrt(C(a+k, k) eta^a (1-eta)^k): amplitude of losing exactly k quanta
/// from |a+k> down to |a>.
pub(crate) fn ad_coefficient(k: usize, a: usize, eta: f64) -> f64 {
    if eta == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if eta == 0.0 {
        // everything decays to the ground state
        return if a == 0 { 1.0 } else { 0.0 };
    }
    let ln_binom = ln_factorial(a + k) - ln_factorial(a) - ln_factorial(k);
    (0.5 * (ln_binom + a as f64 * eta.ln() + k as f64 * (1.0 - eta).ln())).exp()
}

/// k-th phase-damping Kraus operator, diagonal:
/// <n|B_k|n> = exp(-n^2 tau^2/2) (n tau)^k / sqrt(k!).
pub fn pd_kraus(d: usize, k: usize, tau_pd: f64) -> Result<FockOperator> {
    if d == 0 {
        return Err(Error::InvalidParameter("zero-dimensional ladder".into()));
    }
    if !(tau_pd >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau_pd must be >= 0, got {tau_pd}")));
    }
    let mut m = Array2::<C64>::zeros((d, d));
    for n in 0..d {
        m[[n, n]] = C64::new(pd_coefficient(k, n, tau_pd), 0.0);
    }
    Ok(FockOperator { data: m })
}

pub(crate) fn pd_coefficient(k: usize, n: usize, tau: f64) -> f64 {
    if n == 0 || tau == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln = -0.5 * (n as f64 * tau).powi(2) + k as f64 * (n as f64 * tau).ln()
        - 0.5 * ln_factorial(k);
    if ln < -746.0 {
        0.0
    } else {
        ln.exp()
    }
}

/// Dephasing weight of the |n><m| coherence,
///   K(n, m) = exp(-(n^2 + m^2) tau^2 / 2) sum_k (tau^2 n m)^k / k!,
/// summed adaptively. For x = tau^2 n m beyond ~30 the sum walks a window of
/// half-width 10 sqrt(x) + 35 around the Poisson mode in log domain, which
/// keeps every intermediate scaled; k_max bounds the window's reach.
/// (Analytically the sum telescopes to exp(-tau^2 (n-m)^2 / 2); tests pin the
/// windowed walk against that identity.)
pub fn pd_weight(n: usize, m: usize, tau: f64, trunc: &PdCvTruncation) -> Result<f64> {
    if tau.is_infinite() {
        return Ok(if n == m { 1.0 } else { 0.0 });
    }
    let nf = n as f64;
    let mf = m as f64;
    let pref = -0.5 * (nf * nf + mf * mf) * tau * tau;
    let x = tau * tau * nf * mf;
    if x == 0.0 {
        return Ok(if pref < -746.0 { 0.0 } else { pref.exp() });
    }
    // upper bound exp(pref + x) = exp(-tau^2 (n-m)^2 / 2)
    if pref + x < -746.0 {
        return Ok(0.0);
    }
    if x < 30.0 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 0usize;
        loop {
            k += 1;
            if k > trunc.k_max {
                return Err(Error::TruncationNotConverged(format!(
                    "dephasing weight ({n}, {m}) at tau = {tau}: k_max = {} exhausted",
                    trunc.k_max
                )));
            }
            term *= x / k as f64;
            sum += term;
            if term < 1e-16 * sum {
                break;
            }
        }
        return Ok((pref + sum.ln()).exp());
    }
    let mode = x.floor();
    let half_width = (10.0 * x.sqrt() + 35.0).ceil();
    let k_lo = (mode - half_width).max(0.0) as usize;
    let k_hi = (mode + half_width) as usize;
    if k_hi > trunc.k_max {
        return Err(Error::TruncationNotConverged(format!(
            "dephasing weight ({n}, {m}) at tau = {tau} needs k up to {k_hi}, over k_max = {}",
            trunc.k_max
        )));
    }
    let ln_x = x.ln();
    let ln_mode = mode * ln_x - ln_factorial(mode as usize);
    let mut rel_sum = 0.0f64;
    for k in k_lo..=k_hi {
        let ln_term = k as f64 * ln_x - ln_factorial(k) - ln_mode;
        rel_sum += ln_term.exp();
    }
    let ln_total = pref + ln_mode + rel_sum.ln();
    Ok(if ln_total < -746.0 { 0.0 } else { ln_total.exp() })
}

fn ad_spin_components(beta: C64, eta: f64, d: f64) -> (f64, f64) {
    let b2 = beta.norm_sqr();
    let fs = eta.sqrt() * (-2.0 * b2).exp() * (4.0 * d * beta.im).cos();
    let fc = 0.5
        * ((2.0 * eta - 1.0) * (-2.0 * (beta - d).norm_sqr()).exp()
            - (-2.0 * (beta + d).norm_sqr()).exp());
    (fs, fc)
}

fn ad_cv_components(beta: C64, eta: f64, d: f64) -> (f64, f64) {
    // the branches contract to sqrt(eta) D and the cross coherence picks up
    // exp(-2 (1-eta) D^2)
    let b2 = beta.norm_sqr();
    let se = eta.sqrt();
    let fs = (-2.0 * (1.0 - eta) * d * d - 2.0 * b2).exp() * (4.0 * se * d * beta.im).cos();
    let base = -2.0 * b2 - 2.0 * eta * d * d;
    let fc = 0.5 * ((base + 4.0 * se * d * beta.re).exp() - (base - 4.0 * se * d * beta.re).exp());
    (fs, fc)
}

fn pd_spin_components(beta: C64, tau: f64, d: f64) -> (f64, f64) {
    let (fs, fc) = pure_components(beta, d);
    let fade = if tau.is_infinite() { 0.0 } else { (-0.5 * tau * tau).exp() };
    (fade * fs, fc)
}

/// Closed form for amplitude damping of the qubit, real displacement.
pub fn corr_ad_spin(beta: f64, theta: f64, eta: f64, d: f64) -> f64 {
    let (fs, fc) = ad_spin_components(C64::new(beta, 0.0), eta, d);
    theta.sin() * fs + theta.cos() * fc
}

/// Closed form for amplitude damping of the oscillator, real displacement.
pub fn corr_ad_cv(beta: f64, theta: f64, eta: f64, d: f64) -> f64 {
    let (fs, fc) = ad_cv_components(C64::new(beta, 0.0), eta, d);
    theta.sin() * fs + theta.cos() * fc
}

/// Closed form for phase damping of the qubit, real displacement.
pub fn corr_pd_spin(beta: f64, theta: f64, tau_pd: f64, d: f64) -> f64 {
    let (fs, fc) = pd_spin_components(C64::new(beta, 0.0), tau_pd, d);
    theta.sin() * fs + theta.cos() * fc
}

/// Oscillator phase damping via the literal double Fock sum: each coherence
/// |n><m| carries its dephasing weight, contracted against the displaced
/// parity matrix elements. This is the analytic route; `MarkovModel` uses an
/// algebraically identical ladder-contraction path that is much faster for
/// optimizer call volumes.
pub fn corr_pd_cv(
    beta: C64,
    theta: f64,
    tau_pd: f64,
    d: f64,
    trunc: &PdCvTruncation,
) -> Result<f64> {
    trunc.check_for(d)?;
    if !(tau_pd >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau_pd must be >= 0, got {tau_pd}")));
    }
    let cat = CatState::new(d)?;
    let w: Vec<f64> = (0..=trunc.n_max).map(|n| cat.branch_weight(n)).collect();
    let st = theta.sin();
    let ct = theta.cos();
    let mut total = C64::new(0.0, 0.0);
    for n in 0..=trunc.n_max {
        for m in 0..=trunc.n_max {
            let same_parity = (n + m) % 2 == 0;
            // bracket: sin term needs equal parity, cos term opposite
            let angular = if same_parity {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                st * 2.0 * sign
            } else {
                ct * 2.0
            };
            if angular == 0.0 {
                continue;
            }
            let weight = 0.5 * w[n] * w[m] * pd_weight(n, m, tau_pd, trunc)?;
            if weight == 0.0 {
                continue;
            }
            total += angular * weight * crate::phase_space::displaced_parity_fock(m, n, beta)?;
        }
    }
    debug_assert!(total.im.abs() < 1e-9, "correlation came out complex: {total}");
    Ok(total.re)
}

// Any pair this light moves the correlation by less than ~2e-15 in total
// (|<m|Pi|n>| <= 1, at most n_max^2 dropped pairs), so skipping it is free
// at every tolerance the channel is consumed at.
const PD_CV_WEIGHT_FLOOR: f64 = 1e-18;

/// Per-tau contraction plan for the oscillator dephasing fast path. The
/// coupling matrices are symmetric and element-wise disjoint (equal index
/// parity feeds the sin term, opposite parity the cos term), so each is kept
/// as an upper-triangle pair list with the off-diagonal multiplicity folded
/// into the weight. Pairs below the weight floor are dropped up front; the
/// Poisson branch weights and the dephasing band make most of them
/// negligible.
struct PdCvPlan {
    sin_pairs: Vec<(u32, u32, f64)>,
    cos_pairs: Vec<(u32, u32, f64)>,
    rows_needed: usize,
}

type ETables = Arc<PdCvPlan>;

/// One of the four Markovian benchmark channels as a `CorrelationModel`.
/// The sweep variable t is the damping probability P in [0, 1].
pub struct MarkovModel {
    pub kind: DampingKind,
    pub target: DampingTarget,
    pub cat: CatState,
    pub trunc: PdCvTruncation,
    // per-tau coupling tables for the oscillator dephasing fast path
    tables: RwLock<HashMap<u64, ETables>>,
}

impl MarkovModel {
    pub fn new(kind: DampingKind, target: DampingTarget, cat: CatState) -> Self {
        MarkovModel {
            kind,
            target,
            cat,
            trunc: PdCvTruncation::default(),
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_truncation(mut self, trunc: PdCvTruncation) -> Self {
        self.trunc = trunc;
        self
    }

    fn pd_cv_tables(&self, tau: f64) -> Result<ETables> {
        let key = tau.to_bits();
        if let Some(t) = self.tables.read().expect("table lock").get(&key) {
            return Ok(Arc::clone(t));
        }
        let n = self.trunc.n_max + 1;
        let w: Vec<f64> = (0..n).map(|i| self.cat.branch_weight(i)).collect();
        let mut sin_pairs = Vec::new();
        let mut cos_pairs = Vec::new();
        let mut rows_needed = 1usize;
        for i in 0..n {
            for j in i..n {
                let k = pd_weight(i, j, tau, &self.trunc)?;
                let mult = if i == j { 1.0 } else { 2.0 };
                let weight = w[i] * w[j] * k * mult;
                if weight.abs() <= PD_CV_WEIGHT_FLOOR {
                    continue;
                }
                if (i + j) % 2 == 0 {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sin_pairs.push((i as u32, j as u32, weight * sign));
                } else {
                    cos_pairs.push((i as u32, j as u32, weight));
                }
                rows_needed = rows_needed.max(j + 1);
            }
        }
        let entry: ETables = Arc::new(PdCvPlan { sin_pairs, cos_pairs, rows_needed });
        self.tables
            .write()
            .expect("table lock")
            .insert(key, Arc::clone(&entry));
        Ok(entry)
    }

    /// F_s, F_c for oscillator dephasing by ladder contraction:
    /// <m|Pi(b)|n> = sum_j (-1)^j <m|D|j> conj(<n|D|j>), with the displaced
    /// Fock rows built by the stable bra-index recurrence
    ///   <n+1|D|j> = (sqrt(j) <n|D|j-1> + b <n|D|j>) / sqrt(n+1).
    fn pd_cv_components(&self, beta: C64, tau: f64) -> Result<(f64, f64)> {
        let plan = self.pd_cv_tables(tau)?;
        let n = plan.rows_needed;
        let b2 = beta.norm_sqr();
        // row m of <m|D|j> is centered near j = m + |b|^2 with spread
        // ~ sqrt(|b|^2 (2m+1)), so the ladder margin has to grow with the
        // cutoff, not just the displacement
        let spread = (b2 * (2.0 * n as f64 + 1.0)).sqrt();
        let ladder = n + (b2 + 10.0 * spread).ceil() as usize + 30;

        // rows m = 0..n over ladder index j
        let mut rows = vec![C64::new(0.0, 0.0); n * ladder];
        rows[0] = C64::new((-0.5 * b2).exp(), 0.0);
        for j in 1..ladder {
            rows[j] = rows[j - 1] * (-beta.conj()) / (j as f64).sqrt();
        }
        for m in 0..n - 1 {
            let (head, tail) = rows.split_at_mut((m + 1) * ladder);
            let prev = &head[m * ladder..];
            let next = &mut tail[..ladder];
            let norm = 1.0 / ((m + 1) as f64).sqrt();
            next[0] = beta * prev[0] * norm;
            for j in 1..ladder {
                next[j] = ((j as f64).sqrt() * prev[j - 1] + beta * prev[j]) * norm;
            }
        }
        // the ladder must have decayed by its far end or the contraction is
        // silently truncated
        let mut edge = 0.0f64;
        for m in 0..n {
            edge = edge.max(rows[m * ladder + ladder - 1].norm());
        }
        if edge > 1e-10 {
            return Err(Error::TruncationNotConverged(format!(
                "displacement ladder at beta = {beta} still {edge:.2e} at index {ladder}"
            )));
        }

        // each row is unimodal with a fast tail, so entries past `ends[m]`
        // are below 1e-16 and contribute less than ladder * 1e-16 to any
        // dot product; a pair only needs the shorter of its two rows
        let ends: Vec<usize> = (0..n)
            .map(|m| {
                let row = &rows[m * ladder..(m + 1) * ladder];
                let mut end = ladder;
                while end > 1 && row[end - 1].norm_sqr() < 1e-32 {
                    end -= 1;
                }
                end
            })
            .collect();

        // g(i, j) = sum_l (-1)^l conj(<i|D|l>) <j|D|l> obeys
        // g(j, i) = conj(g(i, j)), and the coupling weights are symmetric,
        // so the transposed partner of every stored pair enters through
        // 2 Re g; only the real part of the dot product is ever needed.
        let g_re = |i: usize, j: usize| -> f64 {
            let stop = ends[i].min(ends[j]);
            let ri = &rows[i * ladder..i * ladder + stop];
            let rj = &rows[j * ladder..j * ladder + stop];
            let mut even = 0.0f64;
            let mut odd = 0.0f64;
            for l in (0..stop).step_by(2) {
                even += ri[l].re * rj[l].re + ri[l].im * rj[l].im;
            }
            for l in (1..stop).step_by(2) {
                odd += ri[l].re * rj[l].re + ri[l].im * rj[l].im;
            }
            even - odd
        };
        let mut fs = 0.0f64;
        for &(i, j, w) in &plan.sin_pairs {
            fs += w * g_re(i as usize, j as usize);
        }
        let mut fc = 0.0f64;
        for &(i, j, w) in &plan.cos_pairs {
            fc += w * g_re(i as usize, j as usize);
        }
        Ok((fs, fc))
    }
}

impl CorrelationModel for MarkovModel {
    fn components(&self, beta: C64, t: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "damping probability must lie in [0, 1], got {t}"
            )));
        }
        let d = self.cat.d();
        match (self.kind, self.target) {
            (DampingKind::Amplitude, DampingTarget::Spin) => {
                Ok(ad_spin_components(beta, AdParams::from_probability(t)?.eta, d))
            }
            (DampingKind::Amplitude, DampingTarget::Oscillator) => {
                Ok(ad_cv_components(beta, AdParams::from_probability(t)?.eta, d))
            }
            (DampingKind::Phase, DampingTarget::Spin) => {
                Ok(pd_spin_components(beta, PdParams::from_probability(t)?.tau_pd, d))
            }
            (DampingKind::Phase, DampingTarget::Oscillator) => {
                let tau = PdParams::from_probability(t)?.tau_pd;
                if tau.is_infinite() {
                    // fully dephased: only the diagonal survives; the sin
                    // component is the parity autocorrelation of the branch
                    // mixture and the cos component dies
                    self.trunc.check_for(d)?;
                    let mut fs = 0.0;
                    for n in 0..=self.trunc.n_max {
                        let w = self.cat.branch_weight(n);
                        let p = crate::phase_space::displaced_parity_fock(n, n, beta)?;
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        fs += w * w * sign * p.re;
                    }
                    return Ok((fs, 0.0));
                }
                self.trunc.check_for(d)?;
                self.pd_cv_components(beta, tau)
            }
        }
    }

    fn descriptor(&self) -> String {
        let kind = match self.kind {
            DampingKind::Amplitude => "ad",
            DampingKind::Phase => "pd",
        };
        let target = match self.target {
            DampingTarget::Spin => "spin",
            DampingTarget::Oscillator => "cv",
        };
        format!("{kind}-{target}(D={})", self.cat.d())
    }

    fn search_box(&self) -> SearchBox {
        match (self.kind, self.target) {
            // the oscillator dephasing components genuinely depend on Im b;
            // everything else peaks on the real axis
            (DampingKind::Phase, DampingTarget::Oscillator) => SearchBox::default(),
            _ => SearchBox::real_axis(),
        }
    }
}
