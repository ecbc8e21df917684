//! CHSH combination B = C(b', t') + C(b', t) + C(b, t') - C(b, t) and its
//! maximization over measurement settings.
//!
//! Every channel in this crate produces a correlation of the form
//!   C(theta, beta) = sin(theta) F_s(beta) + cos(theta) F_c(beta),
//! so a model only supplies the component pair (F_s, F_c). Writing
//! w = (F_s, F_c) at beta and w' at beta', the CHSH value is
//!   B = v . (w' - w) + v' . (w' + w),   v = (sin theta, cos theta),
//! and the angle maximization is exact: B* = |w' - w| + |w' + w|. The
//! numerical search therefore only runs over the displacement coordinates.

use crate::phase_space::CatState;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;

pub fn chsh_quantum_bound() -> f64 {
    2.0 * std::f64::consts::SQRT_2
}

#[derive(Clone, Copy, Debug)]
pub struct MeasurementSetting {
    pub theta: f64,
    pub beta: C64,
}

#[derive(Clone, Copy, Debug)]
pub struct BellSettings {
    pub unprimed: MeasurementSetting,
    pub primed: MeasurementSetting,
}

/// A channel evaluated at elapsed parameter `t` (each model documents its
/// own time variable: a damping probability, a scaled interaction time, ...).
pub trait CorrelationModel: Sync {
    /// Component pair (F_s, F_c) with C = sin(theta) F_s + cos(theta) F_c.
    fn components(&self, beta: C64, t: f64) -> Result<(f64, f64)>;

    fn correlation(&self, theta: f64, beta: C64, t: f64) -> Result<f64> {
        let (fs, fc) = self.components(beta, t)?;
        Ok(theta.sin() * fs + theta.cos() * fc)
    }

    /// Short human-readable tag used in logs and validation reports.
    fn descriptor(&self) -> String;

    /// Hint restricting where the optimizer searches. Models whose
    /// components provably peak on the real displacement axis pin the
    /// imaginary coordinates here.
    fn search_box(&self) -> SearchBox {
        SearchBox::default()
    }
}

/// Per-coordinate closed intervals for (theta, theta', Re b, Im b,
/// Re b', Im b'). A degenerate interval (lo == hi) pins the coordinate.
#[derive(Clone, Copy, Debug)]
pub struct SearchBox {
    pub theta: (f64, f64),
    pub theta_prime: (f64, f64),
    pub re_beta: (f64, f64),
    pub im_beta: (f64, f64),
    pub re_beta_prime: (f64, f64),
    pub im_beta_prime: (f64, f64),
}

impl Default for SearchBox {
    fn default() -> Self {
        use std::f64::consts::PI;
        SearchBox {
            theta: (-PI, PI),
            theta_prime: (-PI, PI),
            re_beta: (-2.0, 2.0),
            im_beta: (-2.0, 2.0),
            re_beta_prime: (-2.0, 2.0),
            im_beta_prime: (-2.0, 2.0),
        }
    }
}

impl SearchBox {
    /// Same box with both imaginary displacement coordinates pinned to zero.
    pub fn real_axis() -> Self {
        SearchBox {
            im_beta: (0.0, 0.0),
            im_beta_prime: (0.0, 0.0),
            ..SearchBox::default()
        }
    }

    pub fn intersect(&self, other: &SearchBox) -> Result<SearchBox> {
        let cut = |a: (f64, f64), b: (f64, f64), name: &str| -> Result<(f64, f64)> {
            let lo = a.0.max(b.0);
            let hi = a.1.min(b.1);
            if lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "empty search range for {name}: [{}, {}] meets [{}, {}]",
                    a.0, a.1, b.0, b.1
                )));
            }
            Ok((lo, hi))
        };
        Ok(SearchBox {
            theta: cut(self.theta, other.theta, "theta")?,
            theta_prime: cut(self.theta_prime, other.theta_prime, "theta_prime")?,
            re_beta: cut(self.re_beta, other.re_beta, "re_beta")?,
            im_beta: cut(self.im_beta, other.im_beta, "im_beta")?,
            re_beta_prime: cut(self.re_beta_prime, other.re_beta_prime, "re_beta_prime")?,
            im_beta_prime: cut(self.im_beta_prime, other.im_beta_prime, "im_beta_prime")?,
        })
    }

    fn beta_ranges(&self) -> [(f64, f64); 4] {
        [self.re_beta, self.im_beta, self.re_beta_prime, self.im_beta_prime]
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub bounds: SearchBox,
    /// Nelder-Mead restarts beyond the coarse-grid seeds.
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the simplex function values agree this closely.
    pub f_tolerance: f64,
    /// Stop when the simplex has collapsed to this diameter.
    pub x_tolerance: f64,
    /// Scrambles the deterministic low-discrepancy restart placement.
    pub seed: u64,
    /// Extra starting points (Re b, Im b, Re b', Im b'), e.g. the previous
    /// sweep point's argmax when warm-starting along a grid.
    pub extra_seeds: Vec<[f64; 4]>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            bounds: SearchBox::default(),
            restarts: 64,
            max_iterations: 400,
            f_tolerance: 1e-10,
            x_tolerance: 1e-9,
            seed: 7,
            extra_seeds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BellMaximum {
    pub value: f64,
    pub settings: BellSettings,
    /// False when no restart met the simplex tolerances; the value is then
    /// still the best one seen.
    pub converged: bool,
    pub evaluations: usize,
}

/// Correlation of the undamped cat state,
///   C = sin(t) exp(-2|b|^2) cos(4 D Im b)
///     + cos(t) exp(-2|b|^2 - 2 D^2) sinh(4 D Re b).
/// The sinh prefactor pair is evaluated as two exponentials so the large-D
/// cancellation never forms intermediate overflow.
pub fn pure_state_correlation(theta: f64, beta: C64, d: f64) -> f64 {
    let (fs, fc) = pure_components(beta, d);
    theta.sin() * fs + theta.cos() * fc
}

pub(crate) fn pure_components(beta: C64, d: f64) -> (f64, f64) {
    let b2 = beta.norm_sqr();
    let fs = (-2.0 * b2).exp() * (4.0 * d * beta.im).cos();
    let base = -2.0 * b2 - 2.0 * d * d;
    let fc = 0.5 * ((base + 4.0 * d * beta.re).exp() - (base - 4.0 * d * beta.re).exp());
    (fs, fc)
}

/// The undamped cat state itself, the t = 0 reference every channel decays
/// from. `t` is ignored.
#[derive(Clone, Copy, Debug)]
pub struct PureCatModel {
    pub cat: CatState,
}

impl CorrelationModel for PureCatModel {
    fn components(&self, beta: C64, _t: f64) -> Result<(f64, f64)> {
        Ok(pure_components(beta, self.cat.d()))
    }

    fn descriptor(&self) -> String {
        format!("pure(D={})", self.cat.d())
    }

    fn search_box(&self) -> SearchBox {
        SearchBox::real_axis()
    }
}

/// B evaluated by four direct correlation calls. The optimizer's component
/// shortcut must reproduce this exactly; tests compare the two.
pub fn bell_value(model: &dyn CorrelationModel, settings: &BellSettings, t: f64) -> Result<f64> {
    let c = |theta: f64, beta: C64| model.correlation(theta, beta, t);
    let b = settings.unprimed.beta;
    let bp = settings.primed.beta;
    let th = settings.unprimed.theta;
    let tp = settings.primed.theta;
    Ok(c(tp, bp)? + c(th, bp)? + c(tp, b)? - c(th, b)?)
}

/// Best angle for v(theta) . target over theta in `range`, where
/// v = (sin theta, cos theta). Unrestricted the optimum is
/// atan2(target_s, target_c) with value |target|; a narrower range clamps to
/// the nearest admissible angle or an endpoint.
fn best_angle(target: (f64, f64), range: (f64, f64)) -> (f64, f64) {
    use std::f64::consts::PI;
    let (ts, tc) = target;
    let free = ts.atan2(tc);
    let width = range.1 - range.0;
    if width >= 2.0 * PI - 1e-12 {
        return (free, ts.hypot(tc));
    }
    // try to wrap the free optimum into range
    let mut cand = free;
    while cand < range.0 {
        cand += 2.0 * PI;
    }
    while cand > range.1 {
        cand -= 2.0 * PI;
    }
    let eval = |theta: f64| theta.sin() * ts + theta.cos() * tc;
    if cand >= range.0 && cand <= range.1 {
        (cand, eval(cand))
    } else if eval(range.0) >= eval(range.1) {
        (range.0, eval(range.0))
    } else {
        (range.1, eval(range.1))
    }
}

struct Objective<'a> {
    model: &'a dyn CorrelationModel,
    t: f64,
    box_: SearchBox,
    evaluations: std::cell::Cell<usize>,
    last_error: std::cell::RefCell<Option<Error>>,
}

impl<'a> Objective<'a> {
    /// Returns (B, settings); model failures map to -inf so the simplex
    /// walks away from invalid regions instead of aborting the search.
    fn eval(&self, beta: C64, beta_prime: C64) -> (f64, Option<BellSettings>) {
        self.evaluations.set(self.evaluations.get() + 1);
        let w = match self.model.components(beta, self.t) {
            Ok(w) => w,
            Err(e) => {
                *self.last_error.borrow_mut() = Some(e);
                return (f64::NEG_INFINITY, None);
            }
        };
        let wp = match self.model.components(beta_prime, self.t) {
            Ok(w) => w,
            Err(e) => {
                *self.last_error.borrow_mut() = Some(e);
                return (f64::NEG_INFINITY, None);
            }
        };
        let diff = (wp.0 - w.0, wp.1 - w.1);
        let sum = (wp.0 + w.0, wp.1 + w.1);
        let (theta, dv) = best_angle(diff, self.box_.theta);
        let (theta_prime, sv) = best_angle(sum, self.box_.theta_prime);
        let settings = BellSettings {
            unprimed: MeasurementSetting { theta, beta },
            primed: MeasurementSetting { theta: theta_prime, beta: beta_prime },
        };
        (dv + sv, Some(settings))
    }

    fn eval_coords(&self, active: &[usize], pinned: &[f64; 4], x: &[f64]) -> (f64, Option<BellSettings>) {
        let mut full = *pinned;
        for (slot, &dim) in x.iter().zip(active.iter()) {
            full[dim] = *slot;
        }
        self.eval(C64::new(full[0], full[1]), C64::new(full[2], full[3]))
    }
}

/// Maximize B over the configured box at fixed channel parameter t.
///
/// Deterministic: coarse-grid seeding plus Halton-sequence restarts, then
/// Nelder-Mead confined to the box by coordinate clamping. Never errors on a
/// stalled search; `converged` reports it instead.
pub fn maximize_bell(
    model: &dyn CorrelationModel,
    t: f64,
    cfg: &OptimizerConfig,
) -> Result<BellMaximum> {
    let box_ = cfg.bounds.intersect(&model.search_box())?;
    let ranges = box_.beta_ranges();
    let active: Vec<usize> = (0..4).filter(|&i| ranges[i].1 > ranges[i].0).collect();
    let pinned: [f64; 4] = [ranges[0].0, ranges[1].0, ranges[2].0, ranges[3].0];
    let obj = Objective {
        model,
        t,
        box_,
        evaluations: std::cell::Cell::new(0),
        last_error: std::cell::RefCell::new(None),
    };

    let mut best_value = f64::NEG_INFINITY;
    let mut best_settings: Option<BellSettings> = None;
    let mut converged = false;

    let consider = |value: f64, settings: Option<BellSettings>, did_converge: bool,
                        best_value: &mut f64, best_settings: &mut Option<BellSettings>,
                        converged: &mut bool| {
        if value > *best_value {
            if let Some(s) = settings {
                *best_value = value;
                *best_settings = Some(s);
            }
        }
        if did_converge {
            *converged = true;
        }
    };

    if active.is_empty() {
        let (value, settings) = obj.eval_coords(&active, &pinned, &[]);
        consider(value, settings, true, &mut best_value, &mut best_settings, &mut converged);
    } else {
        // coarse grid, resolution chosen by dimensionality
        let per_dim = match active.len() {
            1 => 33,
            2 => 13,
            3 => 7,
            _ => 6,
        };
        let mut grid_best: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut idx = vec![0usize; active.len()];
        loop {
            let x: Vec<f64> = idx
                .iter()
                .zip(active.iter())
                .map(|(&i, &dim)| {
                    let (lo, hi) = ranges[dim];
                    lo + (hi - lo) * i as f64 / (per_dim - 1) as f64
                })
                .collect();
            let (value, settings) = obj.eval_coords(&active, &pinned, &x);
            consider(value, settings, false, &mut best_value, &mut best_settings, &mut converged);
            if value.is_finite() {
                grid_best.push((value, x));
            }
            // odometer increment
            let mut carry = true;
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_dim {
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
        grid_best.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        grid_best.truncate(4);

        let mut starts: Vec<Vec<f64>> = grid_best.into_iter().map(|(_, x)| x).collect();
        for seed in &cfg.extra_seeds {
            starts.push(active.iter().map(|&dim| seed[dim].clamp(ranges[dim].0, ranges[dim].1)).collect());
        }
        let halton_bases = [2u64, 3, 5, 7];
        let offset = (cfg.seed % 1024) * 64 + 1;
        for r in 0..cfg.restarts.saturating_sub(starts.len()) {
            let x: Vec<f64> = active
                .iter()
                .enumerate()
                .map(|(slot, &dim)| {
                    let (lo, hi) = ranges[dim];
                    lo + (hi - lo) * crate::numerics::halton(offset + r as u64, halton_bases[slot])
                })
                .collect();
            starts.push(x);
        }

        for start in starts {
            let (value, settings, run_converged) =
                nelder_mead(&obj, &active, &pinned, &ranges, start, cfg);
            consider(value, settings, run_converged, &mut best_value, &mut best_settings, &mut converged);
        }
    }

    let settings = match best_settings {
        Some(s) => s,
        None => {
            // every sampled point failed; surface the model's error
            return Err(obj
                .last_error
                .borrow_mut()
                .take()
                .unwrap_or_else(|| Error::InvalidParameter("search box contains no evaluable point".into())));
        }
    };
    if best_value > chsh_quantum_bound() + 1e-6 {
        return Err(Error::BoundViolated { value: best_value });
    }
    Ok(BellMaximum {
        value: best_value,
        settings,
        converged,
        evaluations: obj.evaluations.get(),
    })
}

fn nelder_mead(
    obj: &Objective,
    active: &[usize],
    pinned: &[f64; 4],
    ranges: &[(f64, f64); 4],
    start: Vec<f64>,
    cfg: &OptimizerConfig,
) -> (f64, Option<BellSettings>, bool) {
    let d = active.len();
    let clamp = |x: &mut Vec<f64>| {
        for (slot, &dim) in x.iter_mut().zip(active.iter()) {
            *slot = slot.clamp(ranges[dim].0, ranges[dim].1);
        }
    };
    // minimize -B
    let f = |x: &Vec<f64>| -> (f64, Option<BellSettings>) {
        let (v, s) = obj.eval_coords(active, pinned, x);
        (-v, s)
    };

    let mut simplex: Vec<(f64, Vec<f64>, Option<BellSettings>)> = Vec::with_capacity(d + 1);
    {
        let (fv, s) = f(&start);
        simplex.push((fv, start.clone(), s));
    }
    for i in 0..d {
        let mut x = start.clone();
        let (lo, hi) = ranges[active[i]];
        let step = 0.10 * (hi - lo);
        x[i] += if x[i] + step <= hi { step } else { -step };
        clamp(&mut x);
        let (fv, s) = f(&x);
        simplex.push((fv, x, s));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex[d].0 - simplex[0].0;
        let mut diameter = 0.0f64;
        for i in 1..=d {
            for j in 0..d {
                diameter = diameter.max((simplex[i].1[j] - simplex[0].1[j]).abs());
            }
        }
        if spread.abs() < cfg.f_tolerance && diameter < cfg.x_tolerance {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|e| e.1[j]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let mut reflected: Vec<f64> = (0..d)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst.1[j]))
            .collect();
        clamp(&mut reflected);
        let (fr, sr) = f(&reflected);

        if fr < simplex[0].0 {
            let mut expanded: Vec<f64> = (0..d)
                .map(|j| centroid[j] + gamma * (reflected[j] - centroid[j]))
                .collect();
            clamp(&mut expanded);
            let (fe, se) = f(&expanded);
            simplex[d] = if fe < fr { (fe, expanded, se) } else { (fr, reflected, sr) };
        } else if fr < simplex[d - 1].0 {
            simplex[d] = (fr, reflected, sr);
        } else {
            let mut contracted: Vec<f64> = (0..d)
                .map(|j| centroid[j] + rho * (worst.1[j] - centroid[j]))
                .collect();
            clamp(&mut contracted);
            let (fc, sc) = f(&contracted);
            if fc < worst.0 {
                simplex[d] = (fc, contracted, sc);
            } else {
                let best = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = (0..d)
                        .map(|j| best[j] + sigma * (entry.1[j] - best[j]))
                        .collect();
                    clamp(&mut x);
                    let (fv, s) = f(&x);
                    *entry = (fv, x, s);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    (-simplex[0].0, simplex[0].2.clone(), converged)
}

/// Intervals of t where maxB(t) > 2, located on `t_grid` and refined by
/// bisection to width 1e-3. Consecutive grid maximizations warm-start from
/// the previous argmax so the tracked branch does not hop.
pub fn violation_windows(
    model: &dyn CorrelationModel,
    t_grid: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Vec<(f64, f64)>> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "violation window scan needs at least two grid points".into(),
        ));
    }
    let mut cfg_here = cfg.clone();
    let mut excess = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let m = maximize_bell(model, t, &cfg_here)?;
        cfg_here.extra_seeds = vec![[
            m.settings.unprimed.beta.re,
            m.settings.unprimed.beta.im,
            m.settings.primed.beta.re,
            m.settings.primed.beta.im,
        ]];
        excess.push(m.value - CHSH_CLASSICAL_BOUND);
    }

    let refine = |lo: f64, hi: f64, lo_positive: bool| -> Result<f64> {
        let mut a = lo;
        let mut b = hi;
        while b - a > 1e-3 {
            let mid = 0.5 * (a + b);
            let v = maximize_bell(model, mid, cfg)?.value - CHSH_CLASSICAL_BOUND;
            if (v > 0.0) == lo_positive {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    };

    let mut windows = Vec::new();
    let mut open: Option<f64> = if excess[0] > 0.0 { Some(t_grid[0]) } else { None };
    for i in 1..t_grid.len() {
        let was = excess[i - 1] > 0.0;
        let is = excess[i] > 0.0;
        if was == is {
            continue;
        }
        let edge = refine(t_grid[i - 1], t_grid[i], was)?;
        if is {
            open = Some(edge);
        } else if let Some(start) = open.take() {
            windows.push((start, edge));
        }
    }
    if let Some(start) = open {
        windows.push((start, *t_grid.last().unwrap()));
    }
    Ok(windows)
}

/// Bisect for the channel-family parameter where maxB crosses 2 at fixed t.
/// `family` builds the model for a given parameter value. Prechecks that the
/// excess maxB - 2 moves monotonically across `range` (5-point scan) and
/// that a sign change exists.
pub fn parameter_threshold<M, F>(
    family: F,
    t: f64,
    range: (f64, f64),
    cfg: &OptimizerConfig,
) -> Result<f64>
where
    M: CorrelationModel,
    F: Fn(f64) -> Result<M>,
{
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "threshold range [{lo}, {hi}] is empty"
        )));
    }
    let excess_at = |v: f64| -> Result<f64> {
        let model = family(v)?;
        Ok(maximize_bell(&model, t, cfg)?.value - CHSH_CLASSICAL_BOUND)
    };
    let mut probes = Vec::with_capacity(5);
    for i in 0..5 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        probes.push((v, excess_at(v)?));
    }
    let increasing = probes[4].1 >= probes[0].1;
    for w in probes.windows(2) {
        let step = w[1].1 - w[0].1;
        let ok = if increasing { step >= -1e-9 } else { step <= 1e-9 };
        if !ok {
            return Err(Error::NotMonotone {
                at: w[1].0,
                detail: format!(
                    "excess moved from {:.6e} to {:.6e} against the overall trend",
                    w[0].1, w[1].1
                ),
            });
        }
    }
    if probes[0].1 * probes[4].1 > 0.0 {
        return Err(Error::NoCrossing {
            lo,
            hi,
            f_lo: probes[0].1,
            f_hi: probes[4].1,
        });
    }
    let mut a = lo;
    let mut b = hi;
    let f_a = probes[0].1;
    let positive_at_a = f_a > 0.0;
    while b - a > 1e-3 {
        let mid = 0.5 * (a + b);
        let v = excess_at(mid)?;
        if (v > 0.0) == positive_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
