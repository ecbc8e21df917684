//! End-to-end acceptance checks, one criterion per test. Every test prints a
//! single PASS/FAIL line (run with `-- --nocapture` to see them on success).
//!
//! Criterion 4 is expected to fail: oscillator dephasing saturates at the
//! parity floor B = 2 while spin dephasing decays to B = 1, so the two
//! never agree pointwise to 0.05 across the damping grid. The test states
//! the requirement as written and is left failing on purpose.

use bellcat::bell::{
    chsh_quantum_bound, maximize_bell, parameter_threshold, violation_windows, CorrelationModel,
    OptimizerConfig,
};
use bellcat::brownian::{coefficients, BrownianModel, BrownianParams};
use bellcat::cli::{sweep_csv, ExperimentConfig};
use bellcat::markov::{DampingKind, DampingTarget, MarkovModel};
use bellcat::oracle::{
    corr_pd_cv_dense, evolve_kraus, expectation_sigma_parity, hermitian_eigenvalues,
    run_validation, trace_distance_oracle, truncated_cat, VALIDATION_CHANNELS,
};
use bellcat::phase_space::CatState;
use bellcat::postmarkov::{choi_matrix, PostMarkovModel, PostMarkovParams};
use bellcat::spinstar::{trace_distance, SpinStarModel, SpinStarParams};
use bellcat::Error;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

const D: f64 = 2.0;

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} ({name}): {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

fn opt(restarts: usize) -> OptimizerConfig {
    OptimizerConfig { restarts, ..OptimizerConfig::default() }
}

fn grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect()
}

fn maxima(model: &dyn CorrelationModel, ts: &[f64], cfg: &OptimizerConfig) -> Vec<f64> {
    ts.iter().map(|&t| maximize_bell(model, t, cfg).expect("maximization failed").value).collect()
}

fn nonincreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tol)
}

#[test]
fn criterion_1_closed_forms_match_references() {
    let result = run_validation(&VALIDATION_CHANNELS, 60, 50);
    match result {
        Ok(rep) => {
            let pass = rep.all_pass();
            report(
                1,
                "validation",
                pass,
                &format!(
                    "{} comparisons, {} failed, {:.1} s",
                    rep.lines.len(),
                    rep.failures().len(),
                    rep.elapsed_seconds
                ),
            );
            assert!(pass, "validation found {} disagreements", rep.failures().len());
        }
        Err(e) => {
            report(1, "validation", false, &format!("did not run: {e}"));
            panic!("validation run failed: {e}");
        }
    }
}

#[test]
fn criterion_2_occupation_threshold() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(24);

    // moderate memory: the violation at gamma0 t = 1.6 dies at a finite
    // bath occupation
    let family = |nbar: f64| {
        PostMarkovParams::new(1.0, 0.1, nbar).map(|p| PostMarkovModel::new(p, cat))
    };
    let threshold = parameter_threshold(family, 1.6, (0.0, 3.0), &cfg)
        .expect("threshold bisection failed");
    let thr_ok = (threshold - 1.6341).abs() <= 0.05;

    // strong memory: no occupation in [0, 100] kills it, so the bisection
    // must report the missing crossing rather than invent one
    let strong = |nbar: f64| {
        PostMarkovParams::new(1.0, 1.0 / 14.3, nbar).map(|p| PostMarkovModel::new(p, cat))
    };
    let no_crossing = match parameter_threshold(strong, 1.6, (0.0, 100.0), &cfg) {
        Err(Error::NoCrossing { f_lo, f_hi, .. }) => f_lo > 0.0 && f_hi > 0.0,
        other => {
            report(2, "occupation threshold", false, &format!("expected NoCrossing, got {other:?}"));
            panic!("strong-memory family should have no threshold in [0, 100]");
        }
    };

    let pass = thr_ok && no_crossing;
    report(
        2,
        "occupation threshold",
        pass,
        &format!("nbar* = {threshold:.4} (want 1.6341 +- 0.05), strong memory survives nbar = 100"),
    );
    assert!(thr_ok, "threshold {threshold} outside 1.6341 +- 0.05");
    assert!(no_crossing, "strong-memory family lost the violation unexpectedly");
}

#[test]
fn criterion_3_star_revivals() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(16);
    let sizes = [2usize, 5, 100];

    // full revival at tau_s = pi/2 regardless of star size
    let mut revival_ok = true;
    let mut widths = Vec::new();
    for &n in &sizes {
        let model = SpinStarModel::new(SpinStarParams::new(n).unwrap(), cat);
        let b0 = maximize_bell(&model, 0.0, &cfg).unwrap().value;
        let bh = maximize_bell(&model, PI / 2.0, &cfg).unwrap().value;
        if (b0 - bh).abs() > 1e-6 {
            revival_ok = false;
        }
        // width of the violation window around the revival
        let ts = grid(PI / 2.0 - 0.8, PI / 2.0 + 0.8, 33);
        let windows = violation_windows(&model, &ts, &cfg).unwrap();
        let win = windows
            .iter()
            .find(|(a, b)| *a <= PI / 2.0 && PI / 2.0 <= *b)
            .unwrap_or_else(|| panic!("no violation window around pi/2 for {n} spins"));
        widths.push(win.1 - win.0);
    }
    let narrowing = widths.windows(2).all(|w| w[1] < w[0]);

    // closed-form coherence suppression against the dense joint evolution
    let mut oracle_ok = true;
    let mut worst = 0.0f64;
    for &n in &[2usize, 5] {
        for &tau in &[0.3, 0.9, 1.4] {
            let diff = (trace_distance(tau, n) - trace_distance_oracle(tau, n).unwrap()).abs();
            worst = worst.max(diff);
            if diff > 1e-12 {
                oracle_ok = false;
            }
        }
    }

    let pass = revival_ok && narrowing && oracle_ok;
    report(
        3,
        "star revivals",
        pass,
        &format!(
            "revival at pi/2 for N in {{2, 5, 100}}, window widths {:.3}/{:.3}/{:.3}, \
             coherence vs reference {worst:.1e}",
            widths[0], widths[1], widths[2]
        ),
    );
    assert!(revival_ok, "revival maximum differs from the undamped one");
    assert!(narrowing, "violation window should narrow with star size: {widths:?}");
    assert!(oracle_ok, "coherence factor disagrees with the dense evolution: {worst:.3e}");
}

#[test]
fn criterion_4_markov_damping_grids() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(20);
    let ps = grid(0.0, 1.0, 21);

    let ad_spin = MarkovModel::new(DampingKind::Amplitude, DampingTarget::Spin, cat);
    let ad_cv = MarkovModel::new(DampingKind::Amplitude, DampingTarget::Oscillator, cat);
    let pd_spin = MarkovModel::new(DampingKind::Phase, DampingTarget::Spin, cat);
    let pd_cv = MarkovModel::new(DampingKind::Phase, DampingTarget::Oscillator, cat);

    let b_ad_spin = maxima(&ad_spin, &ps, &cfg);
    let b_ad_cv = maxima(&ad_cv, &ps, &cfg);
    let b_pd_spin = maxima(&pd_spin, &ps, &cfg);
    let b_pd_cv = maxima(&pd_cv, &ps, &cfg);

    let mono = nonincreasing(&b_ad_spin, 1e-9)
        && nonincreasing(&b_ad_cv, 1e-9)
        && nonincreasing(&b_pd_spin, 1e-9)
        && nonincreasing(&b_pd_cv, 1e-9);

    // oscillator amplitude damping is never gentler than spin amplitude
    // damping at equal probability
    let ordering = b_ad_cv
        .iter()
        .zip(b_ad_spin.iter())
        .all(|(cv, spin)| *cv <= *spin + 1e-9);

    // the two dephasing channels are required to track each other pointwise
    let gap = b_pd_spin
        .iter()
        .zip(b_pd_cv.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let dephasing_agree = gap <= 0.05;

    let pass = mono && ordering && dephasing_agree;
    report(
        4,
        "damping grids",
        pass,
        &format!(
            "monotone: {mono}, oscillator <= spin ordering: {ordering}, \
             dephasing pointwise gap {gap:.3} (limit 0.05)"
        ),
    );
    assert!(mono, "a damping sweep increased somewhere");
    assert!(ordering, "oscillator amplitude damping exceeded the spin curve");
    // Known failure: spin dephasing collapses the whole interference term
    // (B -> 1 at full damping) while oscillator dephasing leaves the
    // displaced-parity correlations on their B = 2 floor, so the curves
    // split by ~1 near P = 1 and can never satisfy a 0.05 pointwise match.
    assert!(
        dephasing_agree,
        "spin and oscillator dephasing curves differ by {gap:.3} somewhere on the grid"
    );
}

#[test]
fn criterion_5_brownian_regimes() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(16);

    // cutoff far above the oscillator: plain decay, no recurrence
    let fast = BrownianModel::new(BrownianParams::new(0.3, 10.0, 25.0).unwrap(), cat);
    let ts_fast = grid(0.0, 3.0, 31);
    let b_fast = maxima(&fast, &ts_fast, &cfg);
    let mono = nonincreasing(&b_fast, 1e-9);
    let first_below = b_fast.iter().position(|&b| b < 2.0);
    let no_reviolation = match first_below {
        Some(i) => b_fast[i..].iter().all(|&b| b <= 2.0 + 1e-9),
        None => false,
    };

    // cutoff below the oscillator: the violation revives after dying
    let slow_p = BrownianParams::new(0.05, 0.2, 25.0).unwrap();
    let slow = BrownianModel::new(slow_p, cat);
    let ts_slow = grid(0.0, 7.0, 71);
    let b_slow = maxima(&slow, &ts_slow, &cfg);
    let mut window_count = 0usize;
    let mut above = false;
    for &b in &b_slow {
        if b > 2.0 && !above {
            window_count += 1;
            above = true;
        } else if b <= 2.0 {
            above = false;
        }
    }

    // revival peaks recur at the half period of the slow oscillator,
    // pi * x in tau units
    let mut peaks = Vec::new();
    for i in 1..b_slow.len() - 1 {
        if b_slow[i] >= b_slow[i - 1] && b_slow[i] >= b_slow[i + 1] {
            peaks.push(ts_slow[i]);
        }
    }
    let spacings: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_spacing = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let expected = PI * 0.2;
    let spacing_ok = (mean_spacing - expected).abs() <= 0.1 * expected;

    // and the diffusion coefficient really does turn negative there
    let delta_negative = ts_slow
        .iter()
        .skip(1)
        .any(|&tau| coefficients(tau, &slow_p).unwrap().delta < 0.0);

    let pass = mono && no_reviolation && window_count >= 2 && spacing_ok && delta_negative;
    report(
        5,
        "brownian regimes",
        pass,
        &format!(
            "fast cutoff monotone: {mono}, no re-violation: {no_reviolation}; slow cutoff: \
             {window_count} violation windows, peak spacing {mean_spacing:.3} \
             (want {expected:.3} +- 10%), negative diffusion: {delta_negative}"
        ),
    );
    assert!(mono && no_reviolation, "fast-cutoff sweep is not a plain decay");
    assert!(window_count >= 2, "expected a revived violation window, got {window_count}");
    assert!(spacing_ok, "revival spacing {mean_spacing} vs expected {expected}");
    assert!(delta_negative, "diffusion coefficient never went negative");
}

#[test]
fn criterion_6_memory_extends_violation() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(16);
    // gamma0/gamma = 0.05, 1, 10
    let gammas = [20.0, 1.0, 0.1];

    let mut last_ends = Vec::new();
    let mut mono_all = true;
    for &gamma in &gammas {
        let model =
            PostMarkovModel::new(PostMarkovParams::new(1.0, gamma, 0.0).unwrap(), cat);
        let ts = grid(0.0, 10.0, 41);
        let b = maxima(&model, &ts, &cfg);
        if !nonincreasing(&b, 1e-9) {
            mono_all = false;
        }
        let windows = violation_windows(&model, &ts, &cfg).unwrap();
        let end = windows.last().map(|w| w.1).unwrap_or(0.0);
        last_ends.push(end);
    }
    let ordered = last_ends.windows(2).all(|w| w[1] > w[0]);

    // the memory kernel must still generate completely positive maps
    let mut min_eig = f64::INFINITY;
    for &gamma in &gammas {
        for &nbar in &[0.0, 1.0] {
            let p = PostMarkovParams::new(1.0, gamma, nbar).unwrap();
            for &t in &[0.5, 2.0, 5.0] {
                let choi = choi_matrix(t, &p).unwrap();
                let eigs = hermitian_eigenvalues(&choi);
                let low = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                min_eig = min_eig.min(low);
            }
        }
    }
    let cp_ok = min_eig >= -1e-10;

    let pass = mono_all && ordered && cp_ok;
    report(
        6,
        "memory extends violation",
        pass,
        &format!(
            "sweeps monotone: {mono_all}, last violation times {:.3}/{:.3}/{:.3} increasing: \
             {ordered}, smallest Choi eigenvalue {min_eig:.1e}",
            last_ends[0], last_ends[1], last_ends[2]
        ),
    );
    assert!(mono_all, "a memory-kernel sweep increased somewhere");
    assert!(ordered, "violation lifetime should grow with memory: {last_ends:?}");
    assert!(cp_ok, "Choi matrix went negative: {min_eig:.3e}");
}

#[test]
fn criterion_7_structural_invariants() {
    let cat = CatState::new(D).unwrap();
    let cfg = opt(16);

    // correlations are expectations of a bounded observable
    let mut c_max = 0.0f64;
    let models: Vec<(Box<dyn CorrelationModel>, f64)> = vec![
        (Box::new(MarkovModel::new(DampingKind::Amplitude, DampingTarget::Spin, cat)), 0.3),
        (Box::new(MarkovModel::new(DampingKind::Amplitude, DampingTarget::Oscillator, cat)), 0.3),
        (Box::new(MarkovModel::new(DampingKind::Phase, DampingTarget::Spin, cat)), 0.3),
        (Box::new(MarkovModel::new(DampingKind::Phase, DampingTarget::Oscillator, cat)), 0.3),
        (Box::new(SpinStarModel::new(SpinStarParams::new(5).unwrap(), cat)), 0.7),
        (
            Box::new(PostMarkovModel::new(PostMarkovParams::new(1.0, 0.1, 0.5).unwrap(), cat)),
            1.2,
        ),
        (Box::new(BrownianModel::new(BrownianParams::new(0.3, 10.0, 25.0).unwrap(), cat)), 1.0),
    ];
    for (model, t) in &models {
        for &theta in &[0.0, 0.7, 1.9, 3.0] {
            for &im in &[-0.6, 0.0, 0.4] {
                for &re in &[-1.2, 0.0, 0.9] {
                    let c = model.correlation(theta, C64::new(re, im), *t).unwrap();
                    c_max = c_max.max(c.abs());
                }
            }
        }
    }
    let bounded_c = c_max <= 1.0 + 1e-12;

    // Bell maxima respect the quantum bound
    let mut b_max = 0.0f64;
    for (model, t) in &models {
        let m = maximize_bell(model.as_ref(), *t, &cfg).unwrap();
        b_max = b_max.max(m.value);
    }
    let bounded_b = b_max <= chsh_quantum_bound() + 1e-6;

    // reference-state invariants
    let rho = truncated_cat(D, 60).unwrap();
    let herm = rho.hermiticity_error();
    let trace_err = (rho.trace().re - 1.0).abs();
    let psd = rho.min_eigenvalue() >= -1e-10;
    let state_ok = herm < 1e-12 && trace_err < 1e-10 && psd;

    // Kraus sets complete for all four channels (evolve_kraus refuses
    // incomplete sets)
    let kraus_ok = [
        evolve_kraus(&rho, DampingKind::Amplitude, DampingTarget::Spin, 0.6),
        evolve_kraus(&rho, DampingKind::Amplitude, DampingTarget::Oscillator, 0.6),
        evolve_kraus(&rho, DampingKind::Phase, DampingTarget::Spin, 0.8),
        evolve_kraus(&rho, DampingKind::Phase, DampingTarget::Oscillator, 0.8),
    ]
    .iter()
    .all(|r| r.is_ok());

    // doubling the Fock cutoff must not move the dense correlations
    let beta = C64::new(0.3, 0.2);
    let theta = 0.7;
    let mut cutoff_gap = 0.0f64;
    let dense_at = |n: usize| -> Vec<f64> {
        let rho_n = truncated_cat(D, n).unwrap();
        let mut out = Vec::new();
        for (kind, target, param) in [
            (DampingKind::Amplitude, DampingTarget::Spin, 0.6),
            (DampingKind::Amplitude, DampingTarget::Oscillator, 0.6),
            (DampingKind::Phase, DampingTarget::Spin, 0.9),
        ] {
            let evolved = evolve_kraus(&rho_n, kind, target, param).unwrap();
            out.push(expectation_sigma_parity(&evolved, theta, beta).unwrap());
        }
        out.push(corr_pd_cv_dense(beta, theta, 0.9, D, n).unwrap());
        out
    };
    let c40 = dense_at(40);
    let c80 = dense_at(80);
    for (a, b) in c40.iter().zip(c80.iter()) {
        cutoff_gap = cutoff_gap.max((a - b).abs());
    }
    let cutoff_ok = cutoff_gap < 1e-9;

    // identical sweep configs give identical bytes
    let sweep_cfg = ExperimentConfig {
        channel: "pd-spin".into(),
        grid_points: 5,
        restarts: 8,
        ..ExperimentConfig::default()
    };
    let reproducible = sweep_csv(&sweep_cfg).unwrap() == sweep_csv(&sweep_cfg).unwrap();

    let pass = bounded_c && bounded_b && state_ok && kraus_ok && cutoff_ok && reproducible;
    report(
        7,
        "structural invariants",
        pass,
        &format!(
            "|C| <= 1 (max {c_max:.6}), B <= 2 sqrt 2 (max {b_max:.6}), reference state ok: \
             {state_ok}, Kraus complete: {kraus_ok}, cutoff 40 -> 80 moves {cutoff_gap:.1e}, \
             byte-identical sweeps: {reproducible}"
        ),
    );
    assert!(bounded_c, "correlation exceeded 1: {c_max}");
    assert!(bounded_b, "Bell maximum exceeded the quantum bound: {b_max}");
    assert!(state_ok, "reference state violated an invariant");
    assert!(kraus_ok, "a Kraus set failed its completeness check");
    assert!(cutoff_ok, "correlations moved {cutoff_gap:.3e} under cutoff doubling");
    assert!(reproducible, "identical configs produced different bytes");
}
