//! Acceptance battery. Each test is one criterion: it prints a PASS line
//! with the observed quantities via the harness (run with --nocapture to see
//! them on success) and enforces both the stated tolerance and the runtime
//! budget. The tests serialize through one mutex so the budgets are measured
//! without cross-test contention; inner solves still use the worker pool.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zonewave::coeffs::{make_example, CoefficientModel};
use zonewave::diag::{self, HypRepresentation};
use zonewave::propagator::{self, SolveConfig};
use zonewave::stabilize::{self, stabilizes_to};
use zonewave::verify::{self, energy_weight, log_grid};
use zonewave::zones::{self, Zone};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn ex31() -> CoefficientModel {
    let mut p = BTreeMap::new();
    p.insert("mu".to_string(), 0.4);
    p.insert("alpha".to_string(), 0.5);
    make_example("ex31", &p).unwrap()
}

fn ex35() -> CoefficientModel {
    let mut p = BTreeMap::new();
    p.insert("alpha".to_string(), 2.0);
    p.insert("m".to_string(), 2.0);
    make_example("ex35", &p).unwrap()
}

/// The sigma = 0 companion of ex31: same shape mu and scales, no oscillation.
fn ex31_shape_only() -> CoefficientModel {
    let mut p = BTreeMap::new();
    p.insert("mu_scale".to_string(), 0.4);
    p.insert("mu_power".to_string(), 1.0);
    p.insert("theta_power".to_string(), 0.5);
    p.insert("xi_power".to_string(), 0.75);
    make_example("custom", &p).unwrap()
}

fn finish(name: &str, start: Instant, budget_s: f64, detail: String) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("{name}: PASS ({detail}; elapsed {elapsed:.2} s, budget {budget_s} s)");
    assert!(
        elapsed < budget_s,
        "{name} exceeded its runtime budget: {elapsed:.2} s >= {budget_s} s"
    );
}

/// (t, xi) samples of the dissipative zone: t log-uniform, then xi log-uniform
/// in (1e-3 Nmu(t), Nmu(t)].
fn sample_dissipative(
    model: &CoefficientModel,
    n: usize,
    t_hi: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let n_const = model.zone_constant;
    (0..n)
        .map(|_| {
            let t = (rng.gen_range(0f64.ln_1p()..t_hi.ln())).exp();
            let xi_max = n_const * model.mu(t);
            let xi = xi_max * 10f64.powf(rng.gen_range(-3.0..0.0));
            assert_eq!(zones::classify(model, t, xi), Zone::Dissipative);
            (t, xi)
        })
        .collect()
}

#[test]
fn criterion_01_free_propagator_unitarity() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for xi in [0.1, 1.0, 10.0] {
        for t in [1.0, 10.0, 1e2, 1e3] {
            let e0 = propagator::free_propagator(xi, 0.0, t);
            worst = worst.max((e0.norm() - 1.0).abs());
        }
    }
    assert!(worst <= 1e-9, "unitarity defect {worst:.3e} > 1e-9");
    finish(
        "criterion 01 free-propagator unitarity",
        start,
        1.0,
        format!("max | ||E_0|| - 1 | = {worst:.3e} <= 1e-9"),
    );
}

#[test]
fn criterion_02_liouville_identity() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let cfg = SolveConfig::default();
    let mut worst = 0.0f64;
    for &xi in &log_grid(1e-2, 1e1, 10) {
        for &t in &log_grid(1.0, 1e3, 10) {
            let e = propagator::solve_E(&model, xi, 0.0, t, &cfg).unwrap();
            // 2 int b = int mu + int sigma and lambda^2 = exp(int mu)
            let two_int_b =
                model.lambda(t).unwrap().powi(2) * model.sigma_integral(t).unwrap().exp();
            let residual = (e.det() * two_int_b - Complex64::ONE).norm();
            worst = worst.max(residual);
        }
    }
    assert!(worst <= 1e-6, "Liouville residual {worst:.3e} > 1e-6");
    finish(
        "criterion 02 Liouville identity",
        start,
        30.0,
        format!("max |det E exp(2 int b) - 1| = {worst:.3e} <= 1e-6 on a 10x10 grid"),
    );
}

#[test]
fn criterion_03_dissipative_envelope_constant() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let cfg = SolveConfig::with_rel_tol(1e-8);
    let value = |t: f64, xi: f64| -> f64 {
        let e = propagator::solve_E(&model, xi, 0.0, t, &cfg).unwrap();
        model.lambda(t).unwrap().powi(2) * (e * energy_weight(xi)).norm()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let base = sample_dissipative(&model, 200, 1e4, &mut rng);
    let c200 = base
        .iter()
        .map(|&(t, xi)| value(t, xi))
        .fold(0.0f64, f64::max);

    // doubling the sample extends the same stream, so C is monotone and the
    // stability check is C(400) <= 2 C(200)
    let extra = sample_dissipative(&model, 200, 1e4, &mut rng);
    let c400 = extra
        .iter()
        .map(|&(t, xi)| value(t, xi))
        .fold(c200, f64::max);

    assert!(c200.is_finite() && c200 > 0.0);
    assert!(
        c400 <= 2.0 * c200,
        "envelope constant unstable under sample doubling: {c200:.6} -> {c400:.6}"
    );
    finish(
        "criterion 03 dissipative envelope",
        start,
        60.0,
        format!("lambda^2 ||E W|| <= C with C = {c200:.4}, doubled-sample C = {c400:.4} <= 2C"),
    );
}

#[test]
fn criterion_04_picard_oracle_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let cfg = SolveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2027);
    let mut worst = 0.0f64;
    for (t, xi) in sample_dissipative(&model, 50, 1e3, &mut rng) {
        let direct = propagator::solve_E(&model, xi, 0.0, t, &cfg).unwrap();
        let picard = propagator::picard_dissipative(&model, xi, t, 14).unwrap().e;
        let rel = (picard - direct).norm() / direct.norm();
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-6, "Picard mismatch {worst:.3e} > 1e-6");
    finish(
        "criterion 04 Picard oracle equivalence",
        start,
        60.0,
        format!("max relative deviation {worst:.3e} <= 1e-6 at 50 sampled points"),
    );
}

#[test]
fn criterion_05_hyperbolic_reconstruction() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let cfg = SolveConfig::default();
    let mut worst = 0.0f64;
    for xi in [0.5, 1.0, 5.0] {
        // entry time of the hyperbolic zone; for xi = 5 the zone starts at
        // t = 0 and the reference point moves to 1 so that 10 s, 100 s stay
        // meaningful
        let s = zones::boundaries(&model, xi).t2.max(1.0);
        for factor in [10.0, 100.0] {
            let t = factor * s;
            let recon = diag::reconstruct_hyp(&model, xi, s, t, 1e-10).unwrap();
            let direct = propagator::solve_E(&model, xi, s, t, &cfg).unwrap();
            let rel = (recon - direct).norm() / direct.norm();
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-6, "reconstruction mismatch {worst:.3e} > 1e-6");
    finish(
        "criterion 05 hyperbolic reconstruction",
        start,
        120.0,
        format!("max relative deviation {worst:.3e} <= 1e-6 over xi in {{0.5, 1, 5}}"),
    );
}

#[test]
fn criterion_06_intermediate_factorization() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let xi = 0.004;
    let bounds = zones::boundaries(&model, xi);
    let mut worst = 0.0f64;
    for &t in &log_grid(bounds.t1 * 1.02, bounds.t2 * 0.98, 20) {
        let f = diag::intermediate_factorization(&model, xi, bounds.t1, t, 1e-7).unwrap();
        worst = worst.max(f.residual);
    }
    assert!(worst <= 1e-5, "factorization residual {worst:.3e} > 1e-5");
    finish(
        "criterion 06 intermediate factorization",
        start,
        120.0,
        format!(
            "max ||Lambda E_hat Q_R - E|| / ||E|| = {worst:.3e} <= 1e-5 on 20 points of \
             [{:.0}, {:.0}]",
            bounds.t1, bounds.t2
        ),
    );
}

/// Picks a frequency from the grid whose named zone contains a two-decade
/// window, returning the window.
fn band_window(model: &CoefficientModel, zone: Zone) -> (f64, Vec<f64>) {
    for &xi in log_grid(1e-4, 1e2, 25).iter().rev() {
        let b = zones::boundaries(model, xi);
        match zone {
            Zone::Hyperbolic => {
                if b.t2.is_finite() && b.t2 > 0.0 {
                    let lo = (b.t2 * 1.01).max(1e-3);
                    return (xi, log_grid(lo, lo * 100.0, 17));
                }
            }
            Zone::Intermediate => {
                if b.t1 > 0.0 && b.t2.is_finite() && b.t2 / b.t1 > 150.0 {
                    let lo = b.t1 * 1.001;
                    return (xi, log_grid(lo, (b.t1 * 100.0).min(b.t2 * 0.99), 17));
                }
            }
            Zone::Dissipative => unreachable!("dissipative bands are not part of this criterion"),
        }
    }
    panic!("no frequency on the grid opens a {zone} window");
}

#[test]
fn criterion_07_two_sided_bands() {
    let _g = serial();
    let start = Instant::now();
    let mut detail = Vec::new();
    for (name, model) in [("ex31", ex31()), ("ex35", ex35())] {
        for zone in [Zone::Intermediate, Zone::Hyperbolic] {
            let (xi, grid) = band_window(&model, zone);
            let band = verify::two_sided_band(&model, xi, &grid, zone).unwrap();
            assert!(
                band.band.ratio <= 10.0,
                "{name} {zone} band ratio {} > 10 at xi = {xi}",
                band.band.ratio
            );
            detail.push(format!("{name}/{zone}: ratio {:.2} at xi {xi:.3}", band.band.ratio));
        }
    }
    finish(
        "criterion 07 two-sided estimates",
        start,
        180.0,
        format!("{} (threshold 10)", detail.join(", ")),
    );
}

#[test]
fn criterion_08_decay_rate_and_sigma_independence() {
    let _g = serial();
    let start = Instant::now();
    let xi_grid = log_grid(5e-5, 1e2, 60);
    let t_grid = log_grid(1e2, 1e4, 13);

    let slope_of = |model: &CoefficientModel| -> f64 {
        let report = verify::theorem1_decay(model, &xi_grid, &t_grid).unwrap();
        report.fitted_slopes["slope_vs_t_1e2_1e4"].slope
    };
    let full = slope_of(&ex31());
    assert!(
        (full + 0.2).abs() <= 0.02,
        "fitted decay exponent {full:.4} differs from -0.2 by more than 0.02"
    );
    let shape_only = slope_of(&ex31_shape_only());
    assert!(
        (full - shape_only).abs() <= 0.02,
        "oscillation changed the rate: {full:.4} vs {shape_only:.4} with sigma = 0"
    );
    finish(
        "criterion 08 decay rate -0.2",
        start,
        600.0,
        format!(
            "fitted exponent {full:.4} in -0.2 +- 0.02; sigma = 0 rerun gives {shape_only:.4} \
             (difference {:.4} <= 0.02)",
            (full - shape_only).abs()
        ),
    );
}

#[test]
fn criterion_09_sharpness_of_decay() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let v0 = [Complex64::ONE, Complex64::ZERO];
    let report = verify::theorem2_sharpness(&model, 1.0, v0, &log_grid(10.0, 1e4, 25)).unwrap();
    let band = &report.pass_flags["sharpness_band"];
    let lower = &report.pass_flags["lower_bound"];
    assert!(
        band.passed,
        "lambda ||E v0|| band ratio {:.3} > {}",
        band.observed, band.threshold
    );
    assert!(
        lower.passed,
        "lambda ||E v0|| lower bound {:.3e} not positive enough",
        lower.observed
    );
    finish(
        "criterion 09 sharpness",
        start,
        60.0,
        format!(
            "band ratio {:.3} <= 10, lower bound {:.3e} > 0 over t in [10, 1e4]",
            band.observed, lower.observed
        ),
    );
}

#[test]
fn criterion_10_stabilisation_suite() {
    let _g = serial();
    let start = Instant::now();

    // ex31: S(t)/Theta(t) stays within a factor-2 band over the top decades
    let model = ex31();
    let omega = stabilize::estimate_omega_inf(&model, 1e6).unwrap();
    let rep =
        stabilize::stabilization_functional(&model, omega, &verify::decade_grid(1.0, 1e6, 8))
            .unwrap();
    assert!(rep.pass, "ex31 stabilisation ratio drifts: {:?}", rep.ratio_curve);

    // ex35: the running integral of sigma never exceeds 2 in absolute value
    let zm = stabilize::check_zero_mean(&ex35(), 1e6).unwrap();
    assert!(zm.sup <= 2.0, "ex35 zero-mean sup {} > 2", zm.sup);

    // calculus of stabilising functions on a synthetic set
    let grid = log_grid(1.0, 1e5, 30);
    let f = |t: f64| 3.0 + t.sin() / (1.0 + t).sqrt();

    // uniqueness of the limit
    let good = stabilizes_to(&f, 3.0, &grid).unwrap();
    assert!(good.pass);
    let r_end = good.r_curve.last().unwrap().1;
    assert!(!stabilizes_to(&f, 3.0 + 10.0 * r_end.max(0.02), &grid).unwrap().pass);

    // linearity: residual of f1 + c f2 against alpha1 + c alpha2
    let f2 = |t: f64| 1.0 / (1.0 + t);
    let c = 2.0;
    let r1 = stabilizes_to(&f, 3.0, &grid).unwrap();
    let r2 = stabilizes_to(&f2, 0.0, &grid).unwrap();
    let sum = stabilizes_to(&|t: f64| f(t) + c * f2(t), 3.0, &grid).unwrap();
    assert!(sum.pass);
    for i in 0..grid.len() {
        assert!(sum.r_curve[i].1 <= r1.r_curve[i].1 + c * r2.r_curve[i].1 + 1e-9);
    }

    // monotone bounded-derivative time change
    assert!(stabilizes_to(&|t: f64| f(t / 2.0), 3.0, &grid).unwrap().pass);

    // Lipschitz post-composition contracts residuals by its constant
    let g = |x: f64| 2.0 * (x - 1.0).abs() + 0.5;
    let rg = stabilizes_to(&|t: f64| g(f(t)), g(3.0), &grid).unwrap();
    assert!(rg.pass);
    for i in 0..grid.len() {
        assert!(rg.r_curve[i].1 <= 2.0 * r1.r_curve[i].1 + 1e-9);
    }

    finish(
        "criterion 10 stabilisation suite",
        start,
        120.0,
        format!(
            "ex31 ratio band holds, ex35 zero-mean sup {:.3} <= 2, uniqueness/linearity/\
             time-change/Lipschitz properties hold on the synthetic set",
            zm.sup
        ),
    );
}

#[test]
fn criterion_11_reality_of_delta() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for model in [ex31(), ex35()] {
        let ladder = HypRepresentation::build(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(2028);
        let mut accepted = 0usize;
        while accepted < 100 {
            let xi = 10f64.powf(rng.gen_range(-1.0..1.5));
            let t2 = zones::boundaries(&model, xi).t2;
            if !t2.is_finite() {
                continue;
            }
            let t = t2.max(1e-2) * 1.01 * 10f64.powf(rng.gen_range(0.0..2.0));
            if zones::classify(&model, t, xi) != Zone::Hyperbolic {
                continue;
            }
            accepted += 1;
            for k in 0..=ladder.m {
                let delta = ladder.stages[k].eval(t, xi).delta().value();
                worst = worst.max(delta.im.abs() / delta.norm().max(1e-300));
            }
        }
    }
    assert!(worst <= 1e-10, "relative Im delta {worst:.3e} > 1e-10");
    finish(
        "criterion 11 reality of delta_k",
        start,
        60.0,
        format!("max |Im delta_k| / |delta_k| = {worst:.3e} <= 1e-10 at 100 points per model"),
    );
}

#[test]
fn criterion_12_mode_limit() {
    let _g = serial();
    let start = Instant::now();
    let model = ex31();
    let schedule = verify::default_t_schedule(&model, 1.0, 7);
    let ml = verify::mode_limit(&model, 1.0, &schedule).unwrap();
    let report = ml.report();
    let doubling = &report.pass_flags["doubling_factor_in_1_to_4"];
    let det_band = &report.pass_flags["det_band"];
    assert!(
        doubling.passed,
        "Cauchy residual doubling factor {:.3} outside [1, 4]",
        doubling.observed
    );
    assert!(
        det_band.passed,
        "|det W| band ratio {:.3} > 2",
        det_band.observed
    );
    finish(
        "criterion 12 mode limit",
        start,
        120.0,
        format!(
            "residual doubling factor {:.3} in [1, 4], |det W| band ratio {:.4} <= 2",
            doubling.observed, det_band.observed
        ),
    );
}
