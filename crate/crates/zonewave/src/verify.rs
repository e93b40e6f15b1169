//! Headline experiments: the energy decay rate, two-sided sharpness of the
//! decay through zone-wise norm bands, and the large-time mode limit
//! W(xi) = lim E_*^{-1}(T, xi) E(T, 0, xi).
//!
//! "Same order up to constants" claims are operationalized as band ratios
//! (max/min of a positive curve over at least two decades) against recorded
//! thresholds, and rate claims as least-squares slopes of log-log samples.
//! Thresholds are regression fixtures, not theory constants; every pass flag
//! carries the threshold it was checked against.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::coeffs::{CoeffsError, CoefficientModel};
use crate::diag::{DiagError, HypRepresentation};
use crate::fit::{log_log_fit, LinearFit};
use crate::mat2::Mat2;
use crate::propagator::{solve_E_along, PropagatorError, SolveConfig};
use crate::quad::{self, QuadError};
use crate::zones::{self, Zone};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("xi = {xi:.3e} is below the mode-limit cutoff {cutoff}")]
    XiBelowCutoff { xi: f64, cutoff: f64 },
    #[error("grid point t = {t:.6e}, xi = {xi:.6e} lies in {found}, not in {expected}")]
    PointOutsideZone {
        t: f64,
        xi: f64,
        expected: Zone,
        found: Zone,
    },
    #[error("bad grid: {detail}")]
    BadGrid { detail: String },
    #[error("solve failed at xi = {xi:.6e}")]
    SolveAt {
        xi: f64,
        #[source]
        source: PropagatorError,
    },
    #[error(transparent)]
    Coeffs(#[from] CoeffsError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// min/max/ratio of a positive curve.
#[derive(Debug, Clone, Serialize)]
pub struct BandRatio {
    pub min: f64,
    pub max: f64,
    pub ratio: f64,
}

impl BandRatio {
    pub fn of(values: impl IntoIterator<Item = f64>) -> BandRatio {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        BandRatio {
            min,
            max,
            ratio: max / min,
        }
    }
}

/// A verdict together with the threshold it was judged against.
#[derive(Debug, Clone, Serialize)]
pub struct PassFlag {
    pub passed: bool,
    pub threshold: f64,
    pub observed: f64,
}

impl PassFlag {
    fn at_most(observed: f64, threshold: f64) -> PassFlag {
        PassFlag {
            passed: observed <= threshold,
            threshold,
            observed,
        }
    }

    fn within(observed: f64, center: f64, tol: f64) -> PassFlag {
        PassFlag {
            passed: (observed - center).abs() <= tol,
            threshold: tol,
            observed,
        }
    }
}

/// Named curves, fits, bands, and verdicts of one experiment.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
    pub fitted_slopes: BTreeMap<String, LinearFit>,
    pub band_ratios: BTreeMap<String, BandRatio>,
    pub pass_flags: BTreeMap<String, PassFlag>,
    /// Free-text caveats (grid approximations, degenerate cases).
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.pass_flags.values().all(|f| f.passed)
    }
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The default frequency grid for essential-sup approximations: 60 log-uniform
/// points spanning 1e-4 .. 1e2 (all three zones at any fixed time).
pub fn default_xi_grid() -> Vec<f64> {
    log_grid(1e-4, 1e2, 60)
}

/// Log-uniform time grid with a fixed sample density per decade.
pub fn decade_grid(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let decades = (b / a).log10();
    let n = ((decades * per_decade as f64).ceil() as usize + 1).max(2);
    log_grid(a, b, n)
}

/// diag(|xi|/<xi>, 1) with <xi> = sqrt(1 + xi^2): the weight that encodes the
/// H^1 x L^2 data norm on the Fourier side.
pub fn energy_weight(xi: f64) -> Mat2 {
    Mat2::diag(
        Complex64::new(xi.abs() / (1.0 + xi * xi).sqrt(), 0.0),
        Complex64::ONE,
    )
}

fn vec_norm(v: [Complex64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Builds a rayon pool honoring the ZONEWAVE_THREADS cap.
pub fn worker_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("ZONEWAVE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        builder = builder.num_threads(n);
    }
    builder.build().expect("worker pool")
}

/// Norm samples of the weighted propagator over a (xi, t) product grid.
pub struct DecaySamples {
    pub xi_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// weighted[i][j] = ||E(t_j, 0, xi_i) energy_weight(xi_i)||
    pub weighted: Vec<Vec<f64>>,
    /// raw[i][j] = ||E(t_j, 0, xi_i)||
    pub raw: Vec<Vec<f64>>,
}

impl DecaySamples {
    /// sup over the frequency grid at each time; a fold in fixed xi order,
    /// deterministic for any worker count.
    pub fn sup_weighted(&self) -> Vec<f64> {
        self.sup_of(&self.weighted)
    }

    pub fn sup_raw(&self) -> Vec<f64> {
        self.sup_of(&self.raw)
    }

    fn sup_of(&self, table: &[Vec<f64>]) -> Vec<f64> {
        let mut sup = vec![f64::NEG_INFINITY; self.t_grid.len()];
        for row in table {
            for (s, &v) in sup.iter_mut().zip(row) {
                *s = s.max(v);
            }
        }
        sup
    }
}

/// One forward sweep per frequency, fanned out over `threads` workers
/// (ZONEWAVE_THREADS / all cores when None). Results are keyed by grid index,
/// so the reduction is deterministic regardless of scheduling.
pub fn sample_decay_norms(
    model: &CoefficientModel,
    xi_grid: &[f64],
    t_grid: &[f64],
    rel_tol: f64,
    threads: Option<usize>,
) -> Result<DecaySamples, VerifyError> {
    check_grid(xi_grid, "xi_grid")?;
    check_grid(t_grid, "t_grid")?;
    let cfg = SolveConfig::with_rel_tol(rel_tol);
    let pool = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool"),
        None => worker_pool(),
    };
    use rayon::prelude::*;
    let rows: Result<Vec<(Vec<f64>, Vec<f64>)>, VerifyError> = pool.install(|| {
        xi_grid
            .par_iter()
            .map(|&xi| {
                let mats = solve_E_along(model, xi, 0.0, t_grid, &cfg)
                    .map_err(|source| VerifyError::SolveAt { xi, source })?;
                let weight = energy_weight(xi);
                let weighted = mats.iter().map(|e| (*e * weight).norm()).collect();
                let raw = mats.iter().map(Mat2::norm).collect();
                Ok((weighted, raw))
            })
            .collect()
    });
    let rows = rows?;
    Ok(DecaySamples {
        xi_grid: xi_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        weighted: rows.iter().map(|r| r.0.clone()).collect(),
        raw: rows.into_iter().map(|r| r.1).collect(),
    })
}

fn check_grid(g: &[f64], name: &str) -> Result<(), VerifyError> {
    if g.is_empty() {
        return Err(VerifyError::BadGrid {
            detail: format!("{name} is empty"),
        });
    }
    if g.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VerifyError::BadGrid {
            detail: format!("{name} must be strictly increasing"),
        });
    }
    Ok(())
}

/// Two-sided norm estimate in one zone: the curve
/// ||E(t, s_ref, xi)|| lambda(t) / lambda(s_ref) over `t_grid`, where s_ref
/// is the entry time of the zone at this frequency. The two-sided estimate
/// predicts a bounded band.
#[derive(Debug, Clone, Serialize)]
pub struct TwoSidedBand {
    pub zone: String,
    pub xi: f64,
    pub s_ref: f64,
    pub threshold: f64,
    /// (t, ||E(t, s_ref)|| lambda(t)/lambda(s_ref))
    pub curve: Vec<(f64, f64)>,
    pub band: BandRatio,
}

impl TwoSidedBand {
    pub fn passed(&self) -> bool {
        self.band.ratio <= self.threshold
    }
}

pub const DEFAULT_BAND_THRESHOLD: f64 = 10.0;

pub fn two_sided_band(
    model: &CoefficientModel,
    xi: f64,
    t_grid: &[f64],
    zone: Zone,
) -> Result<TwoSidedBand, VerifyError> {
    two_sided_band_with(model, xi, t_grid, zone, &SolveConfig::default())
}

pub fn two_sided_band_with(
    model: &CoefficientModel,
    xi: f64,
    t_grid: &[f64],
    zone: Zone,
    cfg: &SolveConfig,
) -> Result<TwoSidedBand, VerifyError> {
    check_grid(t_grid, "t_grid")?;
    for &t in t_grid {
        let found = zones::classify(model, t, xi);
        if found != zone {
            return Err(VerifyError::PointOutsideZone {
                t,
                xi,
                expected: zone,
                found,
            });
        }
    }
    let bounds = zones::boundaries(model, xi);
    let s_ref = match zone {
        Zone::Dissipative => 0.0,
        Zone::Intermediate => bounds.t1,
        Zone::Hyperbolic => bounds.t2,
    };
    if t_grid[0] < s_ref {
        return Err(VerifyError::BadGrid {
            detail: format!(
                "t_grid starts at {:.6e}, before the zone entry time {s_ref:.6e}",
                t_grid[0]
            ),
        });
    }
    let mats = solve_E_along(model, xi, s_ref, t_grid, cfg)
        .map_err(|source| VerifyError::SolveAt { xi, source })?;
    let lambda_ref = model.lambda(s_ref)?;
    let mut curve = Vec::with_capacity(t_grid.len());
    for (&t, e) in t_grid.iter().zip(&mats) {
        curve.push((t, e.norm() * model.lambda(t)? / lambda_ref));
    }
    let band = BandRatio::of(curve.iter().map(|p| p.1));
    Ok(TwoSidedBand {
        zone: zone.to_string(),
        xi,
        s_ref,
        threshold: DEFAULT_BAND_THRESHOLD,
        curve,
        band,
    })
}

/// The a-priori decay estimate: G(t) = sup_xi ||E(t,0,xi) energy_weight(xi)||
/// tracks lambda(t)^{-1}. Emits the G and G*lambda curves, the slope of
/// log G against log lambda (target -1), the slope against log t over
/// [1e2, 1e4] when enough points fall there, and the G*lambda band.
pub fn theorem1_decay(
    model: &CoefficientModel,
    xi_grid: &[f64],
    t_grid: &[f64],
) -> Result<VerificationReport, VerifyError> {
    let samples = sample_decay_norms(model, xi_grid, t_grid, 1e-8, None)?;
    let sup = samples.sup_weighted();
    let mut report = VerificationReport::default();
    report.notes.push(format!(
        "sup over xi is a grid approximation: {} log-uniform points in [{:.3e}, {:.3e}]",
        xi_grid.len(),
        xi_grid[0],
        xi_grid[xi_grid.len() - 1]
    ));

    let lambdas: Result<Vec<f64>, CoeffsError> =
        t_grid.iter().map(|&t| model.lambda(t)).collect();
    let lambdas = lambdas?;

    report.curves.insert(
        "G".into(),
        t_grid.iter().copied().zip(sup.iter().copied()).collect(),
    );
    let g_lambda: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(sup.iter().zip(&lambdas))
        .map(|(&t, (&g, &l))| (t, g * l))
        .collect();
    report.curves.insert("G_lambda".into(), g_lambda.clone());
    let band = BandRatio::of(g_lambda.iter().map(|p| p.1));
    report
        .pass_flags
        .insert("G_lambda_band".into(), PassFlag::at_most(band.ratio, DEFAULT_BAND_THRESHOLD));
    report.band_ratios.insert("G_lambda".into(), band);

    let lambda_band = BandRatio::of(lambdas.iter().copied());
    if lambda_band.ratio - 1.0 < 1e-9 {
        // lambda is constant (b essentially free): the rate claim is vacuous
        // and G itself must be flat, which the band flag above checks
        report
            .notes
            .push("lambda is constant on this grid; slope fit degenerate, band flag decides".into());
        report.pass_flags.insert(
            "slope_vs_lambda_degenerate".into(),
            PassFlag::within(0.0, 0.0, 0.1),
        );
        return Ok(report);
    }

    let vs_lambda: Vec<(f64, f64)> = lambdas.iter().copied().zip(sup.iter().copied()).collect();
    let fit = log_log_fit(&vs_lambda);
    report
        .pass_flags
        .insert("slope_vs_lambda".into(), PassFlag::within(fit.slope, -1.0, 0.1));
    report.fitted_slopes.insert("slope_vs_lambda".into(), fit);

    let window: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&sup)
        .filter(|(&t, _)| (1e2..=1e4).contains(&t))
        .map(|(&t, &g)| (t, g))
        .collect();
    if window.len() >= 5 {
        report
            .fitted_slopes
            .insert("slope_vs_t_1e2_1e4".into(), log_log_fit(&window));
    }
    Ok(report)
}

/// Sharpness of the decay rate along one frequency: lambda(t) ||E(t,0,xi0) V0||
/// stays in a bounded band with a strictly positive floor.
pub fn theorem2_sharpness(
    model: &CoefficientModel,
    xi0: f64,
    v0: [Complex64; 2],
    t_grid: &[f64],
) -> Result<VerificationReport, VerifyError> {
    check_grid(t_grid, "t_grid")?;
    let v0_norm = vec_norm(v0);
    assert!(v0_norm > 0.0, "V0 must be nonzero");
    let cfg = SolveConfig::default();
    let mats = solve_E_along(model, xi0, 0.0, t_grid, &cfg)
        .map_err(|source| VerifyError::SolveAt { xi: xi0, source })?;
    let mut curve = Vec::with_capacity(t_grid.len());
    for (&t, e) in t_grid.iter().zip(&mats) {
        curve.push((t, model.lambda(t)? * vec_norm(e.apply(v0))));
    }
    let band = BandRatio::of(curve.iter().map(|p| p.1));
    let mut report = VerificationReport::default();
    report
        .pass_flags
        .insert("sharpness_band".into(), PassFlag::at_most(band.ratio, DEFAULT_BAND_THRESHOLD));
    report.pass_flags.insert(
        "lower_bound".into(),
        PassFlag {
            passed: band.min >= 1e-3 * v0_norm,
            threshold: 1e-3 * v0_norm,
            observed: band.min,
        },
    );
    report.band_ratios.insert("lambda_norm".into(), band);
    report.curves.insert("lambda_norm".into(), curve);
    Ok(report)
}

/// The reference propagator of the mode limit: for t past the hyperbolic
/// entry time t_ref,
///
/// ```text
/// E_*(t) = M diag(e^{i int_{t_ref}^t tau_m^+}, e^{i int tau_m^-}) M^{-1} / lambda(t_ref)
/// ```
///
/// With b = 0 the phases are ±xi (t - t_ref) and this is exactly the free
/// propagator.
pub fn e_star(lambda_ref: f64, phase_plus: Complex64, phase_minus: Complex64) -> Mat2 {
    let i = Complex64::i();
    let m = crate::diag::m_matrix();
    let m_inv = crate::diag::m_matrix_inv();
    (m * Mat2::diag((i * phase_plus).exp(), (i * phase_minus).exp()) * m_inv)
        .scale(Complex64::new(1.0 / lambda_ref, 0.0))
}

/// Samples of W(T) = E_*^{-1}(T) E(T, 0, xi) along a time schedule, with the
/// Cauchy residuals ||W(T_{k+1}) - W(T_k)|| and the |det W| band.
#[derive(Debug, Clone)]
pub struct ModeLimit {
    pub xi: f64,
    /// Hyperbolic entry time t_xi the reference propagator is anchored at.
    pub t_ref: f64,
    pub w_samples: Vec<(f64, Mat2)>,
    pub cauchy_residuals: Vec<f64>,
    /// residual[k] / residual[k+1] for a doubling schedule.
    pub doubling_factors: Vec<f64>,
    pub det_band: BandRatio,
    /// |det W| predicted by the Liouville identity:
    /// exp(-int_0^{t_ref} sigma) prod_k (1 - d_k(t_ref))^{-1}.
    pub predicted_det: f64,
}

pub const MODE_LIMIT_XI_CUTOFF: f64 = 0.1;

impl ModeLimit {
    pub fn report(&self) -> VerificationReport {
        let mut report = VerificationReport::default();
        report.curves.insert(
            "cauchy_residual".into(),
            self.w_samples
                .iter()
                .skip(1)
                .map(|s| s.0)
                .zip(self.cauchy_residuals.iter().copied())
                .collect(),
        );
        report.curves.insert(
            "abs_det_w".into(),
            self.w_samples
                .iter()
                .map(|(t, w)| (*t, w.det().norm()))
                .collect(),
        );
        let tail_decreasing = self
            .cauchy_residuals
            .windows(2)
            .rev()
            .take(3)
            .all(|w| w[1] < w[0]);
        report.pass_flags.insert(
            "residuals_eventually_decreasing".into(),
            PassFlag {
                passed: tail_decreasing,
                threshold: 1.0,
                observed: self
                    .doubling_factors
                    .last()
                    .copied()
                    .unwrap_or(f64::NAN),
            },
        );
        let geom = geometric_mean(&self.doubling_factors);
        report.pass_flags.insert(
            "doubling_factor_in_1_to_4".into(),
            PassFlag {
                passed: (1.0..=4.0).contains(&geom),
                threshold: 4.0,
                observed: geom,
            },
        );
        report
            .pass_flags
            .insert("det_band".into(), PassFlag::at_most(self.det_band.ratio, 2.0));
        let last_det = self
            .w_samples
            .last()
            .map(|(_, w)| w.det().norm())
            .unwrap_or(f64::NAN);
        let rel = last_det / self.predicted_det;
        report.pass_flags.insert(
            "det_matches_liouville".into(),
            PassFlag {
                passed: (0.5..=2.0).contains(&rel),
                threshold: 2.0,
                observed: rel,
            },
        );
        report.band_ratios.insert("abs_det_w".into(), self.det_band.clone());
        report
    }

    pub fn passed(&self) -> bool {
        self.report().passed()
    }
}

fn geometric_mean(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

/// A doubling schedule T_0 2^k starting a factor 4 past the hyperbolic entry.
pub fn default_t_schedule(model: &CoefficientModel, xi: f64, doublings: usize) -> Vec<f64> {
    let t_ref = zones::boundaries(model, xi).t2.max(1.0);
    (0..=doublings)
        .map(|k| 4.0 * t_ref * (1u64 << k) as f64)
        .collect()
}

pub fn mode_limit(
    model: &CoefficientModel,
    xi: f64,
    t_schedule: &[f64],
) -> Result<ModeLimit, VerifyError> {
    if xi < MODE_LIMIT_XI_CUTOFF {
        return Err(VerifyError::XiBelowCutoff {
            xi,
            cutoff: MODE_LIMIT_XI_CUTOFF,
        });
    }
    check_grid(t_schedule, "t_schedule")?;
    if t_schedule.len() < 3 {
        return Err(VerifyError::BadGrid {
            detail: "t_schedule needs at least 3 samples for Cauchy residuals".into(),
        });
    }
    let t_ref = zones::boundaries(model, xi).t2;
    if t_schedule[0] <= t_ref {
        return Err(VerifyError::BadGrid {
            detail: format!(
                "t_schedule starts at {:.6e}, not past the hyperbolic entry {t_ref:.6e}",
                t_schedule[0]
            ),
        });
    }

    let ladder = HypRepresentation::build(model);
    ladder.check_zone_guard(xi, t_ref.max(1e-12), *t_schedule.last().unwrap())?;
    let stage_m = &ladder.stages[ladder.m];

    // phase integrals accumulated interval by interval along the schedule
    let mut phases = Vec::with_capacity(t_schedule.len());
    let mut acc_p = Complex64::ZERO;
    let mut acc_m = Complex64::ZERO;
    let mut lo = t_ref;
    for &hi in t_schedule {
        let breaks = model.sigma_breakpoints(lo, hi);
        acc_p += quad::integrate(&|t: f64| stage_m.eval(t, xi).tau_plus.value(), lo, hi, 1e-11, 1e-13, &breaks)?;
        acc_m += quad::integrate(&|t: f64| stage_m.eval(t, xi).tau_minus.value(), lo, hi, 1e-11, 1e-13, &breaks)?;
        phases.push((acc_p, acc_m));
        lo = hi;
    }

    let lambda_ref = model.lambda(t_ref)?;
    let cfg = SolveConfig::default();
    let mats = solve_E_along(model, xi, 0.0, t_schedule, &cfg)
        .map_err(|source| VerifyError::SolveAt { xi, source })?;

    let mut w_samples = Vec::with_capacity(t_schedule.len());
    for ((&t, e), &(php, phm)) in t_schedule.iter().zip(&mats).zip(&phases) {
        let star = e_star(lambda_ref, php, phm);
        let w = star.inverse().expect("E_* is invertible") * *e;
        w_samples.push((t, w));
    }

    let cauchy_residuals: Vec<f64> = w_samples
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).norm())
        .collect();
    let doubling_factors: Vec<f64> = cauchy_residuals
        .windows(2)
        .map(|r| r[0] / r[1])
        .collect();
    let det_band = BandRatio::of(w_samples.iter().map(|(_, w)| w.det().norm()));

    let mut predicted_det = (-model.sigma_integral(t_ref)?).exp();
    for d in ladder.d_values(t_ref, xi) {
        predicted_det /= 1.0 - d;
    }

    Ok(ModeLimit {
        xi,
        t_ref,
        w_samples,
        cauchy_residuals,
        doubling_factors,
        det_band,
        predicted_det,
    })
}
