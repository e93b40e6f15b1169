//! Stepwise diagonalization of the hyperbolic-zone system and the zone
//! factorizations built on top of it.
//!
//! After conjugating the first-order system by M = [[1, -1], [1, 1]] the
//! generator splits as D_0 + R_0 with D_0 = diag(xi + i b, -xi + i b)
//! and R_0 = i b [[0, 1], [1, 0]]. Each step k conjugates by
//! N_k = I + (antidiagonal of R_k)/delta_k, chosen so [D_k, N_k] = -R_k,
//! which pushes the remainder one order further down in 1/(xi Xi(t)).
//! After m steps the remainder R_m is integrable over the hyperbolic zone
//! and the propagator factors as
//!
//! ```text
//! E(t, s, xi) = T(t) diag(e^{i int tau_m^+}, e^{i int tau_m^-}) Q_m(t, s) T(s)^{-1}
//! ```
//!
//! with T(x) = M N_0(x) ... N_{m-1}(x) and Q_m a Peano-Baker series of the
//! phase-conjugated remainder. The intermediate zone gets its own
//! factorization E = Lambda E_hat_mu Q_R around the auxiliary propagator.
//!
//! All stage symbols are truncated Taylor jets in t; one derivative order is
//! consumed per step, so stage k carries jets of order m - k and requesting
//! more is a programming error, not a numerical one.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::coeffs::{CoeffsError, CoefficientModel};
use crate::jet::ComplexJet;
use crate::mat2::Mat2;
use crate::propagator::{self, PropagatorError, SolveConfig};
use crate::quad::{self, PanelGrid, QuadError};
use crate::stabilize::{estimate_omega_inf, StabilizeError};
use crate::zones;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error(
        "zone constant too small: |d_{k}| = {max_d:.3e} >= 1/2 at t = {at_t:.6e}, xi = {at_xi:.6e}; \
         minimal admissible zone constant is about {minimal_n:.6}"
    )]
    ZoneConstantTooSmall {
        k: usize,
        max_d: f64,
        at_t: f64,
        at_xi: f64,
        minimal_n: f64,
    },
    #[error(
        "Peano-Baker series bound diverges: int ||G|| = {integral:.3e} > 30; \
         the generator is not integrable enough on this span"
    )]
    SeriesDiverges { integral: f64 },
    #[error("point outside the required zone: {detail}")]
    OutsideZone { detail: String },
    #[error(
        "factorization does not reproduce the propagator: relative residual {residual:.3e} \
         exceeds {tol:.3e}"
    )]
    FactorizationMismatch { residual: f64, tol: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Coeffs(#[from] CoeffsError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Stabilize(#[from] StabilizeError),
}

/// The symbols of one diagonalization stage at a single (t, xi), as jets in t.
///
/// `beta_bar` is carried alongside `beta` rather than derived by conjugation;
/// the construction keeps beta_bar = conj(beta) identically, and the measured
/// gap (`hermiticity_residual`) doubles as a consistency check on the jet
/// arithmetic.
#[derive(Debug, Clone)]
pub struct StageJets {
    pub tau_plus: ComplexJet,
    pub tau_minus: ComplexJet,
    pub beta: ComplexJet,
    pub beta_bar: ComplexJet,
}

impl StageJets {
    /// delta_k = tau_k^+ - tau_k^-; real-valued on the hyperbolic zone.
    pub fn delta(&self) -> ComplexJet {
        self.tau_plus.sub(&self.tau_minus)
    }

    /// d_k = |beta_k|^2 / delta_k^2 as a jet (product of beta/delta and
    /// conj(beta)/delta), so that det N_k = 1 - d_k.
    pub fn d_jet(&self) -> ComplexJet {
        let delta = self.delta();
        self.beta.div(&delta).mul(&self.beta_bar.div(&delta))
    }

    pub fn d_value(&self) -> f64 {
        self.d_jet().value().re
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for k in 0..=self.beta.order().min(self.beta_bar.order()) {
            r = r.max((self.beta_bar.d(k) - self.beta.d(k).conj()).norm());
        }
        r
    }
}

/// One stage of the ladder: a pure evaluator (t, xi) -> StageJets carrying
/// jets of order `order` = m - k.
#[derive(Clone)]
pub struct DiagStage {
    pub k: usize,
    pub order: usize,
    eval: Arc<dyn Fn(f64, f64) -> StageJets + Send + Sync>,
}

impl DiagStage {
    pub fn eval(&self, t: f64, xi: f64) -> StageJets {
        (self.eval)(t, xi)
    }

    /// N_k(t, xi) = I + [[0, -(R_k)_{12}/delta], [(R_k)_{21}/delta, 0]].
    pub fn n_matrix(&self, t: f64, xi: f64) -> Mat2 {
        self.n_matrix_with_derivative(t, xi).0
    }

    /// N_k and its entrywise t-derivative (needs jet order >= 1).
    pub fn n_matrix_with_derivative(&self, t: f64, xi: f64) -> (Mat2, Mat2) {
        let s = self.eval(t, xi);
        let delta = s.delta();
        let p = s.beta.div(&delta);
        let q = s.beta_bar.div(&delta);
        let i = Complex64::i();
        let n = Mat2::new(
            Complex64::ONE,
            -i * q.value(),
            i * p.value(),
            Complex64::ONE,
        );
        let dn = if p.order() >= 1 {
            Mat2::new(Complex64::ZERO, -i * q.d(1), i * p.d(1), Complex64::ZERO)
        } else {
            Mat2::new(
                Complex64::new(f64::NAN, 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::ZERO,
            )
        };
        (n, dn)
    }
}

/// Stage 0 in the M-conjugated frame: tau_0^± = ±xi + i b(t), beta_0 = b(t).
pub fn stage0(model: &CoefficientModel) -> DiagStage {
    let order = model.m;
    let model = model.clone();
    DiagStage {
        k: 0,
        order,
        eval: Arc::new(move |t, xi| {
            assert!(xi > 0.0, "stages are defined for xi > 0");
            let b = ComplexJet::from_real(&model.b_jet_order(t, order));
            let ib = b.scale(Complex64::i());
            let xi_jet = ComplexJet::constant(Complex64::new(xi, 0.0), order);
            StageJets {
                tau_plus: xi_jet.add(&ib),
                tau_minus: xi_jet.neg().add(&ib),
                beta: b.clone(),
                beta_bar: b,
            }
        }),
    }
}

pub type NkEvaluator = Arc<dyn Fn(f64, f64) -> Mat2 + Send + Sync>;

/// One diagonalization step: consumes one jet order, returns the N_k
/// evaluator and the next stage.
///
/// With p = beta/delta, q = beta_bar/delta and d = p q, the conjugated
/// generator picks up C = N_k^{-1} B^{(k+1)}, B^{(k+1)} = D_t N_k - R_k (N_k - I):
///
/// ```text
/// C = (1 - d)^{-1} [ d delta + i q p'     -(q' + i d delta q) ]
///                  [ p' - i d delta p     -d delta + i p q'   ]
/// ```
///
/// giving tau_{k+1}^± = tau_k^± - C_{11/22} and R_{k+1} = -offdiag(C), i.e.
/// beta_{k+1} = i C_{21}, beta_bar_{k+1} = i C_{12}. The diagonal update
/// carries the imaginary correction -i d' / (2 (1 - d)) on both entries, so
/// delta_{k+1} stays real.
pub fn diag_step(stage: &DiagStage) -> (NkEvaluator, DiagStage) {
    assert!(
        stage.order >= 1,
        "stage {} has exhausted its jet order; the ladder supports only m steps",
        stage.k
    );
    let prev = stage.eval.clone();
    let next_order = stage.order - 1;
    let next_eval = Arc::new(move |t: f64, xi: f64| {
        let s = prev(t, xi);
        let i = Complex64::i();
        let delta = s.delta();
        let p = s.beta.div(&delta);
        let q = s.beta_bar.div(&delta);
        let d = p.mul(&q);
        let p_prime = p.derivative();
        let q_prime = q.derivative();
        let d_delta = d.mul(&delta).truncated(next_order);
        let one_minus_d = ComplexJet::constant(Complex64::ONE, next_order)
            .sub(&d.truncated(next_order));
        let c11 = d_delta.add(&q.mul(&p_prime).scale(i)).div(&one_minus_d);
        let c22 = d_delta
            .neg()
            .add(&p.mul(&q_prime).scale(i))
            .div(&one_minus_d);
        let c21 = p_prime.sub(&d_delta.mul(&p).scale(i)).div(&one_minus_d);
        let c12 = q_prime
            .add(&d_delta.mul(&q).scale(i))
            .neg()
            .div(&one_minus_d);
        StageJets {
            tau_plus: s.tau_plus.truncated(next_order).sub(&c11),
            tau_minus: s.tau_minus.truncated(next_order).sub(&c22),
            beta: c21.scale(i),
            beta_bar: c12.scale(i),
        }
    });
    let next = DiagStage {
        k: stage.k + 1,
        order: next_order,
        eval: next_eval,
    };
    let this = stage.clone();
    let n_eval: NkEvaluator = Arc::new(move |t, xi| this.n_matrix(t, xi));
    (n_eval, next)
}

pub fn m_matrix() -> Mat2 {
    Mat2::new(
        Complex64::ONE,
        -Complex64::ONE,
        Complex64::ONE,
        Complex64::ONE,
    )
}

pub fn m_matrix_inv() -> Mat2 {
    let h = Complex64::new(0.5, 0.0);
    Mat2::new(h, h, -h, h)
}

/// The complete ladder for a model: stages 0..=m plus the assembly helpers.
pub struct HypRepresentation {
    pub m: usize,
    pub stages: Vec<DiagStage>,
    model: CoefficientModel,
}

impl HypRepresentation {
    pub fn build(model: &CoefficientModel) -> HypRepresentation {
        let m = model.m;
        let mut stages = Vec::with_capacity(m + 1);
        stages.push(stage0(model));
        for _ in 0..m {
            let (_, next) = diag_step(stages.last().unwrap());
            stages.push(next);
        }
        HypRepresentation {
            m,
            stages,
            model: model.clone(),
        }
    }

    /// d_k values for the dividing stages k = 0..m-1.
    pub fn d_values(&self, t: f64, xi: f64) -> Vec<f64> {
        (0..self.m)
            .map(|k| self.stages[k].eval(t, xi).d_value())
            .collect()
    }

    /// T(x) = M N_0(x) ... N_{m-1}(x).
    pub fn t_factor(&self, t: f64, xi: f64) -> Mat2 {
        let mut out = m_matrix();
        for k in 0..self.m {
            out = out * self.stages[k].n_matrix(t, xi);
        }
        out
    }

    /// Guards |d_k| < 1/2 on a sample of [s, t]; on failure reports the
    /// minimal zone constant that would push the hyperbolic boundary past
    /// the offending times.
    pub fn check_zone_guard(&self, xi: f64, s: f64, t: f64) -> Result<(), DiagError> {
        let samples = log_samples(s.max(1e-12), t, 120);
        let mut worst: Option<(usize, f64, f64)> = None;
        let mut last_bad: Option<f64> = None;
        for &tau in &samples {
            for (k, d) in self.d_values(tau, xi).iter().enumerate() {
                if d.abs() >= 0.5 {
                    last_bad = Some(tau);
                    if worst.map(|(_, _, w)| d.abs() > w).unwrap_or(true) {
                        worst = Some((k, tau, d.abs()));
                    }
                }
            }
        }
        if let Some((k, at_t, max_d)) = worst {
            let bad = last_bad.unwrap();
            let t_star = samples
                .iter()
                .copied()
                .find(|&tau| tau > bad)
                .unwrap_or(t);
            return Err(DiagError::ZoneConstantTooSmall {
                k,
                max_d,
                at_t,
                at_xi: xi,
                minimal_n: xi * self.model.theta(t_star),
            });
        }
        Ok(())
    }

    /// Q_m(t, s, xi) and the phase integrals int_s^t tau_m^± on one shared
    /// panel grid, so the assembled factorization is self-consistent.
    pub fn q_m_with_phases(
        &self,
        xi: f64,
        s: f64,
        t: f64,
        tol: f64,
    ) -> Result<(Mat2, Complex64, Complex64), DiagError> {
        assert!(s <= t, "phase integrals run forward in time");
        if s == t {
            return Ok((Mat2::identity(), Complex64::ZERO, Complex64::ZERO));
        }
        let grid = self.phase_grid(xi, s, t);
        let stage_m = &self.stages[self.m];
        let jets: Vec<StageJets> = grid.sample(|tau| stage_m.eval(tau, xi));
        let tau_p: Vec<Complex64> = jets.iter().map(|j| j.tau_plus.value()).collect();
        let tau_m: Vec<Complex64> = jets.iter().map(|j| j.tau_minus.value()).collect();
        let cum_p = grid.cumulative(&tau_p);
        let cum_m = grid.cumulative(&tau_m);
        let i = Complex64::i();
        let g_nodes: Vec<Mat2> = (0..grid.nodes.len())
            .map(|idx| {
                // G = i Phi^{-1} R_m Phi with R_m = i [[0, beta_bar], [beta, 0]]
                // and Phi = diag(e^{i phi+}, e^{i phi-})
                let rot = (i * (cum_m.at_nodes[idx] - cum_p.at_nodes[idx])).exp();
                Mat2::new(
                    Complex64::ZERO,
                    -jets[idx].beta_bar.value() * rot,
                    -jets[idx].beta.value() / rot,
                    Complex64::ZERO,
                )
            })
            .collect();
        let q = peano_baker_on(&grid, &g_nodes, tol)?;
        let panels = grid.panels();
        Ok((q, cum_p.at_breaks[panels], cum_m.at_breaks[panels]))
    }

    /// E(t, s, xi) assembled from the ladder; both (s, xi) and (t, xi) must
    /// lie in the hyperbolic zone.
    pub fn reconstruct(&self, xi: f64, s: f64, t: f64, tol: f64) -> Result<Mat2, DiagError> {
        assert!(s <= t);
        self.check_zone_guard(xi, s, t)?;
        let (q, phase_p, phase_m) = self.q_m_with_phases(xi, s, t, tol)?;
        let i = Complex64::i();
        let phase = Mat2::diag((i * phase_p).exp(), (i * phase_m).exp());
        let t_s_inv = self
            .t_factor(s, xi)
            .inverse()
            .expect("N_k are invertible when |d_k| < 1/2");
        Ok(self.t_factor(t, xi) * phase * q * t_s_inv)
    }

    /// Im tau_m = b + sum_{k=0}^{m-1} d_k' / (2 (d_k - 1)): the dissipation
    /// rate left on the diagonal after m steps. Every stage that divides by
    /// 1 - d_k contributes; the k = 0 term is genuinely present.
    pub fn im_tau_m(&self, xi: f64, t: f64) -> f64 {
        let mut acc = self.model.b(t);
        for k in 0..self.m {
            let d = self.stages[k].eval(t, xi).d_jet();
            acc += d.d(1).re / (2.0 * (d.value().re - 1.0));
        }
        acc
    }

    fn phase_grid(&self, xi: f64, s: f64, t: f64) -> PanelGrid {
        let mut breaks = vec![s, t];
        breaks.extend(self.model.sigma_breakpoints(s, t));
        breaks.extend(quad::dyadic_breakpoints(s, t, (t - s) * 1e-4, 1.5));
        // the conjugated remainder oscillates at frequency ~ delta ~ 2 xi;
        // keep panels to a few wavelengths
        let span = t - s;
        let mut step = 4.0 * PI / xi;
        let max_panels = 20_000.0;
        if span / step > max_panels {
            step = span / max_panels;
        }
        if step < span {
            let mut x = s + step;
            while x < t {
                breaks.push(x);
                x += step;
            }
        }
        PanelGrid::new(quad::merge_breakpoints(breaks), 24)
    }
}

fn log_samples(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b >= a && n >= 2);
    let la = a.ln();
    let lb = b.ln();
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Sums the Peano-Baker series on a fixed panel grid from precomputed
/// generator samples. Terms are added until the factorial tail bound
/// (int ||G||)^k / k! drops below tol.
fn peano_baker_on(grid: &PanelGrid, g_nodes: &[Mat2], tol: f64) -> Result<Mat2, DiagError> {
    let panels = grid.panels();
    let norms: Vec<f64> = g_nodes.iter().map(Mat2::norm).collect();
    let i1 = grid.integral(&norms);
    if !i1.is_finite() || i1 > 30.0 {
        return Err(DiagError::SeriesDiverges { integral: i1 });
    }
    let mut q = Mat2::identity();
    let cum = grid.cumulative(g_nodes);
    q = q + cum.at_breaks[panels];
    let mut term_nodes = cum.at_nodes;
    let mut bound = i1;
    for k in 2..=130usize {
        bound *= i1 / k as f64;
        if bound < tol && k > 2 {
            break;
        }
        let integrand: Vec<Mat2> = g_nodes
            .iter()
            .zip(&term_nodes)
            .map(|(g, term)| *g * *term)
            .collect();
        let cum = grid.cumulative(&integrand);
        let term_end = cum.at_breaks[panels];
        q = q + term_end;
        term_nodes = cum.at_nodes;
        if term_end.norm() < 1e-17 * q.norm() {
            break;
        }
    }
    Ok(q)
}

/// Peano-Baker series for an arbitrary generator: the propagator Q(t, s) of
/// y' = G(t) y as an iterated-integral series. Structure finer than the
/// default grid (64 panels plus geometric refinement) must be announced via
/// `extra_breaks`.
pub fn peano_baker<F: Fn(f64) -> Mat2>(
    g: F,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<Mat2, DiagError> {
    peano_baker_with_breakpoints(g, s, t, tol, &[])
}

pub fn peano_baker_with_breakpoints<F: Fn(f64) -> Mat2>(
    g: F,
    s: f64,
    t: f64,
    tol: f64,
    extra_breaks: &[f64],
) -> Result<Mat2, DiagError> {
    assert!(s <= t, "the series is summed forward in time");
    if s == t {
        return Ok(Mat2::identity());
    }
    let mut breaks = vec![s, t];
    let span = t - s;
    for i in 1..64 {
        breaks.push(s + span * i as f64 / 64.0);
    }
    breaks.extend(
        extra_breaks
            .iter()
            .copied()
            .filter(|&x| x > s && x < t),
    );
    let grid = PanelGrid::new(quad::merge_breakpoints(breaks), 24);
    let g_nodes: Vec<Mat2> = grid.sample(|tau| g(tau));
    peano_baker_on(&grid, &g_nodes, tol)
}

/// E(t, s, xi) on the hyperbolic zone via the m-step ladder.
pub fn reconstruct_hyp(
    model: &CoefficientModel,
    xi: f64,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<Mat2, DiagError> {
    HypRepresentation::build(model).reconstruct(xi, s, t, tol)
}

/// Im tau_m at (t, xi); see HypRepresentation::im_tau_m.
pub fn im_tau_m(model: &CoefficientModel, xi: f64, t: f64) -> f64 {
    HypRepresentation::build(model).im_tau_m(xi, t)
}

/// The intermediate-zone factorization E = Lambda E_hat_mu Q_R.
#[derive(Debug, Clone)]
pub struct IntermediateFactorization {
    pub lambda: Mat2,
    pub e_hat: Mat2,
    pub q_r: Mat2,
    /// omega_hat_inf(s) used for the auxiliary frame.
    pub omega_hat_s: f64,
    /// Relative residual of Lambda E_hat Q_R against the direct solve.
    pub residual: f64,
}

/// Factors E(t, s, xi) = Lambda(t, s) E_hat_mu(t, s) Q_R(t, s) on the closure
/// of the intermediate zone, with Lambda = diag(1, exp(-int_s^t sigma)) and
/// the auxiliary frame tuned to omega_hat_inf(s) = omega_inf exp(-int_0^s sigma).
pub fn intermediate_factorization(
    model: &CoefficientModel,
    xi: f64,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<IntermediateFactorization, DiagError> {
    assert!(xi > 0.0 && s >= 0.0 && s <= t);
    let n = model.zone_constant;
    let slack = 1.0 + 1e-9;
    let theta_t = model.theta(t);
    if xi * theta_t > n * slack {
        return Err(DiagError::OutsideZone {
            detail: format!(
                "xi * Theta(t) = {:.6e} exceeds the zone constant {n}; (t, xi) is hyperbolic",
                xi * theta_t
            ),
        });
    }
    if xi < n * model.mu(s) / slack {
        return Err(DiagError::OutsideZone {
            detail: format!(
                "xi = {xi:.6e} below N mu(s) = {:.6e}; (s, xi) is dissipative",
                n * model.mu(s)
            ),
        });
    }

    let omega_inf = match model.omega_inf_hint {
        Some(w) => w,
        None => estimate_omega_inf(model, f64::max(1e4, 10.0 * t))?,
    };
    let omega_hat_s = omega_inf * (-model.sigma_integral(s)?).exp();

    let cfg = SolveConfig::default();
    let lambda = Mat2::diag(
        Complex64::ONE,
        Complex64::new((-model.sigma_integral_between(s, t)?).exp(), 0.0),
    );
    let e_hat = propagator::solve_E_hat_mu(model, xi, s, t, omega_hat_s, &cfg)?;

    // Q_R: Peano-Baker for G = i E_hat(s, tau) (A_tilde - A_hat) E_hat(tau, s)
    let q_r = if s == t {
        Mat2::identity()
    } else {
        let mut breaks = vec![s, t];
        breaks.extend(model.sigma_breakpoints(s, t));
        breaks.extend(quad::dyadic_breakpoints(s, t, (t - s) * 1e-4, 1.5));
        let span = t - s;
        let mut step = 2.0 * PI / xi;
        if span / step > 20_000.0 {
            step = span / 20_000.0;
        }
        if step < span {
            let mut x = s + step;
            while x < t {
                breaks.push(x);
                x += step;
            }
        }
        let grid = PanelGrid::new(quad::merge_breakpoints(breaks), 24);

        // E_hat(tau, s) = S E_mu(tau, s) S^{-1}, one sweep over the nodes
        let w = Complex64::new(omega_hat_s, 0.0);
        let s_mat = Mat2::diag(Complex64::ONE, w);
        let s_inv = Mat2::diag(Complex64::ONE, 1.0 / w);
        let e_mu_nodes =
            propagator::solve_E_mu_along(model, xi, s, &grid.nodes, &cfg)?;
        let sigma_nodes: Vec<f64> = grid.sample(|tau| model.sigma(tau));
        let sigma_cum = grid.cumulative(&sigma_nodes);
        let i = Complex64::i();
        let mut g_nodes = Vec::with_capacity(grid.nodes.len());
        for (idx, e_mu) in e_mu_nodes.iter().enumerate() {
            let e_hat_ts = s_mat * *e_mu * s_inv;
            let e_hat_st = e_hat_ts
                .inverse()
                .expect("E_hat is invertible (Liouville)");
            let c = (-sigma_cum.at_nodes[idx]).exp();
            let delta_a = Mat2::new(
                Complex64::ZERO,
                Complex64::new(xi * (c - 1.0 / omega_hat_s), 0.0),
                Complex64::new(xi * (1.0 / c - omega_hat_s), 0.0),
                Complex64::ZERO,
            );
            g_nodes.push((e_hat_st * delta_a * e_hat_ts).scale(i));
        }
        peano_baker_on(&grid, &g_nodes, tol.min(1e-9))?
    };

    let product = lambda * e_hat * q_r;
    let direct = propagator::solve_E(model, xi, s, t, &cfg)?;
    let residual = (product - direct).norm() / direct.norm().max(1e-300);
    if residual > tol {
        return Err(DiagError::FactorizationMismatch { residual, tol });
    }
    Ok(IntermediateFactorization {
        lambda,
        e_hat,
        q_r,
        omega_hat_s,
        residual,
    })
}

/// Result of scanning the hyperbolic zone for the d-guard.
#[derive(Debug, Clone)]
pub struct ZoneConstantReport {
    pub requested_n: f64,
    pub validated_n: f64,
    pub max_d: f64,
    pub worst_t: f64,
    pub worst_xi: f64,
}

/// Scans hyperbolic-zone boundary samples for max |d_k|; if >= 1/2 the zone
/// constant is raised geometrically (factor 1.5) until the ladder divisions
/// are safe, and the first admissible value is reported.
pub fn validate_zone_constant(model: &CoefficientModel) -> ZoneConstantReport {
    let ladder = HypRepresentation::build(model);
    let requested_n = model.zone_constant;
    let mut n = requested_n;
    for _ in 0..40 {
        let mut max_d = 0.0f64;
        let mut worst = (0.0f64, 0.0f64);
        let mut scanned = false;
        let mut probe = model.clone();
        probe.zone_constant = n;
        for &xi in &log_samples(1e-4, 1e2, 40) {
            let bounds = zones::boundaries(&probe, xi);
            if !bounds.t2.is_finite() {
                continue;
            }
            scanned = true;
            let t_hi = (bounds.t2 * 100.0).max(bounds.t2 + 1.0);
            for &t in &log_samples(bounds.t2.max(1e-9), t_hi, 20) {
                for d in ladder.d_values(t, xi) {
                    if d.abs() > max_d {
                        max_d = d.abs();
                        worst = (t, xi);
                    }
                }
            }
        }
        if !scanned || max_d < 0.5 {
            return ZoneConstantReport {
                requested_n,
                validated_n: n,
                max_d,
                worst_t: worst.0,
                worst_xi: worst.1,
            };
        }
        n *= 1.5;
    }
    unreachable!("d_k -> 0 on the hyperbolic zone as N grows; 40 raises always suffice");
}
