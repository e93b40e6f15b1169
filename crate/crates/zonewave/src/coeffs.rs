//! Coefficient models: the dissipation pair 2 b(t) = mu(t) + sigma(t) with
//! closed-form derivative jets, the derived scales lambda, Theta, Xi, and the
//! built-in example families.
//!
//! A [`CoefficientModel`] is the single source of truth for one problem
//! instance. The shape part mu is positive and strictly decreasing and fixes
//! the energy decay through lambda(t) = exp(half integral of mu); the
//! oscillation part sigma has a generalised zero mean and, under the
//! stabilisation condition, no influence on decay rates. Theta is the
//! stabilisation scale (normalised Theta(0) = mu(0)), Xi the symbol scale
//! bounding derivative growth of b, and m the number of diagonalization steps
//! the model is built to support.
//!
//! Families deliberately expose *closed-form* jets: the derivative-growth
//! checks are only as trustworthy as the derivatives themselves, so all
//! built-ins differentiate analytically and the finite-difference fallback in
//! [`crate::jet`] is reserved for cross-checks.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{decade_envelope, log_log_fit};
use crate::jet::Jet;
use crate::quad::{self, QuadError};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type JetFn = Arc<dyn Fn(f64, usize) -> Jet + Send + Sync>;

/// Where quadratures of sigma should place panel boundaries.
#[derive(Clone)]
pub enum OscillationHint {
    /// No oscillation structure worth resolving.
    Smooth,
    /// sigma oscillates as sin of this increasing phase; lobes change sign at
    /// integer multiples of pi.
    Phase(RealFn),
    /// sigma is supported on isolated intervals; the closure lists every
    /// support interval intersecting the queried range.
    Supports(Arc<dyn Fn(f64, f64) -> Vec<(f64, f64)> + Send + Sync>),
}

/// One dissipation model: coefficients, scales, and diagonalization depth.
#[derive(Clone)]
pub struct CoefficientModel {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    /// Number of diagonalization steps the jets are budgeted for.
    pub m: usize,
    pub zone_constant: f64,
    /// Analytically known stabilisation limit, when the family provides one.
    pub omega_inf_hint: Option<f64>,
    /// Set for families that are constructible but known to violate the
    /// derivative-growth and compatibility conditions.
    pub fails_derivative_conditions: bool,
    mu_jet: JetFn,
    sigma_jet: JetFn,
    mu_value: RealFn,
    sigma_value: RealFn,
    theta_fn: RealFn,
    xi_fn: RealFn,
    /// Closed-form primitive of mu from 0, when available.
    mu_primitive: Option<RealFn>,
    /// Closed-form primitive of sigma from 0, when available.
    sigma_primitive: Option<RealFn>,
    oscillation: OscillationHint,
}

impl std::fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("family", &self.family)
            .field("params", &self.params)
            .field("m", &self.m)
            .field("zone_constant", &self.zone_constant)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Error)]
pub enum CoeffsError {
    #[error("unknown family '{0}': available families are ex31, ex32, ex33, ex34, ex35, custom")]
    UnknownFamily(String),
    #[error("parameter '{name}' = {value} violates '{condition}' for family {family}")]
    BadParameter {
        family: String,
        name: String,
        value: f64,
        condition: String,
    },
    #[error("missing required parameter '{name}' for family {family}")]
    MissingParameter { family: String, name: String },
    #[error("quadrature failure while evaluating the model: {0}")]
    Quadrature(#[from] QuadError),
}

impl CoefficientModel {
    pub fn mu_jet(&self, t: f64, order: usize) -> Jet {
        (self.mu_jet)(t, order)
    }

    pub fn sigma_jet(&self, t: f64, order: usize) -> Jet {
        (self.sigma_jet)(t, order)
    }

    pub fn mu(&self, t: f64) -> f64 {
        (self.mu_value)(t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (self.sigma_value)(t)
    }

    /// b = (mu + sigma) / 2, value only; the propagator hot path.
    pub fn b(&self, t: f64) -> f64 {
        0.5 * ((self.mu_value)(t) + (self.sigma_value)(t))
    }

    /// Jet of b at the model's full derivative budget (order m).
    pub fn b_jet(&self, t: f64) -> Jet {
        self.b_jet_order(t, self.m)
    }

    pub fn b_jet_order(&self, t: f64, order: usize) -> Jet {
        (self.mu_jet)(t, order)
            .add(&(self.sigma_jet)(t, order))
            .scale(0.5)
    }

    pub fn theta(&self, t: f64) -> f64 {
        (self.theta_fn)(t)
    }

    pub fn xi_scale(&self, t: f64) -> f64 {
        (self.xi_fn)(t)
    }

    pub fn oscillation(&self) -> &OscillationHint {
        &self.oscillation
    }

    /// Integral of mu from 0 to t: closed form when the family has one, else
    /// adaptive quadrature at relative tolerance 1e-10.
    pub fn mu_integral(&self, t: f64) -> Result<f64, CoeffsError> {
        if let Some(p) = &self.mu_primitive {
            return Ok(p(t));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let mu = self.mu_value.clone();
        let breaks = quad::dyadic_breakpoints(0.0, t, 0.5, 2.0);
        Ok(quad::integrate(&|s| mu(s), 0.0, t, 1e-10, 1e-14, &breaks)?)
    }

    /// lambda(t) = exp(half integral of mu): the decay scale.
    pub fn lambda(&self, t: f64) -> Result<f64, CoeffsError> {
        Ok((0.5 * self.mu_integral(t)?).exp())
    }

    /// Integral of sigma from 0 to t by oscillation-aware quadrature.
    pub fn sigma_integral(&self, t: f64) -> Result<f64, CoeffsError> {
        self.sigma_integral_between(0.0, t)
    }

    /// Integral of sigma over [a, b] (a <= b).
    pub fn sigma_integral_between(&self, a: f64, b: f64) -> Result<f64, CoeffsError> {
        if let Some(p) = &self.sigma_primitive {
            return Ok(p(b) - p(a));
        }
        if a == b {
            return Ok(0.0);
        }
        let breaks = self.sigma_breakpoints(a, b);
        let sigma = self.sigma_value.clone();
        Ok(quad::integrate(&|s| sigma(s), a, b, 1e-10, 1e-14, &breaks)?)
    }

    /// Quadrature breakpoints resolving sigma's oscillation within [a, b].
    pub fn sigma_breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match &self.oscillation {
            OscillationHint::Smooth => Vec::new(),
            OscillationHint::Phase(phase) => phase_breakpoints(phase, a, b),
            OscillationHint::Supports(supports) => {
                let mut pts = Vec::new();
                for (lo, hi) in supports(a, b) {
                    pts.push(lo);
                    pts.push(0.5 * (lo + hi));
                    pts.push(hi);
                }
                quad::merge_breakpoints(pts)
            }
        }
    }

    /// Support intervals of sigma within [a, b], when sigma is bump-like.
    pub fn sigma_supports(&self, a: f64, b: f64) -> Option<Vec<(f64, f64)>> {
        match &self.oscillation {
            OscillationHint::Supports(s) => Some(s(a, b)),
            _ => None,
        }
    }
}

/// Points where the increasing phase crosses multiples of pi, by bisection.
fn phase_breakpoints(phase: &RealFn, a: f64, b: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    if b <= a {
        return Vec::new();
    }
    let pa = phase(a);
    let pb = phase(b);
    let n_lo = (pa / PI).ceil() as i64;
    let n_hi = (pb / PI).floor() as i64;
    if n_hi < n_lo {
        return Vec::new();
    }
    assert!(
        (n_hi - n_lo) < 4_000_000,
        "phase spans {} lobes on [{a}, {b}]: breakpoint set too large",
        n_hi - n_lo
    );
    let mut pts = Vec::with_capacity((n_hi - n_lo + 1) as usize);
    let mut lo = a;
    for n in n_lo..=n_hi {
        let target = n as f64 * PI;
        let mut hi = b;
        let mut lo_n = lo;
        // phase is increasing: bisect phase(t) = target
        for _ in 0..200 {
            let mid = 0.5 * (lo_n + hi);
            if mid <= lo_n || mid >= hi {
                break;
            }
            if phase(mid) < target {
                lo_n = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo_n + hi);
        pts.push(root);
        lo = root;
    }
    pts
}

/// Maximum of |d/du exp(-1/(1-u^2))| on (-1, 1); fixes the bump rescaling so
/// the mollifier derivative stays below 0.9 in modulus.
const MAX_ABS_G_PRIME: f64 = 0.798429751833599544;

fn g_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn g_bump_prime(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - u * u;
        g_bump(u) * (-2.0 * u / (q * q))
    }
}

/// Jet in u of exp(-1/(1-u^2)) at |u0| < 1.
fn g_bump_jet(u0: f64, order: usize) -> Jet {
    let u = Jet::variable(u0, order);
    let one = Jet::constant(1.0, order);
    let q = one.sub(&u.mul(&u));
    one.neg().div(&q).exp()
}

struct Ex35Geometry {
    s0: f64,
    alpha: f64,
    theta_exp: f64,
    a0: f64,
    cw: f64,
    c0: f64,
    mu0: f64,
}

impl Ex35Geometry {
    fn center(&self, j: u64) -> f64 {
        self.s0 * (j as f64).powf(self.alpha)
    }

    fn width(&self, j: u64) -> f64 {
        let t = self.center(j);
        let prev = if j == 1 { 0.0 } else { self.center(j - 1) };
        let next = self.center(j + 1);
        (self.cw * t.powf(self.theta_exp))
            .min(0.45 * (t - prev))
            .min(0.45 * (next - t))
    }

    fn amplitude(&self, j: u64) -> f64 {
        let t = self.center(j);
        let w = self.width(j);
        // capped by the local mu so b = (mu + sigma)/2 stays positive
        (self.a0 * (1.0 + t).powf(-2.0 * self.theta_exp)).min(self.mu0 / (1.0 + t + w))
    }

    /// The bump whose support contains t, if any.
    fn locate(&self, t: f64) -> Option<u64> {
        if t <= 0.0 {
            return None;
        }
        let j_est = (t / self.s0).powf(1.0 / self.alpha);
        let lo = (j_est.floor() as i64 - 2).max(1) as u64;
        for j in lo..=lo + 4 {
            let c = self.center(j);
            let w = self.width(j);
            if t >= c - w && t <= c + w {
                return Some(j);
            }
            if c - w > t {
                break;
            }
        }
        None
    }

    fn supports_in(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        if b <= 0.0 {
            return Vec::new();
        }
        let j_lo = ((a.max(0.0) / self.s0).powf(1.0 / self.alpha).floor() as i64 - 2).max(1) as u64;
        let j_hi = ((b / self.s0).powf(1.0 / self.alpha).ceil() as i64 + 2).max(1) as u64;
        assert!(
            j_hi - j_lo < 40_000_000,
            "bump range [{a}, {b}] spans too many supports"
        );
        let mut out = Vec::new();
        for j in j_lo..=j_hi {
            let c = self.center(j);
            let w = self.width(j);
            if c + w < a || c - w > b {
                continue;
            }
            out.push((c - w, c + w));
        }
        out
    }
}

fn get_param(
    family: &str,
    params: &BTreeMap<String, f64>,
    name: &str,
) -> Result<f64, CoeffsError> {
    params.get(name).copied().ok_or(CoeffsError::MissingParameter {
        family: family.to_string(),
        name: name.to_string(),
    })
}

fn check_param(
    family: &str,
    name: &str,
    value: f64,
    ok: bool,
    condition: &str,
) -> Result<f64, CoeffsError> {
    if ok {
        Ok(value)
    } else {
        Err(CoeffsError::BadParameter {
            family: family.to_string(),
            name: name.to_string(),
            value,
            condition: condition.to_string(),
        })
    }
}

/// Jet of c / (1+t)^p (closed form, any order).
fn power_decay_jet(t: f64, order: usize, c: f64, p: f64) -> Jet {
    let base = 1.0 + t;
    let mut ds = Vec::with_capacity(order + 1);
    let mut coef = c;
    for k in 0..=order {
        ds.push(coef * base.powf(-p - k as f64));
        coef *= -(p + k as f64);
    }
    Jet::new(ds)
}

fn sin_phase_jet(t: f64, order: usize, phase: impl Fn(&Jet) -> Jet) -> Jet {
    let tj = Jet::variable(t, order);
    phase(&tj).sin()
}

/// Constructs a built-in example family.
///
/// Families and parameters:
/// * `ex31`: mu = mu0/(1+t), sigma = mu(t) sin(t^alpha); params `mu` in
///   (0, 1/2), `alpha` in (0, 1).
/// * `ex32`: mu as ex31, sigma = mu(t) sin(t / log(e+t)); satisfies the mean
///   and stabilisation conditions but provably not the derivative-growth and
///   compatibility pair, and is tagged so.
/// * `ex33`: mu as ex31, sigma = (1+t)^{-beta} sin(t^alpha); params `alpha`,
///   `beta` with beta >= 1 and 1 < alpha + beta < 2.
/// * `ex34`: mu = 1/((1+t) log(e+t)), sigma = mu(t) sin(t / log(e+t)).
/// * `ex35`: mu as ex31 (param `mu`, default 0.4) plus a train of disjoint
///   mollifier-derivative bumps with centers s0 j^alpha; params `alpha` > 1
///   and integer `m` >= 1. Exact zero mean per bump, omega_inf = 1.
/// * `custom`: power-law shapes with explicit closed-form jets; params
///   `mu_scale`, `mu_power` (>= 1; if == 1 then mu_scale < 1), optional
///   `sigma_amp`, `sigma_power`, `sigma_alpha`, and scale exponents
///   `theta_power`, `xi_power`.
pub fn make_example(
    family: &str,
    params: &BTreeMap<String, f64>,
) -> Result<CoefficientModel, CoeffsError> {
    let mut model = match family {
        "ex31" => {
            let mu0 = get_param(family, params, "mu")?;
            check_param(family, "mu", mu0, mu0 > 0.0 && mu0 < 0.5, "mu in (0, 1/2)")?;
            let alpha = get_param(family, params, "alpha")?;
            check_param(family, "alpha", alpha, alpha > 0.0 && alpha < 1.0, "alpha in (0, 1)")?;
            power_sin_model(family, mu0, alpha, mu0, 1.0, 1.0 - alpha, 1.0 - alpha / 2.0)
        }
        "ex32" => {
            let mu0 = get_param(family, params, "mu")?;
            check_param(family, "mu", mu0, mu0 > 0.0 && mu0 < 0.5, "mu in (0, 1/2)")?;
            let log_phase: RealFn = Arc::new(|t: f64| t / (std::f64::consts::E + t).ln());
            let mu_jet: JetFn = Arc::new(move |t, n| power_decay_jet(t, n, mu0, 1.0));
            let sigma_jet: JetFn = Arc::new(move |t, n| {
                let tj = Jet::variable(t, n);
                let lj = tj.add(&Jet::constant(std::f64::consts::E, n)).ln();
                power_decay_jet(t, n, mu0, 1.0).mul(&tj.div(&lj).sin())
            });
            let sigma_value: RealFn = {
                let p = log_phase.clone();
                Arc::new(move |t| mu0 / (1.0 + t) * p(t).sin())
            };
            CoefficientModel {
                family: family.to_string(),
                params: params.clone(),
                m: 1,
                zone_constant: 2.0,
                omega_inf_hint: None,
                fails_derivative_conditions: true,
                mu_jet,
                sigma_jet,
                mu_value: Arc::new(move |t| mu0 / (1.0 + t)),
                sigma_value,
                theta_fn: Arc::new(move |t| {
                    let l = (std::f64::consts::E + t).ln();
                    mu0 * l * l
                }),
                xi_fn: Arc::new(|t| (1.0 + t).sqrt() * (std::f64::consts::E + t).ln()),
                mu_primitive: Some(Arc::new(move |t| mu0 * (1.0 + t).ln())),
                sigma_primitive: None,
                oscillation: OscillationHint::Phase(log_phase),
            }
        }
        "ex33" => {
            let mu0 = get_param(family, params, "mu")?;
            check_param(family, "mu", mu0, mu0 > 0.0 && mu0 < 0.5, "mu in (0, 1/2)")?;
            let alpha = get_param(family, params, "alpha")?;
            let beta = get_param(family, params, "beta")?;
            check_param(family, "alpha", alpha, alpha > 0.0, "alpha > 0")?;
            check_param(family, "beta", beta, beta >= 1.0, "beta >= 1")?;
            check_param(
                family,
                "alpha",
                alpha + beta,
                alpha + beta > 1.0 && alpha + beta < 2.0,
                "1 < alpha + beta < 2",
            )?;
            power_sin_model(
                family,
                mu0,
                alpha,
                1.0,
                beta,
                2.0 - alpha - beta,
                (1.0 + beta - alpha) / 2.0,
            )
        }
        "ex34" => {
            let e = std::f64::consts::E;
            let mu_jet: JetFn = Arc::new(move |t, n| {
                let tj = Jet::variable(t, n);
                let one = Jet::constant(1.0, n);
                one.div(&tj.add(&one).mul(&tj.add(&Jet::constant(e, n)).ln()))
            });
            let log_phase: RealFn = Arc::new(move |t: f64| t / (e + t).ln());
            let sigma_jet: JetFn = {
                let mu_jet = mu_jet.clone();
                Arc::new(move |t, n| {
                    let tj = Jet::variable(t, n);
                    let lj = tj.add(&Jet::constant(e, n)).ln();
                    mu_jet(t, n).mul(&tj.div(&lj).sin())
                })
            };
            let mu_value: RealFn = Arc::new(move |t| 1.0 / ((1.0 + t) * (e + t).ln()));
            let sigma_value: RealFn = {
                let mv = mu_value.clone();
                let p = log_phase.clone();
                Arc::new(move |t| mv(t) * p(t).sin())
            };
            CoefficientModel {
                family: family.to_string(),
                params: params.clone(),
                m: 1,
                zone_constant: 2.0,
                omega_inf_hint: None,
                fails_derivative_conditions: false,
                mu_jet,
                sigma_jet,
                mu_value,
                sigma_value,
                // mu(0) = 1, so the normalised scale is exactly log(e+t)
                theta_fn: Arc::new(move |t| (e + t).ln()),
                xi_fn: Arc::new(move |t| (1.0 + t).sqrt() * (e + t).ln()),
                mu_primitive: None,
                sigma_primitive: None,
                oscillation: OscillationHint::Phase(log_phase),
            }
        }
        "ex35" => {
            let alpha = get_param(family, params, "alpha")?;
            check_param(family, "alpha", alpha, alpha > 1.0, "alpha > 1")?;
            let m_f = params.get("m").copied().unwrap_or(1.0);
            check_param(
                family,
                "m",
                m_f,
                m_f >= 1.0 && m_f.fract() == 0.0,
                "m integer >= 1",
            )?;
            let m = m_f as usize;
            let mu0 = params.get("mu").copied().unwrap_or(0.4);
            check_param(family, "mu", mu0, mu0 > 0.0 && mu0 < 0.5, "mu in (0, 1/2)")?;

            let mf = m as f64;
            let gamma = 1.0 / (mf + 1.0) + mf / (alpha * (mf + 1.0));
            // width exponent: large enough for the derivative-growth bounds,
            // but never so large that neighbouring supports would overlap
            let theta_exp = (1.0 / alpha)
                .max((1.0 + mf / alpha) / (mf + 2.0))
                .min(1.0 - 1.0 / alpha);
            let geo = Arc::new(Ex35Geometry {
                s0: 2.0,
                alpha,
                theta_exp,
                a0: 0.3,
                cw: 0.4,
                c0: 0.9 / MAX_ABS_G_PRIME,
                mu0,
            });

            let sigma_value: RealFn = {
                let geo = geo.clone();
                Arc::new(move |t| match geo.locate(t) {
                    None => 0.0,
                    Some(j) => {
                        let u = (t - geo.center(j)) / geo.width(j);
                        geo.amplitude(j) * geo.c0 * g_bump_prime(u)
                    }
                })
            };
            let sigma_jet: JetFn = {
                let geo = geo.clone();
                Arc::new(move |t, n| match geo.locate(t) {
                    None => Jet::constant(0.0, n),
                    Some(j) => {
                        let w = geo.width(j);
                        let u0 = (t - geo.center(j)) / w;
                        // d^k/dt^k chi(u(t)) = w^{-k} chi^{(k)}(u): affine inner
                        let g_in_u = g_bump_jet(u0, n + 1).derivative();
                        let a = geo.amplitude(j) * geo.c0;
                        Jet::new(
                            (0..=n)
                                .map(|k| a * w.powi(-(k as i32)) * g_in_u.d(k))
                                .collect(),
                        )
                    }
                })
            };
            let sigma_primitive: RealFn = {
                let geo = geo.clone();
                // each earlier bump integrates to zero exactly, so only the
                // bump containing t contributes
                Arc::new(move |t| match geo.locate(t) {
                    None => 0.0,
                    Some(j) => {
                        let w = geo.width(j);
                        let u = (t - geo.center(j)) / w;
                        geo.amplitude(j) * geo.c0 * w * g_bump(u)
                    }
                })
            };
            let supports: Arc<dyn Fn(f64, f64) -> Vec<(f64, f64)> + Send + Sync> = {
                let geo = geo.clone();
                Arc::new(move |a, b| geo.supports_in(a, b))
            };

            CoefficientModel {
                family: family.to_string(),
                params: params.clone(),
                m,
                zone_constant: 2.0,
                omega_inf_hint: Some(1.0),
                fails_derivative_conditions: alpha < 2.0,
                mu_jet: Arc::new(move |t, n| power_decay_jet(t, n, mu0, 1.0)),
                sigma_jet,
                mu_value: Arc::new(move |t| mu0 / (1.0 + t)),
                sigma_value,
                theta_fn: Arc::new(move |t| mu0 + t.powf(1.0 / alpha)),
                xi_fn: Arc::new(move |t| (1.0 + t).powf(gamma)),
                mu_primitive: Some(Arc::new(move |t| mu0 * (1.0 + t).ln())),
                sigma_primitive: Some(sigma_primitive),
                oscillation: OscillationHint::Supports(supports),
            }
        }
        "custom" => {
            let scale = get_param(family, params, "mu_scale")?;
            check_param(family, "mu_scale", scale, scale > 0.0, "mu_scale > 0")?;
            let power = get_param(family, params, "mu_power")?;
            check_param(family, "mu_power", power, power >= 1.0, "mu_power >= 1")?;
            if power == 1.0 {
                check_param(
                    family,
                    "mu_scale",
                    scale,
                    scale < 1.0,
                    "mu_scale < 1 when mu_power == 1 (excluded borderline case)",
                )?;
            }
            let amp = params.get("sigma_amp").copied().unwrap_or(0.0);
            let spower = params.get("sigma_power").copied().unwrap_or(1.0);
            let salpha = params.get("sigma_alpha").copied().unwrap_or(0.5);
            check_param(family, "sigma_alpha", salpha, salpha > 0.0 && salpha < 1.0, "sigma_alpha in (0, 1)")?;
            let theta_power = get_param(family, params, "theta_power")?;
            check_param(family, "theta_power", theta_power, theta_power > 0.0, "theta_power > 0")?;
            let xi_power = get_param(family, params, "xi_power")?;
            check_param(family, "xi_power", xi_power, xi_power > 0.0, "xi_power > 0")?;
            let m_f = params.get("m").copied().unwrap_or(1.0);
            check_param(family, "m", m_f, m_f >= 1.0 && m_f.fract() == 0.0, "m integer >= 1")?;

            let mu_primitive: RealFn = if power == 1.0 {
                Arc::new(move |t: f64| scale * (1.0 + t).ln())
            } else {
                Arc::new(move |t: f64| scale * (1.0 - (1.0 + t).powf(1.0 - power)) / (power - 1.0))
            };
            let sigma_value: RealFn = if amp == 0.0 {
                Arc::new(|_| 0.0)
            } else {
                Arc::new(move |t: f64| amp * (1.0 + t).powf(-spower) * t.powf(salpha).sin())
            };
            let sigma_jet: JetFn = if amp == 0.0 {
                Arc::new(|_, n| Jet::constant(0.0, n))
            } else {
                Arc::new(move |t, n| {
                    power_decay_jet(t, n, amp, spower)
                        .mul(&sin_phase_jet(t, n, |tj| tj.powf(salpha)))
                })
            };
            let oscillation = if amp == 0.0 {
                OscillationHint::Smooth
            } else {
                OscillationHint::Phase(Arc::new(move |t: f64| t.powf(salpha)))
            };
            CoefficientModel {
                family: family.to_string(),
                params: params.clone(),
                m: m_f as usize,
                zone_constant: 2.0,
                omega_inf_hint: if amp == 0.0 { Some(1.0) } else { None },
                fails_derivative_conditions: false,
                mu_jet: Arc::new(move |t, n| power_decay_jet(t, n, scale, power)),
                sigma_jet,
                mu_value: Arc::new(move |t| scale * (1.0 + t).powf(-power)),
                sigma_value,
                theta_fn: Arc::new(move |t| scale + t.powf(theta_power)),
                xi_fn: Arc::new(move |t| (1.0 + t).powf(xi_power)),
                mu_primitive: Some(mu_primitive),
                sigma_primitive: if amp == 0.0 { Some(Arc::new(|_| 0.0)) } else { None },
                oscillation,
            }
        }
        other => return Err(CoeffsError::UnknownFamily(other.to_string())),
    };
    if let Some(n) = params.get("zone_constant") {
        model.zone_constant = *n;
    }
    Ok(model)
}

/// Shared construction for ex31/ex33: mu = mu0/(1+t), sigma = c (1+t)^{-p}
/// sin(t^alpha), power-law Theta and Xi.
fn power_sin_model(
    family: &str,
    mu0: f64,
    alpha: f64,
    sigma_scale: f64,
    sigma_power: f64,
    theta_power: f64,
    xi_power: f64,
) -> CoefficientModel {
    let mut params = BTreeMap::new();
    params.insert("mu".to_string(), mu0);
    params.insert("alpha".to_string(), alpha);
    if sigma_power != 1.0 {
        params.insert("beta".to_string(), sigma_power);
    }
    CoefficientModel {
        family: family.to_string(),
        params,
        m: 1,
        zone_constant: 2.0,
        omega_inf_hint: None,
        fails_derivative_conditions: false,
        mu_jet: Arc::new(move |t, n| power_decay_jet(t, n, mu0, 1.0)),
        sigma_jet: Arc::new(move |t, n| {
            power_decay_jet(t, n, sigma_scale, sigma_power)
                .mul(&sin_phase_jet(t, n, |tj| tj.powf(alpha)))
        }),
        mu_value: Arc::new(move |t| mu0 / (1.0 + t)),
        sigma_value: Arc::new(move |t| {
            sigma_scale * (1.0 + t).powf(-sigma_power) * t.powf(alpha).sin()
        }),
        theta_fn: Arc::new(move |t| mu0 + t.powf(theta_power)),
        xi_fn: Arc::new(move |t| (1.0 + t).powf(xi_power)),
        mu_primitive: Some(Arc::new(move |t| mu0 * (1.0 + t).ln())),
        sigma_primitive: None,
        oscillation: OscillationHint::Phase(Arc::new(move |t: f64| t.powf(alpha))),
    }
}

/// Serialized model description: the JSON surface of every subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_constant: Option<f64>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<CoefficientModel, CoeffsError> {
        let mut params = self.params.clone();
        if let Some(m) = self.m {
            params.insert("m".to_string(), m as f64);
        }
        let mut model = make_example(&self.family, &params)?;
        if let Some(m) = self.m {
            model.m = m;
        }
        if let Some(n) = self.zone_constant {
            model.zone_constant = n;
        }
        Ok(model)
    }

    /// The fully resolved configuration echoed into reports.
    pub fn resolved(&self, model: &CoefficientModel) -> ModelConfig {
        ModelConfig {
            family: model.family.clone(),
            params: model.params.clone(),
            m: Some(model.m),
            zone_constant: Some(model.zone_constant),
        }
    }
}

/// Scan of the shape conditions on a quarter-dyadic grid: mu positive and
/// strictly decreasing, and t mu(t) bounded below 1 (the excluded borderline
/// case is "overdamping", where the decay saturates).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeCheck {
    pub min_mu: f64,
    pub max_mu_prime: f64,
    pub max_t_mu: f64,
    pub pass: bool,
}

pub fn check_shape(model: &CoefficientModel, t_max: f64) -> ShapeCheck {
    let mut min_mu = f64::INFINITY;
    let mut max_mu_prime = f64::NEG_INFINITY;
    let mut max_t_mu = 0.0f64;
    let mut scan = |t: f64| {
        let j = model.mu_jet(t, 1);
        min_mu = min_mu.min(j.value());
        max_mu_prime = max_mu_prime.max(j.d(1));
        max_t_mu = max_t_mu.max(t * j.value());
    };
    scan(0.0);
    let mut k = 0;
    loop {
        let t = 2f64.powf(k as f64 / 4.0);
        if t > t_max {
            break;
        }
        scan(t);
        k += 1;
    }
    ShapeCheck {
        min_mu,
        max_mu_prime,
        max_t_mu,
        pass: min_mu > 0.0 && max_mu_prime < 0.0 && max_t_mu < 1.0,
    }
}

/// One derivative order of the growth scan: C_k(t) = |b^(k)(t)| Xi(t)^(k+1)
/// must stay bounded, certified by a flat per-decade envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolGrowthOrder {
    pub k: usize,
    /// Per-decade maxima of C_k.
    pub envelope: Vec<(f64, f64)>,
    /// Log-log slope of the envelope over t >= 100.
    pub slope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolGrowthCheck {
    pub per_order: Vec<SymbolGrowthOrder>,
    pub slope_threshold: f64,
    pub pass: bool,
}

/// Scans |b^(k)| Xi^(k+1) for k = 0..=m on [1, t_max]. A bounded constant
/// has envelope slope 0; slopes above the threshold (default 0.05,
/// resolving logarithmic growth over four decades) fail.
pub fn check_symbol_growth(model: &CoefficientModel, t_max: f64) -> SymbolGrowthCheck {
    check_symbol_growth_with(model, t_max, 0.05)
}

pub fn check_symbol_growth_with(
    model: &CoefficientModel,
    t_max: f64,
    slope_threshold: f64,
) -> SymbolGrowthCheck {
    assert!(t_max >= 1e4, "growth scan needs at least 4 decades, got t_max = {t_max}");
    // sample points: dense log grid plus oscillation features, so envelope
    // maxima are not aliased away
    let mut ts: Vec<f64> = Vec::new();
    let decades = t_max.log10();
    let n = (decades * 200.0) as usize;
    for i in 0..=n {
        ts.push(10f64.powf(decades * i as f64 / n as f64));
    }
    match model.sigma_supports(1.0, t_max) {
        Some(supports) => {
            for (a, b) in supports {
                for k in 1..=15 {
                    ts.push(a + (b - a) * k as f64 / 16.0);
                }
            }
        }
        None => {
            let brks = model.sigma_breakpoints(1.0, t_max);
            // lobe midpoints carry the extrema of the oscillation
            for w in brks.windows(2) {
                ts.push(0.5 * (w[0] + w[1]));
            }
            ts.extend(brks);
        }
    }
    ts.retain(|&t| (1.0..=t_max).contains(&t));
    ts.sort_by(f64::total_cmp);

    let mut per_order = Vec::with_capacity(model.m + 1);
    for k in 0..=model.m {
        let curve: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let b = model.b_jet_order(t, k);
                (t, b.d(k).abs() * model.xi_scale(t).powi(k as i32 + 1))
            })
            .collect();
        let envelope = decade_envelope(&curve);
        let fit_pts: Vec<(f64, f64)> = envelope.iter().filter(|p| p.0 >= 100.0).cloned().collect();
        let slope = if fit_pts.len() >= 3 {
            log_log_fit(&fit_pts).slope
        } else {
            f64::NAN
        };
        let finite = curve.iter().all(|p| p.1.is_finite());
        per_order.push(SymbolGrowthOrder {
            k,
            envelope,
            slope,
            pass: finite && slope.is_finite() && slope <= slope_threshold,
        });
    }
    let pass = per_order.iter().all(|o| o.pass);
    SymbolGrowthCheck {
        per_order,
        slope_threshold,
        pass,
    }
}

/// Compatibility of the scales: I(t) = integral_t^T Xi^(-m-1) must be
/// O(Theta^(-m)), certified by a flat envelope of I(t) Theta(t)^m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatibilityCheck {
    /// (t, I(t) Theta(t)^m) with the tail truncated at 1e16.
    pub curve: Vec<(f64, f64)>,
    /// Reported constant C: max of I(t) Theta(t)^m with tail [t, 1e8].
    pub bound_constant: f64,
    pub slope: f64,
    pub slope_threshold: f64,
    pub pass: bool,
}

pub fn check_compatibility(model: &CoefficientModel, t_max: f64) -> Result<CompatibilityCheck, CoeffsError> {
    check_compatibility_with(model, t_max, 0.05)
}

/// The bound constant uses the tail [t, 1e8]; the growth detector extends
/// the tail to 1e16 because slowly converging integrals (Xi with log
/// factors) lose their growth signature under a short truncation: the
/// truncated ratio peaks at log t = (log T)/2 and flattens the fitted slope
/// when that peak sits inside the scan window.
pub fn check_compatibility_with(
    model: &CoefficientModel,
    t_max: f64,
    slope_threshold: f64,
) -> Result<CompatibilityCheck, CoeffsError> {
    assert!(t_max >= 1e4, "compatibility scan needs at least 4 decades");
    const T_REPORT: f64 = 1e8;
    const T_END: f64 = 1e16;
    let mpow = -(model.m as f64) - 1.0;
    let integrand = |s: f64| model.xi_scale(s).powf(mpow);
    let n = (t_max.log10() * 20.0) as usize;
    // accumulate the tail integral from the right so each grid point costs
    // one segment
    let mut ts: Vec<f64> = (0..=n).map(|i| 10f64.powf(t_max.log10() * i as f64 / n as f64)).collect();
    ts.push(T_REPORT);
    ts.push(T_END);
    let mut tail = 0.0;
    let mut pieces: Vec<f64> = Vec::with_capacity(ts.len());
    for w in ts.windows(2).rev() {
        let breaks = quad::dyadic_breakpoints(w[0], w[1], w[0].max(1.0), 2.0);
        tail += quad::integrate(&integrand, w[0], w[1], 1e-10, 1e-16, &breaks)?;
        pieces.push(tail);
    }
    pieces.reverse();
    pieces.push(0.0);
    let beyond_report = pieces[ts.len() - 2];
    let mut curve = Vec::with_capacity(n + 1);
    let mut bound_constant = 0.0f64;
    for (i, &t) in ts[..ts.len() - 2].iter().enumerate() {
        let th = model.theta(t).powi(model.m as i32);
        curve.push((t, pieces[i] * th));
        bound_constant = bound_constant.max((pieces[i] - beyond_report) * th);
    }
    let envelope = decade_envelope(&curve);
    let fit_pts: Vec<(f64, f64)> = envelope.iter().filter(|p| p.0 >= 100.0).cloned().collect();
    let slope = if fit_pts.len() >= 3 {
        log_log_fit(&fit_pts).slope
    } else {
        f64::NAN
    };
    Ok(CompatibilityCheck {
        curve,
        bound_constant,
        slope,
        slope_threshold,
        pass: slope.is_finite() && slope <= slope_threshold,
    })
}

/// Cross-validation of the closed-form jets against central finite
/// differences of the values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JetConsistency {
    pub max_rel: f64,
    pub pass: bool,
}

pub fn check_jet_consistency(model: &CoefficientModel, t_grid: &[f64]) -> JetConsistency {
    let mut max_rel = 0.0f64;
    for &t in t_grid {
        let jet = model.b_jet_order(t, 1);
        let fd = crate::jet::finite_difference_jet(&|s| model.b(s), t, 1, 1e-5);
        let rel = (jet.d(1) - fd.d(1)).abs() / (1.0 + jet.d(1).abs());
        max_rel = max_rel.max(rel);
    }
    JetConsistency {
        max_rel,
        pass: max_rel < 1e-6,
    }
}

/// Listing entry for the `examples` subcommand.
pub struct FamilyInfo {
    pub name: &'static str,
    pub coefficients: &'static str,
    pub parameters: &'static str,
    pub notes: &'static str,
}

pub fn family_catalog() -> Vec<FamilyInfo> {
    vec![
        FamilyInfo {
            name: "ex31",
            coefficients: "mu = mu0/(1+t), sigma = mu(t) sin(t^alpha)",
            parameters: "mu in (0, 1/2); alpha in (0, 1)",
            notes: "m = 1; Theta = mu0 + t^(1-alpha); Xi = (1+t)^(1-alpha/2)",
        },
        FamilyInfo {
            name: "ex32",
            coefficients: "mu = mu0/(1+t), sigma = mu(t) sin(t/log(e+t))",
            parameters: "mu in (0, 1/2)",
            notes: "stabilises with Theta = mu0 log^2(e+t) but fails the derivative-growth and compatibility conditions",
        },
        FamilyInfo {
            name: "ex33",
            coefficients: "mu = mu0/(1+t), sigma = (1+t)^(-beta) sin(t^alpha)",
            parameters: "mu in (0, 1/2); alpha > 0; beta >= 1; 1 < alpha+beta < 2",
            notes: "m = 1; Theta = mu0 + t^(2-alpha-beta); Xi = (1+t)^((1+beta-alpha)/2)",
        },
        FamilyInfo {
            name: "ex34",
            coefficients: "mu = 1/((1+t) log(e+t)), sigma = mu(t) sin(t/log(e+t))",
            parameters: "none",
            notes: "m = 1; Theta = log(e+t); Xi = sqrt(1+t) log(e+t)",
        },
        FamilyInfo {
            name: "ex35",
            coefficients: "mu = mu0/(1+t), sigma = disjoint mollifier-derivative bumps at centers 2 j^alpha",
            parameters: "alpha > 1; m integer >= 1; mu in (0, 1/2) (default 0.4)",
            notes: "any diagonalization depth m; omega_inf = 1 exactly; |int sigma| <= 2; supports stay disjoint for alpha >= 2",
        },
        FamilyInfo {
            name: "custom",
            coefficients: "mu = mu_scale (1+t)^(-mu_power), sigma = sigma_amp (1+t)^(-sigma_power) sin(t^sigma_alpha)",
            parameters: "mu_scale > 0; mu_power >= 1 (if == 1 then mu_scale < 1); theta_power, xi_power > 0; sigma optional",
            notes: "closed-form jets; sigma_amp = 0 gives a pure shape model",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::finite_difference_jet;

    fn ex31(mu: f64, alpha: f64) -> CoefficientModel {
        let mut p = BTreeMap::new();
        p.insert("mu".into(), mu);
        p.insert("alpha".into(), alpha);
        make_example("ex31", &p).unwrap()
    }

    fn ex35(alpha: f64, m: usize) -> CoefficientModel {
        let mut p = BTreeMap::new();
        p.insert("alpha".into(), alpha);
        p.insert("m".into(), m as f64);
        make_example("ex35", &p).unwrap()
    }

    #[test]
    fn ex31_basic_values() {
        let model = ex31(0.4, 0.5);
        assert_eq!(model.m, 1);
        assert_eq!(model.sigma_jet(0.0, 0).value(), 0.0);
        assert!((model.b_jet(0.0).value() - 0.2).abs() < 1e-15);
        // lambda(99) = 100^{0.2}
        assert!((model.lambda(99.0).unwrap() - 100f64.powf(0.2)).abs() < 1e-12);
        assert!((model.theta(0.0) - model.mu(0.0)).abs() < 1e-12);
    }

    #[test]
    fn ex31_sigma_integral_matches_substitution_oracle() {
        // frozen before the build: theta = sqrt(s) substitution + adaptive
        // quadrature on the alternating lobes, 30-digit arithmetic
        let model = ex31(0.4, 0.5);
        let i100 = model.sigma_integral(100.0).unwrap();
        assert!((i100 - 0.531620399771655714).abs() < 1e-8, "got {i100}");
        let i1e4 = model.sigma_integral(1e4).unwrap();
        assert!((i1e4 - 0.455434928826110534).abs() < 1e-8, "got {i1e4}");
    }

    #[test]
    fn ex34_lambda_matches_quadrature_oracle() {
        let model = make_example("ex34", &BTreeMap::new()).unwrap();
        assert!((model.lambda(10.0).unwrap() - 2.168754292798693544).abs() < 1e-9);
        assert!((model.theta(0.0) - model.mu(0.0)).abs() < 1e-12);
    }

    #[test]
    fn b_jet_matches_finite_differences_across_families() {
        let models = vec![
            ex31(0.4, 0.5),
            ex31(0.3, 0.7),
            {
                let mut p = BTreeMap::new();
                p.insert("mu".into(), 0.4);
                make_example("ex32", &p).unwrap()
            },
            {
                let mut p = BTreeMap::new();
                p.insert("mu".into(), 0.4);
                p.insert("alpha".into(), 0.6);
                p.insert("beta".into(), 1.1);
                make_example("ex33", &p).unwrap()
            },
            make_example("ex34", &BTreeMap::new()).unwrap(),
        ];
        for model in &models {
            for &t in &[1.0, 7.3, 55.0, 301.0] {
                let jet = model.b_jet_order(t, 2);
                let fd = finite_difference_jet(&|s| model.b(s), t, 2, 1e-5);
                let tol = 1e-6 * (1.0 + jet.d(1).abs());
                assert!(
                    (jet.d(1) - fd.d(1)).abs() < tol,
                    "{} t={t}: {} vs {}",
                    model.family,
                    jet.d(1),
                    fd.d(1)
                );
            }
        }
    }

    #[test]
    fn ex35_bump_jets_match_finite_differences() {
        let model = ex35(2.0, 2);
        // probe inside the 3rd bump: center 18
        let c = 18.0;
        for &t in &[c - 0.9, c - 0.3, c + 0.45, c + 1.1] {
            let jet = model.sigma_jet(t, 2);
            let fd = finite_difference_jet(&|s| model.sigma(s), t, 2, 1e-6);
            assert!(
                (jet.d(1) - fd.d(1)).abs() < 1e-5 * (1.0 + jet.d(1).abs()),
                "t={t}: {} vs {}",
                jet.d(1),
                fd.d(1)
            );
            assert!((jet.d(0) - fd.d(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn ex35_mollifier_constants_match_frozen_oracle() {
        // scan |g'| to confirm the hardcoded maximum
        let mut max = 0.0f64;
        for i in 0..200000 {
            let u = -1.0 + 2.0 * (i as f64 + 0.5) / 200000.0;
            max = max.max(g_bump_prime(u).abs());
        }
        assert!((max - MAX_ABS_G_PRIME).abs() < 1e-9, "max |g'| = {max}");
    }

    #[test]
    fn ex35_supports_are_disjoint_and_sigma_vanishes_between() {
        let model = ex35(2.0, 2);
        let sup = model.sigma_supports(0.0, 1e5).unwrap();
        assert!(sup.len() > 100);
        for w in sup.windows(2) {
            assert!(w[0].1 < w[1].0, "overlap: {:?} {:?}", w[0], w[1]);
            let mid = 0.5 * (w[0].1 + w[1].0);
            assert_eq!(model.sigma(mid), 0.0);
        }
    }

    #[test]
    fn ex35_zero_mean_and_primitive() {
        let model = ex35(2.0, 2);
        // closed-form primitive agrees with direct quadrature through a bump
        for &t in &[7.7, 8.0, 8.4, 200.0, 1999.0] {
            let closed = model.sigma_integral(t).unwrap();
            let sigma = |s: f64| model.sigma(s);
            let breaks = model.sigma_breakpoints(0.0, t);
            let direct = quad::integrate(&sigma, 0.0, t, 1e-11, 1e-13, &breaks).unwrap();
            assert!((closed - direct).abs() < 1e-9, "t={t}: {closed} vs {direct}");
            assert!(closed.abs() <= 2.0);
        }
        // between bumps the primitive is exactly zero (bump 7 ends near
        // 102, bump 8 starts near 123)
        let between = model.sigma_integral(110.0).unwrap();
        assert_eq!(between, 0.0);
    }

    #[test]
    fn ex35_dissipation_stays_positive() {
        let model = ex35(2.0, 2);
        let mut t = 0.05;
        while t < 2e4 {
            assert!(model.b(t) > 0.0, "b({t}) = {}", model.b(t));
            t *= 1.01;
        }
    }

    #[test]
    fn ex35_gamma_formula() {
        let model = ex35(2.0, 2);
        // gamma = 1/(m+1) + m/(alpha(m+1)) = 1/3 + 2/6 = 2/3
        let xi10 = model.xi_scale(10.0);
        assert!((xi10 - 11f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn shape_parameter_rejections_name_the_condition() {
        let mut p = BTreeMap::new();
        p.insert("mu".into(), 0.6);
        p.insert("alpha".into(), 0.5);
        let err = make_example("ex31", &p).unwrap_err().to_string();
        assert!(err.contains("mu in (0, 1/2)"), "{err}");

        let mut p = BTreeMap::new();
        p.insert("mu".into(), 0.4);
        p.insert("alpha".into(), 0.9);
        p.insert("beta".into(), 1.5);
        let err = make_example("ex33", &p).unwrap_err().to_string();
        assert!(err.contains("1 < alpha + beta < 2"), "{err}");

        let err = make_example("nope", &BTreeMap::new()).unwrap_err().to_string();
        assert!(err.contains("unknown family"), "{err}");
    }

    #[test]
    fn shape_is_decreasing_and_subcritical() {
        for model in [ex31(0.4, 0.5), make_example("ex34", &BTreeMap::new()).unwrap(), ex35(2.0, 2)] {
            let mut t = 0.0;
            while t < 1e6 {
                let j = model.mu_jet(t, 1);
                assert!(j.value() > 0.0);
                assert!(j.d(1) < 0.0);
                assert!(t * j.value() < 1.0, "{}: t mu = {}", model.family, t * j.value());
                t = (t + 1.0) * 2.0;
            }
        }
    }

    #[test]
    fn shape_scan_passes_builtins() {
        for model in [ex31(0.4, 0.5), make_example("ex34", &BTreeMap::new()).unwrap(), ex35(2.0, 2)] {
            let c = check_shape(&model, 1e6);
            assert!(c.pass, "{}: {c:?}", model.family);
        }
    }

    #[test]
    fn growth_scan_separates_families() {
        let good = check_symbol_growth(&ex31(0.4, 0.5), 1e6);
        assert!(good.pass, "ex31 slopes: {:?}",
            good.per_order.iter().map(|o| o.slope).collect::<Vec<_>>());

        let bumps = check_symbol_growth(&ex35(2.0, 2), 1e6);
        assert!(bumps.pass, "ex35 slopes: {:?}",
            bumps.per_order.iter().map(|o| o.slope).collect::<Vec<_>>());

        let mut p = BTreeMap::new();
        p.insert("mu".into(), 0.4);
        let ex32 = make_example("ex32", &p).unwrap();
        assert!(ex32.fails_derivative_conditions);
        let bad = check_symbol_growth(&ex32, 1e6);
        assert!(!bad.pass, "ex32 slopes: {:?}",
            bad.per_order.iter().map(|o| o.slope).collect::<Vec<_>>());
    }

    #[test]
    fn compatibility_scan_separates_families() {
        let good = check_compatibility(&ex31(0.4, 0.5), 1e6).unwrap();
        assert!(good.pass, "ex31 slope {}", good.slope);
        let ex34 = make_example("ex34", &BTreeMap::new()).unwrap();
        let good = check_compatibility(&ex34, 1e6).unwrap();
        assert!(good.pass, "ex34 slope {}", good.slope);
        let bumps = check_compatibility(&ex35(2.0, 2), 1e6).unwrap();
        assert!(bumps.pass, "ex35 slope {}", bumps.slope);

        let mut p = BTreeMap::new();
        p.insert("mu".into(), 0.4);
        let ex32 = make_example("ex32", &p).unwrap();
        let bad = check_compatibility(&ex32, 1e6).unwrap();
        assert!(!bad.pass, "ex32 slope {}", bad.slope);
    }

    #[test]
    fn jet_consistency_scan() {
        let grid: Vec<f64> = (0..40).map(|i| 1.0 + i as f64 * 11.3).collect();
        for model in [ex31(0.4, 0.5), ex35(2.0, 2)] {
            let c = check_jet_consistency(&model, &grid);
            assert!(c.pass, "{}: max rel {}", model.family, c.max_rel);
        }
    }

    #[test]
    fn model_config_round_trip() {
        let cfg: ModelConfig = serde_json::from_str(
            r#"{"family":"ex31","params":{"mu":0.4,"alpha":0.5},"m":1,"zone_constant":2.0}"#,
        )
        .unwrap();
        let model = cfg.build().unwrap();
        assert_eq!(model.m, 1);
        assert_eq!(model.zone_constant, 2.0);
        let echo = serde_json::to_string(&cfg.resolved(&model)).unwrap();
        let back: ModelConfig = serde_json::from_str(&echo).unwrap();
        assert_eq!(back.family, "ex31");
    }

    #[test]
    fn phase_breakpoints_hit_lobe_boundaries() {
        let model = ex31(0.4, 0.5);
        let brks = model.sigma_breakpoints(1.0, 1000.0);
        // phase sqrt(t) crosses k pi at t = (k pi)^2
        for b in &brks {
            let k = (b.sqrt() / std::f64::consts::PI).round();
            assert!((b.sqrt() - k * std::f64::consts::PI).abs() < 1e-9, "{b}");
        }
        assert!(brks.len() >= 9);
    }
}
