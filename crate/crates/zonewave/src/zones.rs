//! Zone decomposition of the (t, |xi|) half-plane.
//!
//! For a fixed frequency magnitude xi > 0 the time axis splits into at most
//! three ranges. While |xi| <= N mu(t) the mode sits in the dissipative zone
//! and the propagator is a perturbation of the pure-dissipation system; once
//! Theta(t) |xi| >= N it sits in the hyperbolic zone where stepwise
//! diagonalization applies; in between lies the intermediate zone. Since mu
//! decreases and Theta increases, each boundary is a single crossing time and
//! a trajectory never returns to an earlier zone.

use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Zone {
    Dissipative,
    Intermediate,
    Hyperbolic,
}

impl std::fmt::Display for Zone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Zone::Dissipative => write!(f, "dissipative"),
            Zone::Intermediate => write!(f, "intermediate"),
            Zone::Hyperbolic => write!(f, "hyperbolic"),
        }
    }
}

/// Crossing times of the two zone boundaries for one frequency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZoneBoundaries {
    pub xi: f64,
    /// End of the dissipative zone: |xi| = N mu(t1), or 0 if |xi| >= N mu(0).
    pub t1: f64,
    /// Start of the hyperbolic zone: Theta(t2) |xi| = N, or 0 if
    /// Theta(0) |xi| >= N. Slowly growing scales (Theta ~ log t) put this
    /// crossing beyond f64 range for small xi; then t2 is +inf.
    pub t2: f64,
}

/// Solves f(t) = 0 for f changing sign from positive at lo to negative at hi,
/// to relative tolerance 1e-13 in t.
fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(f(lo) >= 0.0 && f(hi) < 0.0);
    for _ in 0..300 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Computes both crossing times by monotone bisection with bracket doubling.
pub fn boundaries(model: &CoefficientModel, xi: f64) -> ZoneBoundaries {
    assert!(xi > 0.0, "boundaries requires xi > 0, got {xi}");
    let n = model.zone_constant;

    let t1 = if xi >= n * model.mu(0.0) {
        0.0
    } else {
        // mu decreasing: N mu(t) - xi falls through 0
        let mut hi = 1.0;
        while n * model.mu(hi) > xi {
            hi *= 2.0;
            assert!(hi < 1e30, "dissipative boundary not reached by t = 1e30");
        }
        bisect_decreasing(|t| n * model.mu(t) - xi, 0.0, hi)
    };

    let t2 = if model.theta(0.0) * xi >= n {
        0.0
    } else {
        // Theta increasing: N - Theta(t) xi falls through 0
        let mut hi = 1.0;
        while model.theta(hi) * xi < n && hi < 1e300 {
            hi *= 2.0;
        }
        if model.theta(hi) * xi < n {
            f64::INFINITY
        } else {
            bisect_decreasing(|t| n - model.theta(t) * xi, 0.0, hi)
        }
    };

    ZoneBoundaries { xi, t1, t2 }
}

/// Classifies a phase-space point. Boundary ties go to the closed outer
/// zones: dissipative wins where |xi| <= N mu(t), hyperbolic where
/// Theta(t) |xi| >= N.
pub fn classify(model: &CoefficientModel, t: f64, xi: f64) -> Zone {
    assert!(t >= 0.0, "classify requires t >= 0, got {t}");
    assert!(xi > 0.0, "classify requires xi > 0, got {xi}");
    let n = model.zone_constant;
    if xi <= n * model.mu(t) {
        Zone::Dissipative
    } else if model.theta(t) * xi >= n {
        Zone::Hyperbolic
    } else {
        Zone::Intermediate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::make_example;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ex31_n1() -> CoefficientModel {
        let mut p = BTreeMap::new();
        p.insert("mu".into(), 0.4);
        p.insert("alpha".into(), 0.5);
        p.insert("zone_constant".into(), 1.0);
        make_example("ex31", &p).unwrap()
    }

    #[test]
    fn dissipative_boundary_closed_form() {
        // N mu0/(1+t) = xi at t = N mu0/xi - 1
        let model = ex31_n1();
        let zb = boundaries(&model, 0.004);
        assert!((zb.t1 - 99.0).abs() < 1e-8 * 99.0, "t1 = {}", zb.t1);
        assert!((model.mu(zb.t1) - 0.004).abs() < 1e-10 * 0.004);
    }

    #[test]
    fn dissipative_boundary_clamps_at_zero() {
        let model = ex31_n1();
        assert_eq!(boundaries(&model, 0.4).t1, 0.0);
        assert_eq!(boundaries(&model, 7.0).t1, 0.0);
    }

    #[test]
    fn hyperbolic_boundary_closed_form() {
        // (0.4 + sqrt(t)) xi = 1 at t = (1/xi - 0.4)^2
        let model = ex31_n1();
        let zb = boundaries(&model, 0.01);
        assert!((zb.t2 - 9920.16).abs() < 1e-6 * 9920.16, "t2 = {}", zb.t2);
        assert!((model.theta(zb.t2) * 0.01 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classify_matches_examples() {
        let model = ex31_n1();
        // t = 0, xi above N mu(0): hyperbolic only if Theta(0) xi >= N
        assert_eq!(classify(&model, 0.0, 0.5), Zone::Intermediate);
        assert_eq!(classify(&model, 0.0, 3.0), Zone::Hyperbolic);
        assert_eq!(classify(&model, 50.0, 0.004), Zone::Dissipative);
        assert_eq!(classify(&model, 1e6, 0.004), Zone::Hyperbolic);
    }

    #[test]
    fn boundary_ties_go_to_outer_zones() {
        // exact ties, not bisection approximations
        let model = ex31_n1();
        let t = 37.0;
        let xi_tie = model.mu(t);
        assert_eq!(classify(&model, t, xi_tie), Zone::Dissipative);
        let mut xi_h = 1.0 / model.theta(t);
        while model.theta(t) * xi_h < 1.0 {
            xi_h = xi_h.next_up();
        }
        assert_eq!(classify(&model, t, xi_h), Zone::Hyperbolic);
    }

    fn models_under_test() -> Vec<CoefficientModel> {
        let mut p35 = BTreeMap::new();
        p35.insert("alpha".into(), 2.0);
        p35.insert("m".into(), 2.0);
        vec![
            {
                let mut p = BTreeMap::new();
                p.insert("mu".into(), 0.4);
                p.insert("alpha".into(), 0.5);
                make_example("ex31", &p).unwrap()
            },
            make_example("ex34", &BTreeMap::new()).unwrap(),
            make_example("ex35", &p35).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn boundary_residuals_and_ordering(log_xi in -4.0f64..2.0) {
            let xi = 10f64.powf(log_xi);
            for model in models_under_test() {
                let n = model.zone_constant;
                let zb = boundaries(&model, xi);
                if zb.t1 > 0.0 {
                    let r = (n * model.mu(zb.t1) - xi).abs() / xi;
                    prop_assert!(r < 1e-10, "{}: mu residual {r}", model.family);
                }
                if zb.t2 > 0.0 && zb.t2.is_finite() {
                    let r = (model.theta(zb.t2) * xi - n).abs() / n;
                    prop_assert!(r < 1e-10, "{}: theta residual {r}", model.family);
                }
                if zb.t1 > 0.0 && zb.t2 > 0.0 {
                    prop_assert!(zb.t1 <= zb.t2,
                        "{}: t1 {} > t2 {} at xi {xi}", model.family, zb.t1, zb.t2);
                }
                // consistency with classify just inside each outer zone
                let eps1 = 1e-6 * (1.0 + zb.t1);
                if zb.t1 > eps1 {
                    prop_assert_eq!(classify(&model, zb.t1 - eps1, xi), Zone::Dissipative);
                }
                if zb.t2.is_finite() {
                    let eps2 = 1e-6 * (1.0 + zb.t2);
                    prop_assert_eq!(classify(&model, zb.t2 + eps2, xi), Zone::Hyperbolic);
                }
            }
        }

        #[test]
        fn classify_is_monotone_in_xi(t in 0.0f64..1e5) {
            let model = &models_under_test()[0];
            let mut seen_int = false;
            let mut seen_hyp = false;
            for i in 0..60 {
                let xi = 10f64.powf(-4.0 + 6.0 * i as f64 / 59.0);
                match classify(model, t, xi) {
                    Zone::Dissipative => {
                        prop_assert!(!seen_int && !seen_hyp);
                    }
                    Zone::Intermediate => {
                        prop_assert!(!seen_hyp);
                        seen_int = true;
                    }
                    Zone::Hyperbolic => {
                        seen_hyp = true;
                    }
                }
            }
        }

        #[test]
        fn trajectory_never_revisits_a_zone(log_xi in -3.0f64..1.0) {
            let xi = 10f64.powf(log_xi);
            let model = &models_under_test()[0];
            let mut rank_seen = 0u8;
            let mut t = 0.0;
            while t < 1e6 {
                let rank = match classify(model, t, xi) {
                    Zone::Dissipative => 0,
                    Zone::Intermediate => 1,
                    Zone::Hyperbolic => 2,
                };
                prop_assert!(rank >= rank_seen, "regressed at t={t}, xi={xi}");
                rank_seen = rank_seen.max(rank);
                t = (t + 0.01) * 1.05;
            }
        }
    }
}
