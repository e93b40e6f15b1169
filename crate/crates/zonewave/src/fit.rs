//! Least-squares fits and decade envelopes for trend detection.
//!
//! Asymptotic claims (decay rates, derivative-growth bounds) are certified on
//! finite horizons by fitting straight lines in log-log coordinates and by
//! comparing per-decade envelopes. This module keeps that arithmetic in one
//! place so every certificate reports the same slope and scatter statistics.

/// Ordinary least squares y = slope * x + intercept.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn linear_fit(points: &[(f64, f64)]) -> LinearFit {
    let n = points.len();
    assert!(n >= 3, "linear_fit needs at least 3 points, got {n}");
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    assert!(sxx > 0.0, "linear_fit needs distinct abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum();
    let var = if n > 2 { ss_res / (nf - 2.0) } else { 0.0 };
    LinearFit {
        slope,
        intercept,
        slope_stderr: (var / sxx).sqrt(),
        n,
    }
}

/// Least squares in (log10 x, log10 y); points with nonpositive coordinates
/// are dropped (they carry no information on a power law).
pub fn log_log_fit(points: &[(f64, f64)]) -> LinearFit {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.log10(), p.1.log10()))
        .collect();
    linear_fit(&logs)
}

/// Per-decade maxima of |y|: groups points by floor(log10 t) and returns
/// (decade upper edge, max |y| inside), sorted by decade.
pub fn decade_envelope(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut bins: std::collections::BTreeMap<i32, f64> = std::collections::BTreeMap::new();
    for &(t, y) in points {
        if t <= 0.0 {
            continue;
        }
        let d = t.log10().floor() as i32;
        let e = bins.entry(d).or_insert(0.0);
        *e = e.max(y.abs());
    }
    bins.into_iter()
        .map(|(d, y)| (10f64.powi(d + 1), y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let fit = linear_fit(&pts);
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn log_log_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..40)
            .map(|i| {
                let t = 10f64.powf(i as f64 / 10.0);
                (t, 2.5 * t.powf(-0.2))
            })
            .collect();
        let fit = log_log_fit(&pts);
        assert!((fit.slope + 0.2).abs() < 1e-10, "slope {}", fit.slope);
    }

    #[test]
    fn envelope_groups_by_decade() {
        let pts = vec![(1.5, 1.0), (3.0, -4.0), (15.0, 2.0), (250.0, 0.5)];
        let env = decade_envelope(&pts);
        assert_eq!(env, vec![(10.0, 4.0), (100.0, 2.0), (1000.0, 0.5)]);
    }
}
