//! Report plumbing: JSON envelopes with provenance, CSV tables, matrix rows.
//!
//! Every JSON report is wrapped in a [`ReportEnvelope`] carrying the tool
//! name, library version, subcommand, fully resolved model configuration and
//! RNG seed, so a report file alone identifies the run that produced it.
//! Key order is fixed by construction (struct field order plus BTreeMap), and
//! floats are emitted round-trip exact: JSON through serde_json's shortest
//! representation, CSV through [`fmt_f64`] (17 significant digits). Two runs
//! with the same config and seed produce byte-identical files.

use serde::Serialize;

use crate::coeffs::ModelConfig;
use crate::mat2::Mat2;

/// Provenance wrapper around one command's JSON body.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope<T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub body: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: impl Into<String>, config: ModelConfig, seed: u64, body: T) -> Self {
        ReportEnvelope {
            tool: "zonewave",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            seed,
            body,
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports hold only plain data");
        s.push('\n');
        s
    }
}

/// 17 significant digits: parses back to the identical f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table: header row, comma-separated, numbers through [`fmt_f64`].
pub struct Csv {
    out: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        assert!(!header.is_empty(), "a CSV table needs at least one column");
        let mut out = header.join(",");
        out.push('\n');
        Csv {
            out,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns, "row width mismatch");
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.out.push(',');
            }
            self.out.push_str(&fmt_f64(*v));
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// A sampled curve as a two-column CSV.
pub fn curve_csv(x_name: &str, y_name: &str, curve: &[(f64, f64)]) -> String {
    let mut csv = Csv::new(&[x_name, y_name]);
    for &(x, y) in curve {
        csv.row(&[x, y]);
    }
    csv.finish()
}

/// Column names matching [`mat2_row`].
pub const MAT2_HEADER: [&str; 8] = [
    "a11_re", "a11_im", "a12_re", "a12_im", "a21_re", "a21_im", "a22_re", "a22_im",
];

/// A complex 2x2 matrix as eight reals: re/im pairs in row-major entry order.
pub fn mat2_row(m: &Mat2) -> [f64; 8] {
    [
        m.a11.re, m.a11.im, m.a12.re, m.a12.im, m.a21.re, m.a21.im, m.a22.re, m.a22.im,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::collections::BTreeMap;

    #[test]
    fn fmt_f64_round_trips() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1e-300,
            -2.2250738585072014e-308,
            9007199254740993.0,
            0.1 + 0.2,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["t", "value"]);
        csv.row(&[1.0, 2.5]);
        csv.row(&[10.0, 0.25]);
        let text = csv.finish();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,value");
        assert_eq!(lines[1].split(',').count(), 2);
        let cell: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(cell, 10.0);
    }

    #[test]
    fn mat2_row_is_row_major_re_im() {
        let m = Mat2::new(
            Complex64::new(1.0, 2.0),
            Complex64::new(3.0, 4.0),
            Complex64::new(5.0, 6.0),
            Complex64::new(7.0, 8.0),
        );
        assert_eq!(mat2_row(&m), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn envelope_is_reproducible_and_carries_provenance() {
        let config = ModelConfig {
            family: "ex31".into(),
            params: BTreeMap::from([("mu".to_string(), 0.4), ("alpha".to_string(), 0.5)]),
            m: Some(1),
            zone_constant: Some(2.0),
        };
        let body = BTreeMap::from([("answer".to_string(), 42.0)]);
        let a = ReportEnvelope::new("solve", config.clone(), 7, body.clone()).to_json();
        let b = ReportEnvelope::new("solve", config, 7, body).to_json();
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["tool"], "zonewave");
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["seed"], 7);
        assert_eq!(v["config"]["family"], "ex31");
    }
}
