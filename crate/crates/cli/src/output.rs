//! Trace CSV and summary JSON writers.

use std::fs;
use std::path::Path;

use screenkit::solver::TraceRow;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DataError;

pub const TRACE_HEADER: [&str; 7] = ["epoch", "primal", "dual", "gap", "radius", "n_screened", "ms"];

/// Keys every summary object carries, in order.
pub const SUMMARY_KEYS: [&str; 8] = [
    "rule",
    "eps",
    "lambda_ratio",
    "epochs",
    "seconds",
    "normalized_time",
    "n_screened_final",
    "beta_hash",
];

pub const BASELINE_RULE: &str = "dynamic_gap";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub rule: String,
    pub eps: f64,
    /// `None` for penalties without a weight.
    pub lambda_ratio: Option<f64>,
    pub epochs: usize,
    pub seconds: f64,
    /// Time relative to the dynamic gap rule at the same tolerance and weight.
    pub normalized_time: Option<f64>,
    pub n_screened_final: usize,
    pub beta_hash: String,
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_error(path, io),
        other => DataError::Invalid(format!("{other:?}")),
    })?;
    let to_err = |e: csv::Error| DataError::Invalid(format!("{}: {e}", path.display()));
    w.write_record(TRACE_HEADER).map_err(to_err)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.primal.to_string(),
            r.dual.to_string(),
            r.gap.to_string(),
            r.radius.to_string(),
            r.n_screened.to_string(),
            format!("{:.3}", r.ms),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| DataError::Invalid(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

/// First 16 hex digits of the SHA-256 of the coefficients rounded to four
/// decimals, so solutions agreeing to that precision share a hash.
pub fn beta_hash(beta: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for (k, b) in beta.iter().enumerate() {
        let mut s = format!("{b:.4}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s = s.trim_start_matches('-').to_string();
        }
        if k > 0 {
            hasher.update(b",");
        }
        hasher.update(s.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Fill `normalized_time` from the baseline cell with the same tolerance and
/// weight ratio; cells without a baseline keep `None`.
pub fn normalize_times(summaries: &mut [Summary]) {
    let baselines: Vec<(f64, Option<f64>, f64)> = summaries
        .iter()
        .filter(|s| s.rule == BASELINE_RULE)
        .map(|s| (s.eps, s.lambda_ratio, s.seconds))
        .collect();
    for s in summaries.iter_mut() {
        s.normalized_time = baselines
            .iter()
            .find(|(eps, ratio, _)| *eps == s.eps && *ratio == s.lambda_ratio)
            .and_then(|&(_, _, base)| (base > 0.0).then(|| s.seconds / base));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(rule: &str, eps: f64, seconds: f64) -> Summary {
        Summary {
            rule: rule.into(),
            eps,
            lambda_ratio: Some(0.1),
            epochs: 1,
            seconds,
            normalized_time: None,
            n_screened_final: 0,
            beta_hash: String::new(),
        }
    }

    #[test]
    fn hash_ignores_tiny_differences_and_signed_zero() {
        assert_eq!(beta_hash(&[0.0, 1.0]), beta_hash(&[-0.0, 1.0 + 1e-9]));
        assert_eq!(beta_hash(&[-1e-7, 0.5]), beta_hash(&[0.0, 0.5]));
        assert_ne!(beta_hash(&[0.0, 1.0]), beta_hash(&[1.0, 0.0]));
        assert_eq!(beta_hash(&[1.0]).len(), 16);
    }

    #[test]
    fn times_normalized_per_cell() {
        let mut s = vec![
            summary("none", 1e-4, 2.0),
            summary("dynamic_gap", 1e-4, 1.0),
            summary("none", 1e-6, 3.0),
        ];
        normalize_times(&mut s);
        assert_eq!(s[0].normalized_time, Some(2.0));
        assert_eq!(s[1].normalized_time, Some(1.0));
        assert_eq!(s[2].normalized_time, None);
    }

    #[test]
    fn summary_serializes_exact_keys() {
        let v = serde_json::to_value(summary("none", 1e-4, 1.0)).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = SUMMARY_KEYS.to_vec();
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
    }
}
