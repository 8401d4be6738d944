//! Error summaries and the paired squared-error comparison.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Bias, spread and accuracy of an estimator over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub bias: f64,
    /// Population standard deviation of the errors.
    pub sd: f64,
    pub rmse: f64,
    pub count: usize,
}

/// Summarises errors `estimate - truth`. `rmse^2 = bias^2 + sd^2` holds by construction.
pub fn summarize_errors(errors: &[f64]) -> Option<ErrorSummary> {
    if errors.is_empty() {
        return None;
    }
    let m = errors.len() as f64;
    let bias = errors.iter().sum::<f64>() / m;
    let var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / m;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / m;
    Some(ErrorSummary {
        bias,
        sd: var.sqrt(),
        rmse: mse.sqrt(),
        count: errors.len(),
    })
}

/// One row of a squared-error comparison against the most accurate estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub rmse: f64,
    pub best: bool,
    /// Mean of the paired differences in squared error against the best.
    pub mean_difference: f64,
    pub p_value: f64,
    /// No significant difference from the best at the adjusted level.
    pub indistinguishable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub alpha: f64,
    pub adjusted_alpha: f64,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn best(&self) -> &ComparisonRow {
        self.rows
            .iter()
            .find(|r| r.best)
            .expect("a comparison always has a best row")
    }
}

/// Paired t-tests of squared errors of every estimator against the one
/// with the smallest RMSE, Bonferroni-adjusted over the comparisons.
/// `traces` holds per-sample squared errors, aligned across estimators.
pub fn bonferroni_mse_compare(traces: &[(String, Vec<f64>)], alpha: f64) -> Result<Comparison> {
    if traces.len() < 2 {
        return Err(Error::Data(
            "need at least two estimators to compare".into(),
        ));
    }
    let len = traces[0].1.len();
    if let Some((name, t)) = traces.iter().find(|(_, t)| t.len() != len) {
        return Err(Error::Data(format!(
            "trace `{name}` has {} entries, expected {len}",
            t.len()
        )));
    }
    if len < 2 {
        return Err(Error::Data("need at least two paired samples".into()));
    }
    let mse: Vec<f64> = traces
        .iter()
        .map(|(_, t)| t.iter().sum::<f64>() / len as f64)
        .collect();
    let best = (0..mse.len())
        .min_by(|&a, &b| mse[a].total_cmp(&mse[b]))
        .expect("non-empty");
    let adjusted_alpha = alpha / (traces.len() - 1) as f64;
    let dist =
        StudentsT::new(0.0, 1.0, (len - 1) as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    let rows = traces
        .iter()
        .enumerate()
        .map(|(k, (name, trace))| {
            let diffs: Vec<f64> = trace
                .iter()
                .zip(&traces[best].1)
                .map(|(a, b)| a - b)
                .collect();
            let m = len as f64;
            let mean = diffs.iter().sum::<f64>() / m;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let p_value = if k == best {
                1.0
            } else if var == 0.0 {
                if mean == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                let t = mean / (var / m).sqrt();
                2.0 * dist.cdf(-t.abs())
            };
            ComparisonRow {
                name: name.clone(),
                rmse: mse[k].sqrt(),
                best: k == best,
                mean_difference: mean,
                p_value,
                indistinguishable: p_value > adjusted_alpha,
            }
        })
        .collect();
    Ok(Comparison {
        alpha,
        adjusted_alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_on_hand_values() {
        let s = summarize_errors(&[0.1, -0.1, 0.3]).unwrap();
        assert!((s.bias - 0.1).abs() < 1e-15);
        // mean square = (0.01 + 0.01 + 0.09) / 3
        assert!((s.rmse * s.rmse - 0.11 / 3.0).abs() < 1e-15);
        assert!((s.rmse * s.rmse - s.bias * s.bias - s.sd * s.sd).abs() < 1e-15);
        assert!(summarize_errors(&[]).is_none());
    }

    #[test]
    fn identical_traces_are_indistinguishable() {
        let t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin().powi(2)).collect();
        let c = bonferroni_mse_compare(
            &[
                ("a".into(), t.clone()),
                ("b".into(), t.clone()),
                ("c".into(), t),
            ],
            0.05,
        )
        .unwrap();
        assert!(c.rows.iter().all(|r| r.indistinguishable));
        assert_eq!(c.rows.iter().filter(|r| r.best).count(), 1);
    }

    #[test]
    fn shifted_trace_is_flagged() {
        let base: Vec<f64> = (0..1200)
            .map(|i| 0.001 * ((i * 7919) % 97) as f64 / 97.0)
            .collect();
        let worse: Vec<f64> = base.iter().map(|v| v + 0.01).collect();
        let c = bonferroni_mse_compare(&[("good".into(), base), ("worse".into(), worse)], 0.05)
            .unwrap();
        assert_eq!(c.best().name, "good");
        assert!(!c.rows[1].indistinguishable);
        assert_eq!(c.adjusted_alpha, 0.05);
    }

    #[test]
    fn length_mismatch_is_data_error() {
        let r = bonferroni_mse_compare(
            &[("a".into(), vec![0.0; 3]), ("b".into(), vec![0.0; 4])],
            0.05,
        );
        assert!(matches!(r, Err(Error::Data(_))));
    }
}
