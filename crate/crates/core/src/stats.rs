//! Summary statistics shared by the planner log and the evaluation tables.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of the central pair for even-sized samples.
    pub median: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let avg = sorted.iter().sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let var = sorted.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n as f64;
        Some(Summary {
            count: n,
            avg,
            min: sorted[0],
            max: sorted[n - 1],
            median,
            std: var.sqrt(),
        })
    }
}
