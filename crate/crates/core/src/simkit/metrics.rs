// Copyright 2026 The ACP+ Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Time-average results of a simulation run and the fairness index.

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMetrics {
    pub source: usize,
    /// Time-average age at the monitor after warm-up.
    pub avg_age: Option<f64>,
    /// 95% batch-means half-width of `avg_age`.
    pub age_ci_halfwidth: f64,
    /// Updates sent over the whole run, probes included.
    pub sent: u64,
    /// Updates accepted by the monitor after warm-up.
    pub delivered: u64,
    /// Out-of-sequence arrivals dropped by the monitor.
    pub discarded: u64,
    /// Accepted updates per second after warm-up.
    pub throughput: f64,
    pub throughput_bps: f64,
    /// Updates sent per second after warm-up.
    pub avg_rate: f64,
    /// Mean round-trip time of ACKs received after warm-up.
    pub avg_rtt: Option<f64>,
    pub lambda_1: Option<f64>,
    /// The source's own time-average age and backlog estimates.
    pub est_avg_age: Option<f64>,
    pub est_avg_backlog: Option<f64>,
    pub epochs: usize,
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: usize,
    /// Time-average number of updates queued or in service.
    pub avg_backlog: f64,
    /// Same, counting every packet.
    pub avg_occupancy: f64,
    /// Mean time an update spends at this node.
    pub avg_sojourn: Option<f64>,
    /// Updates leaving per second after warm-up.
    pub update_throughput: f64,
    pub arrivals: u64,
    pub departures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiMetrics {
    pub name: String,
    pub seed: u64,
    pub duration: f64,
    pub warmup: f64,
    /// The offered load exceeds some node's capacity; averages then only
    /// describe the finite horizon.
    pub unstable: bool,
    /// Mean over sources of the per-source average age.
    pub avg_age: Option<f64>,
    pub avg_rtt: Option<f64>,
    pub throughput: f64,
    pub throughput_bps: f64,
    pub delivered: u64,
    /// Sum over forward nodes of the average update backlog.
    pub total_backlog: f64,
    /// Jain's index over per-source ages, for two or more sources.
    pub fairness: Option<f64>,
    pub sources: Vec<SourceMetrics>,
    pub nodes: Vec<NodeMetrics>,
    pub reverse_nodes: Vec<NodeMetrics>,
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`.
pub fn jain_index(values: &[f64]) -> Result<f64, SimError> {
    if values.is_empty() {
        return Err(SimError::Fairness("no values".into()));
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(SimError::Fairness(
            "values must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(SimError::Fairness("all values are zero".into()));
    }
    Ok(sum * sum / (values.len() as f64 * sq))
}
