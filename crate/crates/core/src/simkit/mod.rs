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

//! Deterministic discrete-event simulation of FCFS queueing networks fed
//! by open-loop or protocol-driven sources.

mod config;
mod engine;
mod metrics;

use serde::Serialize;
use thiserror::Error;

pub use config::{
    Arrival, ConfigError, CrossTraffic, NetworkSpec, ReverseSpec, RunSpec, ServiceSpec, SimConfig,
    DEFAULT_ACK_BYTES, DEFAULT_CROSS_BYTES, DEFAULT_UPDATE_BYTES,
};
pub use engine::{
    run_closed_loop, run_fixed_rate, simulate, simulate_logged, Delivery, SimOutcome,
};
pub use metrics::{jain_index, AoiMetrics, NodeMetrics, SourceMetrics};

use crate::analytics::CurvePoint;
use crate::endpoints::EndpointError;
use crate::parallel::{map_ordered, Execution};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("endpoint: {0}")]
    Endpoint(#[from] EndpointError),
    #[error("the rate grid is empty")]
    EmptyGrid,
    #[error("fairness index undefined: {0}")]
    Fairness(String),
}

/// Empirical age curve over a rate grid and its minimizer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub best: CurvePoint,
    pub curve: Vec<CurvePoint>,
}

/// Runs [`run_fixed_rate`] at every rate in `grid` with a common seed.
/// Points are evaluated independently and returned in grid order, so the
/// result does not depend on `exec`.
pub fn sweep_lambda(
    net: &NetworkSpec,
    grid: &[f64],
    arrival: Arrival,
    duration: f64,
    seed: u64,
    exec: Execution,
) -> Result<Sweep, SimError> {
    if grid.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    let runs = map_ordered(exec, grid, |&lambda| {
        run_fixed_rate(net, lambda, arrival, duration, seed)
    });
    let mut curve = Vec::with_capacity(grid.len());
    for (&lambda, r) in grid.iter().zip(runs) {
        let m = r?;
        let src = &m.sources[0];
        curve.push(CurvePoint {
            lambda,
            avg_age: src.avg_age.unwrap_or(f64::INFINITY),
            ci_halfwidth: src.age_ci_halfwidth,
        });
    }
    let best = *curve
        .iter()
        .min_by(|a, b| a.avg_age.total_cmp(&b.avg_age))
        .expect("non-empty grid");
    Ok(Sweep { best, curve })
}
