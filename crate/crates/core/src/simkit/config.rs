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

//! JSON-facing description of a simulated network and of the run to
//! perform on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endpoints::SourceConfig;

/// Wire size of a default update: 1024-byte payload, 16-byte header and
/// 28 bytes of IPv4/UDP headers.
pub const DEFAULT_UPDATE_BYTES: u32 = 1068;
pub const DEFAULT_ACK_BYTES: u32 = 64;
pub const DEFAULT_CROSS_BYTES: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid config at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// How a node serves a packet of `bytes` bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "service", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceSpec {
    /// Exponential service of an update-sized packet at `rate` per second.
    Exponential { rate: f64 },
    /// Constant service time `1/rate` for an update-sized packet.
    Deterministic { rate: f64 },
    /// Transmission over a point-to-point link: `8·bytes / rate_bps`.
    Link { rate_bps: f64 },
}

impl ServiceSpec {
    /// Mean service time of a packet of `bytes` bytes.
    pub fn mean_service(&self, bytes: u32, update_bytes: u32) -> f64 {
        let scale = bytes as f64 / update_bytes as f64;
        match *self {
            ServiceSpec::Exponential { rate } | ServiceSpec::Deterministic { rate } => scale / rate,
            ServiceSpec::Link { rate_bps } => 8.0 * bytes as f64 / rate_bps,
        }
    }

    fn rate(&self) -> f64 {
        match *self {
            ServiceSpec::Exponential { rate } | ServiceSpec::Deterministic { rate } => rate,
            ServiceSpec::Link { rate_bps } => rate_bps,
        }
    }
}

/// Path taken by acknowledgments back to the sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverseSpec {
    /// ACKs arrive at the source the instant the update is delivered.
    Ideal,
    /// The forward nodes traversed in the opposite order.
    Mirror,
    /// An explicit chain, listed from the monitor side to the source side.
    Nodes(Vec<ServiceSpec>),
}

/// Poisson background flow of fixed-size packets through forward nodes
/// `entry..=exit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossTraffic {
    pub entry: usize,
    /// Last node visited; defaults to the last node of the chain.
    #[serde(default)]
    pub exit: Option<usize>,
    pub rate_bps: f64,
    #[serde(default = "default_cross_bytes")]
    pub packet_bytes: u32,
}

fn default_cross_bytes() -> u32 {
    DEFAULT_CROSS_BYTES
}
fn default_update_bytes() -> u32 {
    DEFAULT_UPDATE_BYTES
}
fn default_ack_bytes() -> u32 {
    DEFAULT_ACK_BYTES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Nodes from the source side to the monitor side.
    pub forward: Vec<ServiceSpec>,
    /// Required for closed-loop runs.
    #[serde(default)]
    pub reverse: Option<ReverseSpec>,
    #[serde(default)]
    pub cross_traffic: Vec<CrossTraffic>,
    #[serde(default = "default_update_bytes")]
    pub update_bytes: u32,
    #[serde(default = "default_ack_bytes")]
    pub ack_bytes: u32,
}

impl NetworkSpec {
    /// A chain of exponential servers with instantaneous ACKs.
    pub fn exponential_chain(rates: &[f64]) -> Self {
        NetworkSpec {
            forward: rates
                .iter()
                .map(|&rate| ServiceSpec::Exponential { rate })
                .collect(),
            reverse: Some(ReverseSpec::Ideal),
            cross_traffic: Vec::new(),
            update_bytes: DEFAULT_UPDATE_BYTES,
            ack_bytes: DEFAULT_ACK_BYTES,
        }
    }

    pub fn cross_exit(&self, c: &CrossTraffic) -> usize {
        c.exit.unwrap_or(self.forward.len().saturating_sub(1))
    }

    pub fn reverse_nodes(&self) -> Vec<ServiceSpec> {
        match &self.reverse {
            None | Some(ReverseSpec::Ideal) => Vec::new(),
            Some(ReverseSpec::Mirror) => self.forward.iter().rev().copied().collect(),
            Some(ReverseSpec::Nodes(n)) => n.clone(),
        }
    }

    /// Offered load of the background flows at each forward node.
    pub fn cross_load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.forward.len()];
        for c in &self.cross_traffic {
            let pkt_rate = c.rate_bps / (8.0 * c.packet_bytes as f64);
            for (j, l) in load
                .iter_mut()
                .enumerate()
                .take(self.cross_exit(c) + 1)
                .skip(c.entry)
            {
                *l += pkt_rate * self.forward[j].mean_service(c.packet_bytes, self.update_bytes);
            }
        }
        load
    }

    /// Whether an open-loop update rate `lambda` (plus background traffic)
    /// overloads some node.
    pub fn is_unstable(&self, lambda: f64) -> bool {
        self.cross_load()
            .iter()
            .zip(&self.forward)
            .any(|(cross, s)| {
                cross + lambda * s.mean_service(self.update_bytes, self.update_bytes) >= 1.0
            })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.forward.is_empty() {
            return Err(ConfigError::Invalid(
                "network.forward must list at least one node".into(),
            ));
        }
        let check = |where_: &str, s: &ServiceSpec| {
            let r = s.rate();
            if r > 0.0 && r.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!(
                    "{where_}: service rate must be positive, got {r}"
                )))
            }
        };
        for (j, s) in self.forward.iter().enumerate() {
            check(&format!("network.forward[{j}]"), s)?;
        }
        if let Some(ReverseSpec::Nodes(n)) = &self.reverse {
            if n.is_empty() {
                return Err(ConfigError::Invalid(
                    "network.reverse.nodes must not be empty".into(),
                ));
            }
            for (j, s) in n.iter().enumerate() {
                check(&format!("network.reverse.nodes[{j}]"), s)?;
            }
        }
        if self.update_bytes == 0 || self.ack_bytes == 0 {
            return Err(ConfigError::Invalid("packet sizes must be positive".into()));
        }
        for (f, c) in self.cross_traffic.iter().enumerate() {
            let exit = self.cross_exit(c);
            if c.entry > exit || exit >= self.forward.len() {
                return Err(ConfigError::Invalid(format!(
                    "network.cross_traffic[{f}]: entry {} / exit {exit} outside the {}-node chain",
                    c.entry,
                    self.forward.len()
                )));
            }
            if !(c.rate_bps > 0.0 && c.rate_bps.is_finite()) || c.packet_bytes == 0 {
                return Err(ConfigError::Invalid(format!(
                    "network.cross_traffic[{f}]: rate_bps and packet_bytes must be positive"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    #[default]
    Poisson,
    /// One update every `1/λ`, the first at time zero.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunSpec {
    /// Open-loop updates at a rate chosen in advance.
    FixedRate {
        lambda: f64,
        #[serde(default)]
        arrival: Arrival,
    },
    /// Protocol sources reacting to ACKs.
    ClosedLoop {
        #[serde(default = "one")]
        sources: usize,
        #[serde(default)]
        source: SourceConfig,
        /// Source `i` opens its connection at `i · start_spacing`.
        #[serde(default)]
        start_spacing: f64,
    },
}

fn one() -> usize {
    1
}
fn default_warmup() -> f64 {
    0.1
}
fn default_batches() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds.
    pub duration: f64,
    /// Leading fraction of the run excluded from every average.
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    /// Number of batches for the batch-means confidence interval.
    #[serde(default = "default_batches")]
    pub batches: usize,
    pub network: NetworkSpec,
    pub run: RunSpec,
}

impl SimConfig {
    /// Parses and validates a JSON document, naming the offending field on
    /// failure.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: SimConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn warmup(&self) -> f64 {
        self.duration * self.warmup_fraction
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(ConfigError::Invalid(format!(
                "warmup_fraction must be in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        self.network.validate()?;
        match &self.run {
            RunSpec::FixedRate { lambda, .. } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(ConfigError::Invalid(format!(
                        "run.lambda must be positive, got {lambda}"
                    )));
                }
            }
            RunSpec::ClosedLoop {
                sources,
                source,
                start_spacing,
            } => {
                if *sources == 0 {
                    return Err(ConfigError::Invalid(
                        "run.sources must be at least 1".into(),
                    ));
                }
                if self.network.reverse.is_none() {
                    return Err(ConfigError::Invalid(
                        "closed-loop runs need network.reverse (\"ideal\", \"mirror\" or {\"nodes\": [...]})".into(),
                    ));
                }
                if !(*start_spacing >= 0.0 && start_spacing.is_finite()) {
                    return Err(ConfigError::Invalid(
                        "run.start_spacing must be non-negative".into(),
                    ));
                }
                source
                    .validate()
                    .map_err(|e| ConfigError::Invalid(format!("run.source: {e}")))?;
            }
        }
        Ok(())
    }
}
