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

//! Source and monitor endpoints.
//!
//! Both endpoints are sans-IO state machines driven by a clock supplied by
//! the caller. [`driver`] runs them over any [`DatagramLink`]: a real UDP
//! socket or a seeded simulated path. The queueing simulator drives the
//! same state machines directly from its event loop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControlError, MdecBacklog, DEFAULT_ETA};
use crate::estimator::{EstimatorError, DEFAULT_ALPHA};
use crate::wire::{DecodeError, EncodeError, DEFAULT_PAYLOAD, MAX_PAYLOAD};

pub mod driver;
pub mod link;
pub mod monitor;
pub mod source;

pub use driver::{run_initialization, run_monitor, run_source, SourceSummary};
pub use link::{DatagramLink, DelayModel, LinkError, SimLink, SimLinkConfig, UdpLink};
pub use monitor::{Monitor, MonitorRecord};
pub use source::{EpochRecord, SourceEndpoint};

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("initialization failed: all {0} probes timed out")]
    InitFailed(u32),
    #[error("invalid source configuration: {0}")]
    BadConfig(String),
    #[error("endpoint has already failed")]
    Failed,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// How the source picks its update rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Policy {
    AcpPlus,
    /// One update per smoothed RTT.
    Lazy,
    /// Open-loop periodic sending at a fixed rate.
    Fixed(f64),
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::AcpPlus => f.write_str("acp_plus"),
            Policy::Lazy => f.write_str("lazy"),
            Policy::Fixed(r) => write!(f, "fixed:{r}"),
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "acp_plus" | "acp+" => Ok(Policy::AcpPlus),
            "lazy" => Ok(Policy::Lazy),
            _ => {
                let rate = s.strip_prefix("fixed:").ok_or_else(|| {
                    format!("unknown policy `{s}` (expected acp_plus, lazy or fixed:<rate>)")
                })?;
                let rate: f64 = rate
                    .parse()
                    .map_err(|_| format!("bad fixed rate `{rate}`"))?;
                if rate > 0.0 && rate.is_finite() {
                    Ok(Policy::Fixed(rate))
                } else {
                    Err(format!("fixed rate must be positive, got {rate}"))
                }
            }
        }
    }
}

impl TryFrom<String> for Policy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub probe_count: u32,
    /// Seconds to wait for each probe's ACK.
    pub probe_timeout: f64,
    pub payload_size: usize,
    pub eta: u32,
    pub alpha: f64,
    pub policy: Policy,
    pub mdec_backlog: MdecBacklog,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            probe_count: 10,
            probe_timeout: 1.0,
            payload_size: DEFAULT_PAYLOAD,
            eta: DEFAULT_ETA,
            alpha: DEFAULT_ALPHA,
            policy: Policy::AcpPlus,
            mdec_backlog: MdecBacklog::Instantaneous,
        }
    }
}

impl SourceConfig {
    pub fn with_policy(policy: Policy) -> Self {
        SourceConfig {
            policy,
            ..SourceConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), EndpointError> {
        let bad = |m: String| Err(EndpointError::BadConfig(m));
        if self.probe_count < 1 {
            return bad("probe_count must be at least 1".into());
        }
        if !(self.probe_timeout > 0.0) {
            return bad(format!(
                "probe_timeout must be positive, got {}",
                self.probe_timeout
            ));
        }
        if self.payload_size > MAX_PAYLOAD {
            return bad(format!(
                "payload_size {} exceeds {MAX_PAYLOAD}",
                self.payload_size
            ));
        }
        if self.eta < 1 {
            return bad("eta must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        Ok(())
    }
}

/// Lazy's rate: one update per smoothed round trip.
pub fn lazy_rate(rtt_ewma: f64) -> f64 {
    1.0 / rtt_ewma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        assert_eq!("acp_plus".parse::<Policy>().unwrap(), Policy::AcpPlus);
        assert_eq!("lazy".parse::<Policy>().unwrap(), Policy::Lazy);
        assert_eq!("fixed:5".parse::<Policy>().unwrap(), Policy::Fixed(5.0));
        assert!("fixed:-1".parse::<Policy>().is_err());
        assert!("fixed:x".parse::<Policy>().is_err());
        assert!("cubic".parse::<Policy>().is_err());
        assert_eq!(Policy::Fixed(2.5).to_string(), "fixed:2.5");
    }

    #[test]
    fn lazy_is_reciprocal() {
        assert_eq!(lazy_rate(0.2), 5.0);
        assert_eq!(lazy_rate(1.0), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SourceConfig::default().validate().is_ok());
        let c = SourceConfig {
            probe_count: 0,
            ..SourceConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SourceConfig {
            payload_size: MAX_PAYLOAD + 1,
            ..SourceConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: SourceConfig = serde_json::from_str(r#"{"policy":"fixed:3"}"#).unwrap();
        assert_eq!(c.policy, Policy::Fixed(3.0));
        assert_eq!(c.eta, 10);
        assert!(serde_json::from_str::<SourceConfig>(r#"{"etaa":3}"#).is_err());
    }
}
