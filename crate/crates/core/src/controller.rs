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

//! Per-epoch rate decisions.
//!
//! At every epoch boundary the controller looks at the signs of the change
//! in average backlog `b_k` and average age `δ_k` and picks a target change
//! `b*` in backlog for the next epoch:
//!
//! | `b_k` | `δ_k` | action                                              |
//! |-------|-------|-----------------------------------------------------|
//! | > 0   | > 0   | DEC first time, then MDEC(γ) with γ growing         |
//! | > 0   | ≤ 0   | INC, reset                                          |
//! | ≤ 0   | > 0   | INC, reset                                          |
//! | ≤ 0   | ≤ 0   | MDEC(γ) if still in a decrease run, else DEC, reset |
//!
//! The target is converted into a rate `1/Z̄ + b*/RTT̄`, which may move by
//! at most 25% in either direction per epoch.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ETA: u32 = 10;
pub const GAMMA_CAP: u32 = 16;
pub const MIN_RATIO: f64 = 0.75;
pub const MAX_RATIO: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Inc,
    Dec,
    Mdec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetChange {
    pub kind: ActionKind,
    /// γ for MDEC, 0 otherwise.
    pub gamma_used: u32,
    pub b_star: f64,
}

impl TargetChange {
    pub fn inc() -> Self {
        TargetChange {
            kind: ActionKind::Inc,
            gamma_used: 0,
            b_star: 1.0,
        }
    }

    pub fn dec() -> Self {
        TargetChange {
            kind: ActionKind::Dec,
            gamma_used: 0,
            b_star: -1.0,
        }
    }

    pub fn mdec(gamma: u32, backlog: f64) -> Self {
        TargetChange {
            kind: ActionKind::Mdec,
            gamma_used: gamma,
            b_star: -(1.0 - 0.5f64.powi(gamma as i32)) * backlog,
        }
    }
}

impl fmt::Display for TargetChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Inc => f.write_str("INC"),
            ActionKind::Dec => f.write_str("DEC"),
            ActionKind::Mdec => write!(f, "MDEC({})", self.gamma_used),
        }
    }
}

/// Which backlog figure MDEC scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdecBacklog {
    /// `B̂(t_k)` at the epoch boundary.
    #[default]
    Instantaneous,
    /// `B̄_k`, the epoch time average.
    TimeAverage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    flag: bool,
    gamma: u32,
    lambda_prev: f64,
    eta: u32,
}

impl Controller {
    pub fn new(lambda_1: f64, eta: u32) -> Result<Self, ControlError> {
        positive("lambda", lambda_1)?;
        Ok(Controller {
            flag: false,
            gamma: 0,
            lambda_prev: lambda_1,
            eta: eta.max(1),
        })
    }

    pub fn with_state(
        lambda_prev: f64,
        eta: u32,
        flag: bool,
        gamma: u32,
    ) -> Result<Self, ControlError> {
        let mut c = Controller::new(lambda_prev, eta)?;
        c.flag = flag;
        c.gamma = gamma.min(GAMMA_CAP);
        Ok(c)
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_prev
    }

    pub fn eta(&self) -> u32 {
        self.eta
    }

    pub fn epoch_length(&self) -> f64 {
        epoch_length(self.eta, self.lambda_prev)
    }

    /// Zero-valued `b_k` or `δ_k` counts as a decrease.
    pub fn decide(&mut self, b_k: f64, delta_k: f64, backlog: f64) -> TargetChange {
        let b_up = b_k > 0.0;
        let d_up = delta_k > 0.0;
        match (b_up, d_up) {
            (true, true) => {
                let action = if self.flag {
                    self.gamma = (self.gamma + 1).min(GAMMA_CAP);
                    TargetChange::mdec(self.gamma, backlog)
                } else {
                    TargetChange::dec()
                };
                self.flag = true;
                action
            }
            (true, false) | (false, true) => {
                self.reset();
                TargetChange::inc()
            }
            (false, false) => {
                if self.flag && self.gamma > 0 {
                    TargetChange::mdec(self.gamma, backlog)
                } else {
                    self.reset();
                    TargetChange::dec()
                }
            }
        }
    }

    /// Applies [`update_lambda`] against the stored previous rate and keeps
    /// the result for the next epoch.
    pub fn update_lambda(
        &mut self,
        b_star: f64,
        z_ewma: f64,
        rtt_ewma: f64,
    ) -> Result<f64, ControlError> {
        let lambda = update_lambda(b_star, z_ewma, rtt_ewma, self.lambda_prev)?;
        self.lambda_prev = lambda;
        Ok(lambda)
    }

    fn reset(&mut self) {
        self.flag = false;
        self.gamma = 0;
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ControlError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ControlError::NonPositive { name, value })
    }
}

/// `λ = 1/Z̄ + b*/RTT̄`, clamped to `[0.75, 1.25] · λ_prev`.
pub fn update_lambda(
    b_star: f64,
    z_ewma: f64,
    rtt_ewma: f64,
    lambda_prev: f64,
) -> Result<f64, ControlError> {
    positive("z_ewma", z_ewma)?;
    positive("rtt_ewma", rtt_ewma)?;
    positive("lambda_prev", lambda_prev)?;
    let raw = 1.0 / z_ewma + b_star / rtt_ewma;
    let lo = MIN_RATIO * lambda_prev;
    let hi = MAX_RATIO * lambda_prev;
    Ok(if raw < lo {
        lo
    } else if raw > hi {
        hi
    } else {
        raw
    })
}

/// `T_k = η / λ_k`.
pub fn epoch_length(eta: u32, lambda: f64) -> f64 {
    eta as f64 / lambda
}
