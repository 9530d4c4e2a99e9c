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

//! Source-side view of the monitor's age and of the updates in flight.
//!
//! The source never sees the monitor's clock. It reconstructs
//!
//! * the backlog `B̂(t) = S(t) − N̂(t)`, where `S` is the highest sequence
//!   number sent and `N̂` the highest one acknowledged in sequence, and
//! * the age `Δ̂(t) = t − a_{N̂(t)}`, which resets to the round-trip time of
//!   every in-sequence ACK and otherwise grows with unit slope.
//!
//! Both processes are integrated exactly over each control epoch so that
//! the controller can compare consecutive time averages.

use std::collections::BTreeMap;

use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("sequence {got} sent out of order, expected {expected}")]
    NonMonotoneSeq { expected: u32, got: u32 },
    #[error("event at {t} precedes the previous event at {last}")]
    TimeWentBackwards { t: f64, last: f64 },
    #[error("ACK for sequence {0} that was never sent")]
    UnknownSeq(u32),
    #[error("no in-sequence ACK received yet")]
    NoEstimate,
    #[error("epoch [{start}, {end}] has no length")]
    EmptyEpoch { start: f64, end: f64 },
    #[error("EWMA weight {0} outside (0, 1]")]
    BadAlpha(f64),
}

/// Exponentially weighted moving average seeded by its first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(alpha: f64) -> Self {
        Ewma { alpha, value: None }
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn seed(&mut self, v: f64) {
        self.value = Some(v);
    }

    pub fn update(&mut self, sample: f64) -> f64 {
        let v = match self.value {
            None => sample,
            Some(prev) => (1.0 - self.alpha) * prev + self.alpha * sample,
        };
        self.value = Some(v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    Fresh,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckOutcome {
    pub freshness: Freshness,
    pub rtt_sample: Option<f64>,
    /// `None` for stale ACKs and for the very first fresh ACK.
    pub z_sample: Option<f64>,
}

impl AckOutcome {
    const STALE: AckOutcome = AckOutcome {
        freshness: Freshness::Stale,
        rtt_sample: None,
        z_sample: None,
    };

    pub fn is_fresh(&self) -> bool {
        self.freshness == Freshness::Fresh
    }
}

/// Time averages over one control epoch `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub start: f64,
    pub end: f64,
    pub delta_bar: f64,
    pub b_bar: f64,
    /// `Δ̄_k − Δ̄_{k−1}`; absent for the first epoch.
    pub delta_diff: Option<f64>,
    /// `B̄_k − B̄_{k−1}`; absent for the first epoch.
    pub b_diff: Option<f64>,
    pub backlog_now: u32,
}

impl EpochStats {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone)]
pub struct Estimator {
    /// Generation times of updates not yet covered by an in-sequence ACK.
    send_log: BTreeMap<u32, f64>,
    highest_sent: u32,
    highest_acked: u32,
    acked_gen_ts: Option<f64>,
    last_fresh_ack: Option<f64>,
    rtt: Ewma,
    z: Ewma,
    cursor: f64,
    epoch_start: f64,
    age_area: f64,
    backlog_area: f64,
    prev_epoch: Option<(f64, f64)>,
}

impl Estimator {
    pub fn new(alpha: f64, start: f64) -> Result<Self, EstimatorError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(EstimatorError::BadAlpha(alpha));
        }
        Ok(Estimator {
            send_log: BTreeMap::new(),
            highest_sent: 0,
            highest_acked: 0,
            acked_gen_ts: None,
            last_fresh_ack: None,
            rtt: Ewma::new(alpha),
            z: Ewma::new(alpha),
            cursor: start,
            epoch_start: start,
            age_area: 0.0,
            backlog_area: 0.0,
            prev_epoch: None,
        })
    }

    /// `S(t)`: highest sequence number sent so far (0 before the first send).
    pub fn highest_sent(&self) -> u32 {
        self.highest_sent
    }

    /// `N̂(t)`: highest sequence number acknowledged in sequence.
    pub fn highest_acked(&self) -> u32 {
        self.highest_acked
    }

    pub fn backlog(&self) -> u32 {
        self.highest_sent - self.highest_acked
    }

    pub fn rtt_ewma(&self) -> Option<f64> {
        self.rtt.value()
    }

    pub fn z_ewma(&self) -> Option<f64> {
        self.z.value()
    }

    pub fn epoch_start(&self) -> f64 {
        self.epoch_start
    }

    pub fn has_estimate(&self) -> bool {
        self.acked_gen_ts.is_some()
    }

    /// Generation time of an update still awaiting an in-sequence ACK.
    pub fn gen_ts_of(&self, seq: u32) -> Option<f64> {
        self.send_log.get(&seq).copied()
    }

    pub fn age_at(&self, t: f64) -> Result<f64, EstimatorError> {
        self.acked_gen_ts
            .map(|a| t - a)
            .ok_or(EstimatorError::NoEstimate)
    }

    fn advance(&mut self, t: f64) -> Result<(), EstimatorError> {
        if t < self.cursor {
            return Err(EstimatorError::TimeWentBackwards {
                t,
                last: self.cursor,
            });
        }
        let dt = t - self.cursor;
        if dt > 0.0 {
            self.backlog_area += self.backlog() as f64 * dt;
            if let Some(a) = self.acked_gen_ts {
                // trapezoid under the unit-slope segment
                self.age_area += dt * ((self.cursor - a) + (t - a)) * 0.5;
            }
        }
        self.cursor = t;
        Ok(())
    }

    pub fn on_send(&mut self, t: f64, seq: u32, gen_ts: f64) -> Result<(), EstimatorError> {
        let expected = self.highest_sent.wrapping_add(1);
        if seq != expected {
            return Err(EstimatorError::NonMonotoneSeq { expected, got: seq });
        }
        self.advance(t)?;
        self.highest_sent = seq;
        self.send_log.insert(seq, gen_ts);
        Ok(())
    }

    pub fn on_ack(&mut self, t: f64, seq: u32) -> Result<AckOutcome, EstimatorError> {
        if seq == 0 || seq > self.highest_sent {
            return Err(EstimatorError::UnknownSeq(seq));
        }
        if seq <= self.highest_acked {
            return Ok(AckOutcome::STALE);
        }
        let gen_ts = *self
            .send_log
            .get(&seq)
            .ok_or(EstimatorError::UnknownSeq(seq))?;
        self.advance(t)?;

        let rtt_sample = t - gen_ts;
        let z_sample = self.last_fresh_ack.map(|prev| t - prev);
        self.rtt.update(rtt_sample);
        match z_sample {
            Some(z) => {
                self.z.update(z);
            }
            None => self.z.seed(rtt_sample),
        }

        self.highest_acked = seq;
        self.acked_gen_ts = Some(gen_ts);
        self.last_fresh_ack = Some(t);
        self.send_log = self.send_log.split_off(&(seq + 1));

        Ok(AckOutcome {
            freshness: Freshness::Fresh,
            rtt_sample: Some(rtt_sample),
            z_sample,
        })
    }

    /// Restarts the epoch accounting at `t`, forgetting the previous epoch.
    pub fn begin_epoch(&mut self, t: f64) -> Result<(), EstimatorError> {
        self.advance(t)?;
        self.epoch_start = t;
        self.age_area = 0.0;
        self.backlog_area = 0.0;
        self.prev_epoch = None;
        Ok(())
    }

    /// Closes the running epoch at `t`. Age area is only accumulated once an
    /// in-sequence ACK exists, but the average is taken over the full epoch.
    pub fn close_epoch(&mut self, t: f64) -> Result<EpochStats, EstimatorError> {
        if t <= self.epoch_start {
            return Err(EstimatorError::EmptyEpoch {
                start: self.epoch_start,
                end: t,
            });
        }
        self.advance(t)?;
        let len = t - self.epoch_start;
        let delta_bar = self.age_area / len;
        let b_bar = self.backlog_area / len;
        let (delta_diff, b_diff) = match self.prev_epoch {
            Some((d, b)) => (Some(delta_bar - d), Some(b_bar - b)),
            None => (None, None),
        };
        let stats = EpochStats {
            start: self.epoch_start,
            end: t,
            delta_bar,
            b_bar,
            delta_diff,
            b_diff,
            backlog_now: self.backlog(),
        };
        self.prev_epoch = Some((delta_bar, b_bar));
        self.epoch_start = t;
        self.age_area = 0.0;
        self.backlog_area = 0.0;
        Ok(stats)
    }
}
