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

//! The sending side of a connection.
//!
//! A connection starts with a stop-and-wait initialization phase: one
//! probe update at a time, each waiting for its ACK or a timeout. The first
//! control epoch begins when the last probe resolves, at rate
//! `λ₁ = 1 / mean(probe RTTs)`. From then on the source paces updates every
//! `1/λ_k` and closes an epoch every `η/λ_k`.

use serde::{Deserialize, Serialize};

use super::{lazy_rate, EndpointError, Policy, SourceConfig};
use crate::controller::{Controller, MdecBacklog};
use crate::estimator::{EpochStats, Estimator, EstimatorError};
use crate::wire::{decode_ack, secs_to_us, AckPacket, UpdatePacket};

/// One line of the per-epoch source trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub t: f64,
    /// Rate in force after this boundary.
    pub lambda: f64,
    pub delta_bar: f64,
    pub b_bar: f64,
    pub action: String,
    pub rtt_ewma: f64,
    pub z_ewma: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceCounters {
    pub sent: u64,
    pub fresh_acks: u64,
    pub stale_acks: u64,
    pub invalid_acks: u64,
    pub probes_timed_out: u32,
}

#[derive(Debug, Clone)]
struct Probing {
    outstanding: Option<(u32, f64)>,
    deadline: f64,
    sent: u32,
    rtts: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Running {
    lambda: f64,
    controller: Option<Controller>,
    epoch: u64,
    epoch_start: f64,
    epoch_end: f64,
    /// Sends completed in the current epoch.
    slot: u32,
    last_send: f64,
}

#[derive(Debug, Clone)]
enum Phase {
    Idle,
    Probing(Probing),
    Running(Running),
    Failed,
}

#[derive(Debug, Clone)]
pub struct SourceEndpoint {
    cfg: SourceConfig,
    est: Estimator,
    phase: Phase,
    next_seq: u32,
    lambda_1: Option<f64>,
    counters: SourceCounters,
    records: Vec<EpochRecord>,
    epochs: Vec<EpochStats>,
}

impl SourceEndpoint {
    pub fn new(cfg: SourceConfig) -> Result<Self, EndpointError> {
        cfg.validate()?;
        let est = Estimator::new(cfg.alpha, 0.0)?;
        Ok(SourceEndpoint {
            cfg,
            est,
            phase: Phase::Idle,
            next_seq: 1,
            lambda_1: None,
            counters: SourceCounters::default(),
            records: Vec::new(),
            epochs: Vec::new(),
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.cfg
    }

    pub fn estimator(&self) -> &Estimator {
        &self.est
    }

    pub fn counters(&self) -> &SourceCounters {
        &self.counters
    }

    /// Per-epoch trace records produced so far.
    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn epochs(&self) -> &[EpochStats] {
        &self.epochs
    }

    pub fn initial_rate(&self) -> Option<f64> {
        self.lambda_1
    }

    pub fn is_probing(&self) -> bool {
        matches!(self.phase, Phase::Idle | Phase::Probing(_))
    }

    pub fn is_running(&self) -> bool {
        matches!(self.phase, Phase::Running(_))
    }

    /// Current update rate, once the control phase has begun.
    pub fn lambda(&self) -> Option<f64> {
        match &self.phase {
            Phase::Running(r) => Some(r.lambda),
            _ => None,
        }
    }

    /// Time the running control phase began.
    pub fn control_start(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.start).or(match &self.phase {
            Phase::Running(r) => Some(r.epoch_start),
            _ => None,
        })
    }

    fn make_update(&mut self, now: f64) -> Result<UpdatePacket, EndpointError> {
        let seq = self.next_seq;
        self.est.on_send(now, seq, now)?;
        self.next_seq += 1;
        self.counters.sent += 1;
        Ok(UpdatePacket::new(
            seq,
            secs_to_us(now),
            vec![0; self.cfg.payload_size],
        ))
    }

    /// Opens the connection by sending the first probe.
    pub fn start(&mut self, now: f64) -> Result<UpdatePacket, EndpointError> {
        if !matches!(self.phase, Phase::Idle) {
            return Err(EndpointError::BadConfig("source already started".into()));
        }
        self.est = Estimator::new(self.cfg.alpha, now)?;
        self.phase = Phase::Probing(Probing {
            outstanding: None,
            deadline: now,
            sent: 0,
            rtts: Vec::new(),
        });
        self.send_probe(now)
    }

    fn send_probe(&mut self, now: f64) -> Result<UpdatePacket, EndpointError> {
        let p = self.make_update(now)?;
        if let Phase::Probing(pr) = &mut self.phase {
            pr.outstanding = Some((p.seq, now));
            pr.deadline = now + self.cfg.probe_timeout;
            pr.sent += 1;
        }
        Ok(p)
    }

    /// When the caller should next invoke [`SourceEndpoint::handle_timeout`].
    pub fn next_timeout(&self) -> Option<f64> {
        match &self.phase {
            Phase::Probing(p) => Some(p.deadline),
            Phase::Running(r) => Some(self.next_send_time(r).min(r.epoch_end)),
            Phase::Idle | Phase::Failed => None,
        }
    }

    fn next_send_time(&self, r: &Running) -> f64 {
        match self.cfg.policy {
            Policy::Lazy => r.last_send + 1.0 / r.lambda,
            _ => {
                if r.slot < self.cfg.eta {
                    r.epoch_start + r.slot as f64 / r.lambda
                } else {
                    r.epoch_end
                }
            }
        }
    }

    pub fn handle_timeout(&mut self, now: f64) -> Result<Option<UpdatePacket>, EndpointError> {
        match &self.phase {
            Phase::Idle => Ok(None),
            Phase::Failed => Err(EndpointError::Failed),
            Phase::Probing(p) => {
                if now < p.deadline {
                    return Ok(None);
                }
                let exhausted = p.sent >= self.cfg.probe_count;
                self.counters.probes_timed_out += 1;
                if exhausted {
                    self.finish_probing(now).map(Some)
                } else {
                    self.send_probe(now).map(Some)
                }
            }
            Phase::Running(r) => {
                if now >= r.epoch_end {
                    self.close_epoch(now)?;
                }
                let Phase::Running(r) = &self.phase else {
                    return Ok(None);
                };
                if now >= self.next_send_time(r) {
                    let p = self.make_update(now)?;
                    if let Phase::Running(r) = &mut self.phase {
                        r.slot += 1;
                        r.last_send = now;
                    }
                    Ok(Some(p))
                } else {
                    Ok(None)
                }
            }
        }
    }

    fn finish_probing(&mut self, now: f64) -> Result<UpdatePacket, EndpointError> {
        let Phase::Probing(p) = &self.phase else {
            unreachable!("finish_probing outside the probing phase");
        };
        if p.rtts.is_empty() {
            self.phase = Phase::Failed;
            return Err(EndpointError::InitFailed(self.cfg.probe_count));
        }
        let mean_rtt = p.rtts.iter().sum::<f64>() / p.rtts.len() as f64;
        let lambda_1 = 1.0 / mean_rtt;
        self.lambda_1 = Some(lambda_1);
        let lambda = match self.cfg.policy {
            Policy::Fixed(r) => r,
            Policy::AcpPlus | Policy::Lazy => lambda_1,
        };
        let controller = match self.cfg.policy {
            Policy::AcpPlus => Some(Controller::new(lambda, self.cfg.eta)?),
            _ => None,
        };
        self.est.begin_epoch(now)?;
        self.phase = Phase::Running(Running {
            lambda,
            controller,
            epoch: 1,
            epoch_start: now,
            epoch_end: now + self.cfg.eta as f64 / lambda,
            slot: 1,
            last_send: now,
        });
        self.make_update(now)
    }

    fn close_epoch(&mut self, now: f64) -> Result<(), EndpointError> {
        let stats = self.est.close_epoch(now)?;
        let rtt = self.est.rtt_ewma();
        let z = self.est.z_ewma();
        let Phase::Running(r) = &mut self.phase else {
            return Ok(());
        };
        let mut action = String::from("none");
        if let Some(ctrl) = r.controller.as_mut() {
            match (stats.b_diff, stats.delta_diff, rtt, z) {
                (Some(b_k), Some(delta_k), Some(rtt), Some(z)) => {
                    let backlog = match self.cfg.mdec_backlog {
                        MdecBacklog::Instantaneous => stats.backlog_now as f64,
                        MdecBacklog::TimeAverage => stats.b_bar,
                    };
                    let target = ctrl.decide(b_k, delta_k, backlog);
                    action = target.to_string();
                    match ctrl.update_lambda(target.b_star, z, rtt) {
                        Ok(l) => r.lambda = l,
                        // Z̄ can only be non-positive with simultaneous ACKs; hold the rate
                        Err(_) => action.push_str(" hold"),
                    }
                }
                _ => action = String::from("hold"),
            }
        }
        r.epoch += 1;
        r.epoch_start = now;
        r.epoch_end = now + self.cfg.eta as f64 / r.lambda;
        r.slot = 0;
        self.records.push(EpochRecord {
            epoch: r.epoch - 1,
            t: now,
            lambda: r.lambda,
            delta_bar: stats.delta_bar,
            b_bar: stats.b_bar,
            action,
            rtt_ewma: rtt.unwrap_or(f64::NAN),
            z_ewma: z.unwrap_or(f64::NAN),
        });
        self.epochs.push(stats);
        Ok(())
    }

    /// Processes an ACK. During initialization a resolved probe immediately
    /// triggers the next probe (or the first paced update), which is returned.
    pub fn handle_ack(
        &mut self,
        now: f64,
        ack: &AckPacket,
    ) -> Result<Option<UpdatePacket>, EndpointError> {
        if matches!(self.phase, Phase::Idle) {
            self.counters.invalid_acks += 1;
            return Ok(None);
        }
        if matches!(self.phase, Phase::Failed) {
            return Err(EndpointError::Failed);
        }
        if let Some(gen) = self.est.gen_ts_of(ack.seq) {
            if secs_to_us(gen) != ack.echo_ts_us {
                self.counters.invalid_acks += 1;
                return Ok(None);
            }
        }
        let outcome = match self.est.on_ack(now, ack.seq) {
            Ok(o) => o,
            Err(EstimatorError::UnknownSeq(_)) => {
                self.counters.invalid_acks += 1;
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        if !outcome.is_fresh() {
            self.counters.stale_acks += 1;
            return Ok(None);
        }
        self.counters.fresh_acks += 1;

        match &mut self.phase {
            Phase::Probing(p) => {
                let Some((seq, sent_at)) = p.outstanding else {
                    return Ok(None);
                };
                if ack.seq != seq {
                    return Ok(None);
                }
                p.rtts.push(now - sent_at);
                p.outstanding = None;
                if p.sent >= self.cfg.probe_count {
                    self.finish_probing(now).map(Some)
                } else {
                    self.send_probe(now).map(Some)
                }
            }
            Phase::Running(r) => {
                if self.cfg.policy == Policy::Lazy {
                    if let Some(rtt) = self.est.rtt_ewma() {
                        r.lambda = lazy_rate(rtt);
                    }
                }
                Ok(None)
            }
            Phase::Idle | Phase::Failed => Ok(None),
        }
    }

    /// Decodes an ACK datagram; undecodable frames are counted and dropped.
    pub fn handle_datagram(
        &mut self,
        now: f64,
        bytes: &[u8],
    ) -> Result<Option<UpdatePacket>, EndpointError> {
        match decode_ack(bytes) {
            Ok(ack) => self.handle_ack(now, &ack),
            Err(_) => {
                self.counters.invalid_acks += 1;
                Ok(None)
            }
        }
    }

    /// Time-weighted estimated age and backlog over epochs that start at or
    /// after `from`.
    pub fn estimated_averages(&self, from: f64) -> Option<(f64, f64)> {
        let (mut age, mut backlog, mut len) = (0.0, 0.0, 0.0);
        for e in self.epochs.iter().filter(|e| e.start >= from) {
            age += e.delta_bar * e.len();
            backlog += e.b_bar * e.len();
            len += e.len();
        }
        (len > 0.0).then(|| (age / len, backlog / len))
    }
}
