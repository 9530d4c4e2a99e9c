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

//! The receiving side: keeps the freshest update and the true age
//! `Δ(t) = t − z(t)`. Updates older than the freshest one are dropped
//! without an ACK.

use serde::{Deserialize, Serialize};

use crate::timeavg::AgeIntegral;
use crate::wire::{decode_update, encode_ack, us_to_secs, AckPacket, UpdatePacket};

/// A reset of the monitor's age process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub age_reset: f64,
    pub seq: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MonitorCounters {
    pub accepted: u64,
    pub discarded: u64,
    pub malformed: u64,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    freshest_seq: Option<u32>,
    freshest_ts: Option<f64>,
    /// Added to the source timestamp before computing the age.
    clock_offset: f64,
    record_trace: bool,
    trace: Vec<MonitorRecord>,
    counters: MonitorCounters,
    age: AgeIntegral,
}

impl Default for Monitor {
    fn default() -> Self {
        Monitor::new()
    }
}

impl Monitor {
    pub fn new() -> Self {
        Monitor::with_window(AgeIntegral::new(f64::NEG_INFINITY))
    }

    /// Monitor whose age average only counts time inside `age`'s window.
    pub fn with_window(age: AgeIntegral) -> Self {
        Monitor {
            freshest_seq: None,
            freshest_ts: None,
            clock_offset: 0.0,
            record_trace: true,
            trace: Vec::new(),
            counters: MonitorCounters::default(),
            age,
        }
    }

    pub fn set_clock_offset(&mut self, offset: f64) {
        self.clock_offset = offset;
    }

    /// Disables the breakpoint trace for long simulations.
    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn freshest_seq(&self) -> Option<u32> {
        self.freshest_seq
    }

    pub fn freshest_ts(&self) -> Option<f64> {
        self.freshest_ts
    }

    pub fn trace(&self) -> &[MonitorRecord] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<MonitorRecord> {
        std::mem::take(&mut self.trace)
    }

    pub fn counters(&self) -> &MonitorCounters {
        &self.counters
    }

    pub fn age_integral(&self) -> &AgeIntegral {
        &self.age
    }

    /// `Δ(t)`, once anything has been accepted.
    pub fn age_at(&self, t: f64) -> Option<f64> {
        self.freshest_ts.map(|z| t - z)
    }

    /// Forgets the freshest sequence number so that a new connection, whose
    /// numbering starts over, is accepted. Counters and the age average are
    /// kept.
    pub fn new_connection(&mut self) {
        self.freshest_seq = None;
    }

    pub fn on_update(&mut self, now: f64, update: &UpdatePacket) -> Option<AckPacket> {
        self.on_update_at(now, update.seq, us_to_secs(update.gen_ts_us))
            .then(|| AckPacket::for_update(update))
    }

    /// Core freshness rule on already-decoded fields; returns whether the
    /// update was accepted.
    pub fn on_update_at(&mut self, now: f64, seq: u32, gen_ts: f64) -> bool {
        if self.freshest_seq.is_some_and(|f| seq <= f) {
            self.counters.discarded += 1;
            return false;
        }
        let z = gen_ts + self.clock_offset;
        self.freshest_seq = Some(seq);
        self.freshest_ts = Some(z);
        self.counters.accepted += 1;
        self.age.reset(now, z);
        if self.record_trace {
            self.trace.push(MonitorRecord {
                t: now,
                age_reset: now - z,
                seq,
            });
        }
        true
    }

    /// Decodes a datagram and returns the encoded ACK to send back, if any.
    pub fn on_datagram(&mut self, now: f64, bytes: &[u8]) -> Option<Vec<u8>> {
        match decode_update(bytes) {
            Ok(u) => self.on_update(now, &u).map(|a| encode_ack(&a)),
            Err(_) => {
                self.counters.malformed += 1;
                None
            }
        }
    }
}
