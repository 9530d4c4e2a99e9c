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

//! Single-threaded event loops that drive an endpoint over a link.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::Serialize;

use super::link::{DatagramLink, LinkError};
use super::monitor::{Monitor, MonitorRecord};
use super::source::{EpochRecord, SourceEndpoint};
use super::EndpointError;
use crate::wire::{encode_update, UpdatePacket};

/// End-of-run summary printed by the source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceSummary {
    pub policy: String,
    pub duration: f64,
    pub lambda_1: Option<f64>,
    pub epochs: usize,
    /// Time-weighted mean of the per-epoch estimated age.
    pub avg_age_estimate: Option<f64>,
    pub avg_backlog_estimate: Option<f64>,
    /// Mean of the per-epoch rates.
    pub avg_lambda: Option<f64>,
    pub sent: u64,
    pub fresh_acks: u64,
    pub stale_acks: u64,
    pub invalid_acks: u64,
    /// In-sequence ACKs per second.
    pub throughput: f64,
}

fn transmit<L: DatagramLink>(link: &mut L, p: Option<UpdatePacket>) -> Result<(), EndpointError> {
    if let Some(p) = p {
        link.send(&encode_update(&p)?)?;
    }
    Ok(())
}

/// Runs the stop-and-wait probing phase and returns `λ₁`.
pub fn run_initialization<L: DatagramLink>(
    link: &mut L,
    src: &mut SourceEndpoint,
) -> Result<f64, EndpointError> {
    if src.initial_rate().is_none() && !src.is_running() {
        let first = src.start(link.now())?;
        transmit(link, Some(first))?;
    }
    while src.is_probing() {
        let deadline = src.next_timeout().ok_or(EndpointError::Failed)?;
        match link.recv_until(deadline)? {
            Some((bytes, t)) => {
                let next = src.handle_datagram(t, &bytes)?;
                transmit(link, next)?;
            }
            None => {
                let next = src.handle_timeout(link.now())?;
                transmit(link, next)?;
            }
        }
    }
    src.initial_rate().ok_or(EndpointError::Failed)
}

/// Runs a source for `duration` seconds of link time, initialization
/// included. Every closed epoch is handed to `on_epoch` as it happens. On a
/// transport error the partial trace remains available on `src`.
pub fn run_source<L, F>(
    link: &mut L,
    src: &mut SourceEndpoint,
    duration: f64,
    mut on_epoch: F,
) -> Result<SourceSummary, EndpointError>
where
    L: DatagramLink,
    F: FnMut(&EpochRecord),
{
    let begin = link.now();
    let end = begin + duration;
    let first = src.start(begin)?;
    transmit(link, Some(first))?;
    let mut emitted = 0;
    loop {
        let deadline = src.next_timeout().unwrap_or(end).min(end);
        let next = match link.recv_until(deadline)? {
            Some((bytes, t)) => src.handle_datagram(t, &bytes)?,
            None => {
                let now = link.now();
                if now >= end {
                    break;
                }
                src.handle_timeout(now)?
            }
        };
        transmit(link, next)?;
        for r in &src.records()[emitted..] {
            on_epoch(r);
        }
        emitted = src.records().len();
    }
    Ok(summarize(src, link.now() - begin))
}

pub fn summarize(src: &SourceEndpoint, duration: f64) -> SourceSummary {
    let c = src.counters();
    let records = src.records();
    let avg_lambda = (!records.is_empty())
        .then(|| records.iter().map(|r| r.lambda).sum::<f64>() / records.len() as f64);
    let est = src.estimated_averages(f64::NEG_INFINITY);
    SourceSummary {
        policy: src.config().policy.to_string(),
        duration,
        lambda_1: src.initial_rate(),
        epochs: records.len(),
        avg_age_estimate: est.map(|e| e.0),
        avg_backlog_estimate: est.map(|e| e.1),
        avg_lambda,
        sent: c.sent,
        fresh_acks: c.fresh_acks,
        stale_acks: c.stale_acks,
        invalid_acks: c.invalid_acks,
        throughput: if duration > 0.0 {
            c.fresh_acks as f64 / duration
        } else {
            0.0
        },
    }
}

/// Serves updates until `until` (link time) or until `stop` is raised,
/// acknowledging fresh updates and handing every age reset to `on_record`.
/// A datagram from a new peer starts a new connection.
pub fn run_monitor<L, F>(
    link: &mut L,
    monitor: &mut Monitor,
    until: f64,
    stop: &AtomicBool,
    mut on_record: F,
) -> Result<(), LinkError>
where
    L: DatagramLink,
    F: FnMut(&MonitorRecord),
{
    const POLL: f64 = 0.05;
    let mut peer = None;
    while !stop.load(Ordering::Relaxed) {
        let now = link.now();
        if now >= until {
            break;
        }
        if let Some((bytes, t)) = link.recv_until((now + POLL).min(until))? {
            let from = link.last_peer();
            if from != peer {
                if peer.is_some() {
                    monitor.new_connection();
                }
                peer = from;
            }
            if let Some(ack) = monitor.on_datagram(t, &bytes) {
                link.send(&ack)?;
            }
            for r in monitor.take_trace() {
                on_record(&r);
            }
        }
    }
    Ok(())
}
