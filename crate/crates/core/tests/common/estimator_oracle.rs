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

//! Brute-force replay of a send/ACK event log: the estimated backlog and age
//! are evaluated at any instant straight from their definitions.

use acp_core::estimator::{EpochStats, Estimator};
use rand::Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Send { t: f64, seq: u32 },
    Ack { t: f64, seq: u32 },
    Close { t: f64 },
}

impl Event {
    pub fn t(&self) -> f64 {
        match *self {
            Event::Send { t, .. } | Event::Ack { t, .. } | Event::Close { t } => t,
        }
    }
}

/// Random trace: Poisson sends, 20% of ACKs lost, ACK delays uniform on
/// [0.01, 0.6] s (so ACKs overtake each other), and epoch boundaries at
/// exponential intervals.
pub fn random_trace<R: Rng>(rng: &mut R, sends: usize) -> Vec<Event> {
    let gap = Exp::new(10.0).unwrap();
    let mut events = Vec::new();
    let mut t = 0.0;
    for seq in 1..=sends as u32 {
        t += gap.sample(rng);
        events.push(Event::Send { t, seq });
        if rng.random::<f64>() >= 0.2 {
            events.push(Event::Ack {
                t: t + rng.random_range(0.01..0.6),
                seq,
            });
        }
    }
    let last = events.iter().map(Event::t).fold(0.0, f64::max);
    let epoch = Exp::new(1.0).unwrap();
    let mut c = 0.0;
    loop {
        c += epoch.sample(rng) + 1e-3;
        if c > last + 0.5 {
            break;
        }
        events.push(Event::Close { t: c });
    }
    events.sort_by(|a, b| a.t().total_cmp(&b.t()));
    events
}

/// The sample paths defined by an event log.
pub struct Paths {
    send_time: Vec<f64>,
    /// Sorted `(t, seq)` of every ACK, stale ones included.
    acks: Vec<(f64, u32)>,
}

impl Paths {
    pub fn new(events: &[Event]) -> Self {
        let mut send_time = vec![f64::NAN];
        let mut acks = Vec::new();
        for e in events {
            match *e {
                Event::Send { t, seq } => {
                    assert_eq!(seq as usize, send_time.len());
                    send_time.push(t);
                }
                Event::Ack { t, seq } => acks.push((t, seq)),
                Event::Close { .. } => {}
            }
        }
        Paths { send_time, acks }
    }

    /// `S(t)`: sends at or before `t`.
    pub fn sent(&self, t: f64) -> u32 {
        self.send_time[1..].iter().filter(|&&s| s <= t).count() as u32
    }

    /// `N̂(t)`: largest sequence number acknowledged at or before `t`.
    pub fn acked(&self, t: f64) -> u32 {
        self.acks
            .iter()
            .filter(|a| a.0 <= t)
            .map(|a| a.1)
            .max()
            .unwrap_or(0)
    }

    pub fn backlog(&self, t: f64) -> u32 {
        self.sent(t) - self.acked(t)
    }

    /// `Δ̂(t) = t − a_{N̂(t)}`, once anything has been acknowledged.
    pub fn age(&self, t: f64) -> Option<f64> {
        match self.acked(t) {
            0 => None,
            n => Some(t - self.send_time[n as usize]),
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b: Vec<f64> = self.send_time[1..]
            .iter()
            .copied()
            .chain(self.acks.iter().map(|a| a.0))
            .filter(|&x| x > t0 && x < t1)
            .collect();
        b.push(t0);
        b.push(t1);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Exact `∫ B̂` and `∫ Δ̂` over `[t0, t1]` (age counted as zero before the
    /// first ACK).
    pub fn integrals(&self, t0: f64, t1: f64) -> (f64, f64) {
        let b = self.breakpoints(t0, t1);
        let (mut age, mut backlog) = (0.0, 0.0);
        for w in b.windows(2) {
            let (x, y) = (w[0], w[1]);
            backlog += self.backlog(x) as f64 * (y - x);
            if let Some(ax) = self.age(x) {
                age += (y - x) * (ax + (ax + (y - x))) * 0.5;
            }
        }
        (age, backlog)
    }

    /// Midpoint-rule integrals on a grid of step `h`.
    pub fn dense_integrals(&self, t0: f64, t1: f64, h: f64) -> (f64, f64) {
        let n = ((t1 - t0) / h).round() as usize;
        let h = (t1 - t0) / n as f64;
        let (mut age, mut backlog) = (0.0, 0.0);
        // walk forward keeping cursors instead of rescanning the log
        let mut sends = 0usize;
        let mut ack_idx = 0usize;
        let mut n_hat = 0u32;
        let mut sorted_sends: Vec<f64> = self.send_time[1..].to_vec();
        sorted_sends.sort_by(f64::total_cmp);
        for k in 0..n {
            let t = t0 + (k as f64 + 0.5) * h;
            while sends < sorted_sends.len() && sorted_sends[sends] <= t {
                sends += 1;
            }
            while ack_idx < self.acks.len() && self.acks[ack_idx].0 <= t {
                n_hat = n_hat.max(self.acks[ack_idx].1);
                ack_idx += 1;
            }
            backlog += (sends as u32 - n_hat) as f64 * h;
            if n_hat > 0 {
                age += (t - self.send_time[n_hat as usize]) * h;
            }
        }
        (age, backlog)
    }
}

/// Plain EWMA recurrence `x̄ ← (1−α)x̄ + α·x`, seeded with the first sample.
pub fn ewma(samples: &[f64], alpha: f64) -> Option<f64> {
    let mut it = samples.iter();
    let mut v = *it.next()?;
    for &x in it {
        v = (1.0 - alpha) * v + alpha * x;
    }
    Some(v)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-15
}

/// Runs `events` through the library estimator and checks every quantity
/// against the replay oracle. Returns a description of the first mismatch.
pub fn check_trace(events: &[Event], alpha: f64) -> Result<usize, String> {
    let paths = Paths::new(events);
    let mut est = Estimator::new(alpha, 0.0).map_err(|e| e.to_string())?;
    let mut epoch_start = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut fresh_times = Vec::new();
    let mut rtts = Vec::new();
    let mut closes = 0;
    for (i, e) in events.iter().enumerate() {
        match *e {
            Event::Send { t, seq } => est.on_send(t, seq, t).map_err(|e| e.to_string())?,
            Event::Ack { t, seq } => {
                let before = est.highest_acked();
                let out = est.on_ack(t, seq).map_err(|e| e.to_string())?;
                if seq > before {
                    if !out.is_fresh() {
                        return Err(format!("ack {seq} at {t} should be fresh"));
                    }
                    rtts.push(t - paths.send_time[seq as usize]);
                    fresh_times.push(t);
                } else if out.is_fresh() || out.rtt_sample.is_some() || out.z_sample.is_some() {
                    return Err(format!("ack {seq} at {t} should be stale"));
                }
            }
            Event::Close { t } => {
                let s: EpochStats = est.close_epoch(t).map_err(|e| e.to_string())?;
                let (age_area, backlog_area) = paths.integrals(epoch_start, t);
                let len = t - epoch_start;
                let (d, b) = (age_area / len, backlog_area / len);
                if !rel_close(s.delta_bar, d, 1e-9) || !rel_close(s.b_bar, b, 1e-9) {
                    return Err(format!(
                        "epoch [{epoch_start}, {t}]: got ({}, {}), oracle ({d}, {b})",
                        s.delta_bar, s.b_bar
                    ));
                }
                match (prev, s.delta_diff, s.b_diff) {
                    (None, None, None) => {}
                    (Some((pd, pb)), Some(dd), Some(bd)) => {
                        if !rel_close(dd, d - pd, 1e-7) && (dd - (d - pd)).abs() > 1e-9 {
                            return Err(format!("delta diff {dd} vs {}", d - pd));
                        }
                        if !rel_close(bd, b - pb, 1e-7) && (bd - (b - pb)).abs() > 1e-9 {
                            return Err(format!("backlog diff {bd} vs {}", b - pb));
                        }
                    }
                    other => return Err(format!("diff presence mismatch {other:?}")),
                }
                if s.backlog_now != paths.backlog(t) {
                    return Err(format!(
                        "backlog_now {} vs {}",
                        s.backlog_now,
                        paths.backlog(t)
                    ));
                }
                prev = Some((d, b));
                epoch_start = t;
                closes += 1;
            }
        }
        // step values, bit for bit, at the event and halfway to the next one
        let t = e.t();
        let next = events.get(i + 1).map_or(t + 0.1, Event::t);
        for q in [t, 0.5 * (t + next)] {
            if est.backlog() != paths.backlog(t) || est.highest_sent() != paths.sent(t) {
                return Err(format!(
                    "backlog at {q}: {} vs {}",
                    est.backlog(),
                    paths.backlog(t)
                ));
            }
            let got = est.age_at(q).ok();
            let want = paths
                .age(t)
                .map(|_| q - paths.send_time[paths.acked(t) as usize]);
            if got.map(f64::to_bits) != want.map(f64::to_bits) {
                return Err(format!("age at {q}: {got:?} vs {want:?}"));
            }
        }
    }
    let z_samples: Vec<f64> = std::iter::once(rtts.first().copied())
        .flatten()
        .chain(fresh_times.windows(2).map(|w| w[1] - w[0]))
        .collect();
    let want_rtt = ewma(&rtts, alpha);
    let want_z = ewma(&z_samples, alpha);
    if est.rtt_ewma().map(f64::to_bits) != want_rtt.map(f64::to_bits)
        || est.z_ewma().map(f64::to_bits) != want_z.map(f64::to_bits)
    {
        return Err(format!(
            "EWMAs ({:?}, {:?}) vs ({want_rtt:?}, {want_z:?})",
            est.rtt_ewma(),
            est.z_ewma()
        ));
    }
    Ok(closes)
}
