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

//! Datagram transports the endpoints run over.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::monitor::Monitor;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("socket error: {0}")]
    Io(#[from] io::Error),
    #[error("no peer address known yet")]
    NoPeer,
}

/// An unreliable, unordered datagram channel with its own clock.
pub trait DatagramLink {
    /// Seconds on this endpoint's monotonic clock.
    fn now(&self) -> f64;

    fn send(&mut self, frame: &[u8]) -> Result<(), LinkError>;

    /// Waits until `deadline` for a datagram and returns it with its arrival
    /// time, or `None` once the deadline passes.
    fn recv_until(&mut self, deadline: f64) -> Result<Option<(Vec<u8>, f64)>, LinkError>;

    /// Address of the most recent sender, for links that serve more than
    /// one peer over time.
    fn last_peer(&self) -> Option<SocketAddr> {
        None
    }
}

/// Per-packet one-way delay distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Constant {
        delay: f64,
    },
    Exponential {
        mean: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `base` plus an exponential with mean `mean`.
    ShiftedExponential {
        base: f64,
        mean: f64,
    },
}

impl DelayModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelayModel::Constant { delay } => delay,
            DelayModel::Exponential { mean } => exp_sample(rng, mean),
            DelayModel::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
            DelayModel::ShiftedExponential { base, mean } => base + exp_sample(rng, mean),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DelayModel::Constant { delay } => delay,
            DelayModel::Exponential { mean } => mean,
            DelayModel::Uniform { low, high } => 0.5 * (low + high),
            DelayModel::ShiftedExponential { base, mean } => base + mean,
        }
    }
}

fn exp_sample<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Exp::new(1.0 / mean).map(|d| d.sample(rng)).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimLinkConfig {
    pub forward: DelayModel,
    pub reverse: DelayModel,
    pub loss_forward: f64,
    pub loss_reverse: f64,
    /// Probability that a datagram is held back by an extra `reorder_delay`.
    pub reorder_prob: f64,
    pub reorder_delay: DelayModel,
    /// Deliver in send order even when sampled delays would swap packets.
    pub fifo: bool,
    pub seed: u64,
}

impl Default for SimLinkConfig {
    fn default() -> Self {
        SimLinkConfig {
            forward: DelayModel::Constant { delay: 0.05 },
            reverse: DelayModel::Constant { delay: 0.05 },
            loss_forward: 0.0,
            loss_reverse: 0.0,
            reorder_prob: 0.0,
            reorder_delay: DelayModel::Constant { delay: 0.0 },
            fifo: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    at: f64,
    order: u64,
    bytes: Vec<u8>,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for InFlight {}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for InFlight {
    // min-heap on (time, insertion order)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Simulated point-to-point path with a monitor at the far end. Time only
/// advances inside [`DatagramLink::recv_until`], so runs are reproducible
/// from the seed.
#[derive(Debug, Clone)]
pub struct SimLink {
    cfg: SimLinkConfig,
    now: f64,
    rng_fwd: ChaCha8Rng,
    rng_rev: ChaCha8Rng,
    order: u64,
    last_fwd: f64,
    last_rev: f64,
    to_monitor: BinaryHeap<InFlight>,
    to_source: BinaryHeap<InFlight>,
    monitor: Monitor,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl SimLink {
    pub fn new(cfg: SimLinkConfig) -> Self {
        SimLink {
            rng_fwd: stream(cfg.seed, 1),
            rng_rev: stream(cfg.seed, 2),
            cfg,
            now: 0.0,
            order: 0,
            last_fwd: 0.0,
            last_rev: 0.0,
            to_monitor: BinaryHeap::new(),
            to_source: BinaryHeap::new(),
            monitor: Monitor::new(),
        }
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    fn delay(&mut self, forward: bool) -> Option<f64> {
        let (model, loss, rng) = if forward {
            (self.cfg.forward, self.cfg.loss_forward, &mut self.rng_fwd)
        } else {
            (self.cfg.reverse, self.cfg.loss_reverse, &mut self.rng_rev)
        };
        // draw every variate unconditionally so the streams stay aligned
        let lost = rng.random::<f64>() < loss;
        let mut d = model.sample(rng);
        let reorder = rng.random::<f64>() < self.cfg.reorder_prob;
        let extra = self.cfg.reorder_delay.sample(rng);
        if reorder {
            d += extra;
        }
        (!lost).then_some(d)
    }

    fn schedule(&mut self, forward: bool, bytes: Vec<u8>) {
        let Some(d) = self.delay(forward) else {
            return;
        };
        let mut at = self.now + d;
        let last = if forward {
            &mut self.last_fwd
        } else {
            &mut self.last_rev
        };
        if self.cfg.fifo {
            at = at.max(*last);
        }
        *last = last.max(at);
        self.order += 1;
        let pkt = InFlight {
            at,
            order: self.order,
            bytes,
        };
        if forward {
            self.to_monitor.push(pkt);
        } else {
            self.to_source.push(pkt);
        }
    }
}

impl DatagramLink for SimLink {
    fn now(&self) -> f64 {
        self.now
    }

    fn send(&mut self, frame: &[u8]) -> Result<(), LinkError> {
        self.schedule(true, frame.to_vec());
        Ok(())
    }

    fn recv_until(&mut self, deadline: f64) -> Result<Option<(Vec<u8>, f64)>, LinkError> {
        loop {
            let fwd = self
                .to_monitor
                .peek()
                .map(|p| p.at)
                .unwrap_or(f64::INFINITY);
            let rev = self.to_source.peek().map(|p| p.at).unwrap_or(f64::INFINITY);
            if fwd <= rev && fwd <= deadline {
                let pkt = self.to_monitor.pop().expect("peeked");
                self.now = self.now.max(pkt.at);
                if let Some(ack) = self.monitor.on_datagram(self.now, &pkt.bytes) {
                    self.schedule(false, ack);
                }
            } else if rev <= deadline {
                let pkt = self.to_source.pop().expect("peeked");
                self.now = self.now.max(pkt.at);
                return Ok(Some((pkt.bytes, self.now)));
            } else {
                self.now = self.now.max(deadline);
                return Ok(None);
            }
        }
    }
}

/// A UDP socket. A source link is created with a fixed peer; a monitor link
/// replies to whoever sent the most recent datagram.
#[derive(Debug)]
pub struct UdpLink {
    socket: UdpSocket,
    peer: Option<SocketAddr>,
    fixed_peer: bool,
    epoch: Instant,
    /// Unix time of `epoch`, so that endpoints on hosts with synchronized
    /// clocks agree on timestamps.
    anchor: f64,
    buf: Vec<u8>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl UdpLink {
    pub fn connect(bind: SocketAddr, peer: SocketAddr) -> Result<Self, LinkError> {
        let socket = UdpSocket::bind(bind)?;
        Ok(UdpLink {
            socket,
            peer: Some(peer),
            fixed_peer: true,
            epoch: Instant::now(),
            anchor: unix_now(),
            buf: vec![0; 65_536],
        })
    }

    pub fn listen(bind: SocketAddr) -> Result<Self, LinkError> {
        let socket = UdpSocket::bind(bind)?;
        Ok(UdpLink {
            socket,
            peer: None,
            fixed_peer: false,
            epoch: Instant::now(),
            anchor: unix_now(),
            buf: vec![0; 65_536],
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, LinkError> {
        Ok(self.socket.local_addr()?)
    }

    pub fn peer(&self) -> Option<SocketAddr> {
        self.peer
    }
}

impl DatagramLink for UdpLink {
    fn now(&self) -> f64 {
        self.anchor + self.epoch.elapsed().as_secs_f64()
    }

    fn send(&mut self, frame: &[u8]) -> Result<(), LinkError> {
        let peer = self.peer.ok_or(LinkError::NoPeer)?;
        match self.socket.send_to(frame, peer) {
            Ok(_) => Ok(()),
            // the peer may not be listening yet; datagrams are unreliable anyway
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn last_peer(&self) -> Option<SocketAddr> {
        self.peer
    }

    fn recv_until(&mut self, deadline: f64) -> Result<Option<(Vec<u8>, f64)>, LinkError> {
        loop {
            let remaining = deadline - self.now();
            if remaining <= 0.0 {
                return Ok(None);
            }
            let wait = Duration::from_secs_f64(remaining.max(1e-6));
            self.socket.set_read_timeout(Some(wait))?;
            match self.socket.recv_from(&mut self.buf) {
                Ok((n, from)) => {
                    if self.fixed_peer && Some(from) != self.peer {
                        continue;
                    }
                    if !self.fixed_peer {
                        self.peer = Some(from);
                    }
                    let t = self.now();
                    return Ok(Some((self.buf[..n].to_vec(), t)));
                }
                Err(e)
                    if matches!(
                        e.kind(),
                        io::ErrorKind::WouldBlock
                            | io::ErrorKind::TimedOut
                            | io::ErrorKind::Interrupted
                            | io::ErrorKind::ConnectionRefused
                    ) =>
                {
                    continue
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}
