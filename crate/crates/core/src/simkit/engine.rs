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

//! The event loop. A run is a pure function of its configuration and seed:
//! events are ordered by time and then by insertion, and every stochastic
//! element draws from its own ChaCha stream.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::config::{Arrival, NetworkSpec, RunSpec, ServiceSpec, SimConfig};
use super::metrics::{jain_index, AoiMetrics, NodeMetrics, SourceMetrics};
use super::SimError;
use crate::endpoints::{EndpointError, Monitor, SourceConfig, SourceEndpoint};
use crate::timeavg::{ci_halfwidth, AgeIntegral, StepIntegral};
use crate::wire::{AckPacket, UpdatePacket};

const SOURCE_STREAM: u64 = 1000;
const FORWARD_STREAM: u64 = 2000;
const REVERSE_STREAM: u64 = 3000;
const CROSS_STREAM: u64 = 4000;

/// One update reaching the monitor, accepted or not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub source: usize,
    pub seq: u32,
    pub gen_ts: f64,
    pub t: f64,
    pub accepted: bool,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

#[derive(Debug, Clone, Copy)]
enum Dir {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Update {
        src: usize,
        seq: u32,
        gen: f64,
        echo_us: u64,
    },
    Ack {
        src: usize,
        seq: u32,
        echo_us: u64,
        sent: f64,
    },
    Cross,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    kind: Kind,
    bytes: u32,
    /// Last forward node visited.
    exit: usize,
    arrived: f64,
}

impl Packet {
    fn is_update(&self) -> bool {
        matches!(self.kind, Kind::Update { .. })
    }
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Start { src: usize },
    Generate { src: usize },
    Timer { src: usize, gen: u64 },
    Cross { flow: usize },
    Depart { dir: Dir, node: usize },
}

struct Scheduled {
    t: f64,
    order: u64,
    ev: Ev,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.order.cmp(&self.order))
    }
}

struct Node {
    spec: ServiceSpec,
    rng: ChaCha8Rng,
    queue: VecDeque<Packet>,
    updates_here: u32,
    update_backlog: StepIntegral,
    occupancy: StepIntegral,
    arrivals: u64,
    departures: u64,
    window_departures: u64,
    window_sojourn: f64,
}

impl Node {
    fn new(spec: ServiceSpec, rng: ChaCha8Rng, warmup: f64) -> Self {
        Node {
            spec,
            rng,
            queue: VecDeque::new(),
            updates_here: 0,
            update_backlog: StepIntegral::new(warmup),
            occupancy: StepIntegral::new(warmup),
            arrivals: 0,
            departures: 0,
            window_departures: 0,
            window_sojourn: 0.0,
        }
    }

    fn service_time(&mut self, bytes: u32, update_bytes: u32) -> f64 {
        let mean = self.spec.mean_service(bytes, update_bytes);
        match self.spec {
            ServiceSpec::Exponential { .. } => {
                let e: f64 = self.rng.sample(Exp1);
                e * mean
            }
            ServiceSpec::Deterministic { .. } | ServiceSpec::Link { .. } => mean,
        }
    }
}

struct CrossFlow {
    rng: ChaCha8Rng,
    pkt_rate: f64,
    bytes: u32,
    entry: usize,
    exit: usize,
}

// one per source; the size difference is immaterial
#[allow(clippy::large_enum_variant)]
enum Driver {
    Open {
        lambda: f64,
        arrival: Arrival,
        rng: ChaCha8Rng,
        generated: u64,
    },
    Protocol {
        ep: Box<SourceEndpoint>,
        timer_gen: u64,
        failed: Option<String>,
    },
}

struct Source {
    driver: Driver,
    monitor: Monitor,
    sent: u64,
    window_sent: u64,
    window_delivered: u64,
    window_rtt_sum: f64,
    window_rtt_n: u64,
}

struct Engine {
    now: f64,
    order: u64,
    heap: BinaryHeap<Scheduled>,
    forward: Vec<Node>,
    reverse: Vec<Node>,
    cross: Vec<CrossFlow>,
    sources: Vec<Source>,
    update_bytes: u32,
    ack_bytes: u32,
    warmup: f64,
    duration: f64,
    log: Option<Vec<Delivery>>,
}

impl Engine {
    fn new(cfg: &SimConfig, log: bool) -> Result<Self, SimError> {
        cfg.validate()?;
        let net = &cfg.network;
        let warmup = cfg.warmup();
        let forward = net
            .forward
            .iter()
            .enumerate()
            .map(|(j, s)| Node::new(*s, stream(cfg.seed, FORWARD_STREAM + j as u64), warmup))
            .collect();
        let reverse = net
            .reverse_nodes()
            .iter()
            .enumerate()
            .map(|(j, s)| Node::new(*s, stream(cfg.seed, REVERSE_STREAM + j as u64), warmup))
            .collect();
        let cross = net
            .cross_traffic
            .iter()
            .enumerate()
            .map(|(f, c)| CrossFlow {
                rng: stream(cfg.seed, CROSS_STREAM + f as u64),
                pkt_rate: c.rate_bps / (8.0 * c.packet_bytes as f64),
                bytes: c.packet_bytes,
                entry: c.entry,
                exit: net.cross_exit(c),
            })
            .collect();
        let monitor = || {
            Monitor::with_window(AgeIntegral::with_batches(warmup, cfg.duration, cfg.batches))
                .without_trace()
        };
        let mut sources = Vec::new();
        match &cfg.run {
            RunSpec::FixedRate { lambda, arrival } => sources.push(Source::new(
                Driver::Open {
                    lambda: *lambda,
                    arrival: *arrival,
                    rng: stream(cfg.seed, SOURCE_STREAM),
                    generated: 0,
                },
                monitor(),
            )),
            RunSpec::ClosedLoop {
                sources: n, source, ..
            } => {
                for _ in 0..*n {
                    sources.push(Source::new(
                        Driver::Protocol {
                            ep: Box::new(SourceEndpoint::new(source.clone())?),
                            timer_gen: 0,
                            failed: None,
                        },
                        monitor(),
                    ));
                }
            }
        }
        let mut e = Engine {
            now: 0.0,
            order: 0,
            heap: BinaryHeap::new(),
            forward,
            reverse,
            cross,
            sources,
            update_bytes: net.update_bytes,
            ack_bytes: net.ack_bytes,
            warmup,
            duration: cfg.duration,
            log: log.then(Vec::new),
        };
        for f in 0..e.cross.len() {
            let gap = e.cross_gap(f);
            e.schedule(gap, Ev::Cross { flow: f });
        }
        match &cfg.run {
            RunSpec::FixedRate { arrival, .. } => {
                let first = match arrival {
                    Arrival::Periodic => 0.0,
                    Arrival::Poisson => e.open_gap(0),
                };
                e.schedule(first, Ev::Generate { src: 0 });
            }
            RunSpec::ClosedLoop { start_spacing, .. } => {
                for i in 0..e.sources.len() {
                    e.schedule(i as f64 * start_spacing, Ev::Start { src: i });
                }
            }
        }
        Ok(e)
    }

    fn schedule(&mut self, t: f64, ev: Ev) {
        self.order += 1;
        self.heap.push(Scheduled {
            t,
            order: self.order,
            ev,
        });
    }

    fn in_window(&self) -> bool {
        self.now >= self.warmup
    }

    fn cross_gap(&mut self, f: usize) -> f64 {
        let c = &mut self.cross[f];
        let e: f64 = c.rng.sample(Exp1);
        e / c.pkt_rate
    }

    fn open_gap(&mut self, src: usize) -> f64 {
        match &mut self.sources[src].driver {
            Driver::Open { lambda, rng, .. } => {
                let e: f64 = rng.sample(Exp1);
                e / *lambda
            }
            Driver::Protocol { .. } => {
                unreachable!("open-loop gap requested for a protocol source")
            }
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(s) = self.heap.peek() {
            if s.t > self.duration {
                break;
            }
            let s = self.heap.pop().expect("peeked");
            self.now = s.t;
            match s.ev {
                Ev::Start { src } => self.start_source(src)?,
                Ev::Generate { src } => self.generate(src),
                Ev::Timer { src, gen } => self.timer(src, gen)?,
                Ev::Cross { flow } => {
                    let c = &self.cross[flow];
                    let pkt = Packet {
                        kind: Kind::Cross,
                        bytes: c.bytes,
                        exit: c.exit,
                        arrived: self.now,
                    };
                    let entry = c.entry;
                    self.enqueue(Dir::Forward, entry, pkt);
                    let gap = self.cross_gap(flow);
                    self.schedule(self.now + gap, Ev::Cross { flow });
                }
                Ev::Depart { dir, node } => self.depart(dir, node)?,
            }
        }
        self.now = self.duration;
        Ok(())
    }

    fn nodes(&mut self, dir: Dir) -> &mut Vec<Node> {
        match dir {
            Dir::Forward => &mut self.forward,
            Dir::Reverse => &mut self.reverse,
        }
    }

    fn enqueue(&mut self, dir: Dir, j: usize, mut pkt: Packet) {
        let now = self.now;
        let ub = self.update_bytes;
        pkt.arrived = now;
        let node = &mut self.nodes(dir)[j];
        if pkt.is_update() {
            node.arrivals += 1;
            node.updates_here += 1;
            node.update_backlog.set(now, node.updates_here as f64);
        }
        node.queue.push_back(pkt);
        node.occupancy.set(now, node.queue.len() as f64);
        if node.queue.len() == 1 {
            let s = node.service_time(pkt.bytes, ub);
            self.schedule(now + s, Ev::Depart { dir, node: j });
        }
    }

    fn depart(&mut self, dir: Dir, j: usize) -> Result<(), SimError> {
        let now = self.now;
        let ub = self.update_bytes;
        let in_window = self.in_window();
        let node = &mut self.nodes(dir)[j];
        let pkt = node
            .queue
            .pop_front()
            .expect("departure from an empty node");
        node.occupancy.set(now, node.queue.len() as f64);
        if pkt.is_update() {
            node.departures += 1;
            node.updates_here -= 1;
            node.update_backlog.set(now, node.updates_here as f64);
            if in_window {
                node.window_departures += 1;
                node.window_sojourn += now - pkt.arrived;
            }
        }
        let next_service = node
            .queue
            .front()
            .map(|p| p.bytes)
            .map(|b| node.service_time(b, ub));
        if let Some(s) = next_service {
            self.schedule(now + s, Ev::Depart { dir, node: j });
        }
        match dir {
            Dir::Forward if j < pkt.exit => self.enqueue(Dir::Forward, j + 1, pkt),
            Dir::Forward => {
                if let Kind::Update {
                    src,
                    seq,
                    gen,
                    echo_us,
                } = pkt.kind
                {
                    self.deliver(src, seq, gen, echo_us)?;
                }
            }
            Dir::Reverse if j + 1 < self.reverse.len() => self.enqueue(Dir::Reverse, j + 1, pkt),
            Dir::Reverse => {
                if let Kind::Ack {
                    src,
                    seq,
                    echo_us,
                    sent,
                } = pkt.kind
                {
                    self.ack_arrives(src, seq, echo_us, sent)?;
                }
            }
        }
        Ok(())
    }

    fn inject_update(&mut self, src: usize, seq: u32, echo_us: u64) {
        let now = self.now;
        let in_window = self.in_window();
        let s = &mut self.sources[src];
        s.sent += 1;
        if in_window {
            s.window_sent += 1;
        }
        let pkt = Packet {
            kind: Kind::Update {
                src,
                seq,
                gen: now,
                echo_us,
            },
            bytes: self.update_bytes,
            exit: self.forward.len() - 1,
            arrived: now,
        };
        self.enqueue(Dir::Forward, 0, pkt);
    }

    fn generate(&mut self, src: usize) {
        let next = match &mut self.sources[src].driver {
            Driver::Open {
                lambda,
                arrival,
                generated,
                ..
            } => {
                *generated += 1;
                match arrival {
                    Arrival::Periodic => Some(*generated as f64 / *lambda),
                    Arrival::Poisson => None,
                }
            }
            Driver::Protocol { .. } => return,
        };
        let seq = match &self.sources[src].driver {
            Driver::Open { generated, .. } => *generated as u32,
            Driver::Protocol { .. } => unreachable!(),
        };
        self.inject_update(src, seq, 0);
        let at = match next {
            Some(t) => t,
            None => self.now + self.open_gap(src),
        };
        self.schedule(at, Ev::Generate { src });
    }

    fn deliver(&mut self, src: usize, seq: u32, gen: f64, echo_us: u64) -> Result<(), SimError> {
        let now = self.now;
        let in_window = self.in_window();
        let s = &mut self.sources[src];
        let accepted = s.monitor.on_update_at(now, seq, gen);
        if let Some(log) = self.log.as_mut() {
            log.push(Delivery {
                source: src,
                seq,
                gen_ts: gen,
                t: now,
                accepted,
            });
        }
        if accepted && in_window {
            s.window_delivered += 1;
        }
        if accepted && matches!(s.driver, Driver::Protocol { .. }) {
            if self.reverse.is_empty() {
                self.ack_arrives(src, seq, echo_us, gen)?;
            } else {
                let pkt = Packet {
                    kind: Kind::Ack {
                        src,
                        seq,
                        echo_us,
                        sent: gen,
                    },
                    bytes: self.ack_bytes,
                    exit: 0,
                    arrived: now,
                };
                self.enqueue(Dir::Reverse, 0, pkt);
            }
        }
        Ok(())
    }

    fn ack_arrives(
        &mut self,
        src: usize,
        seq: u32,
        echo_us: u64,
        sent: f64,
    ) -> Result<(), SimError> {
        let now = self.now;
        let in_window = self.in_window();
        let s = &mut self.sources[src];
        if in_window {
            s.window_rtt_sum += now - sent;
            s.window_rtt_n += 1;
        }
        let Driver::Protocol { ep, failed, .. } = &mut s.driver else {
            return Ok(());
        };
        if failed.is_some() {
            return Ok(());
        }
        let out = ep.handle_ack(now, &AckPacket::new(seq, echo_us));
        self.after_source_call(src, out)
    }

    fn start_source(&mut self, src: usize) -> Result<(), SimError> {
        let now = self.now;
        let Driver::Protocol { ep, .. } = &mut self.sources[src].driver else {
            return Ok(());
        };
        let out = ep.start(now).map(Some);
        self.after_source_call(src, out)
    }

    fn timer(&mut self, src: usize, gen: u64) -> Result<(), SimError> {
        let now = self.now;
        let Driver::Protocol {
            ep,
            timer_gen,
            failed,
        } = &mut self.sources[src].driver
        else {
            return Ok(());
        };
        if gen != *timer_gen || failed.is_some() {
            return Ok(());
        }
        let out = ep.handle_timeout(now);
        self.after_source_call(src, out)
    }

    /// Transmits whatever the endpoint produced and re-arms its timer.
    fn after_source_call(
        &mut self,
        src: usize,
        out: Result<Option<UpdatePacket>, EndpointError>,
    ) -> Result<(), SimError> {
        let now = self.now;
        let packet = match out {
            Ok(p) => p,
            Err(EndpointError::InitFailed(n)) => {
                if let Driver::Protocol { failed, .. } = &mut self.sources[src].driver {
                    *failed = Some(format!("no ACK for any of the {n} probes"));
                }
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(p) = packet {
            self.inject_update(src, p.seq, p.gen_ts_us);
        }
        let Driver::Protocol { ep, timer_gen, .. } = &mut self.sources[src].driver else {
            return Ok(());
        };
        *timer_gen += 1;
        let gen = *timer_gen;
        if let Some(t) = ep.next_timeout() {
            self.schedule(t.max(now), Ev::Timer { src, gen });
        }
        Ok(())
    }

    fn node_metrics(nodes: &[Node], window: f64, end: f64) -> Vec<NodeMetrics> {
        nodes
            .iter()
            .enumerate()
            .map(|(j, n)| NodeMetrics {
                node: j,
                avg_backlog: n.update_backlog.mean(end),
                avg_occupancy: n.occupancy.mean(end),
                avg_sojourn: (n.window_departures > 0)
                    .then(|| n.window_sojourn / n.window_departures as f64),
                update_throughput: n.window_departures as f64 / window,
                arrivals: n.arrivals,
                departures: n.departures,
            })
            .collect()
    }

    fn metrics(&self, cfg: &SimConfig) -> AoiMetrics {
        let end = self.duration;
        let window = end - self.warmup;
        let bits = 8.0 * self.update_bytes as f64;
        let sources: Vec<SourceMetrics> = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let age = s.monitor.age_integral();
                let throughput = s.window_delivered as f64 / window;
                let mut m = SourceMetrics {
                    source: i,
                    avg_age: age.mean(end),
                    age_ci_halfwidth: ci_halfwidth(&age.batch_means(end)),
                    sent: s.sent,
                    delivered: s.window_delivered,
                    discarded: s.monitor.counters().discarded,
                    throughput,
                    throughput_bps: throughput * bits,
                    avg_rate: s.window_sent as f64 / window,
                    avg_rtt: (s.window_rtt_n > 0).then(|| s.window_rtt_sum / s.window_rtt_n as f64),
                    lambda_1: None,
                    est_avg_age: None,
                    est_avg_backlog: None,
                    epochs: 0,
                    failed: None,
                };
                if let Driver::Protocol { ep, failed, .. } = &s.driver {
                    m.lambda_1 = ep.initial_rate();
                    let est = ep.estimated_averages(self.warmup);
                    m.est_avg_age = est.map(|e| e.0);
                    m.est_avg_backlog = est.map(|e| e.1);
                    m.epochs = ep.records().len();
                    m.failed = failed.clone();
                }
                m
            })
            .collect();
        let nodes = Self::node_metrics(&self.forward, window, end);
        let reverse_nodes = Self::node_metrics(&self.reverse, window, end);
        let ages: Vec<f64> = sources.iter().filter_map(|s| s.avg_age).collect();
        let rtts: Vec<f64> = sources.iter().filter_map(|s| s.avg_rtt).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let unstable = match &cfg.run {
            RunSpec::FixedRate { lambda, .. } => cfg.network.is_unstable(*lambda),
            RunSpec::ClosedLoop { .. } => cfg.network.cross_load().iter().any(|&l| l >= 1.0),
        };
        AoiMetrics {
            name: cfg.name.clone(),
            seed: cfg.seed,
            duration: cfg.duration,
            warmup: self.warmup,
            unstable,
            avg_age: mean(&ages),
            avg_rtt: mean(&rtts),
            throughput: sources.iter().map(|s| s.throughput).sum(),
            throughput_bps: sources.iter().map(|s| s.throughput_bps).sum(),
            delivered: sources.iter().map(|s| s.delivered).sum(),
            total_backlog: nodes.iter().map(|n| n.avg_backlog).sum(),
            fairness: if ages.len() >= 2 && ages.len() == sources.len() {
                jain_index(&ages).ok()
            } else {
                None
            },
            sources,
            nodes,
            reverse_nodes,
        }
    }
}

impl Source {
    fn new(driver: Driver, monitor: Monitor) -> Self {
        Source {
            driver,
            monitor,
            sent: 0,
            window_sent: 0,
            window_delivered: 0,
            window_rtt_sum: 0.0,
            window_rtt_n: 0,
        }
    }
}

/// Result of a simulation, with the monitor-side delivery log if requested.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub metrics: AoiMetrics,
    pub deliveries: Vec<Delivery>,
}

/// Runs the simulation described by `cfg`.
pub fn simulate(cfg: &SimConfig) -> Result<AoiMetrics, SimError> {
    let mut e = Engine::new(cfg, false)?;
    e.run()?;
    Ok(e.metrics(cfg))
}

/// Like [`simulate`], also returning every arrival at the monitor.
pub fn simulate_logged(cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    let mut e = Engine::new(cfg, true)?;
    e.run()?;
    Ok(SimOutcome {
        metrics: e.metrics(cfg),
        deliveries: e.log.take().unwrap_or_default(),
    })
}

fn config(net: &NetworkSpec, run: RunSpec, duration: f64, seed: u64) -> SimConfig {
    SimConfig {
        name: String::new(),
        seed,
        duration,
        warmup_fraction: 0.1,
        batches: 20,
        network: net.clone(),
        run,
    }
}

/// Open-loop updates at rate `lambda` through `net`.
pub fn run_fixed_rate(
    net: &NetworkSpec,
    lambda: f64,
    arrival: Arrival,
    duration: f64,
    seed: u64,
) -> Result<AoiMetrics, SimError> {
    simulate(&config(
        net,
        RunSpec::FixedRate { lambda, arrival },
        duration,
        seed,
    ))
}

/// `n_sources` protocol sources sharing `net`.
pub fn run_closed_loop(
    net: &NetworkSpec,
    source: &SourceConfig,
    n_sources: usize,
    duration: f64,
    seed: u64,
) -> Result<AoiMetrics, SimError> {
    simulate(&config(
        net,
        RunSpec::ClosedLoop {
            sources: n_sources,
            source: source.clone(),
            start_spacing: 0.0,
        },
        duration,
        seed,
    ))
}
