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

//! Library-versus-oracle checks shared by the per-module suites and the
//! acceptance run. Each returns a short description of what was covered, or
//! the first mismatch.

use acp_core::controller::{update_lambda, ActionKind, Controller};
use acp_core::estimator::Estimator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::controller_oracle::{b_star, rate, table, Kind};
use super::estimator_oracle::{check_trace, random_trace};

fn kind(k: ActionKind) -> Kind {
    match k {
        ActionKind::Inc => Kind::Inc,
        ActionKind::Dec => Kind::Dec,
        ActionKind::Mdec => Kind::Mdec,
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

/// Every combination of sign(b) × sign(δ) × flag × γ ∈ {0..8}, at several
/// backlogs. Returns the number of rows checked.
pub fn decision_table() -> Result<usize, String> {
    let signs = [(1.0, true), (0.0, false), (-1.0, false)];
    let mut rows = 0;
    for (b, b_up) in signs {
        for (d, d_up) in signs {
            for flag in [false, true] {
                for gamma in 0..=8 {
                    for backlog in [0.0, 1.0, 4.0, 7.5] {
                        let mut c = Controller::with_state(10.0, 10, flag, gamma)
                            .map_err(|e| e.to_string())?;
                        let got = c.decide(0.37 * b, 0.011 * d, backlog);
                        let want = table(b_up, d_up, flag, gamma);
                        let ctx = format!("b={b} d={d} flag={flag} gamma={gamma} B={backlog}");
                        ensure!(kind(got.kind) == want.kind, "{ctx}: action {:?}", got.kind);
                        ensure!(
                            got.b_star.to_bits() == b_star(&want, backlog).to_bits(),
                            "{ctx}: b* {} vs {}",
                            got.b_star,
                            b_star(&want, backlog)
                        );
                        ensure!(
                            want.kind != Kind::Mdec || got.gamma_used == want.gamma_used,
                            "{ctx}: γ used {}",
                            got.gamma_used
                        );
                        ensure!(
                            c.flag() == want.flag_after,
                            "{ctx}: flag after {}",
                            c.flag()
                        );
                        ensure!(
                            c.gamma() == want.gamma_after,
                            "{ctx}: γ after {}",
                            c.gamma()
                        );
                        rows += 1;
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Repeated growth escalates γ by one per epoch up to its cap, with |b*|
/// growing but never exceeding the backlog.
pub fn mdec_escalation() -> Result<u32, String> {
    let mut c = Controller::new(10.0, 10).map_err(|e| e.to_string())?;
    ensure!(
        c.decide(0.5, 0.1, 8.0).kind == ActionKind::Dec,
        "first growth is not DEC"
    );
    let mut last = 0.0;
    let mut top = 0;
    for g in 1..=20u32 {
        let a = c.decide(0.5, 0.1, 8.0);
        ensure!(a.kind == ActionKind::Mdec, "growth {g}: {:?}", a.kind);
        ensure!(a.gamma_used == g.min(16), "growth {g}: γ {}", a.gamma_used);
        ensure!(
            a.b_star.abs() >= last && a.b_star.abs() < 8.0,
            "growth {g}: b* {}",
            a.b_star
        );
        last = a.b_star.abs();
        top = a.gamma_used;
    }
    Ok(top)
}

/// `n` randomized rate updates against the independent clamp; returns how
/// often the lower clamp, no clamp and the upper clamp applied.
pub fn clamped_rate_updates(n: usize, seed: u64) -> Result<[usize; 3], String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = [0usize; 3];
    for i in 0..n {
        let b: f64 = rng.random_range(-6.0..2.0);
        let z: f64 = rng.random_range(1e-3..2.0);
        let rtt: f64 = z * rng.random_range(1.0..20.0);
        // previous rates around the ACK rate, where all three branches occur
        let prev: f64 = rng.random_range(0.5..1.8) / z;
        let got = update_lambda(b, z, rtt, prev).map_err(|e| format!("call {i}: {e}"))?;
        let want = rate(b, z, rtt, prev);
        ensure!(got.to_bits() == want.to_bits(), "call {i}: {got} vs {want}");
        let ratio = got / prev;
        ensure!(
            (0.75 - 1e-12..=1.25 + 1e-12).contains(&ratio) && got > 0.0,
            "call {i}: ratio {ratio}"
        );
        hit[if got == 0.75 * prev {
            0
        } else if got == 1.25 * prev {
            2
        } else {
            1
        }] += 1;
    }
    Ok(hit)
}

/// `n` random traces of 40 sends with ACK loss and reordering; returns the
/// number of epochs compared.
pub fn estimator_traces(n: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut closes = 0;
    for i in 0..n {
        let events = random_trace(&mut rng, 40);
        closes += check_trace(&events, 0.25).map_err(|e| format!("trace {i}: {e}"))?;
    }
    Ok(closes)
}

/// Updates 1, 2, 3 are sent; the ACK of 3 overtakes the ACK of 2. The late
/// ACK is stale and leaves the age process, the RTT average and the
/// backlog alone.
pub fn out_of_sequence_ack() -> Result<(), String> {
    let err = |e: acp_core::estimator::EstimatorError| e.to_string();
    let mut e = Estimator::new(0.25, 0.0).map_err(err)?;
    e.on_send(0.0, 1, 0.0).map_err(err)?;
    e.on_send(0.1, 2, 0.1).map_err(err)?;
    e.on_send(0.2, 3, 0.2).map_err(err)?;
    ensure!(e.on_ack(0.5, 3).map_err(err)?.is_fresh(), "ACK 3 not fresh");
    ensure!(
        e.highest_acked() == 3 && e.backlog() == 0,
        "ACK 3 not cumulative"
    );
    let age = e.age_at(0.6).map_err(err)?;
    let rtt = e.rtt_ewma();
    let out = e.on_ack(0.6, 2).map_err(err)?;
    ensure!(
        !out.is_fresh() && out.rtt_sample.is_none(),
        "late ACK 2 treated as fresh"
    );
    ensure!(e.age_at(0.6) == Ok(age), "late ACK 2 reset the age");
    ensure!(e.rtt_ewma() == rtt, "late ACK 2 moved the RTT average");
    ensure!(e.highest_acked() == 3, "late ACK 2 rewound the ACK index");
    ensure!((age - 0.4).abs() < 1e-12, "age {age}, expected 0.4");
    Ok(())
}
