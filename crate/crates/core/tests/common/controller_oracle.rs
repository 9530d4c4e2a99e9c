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

//! Decision table of the ACP+ controller written out row by row, and an
//! independent evaluation of the rate update.

/// `(kind, γ used by MDEC, flag after, γ after)` for one table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Inc,
    Dec,
    Mdec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub kind: Kind,
    pub gamma_used: u32,
    pub flag_after: bool,
    pub gamma_after: u32,
}

/// `b_up`/`d_up` are "strictly positive"; zero counts as a decrease.
pub fn table(b_up: bool, d_up: bool, flag: bool, gamma: u32) -> Row {
    let g1 = (gamma + 1).min(16);
    match (b_up, d_up, flag) {
        // age and backlog both grew
        (true, true, false) => Row {
            kind: Kind::Dec,
            gamma_used: 0,
            flag_after: true,
            gamma_after: gamma,
        },
        (true, true, true) => Row {
            kind: Kind::Mdec,
            gamma_used: g1,
            flag_after: true,
            gamma_after: g1,
        },
        // exactly one grew
        (true, false, _) | (false, true, _) => Row {
            kind: Kind::Inc,
            gamma_used: 0,
            flag_after: false,
            gamma_after: 0,
        },
        // both shrank
        (false, false, true) if gamma > 0 => Row {
            kind: Kind::Mdec,
            gamma_used: gamma,
            flag_after: true,
            gamma_after: gamma,
        },
        (false, false, _) => Row {
            kind: Kind::Dec,
            gamma_used: 0,
            flag_after: false,
            gamma_after: 0,
        },
    }
}

pub fn b_star(row: &Row, backlog: f64) -> f64 {
    match row.kind {
        Kind::Inc => 1.0,
        Kind::Dec => -1.0,
        Kind::Mdec => -(1.0 - 1.0 / (1u64 << row.gamma_used) as f64) * backlog,
    }
}

pub fn rate(b_star: f64, z: f64, rtt: f64, prev: f64) -> f64 {
    let raw = 1.0 / z + b_star / rtt;
    let (lo, hi) = (0.75 * prev, 1.25 * prev);
    if raw < lo {
        lo
    } else if raw > hi {
        hi
    } else {
        raw
    }
}
