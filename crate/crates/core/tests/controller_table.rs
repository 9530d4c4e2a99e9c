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

//! The controller against its decision table written out independently.

mod common;

use acp_core::controller::{epoch_length, update_lambda, ActionKind, Controller};
use common::conformance;

#[test]
fn exhaustive_decision_table() {
    assert_eq!(conformance::decision_table().unwrap(), 9 * 2 * 9 * 4);
}

#[test]
fn consecutive_growth_escalates_mdec() {
    assert_eq!(conformance::mdec_escalation().unwrap(), 16);
    let mut c = Controller::with_state(10.0, 10, true, 16).unwrap();
    // a shrinking epoch reuses γ, then growth of one kind resets it
    let reuse = c.decide(-0.5, -0.1, 8.0);
    assert_eq!((reuse.kind, reuse.gamma_used), (ActionKind::Mdec, 16));
    assert_eq!(c.decide(0.5, -0.1, 8.0).kind, ActionKind::Inc);
    assert_eq!((c.flag(), c.gamma()), (false, 0));
}
#[test]
fn worked_examples() {
    let mut c = Controller::new(10.0, 10).unwrap();
    let a = c.decide(0.5, 0.1, 4.0);
    assert_eq!((a.kind, a.b_star), (ActionKind::Dec, -1.0));
    assert!(c.flag());
    let a = c.decide(0.5, 0.1, 4.0);
    assert_eq!(
        (a.kind, a.gamma_used, a.b_star),
        (ActionKind::Mdec, 1, -2.0)
    );
    let a = c.decide(-0.3, 0.2, 4.0);
    assert_eq!((a.kind, a.b_star), (ActionKind::Inc, 1.0));
    assert_eq!((c.flag(), c.gamma()), (false, 0));

    assert!((update_lambda(1.0, 0.1, 0.2, 13.0).unwrap() - 15.0).abs() < 1e-12);
    assert_eq!(update_lambda(1.0, 0.1, 0.2, 10.0).unwrap(), 12.5);
    assert!((update_lambda(0.0, 0.1, 0.2, 10.0).unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(epoch_length(10, 10.0), 1.0);
    assert_eq!(epoch_length(10, 5.0), 2.0);
    assert_eq!(epoch_length(10, 13.0), 10.0 / 13.0);
    assert!(update_lambda(1.0, 0.0, 0.2, 10.0).is_err());
    assert!(update_lambda(1.0, 0.1, -0.2, 10.0).is_err());
}

#[test]
fn randomized_rate_updates_respect_clamps() {
    let hit = conformance::clamped_rate_updates(10_000, 5).unwrap();
    assert!(hit.iter().all(|&h| h > 100), "{hit:?}");
}
