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

//! ACP+: an age-of-information transport for status updates.
//!
//! * [`wire`]: update/ACK frame codec.
//! * [`estimator`]: source-side age and backlog reconstruction.
//! * [`controller`]: per-epoch INC/DEC/MDEC rate control.
//! * [`endpoints`]: source and monitor state machines plus UDP and
//!   simulated transports.
//! * [`simkit`]: deterministic discrete-event simulation of FCFS queueing
//!   networks carrying updates.
//! * [`analytics`]: closed-form M/M/1 and tandem age, optimal rates.

pub mod analytics;
pub mod controller;
pub mod endpoints;
pub mod estimator;
pub mod parallel;
pub mod simkit;
pub mod timeavg;
pub mod wire;
