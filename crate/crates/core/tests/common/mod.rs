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

//! Support for the integration and acceptance tests. The oracle modules
//! recompute quantities from first principles rather than reusing library
//! code paths; `conformance` runs the library against them.

#![allow(dead_code)]

pub mod conformance;
pub mod controller_oracle;
pub mod estimator_oracle;
