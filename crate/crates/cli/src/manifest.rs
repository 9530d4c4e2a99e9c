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

//! Run manifests: a JSON sidecar describing how an output file was made.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    /// SHA-256 of the configuration file, when the command read one.
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub start_wall: f64,
    pub end_wall: Option<f64>,
    pub outputs: Vec<PathBuf>,
}

pub fn wall_clock() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<output>.manifest.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn begin(config_digest: Option<String>, seed: Option<u64>, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            command: std::env::args().collect(),
            config_digest,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            start_wall: wall_clock(),
            end_wall: None,
            outputs,
        }
    }

    /// Writes the sidecar next to the first output.
    pub fn write(&self) -> anyhow::Result<PathBuf> {
        let first = self.outputs.first().context("manifest without outputs")?;
        let path = sidecar_path(first);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.end_wall = Some(wall_clock());
        self.write()
    }
}
