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

//! Rate grids given as `start:stop:step` or as a comma-separated list.

/// Parses a grid. Ranges include `stop` when it lies on the grid (up to
/// rounding). An empty result is an error.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, s] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got `{text}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        let (start, stop, step) = (num(a)?, num(b)?, num(s)?);
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
            return Err(format!(
                "grid `{text}` needs finite bounds and a positive step"
            ));
        }
        let n = ((stop - start) / step + 1e-9).floor();
        if n < 0.0 {
            Vec::new()
        } else {
            (0..=n as usize)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
    } else {
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?
    };
    if grid.is_empty() {
        return Err(format!("grid `{text}` is empty"));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(format!("grid rates must be positive, got {bad}"));
    }
    Ok(grid)
}
