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

//! Exact time averages of sample paths observed from a measurement window
//! start onward.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Integral of a piecewise-constant process.
#[derive(Debug, Clone)]
pub struct StepIntegral {
    window_start: f64,
    cursor: f64,
    value: f64,
    area: f64,
}

impl StepIntegral {
    pub fn new(window_start: f64) -> Self {
        StepIntegral {
            window_start,
            cursor: 0.0,
            value: 0.0,
            area: 0.0,
        }
    }

    fn advance(&mut self, t: f64) {
        let from = self.cursor.max(self.window_start);
        if t > from {
            self.area += self.value * (t - from);
        }
        if t > self.cursor {
            self.cursor = t;
        }
    }

    pub fn set(&mut self, t: f64, value: f64) {
        self.advance(t);
        self.value = value;
    }

    pub fn add(&mut self, t: f64, delta: f64) {
        self.advance(t);
        self.value += delta;
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Time average over `[window_start, end]`.
    pub fn mean(&self, end: f64) -> f64 {
        let len = end - self.window_start;
        if len <= 0.0 {
            return 0.0;
        }
        let from = self.cursor.max(self.window_start);
        let tail = if end > from {
            self.value * (end - from)
        } else {
            0.0
        };
        (self.area + tail) / len
    }
}

/// Integral of an age process `t − z(t)` with `z` a non-decreasing step
/// function, optionally split into equal-length batches for batch-means
/// confidence intervals.
#[derive(Debug, Clone)]
pub struct AgeIntegral {
    window_start: f64,
    cursor: f64,
    /// Latest generation time seen; `None` until the first reset.
    z: Option<f64>,
    area: f64,
    covered: f64,
    batches: Option<Batches>,
}

#[derive(Debug, Clone)]
struct Batches {
    end: f64,
    width: f64,
    area: Vec<f64>,
    covered: Vec<f64>,
}

fn age_area(z: f64, t0: f64, t1: f64) -> f64 {
    (t1 - t0) * ((t0 - z) + (t1 - z)) * 0.5
}

impl AgeIntegral {
    pub fn new(window_start: f64) -> Self {
        AgeIntegral {
            window_start,
            cursor: 0.0,
            z: None,
            area: 0.0,
            covered: 0.0,
            batches: None,
        }
    }

    /// Like [`AgeIntegral::new`] but also tracks `n` equal batches over
    /// `[window_start, end]`.
    pub fn with_batches(window_start: f64, end: f64, n: usize) -> Self {
        let mut a = AgeIntegral::new(window_start);
        if n > 0 && end > window_start {
            a.batches = Some(Batches {
                end,
                width: (end - window_start) / n as f64,
                area: vec![0.0; n],
                covered: vec![0.0; n],
            });
        }
        a
    }

    fn advance(&mut self, t: f64) {
        let from = self.cursor.max(self.window_start);
        if let Some(z) = self.z {
            if t > from {
                self.area += age_area(z, from, t);
                self.covered += t - from;
                if let Some(b) = self.batches.as_mut() {
                    let n = b.area.len();
                    let mut lo = from;
                    let hi = t.min(b.end);
                    while lo < hi {
                        let idx = (((lo - self.window_start) / b.width) as usize).min(n - 1);
                        let edge = if idx + 1 == n {
                            b.end
                        } else {
                            self.window_start + (idx + 1) as f64 * b.width
                        };
                        let seg_end = hi.min(edge);
                        if seg_end <= lo {
                            break;
                        }
                        b.area[idx] += age_area(z, lo, seg_end);
                        b.covered[idx] += seg_end - lo;
                        lo = seg_end;
                    }
                }
            }
        }
        if t > self.cursor {
            self.cursor = t;
        }
    }

    /// Records a fresh update generated at `gen_ts` arriving at `t`.
    pub fn reset(&mut self, t: f64, gen_ts: f64) {
        self.advance(t);
        self.z = Some(match self.z {
            Some(z) => z.max(gen_ts),
            None => gen_ts,
        });
    }

    pub fn current_gen_ts(&self) -> Option<f64> {
        self.z
    }

    /// Average age over the covered part of `[window_start, end]`.
    pub fn mean(&self, end: f64) -> Option<f64> {
        let mut tmp = self.clone();
        tmp.advance(end);
        (tmp.covered > 0.0).then(|| tmp.area / tmp.covered)
    }

    /// Per-batch averages up to `end`; batches with no coverage are skipped.
    pub fn batch_means(&self, end: f64) -> Vec<f64> {
        let mut tmp = self.clone();
        tmp.advance(end);
        match tmp.batches {
            Some(b) => b
                .area
                .iter()
                .zip(&b.covered)
                .filter(|(_, &c)| c > 0.0)
                .map(|(a, c)| a / c)
                .collect(),
            None => Vec::new(),
        }
    }
}

/// 95% Student-t half-width of the mean of `samples`.
pub fn ci_halfwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map(|d| d.inverse_cdf(0.975))
        .unwrap_or(1.96);
    t * (var / n as f64).sqrt()
}
