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

//! Closed-form average age for a single M/M/1 queue and for two M/M/1
//! queues in tandem, plus a golden-section search for the age-minimizing
//! arrival rate.
//!
//! The tandem age is `Δ = λ (E[X²]/2 + E[XT])` with `X` the Poisson
//! inter-arrival time and `T = W⁽¹⁾ + S⁽¹⁾ + W⁽²⁾ + S⁽²⁾` the end-to-end
//! system time. Each expectation is exposed on its own so the assembly can
//! be checked term by term.

use serde::Serialize;
use thiserror::Error;

/// Parameters closer than this to the stability boundary are rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("arrival rate {lambda} must be positive and below every service rate (min {mu_min})")]
    Unstable { lambda: f64, mu_min: f64 },
    #[error("service rate {0} must be positive")]
    BadServiceRate(f64),
    #[error("search interval [{lo}, {hi}] is empty or outside the stability region")]
    BadBounds { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TandemParams {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl TandemParams {
    pub fn new(lambda: f64, mu1: f64, mu2: f64) -> Result<Self, DomainError> {
        let p = TandemParams { lambda, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        check_stable(self.lambda, &[self.mu1, self.mu2])
    }
}

/// Which finalization of the tandem expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TandemFormula {
    /// Assembled from the per-term expectations; symmetric in `(μ₁, μ₂)`
    /// and in agreement with simulation.
    #[default]
    Assembled,
    /// An alternative closed form that is not symmetric in `(μ₁, μ₂)`.
    /// Kept only for comparison; it overestimates the simulated age.
    Asymmetric,
}

fn check_stable(lambda: f64, mus: &[f64]) -> Result<(), DomainError> {
    let mut mu_min = f64::INFINITY;
    for &mu in mus {
        if !(mu > 0.0) || mu.is_nan() {
            return Err(DomainError::BadServiceRate(mu));
        }
        mu_min = mu_min.min(mu);
    }
    if !(lambda > 0.0) || !lambda.is_finite() || mu_min - lambda < STABILITY_MARGIN {
        return Err(DomainError::Unstable { lambda, mu_min });
    }
    Ok(())
}

/// `1/λ + 1/μ + λ²/(μ²(μ−λ))`.
pub fn aoi_mm1(lambda: f64, mu: f64) -> Result<f64, DomainError> {
    check_stable(lambda, &[mu])?;
    Ok(1.0 / lambda + 1.0 / mu + lambda * lambda / (mu * mu * (mu - lambda)))
}

/// Mean system time of an M/M/1 queue, `1/(μ−λ)`.
pub fn system_time_mm1(lambda: f64, mu: f64) -> Result<f64, DomainError> {
    check_stable(lambda, &[mu])?;
    Ok(1.0 / (mu - lambda))
}

/// Mean end-to-end system time of the tandem, `1/(μ₁−λ) + 1/(μ₂−λ)`.
pub fn system_time_tandem(p: &TandemParams) -> Result<f64, DomainError> {
    p.validate()?;
    Ok(1.0 / (p.mu1 - p.lambda) + 1.0 / (p.mu2 - p.lambda))
}

/// Individual expectations entering `E[XT]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TandemExpectations {
    /// `E[X²]/2 = 1/λ²`.
    pub half_x_sq: f64,
    /// `E[S⁽¹⁾X] = 1/(λμ₁)`.
    pub service1_x: f64,
    /// `E[S⁽²⁾X] = 1/(λμ₂)`.
    pub service2_x: f64,
    /// `E[W⁽¹⁾X] = λ/(μ₁²(μ₁−λ))`.
    pub wait1_x: f64,
    /// `E[W⁽²⁾X] = λ/(μ₂²(μ₂−λ)) + λ²/(μ₁μ₂(μ₁+μ₂−λ))`.
    pub wait2_x: f64,
}

impl TandemExpectations {
    pub fn xt(&self) -> f64 {
        self.service1_x + self.service2_x + self.wait1_x + self.wait2_x
    }
}

pub fn tandem_expectations(p: &TandemParams) -> Result<TandemExpectations, DomainError> {
    p.validate()?;
    let TandemParams {
        lambda: l,
        mu1: m1,
        mu2: m2,
    } = *p;
    Ok(TandemExpectations {
        half_x_sq: 1.0 / (l * l),
        service1_x: 1.0 / (l * m1),
        service2_x: 1.0 / (l * m2),
        wait1_x: l / (m1 * m1 * (m1 - l)),
        wait2_x: l / (m2 * m2 * (m2 - l)) + l * l / (m1 * m2 * (m1 + m2 - l)),
    })
}

pub fn aoi_tandem(p: &TandemParams) -> Result<f64, DomainError> {
    aoi_tandem_with(p, TandemFormula::Assembled)
}

pub fn aoi_tandem_with(p: &TandemParams, formula: TandemFormula) -> Result<f64, DomainError> {
    p.validate()?;
    let TandemParams {
        lambda: l,
        mu1: m1,
        mu2: m2,
    } = *p;
    let base = 1.0 / l + 1.0 / m1 + 1.0 / m2 + l * l / (m1 * m1 * (m1 - l));
    Ok(match formula {
        TandemFormula::Assembled => {
            base + l * l / (m2 * m2 * (m2 - l)) + l * l * l / (m1 * m2 * (m1 + m2 - l))
        }
        TandemFormula::Asymmetric => {
            base + l / (m2 * m2 * (m2 - l)) + l * l / (m1 * m2 * (m1 + m2 - l))
        }
    })
}

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum {
    pub lambda: f64,
    pub age: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimizer of a unimodal `age_fn` on the
/// open interval `(lo, hi)`, to a relative tolerance of 1e-6 in λ.
pub fn optimal_lambda<F>(age_fn: F, lo: f64, hi: f64) -> Result<Optimum, DomainError>
where
    F: Fn(f64) -> Result<f64, DomainError>,
{
    if !(lo < hi) || !(lo >= 0.0) || !hi.is_finite() {
        return Err(DomainError::BadBounds { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = age_fn(c)?;
    let mut fd = age_fn(d)?;
    let tol = 1e-6;
    while (b - a) > tol * 0.5 * (c.abs() + d.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = age_fn(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = age_fn(d)?;
        }
    }
    let lambda = 0.5 * (a + b);
    Ok(Optimum {
        lambda,
        age: age_fn(lambda)?,
    })
}

/// Bounds strictly inside the stability region of the given service rates.
fn stable_bounds(mus: &[f64]) -> Result<(f64, f64), DomainError> {
    let mu_min = mus.iter().copied().fold(f64::INFINITY, f64::min);
    if !(mu_min > 0.0) {
        return Err(DomainError::BadServiceRate(mu_min));
    }
    Ok((mu_min * 1e-6, mu_min * (1.0 - 1e-7)))
}

pub fn optimal_lambda_mm1(mu: f64) -> Result<Optimum, DomainError> {
    let (lo, hi) = stable_bounds(&[mu])?;
    optimal_lambda(|l| aoi_mm1(l, mu), lo, hi)
}

pub fn optimal_lambda_tandem(mu1: f64, mu2: f64) -> Result<Optimum, DomainError> {
    let (lo, hi) = stable_bounds(&[mu1, mu2])?;
    optimal_lambda(
        |l| {
            aoi_tandem(&TandemParams {
                lambda: l,
                mu1,
                mu2,
            })
        },
        lo,
        hi,
    )
}

/// `λ · E[T]` at the optimum: updates sent per mean system time.
pub fn packets_per_system_time_mm1(mu: f64) -> Result<f64, DomainError> {
    let opt = optimal_lambda_mm1(mu)?;
    Ok(opt.lambda * system_time_mm1(opt.lambda, mu)?)
}

pub fn packets_per_system_time_tandem(mu1: f64, mu2: f64) -> Result<f64, DomainError> {
    let opt = optimal_lambda_tandem(mu1, mu2)?;
    Ok(opt.lambda * system_time_tandem(&TandemParams::new(opt.lambda, mu1, mu2)?)?)
}

/// One point of an age curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub avg_age: f64,
    pub ci_halfwidth: f64,
}

/// Evaluates `age_fn` on every grid point; unstable points are skipped.
pub fn age_curve<F>(grid: &[f64], age_fn: F) -> Vec<CurvePoint>
where
    F: Fn(f64) -> Result<f64, DomainError>,
{
    grid.iter()
        .filter_map(|&lambda| {
            age_fn(lambda).ok().map(|avg_age| CurvePoint {
                lambda,
                avg_age,
                ci_halfwidth: 0.0,
            })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str = "lambda,avg_age,ci_halfwidth";

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.lambda, p.avg_age, p.ci_halfwidth));
    }
    out
}
