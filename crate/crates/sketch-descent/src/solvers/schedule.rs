//! Step-size schedules for the accelerated iteration.
//!
//! Convex mode: γ₀ = 1/ν and γ_{k+1} is the largest root of
//! γ² − γ/ν = γ_k², giving γ_k ≥ (k+2)/(2ν); α_k = 1/(γ_k ν) ∈ (0, 1],
//! β_k = 1. Strongly convex mode: constant γ = 1/√(σν),
//! α = γσ/(1+γσ), β = 1 − γσ, which yields the (1 − √(σ/ν)) contraction.

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Convex { nu: f64 },
    StronglyConvex { nu: f64, sigma: f64 },
}

/// Parameters in effect at one iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    kind: ScheduleKind,
    gamma: f64,
    k: u64,
    clamped: bool,
}

fn next_gamma(nu: f64, gamma: f64) -> f64 {
    let inv = 1.0 / nu;
    0.5 * (inv + (inv * inv + 4.0 * gamma * gamma).sqrt())
}

impl Schedule {
    pub fn new(kind: ScheduleKind) -> Result<Self, SolverError> {
        let gamma = match kind {
            ScheduleKind::Convex { nu } => {
                if !(nu > 0.0) || !nu.is_finite() {
                    return Err(SolverError::InvalidConfig(format!(
                        "nu must be positive and finite, got {nu}"
                    )));
                }
                1.0 / nu
            }
            ScheduleKind::StronglyConvex { nu, sigma } => {
                if !(nu > 0.0) || !nu.is_finite() {
                    return Err(SolverError::InvalidConfig(format!(
                        "nu must be positive and finite, got {nu}"
                    )));
                }
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(SolverError::InvalidConfig(format!(
                        "sigma must be positive and finite, got {sigma}"
                    )));
                }
                if sigma > nu {
                    return Err(SolverError::InvalidConfig(format!(
                        "sigma ({sigma}) may not exceed nu ({nu}); the momentum weight would turn negative"
                    )));
                }
                1.0 / (sigma * nu).sqrt()
            }
        };
        Ok(Self {
            kind,
            gamma,
            k: 0,
            clamped: false,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// (α_k, β_k, γ_k).
    pub fn current(&mut self) -> StepParams {
        match self.kind {
            ScheduleKind::Convex { nu } => {
                let raw = 1.0 / (self.gamma * nu);
                // γν ≥ 1 holds analytically; the clamp only matters if a
                // caller feeds inconsistent state.
                if raw > 1.0 {
                    self.clamped = true;
                }
                StepParams {
                    alpha: raw.min(1.0),
                    beta: 1.0,
                    gamma: self.gamma,
                }
            }
            ScheduleKind::StronglyConvex { sigma, .. } => {
                let gs = self.gamma * sigma;
                StepParams {
                    alpha: gs / (1.0 + gs),
                    beta: 1.0 - gs,
                    gamma: self.gamma,
                }
            }
        }
    }

    /// α_{k+1}, needed by the two-sequence reformulations before advancing.
    pub fn next_alpha(&mut self) -> f64 {
        match self.kind {
            ScheduleKind::Convex { nu } => {
                let g = next_gamma(nu, self.gamma);
                let raw = 1.0 / (g * nu);
                if raw > 1.0 {
                    self.clamped = true;
                }
                raw.min(1.0)
            }
            ScheduleKind::StronglyConvex { sigma, .. } => {
                let gs = self.gamma * sigma;
                gs / (1.0 + gs)
            }
        }
    }

    pub fn advance(&mut self) {
        if let ScheduleKind::Convex { nu } = self.kind {
            self.gamma = next_gamma(nu, self.gamma);
        }
        self.k += 1;
    }

    /// True if α ever had to be clamped to 1.
    pub fn was_clamped(&self) -> bool {
        self.clamped
    }
}

/// The sequence γ_0 … γ_{k_max} of the convex schedule.
pub fn gamma_schedule(nu: f64, k_max: usize) -> Result<Vec<f64>, SolverError> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(SolverError::InvalidConfig(format!(
            "nu must be positive and finite, got {nu}"
        )));
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut gamma = 1.0 / nu;
    out.push(gamma);
    for _ in 0..k_max {
        gamma = next_gamma(nu, gamma);
        out.push(gamma);
    }
    Ok(out)
}
