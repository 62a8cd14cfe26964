//! Serializable diagnostics and summary blocks written next to traces.

use serde::Serialize;
use sketch_descent::operators::{
    AssumptionZReport, ConvergenceConstants, EstimationMode, ExpectedOperator, ZSource,
};
use sketch_descent::problems::ConstrainedProblem;
use sketch_descent::sketch::SketchDistribution;
use sketch_descent::trace::{RunTrace, StopReason};
use std::path::Path;

/// The diagnostics block exported as diagnostics.json.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub assumption2: AssumptionZReport,
    pub z_source: ZSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConvergenceConstants>,
    /// √(σ_Z / ν_max): the accelerated contraction factor per step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_sqrt_sigma_over_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_condition: Option<SpanBlock>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpanBlock {
    pub holds: bool,
    pub kernel_dim: usize,
    pub spanned_dim: usize,
}

impl DiagnosticsReport {
    /// Assembles the full diagnostics for a (problem, distribution) pair.
    /// Enumerable families are evaluated exactly; continuous ones by
    /// Monte-Carlo with the given sample count.
    pub fn compute(
        problem: &ConstrainedProblem,
        dist: &SketchDistribution,
        mc_samples: usize,
        span_check: bool,
    ) -> Result<(Self, ExpectedOperator), String> {
        let mode = if dist.is_enumerable() {
            EstimationMode::Exact
        } else {
            EstimationMode::MonteCarlo {
                samples: mc_samples,
                seed: dist.seed(),
            }
        };
        let zop = ExpectedOperator::build(dist, &problem.a, &problem.smoothness, mode)
            .map_err(|e| e.to_string())?;
        let assumption2 = zop.assumption_check();
        let constants = if assumption2.holds && !assumption2.degenerate_kernel {
            match ConvergenceConstants::compute(
                dist,
                &problem.a,
                &problem.smoothness,
                problem.strong_convexity.as_ref(),
                &zop,
                mode,
            ) {
                Ok(c) => Some(c),
                Err(sketch_descent::operators::OperatorError::VariableSmoothness) => None,
                Err(e) => return Err(e.to_string()),
            }
        } else {
            None
        };
        let rate = constants.as_ref().and_then(|c| {
            c.sigma_z
                .map(|s| (s.max(0.0) / c.nu_max).sqrt())
                .filter(|r| r.is_finite())
        });
        let span_condition = if span_check {
            let report = sketch_descent::sketch::check_span_condition(
                dist,
                &problem.a,
                mc_samples,
            )
            .map_err(|e| e.to_string())?;
            Some(SpanBlock {
                holds: report.holds,
                kernel_dim: report.kernel_dim,
                spanned_dim: report.spanned_dim,
            })
        } else {
            None
        };
        Ok((
            Self {
                assumption2,
                z_source: zop.source(),
                constants,
                rate_sqrt_sigma_over_nu: rate,
                span_condition,
            },
            zop,
        ))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serialize") + "\n")
    }
}

/// The run summary exported as summary.json.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub iters: u64,
    pub stop: String,
    pub final_f: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_to_f_star: Option<f64>,
    pub feasibility_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_measure: Option<f64>,
    pub zero_steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ns_per_iter: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn from_trace(trace: &RunTrace, f_star: Option<f64>) -> Self {
        let last = trace.final_row().expect("trace has rows");
        Self {
            iters: trace.iters,
            stop: match trace.stop {
                StopReason::MaxIters => "max-iters".into(),
                StopReason::OptMeasure => "opt-measure".into(),
                StopReason::Gap => "gap".into(),
            },
            final_f: last.f,
            gap_to_f_star: f_star.map(|fs| last.f - fs),
            feasibility_inf: last.feas_inf,
            opt_measure: last.opt_measure,
            zero_steps: trace.zero_steps,
            mean_ns_per_iter: trace.mean_ns_per_iter,
            warnings: trace.warnings.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serialize") + "\n")
    }
}
