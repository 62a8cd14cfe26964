//! Run traces, their CSV serialization, and multi-seed aggregation.
//!
//! Trace CSV header: `k,f,feas_inf,opt_measure,wall_ns`. A missing
//! optimality measure (no expected operator available) is an empty field.
//! Values are written in shortest round-trip form, so re-reading a file
//! reproduces the in-memory trace exactly and identical runs produce
//! byte-identical artifacts.

use std::io::Write;

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    /// Recorded optimality measure fell below the configured tolerance.
    OptMeasure,
    /// Objective gap to a known optimum fell below the configured tolerance.
    Gap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub f: f64,
    /// ‖Ax − b‖∞.
    pub feas_inf: f64,
    /// ‖∇f(x)‖_Z when the expected operator is available.
    pub opt_measure: Option<f64>,
    /// Cumulative measured iteration time; 0 when timing is disabled.
    pub wall_ns: u64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub iters: u64,
    pub stop: StopReason,
    pub zero_steps: u64,
    pub warnings: Vec<String>,
    pub mean_ns_per_iter: Option<f64>,
}

pub const TRACE_HEADER: &str = "k,f,feas_inf,opt_measure,wall_ns";

impl RunTrace {
    pub fn new() -> Self {
        Self {
            rows: Vec::new(),
            iters: 0,
            stop: StopReason::MaxIters,
            zero_steps: 0,
            warnings: Vec::new(),
            mean_ns_per_iter: None,
        }
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// First recorded k with f − f_star ≤ tol.
    pub fn first_k_below_gap(&self, f_star: f64, tol: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.f - f_star <= tol)
            .map(|r| r.k)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for row in &self.rows {
            match row.opt_measure {
                Some(m) => writeln!(
                    w,
                    "{},{},{},{},{}",
                    row.k, row.f, row.feas_inf, m, row.wall_ns
                )?,
                None => writeln!(
                    w,
                    "{},{},{},,{}",
                    row.k, row.f, row.feas_inf, row.wall_ns
                )?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parses rows back from CSV text.
    pub fn rows_from_csv(text: &str) -> Result<Vec<TraceRow>, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_HEADER => {}
            other => return Err(format!("bad trace header: {other:?}")),
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 {
                return Err(format!("line {}: expected 5 fields", lineno + 2));
            }
            let parse = |s: &str| -> Result<f64, String> {
                s.parse::<f64>().map_err(|e| format!("line {}: {e}", lineno + 2))
            };
            rows.push(TraceRow {
                k: parts[0]
                    .parse()
                    .map_err(|e| format!("line {}: {e}", lineno + 2))?,
                f: parse(parts[1])?,
                feas_inf: parse(parts[2])?,
                opt_measure: if parts[3].is_empty() {
                    None
                } else {
                    Some(parse(parts[3])?)
                },
                wall_ns: parts[4]
                    .parse()
                    .map_err(|e| format!("line {}: {e}", lineno + 2))?,
            });
        }
        Ok(rows)
    }
}

impl Default for RunTrace {
    fn default() -> Self {
        Self::new()
    }
}

/// Objective statistics across seeds on a shared iteration grid.
#[derive(Debug, Clone)]
pub struct AggregateTrace {
    pub ks: Vec<u64>,
    pub f_mean: Vec<f64>,
    pub f_median: Vec<f64>,
    pub f_p10: Vec<f64>,
    pub f_p90: Vec<f64>,
}

pub const AGGREGATE_HEADER: &str = "cell,k,f_mean,f_median,f_p10,f_p90";

impl AggregateTrace {
    /// One CSV block, one row per grid point, tagged with the cell name.
    pub fn write_csv_rows(&self, cell: &str, mut w: impl Write) -> std::io::Result<()> {
        for i in 0..self.ks.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                cell, self.ks[i], self.f_mean[i], self.f_median[i], self.f_p10[i], self.f_p90[i]
            )?;
        }
        Ok(())
    }
}

/// Aggregates traces over the union of their recorded iteration counts.
/// A trace that stopped early contributes its final objective to later grid
/// points (its iterate no longer changes once the run has converged).
pub fn aggregate(traces: &[&RunTrace]) -> AggregateTrace {
    let mut ks: Vec<u64> = traces
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.k))
        .collect();
    ks.sort_unstable();
    ks.dedup();

    let mut f_mean = Vec::with_capacity(ks.len());
    let mut f_median = Vec::with_capacity(ks.len());
    let mut f_p10 = Vec::with_capacity(ks.len());
    let mut f_p90 = Vec::with_capacity(ks.len());
    let mut cursors = vec![0usize; traces.len()];
    for &k in &ks {
        let mut values: Vec<f64> = Vec::with_capacity(traces.len());
        for (t, cursor) in traces.iter().zip(cursors.iter_mut()) {
            while *cursor + 1 < t.rows.len() && t.rows[*cursor + 1].k <= k {
                *cursor += 1;
            }
            values.push(t.rows[*cursor].f);
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        f_mean.push(exact_mean(&values));
        f_median.push(median_sorted(&values));
        f_p10.push(percentile_sorted(&values, 0.10));
        f_p90.push(percentile_sorted(&values, 0.90));
    }
    AggregateTrace {
        ks,
        f_mean,
        f_median,
        f_p10,
        f_p90,
    }
}

/// Mean that is exact when all values are identical (seeds share x⁰, so the
/// k = 0 aggregate must equal f(x⁰) without rounding).
fn exact_mean(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
    if first == last {
        return first;
    }
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank percentile on sorted data.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_with(rows: &[(u64, f64)]) -> RunTrace {
        let mut t = RunTrace::new();
        for &(k, f) in rows {
            t.rows.push(TraceRow {
                k,
                f,
                feas_inf: 0.0,
                opt_measure: if k % 2 == 0 { Some(f / 2.0) } else { None },
                wall_ns: 0,
            });
        }
        t
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let t = trace_with(&[(0, 1.0), (1, 0.123456789123456789), (2, 1e-17)]);
        let text = t.to_csv_string();
        let rows = RunTrace::rows_from_csv(&text).unwrap();
        assert_eq!(rows, t.rows);
    }

    #[test]
    fn header_is_the_documented_contract() {
        let t = trace_with(&[(0, 1.0)]);
        assert!(t.to_csv_string().starts_with("k,f,feas_inf,opt_measure,wall_ns\n"));
    }

    #[test]
    fn aggregate_mean_at_shared_start_is_exact() {
        // Three seeds share f(x0) = 0.1, which is not exactly representable;
        // the aggregate must still print the identical value.
        let traces = [
            trace_with(&[(0, 0.1), (1, 0.05)]),
            trace_with(&[(0, 0.1), (1, 0.03)]),
            trace_with(&[(0, 0.1), (1, 0.07)]),
        ];
        let refs: Vec<&RunTrace> = traces.iter().collect();
        let agg = aggregate(&refs);
        assert_eq!(agg.f_mean[0], 0.1);
        assert_eq!(agg.f_median[1], 0.05);
    }

    #[test]
    fn early_stopped_traces_carry_forward() {
        let traces = [
            trace_with(&[(0, 1.0), (5, 0.5)]),
            trace_with(&[(0, 1.0), (5, 0.4), (10, 0.2)]),
        ];
        let refs: Vec<&RunTrace> = traces.iter().collect();
        let agg = aggregate(&refs);
        assert_eq!(agg.ks, vec![0, 5, 10]);
        // First trace contributes its final 0.5 at k = 10.
        assert!((agg.f_mean[2] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn gap_crossing_lookup() {
        let t = trace_with(&[(0, 1.0), (3, 0.09), (6, 0.01)]);
        assert_eq!(t.first_k_below_gap(0.0, 0.1), Some(3));
        assert_eq!(t.first_k_below_gap(0.0, 1e-3), None);
    }
}
