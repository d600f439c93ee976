//! Time-to-solve sweeps over generated instances and their aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{generate_instance, GenConfig, Instance, InstanceError};
use crate::rcspp::{check_solution, solve, ModelKind, ResourceModel, SolveError, SolveOptions, SolverKind};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("no records to aggregate")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    /// Node counts, strictly increasing.
    pub sizes: Vec<usize>,
    pub instances_per_size: usize,
    /// Base seed; per-instance seeds are derived from it.
    #[serde(alias = "seeds")]
    pub seed: u64,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Per-solve wall-clock limit.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Solves per cell; the recorded time is the fastest of them. Values
    /// above 1 suppress scheduler noise on sub-millisecond solves.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    1
}

fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Labeling, SolverKind::Bnb]
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_timeout() -> f64 {
    60.0
}

impl BenchPlan {
    /// Sizes 5 to 100 in steps of 5 with 30 instances each, both solvers
    /// and both resource models.
    pub fn full_sweep(seed: u64) -> Self {
        Self {
            sizes: (5..=100).step_by(5).collect(),
            instances_per_size: 30,
            seed,
            solvers: default_solvers(),
            models: default_models(),
            timeout_s: default_timeout(),
            repeats: default_repeats(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Plan(m.to_owned()));
        if self.sizes.is_empty() {
            return bad("sizes must not be empty");
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly increasing");
        }
        if self.sizes[0] < 2 {
            return bad("sizes must be at least 2");
        }
        if self.instances_per_size == 0 {
            return bad("instances_per_size must be at least 1");
        }
        if self.solvers.is_empty() || self.models.is_empty() {
            return bad("solvers and models must not be empty");
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn cell_count(&self) -> usize {
        self.sizes.len() * self.instances_per_size * self.solvers.len() * self.models.len()
    }
}

/// Seed of the `index`-th instance of a given size.
pub fn instance_seed(base: u64, size: usize, index: usize) -> u64 {
    base.wrapping_add((size as u64).wrapping_mul(1_000_003))
        .wrapping_add(index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Optimal,
    Infeasible,
    Timeout,
    /// The solver refused or returned a path that failed verification.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub size: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub model: ModelKind,
    pub status: CellStatus,
    pub cost: Option<f64>,
    pub wall_time_s: f64,
    pub expanded: u64,
}

/// Solves one cell `repeats` times, timing only the solve calls and keeping
/// the fastest. A timeout or error on any repeat decides the cell.
pub fn run_cell(
    instance: &Instance,
    seed: u64,
    solver: SolverKind,
    model: ModelKind,
    timeout: Duration,
    repeats: usize,
) -> BenchRecord {
    let resource = ResourceModel::for_instance(model, instance);
    let options = SolveOptions {
        time_limit: Some(timeout),
        bruteforce_max_nodes: usize::MAX,
    };
    let mut record = BenchRecord {
        size: instance.node_count(),
        seed,
        solver,
        model,
        status: CellStatus::Error,
        cost: None,
        wall_time_s: f64::INFINITY,
        expanded: 0,
    };
    for _ in 0..repeats.max(1) {
        let started = std::time::Instant::now();
        let outcome = solve(solver, instance, &resource, &options);
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Ok(sol) => {
                record.wall_time_s = record.wall_time_s.min(sol.wall_time_s);
                record.expanded = sol.expanded;
                if !check_solution(instance, &resource, &sol).ok {
                    record.status = CellStatus::Error;
                    record.cost = None;
                    break;
                }
                record.cost = sol.cost;
                record.status = if sol.is_optimal() {
                    CellStatus::Optimal
                } else {
                    CellStatus::Infeasible
                };
            }
            Err(e) => {
                record.wall_time_s = elapsed;
                record.cost = None;
                record.status = CellStatus::Error;
                if let SolveError::Timeout { expanded } = e {
                    record.status = CellStatus::Timeout;
                    record.expanded = expanded;
                }
                break;
            }
        }
    }
    record
}

fn run_instance(plan: &BenchPlan, gen: &GenConfig, size: usize, index: usize) -> Result<Vec<BenchRecord>, BenchError> {
    let seed = instance_seed(plan.seed, size, index);
    let instance = generate_instance(size, seed, gen)?;
    let timeout = Duration::from_secs_f64(plan.timeout_s);
    let mut out = Vec::with_capacity(plan.solvers.len() * plan.models.len());
    for &solver in &plan.solvers {
        for &model in &plan.models {
            out.push(run_cell(&instance, seed, solver, model, timeout, plan.repeats));
        }
    }
    Ok(out)
}

/// Runs every (size, instance, solver, model) cell. Instances are visited
/// one at a time with all their cells back to back, so slow drift in
/// machine load affects every combination alike. With `jobs > 1` instances
/// are spread over a dedicated thread pool; records come back in the same
/// order either way.
pub fn run_bench(plan: &BenchPlan, gen: &GenConfig, jobs: usize) -> Result<Vec<BenchRecord>, BenchError> {
    plan.validate()?;
    gen.validate()?;
    let work: Vec<(usize, usize)> = plan
        .sizes
        .iter()
        .flat_map(|&s| (0..plan.instances_per_size).map(move |k| (s, k)))
        .collect();
    let batches: Vec<Vec<BenchRecord>> = if jobs <= 1 {
        work.iter()
            .map(|&(s, k)| run_instance(plan, gen, s, k))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| {
            work.par_iter()
                .map(|&(s, k)| run_instance(plan, gen, s, k))
                .collect::<Result<_, _>>()
        })?
    };
    Ok(batches.into_iter().flatten().collect())
}

pub fn write_records<W: Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<BenchRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub size: usize,
    pub solver: SolverKind,
    pub model: ModelKind,
    pub cells: usize,
    /// Cells that finished with optimal or infeasible status.
    pub completed: usize,
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
    pub max_s: Option<f64>,
    pub infeasible: usize,
    pub timeouts: usize,
    pub errors: usize,
}

fn solver_rank(s: SolverKind) -> u8 {
    match s {
        SolverKind::Labeling => 0,
        SolverKind::Bnb => 1,
        SolverKind::Brute => 2,
    }
}

fn model_rank(m: ModelKind) -> u8 {
    match m {
        ModelKind::Linear => 0,
        ModelKind::Nominal => 1,
    }
}

/// Mean, median and max of the completed cells' times. Times are sorted
/// first so the result does not depend on record order.
fn time_stats(mut times: Vec<f64>) -> (Option<f64>, Option<f64>, Option<f64>) {
    if times.is_empty() {
        return (None, None, None);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2.0
    };
    (Some(mean), Some(median), times.last().copied())
}

/// One row per (size, solver, model), sorted by size then solver then model.
pub fn aggregate(records: &[BenchRecord]) -> Result<Vec<SummaryRow>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut groups: BTreeMap<(usize, u8, u8), Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.size, solver_rank(r.solver), model_rank(r.model)))
            .or_default()
            .push(r);
    }
    Ok(groups
        .into_values()
        .map(|group| {
            let count = |s: CellStatus| group.iter().filter(|r| r.status == s).count();
            let times: Vec<f64> = group
                .iter()
                .filter(|r| matches!(r.status, CellStatus::Optimal | CellStatus::Infeasible))
                .map(|r| r.wall_time_s)
                .collect();
            let completed = times.len();
            let (mean_s, median_s, max_s) = time_stats(times);
            SummaryRow {
                size: group[0].size,
                solver: group[0].solver,
                model: group[0].model,
                cells: group.len(),
                completed,
                mean_s,
                median_s,
                max_s,
                infeasible: count(CellStatus::Infeasible),
                timeouts: count(CellStatus::Timeout),
                errors: count(CellStatus::Error),
            }
        })
        .collect())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Formats `x` with four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Fixed-width table of the summary for the console.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), sig4);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:<9} {:<8} {:>5} {:>5} {:>11} {:>11} {:>11} {:>6} {:>6} {:>5}",
        "size", "solver", "model", "cells", "done", "mean_s", "median_s", "max_s", "infeas", "tmout", "err"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>5} {:<9} {:<8} {:>5} {:>5} {:>11} {:>11} {:>11} {:>6} {:>6} {:>5}",
            r.size,
            r.solver.name(),
            r.model.name(),
            r.cells,
            r.completed,
            opt(r.mean_s),
            opt(r.median_s),
            opt(r.max_s),
            r.infeasible,
            r.timeouts,
            r.errors
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(size: usize, solver: SolverKind, status: CellStatus, t: f64) -> BenchRecord {
        BenchRecord {
            size,
            seed: 1,
            solver,
            model: ModelKind::Linear,
            status,
            cost: (status == CellStatus::Optimal).then_some(1.0),
            wall_time_s: t,
            expanded: 3,
        }
    }

    #[test]
    fn plan_validation() {
        let mut plan = BenchPlan::full_sweep(0);
        assert_eq!(plan.sizes.len(), 20);
        assert!(plan.validate().is_ok());
        plan.sizes = vec![10, 5];
        assert!(plan.validate().is_err());
        plan.sizes = vec![];
        assert!(plan.validate().is_err());
        let mut plan = BenchPlan::full_sweep(0);
        plan.timeout_s = 0.0;
        assert!(plan.validate().is_err());
        plan.timeout_s = 1.0;
        plan.instances_per_size = 0;
        assert!(plan.validate().is_err());
        plan.instances_per_size = 1;
        plan.repeats = 0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn plan_json_defaults_and_alias() {
        let plan = BenchPlan::from_json(r#"{"sizes":[5,10],"instances_per_size":3,"seeds":9}"#).unwrap();
        assert_eq!(plan.seed, 9);
        assert_eq!(plan.solvers, default_solvers());
        assert_eq!(plan.timeout_s, 60.0);
        assert_eq!(plan.repeats, 1);
        assert!(BenchPlan::from_json(r#"{"sizes":[5],"instances_per_size":1,"seed":1,"extra":2}"#).is_err());
    }

    #[test]
    fn single_record_mean_is_its_time() {
        let rows = aggregate(&[record(5, SolverKind::Bnb, CellStatus::Optimal, 0.25)]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_s, Some(0.25));
        assert_eq!(rows[0].median_s, Some(0.25));
    }

    #[test]
    fn all_timeouts_leave_mean_absent() {
        let recs: Vec<_> = (0..4).map(|_| record(5, SolverKind::Bnb, CellStatus::Timeout, 60.0)).collect();
        let rows = aggregate(&recs).unwrap();
        assert_eq!(rows[0].mean_s, None);
        assert_eq!(rows[0].timeouts, 4);
        assert_eq!(rows[0].completed, 0);
        assert!(format_summary(&rows).contains(" - "));
    }

    #[test]
    fn median_of_even_group() {
        let recs: Vec<_> = [0.4, 0.1, 0.3, 0.2]
            .iter()
            .map(|&t| record(5, SolverKind::Labeling, CellStatus::Infeasible, t))
            .collect();
        let row = &aggregate(&recs).unwrap()[0];
        assert!((row.median_s.unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(row.max_s, Some(0.4));
        assert_eq!(row.infeasible, 4);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(matches!(aggregate(&[]), Err(BenchError::Empty)));
    }

    #[test]
    fn sig4_formatting() {
        assert_eq!(sig4(1.23456), "1.235");
        assert_eq!(sig4(0.0123456), "0.01235");
        assert_eq!(sig4(1234.56), "1235");
        assert_eq!(sig4(0.0), "0");
        assert_eq!(sig4(1.5e-7), "1.500e-7");
    }

    #[test]
    fn records_csv_round_trip() {
        let recs = vec![
            record(5, SolverKind::Labeling, CellStatus::Optimal, 0.001),
            record(5, SolverKind::Bnb, CellStatus::Infeasible, 0.002),
        ];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("size,seed,solver,model,status,cost,wall_time_s,expanded\n"));
        assert!(text.contains("5,1,bnb,linear,infeasible,,0.002,3"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }
}
