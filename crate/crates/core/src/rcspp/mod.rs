//! Shortest path with a battery SOC resource.
//!
//! A path from `start` to `goal` is feasible when the SOC propagated along
//! it never drops below zero. SOC is propagated with the tight form of the
//! per-edge battery constraint of either resource model:
//!
//! * linear: `b_j = b_i - P t (A b_i + B P + C) / C_m`
//! * nominal: `b_j = b_i - P t / (V_nom C_m)`
//!
//! Three solvers share this module: label setting with Pareto dominance,
//! best-first branch-and-bound, and an exhaustive enumerator used as an
//! oracle. [`check_solution`] re-verifies any returned path.

mod bnb;
mod brute;
mod check;
mod labeling;
mod milp;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Edge, Instance, InstanceError};
use crate::models::LinearFit;

pub use bnb::solve_bnb;
pub use brute::{solve_bruteforce, DEFAULT_BRUTEFORCE_MAX_NODES};
pub use check::{check_solution, CheckReport, Violation};
pub use labeling::solve_labeling;
pub use milp::export_milp;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(
        "linear model is not dominance-safe on edge {from} -> {to}: SOC propagation slope {slope} must be positive"
    )]
    DominanceUnsafe { from: usize, to: usize, slope: f64 },
    #[error("instance has {nodes} nodes, exhaustive search is limited to {max}")]
    TooLarge { nodes: usize, max: usize },
    #[error("time limit reached after expanding {expanded} search nodes")]
    Timeout { expanded: u64 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Nominal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Linear, ModelKind::Nominal];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Nominal => "nominal",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Self::Linear),
            "nominal" => Ok(Self::Nominal),
            other => Err(format!("unknown resource model `{other}` (expected linear or nominal)")),
        }
    }
}

/// The battery resource extension used by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResourceModel {
    Linear { fit: LinearFit },
    Nominal { v_nom: f64 },
}

impl ResourceModel {
    pub fn for_instance(kind: ModelKind, instance: &Instance) -> Self {
        match kind {
            ModelKind::Linear => Self::Linear { fit: instance.fit },
            ModelKind::Nominal => Self::Nominal {
                v_nom: instance.battery.v_nom,
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Linear { .. } => ModelKind::Linear,
            Self::Nominal { .. } => ModelKind::Nominal,
        }
    }

    /// SOC consumed along an edge when entering it with `soc`.
    #[inline]
    pub fn drop(&self, soc: f64, power: f64, time: f64, capacity: f64) -> f64 {
        match self {
            Self::Linear { fit } => power * fit.inverse_voltage(soc, power) * time / capacity,
            Self::Nominal { v_nom } => power * (1.0 / v_nom) * time / capacity,
        }
    }

    /// Derivative of the successor SOC with respect to the entry SOC.
    pub fn slope(&self, power: f64, time: f64, capacity: f64) -> f64 {
        match self {
            Self::Linear { fit } => 1.0 - fit.a * power * time / capacity,
            Self::Nominal { .. } => 1.0,
        }
    }

    /// Checks that SOC propagation is strictly increasing in the entry SOC on
    /// every edge, which dominance pruning relies on.
    pub fn check_dominance_safe(&self, instance: &Instance) -> Result<(), SolveError> {
        let cap = instance.battery.capacity_coulombs;
        for e in &instance.edges {
            let slope = self.slope(e.power, e.time, cap);
            if !(slope > 0.0) {
                return Err(SolveError::DominanceUnsafe {
                    from: e.from,
                    to: e.to,
                    slope,
                });
            }
        }
        Ok(())
    }
}

/// SOC after traversing `edge` from `soc`, or `None` when it would fall
/// below zero.
#[inline]
pub fn extend(soc: f64, edge: &Edge, model: &ResourceModel, capacity: f64) -> Option<f64> {
    let next = soc - model.drop(soc, edge.power, edge.time, capacity);
    (next >= 0.0).then_some(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSolution {
    pub solver: String,
    pub model: ModelKind,
    pub status: SolveStatus,
    /// Node ids from start to goal; empty when infeasible.
    pub nodes: Vec<usize>,
    /// Total edge cost; `None` when infeasible.
    pub cost: Option<f64>,
    /// SOC on arrival at each node of `nodes`.
    pub soc_profile: Vec<f64>,
    pub wall_time_s: f64,
    /// Labels (labeling), search nodes (branch-and-bound) or DFS calls
    /// (brute force) expanded.
    pub expanded: u64,
}

impl PathSolution {
    fn infeasible(solver: &str, model: ModelKind, expanded: u64) -> Self {
        Self {
            solver: solver.to_owned(),
            model,
            status: SolveStatus::Infeasible,
            nodes: Vec::new(),
            cost: None,
            soc_profile: Vec::new(),
            wall_time_s: 0.0,
            expanded,
        }
    }

    fn optimal(solver: &str, model: ModelKind, path: Vec<(usize, f64)>, cost: f64, expanded: u64) -> Self {
        let (nodes, soc_profile) = path.into_iter().unzip();
        Self {
            solver: solver.to_owned(),
            model,
            status: SolveStatus::Optimal,
            nodes,
            cost: Some(cost),
            soc_profile,
            wall_time_s: 0.0,
            expanded,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Labeling,
    Bnb,
    Brute,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Labeling => "labeling",
            Self::Bnb => "bnb",
            Self::Brute => "brute",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "labeling" => Ok(Self::Labeling),
            "bnb" => Ok(Self::Bnb),
            "brute" | "bruteforce" => Ok(Self::Brute),
            other => Err(format!("unknown solver `{other}` (expected labeling, bnb or brute)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    pub bruteforce_max_nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            bruteforce_max_nodes: DEFAULT_BRUTEFORCE_MAX_NODES,
        }
    }
}

/// Dispatches to the chosen solver and records wall time.
pub fn solve(
    solver: SolverKind,
    instance: &Instance,
    model: &ResourceModel,
    options: &SolveOptions,
) -> Result<PathSolution, SolveError> {
    let started = Instant::now();
    let deadline = Deadline::new(started, options.time_limit);
    let mut sol = match solver {
        SolverKind::Labeling => labeling::solve(instance, model, &deadline)?,
        SolverKind::Bnb => bnb::solve(instance, model, &deadline)?,
        SolverKind::Brute => brute::solve(instance, model, options.bruteforce_max_nodes, &deadline)?,
    };
    sol.wall_time_s = started.elapsed().as_secs_f64();
    Ok(sol)
}

/// Cheap periodic wall-clock check for the search loops.
pub(crate) struct Deadline {
    at: Option<Instant>,
    counter: std::cell::Cell<u32>,
}

impl Deadline {
    const CHECK_EVERY: u32 = 1024;

    pub(crate) fn new(started: Instant, limit: Option<Duration>) -> Self {
        Self {
            at: limit.map(|l| started + l),
            counter: std::cell::Cell::new(0),
        }
    }

    #[inline]
    pub(crate) fn expired(&self) -> bool {
        let Some(at) = self.at else { return false };
        let c = self.counter.get().wrapping_add(1);
        self.counter.set(c);
        c.is_multiple_of(Self::CHECK_EVERY) && Instant::now() >= at
    }
}

/// Outgoing adjacency by node index, each entry pointing into
/// `instance.edges`.
pub(crate) struct Adjacency {
    pub(crate) out: Vec<Vec<usize>>,
}

impl Adjacency {
    pub(crate) fn new(instance: &Instance) -> Self {
        let mut out = vec![Vec::new(); instance.node_count()];
        for (i, e) in instance.edges.iter().enumerate() {
            out[e.from].push(i);
        }
        Self { out }
    }
}

/// Min-heap entry keyed on a float.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MinItem {
    pub(crate) key: f64,
    pub(crate) node: usize,
}

impl PartialEq for MinItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for MinItem {}
impl PartialOrd for MinItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Battery-unconstrained shortest distance from every node to `goal`.
pub(crate) fn distances_to_goal(instance: &Instance) -> Vec<f64> {
    let n = instance.node_count();
    let mut incoming = vec![Vec::new(); n];
    for e in &instance.edges {
        incoming[e.to].push((e.from, e.cost));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[instance.goal] = 0.0;
    heap.push(MinItem {
        key: 0.0,
        node: instance.goal,
    });
    while let Some(MinItem { key, node }) = heap.pop() {
        if key > dist[node] {
            continue;
        }
        for &(prev, cost) in &incoming[node] {
            let d = key + cost;
            if d < dist[prev] {
                dist[prev] = d;
                heap.push(MinItem { key: d, node: prev });
            }
        }
    }
    dist
}

/// Smallest entry SOC at every node from which the goal can still be reached
/// (over walks, ignoring the simple-path restriction), or infinity when no
/// entry SOC suffices. Requires SOC propagation to be increasing with a
/// non-negative drop on every edge, so that the inverse propagation is
/// monotone and never decreases the requirement; returns `None` otherwise.
pub(crate) fn min_required_soc(instance: &Instance, model: &ResourceModel) -> Option<Vec<f64>> {
    let cap = instance.battery.capacity_coulombs;
    let soc_hi = instance.battery.soc_max;
    for e in &instance.edges {
        let slope = model.slope(e.power, e.time, cap);
        let monotone = slope > 0.0
            && model.drop(0.0, e.power, e.time, cap) >= 0.0
            && model.drop(soc_hi, e.power, e.time, cap) >= 0.0;
        if !monotone {
            return None;
        }
    }
    // b_j = slope * b_i - offset  =>  b_i = (b_j + offset) / slope
    let inverse = |e: &Edge, needed: f64| -> f64 {
        let slope = model.slope(e.power, e.time, cap);
        let offset = model.drop(0.0, e.power, e.time, cap);
        (needed + offset) / slope
    };
    let n = instance.node_count();
    let mut incoming = vec![Vec::new(); n];
    for e in &instance.edges {
        incoming[e.to].push(*e);
    }
    let mut req = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    req[instance.goal] = 0.0;
    heap.push(MinItem {
        key: 0.0,
        node: instance.goal,
    });
    while let Some(MinItem { key, node }) = heap.pop() {
        if key > req[node] {
            continue;
        }
        for e in &incoming[node] {
            let r = inverse(e, key);
            if r < req[e.from] && r <= soc_hi {
                req[e.from] = r;
                heap.push(MinItem { key: r, node: e.from });
            }
        }
    }
    Some(req)
}
