//! Independent verification of a returned path against the MILP
//! constraints: start/goal degree, flow conservation (simple path over
//! instance edges), the SOC window, the initial SOC and the battery
//! propagation inequality of the chosen resource model.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{PathSolution, ResourceModel, SolveStatus};
use crate::instance::Instance;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    EmptyPath,
    InfeasibleWithPath,
    WrongStart { found: usize },
    WrongGoal { found: usize },
    NonEdgeTransition { from: usize, to: usize },
    RepeatedNode { node: usize },
    ProfileLength { nodes: usize, socs: usize },
    InitialSoc { expected: f64, found: f64 },
    SocBelowZero { node: usize, soc: f64 },
    SocAboveMax { node: usize, soc: f64, max: f64 },
    BatteryPropagation { from: usize, to: usize, bound: f64, found: f64 },
    CostMismatch { reported: Option<f64>, recomputed: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyPath => write!(f, "optimal status with an empty path"),
            Self::InfeasibleWithPath => write!(f, "infeasible status but a path was returned"),
            Self::WrongStart { found } => write!(f, "path starts at {found}, not the start node"),
            Self::WrongGoal { found } => write!(f, "path ends at {found}, not the goal node"),
            Self::NonEdgeTransition { from, to } => write!(f, "non-edge transition {from} -> {to}"),
            Self::RepeatedNode { node } => write!(f, "node {node} visited twice"),
            Self::ProfileLength { nodes, socs } => {
                write!(f, "soc profile has {socs} entries for {nodes} nodes")
            }
            Self::InitialSoc { expected, found } => {
                write!(f, "initial soc {found} differs from {expected}")
            }
            Self::SocBelowZero { node, soc } => write!(f, "soc lower bound: {soc} at node {node}"),
            Self::SocAboveMax { node, soc, max } => {
                write!(f, "soc upper bound: {soc} exceeds {max} at node {node}")
            }
            Self::BatteryPropagation { from, to, bound, found } => write!(
                f,
                "battery propagation {from} -> {to}: soc {found} exceeds allowed {bound}"
            ),
            Self::CostMismatch { reported, recomputed } => {
                write!(f, "reported cost {reported:?} but edges sum to {recomputed}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

pub fn check_solution(instance: &Instance, model: &ResourceModel, solution: &PathSolution) -> CheckReport {
    let mut v = Vec::new();
    match solution.status {
        SolveStatus::Infeasible => {
            if !solution.nodes.is_empty() {
                v.push(Violation::InfeasibleWithPath);
            }
        }
        SolveStatus::Optimal => check_path(instance, model, solution, &mut v),
    }
    CheckReport {
        ok: v.is_empty(),
        violations: v,
    }
}

fn check_path(instance: &Instance, model: &ResourceModel, sol: &PathSolution, v: &mut Vec<Violation>) {
    let nodes = &sol.nodes;
    let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) else {
        v.push(Violation::EmptyPath);
        return;
    };
    if first != instance.start {
        v.push(Violation::WrongStart { found: first });
    }
    if last != instance.goal {
        v.push(Violation::WrongGoal { found: last });
    }
    let mut seen = HashSet::new();
    for &n in nodes {
        if !seen.insert(n) {
            v.push(Violation::RepeatedNode { node: n });
        }
    }
    if sol.soc_profile.len() != nodes.len() {
        v.push(Violation::ProfileLength {
            nodes: nodes.len(),
            socs: sol.soc_profile.len(),
        });
        return;
    }
    if sol.soc_profile[0] != instance.soc0 {
        v.push(Violation::InitialSoc {
            expected: instance.soc0,
            found: sol.soc_profile[0],
        });
    }
    let soc_max = instance.battery.soc_max;
    for (&node, &soc) in nodes.iter().zip(&sol.soc_profile) {
        if soc < 0.0 {
            v.push(Violation::SocBelowZero { node, soc });
        }
        if soc > soc_max {
            v.push(Violation::SocAboveMax { node, soc, max: soc_max });
        }
    }

    let edges: HashMap<(usize, usize), _> = instance.edges.iter().map(|e| ((e.from, e.to), e)).collect();
    let cap = instance.battery.capacity_coulombs;
    let mut total = 0.0;
    for (i, pair) in nodes.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let Some(edge) = edges.get(&(from, to)) else {
            v.push(Violation::NonEdgeTransition { from, to });
            continue;
        };
        total += edge.cost;
        let b_i = sol.soc_profile[i];
        let b_j = sol.soc_profile[i + 1];
        let k = edge.power * edge.time / cap;
        let bound = match model {
            ResourceModel::Linear { fit } => b_i - k * (fit.a * b_i + fit.b * edge.power + fit.c),
            ResourceModel::Nominal { v_nom } => b_i - k / v_nom,
        };
        if b_j > bound + TOL {
            v.push(Violation::BatteryPropagation { from, to, bound, found: b_j });
        }
    }
    let cost_ok = sol
        .cost
        .is_some_and(|c| (c - total).abs() <= TOL * total.abs().max(1.0));
    if !cost_ok {
        v.push(Violation::CostMismatch {
            reported: sol.cost,
            recomputed: total,
        });
    }
}
