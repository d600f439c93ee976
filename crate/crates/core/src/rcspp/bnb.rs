//! Best-first branch-and-bound over partial simple paths.
//!
//! Branching picks the next edge out of the path's last node. A partial path
//! is discarded when its cost plus the unconstrained shortest distance to the
//! goal cannot beat the incumbent, when SOC would go negative, or when its
//! SOC is below the least SOC from which the goal is reachable at all.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    distances_to_goal, extend, min_required_soc, Adjacency, Deadline, PathSolution, ResourceModel,
    SolveError,
};
use crate::instance::Instance;

const NAME: &str = "bnb";

/// Slack on the reachability prune so rounding in the inverse propagation
/// can never discard a path that forward propagation accepts.
const REQUIRED_SOC_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct SearchNode {
    node: usize,
    cost: f64,
    soc: f64,
    parent: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Open {
    bound: f64,
    soc: f64,
    id: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.soc.total_cmp(&other.soc))
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_bnb(instance: &Instance, model: &ResourceModel) -> Result<PathSolution, SolveError> {
    super::solve(super::SolverKind::Bnb, instance, model, &Default::default())
}

fn on_path(tree: &[SearchNode], mut id: usize, node: usize) -> bool {
    loop {
        if tree[id].node == node {
            return true;
        }
        match tree[id].parent {
            Some(p) => id = p,
            None => return false,
        }
    }
}

pub(crate) fn solve(
    instance: &Instance,
    model: &ResourceModel,
    deadline: &Deadline,
) -> Result<PathSolution, SolveError> {
    instance.validate()?;
    let adj = Adjacency::new(instance);
    let cap = instance.battery.capacity_coulombs;
    let to_goal = distances_to_goal(instance);
    let required = min_required_soc(instance, model);
    let reachable = |node: usize, soc: f64| match &required {
        Some(req) => soc >= req[node] - REQUIRED_SOC_SLACK,
        None => true,
    };

    let mut tree = vec![SearchNode {
        node: instance.start,
        cost: 0.0,
        soc: instance.soc0,
        parent: None,
    }];
    let mut open = BinaryHeap::new();
    if to_goal[instance.start].is_finite() && reachable(instance.start, instance.soc0) {
        open.push(Open {
            bound: to_goal[instance.start],
            soc: instance.soc0,
            id: 0,
        });
    }
    let mut incumbent: Option<(f64, usize)> = None;
    let mut expanded = 0u64;

    while let Some(Open { bound, id, .. }) = open.pop() {
        if incumbent.is_some_and(|(best, _)| bound >= best) {
            break;
        }
        if deadline.expired() {
            return Err(SolveError::Timeout { expanded });
        }
        expanded += 1;
        let current = tree[id];
        for &ei in &adj.out[current.node] {
            let edge = &instance.edges[ei];
            if on_path(&tree, id, edge.to) {
                continue;
            }
            let Some(soc) = extend(current.soc, edge, model, cap) else {
                continue;
            };
            let cost = current.cost + edge.cost;
            let child_bound = cost + to_goal[edge.to];
            if !child_bound.is_finite() || incumbent.is_some_and(|(best, _)| child_bound >= best) {
                continue;
            }
            if !reachable(edge.to, soc) {
                continue;
            }
            let child = tree.len();
            tree.push(SearchNode {
                node: edge.to,
                cost,
                soc,
                parent: Some(id),
            });
            if edge.to == instance.goal {
                incumbent = Some((cost, child));
            } else {
                open.push(Open {
                    bound: child_bound,
                    soc,
                    id: child,
                });
            }
        }
    }

    match incumbent {
        Some((cost, leaf)) => {
            let mut path = Vec::new();
            let mut cursor = Some(leaf);
            while let Some(id) = cursor {
                path.push((tree[id].node, tree[id].soc));
                cursor = tree[id].parent;
            }
            path.reverse();
            Ok(PathSolution::optimal(NAME, model.kind(), path, cost, expanded))
        }
        None => Ok(PathSolution::infeasible(NAME, model.kind(), expanded)),
    }
}
