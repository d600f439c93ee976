//! Label setting with (cost, SOC) Pareto dominance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{extend, Adjacency, Deadline, PathSolution, ResourceModel, SolveError};
use crate::instance::Instance;

const NAME: &str = "labeling";

#[derive(Debug, Clone, Copy)]
struct Label {
    node: usize,
    cost: f64,
    soc: f64,
    pred: Option<usize>,
    alive: bool,
}

/// Queue entry: lowest cost first, then highest SOC, then creation order.
#[derive(Debug, Clone, Copy)]
struct Queued {
    cost: f64,
    soc: f64,
    label: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| self.soc.total_cmp(&other.soc))
            .then_with(|| other.label.cmp(&self.label))
    }
}

/// Non-dominated labels at one node, sorted by increasing cost. Along the
/// frontier SOC is strictly increasing as well.
#[derive(Debug, Default)]
struct Frontier {
    labels: Vec<usize>,
}

impl Frontier {
    /// Inserts `(cost, soc)` unless an existing label dominates it; returns
    /// the labels it dominates so they can be retired.
    fn try_insert(&mut self, arena: &[Label], id: usize, cost: f64, soc: f64) -> Option<Vec<usize>> {
        let pos = self.labels.partition_point(|&l| arena[l].cost <= cost);
        if pos > 0 && arena[self.labels[pos - 1]].soc >= soc {
            return None;
        }
        // labels with equal cost sit before `pos`; any with lower SOC are dominated
        let mut lo = pos;
        while lo > 0 && arena[self.labels[lo - 1]].cost == cost {
            lo -= 1;
        }
        let mut hi = pos;
        while hi < self.labels.len() && arena[self.labels[hi]].soc <= soc {
            hi += 1;
        }
        let removed: Vec<usize> = self.labels.splice(lo..hi, [id]).collect();
        Some(removed)
    }
}

pub fn solve_labeling(instance: &Instance, model: &ResourceModel) -> Result<PathSolution, SolveError> {
    super::solve(super::SolverKind::Labeling, instance, model, &Default::default())
}

pub(crate) fn solve(
    instance: &Instance,
    model: &ResourceModel,
    deadline: &Deadline,
) -> Result<PathSolution, SolveError> {
    instance.validate()?;
    model.check_dominance_safe(instance)?;
    let adj = Adjacency::new(instance);
    let cap = instance.battery.capacity_coulombs;

    let mut arena = vec![Label {
        node: instance.start,
        cost: 0.0,
        soc: instance.soc0,
        pred: None,
        alive: true,
    }];
    let mut frontiers: Vec<Frontier> = (0..instance.node_count()).map(|_| Frontier::default()).collect();
    frontiers[instance.start].labels.push(0);
    let mut queue = BinaryHeap::new();
    queue.push(Queued {
        cost: 0.0,
        soc: instance.soc0,
        label: 0,
    });
    let mut expanded = 0u64;

    while let Some(Queued { label, .. }) = queue.pop() {
        let current = arena[label];
        if !current.alive {
            continue;
        }
        if deadline.expired() {
            return Err(SolveError::Timeout { expanded });
        }
        expanded += 1;
        if current.node == instance.goal {
            let mut path = Vec::new();
            let mut cursor = Some(label);
            while let Some(id) = cursor {
                path.push((arena[id].node, arena[id].soc));
                cursor = arena[id].pred;
            }
            path.reverse();
            return Ok(PathSolution::optimal(NAME, model.kind(), path, current.cost, expanded));
        }
        for &ei in &adj.out[current.node] {
            let edge = &instance.edges[ei];
            let Some(soc) = extend(current.soc, edge, model, cap) else {
                continue;
            };
            let cost = current.cost + edge.cost;
            let id = arena.len();
            arena.push(Label {
                node: edge.to,
                cost,
                soc,
                pred: Some(label),
                alive: true,
            });
            match frontiers[edge.to].try_insert(&arena, id, cost, soc) {
                Some(retired) => {
                    for r in retired {
                        arena[r].alive = false;
                    }
                    queue.push(Queued { cost, soc, label: id });
                }
                None => {
                    arena.pop();
                }
            }
        }
    }
    Ok(PathSolution::infeasible(NAME, model.kind(), expanded))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arena(points: &[(f64, f64)]) -> Vec<Label> {
        points
            .iter()
            .map(|&(cost, soc)| Label { node: 0, cost, soc, pred: None, alive: true })
            .collect()
    }

    #[test]
    fn frontier_dominance() {
        let a = arena(&[(1.0, 0.5), (2.0, 0.7), (3.0, 0.9), (1.5, 0.4), (2.0, 0.95), (0.5, 0.1), (2.0, 0.95)]);
        let mut f = Frontier::default();
        assert!(f.try_insert(&a, 0, 1.0, 0.5).unwrap().is_empty());
        assert!(f.try_insert(&a, 1, 2.0, 0.7).unwrap().is_empty());
        assert!(f.try_insert(&a, 2, 3.0, 0.9).unwrap().is_empty());
        // dominated by (1.0, 0.5)
        assert!(f.try_insert(&a, 3, 1.5, 0.4).is_none());
        // dominates (2.0, 0.7) and (3.0, 0.9)
        assert_eq!(f.try_insert(&a, 4, 2.0, 0.95).unwrap(), vec![1, 2]);
        assert_eq!(f.labels, vec![0, 4]);
        assert!(f.try_insert(&a, 5, 0.5, 0.1).unwrap().is_empty());
        assert_eq!(f.labels, vec![5, 0, 4]);
        // exact duplicate is dominated
        assert!(f.try_insert(&a, 6, 2.0, 0.95).is_none());
    }
}
