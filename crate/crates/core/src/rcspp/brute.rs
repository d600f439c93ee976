//! Exhaustive enumeration of simple start-to-goal paths. Only usable on
//! small instances; serves as the reference the other solvers are tested
//! against.

use super::{extend, Adjacency, Deadline, PathSolution, ResourceModel, SolveError, SolveOptions};
use crate::instance::Instance;

const NAME: &str = "brute";

pub const DEFAULT_BRUTEFORCE_MAX_NODES: usize = 15;

pub fn solve_bruteforce(instance: &Instance, model: &ResourceModel) -> Result<PathSolution, SolveError> {
    super::solve(super::SolverKind::Brute, instance, model, &SolveOptions::default())
}

struct Search<'a> {
    instance: &'a Instance,
    model: &'a ResourceModel,
    adj: Adjacency,
    deadline: &'a Deadline,
    visited: Vec<bool>,
    path: Vec<(usize, f64)>,
    best: Option<(f64, Vec<(usize, f64)>)>,
    calls: u64,
}

impl Search<'_> {
    fn visit(&mut self, node: usize, cost: f64, soc: f64) -> Result<(), SolveError> {
        self.calls += 1;
        if self.deadline.expired() {
            return Err(SolveError::Timeout { expanded: self.calls });
        }
        self.path.push((node, soc));
        if node == self.instance.goal {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.path.clone()));
            }
        } else {
            self.visited[node] = true;
            let cap = self.instance.battery.capacity_coulombs;
            for k in 0..self.adj.out[node].len() {
                let edge = self.instance.edges[self.adj.out[node][k]];
                if self.visited[edge.to] {
                    continue;
                }
                if let Some(next) = extend(soc, &edge, self.model, cap) {
                    self.visit(edge.to, cost + edge.cost, next)?;
                }
            }
            self.visited[node] = false;
        }
        self.path.pop();
        Ok(())
    }
}

pub(crate) fn solve(
    instance: &Instance,
    model: &ResourceModel,
    max_nodes: usize,
    deadline: &Deadline,
) -> Result<PathSolution, SolveError> {
    instance.validate()?;
    if instance.node_count() > max_nodes {
        return Err(SolveError::TooLarge {
            nodes: instance.node_count(),
            max: max_nodes,
        });
    }
    let mut search = Search {
        instance,
        model,
        adj: Adjacency::new(instance),
        deadline,
        visited: vec![false; instance.node_count()],
        path: Vec::new(),
        best: None,
        calls: 0,
    };
    search.visit(instance.start, 0.0, instance.soc0)?;
    Ok(match search.best {
        Some((cost, path)) => PathSolution::optimal(NAME, model.kind(), path, cost, search.calls),
        None => PathSolution::infeasible(NAME, model.kind(), search.calls),
    })
}
