//! LP-format export of the battery-constrained shortest path MILP.
//!
//! Variables are `x_i_j` (binary, one per directed edge) and `b_i`
//! (continuous SOC at node `i`). Each battery row has the big-M form
//!
//! ```text
//! b_j - s b_i + M x_i_j <= M - k (B P + C)
//! ```
//!
//! with `k = P t / C_m` and `s = 1 - A k`. The nominal model is the same row
//! with `s = 1` and `B P + C` replaced by `1 / V_nom`.

use std::fmt::Write;

use super::ResourceModel;
use crate::instance::{Edge, Instance};

const TERMS_PER_LINE: usize = 8;

/// Per-edge big-M: the smallest constant for which the row holds for every
/// `b_i, b_j` in `[0, soc_max]` when `x_i_j = 0`.
pub(crate) fn big_m(edge: &Edge, model: &ResourceModel, soc_max: f64, capacity: f64) -> f64 {
    let at_empty = model.drop(0.0, edge.power, edge.time, capacity);
    let at_full = model.drop(soc_max, edge.power, edge.time, capacity);
    (soc_max + at_empty).max(at_full).max(0.0)
}

fn x(e: &Edge) -> String {
    format!("x_{}_{}", e.from, e.to)
}

fn term(out: &mut String, first: bool, coef: f64, var: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {var}", -coef);
    } else if first {
        let _ = write!(out, " {coef} {var}");
    } else {
        let _ = write!(out, " + {coef} {var}");
    }
}

/// Writes `name: terms [sense rhs]`, wrapping long sums onto continuation
/// lines. The objective row has no constraint part.
fn row(out: &mut String, name: &str, terms: &[(f64, String)], constraint: Option<(&str, f64)>) {
    let _ = write!(out, " {name}:");
    for (k, (coef, var)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        term(out, k == 0, *coef, var);
    }
    if terms.is_empty() {
        // LP rows need at least one variable; b_0 always exists
        out.push_str(" 0 b_0");
    }
    match constraint {
        Some((sense, rhs)) => {
            let _ = writeln!(out, " {sense} {rhs}");
        }
        None => out.push('\n'),
    }
}

pub fn export_milp(instance: &Instance, model: &ResourceModel) -> String {
    let cap = instance.battery.capacity_coulombs;
    let soc_max = instance.battery.soc_max;
    let n = instance.node_count();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ battery-constrained shortest path, {} nodes, {} edges, {} model",
        n,
        instance.edges.len(),
        model.kind().name()
    );

    out.push_str("Minimize\n");
    let objective: Vec<(f64, String)> = instance.edges.iter().map(|e| (e.cost, x(e))).collect();
    row(&mut out, "cost", &objective, None);

    out.push_str("Subject To\n");
    let start_out: Vec<_> = instance
        .edges
        .iter()
        .filter(|e| e.from == instance.start)
        .map(|e| (1.0, x(e)))
        .collect();
    row(&mut out, "start", &start_out, Some(("=", 1.0)));
    let goal_in: Vec<_> = instance
        .edges
        .iter()
        .filter(|e| e.to == instance.goal)
        .map(|e| (1.0, x(e)))
        .collect();
    row(&mut out, "goal", &goal_in, Some(("=", 1.0)));
    for node in (0..n).filter(|&i| i != instance.start && i != instance.goal) {
        let terms: Vec<_> = instance
            .edges
            .iter()
            .filter_map(|e| {
                if e.from == node {
                    Some((1.0, x(e)))
                } else if e.to == node {
                    Some((-1.0, x(e)))
                } else {
                    None
                }
            })
            .collect();
        if !terms.is_empty() {
            row(&mut out, &format!("flow_{node}"), &terms, Some(("=", 0.0)));
        }
    }
    for e in &instance.edges {
        let k = e.power * e.time / cap;
        let (slope, inv_v) = match model {
            ResourceModel::Linear { fit } => (1.0 - fit.a * k, fit.b * e.power + fit.c),
            ResourceModel::Nominal { v_nom } => (1.0, 1.0 / v_nom),
        };
        let m = big_m(e, model, soc_max, cap);
        let terms = [
            (1.0, format!("b_{}", e.to)),
            (-slope, format!("b_{}", e.from)),
            (m, x(e)),
        ];
        row(&mut out, &format!("batt_{}_{}", e.from, e.to), &terms, Some(("<=", m - k * inv_v)));
    }

    out.push_str("Bounds\n");
    for i in 0..n {
        if i == instance.start {
            let _ = writeln!(out, " b_{i} = {}", instance.soc0);
        } else {
            let _ = writeln!(out, " 0 <= b_{i} <= {soc_max}");
        }
    }

    out.push_str("Binaries\n");
    for chunk in instance.edges.chunks(TERMS_PER_LINE) {
        let names: Vec<String> = chunk.iter().map(x).collect();
        let _ = writeln!(out, " {}", names.join(" "));
    }
    out.push_str("End\n");
    out
}
