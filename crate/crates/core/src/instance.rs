//! Battery-constrained shortest path instances: random generation on a
//! k-nearest-neighbour graph and JSON persistence.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{BatteryConfig, BatteryError, BatteryParams};
use crate::models::{default_soc_grid, fit_linear, power_grid, LinearFit, ModelError};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid instance: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// Directed edge with travel cost, constant power draw (W) and duration (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub power: f64,
    pub time: f64,
}

/// How an instance was produced, embedded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n: usize,
    pub seed: u64,
    pub gen_config: GenConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Node ids must be the dense range `0..nodes.len()` in order.
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub start: usize,
    pub goal: usize,
    pub battery: BatteryParams,
    /// SOC at the start node.
    pub soc0: f64,
    pub fit: LinearFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Instance {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let n = self.nodes.len();
        if n < 2 {
            return Err(invalid("nodes", "need at least 2 nodes"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(invalid(
                    format!("nodes[{i}].id"),
                    format!("expected dense id {i}, found {}", node.id),
                ));
            }
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(invalid(format!("nodes[{i}]"), "non-finite coordinate"));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            let field = |f: &str| format!("edges[{i}].{f}");
            if e.from >= n {
                return Err(invalid(field("from"), format!("unknown node id {}", e.from)));
            }
            if e.to >= n {
                return Err(invalid(field("to"), format!("unknown node id {}", e.to)));
            }
            if e.from == e.to {
                return Err(invalid(field("to"), "self-loop"));
            }
            if !seen.insert((e.from, e.to)) {
                return Err(invalid(field("to"), format!("duplicate edge {} -> {}", e.from, e.to)));
            }
            if !(e.cost.is_finite() && e.cost > 0.0) {
                return Err(invalid(field("cost"), "must be positive"));
            }
            if !(e.power.is_finite() && e.power >= 0.0) {
                return Err(invalid(field("power"), "must be non-negative"));
            }
            if !(e.time.is_finite() && e.time > 0.0) {
                return Err(invalid(field("time"), "must be positive"));
            }
        }
        if self.start >= n {
            return Err(invalid("start", format!("unknown node id {}", self.start)));
        }
        if self.goal >= n {
            return Err(invalid("goal", format!("unknown node id {}", self.goal)));
        }
        if self.start == self.goal {
            return Err(invalid("goal", "start and goal must differ"));
        }
        self.battery.validate()?;
        if !(self.soc0 >= 0.0 && self.soc0 <= self.battery.soc_max) {
            return Err(invalid("soc0", format!("must lie in [0, {}]", self.battery.soc_max)));
        }
        let f = &self.fit;
        if ![f.a, f.b, f.c].iter().all(|v| v.is_finite()) {
            return Err(invalid("fit", "non-finite coefficient"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, InstanceError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: Self = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    std::fs::write(path, instance.to_json()?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    Instance::from_json(&std::fs::read_to_string(path)?)
}

/// Parameters of the random instance generator. Distances are metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Side of the square the nodes are placed in.
    pub extent: f64,
    /// Cruise speed used to turn edge length into traversal time.
    pub speed: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub neighbors: usize,
    pub soc0: f64,
    pub battery: BatteryConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            extent: 10_000.0,
            speed: 20.0,
            p_min: 200.0,
            p_max: 600.0,
            neighbors: 4,
            soc0: 1.0,
            battery: BatteryConfig::default_lipo_4s(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), InstanceError> {
        let bad = |m: &str| Err(InstanceError::Config(m.to_owned()));
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return bad("extent must be positive");
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad("speed must be positive");
        }
        if !(self.p_min >= 0.0 && self.p_max >= self.p_min && self.p_max.is_finite()) {
            return bad("power range must satisfy 0 <= p_min <= p_max");
        }
        if self.neighbors == 0 {
            return bad("neighbors must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.soc0) {
            return bad("soc0 must lie in [0, 1]");
        }
        Ok(())
    }

    /// Linear fit of the configured battery over the configured power band.
    pub fn fit(&self) -> Result<(BatteryParams, LinearFit), InstanceError> {
        let (curve, params) = self.battery.build()?;
        let powers = if self.p_max > self.p_min {
            power_grid(self.p_min, self.p_max, 10)
        } else {
            // a degenerate band still needs two distinct powers to fit
            power_grid(0.0, self.p_max.max(1.0), 10)
        };
        let fit = fit_linear(&curve, &params, &default_soc_grid(), &powers)?;
        Ok((params, fit))
    }
}

/// Random instance: `n` nodes uniform in the square, each joined to its
/// `neighbors` nearest nodes in both directions. Edge cost is Euclidean
/// length, time is length over speed, and power is uniform in the configured
/// band (shared by an edge and its reverse). Start and goal are the nodes
/// nearest the origin corner and the opposite corner.
pub fn generate_instance(n: usize, seed: u64, config: &GenConfig) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::Config(format!("need at least 2 nodes, got {n}")));
    }
    config.validate()?;
    let (battery, fit) = config.fit()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nodes: Vec<Node> = (0..n)
        .map(|id| Node {
            id,
            x: rng.random::<f64>() * config.extent,
            y: rng.random::<f64>() * config.extent,
        })
        .collect();
    let dist = |a: usize, b: usize| (nodes[a].x - nodes[b].x).hypot(nodes[a].y - nodes[b].y);

    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist(i, a).total_cmp(&dist(i, b)).then(a.cmp(&b)));
        for &j in others.iter().take(config.neighbors) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }

    let mut edges = Vec::with_capacity(2 * pairs.len());
    for &(i, j) in &pairs {
        let power = if config.p_max > config.p_min {
            rng.random_range(config.p_min..=config.p_max)
        } else {
            config.p_min
        };
        let d = dist(i, j);
        let time = d / config.speed;
        edges.push(Edge { from: i, to: j, cost: d, power, time });
        edges.push(Edge { from: j, to: i, cost: d, power, time });
    }
    edges.sort_by_key(|e| (e.from, e.to));

    let nearest = |x: f64, y: f64, skip: Option<usize>| {
        (0..n)
            .filter(|&i| Some(i) != skip)
            .min_by(|&a, &b| {
                let da = (nodes[a].x - x).hypot(nodes[a].y - y);
                let db = (nodes[b].x - x).hypot(nodes[b].y - y);
                da.total_cmp(&db)
            })
            .expect("at least two nodes")
    };
    let start = nearest(0.0, 0.0, None);
    let goal = nearest(config.extent, config.extent, Some(start));

    let inst = Instance {
        nodes,
        edges,
        start,
        goal,
        battery,
        soc0: config.soc0,
        fit,
        provenance: Some(Provenance {
            n,
            seed,
            gen_config: config.clone(),
        }),
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_nodes_two_edges() {
        let inst = generate_instance(2, 1, &GenConfig::default()).unwrap();
        assert_eq!(inst.edges.len(), 2);
        assert_ne!(inst.start, inst.goal);
        assert!(generate_instance(1, 1, &GenConfig::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let a = generate_instance(25, 99, &GenConfig::default()).unwrap();
        let b = generate_instance(25, 99, &GenConfig::default()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_instance(25, 100, &GenConfig::default()).unwrap();
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn out_degree_at_least_k() {
        for seed in 0..5 {
            let inst = generate_instance(100, seed, &GenConfig::default()).unwrap();
            let mut deg = vec![0; 100];
            for e in &inst.edges {
                deg[e.from] += 1;
            }
            assert!(deg.iter().all(|&d| d >= 4), "seed {seed}");
        }
    }

    #[test]
    fn edge_attributes() {
        let cfg = GenConfig::default();
        let inst = generate_instance(30, 5, &cfg).unwrap();
        for e in &inst.edges {
            let (a, b) = (inst.nodes[e.from], inst.nodes[e.to]);
            assert!((e.cost - (a.x - b.x).hypot(a.y - b.y)).abs() < 1e-9);
            assert!((e.time - e.cost / cfg.speed).abs() < 1e-9);
            assert!(e.power >= cfg.p_min && e.power <= cfg.p_max);
            let rev = inst.edges.iter().find(|r| r.from == e.to && r.to == e.from).unwrap();
            assert_eq!(rev.power, e.power);
        }
    }

    #[test]
    fn json_round_trip_and_file() {
        let inst = generate_instance(12, 3, &GenConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap(), inst);
    }

    #[test]
    fn validation_errors_name_field() {
        let inst = generate_instance(6, 3, &GenConfig::default()).unwrap();

        let mut bad = inst.clone();
        bad.edges[0].time = 0.0;
        let err = Instance::from_json(&bad.to_json().unwrap()).unwrap_err().to_string();
        assert!(err.contains("edges[0].time"), "{err}");

        let mut bad = inst.clone();
        bad.edges[2].to = 42;
        let err = Instance::from_json(&bad.to_json().unwrap()).unwrap_err().to_string();
        assert!(err.contains("edges[2].to") && err.contains("42"), "{err}");

        let mut bad = inst.clone();
        bad.goal = bad.start;
        assert!(bad.validate().is_err());

        let mut bad = inst;
        let dup = bad.edges[0];
        bad.edges.push(dup);
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn generated_instances_valid(n in 2usize..40, seed in any::<u64>()) {
            let inst = generate_instance(n, seed, &GenConfig::default()).unwrap();
            prop_assert!(inst.validate().is_ok());
            prop_assert_eq!(inst.node_count(), n);
        }
    }
}
