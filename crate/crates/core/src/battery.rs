//! Battery parameters, the open-circuit-voltage lookup curve and the JSON
//! battery configuration format.
//!
//! SOC is always a fraction in `[0, 1]`. OCV tables in configuration files are
//! given per cell and scaled by the cell count when loaded, while resistances
//! are pack-level values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal voltage of a single lithium cell, used when a config omits `v_nom`.
pub const NOMINAL_CELL_VOLTAGE: f64 = 3.7;

/// Coulombs per milliamp-hour.
pub const COULOMBS_PER_MAH: f64 = 3.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("soc {soc} is outside the OCV table range [{min}, {max}]")]
    SocOutOfRange { soc: f64, min: f64, max: f64 },
    #[error("invalid OCV curve: {0}")]
    InvalidCurve(String),
    #[error("invalid battery parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("malformed battery config: {0}")]
    Parse(String),
}

/// Monotone SOC to open-circuit-voltage table with piecewise-linear
/// interpolation. No extrapolation outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct OcvCurve {
    knots: Vec<(f64, f64)>,
}

impl OcvCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, BatteryError> {
        if knots.len() < 2 {
            return Err(BatteryError::InvalidCurve(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        for (i, &(soc, ocv)) in knots.iter().enumerate() {
            if !soc.is_finite() || !(0.0..=1.0).contains(&soc) {
                return Err(BatteryError::InvalidCurve(format!(
                    "knot {i}: soc {soc} not in [0, 1]"
                )));
            }
            if !ocv.is_finite() || ocv <= 0.0 {
                return Err(BatteryError::InvalidCurve(format!(
                    "knot {i}: ocv {ocv} must be positive"
                )));
            }
        }
        for (i, pair) in knots.windows(2).enumerate() {
            let ((s0, v0), (s1, v1)) = (pair[0], pair[1]);
            if s1 <= s0 {
                return Err(BatteryError::InvalidCurve(format!(
                    "knot {}: soc must be strictly increasing ({s0} then {s1})",
                    i + 1
                )));
            }
            if v1 < v0 {
                return Err(BatteryError::InvalidCurve(format!(
                    "knot {}: ocv must be non-decreasing ({v0} then {v1})",
                    i + 1
                )));
            }
        }
        Ok(Self { knots })
    }

    /// Curve with the same OCV at every SOC in `[0, 1]`.
    pub fn flat(volts: f64) -> Result<Self, BatteryError> {
        Self::new(vec![(0.0, volts), (1.0, volts)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn soc_range(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    pub fn contains(&self, soc: f64) -> bool {
        let (lo, hi) = self.soc_range();
        soc >= lo && soc <= hi
    }

    /// Interpolated open-circuit voltage at `soc`.
    pub fn ocv_at(&self, soc: f64) -> Result<f64, BatteryError> {
        let (min, max) = self.soc_range();
        if !(soc >= min && soc <= max) {
            return Err(BatteryError::SocOutOfRange { soc, min, max });
        }
        // first knot with knot.soc >= soc
        let idx = self.knots.partition_point(|&(s, _)| s < soc);
        let (s1, v1) = self.knots[idx];
        if s1 == soc || idx == 0 {
            return Ok(v1);
        }
        let (s0, v0) = self.knots[idx - 1];
        let w = (soc - s0) / (s1 - s0);
        // clamp guards against rounding pushing the result past a knot value
        Ok((v0 + w * (v1 - v0)).clamp(v0, v1))
    }

    /// Multiplies every voltage by `factor` (series cell stacking).
    pub fn scaled(&self, factor: f64) -> Result<Self, BatteryError> {
        Self::new(self.knots.iter().map(|&(s, v)| (s, v * factor)).collect())
    }
}

impl TryFrom<Vec<(f64, f64)>> for OcvCurve {
    type Error = BatteryError;

    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(knots)
    }
}

impl From<OcvCurve> for Vec<(f64, f64)> {
    fn from(curve: OcvCurve) -> Self {
        curve.knots
    }
}

/// Electrical parameters shared by all SOC-update models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Maximum charge in coulombs.
    pub capacity_coulombs: f64,
    /// Series (ohmic) internal resistance, ohms.
    pub r0: f64,
    /// RC branch resistance, ohms.
    pub r1: f64,
    /// RC branch time constant, seconds.
    pub tau: f64,
    /// Nominal voltage used by the constant-voltage model, volts.
    pub v_nom: f64,
    /// Upper SOC bound enforced along a path.
    #[serde(default = "default_soc_max")]
    pub soc_max: f64,
}

fn default_soc_max() -> f64 {
    1.0
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), BatteryError> {
        fn bad(field: &'static str, reason: &str) -> Result<(), BatteryError> {
            Err(BatteryError::InvalidParam {
                field,
                reason: reason.to_owned(),
            })
        }
        if !(self.capacity_coulombs.is_finite() && self.capacity_coulombs > 0.0) {
            return bad("capacity", "must be positive");
        }
        if !(self.r0.is_finite() && self.r0 >= 0.0) {
            return bad("r0_ohm", "must be non-negative");
        }
        if !(self.r1.is_finite() && self.r1 >= 0.0) {
            return bad("r1_ohm", "must be non-negative");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau_s", "must be positive");
        }
        if !(self.v_nom.is_finite() && self.v_nom > 0.0) {
            return bad("v_nom", "must be positive");
        }
        if !(self.soc_max > 0.0 && self.soc_max <= 1.0) {
            return bad("soc_max", "must lie in (0, 1]");
        }
        Ok(())
    }

    /// Same battery with the RC branch folded into the series resistance.
    /// Under a constant load held for many time constants the relaxation
    /// voltage settles at R1·I, so the pack behaves like an Ohmic cell with
    /// resistance R0 + R1. Fitting against this gives the linear model the
    /// resistance it actually sees on long legs.
    pub fn steady_state(&self) -> BatteryParams {
        BatteryParams {
            r0: self.r0 + self.r1,
            r1: 0.0,
            ..*self
        }
    }
}

/// Dynamic model state carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocState {
    pub soc: f64,
    /// RC branch voltage; stays zero for models without an RC branch.
    pub u_hysteresis: f64,
}

impl SocState {
    pub fn new(soc: f64) -> Self {
        Self {
            soc,
            u_hysteresis: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.soc) && self.u_hysteresis.is_finite()
    }
}

/// On-disk battery description. See `configs/` for examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    #[serde(rename = "capacity_mAh")]
    pub capacity_mah: f64,
    pub r0_ohm: f64,
    pub r1_ohm: f64,
    pub tau_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_nom: Option<f64>,
    #[serde(default = "default_cells")]
    pub cells: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc_max: Option<f64>,
    /// Per-cell `[soc, volts]` pairs.
    pub ocv: Vec<(f64, f64)>,
}

fn default_cells() -> u32 {
    1
}

impl BatteryConfig {
    /// Validates the document and builds the pack-level curve and parameters.
    pub fn build(&self) -> Result<(OcvCurve, BatteryParams), BatteryError> {
        if self.cells == 0 {
            return Err(BatteryError::InvalidParam {
                field: "cells",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.capacity_mah.is_finite() && self.capacity_mah > 0.0) {
            return Err(BatteryError::InvalidParam {
                field: "capacity_mAh",
                reason: "must be positive".into(),
            });
        }
        let cells = f64::from(self.cells);
        let curve = OcvCurve::new(self.ocv.clone())
            .and_then(|c| c.scaled(cells))
            .map_err(|e| match e {
                BatteryError::InvalidCurve(msg) => BatteryError::InvalidParam {
                    field: "ocv",
                    reason: msg,
                },
                other => other,
            })?;
        let params = BatteryParams {
            capacity_coulombs: self.capacity_mah * COULOMBS_PER_MAH,
            r0: self.r0_ohm,
            r1: self.r1_ohm,
            tau: self.tau_s,
            v_nom: self.v_nom.unwrap_or(NOMINAL_CELL_VOLTAGE * cells),
            soc_max: self.soc_max.unwrap_or(1.0),
        };
        params.validate()?;
        Ok((curve, params))
    }

    /// Synthetic single 18650 cell, 2500 mAh.
    pub fn default_18650() -> Self {
        Self {
            capacity_mah: 2500.0,
            r0_ohm: 0.05,
            r1_ohm: 0.02,
            tau_s: 30.0,
            v_nom: Some(3.7),
            cells: 1,
            soc_max: None,
            ocv: synthetic_cell_ocv(),
        }
    }

    /// Synthetic 4S 5000 mAh LiPo pack.
    pub fn default_lipo_4s() -> Self {
        Self {
            capacity_mah: 5000.0,
            r0_ohm: 0.02,
            r1_ohm: 0.01,
            tau_s: 20.0,
            v_nom: None,
            cells: 4,
            soc_max: None,
            ocv: synthetic_cell_ocv(),
        }
    }
}

/// Synthetic 11-knot single-cell lithium-ion OCV table (3.0 V empty, 4.2 V
/// full, steep knee below 20% SOC). Not measured data.
pub fn synthetic_cell_ocv() -> Vec<(f64, f64)> {
    vec![
        (0.0, 3.00),
        (0.1, 3.45),
        (0.2, 3.60),
        (0.3, 3.68),
        (0.4, 3.74),
        (0.5, 3.79),
        (0.6, 3.85),
        (0.7, 3.93),
        (0.8, 4.01),
        (0.9, 4.10),
        (1.0, 4.20),
    ]
}

/// Parses and validates a JSON battery configuration.
pub fn load_battery_config(text: &str) -> Result<(OcvCurve, BatteryParams), BatteryError> {
    parse_battery_config(text)?.build()
}

pub fn parse_battery_config(text: &str) -> Result<BatteryConfig, BatteryError> {
    serde_json::from_str(text).map_err(|e| BatteryError::Parse(e.to_string()))
}
