//! SOC-update models: simple Ohmic drop, first-order RC, nominal voltage and
//! the linear (affine in SOC and power) model, plus the least-squares fit
//! that produces the linear model's coefficients.
//!
//! The nominal and linear models are single-step: they map a starting SOC and
//! one constant power draw to an ending SOC with one affine expression, which
//! is what makes them usable as MILP constraints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{BatteryError, BatteryParams, OcvCurve, SocState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("load of {power} W is infeasible at soc {soc} (terminal voltage has no real positive solution)")]
    InfeasibleLoad { soc: f64, power: f64 },
    #[error("(soc {soc}, power {power} W) lies outside the fit domain {domain:?}")]
    OutsideFitDomain {
        soc: f64,
        power: f64,
        domain: FitDomain,
    },
    #[error("invalid power draw: {0}")]
    InvalidDraw(String),
    #[error("linear fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

/// Constant power drawn for a fixed duration. Positive power drains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDraw {
    #[serde(rename = "power_w")]
    pub power: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
}

impl PowerDraw {
    pub fn new(power: f64, duration: f64) -> Self {
        Self { power, duration }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(ModelError::InvalidDraw(format!(
                "power {} must be finite and non-negative",
                self.power
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ModelError::InvalidDraw(format!(
                "duration {} must be positive",
                self.duration
            )));
        }
        Ok(())
    }
}

/// Terminal voltage of a source with EMF `emf` behind resistance `r0`
/// delivering `power`: the larger root of `V^2 - emf*V + power*r0 = 0`.
pub(crate) fn loaded_voltage(emf: f64, power: f64, r0: f64) -> Option<f64> {
    let disc = emf * emf - 4.0 * power * r0;
    if !(disc >= 0.0) || emf <= 0.0 {
        return None;
    }
    Some((emf + disc.sqrt()) / 2.0)
}

/// Terminal voltage under the simple Ohmic-drop model at constant power.
pub fn ohmic_voltage(
    soc: f64,
    power: f64,
    curve: &OcvCurve,
    params: &BatteryParams,
) -> Result<f64, ModelError> {
    if !(power >= 0.0) {
        return Err(ModelError::InvalidDraw(format!("power {power} must be non-negative")));
    }
    let ocv = curve.ocv_at(soc)?;
    loaded_voltage(ocv, power, params.r0).ok_or(ModelError::InfeasibleLoad { soc, power })
}

/// Result of one RC-model step, including the terminal quantities at the
/// start of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcStep {
    pub next: SocState,
    pub voltage: f64,
    pub current: f64,
}

/// Advances the first-order RC model by one step of `draw.duration`.
pub fn rc_step(
    state: SocState,
    draw: PowerDraw,
    curve: &OcvCurve,
    params: &BatteryParams,
) -> Result<SocState, ModelError> {
    rc_step_detailed(state, draw, curve, params).map(|s| s.next)
}

pub fn rc_step_detailed(
    state: SocState,
    draw: PowerDraw,
    curve: &OcvCurve,
    params: &BatteryParams,
) -> Result<RcStep, ModelError> {
    draw.validate()?;
    let infeasible = ModelError::InfeasibleLoad {
        soc: state.soc,
        power: draw.power,
    };
    let emf = curve.ocv_at(state.soc)? - state.u_hysteresis;
    let voltage = loaded_voltage(emf, draw.power, params.r0).ok_or(infeasible.clone())?;
    if voltage <= 0.0 {
        return Err(infeasible);
    }
    let current = draw.power / voltage;
    let decay = (-draw.duration / params.tau).exp();
    let next = SocState {
        soc: state.soc - current * draw.duration / params.capacity_coulombs,
        u_hysteresis: decay * state.u_hysteresis + params.r1 * (1.0 - decay) * current,
    };
    Ok(RcStep {
        next,
        voltage,
        current,
    })
}

/// Single-step constant-voltage update. May return a negative SOC.
pub fn nominal_delta(soc0: f64, draw: PowerDraw, params: &BatteryParams) -> f64 {
    soc0 - draw.power * (1.0 / params.v_nom) * draw.duration / params.capacity_coulombs
}

/// Single-step linear-model update. The inverse voltage is evaluated once at
/// the starting SOC and held for the whole draw.
pub fn linear_delta(
    soc0: f64,
    draw: PowerDraw,
    fit: &LinearFit,
    params: &BatteryParams,
) -> Result<f64, ModelError> {
    if !fit.domain.contains(soc0, draw.power) {
        return Err(ModelError::OutsideFitDomain {
            soc: soc0,
            power: draw.power,
            domain: fit.domain,
        });
    }
    Ok(soc0 - draw.power * fit.inverse_voltage(soc0, draw.power) * draw.duration / params.capacity_coulombs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDomain {
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl FitDomain {
    const SLACK: f64 = 1e-12;

    pub fn contains(&self, soc: f64, power: f64) -> bool {
        soc >= self.soc_min - Self::SLACK
            && soc <= self.soc_max + Self::SLACK
            && power >= self.p_min - Self::SLACK * self.p_max.abs().max(1.0)
            && power <= self.p_max + Self::SLACK * self.p_max.abs().max(1.0)
    }

    fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.soc_min, self.p_min),
            (self.soc_min, self.p_max),
            (self.soc_max, self.p_min),
            (self.soc_max, self.p_max),
        ]
    }
}

/// Coefficients of the plane `1/V ~= a*soc + b*power + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub domain: FitDomain,
    pub max_rel_residual: f64,
}

impl LinearFit {
    /// The fit that reduces the linear model to the nominal-voltage model.
    pub fn nominal(v_nom: f64) -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            c: 1.0 / v_nom,
            domain: FitDomain {
                soc_min: 0.0,
                soc_max: 1.0,
                p_min: 0.0,
                p_max: f64::MAX,
            },
            max_rel_residual: 0.0,
        }
    }

    #[inline]
    pub fn inverse_voltage(&self, soc: f64, power: f64) -> f64 {
        self.a * soc + self.b * power + self.c
    }

    /// Checks finiteness, domain ordering, a non-positive SOC slope and a
    /// positive predicted inverse voltage over the fit domain. The predicted
    /// value is affine, so checking the four domain corners suffices.
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = &self.domain;
        let finite = [self.a, self.b, self.c, self.max_rel_residual, d.soc_min, d.soc_max, d.p_min, d.p_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::Fit("non-finite coefficient or bound".into()));
        }
        if d.soc_min > d.soc_max || d.p_min > d.p_max {
            return Err(ModelError::Fit("fit domain bounds are reversed".into()));
        }
        if self.a > 1e-12 * self.c.abs() {
            return Err(ModelError::Fit(format!(
                "soc coefficient a = {} must not be positive",
                self.a
            )));
        }
        for (s, p) in d.corners() {
            if self.inverse_voltage(s, p) <= 0.0 {
                return Err(ModelError::Fit(format!(
                    "predicted inverse voltage is not positive at soc {s}, power {p}"
                )));
            }
        }
        Ok(())
    }
}

/// SOC grid `0.2, 0.25, ..., 1.0` used by default for fitting.
pub fn default_soc_grid() -> Vec<f64> {
    (20..=100).step_by(5).map(|k| f64::from(k) / 100.0).collect()
}

/// `steps + 1` evenly spaced powers from `p_min` to `p_max` inclusive.
pub fn power_grid(p_min: f64, p_max: f64, steps: usize) -> Vec<f64> {
    if steps == 0 || p_min == p_max {
        return vec![p_min];
    }
    (0..=steps)
        .map(|i| p_min + (p_max - p_min) * i as f64 / steps as f64)
        .collect()
}

/// Unweighted least-squares plane through `1/ohmic_voltage(S, P)` over the
/// Cartesian product of the two grids.
pub fn fit_linear(
    curve: &OcvCurve,
    params: &BatteryParams,
    soc_grid: &[f64],
    power_grid: &[f64],
) -> Result<LinearFit, ModelError> {
    if soc_grid.is_empty() || power_grid.is_empty() {
        return Err(ModelError::Fit("empty fit grid".into()));
    }
    let mut samples = Vec::with_capacity(soc_grid.len() * power_grid.len());
    for &s in soc_grid {
        for &p in power_grid {
            let v = ohmic_voltage(s, p, curve, params)?;
            samples.push((s, p, 1.0 / v));
        }
    }

    // Centered normal equations: the intercept decouples and leaves a 2x2
    // system in (a, b), which is far better conditioned than the raw 3x3 one
    // when power spans hundreds of watts.
    let n = samples.len() as f64;
    let (ms, mp, mz) = samples.iter().fold((0.0, 0.0, 0.0), |acc, &(s, p, z)| {
        (acc.0 + s / n, acc.1 + p / n, acc.2 + z / n)
    });
    let (mut sss, mut spp, mut ssp, mut ssz, mut spz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, p, z) in &samples {
        let (ds, dp, dz) = (s - ms, p - mp, z - mz);
        sss += ds * ds;
        spp += dp * dp;
        ssp += ds * dp;
        ssz += ds * dz;
        spz += dp * dz;
    }
    let det = sss * spp - ssp * ssp;
    if !(sss > 0.0 && spp > 0.0) || det <= 1e-12 * sss * spp {
        return Err(ModelError::Fit(format!(
            "normal equations are rank deficient ({} soc values x {} power values)",
            distinct(soc_grid),
            distinct(power_grid)
        )));
    }
    let a = (ssz * spp - spz * ssp) / det;
    let b = (spz * sss - ssz * ssp) / det;
    let c = mz - a * ms - b * mp;

    let max_rel_residual = samples
        .iter()
        .map(|&(s, p, z)| ((a * s + b * p + c) - z).abs() / z)
        .fold(0.0, f64::max);

    let bounds = |g: &[f64]| {
        g.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (soc_min, soc_max) = bounds(soc_grid);
    let (p_min, p_max) = bounds(power_grid);
    let fit = LinearFit {
        a,
        b,
        c,
        domain: FitDomain {
            soc_min,
            soc_max,
            p_min,
            p_max,
        },
        max_rel_residual,
    };
    fit.validate()?;
    Ok(fit)
}

fn distinct(grid: &[f64]) -> usize {
    let mut v = grid.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::BatteryConfig;
    use proptest::prelude::*;

    fn params(r0: f64) -> BatteryParams {
        BatteryParams {
            capacity_coulombs: 9000.0,
            r0,
            r1: 0.02,
            tau: 30.0,
            v_nom: 3.7,
            soc_max: 1.0,
        }
    }

    fn cell() -> (OcvCurve, BatteryParams) {
        BatteryConfig::default_18650().build().unwrap()
    }

    #[test]
    fn ohmic_zero_power_is_ocv() {
        let (curve, p) = cell();
        for s in [0.0, 0.13, 0.5, 1.0] {
            assert_eq!(ohmic_voltage(s, 0.0, &curve, &p).unwrap(), curve.ocv_at(s).unwrap());
        }
    }

    #[test]
    fn ohmic_root_identity() {
        // Independent root: the smaller root via the product of roots, then
        // the larger one from the sum. Both must satisfy the quadratic.
        let curve = OcvCurve::flat(4.0).unwrap();
        let p = params(0.1);
        let v = ohmic_voltage(0.5, 39.0, &curve, &p).unwrap();
        let residual = v * v - 4.0 * v + 39.0 * 0.1;
        assert!(residual.abs() < 1e-12, "residual {residual}");
        let small = 39.0 * 0.1 / v;
        assert!((small + v - 4.0).abs() < 1e-12);
        assert!(v > small);
    }

    #[test]
    fn ohmic_infeasible_load() {
        let curve = OcvCurve::flat(4.0).unwrap();
        let err = ohmic_voltage(0.5, 41.0, &curve, &params(0.1)).unwrap_err();
        assert!(matches!(err, ModelError::InfeasibleLoad { .. }));
    }

    #[test]
    fn rc_with_zero_r1_is_ohmic_euler() {
        let (curve, mut p) = cell();
        p.r1 = 0.0;
        let mut state = SocState::new(1.0);
        let mut euler = 1.0;
        for k in 0..200 {
            let draw = PowerDraw::new(2.0 + (k % 7) as f64, 30.0);
            state = rc_step(state, draw, &curve, &p).unwrap();
            let v = ohmic_voltage(euler, draw.power, &curve, &p).unwrap();
            euler -= draw.power / v * draw.duration / p.capacity_coulombs;
            assert_eq!(state.u_hysteresis, 0.0);
            assert!((state.soc - euler).abs() <= 1e-12 * euler.abs());
        }
    }

    #[test]
    fn rc_zero_power_decays_u() {
        let (curve, p) = cell();
        let state = SocState {
            soc: 0.7,
            u_hysteresis: 0.05,
        };
        let next = rc_step(state, PowerDraw::new(0.0, 12.0), &curve, &p).unwrap();
        assert_eq!(next.soc, 0.7);
        assert!((next.u_hysteresis - 0.05 * (-12.0f64 / 30.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn rc_u_converges_to_r1_times_current() {
        // R0 = 0 and a flat curve keep the current close to constant; a tiny
        // capacity drain keeps SOC inside the table.
        let curve = OcvCurve::flat(4.0).unwrap();
        let mut p = params(0.0);
        p.capacity_coulombs = 1e12;
        let mut state = SocState::new(1.0);
        let mut last = None;
        for _ in 0..1000 {
            let step = rc_step_detailed(state, PowerDraw::new(8.0, 1.0), &curve, &p).unwrap();
            state = step.next;
            last = Some(step.current);
        }
        let current = last.unwrap();
        assert!((state.u_hysteresis - p.r1 * current).abs() < 1e-9);
    }

    #[test]
    fn rc_settles_on_steady_state_ohmic_voltage() {
        let curve = OcvCurve::flat(4.0).unwrap();
        let mut p = params(0.05);
        p.capacity_coulombs = 1e12;
        let mut state = SocState::new(1.0);
        let mut voltage = 0.0;
        for _ in 0..2000 {
            let step = rc_step_detailed(state, PowerDraw::new(8.0, 1.0), &curve, &p).unwrap();
            state = step.next;
            voltage = step.voltage;
        }
        let dc = ohmic_voltage(1.0, 8.0, &curve, &p.steady_state()).unwrap();
        assert!((voltage - dc).abs() < 1e-9, "{voltage} vs {dc}");
    }

    #[test]
    fn nominal_examples() {
        let p = params(0.05);
        assert_eq!(nominal_delta(0.8, PowerDraw::new(0.0, 100.0), &p), 0.8);
        let full = PowerDraw::new(p.capacity_coulombs * p.v_nom / 50.0, 50.0);
        assert!(nominal_delta(1.0, full, &p).abs() < 1e-12);
        let out = nominal_delta(1.0, PowerDraw::new(37.0, 900.0), &p);
        assert!(out.abs() < 1e-12, "{out}");
    }

    #[test]
    fn linear_zero_power_and_domain() {
        let (curve, p) = cell();
        let fit = fit_linear(&curve, &p, &default_soc_grid(), &power_grid(1.0, 10.0, 9)).unwrap();
        assert_eq!(linear_delta(0.6, PowerDraw::new(0.0, 10.0), &fit, &p).ok(), None);
        let fit0 = LinearFit {
            domain: FitDomain { p_min: 0.0, ..fit.domain },
            ..fit
        };
        assert_eq!(linear_delta(0.6, PowerDraw::new(0.0, 10.0), &fit0, &p).unwrap(), 0.6);
        assert!(matches!(
            linear_delta(0.1, PowerDraw::new(5.0, 10.0), &fit, &p),
            Err(ModelError::OutsideFitDomain { .. })
        ));
    }

    #[test]
    fn linear_close_to_single_step_ohmic() {
        let (curve, p) = cell();
        let fit = fit_linear(&curve, &p, &default_soc_grid(), &power_grid(1.0, 10.0, 9)).unwrap();
        for &s in &[0.25, 0.43, 0.6, 0.77, 0.95] {
            for &pw in &[1.5, 4.0, 9.5] {
                let draw = PowerDraw::new(pw, 120.0);
                let lin = linear_delta(s, draw, &fit, &p).unwrap();
                let v = ohmic_voltage(s, pw, &curve, &p).unwrap();
                let oracle = s - pw * draw.duration / (v * p.capacity_coulombs);
                assert!(((s - lin) - (s - oracle)).abs() <= 0.02 * (s - oracle));
            }
        }
    }

    #[test]
    fn fit_flat_lossless() {
        let curve = OcvCurve::flat(3.7).unwrap();
        let fit = fit_linear(&curve, &params(0.0), &default_soc_grid(), &power_grid(1.0, 10.0, 10)).unwrap();
        assert!(fit.a.abs() < 1e-12 && fit.b.abs() < 1e-12);
        assert!((fit.c - 1.0 / 3.7).abs() < 1e-12);
        assert!(fit.max_rel_residual < 1e-12);
    }

    #[test]
    fn fit_flat_with_resistance_matches_1d_regression() {
        let curve = OcvCurve::flat(3.7).unwrap();
        let p = params(0.1);
        let pg = power_grid(1.0, 10.0, 10);
        let fit = fit_linear(&curve, &p, &default_soc_grid(), &pg).unwrap();
        assert!(fit.a.abs() < 1e-12);
        // 1-D least squares in P
        let z: Vec<f64> = pg.iter().map(|&w| 1.0 / ohmic_voltage(0.5, w, &curve, &p).unwrap()).collect();
        let n = pg.len() as f64;
        let (mx, mz) = (pg.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
        let sxy: f64 = pg.iter().zip(&z).map(|(x, y)| (x - mx) * (y - mz)).sum();
        let sxx: f64 = pg.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((fit.b - slope).abs() < 1e-12);
        assert!((fit.c - (mz - slope * mx)).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let (curve, p) = cell();
        assert!(matches!(fit_linear(&curve, &p, &[0.5], &[2.0]), Err(ModelError::Fit(_))));
        assert!(matches!(fit_linear(&curve, &p, &[], &[2.0]), Err(ModelError::Fit(_))));
        let weak = OcvCurve::flat(4.0).unwrap();
        assert!(matches!(
            fit_linear(&weak, &params(0.1), &[0.5, 0.6], &[1.0, 41.0]),
            Err(ModelError::InfeasibleLoad { power, .. }) if power == 41.0
        ));
    }

    #[test]
    fn fit_json_shape() {
        let fit = LinearFit::nominal(3.7);
        let v: serde_json::Value = serde_json::to_value(fit).unwrap();
        for key in ["a", "b", "c", "domain", "max_rel_residual"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: LinearFit = serde_json::from_value(v).unwrap();
        assert_eq!(back, fit);
    }

    proptest! {
        #[test]
        fn ohmic_bounded_by_ocv(s in 0.0f64..=1.0, pw in 0.0f64..20.0) {
            let (curve, p) = cell();
            let v = ohmic_voltage(s, pw, &curve, &p).unwrap();
            let ocv = curve.ocv_at(s).unwrap();
            prop_assert!(v <= ocv);
            if pw > 0.0 { prop_assert!(v < ocv); }
        }

        #[test]
        fn ohmic_monotone(s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0, p1 in 0.0f64..20.0, p2 in 0.0f64..20.0) {
            let (curve, p) = cell();
            let (slo, shi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(ohmic_voltage(shi, plo, &curve, &p).unwrap() >= ohmic_voltage(shi, phi, &curve, &p).unwrap());
            prop_assert!(ohmic_voltage(shi, plo, &curve, &p).unwrap() >= ohmic_voltage(slo, plo, &curve, &p).unwrap());
        }

        #[test]
        fn all_models_discharge(s in 0.25f64..=1.0, pw in 1.0f64..10.0, dt in 1.0f64..60.0) {
            let (curve, p) = cell();
            let draw = PowerDraw::new(pw, dt);
            let fit = fit_linear(&curve, &p, &default_soc_grid(), &power_grid(1.0, 10.0, 9)).unwrap();
            prop_assert!(nominal_delta(s, draw, &p) < s);
            prop_assert!(linear_delta(s, draw, &fit, &p).unwrap() < s);
            prop_assert!(rc_step(SocState::new(s), draw, &curve, &p).unwrap().soc < s);
            let v = ohmic_voltage(s, pw, &curve, &p).unwrap();
            prop_assert!(s - pw / v * dt / p.capacity_coulombs < s);
        }

        #[test]
        fn nominal_fit_bit_identical(s in 0.0f64..=1.0, pw in 0.0f64..1000.0, dt in 0.001f64..10_000.0) {
            let p = params(0.05);
            let draw = PowerDraw::new(pw, dt);
            let lin = linear_delta(s, draw, &LinearFit::nominal(p.v_nom), &p).unwrap();
            prop_assert_eq!(lin.to_bits(), nominal_delta(s, draw, &p).to_bits());
        }
    }
}
