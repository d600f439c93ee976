//! Shared fixtures for the criterion benches.

use socroute_core::models::{default_soc_grid, power_grid};
use socroute_core::simulator::{default_cell_profile, PulseProfile};
use socroute_core::{fit_linear, generate_instance, BatteryConfig, BatteryParams, GenConfig, Instance, LinearFit, OcvCurve};

/// Generated instance with the default generator settings.
pub fn instance(n: usize, seed: u64) -> Instance {
    generate_instance(n, seed, &GenConfig::default()).expect("default generator config is valid")
}

/// The default 18650 cell, its linear fit over 1..10 W and the depleting
/// cell profile.
pub struct CellSetup {
    pub curve: OcvCurve,
    pub params: BatteryParams,
    pub fit: LinearFit,
    pub profile: PulseProfile,
}

pub fn cell_setup() -> CellSetup {
    let (curve, params) = BatteryConfig::default_18650().build().expect("default cell is valid");
    let fit = fit_linear(&curve, &params, &default_soc_grid(), &power_grid(1.0, 10.0, 9)).expect("fit");
    CellSetup {
        curve,
        params,
        fit,
        profile: default_cell_profile(),
    }
}
