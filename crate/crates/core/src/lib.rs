//! Cradle-to-farm-gate assessment of crop alternatives: profit margins,
//! GWP100 by life-cycle phase with soil carbon credits, and primary energy.

pub mod cli;
pub mod document;
pub mod economics;
pub mod factors;
pub mod farm;
pub mod fieldemit;
pub mod impact;
pub mod inventory;
pub mod quantity;
pub mod report;
pub mod soc;

/// Shipped example inputs.
pub mod fixtures {
    pub const FARM_SORIA: &str = include_str!("../data/farm_soria.cg");
    pub const FACTORS_CALIBRATED: &str = include_str!("../data/factors_calibrated.cg");
}
