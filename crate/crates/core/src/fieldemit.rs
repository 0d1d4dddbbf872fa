//! Direct field emissions: N2O from nitrogen inputs and exhaust gases from
//! diesel burned by machinery.

use serde::Serialize;
use thiserror::Error;

/// Mass ratio N2O / N2O-N.
pub const N2O_PER_N2O_N: f64 = 44.0 / 28.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldEmitError {
    #[error("{what} must be non-negative, got {value}")]
    Negative { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct N2OParams {
    /// Fraction of applied N emitted directly as N2O-N.
    pub ef_direct: f64,
    /// N returned by crop residues, kg N/ha·y.
    pub residue_n_kg: f64,
    /// Fraction of applied N volatilized as NH3.
    pub nh3_loss_fraction: f64,
    /// Fraction of volatilized N later emitted as N2O-N.
    pub ef_indirect_nh3: f64,
    /// Published total, Mg N2O/ha·y. Wins over the parametric model.
    pub override_total_mg: Option<f64>,
}

impl Default for N2OParams {
    fn default() -> Self {
        N2OParams {
            ef_direct: 0.01,
            residue_n_kg: 0.0,
            nh3_loss_fraction: 0.10,
            ef_indirect_nh3: 0.01,
            override_total_mg: None,
        }
    }
}

fn non_negative(what: &'static str, value: f64) -> Result<(), FieldEmitError> {
    if value < 0.0 || value.is_nan() {
        return Err(FieldEmitError::Negative { what, value });
    }
    Ok(())
}

fn parametric_kg(n_applied_kg: f64, p: &N2OParams) -> f64 {
    N2O_PER_N2O_N
        * (p.ef_direct * (n_applied_kg + p.residue_n_kg)
            + p.ef_indirect_nh3 * p.nh3_loss_fraction * n_applied_kg)
}

/// N2O emitted, kg/ha·y, for `n_applied_kg` kg N/ha·y of fertilizer N.
pub fn n2o_field_emissions_kg(n_applied_kg: f64, p: &N2OParams) -> Result<f64, FieldEmitError> {
    non_negative("applied nitrogen", n_applied_kg)?;
    Ok(match p.override_total_mg {
        Some(mg) => mg * 1000.0,
        None => parametric_kg(n_applied_kg, p),
    })
}

/// N2O emitted, Mg/ha·y.
pub fn n2o_field_emissions(n_applied_kg: f64, p: &N2OParams) -> Result<f64, FieldEmitError> {
    non_negative("applied nitrogen", n_applied_kg)?;
    Ok(match p.override_total_mg {
        Some(mg) => mg,
        None => parametric_kg(n_applied_kg, p) / 1000.0,
    })
}

/// Exhaust gases per litre of diesel burned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExhaustFactors {
    pub co2_kg_per_l: f64,
    pub ch4_g_per_l: f64,
    pub n2o_g_per_l: f64,
}

impl Default for ExhaustFactors {
    /// 0.835 kg/L diesel at 86.2 % carbon, fully oxidized: ~2.64 kg CO2/L.
    fn default() -> Self {
        ExhaustFactors {
            co2_kg_per_l: 2.64,
            ch4_g_per_l: 0.0,
            n2o_g_per_l: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ExhaustGases {
    pub co2_kg: f64,
    pub ch4_kg: f64,
    pub n2o_kg: f64,
}

pub fn exhaust_emissions(diesel_l: f64, f: &ExhaustFactors) -> Result<ExhaustGases, FieldEmitError> {
    non_negative("diesel", diesel_l)?;
    Ok(ExhaustGases {
        co2_kg: diesel_l * f.co2_kg_per_l,
        ch4_kg: diesel_l * f.ch4_g_per_l / 1000.0,
        n2o_kg: diesel_l * f.n2o_g_per_l / 1000.0,
    })
}
