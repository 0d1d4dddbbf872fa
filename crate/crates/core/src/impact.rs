//! Characterization of an inventory into GWP100 and primary energy by phase.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::factors::{FactorDb, FactorError, LookupMode};
use crate::inventory::{Flow, FlowKind, Inventory, Phase};
use crate::quantity::{BaseUnit, QuantityError, Unit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImpactError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("flow `{flow}`: {source}")]
    Unit { flow: String, source: QuantityError },
    #[error("{0} total is zero; shares are undefined")]
    ZeroDenominator(&'static str),
}

/// Primary energy of one phase, GJ/ha·y.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Energy {
    pub renewable: f64,
    pub nonrenewable: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.renewable + self.nonrenewable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactResult {
    pub crop: String,
    /// Mg CO2-eq/ha·y per phase; every phase is present.
    pub gwp: BTreeMap<Phase, f64>,
    /// Sum over all phases except the SOC change.
    pub positive_total: f64,
    pub net_total: f64,
    /// GJ/ha·y per phase; every phase is present.
    pub energy: BTreeMap<Phase, Energy>,
    pub energy_renewable: f64,
    pub energy_nonrenewable: f64,
    pub energy_total: f64,
    /// Flows cut off for lack of a factor.
    pub warnings: Vec<String>,
}

/// Percentages per phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseShares {
    /// Share of the positive GWP total; the SOC phase is excluded.
    pub gwp: BTreeMap<Phase, f64>,
    /// Share of the total primary energy.
    pub energy: BTreeMap<Phase, f64>,
    pub renewable: f64,
}

fn value_in(flow: &Flow, unit: &Unit) -> Result<f64, ImpactError> {
    flow.amount.value_in(unit).map_err(|source| ImpactError::Unit {
        flow: flow.id.clone(),
        source,
    })
}

fn empty<T: Default>() -> BTreeMap<Phase, T> {
    Phase::ALL.into_iter().map(|p| (p, T::default())).collect()
}

/// GWP per phase, Mg CO2-eq/ha·y, and cut-off warnings.
pub fn characterize_gwp(
    inv: &Inventory,
    db: &FactorDb,
    mode: LookupMode,
) -> Result<(BTreeMap<Phase, f64>, Vec<String>), ImpactError> {
    let kg = Unit::base(BaseUnit::Kg);
    let mg = Unit::base(BaseUnit::Mg);
    let mut out = empty::<f64>();
    let mut warnings = Vec::new();
    for f in &inv.flows {
        let mg_co2eq = match f.kind {
            FlowKind::Background => {
                let l = db.lookup(&f.id, mode)?;
                if let Some(w) = l.warning {
                    warnings.push(w);
                    continue;
                }
                value_in(f, &l.record.unit)? * l.record.gwp100 / 1000.0
            }
            FlowKind::Gas(g) => value_in(f, &kg)? * db.gas_gwp(g) / 1000.0,
            FlowKind::SocCo2 => value_in(f, &mg)?,
        };
        *out.get_mut(&f.phase).expect("all phases present") += mg_co2eq;
    }
    Ok((out, warnings))
}

/// Primary energy per phase, GJ/ha·y. Gases and soil CO2 carry no energy.
pub fn characterize_energy(
    inv: &Inventory,
    db: &FactorDb,
    mode: LookupMode,
) -> Result<(BTreeMap<Phase, Energy>, Vec<String>), ImpactError> {
    let mut out = empty::<Energy>();
    let mut warnings = Vec::new();
    for f in inv.flows.iter().filter(|f| f.kind == FlowKind::Background) {
        let l = db.lookup(&f.id, mode)?;
        if let Some(w) = l.warning {
            warnings.push(w);
            continue;
        }
        let amount = value_in(f, &l.record.unit)?;
        let e = out.get_mut(&f.phase).expect("all phases present");
        e.renewable += amount * l.record.pe_renewable / 1000.0;
        e.nonrenewable += amount * l.record.pe_nonrenewable / 1000.0;
    }
    Ok((out, warnings))
}

pub fn characterize(inv: &Inventory, db: &FactorDb, mode: LookupMode) -> Result<ImpactResult, ImpactError> {
    let (gwp, mut warnings) = characterize_gwp(inv, db, mode)?;
    let (energy, _) = characterize_energy(inv, db, mode)?;
    warnings.dedup();
    let positive_total: f64 = gwp
        .iter()
        .filter(|(p, _)| **p != Phase::SocChange)
        .map(|(_, v)| v)
        .sum();
    let net_total = positive_total + gwp[&Phase::SocChange];
    let energy_renewable: f64 = energy.values().map(|e| e.renewable).sum();
    let energy_nonrenewable: f64 = energy.values().map(|e| e.nonrenewable).sum();
    Ok(ImpactResult {
        crop: inv.crop.clone(),
        gwp,
        positive_total,
        net_total,
        energy,
        energy_renewable,
        energy_nonrenewable,
        energy_total: energy_renewable + energy_nonrenewable,
        warnings,
    })
}

pub fn phase_shares(r: &ImpactResult) -> Result<PhaseShares, ImpactError> {
    if r.positive_total == 0.0 {
        return Err(ImpactError::ZeroDenominator("GWP"));
    }
    if r.energy_total == 0.0 {
        return Err(ImpactError::ZeroDenominator("energy"));
    }
    Ok(PhaseShares {
        gwp: r
            .gwp
            .iter()
            .filter(|(p, _)| **p != Phase::SocChange)
            .map(|(p, v)| (*p, 100.0 * v / r.positive_total))
            .collect(),
        energy: r
            .energy
            .iter()
            .map(|(p, e)| (*p, 100.0 * e.total() / r.energy_total))
            .collect(),
        renewable: 100.0 * r.energy_renewable / r.energy_total,
    })
}
