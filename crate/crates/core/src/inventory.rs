//! Annualized per-hectare life-cycle inventory of one crop.
//!
//! The functional unit is 1 ha cultivated for 1 year. Establishment
//! operations are spread over the amortization horizon. Farm-saved sowing
//! seed is produced by the crop itself, so its burden is the solution of
//! `x = a·c/y + p + (a·d/y)·x`, where `c` are the crop's input flows per ha,
//! `y` its seed yield, `d` its annual sowing dose, `a` the seed allocation and
//! `p` the per-Mg processing flows.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::factors::{FactorDb, Gas};
use crate::farm::{
    CropPlan, FarmModel, FieldOperation, MachineryMasses, OperationKind, ProductKind, Timing,
};
use crate::fieldemit::{exhaust_emissions, n2o_field_emissions, FieldEmitError};
use crate::quantity::{BaseUnit, Quantity, Unit};
use crate::soc::{soc_annual_change, soc_co2_credit, soc_stock, SocError};

pub const FUNCTIONAL_UNIT: &str = "1 ha·y";
pub const MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InventoryError {
    #[error("amortization horizon must be at least 1 year, got {0}")]
    Horizon(u32),
    #[error("crop `{0}` has no positive seed yield")]
    NoSeedYield(String),
    #[error("seed recursion for `{crop}` diverges: self-reference ratio {ratio} >= 1")]
    Divergent { crop: String, ratio: f64 },
    #[error("seed recursion did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("operation `{op}` of `{crop}` references unknown product `{product}`")]
    MissingProduct {
        crop: String,
        op: String,
        product: String,
    },
    #[error("operation `{op}` of `{crop}`: {message}")]
    Dose {
        crop: String,
        op: String,
        message: String,
    },
    #[error("unknown soil sample `{0}`")]
    MissingSample(String),
    #[error(transparent)]
    FieldEmit(#[from] FieldEmitError),
    #[error(transparent)]
    Soc(#[from] SocError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SeedPt,
    FertilizerPt,
    PesticidePt,
    FieldWorks,
    FieldEmissions,
    SocChange,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::SeedPt,
        Phase::FertilizerPt,
        Phase::PesticidePt,
        Phase::FieldWorks,
        Phase::FieldEmissions,
        Phase::SocChange,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Phase::SeedPt => "seed_pt",
            Phase::FertilizerPt => "fertilizer_pt",
            Phase::PesticidePt => "pesticide_pt",
            Phase::FieldWorks => "field_works",
            Phase::FieldEmissions => "field_emissions",
            Phase::SocChange => "soc_change",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::SeedPt => "Seed production and transport",
            Phase::FertilizerPt => "Fertilizer production and transport",
            Phase::PesticidePt => "Pesticide production and transport",
            Phase::FieldWorks => "Field works",
            Phase::FieldEmissions => "Field emissions",
            Phase::SocChange => "SOC change",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    /// Characterized through a factor record.
    Background,
    /// Direct emission of a gas, characterized by its GWP100.
    Gas(Gas),
    /// Soil CO2 exchange, Mg CO2; negative when the soil takes up carbon.
    SocCo2,
}

/// One inventory line per functional unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub id: String,
    pub kind: FlowKind,
    pub amount: Quantity,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineryClass {
    Tractor,
    Harvester,
    TillageImplement,
    OtherImplement,
}

impl MachineryClass {
    pub const ALL: [MachineryClass; 4] = [
        MachineryClass::Tractor,
        MachineryClass::Harvester,
        MachineryClass::TillageImplement,
        MachineryClass::OtherImplement,
    ];

    pub fn flow_id(self) -> &'static str {
        match self {
            MachineryClass::Tractor => "machinery_tractor",
            MachineryClass::Harvester => "machinery_harvester",
            MachineryClass::TillageImplement => "machinery_tillage_implement",
            MachineryClass::OtherImplement => "machinery_other_implement",
        }
    }
}

/// Amortized machinery mass of one class, Mg/ha·y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MachineryUse {
    pub class: MachineryClass,
    pub mass_mg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// Resolve the seed-for-seed self-reference.
    #[default]
    FixedPoint,
    /// Ignore the seed crop's own seed demand.
    OneLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BuildOptions {
    /// Overrides the farm's amortization horizon.
    pub horizon_years: Option<u32>,
    pub tolerance: f64,
    pub seed_mode: SeedMode,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            horizon_years: None,
            tolerance: DEFAULT_TOLERANCE,
            seed_mode: SeedMode::FixedPoint,
        }
    }
}

impl BuildOptions {
    pub fn horizon(&self, model: &FarmModel) -> u32 {
        self.horizon_years.unwrap_or(model.amortization_horizon_years)
    }
}

/// Per-Mg burden of farm-saved seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedInventory {
    /// Flows per Mg of seed, tagged with the seed phase.
    pub per_mg: Vec<Flow>,
    pub seed_yield_mg: f64,
    pub allocation: f64,
    /// Self-reference ratio `a·d/y`.
    pub ratio: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocSummary {
    pub before_mg_c: f64,
    pub after_mg_c: f64,
    pub years: f64,
    /// Mg C/ha·y
    pub delta_c: f64,
    /// Mg CO2/ha·y fixed
    pub credit_co2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inventory {
    pub crop: String,
    pub functional_unit: &'static str,
    pub horizon_years: u32,
    pub flows: Vec<Flow>,
    pub machinery: Vec<MachineryUse>,
    pub diesel_l: f64,
    pub applied_n_kg: f64,
    pub seed: Option<SeedInventory>,
    pub soc: Option<SocSummary>,
}

impl Inventory {
    pub fn phase_flows(&self, phase: Phase) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(move |f| f.phase == phase)
    }

    /// Copy with every amount multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Inventory {
        let mut inv = self.clone();
        for f in &mut inv.flows {
            f.amount.value *= k;
        }
        inv
    }
}

fn mg() -> Unit {
    Unit::base(BaseUnit::Mg)
}

fn kg() -> Unit {
    Unit::base(BaseUnit::Kg)
}

/// Establishment operations divided by the horizon; recurrent ones unchanged.
pub fn annualize_schedule(crop: &CropPlan, horizon_years: u32) -> Result<Vec<FieldOperation>, InventoryError> {
    if horizon_years < 1 {
        return Err(InventoryError::Horizon(horizon_years));
    }
    let h = f64::from(horizon_years);
    Ok(crop
        .schedule
        .iter()
        .map(|op| match op.timing {
            Timing::Recurrent => op.clone(),
            Timing::Establishment => FieldOperation {
                dose: op.dose.as_ref().map(|d| Quantity {
                    value: d.value / h,
                    unit: d.unit.clone(),
                }),
                diesel_l: op.diesel_l / h,
                machinery: op.machinery.scaled(1.0 / h),
                ..op.clone()
            },
        })
        .collect())
}

/// Accumulates flows keyed by phase, kind and id, in deterministic order.
#[derive(Default)]
struct Ledger {
    lines: BTreeMap<(Phase, FlowKind, String), Quantity>,
}

impl Ledger {
    fn add(&mut self, phase: Phase, kind: FlowKind, id: &str, value: f64, unit: Unit) {
        let key = (phase, kind, id.to_string());
        match self.lines.get_mut(&key) {
            Some(q) => {
                let extra = Quantity { value, unit };
                q.value += extra.value_in(&q.unit).expect("flow units are consistent per id");
            }
            None => {
                self.lines.insert(key, Quantity { value, unit });
            }
        }
    }

    fn into_flows(self) -> Vec<Flow> {
        self.lines
            .into_iter()
            .map(|((phase, kind, id), amount)| Flow {
                id,
                kind,
                amount,
                phase,
            })
            .collect()
    }
}

fn dose_in(crop: &CropPlan, op: &FieldOperation, unit: &str) -> Result<f64, InventoryError> {
    let err = |message: String| InventoryError::Dose {
        crop: crop.name.clone(),
        op: op.name.clone(),
        message,
    };
    let dose = op.dose.as_ref().ok_or_else(|| err("missing dose".into()))?;
    if dose.value < 0.0 {
        return Err(err(format!("negative dose {dose}")));
    }
    let target = Unit::parse(unit).expect("valid internal unit");
    dose.value_in(&target).map_err(|e| err(e.to_string()))
}

/// Per-ha input flows of an annualized schedule, excluding seed and field
/// emissions. Returns the flows and the fertilizer N applied, kg/ha·y.
fn input_flows(
    crop: &CropPlan,
    ops: &[FieldOperation],
    model: &FarmModel,
    db: &FactorDb,
    ledger: &mut Ledger,
) -> Result<f64, InventoryError> {
    let mut n_kg = 0.0;
    for op in ops {
        let product = |kind: ProductKind| -> Result<_, InventoryError> {
            let id = op.product.as_deref().unwrap_or_default();
            let p = model.products.get(id).ok_or_else(|| InventoryError::MissingProduct {
                crop: crop.name.clone(),
                op: op.name.clone(),
                product: id.to_string(),
            })?;
            if p.kind != kind {
                return Err(InventoryError::Dose {
                    crop: crop.name.clone(),
                    op: op.name.clone(),
                    message: format!("product `{id}` is not a {kind:?} product"),
                });
            }
            Ok(p)
        };
        match op.kind {
            OperationKind::Fertilization => {
                let p = product(ProductKind::Fertilizer)?;
                let amount = dose_in(crop, op, "Mg/ha")?;
                n_kg += amount * 1000.0 * p.composition.map_or(0.0, |c| c.n);
                ledger.add(Phase::FertilizerPt, FlowKind::Background, &p.flow_id, amount, mg());
            }
            OperationKind::Herbicide => {
                let p = product(ProductKind::Herbicide)?;
                let dose = op.dose.as_ref();
                let by_volume = dose.is_some_and(|d| d.unit.dimension() == Unit::parse("L/ha").unwrap().dimension());
                let product_kg = if by_volume {
                    dose_in(crop, op, "L/ha")? * p.density_kg_per_l
                } else {
                    dose_in(crop, op, "kg/ha")?
                };
                let ai = product_kg * p.active_ingredient_fraction.unwrap_or(1.0);
                ledger.add(Phase::PesticidePt, FlowKind::Background, &p.flow_id, ai, kg());
            }
            OperationKind::Sowing | OperationKind::Fieldwork => {}
        }
        if op.diesel_l < 0.0 {
            return Err(InventoryError::Dose {
                crop: crop.name.clone(),
                op: op.name.clone(),
                message: "negative diesel".into(),
            });
        }
        if op.diesel_l > 0.0 {
            ledger.add(Phase::FieldWorks, FlowKind::Background, "diesel", op.diesel_l, Unit::base(BaseUnit::L));
            let gases = exhaust_emissions(op.diesel_l, &db.exhaust)?;
            for (gas, amount) in [(Gas::Co2, gases.co2_kg), (Gas::Ch4, gases.ch4_kg), (Gas::N2o, gases.n2o_kg)] {
                if amount > 0.0 {
                    ledger.add(Phase::FieldWorks, FlowKind::Gas(gas), gas.id(), amount, kg());
                }
            }
        }
        for (class, mass) in MachineryClass::ALL.into_iter().zip(op.machinery.as_array()) {
            if mass > 0.0 {
                ledger.add(Phase::FieldWorks, FlowKind::Background, class.flow_id(), mass, mg());
            }
        }
    }
    Ok(n_kg)
}

/// Iterates `x ← base + r·x` from zero until the largest change falls below
/// `tolerance` relative to the largest component. Returns the solution and
/// the iteration count.
pub fn fixed_point(base: &[f64], ratio: f64, tolerance: f64) -> Result<(Vec<f64>, usize), InventoryError> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(InventoryError::Divergent {
            crop: String::new(),
            ratio,
        });
    }
    let mut x = vec![0.0; base.len()];
    for it in 1..=MAX_ITERATIONS {
        let next: Vec<f64> = base.iter().zip(&x).map(|(b, xi)| b + ratio * xi).collect();
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        x = next;
        if change <= tolerance * scale {
            return Ok((x, it));
        }
    }
    Err(InventoryError::NoConvergence(MAX_ITERATIONS))
}

fn field_emission_flows(crop: &CropPlan, n_kg: f64, db: &FactorDb, ledger: &mut Ledger) -> Result<(), InventoryError> {
    let n2o = n2o_field_emissions(n_kg, &db.n2o_params(&crop.name))?;
    ledger.add(Phase::FieldEmissions, FlowKind::Gas(Gas::N2o), Gas::N2o.id(), n2o, mg());
    Ok(())
}

/// Annual sowing dose of farm-saved seed, Mg/ha·y.
fn saved_seed_dose(crop: &CropPlan, ops: &[FieldOperation]) -> Result<f64, InventoryError> {
    ops.iter()
        .filter(|op| op.kind == OperationKind::Sowing && op.product.is_none())
        .map(|op| dose_in(crop, op, "Mg/ha"))
        .sum()
}

/// Burden of 1 Mg of the crop's own seed.
pub fn seed_inventory(
    crop: &CropPlan,
    model: &FarmModel,
    db: &FactorDb,
    opts: &BuildOptions,
) -> Result<SeedInventory, InventoryError> {
    let ops = annualize_schedule(crop, opts.horizon(model))?;
    let y = crop.seed_yield();
    if y.is_nan() || y <= 0.0 {
        return Err(InventoryError::NoSeedYield(crop.name.clone()));
    }
    let seed_model = db.seed_model(&crop.name);
    let a = seed_model.allocation;
    let d = saved_seed_dose(crop, &ops)?;
    let ratio = a * d / y;
    if ratio >= 1.0 {
        return Err(InventoryError::Divergent {
            crop: crop.name.clone(),
            ratio,
        });
    }

    let mut cultivation = Ledger::default();
    let n_kg = input_flows(crop, &ops, model, db, &mut cultivation)?;
    if seed_model.include_field_emissions {
        field_emission_flows(crop, n_kg, db, &mut cultivation)?;
    }
    let mut per_mg = Ledger::default();
    for ((_, kind, id), q) in cultivation.lines {
        per_mg.add(Phase::SeedPt, kind, &id, a * q.value / y, q.unit);
    }
    for id in &seed_model.flows {
        per_mg.add(Phase::SeedPt, FlowKind::Background, id, 1.0, mg());
    }
    let flows = per_mg.into_flows();
    let base: Vec<f64> = flows.iter().map(|f| f.amount.value).collect();
    let (x, iterations) = match opts.seed_mode {
        SeedMode::FixedPoint => fixed_point(&base, ratio, opts.tolerance).map_err(|e| match e {
            InventoryError::Divergent { ratio, .. } => InventoryError::Divergent {
                crop: crop.name.clone(),
                ratio,
            },
            other => other,
        })?,
        SeedMode::OneLevel => (base, 0),
    };
    let per_mg = flows
        .into_iter()
        .zip(x)
        .map(|(f, v)| Flow {
            amount: Quantity {
                value: v,
                unit: f.amount.unit,
            },
            ..f
        })
        .collect();
    Ok(SeedInventory {
        per_mg,
        seed_yield_mg: y,
        allocation: a,
        ratio,
        iterations,
    })
}

fn soc_summary(crop: &CropPlan, model: &FarmModel) -> Result<Option<SocSummary>, InventoryError> {
    if crop.soc_equilibrium {
        return Ok(None);
    }
    let Some((before, after)) = &crop.soc_samples else {
        return Ok(None);
    };
    let sample = |k: &String| {
        model
            .soil_samples
            .get(k)
            .ok_or_else(|| InventoryError::MissingSample(k.clone()))
    };
    let (b, a) = (sample(before)?, sample(after)?);
    let years = f64::from(a.year - b.year);
    let (sb, sa) = (soc_stock(b), soc_stock(a));
    let delta_c = soc_annual_change(&sb, &sa, years)?;
    Ok(Some(SocSummary {
        before_mg_c: sb.mg_c_per_ha,
        after_mg_c: sa.mg_c_per_ha,
        years,
        delta_c,
        credit_co2: soc_co2_credit(delta_c),
    }))
}

/// Full inventory of `crop` per ha·y.
pub fn build_lci(
    crop: &CropPlan,
    model: &FarmModel,
    db: &FactorDb,
    opts: &BuildOptions,
) -> Result<Inventory, InventoryError> {
    let horizon = opts.horizon(model);
    let ops = annualize_schedule(crop, horizon)?;
    let mut ledger = Ledger::default();
    let applied_n_kg = input_flows(crop, &ops, model, db, &mut ledger)?;
    field_emission_flows(crop, applied_n_kg, db, &mut ledger)?;

    // Purchased seed is a background flow; farm-saved seed comes from the
    // crop's own seed inventory.
    for op in ops.iter().filter(|op| op.kind == OperationKind::Sowing) {
        if let Some(id) = &op.product {
            let p = model.products.get(id).ok_or_else(|| InventoryError::MissingProduct {
                crop: crop.name.clone(),
                op: op.name.clone(),
                product: id.clone(),
            })?;
            ledger.add(Phase::SeedPt, FlowKind::Background, &p.flow_id, dose_in(crop, op, "Mg/ha")?, mg());
        }
    }
    let saved = saved_seed_dose(crop, &ops)?;
    let seed = if saved > 0.0 {
        let s = seed_inventory(crop, model, db, opts)?;
        for f in &s.per_mg {
            ledger.add(Phase::SeedPt, f.kind, &f.id, saved * f.amount.value, f.amount.unit.clone());
        }
        Some(s)
    } else {
        None
    };

    let soc = soc_summary(crop, model)?;
    ledger.add(
        Phase::SocChange,
        FlowKind::SocCo2,
        "soil_co2",
        soc.as_ref().map_or(0.0, |s| -s.credit_co2),
        mg(),
    );

    let total = ops
        .iter()
        .fold(MachineryMasses::default(), |acc, op| acc.add(&op.machinery));
    let machinery = MachineryClass::ALL
        .into_iter()
        .zip(total.as_array())
        .map(|(class, mass_mg)| MachineryUse { class, mass_mg })
        .collect();
    Ok(Inventory {
        crop: crop.name.clone(),
        functional_unit: FUNCTIONAL_UNIT,
        horizon_years: horizon,
        flows: ledger.into_flows(),
        machinery,
        diesel_l: ops.iter().map(|op| op.diesel_l).sum(),
        applied_n_kg,
        seed,
        soc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::load_factor_db;
    use crate::farm::parse_farm_document;
    use crate::fixtures::{FACTORS_CALIBRATED, FARM_SORIA};
    use proptest::prelude::*;

    fn setup() -> (FarmModel, FactorDb) {
        (
            parse_farm_document(FARM_SORIA).unwrap(),
            load_factor_db(FACTORS_CALIBRATED).unwrap(),
        )
    }

    fn amount(inv: &Inventory, phase: Phase, id: &str) -> f64 {
        inv.flows
            .iter()
            .filter(|f| f.phase == phase && f.id == id)
            .map(|f| f.amount.value)
            .sum()
    }

    fn op_dose(ops: &[FieldOperation], name: &str) -> f64 {
        ops.iter().find(|o| o.name == name).unwrap().dose.as_ref().unwrap().value
    }

    #[test]
    fn establishment_is_spread() {
        let (m, _) = setup();
        let twg = annualize_schedule(m.crop("tall_wheatgrass").unwrap(), 4).unwrap();
        assert_eq!(op_dose(&twg, "base_fertilization"), 0.30 / 4.0);
        assert_eq!(op_dose(&twg, "weed_control"), 1.0 / 4.0);
        assert_eq!(op_dose(&twg, "top_dressing"), 0.15);
        let rye = annualize_schedule(m.crop("rye").unwrap(), 4).unwrap();
        assert_eq!(op_dose(&rye, "base_fertilization"), 0.20);
        assert_eq!(rye, m.crop("rye").unwrap().schedule);
        assert_eq!(
            annualize_schedule(m.crop("rye").unwrap(), 0).unwrap_err(),
            InventoryError::Horizon(0)
        );
    }

    #[test]
    fn machinery_masses_pass_through() {
        let (m, db) = setup();
        let opts = BuildOptions::default();
        let twg = build_lci(m.crop("tall_wheatgrass").unwrap(), &m, &db, &opts).unwrap();
        assert_eq!(amount(&twg, Phase::FieldWorks, "machinery_tractor"), 0.00099);
        assert_eq!(amount(&twg, Phase::FieldWorks, "machinery_tillage_implement"), 0.00020);
        assert_eq!(amount(&twg, Phase::FieldWorks, "machinery_other_implement"), 0.00251);
        assert_eq!(amount(&twg, Phase::FieldWorks, "machinery_harvester"), 0.0);
        assert_eq!(twg.diesel_l, 31.95);
        let rye = build_lci(m.crop("rye").unwrap(), &m, &db, &opts).unwrap();
        let masses: Vec<f64> = rye.machinery.iter().map(|u| u.mass_mg).collect();
        assert_eq!(masses, vec![0.00135, 0.00098, 0.00082, 0.00201]);
        assert_eq!(rye.diesel_l, 55.39);
    }

    #[test]
    fn rye_seed_multiplier() {
        let (m, db) = setup();
        let s = seed_inventory(m.crop("rye").unwrap(), &m, &db, &BuildOptions::default()).unwrap();
        assert!((s.ratio - 0.1).abs() < 1e-15);
        let one = seed_inventory(
            m.crop("rye").unwrap(),
            &m,
            &db,
            &BuildOptions {
                seed_mode: SeedMode::OneLevel,
                ..BuildOptions::default()
            },
        )
        .unwrap();
        for (a, b) in s.per_mg.iter().zip(&one.per_mg) {
            let mult = a.amount.value / b.amount.value;
            assert!((mult - 1.0 / 0.9).abs() < 1e-12, "{}: {mult}", a.id);
        }
    }

    #[test]
    fn twg_seed_yield() {
        let (m, db) = setup();
        let s = seed_inventory(m.crop("tall_wheatgrass").unwrap(), &m, &db, &BuildOptions::default()).unwrap();
        assert!((s.seed_yield_mg - 0.165).abs() < 1e-12);
    }

    #[test]
    fn divergent_seed() {
        let (mut m, db) = setup();
        let rye = m.crops.iter_mut().find(|c| c.name == "rye").unwrap();
        rye.grain_yield = 1.0;
        rye.seed_yield = crate::farm::SeedYield::Grain;
        rye.schedule.iter_mut().find(|o| o.kind == OperationKind::Sowing).unwrap().dose =
            Some("2.0 Mg/ha".parse().unwrap());
        let rye = m.crop("rye").unwrap();
        assert!(matches!(
            seed_inventory(rye, &m, &db, &BuildOptions::default()),
            Err(InventoryError::Divergent { .. })
        ));
    }

    #[test]
    fn empty_crop_has_only_zero_flows() {
        let (mut m, mut db) = setup();
        // The published N2O total would otherwise apply regardless of inputs.
        db.emissions.remove("rye");
        let rye = m.crops.iter_mut().find(|c| c.name == "rye").unwrap();
        rye.schedule.clear();
        let inv = build_lci(m.crop("rye").unwrap(), &m, &db, &BuildOptions::default()).unwrap();
        assert!(inv.flows.iter().all(|f| f.amount.value == 0.0));
    }

    #[test]
    fn soc_flow() {
        let (m, db) = setup();
        let opts = BuildOptions::default();
        let twg = build_lci(m.crop("tall_wheatgrass").unwrap(), &m, &db, &opts).unwrap();
        let soc = twg.soc.as_ref().unwrap();
        assert!((soc.delta_c - 0.765).abs() < 5e-4);
        assert_eq!(amount(&twg, Phase::SocChange, "soil_co2"), -soc.credit_co2);
        let rye = build_lci(m.crop("rye").unwrap(), &m, &db, &opts).unwrap();
        assert!(rye.soc.is_none());
        assert_eq!(amount(&rye, Phase::SocChange, "soil_co2"), 0.0);
    }

    #[test]
    fn phase_partition_keeps_every_flow() {
        let (m, db) = setup();
        for crop in &m.crops {
            let inv = build_lci(crop, &m, &db, &BuildOptions::default()).unwrap();
            let grouped: usize = Phase::ALL.iter().map(|p| inv.phase_flows(*p).count()).sum();
            assert_eq!(grouped, inv.flows.len());
            let raw: f64 = inv.flows.iter().map(|f| f.amount.value).sum();
            let by_phase: f64 = Phase::ALL
                .iter()
                .map(|p| inv.phase_flows(*p).map(|f| f.amount.value).sum::<f64>())
                .sum();
            assert!((raw - by_phase).abs() <= 1e-9 * raw.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn fixed_point_matches_geometric_series(r in 0.0..0.95f64, b in prop::collection::vec(0.0..1e4f64, 1..6)) {
            let (x, _) = fixed_point(&b, r, DEFAULT_TOLERANCE).unwrap();
            for (xi, bi) in x.iter().zip(&b) {
                let closed = bi / (1.0 - r);
                prop_assert!((xi - closed).abs() <= 1e-9 * closed.max(1.0));
            }
        }

        #[test]
        fn spreading_conserves_totals(h in 1u32..16) {
            let (m, _) = setup();
            let crop = m.crop("tall_wheatgrass").unwrap();
            let ops = annualize_schedule(crop, h).unwrap();
            for (a, o) in ops.iter().zip(&crop.schedule) {
                if let (Some(ad), Some(od)) = (&a.dose, &o.dose) {
                    let years = if o.timing == Timing::Establishment { f64::from(h) } else { 1.0 };
                    prop_assert!((ad.value * years - od.value).abs() <= 1e-15 * od.value.max(1.0));
                }
            }
        }

        #[test]
        fn doubling_a_dose_doubles_only_its_flow(k in 0.5..3.0f64) {
            let (mut m, db) = setup();
            let opts = BuildOptions::default();
            let base = build_lci(m.crop("rye").unwrap(), &m, &db, &opts).unwrap();
            let rye = m.crops.iter_mut().find(|c| c.name == "rye").unwrap();
            let op = rye.schedule.iter_mut().find(|o| o.name == "weed_control").unwrap();
            let d = op.dose.as_mut().unwrap();
            d.value *= k;
            let changed = build_lci(m.crop("rye").unwrap(), &m, &db, &opts).unwrap();
            let ai = |inv: &Inventory| amount(inv, Phase::PesticidePt, "pesticide_unspecified");
            prop_assert!((ai(&changed) - k * ai(&base)).abs() <= 1e-12);
            for (a, b) in base.flows.iter().zip(&changed.flows) {
                if a.phase != Phase::PesticidePt && a.phase != Phase::SeedPt {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }
}
