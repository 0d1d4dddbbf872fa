//! Background factor database: production-and-transport burdens per flow,
//! gas GWP100 values, field-emission parameters and seed-production models.
//!
//! ```text
//! [flow.diesel]
//! unit = L
//! gwp100 = 0.628          # kg CO2-eq per unit
//! pe_renewable = 0.166    # MJ per unit
//! pe_nonrenewable = 50.6  # MJ per unit
//! note = "calibrated"
//!
//! [gas.n2o]
//! gwp100 = 265
//!
//! [emissions.exhaust]
//! co2 = 2.64 kg/L
//!
//! [emissions.rye]
//! n2o_override = 0.001757 Mg/ha
//!
//! [seed.default]
//! allocation = 100 %
//! flows = seed_processing, seed_transport
//! ```
//!
//! `[emissions.default]` and `[seed.default]` apply to crops without their
//! own section.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::document::{parse_document, Section, SyntaxError, SyntaxErrorKind, Value};
use crate::fieldemit::{ExhaustFactors, N2OParams};
use crate::quantity::{Quantity, Unit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error(transparent)]
    Syntax(SyntaxError),
    #[error("duplicate flow `{0}`")]
    DuplicateFlow(String),
    #[error("[{section}] is missing `{key}`")]
    MissingKey { section: String, key: String },
    #[error("[{section}] `{key}`: {message}")]
    BadValue {
        section: String,
        key: String,
        message: String,
    },
    #[error("flow `{flow}` has negative {column} ({value})")]
    NegativeEnergy {
        flow: String,
        column: &'static str,
        value: f64,
    },
    #[error("CO2 must have gwp100 = 1, got {0}")]
    Co2NotOne(f64),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("no factor for flow `{0}`")]
    MissingFlow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gas {
    Co2,
    Ch4,
    N2o,
}

impl Gas {
    pub const ALL: [Gas; 3] = [Gas::Co2, Gas::Ch4, Gas::N2o];

    pub fn id(self) -> &'static str {
        match self {
            Gas::Co2 => "co2",
            Gas::Ch4 => "ch4",
            Gas::N2o => "n2o",
        }
    }

    pub fn from_id(s: &str) -> Option<Gas> {
        Gas::ALL.into_iter().find(|g| g.id() == s)
    }

    /// Default GWP100, kg CO2-eq/kg.
    pub fn default_gwp100(self) -> f64 {
        match self {
            Gas::Co2 => 1.0,
            Gas::Ch4 => 30.5,
            Gas::N2o => 265.0,
        }
    }
}

impl fmt::Display for Gas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Burdens of one unit of a background flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRecord {
    pub flow_id: String,
    /// Reference unit; amounts are converted to it before characterization.
    pub unit: Unit,
    /// kg CO2-eq per unit
    pub gwp100: f64,
    /// MJ per unit
    pub pe_renewable: f64,
    /// MJ per unit
    pub pe_nonrenewable: f64,
    pub note: Option<String>,
}

impl FactorRecord {
    pub fn zero(flow_id: &str) -> Self {
        FactorRecord {
            flow_id: flow_id.to_string(),
            unit: Unit::dimensionless(),
            gwp100: 0.0,
            pe_renewable: 0.0,
            pe_nonrenewable: 0.0,
            note: Some("missing flow, cut off".into()),
        }
    }
}

/// How sowing seed of a farm-saved crop is produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedModel {
    /// Share of the seed crop's cultivation burden carried by its seed.
    pub allocation: f64,
    /// Flows added per Mg of seed (processing, transport, ...), each 1 unit/Mg.
    pub flows: Vec<String>,
    /// Whether the seed crop's own field emissions enter the seed burden.
    pub include_field_emissions: bool,
}

impl Default for SeedModel {
    fn default() -> Self {
        SeedModel {
            allocation: 1.0,
            flows: Vec::new(),
            include_field_emissions: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupMode {
    #[default]
    Strict,
    /// Missing flows contribute zero and are reported.
    Cutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lookup {
    pub record: FactorRecord,
    /// Set when the flow was missing and cut off.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorDb {
    pub flows: BTreeMap<String, FactorRecord>,
    pub gases: BTreeMap<Gas, f64>,
    pub exhaust: ExhaustFactors,
    /// Keyed by crop name or `default`.
    pub emissions: BTreeMap<String, N2OParams>,
    /// Keyed by crop name or `default`.
    pub seed: BTreeMap<String, SeedModel>,
}

impl Default for FactorDb {
    fn default() -> Self {
        FactorDb {
            flows: BTreeMap::new(),
            gases: Gas::ALL.into_iter().map(|g| (g, g.default_gwp100())).collect(),
            exhaust: ExhaustFactors::default(),
            emissions: BTreeMap::new(),
            seed: BTreeMap::new(),
        }
    }
}

impl FactorDb {
    pub fn gas_gwp(&self, gas: Gas) -> f64 {
        self.gases.get(&gas).copied().unwrap_or_else(|| gas.default_gwp100())
    }

    pub fn n2o_params(&self, crop: &str) -> N2OParams {
        self.emissions
            .get(crop)
            .or_else(|| self.emissions.get("default"))
            .copied()
            .unwrap_or_default()
    }

    pub fn seed_model(&self, crop: &str) -> SeedModel {
        self.seed
            .get(crop)
            .or_else(|| self.seed.get("default"))
            .cloned()
            .unwrap_or_default()
    }

    pub fn lookup(&self, flow_id: &str, mode: LookupMode) -> Result<Lookup, FactorError> {
        match (self.flows.get(flow_id), mode) {
            (Some(r), _) => Ok(Lookup {
                record: r.clone(),
                warning: None,
            }),
            (None, LookupMode::Strict) => Err(FactorError::MissingFlow(flow_id.to_string())),
            (None, LookupMode::Cutoff) => Ok(Lookup {
                record: FactorRecord::zero(flow_id),
                warning: Some(format!("no factor for flow `{flow_id}`; contributes zero")),
            }),
        }
    }

    /// Copy with every flow record and the exhaust and gas burdens scaled by
    /// `k`. CO2 stays the reference gas, so exhaust CO2 is scaled instead.
    pub fn scaled(&self, k: f64) -> FactorDb {
        let mut db = self.clone();
        for r in db.flows.values_mut() {
            r.gwp100 *= k;
            r.pe_renewable *= k;
            r.pe_nonrenewable *= k;
        }
        for (g, v) in db.gases.iter_mut() {
            if *g != Gas::Co2 {
                *v *= k;
            }
        }
        db.exhaust.co2_kg_per_l *= k;
        db
    }
}

struct Fields<'a> {
    section: &'a Section,
}

impl<'a> Fields<'a> {
    fn name(&self) -> String {
        self.section.name()
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> FactorError {
        FactorError::BadValue {
            section: self.name(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), FactorError> {
        match self.section.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(self.bad(&e.key, "unknown key")),
            None => Ok(()),
        }
    }

    fn quantity(&self, key: &str) -> Result<Option<&'a Quantity>, FactorError> {
        match self.section.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Quantity(q)) => Ok(Some(q)),
            Some(v) => Err(self.bad(key, format!("expected a number, got {}", v.kind()))),
        }
    }

    /// Bare number or quantity convertible to `unit`.
    fn number(&self, key: &str, unit: &str) -> Result<Option<f64>, FactorError> {
        let Some(q) = self.quantity(key)? else {
            return Ok(None);
        };
        if q.unit.is_dimensionless() {
            return Ok(Some(q.value));
        }
        let target = if unit.is_empty() {
            Unit::dimensionless()
        } else {
            Unit::parse(unit).expect("valid internal unit")
        };
        q.value_in(&target).map(Some).map_err(|e| self.bad(key, e.to_string()))
    }

    fn required(&self, key: &str, unit: &str) -> Result<f64, FactorError> {
        self.number(key, unit)?.ok_or_else(|| FactorError::MissingKey {
            section: self.name(),
            key: key.to_string(),
        })
    }

    fn fraction(&self, key: &str) -> Result<Option<f64>, FactorError> {
        let v = self.number(key, "")?;
        if let Some(f) = v {
            if !(0.0..=1.0).contains(&f) {
                return Err(self.bad(key, format!("fraction {f} outside [0, 1]")));
            }
        }
        Ok(v)
    }

    fn text(&self, key: &str) -> Result<Option<String>, FactorError> {
        match self.section.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Text(s)) | Some(Value::Ident(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.bad(key, format!("expected text, got {}", v.kind()))),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, FactorError> {
        match self.section.get(key).map(|e| &e.value) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => Err(self.bad(key, format!("expected a boolean, got {}", v.kind()))),
        }
    }

    fn idents(&self, key: &str) -> Result<Vec<String>, FactorError> {
        let one = |v: &Value| match v {
            Value::Ident(s) => Ok(s.clone()),
            other => Err(self.bad(key, format!("expected identifiers, got {}", other.kind()))),
        };
        match self.section.get(key).map(|e| &e.value) {
            None => Ok(Vec::new()),
            Some(Value::List(items)) => items.iter().map(one).collect(),
            Some(v) => Ok(vec![one(v)?]),
        }
    }
}

fn read_flow(f: &Fields<'_>, id: &str) -> Result<FactorRecord, FactorError> {
    f.check_keys(&["unit", "gwp100", "pe_renewable", "pe_nonrenewable", "note"])?;
    let unit_text = f.text("unit")?.ok_or_else(|| FactorError::MissingKey {
        section: f.name(),
        key: "unit".into(),
    })?;
    let unit = Unit::parse(&unit_text).map_err(|e| f.bad("unit", e.to_string()))?;
    let gwp100 = f.required("gwp100", "")?;
    let pe_renewable = f.required("pe_renewable", "MJ")?;
    let pe_nonrenewable = f.required("pe_nonrenewable", "MJ")?;
    for (column, value) in [("pe_renewable", pe_renewable), ("pe_nonrenewable", pe_nonrenewable)] {
        if value < 0.0 {
            return Err(FactorError::NegativeEnergy {
                flow: id.to_string(),
                column,
                value,
            });
        }
    }
    Ok(FactorRecord {
        flow_id: id.to_string(),
        unit,
        gwp100,
        pe_renewable,
        pe_nonrenewable,
        note: f.text("note")?,
    })
}

fn read_n2o(f: &Fields<'_>) -> Result<N2OParams, FactorError> {
    f.check_keys(&["ef_direct", "residue_n", "nh3_loss_fraction", "ef_indirect_nh3", "n2o_override"])?;
    let d = N2OParams::default();
    let residue_n_kg = f.number("residue_n", "kg/ha")?.unwrap_or(d.residue_n_kg);
    if residue_n_kg < 0.0 {
        return Err(f.bad("residue_n", "must be non-negative"));
    }
    let override_total_mg = f.number("n2o_override", "Mg/ha")?;
    if override_total_mg.is_some_and(|v| v < 0.0) {
        return Err(f.bad("n2o_override", "must be non-negative"));
    }
    Ok(N2OParams {
        ef_direct: f.fraction("ef_direct")?.unwrap_or(d.ef_direct),
        residue_n_kg,
        nh3_loss_fraction: f.fraction("nh3_loss_fraction")?.unwrap_or(d.nh3_loss_fraction),
        ef_indirect_nh3: f.fraction("ef_indirect_nh3")?.unwrap_or(d.ef_indirect_nh3),
        override_total_mg,
    })
}

fn read_exhaust(f: &Fields<'_>) -> Result<ExhaustFactors, FactorError> {
    f.check_keys(&["co2", "ch4", "n2o"])?;
    let d = ExhaustFactors::default();
    let e = ExhaustFactors {
        co2_kg_per_l: f.number("co2", "kg/L")?.unwrap_or(d.co2_kg_per_l),
        ch4_g_per_l: f.number("ch4", "g/L")?.unwrap_or(d.ch4_g_per_l),
        n2o_g_per_l: f.number("n2o", "g/L")?.unwrap_or(d.n2o_g_per_l),
    };
    for (k, v) in [("co2", e.co2_kg_per_l), ("ch4", e.ch4_g_per_l), ("n2o", e.n2o_g_per_l)] {
        if v < 0.0 {
            return Err(f.bad(k, "must be non-negative"));
        }
    }
    Ok(e)
}

fn read_seed(f: &Fields<'_>) -> Result<SeedModel, FactorError> {
    f.check_keys(&["allocation", "flows", "include_field_emissions"])?;
    let d = SeedModel::default();
    Ok(SeedModel {
        allocation: f.fraction("allocation")?.unwrap_or(d.allocation),
        flows: f.idents("flows")?,
        include_field_emissions: f.boolean("include_field_emissions")?.unwrap_or(d.include_field_emissions),
    })
}

/// Parses a factor file. Unknown sections and keys are rejected.
pub fn load_factor_db(text: &str) -> Result<FactorDb, FactorError> {
    let doc = parse_document(text).map_err(|e| match &e.kind {
        SyntaxErrorKind::DuplicateSection(path) => match path.strip_prefix("flow.") {
            Some(id) => FactorError::DuplicateFlow(id.to_string()),
            None => FactorError::Syntax(e),
        },
        _ => FactorError::Syntax(e),
    })?;
    let mut db = FactorDb::default();
    for section in &doc.sections {
        let f = Fields { section };
        let path: Vec<&str> = section.path.iter().map(String::as_str).collect();
        match path.as_slice() {
            ["flow", id] => {
                db.flows.insert(id.to_string(), read_flow(&f, id)?);
            }
            ["gas", name] => {
                let gas = Gas::from_id(name).ok_or_else(|| FactorError::UnknownSection(section.name()))?;
                f.check_keys(&["gwp100"])?;
                let v = f.required("gwp100", "")?;
                if gas == Gas::Co2 && v != 1.0 {
                    return Err(FactorError::Co2NotOne(v));
                }
                db.gases.insert(gas, v);
            }
            ["emissions", "exhaust"] => db.exhaust = read_exhaust(&f)?,
            ["emissions", crop] => {
                db.emissions.insert(crop.to_string(), read_n2o(&f)?);
            }
            ["seed", crop] => {
                db.seed.insert(crop.to_string(), read_seed(&f)?);
            }
            _ => return Err(FactorError::UnknownSection(section.name())),
        }
    }
    for model in db.seed.values() {
        if let Some(missing) = model.flows.iter().find(|id| !db.flows.contains_key(*id)) {
            return Err(FactorError::MissingFlow(missing.clone()));
        }
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FACTORS_CALIBRATED;

    const DIESEL: &str = "[flow.diesel]\nunit = L\ngwp100 = 0.6\npe_renewable = 0.2\npe_nonrenewable = 50\n";

    #[test]
    fn shipped_file_loads() {
        let db = load_factor_db(FACTORS_CALIBRATED).unwrap();
        assert_eq!(db.gas_gwp(Gas::N2o), 265.0);
        assert_eq!(db.gas_gwp(Gas::Co2), 1.0);
        assert_eq!(db.gas_gwp(Gas::Ch4), 30.5);
        assert!(db.flows.values().all(|r| r.note.as_deref().is_some_and(|n| n.contains("not measured"))));
        assert_eq!(db.n2o_params("rye").override_total_mg, Some(0.001757));
        assert_eq!(db.n2o_params("tall_wheatgrass").override_total_mg, Some(0.000817));
    }

    #[test]
    fn lookup_modes() {
        let db = load_factor_db(FACTORS_CALIBRATED).unwrap();
        let r = db.lookup("npk_8_24_8", LookupMode::Strict).unwrap();
        assert_eq!(r.record.flow_id, "npk_8_24_8");
        assert!(r.warning.is_none());
        let err = db.lookup("unknown_flow", LookupMode::Strict).unwrap_err();
        assert!(err.to_string().contains("unknown_flow"));
        let cut = db.lookup("unknown_flow", LookupMode::Cutoff).unwrap();
        assert_eq!(cut.record.gwp100, 0.0);
        assert!(cut.warning.unwrap().contains("unknown_flow"));
    }

    #[test]
    fn duplicate_flow() {
        let text = format!("{DIESEL}\n{DIESEL}");
        assert_eq!(load_factor_db(&text).unwrap_err(), FactorError::DuplicateFlow("diesel".into()));
    }

    #[test]
    fn negative_energy() {
        let text = DIESEL.replace("pe_renewable = 0.2", "pe_renewable = -1");
        assert!(matches!(
            load_factor_db(&text).unwrap_err(),
            FactorError::NegativeEnergy { column: "pe_renewable", .. }
        ));
    }

    #[test]
    fn missing_column() {
        let text = DIESEL.replace("gwp100 = 0.6\n", "");
        assert!(matches!(load_factor_db(&text).unwrap_err(), FactorError::MissingKey { key, .. } if key == "gwp100"));
    }

    #[test]
    fn co2_is_fixed() {
        assert_eq!(load_factor_db("[gas.co2]\ngwp100 = 2\n").unwrap_err(), FactorError::Co2NotOne(2.0));
        let db = load_factor_db("[gas.ch4]\ngwp100 = 28\n").unwrap();
        assert_eq!(db.gas_gwp(Gas::Ch4), 28.0);
        assert_eq!(db.gas_gwp(Gas::N2o), 265.0);
    }

    #[test]
    fn seed_flows_must_exist() {
        let err = load_factor_db("[seed.default]\nflows = seed_transport\n").unwrap_err();
        assert_eq!(err, FactorError::MissingFlow("seed_transport".into()));
    }

    #[test]
    fn crop_specific_sections_fall_back_to_default() {
        let db = load_factor_db("[emissions.default]\nef_direct = 2 %\n[seed.default]\nallocation = 50 %\n").unwrap();
        assert_eq!(db.n2o_params("oats").ef_direct, 0.02);
        assert_eq!(db.seed_model("oats").allocation, 0.5);
        assert_eq!(FactorDb::default().seed_model("oats"), SeedModel::default());
    }
}
