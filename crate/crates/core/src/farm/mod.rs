//! Farm description: domain model, parser and validation.
//!
//! Section kinds and their keys:
//!
//! | section | keys |
//! |---|---|
//! | `[farm]` | `name`, `total_area`, `marginal_area`, `cap_aid`, `amortization_horizon`, `factors`, `compare`, `climate` |
//! | `[product.<id>]` | `kind`, `label`, `active_ingredient`, `density`, `flow` |
//! | `[crop.<name>]` | `land_class`, `perennial`, `life_span`, `area`, `cultivar`, `soc_equilibrium`, `soc_before`, `soc_after`, `grain_yield`, `straw_yield`, `grain_price`, `straw_price`, `sales`, `seed_yield`, `seed_yield_share`, `<item>_cost`, `<item>_cost_establishment` |
//! | `[crop.<name>.op.<op>]` | `kind`, `timing`, `product`, `dose`, `diesel`, `tractor`, `harvester`, `tillage_implement`, `other_implement` |
//! | `[crop.<name>.year.<year>]` | `area`, `grain_yield`, `straw_yield`, `grain_price`, `straw_price` |
//! | `[soil.<land>.<year>]` | `depth`, `bulk_density`, `coarse_fraction`, `organic_matter`, `organic_carbon` |
//!
//! Cost items are `seed`, `herbicide`, `fertilizer` and `machinery`.

mod product;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use product::{parse_product_label, Composition, ProductError, ProductKind, ProductSpec};
pub use validate::{validate_model, Diagnostic, Severity, ValidationReport, AREA_TOLERANCE_HA};

use crate::document::{parse_document, Document, Section, SyntaxError, Value};
use crate::quantity::{Quantity, Unit};

#[derive(Debug, Error)]
pub enum FarmError {
    #[error("syntax error: {0}")]
    Syntax(#[from] SyntaxError),
    #[error("invalid farm description:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LandClass {
    Marginal,
    NonMarginal,
    Fallow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Applied once, in the establishment year of a perennial crop.
    Establishment,
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Sowing,
    Fertilization,
    Herbicide,
    Fieldwork,
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperationKind::Sowing => "sowing",
            OperationKind::Fertilization => "fertilization",
            OperationKind::Herbicide => "herbicide",
            OperationKind::Fieldwork => "fieldwork",
        })
    }
}

/// Amortized machinery masses attributed to an operation, Mg/ha.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MachineryMasses {
    pub tractor: f64,
    pub harvester: f64,
    pub tillage_implement: f64,
    pub other_implement: f64,
}

impl MachineryMasses {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.tractor,
            self.harvester,
            self.tillage_implement,
            self.other_implement,
        ]
    }

    pub fn scaled(&self, k: f64) -> Self {
        MachineryMasses {
            tractor: self.tractor * k,
            harvester: self.harvester * k,
            tillage_implement: self.tillage_implement * k,
            other_implement: self.other_implement * k,
        }
    }

    pub fn add(&self, o: &MachineryMasses) -> Self {
        MachineryMasses {
            tractor: self.tractor + o.tractor,
            harvester: self.harvester + o.harvester,
            tillage_implement: self.tillage_implement + o.tillage_implement,
            other_implement: self.other_implement + o.other_implement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldOperation {
    pub name: String,
    pub kind: OperationKind,
    pub timing: Timing,
    /// Product reference; `None` on a sowing operation means farm-saved seed.
    pub product: Option<String>,
    /// Per-hectare dose, per application.
    pub dose: Option<Quantity>,
    /// Diesel burned, L/ha per application.
    pub diesel_l: f64,
    pub machinery: MachineryMasses,
}

/// One cost line, EUR/ha. Establishment amounts are spread over the
/// amortization horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostItem {
    pub recurrent: f64,
    pub establishment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostSheet {
    pub seed: CostItem,
    pub herbicide: CostItem,
    pub fertilizer: CostItem,
    pub machinery_labor: CostItem,
}

impl CostSheet {
    pub fn items(&self) -> [(&'static str, CostItem); 4] {
        [
            ("seed", self.seed),
            ("herbicide", self.herbicide),
            ("fertilizer", self.fertilizer),
            ("machinery", self.machinery_labor),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedYield {
    /// Seed yield equals grain yield.
    Grain,
    /// Explicit seed yield, Mg/ha·y.
    Explicit(f64),
    /// Fraction of total harvested biomass (grain + straw).
    Share(f64),
}

/// One season of yields and prices; used to form area-weighted sales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearRecord {
    pub year: String,
    pub area_ha: f64,
    pub grain_yield: f64,
    pub straw_yield: f64,
    pub grain_price: f64,
    pub straw_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CropPlan {
    pub name: String,
    pub cultivar: Option<String>,
    pub land_class: LandClass,
    pub perennial: bool,
    pub life_span_years: u32,
    pub area_ha: f64,
    /// SOC assumed stable; no credit or debt regardless of samples.
    pub soc_equilibrium: bool,
    /// Soil sample keys (`<land>.<year>`) before and after.
    pub soc_samples: Option<(String, String)>,
    pub schedule: Vec<FieldOperation>,
    /// Mg/ha·y
    pub grain_yield: f64,
    /// Straw, or whole-crop biomass for forage crops, Mg/ha·y.
    pub straw_yield: f64,
    /// EUR/Mg
    pub grain_price: Option<f64>,
    pub straw_price: Option<f64>,
    /// Recorded weighted-average sales, EUR/ha·y; overrides yields × prices.
    pub recorded_sales: Option<f64>,
    pub yearly: Vec<YearRecord>,
    pub seed_yield: SeedYield,
    pub costs: CostSheet,
}

impl CropPlan {
    /// Seed yield in Mg/ha·y used for the sowing-seed inventory.
    pub fn seed_yield(&self) -> f64 {
        match self.seed_yield {
            SeedYield::Grain => self.grain_yield,
            SeedYield::Explicit(y) => y,
            SeedYield::Share(s) => s * (self.grain_yield + self.straw_yield),
        }
    }

    pub fn is_marginal(&self) -> bool {
        self.land_class == LandClass::Marginal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoilSample {
    /// `<land>.<year>`
    pub key: String,
    pub year: i32,
    pub depth_m: f64,
    /// Mg/m3
    pub bulk_density: f64,
    pub coarse_fraction_vol: f64,
    pub organic_matter_fraction: f64,
    pub organic_carbon_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarmModel {
    pub name: String,
    pub total_area_ha: f64,
    pub marginal_area_ha: f64,
    /// EUR/ha·y
    pub cap_aid: f64,
    pub amortization_horizon_years: u32,
    pub factors_file: Option<String>,
    /// (candidate, baseline) marginal-land alternatives.
    pub comparison: (String, String),
    /// Inert metadata.
    pub climate: Option<String>,
    pub products: BTreeMap<String, ProductSpec>,
    pub crops: Vec<CropPlan>,
    pub soil_samples: BTreeMap<String, SoilSample>,
}

impl FarmModel {
    pub fn crop(&self, name: &str) -> Option<&CropPlan> {
        self.crops.iter().find(|c| c.name == name)
    }

    /// Crops outside the marginal land (including fallow).
    pub fn non_marginal_crops(&self) -> impl Iterator<Item = &CropPlan> {
        self.crops.iter().filter(|c| !c.is_marginal())
    }
}

pub const DEFAULT_HORIZON_YEARS: u32 = 4;

/// Typed accessor over one section that records problems instead of failing.
struct Reader<'a> {
    section: &'a Section,
    report: &'a mut ValidationReport,
    allowed: &'a [&'a str],
}

impl<'a> Reader<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.section.name(), key)
    }

    fn missing(&mut self, key: &str) {
        let path = self.path(key);
        self.report
            .error(path, "missing required key", Some(self.section.line));
    }

    fn bad(&mut self, key: &str, msg: String) {
        let path = self.path(key);
        let line = self.section.get(key).map(|e| e.line);
        self.report.error(path, msg, line);
    }

    fn check_keys(&mut self) {
        for e in &self.section.entries {
            if !self.allowed.contains(&e.key.as_str()) {
                let path = self.path(&e.key);
                self.report.warning(path, "unknown key", Some(e.line));
            }
        }
    }

    fn quantity_raw(&mut self, key: &str) -> Option<Quantity> {
        match &self.section.get(key)?.value {
            Value::Quantity(q) => Some(q.clone()),
            other => {
                self.bad(key, format!("expected a quantity, found {}", other.kind()));
                None
            }
        }
    }

    /// Quantity converted to `unit`; a bare number is taken as already in `unit`.
    fn quantity(&mut self, key: &str, unit: &str) -> Option<f64> {
        let q = self.quantity_raw(key)?;
        if q.unit.is_dimensionless() {
            return Some(q.value);
        }
        let target = Unit::parse(unit).expect("static unit");
        match q.value_in(&target) {
            Ok(v) => Some(v),
            Err(e) => {
                self.bad(key, format!("expected {unit}: {e}"));
                None
            }
        }
    }

    fn required_quantity(&mut self, key: &str, unit: &str) -> Option<f64> {
        if self.section.get(key).is_none() {
            self.missing(key);
            return None;
        }
        self.quantity(key, unit)
    }

    /// A dimensionless fraction (percent literals are already normalized).
    fn fraction(&mut self, key: &str) -> Option<f64> {
        let q = self.quantity_raw(key)?;
        if !q.unit.is_dimensionless() {
            self.bad(key, format!("expected a fraction or percent, found `{}`", q.unit));
            return None;
        }
        Some(q.value)
    }

    fn required_fraction(&mut self, key: &str) -> Option<f64> {
        if self.section.get(key).is_none() {
            self.missing(key);
            return None;
        }
        self.fraction(key)
    }

    fn years(&mut self, key: &str) -> Option<u32> {
        let v = self.quantity(key, "y")?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            self.bad(key, format!("expected a whole number of years, found {v}"));
            return None;
        }
        Some(v as u32)
    }

    fn text(&mut self, key: &str) -> Option<String> {
        match &self.section.get(key)?.value {
            Value::Text(s) | Value::Ident(s) => Some(s.clone()),
            other => {
                self.bad(key, format!("expected text, found {}", other.kind()));
                None
            }
        }
    }

    fn ident(&mut self, key: &str) -> Option<String> {
        match &self.section.get(key)?.value {
            Value::Ident(s) => Some(s.clone()),
            Value::Quantity(q) if q.unit.is_dimensionless() && q.value.fract() == 0.0 => {
                Some(format!("{}", q.value))
            }
            other => {
                self.bad(key, format!("expected an identifier, found {}", other.kind()));
                None
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match &self.section.get(key)?.value {
            Value::Bool(b) => Some(*b),
            other => {
                self.bad(key, format!("expected true or false, found {}", other.kind()));
                None
            }
        }
    }

    fn ident_list(&mut self, key: &str) -> Option<Vec<String>> {
        match &self.section.get(key)?.value {
            Value::Ident(s) => Some(vec![s.clone()]),
            Value::List(items) => {
                let mut out = Vec::new();
                for v in items {
                    match v {
                        Value::Ident(s) => out.push(s.clone()),
                        other => {
                            self.bad(key, format!("expected identifiers, found {}", other.kind()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.bad(key, format!("expected a list of identifiers, found {}", other.kind()));
                None
            }
        }
    }

    /// Soil sample reference: `marginal.2013` written as an identifier.
    fn sample_ref(&mut self, key: &str) -> Option<String> {
        match &self.section.get(key)?.value {
            Value::Ident(s) | Value::Text(s) => Some(s.clone()),
            other => {
                self.bad(key, format!("expected a soil sample reference, found {}", other.kind()));
                None
            }
        }
    }
}

const FARM_KEYS: &[&str] = &[
    "name",
    "total_area",
    "marginal_area",
    "cap_aid",
    "amortization_horizon",
    "factors",
    "compare",
    "climate",
];
const PRODUCT_KEYS: &[&str] = &["kind", "label", "active_ingredient", "density", "flow"];
const CROP_KEYS: &[&str] = &[
    "land_class",
    "perennial",
    "life_span",
    "area",
    "cultivar",
    "soc_equilibrium",
    "soc_before",
    "soc_after",
    "grain_yield",
    "straw_yield",
    "grain_price",
    "straw_price",
    "sales",
    "seed_yield",
    "seed_yield_share",
    "seed_cost",
    "seed_cost_establishment",
    "herbicide_cost",
    "herbicide_cost_establishment",
    "fertilizer_cost",
    "fertilizer_cost_establishment",
    "machinery_cost",
    "machinery_cost_establishment",
];
const OP_KEYS: &[&str] = &[
    "kind",
    "timing",
    "product",
    "dose",
    "diesel",
    "tractor",
    "harvester",
    "tillage_implement",
    "other_implement",
];
const YEAR_KEYS: &[&str] = &["area", "grain_yield", "straw_yield", "grain_price", "straw_price"];
const SOIL_KEYS: &[&str] = &[
    "depth",
    "bulk_density",
    "coarse_fraction",
    "organic_matter",
    "organic_carbon",
];

fn read_product(section: &Section, report: &mut ValidationReport) -> Option<ProductSpec> {
    let id = section.path[1].clone();
    let mut r = Reader {
        section,
        report,
        allowed: PRODUCT_KEYS,
    };
    r.check_keys();
    let kind = match r.ident("kind").as_deref() {
        Some("fertilizer") => ProductKind::Fertilizer,
        Some("herbicide") => ProductKind::Herbicide,
        Some("seed") => ProductKind::Seed,
        Some(other) => {
            r.bad("kind", format!("unknown product kind `{other}`"));
            return None;
        }
        None => {
            if section.get("kind").is_none() {
                r.missing("kind");
            }
            return None;
        }
    };
    let label = r.text("label");
    let composition = match (kind, &label) {
        (ProductKind::Fertilizer, Some(l)) => match parse_product_label(l) {
            Ok(p) => p.composition,
            Err(e) => {
                r.bad("label", e.to_string());
                return None;
            }
        },
        (ProductKind::Fertilizer, None) => {
            r.missing("label");
            return None;
        }
        _ => None,
    };
    let active_ingredient_fraction = match kind {
        ProductKind::Herbicide => Some(r.required_fraction("active_ingredient")?),
        _ => r.fraction("active_ingredient"),
    };
    let density_kg_per_l = r.quantity("density", "kg/L").unwrap_or(1.0);
    let flow_id = r.ident("flow").unwrap_or_else(|| id.clone());
    Some(ProductSpec {
        id,
        kind,
        label,
        composition,
        active_ingredient_fraction,
        density_kg_per_l,
        flow_id,
    })
}

fn read_operation(section: &Section, report: &mut ValidationReport) -> Option<FieldOperation> {
    let name = section.path[3].clone();
    let mut r = Reader {
        section,
        report,
        allowed: OP_KEYS,
    };
    r.check_keys();
    let kind = match r.ident("kind").as_deref() {
        Some("sowing") => OperationKind::Sowing,
        Some("fertilization") => OperationKind::Fertilization,
        Some("herbicide") => OperationKind::Herbicide,
        Some("fieldwork") => OperationKind::Fieldwork,
        Some(other) => {
            r.bad("kind", format!("unknown operation kind `{other}`"));
            return None;
        }
        None => {
            if section.get("kind").is_none() {
                r.missing("kind");
            }
            return None;
        }
    };
    let timing = match r.ident("timing").as_deref() {
        None => Timing::Recurrent,
        Some("recurrent") => Timing::Recurrent,
        Some("establishment") => Timing::Establishment,
        Some(other) => {
            r.bad("timing", format!("unknown timing `{other}`"));
            Timing::Recurrent
        }
    };
    let product = r.ident("product");
    let dose = r.quantity_raw("dose");
    let machinery = MachineryMasses {
        tractor: r.quantity("tractor", "Mg/ha").unwrap_or(0.0),
        harvester: r.quantity("harvester", "Mg/ha").unwrap_or(0.0),
        tillage_implement: r.quantity("tillage_implement", "Mg/ha").unwrap_or(0.0),
        other_implement: r.quantity("other_implement", "Mg/ha").unwrap_or(0.0),
    };
    Some(FieldOperation {
        name,
        kind,
        timing,
        product,
        dose,
        diesel_l: r.quantity("diesel", "L/ha").unwrap_or(0.0),
        machinery,
    })
}

fn read_year(section: &Section, report: &mut ValidationReport) -> Option<YearRecord> {
    let year = section.path[3].clone();
    let mut r = Reader {
        section,
        report,
        allowed: YEAR_KEYS,
    };
    r.check_keys();
    Some(YearRecord {
        year,
        area_ha: r.required_quantity("area", "ha")?,
        grain_yield: r.quantity("grain_yield", "Mg/ha").unwrap_or(0.0),
        straw_yield: r.quantity("straw_yield", "Mg/ha").unwrap_or(0.0),
        grain_price: r.quantity("grain_price", "EUR/Mg").unwrap_or(0.0),
        straw_price: r.quantity("straw_price", "EUR/Mg").unwrap_or(0.0),
    })
}

fn read_cost(r: &mut Reader<'_>, item: &str) -> CostItem {
    CostItem {
        recurrent: r.quantity(&format!("{item}_cost"), "EUR/ha").unwrap_or(0.0),
        establishment: r
            .quantity(&format!("{item}_cost_establishment"), "EUR/ha")
            .unwrap_or(0.0),
    }
}

fn read_crop(
    doc: &Document,
    section: &Section,
    marginal_area: f64,
    report: &mut ValidationReport,
) -> Option<CropPlan> {
    let name = section.path[1].clone();
    let mut r = Reader {
        section,
        report,
        allowed: CROP_KEYS,
    };
    r.check_keys();
    let land_class = match r.ident("land_class").as_deref() {
        Some("marginal") => LandClass::Marginal,
        Some("non_marginal") => LandClass::NonMarginal,
        Some("fallow") => LandClass::Fallow,
        Some(other) => {
            r.bad("land_class", format!("unknown land class `{other}`"));
            return None;
        }
        None => {
            if section.get("land_class").is_none() {
                r.missing("land_class");
            }
            return None;
        }
    };
    let perennial = r.boolean("perennial").unwrap_or(false);
    let life_span_years = r.years("life_span").unwrap_or(1);
    let area_ha = if land_class == LandClass::Marginal {
        r.quantity("area", "ha").unwrap_or(marginal_area)
    } else {
        r.required_quantity("area", "ha")?
    };
    let soc_samples = match (r.sample_ref("soc_before"), r.sample_ref("soc_after")) {
        (Some(b), Some(a)) => Some((b, a)),
        (None, None) => None,
        (Some(_), None) => {
            r.missing("soc_after");
            None
        }
        (None, Some(_)) => {
            r.missing("soc_before");
            None
        }
    };
    let seed_yield = match (
        r.quantity("seed_yield", "Mg/ha"),
        r.fraction("seed_yield_share"),
    ) {
        (Some(y), None) => SeedYield::Explicit(y),
        (None, Some(s)) => SeedYield::Share(s),
        (None, None) => SeedYield::Grain,
        (Some(y), Some(_)) => {
            r.bad("seed_yield_share", "give either seed_yield or seed_yield_share".into());
            SeedYield::Explicit(y)
        }
    };
    let costs = CostSheet {
        seed: read_cost(&mut r, "seed"),
        herbicide: read_cost(&mut r, "herbicide"),
        fertilizer: read_cost(&mut r, "fertilizer"),
        machinery_labor: read_cost(&mut r, "machinery"),
    };
    let mut crop = CropPlan {
        cultivar: r.text("cultivar"),
        land_class,
        perennial,
        life_span_years,
        area_ha,
        soc_equilibrium: r.boolean("soc_equilibrium").unwrap_or(false),
        soc_samples,
        schedule: Vec::new(),
        grain_yield: r.quantity("grain_yield", "Mg/ha").unwrap_or(0.0),
        straw_yield: r.quantity("straw_yield", "Mg/ha").unwrap_or(0.0),
        grain_price: r.quantity("grain_price", "EUR/Mg"),
        straw_price: r.quantity("straw_price", "EUR/Mg"),
        recorded_sales: r.quantity("sales", "EUR/ha"),
        yearly: Vec::new(),
        seed_yield,
        costs,
        name,
    };

    for sub in doc.sections.iter().filter(|s| {
        s.path.len() >= 2 && s.path[0] == "crop" && s.path[1] == crop.name && s.path.len() > 2
    }) {
        match (sub.path.len(), sub.path[2].as_str()) {
            (4, "op") => {
                if let Some(op) = read_operation(sub, report) {
                    crop.schedule.push(op);
                }
            }
            (4, "year") => {
                if let Some(y) = read_year(sub, report) {
                    crop.yearly.push(y);
                }
            }
            _ => report.warning(sub.name(), "unknown section kind", Some(sub.line)),
        }
    }
    Some(crop)
}

fn read_soil(section: &Section, report: &mut ValidationReport) -> Option<SoilSample> {
    let key = format!("{}.{}", section.path[1], section.path[2]);
    let year: Option<i32> = section.path[2].parse().ok();
    let mut r = Reader {
        section,
        report,
        allowed: SOIL_KEYS,
    };
    r.check_keys();
    let Some(year) = year else {
        r.report.error(
            section.name(),
            "soil section must be `[soil.<land>.<year>]`",
            Some(section.line),
        );
        return None;
    };
    let depth_m = r.required_quantity("depth", "m");
    let bulk_density = r.required_quantity("bulk_density", "Mg/m3");
    let coarse = r.required_fraction("coarse_fraction");
    let om = r.required_fraction("organic_matter");
    let oc = r.required_fraction("organic_carbon");
    Some(SoilSample {
        key,
        year,
        depth_m: depth_m?,
        bulk_density: bulk_density?,
        coarse_fraction_vol: coarse?,
        organic_matter_fraction: om?,
        organic_carbon_fraction: oc?,
    })
}

/// Builds a model from a parsed document, collecting structural problems
/// (missing or mistyped keys). Semantic invariants are left to
/// [`validate_model`].
pub fn build_model(doc: &Document) -> Result<(FarmModel, ValidationReport), ValidationReport> {
    let mut report = ValidationReport::default();
    let Some(farm) = doc.section(&["farm"]) else {
        report.error("farm", "no farm section", None);
        return Err(report);
    };
    let mut r = Reader {
        section: farm,
        report: &mut report,
        allowed: FARM_KEYS,
    };
    r.check_keys();
    let name = r.text("name").unwrap_or_default();
    let total_area = r.required_quantity("total_area", "ha");
    let marginal_area = r.required_quantity("marginal_area", "ha");
    let cap_aid = r.required_quantity("cap_aid", "EUR/ha");
    let horizon = r
        .years("amortization_horizon")
        .unwrap_or(DEFAULT_HORIZON_YEARS);
    let factors_file = r.text("factors");
    let compare = match r.ident_list("compare") {
        Some(v) if v.len() == 2 => Some((v[0].clone(), v[1].clone())),
        Some(v) => {
            r.bad(
                "compare",
                format!("expected exactly one pair of crops, found {} names", v.len()),
            );
            None
        }
        None => {
            if farm.get("compare").is_none() {
                r.missing("compare");
            }
            None
        }
    };
    let climate = r.text("climate");

    let mut products = BTreeMap::new();
    let mut crops = Vec::new();
    let mut soil_samples = BTreeMap::new();
    for section in &doc.sections {
        match (section.path[0].as_str(), section.path.len()) {
            ("farm", 1) => {}
            ("product", 2) => {
                if let Some(p) = read_product(section, &mut report) {
                    products.insert(p.id.clone(), p);
                }
            }
            ("crop", 2) => {
                if let Some(c) = read_crop(doc, section, marginal_area.unwrap_or(0.0), &mut report) {
                    crops.push(c);
                }
            }
            ("crop", n) if n > 2 => {
                if doc.section(&["crop", section.path[1].as_str()]).is_none() {
                    report.error(
                        section.name(),
                        format!("section belongs to undefined crop `{}`", section.path[1]),
                        Some(section.line),
                    );
                }
            }
            ("soil", 3) => {
                if let Some(s) = read_soil(section, &mut report) {
                    soil_samples.insert(s.key.clone(), s);
                }
            }
            _ => report.warning(section.name(), "unknown section kind", Some(section.line)),
        }
    }
    if crops.is_empty() {
        report.error("crop", "no crop sections", None);
    }

    match (total_area, marginal_area, cap_aid, compare) {
        (Some(total_area_ha), Some(marginal_area_ha), Some(cap_aid), Some(comparison))
            if !report.has_errors() =>
        {
            Ok((
                FarmModel {
                    name,
                    total_area_ha,
                    marginal_area_ha,
                    cap_aid,
                    amortization_horizon_years: horizon,
                    factors_file,
                    comparison,
                    climate,
                    products,
                    crops,
                    soil_samples,
                },
                report,
            ))
        }
        _ => Err(report),
    }
}

/// A parsed model together with any non-fatal findings.
#[derive(Debug, Clone)]
pub struct LoadedFarm {
    pub model: FarmModel,
    pub report: ValidationReport,
}

/// Parses and validates a farm description, returning warnings alongside
/// the model. Fails with every collected error if any invariant breaks.
pub fn load_farm(text: &str) -> Result<LoadedFarm, FarmError> {
    let doc = parse_document(text)?;
    let (model, mut report) = build_model(&doc).map_err(FarmError::Invalid)?;
    report.extend(validate_model(&model));
    if report.has_errors() {
        return Err(FarmError::Invalid(report));
    }
    Ok(LoadedFarm { model, report })
}

pub fn parse_farm_document(text: &str) -> Result<FarmModel, FarmError> {
    load_farm(text).map(|l| l.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FARM_SORIA;

    #[test]
    fn shipped_farm_parses() {
        let loaded = load_farm(FARM_SORIA).unwrap();
        let m = &loaded.model;
        assert_eq!(m.crops.len(), 7);
        assert_eq!(m.total_area_ha, 302.0);
        assert!(validate_model(m).is_empty(), "{}", validate_model(m));
        assert!(loaded.report.is_empty(), "{}", loaded.report);
        let twg = m.crop("tall_wheatgrass").unwrap();
        assert!((twg.seed_yield() - 0.165).abs() < 1e-12);
        assert_eq!(m.crop("rye").unwrap().seed_yield(), 1.50);
    }

    #[test]
    fn parse_is_deterministic() {
        assert_eq!(
            parse_farm_document(FARM_SORIA).unwrap(),
            parse_farm_document(FARM_SORIA).unwrap()
        );
    }

    #[test]
    fn empty_document() {
        match parse_farm_document("") {
            Err(FarmError::Invalid(r)) => {
                assert!(r.errors().any(|d| d.message == "no farm section"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn area_mismatch_is_reported() {
        let text = FARM_SORIA.replace("area = 111 ha", "area = 110 ha");
        match parse_farm_document(&text) {
            Err(FarmError::Invalid(r)) => {
                assert!(r.errors().any(|d| d.message.contains("301 ha")), "{r}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_are_collected() {
        let text = FARM_SORIA
            .replace("area = 111 ha", "area = 110 ha")
            .replace("product = d24_acid_60", "product = nonexistent")
            .replace("cap_aid = 165 EUR/ha", "");
        match parse_farm_document(&text) {
            Err(FarmError::Invalid(r)) => {
                assert!(r.errors().any(|d| d.path == "farm.cap_aid"), "{r}");
            }
            other => panic!("unexpected {other:?}"),
        }
        // Without the structural error, semantic errors are all listed.
        let text = FARM_SORIA
            .replace("area = 111 ha", "area = 110 ha")
            .replace("product = d24_acid_60", "product = nonexistent");
        match parse_farm_document(&text) {
            Err(FarmError::Invalid(r)) => {
                assert!(r.errors().count() >= 3, "{r}");
                assert!(r.errors().any(|d| d.message.contains("unresolved product")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn annual_with_multi_year_span_warns() {
        let mut m = parse_farm_document(FARM_SORIA).unwrap();
        let rye = m.crops.iter_mut().find(|c| c.name == "rye").unwrap();
        rye.life_span_years = 4;
        let r = validate_model(&m);
        assert!(!r.has_errors());
        assert!(r
            .warnings()
            .any(|d| d.message == "annual crop with multi-year span"));
    }

    #[test]
    fn undefined_herbicide_product_is_an_error() {
        let mut m = parse_farm_document(FARM_SORIA).unwrap();
        let rye = m.crops.iter_mut().find(|c| c.name == "rye").unwrap();
        let op = rye
            .schedule
            .iter_mut()
            .find(|o| o.kind == OperationKind::Herbicide)
            .unwrap();
        op.product = Some("ghost".into());
        let r = validate_model(&m);
        assert!(r.errors().any(|d| d.message.contains("`ghost`")));
    }

    #[test]
    fn truncated_file_is_a_syntax_error() {
        let cut = &FARM_SORIA[..FARM_SORIA.find("[crop.rye]").unwrap() + 6];
        assert!(matches!(parse_farm_document(cut), Err(FarmError::Syntax(_))));
    }

    #[test]
    fn yearly_records_are_read() {
        let text = format!(
            "{FARM_SORIA}\n[crop.wheat.year.2014]\narea = 100 ha\ngrain_yield = 3 Mg/ha\ngrain_price = 170 EUR/Mg\n"
        );
        let m = parse_farm_document(&text).unwrap();
        assert_eq!(m.crop("wheat").unwrap().yearly.len(), 1);
    }
}
