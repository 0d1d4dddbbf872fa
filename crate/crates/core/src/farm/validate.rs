use std::fmt;

use serde::Serialize;

use super::{CropPlan, FarmModel, LandClass, OperationKind, ProductKind, Timing};
use crate::quantity::{BaseUnit, Dimension, Unit};

/// Tolerance on the farm area balance, in ha.
pub const AREA_TOLERANCE_HA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.line {
            Some(l) => write!(f, "{sev}: {} (line {l}): {}", self.path, self.message),
            None => write!(f, "{sev}: {}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Warning)
    }

    pub(crate) fn error(&mut self, path: impl Into<String>, message: impl Into<String>, line: Option<usize>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
            line,
        });
    }

    pub(crate) fn warning(&mut self, path: impl Into<String>, message: impl Into<String>, line: Option<usize>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
            line,
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.diagnostics.extend(other.diagnostics);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

fn per_ha(num: BaseUnit) -> Dimension {
    Unit::base(num).div(&Unit::base(BaseUnit::Ha)).dimension()
}

fn check_crop(model: &FarmModel, crop: &CropPlan, report: &mut ValidationReport) {
    let path = format!("crop.{}", crop.name);
    if !crop.perennial {
        if crop.life_span_years > 1 {
            report.warning(&path, "annual crop with multi-year span", None);
        }
        for op in crop.schedule.iter().filter(|o| o.timing == Timing::Establishment) {
            report.error(
                format!("{path}.op.{}", op.name),
                "annual crop cannot have establishment-only operations",
                None,
            );
        }
    } else {
        if crop.life_span_years == 0 {
            report.error(&path, "life span must be at least 1 year", None);
        }
        if model.amortization_horizon_years > crop.life_span_years && crop.life_span_years > 0 {
            report.warning(
                &path,
                format!(
                    "amortization horizon ({} y) exceeds crop life span ({} y)",
                    model.amortization_horizon_years, crop.life_span_years
                ),
                None,
            );
        }
    }

    for (what, v) in [
        ("grain yield", crop.grain_yield),
        ("straw yield", crop.straw_yield),
        ("area", crop.area_ha),
    ] {
        if v < 0.0 {
            report.error(&path, format!("{what} is negative ({v})"), None);
        }
    }
    if crop.grain_yield > 0.0 && crop.grain_price.is_none() {
        report.error(&path, "missing grain price", None);
    }
    if crop.straw_yield > 0.0 && crop.straw_price.is_none() {
        report.error(&path, "missing straw price", None);
    }
    for (what, item) in crop.costs.items() {
        if item.recurrent < 0.0 || item.establishment < 0.0 {
            report.error(&path, format!("{what} cost is negative"), None);
        }
        if !crop.perennial && item.establishment != 0.0 {
            report.error(
                &path,
                format!("annual crop cannot carry establishment {what} cost"),
                None,
            );
        }
    }

    if crop.land_class == LandClass::Marginal
        && (crop.area_ha - model.marginal_area_ha).abs() > AREA_TOLERANCE_HA
    {
        report.error(
            &path,
            format!(
                "marginal crop area {} ha differs from farm marginal area {} ha",
                crop.area_ha, model.marginal_area_ha
            ),
            None,
        );
    }

    let mut sows_own_seed = false;
    for op in &crop.schedule {
        let op_path = format!("{path}.op.{}", op.name);
        if op.diesel_l < 0.0 || op.machinery.as_array().iter().any(|m| *m < 0.0) {
            report.error(&op_path, "diesel and machinery masses must be non-negative", None);
        }
        if let Some(dose) = &op.dose {
            if dose.value < 0.0 {
                report.error(&op_path, "negative dose", None);
            }
            let dim = dose.unit.dimension();
            let ok = match op.kind {
                OperationKind::Sowing | OperationKind::Fertilization => dim == per_ha(BaseUnit::Kg),
                OperationKind::Herbicide => {
                    dim == per_ha(BaseUnit::Kg) || dim == per_ha(BaseUnit::L)
                }
                OperationKind::Fieldwork => false,
            };
            if !ok {
                report.error(
                    &op_path,
                    format!("dose unit `{}` is not valid for a {} operation", dose.unit, op.kind),
                    None,
                );
            }
        } else if op.kind != OperationKind::Fieldwork {
            report.error(&op_path, format!("{} operation without dose", op.kind), None);
        }

        let expected = match op.kind {
            OperationKind::Fertilization => Some(ProductKind::Fertilizer),
            OperationKind::Herbicide => Some(ProductKind::Herbicide),
            OperationKind::Sowing => Some(ProductKind::Seed),
            OperationKind::Fieldwork => None,
        };
        match (&op.product, expected) {
            (Some(id), Some(kind)) => match model.products.get(id) {
                None => report.error(&op_path, format!("unresolved product reference `{id}`"), None),
                Some(p) if p.kind != kind => report.error(
                    &op_path,
                    format!("product `{id}` is a {:?} product, expected {:?}", p.kind, kind),
                    None,
                ),
                Some(_) => {}
            },
            (None, Some(ProductKind::Seed)) => sows_own_seed = true,
            (None, Some(_)) => report.error(&op_path, format!("{} operation without product", op.kind), None),
            (Some(id), None) => report.warning(
                &op_path,
                format!("product `{id}` ignored on a fieldwork operation"),
                None,
            ),
            (None, None) => {}
        }
    }
    if sows_own_seed && crop.seed_yield() <= 0.0 {
        report.error(&path, "farm-saved seed requires a positive seed yield", None);
    }

    if let Some((before, after)) = &crop.soc_samples {
        let b = model.soil_samples.get(before);
        let a = model.soil_samples.get(after);
        if b.is_none() {
            report.error(&path, format!("unresolved soil sample `{before}`"), None);
        }
        if a.is_none() {
            report.error(&path, format!("unresolved soil sample `{after}`"), None);
        }
        if let (Some(b), Some(a)) = (b, a) {
            if a.year <= b.year {
                report.error(&path, "soil sample `soc_after` must be later than `soc_before`", None);
            }
        }
        if crop.soc_equilibrium {
            report.warning(&path, "soc_equilibrium is set; soil samples are ignored", None);
        }
    }
}

/// Checks every model invariant; returns all findings rather than the first.
pub fn validate_model(model: &FarmModel) -> ValidationReport {
    let mut report = ValidationReport::default();

    if model.amortization_horizon_years < 1 {
        report.error("farm", "amortization horizon must be at least 1 year", None);
    }
    if model.cap_aid < 0.0 {
        report.error("farm", "CAP aid is negative", None);
    }

    let occupied: f64 = model
        .crops
        .iter()
        .filter(|c| c.land_class != LandClass::Marginal)
        .map(|c| c.area_ha)
        .sum::<f64>()
        + model.marginal_area_ha;
    if (occupied - model.total_area_ha).abs() > AREA_TOLERANCE_HA {
        report.error(
            "farm",
            format!(
                "crop areas sum to {occupied} ha but the farm declares {} ha",
                model.total_area_ha
            ),
            None,
        );
    }

    let (cand, base) = &model.comparison;
    for name in [cand, base] {
        match model.crop(name) {
            None => report.error("farm.compare", format!("unknown crop `{name}`"), None),
            Some(c) if c.land_class != LandClass::Marginal => report.error(
                "farm.compare",
                format!("crop `{name}` is not a marginal-land crop"),
                None,
            ),
            Some(_) => {}
        }
    }
    if cand == base {
        report.error("farm.compare", "comparison pair must name two different crops", None);
    }

    for (id, p) in &model.products {
        let path = format!("product.{id}");
        match p.kind {
            ProductKind::Herbicide => match p.active_ingredient_fraction {
                None => report.error(&path, "herbicide without active_ingredient", None),
                Some(f) if !(0.0..=1.0).contains(&f) => {
                    report.error(&path, "active ingredient fraction outside [0, 1]", None)
                }
                _ => {}
            },
            ProductKind::Fertilizer => match p.composition {
                None => report.error(&path, "fertilizer without composition label", None),
                Some(c) => {
                    if [c.n, c.p, c.k].iter().any(|f| !(0.0..=1.0).contains(f))
                        || c.n + c.p + c.k > 1.0 + 1e-12
                    {
                        report.error(&path, "nutrient fractions outside [0, 1]", None);
                    }
                }
            },
            ProductKind::Seed => {}
        }
        if p.density_kg_per_l <= 0.0 {
            report.error(&path, "density must be positive", None);
        }
    }

    for (key, s) in &model.soil_samples {
        let path = format!("soil.{key}");
        if s.depth_m <= 0.0 {
            report.error(&path, "depth must be positive", None);
        }
        if s.bulk_density <= 0.0 {
            report.error(&path, "bulk density must be positive", None);
        }
        if !(0.0..1.0).contains(&s.coarse_fraction_vol) {
            report.error(&path, "coarse fraction must lie in [0, 1)", None);
        }
        if s.organic_carbon_fraction > s.organic_matter_fraction {
            report.error(&path, "organic carbon exceeds organic matter", None);
        }
    }

    for crop in &model.crops {
        check_crop(model, crop, &mut report);
    }
    report
}
