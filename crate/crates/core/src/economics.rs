//! Per-hectare crop balances, whole-farm income and the marginal-share sweep.
//!
//! All amounts are EUR/ha·y at full floating precision; rounding happens only
//! when reports are written.

use serde::Serialize;
use thiserror::Error;

use crate::farm::{CropPlan, FarmModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconomicsError {
    #[error("crop `{crop}` has a positive {output} yield but no {output} price")]
    MissingPrice { crop: String, output: &'static str },
    #[error("crop `{crop}`: negative {what}")]
    Negative { crop: String, what: String },
    #[error("unknown crop `{0}`")]
    UnknownCrop(String),
    #[error("crop `{0}` is not a marginal-land crop")]
    NotMarginal(String),
    #[error("marginal share {0} is outside (0, 1)")]
    ShareOutOfRange(f64),
    #[error("amortization horizon must be at least 1 year, got {0}")]
    Horizon(u32),
    #[error("the farm has no non-marginal area to rescale")]
    NoNonMarginalArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SalesSource {
    /// Recorded weighted-average sales.
    Recorded,
    /// Area-weighted average of per-year yields × prices.
    Yearly,
    YieldsTimesPrices,
}

/// Annualized cost lines, EUR/ha·y.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Costs {
    pub seed: f64,
    pub herbicide: f64,
    pub fertilizer: f64,
    pub machinery_labor: f64,
}

impl Costs {
    pub fn total(&self) -> f64 {
        self.seed + self.herbicide + self.fertilizer + self.machinery_labor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicBalance {
    pub crop: String,
    pub costs: Costs,
    pub total_cost: f64,
    /// Grain yield × price.
    pub grain_sales: f64,
    /// Straw or biomass yield × price.
    pub straw_sales: f64,
    pub sales_source: SalesSource,
    pub total_sales: f64,
    pub cap_aid: f64,
    pub balance_without_cap: f64,
    pub balance_with_cap: f64,
}

impl EconomicBalance {
    /// Sales from the averaged yields and prices, whatever the source used.
    pub fn computed_sales(&self) -> f64 {
        self.grain_sales + self.straw_sales
    }
}

fn non_negative(crop: &CropPlan, what: &str, v: f64) -> Result<(), EconomicsError> {
    if v < 0.0 {
        return Err(EconomicsError::Negative {
            crop: crop.name.clone(),
            what: what.to_string(),
        });
    }
    Ok(())
}

fn output_sales(crop: &CropPlan, output: &'static str, y: f64, price: Option<f64>) -> Result<f64, EconomicsError> {
    match price {
        Some(p) => Ok(y * p),
        None if y > 0.0 => Err(EconomicsError::MissingPrice {
            crop: crop.name.clone(),
            output,
        }),
        None => Ok(0.0),
    }
}

/// Per-hectare balance. Establishment costs are divided by `horizon_years`.
pub fn crop_balance(crop: &CropPlan, cap_aid: f64, horizon_years: u32) -> Result<EconomicBalance, EconomicsError> {
    if horizon_years < 1 {
        return Err(EconomicsError::Horizon(horizon_years));
    }
    for op in &crop.schedule {
        if let Some(d) = &op.dose {
            non_negative(crop, &format!("dose in `{}`", op.name), d.value)?;
        }
    }
    non_negative(crop, "grain yield", crop.grain_yield)?;
    non_negative(crop, "straw yield", crop.straw_yield)?;
    let h = f64::from(horizon_years);
    let mut annual = [0.0; 4];
    for (slot, (name, item)) in annual.iter_mut().zip(crop.costs.items()) {
        non_negative(crop, &format!("{name} cost"), item.recurrent)?;
        non_negative(crop, &format!("{name} establishment cost"), item.establishment)?;
        *slot = item.recurrent + item.establishment / h;
    }
    let costs = Costs {
        seed: annual[0],
        herbicide: annual[1],
        fertilizer: annual[2],
        machinery_labor: annual[3],
    };
    let grain_sales = output_sales(crop, "grain", crop.grain_yield, crop.grain_price)?;
    let straw_sales = output_sales(crop, "straw", crop.straw_yield, crop.straw_price)?;

    let (sales_source, total_sales) = if let Some(s) = crop.recorded_sales {
        (SalesSource::Recorded, s)
    } else if !crop.yearly.is_empty() {
        let area: f64 = crop.yearly.iter().map(|y| y.area_ha).sum();
        let weighted: f64 = crop
            .yearly
            .iter()
            .map(|y| y.area_ha * (y.grain_yield * y.grain_price + y.straw_yield * y.straw_price))
            .sum();
        (SalesSource::Yearly, if area > 0.0 { weighted / area } else { 0.0 })
    } else {
        (SalesSource::YieldsTimesPrices, grain_sales + straw_sales)
    };

    let total_cost = costs.total();
    let balance_without_cap = total_sales - total_cost;
    Ok(EconomicBalance {
        crop: crop.name.clone(),
        costs,
        total_cost,
        grain_sales,
        straw_sales,
        sales_source,
        total_sales,
        cap_aid,
        balance_without_cap,
        balance_with_cap: balance_without_cap + cap_aid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncomeLine {
    pub crop: String,
    pub area_ha: f64,
    pub balance_with_cap: f64,
    /// EUR/y
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarmIncome {
    pub marginal_choice: String,
    pub lines: Vec<IncomeLine>,
    /// EUR/y
    pub total: f64,
}

fn marginal_crop<'a>(model: &'a FarmModel, name: &str) -> Result<&'a CropPlan, EconomicsError> {
    let crop = model
        .crop(name)
        .ok_or_else(|| EconomicsError::UnknownCrop(name.to_string()))?;
    if !crop.is_marginal() {
        return Err(EconomicsError::NotMarginal(name.to_string()));
    }
    Ok(crop)
}

/// Income with non-marginal areas scaled by `scale` and the marginal land
/// (`marginal_area_ha`) planted to `choice`.
fn income_with(
    model: &FarmModel,
    choice: &CropPlan,
    marginal_area_ha: f64,
    scale: f64,
    horizon: u32,
) -> Result<FarmIncome, EconomicsError> {
    let mut lines = Vec::new();
    for crop in model.non_marginal_crops() {
        let b = crop_balance(crop, model.cap_aid, horizon)?;
        let area_ha = crop.area_ha * scale;
        lines.push(IncomeLine {
            crop: crop.name.clone(),
            area_ha,
            balance_with_cap: b.balance_with_cap,
            contribution: area_ha * b.balance_with_cap,
        });
    }
    let b = crop_balance(choice, model.cap_aid, horizon)?;
    lines.push(IncomeLine {
        crop: choice.name.clone(),
        area_ha: marginal_area_ha,
        balance_with_cap: b.balance_with_cap,
        contribution: marginal_area_ha * b.balance_with_cap,
    });
    Ok(FarmIncome {
        marginal_choice: choice.name.clone(),
        total: lines.iter().map(|l| l.contribution).sum(),
        lines,
    })
}

/// Whole-farm income, EUR/y, with the marginal land planted to `marginal_choice`.
pub fn farm_income(model: &FarmModel, marginal_choice: &str) -> Result<FarmIncome, EconomicsError> {
    let choice = marginal_crop(model, marginal_choice)?;
    income_with(model, choice, model.marginal_area_ha, 1.0, model.amortization_horizon_years)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub share: f64,
    pub marginal_area_ha: f64,
    pub income_candidate: f64,
    pub income_baseline: f64,
    /// (candidate − baseline) / baseline, as a fraction.
    pub relative_difference: f64,
}

/// Relative income difference of the farm's comparison pair as the marginal
/// share of the total area varies. The non-marginal mix is scaled
/// proportionally to fill the remaining area.
pub fn marginal_share_sweep(model: &FarmModel, shares: &[f64]) -> Result<Vec<SweepPoint>, EconomicsError> {
    let (cand_name, base_name) = &model.comparison;
    let candidate = marginal_crop(model, cand_name)?;
    let baseline = marginal_crop(model, base_name)?;
    let non_marginal: f64 = model.non_marginal_crops().map(|c| c.area_ha).sum();
    if non_marginal <= 0.0 {
        return Err(EconomicsError::NoNonMarginalArea);
    }
    let horizon = model.amortization_horizon_years;
    shares
        .iter()
        .map(|&s| {
            if !(s > 0.0 && s < 1.0) {
                return Err(EconomicsError::ShareOutOfRange(s));
            }
            let marginal_area_ha = s * model.total_area_ha;
            let scale = (model.total_area_ha - marginal_area_ha) / non_marginal;
            let a = income_with(model, candidate, marginal_area_ha, scale, horizon)?.total;
            let b = income_with(model, baseline, marginal_area_ha, scale, horizon)?.total;
            Ok(SweepPoint {
                share: s,
                marginal_area_ha,
                income_candidate: a,
                income_baseline: b,
                relative_difference: (a - b) / b,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm::parse_farm_document;
    use crate::fixtures::FARM_SORIA;
    use proptest::prelude::*;

    fn model() -> FarmModel {
        parse_farm_document(FARM_SORIA).unwrap()
    }

    fn balance(m: &FarmModel, name: &str) -> EconomicBalance {
        crop_balance(m.crop(name).unwrap(), m.cap_aid, m.amortization_horizon_years).unwrap()
    }

    #[test]
    fn rye_balance() {
        let b = balance(&model(), "rye");
        assert!((b.total_cost - 304.80).abs() < 1e-9);
        assert!((b.total_sales - 284.9331).abs() < 1e-9);
        assert!((b.balance_with_cap - 145.14).abs() < 0.02);
        assert!((b.balance_without_cap + 19.87).abs() < 0.01);
        assert_eq!(b.sales_source, SalesSource::YieldsTimesPrices);
    }

    #[test]
    fn twg_balance_spreads_establishment() {
        let b = balance(&model(), "tall_wheatgrass");
        assert_eq!(b.costs.seed, 35.0);
        assert_eq!(b.costs.herbicide, 1.725);
        assert!((b.total_sales - 241.065).abs() < 1e-9);
        assert!((b.balance_with_cap - 156.19).abs() < 0.01);
    }

    #[test]
    fn identities_hold_exactly() {
        let m = model();
        for c in &m.crops {
            let b = balance(&m, &c.name);
            assert_eq!(b.total_cost, b.costs.total());
            assert_eq!(b.balance_without_cap, b.total_sales - b.total_cost);
            assert_eq!(b.balance_with_cap, b.balance_without_cap + b.cap_aid);
        }
    }

    #[test]
    fn zero_crop() {
        let mut m = model();
        let c = m.crops.iter_mut().find(|c| c.name == "fallow").unwrap();
        c.costs = Default::default();
        let b = crop_balance(c, 165.0, 4).unwrap();
        assert_eq!(b.total_sales, 0.0);
        assert_eq!(b.balance_without_cap, 0.0);
        assert_eq!(b.balance_with_cap, 165.0);
    }

    #[test]
    fn missing_price_and_negative_dose() {
        let m = model();
        let mut rye = m.crop("rye").unwrap().clone();
        rye.straw_price = None;
        assert!(matches!(crop_balance(&rye, 0.0, 4), Err(EconomicsError::MissingPrice { output: "straw", .. })));
        let mut rye = m.crop("rye").unwrap().clone();
        rye.schedule[0].dose.as_mut().unwrap().value = -1.0;
        assert!(matches!(crop_balance(&rye, 0.0, 4), Err(EconomicsError::Negative { .. })));
    }

    #[test]
    fn yearly_records_are_area_weighted() {
        let mut rye = model().crop("rye").unwrap().clone();
        let year = |area_ha: f64, grain_yield: f64| crate::farm::YearRecord {
            year: "y".into(),
            area_ha,
            grain_yield,
            straw_yield: 0.0,
            grain_price: 100.0,
            straw_price: 0.0,
        };
        rye.yearly = vec![year(30.0, 1.0), year(10.0, 3.0)];
        let b = crop_balance(&rye, 0.0, 4).unwrap();
        assert_eq!(b.sales_source, SalesSource::Yearly);
        assert!((b.total_sales - 150.0).abs() < 1e-12);
    }

    #[test]
    fn income_scenarios() {
        let m = model();
        let twg = farm_income(&m, "tall_wheatgrass").unwrap();
        let rye = farm_income(&m, "rye").unwrap();
        assert!((twg.total - 94_778.44).abs() < 0.5, "{}", twg.total);
        assert!((rye.total - 94_336.16).abs() < 0.5, "{}", rye.total);
        let sum: f64 = twg.lines.iter().map(|l| l.area_ha * l.balance_with_cap).sum();
        assert_eq!(twg.total, sum);
        assert_eq!(farm_income(&m, "oats").unwrap_err(), EconomicsError::UnknownCrop("oats".into()));
        assert_eq!(farm_income(&m, "wheat").unwrap_err(), EconomicsError::NotMarginal("wheat".into()));
    }

    #[test]
    fn zero_areas_zero_income() {
        let mut m = model();
        m.crops.iter_mut().for_each(|c| c.area_ha = 0.0);
        m.marginal_area_ha = 0.0;
        assert_eq!(farm_income(&m, "rye").unwrap().total, 0.0);
    }

    #[test]
    fn sweep_points() {
        let m = model();
        let pts = marginal_share_sweep(&m, &[40.0 / 302.0, 0.5]).unwrap();
        assert!((pts[0].relative_difference * 100.0 - 0.47).abs() < 0.01);
        assert!((pts[1].relative_difference * 100.0 - 2.29).abs() < 0.01);
        let tiny = marginal_share_sweep(&m, &[1e-9]).unwrap();
        assert!(tiny[0].relative_difference.abs() < 1e-9);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(marginal_share_sweep(&m, &[bad]).is_err());
        }
    }

    proptest! {
        #[test]
        fn sweep_is_increasing(a in 0.01..0.98f64, d in 0.001..0.01f64) {
            let pts = marginal_share_sweep(&model(), &[a, a + d]).unwrap();
            prop_assert!(pts[1].relative_difference > pts[0].relative_difference);
        }

        #[test]
        fn income_is_linear_in_areas(k in 0.1..10.0f64) {
            let m = model();
            let base = farm_income(&m, "rye").unwrap().total;
            let mut scaled = m.clone();
            scaled.crops.iter_mut().for_each(|c| c.area_ha *= k);
            scaled.marginal_area_ha *= k;
            let t = farm_income(&scaled, "rye").unwrap().total;
            prop_assert!((t - k * base).abs() <= 1e-9 * (k * base).abs());
        }

        #[test]
        fn sweep_is_currency_invariant(k in 0.1..10.0f64, s in 0.05..0.95f64) {
            let m = model();
            let mut scaled = m.clone();
            scaled.cap_aid *= k;
            for c in &mut scaled.crops {
                c.grain_price = c.grain_price.map(|p| p * k);
                c.straw_price = c.straw_price.map(|p| p * k);
                c.recorded_sales = c.recorded_sales.map(|p| p * k);
                for item in [&mut c.costs.seed, &mut c.costs.herbicide, &mut c.costs.fertilizer, &mut c.costs.machinery_labor] {
                    item.recurrent *= k;
                    item.establishment *= k;
                }
            }
            let a = marginal_share_sweep(&m, &[s]).unwrap()[0].relative_difference;
            let b = marginal_share_sweep(&scaled, &[s]).unwrap()[0].relative_difference;
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
