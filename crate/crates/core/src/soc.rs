//! Soil organic carbon stocks and the annualized CO2 credit from paired
//! samples.

use serde::Serialize;
use thiserror::Error;

use crate::farm::SoilSample;

/// m² per hectare.
const M2_PER_HA: f64 = 10_000.0;
/// Mass ratio CO2 / C.
pub const CO2_PER_C: f64 = 44.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SocError {
    #[error("years between samples must be positive, got {0}")]
    NonPositiveYears(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocStock {
    /// Mg C/ha
    pub mg_c_per_ha: f64,
    pub sample: String,
    pub depth_m: f64,
}

/// Carbon stock of the fine-earth fraction of one soil layer.
pub fn soc_stock(s: &SoilSample) -> SocStock {
    let fine_earth = (1.0 - s.coarse_fraction_vol).max(0.0);
    SocStock {
        mg_c_per_ha: s.depth_m * s.bulk_density * M2_PER_HA * fine_earth * s.organic_carbon_fraction,
        sample: s.key.clone(),
        depth_m: s.depth_m,
    }
}

/// Mean annual change in Mg C/ha·y; negative for a loss.
pub fn soc_annual_change(before: &SocStock, after: &SocStock, years: f64) -> Result<f64, SocError> {
    if years <= 0.0 || years.is_nan() {
        return Err(SocError::NonPositiveYears(years));
    }
    Ok((after.mg_c_per_ha - before.mg_c_per_ha) / years)
}

/// CO2 equivalent of a carbon change, Mg CO2/ha·y, sign preserved.
pub fn soc_co2_credit(delta_c: f64) -> f64 {
    delta_c * CO2_PER_C
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(oc_pct: f64, coarse: f64) -> SoilSample {
        SoilSample {
            key: "marginal.test".into(),
            year: 2013,
            depth_m: 0.30,
            bulk_density: 1.37,
            coarse_fraction_vol: coarse,
            organic_matter_fraction: 0.01,
            organic_carbon_fraction: oc_pct / 100.0,
        }
    }

    fn stock(v: f64) -> SocStock {
        SocStock {
            mg_c_per_ha: v,
            sample: String::new(),
            depth_m: 0.3,
        }
    }

    // 0.30 m * 1.37 Mg/m3 * 10000 m2/ha * (1 - 0.2958) * OC/100
    fn hand(oc_pct: f64) -> f64 {
        0.30 * 1.37 * 10000.0 * 0.7042 * oc_pct / 100.0
    }

    #[test]
    fn marginal_soil_stocks() {
        let before = soc_stock(&sample(0.313, 0.2958)).mg_c_per_ha;
        let after = soc_stock(&sample(0.393, 0.2958)).mg_c_per_ha;
        assert!((before - hand(0.313)).abs() < 1e-9);
        assert!((before - 9.059).abs() < 5e-4, "{before}");
        assert!((after - 11.374).abs() < 5e-4, "{after}");
    }

    #[test]
    fn no_fine_earth_no_carbon() {
        assert_eq!(soc_stock(&sample(0.313, 1.0)).mg_c_per_ha, 0.0);
    }

    #[test]
    fn annual_change() {
        let d = soc_annual_change(&stock(9.059), &stock(11.374), 3.0).unwrap();
        assert!((d - 0.7717).abs() < 1e-4);
        assert!((d - 0.765).abs() / 0.765 < 0.01);
        assert_eq!(soc_annual_change(&stock(9.0), &stock(9.0), 3.0).unwrap(), 0.0);
        let loss = soc_annual_change(&stock(11.374), &stock(9.059), 3.0).unwrap();
        assert_eq!(loss, -d);
        assert!(soc_annual_change(&stock(1.0), &stock(2.0), 0.0).is_err());
        assert!(soc_annual_change(&stock(1.0), &stock(2.0), -1.0).is_err());
    }

    #[test]
    fn credit() {
        assert!((soc_co2_credit(0.765) - 2.805).abs() < 1e-12);
        assert_eq!(soc_co2_credit(0.0), 0.0);
        assert!((soc_co2_credit(1.0) - 3.6667).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn credit_is_antisymmetric(a in 0.0..50.0f64, b in 0.0..50.0f64, y in 1u32..20) {
            let fwd = soc_co2_credit(soc_annual_change(&stock(a), &stock(b), y as f64).unwrap());
            let back = soc_co2_credit(soc_annual_change(&stock(b), &stock(a), y as f64).unwrap());
            prop_assert_eq!(fwd, -back);
        }

        #[test]
        fn stock_linear_in_carbon_and_fine_earth(oc in 0.0..2.0f64, coarse in 0.0..0.9f64, k in 0.0..3.0f64) {
            let base = soc_stock(&sample(oc, coarse)).mg_c_per_ha;
            let scaled_oc = soc_stock(&sample(oc * k, coarse)).mg_c_per_ha;
            prop_assert!((scaled_oc - k * base).abs() <= 1e-12 * base.max(1.0) * k.max(1.0));
            let fine = 1.0 - coarse;
            let half_fine = soc_stock(&sample(oc, 1.0 - fine / 2.0)).mg_c_per_ha;
            prop_assert!((half_fine - base / 2.0).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
