//! Deterministic report rendering.
//!
//! CSV files use a comma separator, `.` decimals, LF line endings and a
//! header row. EUR values carry 2 decimals, Mg CO2-eq 3, GJ 1 and
//! percentage shares 1. JSON mirrors the same values at full precision.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::economics::{EconomicBalance, SweepPoint};
use crate::impact::{ImpactResult, PhaseShares};
use crate::inventory::{Inventory, Phase};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed-point formatting without a negative zero.
pub fn fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputFile {
    pub fn new(role: &str, path: &str, contents: &[u8]) -> Self {
        InputFile {
            role: role.to_string(),
            path: path.to_string(),
            sha256: sha256_hex(contents),
        }
    }
}

/// Everything that determines a report's bytes. The wall-clock timestamp is
/// deliberately absent; it is written to a separate manifest file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub flags: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            inputs: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.push((name.to_string(), value.to_string()));
        self
    }

    /// SHA-256 of the manifest's canonical JSON.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("manifest serializes").as_bytes())
    }
}

/// Manifest plus the timestamp of the run.
#[derive(Debug, Clone, Serialize)]
pub struct StampedManifest<'a> {
    #[serde(flatten)]
    pub manifest: &'a RunManifest,
    pub digest: String,
    pub unix_time: u64,
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn balance_csv(b: &EconomicBalance) -> String {
    let rows = [
        ("seed_cost", b.costs.seed),
        ("herbicide_cost", b.costs.herbicide),
        ("fertilizer_cost", b.costs.fertilizer),
        ("machinery_labor_cost", b.costs.machinery_labor),
        ("total_cost", b.total_cost),
        ("grain_sales", b.grain_sales),
        ("straw_sales", b.straw_sales),
        ("total_sales", b.total_sales),
        ("cap_aid", b.cap_aid),
        ("balance_without_cap", b.balance_without_cap),
        ("balance_with_cap", b.balance_with_cap),
    ]
    .map(|(k, v)| vec![k.to_string(), fixed(v, 2)]);
    csv(&["item", "eur_per_ha_y"], &rows)
}

pub fn gwp_csv(r: &ImpactResult, s: &PhaseShares) -> String {
    let mut rows: Vec<Vec<String>> = Phase::ALL
        .iter()
        .map(|p| {
            let share = s.gwp.get(p).map(|v| fixed(*v, 1)).unwrap_or_default();
            vec![p.id().to_string(), fixed(r.gwp[p], 3), share]
        })
        .collect();
    rows.push(vec!["positive_total".into(), fixed(r.positive_total, 3), fixed(100.0, 1)]);
    rows.push(vec!["net_total".into(), fixed(r.net_total, 3), String::new()]);
    csv(&["phase", "mg_co2eq_per_ha_y", "share_pct"], &rows)
}

pub fn energy_csv(r: &ImpactResult, s: &PhaseShares) -> String {
    let mut rows: Vec<Vec<String>> = Phase::ALL
        .iter()
        .map(|p| {
            let e = r.energy[p];
            vec![
                p.id().to_string(),
                fixed(e.renewable, 1),
                fixed(e.nonrenewable, 1),
                fixed(e.total(), 1),
                fixed(s.energy[p], 1),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        fixed(r.energy_renewable, 1),
        fixed(r.energy_nonrenewable, 1),
        fixed(r.energy_total, 1),
        fixed(100.0, 1),
    ]);
    rows.push(vec![
        "renewable_share".into(),
        String::new(),
        String::new(),
        String::new(),
        fixed(s.renewable, 1),
    ]);
    csv(
        &["phase", "renewable_gj_per_ha_y", "nonrenewable_gj_per_ha_y", "total_gj_per_ha_y", "share_pct"],
        &rows,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CropReport {
    pub crop: String,
    pub functional_unit: &'static str,
    pub balance: EconomicBalance,
    pub impact: ImpactResult,
    pub shares: PhaseShares,
    pub inventory: Inventory,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssessReport<'a> {
    pub manifest: &'a RunManifest,
    pub manifest_digest: String,
    #[serde(flatten)]
    pub result: &'a CropReport,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Better {
    Higher,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: &'static str,
    pub unit: &'static str,
    pub a: f64,
    pub b: f64,
    /// a − b
    pub difference: f64,
    pub better: Better,
    /// Winning crop, or `tie`.
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub crop_a: String,
    pub crop_b: String,
    pub metrics: Vec<MetricComparison>,
}

pub fn compare(a: &CropReport, b: &CropReport) -> Comparison {
    let metric = |metric, unit, va: f64, vb: f64, better| {
        let difference = va - vb;
        let verdict = if va == vb {
            "tie".to_string()
        } else if (va > vb) == (better == Better::Higher) {
            a.crop.clone()
        } else {
            b.crop.clone()
        };
        MetricComparison {
            metric,
            unit,
            a: va,
            b: vb,
            difference,
            better,
            verdict,
        }
    };
    Comparison {
        crop_a: a.crop.clone(),
        crop_b: b.crop.clone(),
        metrics: vec![
            metric("balance_with_cap", "EUR/ha·y", a.balance.balance_with_cap, b.balance.balance_with_cap, Better::Higher),
            metric("balance_without_cap", "EUR/ha·y", a.balance.balance_without_cap, b.balance.balance_without_cap, Better::Higher),
            metric("gwp_positive", "Mg CO2-eq/ha·y", a.impact.positive_total, b.impact.positive_total, Better::Lower),
            metric("gwp_net", "Mg CO2-eq/ha·y", a.impact.net_total, b.impact.net_total, Better::Lower),
            metric("energy_total", "GJ/ha·y", a.impact.energy_total, b.impact.energy_total, Better::Lower),
            metric("energy_nonrenewable", "GJ/ha·y", a.impact.energy_nonrenewable, b.impact.energy_nonrenewable, Better::Lower),
        ],
    }
}

fn metric_decimals(metric: &str) -> usize {
    match metric {
        m if m.starts_with("balance") => 2,
        m if m.starts_with("gwp") => 3,
        _ => 1,
    }
}

pub fn comparison_csv(c: &Comparison) -> String {
    let rows: Vec<Vec<String>> = c
        .metrics
        .iter()
        .map(|m| {
            let d = metric_decimals(m.metric);
            vec![
                m.metric.to_string(),
                m.unit.to_string(),
                fixed(m.a, d),
                fixed(m.b, d),
                fixed(m.difference, d),
                m.verdict.clone(),
            ]
        })
        .collect();
    let a = c.crop_a.as_str();
    let b = c.crop_b.as_str();
    csv(&["metric", "unit", a, b, "difference", "better"], &rows)
}

pub fn sweep_csv(points: &[SweepPoint], candidate: &str, baseline: &str) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                fixed(p.share, 4),
                fixed(p.marginal_area_ha, 2),
                fixed(p.income_candidate, 2),
                fixed(p.income_baseline, 2),
                fixed(100.0 * p.relative_difference, 2),
            ]
        })
        .collect();
    let cand = format!("income_{candidate}_eur_per_y");
    let base = format!("income_{baseline}_eur_per_y");
    csv(
        &["share", "marginal_area_ha", &cand, &base, "relative_difference_pct"],
        &rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_drops_negative_zero() {
        assert_eq!(fixed(-0.0001, 2), "0.00");
        assert_eq!(fixed(-1.9422, 3), "-1.942");
        assert_eq!(fixed(145.1331, 2), "145.13");
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_has_lf_endings() {
        let s = csv(&["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(s, "a,b\n1,2\n");
    }

    #[test]
    fn manifest_digest_depends_on_flags() {
        let m = RunManifest::new("assess").flag("crop", "rye");
        assert_eq!(m.digest(), m.clone().digest());
        assert_ne!(m.digest(), RunManifest::new("assess").flag("crop", "wheat").digest());
    }
}
