use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProductError {
    #[error("non-numeric segment `{segment}` in label `{label}`")]
    NonNumeric { label: String, segment: String },
    #[error("label `{0}` is neither an N-P-K triple nor `<name> <p>%`")]
    Unrecognized(String),
    #[error("nutrient content in `{0}` exceeds 100%")]
    FractionAboveOne(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    Fertilizer,
    Herbicide,
    Seed,
}

/// Nutrient mass fractions of a fertilizer product.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Composition {
    pub n: f64,
    pub p: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductSpec {
    pub id: String,
    pub kind: ProductKind,
    pub label: Option<String>,
    /// Fertilizers only.
    pub composition: Option<Composition>,
    /// Herbicides only; mass fraction of active ingredient.
    pub active_ingredient_fraction: Option<f64>,
    /// Density of the commercial product in kg/L, used for liquid doses.
    pub density_kg_per_l: f64,
    /// Background flow this product maps to in the factor file.
    pub flow_id: String,
}

fn percent(label: &str, segment: &str) -> Result<f64, ProductError> {
    let v: f64 = segment.trim().parse().map_err(|_| ProductError::NonNumeric {
        label: label.to_string(),
        segment: segment.to_string(),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(ProductError::NonNumeric {
            label: label.to_string(),
            segment: segment.to_string(),
        });
    }
    Ok(v)
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

/// Parses a fertilizer label: an `N-P-K` triple (`8-24-8`) or a single
/// nitrogen form (`CAN 27%`).
pub fn parse_product_label(label: &str) -> Result<ProductSpec, ProductError> {
    let trimmed = label.trim();
    let (composition, id) = if let Some(rest) = trimmed.strip_suffix('%') {
        let (name, pct) = rest
            .trim_end()
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| ProductError::Unrecognized(label.to_string()))?;
        if name.trim().is_empty() {
            return Err(ProductError::Unrecognized(label.to_string()));
        }
        let n = percent(label, pct)?;
        (
            Composition {
                n: n / 100.0,
                ..Composition::default()
            },
            slug(&format!("{} {}", name, pct.trim())),
        )
    } else {
        let parts: Vec<&str> = trimmed.split('-').collect();
        if parts.len() != 3 {
            return Err(ProductError::Unrecognized(label.to_string()));
        }
        let n = percent(label, parts[0])?;
        let p = percent(label, parts[1])?;
        let k = percent(label, parts[2])?;
        (
            Composition {
                n: n / 100.0,
                p: p / 100.0,
                k: k / 100.0,
            },
            format!("npk_{}", slug(&parts.join("_"))),
        )
    };
    let sum = composition.n + composition.p + composition.k;
    if composition.n > 1.0 || composition.p > 1.0 || composition.k > 1.0 || sum > 1.0 + 1e-12 {
        return Err(ProductError::FractionAboveOne(label.to_string()));
    }
    Ok(ProductSpec {
        flow_id: id.clone(),
        id,
        kind: ProductKind::Fertilizer,
        label: Some(trimmed.to_string()),
        composition: Some(composition),
        active_ingredient_fraction: None,
        density_kg_per_l: 1.0,
    })
}
