//! Unit-bearing quantities.
//!
//! A literal is `number [unit-expr]`, where the unit expression is a product
//! of base-unit symbols joined by `/` (divide by the next factor) or `·`/`*`
//! (multiply). Each factor may carry an integer exponent (`m^2`). Percent
//! (`%` or `percent`) is only valid on its own and is normalized to a
//! dimensionless fraction at parse time. Same-dimension terms may be summed
//! with `+`; the result is expressed in the unit of the first term.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantityError {
    #[error("empty quantity literal")]
    Empty,
    #[error("malformed number in `{0}`")]
    MalformedNumber(String),
    #[error("unknown unit token `{0}`")]
    UnknownUnit(String),
    #[error("malformed unit expression `{0}`")]
    MalformedUnit(String),
    #[error("dimension mismatch: `{left}` vs `{right}`")]
    DimensionMismatch { left: String, right: String },
    #[error("value is not finite")]
    NonFinite,
    #[error("percent value {0} outside [0, 100]")]
    PercentOutOfRange(f64),
}

/// Base unit symbols understood by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseUnit {
    Mg,
    Kg,
    G,
    L,
    M3,
    Ha,
    M,
    Km,
    Y,
    Mj,
    Gj,
    Eur,
}

impl BaseUnit {
    pub const ALL: [BaseUnit; 12] = [
        BaseUnit::Mg,
        BaseUnit::Kg,
        BaseUnit::G,
        BaseUnit::L,
        BaseUnit::M3,
        BaseUnit::Ha,
        BaseUnit::M,
        BaseUnit::Km,
        BaseUnit::Y,
        BaseUnit::Mj,
        BaseUnit::Gj,
        BaseUnit::Eur,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BaseUnit::Mg => "Mg",
            BaseUnit::Kg => "kg",
            BaseUnit::G => "g",
            BaseUnit::L => "L",
            BaseUnit::M3 => "m3",
            BaseUnit::Ha => "ha",
            BaseUnit::M => "m",
            BaseUnit::Km => "km",
            BaseUnit::Y => "y",
            BaseUnit::Mj => "MJ",
            BaseUnit::Gj => "GJ",
            BaseUnit::Eur => "EUR",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        BaseUnit::ALL.into_iter().find(|u| u.symbol() == s)
    }

    fn dimension(self) -> Dimension {
        let (mass, length, time, energy, money) = match self {
            BaseUnit::Mg | BaseUnit::Kg | BaseUnit::G => (1, 0, 0, 0, 0),
            BaseUnit::L | BaseUnit::M3 => (0, 3, 0, 0, 0),
            BaseUnit::Ha => (0, 2, 0, 0, 0),
            BaseUnit::M | BaseUnit::Km => (0, 1, 0, 0, 0),
            BaseUnit::Y => (0, 0, 1, 0, 0),
            BaseUnit::Mj | BaseUnit::Gj => (0, 0, 0, 1, 0),
            BaseUnit::Eur => (0, 0, 0, 0, 1),
        };
        Dimension {
            mass,
            length,
            time,
            energy,
            money,
        }
    }

    /// Factor to the reference unit of its dimension (kg, m, y, MJ, EUR).
    fn scale(self) -> f64 {
        match self {
            BaseUnit::Mg => 1e3,
            BaseUnit::Kg => 1.0,
            BaseUnit::G => 1e-3,
            BaseUnit::L => 1e-3,
            BaseUnit::M3 => 1.0,
            BaseUnit::Ha => 1e4,
            BaseUnit::M => 1.0,
            BaseUnit::Km => 1e3,
            BaseUnit::Y => 1.0,
            BaseUnit::Mj => 1.0,
            BaseUnit::Gj => 1e3,
            BaseUnit::Eur => 1.0,
        }
    }
}

/// Exponent vector over (mass, length, time, energy, money).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Dimension {
    pub mass: i32,
    pub length: i32,
    pub time: i32,
    pub energy: i32,
    pub money: i32,
}

impl Dimension {
    fn add_scaled(&mut self, other: Dimension, k: i32) {
        self.mass += other.mass * k;
        self.length += other.length * k;
        self.time += other.time * k;
        self.energy += other.energy * k;
        self.money += other.money * k;
    }
}

/// A unit in canonical normal form: base symbols with non-zero exponents,
/// ordered by [`BaseUnit`] declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Unit(BTreeMap<BaseUnit, i32>);

impl Unit {
    pub fn dimensionless() -> Self {
        Unit(BTreeMap::new())
    }

    pub fn base(b: BaseUnit) -> Self {
        Unit(BTreeMap::from([(b, 1)]))
    }

    pub fn is_dimensionless(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponents(&self) -> impl Iterator<Item = (BaseUnit, i32)> + '_ {
        self.0.iter().map(|(b, e)| (*b, *e))
    }

    pub fn dimension(&self) -> Dimension {
        let mut d = Dimension::default();
        for (b, e) in &self.0 {
            d.add_scaled(b.dimension(), *e);
        }
        d
    }

    fn scale(&self) -> f64 {
        self.0.iter().map(|(b, e)| b.scale().powi(*e)).product()
    }

    fn push(&mut self, b: BaseUnit, exp: i32) {
        let e = self.0.entry(b).or_insert(0);
        *e += exp;
        if *e == 0 {
            self.0.remove(&b);
        }
    }

    pub fn mul(&self, other: &Unit) -> Unit {
        let mut out = self.clone();
        for (b, e) in other.exponents() {
            out.push(b, e);
        }
        out
    }

    pub fn div(&self, other: &Unit) -> Unit {
        let mut out = self.clone();
        for (b, e) in other.exponents() {
            out.push(b, -e);
        }
        out
    }

    /// Multiplier taking a value in `self` to a value in `target`.
    pub fn factor_to(&self, target: &Unit) -> Result<f64, QuantityError> {
        if self.dimension() != target.dimension() {
            return Err(QuantityError::DimensionMismatch {
                left: self.to_string(),
                right: target.to_string(),
            });
        }
        Ok(self.scale() / target.scale())
    }

    pub fn parse(text: &str) -> Result<Unit, QuantityError> {
        let text = text.trim();
        let mut unit = Unit::dimensionless();
        if text.is_empty() {
            return Ok(unit);
        }
        let mut sign = 1;
        let mut rest = text;
        loop {
            let end = rest
                .find(['/', '*', '·'])
                .unwrap_or(rest.len());
            let token = rest[..end].trim();
            if token.is_empty() {
                return Err(QuantityError::MalformedUnit(text.to_string()));
            }
            let (sym, exp) = match token.split_once('^') {
                Some((s, e)) => {
                    let e: i32 = e
                        .trim()
                        .parse()
                        .map_err(|_| QuantityError::MalformedUnit(text.to_string()))?;
                    if e == 0 {
                        return Err(QuantityError::MalformedUnit(text.to_string()));
                    }
                    (s.trim(), e)
                }
                None => (token, 1),
            };
            let b = BaseUnit::from_symbol(sym)
                .ok_or_else(|| QuantityError::UnknownUnit(sym.to_string()))?;
            unit.push(b, sign * exp);
            if end == rest.len() {
                break;
            }
            let op = rest[end..].chars().next().unwrap_or('*');
            sign = if op == '/' { -1 } else { 1 };
            rest = &rest[end + op.len_utf8()..];
        }
        Ok(unit)
    }
}

impl fmt::Display for Unit {
    /// Numerator factors joined by `·`, each denominator factor prefixed by `/`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn term(f: &mut fmt::Formatter<'_>, b: BaseUnit, e: i32) -> fmt::Result {
            if e == 1 {
                write!(f, "{}", b.symbol())
            } else {
                write!(f, "{}^{}", b.symbol(), e)
            }
        }
        let mut first = true;
        for (b, e) in self.exponents().filter(|(_, e)| *e > 0) {
            if !first {
                write!(f, "·")?;
            }
            term(f, b, e)?;
            first = false;
        }
        for (b, e) in self.exponents().filter(|(_, e)| *e < 0) {
            if first {
                // A bare denominator needs an explicit numerator-free form.
                term(f, b, e)?;
                first = false;
            } else {
                write!(f, "/")?;
                term(f, b, -e)?;
            }
        }
        Ok(())
    }
}

impl FromStr for Unit {
    type Err = QuantityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Result<Self, QuantityError> {
        if !value.is_finite() {
            return Err(QuantityError::NonFinite);
        }
        Ok(Quantity { value, unit })
    }

    pub fn dimensionless(value: f64) -> Result<Self, QuantityError> {
        Quantity::new(value, Unit::dimensionless())
    }

    /// Value expressed in `target`; fails on a dimension mismatch.
    pub fn value_in(&self, target: &Unit) -> Result<f64, QuantityError> {
        Ok(self.value * self.unit.factor_to(target)?)
    }

    pub fn convert(&self, target: &Unit) -> Result<Quantity, QuantityError> {
        Quantity::new(self.value_in(target)?, target.clone())
    }

    pub fn try_add(&self, other: &Quantity) -> Result<Quantity, QuantityError> {
        Quantity::new(self.value + other.value_in(&self.unit)?, self.unit.clone())
    }

    pub fn try_cmp(&self, other: &Quantity) -> Result<std::cmp::Ordering, QuantityError> {
        let rhs = other.value_in(&self.unit)?;
        Ok(self.value.total_cmp(&rhs))
    }

    pub fn scale(&self, k: f64) -> Result<Quantity, QuantityError> {
        Quantity::new(self.value * k, self.unit.clone())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit.is_dimensionless() {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} {}", self.value, self.unit)
        }
    }
}

impl Serialize for Unit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Quantity", 2)?;
        s.serialize_field("value", &self.value)?;
        s.serialize_field("unit", &self.unit.to_string())?;
        s.end()
    }
}

impl FromStr for Quantity {
    type Err = QuantityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_quantity(s)
    }
}

/// Length of the leading decimal number in `s`, or `None` if there is none.
fn number_prefix(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    Some(i)
}

fn parse_term(term: &str) -> Result<Quantity, QuantityError> {
    let term = term.trim();
    if term.is_empty() {
        return Err(QuantityError::Empty);
    }
    let n = number_prefix(term).ok_or_else(|| QuantityError::MalformedNumber(term.to_string()))?;
    let value: f64 = term[..n]
        .parse()
        .map_err(|_| QuantityError::MalformedNumber(term.to_string()))?;
    let unit_text = term[n..].trim();
    // A number glued to further digits or dots ("1.2.3") is malformed, not a unit.
    if unit_text.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return Err(QuantityError::MalformedNumber(term.to_string()));
    }
    if unit_text == "%" || unit_text == "percent" {
        if !value.is_finite() {
            return Err(QuantityError::NonFinite);
        }
        if !(0.0..=100.0).contains(&value) {
            return Err(QuantityError::PercentOutOfRange(value));
        }
        return Quantity::dimensionless(value / 100.0);
    }
    Quantity::new(value, Unit::parse(unit_text)?)
}

/// Parses a quantity literal such as `0.15 Mg/ha`, `27 %` or `0.2 Mg + 0.1 Mg`.
pub fn parse_quantity(literal: &str) -> Result<Quantity, QuantityError> {
    let literal = literal.trim();
    if literal.is_empty() {
        return Err(QuantityError::Empty);
    }
    // Split on '+' that separates terms, skipping signs and exponent signs.
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = literal.as_bytes();
    for (i, &c) in bytes.iter().enumerate() {
        if c == b'+' && i > start {
            let prev = bytes[..i].iter().rev().find(|c| !c.is_ascii_whitespace());
            let is_exp_sign = i > 0
                && matches!(bytes[i - 1], b'e' | b'E')
                && i >= 2
                && bytes[i - 2].is_ascii_digit();
            if prev.is_some() && !is_exp_sign {
                terms.push(&literal[start..i]);
                start = i + 1;
            }
        }
    }
    terms.push(&literal[start..]);
    let mut total = parse_term(terms[0])?;
    for t in &terms[1..] {
        total = total.try_add(&parse_term(t)?)?;
    }
    Ok(total)
}
