//! Scalar values, semantic types and relation schemas.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional digits used when a decimal literal or column does not say otherwise.
pub const DEFAULT_SCALE: u8 = 2;

/// Largest supported decimal scale; keeps every aligned comparison inside `i128`.
pub const MAX_SCALE: u8 = 18;

pub(crate) fn pow10(exp: u32) -> i128 {
    10i128.pow(exp)
}

/// Exact fixed-point number: `units / 10^scale`.
#[derive(Clone, Copy, Debug)]
pub struct Decimal {
    units: i64,
    scale: u8,
}

impl Decimal {
    pub fn new(units: i64, scale: u8) -> Result<Self> {
        if scale > MAX_SCALE {
            return Err(Error::Overflow(format!("decimal scale {scale}")));
        }
        Ok(Decimal { units, scale })
    }

    pub fn units(self) -> i64 {
        self.units
    }

    pub fn scale(self) -> u8 {
        self.scale
    }

    /// Units at a (larger or equal) scale, as `i128`.
    pub fn units_at(self, scale: u8) -> i128 {
        debug_assert!(scale >= self.scale);
        self.units as i128 * pow10((scale - self.scale) as u32)
    }

    /// Canonical form with trailing zero digits removed.
    fn canonical(self) -> (i64, u8) {
        let (mut u, mut s) = (self.units, self.scale);
        while s > 0 && u % 10 == 0 {
            u /= 10;
            s -= 1;
        }
        (u, s)
    }

    /// Parses `[-]digits[.digits]`, keeping exactly the digits written.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
        if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
            return Err(Error::Data(format!("invalid decimal `{text}`")));
        }
        let scale = u8::try_from(frac_part.len())
            .ok()
            .filter(|s| *s <= MAX_SCALE)
            .ok_or_else(|| Error::Overflow(format!("decimal `{text}`")))?;
        let joined = format!("{int_part}{frac_part}");
        let joined = if joined.is_empty() { "0".to_string() } else { joined };
        let mut units: i64 = joined
            .parse()
            .map_err(|_| Error::Overflow(format!("decimal `{text}`")))?;
        if neg {
            units = -units;
        }
        Decimal::new(units, scale)
    }

    /// Rescales to `scale`, failing if digits would be lost or the value overflows.
    pub fn rescale(self, scale: u8) -> Result<Self> {
        if scale >= self.scale {
            let u = i64::try_from(self.units_at(scale))
                .map_err(|_| Error::Overflow("decimal rescale".into()))?;
            return Decimal::new(u, scale);
        }
        let f = pow10((self.scale - scale) as u32) as i64;
        if self.units % f != 0 {
            return Err(Error::Data(format!("{self} does not fit scale {scale}")));
        }
        Decimal::new(self.units / f, scale)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.units);
        }
        let p = pow10(self.scale as u32) as u128;
        let abs = (self.units as i128).unsigned_abs();
        let sign = if self.units < 0 { "-" } else { "" };
        write!(
            f,
            "{sign}{}.{:0width$}",
            abs / p,
            abs % p,
            width = self.scale as usize
        )
    }
}

impl Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Decimal::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A scalar from the universal value domain.
///
/// Integers and decimals form one numeric domain: they compare, hash and
/// test equal by exact numeric value, so `5 = 5.00`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Value {
    #[serde(rename = "null")]
    Null,
    #[serde(rename = "bool")]
    Boolean(bool),
    #[serde(rename = "int")]
    Integer(i64),
    #[serde(rename = "dec")]
    Decimal(Decimal),
    #[serde(rename = "text")]
    Text(Arc<str>),
}

impl Value {
    pub fn text(s: &str) -> Value {
        Value::Text(Arc::from(s))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Integer(_) | Value::Decimal(_))
    }

    fn as_decimal(&self) -> Option<Decimal> {
        match *self {
            Value::Integer(i) => Some(Decimal { units: i, scale: 0 }),
            Value::Decimal(d) => Some(d),
            _ => None,
        }
    }

    /// Numeric scale (0 for integers); `None` for non-numeric values.
    pub fn numeric_scale(&self) -> Option<u8> {
        self.as_decimal().map(|d| d.scale)
    }

    /// Numeric value expressed in units of `10^-scale`. Fails if digits would be lost.
    pub fn scaled_units(&self, scale: u8) -> Result<i128> {
        let d = self
            .as_decimal()
            .ok_or_else(|| Error::ty(format!("{self} is not numeric")))?;
        if d.scale > scale {
            let f = pow10((d.scale - scale) as u32);
            let u = d.units as i128;
            if u % f != 0 {
                return Err(Error::Data(format!("{self} does not fit scale {scale}")));
            }
            return Ok(u / f);
        }
        Ok(d.units_at(scale))
    }

    /// Builds a numeric value from units at `scale`, using an integer when `scale = 0`.
    pub fn from_units(units: i128, scale: u8) -> Result<Value> {
        let u = i64::try_from(units).map_err(|_| Error::Overflow("numeric value".into()))?;
        if scale == 0 {
            Ok(Value::Integer(u))
        } else {
            Ok(Value::Decimal(Decimal::new(u, scale)?))
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Boolean(_) => "boolean",
            Value::Integer(_) => "integer",
            Value::Decimal(_) => "decimal",
            Value::Text(_) => "text",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Boolean(_) => 1,
            Value::Integer(_) | Value::Decimal(_) => 2,
            Value::Text(_) => 3,
        }
    }

    /// Arithmetic. Null operands give Null; division by zero gives Null.
    pub fn arith(op: ArithOp, l: &Value, r: &Value) -> Result<Value> {
        if l.is_null() || r.is_null() {
            return Ok(Value::Null);
        }
        let (a, b) = match (l.as_decimal(), r.as_decimal()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::ty(format!(
                    "cannot apply {op} to {} and {}",
                    l.type_name(),
                    r.type_name()
                )))
            }
        };
        let both_int = matches!((l, r), (Value::Integer(_), Value::Integer(_)));
        let overflow = || Error::Overflow(format!("{l} {op} {r}"));
        match op {
            ArithOp::Add | ArithOp::Sub => {
                let s = a.scale.max(b.scale);
                let (x, y) = (a.units_at(s), b.units_at(s));
                let v = if op == ArithOp::Add { x + y } else { x - y };
                Value::from_units(v, s).map_err(|_| overflow())
            }
            ArithOp::Mul => {
                let s = a.scale + b.scale;
                if s > MAX_SCALE {
                    return Err(overflow());
                }
                let v = (a.units as i128)
                    .checked_mul(b.units as i128)
                    .ok_or_else(overflow)?;
                Value::from_units(v, s).map_err(|_| overflow())
            }
            ArithOp::Div => {
                if b.units == 0 {
                    return Ok(Value::Null);
                }
                if both_int {
                    return a
                        .units
                        .checked_div(b.units)
                        .map(Value::Integer)
                        .ok_or_else(overflow);
                }
                // a/b at scale s: a.units * 10^(b.scale + s) / (b.units * 10^a.scale)
                let s = a.scale.max(b.scale).max(DEFAULT_SCALE);
                let num = (a.units as i128)
                    .checked_mul(pow10((b.scale + s) as u32))
                    .ok_or_else(overflow)?;
                let den = (b.units as i128)
                    .checked_mul(pow10(a.scale as u32))
                    .ok_or_else(overflow)?;
                Value::from_units(num / den, s).map_err(|_| overflow())
            }
        }
    }

    /// Two-valued comparison: any Null operand yields `false`.
    pub fn compare(op: CmpOp, l: &Value, r: &Value) -> Result<bool> {
        if l.is_null() || r.is_null() {
            return Ok(false);
        }
        let ord = l.partial_order(r)?;
        Ok(op.holds(ord))
    }

    fn partial_order(&self, other: &Value) -> Result<Ordering> {
        match (self, other) {
            (Value::Boolean(a), Value::Boolean(b)) => Ok(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Ok(a.cmp(b)),
            _ => match (self.as_decimal(), other.as_decimal()) {
                (Some(a), Some(b)) => {
                    let s = a.scale.max(b.scale);
                    Ok(a.units_at(s).cmp(&b.units_at(s)))
                }
                _ => Err(Error::ty(format!(
                    "cannot compare {} with {}",
                    self.type_name(),
                    other.type_name()
                ))),
            },
        }
    }

    /// Renders for a column of type `ty` (decimals padded to the column scale).
    pub fn render(&self, ty: Type) -> String {
        match (self, ty) {
            (Value::Null, _) => String::new(),
            (Value::Integer(i), Type::Decimal(s)) => Decimal { units: *i, scale: 0 }
                .rescale(s)
                .map(|d| d.to_string())
                .unwrap_or_else(|_| i.to_string()),
            (Value::Decimal(d), Type::Decimal(s)) if d.scale <= s => {
                d.rescale(s).map(|d| d.to_string()).unwrap_or_else(|_| d.to_string())
            }
            (Value::Text(t), _) => t.to_string(),
            (v, _) => v.to_string(),
        }
    }

    /// Parses a CSV field for a column of type `ty`; the empty field is Null.
    pub fn parse_typed(field: &str, ty: Type) -> Result<Value> {
        if field.is_empty() {
            return Ok(Value::Null);
        }
        match ty {
            Type::Integer => field
                .trim()
                .parse::<i64>()
                .map(Value::Integer)
                .map_err(|_| Error::Data(format!("invalid integer `{field}`"))),
            Type::Decimal(s) => {
                let d = Decimal::parse(field)?;
                if d.scale > s {
                    return Err(Error::Data(format!("`{field}` has more than {s} fractional digits")));
                }
                Ok(Value::Decimal(d.rescale(s)?))
            }
            Type::Boolean => match field.trim().to_ascii_lowercase().as_str() {
                "true" | "t" | "1" => Ok(Value::Boolean(true)),
                "false" | "f" | "0" => Ok(Value::Boolean(false)),
                _ => Err(Error::Data(format!("invalid boolean `{field}`"))),
            },
            Type::Text => Ok(Value::text(field)),
        }
    }

    /// Whether the value may be stored in a column of type `ty`.
    pub fn conforms(&self, ty: Type) -> bool {
        matches!(
            (self, ty),
            (Value::Null, _)
                | (Value::Boolean(_), Type::Boolean)
                | (Value::Text(_), Type::Text)
                | (Value::Integer(_) | Value::Decimal(_), Type::Integer | Type::Decimal(_))
        )
    }

    /// Plain JSON scalar used by delta and row payloads.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Boolean(b) => serde_json::Value::Bool(*b),
            Value::Integer(i) => serde_json::Value::from(*i),
            Value::Decimal(d) => serde_json::Value::String(d.to_string()),
            Value::Text(t) => serde_json::Value::String(t.to_string()),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Null => {}
            Value::Boolean(b) => b.hash(state),
            Value::Text(t) => t.hash(state),
            Value::Integer(_) | Value::Decimal(_) => {
                if let Some(d) = self.as_decimal() {
                    d.canonical().hash(state)
                }
            }
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order used for sorting: Null < Boolean < numbers < Text.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => self.partial_order(other).unwrap_or(Ordering::Equal),
            o => o,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "NULL"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Text(t) => write!(f, "{t}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Integer(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Boolean(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }

    /// The operator with the same meaning when operands are swapped.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            o => o,
        }
    }

    /// The complementary operator (`¬(a op b)` ≡ `a op' b` for non-null operands).
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Semantic column type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Integer,
    Decimal(u8),
    Text,
    Boolean,
}

impl Type {
    /// Types with a meaningful `<` (compressed to ranges rather than member sets).
    pub fn is_ordered(self) -> bool {
        matches!(self, Type::Integer | Type::Decimal(_))
    }

    pub fn parse(s: &str) -> Result<Type> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "int" | "integer" | "bigint" => Ok(Type::Integer),
            "decimal" | "numeric" => Ok(Type::Decimal(DEFAULT_SCALE)),
            "text" | "string" | "varchar" => Ok(Type::Text),
            "bool" | "boolean" => Ok(Type::Boolean),
            _ => {
                let inner = t
                    .strip_prefix("decimal(")
                    .or_else(|| t.strip_prefix("numeric("))
                    .and_then(|r| r.strip_suffix(')'));
                match inner.and_then(|n| n.trim().parse::<u8>().ok()) {
                    Some(s) if s <= MAX_SCALE => Ok(Type::Decimal(s)),
                    _ => Err(Error::schema(format!("unknown type `{s}`"))),
                }
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Integer => write!(f, "integer"),
            Type::Decimal(s) => write!(f, "decimal({s})"),
            Type::Text => write!(f, "text"),
            Type::Boolean => write!(f, "boolean"),
        }
    }
}

impl Serialize for Type {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Type {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Type::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: Type,
}

/// Relation schema: name plus ordered, uniquely named attributes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl Schema {
    pub fn new(name: &str, attrs: &[(&str, Type)]) -> Result<Schema> {
        let s = Schema {
            name: name.to_string(),
            attributes: attrs
                .iter()
                .map(|(n, t)| Attribute {
                    name: n.to_string(),
                    ty: *t,
                })
                .collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.attributes.iter().enumerate() {
            if self.attributes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::schema(format!(
                    "duplicate attribute `{}` in `{}`",
                    a.name, self.name
                )));
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn index_of(&self, attr: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == attr)
    }

    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn type_of(&self, attr: &str) -> Option<Type> {
        self.attributes.iter().find(|a| a.name == attr).map(|a| a.ty)
    }
}
