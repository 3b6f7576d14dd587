//! Shared vocabulary: node identities, system parameters, protocol values,
//! confidence grades and the multiset reductions every protocol relies on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("no-candidates: multiset is empty")]
    NoCandidates,
    #[error("multiset mixes incomparable values ({0})")]
    Incomparable(String),
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("cannot parse value {0:?}")]
    BadValue(String),
}

/// Index of a node in `[0, n)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i)
    }
}

/// `n` nodes, fault budget `t` and the actual fault count `f`.
///
/// `f` is known to the simulator only; protocol code reads `n` and `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub t: usize,
    pub f: usize,
}

impl SystemParams {
    pub fn new(n: usize, t: usize, f: usize) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::InvalidParams("n must be positive".into()));
        }
        if 3 * t >= n {
            return Err(ModelError::InvalidParams(format!(
                "need 3t < n, got n={n}, t={t}"
            )));
        }
        if f > t {
            return Err(ModelError::InvalidParams(format!(
                "need f <= t, got f={f}, t={t}"
            )));
        }
        Ok(SystemParams { n, t, f })
    }

    /// `n - t`: the strong threshold.
    pub fn quorum(&self) -> usize {
        self.n - self.t
    }

    /// `t + 1`: the weak threshold.
    pub fn weak_quorum(&self) -> usize {
        self.t + 1
    }

    /// `n - 2t`: size of a trimmed multiset of `n` entries.
    pub fn trimmed_len(&self) -> usize {
        self.n - 2 * self.t
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n).map(NodeId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Discrete,
    Rational,
}

/// A protocol value.
///
/// The derived order ranks variants Discrete < Rational < Bottom. Protocol
/// code never relies on cross-kind comparisons: payloads of the wrong kind
/// and `Bottom` are dropped before they reach any reduction, and
/// [`mode_lowest`] rejects mixed multisets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Discrete(i64),
    Rational(BigRational),
    Bottom,
}

impl Value {
    pub fn rational(num: i64, den: i64) -> Value {
        Value::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn kind(&self) -> Option<ValueKind> {
        match self {
            Value::Discrete(_) => Some(ValueKind::Discrete),
            Value::Rational(_) => Some(ValueKind::Rational),
            Value::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Value::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_discrete(&self) -> Option<i64> {
        match self {
            Value::Discrete(d) => Some(*d),
            _ => None,
        }
    }

    /// True if both are non-bottom values of the same kind.
    pub fn comparable_with(&self, other: &Value) -> bool {
        match (self.kind(), other.kind()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// Parses `s` as a value of the given kind. Integers are accepted as
    /// rationals (`"3"` is `3/1`) when `kind` is rational.
    pub fn parse_as(kind: ValueKind, s: &str) -> Result<Value, ModelError> {
        let s = s.trim();
        match kind {
            ValueKind::Discrete => s
                .parse::<i64>()
                .map(Value::Discrete)
                .map_err(|_| ModelError::BadValue(s.to_string())),
            ValueKind::Rational => parse_rational(s).map(Value::Rational),
        }
    }

    /// Lossy decimal rendering, used only for CSV convenience columns.
    pub fn approx_f64(&self) -> Option<f64> {
        match self {
            Value::Discrete(d) => Some(*d as f64),
            Value::Rational(r) => Some(rational_to_f64(r)),
            Value::Bottom => None,
        }
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale through a fixed number of digits to avoid overflowing f64 on
    // large numerators/denominators.
    let scale = BigInt::from(10u64).pow(15);
    let scaled = (r * BigRational::from_integer(scale.clone())).round();
    let int = scaled.to_integer();
    let as_f = int.to_string().parse::<f64>().unwrap_or(f64::NAN);
    as_f / 1e15
}

pub fn parse_rational(s: &str) -> Result<BigRational, ModelError> {
    let bad = || ModelError::BadValue(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(num, den))
        }
        None => {
            let num: BigInt = s.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(num))
        }
    }
}

/// Canonical text: decimal integers, `num/den` in lowest terms, or `bot`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Discrete(d) => write!(f, "{d}"),
            Value::Rational(r) => {
                // BigRational is always kept reduced with a positive denominator.
                let (num, den) = (r.numer(), r.denom());
                debug_assert!(den.is_positive());
                write!(f, "{num}/{den}")
            }
            Value::Bottom => write!(f, "bot"),
        }
    }
}

impl FromStr for Value {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "bot" {
            Ok(Value::Bottom)
        } else if s.contains('/') {
            parse_rational(s).map(Value::Rational)
        } else {
            s.parse::<i64>()
                .map(Value::Discrete)
                .map_err(|_| ModelError::BadValue(s.to_string()))
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Receiver-side grade of one gradecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Confidence {
    Zero,
    One,
    Two,
}

impl Confidence {
    pub fn level(self) -> u8 {
        match self {
            Confidence::Zero => 0,
            Confidence::One => 1,
            Confidence::Two => 2,
        }
    }
}

impl From<Confidence> for u8 {
    fn from(c: Confidence) -> u8 {
        c.level()
    }
}

impl TryFrom<u8> for Confidence {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Confidence::Zero),
            1 => Ok(Confidence::One),
            2 => Ok(Confidence::Two),
            other => Err(format!("confidence must be 0, 1 or 2, got {other}")),
        }
    }
}

/// Multiset of values, stored as value → multiplicity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiSet {
    counts: BTreeMap<Value, usize>,
    len: usize,
}

impl MultiSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: Value) {
        self.insert_many(v, 1);
    }

    pub fn insert_many(&mut self, v: Value, times: usize) {
        if times == 0 {
            return;
        }
        *self.counts.entry(v).or_insert(0) += times;
        self.len += times;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn count(&self, v: &Value) -> usize {
        self.counts.get(v).copied().unwrap_or(0)
    }

    /// Distinct values with multiplicities, ascending.
    pub fn entries(&self) -> impl Iterator<Item = (&Value, usize)> {
        self.counts.iter().map(|(v, c)| (v, *c))
    }

    /// Every element, ascending, repeated by multiplicity.
    pub fn sorted(&self) -> Vec<Value> {
        self.counts
            .iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v.clone(), *c))
            .collect()
    }

    pub fn min(&self) -> Option<&Value> {
        self.counts.keys().next()
    }

    pub fn max(&self) -> Option<&Value> {
        self.counts.keys().next_back()
    }
}

impl FromIterator<Value> for MultiSet {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        let mut ms = MultiSet::new();
        for v in iter {
            ms.insert(v);
        }
        ms
    }
}

/// Most frequent value, ties broken towards the smallest; returns it with
/// its multiplicity.
pub fn mode_lowest(ms: &MultiSet) -> Result<(Value, usize), ModelError> {
    let mut entries = ms.entries();
    let (first, first_count) = entries.next().ok_or(ModelError::NoCandidates)?;
    if first.is_bottom() {
        return Err(ModelError::Incomparable("bottom in multiset".into()));
    }
    let mut best = (first, first_count);
    for (v, c) in entries {
        if !v.comparable_with(first) {
            return Err(ModelError::Incomparable(format!("{first} vs {v}")));
        }
        // Ascending iteration: strict `>` keeps the lowest among ties.
        if c > best.1 {
            best = (v, c);
        }
    }
    Ok((best.0.clone(), best.1))
}

pub fn count_value(ms: &MultiSet, v: &Value) -> usize {
    ms.count(v)
}
