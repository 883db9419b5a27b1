//! Schedule functions r (nightly removals), s (daily arrivals) and b (memory
//! bound), plus the derived cave levels.
//!
//! Days and nights are 1-based. `cave_level(i)` is the number of bags left
//! after night `i`; `very_old_level(i)` is the number of bags that arrived on
//! days `1..=i-b(i)` and are still in the cave when night `i` starts.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

/// One of the schedule functions, described declaratively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FunctionSpec {
    Constant {
        value: u64,
    },
    /// `a*i + c`.
    Affine {
        a: i64,
        c: i64,
    },
    /// Explicit values for `i = 1..=values.len()`; `tail` is evaluated at the
    /// same absolute index beyond that.
    Table {
        values: Vec<i64>,
        tail: Box<FunctionSpec>,
    },
    /// Big values with a hard horizon at `values.len()`.
    Generated {
        #[serde(with = "json::decimal_vec")]
        values: Vec<BigUint>,
    },
}

// Read by hand rather than derived so that errors inside a function keep
// the name of the offending field.
mod wire {
    use num_bigint::BigUint;
    use serde::de::{DeserializeOwned, Error as _};
    use serde::{Deserialize, Deserializer};
    use serde_json::Value;

    use super::FunctionSpec;
    use crate::json;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Constant {
        value: u64,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Affine {
        a: i64,
        c: i64,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Table {
        values: Vec<i64>,
        tail: Box<FunctionSpec>,
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Generated {
        #[serde(with = "json::decimal_vec")]
        values: Vec<BigUint>,
    }

    fn body<T: DeserializeOwned, E: serde::de::Error>(v: Value) -> Result<T, E> {
        serde_path_to_error::deserialize(v).map_err(|e| {
            let path = e.path().to_string();
            E::custom(json::nest_path(&path, &e.into_inner().to_string()))
        })
    }

    impl<'de> Deserialize<'de> for FunctionSpec {
        fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
            let mut map = serde_json::Map::<String, Value>::deserialize(de)?;
            let kind = match map.remove("kind") {
                Some(Value::String(k)) => k,
                Some(other) => {
                    return Err(D::Error::custom(format!("`kind`: expected a string, got {other}")))
                }
                None => return Err(D::Error::custom("`kind`: missing field")),
            };
            let rest = Value::Object(map);
            Ok(match kind.as_str() {
                "constant" => {
                    let w: Constant = body(rest)?;
                    FunctionSpec::Constant { value: w.value }
                }
                "affine" => {
                    let w: Affine = body(rest)?;
                    FunctionSpec::Affine { a: w.a, c: w.c }
                }
                "table" => {
                    let w: Table = body(rest)?;
                    FunctionSpec::Table {
                        values: w.values,
                        tail: w.tail,
                    }
                }
                "generated" => {
                    let w: Generated = body(rest)?;
                    FunctionSpec::Generated { values: w.values }
                }
                other => {
                    return Err(D::Error::custom(format!(
                        "`kind`: unknown variant `{other}`, expected one of `constant`, `affine`, `table`, `generated`"
                    )))
                }
            })
        }
    }
}

impl FunctionSpec {
    pub fn constant(value: u64) -> Self {
        FunctionSpec::Constant { value }
    }

    pub fn affine(a: i64, c: i64) -> Self {
        FunctionSpec::Affine { a, c }
    }

    pub fn table(values: Vec<i64>, tail: FunctionSpec) -> Self {
        FunctionSpec::Table {
            values,
            tail: Box::new(tail),
        }
    }

    pub fn generated(values: Vec<BigUint>) -> Self {
        FunctionSpec::Generated { values }
    }

    /// Raw value at `i >= 1`, or `None` past a generated table's horizon.
    pub fn value_at(&self, i: u64) -> Option<BigInt> {
        debug_assert!(i >= 1);
        match self {
            FunctionSpec::Constant { value } => Some(BigInt::from(*value)),
            FunctionSpec::Affine { a, c } => {
                Some(BigInt::from(*a) * BigInt::from(i) + BigInt::from(*c))
            }
            FunctionSpec::Table { values, tail } => match values.get((i - 1) as usize) {
                Some(v) if i as usize <= values.len() => Some(BigInt::from(*v)),
                _ => tail.value_at(i),
            },
            FunctionSpec::Generated { values } => values
                .get((i - 1) as usize)
                .map(|v| BigInt::from_biguint(Sign::Plus, v.clone())),
        }
    }

    /// Last index with a defined value; `None` when unbounded.
    pub fn defined_up_to(&self) -> Option<u64> {
        match self {
            FunctionSpec::Constant { .. } | FunctionSpec::Affine { .. } => None,
            FunctionSpec::Table { values, tail } => tail
                .defined_up_to()
                .map(|t| t.max(values.len() as u64)),
            FunctionSpec::Generated { values } => Some(values.len() as u64),
        }
    }

    /// The same function plus `delta` everywhere.
    pub fn shifted(&self, delta: i64) -> FunctionSpec {
        match self {
            FunctionSpec::Constant { value } => {
                let v = *value as i64 + delta;
                if v >= 0 {
                    FunctionSpec::Constant { value: v as u64 }
                } else {
                    FunctionSpec::Affine { a: 0, c: v }
                }
            }
            FunctionSpec::Affine { a, c } => FunctionSpec::Affine { a: *a, c: c + delta },
            FunctionSpec::Table { values, tail } => FunctionSpec::Table {
                values: values.iter().map(|v| v + delta).collect(),
                tail: Box::new(tail.shifted(delta)),
            },
            FunctionSpec::Generated { values } => {
                assert!(delta >= 0, "generated tables hold nonnegative values");
                let d = BigUint::from(delta as u64);
                FunctionSpec::Generated {
                    values: values.iter().map(|v| v + &d).collect(),
                }
            }
        }
    }

    /// Strips table prefixes: the spec that governs all large indices and the
    /// last index covered by a table.
    pub fn eventual(&self) -> (&FunctionSpec, u64) {
        let mut spec = self;
        let mut table_end = 0u64;
        while let FunctionSpec::Table { values, tail } = spec {
            table_end = table_end.max(values.len() as u64);
            spec = tail;
        }
        (spec, table_end)
    }

    /// `Some(v)` if the function is constant from index `table_end + 1` on.
    pub fn eventual_constant(&self) -> Option<(i64, u64)> {
        match self.eventual() {
            (FunctionSpec::Constant { value }, end) => Some((*value as i64, end)),
            (FunctionSpec::Affine { a: 0, c }, end) => Some((*c, end)),
            _ => None,
        }
    }
}

/// Marks a schedule whose r and s tables came out of the separating
/// construction for the memory function `base_memory`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionTag {
    pub base_memory: FunctionSpec,
}

/// Declarative description of a game: removals `r`, arrivals `s`, memory `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub r: FunctionSpec,
    pub s: FunctionSpec,
    pub b: FunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionTag>,
}

impl ScheduleSpec {
    pub fn new(r: FunctionSpec, s: FunctionSpec, b: FunctionSpec) -> Self {
        ScheduleSpec {
            r,
            s,
            b,
            construction: None,
        }
    }

    /// Constant r, s and b.
    pub fn constant(r: u64, s: u64, b: u64) -> Self {
        Self::new(
            FunctionSpec::constant(r),
            FunctionSpec::constant(s),
            FunctionSpec::constant(b),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        json::from_str_with_path(text)
    }

    pub fn to_canonical_json(&self) -> String {
        json::to_canonical(self)
    }

    /// Last index where r, s and b are all defined.
    pub fn defined_up_to(&self) -> Option<u64> {
        [&self.r, &self.s, &self.b]
            .iter()
            .filter_map(|f| f.defined_up_to())
            .min()
    }
}

/// Upper bound on the decimal size of any integer the library will build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigitBudget(pub u64);

impl DigitBudget {
    pub const DEFAULT_DIGITS: u64 = 1_000_000;

    pub fn check(&self, value: &BigUint) -> Result<()> {
        let digits = approx_digits(value);
        if digits > self.0 {
            Err(Error::LimitExceeded {
                digits,
                budget: self.0,
            })
        } else {
            Ok(())
        }
    }
}

impl Default for DigitBudget {
    fn default() -> Self {
        DigitBudget(Self::DEFAULT_DIGITS)
    }
}

/// Decimal digit count, accurate to within one.
pub fn approx_digits(value: &BigUint) -> u64 {
    if value.is_zero() {
        return 1;
    }
    (value.bits() as f64 * std::f64::consts::LOG10_2).floor() as u64 + 1
}

/// `(r(i), s(i), b(i))` with `b` already clamped to `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionValues {
    pub r: BigUint,
    pub s: BigUint,
    pub b: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: u64,
    pub reason: String,
}

/// Horizon-relative check of validity and of the two structural restrictions
/// on the memory function. Never a global claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictionReport {
    pub horizon: u64,
    pub validity_ok: bool,
    pub validity_violation: Option<Violation>,
    /// `b(i+1) <= b(i) + 1` on the checked prefix.
    pub restriction1_ok: bool,
    /// First `i` with `b(i+1) > b(i) + 1`.
    pub restriction1_violation: Option<u64>,
    /// Largest `i <= horizon` with `very_old_level(i) <= r(i)`.
    pub restriction2_last_violation: Option<u64>,
    /// Largest observed `i - b(i)`.
    pub max_forgotten_day: u64,
    /// Whether `i - b(i)` was larger at the horizon than at its midpoint.
    pub forgotten_day_grew: bool,
}

/// A validated-on-demand game with eagerly cached prefix sums. Immutable.
#[derive(Debug, Clone)]
pub struct GameInstance {
    spec: ScheduleSpec,
    r: Vec<BigUint>,
    s: Vec<BigUint>,
    b: Vec<u64>,
    r_prefix: Vec<BigUint>,
    s_prefix: Vec<BigUint>,
    horizon_cap: u64,
    invalid: Option<Violation>,
    budget: DigitBudget,
}

impl GameInstance {
    /// Builds caches for indices `1..=horizon` (fewer if the spec stops earlier).
    pub fn new(spec: ScheduleSpec, horizon: u64) -> Result<Self> {
        Self::with_budget(spec, horizon, DigitBudget::default())
    }

    pub fn with_budget(spec: ScheduleSpec, horizon: u64, budget: DigitBudget) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let len = |f: &FunctionSpec| f.defined_up_to().map_or(horizon, |d| d.min(horizon));
        let mut invalid: Option<Violation> = None;
        let mut note = |index: u64, reason: String| {
            if invalid.as_ref().is_none_or(|v| index < v.index) {
                invalid = Some(Violation { index, reason });
            }
        };

        let nonneg = |f: &FunctionSpec, name: &str, note: &mut dyn FnMut(u64, String)| {
            (1..=len(f))
                .map(|i| {
                    let v = f.value_at(i).expect("index within defined range");
                    v.to_biguint().unwrap_or_else(|| {
                        note(i, format!("{name}({i}) = {v} is negative"));
                        BigUint::zero()
                    })
                })
                .collect::<Vec<_>>()
        };
        let r = nonneg(&spec.r, "r", &mut note);
        let s = nonneg(&spec.s, "s", &mut note);
        let b: Vec<u64> = (1..=len(&spec.b))
            .map(|i| {
                let v = spec.b.value_at(i).expect("index within defined range");
                if v.sign() == Sign::Minus {
                    note(i, format!("b({i}) = {v} is negative"));
                    0
                } else {
                    v.to_u64().map_or(i, |v| v.min(i))
                }
            })
            .collect();

        for (idx, (ri, si)) in r.iter().zip(&s).enumerate() {
            let i = idx as u64 + 1;
            if ri.is_zero() {
                note(i, format!("r({i}) must be at least 1"));
            } else if si <= ri {
                note(i, format!("s({i}) = {si} must exceed r({i}) = {ri}"));
            }
        }

        let prefix = |vals: &[BigUint]| {
            let mut out = Vec::with_capacity(vals.len() + 1);
            let mut acc = BigUint::zero();
            out.push(acc.clone());
            for v in vals {
                acc += v;
                out.push(acc.clone());
            }
            out
        };
        let r_prefix = prefix(&r);
        let s_prefix = prefix(&s);
        for total in [r_prefix.last(), s_prefix.last()].into_iter().flatten() {
            budget.check(total)?;
        }

        let horizon_cap = (r.len() as u64).min(s.len() as u64).min(b.len() as u64);
        Ok(GameInstance {
            spec,
            r,
            s,
            b,
            r_prefix,
            s_prefix,
            horizon_cap,
            invalid,
            budget,
        })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn horizon_cap(&self) -> u64 {
        self.horizon_cap
    }

    pub fn budget(&self) -> DigitBudget {
        self.budget
    }

    /// First validity violation found in the cached range, if any.
    pub fn validity(&self) -> Option<&Violation> {
        self.invalid.as_ref()
    }

    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    fn beyond(&self, index: u64) -> Error {
        Error::IndexBeyondHorizon {
            index,
            cap: self.horizon_cap,
        }
    }

    fn require_valid(&self) -> Result<()> {
        match &self.invalid {
            Some(v) => Err(Error::SpecInvalid {
                index: v.index,
                reason: v.reason.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn evaluate(&self, i: u64) -> Result<FunctionValues> {
        self.require_valid()?;
        if i == 0 || i > self.horizon_cap {
            return Err(self.beyond(i));
        }
        let k = (i - 1) as usize;
        Ok(FunctionValues {
            r: self.r[k].clone(),
            s: self.s[k].clone(),
            b: self.b[k],
        })
    }

    pub fn r(&self, i: u64) -> Result<&BigUint> {
        self.r
            .get((i as usize).wrapping_sub(1))
            .ok_or_else(|| self.beyond(i))
    }

    pub fn s(&self, i: u64) -> Result<&BigUint> {
        self.s
            .get((i as usize).wrapping_sub(1))
            .ok_or_else(|| self.beyond(i))
    }

    /// Memory bound, clamped to `min(spec value, i)`.
    pub fn b(&self, i: u64) -> Result<u64> {
        self.b
            .get((i as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| self.beyond(i))
    }

    /// `i - b(i)`: the last day whose bags are very old on night `i`.
    pub fn forgotten_through(&self, i: u64) -> Result<u64> {
        Ok(i - self.b(i)?)
    }

    /// `sum_{j<=n} s(j)`.
    pub fn arrivals_through(&self, n: u64) -> Result<&BigUint> {
        self.s_prefix.get(n as usize).ok_or_else(|| self.beyond(n))
    }

    /// `sum_{j<=n} r(j)`.
    pub fn removals_through(&self, n: u64) -> Result<&BigUint> {
        self.r_prefix.get(n as usize).ok_or_else(|| self.beyond(n))
    }

    /// Bags in the cave after night `i`; `cave_level(0) == 0`.
    pub fn cave_level(&self, i: u64) -> Result<BigInt> {
        if i > self.horizon_cap {
            return Err(self.beyond(i));
        }
        let k = i as usize;
        Ok(BigInt::from(self.s_prefix[k].clone()) - BigInt::from(self.r_prefix[k].clone()))
    }

    /// `sum_{j<=i-b(i)} s(j) - sum_{j<i} r(j)` without the clamp at zero.
    pub fn very_old_surplus(&self, i: u64) -> Result<BigInt> {
        if i == 0 {
            return Err(self.beyond(i));
        }
        let through = self.forgotten_through(i)?;
        let arrived = self.arrivals_through(through)?;
        let removed = self.removals_through(i - 1)?;
        Ok(BigInt::from(arrived.clone()) - BigInt::from(removed.clone()))
    }

    /// Size of the very-old pool when night `i` starts, clamped at zero.
    pub fn very_old_level(&self, i: u64) -> Result<BigUint> {
        Ok(self.very_old_surplus(i)?.to_biguint().unwrap_or_default())
    }

    /// Restriction 1 in its memory form: `b(i+1) <= b(i)+1` on `1..horizon`.
    pub fn first_memory_jump(&self, horizon: u64) -> Result<Option<u64>> {
        for i in 1..horizon {
            if self.b(i + 1)? > self.b(i)? + 1 {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Restriction 1 in its boundary form: `i - b(i)` is nondecreasing.
    pub fn forgotten_through_nondecreasing(&self, horizon: u64) -> Result<bool> {
        let mut prev = 0;
        for i in 1..=horizon {
            let f = self.forgotten_through(i)?;
            if f < prev {
                return Ok(false);
            }
            prev = f;
        }
        Ok(true)
    }

    pub fn check_restrictions(&self, horizon: u64) -> Result<RestrictionReport> {
        if horizon == 0 || horizon > self.horizon_cap {
            return Err(self.beyond(horizon));
        }
        let validity_violation = self.invalid.clone().filter(|v| v.index <= horizon);
        let restriction1_violation = self.first_memory_jump(horizon)?;

        let mut restriction2_last_violation = None;
        let mut max_forgotten_day = 0;
        for i in 1..=horizon {
            if &self.very_old_level(i)? <= self.r(i)? {
                restriction2_last_violation = Some(i);
            }
            max_forgotten_day = max_forgotten_day.max(self.forgotten_through(i)?);
        }
        let mid = (horizon / 2).max(1);
        let forgotten_day_grew = self.forgotten_through(horizon)? > self.forgotten_through(mid)?;

        Ok(RestrictionReport {
            horizon,
            validity_ok: validity_violation.is_none(),
            validity_violation,
            restriction1_ok: restriction1_violation.is_none(),
            restriction1_violation,
            restriction2_last_violation,
            max_forgotten_day,
            forgotten_day_grew,
        })
    }
}
