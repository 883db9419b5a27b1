//! Series terms `r(i)/L~(i)`, survival products and the win/lose classifier.
//!
//! Classification only fires on families where a horizon-independent
//! certificate exists. Partial sums are reported as diagnostics and never
//! used to decide convergence.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::schedule::{FunctionSpec, GameInstance};

/// Exact reduced `r(i) / L~(i)`.
pub fn series_term(g: &GameInstance, i: u64) -> Result<BigRational> {
    let pool = g.very_old_level(i)?;
    if pool.is_zero() {
        return Err(Error::TermUndefined { index: i });
    }
    let r = g.r(i)?;
    Ok(BigRational::new(r.clone().into(), pool.into()))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `ln(1 - num/den)` for `0 <= num <= den`, accurate at both ends.
pub fn ln_one_minus_ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num >= den {
        return f64::NEG_INFINITY;
    }
    let x = ratio_f64(num, den);
    if x <= 0.5 {
        (-x).ln_1p()
    } else {
        ratio_f64(&(den - num), den).ln()
    }
}

fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    BigRational::new(num.clone().into(), den.clone().into())
        .to_f64()
        .unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalMode {
    /// Factor `1 - r(i)/L~(i)` on every night from the arrival day on.
    PaperProduct,
    /// The true survival law under the random oldest-first strategy: factor
    /// 1 while the bag is remembered, `1 - r(i)/L~(i)` once it is very old.
    ExactStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberSpace {
    Rational,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Real(f64),
}

impl Probability {
    pub fn to_f64(&self) -> f64 {
        match self {
            Probability::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Probability::Real(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Probability::Exact(q) => Some(q),
            Probability::Real(_) => None,
        }
    }
}

impl Serialize for Probability {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Probability::Exact(q) => ser.serialize_str(&json::rational_string(q)),
            Probability::Real(x) => ser.serialize_str(&x.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalResult {
    pub day: u64,
    pub horizon: u64,
    pub mode: SurvivalMode,
    pub space: NumberSpace,
    pub value: Probability,
    /// Natural log of the product (log space only; `None` also encodes -inf).
    pub log_value: Option<f64>,
}

/// The per-night survival factors `(numerator, denominator)` for a day-`d`
/// bag on nights `d..=horizon`.
pub fn survival_factors(
    g: &GameInstance,
    d: u64,
    horizon: u64,
    mode: SurvivalMode,
) -> Result<Vec<(BigUint, BigUint)>> {
    if d == 0 {
        return Err(Error::InvalidArgument("day must be at least 1".into()));
    }
    if horizon + 1 < d {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} precedes day {d} by more than one night"
        )));
    }
    if horizon > g.horizon_cap() {
        return Err(Error::IndexBeyondHorizon {
            index: horizon,
            cap: g.horizon_cap(),
        });
    }
    let mut out = Vec::new();
    for i in d..=horizon {
        let pool = g.very_old_level(i)?;
        let r = g.r(i)?;
        match mode {
            SurvivalMode::PaperProduct => {
                if &pool <= r {
                    return Err(Error::RestrictionViolated {
                        index: i,
                        detail: format!("very-old pool {pool} does not exceed r = {r}"),
                    });
                }
                out.push((&pool - r, pool));
            }
            SurvivalMode::ExactStrategy => {
                if &pool < r {
                    return Err(Error::RestrictionViolated {
                        index: i,
                        detail: format!("very-old pool {pool} is smaller than r = {r}"),
                    });
                }
                if d <= g.forgotten_through(i)? {
                    out.push((&pool - r, pool));
                } else {
                    out.push((BigUint::one(), BigUint::one()));
                }
            }
        }
    }
    Ok(out)
}

pub fn survival_probability(
    g: &GameInstance,
    d: u64,
    horizon: u64,
    mode: SurvivalMode,
    space: NumberSpace,
) -> Result<SurvivalResult> {
    let factors = survival_factors(g, d, horizon, mode)?;
    let (value, log_value) = match space {
        NumberSpace::Rational => {
            let mut acc = BigRational::one();
            for (n, q) in &factors {
                if n == q {
                    continue;
                }
                acc *= BigRational::new(n.clone().into(), q.clone().into());
            }
            (Probability::Exact(acc), None)
        }
        NumberSpace::Log => {
            let mut acc = CompensatedSum::default();
            for (n, q) in &factors {
                if n != q {
                    acc.add(ln_one_minus_ratio(&(q - n), q));
                }
            }
            let lv = acc.value();
            (Probability::Real(lv.exp()), lv.is_finite().then_some(lv))
        }
    };
    Ok(SurvivalResult {
        day: d,
        horizon,
        mode,
        space,
        value,
        log_value,
    })
}

/// Exact survival of a day-`d` bag for every horizon `d-1..=horizon`;
/// element `k` is the value at horizon `d-1+k`.
pub fn survival_curve(
    g: &GameInstance,
    d: u64,
    horizon: u64,
    mode: SurvivalMode,
) -> Result<Vec<BigRational>> {
    let factors = survival_factors(g, d, horizon, mode)?;
    let mut acc = BigRational::one();
    let mut out = Vec::with_capacity(factors.len() + 1);
    out.push(acc.clone());
    for (n, q) in factors {
        if n != q {
            acc *= BigRational::new(n.into(), q.into());
        }
        out.push(acc.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    RobinSurely,
    RobinAlmostSurely,
    SheriffAlmostSurely,
    Undetermined,
}

/// Which criterion fired. The serialized names are part of the output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// `i - b(i)` bounded: the oldest-first strategy wins surely.
    #[serde(rename = "Prop1.1")]
    BoundedForgetting,
    /// The very-old pool fits in one night's quota infinitely often.
    #[serde(rename = "Prop1.2")]
    PoolClearedInfinitelyOften,
    /// `sum r(i)/L~(i)` diverges.
    #[serde(rename = "Thm2.1")]
    DivergentSeries,
    /// `sum r(i)/L~(i)` converges.
    #[serde(rename = "Thm2.2")]
    ConvergentSeries,
    #[serde(rename = "none")]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    /// `i - b(i) <= bound` for every `i`.
    BoundedForgetting { bound: u64 },
    /// Built by the separating construction for this memory, which keeps
    /// `L~(i) <= r(i)` at every step; `indices` lists the checked prefix.
    PoolCleared { checked_through: u64, indices: Vec<u64> },
    /// `L~(i) = slope*i + offset` exactly for `i >= from_index`, with constant
    /// `r`, so the terms are comparable to the harmonic series.
    HarmonicDivergence {
        r: u64,
        slope: u64,
        #[serde(with = "json::signed_decimal")]
        offset: BigInt,
        from_index: u64,
    },
    /// `term(i) <= 1/i^2` for `i >= from_index` (constructor invariant,
    /// re-checked through `checked_through`); `sum_{i>N} 1/i^2 < 1/N`.
    SquareMajorant {
        from_index: u64,
        checked_through: u64,
        tail_bound: String,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    pub horizon: u64,
    pub partial_sum: f64,
    /// Last defined term as `"num/den"`.
    pub last_term: Option<String>,
    /// Least-squares slope of `ln term` against `ln i` over the last decade.
    pub term_decay_exponent_estimate: Option<f64>,
}

impl SeriesDiagnostics {
    pub fn compute(g: &GameInstance, horizon: u64) -> Result<Self> {
        let mut sum = CompensatedSum::default();
        let mut last_term = None;
        let from = (horizon / 10).max(1);
        let mut pts = Vec::new();
        for i in 1..=horizon {
            let pool = g.very_old_level(i)?;
            if pool.is_zero() {
                continue;
            }
            let r = g.r(i)?;
            let t = ratio_f64(r, &pool);
            sum.add(t);
            if i >= from && t > 0.0 {
                pts.push(((i as f64).ln(), t.ln()));
            }
            last_term = Some((r.clone(), pool));
        }
        let slope = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            (sxx > 0.0).then(|| sxy / sxx)
        } else {
            None
        };
        Ok(SeriesDiagnostics {
            horizon,
            partial_sum: sum.value(),
            last_term: last_term.map(|(n, d)| json::ratio_string(&n, &d)),
            term_decay_exponent_estimate: slope,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub rule: Rule,
    pub certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SeriesDiagnostics>,
}

impl Verdict {
    fn new(kind: VerdictKind, rule: Rule, certificate: Certificate) -> Self {
        Verdict {
            kind,
            rule,
            certificate,
            diagnostics: None,
        }
    }

    pub fn to_json(&self) -> String {
        json::to_canonical(self)
    }
}

/// Classifies the game under the random oldest-first strategy. Rules are
/// tried in order: bounded forgetting, construction witness for the larger
/// memory, constant-family divergence, construction majorant for the smaller
/// memory; otherwise `Undetermined` with diagnostics.
pub fn classify(g: &GameInstance, horizon: u64) -> Result<Verdict> {
    if horizon == 0 || horizon > g.horizon_cap() {
        return Err(Error::IndexBeyondHorizon {
            index: horizon,
            cap: g.horizon_cap(),
        });
    }
    if let Some(v) = g.validity() {
        return Err(Error::SpecInvalid {
            index: v.index,
            reason: v.reason.clone(),
        });
    }

    if let Some(bound) = forgetting_bound(&g.spec().b) {
        return Ok(Verdict::new(
            VerdictKind::RobinSurely,
            Rule::BoundedForgetting,
            Certificate::BoundedForgetting { bound },
        ));
    }

    let tag = g.spec().construction.as_ref();
    if let Some(tag) = tag {
        if g.spec().b == tag.base_memory.shifted(1) {
            if let Some(indices) = pool_cleared_indices(g, horizon)? {
                return Ok(Verdict::new(
                    VerdictKind::RobinSurely,
                    Rule::PoolClearedInfinitelyOften,
                    Certificate::PoolCleared {
                        checked_through: horizon,
                        indices,
                    },
                ));
            }
        }
    }

    if let Some(cert) = harmonic_certificate(g, horizon)? {
        return Ok(Verdict::new(
            VerdictKind::RobinAlmostSurely,
            Rule::DivergentSeries,
            cert,
        ));
    }

    if let Some(tag) = tag {
        if g.spec().b == tag.base_memory {
            if let Some(from_index) = square_majorant_holds(g, horizon)? {
                return Ok(Verdict::new(
                    VerdictKind::SheriffAlmostSurely,
                    Rule::ConvergentSeries,
                    Certificate::SquareMajorant {
                        from_index,
                        checked_through: horizon,
                        tail_bound: "sum_{i>N} 1/i^2 < 1/N".into(),
                    },
                ));
            }
        }
    }

    let mut v = Verdict::new(VerdictKind::Undetermined, Rule::None, Certificate::None);
    v.diagnostics = Some(SeriesDiagnostics::compute(g, horizon)?);
    Ok(v)
}

/// A bound on `i - b(i)` valid for all `i`, when the memory spec proves one.
pub fn forgetting_bound(b: &FunctionSpec) -> Option<u64> {
    let (tail, table_end) = b.eventual();
    let tail_bound = match tail {
        FunctionSpec::Affine { a, c } if *a >= 1 => {
            // for i > table_end: i - min(a*i + c, i) <= max(0, (1-a)(table_end+1) - c)
            let first = table_end as i128 + 1;
            (0i128).max((1 - *a as i128) * first - *c as i128)
        }
        _ => return None,
    };
    let mut bound = tail_bound;
    for i in 1..=table_end {
        let v = b.value_at(i)?.to_i128()?;
        let clamped = v.clamp(0, i as i128);
        bound = bound.max(i as i128 - clamped);
    }
    u64::try_from(bound).ok()
}

/// Returns the checked indices if `L~(i) <= r(i)` at every one of them.
fn pool_cleared_indices(g: &GameInstance, horizon: u64) -> Result<Option<Vec<u64>>> {
    let mut idx = Vec::with_capacity(horizon as usize);
    for i in 1..=horizon {
        if &g.very_old_level(i)? > g.r(i)? {
            return Ok(None);
        }
        idx.push(i);
    }
    Ok(Some(idx))
}

/// First index where the majorant applies: `i >= 2` and some day is forgotten.
pub fn majorant_start(g: &GameInstance, horizon: u64) -> Result<Option<u64>> {
    for i in 2..=horizon {
        if g.forgotten_through(i)? >= 1 {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// `true` if `r(i) * i^2 <= L~(i)` for every index from the majorant start.
fn square_majorant_holds(g: &GameInstance, horizon: u64) -> Result<Option<u64>> {
    let Some(from) = majorant_start(g, horizon)? else {
        return Ok(None);
    };
    for i in from..=horizon {
        let pool = g.very_old_level(i)?;
        let r = g.r(i)?;
        if pool.is_zero() || r * BigUint::from(i) * BigUint::from(i) > pool {
            return Ok(None);
        }
    }
    Ok(Some(from))
}

fn table_prefix_sum(f: &FunctionSpec, n: u64) -> Option<BigInt> {
    let mut acc = BigInt::zero();
    for i in 1..=n {
        acc += f.value_at(i)?;
    }
    Some(acc)
}

/// Eventually-constant r, s, b: `L~(i)` is eventually affine with slope
/// `s - r > 0`, so the terms behave like `1/i`.
fn harmonic_certificate(g: &GameInstance, horizon: u64) -> Result<Option<Certificate>> {
    let spec = g.spec();
    let (Some((rc, tr)), Some((sc, ts)), Some((bc, tb))) = (
        spec.r.eventual_constant(),
        spec.s.eventual_constant(),
        spec.b.eventual_constant(),
    ) else {
        return Ok(None);
    };
    if rc < 1 || sc <= rc || bc < 0 {
        return Ok(None);
    }
    let from_index = [tb + 1, tr + 1, ts + bc as u64 + 1, bc as u64 + 1]
        .into_iter()
        .max()
        .unwrap();
    let (Some(s_head), Some(r_head)) =
        (table_prefix_sum(&spec.s, ts), table_prefix_sum(&spec.r, tr))
    else {
        return Ok(None);
    };
    let (rc_b, sc_b, bc_b): (BigInt, BigInt, BigInt) = (rc.into(), sc.into(), bc.into());
    let offset = s_head - &sc_b * (&bc_b + BigInt::from(ts)) - r_head
        + &rc_b * (BigInt::from(tr) + BigInt::one());
    let slope = (sc - rc) as u64;

    // the closed form must agree with the cached prefix sums
    for i in from_index..=horizon {
        let expect = BigInt::from(slope) * BigInt::from(i) + &offset;
        if g.very_old_surplus(i)? != expect {
            return Ok(None);
        }
    }
    if offset.is_negative() && offset.abs() > BigInt::from(u64::MAX) {
        return Ok(None);
    }
    Ok(Some(Certificate::HarmonicDivergence {
        r: rc as u64,
        slope,
        offset,
        from_index,
    }))
}
