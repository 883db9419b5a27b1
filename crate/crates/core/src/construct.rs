//! Separating instances: schedules on which the random oldest-first strategy
//! wins surely with memory `c = b + 1` but loses almost surely with memory `b`.
//!
//! Step `i` knows `s` on `1..=i-c(i)` and `r` on `1..i`, so the very-old pool
//! under `c` is determined. It sets `r(i) = max(i+1, L~_c(i))`, which clears
//! that pool, and fills `s` on `i-c(i)+1 ..= (i+1)-c(i+1)` with `r(i)^3`, which
//! buries the memory-`b` pool under a cube. Using `i+1` rather than `i` keeps
//! `r(1) >= 2`, so `s(1) = r(1)^3 > r(1)`.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::analysis::{self, classify, Verdict, VerdictKind};
use crate::error::{Error, Result};
use crate::json;
use crate::schedule::{
    approx_digits, ConstructionTag, DigitBudget, FunctionSpec, GameInstance, ScheduleSpec,
};

pub const DEFAULT_STEPS: u64 = 12;
pub const DEVIATION: &str = "r=max(i+1,Ltilde_c)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexCertificate {
    pub i: u64,
    pub r: BigUint,
    pub ltilde_c: BigUint,
    pub ltilde_b: BigUint,
    /// `sum_{j<=i-c(i)} s(j) - sum_{j<i} r(j)` before clamping at zero.
    pub surplus_c: BigInt,
}

impl IndexCertificate {
    /// `r(i) / L~_b(i)`, unreduced; `None` when the pool is empty.
    pub fn term_b(&self) -> Option<(BigUint, BigUint)> {
        (!self.ltilde_b.is_zero()).then(|| (self.r.clone(), self.ltilde_b.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationInstance {
    pub memory_b: FunctionSpec,
    pub memory_c: FunctionSpec,
    pub steps: u64,
    pub r: Vec<BigUint>,
    pub s: Vec<BigUint>,
    /// For `i = 1..=certificates.len()`; stops early if `s(i-b(i))` is not
    /// yet assigned after the last step.
    pub certificates: Vec<IndexCertificate>,
}

fn clamped(f: &FunctionSpec, i: u64) -> Result<u64> {
    let v = f.value_at(i).ok_or(Error::IndexBeyondHorizon {
        index: i,
        cap: f.defined_up_to().unwrap_or(0),
    })?;
    if v.is_negative() {
        return Err(Error::SpecInvalid {
            index: i,
            reason: format!("memory value {v} is negative"),
        });
    }
    Ok(v.to_u64().map_or(i, |v| v.min(i)))
}

/// Runs the construction for `steps` steps with memory `b` (and `c = b+1`).
pub fn separating_instance(
    memory_b: &FunctionSpec,
    steps: u64,
    budget: DigitBudget,
) -> Result<SeparationInstance> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be positive".into()));
    }
    let memory_c = memory_b.shifted(1);
    let b = |i| clamped(memory_b, i);
    let c = |i| clamped(&memory_c, i);

    for i in 1..=steps {
        if b(i + 1)? > b(i)? + 1 {
            return Err(Error::RestrictionViolated {
                index: i,
                detail: format!("b({}) > b({i}) + 1", i + 1),
            });
        }
    }
    if analysis::forgetting_bound(&memory_c).is_some() {
        return Err(Error::RestrictionViolated {
            index: 0,
            detail: "i - c(i) is bounded, so no day is ever forgotten under c".into(),
        });
    }
    if steps + 1 - c(steps + 1)? == 0 {
        return Err(Error::RestrictionViolated {
            index: steps,
            detail: "i - c(i) does not grow within the step budget".into(),
        });
    }

    let mut r_tab: Vec<BigUint> = Vec::with_capacity(steps as usize);
    let mut s_tab: Vec<BigUint> = Vec::new();
    let mut arrived = BigUint::zero();
    let mut removed = BigUint::zero();
    let mut surpluses = Vec::with_capacity(steps as usize);

    for i in 1..=steps {
        let forgotten = i - c(i)?;
        debug_assert_eq!(forgotten as usize, s_tab.len());
        let surplus = BigInt::from(arrived.clone()) - BigInt::from(removed.clone());
        let pool = surplus.to_biguint().unwrap_or_default();
        let ri = pool.clone().max(BigUint::from(i + 1));
        let digits = approx_digits(&ri).saturating_mul(3);
        if digits > budget.0 {
            return Err(Error::LimitExceeded {
                digits,
                budget: budget.0,
            });
        }
        let next = i + 1 - c(i + 1)?;
        if next > forgotten {
            let cube = ri.pow(3);
            for _ in forgotten..next {
                arrived += &cube;
                s_tab.push(cube.clone());
            }
            budget.check(&arrived)?;
        }
        removed += &ri;
        r_tab.push(ri);
        surpluses.push((surplus, pool));
    }

    for (k, (ri, si)) in r_tab.iter().zip(&s_tab).enumerate() {
        if ri >= si {
            return Err(Error::ValidityViolated {
                index: k as u64 + 1,
                detail: format!("r = {ri} is not below s = {si}"),
            });
        }
    }

    let mut s_prefix = vec![BigUint::zero()];
    for v in &s_tab {
        let next = s_prefix.last().unwrap() + v;
        s_prefix.push(next);
    }
    let mut certificates = Vec::with_capacity(steps as usize);
    let mut r_before = BigUint::zero();
    for (k, (surplus_c, ltilde_c)) in surpluses.into_iter().enumerate() {
        let i = k as u64 + 1;
        let fb = (i - b(i)?) as usize;
        let Some(arr) = s_prefix.get(fb) else { break };
        let ltilde_b = (BigInt::from(arr.clone()) - BigInt::from(r_before.clone()))
            .to_biguint()
            .unwrap_or_default();
        certificates.push(IndexCertificate {
            i,
            r: r_tab[k].clone(),
            ltilde_c,
            ltilde_b,
            surplus_c,
        });
        r_before += &r_tab[k];
    }

    Ok(SeparationInstance {
        memory_b: memory_b.clone(),
        memory_c,
        steps,
        r: r_tab,
        s: s_tab,
        certificates,
    })
}

impl SeparationInstance {
    fn schedule(&self, memory: FunctionSpec) -> ScheduleSpec {
        ScheduleSpec {
            r: FunctionSpec::generated(self.r.clone()),
            s: FunctionSpec::generated(self.s.clone()),
            b: memory,
            construction: Some(ConstructionTag {
                base_memory: self.memory_b.clone(),
            }),
        }
    }

    /// The game Robin loses almost surely.
    pub fn schedule_b(&self) -> ScheduleSpec {
        self.schedule(self.memory_b.clone())
    }

    /// The game Robin wins surely.
    pub fn schedule_c(&self) -> ScheduleSpec {
        self.schedule(self.memory_c.clone())
    }

    pub fn game_b(&self, budget: DigitBudget) -> Result<GameInstance> {
        GameInstance::with_budget(self.schedule_b(), self.steps, budget)
    }

    pub fn game_c(&self, budget: DigitBudget) -> Result<GameInstance> {
        GameInstance::with_budget(self.schedule_c(), self.steps, budget)
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            deviation: DEVIATION,
            steps: self.steps,
            memory_b: self.memory_b.clone(),
            memory_c: self.memory_c.clone(),
            per_index: self
                .certificates
                .iter()
                .map(|c| SidecarRow {
                    i: c.i,
                    r: c.r.to_string(),
                    ltilde_c: c.ltilde_c.to_string(),
                    ltilde_b: c.ltilde_b.to_string(),
                    term_b: c.term_b().map(|(n, d)| json::ratio_string(&n, &d)),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SidecarRow {
    pub i: u64,
    pub r: String,
    #[serde(rename = "Ltilde_c")]
    pub ltilde_c: String,
    #[serde(rename = "Ltilde_b")]
    pub ltilde_b: String,
    pub term_b: Option<String>,
}

/// Certificate file written next to a constructed schedule.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar {
    pub deviation: &'static str,
    pub steps: u64,
    pub memory_b: FunctionSpec,
    pub memory_c: FunctionSpec,
    pub per_index: Vec<SidecarRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub steps: u64,
    pub certified_through: u64,
    /// First index covered by the `1/i^2` majorant.
    pub majorant_from: u64,
    /// Indices where `L~_c` was clamped at zero; there the memory-`b` pool
    /// identity holds for the unclamped sums only.
    pub clamp_active: Vec<u64>,
    pub checks: u64,
    pub verdict_c: Verdict,
    pub verdict_b: Verdict,
}

fn fail(index: u64, check: impl Into<String>) -> Error {
    Error::VerificationFailed {
        index,
        check: check.into(),
    }
}

/// Re-derives every certificate from the raw tables through
/// [`GameInstance`] and checks the construction's inequalities.
pub fn verify_separation(inst: &SeparationInstance, budget: DigitBudget) -> Result<SeparationReport> {
    let gb = inst.game_b(budget)?;
    let gc = inst.game_c(budget)?;
    for g in [&gb, &gc] {
        if let Some(v) = g.validity() {
            return Err(Error::ValidityViolated {
                index: v.index,
                detail: v.reason.clone(),
            });
        }
    }
    let mut checks = 0u64;

    // every s position written exactly once, by the step that owns it
    let expected_len = inst.steps + 1 - gc_memory(inst, inst.steps + 1)?;
    if inst.s.len() as u64 != expected_len {
        return Err(fail(
            inst.steps,
            format!("s has {} entries, expected {expected_len}", inst.s.len()),
        ));
    }
    for i in 1..=inst.steps {
        let from = i - gc.b(i)? + 1;
        let to = i + 1 - gc_memory(inst, i + 1)?;
        let cube = inst.r[(i - 1) as usize].pow(3);
        for j in from..=to {
            if gc.s(j)? != &cube {
                return Err(fail(j, format!("s({j}) is not r({i})^3")));
            }
            checks += 1;
        }
    }

    let majorant_from = analysis::majorant_start(&gb, inst.steps)?
        .ok_or_else(|| fail(inst.steps, "no day is forgotten under b"))?;
    let mut clamp_active = Vec::new();
    for cert in &inst.certificates {
        let i = cert.i;
        let r = gc.r(i)?;
        let ltc = gc.very_old_level(i)?;
        let ltb = gb.very_old_level(i)?;
        let surplus_c = gc.very_old_surplus(i)?;
        let surplus_b = gb.very_old_surplus(i)?;
        if ltc != cert.ltilde_c || surplus_c != cert.surplus_c {
            return Err(fail(i, "stored L~_c differs from the recomputed value"));
        }
        if ltb != cert.ltilde_b {
            return Err(fail(i, "stored L~_b differs from the recomputed value"));
        }
        if &ltc > r {
            return Err(fail(i, "L~_c(i) <= r(i)"));
        }
        checks += 3;

        let fb = gb.forgotten_through(i)?;
        if fb >= 1 {
            let s_fb = BigInt::from(gb.s(fb)?.clone());
            if surplus_b != &surplus_c + &s_fb {
                return Err(fail(i, "L~_b(i) = L~_c(i) + s(i-b(i)) on unclamped sums"));
            }
            if surplus_c.is_negative() {
                clamp_active.push(i);
            } else if BigInt::from(ltb.clone()) != BigInt::from(ltc.clone()) + &s_fb {
                return Err(fail(i, "L~_b(i) = L~_c(i) + s(i-b(i))"));
            }
            checks += 1;
        }

        if i >= majorant_from {
            let sq = BigUint::from(i) * BigUint::from(i);
            if ltb.is_zero() || r * &sq > ltb {
                return Err(fail(i, "r(i)/L~_b(i) <= 1/i^2"));
            }
            if &ltb <= r {
                return Err(fail(i, "L~_b(i) > r(i)"));
            }
            // sharper bound where s(i-b(i)) was written at step i
            let own_step = fb >= 1 && fb == i - gc.b(i)? + 1 && gb.s(fb)? == &r.pow(3);
            if own_step && !surplus_c.is_negative() && r.pow(3) > ltb {
                return Err(fail(i, "r(i)/L~_b(i) <= 1/r(i)^2"));
            }
            checks += 2;
        }
    }

    let verdict_c = classify(&gc, gc.horizon_cap())?;
    if verdict_c.kind != VerdictKind::RobinSurely {
        return Err(fail(gc.horizon_cap(), "memory c is not classified as a sure win"));
    }
    let verdict_b = classify(&gb, gb.horizon_cap())?;
    if verdict_b.kind != VerdictKind::SheriffAlmostSurely {
        return Err(fail(gb.horizon_cap(), "memory b is not classified as an almost-sure loss"));
    }

    Ok(SeparationReport {
        steps: inst.steps,
        certified_through: inst.certificates.len() as u64,
        majorant_from,
        clamp_active,
        checks,
        verdict_c,
        verdict_b,
    })
}

fn gc_memory(inst: &SeparationInstance, i: u64) -> Result<u64> {
    clamped(&inst.memory_c, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn memoryless(steps: u64) -> SeparationInstance {
        separating_instance(&FunctionSpec::constant(0), steps, DigitBudget::default()).unwrap()
    }

    #[test]
    fn three_steps_by_hand() {
        let inst = memoryless(3);
        assert_eq!(inst.r, vec![big(2), big(6), big(216)]);
        assert_eq!(inst.s, vec![big(8), big(216), big(10_077_696)]);
        let ltc: Vec<_> = inst.certificates.iter().map(|c| c.ltilde_c.clone()).collect();
        assert_eq!(ltc, vec![big(0), big(6), big(216)]);
        let c2 = &inst.certificates[1];
        assert_eq!(c2.ltilde_b, big(222));
        assert_eq!(c2.term_b(), Some((big(6), big(222))));
    }

    #[test]
    fn three_steps_verify() {
        let inst = memoryless(3);
        let rep = verify_separation(&inst, DigitBudget::default()).unwrap();
        let gb = inst.game_b(DigitBudget::default()).unwrap();
        assert_eq!(
            analysis::series_term(&gb, 2).unwrap(),
            num_rational::BigRational::new(1.into(), 37.into())
        );
        assert_eq!(rep.verdict_b.rule, analysis::Rule::ConvergentSeries);
        assert_eq!(rep.verdict_c.kind, VerdictKind::RobinSurely);
        assert_eq!(rep.verdict_b.kind, VerdictKind::SheriffAlmostSurely);
        assert!(rep.clamp_active.is_empty());
        let sc = json::to_canonical(&inst.sidecar());
        assert!(sc.contains(r#"{"Ltilde_b":"222","Ltilde_c":"6","i":2,"r":"6","term_b":"6/222"}"#), "{sc}");
    }

    #[test]
    fn corrupted_s_is_invalid() {
        let mut inst = memoryless(3);
        inst.s[0] = big(1);
        assert!(matches!(
            verify_separation(&inst, DigitBudget::default()),
            Err(Error::ValidityViolated { index: 1, .. })
        ));
    }

    #[test]
    fn corrupted_certificate_is_caught() {
        let mut inst = memoryless(4);
        inst.certificates[2].ltilde_b += 1u32;
        assert!(matches!(
            verify_separation(&inst, DigitBudget::default()),
            Err(Error::VerificationFailed { index: 3, .. })
        ));
    }

    #[test]
    fn one_day_memory_ten_steps() {
        let inst =
            separating_instance(&FunctionSpec::constant(1), 10, DigitBudget::default()).unwrap();
        assert_eq!(inst.s.len(), 9);
        let rep = verify_separation(&inst, DigitBudget::default()).unwrap();
        assert_eq!(rep.majorant_from, 2);
        // L~_c(2) = max(0, 0 - r(1)) is clamped
        assert_eq!(rep.clamp_active, vec![2]);
    }

    #[test]
    fn growth_guard() {
        let err =
            separating_instance(&FunctionSpec::constant(0), 40, DigitBudget::default()).unwrap_err();
        assert!(matches!(err, Error::LimitExceeded { .. }));
    }

    #[test]
    fn rejects_memory_jumps_and_bounded_forgetting() {
        let jump = FunctionSpec::table(vec![0, 2], FunctionSpec::constant(2));
        assert!(matches!(
            separating_instance(&jump, 5, DigitBudget::default()),
            Err(Error::RestrictionViolated { index: 1, .. })
        ));
        let full = FunctionSpec::affine(1, -1);
        assert!(matches!(
            separating_instance(&full, 5, DigitBudget::default()),
            Err(Error::RestrictionViolated { .. })
        ));
    }

    #[test]
    fn constant_memories_separate() {
        for n in 0..5 {
            let inst = separating_instance(&FunctionSpec::constant(n), DEFAULT_STEPS, DigitBudget::default())
                .unwrap();
            let rep = verify_separation(&inst, DigitBudget::default()).unwrap();
            assert_eq!(rep.majorant_from, 2.max(n + 1), "b = {n}");
        }
    }

    #[test]
    fn growing_memory_leaves_a_gap() {
        // when b steps up, step i assigns no s value and the memory-b pool
        // is not buried; the verifier must say so rather than pass
        let b = FunctionSpec::table(vec![0, 0, 1, 1, 2, 2], FunctionSpec::affine(0, 2));
        let inst = separating_instance(&b, 10, DigitBudget::default()).unwrap();
        assert!(matches!(
            verify_separation(&inst, DigitBudget::default()),
            Err(Error::VerificationFailed { index: 4, .. })
        ));
    }
}
