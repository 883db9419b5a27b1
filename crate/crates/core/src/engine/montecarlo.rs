use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{run_trace_stream, BagStatus, CaveState, CellId, Strategy};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::schedule::GameInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalSurvival {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl EmpiricalSurvival {
    fn from_counts(survived: u64, trials: u64) -> Self {
        let p = survived as f64 / trials as f64;
        EmpiricalSurvival {
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// `(night, cell size, removed from cell)` for the cell holding the bag.
struct Exposure {
    night: u64,
    size: BigUint,
    removed: BigUint,
    small: Option<(u64, u64)>,
}

/// Cell counts do not depend on the random choices, so the nights on which
/// a day-`d` bag is exposed are computed once and shared by all trials.
fn exposures(g: &GameInstance, d: u64, nights: u64) -> Result<Vec<Exposure>> {
    let mut state = CaveState::default();
    let mut out = Vec::new();
    let mut rng = StreamRng::new(0, 0);
    for i in 1..=nights {
        state.step_day(g, i)?;
        let counts = state.removal_counts(g, i)?;
        if i >= d {
            let home = if d <= state.forgotten_through() {
                CellId::VeryOld
            } else {
                CellId::Day(d)
            };
            if let Some(c) = counts.iter().find(|c| c.cell == home) {
                out.push(Exposure {
                    night: i,
                    small: c.removed.to_u64().zip(c.size.to_u64()),
                    size: c.size.clone(),
                    removed: c.removed.clone(),
                });
            }
        }
        // untagged state: the plan draws nothing
        let plan = state.select_removals(g, i, Strategy::OldestRnd, &mut rng)?;
        state.apply_removals(&plan, Strategy::OldestRnd)?;
    }
    Ok(out)
}

/// Fraction of independent runs in which the tagged day-`d` bag is still in
/// the cave after `nights`, under the random oldest-first strategy. Trial `t`
/// uses stream `(seed, t)` and draws exactly what
/// [`run_trace_stream`](super::run_trace_stream) would for a single tag.
pub fn empirical_survival(
    g: &GameInstance,
    d: u64,
    nights: u64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalSurvival> {
    empirical_survival_with(g, Strategy::OldestRnd, d, nights, trials, seed)
}

pub fn empirical_survival_with(
    g: &GameInstance,
    strategy: Strategy,
    d: u64,
    nights: u64,
    trials: u64,
    seed: u64,
) -> Result<EmpiricalSurvival> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("day must be at least 1".into()));
    }
    if nights > g.horizon_cap() {
        return Err(Error::ScheduleExhausted {
            night: nights,
            cap: g.horizon_cap(),
        });
    }
    if nights < d {
        return Ok(EmpiricalSurvival::from_counts(trials, trials));
    }
    if strategy == Strategy::OldestDet {
        let t = run_trace_stream(g, strategy, nights, seed, 0, &[d])?;
        let alive = t.final_state.tagged()[0].status == BagStatus::InCave;
        return Ok(EmpiricalSurvival::from_counts(
            if alive { trials } else { 0 },
            trials,
        ));
    }

    let plan = exposures(g, d, nights)?;
    let survived: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = StreamRng::new(seed, t);
            for e in &plan {
                if e.removed.is_zero() {
                    continue;
                }
                if e.removed >= e.size {
                    return 0;
                }
                rng.at_night(e.night);
                let hit = match e.small {
                    Some((k, v)) => rng.below_u64(v) < k,
                    None => rng.bernoulli_ratio(&e.removed, &e.size),
                };
                if hit {
                    return 0;
                }
            }
            1
        })
        .sum();
    Ok(EmpiricalSurvival::from_counts(survived, trials))
}
