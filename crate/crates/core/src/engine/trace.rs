use num_bigint::BigUint;
#[cfg(test)]
use num_bigint::BigInt;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{BagStatus, CaveState, Strategy};
use crate::error::{Error, Result};
use crate::json;
use crate::rng::{StreamRng, PRNG_ID};
use crate::schedule::GameInstance;

/// First line fed to the digest, ahead of the night records.
pub const TRACE_FORMAT: &str = "robinhood-trace/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaggedEvent {
    #[serde(with = "json::decimal")]
    pub id: BigUint,
    pub day: u64,
    /// `"created"` or `"removed"`.
    pub event: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NightRecord {
    pub i: u64,
    #[serde(with = "json::decimal")]
    pub cave_before: BigUint,
    #[serde(with = "json::decimal")]
    pub cave_after: BigUint,
    /// `(day, count)` per touched cell; day 0 is the very-old pool.
    #[serde(serialize_with = "cells")]
    pub removed_cells: Vec<(u64, BigUint)>,
    pub tagged_events: Vec<TaggedEvent>,
}

fn cells<S: serde::Serializer>(v: &[(u64, BigUint)], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter().map(|(d, c)| (d, c.to_string())))
}

#[derive(Debug, Clone)]
pub struct Trace {
    /// SHA-256 of the schedule's canonical JSON.
    pub schedule_ref: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub stream: u64,
    pub records: Vec<NightRecord>,
    /// Hex SHA-256 over the format line, the PRNG id and the records.
    pub digest: String,
    pub final_state: CaveState,
}

impl Trace {
    /// One canonical JSON record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&json::to_canonical(r));
            out.push('\n');
        }
        out
    }

    /// Removal night of each tagged bag, in tagging order.
    pub fn tagged_outcomes(&self) -> Vec<(u64, Option<u64>)> {
        self.final_state
            .tagged()
            .iter()
            .map(|t| match t.status {
                BagStatus::InCave => (t.day, None),
                BagStatus::RemovedAt(n) => (t.day, Some(n)),
            })
            .collect()
    }
}

pub fn run_trace(
    g: &GameInstance,
    strategy: Strategy,
    nights: u64,
    seed: u64,
    tagged_days: &[u64],
) -> Result<Trace> {
    run_trace_stream(g, strategy, nights, seed, 0, tagged_days)
}

/// Plays nights `1..=nights` on the random stream `(seed, stream)`.
pub fn run_trace_stream(
    g: &GameInstance,
    strategy: Strategy,
    nights: u64,
    seed: u64,
    stream: u64,
    tagged_days: &[u64],
) -> Result<Trace> {
    if nights > g.horizon_cap() {
        return Err(Error::ScheduleExhausted {
            night: nights,
            cap: g.horizon_cap(),
        });
    }
    let mut state = CaveState::new(tagged_days);
    let mut rng = StreamRng::new(seed, stream);
    let mut hasher = Sha256::new();
    hasher.update(TRACE_FORMAT.as_bytes());
    hasher.update(b"\n");
    hasher.update(PRNG_ID.as_bytes());
    hasher.update(b"\n");

    let mut records = Vec::with_capacity(nights as usize);
    for i in 1..=nights {
        let tagged_before = state.tagged().len();
        state.step_day(g, i)?;
        g.budget().check(state.total_added())?;
        let cave_before = state.cave_size();
        let mut events: Vec<TaggedEvent> = state.tagged()[tagged_before..]
            .iter()
            .map(|t| TaggedEvent {
                id: t.id.clone(),
                day: t.day,
                event: "created",
            })
            .collect();

        let plan = state.select_removals(g, i, strategy, &mut rng)?;
        state.apply_removals(&plan, strategy)?;

        let mut removed: Vec<usize> = plan.tagged_removed.clone();
        removed.sort_by(|a, b| state.tagged()[*a].id.cmp(&state.tagged()[*b].id));
        events.extend(removed.into_iter().map(|k| {
            let t = &state.tagged()[k];
            TaggedEvent {
                id: t.id.clone(),
                day: t.day,
                event: "removed",
            }
        }));

        let rec = NightRecord {
            i,
            cave_before,
            cave_after: state.cave_size(),
            removed_cells: plan
                .cells
                .iter()
                .map(|c| (c.cell.export_day(), c.removed.clone()))
                .collect(),
            tagged_events: events,
        };
        hasher.update(json::to_canonical(&rec).as_bytes());
        hasher.update(b"\n");
        records.push(rec);
    }

    let schedule_ref = hex::encode(Sha256::digest(g.spec().to_canonical_json().as_bytes()));
    Ok(Trace {
        schedule_ref,
        strategy,
        seed,
        stream,
        records,
        digest: hex::encode(hasher.finalize()),
        final_state: state,
    })
}
