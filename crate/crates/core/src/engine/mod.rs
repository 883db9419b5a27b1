//! Night-by-night simulation of the oldest-first strategies.
//!
//! Untagged bags are held as counts per cell: the very-old pool plus one cell
//! per remembered arrival day. Only tagged bags are materialized. The number
//! of bags taken from each cell is deterministic; randomness only decides
//! which bags inside the boundary cell go, and for tagged bags that choice is
//! resolved with exact sequential draws (see [`resolve`]).

mod montecarlo;
pub mod resolve;
mod trace;

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::schedule::GameInstance;

pub use montecarlo::{empirical_survival, empirical_survival_with, EmpiricalSurvival};
pub use trace::{run_trace, run_trace_stream, NightRecord, TaggedEvent, Trace, TRACE_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Oldest first; ties broken by lowest internal id, i.e. arrival order.
    OldestDet,
    /// Oldest first; uniform choice inside the boundary cell.
    OldestRnd,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oldest-det" => Ok(Strategy::OldestDet),
            "oldest-rnd" => Ok(Strategy::OldestRnd),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::OldestDet => "oldest-det",
            Strategy::OldestRnd => "oldest-rnd",
        }
    }
}

/// Bags that arrived on one remembered day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayCell {
    pub day: u64,
    pub count: BigUint,
    /// Internal id of the day's first bag.
    pub first_id: BigUint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellId {
    VeryOld,
    Day(u64),
}

impl CellId {
    /// Day number used in exported records; the very-old pool is day 0.
    pub fn export_day(self) -> u64 {
        match self {
            CellId::VeryOld => 0,
            CellId::Day(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BagStatus {
    InCave,
    RemovedAt(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedBag {
    pub id: BigUint,
    pub day: u64,
    pub status: BagStatus,
}

/// One cell's share of a night's removals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRemoval {
    pub cell: CellId,
    /// Cell size before the night.
    pub size: BigUint,
    pub removed: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalPlan {
    pub night: u64,
    /// Cells touched this night, oldest first, each with a nonzero count.
    pub cells: Vec<CellRemoval>,
    /// Indices into [`CaveState::tagged`] of the tagged bags removed.
    pub tagged_removed: Vec<usize>,
}

impl RemovalPlan {
    pub fn total(&self) -> BigUint {
        self.cells.iter().map(|c| &c.removed).sum()
    }
}

/// Count-based game state between a day and a night, or after a night.
#[derive(Debug, Clone)]
pub struct CaveState {
    day: u64,
    night: u64,
    very_old: BigUint,
    forgotten_through: u64,
    window: VecDeque<DayCell>,
    tagged: Vec<TaggedBag>,
    tag_requests: BTreeMap<u64, u64>,
    added: BigUint,
    removed: BigUint,
    history: Option<Strategy>,
}

impl Default for CaveState {
    fn default() -> Self {
        Self::new(&[])
    }
}

impl CaveState {
    /// Empty cave. Each entry of `tag_days` tags one bag of that day: the
    /// last bag delivered, then the one before it for a repeated day.
    pub fn new(tag_days: &[u64]) -> Self {
        let mut tag_requests = BTreeMap::new();
        for &d in tag_days {
            *tag_requests.entry(d).or_insert(0) += 1;
        }
        CaveState {
            day: 0,
            night: 0,
            very_old: BigUint::zero(),
            forgotten_through: 0,
            window: VecDeque::new(),
            tagged: Vec::new(),
            tag_requests,
            added: BigUint::zero(),
            removed: BigUint::zero(),
            history: None,
        }
    }

    /// Number of the last completed night.
    pub fn night(&self) -> u64 {
        self.night
    }

    pub fn very_old_count(&self) -> &BigUint {
        &self.very_old
    }

    /// Remembered days, oldest first.
    pub fn window(&self) -> &VecDeque<DayCell> {
        &self.window
    }

    pub fn tagged(&self) -> &[TaggedBag] {
        &self.tagged
    }

    /// Last day whose bags are very old.
    pub fn forgotten_through(&self) -> u64 {
        self.forgotten_through
    }

    pub fn cave_size(&self) -> BigUint {
        &self.very_old + self.window.iter().map(|c| &c.count).sum::<BigUint>()
    }

    pub fn total_added(&self) -> &BigUint {
        &self.added
    }

    pub fn total_removed(&self) -> &BigUint {
        &self.removed
    }

    fn cell_of(&self, day: u64) -> CellId {
        if day <= self.forgotten_through {
            CellId::VeryOld
        } else {
            CellId::Day(day)
        }
    }

    /// Sheriff's move on day `i`: add `s(i)` bags and age the window.
    pub fn step_day(&mut self, g: &GameInstance, i: u64) -> Result<()> {
        if i != self.day + 1 || self.night != self.day {
            return Err(Error::InvalidArgument(format!(
                "day {i} out of order (last day {}, last night {})",
                self.day, self.night
            )));
        }
        if i > g.horizon_cap() {
            return Err(Error::ScheduleExhausted {
                night: i,
                cap: g.horizon_cap(),
            });
        }
        let arrivals = g.s(i)?.clone();
        let first_id = self.added.clone();
        let wanted = self.tag_requests.get(&i).copied().unwrap_or(0);
        let mut k = BigUint::zero();
        for _ in 0..wanted {
            if k >= arrivals {
                break;
            }
            let id = &first_id + &arrivals - 1u32 - &k;
            self.tagged.push(TaggedBag {
                id,
                day: i,
                status: BagStatus::InCave,
            });
            k += 1u32;
        }
        self.added += &arrivals;
        self.window.push_back(DayCell {
            day: i,
            count: arrivals,
            first_id,
        });

        // never move the boundary back: a forgotten day stays forgotten
        let boundary = self.forgotten_through.max(g.forgotten_through(i)?);
        while self.window.front().is_some_and(|c| c.day <= boundary) {
            let cell = self.window.pop_front().unwrap();
            self.very_old += cell.count;
        }
        self.forgotten_through = boundary;
        self.day = i;
        Ok(())
    }

    /// Cell sizes and removal counts for night `i`, oldest cell first. Takes
    /// everything from each cell until the quota is met, which is exactly the
    /// boundary-cell rule: all of `S_0..S_{m-1}` and the remainder from `S_m`.
    pub fn removal_counts(&self, g: &GameInstance, i: u64) -> Result<Vec<CellRemoval>> {
        self.check_night(i)?;
        let mut left = g.r(i)?.clone();
        let mut out = Vec::new();
        let cells = std::iter::once((CellId::VeryOld, &self.very_old))
            .chain(self.window.iter().map(|c| (CellId::Day(c.day), &c.count)));
        for (cell, size) in cells {
            if left.is_zero() {
                break;
            }
            if size.is_zero() {
                continue;
            }
            let take = if &left < size { left.clone() } else { size.clone() };
            left -= &take;
            out.push(CellRemoval {
                cell,
                size: size.clone(),
                removed: take,
            });
        }
        if !left.is_zero() {
            return Err(Error::SpecInvalid {
                index: i,
                reason: format!("cave holds fewer than r({i}) bags"),
            });
        }
        Ok(out)
    }

    fn check_night(&self, i: u64) -> Result<()> {
        if self.day != i || self.night + 1 != i {
            return Err(Error::InvalidArgument(format!(
                "night {i} requires day {i} to be played first (last day {}, last night {})",
                self.day, self.night
            )));
        }
        Ok(())
    }

    fn cell_low_id(&self, cell: CellId) -> BigUint {
        match cell {
            CellId::VeryOld => self.removed.clone(),
            CellId::Day(d) => {
                let first = &self
                    .window
                    .iter()
                    .find(|c| c.day == d)
                    .expect("cell is in the window")
                    .first_id;
                first.max(&self.removed).clone()
            }
        }
    }

    /// Robin's move on night `i`. Consumes randomness only for tagged bags
    /// inside a partially emptied cell.
    pub fn select_removals(
        &self,
        g: &GameInstance,
        i: u64,
        strategy: Strategy,
        rng: &mut StreamRng,
    ) -> Result<RemovalPlan> {
        if strategy == Strategy::OldestDet && self.history == Some(Strategy::OldestRnd) {
            return Err(Error::StrategyMismatch(
                "lowest-id tie-breaking needs a state that has only seen oldest-det nights"
                    .into(),
            ));
        }
        let cells = self.removal_counts(g, i)?;
        rng.at_night(i);
        let mut tagged_removed = Vec::new();
        for cr in &cells {
            let mut members: Vec<usize> = self
                .tagged
                .iter()
                .enumerate()
                .filter(|(_, t)| t.status == BagStatus::InCave && self.cell_of(t.day) == cr.cell)
                .map(|(k, _)| k)
                .collect();
            if members.is_empty() {
                continue;
            }
            members.sort_by(|a, b| self.tagged[*a].id.cmp(&self.tagged[*b].id));
            match strategy {
                Strategy::OldestDet => {
                    // cells stay contiguous id ranges under lowest-id removal
                    let low = self.cell_low_id(cr.cell);
                    for k in members {
                        if self.tagged[k].id < &low + &cr.removed {
                            tagged_removed.push(k);
                        }
                    }
                }
                Strategy::OldestRnd => {
                    let hits = resolve::sample_tagged(&cr.size, &cr.removed, members.len(), rng);
                    tagged_removed.extend(
                        members
                            .into_iter()
                            .zip(hits)
                            .filter_map(|(k, hit)| hit.then_some(k)),
                    );
                }
            }
        }
        Ok(RemovalPlan {
            night: i,
            cells,
            tagged_removed,
        })
    }

    /// Commits a plan produced by [`select_removals`](Self::select_removals).
    pub fn apply_removals(&mut self, plan: &RemovalPlan, strategy: Strategy) -> Result<()> {
        self.check_night(plan.night)?;
        for cr in &plan.cells {
            match cr.cell {
                CellId::VeryOld => self.very_old -= &cr.removed,
                CellId::Day(d) => {
                    let cell = self
                        .window
                        .iter_mut()
                        .find(|c| c.day == d)
                        .ok_or_else(|| Error::InvalidArgument(format!("no cell for day {d}")))?;
                    cell.count -= &cr.removed;
                }
            }
            self.removed += &cr.removed;
        }
        for &k in &plan.tagged_removed {
            self.tagged[k].status = BagStatus::RemovedAt(plan.night);
        }
        self.night = plan.night;
        if self.history != Some(Strategy::OldestRnd) {
            self.history = Some(strategy);
        }
        Ok(())
    }

    /// Day `i` followed by night `i`.
    pub fn play(
        &mut self,
        g: &GameInstance,
        i: u64,
        strategy: Strategy,
        rng: &mut StreamRng,
    ) -> Result<RemovalPlan> {
        self.step_day(g, i)?;
        let plan = self.select_removals(g, i, strategy, rng)?;
        self.apply_removals(&plan, strategy)?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{FunctionSpec, ScheduleSpec};

    fn game(r: u64, s: u64, b: FunctionSpec, h: u64) -> GameInstance {
        GameInstance::new(
            ScheduleSpec::new(FunctionSpec::constant(r), FunctionSpec::constant(s), b),
            h,
        )
        .unwrap()
    }

    fn counts(st: &CaveState) -> Vec<(u64, u64)> {
        st.window()
            .iter()
            .map(|c| (c.day, c.count.clone().try_into().unwrap()))
            .collect()
    }

    #[test]
    fn memoryless_day_goes_straight_to_very_old() {
        let g = game(1, 2, FunctionSpec::constant(0), 10);
        let mut st = CaveState::default();
        st.step_day(&g, 1).unwrap();
        assert_eq!(st.very_old_count(), &BigUint::from(2u32));
        assert!(st.window().is_empty());
    }

    #[test]
    fn window_bookkeeping_with_two_days_of_memory() {
        let g = game(1, 2, FunctionSpec::constant(2), 10);
        let mut st = CaveState::default();
        let mut rng = StreamRng::new(0, 0);
        st.play(&g, 1, Strategy::OldestDet, &mut rng).unwrap();
        st.play(&g, 2, Strategy::OldestDet, &mut rng).unwrap();
        st.step_day(&g, 3).unwrap();
        // day 1 is very old; nights 1 and 2 each took one day-1 bag
        assert_eq!(st.forgotten_through(), 1);
        assert_eq!(st.very_old_count(), &BigUint::zero());
        assert_eq!(counts(&st), vec![(2, 2), (3, 2)]);

        // untouched counts, i.e. no removals, match the description directly
        let g = game(1, 2, FunctionSpec::constant(2), 10);
        let mut st = CaveState::default();
        for i in 1..=3 {
            st.step_day(&g, i).unwrap();
            st.night = i; // skip removals
        }
        assert_eq!(st.very_old_count(), &BigUint::from(2u32));
        assert_eq!(counts(&st), vec![(2, 2), (3, 2)]);
    }

    #[test]
    fn one_day_memory_first_day() {
        let g = game(1, 3, FunctionSpec::constant(1), 10);
        let mut st = CaveState::default();
        st.step_day(&g, 1).unwrap();
        assert!(st.very_old_count().is_zero());
        assert_eq!(counts(&st), vec![(1, 3)]);
    }

    #[test]
    fn boundary_cell_rule() {
        // pool of 1, remembered day with 3, r = 2
        let g = game(2, 3, FunctionSpec::constant(1), 10);
        let mut st = CaveState::new(&[2, 2, 2]);
        let mut rng = StreamRng::new(5, 0);
        st.play(&g, 1, Strategy::OldestDet, &mut rng).unwrap();
        st.step_day(&g, 2).unwrap();
        assert_eq!(st.very_old_count(), &BigUint::from(1u32));
        assert_eq!(counts(&st), vec![(2, 3)]);
        let plan = st.select_removals(&g, 2, Strategy::OldestDet, &mut rng).unwrap();
        assert_eq!(plan.cells.len(), 2);
        assert_eq!(plan.cells[0].cell, CellId::VeryOld);
        assert_eq!(plan.cells[0].removed, BigUint::from(1u32));
        assert_eq!(plan.cells[1].cell, CellId::Day(2));
        assert_eq!(plan.cells[1].removed, BigUint::from(1u32));
        // lowest id of day 2 is the third tag (ids are last, second-last, first)
        let removed: Vec<_> = plan.tagged_removed.iter().map(|&k| &st.tagged()[k].id).collect();
        assert_eq!(removed, vec![&BigUint::from(3u32)]);

        let plan = st.select_removals(&g, 2, Strategy::OldestRnd, &mut rng).unwrap();
        assert_eq!(plan.tagged_removed.len(), 1);
    }

    #[test]
    fn det_after_rnd_is_refused() {
        let g = game(1, 2, FunctionSpec::constant(0), 10);
        let mut st = CaveState::new(&[1]);
        let mut rng = StreamRng::new(0, 0);
        st.play(&g, 1, Strategy::OldestRnd, &mut rng).unwrap();
        st.step_day(&g, 2).unwrap();
        assert!(matches!(
            st.select_removals(&g, 2, Strategy::OldestDet, &mut rng),
            Err(Error::StrategyMismatch(_))
        ));
    }

    #[test]
    fn schedule_exhausted() {
        let spec = ScheduleSpec::new(
            FunctionSpec::generated(vec![1u32.into()]),
            FunctionSpec::constant(2),
            FunctionSpec::constant(0),
        );
        let g = GameInstance::new(spec, 10).unwrap();
        let mut st = CaveState::default();
        let mut rng = StreamRng::new(0, 0);
        st.play(&g, 1, Strategy::OldestRnd, &mut rng).unwrap();
        assert!(matches!(
            st.step_day(&g, 2),
            Err(Error::ScheduleExhausted { night: 2, cap: 1 })
        ));
    }

    #[test]
    fn out_of_order_calls() {
        let g = game(1, 2, FunctionSpec::constant(0), 10);
        let mut st = CaveState::default();
        assert!(st.step_day(&g, 2).is_err());
        st.step_day(&g, 1).unwrap();
        assert!(st.step_day(&g, 2).is_err());
    }
}
