use num_rational::BigRational;
use num_traits::ToPrimitive;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use robinhood::engine::{BagStatus, CaveState, Strategy};
use robinhood::rng::StreamRng;
use robinhood::{GameInstance, ScheduleSpec};

/// A very old tagged bag leaves on night `i` with probability `r(i)/L~(i)`.
#[test]
fn single_night_removal_frequency() {
    let g = GameInstance::new(ScheduleSpec::constant(2, 5, 1), 30).unwrap();
    let (d, night) = (3, 10);

    let state = (0..)
        .find_map(|seed| {
            let mut s = CaveState::new(&[d]);
            let mut rng = StreamRng::new(seed, 0);
            for i in 1..night {
                s.play(&g, i, Strategy::OldestRnd, &mut rng).unwrap();
            }
            (s.tagged()[0].status == BagStatus::InCave).then_some(s)
        })
        .unwrap();
    let mut state = state;
    state.step_day(&g, night).unwrap();
    assert!(d <= state.forgotten_through());

    let pool = g.very_old_level(night).unwrap();
    let r = g.r(night).unwrap();
    assert_eq!(pool, 27u32.into());
    let p = BigRational::new(r.clone().into(), pool.into()).to_f64().unwrap();

    let n = 100_000u64;
    let hits = (0..n)
        .filter(|&k| {
            let mut rng = StreamRng::new(5, k);
            let plan = state.select_removals(&g, night, Strategy::OldestRnd, &mut rng).unwrap();
            !plan.tagged_removed.is_empty()
        })
        .count() as f64;
    let (e1, e0) = (p * n as f64, (1.0 - p) * n as f64);
    let stat = (hits - e1).powi(2) / e1 + (n as f64 - hits - e0).powi(2) / e0;
    let pval = ChiSquared::new(1.0).unwrap().sf(stat);
    assert!(pval > 1e-6, "frequency {} vs {p}, p-value {pval}", hits / n as f64);
}
