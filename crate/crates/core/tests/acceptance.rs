//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use robinhood::analysis::{
    classify, survival_curve, survival_probability, NumberSpace, SurvivalMode, VerdictKind,
};
use robinhood::construct::{separating_instance, verify_separation};
use robinhood::engine::{
    empirical_survival, resolve, run_trace, BagStatus, CaveState, Strategy,
};
use robinhood::rng::StreamRng;
use robinhood::{DigitBudget, FunctionSpec, GameInstance, ScheduleSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn constant_game(r: u64, s: u64, b: u64, h: u64) -> GameInstance {
    GameInstance::new(ScheduleSpec::constant(r, s, b), h).unwrap()
}

fn q(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn memoryless_identity() -> Outcome {
    let mut rng = StreamRng::new(1, 0);
    for k in 0..50 {
        let (r, s) = if k % 2 == 0 {
            let r = 1 + rng.below_u64(20);
            (FunctionSpec::constant(r), FunctionSpec::constant(r + 1 + rng.below_u64(20)))
        } else {
            let (a, c) = (rng.below_u64(5) as i64, 1 + rng.below_u64(10) as i64);
            let (da, dc) = (rng.below_u64(5) as i64, 1 + rng.below_u64(10) as i64);
            (FunctionSpec::affine(a, c), FunctionSpec::affine(a + da, c + dc))
        };
        let spec = ScheduleSpec::new(r, s, FunctionSpec::constant(0));
        let g = GameInstance::new(spec.clone(), 10_000).map_err(|e| e.to_string())?;
        check(g.is_valid(), || format!("generated spec {k} is invalid"))?;
        for i in 1..=10_000 {
            let lhs = BigInt::from(g.very_old_level(i).unwrap());
            let rhs = g.cave_level(i).unwrap() + BigInt::from(g.r(i).unwrap().clone());
            check(lhs == rhs, || {
                format!("spec {} at i={i}", spec.to_canonical_json())
            })?;
        }
    }
    Ok("50 schedules, i = 1..10^4, exact".into())
}

fn telescoping() -> Outcome {
    let g = constant_game(1, 2, 0, 1000);
    let mut worst = 0f64;
    for d in 1..=50u64 {
        let curve = survival_curve(&g, d, 1000, SurvivalMode::PaperProduct).map_err(|e| e.to_string())?;
        for (k, v) in curve.iter().enumerate() {
            let n = d - 1 + k as u64;
            check(*v == q(d, n + 1), || format!("curve d={d} N={n}: {v}"))?;
        }
        for n in d..=1000 {
            let log = survival_probability(&g, d, n, SurvivalMode::PaperProduct, NumberSpace::Log)
                .map_err(|e| e.to_string())?
                .value
                .to_f64();
            let want = d as f64 / (n + 1) as f64;
            let rel = ((log - want) / want).abs();
            worst = worst.max(rel);
            check(rel <= 1e-9, || format!("log d={d} N={n}: {log} vs {want}"))?;
            if (d * 31 + n) % 97 == 0 {
                let direct = survival_probability(&g, d, n, SurvivalMode::PaperProduct, NumberSpace::Rational)
                    .map_err(|e| e.to_string())?;
                check(direct.value.as_exact() == Some(&q(d, n + 1)), || {
                    format!("direct d={d} N={n}")
                })?;
            }
        }
    }
    Ok(format!("d <= 50, N <= 1000 exact; worst log relative error {worst:.2e}"))
}

fn monte_carlo_case(g: &GameInstance, d: u64, n: u64, exact: &BigRational, seed: u64) -> Result<(f64, f64), String> {
    let trials = 200_000;
    let est = empirical_survival(g, d, n, trials, seed).map_err(|e| e.to_string())?;
    let p = exact.to_f64().unwrap();
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    let z = (est.estimate - p) / sd;
    check(z.abs() < 3.0, || {
        format!("estimate {} vs {p}: z = {z:.2} (3 sigma = {:.2e})", est.estimate, 3.0 * sd)
    })?;
    Ok((est.estimate, z))
}

fn monte_carlo() -> Outcome {
    let g1 = constant_game(1, 2, 0, 99);
    let (e1, z1) = monte_carlo_case(&g1, 1, 99, &q(1, 100), 11)?;
    let g2 = constant_game(1, 3, 0, 200);
    let exact = survival_probability(&g2, 2, 200, SurvivalMode::ExactStrategy, NumberSpace::Rational)
        .map_err(|e| e.to_string())?
        .value
        .as_exact()
        .cloned()
        .unwrap();
    let (e2, z2) = monte_carlo_case(&g2, 2, 200, &exact, 12)?;
    Ok(format!(
        "(1,2,0) d=1 N=99: {e1:.5} vs 0.01, z={z1:.2}; (1,3,0) d=2 N=200: {e2:.5} vs {:.5}, z={z2:.2}",
        exact.to_f64().unwrap()
    ))
}

fn separation() -> Outcome {
    let start = Instant::now();
    let budget = DigitBudget::default();
    let inst = separating_instance(&FunctionSpec::constant(0), 12, budget).map_err(|e| e.to_string())?;
    let report = verify_separation(&inst, budget).map_err(|e| e.to_string())?;

    // the stated inequalities, re-checked here from the schedules alone
    let gb = inst.game_b(budget).map_err(|e| e.to_string())?;
    let gc = inst.game_c(budget).map_err(|e| e.to_string())?;
    for i in 1..=gc.horizon_cap() {
        let r = gc.r(i).unwrap();
        let (lc, lb) = (gc.very_old_level(i).unwrap(), gb.very_old_level(i).unwrap());
        check(&lc <= r, || format!("L~_c({i}) > r({i})"))?;
        let fb = gb.forgotten_through(i).unwrap();
        check(lb == &lc + gb.s(fb).unwrap(), || format!("L~_b({i}) != L~_c({i}) + s({fb})"))?;
        if i >= 2 {
            check(r * BigUint::from(i * i) <= lb, || format!("term_b({i}) > 1/{i}^2"))?;
        }
    }
    let vc = classify(&gc, gc.horizon_cap()).map_err(|e| e.to_string())?;
    let vb = classify(&gb, gb.horizon_cap()).map_err(|e| e.to_string())?;
    check(vc.kind == VerdictKind::RobinSurely, || format!("c verdict {:?}", vc.kind))?;
    check(vb.kind == VerdictKind::SheriffAlmostSurely, || format!("b verdict {:?}", vb.kind))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("sep.json");
    let status = Command::new(env!("CARGO_BIN_EXE_rh"))
        .args(["construct", "--memory-b", "constant:0", "--steps", "12", "-o"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), || {
        format!("rh construct failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    let written = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    check(written == inst.schedule_b().to_canonical_json(), || "CLI schedule differs".into())?;

    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 30.0, || format!("took {elapsed:.1}s"))?;
    Ok(format!(
        "12 steps, {} checks, verdicts {:?}/{:?}, {elapsed:.2}s",
        report.checks, vc.kind, vb.kind
    ))
}

fn full_memory_fifo() -> Outcome {
    let spec = ScheduleSpec::new(
        FunctionSpec::constant(1),
        FunctionSpec::constant(2),
        FunctionSpec::affine(1, 0),
    );
    let horizon = 2 * 100 + 2;
    let g = GameInstance::new(spec, horizon).unwrap();
    let tags: Vec<u64> = (1..=100).flat_map(|d| [d, d]).collect();
    let trace = run_trace(&g, Strategy::OldestDet, horizon, 0, &tags).map_err(|e| e.to_string())?;
    let mut latest = 0;
    for (d, night) in trace.tagged_outcomes() {
        let n = night.ok_or_else(|| format!("a day-{d} bag is still in the cave"))?;
        check(n <= 2 * d + 2, || format!("day {d} removed on night {n}"))?;
        latest = latest.max(n);
    }
    Ok(format!("200 bags of days 1..100, all removed by 2d+2 (last on night {latest})"))
}

fn pool_cleared_under_c() -> Outcome {
    let budget = DigitBudget::default();
    let mut lines = Vec::new();
    for base in [0u64, 1] {
        let inst = separating_instance(&FunctionSpec::constant(base), 8, budget).map_err(|e| e.to_string())?;
        let g = inst.game_c(budget).map_err(|e| e.to_string())?;
        for strategy in [Strategy::OldestRnd, Strategy::OldestDet] {
            for d in 1..=5u64 {
                let deadline = (1..=g.horizon_cap())
                    .find(|&i| {
                        d <= g.forgotten_through(i).unwrap()
                            && &g.very_old_level(i).unwrap() <= g.r(i).unwrap()
                    })
                    .ok_or_else(|| format!("b={base}: no clearing night for day {d}"))?;
                let mut state = CaveState::new(&[d, d, d]);
                let mut rng = StreamRng::new(7 + d, 0);
                for i in 1..=deadline {
                    state.play(&g, i, strategy, &mut rng).map_err(|e| e.to_string())?;
                }
                let day_left = state.window().iter().any(|c| c.day == d && !c.count.is_zero());
                check(state.forgotten_through() >= d && state.very_old_count().is_zero() && !day_left, || {
                    format!("b={base} {}: day {d} bags remain after night {deadline}", strategy.name())
                })?;
                check(
                    state.tagged().iter().all(|t| matches!(t.status, BagStatus::RemovedAt(n) if n <= deadline)),
                    || format!("b={base}: tagged day-{d} bag survived night {deadline}"),
                )?;
                if strategy == Strategy::OldestRnd {
                    lines.push(format!("b={base} d={d}->{deadline}"));
                }
            }
        }
    }
    Ok(lines.join(", "))
}

/// Exact probability of each tagged pattern from listing every k-subset of
/// `v` positions; the tagged bags are positions `0..t`.
fn enumerate_patterns(v: u32, k: u32, t: u32) -> Vec<(u32, BigRational)> {
    let mut counts = vec![0u64; 1 << t];
    let mut total = 0u64;
    for mask in 0u32..(1 << v) {
        if mask.count_ones() == k {
            counts[(mask & ((1 << t) - 1)) as usize] += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(m, c)| (m as u32, q(c, total)))
        .collect()
}

fn selection_law() -> Outcome {
    let samples = 100_000u64;
    let mut exact_cfgs = 0;
    let mut sampled_cfgs = 0;
    let mut min_p = 1.0f64;
    for v in 0..=6u32 {
        for k in 0..=v {
            for t in 0..=v {
                let law = resolve::tagged_law(&BigUint::from(v), &BigUint::from(k), t as usize);
                let mut got: Vec<(u32, BigRational)> = law
                    .into_iter()
                    .map(|(pat, p)| (pat.iter().enumerate().map(|(j, h)| (*h as u32) << j).sum(), p))
                    .collect();
                got.sort_by_key(|x| x.0);
                check(got == enumerate_patterns(v, k, t), || format!("law v={v} k={k} t={t}"))?;
                exact_cfgs += 1;
            }
        }
    }

    // sample through select_removals: one day of v bags, k removed that night
    for v in 2..=6u64 {
        for k in 1..v {
            for t in 1..=v as u32 {
                let g = constant_game(k, v, 0, 1);
                let state = {
                    let mut s = CaveState::new(&vec![1; t as usize]);
                    s.step_day(&g, 1).unwrap();
                    s
                };
                let expected = enumerate_patterns(v as u32, k as u32, t);
                let mut observed = vec![0u64; 1 << t];
                for n in 0..samples {
                    let mut rng = StreamRng::new(99, n);
                    let plan = state.select_removals(&g, 1, Strategy::OldestRnd, &mut rng).unwrap();
                    // tags were created last-bag-first, so tag j is the j-th from the top
                    let m: u32 = plan.tagged_removed.iter().map(|&j| 1u32 << j).sum();
                    observed[m as usize] += 1;
                }
                let mut stat = 0.0;
                for (m, p) in &expected {
                    let e = p.to_f64().unwrap() * samples as f64;
                    let o = observed[*m as usize] as f64;
                    stat += (o - e) * (o - e) / e;
                }
                let impossible: u64 = (0..observed.len() as u32)
                    .filter(|m| !expected.iter().any(|(x, _)| x == m))
                    .map(|m| observed[m as usize])
                    .sum();
                check(impossible == 0, || format!("v={v} k={k} t={t}: impossible pattern drawn"))?;
                let df = expected.len() as f64 - 1.0;
                let p = if df > 0.0 { ChiSquared::new(df).unwrap().sf(stat) } else { 1.0 };
                min_p = min_p.min(p);
                check(p > 1e-6, || format!("v={v} k={k} t={t}: chi-square p = {p:.2e}"))?;
                sampled_cfgs += 1;
            }
        }
    }
    Ok(format!(
        "{exact_cfgs} configurations exact, {sampled_cfgs} sampled x 10^5, min p = {min_p:.3}"
    ))
}

/// Digest of the reference run below, frozen so other platforms and later
/// builds can be compared against it.
const REFERENCE_DIGEST: &str = "faaa799b13047b668a88f154f08092e97670841c3d8fa2396cfed314a1f20fb4";

fn determinism() -> Outcome {
    let g = constant_game(2, 5, 1, 80);
    let tags = [1, 1, 2, 3, 5, 8, 13];
    let a = run_trace(&g, Strategy::OldestRnd, 80, 2024, &tags).map_err(|e| e.to_string())?;
    let b = run_trace(&g, Strategy::OldestRnd, 80, 2024, &tags).map_err(|e| e.to_string())?;
    let c = run_trace(&g, Strategy::OldestRnd, 80, 2025, &tags).map_err(|e| e.to_string())?;
    check(a.digest == b.digest && a.to_jsonl() == b.to_jsonl(), || "two runs differ".into())?;
    check(a.digest != c.digest, || "changing the seed left the digest unchanged".into())?;
    check(a.digest == REFERENCE_DIGEST, || format!("digest {} differs from the reference", a.digest))?;
    let d = run_trace(&g, Strategy::OldestDet, 80, 1, &tags).unwrap();
    let e = run_trace(&g, Strategy::OldestDet, 80, 2, &tags).unwrap();
    check(d.digest == e.digest, || "deterministic strategy depends on the seed".into())?;
    Ok(format!("digest {}", &a.digest[..16]))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("memoryless identity", memoryless_identity),
        ("telescoping survival", telescoping),
        ("monte carlo vs analytic", monte_carlo),
        ("separation instance", separation),
        ("full memory, deterministic FIFO", full_memory_fifo),
        ("pool cleared under memory c", pool_cleared_under_c),
        ("selection law", selection_law),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1}s]", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why}) [{secs:.1}s]", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
