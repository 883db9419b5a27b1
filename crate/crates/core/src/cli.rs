//! `rh` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    classify, survival_probability, CompensatedSum, NumberSpace, SurvivalMode,
};
use crate::construct::{self, DEFAULT_STEPS};
use crate::engine::{empirical_survival_with, run_trace, Strategy};
use crate::error::{Error, Result};
use crate::json;
use crate::schedule::{DigitBudget, FunctionSpec, GameInstance, ScheduleSpec};

/// Seed used when neither `--seed` nor `RH_SEED` is given ("ROBINHOO").
pub const DEFAULT_SEED: u64 = 0x524F_4249_4E48_4F4F;
/// Horizon used by `validate`/`classify` when none is given and the schedule
/// is defined for ever.
pub const DEFAULT_HORIZON: u64 = 1000;

#[derive(Debug, Parser)]
#[command(name = "rh", version, about = "Robin Hood game with bounded memory")]
struct Cli {
    /// Digit guard for big integers (overrides RH_DIGIT_BUDGET).
    #[arg(long, global = true)]
    digit_budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validity and restriction report.
    Validate(Table),
    /// Verdict: who wins, by which rule, with a certificate.
    Classify(Table),
    /// Survival probability of a day-d bag.
    Survival(SurvivalArgs),
    /// Play the game and print the night-by-night trace, or estimate survival.
    Simulate(SimulateArgs),
    /// Build and verify a separating instance.
    Construct(ConstructArgs),
    /// Analytic survival against a Monte Carlo estimate.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Table {
    schedule: PathBuf,
    #[arg(long)]
    horizon: Option<u64>,
    /// Per-index rows i,r,s,b,L,Ltilde,term,partial_sum instead of JSON.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpaceArg {
    Rational,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    OldestDet,
    OldestRnd,
}

impl From<ModeArg> for SurvivalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paper => SurvivalMode::PaperProduct,
            ModeArg::Exact => SurvivalMode::ExactStrategy,
        }
    }
}

impl From<SpaceArg> for NumberSpace {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Rational => NumberSpace::Rational,
            SpaceArg::Log => NumberSpace::Log,
        }
    }
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::OldestDet => Strategy::OldestDet,
            StrategyArg::OldestRnd => Strategy::OldestRnd,
        }
    }
}

#[derive(Debug, Args)]
struct SurvivalArgs {
    schedule: PathBuf,
    #[arg(long)]
    day: u64,
    #[arg(long)]
    horizon: u64,
    #[arg(long, value_enum, default_value = "paper")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "rational")]
    space: SpaceArg,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    schedule: PathBuf,
    #[arg(long)]
    nights: u64,
    #[arg(long, value_enum, default_value = "oldest-rnd")]
    strategy: StrategyArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Tag one bag of this day; repeatable.
    #[arg(long = "tag-day")]
    tag_day: Vec<u64>,
    /// Estimate survival of the single tagged day over this many runs.
    #[arg(long)]
    trials: Option<u64>,
    /// Write the trace records here and print a summary instead.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    /// `constant:n` or a path to a function-spec JSON file.
    #[arg(long)]
    memory_b: String,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: u64,
    /// Schedule under b; `<stem>.c.json` and `<stem>.cert.json` go alongside.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    schedule: PathBuf,
    #[arg(long)]
    day: u64,
    #[arg(long)]
    nights: u64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code. Results go to `out`, diagnostics to `err`.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn env_u64(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => parse_u64(v.trim())
            .map(Some)
            .ok_or_else(|| Error::InvalidArgument(format!("{name}={v:?} is not an integer"))),
        Err(_) => Ok(None),
    }
}

fn parse_u64(s: &str) -> Option<u64> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

fn budget(cli: Option<u64>) -> Result<DigitBudget> {
    Ok(match cli {
        Some(b) => DigitBudget(b),
        None => env_u64("RH_DIGIT_BUDGET")?.map_or_else(DigitBudget::default, DigitBudget),
    })
}

fn seed(cli: Option<u64>) -> Result<u64> {
    Ok(match cli {
        Some(s) => s,
        None => env_u64("RH_SEED")?.unwrap_or(DEFAULT_SEED),
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ScheduleSpec> {
    ScheduleSpec::from_json(&read(path)?)
}

fn default_horizon(spec: &ScheduleSpec, given: Option<u64>) -> u64 {
    given.unwrap_or_else(|| spec.defined_up_to().map_or(DEFAULT_HORIZON, |d| d.min(DEFAULT_HORIZON)))
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    writeln!(out, "{}", json::to_canonical(value)).map_err(io_err)
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("write failed: {e}"))
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let budget = budget(cli.digit_budget)?;
    match cli.command {
        Command::Validate(a) => validate(a, budget, out),
        Command::Classify(a) => {
            let spec = load(&a.schedule)?;
            let h = default_horizon(&spec, a.horizon);
            let g = GameInstance::with_budget(spec, h, budget)?;
            if a.csv {
                csv_table(&g, h, out)?;
            } else {
                writeln!(out, "{}", classify(&g, h)?.to_json()).map_err(io_err)?;
            }
            Ok(0)
        }
        Command::Survival(a) => {
            let spec = load(&a.schedule)?;
            let g = GameInstance::with_budget(spec, a.horizon, budget)?;
            let res = survival_probability(&g, a.day, a.horizon, a.mode.into(), a.space.into())?;
            if a.csv {
                csv_table(&g, a.horizon, out)?;
            } else {
                emit(out, &res)?;
            }
            Ok(0)
        }
        Command::Simulate(a) => simulate(a, budget, out, err),
        Command::Construct(a) => construct_cmd(a, budget, out),
        Command::Compare(a) => compare(a, budget, out),
    }
}

fn validate(a: Table, budget: DigitBudget, out: &mut dyn Write) -> Result<i32> {
    let spec = load(&a.schedule)?;
    let h = default_horizon(&spec, a.horizon);
    let g = GameInstance::with_budget(spec, h, budget)?;
    let h = h.min(g.horizon_cap());
    let report = g.check_restrictions(h)?;
    if a.csv {
        csv_table(&g, h, out)?;
    } else {
        emit(out, &report)?;
    }
    Ok(if report.validity_ok && report.restriction1_ok { 0 } else { 1 })
}

/// Rows `i,r,s,b,L,Ltilde,term,partial_sum`; `term` is `r/Ltilde` unreduced
/// (empty when the pool is empty) and `partial_sum` a float.
fn csv_table(g: &GameInstance, horizon: u64, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "i,r,s,b,L,Ltilde,term,partial_sum").map_err(io_err)?;
    let mut sum = CompensatedSum::default();
    for i in 1..=horizon {
        let v = g.evaluate(i)?;
        let lt = g.very_old_level(i)?;
        let term = if lt.is_zero() {
            String::new()
        } else {
            sum.add(ratio(&v.r, &lt));
            json::ratio_string(&v.r, &lt)
        };
        writeln!(
            out,
            "{i},{},{},{},{},{lt},{term},{}",
            v.r,
            v.s,
            v.b,
            g.cave_level(i)?,
            sum.value()
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn ratio(n: &BigUint, d: &BigUint) -> f64 {
    BigRational::new(n.clone().into(), d.clone().into())
        .to_f64()
        .unwrap_or(f64::NAN)
}

fn simulate(a: SimulateArgs, budget: DigitBudget, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let spec = load(&a.schedule)?;
    let g = GameInstance::with_budget(spec, a.nights.max(1), budget)?;
    let seed = seed(a.seed)?;
    let strategy: Strategy = a.strategy.into();

    if let Some(trials) = a.trials {
        let [d] = a.tag_day[..] else {
            return Err(Error::InvalidArgument(
                "--trials needs exactly one --tag-day".into(),
            ));
        };
        let est = empirical_survival_with(&g, strategy, d, a.nights, trials, seed)?;
        emit(
            out,
            &json!({
                "day": d,
                "nights": a.nights,
                "strategy": strategy,
                "seed": seed,
                "trials": est.trials,
                "estimate": est.estimate,
                "stderr": est.stderr,
            }),
        )?;
        return Ok(0);
    }

    let trace = run_trace(&g, strategy, a.nights, seed, &a.tag_day)?;
    let outcomes: Vec<_> = trace
        .tagged_outcomes()
        .into_iter()
        .map(|(day, night)| json!({"day": day, "removed_at": night}))
        .collect();
    let summary = json!({
        "schedule_ref": trace.schedule_ref,
        "strategy": strategy,
        "seed": seed,
        "nights": a.nights,
        "digest": trace.digest,
        "tagged": outcomes,
    });
    match a.output {
        Some(path) => {
            write_file(&path, &trace.to_jsonl())?;
            emit(out, &summary)?;
        }
        None => {
            out.write_all(trace.to_jsonl().as_bytes()).map_err(io_err)?;
            writeln!(err, "{}", json::to_canonical(&summary)).map_err(io_err)?;
        }
    }
    Ok(0)
}

fn memory_spec(arg: &str) -> Result<FunctionSpec> {
    if let Some(n) = arg.strip_prefix("constant:") {
        let n = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad memory constant {n:?}")))?;
        return Ok(FunctionSpec::constant(n));
    }
    json::from_str_with_path(&read(Path::new(arg))?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.json"))
}

fn construct_cmd(a: ConstructArgs, budget: DigitBudget, out: &mut dyn Write) -> Result<i32> {
    let memory = memory_spec(&a.memory_b)?;
    let inst = construct::separating_instance(&memory, a.steps, budget)?;
    let sched_b = inst.schedule_b().to_canonical_json();
    let sched_c = inst.schedule_c().to_canonical_json();
    let cert = json::to_canonical(&inst.sidecar());
    let files = match &a.output {
        Some(path) => {
            let (pc, pcert) = (sibling(path, "c"), sibling(path, "cert"));
            write_file(path, &sched_b)?;
            write_file(&pc, &sched_c)?;
            write_file(&pcert, &cert)?;
            Some([path.clone(), pc, pcert].map(|p| p.display().to_string()))
        }
        None => None,
    };
    let report = construct::verify_separation(&inst, budget)?;
    match files {
        Some([b, c, cert]) => emit(
            out,
            &json!({"report": report, "files": {"schedule_b": b, "schedule_c": c, "certificate": cert}}),
        )?,
        None => {
            let raw = |s: &str| serde_json::from_str::<serde_json::Value>(s).expect("own output");
            emit(
                out,
                &json!({
                    "report": report,
                    "schedule_b": raw(&sched_b),
                    "schedule_c": raw(&sched_c),
                    "certificate": raw(&cert),
                }),
            )?
        }
    }
    Ok(0)
}

fn compare(a: CompareArgs, budget: DigitBudget, out: &mut dyn Write) -> Result<i32> {
    let spec = load(&a.schedule)?;
    let g = GameInstance::with_budget(spec, a.nights.max(1), budget)?;
    let seed = seed(a.seed)?;
    let analytic = if a.nights < a.day {
        BigRational::from_integer(1.into())
    } else {
        let res = survival_probability(
            &g,
            a.day,
            a.nights,
            SurvivalMode::ExactStrategy,
            NumberSpace::Rational,
        )?;
        res.value.as_exact().cloned().expect("rational space")
    };
    let p = analytic.to_f64().unwrap_or(f64::NAN);
    let est = empirical_survival_with(&g, Strategy::OldestRnd, a.day, a.nights, a.trials, seed)?;
    // spread of the estimator under the analytic value
    let sd = (p * (1.0 - p) / a.trials as f64).sqrt();
    let z = if sd > 0.0 {
        (est.estimate - p) / sd
    } else if est.estimate == p {
        0.0
    } else {
        f64::INFINITY
    };
    let ok = z.abs() < 4.0;
    emit(
        out,
        &json!({
            "day": a.day,
            "nights": a.nights,
            "trials": a.trials,
            "seed": seed,
            "analytic": json::rational_string(&analytic),
            "analytic_f64": p,
            "empirical": est.estimate,
            "stderr": est.stderr,
            "z": if z.is_finite() { json!(z) } else { json!(null) },
            "ok": ok,
        }),
    )?;
    if ok {
        Ok(0)
    } else {
        Err(Error::VerificationFailed {
            index: a.nights,
            check: format!("|z| = {} is at least 4", z.abs()),
        })
    }
}

/// Entry point used by the `rh` binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = dispatch(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    code
}

