//! Python bindings: schedules, exact analysis, simulation and separating
//! instances. Structured results come back as plain dicts, rationals as
//! `fractions.Fraction` and big integers as `int`.

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyList;

use robinhood::analysis::{self, NumberSpace, SurvivalMode};
use robinhood::construct::{self, SeparationInstance};
use robinhood::engine::{self, Strategy};
use robinhood::{json, DigitBudget, FunctionSpec, GameInstance, ScheduleSpec};

create_exception!(robinhood, RobinHoodError, PyValueError);

fn err(e: robinhood::Error) -> PyErr {
    RobinHoodError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn fraction<'py>(py: Python<'py>, q: &num_rational::BigRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((q.numer().clone(), q.denom().clone()))
}

fn budget(digits: Option<u64>) -> DigitBudget {
    digits.map_or_else(DigitBudget::default, DigitBudget)
}

fn mode(name: &str) -> PyResult<SurvivalMode> {
    match name {
        "paper" => Ok(SurvivalMode::PaperProduct),
        "exact" => Ok(SurvivalMode::ExactStrategy),
        other => Err(PyValueError::new_err(format!("mode must be 'paper' or 'exact', got {other:?}"))),
    }
}

fn strategy(name: &str) -> PyResult<Strategy> {
    name.parse().map_err(err)
}

/// The triple `(r, s, b)` of schedule functions.
#[pyclass(module = "robinhood", name = "Schedule", frozen)]
struct PySchedule {
    inner: ScheduleSpec,
}

#[pymethods]
impl PySchedule {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ScheduleSpec::from_json(text).map(|inner| PySchedule { inner }).map_err(err)
    }

    /// Constant removals, arrivals and memory.
    #[staticmethod]
    fn constant(r: u64, s: u64, b: u64) -> Self {
        PySchedule {
            inner: ScheduleSpec::constant(r, s, b),
        }
    }

    /// Canonical JSON: sorted keys, no whitespace.
    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    fn __repr__(&self) -> String {
        format!("Schedule({})", self.inner.to_canonical_json())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// A schedule evaluated on `1..=horizon`.
#[pyclass(module = "robinhood", name = "Game", frozen)]
struct PyGame {
    inner: GameInstance,
}

#[pymethods]
impl PyGame {
    #[new]
    #[pyo3(signature = (schedule, horizon, digit_budget=None))]
    fn new(schedule: &PySchedule, horizon: u64, digit_budget: Option<u64>) -> PyResult<Self> {
        GameInstance::with_budget(schedule.inner.clone(), horizon, budget(digit_budget))
            .map(|inner| PyGame { inner })
            .map_err(err)
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon_cap()
    }

    fn r(&self, i: u64) -> PyResult<BigInt> {
        self.inner.r(i).map(|v| v.clone().into()).map_err(err)
    }

    fn s(&self, i: u64) -> PyResult<BigInt> {
        self.inner.s(i).map(|v| v.clone().into()).map_err(err)
    }

    fn b(&self, i: u64) -> PyResult<u64> {
        self.inner.b(i).map_err(err)
    }

    /// Bags left after night `i`.
    fn cave_level(&self, i: u64) -> PyResult<BigInt> {
        self.inner.cave_level(i).map_err(err)
    }

    /// Very-old bags when night `i` starts.
    fn very_old_level(&self, i: u64) -> PyResult<BigInt> {
        self.inner.very_old_level(i).map(Into::into).map_err(err)
    }

    #[pyo3(signature = (horizon=None))]
    fn check_restrictions<'py>(&self, py: Python<'py>, horizon: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let report = self
            .inner
            .check_restrictions(horizon.unwrap_or(self.inner.horizon_cap()))
            .map_err(err)?;
        loads(py, &json::to_canonical(&report))
    }

    #[pyo3(signature = (horizon=None))]
    fn classify<'py>(&self, py: Python<'py>, horizon: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let v = analysis::classify(&self.inner, horizon.unwrap_or(self.inner.horizon_cap())).map_err(err)?;
        loads(py, &v.to_json())
    }

    /// `r(i) / L~(i)` as a Fraction.
    fn series_term<'py>(&self, py: Python<'py>, i: u64) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &analysis::series_term(&self.inner, i).map_err(err)?)
    }

    /// Survival probability of a day-`day` bag through night `horizon`:
    /// a Fraction in rational space, a float in log space.
    #[pyo3(signature = (day, horizon, mode="paper", log=false))]
    fn survival<'py>(
        &self,
        py: Python<'py>,
        day: u64,
        horizon: u64,
        mode: &str,
        log: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let space = if log { NumberSpace::Log } else { NumberSpace::Rational };
        let res = analysis::survival_probability(&self.inner, day, horizon, self::mode(mode)?, space)
            .map_err(err)?;
        match res.value.as_exact() {
            Some(q) => fraction(py, q),
            None => Ok(res.value.to_f64().into_pyobject(py)?.into_any()),
        }
    }

    /// Night-by-night trace.
    #[pyo3(signature = (nights, strategy="oldest-rnd", seed=robinhood::cli::DEFAULT_SEED, tag_days=Vec::new()))]
    fn simulate(&self, nights: u64, strategy: &str, seed: u64, tag_days: Vec<u64>) -> PyResult<PyTrace> {
        let strategy = self::strategy(strategy)?;
        engine::run_trace(&self.inner, strategy, nights, seed, &tag_days)
            .map(|t| PyTrace { inner: t })
            .map_err(err)
    }

    /// Monte Carlo survival estimate of one day-`day` bag.
    #[pyo3(signature = (day, nights, trials, seed=robinhood::cli::DEFAULT_SEED))]
    fn empirical_survival<'py>(
        &self,
        py: Python<'py>,
        day: u64,
        nights: u64,
        trials: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let g = &self.inner;
        let est = py
            .detach(|| engine::empirical_survival(g, day, nights, trials, seed))
            .map_err(err)?;
        loads(py, &json::to_canonical(&est))
    }
}

#[pyclass(module = "robinhood", name = "Trace", frozen)]
struct PyTrace {
    inner: engine::Trace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn digest(&self) -> &str {
        &self.inner.digest
    }

    #[getter]
    fn schedule_ref(&self) -> &str {
        &self.inner.schedule_ref
    }

    /// One dict per night.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for r in &self.inner.records {
            out.append(loads(py, &json::to_canonical(r))?)?;
        }
        Ok(out)
    }

    fn to_jsonl(&self) -> String {
        self.inner.to_jsonl()
    }

    /// `(day, removal night or None)` per tagged bag.
    fn tagged_outcomes(&self) -> Vec<(u64, Option<u64>)> {
        self.inner.tagged_outcomes()
    }
}

#[pyclass(module = "robinhood", name = "SeparationInstance", frozen)]
struct PySeparation {
    inner: SeparationInstance,
    budget: DigitBudget,
}

#[pymethods]
impl PySeparation {
    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps
    }

    #[getter]
    fn r(&self) -> Vec<BigInt> {
        self.inner.r.iter().map(|v| v.clone().into()).collect()
    }

    #[getter]
    fn s(&self) -> Vec<BigInt> {
        self.inner.s.iter().map(|v| v.clone().into()).collect()
    }

    fn schedule_b(&self) -> PySchedule {
        PySchedule {
            inner: self.inner.schedule_b(),
        }
    }

    fn schedule_c(&self) -> PySchedule {
        PySchedule {
            inner: self.inner.schedule_c(),
        }
    }

    fn certificate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        loads(py, &json::to_canonical(&self.inner.sidecar()))
    }

    /// Re-derives the certificates and returns the report with both verdicts.
    fn verify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let rep = construct::verify_separation(&self.inner, self.budget).map_err(err)?;
        loads(py, &json::to_canonical(&rep))
    }
}

/// Builds the separating instance for memory `b`, given as a function-spec
/// JSON string or `"constant:n"`.
#[pyfunction]
#[pyo3(signature = (memory_b, steps=construct::DEFAULT_STEPS, digit_budget=None))]
fn separating_instance(memory_b: &str, steps: u64, digit_budget: Option<u64>) -> PyResult<PySeparation> {
    let spec: FunctionSpec = match memory_b.strip_prefix("constant:") {
        Some(n) => FunctionSpec::constant(
            n.trim()
                .parse()
                .map_err(|_| PyValueError::new_err(format!("bad memory constant {n:?}")))?,
        ),
        None => json::from_str_with_path(memory_b).map_err(err)?,
    };
    let budget = budget(digit_budget);
    construct::separating_instance(&spec, steps, budget)
        .map(|inner| PySeparation { inner, budget })
        .map_err(err)
}

#[pymodule]
#[pyo3(name = "robinhood")]
fn robinhood_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchedule>()?;
    m.add_class::<PyGame>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PySeparation>()?;
    m.add_function(wrap_pyfunction!(separating_instance, m)?)?;
    m.add("RobinHoodError", m.py().get_type::<RobinHoodError>())?;
    m.add("DEFAULT_SEED", robinhood::cli::DEFAULT_SEED)?;
    Ok(())
}
