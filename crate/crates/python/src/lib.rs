//! Python bindings: scenarios, simulation configs, whole-trial simulation, roster analysis
//! and the report decision.

use basket_core::allocation::{allocation_prob as clamp_prob, DesignConfig};
use basket_core::decision::{optimal_report as best_report, DecisionProblem as CoreProblem, UtilityConfig};
use basket_core::domain::{Pair, Panel};
use basket_core::ppmx::conjugate::{DirichletHyper, GammaHyper};
use basket_core::ppmx::similarity::{similarity_categorical as sim_cat, similarity_count as sim_count};
use basket_core::roster::read_roster;
use basket_core::seeds::{derive_seed, stream};
use basket_core::simulator::{
    final_analysis, mean_allocation, mean_te_error, simulate as run_simulation, superiority_probs, Method,
    Scenario as CoreScenario, SimulationConfig as CoreConfig, SimulationRun as CoreRun,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "basket", from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    /// Built-in scenario 1 to 6.
    #[staticmethod]
    fn preset(number: usize) -> PyResult<Self> {
        CoreScenario::preset(number).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        toml::from_str(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.inner).map_err(value_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn beta0(&self) -> f64 {
        self.inner.beta0
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    /// Counts per (aberration, tumor).
    #[getter]
    fn population(&self) -> Vec<Vec<usize>> {
        self.inner.population.clone()
    }

    #[setter]
    fn set_population(&mut self, population: Vec<Vec<usize>>) {
        self.inner.population = population;
    }

    /// (aberration, tumor, coefficient) triples.
    #[getter]
    fn interactions(&self) -> Vec<(String, String, f64)> {
        self.inner.interactions.iter().map(|i| (i.mutation.clone(), i.tumor.clone(), i.coef)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, beta0={}, interactions={})", self.inner.name, self.inner.beta0, self.inner.interactions.len())
    }
}

#[pyclass(module = "basket", from_py_object)]
#[derive(Clone)]
struct SimulationConfig {
    inner: CoreConfig,
}

#[pymethods]
impl SimulationConfig {
    #[new]
    fn new() -> Self {
        Self { inner: CoreConfig::default() }
    }

    /// Parses the `[simulation]` table layout; missing keys keep their defaults.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner: CoreConfig = toml::from_str(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.inner).map_err(value_err)
    }

    #[getter]
    fn adaptive(&self) -> bool {
        self.inner.adaptive
    }

    #[setter]
    fn set_adaptive(&mut self, v: bool) {
        self.inner.adaptive = v;
    }

    #[getter]
    fn censoring(&self) -> bool {
        self.inner.censoring
    }

    #[setter]
    fn set_censoring(&mut self, v: bool) {
        self.inner.censoring = v;
    }

    #[getter]
    fn n_mc(&self) -> usize {
        self.inner.n_mc
    }

    #[setter]
    fn set_n_mc(&mut self, v: usize) {
        self.inner.n_mc = v;
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.design.n_max()
    }
}

/// Per-replicate reports and summaries of a simulated scenario.
#[pyclass(module = "basket")]
struct SimulationRun {
    inner: CoreRun,
    panel: Panel,
}

#[pymethods]
impl SimulationRun {
    #[getter]
    fn true_report(&self) -> String {
        self.panel.report_label(&self.inner.true_report)
    }

    #[getter]
    fn n_reps(&self) -> usize {
        self.inner.results.len()
    }

    fn reports(&self) -> Vec<String> {
        self.inner.reports().iter().map(|r| self.panel.report_label(r)).collect()
    }

    /// Error rates; rates that do not apply to the true report are None.
    fn operating_characteristics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let oc = self.inner.operating_characteristics();
        let d = PyDict::new(py);
        d.set_item("true_report", self.panel.report_label(&oc.true_report))?;
        d.set_item("n_reps", oc.n_reps)?;
        for (key, v) in [("tie", oc.tie), ("tsr", oc.tsr), ("tpr", oc.tpr), ("fsr", oc.fsr), ("fnr", oc.fnr), ("fpr", oc.fpr)] {
            d.set_item(key, v)?;
        }
        let pr_a = PyDict::new(py);
        for (pair, p) in &oc.pr_a {
            pr_a.set_item(self.panel.pair_label(*pair), p)?;
        }
        d.set_item("pr_a", pr_a)?;
        Ok(d)
    }

    /// Mean fraction of each pair's patients randomized to TT.
    fn allocation<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (pair, f) in mean_allocation(&self.inner.results) {
            d.set_item(self.panel.pair_label(pair), f)?;
        }
        Ok(d)
    }

    /// Mean absolute error of the expected event time per design, over pairs and replicates.
    fn te_error<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for method in Method::ALL {
            d.set_item(method.label(), mean_te_error(&self.inner.results, method).1)?;
        }
        Ok(d)
    }
}

/// Simulates `reps` trials. The GIL is released while the replicates run.
#[pyfunction]
#[pyo3(signature = (scenario, config, seed, reps))]
fn simulate(py: Python<'_>, scenario: Scenario, config: SimulationConfig, seed: u64, reps: usize) -> PyResult<SimulationRun> {
    let inner = py.detach(|| run_simulation(&scenario.inner, &config.inner, seed, reps)).map_err(value_err)?;
    Ok(SimulationRun { inner, panel: config.inner.panel })
}

/// Fits the final model to a roster in CSV form and returns the report with its summaries.
#[pyfunction]
#[pyo3(signature = (roster_csv, config, seed))]
fn analyze<'py>(py: Python<'py>, roster_csv: &str, config: SimulationConfig, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let sim = &config.inner;
    let panel = &sim.panel;
    let patients = read_roster(roster_csv.as_bytes(), panel).map_err(value_err)?;
    if patients.is_empty() {
        return Err(PyValueError::new_err("roster has no patients"));
    }
    let (decision, horizon, pis) = py
        .detach(|| -> basket_core::Result<_> {
            let (fit, horizon, problem) =
                final_analysis(&patients, panel, &sim.prior, &sim.final_mcmc, derive_seed(seed, 0, "final"))?;
            let decision = best_report(&problem, &sim.utility);
            let pis = superiority_probs(&fit, &patients, sim.n_mc, &mut stream(seed, 0, "pi"))?;
            Ok((decision, horizon, pis))
        })
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("report", panel.report_label(&decision.report))?;
    d.set_item("expected_utility", decision.expected_utility)?;
    d.set_item("p_h0", decision.summary.p_h0)?;
    d.set_item("p_h1", decision.summary.p_h1)?;
    d.set_item("horizon", horizon.months())?;
    let mean_log_hr = PyDict::new(py);
    for s in &decision.summary.pairs {
        mean_log_hr.set_item(panel.pair_label(s.pair), s.mean_log_hr)?;
    }
    d.set_item("mean_log_hr", mean_log_hr)?;
    let ranked: Vec<(String, f64)> = decision.ranked.iter().map(|(r, eu)| (panel.report_label(r), *eu)).collect();
    d.set_item("ranked", ranked)?;
    d.set_item("pi", pis)?;
    Ok(d)
}

/// Posterior draws of per-pair log hazard ratios, pairs named like "BRAF:Lung".
#[pyclass(module = "basket")]
struct DecisionProblem {
    inner: CoreProblem,
    panel: Panel,
}

#[pymethods]
impl DecisionProblem {
    #[new]
    fn new(pairs: Vec<String>, sizes: Vec<usize>, log_hr: Vec<Vec<f64>>) -> PyResult<Self> {
        let panel = Panel::impact2();
        let pairs = pairs
            .iter()
            .map(|label| {
                let (m, t) = label.split_once(':').ok_or_else(|| value_err(format!("bad pair label {label:?}")))?;
                panel.pair(m, t).map_err(value_err)
            })
            .collect::<PyResult<Vec<Pair>>>()?;
        let inner = CoreProblem::new(pairs, sizes, log_hr).map_err(value_err)?;
        Ok(Self { inner, panel })
    }

    /// Best report and its expected utility under the given utility weights.
    #[pyo3(signature = (u0=None, u1=None, alpha=None, beta=None, min_size=None))]
    fn optimal_report(
        &self,
        u0: Option<f64>,
        u1: Option<f64>,
        alpha: Option<f64>,
        beta: Option<f64>,
        min_size: Option<usize>,
    ) -> PyResult<(String, f64)> {
        let base = UtilityConfig::default();
        let config = UtilityConfig {
            u0: u0.unwrap_or(base.u0),
            u1: u1.unwrap_or(base.u1),
            alpha: alpha.unwrap_or(base.alpha),
            beta: beta.unwrap_or(base.beta),
            min_size: min_size.unwrap_or(base.min_size),
            ..base
        };
        config.validate().map_err(value_err)?;
        let decision = best_report(&self.inner, &config);
        Ok((self.panel.report_label(&decision.report), decision.expected_utility))
    }
}

/// P(TT) for superiority probability `pi`, clamped to [p_low, p_high].
#[pyfunction]
#[pyo3(signature = (pi, p_low=0.1, p_high=0.9))]
fn allocation_prob(pi: f64, p_low: f64, p_high: f64) -> PyResult<f64> {
    let design = DesignConfig { p_low, p_high, ..DesignConfig::default() };
    design.validate().map_err(value_err)?;
    clamp_prob(pi, &design).map_err(value_err)
}

/// Dirichlet-multinomial similarity of category labels under the given weights.
#[pyfunction]
fn similarity_categorical(values: Vec<usize>, weights: Vec<f64>) -> PyResult<f64> {
    let hyper = DirichletHyper::new(weights).map_err(value_err)?;
    sim_cat(&values, &hyper).map_err(value_err)
}

/// Poisson-gamma similarity of counts.
#[pyfunction]
fn similarity_count(values: Vec<i64>, shape: f64, rate: f64) -> PyResult<f64> {
    let hyper = GammaHyper::new(shape, rate).map_err(value_err)?;
    sim_count(&values, &hyper).map_err(value_err)
}

#[pymodule]
fn basket(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<SimulationConfig>()?;
    m.add_class::<SimulationRun>()?;
    m.add_class::<DecisionProblem>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(allocation_prob, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_categorical, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_count, m)?)?;
    Ok(())
}
