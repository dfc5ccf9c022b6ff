//! Python bindings. Results come back as plain dicts and lists.

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pythonize::{depythonize, pythonize};
use serde::Serialize;

use synrisk_core::cascade::{build_gai_kapadia_system_with, simulate_default_cascade, simulate_random_cascade, SheetSpec};
use synrisk_core::clearing::{clear_eisenberg_noe, clear_fictitious_default, clear_rogers_veraart};
use synrisk_core::debtrank::{debtrank_iterated, debtrank_nonlinear, debtrank_original, leverage_spectral_radius};
use synrisk_core::firesale::{
    simulate_buffered_deleveraging, simulate_leverage_targeting, simulate_threshold_firesale, transfer_matrix,
    ImpactFunction, Shock,
};
use synrisk_core::harness::ExperimentConfig;
use synrisk_core::network::{
    gen_bipartite_er, gen_erdos_renyi_directed, gen_erdos_renyi_undirected, max_entropy_reconstruction, DegreeModel,
    DirectedGraph, IpfOptions, MarginVector,
};
use synrisk_core::rng::seeded;
use synrisk_core::structure::{core_periphery_detect_with, Adjacency, DetectOptions};
use synrisk_core::theory::{analyze, ResponseFunction};
use synrisk_core::{harness, Error};

fn py_err(e: Error) -> PyErr {
    let code = e.exit_code();
    let msg = e.to_string();
    match (e, code) {
        (Error::Io(_), _) => PyOSError::new_err(msg),
        (_, 3) => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    Ok(pythonize(py, value)?)
}

/// Obligation matrix `L[i][j]` (owed by i to j) and external assets.
#[pyclass(frozen, module = "synrisk")]
struct FinancialSystem(synrisk_core::clearing::FinancialSystem);

#[pymethods]
impl FinancialSystem {
    #[new]
    fn new(liabilities: Vec<Vec<f64>>, external: Vec<f64>) -> PyResult<Self> {
        synrisk_core::clearing::FinancialSystem::new(liabilities, external).map(Self).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `method` is one of eisenberg_noe, rogers_veraart, fictitious_default.
    #[pyo3(signature = (method = "eisenberg_noe", alpha = 1.0, beta = 1.0))]
    fn clear<'py>(&self, py: Python<'py>, method: &str, alpha: f64, beta: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = match method {
            "eisenberg_noe" => clear_eisenberg_noe(&self.0),
            "rogers_veraart" => clear_rogers_veraart(&self.0, alpha, beta),
            "fictitious_default" => clear_fictitious_default(&self.0),
            other => return Err(PyValueError::new_err(format!("unknown clearing method `{other}`"))),
        }
        .map_err(py_err)?;
        to_py(py, &r)
    }
}

/// Interbank network with stylized balance sheets. An edge `(i, j)` means
/// `i` lends to `j`.
#[pyclass(frozen, module = "synrisk")]
struct InterbankSystem(synrisk_core::cascade::InterbankSystem);

#[pymethods]
impl InterbankSystem {
    #[new]
    #[pyo3(signature = (n, edges, r_bar, a_ib = 1.0, external_ratio = 4.0))]
    fn new(n: usize, edges: Vec<(usize, usize)>, r_bar: f64, a_ib: f64, external_ratio: f64) -> PyResult<Self> {
        let graph = DirectedGraph::new(n, edges).map_err(py_err)?;
        let spec = SheetSpec {
            r_bar,
            a_ib,
            external_ratio,
        };
        build_gai_kapadia_system_with(&graph, &spec).map(Self).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn cascade<'py>(&self, py: Python<'py>, seeds: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &simulate_default_cascade(&self.0, &seeds).map_err(py_err)?)
    }

    /// Seeds each bank independently with probability `rho0`.
    #[pyo3(signature = (rho0, seed = 0))]
    fn random_cascade<'py>(&self, py: Python<'py>, rho0: f64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let out = simulate_random_cascade(&self.0, rho0, &mut seeded(seed)).map_err(py_err)?;
        to_py(py, &out)
    }
}

/// Exposures `W[i][j]` of bank i to bank j and initial equities.
#[pyclass(frozen, module = "synrisk")]
struct ExposureSystem(synrisk_core::debtrank::ExposureSystem);

#[pymethods]
impl ExposureSystem {
    #[new]
    fn new(exposures: Vec<Vec<f64>>, equities: Vec<f64>) -> PyResult<Self> {
        synrisk_core::debtrank::ExposureSystem::new(exposures, equities).map(Self).map_err(py_err)
    }

    /// Unit equities with the given leverage matrix.
    #[staticmethod]
    fn from_leverage(leverage: Vec<Vec<f64>>) -> PyResult<Self> {
        synrisk_core::debtrank::ExposureSystem::from_leverage(leverage).map(Self).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn spectral_radius(&self) -> PyResult<f64> {
        leverage_spectral_radius(&self.0).map_err(py_err)
    }

    /// `variant` is one of original, iterated, nonlinear.
    #[pyo3(signature = (shock, variant = "original", alpha = 0.0))]
    fn debtrank<'py>(&self, py: Python<'py>, shock: Vec<f64>, variant: &str, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
        let t = match variant {
            "original" => debtrank_original(&self.0, &shock),
            "iterated" => debtrank_iterated(&self.0, &shock),
            "nonlinear" => debtrank_nonlinear(&self.0, &shock, alpha),
            other => return Err(PyValueError::new_err(format!("unknown DebtRank variant `{other}`"))),
        }
        .map_err(py_err)?;
        to_py(py, &t)
    }
}

/// Bank holdings `Q[i][a]` in shares, initial prices and equities.
#[pyclass(frozen, module = "synrisk")]
struct PortfolioSystem(synrisk_core::firesale::PortfolioSystem);

#[pymethods]
impl PortfolioSystem {
    #[new]
    fn new(holdings: Vec<Vec<f64>>, prices: Vec<f64>, equities: Vec<f64>) -> PyResult<Self> {
        synrisk_core::firesale::PortfolioSystem::new(holdings, prices, equities).map(Self).map_err(py_err)
    }

    /// Random bipartite portfolios, unit value per bank and common leverage.
    #[staticmethod]
    #[pyo3(signature = (n_banks, m_assets, diversification, leverage, seed = 0))]
    fn random(n_banks: usize, m_assets: usize, diversification: f64, leverage: f64, seed: u64) -> PyResult<Self> {
        let graph = gen_bipartite_er(n_banks, m_assets, diversification, &mut seeded(seed)).map_err(py_err)?;
        synrisk_core::firesale::PortfolioSystem::from_bipartite(&graph, leverage)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn n_banks(&self) -> usize {
        self.0.n_banks()
    }

    #[getter]
    fn m_assets(&self) -> usize {
        self.0.m_assets()
    }

    /// `shock` is `asset:<idx>:<xi>` or `bank:<idx>`; `mode` is one of
    /// threshold, target, buffered; `impact` is log_linear or linear.
    #[pyo3(signature = (shock, mode = "threshold", impact = "log_linear", alpha = 1.0, gamma = 1.0, buffer = 0.1))]
    #[allow(clippy::too_many_arguments)]
    fn fire_sale<'py>(
        &self,
        py: Python<'py>,
        shock: &str,
        mode: &str,
        impact: &str,
        alpha: f64,
        gamma: f64,
        buffer: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let shock: Shock = shock.parse().map_err(py_err)?;
        let impact = match impact {
            "log_linear" => ImpactFunction::LogLinear { alpha },
            "linear" => ImpactFunction::Linear { alpha },
            other => return Err(PyValueError::new_err(format!("unknown impact `{other}`"))),
        };
        let out = match mode {
            "threshold" => simulate_threshold_firesale(&self.0, impact, shock),
            "target" => simulate_leverage_targeting(&self.0, impact, shock, gamma),
            "buffered" => {
                let cap = self.0.target_leverage().iter().map(|l| l * (1.0 + buffer)).collect();
                self.0
                    .clone()
                    .with_leverage_cap(cap)
                    .and_then(|s| simulate_buffered_deleveraging(&s, impact, shock))
            }
            other => return Err(PyValueError::new_err(format!("unknown fire-sale mode `{other}`"))),
        }
        .map_err(py_err)?;
        to_py(py, &out)
    }

    /// Indicator matrix of "failure of i topples j" and its spectral radius.
    #[pyo3(signature = (alpha = 1.0))]
    fn transfer_matrix(&self, alpha: f64) -> PyResult<(Vec<Vec<f64>>, f64)> {
        transfer_matrix(&self.0, alpha).map_err(py_err)
    }
}

/// Edge list of a random graph with mean degree `z`. Undirected graphs list
/// both orientations.
#[pyfunction]
#[pyo3(signature = (n, z, seed = 0, directed = true))]
fn erdos_renyi(n: usize, z: f64, seed: u64, directed: bool) -> PyResult<Vec<(usize, usize)>> {
    let mut rng = seeded(seed);
    let g = if directed {
        gen_erdos_renyi_directed(n, z, &mut rng)
    } else {
        gen_erdos_renyi_undirected(n, z, &mut rng)
    }
    .map_err(py_err)?;
    Ok(g.edges().to_vec())
}

/// Mean-field cascade analysis for threshold `r` on a Poisson or regular
/// degree distribution with mean `z`.
#[pyfunction]
#[pyo3(signature = (z, r, rho0 = 1e-4, distribution = "poisson"))]
fn cascade_theory<'py>(py: Python<'py>, z: f64, r: f64, rho0: f64, distribution: &str) -> PyResult<Bound<'py, PyAny>> {
    let model = match distribution {
        "poisson" => DegreeModel::poisson(z),
        "regular" if z >= 0.0 && z.fract() == 0.0 => DegreeModel::regular(z as usize),
        "regular" => return Err(PyValueError::new_err(format!("regular degree must be an integer, got {z}"))),
        other => return Err(PyValueError::new_err(format!("unknown distribution `{other}`"))),
    }
    .map_err(py_err)?;
    to_py(py, &analyze(&model, &ResponseFunction::threshold(r), rho0).map_err(py_err)?)
}

/// Best core-periphery split of an undirected graph.
#[pyfunction]
#[pyo3(signature = (n, edges, seed = 0))]
fn core_periphery<'py>(py: Python<'py>, n: usize, edges: Vec<(usize, usize)>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let adj = Adjacency::from_edges(n, &edges).map_err(py_err)?;
    let opts = DetectOptions {
        seed,
        ..DetectOptions::default()
    };
    to_py(py, &core_periphery_detect_with(&adj, opts).map_err(py_err)?)
}

/// Maximum-entropy exposure matrix with the given interbank asset (row) and
/// liability (column) totals.
#[pyfunction]
fn reconstruct(assets: Vec<f64>, liabilities: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let margins = MarginVector::new(assets, liabilities).map_err(py_err)?;
    let r = max_entropy_reconstruction(&margins, IpfOptions::default()).map_err(py_err)?;
    Ok(r.exposures)
}

/// Runs a sweep described by a dict in the configuration-file format.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let config: ExperimentConfig = depythonize(config)?;
    let record = py.detach(|| harness::run_experiment(&config)).map_err(py_err)?;
    to_py(py, &record)
}

#[pymodule]
pub fn synrisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FinancialSystem>()?;
    m.add_class::<InterbankSystem>()?;
    m.add_class::<ExposureSystem>()?;
    m.add_class::<PortfolioSystem>()?;
    m.add_function(wrap_pyfunction!(erdos_renyi, m)?)?;
    m.add_function(wrap_pyfunction!(cascade_theory, m)?)?;
    m.add_function(wrap_pyfunction!(core_periphery, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
