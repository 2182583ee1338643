//! Python bindings: protocols, run reports, scenarios, random search and a
//! few entropy helpers.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use demon_ledger::io;
use demon_ledger::operator::{Matrix, Operator, SystemLabel, C64};
use demon_ledger::protocol::ProtocolSpec;
use demon_ledger::qinfo;
use demon_ledger::report::RunReport;
use demon_ledger::scenarios::{self, ErasureMode, PointerClass, SampleConfig, ScenarioConfig};
use demon_ledger::search::{random_search, SearchConfig};

fn py_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pointer_class(s: &str) -> PyResult<PointerClass> {
    PointerClass::parse(s).ok_or_else(|| py_err(format!("unknown pointer class {s}")))
}

fn erasure_mode(s: &str) -> PyResult<ErasureMode> {
    match s {
        "reset" => Ok(ErasureMode::Reset),
        "scramble-only" => Ok(ErasureMode::ScrambleOnly),
        _ => Err(py_err(format!("unknown erasure mode {s}"))),
    }
}

/// A validated feedback-control-and-erasure protocol.
#[pyclass(name = "Protocol", module = "demon_ledger_py")]
pub struct PyProtocol {
    spec: ProtocolSpec,
}

#[pymethods]
impl PyProtocol {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            spec: io::load_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            spec: io::load_file(std::path::Path::new(path)).map_err(py_err)?,
        })
    }

    /// Named protocol: szilard, counterexample, violating-erasure, null,
    /// partial-erasure, merging-feedback.
    #[staticmethod]
    #[pyo3(signature = (name, stages=8, beta=1.0, seed=0, memory_rank=2, memory_dim=None, sectors=1))]
    fn scenario(
        name: &str,
        stages: usize,
        beta: f64,
        seed: u64,
        memory_rank: usize,
        memory_dim: Option<usize>,
        sectors: usize,
    ) -> PyResult<Self> {
        let cfg = ScenarioConfig {
            beta,
            stages,
            sectors,
            memory_rank,
            memory_dim,
            outcome: 0,
            seed,
        };
        let spec = match name {
            "szilard" => scenarios::build_szilard(&cfg),
            "counterexample" => scenarios::build_counterexample(&cfg),
            "violating-erasure" => scenarios::build_counterexample(&cfg)
                .and_then(|b| scenarios::build_violating_feedback_erasure(&b, stages)),
            "null" => scenarios::build_null(beta),
            "partial-erasure" => scenarios::random_partial_erasure(seed),
            "merging-feedback" => scenarios::build_merging_feedback(&cfg),
            _ => return Err(py_err(format!("unknown scenario {name}"))),
        }
        .map_err(py_err)?;
        Ok(Self { spec })
    }

    /// Seeded random protocol from the search sampler.
    #[staticmethod]
    #[pyo3(signature = (seed, pointer_class="generic", erasure="reset", max_dim_a=3, max_dim_m=3, max_outcomes=3))]
    fn random(
        seed: u64,
        pointer_class: &str,
        erasure: &str,
        max_dim_a: usize,
        max_dim_m: usize,
        max_outcomes: usize,
    ) -> PyResult<Self> {
        let cfg = SampleConfig {
            max_dim_a,
            max_dim_m,
            max_outcomes,
            pointer_class: self::pointer_class(pointer_class)?,
            erasure: erasure_mode(erasure)?,
        };
        Ok(Self {
            spec: scenarios::random_protocol(&cfg, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.spec.beta
    }

    #[getter]
    fn n_outcomes(&self) -> usize {
        self.spec.n_outcomes()
    }

    fn to_json(&self) -> String {
        io::to_string_pretty(&self.spec)
    }

    /// `(location, message)` for each structural problem.
    fn issues(&self) -> Vec<(String, String)> {
        self.spec.issues().into_iter().map(|i| (i.location, i.message)).collect()
    }

    fn run(&self) -> PyResult<PyReport> {
        let bytes = io::to_string_pretty(&self.spec).into_bytes();
        let source = format!("python:{}", self.spec.name);
        Ok(PyReport {
            report: RunReport::evaluate(&self.spec, &source, &bytes).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Protocol({:?}, beta={})", self.spec.name, self.spec.beta)
    }
}

/// Ledgers and verdicts of one run.
#[pyclass(name = "Report", module = "demon_ledger_py")]
pub struct PyReport {
    report: RunReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn protocol(&self) -> String {
        self.report.protocol.clone()
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.report.probabilities.clone()
    }

    #[getter]
    fn erasure_class(&self) -> String {
        self.report.erasure.class.clone()
    }

    #[getter]
    fn implication_holds(&self) -> Option<bool> {
        self.report.implication_holds
    }

    fn scalars(&self) -> BTreeMap<String, f64> {
        self.report.scalars.iter().map(|s| (s.name.clone(), s.value)).collect()
    }

    fn scalar(&self, name: &str) -> PyResult<f64> {
        self.report.scalar(name).ok_or_else(|| py_err(format!("no scalar {name}")))
    }

    /// `(outcome, lhs, rhs, margin)`.
    fn verdict(&self, law: &str) -> PyResult<(String, f64, f64, f64)> {
        let v = self.report.verdict(law).ok_or_else(|| py_err(format!("no verdict {law}")))?;
        Ok((v.outcome.clone(), v.lhs, v.rhs, v.margin))
    }

    fn laws(&self) -> Vec<String> {
        self.report.verdicts.iter().map(|v| v.law.clone()).collect()
    }

    fn in_bits(&self) -> Self {
        Self {
            report: self.report.clone().in_bits(),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.report).map_err(py_err)
    }

    fn to_table(&self) -> String {
        self.report.to_table()
    }

    fn __repr__(&self) -> String {
        format!("Report({:?}, erasure={})", self.report.protocol, self.report.erasure.class)
    }
}

/// Runs a seeded search and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (samples, seed=0, pointer_classes=None, erasure="reset", max_recorded=20))]
fn search(
    samples: usize,
    seed: u64,
    pointer_classes: Option<Vec<String>>,
    erasure: &str,
    max_recorded: usize,
) -> PyResult<String> {
    let classes = match pointer_classes {
        None => PointerClass::ALL.to_vec(),
        Some(v) => v.iter().map(|c| pointer_class(c)).collect::<PyResult<_>>()?,
    };
    let cfg = SearchConfig {
        samples,
        seed,
        classes,
        erasure: erasure_mode(erasure)?,
        max_recorded,
        ..Default::default()
    };
    let report = random_search(&cfg, |_| {}).map_err(py_err)?;
    serde_json::to_string_pretty(&report).map_err(py_err)
}

fn square(rows: Vec<Vec<C64>>) -> PyResult<Matrix> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(py_err("expected a non-empty square matrix"));
    }
    Ok(Matrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn single(rows: Vec<Vec<C64>>) -> PyResult<Operator> {
    let m = square(rows)?;
    Operator::new(vec![SystemLabel::new("X", m.nrows())], m).map_err(py_err)
}

/// Von Neumann entropy in nats of a density matrix given as nested lists.
#[pyfunction]
fn entropy(rho: Vec<Vec<C64>>) -> PyResult<f64> {
    Ok(qinfo::von_neumann_entropy(&single(rho)?))
}

/// `D(rho || sigma)` in nats; `inf` off support.
#[pyfunction]
fn relative_entropy(rho: Vec<Vec<C64>>, sigma: Vec<Vec<C64>>) -> PyResult<f64> {
    qinfo::relative_entropy(&single(rho)?, &single(sigma)?).map_err(py_err)
}

/// `I(A:B)` of a bipartite state with factor dimensions `dims`.
#[pyfunction]
fn mutual_information(rho: Vec<Vec<C64>>, dims: (usize, usize)) -> PyResult<f64> {
    let m = square(rho)?;
    let f = vec![SystemLabel::new("A", dims.0), SystemLabel::new("B", dims.1)];
    let op = Operator::new(f, m).map_err(py_err)?;
    qinfo::mutual_information(&op, &["A"], &["B"]).map_err(py_err)
}

#[pymodule]
fn demon_ledger_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(relative_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_information, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
