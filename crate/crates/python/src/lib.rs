//! Python bindings: netlists, simulation, clock trees, campaigns and the
//! report metrics.

use std::collections::BTreeMap;

use cdnfi_core::campaign::{run_campaign_with_workers, CampaignConfig, CampaignResult, Targets};
use cdnfi_core::report::{rank_ffs, RankEntry, RankMode, VulnerabilityRanking};
use cdnfi_core::{
    generate_tree, parse_netlist, BufferId, Circuit, ClockTree, GoldenTrace, Grouping, Netlist,
    Stimulus,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn read(path: &str) -> PyResult<String> {
    std::fs::read_to_string(path).map_err(|e| err(format!("{path}: {e}")))
}

#[pyclass(frozen, name = "Netlist")]
struct PyNetlist {
    inner: Netlist,
}

#[pymethods]
impl PyNetlist {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_netlist(text)
            .map(|inner| PyNetlist { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_json(&read(path)?)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn inputs(&self) -> Vec<String> {
        self.inner.inputs.clone()
    }

    #[getter]
    fn outputs(&self) -> Vec<String> {
        self.inner.outputs.clone()
    }

    #[getter]
    fn ff_names(&self) -> Vec<String> {
        self.inner.ff_names()
    }

    #[getter]
    fn gate_count(&self) -> usize {
        self.inner.gates.len()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Netlist({:?}, ffs={}, gates={})",
            self.inner.name,
            self.inner.flipflops.len(),
            self.inner.gates.len()
        )
    }
}

#[pyclass(frozen, name = "Stimulus")]
struct PyStimulus {
    inner: Stimulus,
}

#[pymethods]
impl PyStimulus {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Stimulus::parse(text)
            .map(|inner| PyStimulus { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_json(&read(path)?)
    }

    #[getter]
    fn n_cycles(&self) -> usize {
        self.inner.n_cycles
    }

    #[getter]
    fn active_window(&self) -> (usize, usize) {
        self.inner.active_window
    }

    #[getter]
    fn monitors(&self) -> Vec<String> {
        self.inner.monitors.clone()
    }
}

#[pyclass(frozen, name = "Trace")]
struct PyTrace {
    inner: GoldenTrace,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        GoldenTrace::from_csv(text)
            .map(|inner| PyTrace { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_csv(&read(path)?)
    }

    #[getter]
    fn monitors(&self) -> Vec<String> {
        self.inner.monitors.clone()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<bool>> {
        self.inner.rows.clone()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &PyTrace) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(frozen, name = "Circuit")]
struct PyCircuit {
    inner: Circuit,
    netlist: Netlist,
}

#[pymethods]
impl PyCircuit {
    #[new]
    fn new(netlist: &PyNetlist) -> PyResult<Self> {
        Ok(PyCircuit {
            inner: Circuit::new(&netlist.inner).map_err(err)?,
            netlist: netlist.inner.clone(),
        })
    }

    #[getter]
    fn ff_names(&self) -> Vec<String> {
        self.inner.ff_names().to_vec()
    }

    /// Runs the stimulus from reset and returns the monitored trace.
    fn simulate(&self, stimulus: &PyStimulus) -> PyResult<PyTrace> {
        let (inner, _) = self
            .inner
            .run(&stimulus.inner, self.inner.reset(), false)
            .map_err(err)?;
        Ok(PyTrace { inner })
    }

    /// Flip-flop values after every cycle, keyed by name.
    fn trajectory(&self, stimulus: &PyStimulus) -> PyResult<Vec<BTreeMap<String, bool>>> {
        let (_, states) = self
            .inner
            .run(&stimulus.inner, self.inner.reset(), true)
            .map_err(err)?;
        Ok(states
            .iter()
            .map(|s| {
                self.inner
                    .ff_names()
                    .iter()
                    .cloned()
                    .zip(s.ff_values.iter().copied())
                    .collect()
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Circuit({:?})", self.netlist.name)
    }
}

#[pyclass(frozen, name = "ClockTree")]
struct PyClockTree {
    inner: ClockTree,
}

#[pymethods]
impl PyClockTree {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ClockTree::from_json(text)
            .map(|inner| PyClockTree { inner })
            .map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.inner.stages()
    }

    #[getter]
    fn buffer_count(&self) -> usize {
        self.inner.buffers().len()
    }

    /// Flip-flops clocked through buffer `buffer`.
    fn cone(&self, buffer: usize) -> PyResult<Vec<String>> {
        let cone = self.inner.cone(BufferId(buffer)).map_err(err)?;
        Ok(cone.into_iter().map(str::to_string).collect())
    }

    fn stats(&self) -> BTreeMap<&'static str, usize> {
        let s = self.inner.stats();
        BTreeMap::from([
            ("stages", s.stages),
            ("buffer_count", s.buffer_count),
            ("min_leaf_fanout", s.min_leaf_fanout),
            ("max_leaf_fanout", s.max_leaf_fanout),
            ("cone_size_sum", s.cone_size_sum),
        ])
    }

    fn __repr__(&self) -> String {
        format!("ClockTree({})", self.inner.stats())
    }
}

/// Builds a clock tree. `grouping` is "name" or "random".
#[pyfunction]
#[pyo3(signature = (ff_names, min_fanout, grouping = "name", seed = 0))]
fn generate_clock_tree(
    ff_names: Vec<String>,
    min_fanout: usize,
    grouping: &str,
    seed: u64,
) -> PyResult<PyClockTree> {
    let g = match grouping {
        "name" => Grouping::ByName,
        "random" => Grouping::Random(seed),
        other => return Err(err(format!("unknown grouping {other:?}"))),
    };
    generate_tree(&ff_names, min_fanout, g)
        .map(|inner| PyClockTree { inner })
        .map_err(err)
}

#[pyclass(frozen, name = "CampaignResult")]
struct PyCampaignResult {
    inner: CampaignResult,
    circuit: String,
}

#[pymethods]
impl PyCampaignResult {
    #[getter]
    fn totals(&self) -> BTreeMap<&'static str, u64> {
        let t = &self.inner.totals;
        BTreeMap::from([
            ("injected", t.injected),
            ("reached", t.reached),
            ("changed", t.changed),
            ("unchanged", t.unchanged),
            ("failures", t.failures),
        ])
    }

    /// Functional de-rating: failures / injections.
    fn fdr(&self) -> PyResult<f64> {
        let t = &self.inner.totals;
        cdnfi_core::fdr(t.failures, t.injected)
            .map(|f| f.value())
            .map_err(err)
    }

    /// `(name, rate)` for the top `fraction` of flip-flops.
    #[pyo3(signature = (fraction = 0.05))]
    fn ranking(&self, fraction: f64) -> PyResult<Vec<(String, f64)>> {
        let set = self
            .inner
            .outcomes
            .iter()
            .any(|o| matches!(o.spec.kind, cdnfi_core::FaultKind::SetOnBuffer(_)));
        let mode = if set {
            RankMode::SetChanged
        } else {
            RankMode::SeuUpset
        };
        let r = rank_ffs(&self.inner, mode, fraction).map_err(err)?;
        Ok(r.entries.into_iter().map(|e| (e.name, e.rate)).collect())
    }

    fn log_csv(&self) -> String {
        self.inner.log_csv(&self.circuit)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }
}

/// Runs a campaign. `mode` is "set" (needs `tree`) or "seu".
#[pyfunction]
#[pyo3(signature = (circuit, stimulus, golden, mode, injections, seed = 0, tree = None, exhaustive = false, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn run_campaign(
    py: Python<'_>,
    circuit: &PyCircuit,
    stimulus: &PyStimulus,
    golden: &PyTrace,
    mode: &str,
    injections: usize,
    seed: u64,
    tree: Option<&PyClockTree>,
    exhaustive: bool,
    workers: usize,
) -> PyResult<PyCampaignResult> {
    let targets = match mode {
        "set" => Targets::AllBuffers,
        "seu" => Targets::AllFfs,
        other => return Err(err(format!("unknown mode {other:?}"))),
    };
    let mut cfg = CampaignConfig::new(injections, seed, targets);
    cfg.exhaustive = exhaustive;
    let tree = tree.map(|t| &t.inner);
    let inner = py
        .detach(|| {
            run_campaign_with_workers(
                &circuit.inner,
                &stimulus.inner,
                &golden.inner,
                &cfg,
                tree,
                workers,
            )
        })
        .map_err(err)?;
    Ok(PyCampaignResult {
        inner,
        circuit: circuit.netlist.name.clone(),
    })
}

#[pyfunction]
fn fdr(failures: u64, injections: u64) -> PyResult<f64> {
    cdnfi_core::fdr(failures, injections)
        .map(|f| f.value())
        .map_err(err)
}

fn names_ranking(names: Vec<String>) -> VulnerabilityRanking {
    VulnerabilityRanking {
        mode: RankMode::SeuUpset,
        fraction: 1.0,
        entries: names
            .into_iter()
            .map(|name| RankEntry {
                name,
                rate: 0.0,
                numerator: 0,
                denominator: 0,
            })
            .collect(),
    }
}

/// Shared names over the longer list's length.
#[pyfunction]
fn overlap(a: Vec<String>, b: Vec<String>) -> f64 {
    cdnfi_core::overlap(&names_ranking(a), &names_ranking(b))
}

/// floor(count * avg_fdr * fit).
#[pyfunction]
fn combine_fit(count: u64, avg_fdr: f64, fit: f64) -> u64 {
    cdnfi_core::combine_fit("element", count, avg_fdr, fit).failure_rate
}

#[pymodule]
fn cdnfi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetlist>()?;
    m.add_class::<PyStimulus>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyClockTree>()?;
    m.add_class::<PyCampaignResult>()?;
    m.add_function(wrap_pyfunction!(generate_clock_tree, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(fdr, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(combine_fit, m)?)?;
    Ok(())
}
