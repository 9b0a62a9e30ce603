//! Python bindings for the `alphapo` crate.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use alphapo::dynamics::{self, FlowConfig, Method, Summary, SyntheticConfig, TrajectorySnapshot};
use alphapo::grad_analysis::{self, ScalarSensitivities, VectorGradients};
use alphapo::losses::{LossKind, PairLogprobs};
use alphapo::policy::{PolicyParams, PreferenceExample, VocabSpec};
use alphapo::report::check::{run_checks as run_check_suites, CheckSubject};
use alphapo::rewards::{self, ResponseStats, RewardConfig};
use alphapo::Error;

create_exception!(alphapo_py, NumericError, PyArithmeticError, "Overflow, non-finite value or integrator failure.");

fn to_py(err: Error) -> PyErr {
    match err {
        Error::NonFinite(_) | Error::Saturation(_) | Error::Integrator { .. } | Error::Inconclusive { .. } => {
            NumericError::new_err(err.to_string())
        }
        Error::Io(_) => PyOSError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn stats(sum_logprob: f64, length: usize) -> PyResult<ResponseStats> {
    ResponseStats::new(sum_logprob, length).map_err(to_py)
}

fn pair(w: (f64, usize), l: (f64, usize), ref_w: Option<f64>, ref_l: Option<f64>) -> PyResult<PairLogprobs> {
    let (sw, sl) = (stats(w.0, w.1)?, stats(l.0, l.1)?);
    match (ref_w, ref_l) {
        (Some(rw), Some(rl)) => PairLogprobs::with_reference(sw, sl, stats(rw, w.1)?, stats(rl, l.1)?),
        (None, None) => PairLogprobs::new(sw, sl),
        _ => return Err(PyValueError::new_err("ref_w and ref_l must be given together")),
    }
    .map_err(to_py)
}

/// Reward shape `alpha`, scale `beta` and target margin `gamma`.
#[pyclass(name = "RewardConfig", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyRewardConfig(RewardConfig);

#[pymethods]
impl PyRewardConfig {
    #[new]
    #[pyo3(signature = (alpha = 0.25, beta = 2.5, gamma = 0.25))]
    fn new(alpha: f64, beta: f64, gamma: f64) -> PyResult<Self> {
        RewardConfig::new(alpha, beta, gamma).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    fn __repr__(&self) -> String {
        format!("RewardConfig(alpha={}, beta={}, gamma={})", self.0.alpha, self.0.beta, self.0.gamma)
    }
}

#[pyfunction]
fn reward(cfg: &PyRewardConfig, sum_logprob: f64, length: usize) -> PyResult<f64> {
    rewards::reward(&cfg.0, &stats(sum_logprob, length)?).map_err(to_py)
}

#[pyfunction]
fn reward_derivative(cfg: &PyRewardConfig, sum_logprob: f64, length: usize) -> PyResult<f64> {
    rewards::reward_derivative(&cfg.0, &stats(sum_logprob, length)?).map_err(to_py)
}

#[pyfunction]
fn derivative_is_monotone_decreasing(alpha: f64, length: usize) -> bool {
    rewards::derivative_is_monotone_decreasing(alpha, length)
}

/// Loss value, Bradley-Terry argument and partials in `(log pi_w, log pi_l)`.
#[pyfunction]
#[pyo3(signature = (kind, cfg, logprob_w, len_w, logprob_l, len_l, ref_w = None, ref_l = None))]
#[allow(clippy::too_many_arguments)]
fn loss<'py>(
    py: Python<'py>,
    kind: &str,
    cfg: &PyRewardConfig,
    logprob_w: f64,
    len_w: usize,
    logprob_l: f64,
    len_l: usize,
    ref_w: Option<f64>,
    ref_l: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: LossKind = kind.parse().map_err(to_py)?;
    let p = pair((logprob_w, len_w), (logprob_l, len_l), ref_w, ref_l)?;
    let (value, grad) = kind.value_and_gradient(&p, &cfg.0).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("loss", value.loss)?;
    out.set_item("bt_argument", value.bt_argument)?;
    out.set_item("d_logprob_w", grad.d_logprob_w)?;
    out.set_item("d_logprob_l", grad.d_logprob_l)?;
    Ok(out)
}

#[pyfunction]
fn t1(cfg: &PyRewardConfig, c_w: f64, c_l: f64) -> PyResult<f64> {
    grad_analysis::t1(&cfg.0, c_w, c_l).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (alpha, logprob_w, len_w, logprob_l, len_l, dpi_w_dv = 1.0, dpi_l_dv = 1.0))]
fn t2(alpha: f64, logprob_w: f64, len_w: usize, logprob_l: f64, len_l: usize, dpi_w_dv: f64, dpi_l_dv: f64) -> PyResult<f64> {
    let s = ScalarSensitivities::new(dpi_w_dv, dpi_l_dv);
    grad_analysis::t2(alpha, &stats(logprob_w, len_w)?, &stats(logprob_l, len_l)?, &s).map_err(to_py)
}

/// `T1`, `T2`, their product and the normalized margin for one pair.
#[pyfunction]
#[pyo3(signature = (cfg, logprob_w, len_w, logprob_l, len_l, dpi_w_dv = 1.0, dpi_l_dv = 1.0))]
#[allow(clippy::too_many_arguments)]
fn grad_magnitude<'py>(
    py: Python<'py>,
    cfg: &PyRewardConfig,
    logprob_w: f64,
    len_w: usize,
    logprob_l: f64,
    len_l: usize,
    dpi_w_dv: f64,
    dpi_l_dv: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = ScalarSensitivities::new(dpi_w_dv, dpi_l_dv);
    let d = grad_analysis::per_sample_grad_magnitude(&cfg.0, &stats(logprob_w, len_w)?, &stats(logprob_l, len_l)?, &s)
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t1", d.t1)?;
    out.set_item("t2", d.t2)?;
    out.set_item("magnitude", d.magnitude)?;
    out.set_item("margin", d.margin)?;
    out.set_item("delta_r", d.delta_r)?;
    Ok(out)
}

#[pyfunction]
fn alpha_zero(
    logprob_w: f64,
    len_w: usize,
    logprob_l: f64,
    len_l: usize,
    grad_pi_w: Vec<f64>,
    grad_pi_l: Vec<f64>,
) -> PyResult<f64> {
    let vg = VectorGradients::new(grad_pi_w, grad_pi_l).map_err(to_py)?;
    grad_analysis::alpha_zero(&stats(logprob_w, len_w)?, &stats(logprob_l, len_l)?, &vg).map_err(to_py)
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn theorem2_condition(
    cfg: &PyRewardConfig,
    logprob_w: f64,
    len_w: usize,
    logprob_l: f64,
    len_l: usize,
    grad_pi_w: Vec<f64>,
    grad_pi_l: Vec<f64>,
) -> PyResult<bool> {
    let vg = VectorGradients::new(grad_pi_w, grad_pi_l).map_err(to_py)?;
    Ok(grad_analysis::theorem2_condition(&cfg.0, &stats(logprob_w, len_w)?, &stats(logprob_l, len_l)?, &vg))
}

/// Tabular autoregressive policy over a small vocabulary.
#[pyclass(name = "ToyPolicy", from_py_object)]
#[derive(Clone)]
struct PyToyPolicy(PolicyParams);

#[pymethods]
impl PyToyPolicy {
    #[new]
    #[pyo3(signature = (vocab_size, context_order, max_len, prompt_classes, logits = None))]
    fn new(
        vocab_size: usize,
        context_order: usize,
        max_len: usize,
        prompt_classes: usize,
        logits: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let spec = VocabSpec::new(vocab_size, context_order, max_len).map_err(to_py)?;
        match logits {
            Some(l) => PolicyParams::new(spec, prompt_classes, l),
            None => PolicyParams::zeros(spec, prompt_classes),
        }
        .map(Self)
        .map_err(to_py)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        PolicyParams::from_text(text).map(Self).map_err(to_py)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn logits(&self) -> Vec<f64> {
        self.0.logits().to_vec()
    }

    #[getter]
    fn prompt_classes(&self) -> usize {
        self.0.prompt_classes()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.0.num_params()
    }

    fn seq_logprob(&self, prompt_class: usize, y: Vec<usize>) -> PyResult<f64> {
        self.0.seq_logprob(prompt_class, &y).map_err(to_py)
    }

    fn grad_seq_logprob(&self, prompt_class: usize, y: Vec<usize>) -> PyResult<Vec<f64>> {
        self.0.grad_seq_logprob(prompt_class, &y).map_err(to_py)
    }

    fn grad_seq_prob(&self, prompt_class: usize, y: Vec<usize>) -> PyResult<Vec<f64>> {
        self.0.grad_seq_prob(prompt_class, &y).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let s = self.0.spec();
        format!(
            "ToyPolicy(vocab_size={}, context_order={}, max_len={}, prompt_classes={})",
            s.vocab_size,
            s.context_order,
            s.max_len,
            self.0.prompt_classes()
        )
    }
}

type Example = (usize, Vec<usize>, Vec<usize>);

fn examples(data: Vec<Example>) -> PyResult<Vec<PreferenceExample>> {
    data.into_iter()
        .map(|(c, w, l)| PreferenceExample::new(c, w, l).map_err(to_py))
        .collect()
}

/// Seeded synthetic problem: `(initial_policy, [(prompt_class, y_w, y_l), ...])`.
#[pyfunction]
#[pyo3(signature = (seed = 7, examples = 64, prompt_classes = 8, vocab_size = 4, context_order = 1, max_len = 4))]
fn synthetic_problem(
    seed: u64,
    examples: usize,
    prompt_classes: usize,
    vocab_size: usize,
    context_order: usize,
    max_len: usize,
) -> PyResult<(PyToyPolicy, Vec<Example>)> {
    let cfg = SyntheticConfig {
        vocab: VocabSpec::new(vocab_size, context_order, max_len).map_err(to_py)?,
        prompt_classes,
        examples,
        seed,
        ..SyntheticConfig::default()
    };
    let (policy, data) = dynamics::synthetic_problem(&cfg).map_err(to_py)?;
    let data = data.into_iter().map(|e| (e.prompt_class, e.y_w, e.y_l)).collect();
    Ok((PyToyPolicy(policy), data))
}

fn summary_dict<'py>(py: Python<'py>, s: &Summary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in [("min", s.min), ("q1", s.q1), ("median", s.median), ("q3", s.q3), ("max", s.max)] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

fn snapshot_dict<'py>(py: Python<'py>, snap: &TrajectorySnapshot) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("time", snap.time)?;
    d.set_item("mean_loss", snap.mean_loss)?;
    d.set_item("kl_to_reference", snap.kl_to_reference)?;
    for (name, s) in snap.summaries() {
        d.set_item(name, summary_dict(py, s)?)?;
    }
    Ok(d)
}

/// Integrate the gradient flow from `policy`, which is also the reference.
/// Returns one dict per snapshot.
#[pyfunction]
#[pyo3(signature = (policy, data, cfg, loss = "alphapo", method = "rk4", step_size = 1e-3, total_time = 1.0, snapshot_every = 0.1))]
#[allow(clippy::too_many_arguments)]
fn run_trajectory<'py>(
    py: Python<'py>,
    policy: &PyToyPolicy,
    data: Vec<Example>,
    cfg: &PyRewardConfig,
    loss: &str,
    method: &str,
    step_size: f64,
    total_time: f64,
    snapshot_every: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let flow = FlowConfig {
        method: method.parse::<Method>().map_err(to_py)?,
        step_size,
        total_time,
        snapshot_every,
        loss: loss.parse::<LossKind>().map_err(to_py)?,
        reward: cfg.0,
        seed: 0,
    };
    let data = examples(data)?;
    let initial = policy.0.clone();
    let snapshots = py
        .detach(move || dynamics::run_trajectory(&initial, &data, &flow))
        .map_err(|abort| to_py(abort.source))?;
    snapshots.iter().map(|s| snapshot_dict(py, s)).collect()
}

/// Run the built-in self-check suites: `[(name, passed, detail), ...]`.
#[pyfunction]
fn run_checks() -> Vec<(String, bool, String)> {
    run_check_suites(&CheckSubject::default())
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect()
}

#[pymodule]
fn alphapo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    m.add_class::<PyRewardConfig>()?;
    m.add_class::<PyToyPolicy>()?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(reward_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_is_monotone_decreasing, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(t1, m)?)?;
    m.add_function(wrap_pyfunction!(t2, m)?)?;
    m.add_function(wrap_pyfunction!(grad_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_zero, m)?)?;
    m.add_function(wrap_pyfunction!(theorem2_condition, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_problem, m)?)?;
    m.add_function(wrap_pyfunction!(run_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
