//! Python bindings: scores, the reward model, the exact oracle and DQN runs.

use fingering_core::experiment::{
    build_experiment, run_score, EncodingChoice, ExperimentId, RunConfig, RunReport,
};
use fingering_core::oracle::{self, TabularConfig};
use fingering_core::{fingering_reward, Error, Finger, FingerState};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Training { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn finger(n: i32) -> PyResult<Finger> {
    Finger::new(n).map_err(to_py)
}

fn fingers(ns: &[i32]) -> PyResult<Vec<Finger>> {
    ns.iter().map(|&n| finger(n)).collect()
}

fn numbers(fs: &[Finger]) -> Vec<u32> {
    fs.iter().map(|f| f.number() as u32).collect()
}

#[pyclass(name = "Score", frozen)]
struct PyScore(fingering_core::Score);

#[pymethods]
impl PyScore {
    #[new]
    #[pyo3(signature = (pitches, first_finger, name = "score"))]
    fn new(pitches: Vec<i32>, first_finger: i32, name: &str) -> PyResult<Self> {
        fingering_core::Score::from_pitches(name, &pitches, first_finger)
            .map(PyScore)
            .map_err(to_py)
    }

    /// Parses the line-oriented text format.
    #[staticmethod]
    #[pyo3(signature = (text, name = "score"))]
    fn parse(text: &str, name: &str) -> PyResult<Self> {
        fingering_core::Score::parse_named(text, name)
            .map(PyScore)
            .map_err(to_py)
    }

    /// One of the five bundled experiments, by number.
    #[staticmethod]
    fn experiment(number: u8) -> PyResult<Self> {
        let id = ExperimentId::from_number(number).map_err(to_py)?;
        Ok(PyScore(build_experiment(id).score))
    }

    #[getter]
    fn name(&self) -> &str {
        self.0.name()
    }

    #[getter]
    fn pitches(&self) -> Vec<i32> {
        self.0.pitches()
    }

    #[getter]
    fn first_finger(&self) -> u8 {
        self.0.first_finger().number()
    }

    fn serialize(&self) -> String {
        self.0.serialize()
    }

    fn mirror(&self, axis_pitch: i32) -> PyResult<Self> {
        self.0
            .mirror_for_left_hand(axis_pitch)
            .map(PyScore)
            .map_err(to_py)
    }

    fn transpose(&self, semitones: i32) -> PyResult<Self> {
        self.0.transpose(semitones).map(PyScore).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Score({:?}, first_finger={}, name={:?})",
            self.0.pitches(),
            self.0.first_finger(),
            self.0.name()
        )
    }
}

#[pyclass(name = "RewardModel", frozen)]
struct PyRewardModel(fingering_core::RewardModel);

#[pymethods]
impl PyRewardModel {
    #[new]
    #[pyo3(signature = (anchor_tolerance = 2, r_stay = 1.0, r_move = -1.0, r_infeasible = -10.0))]
    fn new(anchor_tolerance: i32, r_stay: f64, r_move: f64, r_infeasible: f64) -> PyResult<Self> {
        fingering_core::RewardModel::new(anchor_tolerance, r_stay, r_move, r_infeasible)
            .map(PyRewardModel)
            .map_err(to_py)
    }

    /// r((cf, cn, nn), nf)
    fn reward(&self, cf: i32, cn: i32, nn: i32, nf: i32) -> PyResult<f64> {
        let state = FingerState {
            cf: finger(cf)?,
            cn,
            nn,
            index: 0,
        };
        Ok(self.0.reward(&state, finger(nf)?))
    }

    fn is_position_change(&self, cf: i32, cn: i32, nf: i32, nn: i32) -> PyResult<bool> {
        Ok(self.0.is_position_change(finger(cf)?, cn, finger(nf)?, nn))
    }

    /// Total reward of a complete fingering.
    fn total(&self, score: &PyScore, fingering: Vec<i32>) -> PyResult<f64> {
        fingering_reward(&score.0, &self.0, &fingers(&fingering)?).map_err(to_py)
    }
}

fn reward_or_default(reward: Option<&PyRewardModel>) -> fingering_core::RewardModel {
    reward.map(|r| r.0.clone()).unwrap_or_default()
}

/// Exact optimum by dynamic programming: `(fingering, total_reward)`.
#[pyfunction]
#[pyo3(signature = (score, reward = None))]
fn dp_optimal(score: &PyScore, reward: Option<&PyRewardModel>) -> (Vec<u32>, f64) {
    let sol = oracle::dp_optimal(&score.0, &reward_or_default(reward));
    (numbers(&sol.fingering), sol.total_reward)
}

#[pyfunction]
#[pyo3(signature = (score, fingering, reward = None))]
fn count_position_changes(
    score: &PyScore,
    fingering: Vec<i32>,
    reward: Option<&PyRewardModel>,
) -> PyResult<usize> {
    oracle::count_position_changes(&score.0, &fingers(&fingering)?, &reward_or_default(reward))
        .map_err(to_py)
}

/// Tabular Q-learning baseline: greedy `(fingering, total_reward)`.
#[pyfunction]
#[pyo3(signature = (score, episodes = 2000, seed = 0, reward = None))]
fn tabular_q(
    score: &PyScore,
    episodes: usize,
    seed: u64,
    reward: Option<&PyRewardModel>,
) -> PyResult<(Vec<u32>, f64)> {
    let rm = reward_or_default(reward);
    let cfg = TabularConfig {
        episodes,
        seed,
        ..TabularConfig::default()
    };
    let q = oracle::tabular_q_train(&score.0, &rm, &cfg).map_err(to_py)?;
    let sol = q.greedy_rollout(&score.0, &rm).map_err(to_py)?;
    Ok((numbers(&sol.fingering), sol.total_reward))
}

fn apply_options(cfg: &mut RunConfig, config: Option<&Bound<'_, PyDict>>) -> PyResult<()> {
    if let Some(dict) = config {
        for (key, value) in dict.iter() {
            let key: String = key.extract()?;
            let value = value.str()?.to_string();
            cfg.set(&key, &value).map_err(to_py)?;
        }
    }
    Ok(())
}

fn report_dict<'py>(py: Python<'py>, report: &RunReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("seed", report.seed)?;
    d.set_item("fingering", numbers(&report.rollout.fingering))?;
    d.set_item("total_reward", report.rollout.total_reward)?;
    d.set_item("oracle_fingering", numbers(&report.oracle.fingering))?;
    d.set_item("oracle_reward", report.oracle.total_reward)?;
    d.set_item("gap", report.gap)?;
    d.set_item("position_changes", report.position_changes)?;
    let history: Vec<(usize, f64, f64, f64)> = report
        .history
        .iter()
        .map(|h| (h.episode, h.total_reward, h.epsilon, h.mean_loss))
        .collect();
    d.set_item("history", history)?;
    Ok(d)
}

/// Trains a DQN on `score` and compares its greedy fingering with the optimum.
/// `config` takes the same keys as a config file.
#[pyfunction]
#[pyo3(signature = (score, episodes = None, seed = 0, encoding = "range", config = None))]
fn train<'py>(
    py: Python<'py>,
    score: &PyScore,
    episodes: Option<usize>,
    seed: u64,
    encoding: &str,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::default();
    apply_options(&mut cfg, config)?;
    cfg.train.seed = seed;
    cfg.episodes = episodes.or(cfg.episodes);
    let choice: EncodingChoice = encoding.parse().map_err(to_py)?;
    let default_episodes = cfg.train.episodes;
    let report = py
        .detach(|| run_score(&score.0, choice, &cfg, default_episodes))
        .map_err(to_py)?;
    report_dict(py, &report)
}

/// Runs a bundled experiment with its tuned settings.
#[pyfunction]
#[pyo3(signature = (number, seed = 0, episodes = None, config = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    number: u8,
    seed: u64,
    episodes: Option<usize>,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = build_experiment(ExperimentId::from_number(number).map_err(to_py)?);
    let mut cfg = spec.default_config();
    apply_options(&mut cfg, config)?;
    cfg.train.seed = seed;
    cfg.episodes = episodes.or(cfg.episodes);
    let report = py
        .detach(|| fingering_core::experiment::run(&spec, &cfg))
        .map_err(to_py)?;
    report_dict(py, &report)
}

#[pymodule]
fn fingering(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScore>()?;
    m.add_class::<PyRewardModel>()?;
    m.add_function(wrap_pyfunction!(dp_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(count_position_changes, m)?)?;
    m.add_function(wrap_pyfunction!(tabular_q, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
