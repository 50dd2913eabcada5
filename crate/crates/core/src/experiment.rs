//! Bundled experiments, run configuration, and the CSV / fingering file
//! exports.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::dqn::{greedy_rollout, train_with, EpisodeRecord, QNetwork, Rollout, TrainConfig};
use crate::env::{EncodingMode, FingeringEnv};
use crate::error::{Error, Result};
use crate::oracle::{count_position_changes, dp_optimal, Solution};
use crate::reward::RewardModel;
use crate::score::{Finger, Score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::Ex1,
        ExperimentId::Ex2,
        ExperimentId::Ex3,
        ExperimentId::Ex4,
        ExperimentId::Ex5,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1..=5 => Ok(Self::ALL[n as usize - 1]),
            _ => Err(Error::UnknownExperiment(n.to_string())),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EX{}", self.number())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t
            .strip_prefix("EX")
            .or_else(|| t.strip_prefix("ex"))
            .unwrap_or(t);
        digits
            .parse::<u8>()
            .map_err(|_| Error::UnknownExperiment(s.to_string()))
            .and_then(|n| Self::from_number(n).map_err(|_| Error::UnknownExperiment(s.to_string())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingChoice {
    FullPiano88,
    MelodicRange,
}

impl EncodingChoice {
    pub fn resolve(self, score: &Score) -> EncodingMode {
        match self {
            EncodingChoice::FullPiano88 => EncodingMode::FullPiano88,
            EncodingChoice::MelodicRange => EncodingMode::melodic(score),
        }
    }
}

impl FromStr for EncodingChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "88" | "full" | "piano88" => Ok(EncodingChoice::FullPiano88),
            "range" | "melodic" => Ok(EncodingChoice::MelodicRange),
            other => Err(Error::Config(format!(
                "unknown encoding {other:?}, expected 88 or range"
            ))),
        }
    }
}

impl fmt::Display for EncodingChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingChoice::FullPiano88 => "88",
            EncodingChoice::MelodicRange => "range",
        })
    }
}

const EX1: &[i32] = &[60; 8];
const EX2: &[i32] = &[60, 62, 64, 65, 67, 67, 65, 64, 62, 60];
const EX3: &[i32] = &[64, 64, 65, 67, 67, 65, 64, 62, 60, 60, 62, 64, 64, 62, 62];
const EX4: &[i32] = &[
    60, 62, 64, 65, 67, 69, 71, 72, 72, 71, 69, 67, 65, 64, 62, 60,
];
const EX5: &[i32] = &[
    60, 62, 64, 65, 67, 65, 64, 62, 60, 64, 67, 72, 71, 69, 67, 65, 64, 67, 65, 64, 62, 64, 62, 60,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub score: Score,
    pub episodes: usize,
    pub encoding: EncodingChoice,
}

pub fn build_experiment(id: ExperimentId) -> ExperimentSpec {
    let (pitches, first_finger, episodes, encoding) = match id {
        ExperimentId::Ex1 => (EX1, 3, 1000, EncodingChoice::FullPiano88),
        ExperimentId::Ex2 => (EX2, 1, 100, EncodingChoice::MelodicRange),
        ExperimentId::Ex3 => (EX3, 3, 200, EncodingChoice::MelodicRange),
        ExperimentId::Ex4 => (EX4, 1, 5000, EncodingChoice::MelodicRange),
        ExperimentId::Ex5 => (EX5, 1, 500, EncodingChoice::MelodicRange),
    };
    let score = Score::from_pitches(id.to_string(), pitches, first_finger)
        .expect("bundled experiment scores are valid");
    ExperimentSpec {
        id,
        score,
        episodes,
        encoding,
    }
}

impl ExperimentSpec {
    /// Training settings tuned for this experiment's episode budget.
    /// EX2's 100 episodes want frequent target syncs and a higher
    /// exploration floor; EX5's long episodes want a lower one.
    pub fn default_config(&self) -> RunConfig {
        let mut cfg = RunConfig::default();
        match self.id {
            ExperimentId::Ex2 => {
                cfg.train.batch_size = 128;
                cfg.train.target_sync = 10;
                cfg.train.epsilon_end = 0.2;
            }
            ExperimentId::Ex5 => cfg.train.epsilon_end = 0.01,
            _ => {}
        }
        cfg
    }
}

/// Everything a run can be configured with. `encoding` and `episodes` left
/// unset fall back to the experiment's defaults.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub episodes: Option<usize>,
    pub encoding: Option<EncodingChoice>,
    pub reward: RewardModel,
}

pub const CONFIG_KEYS: &[&str] = &[
    "episodes",
    "gamma",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_fraction",
    "replay_capacity",
    "batch_size",
    "target_sync",
    "learning_rate",
    "optimizer",
    "seed",
    "r_stay",
    "r_move",
    "r_infeasible",
    "anchor_tolerance",
    "encoding",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let (mut tol, mut stay, mut mv, mut inf) = (
            self.reward.anchor_tolerance(),
            self.reward.r_stay(),
            self.reward.r_move(),
            self.reward.r_infeasible(),
        );
        match key {
            "episodes" => self.episodes = Some(parse_value(key, value)?),
            "gamma" => t.gamma = parse_value(key, value)?,
            "epsilon_start" => t.epsilon_start = parse_value(key, value)?,
            "epsilon_end" => t.epsilon_end = parse_value(key, value)?,
            "epsilon_decay_fraction" => t.epsilon_decay_fraction = parse_value(key, value)?,
            "replay_capacity" => t.replay_capacity = parse_value(key, value)?,
            "batch_size" => t.batch_size = parse_value(key, value)?,
            "target_sync" => t.target_sync = parse_value(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "optimizer" => t.optimizer = value.parse()?,
            "seed" => t.seed = parse_value(key, value)?,
            "r_stay" => stay = parse_value(key, value)?,
            "r_move" => mv = parse_value(key, value)?,
            "r_infeasible" => inf = parse_value(key, value)?,
            "anchor_tolerance" => tol = parse_value(key, value)?,
            "encoding" => self.encoding = Some(value.parse()?),
            _ => {
                return Err(Error::Config(format!(
                    "unknown key {key:?}; expected one of {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        if key.starts_with("r_") || key == "anchor_tolerance" {
            // checked as a set in validate()
            self.reward = RewardModel::unchecked(tol, stay, mv, inf);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        RewardModel::new(
            self.reward.anchor_tolerance(),
            self.reward.r_stay(),
            self.reward.r_move(),
            self.reward.r_infeasible(),
        )?;
        self.train.validate()
    }

    /// Training configuration for `spec`, with episode default filled in.
    pub fn train_config(&self, spec_episodes: usize) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes.unwrap_or(spec_episodes),
            ..self.train.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub encoding: EncodingMode,
    pub history: Vec<EpisodeRecord>,
    pub network: QNetwork,
    pub rollout: Rollout,
    pub oracle: Solution,
    /// Oracle total minus rollout total; never negative.
    pub gap: f64,
    /// `None` when the learned fingering contains an infeasible transition.
    pub position_changes: Option<usize>,
}

/// Trains on a score and compares the greedy policy with the exact optimum.
pub fn run_score(
    score: &Score,
    encoding: EncodingChoice,
    config: &RunConfig,
    default_episodes: usize,
) -> Result<RunReport> {
    run_score_with(score, encoding, config, default_episodes, |_, _| {})
}

pub fn run_score_with<F>(
    score: &Score,
    encoding: EncodingChoice,
    config: &RunConfig,
    default_episodes: usize,
    observe: F,
) -> Result<RunReport>
where
    F: FnMut(&EpisodeRecord, &QNetwork),
{
    config.validate()?;
    let mode = encoding.resolve(score);
    let train_cfg = config.train_config(default_episodes);
    let outcome = train_with(score, &config.reward, mode, &train_cfg, observe)?;
    let mut env = FingeringEnv::new(score, &config.reward);
    let rollout = greedy_rollout(&outcome.network, &mode, &mut env)?;
    let oracle = dp_optimal(score, &config.reward);
    let gap = oracle.total_reward - rollout.total_reward;
    debug_assert!(gap >= -1e-9, "rollout beat the oracle");
    let position_changes = count_position_changes(score, &rollout.fingering, &config.reward).ok();
    Ok(RunReport {
        seed: train_cfg.seed,
        encoding: mode,
        history: outcome.history,
        network: outcome.network,
        rollout,
        oracle,
        gap,
        position_changes,
    })
}

/// Runs a bundled experiment; `config.encoding` overrides the bundled mode.
pub fn run(spec: &ExperimentSpec, config: &RunConfig) -> Result<RunReport> {
    run_score(
        &spec.score,
        config.encoding.unwrap_or(spec.encoding),
        config,
        spec.episodes,
    )
}

/// First episode after which the greedy policy attains the oracle value, or
/// `None` within the budget.
pub fn episodes_to_optimal(
    score: &Score,
    encoding: EncodingChoice,
    config: &RunConfig,
    default_episodes: usize,
) -> Result<Option<usize>> {
    let target = dp_optimal(score, &config.reward).total_reward;
    let mode = encoding.resolve(score);
    let mut first = None;
    let mut eval_error = None;
    run_score_with(score, encoding, config, default_episodes, |record, net| {
        if first.is_some() || eval_error.is_some() {
            return;
        }
        let mut env = FingeringEnv::new(score, &config.reward);
        match greedy_rollout(net, &mode, &mut env) {
            Ok(r) if r.total_reward >= target => first = Some(record.episode),
            Ok(_) => {}
            Err(e) => eval_error = Some(e),
        }
    })?;
    match eval_error {
        Some(e) => Err(e),
        None => Ok(first),
    }
}

pub const HISTORY_HEADER: &str = "episode,total_reward,epsilon,mean_loss";

pub fn format_history(records: &[EpisodeRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.episode, r.total_reward, r.epsilon, r.mean_loss
        ));
    }
    out
}

pub fn export_history(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_history(records))?;
    Ok(())
}

pub fn parse_history(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {HISTORY_HEADER:?}"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            let err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("invalid number {s:?}")))
            };
            Ok(EpisodeRecord {
                episode: fields[0]
                    .parse()
                    .map_err(|_| err(format!("invalid episode {:?}", fields[0])))?,
                total_reward: num(fields[1])?,
                epsilon: num(fields[2])?,
                mean_loss: num(fields[3])?,
            })
        })
        .collect()
}

pub fn format_fingering(score: &Score, fingering: &[Finger]) -> Result<String> {
    if fingering.len() != score.len() {
        return Err(Error::Contract(format!(
            "fingering has {} fingers for {} notes",
            fingering.len(),
            score.len()
        )));
    }
    Ok(score
        .notes()
        .iter()
        .zip(fingering)
        .map(|(n, f)| format!("{} {}\n", n.pitch(), f))
        .collect())
}

pub fn export_fingering(score: &Score, fingering: &[Finger], path: impl AsRef<Path>) -> Result<()> {
    let text = format_fingering(score, fingering)?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads `<pitch> <finger>` lines back; blank lines and `#` comments are
/// skipped.
pub fn parse_fingering(text: &str) -> Result<Vec<(i32, Finger)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let mut parts = line.split_whitespace();
        let (Some(p), Some(f), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `<pitch> <finger>`, found {line:?}")));
        };
        let pitch = crate::score::parse_pitch(p).map_err(err)?;
        let finger = f
            .parse::<i32>()
            .ok()
            .and_then(|n| Finger::new(n).ok())
            .ok_or_else(|| err(format!("invalid finger {f:?}")))?;
        out.push((pitch, finger));
    }
    Ok(out)
}

/// Moving average over `window` consecutive values; empty if the series is
/// shorter than the window.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    let mut sum: f64 = values[..window].iter().sum();
    let mut out = vec![sum / window as f64];
    for i in window..values.len() {
        sum += values[i] - values[i - window];
        out.push(sum / window as f64);
    }
    out
}
