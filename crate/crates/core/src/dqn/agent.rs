//! Deep Q-learning with experience replay and a periodically synced target
//! network.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{QNetwork, Weights};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{EncodingMode, FingeringEnv};
use crate::error::{Error, Result};
use crate::reward::RewardModel;
use crate::score::{Finger, Score};

pub const NUM_ACTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `episodes` over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps between target syncs.
    pub target_sync: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub hidden_layers: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1000,
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            replay_capacity: 10_000,
            batch_size: 64,
            target_sync: 300,
            learning_rate: 0.1,
            optimizer: OptimizerKind::Sgd,
            hidden_layers: vec![64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} must be in [0, 1], got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad(format!(
                "epsilon_decay_fraction must be in [0, 1], got {}",
                self.epsilon_decay_fraction
            ));
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.target_sync == 0 {
            return bad("target_sync must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }

    /// Exploration rate for a 1-based episode number: linear from
    /// `epsilon_start` to `epsilon_end` over the decay window, flat after.
    pub fn epsilon(&self, episode: usize) -> f64 {
        linear_epsilon(
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_decay_fraction,
            self.episodes,
            episode,
        )
    }

    pub fn layer_sizes(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(NUM_ACTIONS))
            .collect()
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of
/// `episodes`, flat afterwards. `episode` is 1-based.
pub fn linear_epsilon(
    start: f64,
    end: f64,
    decay_fraction: f64,
    episodes: usize,
    episode: usize,
) -> f64 {
    let horizon = decay_fraction * episodes as f64;
    let progress = if horizon <= 0.0 {
        1.0
    } else {
        (episode.saturating_sub(1) as f64 / horizon).min(1.0)
    };
    start + (end - start) * progress
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub epsilon: f64,
    /// Mean pre-step loss over the episode's updates; 0 when none ran.
    pub mean_loss: f64,
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over the online Q-values.
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    features: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Finger> {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(Finger::from_index(rng.gen_range(0..NUM_ACTIONS)));
    }
    let q = net.forward(Weights::Online, features)?;
    Ok(Finger::from_index(argmax(&q)))
}

/// Bootstrap targets from the target weights: `r` for terminal transitions,
/// `r + gamma * max_a' Q'(s', a')` otherwise.
pub fn compute_targets(batch: &[&Transition], net: &QNetwork, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    batch
        .iter()
        .map(|t| match &t.next_features {
            None => Ok(t.reward),
            Some(next) => {
                let q = net.forward(Weights::Target, next)?;
                let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(t.reward + gamma * best)
            }
        })
        .collect()
}

/// One gradient step on the online weights toward fixed `targets`. Returns
/// the loss measured before the step.
pub fn train_step(
    net: &mut QNetwork,
    batch: &[&Transition],
    targets: &[f64],
    optimizer: &mut Optimizer,
    step: usize,
) -> Result<f64> {
    let inputs: Vec<&[f64]> = batch.iter().map(|t| t.features.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let (loss, grads) = net
        .online()
        .loss_and_gradients(&inputs, &actions, targets)?;
    if !loss.is_finite() {
        return Err(Error::Training { what: "loss", step });
    }
    if !grads.is_finite() {
        return Err(Error::Training {
            what: "gradient",
            step,
        });
    }
    optimizer.step(net.online_mut(), &grads);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Includes the given first finger.
    pub fingering: Vec<Finger>,
    pub total_reward: f64,
}

/// Plays one episode with epsilon = 0. Consumes no randomness.
pub fn greedy_rollout(
    net: &QNetwork,
    mode: &EncodingMode,
    env: &mut FingeringEnv<'_>,
) -> Result<Rollout> {
    let mut state = Some(env.reset());
    let mut fingering = vec![env.score().first_finger()];
    let mut total_reward = 0.0;
    let mut features = vec![0.0; mode.input_dim()];
    while let Some(s) = state {
        mode.encode_into(&s, &mut features)?;
        let q = net.forward(Weights::Online, &features)?;
        let action = Finger::from_index(argmax(&q));
        let outcome = env.step(action)?;
        fingering.push(action);
        total_reward += outcome.reward;
        state = outcome.next_state;
    }
    Ok(Rollout {
        fingering,
        total_reward,
    })
}

/// Mutable training state: network, replay memory, RNG and counters.
/// Driving it one episode at a time lets callers inspect the policy
/// between episodes.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    mode: EncodingMode,
    net: QNetwork,
    optimizer: Optimizer,
    memory: ReplayBuffer<Transition>,
    rng: ChaCha8Rng,
    episodes_done: usize,
    gradient_steps: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, mode: EncodingMode) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = QNetwork::new(&config.layer_sizes(mode.input_dim()), &mut rng);
        let optimizer = Optimizer::new(
            config.optimizer,
            config.learning_rate,
            net.online().num_params(),
        );
        Ok(Trainer {
            optimizer,
            memory: ReplayBuffer::new(config.replay_capacity),
            config,
            mode,
            net,
            rng,
            episodes_done: 0,
            gradient_steps: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn mode(&self) -> &EncodingMode {
        &self.mode
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn into_network(self) -> QNetwork {
        self.net
    }

    pub fn memory(&self) -> &ReplayBuffer<Transition> {
        &self.memory
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn gradient_steps(&self) -> usize {
        self.gradient_steps
    }

    pub fn run_episode(&mut self, env: &mut FingeringEnv<'_>) -> Result<EpisodeRecord> {
        self.mode.validate_score(env.score())?;
        let episode = self.episodes_done + 1;
        let epsilon = self.config.epsilon(episode);
        let mut total_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut updates = 0usize;

        let mut state = Some(env.reset());
        while let Some(s) = state {
            let features = self.mode.encode(&s)?;
            let action = select_action(&self.net, &features, epsilon, &mut self.rng)?;
            let outcome = env.step(action)?;
            total_reward += outcome.reward;
            let next_features = outcome
                .next_state
                .map(|n| self.mode.encode(&n))
                .transpose()?;
            self.memory.push(Transition {
                features,
                action,
                reward: outcome.reward,
                next_features,
            });
            state = outcome.next_state;

            if self.memory.len() >= self.config.batch_size {
                let batch = self.memory.sample(self.config.batch_size, &mut self.rng);
                let targets = compute_targets(&batch, &self.net, self.config.gamma)?;
                let loss = train_step(
                    &mut self.net,
                    &batch,
                    &targets,
                    &mut self.optimizer,
                    self.gradient_steps,
                )?;
                self.gradient_steps += 1;
                if self.gradient_steps.is_multiple_of(self.config.target_sync) {
                    self.net.sync_target();
                }
                loss_sum += loss;
                updates += 1;
            }
        }

        self.episodes_done = episode;
        Ok(EpisodeRecord {
            episode,
            total_reward,
            epsilon,
            mean_loss: if updates == 0 {
                0.0
            } else {
                loss_sum / updates as f64
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: QNetwork,
    pub mode: EncodingMode,
    pub history: Vec<EpisodeRecord>,
}

/// Runs `config.episodes` episodes over `score`.
pub fn train(
    score: &Score,
    reward: &RewardModel,
    mode: EncodingMode,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(score, reward, mode, config, |_, _| {})
}

/// As [`train`], calling `observe` after every episode.
pub fn train_with<F>(
    score: &Score,
    reward: &RewardModel,
    mode: EncodingMode,
    config: &TrainConfig,
    mut observe: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpisodeRecord, &QNetwork),
{
    let mut trainer = Trainer::new(config.clone(), mode)?;
    let mut env = FingeringEnv::new(score, reward);
    let mut history = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        let record = trainer.run_episode(&mut env)?;
        observe(&record, trainer.network());
        history.push(record);
    }
    Ok(TrainOutcome {
        network: trainer.into_network(),
        mode,
        history,
    })
}
