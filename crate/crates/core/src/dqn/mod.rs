pub mod agent;
pub mod network;
pub mod optim;
pub mod replay;

pub use agent::{
    argmax, compute_targets, greedy_rollout, linear_epsilon, select_action, train, train_step,
    train_with, EpisodeRecord, Rollout, TrainConfig, TrainOutcome, Trainer, NUM_ACTIONS,
};
pub use network::{Dense, Gradients, Mlp, QNetwork, Weights};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
