//! Right-hand piano fingering as a finite-horizon MDP, solved by a deep
//! Q-network trained with experience replay and checked against exact
//! dynamic programming.

pub mod dqn;
pub mod env;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod reward;
pub mod score;

pub use env::{
    encode_state, fingering_reward, EncodingMode, FingerState, FingeringEnv, StepOutcome,
};
pub use error::{Error, Result};
pub use reward::{anchor, is_feasible, HandAnchor, RewardModel};
pub use score::{Finger, MelodicRange, Note, Score};
