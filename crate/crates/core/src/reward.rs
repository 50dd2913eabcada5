//! Expert fingering rules expressed as a ternary reward: stay in position,
//! change position, or attempt an anatomically infeasible transition.
//!
//! A hand position is identified by its thumb anchor, the pitch the thumb
//! would rest on given that `finger` plays `pitch` in a five-finger C-major
//! position (offsets 0, 2, 4, 5, 7 semitones).

use crate::env::FingerState;
use crate::error::{Error, Result};
use crate::score::Finger;

pub const NATURAL_OFFSETS: [i32; 5] = [0, 2, 4, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HandAnchor(pub i32);

impl HandAnchor {
    pub fn pitch(self) -> i32 {
        self.0
    }
}

pub fn anchor(finger: Finger, pitch: i32) -> HandAnchor {
    HandAnchor(pitch - NATURAL_OFFSETS[finger.index()])
}

/// Non-thumb fingers may not cross: moving from one non-thumb finger to a
/// different one must go in the same direction as the pitch.
pub fn is_feasible(cf: Finger, cn: i32, nf: Finger, nn: i32) -> bool {
    if cf.is_thumb() || nf.is_thumb() || cf == nf || cn == nn {
        return true;
    }
    let finger_dir = (nf.number() as i32 - cf.number() as i32).signum();
    let pitch_dir = (nn - cn).signum();
    finger_dir == pitch_dir
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    anchor_tolerance: i32,
    r_stay: f64,
    r_move: f64,
    r_infeasible: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        RewardModel {
            anchor_tolerance: 2,
            r_stay: 1.0,
            r_move: -1.0,
            r_infeasible: -10.0,
        }
    }
}

impl RewardModel {
    pub fn new(anchor_tolerance: i32, r_stay: f64, r_move: f64, r_infeasible: f64) -> Result<Self> {
        if anchor_tolerance < 0 {
            return Err(Error::Config(format!(
                "anchor_tolerance must be >= 0, got {anchor_tolerance}"
            )));
        }
        if ![r_stay, r_move, r_infeasible].iter().all(|r| r.is_finite()) {
            return Err(Error::Config("reward constants must be finite".into()));
        }
        if !(r_infeasible < r_move && r_move < r_stay) {
            return Err(Error::Config(format!(
                "rewards must satisfy r_infeasible < r_move < r_stay, got {r_infeasible}, {r_move}, {r_stay}"
            )));
        }
        Ok(RewardModel {
            anchor_tolerance,
            r_stay,
            r_move,
            r_infeasible,
        })
    }

    /// Builds a model without checking the ordering of the constants.
    pub(crate) fn unchecked(
        anchor_tolerance: i32,
        r_stay: f64,
        r_move: f64,
        r_infeasible: f64,
    ) -> Self {
        RewardModel {
            anchor_tolerance,
            r_stay,
            r_move,
            r_infeasible,
        }
    }

    pub fn anchor_tolerance(&self) -> i32 {
        self.anchor_tolerance
    }

    pub fn r_stay(&self) -> f64 {
        self.r_stay
    }

    pub fn r_move(&self) -> f64 {
        self.r_move
    }

    pub fn r_infeasible(&self) -> f64 {
        self.r_infeasible
    }

    /// Whether the hand has to move between the two (finger, pitch) pairs.
    ///
    /// Keeping a finger while the pitch changes, or swapping fingers on a
    /// repeated pitch, always counts as a move. Otherwise the thumb anchors
    /// are compared against the tolerance. Only meaningful for feasible pairs.
    pub fn is_position_change(&self, cf: Finger, cn: i32, nf: Finger, nn: i32) -> bool {
        if cn == nn {
            return cf != nf;
        }
        if cf == nf {
            return true;
        }
        (anchor(nf, nn).pitch() - anchor(cf, cn).pitch()).abs() > self.anchor_tolerance
    }

    pub fn transition_reward(&self, cf: Finger, cn: i32, nf: Finger, nn: i32) -> f64 {
        if !is_feasible(cf, cn, nf, nn) {
            self.r_infeasible
        } else if self.is_position_change(cf, cn, nf, nn) {
            self.r_move
        } else {
            self.r_stay
        }
    }

    pub fn reward(&self, state: &FingerState, action: Finger) -> f64 {
        self.transition_reward(state.cf, state.cn, action, state.nn)
    }
}
