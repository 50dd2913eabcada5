//! The fingering MDP: one environment per score, one decision per
//! note-to-note transition.

use crate::error::{Error, Result};
use crate::reward::RewardModel;
use crate::score::{Finger, MelodicRange, Score, HIGHEST_PITCH, LOWEST_PITCH, PIANO_KEYS};

/// Agent observation `(cf, cn, nn)` plus the score position of `cn`.
///
/// `index` is bookkeeping for the walker and is never encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FingerState {
    pub cf: Finger,
    pub cn: i32,
    pub nn: i32,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    /// One slot per piano key, A0 at slot 0.
    FullPiano88,
    /// One slot per semitone of the score's melodic range.
    MelodicRange(MelodicRange),
}

impl EncodingMode {
    pub fn melodic(score: &Score) -> Self {
        EncodingMode::MelodicRange(score.melodic_range())
    }

    pub fn range(&self) -> MelodicRange {
        match self {
            EncodingMode::FullPiano88 => MelodicRange::full_piano(),
            EncodingMode::MelodicRange(r) => *r,
        }
    }

    /// Width of one pitch block.
    pub fn width(&self) -> usize {
        match self {
            EncodingMode::FullPiano88 => PIANO_KEYS,
            EncodingMode::MelodicRange(r) => r.size(),
        }
    }

    pub fn input_dim(&self) -> usize {
        5 + 2 * self.width()
    }

    fn slot(&self, pitch: i32) -> Result<usize> {
        let range = self.range();
        if !range.contains(pitch) {
            return Err(Error::Encoding {
                pitch,
                min: range.min_pitch(),
                max: range.max_pitch(),
            });
        }
        Ok((pitch - range.min_pitch()) as usize)
    }

    /// Writes `[one-hot(cf) | one-hot(cn) | one-hot(nn)]` into `out`, which
    /// must have length `input_dim()`.
    pub fn encode_into(&self, state: &FingerState, out: &mut [f64]) -> Result<()> {
        if out.len() != self.input_dim() {
            return Err(Error::Contract(format!(
                "feature buffer has length {}, expected {}",
                out.len(),
                self.input_dim()
            )));
        }
        let w = self.width();
        let cn = self.slot(state.cn)?;
        let nn = self.slot(state.nn)?;
        out.fill(0.0);
        out[state.cf.index()] = 1.0;
        out[5 + cn] = 1.0;
        out[5 + w + nn] = 1.0;
        Ok(())
    }

    pub fn encode(&self, state: &FingerState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.input_dim()];
        self.encode_into(state, &mut out)?;
        Ok(out)
    }

    pub fn validate_score(&self, score: &Score) -> Result<()> {
        for &p in &score.pitches() {
            self.slot(p)?;
        }
        Ok(())
    }
}

pub fn encode_state(state: &FingerState, mode: &EncodingMode) -> Result<Vec<f64>> {
    mode.encode(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// `None` marks the terminal state.
    pub next_state: Option<FingerState>,
    pub reward: f64,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.next_state.is_none()
    }
}

/// Episode walker over a single score.
#[derive(Debug, Clone)]
pub struct FingeringEnv<'a> {
    score: &'a Score,
    reward: &'a RewardModel,
    current: Option<FingerState>,
}

impl<'a> FingeringEnv<'a> {
    pub fn new(score: &'a Score, reward: &'a RewardModel) -> Self {
        FingeringEnv {
            score,
            reward,
            current: None,
        }
    }

    pub fn score(&self) -> &'a Score {
        self.score
    }

    pub fn reward_model(&self) -> &'a RewardModel {
        self.reward
    }

    /// Initial state for the score; the first finger comes from the sheet.
    pub fn initial_state(&self) -> FingerState {
        FingerState {
            cf: self.score.first_finger(),
            cn: self.score.pitch(0),
            nn: self.score.pitch(1),
            index: 0,
        }
    }

    pub fn reset(&mut self) -> FingerState {
        let s = self.initial_state();
        self.current = Some(s);
        s
    }

    pub fn current(&self) -> Option<FingerState> {
        self.current
    }

    /// Pure transition function of the MDP.
    pub fn transition(&self, state: &FingerState, action: Finger) -> Result<StepOutcome> {
        let len = self.score.len();
        if state.index + 1 >= len
            || self.score.pitch(state.index) != state.cn
            || self.score.pitch(state.index + 1) != state.nn
        {
            return Err(Error::Contract(format!(
                "state {state:?} does not belong to score {:?}",
                self.score.name()
            )));
        }
        let reward = self.reward.reward(state, action);
        let next_state = if state.index + 2 < len {
            Some(FingerState {
                cf: action,
                cn: state.nn,
                nn: self.score.pitch(state.index + 2),
                index: state.index + 1,
            })
        } else {
            None
        };
        Ok(StepOutcome { next_state, reward })
    }

    /// Advances the walker. Stepping before `reset` or after the terminal
    /// transition is a contract violation.
    pub fn step(&mut self, action: Finger) -> Result<StepOutcome> {
        let state = self.current.ok_or_else(|| {
            Error::Contract("step called on a terminal or unreset environment".into())
        })?;
        let outcome = self.transition(&state, action)?;
        self.current = outcome.next_state;
        Ok(outcome)
    }
}

/// Total undiscounted reward of a complete fingering (first finger included).
pub fn fingering_reward(score: &Score, reward: &RewardModel, fingering: &[Finger]) -> Result<f64> {
    if fingering.len() != score.len() {
        return Err(Error::Contract(format!(
            "fingering has {} fingers for {} notes",
            fingering.len(),
            score.len()
        )));
    }
    Ok(fingering
        .windows(2)
        .enumerate()
        .map(|(i, w)| reward.transition_reward(w[0], score.pitch(i), w[1], score.pitch(i + 1)))
        .sum())
}

const _: () = assert!((HIGHEST_PITCH - LOWEST_PITCH + 1) as usize == PIANO_KEYS);
