//! Exact solvers for the fingering MDP: backward induction over the
//! (note, finger) lattice, brute-force enumeration, and a tabular
//! Q-learning baseline on the identical environment.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dqn::{argmax, linear_epsilon};
use crate::env::{FingerState, FingeringEnv};
use crate::error::{Error, Result};
use crate::reward::{is_feasible, RewardModel};
use crate::score::{Finger, Score};

pub const EXHAUSTIVE_MAX_LEN: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// One finger per note, starting with the score's first finger.
    pub fingering: Vec<Finger>,
    pub total_reward: f64,
}

/// Value table `values[t][f]`: best undiscounted reward collectable from
/// note `t` onward when finger `f` plays note `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpLattice {
    pub values: Vec<[f64; 5]>,
    /// `successor[t][f]`: lowest finger for note `t + 1` on an optimal path.
    pub successor: Vec<[Finger; 5]>,
}

impl DpLattice {
    pub fn build(score: &Score, reward: &RewardModel) -> Self {
        let len = score.len();
        let mut values = vec![[0.0; 5]; len];
        let mut successor = vec![[Finger::THUMB; 5]; len - 1];
        for t in (0..len - 1).rev() {
            let (cn, nn) = (score.pitch(t), score.pitch(t + 1));
            for cf in Finger::ALL {
                let mut best = f64::NEG_INFINITY;
                let mut best_finger = Finger::THUMB;
                for nf in Finger::ALL {
                    let v = reward.transition_reward(cf, cn, nf, nn) + values[t + 1][nf.index()];
                    if v > best {
                        best = v;
                        best_finger = nf;
                    }
                }
                values[t][cf.index()] = best;
                successor[t][cf.index()] = best_finger;
            }
        }
        DpLattice { values, successor }
    }

    pub fn path_from(&self, first: Finger) -> Vec<Finger> {
        let mut path = vec![first];
        for succ in &self.successor {
            let cur = *path.last().unwrap();
            path.push(succ[cur.index()]);
        }
        path
    }
}

/// Reward-maximizing fingering; among optima, the lowest finger is taken
/// at each step.
pub fn dp_optimal(score: &Score, reward: &RewardModel) -> Solution {
    let lattice = DpLattice::build(score, reward);
    let first = score.first_finger();
    Solution {
        fingering: lattice.path_from(first),
        total_reward: lattice.values[0][first.index()],
    }
}

/// Enumerates all `5^(len-1)` fingerings depth first in lexicographic
/// order and keeps the first maximum.
pub fn exhaustive_optimal(score: &Score, reward: &RewardModel) -> Result<Solution> {
    let len = score.len();
    if len > EXHAUSTIVE_MAX_LEN {
        return Err(Error::ScoreTooLong {
            len,
            max: EXHAUSTIVE_MAX_LEN,
        });
    }
    let mut path = vec![score.first_finger()];
    let mut best = Solution {
        fingering: Vec::new(),
        total_reward: f64::NEG_INFINITY,
    };
    enumerate(score, reward, &mut path, 0.0, &mut best);
    Ok(best)
}

fn enumerate(
    score: &Score,
    reward: &RewardModel,
    path: &mut Vec<Finger>,
    acc: f64,
    best: &mut Solution,
) {
    let t = path.len() - 1;
    if t + 1 == score.len() {
        if acc > best.total_reward {
            best.total_reward = acc;
            best.fingering.clone_from(path);
        }
        return;
    }
    let cf = path[t];
    for nf in Finger::ALL {
        let r = reward.transition_reward(cf, score.pitch(t), nf, score.pitch(t + 1));
        path.push(nf);
        enumerate(score, reward, path, acc + r, best);
        path.pop();
    }
}

/// Number of transitions that move the hand. Every transition must be
/// feasible.
pub fn count_position_changes(
    score: &Score,
    fingering: &[Finger],
    reward: &RewardModel,
) -> Result<usize> {
    if fingering.len() != score.len() {
        return Err(Error::Contract(format!(
            "fingering has {} fingers for {} notes",
            fingering.len(),
            score.len()
        )));
    }
    let mut changes = 0;
    for (i, w) in fingering.windows(2).enumerate() {
        let (cn, nn) = (score.pitch(i), score.pitch(i + 1));
        if !is_feasible(w[0], cn, w[1], nn) {
            return Err(Error::Infeasible {
                index: i,
                from_finger: w[0].number(),
                from_pitch: cn,
                to_finger: w[1].number(),
                to_pitch: nn,
            });
        }
        if reward.is_position_change(w[0], cn, w[1], nn) {
            changes += 1;
        }
    }
    Ok(changes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            episodes: 2000,
            alpha: 0.5,
            gamma: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        for e in [
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_decay_fraction,
        ] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config(format!(
                    "epsilon parameter {e} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

type StateKey = (Finger, i32, i32);

/// Q-table over `(cf, cn, nn)`; only visited states get entries, and
/// unvisited ones read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularQ {
    table: HashMap<StateKey, [f64; 5]>,
}

impl TabularQ {
    fn key(state: &FingerState) -> StateKey {
        (state.cf, state.cn, state.nn)
    }

    pub fn values(&self, state: &FingerState) -> [f64; 5] {
        self.table
            .get(&Self::key(state))
            .copied()
            .unwrap_or([0.0; 5])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn greedy_action(&self, state: &FingerState) -> Finger {
        Finger::from_index(argmax(&self.values(state)))
    }

    /// Epsilon-0 episode under the table's greedy policy.
    pub fn greedy_rollout(&self, score: &Score, reward: &RewardModel) -> Result<Solution> {
        let mut env = FingeringEnv::new(score, reward);
        let mut state = Some(env.reset());
        let mut fingering = vec![score.first_finger()];
        let mut total_reward = 0.0;
        while let Some(s) = state {
            let a = self.greedy_action(&s);
            let out = env.step(a)?;
            fingering.push(a);
            total_reward += out.reward;
            state = out.next_state;
        }
        Ok(Solution {
            fingering,
            total_reward,
        })
    }
}

/// One-step Q-learning, `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`.
pub fn tabular_q_train(
    score: &Score,
    reward: &RewardModel,
    config: &TabularConfig,
) -> Result<TabularQ> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = TabularQ::default();
    let mut env = FingeringEnv::new(score, reward);

    for episode in 1..=config.episodes {
        let epsilon = linear_epsilon(
            config.epsilon_start,
            config.epsilon_end,
            config.epsilon_decay_fraction,
            config.episodes,
            episode,
        );
        let mut state = Some(env.reset());
        while let Some(s) = state {
            let action = if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                Finger::from_index(rng.gen_range(0..5))
            } else {
                q.greedy_action(&s)
            };
            let out = env.step(action)?;
            let bootstrap = match &out.next_state {
                Some(next) => {
                    config.gamma
                        * q.values(next)
                            .iter()
                            .copied()
                            .fold(f64::NEG_INFINITY, f64::max)
                }
                None => 0.0,
            };
            let entry = q.table.entry(TabularQ::key(&s)).or_insert([0.0; 5]);
            let old = entry[action.index()];
            entry[action.index()] = old + config.alpha * (out.reward + bootstrap - old);
            state = out.next_state;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fingers(ns: &[u8]) -> Vec<Finger> {
        ns.iter().map(|&n| Finger::new(n as i32).unwrap()).collect()
    }

    fn ex2() -> Score {
        Score::from_pitches("ex2", &[60, 62, 64, 65, 67, 67, 65, 64, 62, 60], 1).unwrap()
    }

    fn ex4() -> Score {
        Score::from_pitches(
            "ex4",
            &[
                60, 62, 64, 65, 67, 69, 71, 72, 72, 71, 69, 67, 65, 64, 62, 60,
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn dp_constant_pitch() {
        let rm = RewardModel::default();
        let s = Score::from_pitches("ex1", &[60; 8], 3).unwrap();
        let sol = dp_optimal(&s, &rm);
        assert_eq!(sol.fingering, fingers(&[3; 8]));
        assert_eq!(sol.total_reward, 7.0);
    }

    #[test]
    fn dp_ex2() {
        let sol = dp_optimal(&ex2(), &RewardModel::default());
        assert_eq!(sol.fingering, fingers(&[1, 2, 3, 4, 5, 5, 4, 3, 2, 1]));
        assert_eq!(sol.total_reward, 9.0);
    }

    #[test]
    fn dp_ex4_two_changes() {
        let rm = RewardModel::default();
        let sol = dp_optimal(&ex4(), &rm);
        assert_eq!(sol.total_reward, 11.0);
        assert_eq!(
            count_position_changes(&ex4(), &sol.fingering, &rm).unwrap(),
            2
        );
    }

    #[test]
    fn lattice_terminal_row_is_zero() {
        let lattice = DpLattice::build(&ex2(), &RewardModel::default());
        assert_eq!(lattice.values.last().unwrap(), &[0.0; 5]);
        assert_eq!(lattice.values.len(), 10);
        assert_eq!(lattice.successor.len(), 9);
    }

    #[test]
    fn exhaustive_examples() {
        let rm = RewardModel::default();
        let prefix = Score::from_pitches("p", &[60, 62, 64, 65, 67], 1).unwrap();
        let sol = exhaustive_optimal(&prefix, &rm).unwrap();
        assert_eq!(sol.fingering, fingers(&[1, 2, 3, 4, 5]));
        assert_eq!(sol.total_reward, 4.0);

        let pair = Score::from_pitches("p", &[64, 65], 3).unwrap();
        let sol = exhaustive_optimal(&pair, &rm).unwrap();
        let direct = Finger::ALL
            .iter()
            .map(|&nf| rm.transition_reward(Finger::new(3).unwrap(), 64, nf, 65))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sol.total_reward, direct);
        assert_eq!(sol, dp_optimal(&pair, &rm));

        assert_eq!(
            exhaustive_optimal(&ex2(), &rm).unwrap(),
            dp_optimal(&ex2(), &rm)
        );
    }

    #[test]
    fn exhaustive_rejects_long_scores() {
        let s = Score::from_pitches("long", &[60; 13], 1).unwrap();
        assert!(matches!(
            exhaustive_optimal(&s, &RewardModel::default()),
            Err(Error::ScoreTooLong { len: 13, .. })
        ));
    }

    #[test]
    fn count_examples() {
        let rm = RewardModel::default();
        assert_eq!(
            count_position_changes(&ex2(), &fingers(&[1, 2, 3, 4, 5, 5, 4, 3, 2, 1]), &rm).unwrap(),
            0
        );
        assert_eq!(
            count_position_changes(
                &ex4(),
                &fingers(&[1, 2, 3, 1, 2, 3, 4, 5, 5, 4, 3, 2, 1, 3, 2, 1]),
                &rm
            )
            .unwrap(),
            2
        );
        let flat = Score::from_pitches("flat", &[70; 6], 4).unwrap();
        assert_eq!(
            count_position_changes(&flat, &fingers(&[4; 6]), &rm).unwrap(),
            0
        );
    }

    #[test]
    fn count_reports_infeasible_index() {
        let rm = RewardModel::default();
        let s = Score::from_pitches("s", &[62, 60, 59], 1).unwrap();
        let err = count_position_changes(&s, &fingers(&[1, 2, 3]), &rm).unwrap_err();
        assert!(matches!(err, Error::Infeasible { index: 1, .. }), "{err}");
    }

    #[test]
    fn tabular_zero_alpha_keeps_zeros() {
        let cfg = TabularConfig {
            alpha: 0.0,
            episodes: 50,
            ..TabularConfig::default()
        };
        let q = tabular_q_train(&ex2(), &RewardModel::default(), &cfg).unwrap();
        assert!(!q.is_empty());
        assert!(q.table.values().all(|v| v == &[0.0; 5]));
    }

    #[test]
    fn tabular_learns_constant_pitch() {
        let rm = RewardModel::default();
        let s = Score::from_pitches("ex1", &[60; 8], 3).unwrap();
        let q = tabular_q_train(&s, &rm, &TabularConfig::default()).unwrap();
        let sol = q.greedy_rollout(&s, &rm).unwrap();
        assert_eq!(sol.total_reward, 7.0);
    }
}
