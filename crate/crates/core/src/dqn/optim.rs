//! Parameter update rules for the online network.

use std::fmt;
use std::str::FromStr;

use super::network::{Gradients, Mlp};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?}, expected sgd or adam"
            ))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        first_moment: Vec<f64>,
        second_moment: Vec<f64>,
        steps: i32,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { learning_rate },
            OptimizerKind::Adam => Optimizer::Adam {
                learning_rate,
                first_moment: vec![0.0; num_params],
                second_moment: vec![0.0; num_params],
                steps: 0,
            },
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        match self {
            Optimizer::Sgd { learning_rate } => net.apply_gradients(grads, *learning_rate),
            Optimizer::Adam {
                learning_rate,
                first_moment,
                second_moment,
                steps,
            } => {
                *steps += 1;
                let flat = grads.flat();
                let bias1 = 1.0 - BETA1.powi(*steps);
                let bias2 = 1.0 - BETA2.powi(*steps);
                let update: Vec<f64> = flat
                    .iter()
                    .zip(first_moment.iter_mut().zip(second_moment.iter_mut()))
                    .map(|(&g, (m, v))| {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        m_hat / (v_hat.sqrt() + ADAM_EPS)
                    })
                    .collect();
                net.apply_flat_update(&update, *learning_rate);
            }
        }
    }
}
