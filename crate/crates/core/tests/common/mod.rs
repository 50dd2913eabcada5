//! Test-only oracles shared by the integration targets.

#![allow(dead_code)]

use fingering_core::dqn::Mlp;
use fingering_core::Score;
use rand::Rng;

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because a perturbation flipped a ReLU unit.
    pub skipped_kinks: usize,
}

/// Relative error with a floor so that two vanishing gradients compare as
/// equal rather than dividing noise by noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences `(L(θ+δ) - L(θ-δ)) / 2δ` for the chosen parameters,
/// compared against `analytic[i]`.
pub fn finite_difference_check(
    net: &Mlp,
    inputs: &[&[f64]],
    actions: &[usize],
    targets: &[f64],
    analytic: &[f64],
    params: &[usize],
    delta: f64,
) -> GradCheck {
    let base_patterns: Vec<Vec<bool>> = inputs.iter().map(|x| net.relu_pattern(x)).collect();
    let mut probe = net.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    for &i in params {
        let theta = net.param(i);
        probe.set_param(i, theta + delta);
        let plus = probe.batch_loss(inputs, actions, targets).unwrap();
        let kink_plus = inputs
            .iter()
            .zip(&base_patterns)
            .any(|(x, p)| &probe.relu_pattern(x) != p);
        probe.set_param(i, theta - delta);
        let minus = probe.batch_loss(inputs, actions, targets).unwrap();
        let kink_minus = inputs
            .iter()
            .zip(&base_patterns)
            .any(|(x, p)| &probe.relu_pattern(x) != p);
        probe.set_param(i, theta);
        if kink_plus || kink_minus {
            out.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * delta);
        out.max_rel_error = out.max_rel_error.max(relative_error(analytic[i], numeric));
        out.checked += 1;
    }
    out
}

/// Random score of `len` notes drawn from `[lo, hi]`.
pub fn random_score<R: Rng>(rng: &mut R, len: usize, lo: i32, hi: i32) -> Score {
    let pitches: Vec<i32> = (0..len).map(|_| rng.gen_range(lo..=hi)).collect();
    Score::from_pitches("random", &pitches, rng.gen_range(1..=5)).unwrap()
}
