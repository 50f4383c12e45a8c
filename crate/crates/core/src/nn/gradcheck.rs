//! Full-network gradient verification against central finite differences.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::fill_uniform;
use super::{LstmModel, ModelGrads, ModelHyper, NnError};
use crate::tokenizer::{Mode, Vocab};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Coordinates probed per tensor; tensors smaller than this are probed
    /// exhaustively.
    pub coords_per_tensor: usize,
    /// Denominator floor. Central differences in binary64 carry ~1e-10 of
    /// roundoff, so gradients below this are compared on an absolute scale.
    pub abs_floor: f64,
    pub seed: u64,
    /// Breaks the backward pass on purpose so the checker's own sensitivity
    /// can be tested.
    #[doc(hidden)]
    pub corrupt_backward: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            coords_per_tensor: 200,
            abs_floor: 1e-6,
            seed: 0,
            corrupt_backward: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub coords_checked: usize,
}

pub fn grad_check(
    model: &LstmModel<f64>,
    inputs: &[usize],
    targets: &[usize],
) -> Result<f64, NnError> {
    Ok(grad_check_with(model, inputs, targets, &GradCheckOptions::default())?.max_rel_error)
}

/// Relative error is `|a − n| / max(|a|, |n|, abs_floor)`. The loss is the
/// summed cross-entropy over the sample with dropout disabled.
pub fn grad_check_with(
    model: &LstmModel<f64>,
    inputs: &[usize],
    targets: &[usize],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    if inputs.is_empty() {
        return Err(NnError::EmptySample);
    }
    let trace = model.forward_window::<ChaCha8Rng>(inputs, targets, None)?;
    let mut grads = ModelGrads::zeros_like(model);
    model.backward_window_impl(&trace, targets, 1.0, &mut grads, opts.corrupt_backward)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _, _)| n).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        coords_checked: 0,
    };
    for (ti, name) in names.iter().enumerate() {
        let len = analytic[ti].len();
        let coords: Vec<usize> = if len <= opts.coords_per_tensor {
            (0..len).collect()
        } else {
            sample(&mut rng, len, opts.coords_per_tensor).into_vec()
        };
        for k in coords {
            let orig = probe.tensors_mut()[ti][k];
            probe.tensors_mut()[ti][k] = orig + opts.epsilon;
            let plus = probe.sequence_loss(inputs, targets)?;
            probe.tensors_mut()[ti][k] = orig - opts.epsilon;
            let minus = probe.sequence_loss(inputs, targets)?;
            probe.tensors_mut()[ti][k] = orig;

            let numeric = (plus - minus) / (2.0 * opts.epsilon);
            let a = analytic[ti][k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.abs_floor);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_tensor = format!("{name}[{k}]");
            }
            report.coords_checked += 1;
        }
    }
    Ok(report)
}

/// Small deterministic model (V=5, H=4, two layers) in binary64 with
/// randomized biases, plus an 8-token sample.
pub fn tiny_check_model(seed: u64) -> (LstmModel<f64>, Vec<usize>, Vec<usize>) {
    let vocab = Vocab::from_tokens(Mode::Word, ["a", "b", "c", "d", "e"].map(String::from).to_vec())
        .expect("static vocab");
    let hyper = ModelHyper {
        hidden_size: 4,
        num_layers: 2,
        dropout: 0.0,
        ..ModelHyper::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LstmModel::new(vocab, hyper, &mut rng).expect("valid hyper");
    for layer in &mut model.layers {
        fill_uniform(&mut layer.b, 0.5, &mut rng);
    }
    fill_uniform(&mut model.output.b, 0.5, &mut rng);
    let tokens: Vec<usize> = (0..9).map(|_| rng.random_range(0..5)).collect();
    (model, tokens[..8].to_vec(), tokens[1..].to_vec())
}

/// The check the CLI runs: tiny model, 8-token sample.
pub fn builtin_grad_check(seed: u64) -> Result<GradCheckReport, NnError> {
    let (model, inputs, targets) = tiny_check_model(seed);
    grad_check_with(&model, &inputs, &targets, &GradCheckOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_model_passes() {
        for seed in 0..3 {
            let r = builtin_grad_check(seed).unwrap();
            assert!(r.max_rel_error <= 1e-4, "seed {seed}: {r:?}");
            assert!(r.coords_checked > 200);
        }
    }

    #[test]
    fn corrupted_backward_is_detected() {
        let (model, inputs, targets) = tiny_check_model(1);
        let opts = GradCheckOptions {
            corrupt_backward: true,
            ..GradCheckOptions::default()
        };
        let r = grad_check_with(&model, &inputs, &targets, &opts).unwrap();
        assert!(r.max_rel_error > 1e-2, "{r:?}");
    }

    #[test]
    fn empty_sample_is_an_error() {
        let (model, _, _) = tiny_check_model(0);
        assert_eq!(grad_check(&model, &[], &[]), Err(NnError::EmptySample));
    }

    #[test]
    fn samples_large_tensors() {
        let (model, inputs, targets) = tiny_check_model(2);
        let opts = GradCheckOptions {
            coords_per_tensor: 10,
            ..GradCheckOptions::default()
        };
        let r = grad_check_with(&model, &inputs, &targets, &opts).unwrap();
        // every tensor is capped at 10 except the 5-entry output bias
        assert_eq!(r.coords_checked, 10 * 7 + 5);
    }
}
