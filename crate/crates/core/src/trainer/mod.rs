//! Truncated-BPTT training with ADAM.
//!
//! The token stream is cut into non-overlapping windows of `seq_len` inputs,
//! each predicting the stream shifted by one. Every window starts from a zero
//! state. Windows are grouped into batches; each batch yields one ADAM step on
//! the mean per-token cross-entropy, after global-norm clipping.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{
    from_bytes, load_checkpoint, read_header, save_checkpoint, to_bytes, CheckpointError,
    CheckpointHeader, TensorEntry, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use crate::nn::{adam_step, AdamState, LstmModel, ModelGrads, ModelHyper, NnError, Scalar};
use crate::tokenizer::Vocab;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("token stream of {len} tokens is too short for seq_len {seq_len} (needs at least {})", seq_len + 1)]
    StreamTooShort { len: usize, seq_len: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged in epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seq_len: usize,
    pub batch_size: usize,
    /// Full passes over the corpus.
    pub epochs: usize,
    pub seed: u64,
    /// Write a checkpoint every this many epochs, if set.
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seq_len: 64,
            batch_size: 32,
            epochs: 25,
            seed: 0,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.seq_len < 2 {
            return Err(TrainError::InvalidConfig(format!(
                "seq_len must be at least 2, got {}",
                self.seq_len
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch size must be positive".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(TrainError::InvalidConfig("checkpoint interval must be positive".into()));
        }
        Ok(())
    }
}

/// One next-token prediction window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
}

pub type Batch = Vec<Window>;

/// Non-overlapping windows `ids[k·L .. (k+1)·L] → ids[k·L+1 .. (k+1)·L+1]`;
/// a trailing partial window is dropped, a trailing short batch kept.
pub fn make_batches(ids: &[usize], seq_len: usize, batch_size: usize) -> Result<Vec<Batch>, TrainError> {
    if seq_len == 0 || batch_size == 0 {
        return Err(TrainError::InvalidConfig("seq_len and batch size must be positive".into()));
    }
    if ids.len() < seq_len + 1 {
        return Err(TrainError::StreamTooShort {
            len: ids.len(),
            seq_len,
        });
    }
    let windows: Vec<Window> = (0..(ids.len() - 1) / seq_len)
        .map(|k| Window {
            inputs: ids[k * seq_len..(k + 1) * seq_len].to_vec(),
            targets: ids[k * seq_len + 1..(k + 1) * seq_len + 1].to_vec(),
        })
        .collect();
    Ok(windows.chunks(batch_size).map(<[Window]>::to_vec).collect())
}

/// One pass over `batches`; returns the mean per-token cross-entropy in nats.
///
/// Windows within a batch run in parallel, each with its own dropout RNG
/// seeded from `rng`, and their gradients are summed in window order, so the
/// result does not depend on the thread count.
pub fn train_epoch<F: Scalar, R: Rng + ?Sized>(
    model: &mut LstmModel<F>,
    adam: &mut AdamState<F>,
    batches: &[Batch],
    rng: &mut R,
) -> Result<f64, TrainError> {
    let mut total_loss = 0.0;
    let mut total_tokens = 0usize;
    for batch in batches {
        let tokens: usize = batch.iter().map(|w| w.inputs.len()).sum();
        if tokens == 0 {
            continue;
        }
        let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
        let scale = F::of(1.0 / tokens as f64);
        let shared: &LstmModel<F> = model;
        let per_window: Vec<(ModelGrads<F>, f64)> = batch
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(w, &seed)| {
                let mut wrng = ChaCha8Rng::seed_from_u64(seed);
                let trace = shared.forward_window(&w.inputs, &w.targets, Some(&mut wrng))?;
                let mut g = ModelGrads::zeros_like(shared);
                shared.backward_window(&trace, &w.targets, scale, &mut g)?;
                Ok((g, trace.loss_sum.as_f64()))
            })
            .collect::<Result<_, NnError>>()
            .map_err(|e| diverged_or(e, 0))?;

        let mut iter = per_window.into_iter();
        let (mut grads, mut loss) = iter.next().expect("non-empty batch");
        for (g, l) in iter {
            grads.add_assign(&g);
            loss += l;
        }
        if !loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch: 0,
                reason: "non-finite loss".into(),
            });
        }
        grads.clip_global_norm(model.hyper().clip_norm);
        let hyper = model.hyper().adam;
        let g_views = grads.tensors();
        let mut p_views = model.tensors_mut();
        adam_step(&mut p_views, &g_views, adam, &hyper).map_err(|e| diverged_or(e, 0))?;
        total_loss += loss;
        total_tokens += tokens;
    }
    if total_tokens == 0 {
        return Err(TrainError::InvalidConfig("no training windows".into()));
    }
    Ok(total_loss / total_tokens as f64)
}

fn diverged_or(e: NnError, epoch: usize) -> TrainError {
    match e {
        NnError::NonFiniteGradient | NnError::NonFinite { .. } => TrainError::Diverged {
            epoch,
            reason: e.to_string(),
        },
        other => TrainError::Nn(other),
    }
}

pub fn new_adam_state<F: Scalar>(model: &LstmModel<F>) -> AdamState<F> {
    AdamState::new(model.tensors().iter().map(|(_, _, t)| t.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Owns a model and everything needed to keep training it reproducibly.
pub struct Trainer<F> {
    model: LstmModel<F>,
    adam: AdamState<F>,
    rng: ChaCha8Rng,
    config: TrainConfig,
    epochs_done: usize,
}

impl<F: Scalar> Trainer<F> {
    /// Initializes a fresh model. The seed drives both initialization (stream
    /// 0) and dropout (stream 1).
    pub fn new(vocab: Vocab, mut hyper: ModelHyper, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        hyper.seq_len = config.seq_len;
        hyper.batch_size = config.batch_size;
        let mut init = ChaCha8Rng::seed_from_u64(config.seed);
        let model = LstmModel::new(vocab, hyper, &mut init)?;
        Ok(Self::resume(model, config))
    }

    /// Continues from an existing model with fresh optimizer state.
    pub fn resume(model: LstmModel<F>, config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Self {
            adam: new_adam_state(&model),
            model,
            rng,
            config,
            epochs_done: 0,
        }
    }

    pub fn model(&self) -> &LstmModel<F> {
        &self.model
    }

    pub fn into_model(self) -> LstmModel<F> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn batches(&self, ids: &[usize]) -> Result<Vec<Batch>, TrainError> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.model.vocab_size()) {
            return Err(TrainError::Nn(NnError::IndexOutOfRange {
                index: bad,
                len: self.model.vocab_size(),
            }));
        }
        make_batches(ids, self.config.seq_len, self.config.batch_size)
    }

    pub fn run_epoch(&mut self, batches: &[Batch]) -> Result<EpochReport, TrainError> {
        let epoch = self.epochs_done + 1;
        let mean_loss = train_epoch(&mut self.model, &mut self.adam, batches, &mut self.rng)
            .map_err(|e| match e {
                TrainError::Diverged { reason, .. } => TrainError::Diverged { epoch, reason },
                other => other,
            })?;
        if !mean_loss.is_finite() || !self.model.all_finite() {
            return Err(TrainError::Diverged {
                epoch,
                reason: "non-finite loss or parameters".into(),
            });
        }
        self.epochs_done = epoch;
        Ok(EpochReport { epoch, mean_loss })
    }

    /// Runs `config.epochs` epochs over `ids`, calling `on_epoch` after each;
    /// an error from the callback stops training.
    pub fn fit(
        &mut self,
        ids: &[usize],
        mut on_epoch: impl FnMut(&EpochReport, &LstmModel<F>) -> Result<(), TrainError>,
    ) -> Result<Vec<f64>, TrainError> {
        let batches = self.batches(ids)?;
        let mut losses = Vec::with_capacity(self.config.epochs);
        for _ in 0..self.config.epochs {
            let report = self.run_epoch(&batches)?;
            on_epoch(&report, &self.model)?;
            losses.push(report.mean_loss);
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{build_vocab, Mode};

    #[test]
    fn windows_shift_by_one() {
        let ids: Vec<usize> = (0..10).collect();
        let b = make_batches(&ids, 4, 8).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(
            b[0],
            vec![
                Window { inputs: vec![0, 1, 2, 3], targets: vec![1, 2, 3, 4] },
                Window { inputs: vec![4, 5, 6, 7], targets: vec![5, 6, 7, 8] },
            ]
        );
        let b = make_batches(&(0..30).collect::<Vec<_>>(), 3, 4).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 1]);
        for w in b.iter().flatten() {
            for (i, t) in w.inputs.iter().zip(&w.targets) {
                assert_eq!(i + 1, *t);
            }
        }
    }

    #[test]
    fn short_stream_is_rejected() {
        assert!(matches!(
            make_batches(&[0, 1, 2, 3], 4, 1),
            Err(TrainError::StreamTooShort { len: 4, seq_len: 4 })
        ));
        assert_eq!(make_batches(&[0, 1, 2, 3, 4], 4, 1).unwrap().len(), 1);
    }

    fn corpus_ids() -> (Vocab, Vec<usize>) {
        let text = "a b c d e f ".repeat(30);
        let vocab = build_vocab(&text, Mode::Word).unwrap();
        let ids = vocab.encode_ids(&text).unwrap();
        (vocab, ids)
    }

    fn small_trainer(seed: u64) -> Trainer<f32> {
        let (vocab, _) = corpus_ids();
        let hyper = ModelHyper { hidden_size: 8, ..ModelHyper::default() };
        let config = TrainConfig { seq_len: 8, batch_size: 4, epochs: 3, seed, checkpoint_every: None };
        Trainer::new(vocab, hyper, config).unwrap()
    }

    #[test]
    fn first_epoch_loss_is_near_uniform_baseline() {
        let (_, ids) = corpus_ids();
        let mut t = small_trainer(1);
        let batches = t.batches(&ids).unwrap();
        let r = t.run_epoch(&batches[..1]).unwrap();
        assert!((r.mean_loss / 6f64.ln() - 1.0).abs() < 0.1, "{r:?}");
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (_, ids) = corpus_ids();
        let mut a = small_trainer(3);
        let mut b = small_trainer(3);
        let la = a.fit(&ids, |_, _| Ok(())).unwrap();
        let lb = b.fit(&ids, |_, _| Ok(())).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.model(), b.model());
        assert!(la[2] < la[0]);
        let mut c = small_trainer(4);
        assert_ne!(c.fit(&ids, |_, _| Ok(())).unwrap(), la);
    }

    #[test]
    fn out_of_vocab_ids_are_rejected() {
        let t = small_trainer(0);
        assert!(t.batches(&[0, 1, 2, 99, 1, 2, 3, 4, 5, 0]).is_err());
    }

    #[test]
    fn huge_learning_rate_diverges_or_stays_finite() {
        let (vocab, ids) = corpus_ids();
        let mut hyper = ModelHyper { hidden_size: 8, clip_norm: 0.0, ..ModelHyper::default() };
        hyper.adam.lr = 1e30;
        let config = TrainConfig { seq_len: 8, batch_size: 4, epochs: 5, seed: 0, checkpoint_every: None };
        let mut t = Trainer::<f32>::new(vocab, hyper, config).unwrap();
        match t.fit(&ids, |_, _| Ok(())) {
            Err(TrainError::Diverged { .. }) => {}
            Ok(losses) => assert!(losses.iter().all(|l| l.is_finite())),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
