use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::backward_into;
use super::{
    check_len, dropout_mask, lstm_cell_forward, softmax_xent_backward, softmax_xent_forward,
    AdamHyper, CellInput, LstmCache, LstmGrads, LstmLayerParams, LstmState, Matrix, NnError,
    Precision, Scalar, SoftmaxLayerParams,
};
use crate::tokenizer::{Mode, Vocab};

/// Which musical representation a model was trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Chord,
    Drum,
}

impl Domain {
    /// Drum corpora consist of `_BAR_` flags and 9-digit binary words, so a
    /// vocabulary made only of those (or of their characters) is a drum one.
    pub fn infer(vocab: &Vocab) -> Domain {
        let is_drum = match vocab.mode() {
            Mode::Word => vocab.tokens().iter().all(|t| {
                t == crate::drum::BAR_FLAG
                    || (t.len() == 9 && t.bytes().all(|b| b == b'0' || b == b'1'))
            }),
            Mode::Char => vocab
                .tokens()
                .iter()
                .all(|t| matches!(t.as_str(), "0" | "1" | " " | "\n" | "_" | "B" | "A" | "R")),
        };
        if is_drum {
            Domain::Drum
        } else {
            Domain::Chord
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Chord => "chord",
            Domain::Drum => "drum",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub dropout: f64,
    pub seq_len: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    /// Global-norm gradient clip; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for ModelHyper {
    fn default() -> Self {
        Self {
            hidden_size: 128,
            num_layers: 2,
            dropout: 0.2,
            seq_len: 64,
            batch_size: 32,
            adam: AdamHyper::default(),
            clip_norm: 5.0,
        }
    }
}

impl ModelHyper {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidParameter(m));
        if self.hidden_size == 0 {
            return bad("hidden size must be positive".into());
        }
        if self.num_layers == 0 {
            return bad("at least one LSTM layer is required".into());
        }
        super::dropout::check_rate(self.dropout)?;
        if self.seq_len < 2 {
            return bad(format!("seq_len must be at least 2, got {}", self.seq_len));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", a.lr));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if a.eps.is_nan() || a.eps <= 0.0 || self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return bad("adam eps must be positive and clip norm non-negative".into());
        }
        Ok(())
    }
}

/// Stacked LSTM language model over a fixed vocabulary: one-hot input,
/// `num_layers` LSTM layers each followed by dropout, softmax output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmModel<F> {
    vocab: Vocab,
    domain: Domain,
    hyper: ModelHyper,
    pub(crate) layers: Vec<LstmLayerParams<F>>,
    pub(crate) output: SoftmaxLayerParams<F>,
}

/// Everything one window's backward pass needs.
#[derive(Clone, Debug)]
pub struct WindowTrace<F> {
    /// `caches[t][layer]`
    caches: Vec<Vec<LstmCache<F>>>,
    /// `masks[t][layer]`, `None` when dropout is off.
    masks: Vec<Vec<Option<Vec<F>>>>,
    top: Vec<Vec<F>>,
    probs: Vec<Vec<F>>,
    pub loss_sum: F,
}

impl<F> WindowTrace<F> {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl<F: Scalar> LstmModel<F> {
    pub fn new<R: Rng + ?Sized>(
        vocab: Vocab,
        hyper: ModelHyper,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        hyper.validate()?;
        let v = vocab.len();
        let h = hyper.hidden_size;
        let layers = (0..hyper.num_layers)
            .map(|l| LstmLayerParams::init(if l == 0 { v } else { h }, h, rng))
            .collect();
        let output = SoftmaxLayerParams::init(h, v, rng);
        Ok(Self {
            domain: Domain::infer(&vocab),
            vocab,
            hyper,
            layers,
            output,
        })
    }

    /// Assembles a model from existing tensors, checking every shape.
    pub fn from_parts(
        vocab: Vocab,
        domain: Domain,
        hyper: ModelHyper,
        layers: Vec<LstmLayerParams<F>>,
        output: SoftmaxLayerParams<F>,
    ) -> Result<Self, NnError> {
        hyper.validate()?;
        check_len("layer count", hyper.num_layers, layers.len())?;
        let h = hyper.hidden_size;
        for (l, p) in layers.iter().enumerate() {
            check_len("layer input", if l == 0 { vocab.len() } else { h }, p.input_size())?;
            check_len("layer hidden", h, p.hidden_size())?;
            check_len("W_x rows", 4 * h, p.w_x.rows())?;
            check_len("W_h rows", 4 * h, p.w_h.rows())?;
            check_len("gate bias", 4 * h, p.b.len())?;
        }
        check_len("output vocab", vocab.len(), output.vocab_size())?;
        check_len("output hidden", h, output.hidden_size())?;
        check_len("output bias", vocab.len(), output.b.len())?;
        Ok(Self {
            vocab,
            domain,
            hyper,
            layers,
            output,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn hyper(&self) -> &ModelHyper {
        &self.hyper
    }

    pub fn precision(&self) -> Precision {
        F::PRECISION
    }

    pub fn layers(&self) -> &[LstmLayerParams<F>] {
        &self.layers
    }

    pub fn output(&self) -> &SoftmaxLayerParams<F> {
        &self.output
    }

    pub fn initial_state(&self) -> Vec<LstmState<F>> {
        vec![LstmState::zeros(self.hyper.hidden_size); self.layers.len()]
    }

    /// Named views of every parameter tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, (usize, usize), &[F])> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for (l, p) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.w_x"), p.w_x.shape(), p.w_x.as_slice()));
            out.push((format!("layer{l}.w_h"), p.w_h.shape(), p.w_h.as_slice()));
            out.push((format!("layer{l}.b"), (1, p.b.len()), p.b.as_slice()));
        }
        out.push(("output.w".into(), self.output.w.shape(), self.output.w.as_slice()));
        out.push(("output.b".into(), (1, self.output.b.len()), self.output.b.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for p in &mut self.layers {
            out.push(p.w_x.as_mut_slice());
            out.push(p.w_h.as_mut_slice());
            out.push(p.b.as_mut_slice());
        }
        out.push(self.output.w.as_mut_slice());
        out.push(self.output.b.as_mut_slice());
        out
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(LstmLayerParams::all_finite)
            && self.output.w.all_finite()
            && self.output.b.iter().all(|v| v.is_finite())
    }

    /// One inference step: feeds `token`, advances `states`, returns the
    /// next-token distribution.
    pub fn step(&self, states: &mut [LstmState<F>], token: usize) -> Result<Vec<F>, NnError> {
        check_len("state stack", self.layers.len(), states.len())?;
        let v = self.vocab_size();
        if token >= v {
            return Err(NnError::IndexOutOfRange { index: token, len: v });
        }
        let mut x: Vec<F> = Vec::new();
        for (l, p) in self.layers.iter().enumerate() {
            let input = if l == 0 {
                CellInput::OneHot { index: token, size: v }
            } else {
                CellInput::Dense(&x)
            };
            let (next, _) = lstm_cell_forward(input, &states[l], p)?;
            x = next.h.clone();
            states[l] = next;
        }
        self.output.probs(&x)
    }

    /// Runs one window from a zero state. With `dropout` set, every LSTM
    /// output passes through an inverted-dropout mask drawn from the RNG.
    pub fn forward_window<R: Rng + ?Sized>(
        &self,
        inputs: &[usize],
        targets: &[usize],
        mut dropout: Option<&mut R>,
    ) -> Result<WindowTrace<F>, NnError> {
        check_len("targets", inputs.len(), targets.len())?;
        let v = self.vocab_size();
        let hs = self.hyper.hidden_size;
        let rate = self.hyper.dropout;
        let mut states = self.initial_state();
        let n = inputs.len();
        let mut trace = WindowTrace {
            caches: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            top: Vec::with_capacity(n),
            probs: Vec::with_capacity(n),
            loss_sum: F::zero(),
        };
        for (&tok, &target) in inputs.iter().zip(targets) {
            if tok >= v {
                return Err(NnError::IndexOutOfRange { index: tok, len: v });
            }
            let mut caches = Vec::with_capacity(self.layers.len());
            let mut masks = Vec::with_capacity(self.layers.len());
            let mut x: Vec<F> = Vec::new();
            for (l, p) in self.layers.iter().enumerate() {
                let input = if l == 0 {
                    CellInput::OneHot { index: tok, size: v }
                } else {
                    CellInput::Dense(&x)
                };
                let (next, cache) = lstm_cell_forward(input, &states[l], p)?;
                let mask = match dropout.as_deref_mut() {
                    Some(rng) if rate > 0.0 => Some(dropout_mask::<F, R>(hs, rate, rng)?),
                    _ => None,
                };
                x = match &mask {
                    Some(m) => next.h.iter().zip(m).map(|(&a, &b)| a * b).collect(),
                    None => next.h.clone(),
                };
                states[l] = next;
                caches.push(cache);
                masks.push(mask);
            }
            let (probs, loss) = softmax_xent_forward(&x, &self.output, target)?;
            if !loss.is_finite() {
                return Err(NnError::NonFinite { what: "loss" });
            }
            trace.loss_sum = trace.loss_sum + loss;
            trace.caches.push(caches);
            trace.masks.push(masks);
            trace.top.push(x);
            trace.probs.push(probs);
        }
        Ok(trace)
    }

    /// Backpropagation through time over a traced window. Output-layer
    /// gradients are multiplied by `scale` (e.g. `1/tokens` for a mean loss).
    pub fn backward_window(
        &self,
        trace: &WindowTrace<F>,
        targets: &[usize],
        scale: F,
        grads: &mut ModelGrads<F>,
    ) -> Result<(), NnError> {
        self.backward_window_impl(trace, targets, scale, grads, false)
    }

    pub(crate) fn backward_window_impl(
        &self,
        trace: &WindowTrace<F>,
        targets: &[usize],
        scale: F,
        grads: &mut ModelGrads<F>,
        flip_forget: bool,
    ) -> Result<(), NnError> {
        check_len("targets", trace.len(), targets.len())?;
        check_len("gradient layers", self.layers.len(), grads.layers.len())?;
        let hs = self.hyper.hidden_size;
        let nl = self.layers.len();
        let mut dh_next = vec![vec![F::zero(); hs]; nl];
        let mut dc_next = vec![vec![F::zero(); hs]; nl];

        for t in (0..trace.len()).rev() {
            let mut dlogits = softmax_xent_backward(&trace.probs[t], targets[t])?;
            for d in &mut dlogits {
                *d = *d * scale;
            }
            grads.output_w.add_outer(&dlogits, &trace.top[t]);
            for (gb, &d) in grads.output_b.iter_mut().zip(&dlogits) {
                *gb = *gb + d;
            }
            let mut dx = vec![F::zero(); hs];
            self.output.w.matvec_t_acc(&dlogits, &mut dx);

            for l in (0..nl).rev() {
                let dh: Vec<F> = match &trace.masks[t][l] {
                    Some(m) => dx
                        .iter()
                        .zip(m)
                        .zip(&dh_next[l])
                        .map(|((&a, &mk), &n)| a * mk + n)
                        .collect(),
                    None => dx.iter().zip(&dh_next[l]).map(|(&a, &n)| a + n).collect(),
                };
                let (gx, dhp, dcp) = backward_into(
                    &dh,
                    &dc_next[l],
                    &trace.caches[t][l],
                    &self.layers[l],
                    &mut grads.layers[l],
                    l > 0,
                    flip_forget,
                )?;
                dh_next[l] = dhp;
                dc_next[l] = dcp;
                if let Some(gx) = gx {
                    dx = gx;
                }
            }
        }
        Ok(())
    }

    /// Summed cross-entropy of `targets` given `inputs`, dropout off.
    pub fn sequence_loss(&self, inputs: &[usize], targets: &[usize]) -> Result<F, NnError> {
        Ok(self
            .forward_window::<rand::rngs::ThreadRng>(inputs, targets, None)?
            .loss_sum)
    }
}

/// Gradient buffers shaped like an [`LstmModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads<F> {
    pub layers: Vec<LstmGrads<F>>,
    pub output_w: Matrix<F>,
    pub output_b: Vec<F>,
}

impl<F: Scalar> ModelGrads<F> {
    pub fn zeros_like(model: &LstmModel<F>) -> Self {
        Self {
            layers: model.layers.iter().map(LstmGrads::zeros_like).collect(),
            output_w: Matrix::zeros(model.output.w.rows(), model.output.w.cols()),
            output_b: vec![F::zero(); model.output.b.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
        self.output_w.add_assign(&other.output_w);
        for (a, &b) in self.output_b.iter_mut().zip(&other.output_b) {
            *a = *a + b;
        }
    }

    /// Same order as [`LstmModel::tensors`].
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for g in &self.layers {
            out.push(g.w_x.as_slice());
            out.push(g.w_h.as_slice());
            out.push(g.b.as_slice());
        }
        out.push(self.output_w.as_slice());
        out.push(&self.output_b);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for g in &mut self.layers {
            out.push(g.w_x.as_mut_slice());
            out.push(g.w_h.as_mut_slice());
            out.push(g.b.as_mut_slice());
        }
        out.push(self.output_w.as_mut_slice());
        out.push(&mut self.output_b);
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales to `max_norm` if the global norm exceeds it. Returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if max_norm > 0.0 && norm > max_norm {
            let s = F::of(max_norm / norm);
            for t in self.tensors_mut() {
                for v in t {
                    *v = *v * s;
                }
            }
        }
        norm
    }
}
