use rand::Rng;

use super::lstm::fill_uniform;
use super::{check_len, Matrix, NnError, Scalar};

/// Dense output head mapping a hidden vector to vocabulary logits.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxLayerParams<F> {
    /// `V × H`, one row per vocabulary entry.
    pub w: Matrix<F>,
    pub b: Vec<F>,
}

impl<F: Scalar> SoftmaxLayerParams<F> {
    pub fn zeros(hidden_size: usize, vocab_size: usize) -> Self {
        Self {
            w: Matrix::zeros(vocab_size, hidden_size),
            b: vec![F::zero(); vocab_size],
        }
    }

    pub fn init<R: Rng + ?Sized>(hidden_size: usize, vocab_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden_size, vocab_size);
        fill_uniform(p.w.as_mut_slice(), 1.0 / (hidden_size.max(1) as f64).sqrt(), rng);
        p
    }

    pub fn vocab_size(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden_size(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, h: &[F]) -> Result<Vec<F>, NnError> {
        check_len("hidden", self.hidden_size(), h.len())?;
        check_len("output bias", self.vocab_size(), self.b.len())?;
        let mut z = self.b.clone();
        self.w.matvec_acc(h, &mut z);
        Ok(z)
    }

    pub fn probs(&self, h: &[F]) -> Result<Vec<F>, NnError> {
        let mut z = self.logits(h)?;
        softmax_in_place(&mut z);
        Ok(z)
    }
}

/// Max-subtracted softmax.
pub fn softmax_in_place<F: Scalar>(z: &mut [F]) {
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in z.iter_mut() {
        *v = *v / sum;
    }
}

/// Returns the output distribution and `-ln p[target]` in nats.
pub fn softmax_xent_forward<F: Scalar>(
    h: &[F],
    params: &SoftmaxLayerParams<F>,
    target: usize,
) -> Result<(Vec<F>, F), NnError> {
    if target >= params.vocab_size() {
        return Err(NnError::IndexOutOfRange {
            index: target,
            len: params.vocab_size(),
        });
    }
    let mut z = params.logits(h)?;
    // log-sum-exp form keeps the loss finite even when p[target] underflows
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<F>().ln();
    let loss = lse - z[target];
    softmax_in_place(&mut z);
    Ok((z, loss))
}

/// Gradient of the cross-entropy w.r.t. the logits: `probs - onehot(target)`.
pub fn softmax_xent_backward<F: Scalar>(probs: &[F], target: usize) -> Result<Vec<F>, NnError> {
    if target >= probs.len() {
        return Err(NnError::IndexOutOfRange {
            index: target,
            len: probs.len(),
        });
    }
    let mut g = probs.to_vec();
    g[target] = g[target] - F::one();
    Ok(g)
}
