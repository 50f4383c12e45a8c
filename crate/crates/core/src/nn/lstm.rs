//! A single LSTM layer: forward step, analytic backward step, and the
//! parameter/gradient containers shared by the full network.
//!
//! Gate pre-activations are stacked in one `4H` vector in the fixed block
//! order input, forget, candidate, output:
//!
//! ```text
//! a = W_x·x + W_h·h + b
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c' = f⊙c + i⊙g
//! h' = o⊙tanh(c')
//! ```

use rand::Rng;

use super::{check_finite, check_len, sigmoid, Matrix, NnError, Scalar};

/// Weights of one LSTM layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams<F> {
    /// `4H × D`
    pub w_x: Matrix<F>,
    /// `4H × H`
    pub w_h: Matrix<F>,
    /// `4H`
    pub b: Vec<F>,
}

impl<F: Scalar> LstmLayerParams<F> {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            w_x: Matrix::zeros(4 * hidden_size, input_size),
            w_h: Matrix::zeros(4 * hidden_size, hidden_size),
            b: vec![F::zero(); 4 * hidden_size],
        }
    }

    /// Uniform `[-1/√fan_in, 1/√fan_in]` weights, zero biases except the
    /// forget block which starts at 1.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        fill_uniform(p.w_x.as_mut_slice(), 1.0 / (input_size.max(1) as f64).sqrt(), rng);
        fill_uniform(p.w_h.as_mut_slice(), 1.0 / (hidden_size.max(1) as f64).sqrt(), rng);
        for v in &mut p.b[hidden_size..2 * hidden_size] {
            *v = F::one();
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.cols()
    }

    fn validate(&self) -> Result<(), NnError> {
        let h = self.hidden_size();
        check_len("W_h rows", 4 * h, self.w_h.rows())?;
        check_len("W_x rows", 4 * h, self.w_x.rows())?;
        check_len("gate bias", 4 * h, self.b.len())
    }

    pub fn all_finite(&self) -> bool {
        self.w_x.all_finite() && self.w_h.all_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn fill_uniform<F: Scalar, R: Rng + ?Sized>(out: &mut [F], scale: f64, rng: &mut R) {
    for v in out {
        *v = F::of(rng.random_range(-scale..=scale));
    }
}

/// Hidden and cell vectors of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: vec![F::zero(); hidden_size],
            c: vec![F::zero(); hidden_size],
        }
    }
}

/// Input to a cell. The first layer of a language model sees one-hot token
/// vectors, which never need to be materialized.
#[derive(Clone, Copy, Debug)]
pub enum CellInput<'a, F> {
    Dense(&'a [F]),
    OneHot { index: usize, size: usize },
}

impl<F: Scalar> CellInput<'_, F> {
    fn len(&self) -> usize {
        match self {
            CellInput::Dense(x) => x.len(),
            CellInput::OneHot { size, .. } => *size,
        }
    }
}

#[derive(Clone, Debug)]
enum CachedInput<F> {
    Dense(Vec<F>),
    OneHot(usize),
}

/// Activations saved by [`lstm_cell_forward`] for the matching backward call.
#[derive(Clone, Debug)]
pub struct LstmCache<F> {
    input: CachedInput<F>,
    input_size: usize,
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    /// i, f, g, o stacked, post-nonlinearity.
    gates: Vec<F>,
    tanh_c: Vec<F>,
}

impl<F: Scalar> LstmCache<F> {
    pub fn hidden_size(&self) -> usize {
        self.h_prev.len()
    }
}

pub fn lstm_cell_forward<F: Scalar>(
    x: CellInput<'_, F>,
    state: &LstmState<F>,
    params: &LstmLayerParams<F>,
) -> Result<(LstmState<F>, LstmCache<F>), NnError> {
    params.validate()?;
    let hs = params.hidden_size();
    check_len("input", params.input_size(), x.len())?;
    check_len("state.h", hs, state.h.len())?;
    check_len("state.c", hs, state.c.len())?;
    check_finite("state.h", &state.h)?;
    check_finite("state.c", &state.c)?;

    let mut a = params.b.clone();
    let input = match x {
        CellInput::Dense(xv) => {
            check_finite("input", xv)?;
            params.w_x.matvec_acc(xv, &mut a);
            CachedInput::Dense(xv.to_vec())
        }
        CellInput::OneHot { index, size } => {
            if index >= size {
                return Err(NnError::IndexOutOfRange { index, len: size });
            }
            params.w_x.column_acc(index, &mut a);
            CachedInput::OneHot(index)
        }
    };
    params.w_h.matvec_acc(&state.h, &mut a);

    let (ifo, g) = a.split_at_mut(2 * hs);
    for v in ifo.iter_mut() {
        *v = sigmoid(*v);
    }
    let (g, o) = g.split_at_mut(hs);
    for v in g.iter_mut() {
        *v = v.tanh();
    }
    for v in o.iter_mut() {
        *v = sigmoid(*v);
    }
    let gates = a;

    let mut c = vec![F::zero(); hs];
    let mut h = vec![F::zero(); hs];
    let mut tanh_c = vec![F::zero(); hs];
    for k in 0..hs {
        let (i, f, g, o) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
        c[k] = f * state.c[k] + i * g;
        tanh_c[k] = c[k].tanh();
        h[k] = o * tanh_c[k];
    }

    let cache = LstmCache {
        input,
        input_size: params.input_size(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates,
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Gradients with the same layout as [`LstmLayerParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct LstmGrads<F> {
    pub w_x: Matrix<F>,
    pub w_h: Matrix<F>,
    pub b: Vec<F>,
}

impl<F: Scalar> LstmGrads<F> {
    pub fn zeros_like(params: &LstmLayerParams<F>) -> Self {
        Self {
            w_x: Matrix::zeros(params.w_x.rows(), params.w_x.cols()),
            w_h: Matrix::zeros(params.w_h.rows(), params.w_h.cols()),
            b: vec![F::zero(); params.b.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.w_x.add_assign(&other.w_x);
        self.w_h.add_assign(&other.w_h);
        for (a, &b) in self.b.iter_mut().zip(&other.b) {
            *a = *a + b;
        }
    }
}

/// Output of [`lstm_cell_backward`].
#[derive(Clone, Debug)]
pub struct CellGradients<F> {
    /// `None` for one-hot inputs, whose gradient is never consumed.
    pub grad_x: Option<Vec<F>>,
    pub grad_h_prev: Vec<F>,
    pub grad_c_prev: Vec<F>,
    pub params: LstmGrads<F>,
}

pub fn lstm_cell_backward<F: Scalar>(
    grad_h: &[F],
    grad_c: &[F],
    cache: &LstmCache<F>,
    params: &LstmLayerParams<F>,
) -> Result<CellGradients<F>, NnError> {
    let mut grads = LstmGrads::zeros_like(params);
    let (grad_x, grad_h_prev, grad_c_prev) =
        backward_into(grad_h, grad_c, cache, params, &mut grads, true, false)?;
    Ok(CellGradients {
        grad_x,
        grad_h_prev,
        grad_c_prev,
        params: grads,
    })
}

/// Accumulating backward step. `flip_forget` negates the forget-gate term and
/// exists only so the gradient checker can prove it detects a broken backward.
#[allow(clippy::type_complexity)]
pub(crate) fn backward_into<F: Scalar>(
    grad_h: &[F],
    grad_c: &[F],
    cache: &LstmCache<F>,
    params: &LstmLayerParams<F>,
    grads: &mut LstmGrads<F>,
    want_grad_x: bool,
    flip_forget: bool,
) -> Result<(Option<Vec<F>>, Vec<F>, Vec<F>), NnError> {
    let hs = params.hidden_size();
    if cache.hidden_size() != hs || cache.input_size != params.input_size() {
        return Err(NnError::StaleCache {
            cache_input: cache.input_size,
            cache_hidden: cache.hidden_size(),
            params_input: params.input_size(),
            params_hidden: hs,
        });
    }
    check_len("grad_h", hs, grad_h.len())?;
    check_len("grad_c", hs, grad_c.len())?;
    if grads.w_x.shape() != params.w_x.shape() || grads.w_h.shape() != params.w_h.shape() {
        return Err(NnError::DimensionMismatch {
            what: "gradient accumulator",
            expected: params.w_x.rows(),
            actual: grads.w_x.rows(),
        });
    }

    let one = F::one();
    let g = &cache.gates;
    let mut da = vec![F::zero(); 4 * hs];
    let mut grad_c_prev = vec![F::zero(); hs];
    for k in 0..hs {
        let (i, f, cand, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
        let tc = cache.tanh_c[k];
        let d_o = grad_h[k] * tc;
        let dc = grad_c[k] + grad_h[k] * o * (one - tc * tc);
        let d_i = dc * cand;
        let mut d_f = dc * cache.c_prev[k];
        if flip_forget {
            d_f = -d_f;
        }
        let d_g = dc * i;
        grad_c_prev[k] = dc * f;

        da[k] = d_i * i * (one - i);
        da[hs + k] = d_f * f * (one - f);
        da[2 * hs + k] = d_g * (one - cand * cand);
        da[3 * hs + k] = d_o * o * (one - o);
    }

    for (gb, &d) in grads.b.iter_mut().zip(&da) {
        *gb = *gb + d;
    }
    grads.w_h.add_outer(&da, &cache.h_prev);
    let grad_x = match &cache.input {
        CachedInput::Dense(x) => {
            grads.w_x.add_outer(&da, x);
            want_grad_x.then(|| {
                let mut gx = vec![F::zero(); x.len()];
                params.w_x.matvec_t_acc(&da, &mut gx);
                gx
            })
        }
        CachedInput::OneHot(idx) => {
            grads.w_x.add_to_column(*idx, &da);
            None
        }
    };
    let mut grad_h_prev = vec![F::zero(); hs];
    params.w_h.matvec_t_acc(&da, &mut grad_h_prev);
    Ok((grad_x, grad_h_prev, grad_c_prev))
}
