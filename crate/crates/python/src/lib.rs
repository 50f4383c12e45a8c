//! Python bindings: corpus encoding, training, checkpoints and sampling.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use textlstm::chord;
use textlstm::drum;
use textlstm::nn::{builtin_grad_check, LstmModel, ModelHyper};
use textlstm::sampler::{self, AlphaRegion, AlphaSchedule, GenerationRequest};
use textlstm::tokenizer::{build_vocab as core_build_vocab, normalize_whitespace, Mode};
use textlstm::trainer::{self, CheckpointError, TrainConfig, Trainer};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn checkpoint_err(e: CheckpointError) -> PyErr {
    match e {
        CheckpointError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(value_err)
}

/// Reweights a distribution by `p ** (1 / alpha)` and renormalizes.
#[pyfunction]
fn reweight(probs: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
    sampler::reweight(&probs, alpha).map_err(value_err)
}

/// Sorted unique tokens of `corpus` in "word" or "char" mode.
#[pyfunction]
#[pyo3(signature = (corpus, mode = "word"))]
fn build_vocab(corpus: &str, mode: &str) -> PyResult<Vec<String>> {
    let vocab = core_build_vocab(corpus, parse_mode(mode)?).map_err(value_err)?;
    Ok(vocab.tokens().to_vec())
}

/// Reads a lab chord file, transposes it to C and expands it to one token per
/// quarter note between `_START_` and `_END_`.
#[pyfunction]
fn encode_lab(text: &str) -> PyResult<String> {
    let score = chord::read_lab(text).map_err(value_err)?;
    chord::expand_to_text(&chord::transpose_score(&score)).map_err(value_err)
}

/// Bar-grouped lead sheet with repeated chords merged.
#[pyfunction]
fn decode_progression(tokens: Vec<String>) -> String {
    chord::decode_progression(&tokens)
}

/// Quantizes a Standard MIDI File to drum-word corpus text.
#[pyfunction]
fn encode_midi(data: &[u8]) -> PyResult<String> {
    let events = drum::read_smf(data).map_err(value_err)?;
    Ok(drum::encode_words(&drum::quantize(&events)))
}

/// Renders drum tokens as Standard MIDI File bytes.
#[pyfunction]
#[pyo3(signature = (tokens, tempo = 120.0))]
fn render_midi<'py>(py: Python<'py>, tokens: Vec<String>, tempo: f64) -> PyResult<Bound<'py, PyBytes>> {
    let decoded = drum::decode_words(&tokens, tempo).map_err(value_err)?;
    let bytes = drum::write_smf(&decoded.events, tempo).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Share of sounding drum words that contain a tom or crash hit.
#[pyfunction]
fn fill_fraction(tokens: Vec<String>) -> f64 {
    drum::fill_fraction(&tokens)
}

/// Chord corpus statistics as a text report.
#[pyfunction]
fn corpus_report(text: &str) -> PyResult<String> {
    Ok(chord::corpus_stats(text).map_err(value_err)?.report())
}

/// Largest relative error between analytic and finite-difference gradients
/// of a tiny random model.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn grad_check(py: Python<'_>, seed: u64) -> PyResult<f64> {
    py.detach(|| builtin_grad_check(seed))
        .map(|r| r.max_rel_error)
        .map_err(value_err)
}

/// A trained two-layer LSTM language model.
#[pyclass(name = "Model", module = "pytextlstm", frozen)]
struct PyModel {
    inner: LstmModel<f32>,
    losses: Vec<f64>,
}

#[pymethods]
impl PyModel {
    /// Trains a model on `corpus` and returns it; per-epoch losses are in
    /// `losses`.
    #[staticmethod]
    #[pyo3(signature = (
        corpus, mode = "word", hidden = 512, layers = 2, dropout = 0.2,
        seq_len = 64, batch = 32, epochs = 25, seed = 0, lr = 0.001
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        corpus: &str,
        mode: &str,
        hidden: usize,
        layers: usize,
        dropout: f64,
        seq_len: usize,
        batch: usize,
        epochs: usize,
        seed: u64,
        lr: f64,
    ) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        let corpus = normalize_whitespace(corpus);
        let mut hyper = ModelHyper {
            hidden_size: hidden,
            num_layers: layers,
            dropout,
            ..ModelHyper::default()
        };
        hyper.adam.lr = lr;
        let config = TrainConfig {
            seq_len,
            batch_size: batch,
            epochs,
            seed,
            checkpoint_every: None,
        };
        py.detach(move || {
            let vocab = core_build_vocab(&corpus, mode).map_err(|e| e.to_string())?;
            let ids = vocab.encode_ids(&corpus).map_err(|e| e.to_string())?;
            let mut t = Trainer::<f32>::new(vocab, hyper, config).map_err(|e| e.to_string())?;
            let losses = t.fit(&ids, |_, _| Ok(())).map_err(|e| e.to_string())?;
            Ok(PyModel {
                inner: t.into_model(),
                losses,
            })
        })
        .map_err(|e: String| PyValueError::new_err(e))
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let inner = trainer::load_checkpoint(&path).map_err(checkpoint_err)?;
        Ok(PyModel { inner, losses: Vec::new() })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        let inner = trainer::from_bytes(data).map_err(checkpoint_err)?;
        Ok(PyModel { inner, losses: Vec::new() })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        trainer::save_checkpoint(&self.inner, &path).map_err(checkpoint_err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &trainer::to_bytes(&self.inner))
    }

    /// Samples `length` tokens after warming up on `seed_tokens`. `regions`
    /// holds `(start, end, alpha)` overrides over generated-token indices.
    #[pyo3(signature = (seed_tokens, length, alpha = 1.0, regions = None, seed = 0))]
    fn generate(
        &self,
        py: Python<'_>,
        seed_tokens: Vec<String>,
        length: usize,
        alpha: f64,
        regions: Option<Vec<(usize, usize, f64)>>,
        seed: u64,
    ) -> PyResult<Vec<String>> {
        let regions = regions
            .unwrap_or_default()
            .into_iter()
            .map(|(start, end, alpha)| AlphaRegion { start, end, alpha })
            .collect();
        let request = GenerationRequest {
            seed_tokens,
            length,
            schedule: AlphaSchedule::new(alpha, regions).map_err(value_err)?,
            rng_seed: seed,
        };
        py.detach(|| sampler::generate(&self.inner, &request)).map_err(value_err)
    }

    /// Next-token distribution after feeding `tokens` from a zero state.
    fn next_distribution(&self, tokens: Vec<String>) -> PyResult<Vec<f64>> {
        let ids = sampler::seed_ids(self.inner.vocab(), &tokens).map_err(value_err)?;
        let mut state = self.inner.initial_state();
        let mut probs = Vec::new();
        for id in ids {
            probs = self.inner.step(&mut state, id).map_err(value_err)?;
        }
        if probs.is_empty() {
            return Err(PyValueError::new_err("tokens must not be empty"));
        }
        Ok(probs.into_iter().map(f64::from).collect())
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        self.inner.vocab().tokens().to_vec()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.vocab().mode().to_string()
    }

    #[getter]
    fn domain(&self) -> String {
        self.inner.domain().to_string()
    }

    #[getter]
    fn hidden_size(&self) -> usize {
        self.inner.hyper().hidden_size
    }

    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(domain={}, mode={}, vocab={}, hidden={}x{})",
            self.inner.domain(),
            self.inner.vocab().mode(),
            self.inner.vocab_size(),
            self.inner.hyper().hidden_size,
            self.inner.hyper().num_layers
        )
    }
}

#[pymodule]
fn pytextlstm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(reweight, m)?)?;
    m.add_function(wrap_pyfunction!(build_vocab, m)?)?;
    m.add_function(wrap_pyfunction!(encode_lab, m)?)?;
    m.add_function(wrap_pyfunction!(decode_progression, m)?)?;
    m.add_function(wrap_pyfunction!(encode_midi, m)?)?;
    m.add_function(wrap_pyfunction!(render_midi, m)?)?;
    m.add_function(wrap_pyfunction!(fill_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_report, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    Ok(())
}
