//! Diversity-reweighted sampling and autoregressive generation.
//!
//! `reweight` raises each probability to `1/alpha` and renormalizes:
//! `alpha < 1` sharpens the distribution toward its mode, `alpha > 1`
//! flattens it. An [`AlphaSchedule`] assigns a different `alpha` to ranges
//! of generated-token indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{LstmModel, LstmState, NnError, Scalar};
use crate::tokenizer::Vocab;

/// Largest `alpha` accepted in a schedule.
pub const MAX_ALPHA: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("alpha must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("alpha {0} outside the accepted range (0, {MAX_ALPHA}]")]
    AlphaOutOfRange(f64),
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(&'static str),
    #[error("invalid alpha region {start}..{end}: {reason}")]
    InvalidRegion {
        start: usize,
        end: usize,
        reason: &'static str,
    },
    #[error("seed must contain at least one token")]
    EmptySeed,
    #[error("seed token {token:?} at position {position} is not in the vocabulary")]
    OutOfVocabulary { token: String, position: usize },
    #[error("token index {index} out of range for vocabulary of {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Returns `p^(1/alpha)` normalized to sum 1. Zero entries stay zero.
pub fn reweight(probs: &[f64], alpha: f64) -> Result<Vec<f64>, SampleError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SampleError::InvalidAlpha(alpha));
    }
    if probs.is_empty() {
        return Err(SampleError::InvalidDistribution("empty"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(SampleError::InvalidDistribution("entries must be finite and >= 0"));
    }
    let logs: Vec<Option<f64>> = probs
        .iter()
        .map(|&p| (p > 0.0).then(|| p.ln() / alpha))
        .collect();
    let max = logs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(SampleError::InvalidDistribution("all entries are zero"));
    }
    let mut out: Vec<f64> = logs
        .iter()
        .map(|l| l.map_or(0.0, |l| (l - max).exp()))
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// Picks the first index whose cumulative mass exceeds `u` in `[0, 1)`.
/// Falls back to the last non-zero entry when rounding leaves the total
/// just below `u`.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaRegion {
    pub start: usize,
    pub end: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub default_alpha: f64,
    #[serde(default)]
    pub regions: Vec<AlphaRegion>,
}

fn check_alpha(alpha: f64) -> Result<(), SampleError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        Err(SampleError::InvalidAlpha(alpha))
    } else if alpha > MAX_ALPHA {
        Err(SampleError::AlphaOutOfRange(alpha))
    } else {
        Ok(())
    }
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Result<Self, SampleError> {
        Self::new(alpha, Vec::new())
    }

    pub fn new(default_alpha: f64, regions: Vec<AlphaRegion>) -> Result<Self, SampleError> {
        let s = AlphaSchedule {
            default_alpha,
            regions,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        check_alpha(self.default_alpha)?;
        let mut prev_end = 0;
        for (k, r) in self.regions.iter().enumerate() {
            let bad = |reason| SampleError::InvalidRegion {
                start: r.start,
                end: r.end,
                reason,
            };
            if r.start >= r.end {
                return Err(bad("start must be below end"));
            }
            if k > 0 && r.start < prev_end {
                return Err(bad("regions must be sorted and non-overlapping"));
            }
            check_alpha(r.alpha)?;
            prev_end = r.end;
        }
        Ok(())
    }

    /// The alpha used for generated-token index `i`.
    pub fn alpha_at(&self, i: usize) -> f64 {
        self.regions
            .iter()
            .find(|r| r.start <= i && i < r.end)
            .map_or(self.default_alpha, |r| r.alpha)
    }
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule {
            default_alpha: 1.0,
            regions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub seed_tokens: Vec<String>,
    pub length: usize,
    pub schedule: AlphaSchedule,
    pub rng_seed: u64,
}

/// Anything that maps a token history to a next-token distribution.
pub trait LanguageModel {
    type State;

    fn vocab_size(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// Feeds `token`, advances `state`, and returns the next-token distribution.
    fn step(&self, state: &mut Self::State, token: usize) -> Result<Vec<f64>, SampleError>;
}

impl<F: Scalar> LanguageModel for LstmModel<F> {
    type State = Vec<LstmState<F>>;

    fn vocab_size(&self) -> usize {
        LstmModel::vocab_size(self)
    }

    fn initial_state(&self) -> Self::State {
        LstmModel::initial_state(self)
    }

    fn step(&self, state: &mut Self::State, token: usize) -> Result<Vec<f64>, SampleError> {
        Ok(LstmModel::step(self, state, token)?
            .into_iter()
            .map(Scalar::as_f64)
            .collect())
    }
}

/// Feeds `last`, reweights the resulting distribution by `alpha` and draws
/// one token with a single uniform draw.
pub fn sample_next<M: LanguageModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    state: &mut M::State,
    last: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<usize, SampleError> {
    let probs = model.step(state, last)?;
    let p = reweight(&probs, alpha)?;
    Ok(inverse_cdf(&p, rng.random::<f64>()))
}

/// Warms the state on `seed[..n-1]` without sampling, then samples `length`
/// tokens. Generated index `i` uses `schedule.alpha_at(i)`.
pub fn generate_ids<M: LanguageModel + ?Sized>(
    model: &M,
    seed: &[usize],
    length: usize,
    schedule: &AlphaSchedule,
    rng_seed: u64,
) -> Result<Vec<usize>, SampleError> {
    schedule.validate()?;
    let (&last, warmup) = seed.split_last().ok_or(SampleError::EmptySeed)?;
    let v = model.vocab_size();
    if let Some(&index) = seed.iter().find(|&&t| t >= v) {
        return Err(SampleError::IndexOutOfRange { index, size: v });
    }
    let mut state = model.initial_state();
    for &t in warmup {
        model.step(&mut state, t)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(length);
    let mut prev = last;
    for i in 0..length {
        prev = sample_next(model, &mut state, prev, schedule.alpha_at(i), &mut rng)?;
        out.push(prev);
    }
    Ok(out)
}

/// Maps seed token strings to vocabulary indices.
pub fn seed_ids<S: AsRef<str>>(vocab: &Vocab, seed: &[S]) -> Result<Vec<usize>, SampleError> {
    seed.iter()
        .enumerate()
        .map(|(position, t)| {
            vocab
                .index_of(t.as_ref())
                .ok_or_else(|| SampleError::OutOfVocabulary {
                    token: t.as_ref().to_string(),
                    position,
                })
        })
        .collect()
}

/// Runs a request against a trained model and returns the generated tokens.
pub fn generate<F: Scalar>(
    model: &LstmModel<F>,
    request: &GenerationRequest,
) -> Result<Vec<String>, SampleError> {
    let seed = seed_ids(model.vocab(), &request.seed_tokens)?;
    let ids = generate_ids(model, &seed, request.length, &request.schedule, request.rng_seed)?;
    Ok(ids
        .into_iter()
        .map(|i| model.vocab().token(i).expect("sampled index in vocab").to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn reweight_reference_values() {
        let p = [0.5, 0.3, 0.2];
        assert!(close(&reweight(&p, 1.0).unwrap(), &p, 1e-12));
        assert!(close(&reweight(&[0.25; 4], 0.3).unwrap(), &[0.25; 4], 1e-12));

        let out = reweight(&[0.8, 0.2], 0.5).unwrap();
        // 0.64 / 0.68 and 0.04 / 0.68
        assert!(close(&out, &[0.64 / 0.68, 0.04 / 0.68], 1e-12));
        assert!((out[0] - 0.941176).abs() < 1e-6 && (out[1] - 0.058824).abs() < 1e-6);
    }

    #[test]
    fn reweight_keeps_zeros_and_handles_extremes() {
        let out = reweight(&[0.0, 0.7, 0.3, 0.0], 0.01).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[3], 0.0);
        assert!((out[1] - 1.0).abs() < 1e-12);
        let out = reweight(&[1e-300, 1.0 - 1e-300], 0.001).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn reweight_errors() {
        assert!(matches!(reweight(&[0.5, 0.5], 0.0), Err(SampleError::InvalidAlpha(_))));
        assert!(matches!(reweight(&[0.5, 0.5], -1.0), Err(SampleError::InvalidAlpha(_))));
        assert!(matches!(reweight(&[0.5, 0.5], f64::NAN), Err(SampleError::InvalidAlpha(_))));
        assert!(matches!(reweight(&[0.0, 0.0], 1.0), Err(SampleError::InvalidDistribution(_))));
        assert!(matches!(reweight(&[], 1.0), Err(SampleError::InvalidDistribution(_))));
        assert!(matches!(reweight(&[0.5, -0.1], 1.0), Err(SampleError::InvalidDistribution(_))));
    }

    fn distribution() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 1e-6f64..1.0], 2..12).prop_filter_map(
            "non-zero",
            |w| {
                let s: f64 = w.iter().sum();
                (s > 0.0).then(|| w.iter().map(|x| x / s).collect())
            },
        )
    }

    proptest! {
        #[test]
        fn reweight_invariants(p in distribution(), a in 0.05f64..10.0, b in 0.05f64..10.0) {
            let q = reweight(&p, a).unwrap();
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (x, y) in p.iter().zip(&q) {
                prop_assert_eq!(*x == 0.0, *y == 0.0);
            }
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
            let twice = reweight(&q, b).unwrap();
            let once = reweight(&p, a * b).unwrap();
            prop_assert!(close(&twice, &once, 1e-9));
        }
    }

    #[test]
    fn inverse_cdf_boundaries() {
        let p = [0.25, 0.0, 0.75];
        assert_eq!(inverse_cdf(&p, 0.0), 0);
        assert_eq!(inverse_cdf(&p, 0.2499), 0);
        assert_eq!(inverse_cdf(&p, 0.25), 2);
        assert_eq!(inverse_cdf(&[0.3, 0.3, 0.0], 0.999_999_999), 1);
    }

    #[test]
    fn schedule_validation() {
        assert!(AlphaSchedule::constant(1.0).is_ok());
        assert!(AlphaSchedule::constant(10.0).is_ok());
        assert!(matches!(AlphaSchedule::constant(10.5), Err(SampleError::AlphaOutOfRange(_))));
        assert!(matches!(AlphaSchedule::constant(0.0), Err(SampleError::InvalidAlpha(_))));
        let r = |start, end, alpha| AlphaRegion { start, end, alpha };
        assert!(AlphaSchedule::new(0.5, vec![r(0, 4, 1.0), r(4, 8, 2.0)]).is_ok());
        assert!(AlphaSchedule::new(0.5, vec![r(4, 4, 1.0)]).is_err());
        assert!(AlphaSchedule::new(0.5, vec![r(0, 5, 1.0), r(4, 8, 1.0)]).is_err());
        assert!(AlphaSchedule::new(0.5, vec![r(4, 8, 1.0), r(0, 2, 1.0)]).is_err());
        assert!(AlphaSchedule::new(0.5, vec![r(0, 2, -1.0)]).is_err());

        let s = AlphaSchedule::new(0.5, vec![r(16, 32, 1.5)]).unwrap();
        assert_eq!(s.alpha_at(15), 0.5);
        assert_eq!(s.alpha_at(16), 1.5);
        assert_eq!(s.alpha_at(31), 1.5);
        assert_eq!(s.alpha_at(32), 0.5);
    }

    /// Emits a fixed distribution regardless of history and counts steps.
    struct Probe(Vec<f64>);

    impl LanguageModel for Probe {
        type State = usize;
        fn vocab_size(&self) -> usize {
            self.0.len()
        }
        fn initial_state(&self) -> usize {
            0
        }
        fn step(&self, state: &mut usize, token: usize) -> Result<Vec<f64>, SampleError> {
            assert!(token < self.0.len());
            *state += 1;
            Ok(self.0.clone())
        }
    }

    #[test]
    fn sample_next_statistics() {
        let probe = Probe(vec![0.45, 0.35, 0.2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = 0;
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| sample_next(&probe, &mut state, 0, 0.01, &mut rng).unwrap() == 0)
            .count();
        assert!(hits as f64 / n as f64 >= 0.999);
        assert_eq!(state, n);

        let alpha = 1.7;
        let target = reweight(&probe.0, alpha).unwrap();
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_next(&probe, &mut state, 0, alpha, &mut rng).unwrap()] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&target)
            .map(|(c, p)| (*c as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn sample_next_is_deterministic() {
        let probe = Probe(vec![0.2, 0.3, 0.5]);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            sample_next(&probe, &mut 0, 1, 1.0, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn generate_lengths_and_warmup() {
        let probe = Probe(vec![0.5, 0.5]);
        let s = AlphaSchedule::default();
        assert!(generate_ids(&probe, &[0], 0, &s, 1).unwrap().is_empty());
        assert_eq!(generate_ids(&probe, &[0, 1, 1], 37, &s, 1).unwrap().len(), 37);
        assert!(matches!(generate_ids(&probe, &[], 3, &s, 1), Err(SampleError::EmptySeed)));
        assert!(matches!(
            generate_ids(&probe, &[0, 2], 3, &s, 1),
            Err(SampleError::IndexOutOfRange { index: 2, size: 2 })
        ));
        assert_eq!(
            generate_ids(&probe, &[1], 50, &s, 9).unwrap(),
            generate_ids(&probe, &[1], 50, &s, 9).unwrap()
        );
    }

    #[test]
    fn schedule_regions_use_their_alpha() {
        // p = (0.9, 0.1): alpha 0.5 gives P(1) = 0.01/0.82, alpha 1.5 gives
        // P(1) = 0.1^(2/3) / (0.9^(2/3) + 0.1^(2/3)).
        let probe = Probe(vec![0.9, 0.1]);
        let schedule = AlphaSchedule::new(
            0.5,
            vec![AlphaRegion {
                start: 16,
                end: 32,
                alpha: 1.5,
            }],
        )
        .unwrap();
        let runs = 4000;
        let mut ones = vec![0usize; 48];
        for seed in 0..runs {
            let out = generate_ids(&probe, &[0], 48, &schedule, seed).unwrap();
            for (i, t) in out.iter().enumerate() {
                ones[i] += *t;
            }
        }
        let low = reweight(&probe.0, 0.5).unwrap()[1];
        let high = reweight(&probe.0, 1.5).unwrap()[1];
        let mean = |r: std::ops::Range<usize>| {
            let n = r.len() as f64 * runs as f64;
            ones[r].iter().sum::<usize>() as f64 / n
        };
        assert!((mean(0..16) - low).abs() < 0.005, "{} vs {low}", mean(0..16));
        assert!((mean(16..32) - high).abs() < 0.01, "{} vs {high}", mean(16..32));
        assert!((mean(32..48) - low).abs() < 0.005);
    }
}
