use rand::Rng;

use super::{NnError, Scalar};

/// Per-entry multipliers for inverted dropout: `0` for dropped units,
/// `1/(1-rate)` for survivors.
pub fn dropout_mask<F: Scalar, R: Rng + ?Sized>(
    len: usize,
    rate: f64,
    rng: &mut R,
) -> Result<Vec<F>, NnError> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![F::one(); len]);
    }
    let keep = F::of(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep })
        .collect())
}

pub fn dropout<F: Scalar, R: Rng + ?Sized>(
    h: &[F],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<Vec<F>, NnError> {
    check_rate(rate)?;
    if !training {
        return Ok(h.to_vec());
    }
    let mask = dropout_mask::<F, _>(h.len(), rate, rng)?;
    Ok(h.iter().zip(&mask).map(|(&a, &m)| a * m).collect())
}

pub(crate) fn check_rate(rate: f64) -> Result<(), NnError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(NnError::InvalidParameter(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )))
    }
}
