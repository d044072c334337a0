use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Deterministic stand-in for a face recognition model.
///
/// The byte histogram of the input (256 bins, frequencies) is multiplied by
/// a Gaussian projection drawn from `seed`, then scaled to unit norm. Inputs
/// that differ in a few bytes land close together.
pub fn toy_extract<T: Scalar>(image_bytes: &[u8], dim: usize, seed: u64) -> Result<Vec<T>> {
    if image_bytes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dim == 0 {
        return Err(Error::DimensionZero);
    }
    let mut hist = [0f64; 256];
    for &b in image_bytes {
        hist[b as usize] += 1.0;
    }
    let len = image_bytes.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0f64; dim];
    for &h in &hist {
        let f = h / len;
        for o in out.iter_mut() {
            let w: f64 = StandardNormal.sample(&mut rng);
            *o += f * w;
        }
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < super::ZERO_NORM {
        return Err(Error::ZeroVector(0));
    }
    Ok(out
        .into_iter()
        .map(|x| T::from_f64(x / norm).expect("finite"))
        .collect())
}
