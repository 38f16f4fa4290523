use rand::Rng;

use crate::channels::make_binary_rr;
use crate::error::{Error, Result};
use super::sparse::rr_invert;

/// Per-coordinate one-bit mechanism for the Gaussian location model. Node k
/// handles coordinate k mod d: it clips its value to [−c, c], rounds it to a
/// bit with P(1) = (x + c)/(2c), and releases the bit with binary randomized
/// response. The estimate is unbiased for the mean of the clipped variable.
pub fn gaussian_mean_estimate<R: Rng + ?Sized>(samples: &[Vec<f64>], clip: f64, eps: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(clip > 0.0) || !clip.is_finite() {
        return Err(Error::invalid(format!("clipping range must be positive, got {clip}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("ε must be > 0, got {eps}")));
    }
    let d = samples.first().map(Vec::len).ok_or(Error::EmptyReports)?;
    if d == 0 || samples.len() < d {
        return Err(Error::invalid(format!("need at least d = {d} samples, got {}", samples.len())));
    }
    let rr = make_binary_rr(eps.min(700.0))?;
    let mut ones = vec![0u64; d];
    let mut seen = vec![0u64; d];
    for (k, x) in samples.iter().enumerate() {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        let j = k % d;
        let v = x[j].clamp(-clip, clip);
        let bit = (rng.random::<f64>() < (v + clip) / (2.0 * clip)) as usize;
        ones[j] += rr.sample(bit, rng) as u64;
        seen[j] += 1;
    }
    (0..d).map(|j| Ok(clip * (2.0 * rr_invert(ones[j], seen[j], eps.min(700.0))? - 1.0))).collect()
}
