//! Ingredients of the per-pixel cost: the sparsity weight, spectral
//! similarity and neighbor weights, the simplex projection, and the guarded
//! `L_q` sparsity gradient.

use ndarray::{ArrayView1, Zip};
use rayon::prelude::*;

use crate::datamodel::{HyperspectralImage, NeighborhoodSystem};
use crate::error::{Result, UnmixError};

/// Offset added inside `|s|` so the `L_q` gradient stays finite at zero abundances.
pub const SPARSITY_GUARD: f64 = 1e-12;

/// Sparsity weight estimated from the sparseness of each band row of `Y`.
///
/// `lambda = (1/sqrt(L)) * sum_i (sqrt(N) - |y_i|_1 / |y_i|_2) / sqrt(N - 1)`
/// where `y_i` is band row `i`. Returns 0 for single-pixel images.
pub fn estimate_lambda(image: &HyperspectralImage) -> Result<f64> {
    let data = image.data();
    let (bands, pixels) = data.dim();
    let mut rows = Vec::with_capacity(bands);
    for (i, row) in data.rows().into_iter().enumerate() {
        let l1: f64 = row.iter().map(|v| v.abs()).sum();
        let l2 = row.dot(&row).sqrt();
        if l2 == 0.0 {
            return Err(UnmixError::invalid(format!("band row {i} is all zeros")));
        }
        rows.push(l1 / l2);
    }
    if pixels == 1 {
        return Ok(0.0);
    }
    let sqrt_n = (pixels as f64).sqrt();
    let denom = ((pixels - 1) as f64).sqrt();
    let total: f64 = rows.iter().map(|ratio| (sqrt_n - ratio) / denom).sum();
    Ok((total / (bands as f64).sqrt()).max(0.0))
}

/// Cosine of the angle between two spectra.
pub fn spectral_angle_cos(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(UnmixError::invalid(format!(
            "spectra have different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(UnmixError::invalid("spectral angle of a zero vector"));
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Attaches normalized spectral-similarity weights to every edge of `nbhd`.
///
/// Similarities are clipped at zero so the weights stay nonnegative; for
/// nonnegative spectra the clip never fires.
pub fn neighbor_weights(
    image: &HyperspectralImage,
    nbhd: NeighborhoodSystem,
) -> Result<NeighborhoodSystem> {
    if nbhd.len() != image.pixels() {
        return Err(UnmixError::invalid(format!(
            "neighborhood has {} nodes, image has {} pixels",
            nbhd.len(),
            image.pixels()
        )));
    }
    let data = image.data();
    let norms: Vec<f64> = data.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    if let Some(k) = norms.iter().position(|&n| n == 0.0) {
        return Err(UnmixError::invalid(format!("pixel {k} has a zero spectrum")));
    }

    let weights = (0..nbhd.len())
        .into_par_iter()
        .map(|k| {
            let yk = data.column(k);
            let theta: Vec<f64> = nbhd
                .neighbors(k)
                .iter()
                .map(|&l| (yk.dot(&data.column(l)) / (norms[k] * norms[l])).clamp(0.0, 1.0))
                .collect();
            if theta.is_empty() {
                return Ok(theta);
            }
            let total: f64 = theta.iter().sum();
            if total <= 0.0 {
                return Err(UnmixError::degenerate(format!(
                    "pixel {k} has zero similarity to all of its neighbors"
                )));
            }
            Ok(theta.into_iter().map(|t| t / total).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(nbhd.with_weights(weights))
}

/// Euclidean projection onto the unit simplex `{x >= 0, sum x = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    let mut scratch = Vec::with_capacity(v.len());
    project_simplex_in_place(&mut out, &mut scratch);
    out
}

/// In-place variant of [`project_simplex`]; `scratch` is reused between calls.
pub fn project_simplex_in_place(v: &mut [f64], scratch: &mut Vec<f64>) {
    let c = v.len();
    if c == 0 {
        return;
    }
    // points already on the simplex are returned bit-for-bit, which makes the
    // projection exactly idempotent
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 16.0 * c as f64 * f64::EPSILON {
        return;
    }

    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - tau).max(0.0);
    }
}

/// Guarded `L_q` norm `(sum (|s_i| + guard)^q)^(1/q)`.
pub fn guarded_lq_norm(s: ArrayView1<'_, f64>, q: f64, guard: f64) -> f64 {
    s.iter()
        .map(|x| (x.abs() + guard).powf(q))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Gradient of the guarded `L_q` norm as used in the abundance step:
/// `g_j = s_j (|s_j| + guard)^(q-2) / (sum (|s_i| + guard)^q)^((q-1)/q)`.
pub fn sparsity_gradient(s: ArrayView1<'_, f64>, q: f64, guard: f64) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    sparsity_gradient_into(s, q, guard, &mut out);
    out
}

pub(crate) fn sparsity_gradient_into(s: ArrayView1<'_, f64>, q: f64, guard: f64, out: &mut [f64]) {
    let power_sum: f64 = s.iter().map(|x| (x.abs() + guard).powf(q)).sum();
    let denom = power_sum.powf((q - 1.0) / q);
    Zip::from(s).and(out).for_each(|&x, g| {
        *g = x * (x.abs() + guard).powf(q - 2.0) / denom;
    });
}
