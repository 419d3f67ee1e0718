//! Starting points for the solvers: vertex component analysis for endmembers
//! and seeded random factor matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::datamodel::{AbundanceMatrix, HyperspectralImage, SignatureMatrix};
use crate::error::{Result, UnmixError};

/// Vertex component analysis. Returns the selected pixel spectra as columns,
/// with any negative (noise) entries clipped to zero.
pub fn vca(image: &HyperspectralImage, endmembers: usize, seed: u64) -> Result<SignatureMatrix> {
    let picks = vca_indices(image, endmembers, seed)?;
    let columns = image.data().select(Axis(1), &picks).mapv(|v| v.max(0.0));
    SignatureMatrix::new(columns)
}

/// Pixel indices picked by [`vca`], in selection order.
pub fn vca_indices(image: &HyperspectralImage, endmembers: usize, seed: u64) -> Result<Vec<usize>> {
    let data = image.data();
    let (bands, pixels) = data.dim();
    let c = endmembers;
    if c == 0 || c > bands.min(pixels) {
        return Err(UnmixError::invalid(format!(
            "endmember count {c} must lie in 1..={}",
            bands.min(pixels)
        )));
    }
    if data.iter().all(|&v| v == 0.0) {
        return Err(UnmixError::degenerate("image is identically zero"));
    }

    if c == 1 {
        return Ok(vec![dominant_projection(data)]);
    }
    let projected = project_to_subspace(data, c)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit_last = Array1::zeros(c);
    unit_last[c - 1] = 1.0;
    let mut basis = vec![unit_last];
    let mut picks = Vec::with_capacity(c);

    for _ in 0..c {
        let mut direction: Array1<f64> = Array1::from_shape_fn(c, |_| rng.sample(StandardNormal));
        for _ in 0..2 {
            for b in &basis {
                let along = b.dot(&direction);
                direction.scaled_add(-along, b);
            }
        }
        let norm = direction.dot(&direction).sqrt();
        if norm <= 1e-12 {
            return Err(UnmixError::degenerate("no direction orthogonal to selected endmembers"));
        }
        direction /= norm;

        let scores = direction.dot(&projected);
        let mut best = 0;
        for (k, s) in scores.iter().enumerate() {
            if s.abs() > scores[best].abs() {
                best = k;
            }
        }
        picks.push(best);
        basis = orthonormal_basis(&projected, &picks)?;
    }
    Ok(picks)
}

/// Pixel with the largest magnitude along the leading singular direction.
fn dominant_projection(data: &Array2<f64>) -> usize {
    let bands = data.nrows();
    let gram = data.dot(&data.t());
    let eig = SymmetricEigen::new(DMatrix::from_fn(bands, bands, |i, j| gram[[i, j]]));
    let top = eig.eigenvalues.imax();
    let axis = Array1::from_iter(eig.eigenvectors.column(top).iter().copied());
    let scores = axis.dot(data);
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if s.abs() > scores[best].abs() {
            best = k;
        }
    }
    best
}

/// Projects mean-removed pixels onto the leading `c - 1` principal axes and
/// appends a constant coordinate, giving a `c x N` matrix.
fn project_to_subspace(data: &Array2<f64>, c: usize) -> Result<Array2<f64>> {
    let (bands, pixels) = data.dim();
    let mean = data.mean_axis(Axis(1)).expect("nonempty image");
    let centered = data - &mean.insert_axis(Axis(1));
    let mut out = Array2::zeros((c, pixels));

    if c > 1 {
        let cov = centered.dot(&centered.t()) / pixels as f64;
        let cov = DMatrix::from_fn(bands, bands, |i, j| cov[[i, j]]);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..bands).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]];
        let weakest = eig.eigenvalues[order[c - 2]];
        if !(top > 0.0) || weakest <= 1e-12 * top {
            return Err(UnmixError::degenerate(format!(
                "data spans fewer than {} affine dimensions",
                c - 1
            )));
        }
        for (row, &idx) in order.iter().take(c - 1).enumerate() {
            let mut axis = Array1::from_iter(eig.eigenvectors.column(idx).iter().copied());
            // fix the eigenvector sign so projections are reproducible
            let pivot = axis
                .iter()
                .copied()
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if pivot < 0.0 {
                axis.mapv_inplace(|v| -v);
            }
            out.row_mut(row).assign(&axis.dot(&centered));
        }
    }

    let radius = out
        .columns()
        .into_iter()
        .map(|col| col.dot(&col).sqrt())
        .fold(0.0f64, f64::max);
    let lift = if radius > 0.0 { radius } else { 1.0 };
    out.row_mut(c - 1).fill(lift);
    Ok(out)
}

fn orthonormal_basis(projected: &Array2<f64>, picks: &[usize]) -> Result<Vec<Array1<f64>>> {
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(picks.len());
    for &k in picks {
        let original = projected.column(k).to_owned();
        let scale = original.dot(&original).sqrt();
        let mut v = original;
        for _ in 0..2 {
            for b in &basis {
                let along = b.dot(&v);
                v.scaled_add(-along, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(UnmixError::degenerate(format!(
                "pixel {k} is affinely dependent on earlier endmembers"
            )));
        }
        basis.push(v / norm);
    }
    Ok(basis)
}

/// Random factors: `A` entries uniform on (0, 1], `S` columns uniform on the simplex.
pub fn random_init(
    bands: usize,
    endmembers: usize,
    pixels: usize,
    seed: u64,
) -> Result<(SignatureMatrix, AbundanceMatrix)> {
    if bands == 0 || endmembers == 0 || pixels == 0 {
        return Err(UnmixError::invalid("random_init dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((bands, endmembers), |_| 1.0 - rng.random::<f64>());
    let mut s = Array2::<f64>::zeros((endmembers, pixels));
    for mut col in s.columns_mut() {
        for v in col.iter_mut() {
            *v = rng.sample(Exp1);
        }
        let total = col.sum();
        col.mapv_inplace(|v| v / total);
    }
    Ok((SignatureMatrix::new(a)?, AbundanceMatrix::new(s)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{validate_abundances, ASC_TOLERANCE};

    #[test]
    fn random_init_is_feasible_and_deterministic() {
        let (a, s) = random_init(5, 3, 40, 11).unwrap();
        assert!(validate_abundances(s.data().view(), ASC_TOLERANCE));
        assert!(a.data().iter().all(|&v| v > 0.0 && v <= 1.0));
        let (a2, s2) = random_init(5, 3, 40, 11).unwrap();
        assert_eq!(a, a2);
        assert_eq!(s, s2);
    }

    #[test]
    fn random_init_single_endmember() {
        let (_, s) = random_init(4, 1, 25, 3).unwrap();
        assert!(s.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn random_init_simplex_is_uniform() {
        let c = 4;
        let draws = 10_000;
        let (_, s) = random_init(1, c, draws, 5).unwrap();
        // Dirichlet(1,..,1) marginal variance (c-1)/(c^2 (c+1))
        let sd = (((c - 1) as f64) / ((c * c * (c + 1)) as f64)).sqrt();
        let se = sd / (draws as f64).sqrt();
        for row in s.data().rows() {
            let mean = row.mean().unwrap();
            assert!((mean - 1.0 / c as f64).abs() < 3.0 * se, "mean {mean}");
        }
    }

    #[test]
    fn vca_rejects_bad_counts() {
        let y = HyperspectralImage::new(Array2::ones((3, 4)), 4, 1).unwrap();
        assert!(matches!(vca(&y, 4, 0), Err(UnmixError::InvalidArgument(_))));
        assert!(vca(&y, 0, 0).is_err());
        let zero = HyperspectralImage::new(Array2::zeros((3, 4)), 4, 1).unwrap();
        assert!(matches!(vca(&zero, 1, 0), Err(UnmixError::DegenerateData(_))));
        // constant pixels span no affine direction
        assert!(matches!(vca(&y, 2, 0), Err(UnmixError::DegenerateData(_))));
    }

    #[test]
    fn vca_single_endmember_on_a_ray() {
        let generator = [0.2, 0.5, 0.9];
        let data = Array2::from_shape_fn((3, 6), |(b, k)| generator[b] * (k + 1) as f64);
        let y = HyperspectralImage::new(data, 6, 1).unwrap();
        let a = vca(&y, 1, 4).unwrap();
        let col = a.column(0);
        let cos = col.dot(&ndarray::arr1(&generator))
            / (col.dot(&col).sqrt() * generator.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!((cos - 1.0).abs() < 1e-12);
    }
}
