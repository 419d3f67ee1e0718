//! Fuzzy c-means partitioning of pixel spectra, run before unmixing so that
//! neighbors only cooperate inside their own cluster.

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datamodel::{ClusterAssignment, HyperspectralImage};
use crate::error::{Result, UnmixError};

#[derive(Debug, Clone, PartialEq)]
pub struct FcmOptions {
    pub clusters: usize,
    /// Fuzzifier exponent `m > 1`.
    pub fuzzifier: f64,
    /// Stop once the largest membership change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FcmOptions {
    fn default() -> Self {
        Self {
            clusters: 6,
            fuzzifier: 2.0,
            tol: 1e-6,
            max_iter: 300,
            seed: 0,
        }
    }
}

/// Runs fuzzy c-means with centers seeded from distinct random pixels.
pub fn fcm(image: &HyperspectralImage, opts: &FcmOptions) -> Result<ClusterAssignment> {
    let n = image.pixels();
    if opts.clusters == 0 || opts.clusters > n {
        return Err(UnmixError::invalid(format!(
            "cluster count {} must lie in 1..={n}",
            opts.clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picks = sample(&mut rng, n, opts.clusters).into_vec();
    let centers = image.data().select(Axis(1), &picks);
    fcm_from_centers(image, centers, opts)
}

/// Runs fuzzy c-means from explicit initial centers (`bands x clusters`).
/// `opts.clusters` and `opts.seed` are ignored.
pub fn fcm_from_centers(
    image: &HyperspectralImage,
    mut centers: Array2<f64>,
    opts: &FcmOptions,
) -> Result<ClusterAssignment> {
    let data = image.data();
    let clusters = centers.ncols();
    if centers.nrows() != image.bands() || clusters == 0 || clusters > image.pixels() {
        return Err(UnmixError::invalid(format!(
            "initial centers have shape {:?}, expected {} bands and 1..={} clusters",
            centers.dim(),
            image.bands(),
            image.pixels()
        )));
    }
    if !(opts.fuzzifier > 1.0 && opts.fuzzifier.is_finite()) {
        return Err(UnmixError::invalid(format!(
            "fuzzifier must exceed 1, got {}",
            opts.fuzzifier
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(UnmixError::invalid("tolerance must be positive"));
    }
    if centers.iter().any(|v| !v.is_finite()) {
        return Err(UnmixError::invalid("initial centers contain non-finite values"));
    }

    let m = opts.fuzzifier;
    let mut distances = squared_distances(data, &centers);
    let mut memberships = memberships_from_distances(&distances, m);
    let mut trace = vec![objective(&memberships, &distances, m)];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        update_centers(data, &memberships, m, &mut centers);
        distances = squared_distances(data, &centers);
        let next = memberships_from_distances(&distances, m);
        trace.push(objective(&next, &distances, m));
        let change = next
            .iter()
            .zip(memberships.iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        memberships = next;
        if change < opts.tol {
            break;
        }
    }

    let labels = hard_labels(&memberships);
    Ok(ClusterAssignment {
        labels,
        memberships,
        centers,
        objective_trace: trace,
        iterations,
    })
}

/// FCM objective `sum_k sum_c u_ck^m |y_k - v_c|^2`.
pub fn fcm_objective(
    image: &HyperspectralImage,
    memberships: &Array2<f64>,
    centers: &Array2<f64>,
    fuzzifier: f64,
) -> f64 {
    objective(memberships, &squared_distances(image.data(), centers), fuzzifier)
}

fn objective(memberships: &Array2<f64>, distances: &Array2<f64>, m: f64) -> f64 {
    memberships
        .iter()
        .zip(distances.iter())
        .map(|(u, d)| u.powf(m) * d)
        .sum()
}

/// `clusters x pixels` squared Euclidean distances.
fn squared_distances(data: &Array2<f64>, centers: &Array2<f64>) -> Array2<f64> {
    let clusters = centers.ncols();
    let columns: Vec<Vec<f64>> = (0..data.ncols())
        .into_par_iter()
        .map(|k| {
            let y = data.column(k);
            (0..clusters)
                .map(|c| {
                    y.iter()
                        .zip(centers.column(c))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut out = Array2::zeros((clusters, data.ncols()));
    for (k, col) in columns.into_iter().enumerate() {
        out.column_mut(k).assign(&Array1::from(col));
    }
    out
}

fn memberships_from_distances(distances: &Array2<f64>, m: f64) -> Array2<f64> {
    let exponent = 1.0 / (m - 1.0);
    let mut out = Array2::zeros(distances.raw_dim());
    for (dist, mut u) in distances.columns().into_iter().zip(out.columns_mut()) {
        if let Some(hit) = dist.iter().position(|&d| d == 0.0) {
            u[hit] = 1.0;
            continue;
        }
        let nearest = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for (ui, &d) in u.iter_mut().zip(dist.iter()) {
            *ui = (nearest / d).powf(exponent);
            total += *ui;
        }
        u.mapv_inplace(|v| v / total);
    }
    out
}

fn update_centers(data: &Array2<f64>, memberships: &Array2<f64>, m: f64, centers: &mut Array2<f64>) {
    let weights = memberships.mapv(|u| u.powf(m));
    let numer = data.dot(&weights.t());
    for (c, total) in weights.sum_axis(Axis(1)).iter().enumerate() {
        // a cluster that lost every pixel keeps its previous center
        if *total > 0.0 {
            centers.column_mut(c).assign(&(&numer.column(c) / *total));
        }
    }
}

/// Argmax of each membership column; ties go to the lowest cluster index.
fn hard_labels(memberships: &Array2<f64>) -> Vec<usize> {
    memberships
        .columns()
        .into_iter()
        .map(|u| {
            let mut best = 0;
            for (c, &v) in u.iter().enumerate() {
                if v > u[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
