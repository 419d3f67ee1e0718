//! Solvers: the clustered, sparsity-constrained diffusion update for
//! abundances, multiplicative updates for signatures, and the baselines
//! obtained by switching individual terms off.
//!
//! Every abundance sweep is synchronous: all pixels read the previous
//! iterate, so a sweep can run in parallel and still be bit-reproducible.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    build_neighborhood, AbundanceMatrix, HyperspectralImage, NeighborhoodSystem, SignatureMatrix,
    UnmixingConfig,
};
use crate::error::{Result, UnmixError};
use crate::regularizers::{
    estimate_lambda, guarded_lq_norm, neighbor_weights, project_simplex_in_place,
    sparsity_gradient_into, SPARSITY_GUARD,
};

/// Added to the denominators of the multiplicative updates.
pub const MULTIPLICATIVE_DELTA: f64 = 1e-12;

/// Lower bound applied to initial signatures before multiplicative updates;
/// an exact zero can never grow back under a multiplicative rule.
pub const SIGNATURE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmVariant {
    /// Plain multiplicative NMF on both factors.
    #[serde(rename = "nmf")]
    Nmf,
    /// Projected abundance updates with the `L_q` sparsity term only.
    #[serde(rename = "lq_nmf")]
    LqNmf,
    /// Neighborhood cooperation over all 8 neighbors, no sparsity.
    #[serde(rename = "distributed")]
    Distributed,
    /// Neighborhood cooperation plus sparsity, no cluster mask.
    #[serde(rename = "sparse_distributed")]
    SparseDistributed,
    /// Cooperation restricted to same-cluster neighbors, plus sparsity.
    #[serde(rename = "proposed", alias = "clustered_sparse_distributed")]
    ClusteredSparseDistributed,
    /// Fully constrained least squares against fixed signatures.
    #[serde(rename = "fcls")]
    Fcls,
}

impl AlgorithmVariant {
    pub const ALL: [AlgorithmVariant; 6] = [
        AlgorithmVariant::Nmf,
        AlgorithmVariant::LqNmf,
        AlgorithmVariant::Distributed,
        AlgorithmVariant::SparseDistributed,
        AlgorithmVariant::ClusteredSparseDistributed,
        AlgorithmVariant::Fcls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmVariant::Nmf => "nmf",
            AlgorithmVariant::LqNmf => "lq_nmf",
            AlgorithmVariant::Distributed => "distributed",
            AlgorithmVariant::SparseDistributed => "sparse_distributed",
            AlgorithmVariant::ClusteredSparseDistributed => "proposed",
            AlgorithmVariant::Fcls => "fcls",
        }
    }

    pub fn uses_clusters(self) -> bool {
        self == AlgorithmVariant::ClusteredSparseDistributed
    }

    pub fn uses_neighbors(self) -> bool {
        matches!(
            self,
            AlgorithmVariant::Distributed
                | AlgorithmVariant::SparseDistributed
                | AlgorithmVariant::ClusteredSparseDistributed
        )
    }

    pub fn uses_sparsity(self) -> bool {
        matches!(
            self,
            AlgorithmVariant::LqNmf
                | AlgorithmVariant::SparseDistributed
                | AlgorithmVariant::ClusteredSparseDistributed
        )
    }

    pub fn updates_signatures(self) -> bool {
        self != AlgorithmVariant::Fcls
    }
}

impl fmt::Display for AlgorithmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmVariant {
    type Err = UnmixError;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match normalized.as_str() {
            "nmf" => AlgorithmVariant::Nmf,
            "lq_nmf" | "l12_nmf" | "l1/2_nmf" => AlgorithmVariant::LqNmf,
            "distributed" => AlgorithmVariant::Distributed,
            "sparse_distributed" => AlgorithmVariant::SparseDistributed,
            "proposed" | "clustered_sparse_distributed" => {
                AlgorithmVariant::ClusteredSparseDistributed
            }
            "fcls" | "vca_fcls" => AlgorithmVariant::Fcls,
            _ => return Err(UnmixError::invalid(format!("unknown variant `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIter,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIter => "max_iter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingResult {
    pub a: SignatureMatrix,
    pub s: AbundanceMatrix,
    /// Objective after each outer iteration.
    pub cost_trace: Vec<f64>,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    /// Sparsity weight actually applied (0 for variants without the term).
    pub lambda: f64,
}

/// State handed to observers after each outer iteration.
#[derive(Debug)]
pub struct IterationSnapshot<'a> {
    pub iteration: usize,
    pub a: &'a Array2<f64>,
    /// Current abundance estimate; always on the simplex.
    pub s: &'a Array2<f64>,
    pub cost: f64,
}

/// Terms of the per-pixel cost beyond the data fit.
#[derive(Debug, Clone, Copy)]
pub struct LocalModel<'a> {
    /// Neighborhood with weights attached; `None` switches cooperation off.
    pub neighborhood: Option<&'a NeighborhoodSystem>,
    /// Cluster labels; when present only same-cluster neighbors cooperate.
    pub labels: Option<&'a [usize]>,
    pub eta: f64,
    pub lambda: f64,
    pub q: f64,
    pub guard: f64,
}

impl<'a> LocalModel<'a> {
    /// Data-fit term only.
    pub fn plain() -> Self {
        Self {
            neighborhood: None,
            labels: None,
            eta: 0.0,
            lambda: 0.0,
            q: 1.0,
            guard: SPARSITY_GUARD,
        }
    }

    fn cooperating(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let labels = self.labels;
        let (neighbors, weights): (&[usize], &[f64]) = match self.neighborhood {
            Some(nb) if self.eta > 0.0 => (
                nb.neighbors(k),
                nb.weights(k).expect("neighbor weights must be computed"),
            ),
            _ => (&[], &[]),
        };
        neighbors
            .iter()
            .zip(weights)
            .filter(move |(&l, _)| labels.is_none_or(|lab| lab[l] == lab[k]))
            .map(|(&l, &w)| (l, w))
    }
}

fn check_dims(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<()> {
    if y.nrows() != a.nrows() || a.ncols() != s.nrows() || y.ncols() != s.ncols() {
        return Err(UnmixError::invalid(format!(
            "non-conformable shapes Y {:?}, A {:?}, S {:?}",
            y.dim(),
            a.dim(),
            s.dim()
        )));
    }
    Ok(())
}

/// `sum_k |y_k - A s_k|^2`.
pub fn global_cost(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Result<f64> {
    check_dims(y, a, s)?;
    Ok(residual_energy(y, a, s))
}

fn residual_energy(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> f64 {
    let fitted = a.dot(&s);
    y.iter().zip(fitted.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Cost seen by pixel `k`: residual, in-cluster neighborhood spread, and the
/// guarded `L_q` sparsity term.
pub fn local_cost(
    k: usize,
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
) -> Result<f64> {
    check_dims(y, a, s)?;
    if k >= y.ncols() {
        return Err(UnmixError::invalid(format!("pixel {k} out of range")));
    }
    let fitted = a.dot(&s.column(k));
    let residual: f64 = y
        .column(k)
        .iter()
        .zip(fitted.iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum();
    Ok(residual + regularization_at(k, s, model))
}

fn regularization_at(k: usize, s: ArrayView2<'_, f64>, model: &LocalModel<'_>) -> f64 {
    let sk = s.column(k);
    let mut total = 0.0;
    if model.eta > 0.0 {
        let spread: f64 = model
            .cooperating(k)
            .map(|(l, w)| {
                let sl = s.column(l);
                w * sk.iter().zip(sl.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        total += model.eta * spread;
    }
    if model.lambda > 0.0 {
        total += model.lambda * guarded_lq_norm(sk, model.q, model.guard);
    }
    total
}

/// Full objective: residual energy plus every pixel's regularization terms.
pub fn total_cost(
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
) -> Result<f64> {
    check_dims(y, a, s)?;
    Ok(objective(y, a, s, model))
}

fn objective(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>, model: &LocalModel<'_>) -> f64 {
    let mut total = residual_energy(y, a, s);
    if model.eta > 0.0 || model.lambda > 0.0 {
        let terms: Vec<f64> = (0..s.ncols())
            .into_par_iter()
            .map(|k| regularization_at(k, s, model))
            .collect();
        total += terms.iter().sum::<f64>();
    }
    total
}

/// Smooth descent direction for pixel `k`:
/// `A^T (y_k - A s_k) + eta * sum_l rho_kl (s_l - s_k)` over cooperating
/// neighbors. Equals minus one half of the gradient of the residual and
/// neighborhood terms of [`local_cost`].
pub fn smooth_descent(
    k: usize,
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
) -> Result<Vec<f64>> {
    check_dims(y, a, s)?;
    let gram = a.t().dot(&a);
    let aty = a.t().dot(&y.column(k));
    let mut out = vec![0.0; s.nrows()];
    smooth_descent_with(k, gram.view(), aty.view(), s, model, &mut out);
    Ok(out)
}

fn smooth_descent_with(
    k: usize,
    gram: ArrayView2<'_, f64>,
    aty_k: ArrayView1<'_, f64>,
    s: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
    out: &mut [f64],
) {
    let sk = s.column(k);
    let fitted = gram.dot(&sk);
    for (j, o) in out.iter_mut().enumerate() {
        *o = aty_k[j] - fitted[j];
    }
    if model.eta > 0.0 {
        for (l, w) in model.cooperating(k) {
            let sl = s.column(l);
            for (j, o) in out.iter_mut().enumerate() {
                *o += model.eta * w * (sl[j] - sk[j]);
            }
        }
    }
}

/// One projected steepest-descent step for pixel `k`, reading neighbors from `s_prev`.
pub fn update_abundance(
    k: usize,
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s_prev: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
    mu: f64,
) -> Result<Vec<f64>> {
    check_dims(y, a, s_prev)?;
    if k >= y.ncols() {
        return Err(UnmixError::invalid(format!("pixel {k} out of range")));
    }
    let gram = a.t().dot(&a);
    let aty = a.t().dot(&y.column(k));
    let c = s_prev.nrows();
    let mut out = vec![0.0; c];
    let mut grad = vec![0.0; c];
    let mut scratch = Vec::with_capacity(c);
    abundance_step(k, gram.view(), aty.view(), s_prev, model, mu, &mut out, &mut grad, &mut scratch);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn abundance_step(
    k: usize,
    gram: ArrayView2<'_, f64>,
    aty_k: ArrayView1<'_, f64>,
    s_prev: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
    mu: f64,
    out: &mut [f64],
    grad: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    smooth_descent_with(k, gram, aty_k, s_prev, model, grad);
    let sk = s_prev.column(k);
    for j in 0..out.len() {
        out[j] = sk[j] + mu * grad[j];
    }
    if model.lambda > 0.0 {
        sparsity_gradient_into(sk, model.q, model.guard, grad);
        for j in 0..out.len() {
            out[j] -= mu * model.lambda * grad[j];
        }
    }
    project_simplex_in_place(out, scratch);
}

/// Multiplicative signature update `A * (Y S^T) / (A S S^T + delta)`.
/// Negative entries of `Y S^T` (possible with noisy data) are clipped to zero.
pub fn update_signatures(
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_dims(y, a, s)?;
    Ok(signature_step(y, a, s))
}

fn signature_step(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Array2<f64> {
    let numer = y.dot(&s.t());
    let denom = a.dot(&s.dot(&s.t()));
    let mut next = a.to_owned();
    ndarray::Zip::from(&mut next)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &n, &d| *x *= n.max(0.0) / (d + MULTIPLICATIVE_DELTA));
    next
}

/// Multiplicative coefficient update `S * (A^T Y) / (A^T A S + delta)`.
pub fn update_coefficients(
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_dims(y, a, s)?;
    Ok(coefficient_step(y, a, s))
}

fn coefficient_step(y: ArrayView2<'_, f64>, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> Array2<f64> {
    let numer = a.t().dot(&y);
    let denom = a.t().dot(&a).dot(&s);
    let mut next = s.to_owned();
    ndarray::Zip::from(&mut next)
        .and(&numer)
        .and(&denom)
        .for_each(|x, &n, &d| *x *= n.max(0.0) / (d + MULTIPLICATIVE_DELTA));
    next
}

/// Stopping rule on consecutive objective values.
pub fn converged(j_new: f64, j_old: f64, eps: f64) -> bool {
    (j_new - j_old).abs() < eps
}

/// Runs a solver variant to convergence or `cfg.max_iter` iterations.
pub fn run_unmixing(
    image: &HyperspectralImage,
    cfg: &UnmixingConfig,
    init_a: SignatureMatrix,
    init_s: AbundanceMatrix,
    labels: Option<&[usize]>,
) -> Result<UnmixingResult> {
    run_unmixing_observed(image, cfg, init_a, init_s, labels, |_| {})
}

/// [`run_unmixing`] with a callback invoked after every outer iteration.
pub fn run_unmixing_observed<F>(
    image: &HyperspectralImage,
    cfg: &UnmixingConfig,
    init_a: SignatureMatrix,
    init_s: AbundanceMatrix,
    labels: Option<&[usize]>,
    mut observer: F,
) -> Result<UnmixingResult>
where
    F: FnMut(&IterationSnapshot<'_>),
{
    cfg.validate()?;
    let variant = cfg.variant;
    let y = image.data().view();
    let n = image.pixels();
    check_dims(y, init_a.data().view(), init_s.data().view())?;

    let labels = if variant.uses_clusters() {
        let labels = labels.ok_or_else(|| {
            UnmixError::invalid(format!("variant `{variant}` requires cluster labels"))
        })?;
        if labels.len() != n {
            return Err(UnmixError::invalid(format!(
                "{} cluster labels for {n} pixels",
                labels.len()
            )));
        }
        Some(labels)
    } else {
        None
    };

    let eta = if variant.uses_neighbors() { cfg.eta } else { 0.0 };
    let lambda = if variant.uses_sparsity() {
        match cfg.lambda {
            Some(l) => l,
            None => estimate_lambda(image)?,
        }
    } else {
        0.0
    };
    let neighborhood = if eta > 0.0 {
        Some(neighbor_weights(
            image,
            build_neighborhood(image.width(), image.height())?,
        )?)
    } else {
        None
    };
    let model = LocalModel {
        neighborhood: neighborhood.as_ref(),
        labels,
        eta,
        lambda,
        q: cfg.q,
        guard: SPARSITY_GUARD,
    };

    let mut a = init_a.into_data();
    if variant.updates_signatures() {
        a.mapv_inplace(|v| v.max(SIGNATURE_FLOOR));
    }
    let mut s = init_s.into_data();
    let c = s.nrows();

    let step = if variant == AlgorithmVariant::Fcls {
        if a.iter().all(|&v| v == 0.0) {
            return Err(UnmixError::degenerate("signature matrix is zero"));
        }
        // the projection discards shifts along the all-ones direction, so only
        // curvature within the simplex's tangent space limits the step
        let lipschitz = largest_eigenvalue(&centered_gram(&a.t().dot(&a)));
        if lipschitz > 0.0 {
            1.0 / lipschitz
        } else {
            1.0
        }
    } else {
        cfg.mu
    };

    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIter;
    // the multiplicative baseline keeps an unconstrained coefficient matrix and
    // exposes its projection as the abundance estimate
    let mut projected = Array2::<f64>::zeros((0, 0));

    for iteration in 1..=cfg.max_iter {
        if variant.updates_signatures() {
            a = signature_step(y, a.view(), s.view());
        }

        let cost = if variant == AlgorithmVariant::Nmf {
            s = coefficient_step(y, a.view(), s.view());
            projected = project_columns(&s);
            residual_energy(y, a.view(), s.view())
        } else {
            s = abundance_sweep(y, a.view(), s.view(), &model, step);
            objective(y, a.view(), s.view(), &model)
        };

        if !cost.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(UnmixError::NumericalFailure {
                iteration,
                message: format!("objective became {cost}"),
            });
        }

        observer(&IterationSnapshot {
            iteration,
            a: &a,
            s: if variant == AlgorithmVariant::Nmf { &projected } else { &s },
            cost,
        });

        let done = trace.last().is_some_and(|&prev| converged(cost, prev, cfg.eps));
        trace.push(cost);
        if done {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let s = if variant == AlgorithmVariant::Nmf { projected } else { s };
    debug_assert_eq!(s.nrows(), c);
    Ok(UnmixingResult {
        a: SignatureMatrix::new(a)?,
        s: AbundanceMatrix::from_projected(s),
        iterations_run: trace.len(),
        cost_trace: trace,
        stop_reason,
        lambda,
    })
}

fn abundance_sweep(
    y: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    s_prev: ArrayView2<'_, f64>,
    model: &LocalModel<'_>,
    mu: f64,
) -> Array2<f64> {
    let gram = a.t().dot(&a);
    let aty = a.t().dot(&y);
    let c = s_prev.nrows();
    let mut next = Array2::<f64>::zeros(s_prev.raw_dim());
    next.axis_iter_mut(Axis(1))
        .into_par_iter()
        .enumerate()
        .for_each_init(
            || (vec![0.0; c], vec![0.0; c], Vec::with_capacity(c)),
            |(out, grad, scratch), (k, mut col)| {
                abundance_step(k, gram.view(), aty.column(k), s_prev, model, mu, out, grad, scratch);
                for (dst, src) in col.iter_mut().zip(out.iter()) {
                    *dst = *src;
                }
            },
        );
    next
}

fn project_columns(s: &Array2<f64>) -> Array2<f64> {
    let mut out = s.clone();
    let mut buf = Vec::with_capacity(s.nrows());
    let mut scratch = Vec::with_capacity(s.nrows());
    for mut col in out.columns_mut() {
        buf.clear();
        buf.extend(col.iter().copied());
        project_simplex_in_place(&mut buf, &mut scratch);
        for (dst, src) in col.iter_mut().zip(&buf) {
            *dst = *src;
        }
    }
    out
}

/// `P G P` with `P = I - 11^T / c`.
fn centered_gram(g: &Array2<f64>) -> Array2<f64> {
    let c = g.nrows() as f64;
    let rows = g.sum_axis(Axis(1)) / c;
    let cols = g.sum_axis(Axis(0)) / c;
    let total = g.sum() / (c * c);
    Array2::from_shape_fn(g.raw_dim(), |(i, j)| g[[i, j]] - rows[i] - cols[j] + total)
}

fn largest_eigenvalue(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    SymmetricEigen::new(dm).eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// Fully constrained least-squares abundances against fixed signatures,
/// starting from the uniform mixture.
pub fn fcls_abundances(
    image: &HyperspectralImage,
    a: &SignatureMatrix,
    max_iter: usize,
    eps: f64,
) -> Result<AbundanceMatrix> {
    let c = a.endmembers();
    let start = AbundanceMatrix::new(Array2::from_elem((c, image.pixels()), 1.0 / c as f64))?;
    let cfg = UnmixingConfig {
        max_iter,
        eps,
        variant: AlgorithmVariant::Fcls,
        ..Default::default()
    };
    Ok(run_unmixing(image, &cfg, a.clone(), start, None)?.s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{validate_abundances, ASC_TOLERANCE};
    use ndarray::array;

    #[test]
    fn global_cost_examples() {
        let y = array![[3.0]];
        let a = array![[1.0]];
        let s = array![[1.0]];
        assert_eq!(global_cost(y.view(), a.view(), s.view()).unwrap(), 4.0);

        let a = array![[0.2, 0.9], [0.7, 0.1], [0.4, 0.4]];
        let s = array![[0.3, 1.0], [0.7, 0.0]];
        let y = a.dot(&s);
        assert_eq!(global_cost(y.view(), a.view(), s.view()).unwrap(), 0.0);

        let noisy = &y + &array![[0.1, -0.2], [0.0, 0.3], [0.05, 0.0]];
        let both = global_cost(noisy.view(), a.view(), s.view()).unwrap();
        let first = global_cost(noisy.slice(ndarray::s![.., 0..1]), a.view(), s.slice(ndarray::s![.., 0..1])).unwrap();
        let second = global_cost(noisy.slice(ndarray::s![.., 1..2]), a.view(), s.slice(ndarray::s![.., 1..2])).unwrap();
        assert!((both - first - second).abs() < 1e-15);

        assert!(global_cost(y.view(), a.view(), array![[1.0]].view()).is_err());
    }

    #[test]
    fn local_cost_examples() {
        let image = HyperspectralImage::new(array![[1.0, 0.5], [0.0, 0.5]], 2, 1).unwrap();
        let nb = neighbor_weights(&image, build_neighborhood(2, 1).unwrap()).unwrap();
        let a = Array2::eye(2);
        let s = array![[1.0, 0.0], [0.0, 1.0]];
        let labels = [0, 0];
        // y_0 = A s_0 so the residual vanishes; rho = 1 for the only neighbor
        let model = LocalModel {
            neighborhood: Some(&nb),
            labels: Some(&labels),
            eta: 0.1,
            ..LocalModel::plain()
        };
        let cost = local_cost(0, image.data().view(), a.view(), s.view(), &model).unwrap();
        assert!((cost - 0.2).abs() < 1e-15);

        let split = [0, 1];
        let masked = LocalModel { labels: Some(&split), ..model };
        assert_eq!(local_cost(0, image.data().view(), a.view(), s.view(), &masked).unwrap(), 0.0);

        let plain = local_cost(1, image.data().view(), a.view(), s.view(), &LocalModel::plain()).unwrap();
        let residual = global_cost(
            image.data().slice(ndarray::s![.., 1..2]),
            a.view(),
            s.slice(ndarray::s![.., 1..2]),
        )
        .unwrap();
        assert_eq!(plain, residual);
    }

    #[test]
    fn neighborhood_term_vanishes_for_equal_neighbors() {
        let image = HyperspectralImage::new(Array2::from_elem((2, 9), 0.5), 3, 3).unwrap();
        let nb = neighbor_weights(&image, build_neighborhood(3, 3).unwrap()).unwrap();
        let a = Array2::eye(2);
        let s = Array2::from_elem((2, 9), 0.5);
        let model = LocalModel { neighborhood: Some(&nb), eta: 0.1, ..LocalModel::plain() };
        let with = update_abundance(4, image.data().view(), a.view(), s.view(), &model, 0.02).unwrap();
        let without = update_abundance(4, image.data().view(), a.view(), s.view(), &LocalModel::plain(), 0.02).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn abundance_step_by_hand() {
        let y = array![[1.0], [0.0]];
        let a = Array2::eye(2);
        let s = array![[0.5], [0.5]];
        let next = update_abundance(0, y.view(), a.view(), s.view(), &LocalModel::plain(), 0.1).unwrap();
        assert!((next[0] - 0.55).abs() < 1e-15);
        assert!((next[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn signature_update_examples() {
        let next = update_signatures(array![[4.0]].view(), array![[2.0]].view(), array![[1.0]].view()).unwrap();
        assert!((next[[0, 0]] - 4.0).abs() < 1e-9);

        let a = array![[0.2, 0.9], [0.7, 0.1], [0.4, 0.4]];
        let s = array![[0.3, 1.0, 0.5], [0.7, 0.0, 0.5]];
        let y = a.dot(&s);
        let next = update_signatures(y.view(), a.view(), s.view()).unwrap();
        for (x, z) in next.iter().zip(a.iter()) {
            assert!((x - z).abs() < 1e-9);
        }
    }

    #[test]
    fn stopping_rule() {
        assert!(converged(2.5, 2.5, 1e-8));
        assert!(converged(1.0 + 1e-9, 1.0, 1e-8));
        assert!(!converged(2.0, 1.0, 1e-8));
    }

    #[test]
    fn variant_names_roundtrip() {
        for v in AlgorithmVariant::ALL {
            assert_eq!(v.name().parse::<AlgorithmVariant>().unwrap(), v);
        }
        assert_eq!(
            "clustered-sparse-distributed".parse::<AlgorithmVariant>().unwrap(),
            AlgorithmVariant::ClusteredSparseDistributed
        );
        assert!("tv_rsnmf".parse::<AlgorithmVariant>().is_err());
    }

    #[test]
    fn clustered_variant_requires_labels() {
        let image = HyperspectralImage::new(array![[1.0, 0.5], [0.2, 0.5]], 2, 1).unwrap();
        let a = SignatureMatrix::new(Array2::eye(2)).unwrap();
        let s = AbundanceMatrix::new(Array2::from_elem((2, 2), 0.5)).unwrap();
        let cfg = UnmixingConfig { max_iter: 3, ..Default::default() };
        assert!(matches!(
            run_unmixing(&image, &cfg, a.clone(), s.clone(), None),
            Err(UnmixError::InvalidArgument(_))
        ));
        assert!(run_unmixing(&image, &cfg, a, s, Some(&[0, 0])).is_ok());
    }

    #[test]
    fn fcls_recovers_exact_abundances() {
        let a = array![[0.9, 0.1, 0.3], [0.2, 0.8, 0.3], [0.1, 0.2, 0.9], [0.5, 0.5, 0.2]];
        let s = array![[0.2, 1.0, 0.0, 0.3], [0.5, 0.0, 0.0, 0.3], [0.3, 0.0, 1.0, 0.4]];
        let image = HyperspectralImage::new(a.dot(&s), 4, 1).unwrap();
        let est = fcls_abundances(&image, &SignatureMatrix::new(a).unwrap(), 5000, 1e-20).unwrap();
        assert!(validate_abundances(est.data().view(), ASC_TOLERANCE));
        for (x, z) in est.data().iter().zip(s.iter()) {
            assert!((x - z).abs() < 1e-6, "{x} vs {z}");
        }
    }
}
