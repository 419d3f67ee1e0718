#![allow(dead_code)]

use hsunmix::synth::{bundled_library, generate_synthetic, SceneOptions, SyntheticScene};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Euclidean projection onto the probability simplex by enumerating every
/// support set and solving the equality-constrained problem on it; the best
/// feasible candidate is the KKT point.
pub fn simplex_oracle(v: &[f64]) -> Vec<f64> {
    let c = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << c) {
        let support: Vec<usize> = (0..c).filter(|&i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; c];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - shift;
            if x[i] < -1e-15 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        for xi in &mut x {
            *xi = xi.max(0.0);
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("some support is always feasible").1
}

/// Every permutation of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

pub fn assignment_cost(cost: &Array2<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
}

pub fn brute_force_assignment(cost: &Array2<f64>) -> (f64, Vec<usize>) {
    permutations(cost.nrows())
        .into_iter()
        .map(|p| (assignment_cost(cost, &p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one permutation")
}

pub fn random_simplex_columns(rng: &mut ChaCha8Rng, c: usize, n: usize) -> Array2<f64> {
    let mut s = Array2::from_shape_fn((c, n), |_| -rng.random::<f64>().ln());
    for mut col in s.columns_mut() {
        let total = col.sum();
        col /= total;
    }
    s
}

pub fn scene(width: usize, height: usize, endmembers: usize, snr_db: f64, seed: u64) -> SyntheticScene {
    let library = bundled_library().expect("bundled library");
    let opts = SceneOptions {
        endmembers,
        width,
        height,
        snr_db,
        seed,
        patch: 4,
        filter: 3,
        ..Default::default()
    };
    generate_synthetic(&library, None, &opts).expect("scene")
}
