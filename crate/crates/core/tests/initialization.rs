mod common;

use hsunmix::init::{random_init, vca, vca_indices};
use hsunmix::metrics::{match_endmembers, sad};
use hsunmix::HyperspectralImage;
use nalgebra::DMatrix;
use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

/// Volume proxy of the simplex spanned by the chosen pixels: determinant of
/// the Gram matrix of edge vectors.
fn simplex_volume(y: &Array2<f64>, picks: &[usize]) -> f64 {
    let c = picks.len();
    if c == 1 {
        return y.column(picks[0]).dot(&y.column(picks[0])).sqrt();
    }
    let base = y.column(picks[0]);
    let edges: Vec<_> = picks[1..].iter().map(|&k| &y.column(k) - &base).collect();
    let gram = DMatrix::from_fn(c - 1, c - 1, |i, j| edges[i].dot(&edges[j]));
    gram.determinant().max(0.0).sqrt()
}

fn max_volume_subset(y: &Array2<f64>, c: usize) -> Vec<usize> {
    fn go(start: usize, n: usize, c: usize, cur: &mut Vec<usize>, y: &Array2<f64>, best: &mut (f64, Vec<usize>)) {
        if cur.len() == c {
            let v = simplex_volume(y, cur);
            if v > best.0 {
                *best = (v, cur.clone());
            }
            return;
        }
        for k in start..n {
            cur.push(k);
            go(k + 1, n, c, cur, y, best);
            cur.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(0, y.ncols(), c, &mut Vec::new(), y, &mut best);
    best.1
}

/// Noise-free mixtures of `c` random spectra, with the pure pixels placed at
/// random positions.
fn pure_pixel_scene(c: usize, bands: usize, n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = common::rng(seed);
    let a = Array2::from_shape_fn((bands, c), |_| rng.random_range(0.05..1.0));
    let mut s = common::random_simplex_columns(&mut rng, c, n);
    let mut slots: Vec<usize> = (0..n).collect();
    for j in 0..c {
        let pick = rng.random_range(j..n);
        slots.swap(j, pick);
        let k = slots[j];
        s.column_mut(k).fill(0.0);
        s[[j, k]] = 1.0;
    }
    (a.clone(), a.dot(&s))
}

#[test]
fn vca_recovers_pure_pixels_like_the_max_volume_search() {
    for (c, seed) in [(2, 1u64), (3, 2), (3, 3), (4, 4), (4, 5)] {
        let n = 30;
        let (a, y) = pure_pixel_scene(c, 12, n, seed);
        let oracle = max_volume_subset(&y, c);
        let image = HyperspectralImage::new(y.clone(), n, 1).unwrap();
        let est = vca(&image, c, seed).unwrap();

        let truth = hsunmix::SignatureMatrix::new(a).unwrap();
        let matching = match_endmembers(&truth, &est).unwrap();
        for (i, &j) in matching.iter().enumerate() {
            assert!(sad(truth.column(i), est.column(j)).unwrap() < 1e-6, "c={c} seed={seed}");
        }
        let mut picked = vca_indices(&image, c, seed).unwrap();
        picked.sort_unstable();
        assert_eq!(picked, oracle, "c={c} seed={seed}");
    }
}

#[test]
fn vca_returns_columns_of_the_data() {
    let mut rng = common::rng(8);
    for trial in 0..10 {
        let (bands, n, c) = (8, 40, 2 + trial % 4);
        let y = Array2::from_shape_fn((bands, n), |_| rng.random_range(0.0..1.0));
        let image = HyperspectralImage::new(y.clone(), n, 1).unwrap();
        let est = vca(&image, c, trial as u64).unwrap();
        for j in 0..c {
            let col = est.column(j);
            assert!((0..n).any(|k| y.column(k) == col), "column {j} is not a pixel");
        }
    }
}

#[test]
fn vca_is_invariant_to_duplicating_pixels() {
    let (_, y) = pure_pixel_scene(4, 10, 25, 11);
    let doubled = concatenate(Axis(1), &[y.view(), y.view()]).unwrap();
    let once = vca(&HyperspectralImage::new(y, 25, 1).unwrap(), 4, 3).unwrap();
    let twice = vca(&HyperspectralImage::new(doubled, 50, 1).unwrap(), 4, 3).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn random_init_single_endmember_is_all_ones() {
    let (a, s) = random_init(5, 1, 7, 2).unwrap();
    assert_eq!(a.endmembers(), 1);
    assert!(s.data().iter().all(|&v| v == 1.0));
    assert!(a.data().iter().all(|&v| v > 0.0 && v <= 1.0));
}
