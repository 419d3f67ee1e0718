//! Synthetic scenes: library endmembers mixed through blocky, low-pass
//! filtered abundance maps with a purity cap, plus white Gaussian noise at a
//! target SNR.

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datamodel::{AbundanceMatrix, HyperspectralImage, SignatureMatrix};
use crate::error::{Result, UnmixError};
use crate::io::{parse_spectral_library, SpectralLibrary};
use crate::metrics::sad;

const BUNDLED_LIBRARY: &str = include_str!("../data/library.csv");

/// Seed used to draw the bundled library.
pub const LIBRARY_SEED: u64 = 20_160_823;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOptions {
    pub endmembers: usize,
    pub width: usize,
    pub height: usize,
    /// Side of the square blocks that each start as a single pure material.
    pub patch: usize,
    /// Side of the uniform smoothing kernel; must be odd.
    pub filter: usize,
    /// Target SNR in dB; `f64::INFINITY` produces a noiseless scene.
    pub snr_db: f64,
    /// Largest abundance allowed in any pixel; 1 disables the cap.
    pub purity_cap: f64,
    pub seed: u64,
    /// When set, library columns are drawn from this seed instead of `seed`,
    /// pinning the endmembers across scenes.
    pub signature_seed: Option<u64>,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            endmembers: 6,
            width: 40,
            height: 40,
            patch: 8,
            filter: 7,
            snr_db: 25.0,
            purity_cap: 0.8,
            seed: 0,
            signature_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub y: HyperspectralImage,
    pub a_true: SignatureMatrix,
    pub s_true: AbundanceMatrix,
    pub snr_db: f64,
    pub noise: Array2<f64>,
    /// Library columns used as endmembers, in `a_true` column order.
    pub library_columns: Vec<usize>,
}

/// The spectral library shipped with the crate (224 bands, 0.4 to 2.5 um).
pub fn bundled_spectral_library() -> Result<SpectralLibrary> {
    parse_spectral_library(BUNDLED_LIBRARY)
}

pub fn bundled_library() -> Result<SignatureMatrix> {
    Ok(bundled_spectral_library()?.signatures)
}

pub fn generate_synthetic(
    library: &SignatureMatrix,
    wavelengths: Option<&[f64]>,
    opts: &SceneOptions,
) -> Result<SyntheticScene> {
    let c = opts.endmembers;
    if c == 0 || c > library.endmembers() {
        return Err(UnmixError::invalid(format!(
            "need {c} endmembers but the library has {}",
            library.endmembers()
        )));
    }
    if opts.width == 0 || opts.height == 0 || opts.patch == 0 {
        return Err(UnmixError::invalid("scene dimensions and patch must be positive"));
    }
    if opts.filter == 0 || opts.filter % 2 == 0 {
        return Err(UnmixError::invalid(format!("filter size {} must be odd", opts.filter)));
    }
    if opts.snr_db.is_nan() || opts.snr_db == f64::NEG_INFINITY {
        return Err(UnmixError::invalid(format!("invalid SNR {}", opts.snr_db)));
    }
    let capped = opts.purity_cap < 1.0;
    if !(opts.purity_cap > 0.0 && opts.purity_cap <= 1.0) || (capped && opts.purity_cap <= 1.0 / c as f64) {
        return Err(UnmixError::invalid(format!(
            "purity cap {} must lie in (1/{c}, 1]",
            opts.purity_cap
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let library_columns = match opts.signature_seed {
        Some(seed) => sample(&mut ChaCha8Rng::seed_from_u64(seed), library.endmembers(), c).into_vec(),
        None => sample(&mut rng, library.endmembers(), c).into_vec(),
    };
    let a_true = library.select(&library_columns)?;

    let (w, h) = (opts.width, opts.height);
    let blocks_x = w.div_ceil(opts.patch);
    let blocks_y = h.div_ceil(opts.patch);
    let block_material: Vec<usize> = (0..blocks_x * blocks_y).map(|_| rng.random_range(0..c)).collect();

    let mut s = Array2::<f64>::zeros((c, w * h));
    for row in 0..h {
        for col in 0..w {
            let block = (row / opts.patch) * blocks_x + col / opts.patch;
            s[[block_material[block], row * w + col]] = 1.0;
        }
    }
    for j in 0..c {
        let plane = box_filter(s.row(j).as_slice().expect("row-major"), w, h, opts.filter);
        s.row_mut(j).assign(&Array1::from(plane));
    }
    let mut buf = vec![0.0; c];
    for mut col in s.columns_mut() {
        let total = col.sum();
        col.mapv_inplace(|v| v / total);
        if capped {
            buf.iter_mut().zip(col.iter()).for_each(|(b, v)| *b = *v);
            cap_purity(&mut buf, opts.purity_cap);
            col.iter_mut().zip(&buf).for_each(|(v, b)| *v = *b);
        }
    }
    let s_true = AbundanceMatrix::new(s)?;

    let clean = a_true.data().dot(s_true.data());
    let noise = if opts.snr_db == f64::INFINITY {
        Array2::zeros(clean.raw_dim())
    } else {
        let mut v = Array2::from_shape_fn(clean.raw_dim(), |_| rng.sample::<f64, _>(StandardNormal));
        let signal: f64 = clean.iter().map(|x| x * x).sum();
        let raw: f64 = v.iter().map(|x| x * x).sum();
        let scale = (signal / (raw * 10f64.powf(opts.snr_db / 10.0))).sqrt();
        v.mapv_inplace(|x| x * scale);
        v
    };
    let mut y = HyperspectralImage::new(&clean + &noise, w, h)?;
    if let Some(wl) = wavelengths {
        y = y.with_wavelengths(wl.to_vec())?;
    }

    Ok(SyntheticScene {
        y,
        a_true,
        s_true,
        snr_db: opts.snr_db,
        noise,
        library_columns,
    })
}

/// Mean over a `size x size` window with replicated edges.
fn box_filter(plane: &[f64], w: usize, h: usize, size: usize) -> Vec<f64> {
    let r = (size / 2) as isize;
    let norm = (size * size) as f64;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0.0; w * h];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for dr in -r..=r {
                let rr = clamp(row as isize + dr, h);
                for dc in -r..=r {
                    acc += plane[rr * w + clamp(col as isize + dc, w)];
                }
            }
            out[row * w + col] = acc / norm;
        }
    }
    out
}

/// Blends a simplex vector toward the uniform mixture just enough that no
/// entry exceeds `cap`.
fn cap_purity(s: &mut [f64], cap: f64) {
    let c = s.len() as f64;
    let peak = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= cap {
        return;
    }
    let uniform = 1.0 / c;
    let mut t = (peak - cap) / (peak - uniform);
    loop {
        let blended: Vec<f64> = s.iter().map(|&v| (1.0 - t) * v + t * uniform).collect();
        if blended.iter().all(|&v| v <= cap) {
            s.copy_from_slice(&blended);
            return;
        }
        t = (t + f64::EPSILON).min(1.0);
    }
}

/// Smooth reflectance spectra: a quadratic continuum multiplied by Gaussian
/// absorption bands. Columns are redrawn until every pair is at least
/// `min_sad` radians apart.
pub fn synthesize_library(count: usize, bands: usize, min_sad: f64, seed: u64) -> Result<SpectralLibrary> {
    if count == 0 || bands < 2 {
        return Err(UnmixError::invalid("library needs at least one spectrum and two bands"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wavelengths: Vec<f64> = (0..bands)
        .map(|b| 0.4 + 2.1 * b as f64 / (bands - 1) as f64)
        .collect();
    let mut columns: Vec<Array1<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while columns.len() < count {
        attempts += 1;
        if attempts > 10_000 {
            return Err(UnmixError::degenerate("could not draw sufficiently distinct spectra"));
        }
        let base = rng.random_range(0.25..0.7);
        let slope = rng.random_range(-0.25..0.25);
        let curve = rng.random_range(-0.2..0.2);
        let features: Vec<(f64, f64, f64)> = (0..rng.random_range(2..6))
            .map(|_| {
                (
                    rng.random_range(0.45..2.45),
                    rng.random_range(0.02..0.15),
                    rng.random_range(0.1..0.55),
                )
            })
            .collect();
        let spectrum = Array1::from_iter(wavelengths.iter().map(|&wl| {
            let x = (wl - 0.4) / 2.1;
            let continuum = base + slope * x + curve * x * (1.0 - x);
            let absorption: f64 = features
                .iter()
                .map(|&(center, width, depth)| 1.0 - depth * (-(wl - center).powi(2) / (2.0 * width * width)).exp())
                .product();
            (continuum * absorption).clamp(0.02, 0.98)
        }));
        let distinct = columns
            .iter()
            .all(|other| sad(spectrum.view(), other.view()).is_ok_and(|angle| angle > min_sad));
        if distinct {
            columns.push(spectrum);
        }
    }
    let data = Array2::from_shape_fn((bands, count), |(b, j)| columns[j][b]);
    Ok(SpectralLibrary {
        wavelengths,
        names: (1..=count).map(|i| format!("material_{i:02}")).collect(),
        signatures: SignatureMatrix::new(data)?,
    })
}
