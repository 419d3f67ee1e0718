//! File formats: binary cubes, spectral-library CSV and JSON run reports.
//!
//! Cube layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `HSCUBE01`                        |
//! | 8      | 4    | width (u32)                             |
//! | 12     | 4    | height (u32)                            |
//! | 16     | 4    | bands (u32)                             |
//! | 20     | 1    | dtype, 1 = f64 LE                       |
//! | 21     | 1    | interleave, 1 = band-sequential         |
//! | 22     | ...  | payload, band by band, pixels row-major |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::Deserialize;

use crate::datamodel::{HyperspectralImage, SignatureMatrix, UnmixingConfig};
use crate::error::{Result, UnmixError};
use crate::metrics::EvaluationReport;
use crate::unmix::UnmixingResult;

pub const CUBE_MAGIC: &[u8; 8] = b"HSCUBE01";
pub const CUBE_HEADER_LEN: usize = 22;
pub const DTYPE_F64_LE: u8 = 1;
pub const INTERLEAVE_BSQ: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeHeader {
    pub width: u32,
    pub height: u32,
    pub bands: u32,
    pub dtype: u8,
    pub interleave: u8,
}

impl CubeHeader {
    pub fn payload_len(&self) -> Option<u64> {
        (self.width as u64)
            .checked_mul(self.height as u64)?
            .checked_mul(self.bands as u64)?
            .checked_mul(8)
    }
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

/// Parses and validates a cube header.
pub fn decode_cube_header(bytes: &[u8]) -> Result<CubeHeader> {
    if bytes.len() < CUBE_HEADER_LEN {
        return Err(UnmixError::Format {
            field: "header",
            offset: bytes.len() as u64,
            message: format!("header needs {CUBE_HEADER_LEN} bytes, file has {}", bytes.len()),
        });
    }
    if &bytes[0..8] != CUBE_MAGIC {
        return Err(UnmixError::Format {
            field: "magic",
            offset: 0,
            message: format!("expected {:?}, found {:?}", "HSCUBE01", String::from_utf8_lossy(&bytes[0..8])),
        });
    }
    let header = CubeHeader {
        width: u32_at(bytes, 8),
        height: u32_at(bytes, 12),
        bands: u32_at(bytes, 16),
        dtype: bytes[20],
        interleave: bytes[21],
    };
    for (field, offset, value) in [
        ("width", 8, header.width),
        ("height", 12, header.height),
        ("bands", 16, header.bands),
    ] {
        if value == 0 {
            return Err(UnmixError::Format {
                field,
                offset,
                message: "dimension must be at least 1".into(),
            });
        }
    }
    if header.dtype != DTYPE_F64_LE {
        return Err(UnmixError::Format {
            field: "dtype",
            offset: 20,
            message: format!("unsupported dtype {}", header.dtype),
        });
    }
    if header.interleave != INTERLEAVE_BSQ {
        return Err(UnmixError::Format {
            field: "interleave",
            offset: 21,
            message: format!("unsupported interleave {}", header.interleave),
        });
    }
    Ok(header)
}

/// Decodes a complete cube held in memory.
pub fn decode_cube(bytes: &[u8]) -> Result<HyperspectralImage> {
    let header = decode_cube_header(bytes)?;
    let payload = header.payload_len().ok_or_else(|| UnmixError::Format {
        field: "bands",
        offset: 16,
        message: "declared payload size overflows".into(),
    })?;
    let expected = CUBE_HEADER_LEN as u64 + payload;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(UnmixError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(UnmixError::Format {
            field: "payload",
            offset: expected,
            message: format!("{} trailing bytes after payload", actual - expected),
        });
    }

    let bands = header.bands as usize;
    let pixels = header.width as usize * header.height as usize;
    let mut values = Vec::with_capacity(bands * pixels);
    for (i, chunk) in bytes[CUBE_HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        if !v.is_finite() {
            return Err(UnmixError::Format {
                field: "payload",
                offset: (CUBE_HEADER_LEN + 8 * i) as u64,
                message: format!("non-finite value {v}"),
            });
        }
        values.push(v);
    }
    let data = Array2::from_shape_vec((bands, pixels), values).expect("payload size checked");
    HyperspectralImage::new(data, header.width as usize, header.height as usize)
}

/// Serializes an image as a band-sequential f64 cube.
pub fn encode_cube(image: &HyperspectralImage) -> Result<Vec<u8>> {
    let dims = [image.width(), image.height(), image.bands()];
    let mut out = Vec::with_capacity(CUBE_HEADER_LEN + 8 * image.bands() * image.pixels());
    out.extend_from_slice(CUBE_MAGIC);
    for d in dims {
        let d = u32::try_from(d).map_err(|_| UnmixError::invalid(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.push(DTYPE_F64_LE);
    out.push(INTERLEAVE_BSQ);
    for band in image.data().rows() {
        for v in band.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HyperspectralImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| UnmixError::io(path, e))?;
    decode_cube(&bytes)
}

pub fn write_cube(path: impl AsRef<Path>, image: &HyperspectralImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(image)?).map_err(|e| UnmixError::io(path, e))
}

/// Named spectra sampled on a shared wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLibrary {
    pub wavelengths: Vec<f64>,
    pub names: Vec<String>,
    pub signatures: SignatureMatrix,
}

/// Parses `wavelength,name1,name2,...` CSV with one row per band.
pub fn parse_spectral_library(text: &str) -> Result<SpectralLibrary> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(&e))?,
        None => {
            return Err(UnmixError::Parse {
                line: 1,
                message: "empty library file".into(),
            })
        }
    };
    let header_line = header.position().map_or(1, |p| p.line());
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("wavelength") {
        return Err(UnmixError::Parse {
            line: header_line,
            message: "header must be `wavelength,name1,...`".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = header.len();

    let mut wavelengths = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(UnmixError::Parse {
                line,
                message: format!("expected {width} cells, found {}", rec.len()),
            });
        }
        for (i, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| UnmixError::Parse {
                line,
                message: format!("cell {} is not a number: {cell:?}", i + 1),
            })?;
            if !v.is_finite() {
                return Err(UnmixError::Parse {
                    line,
                    message: format!("cell {} is not finite", i + 1),
                });
            }
            if i > 0 && v < 0.0 {
                return Err(UnmixError::Parse {
                    line,
                    message: format!("cell {} is a negative reflectance {v}", i + 1),
                });
            }
            if i == 0 {
                wavelengths.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if wavelengths.is_empty() {
        return Err(UnmixError::Parse {
            line: header_line + 1,
            message: "library has no band rows".into(),
        });
    }
    let data = Array2::from_shape_vec((wavelengths.len(), names.len()), values)
        .expect("row widths checked");
    let signatures = SignatureMatrix::new(data).map_err(|e| UnmixError::Parse {
        line: header_line,
        message: e.to_string(),
    })?;
    Ok(SpectralLibrary {
        wavelengths,
        names,
        signatures,
    })
}

fn csv_error(e: &csv::Error) -> UnmixError {
    UnmixError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Renders a library as CSV; floats use the shortest exact representation.
pub fn format_spectral_library(lib: &SpectralLibrary) -> String {
    let mut out = String::from("wavelength");
    for name in &lib.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (b, w) in lib.wavelengths.iter().enumerate() {
        write!(out, "{w}").unwrap();
        for v in lib.signatures.data().row(b) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_spectral_library(path: impl AsRef<Path>) -> Result<SpectralLibrary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| UnmixError::io(path, e))?;
    parse_spectral_library(&text)
}

pub fn write_spectral_library(path: impl AsRef<Path>, lib: &SpectralLibrary) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_spectral_library(lib)).map_err(|e| UnmixError::io(path, e))
}

/// Report contents as read back from disk.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportDocument {
    pub config: UnmixingConfig,
    pub per_endmember_sad: Vec<f64>,
    pub rms_sad: f64,
    pub rms_aad: f64,
    pub matching: Vec<usize>,
    pub cost_trace: Vec<f64>,
}

/// 17 significant digits, enough to round-trip any f64.
fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

fn number_array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|&v| number(v)).collect();
    format!("[{}]", items.join(", "))
}

fn config_json(cfg: &UnmixingConfig) -> String {
    format!(
        "{{\"mu\": {}, \"eta\": {}, \"q\": {}, \"lambda\": {}, \"max_iter\": {}, \"eps\": {}, \"clusters\": {}, \"seed\": {}, \"variant\": \"{}\"}}",
        number(cfg.mu),
        number(cfg.eta),
        number(cfg.q),
        cfg.lambda.map_or_else(|| "null".to_string(), number),
        cfg.max_iter,
        number(cfg.eps),
        cfg.clusters,
        cfg.seed,
        cfg.variant.name()
    )
}

/// JSON report with a fixed key order, suitable for golden-file diffs.
pub fn render_report(report: &EvaluationReport, trace: &[f64], config: &UnmixingConfig) -> String {
    let matching: Vec<String> = report.matching.iter().map(usize::to_string).collect();
    format!(
        "{{\n  \"config\": {},\n  \"per_endmember_sad\": {},\n  \"rms_sad\": {},\n  \"rms_aad\": {},\n  \"matching\": [{}],\n  \"cost_trace\": {}\n}}\n",
        config_json(config),
        number_array(&report.per_endmember_sad),
        number(report.rms_sad),
        number(report.rms_aad),
        matching.join(", "),
        number_array(trace)
    )
}

pub fn write_report(
    path: impl AsRef<Path>,
    report: &EvaluationReport,
    trace: &[f64],
    config: &UnmixingConfig,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_report(report, trace, config)).map_err(|e| UnmixError::io(path, e))
}

pub fn parse_report(text: &str) -> Result<ReportDocument> {
    serde_json::from_str(text).map_err(|e| UnmixError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn read_report(path: impl AsRef<Path>) -> Result<ReportDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| UnmixError::io(path, e))?;
    parse_report(&text)
}

/// Solver summary written next to the estimated factors.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RunSummary {
    pub config: UnmixingConfig,
    pub lambda: f64,
    pub iterations_run: usize,
    pub stop_reason: crate::unmix::StopReason,
    pub cost_trace: Vec<f64>,
}

pub fn render_run_summary(config: &UnmixingConfig, result: &UnmixingResult) -> String {
    format!(
        "{{\n  \"config\": {},\n  \"lambda\": {},\n  \"iterations_run\": {},\n  \"stop_reason\": \"{}\",\n  \"cost_trace\": {}\n}}\n",
        config_json(config),
        number(result.lambda),
        result.iterations_run,
        result.stop_reason,
        number_array(&result.cost_trace)
    )
}

pub fn write_run_summary(path: impl AsRef<Path>, config: &UnmixingConfig, result: &UnmixingResult) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_run_summary(config, result)).map_err(|e| UnmixError::io(path, e))
}

pub fn read_run_summary(path: impl AsRef<Path>) -> Result<RunSummary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| UnmixError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| UnmixError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}
