//! Regenerates `data/library.csv`.
//!
//! cargo run --example generate_library -- [path]

use hsunmix::io::write_spectral_library;
use hsunmix::synth::{synthesize_library, LIBRARY_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/library.csv").to_string());
    let lib = synthesize_library(12, 224, 0.1, LIBRARY_SEED)?;
    write_spectral_library(&path, &lib)?;
    println!("wrote {} spectra x {} bands to {path}", lib.names.len(), lib.wavelengths.len());
    Ok(())
}
