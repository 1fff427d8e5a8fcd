//! Shared fixtures for the decode benchmarks.

use std::path::PathBuf;

use abcs_core::{load_image, sense, Algorithm, MeasurementSet, PixelImage, Result, SensingConfig};

/// Repository `data/` directory.
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Loads `data/set{size}/{name}.pgm`.
pub fn fixture(size: usize, name: &str) -> Result<PixelImage> {
    load_image(data_dir().join(format!("set{size}/{name}.pgm")))
}

/// Measurements of a fixture image with the default block size.
pub fn measured(size: usize, algorithm: Algorithm, ratio: &str) -> Result<MeasurementSet> {
    let img = fixture(size, "camera")?;
    sense(&img, &SensingConfig::new(algorithm, ratio.parse()?))
}
