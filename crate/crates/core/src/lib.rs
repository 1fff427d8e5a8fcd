//! Adaptive block compressive sensing with DCT measurements.
//!
//! An image is cut into `B×B` blocks; each block contributes a prefix of
//! its zigzag-ordered DCT coefficients. The sensing algorithms differ in how
//! many coefficients each block gets. Decoding is either a direct inverse
//! DCT or one of several iterative, denoiser-driven recursions.
//!
//! ```
//! use abcs_core::{sense, reconstruct, Algorithm, PixelImage, ReconConfig, Method, SensingConfig};
//!
//! let img = PixelImage::from_fn(64, 64, |r, c| ((r * 3 + c) % 256) as f64);
//! let cfg = SensingConfig::new(Algorithm::Dd, "0.1".parse().unwrap()).with_block(16);
//! let ms = sense(&img, &cfg).unwrap();
//! let rec = reconstruct(&ms, &ReconConfig::new(Method::Idct), Some(&img)).unwrap();
//! assert!(rec.trace[0].psnr.unwrap() > 15.0);
//! ```

pub mod container;
pub mod denoise;
pub mod error;
pub mod image;
pub mod metrics;
pub mod operator;
pub mod oracle;
pub mod recon;
pub mod sensing;
pub mod transform;

pub use container::{read_container, write_container};
pub use denoise::{divergence, divergence_averaged, Denoiser, DenoiserSpec};
pub use error::{Error, Result};
pub use image::{load_image, save_image, BlockGrid, PixelImage};
pub use metrics::{psnr, ssim, QualityReport};
pub use operator::SensingOperator;
pub use oracle::{thb, thi};
pub use recon::{decode_idct, reconstruct, Init, Method, ReconConfig, Reconstruction, TraceRow};
pub use sensing::{sense, Algorithm, CompressionRatio, MeasurementSet, SensingConfig};
pub use transform::{Dct2d, KERNEL_NAME};
