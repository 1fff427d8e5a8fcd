//! Decoders: the direct inverse DCT and the iterative family.

mod steps;

use std::fmt;
use std::str::FromStr;

pub use steps::{
    amp_step, damp_step, ista_step, residual_norm, tile_shrink, Onsager, ReconState,
    DIVERGENCE_LIMIT,
};

use crate::denoise::DenoiserSpec;
use crate::error::{Error, Result};
use crate::image::PixelImage;
use crate::metrics::psnr;
use crate::operator::SensingOperator;
use crate::sensing::MeasurementSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Zero-fill and inverse DCT.
    Idct,
    Ista,
    Amp,
    /// D-AMP with a Monte-Carlo divergence.
    Damp,
    /// D-AMP with the divergence divided by the damping factor.
    DampD,
    /// Fixed Onsager weight `1/D_F`.
    Ida,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Idct,
        Method::Ista,
        Method::Amp,
        Method::Damp,
        Method::DampD,
        Method::Ida,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Idct => "idct",
            Method::Ista => "ista",
            Method::Amp => "amp",
            Method::Damp => "damp",
            Method::DampD => "damp-d",
            Method::Ida => "ida",
        }
    }

    pub fn is_iterative(self) -> bool {
        self != Method::Idct
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "idct2" | "direct" => Some(Method::Idct),
                "dampd" => Some(Method::DampD),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown reconstruction method `{s}`")))
    }
}

/// Starting estimate for the iterative methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// `x_0 = 0`.
    #[default]
    Zero,
    /// `x_0 = A* y`, the direct decode.
    Direct,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" => Ok(Init::Zero),
            "direct" | "idct" => Ok(Init::Direct),
            _ => Err(Error::Config(format!("unknown initialisation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub method: Method,
    pub iterations: usize,
    /// Damping factor `D_F` for DAMP-D and IDA.
    pub damping: f64,
    pub denoiser: DenoiserSpec,
    /// Threshold multiplier for ISTA and AMP.
    pub lambda: f64,
    pub init: Init,
    /// Seed of the divergence probes.
    pub seed: u64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            method: Method::Ida,
            iterations: 15,
            damping: 2.0,
            denoiser: DenoiserSpec::named("dct"),
            lambda: 1.0,
            init: Init::Zero,
            seed: 42,
        }
    }
}

impl ReconConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.is_iterative() && self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.damping.is_finite() && self.damping > 0.0) {
            return Err(Error::Config(format!(
                "damping factor {} must be > 0",
                self.damping
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda {} must be >= 0",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// One line of the convergence trace. Iteration 0 describes the direct
/// decode; iteration `t ≥ 1` describes the estimate after `t` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// `‖y − A x_t‖₂`.
    pub residual: f64,
    /// Noise estimate used to produce `x_t` (0 for the direct decode).
    pub sigma: f64,
    /// PSNR of the clamped estimate, when a reference was given.
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Final estimate clamped to [0, 255].
    pub image: PixelImage,
    /// Final estimate as iterated.
    pub raw: PixelImage,
    pub trace: Vec<TraceRow>,
}

/// Direct decode: zero-fill the missing coefficients and invert each block.
/// Identical to `A* y`.
pub fn decode_idct(ms: &MeasurementSet) -> PixelImage {
    SensingOperator::for_measurements(ms)
        .adjoint(ms.coefficients())
        .expect("measurement set is consistent")
}

fn crop_reference(ms: &MeasurementSet, reference: &PixelImage) -> Result<PixelImage> {
    let grid = ms.grid();
    if reference.height() == ms.height() && reference.width() == ms.width() {
        reference.crop(grid.height(), grid.width())
    } else {
        reference.check_shape(grid.height(), grid.width())?;
        Ok(reference.clone())
    }
}

/// Reconstructs an image. `reference` (source-sized or already cropped)
/// enables PSNR in the trace.
pub fn reconstruct(
    ms: &MeasurementSet,
    cfg: &ReconConfig,
    reference: Option<&PixelImage>,
) -> Result<Reconstruction> {
    cfg.validate()?;
    let reference = reference.map(|r| crop_reference(ms, r)).transpose()?;
    let score = |x: &PixelImage| -> Result<Option<f64>> {
        reference
            .as_ref()
            .map(|r| psnr(r, &x.clamped()))
            .transpose()
    };
    let op = SensingOperator::for_measurements(ms);
    let y = ms.coefficients();
    let direct = op.adjoint(y)?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        residual: residual_norm(&op, y, &direct)?,
        sigma: 0.0,
        psnr: score(&direct)?,
    }];
    if !cfg.method.is_iterative() {
        return Ok(Reconstruction {
            image: direct.clamped(),
            raw: direct,
            trace,
        });
    }

    let x0 = match cfg.init {
        Init::Zero => PixelImage::zeros(direct.height(), direct.width()),
        Init::Direct => direct,
    };
    let mut state = ReconState::new(x0, op.rows());
    let denoiser = match cfg.method {
        Method::Damp | Method::DampD | Method::Ida => Some(cfg.denoiser.build()?),
        _ => None,
    };
    for _ in 0..cfg.iterations {
        let seed = cfg.seed.wrapping_add(state.iteration as u64);
        match cfg.method {
            Method::Ista => ista_step(&op, y, &mut state, cfg.lambda)?,
            Method::Amp => amp_step(&op, y, &mut state, cfg.lambda)?,
            Method::Damp | Method::DampD | Method::Ida => {
                let onsager = match cfg.method {
                    Method::Damp => Onsager::Divergence,
                    Method::DampD => Onsager::DampedDivergence(cfg.damping),
                    _ => Onsager::Fixed(cfg.damping),
                };
                let den = denoiser.as_deref().expect("built above");
                damp_step(&op, y, &mut state, den, onsager, seed)?
            }
            Method::Idct => unreachable!(),
        }
        trace.push(TraceRow {
            iteration: state.iteration,
            residual: residual_norm(&op, y, &state.x)?,
            sigma: state.sigma,
            psnr: score(&state.x)?,
        });
    }
    Ok(Reconstruction {
        image: state.x.clamped(),
        raw: state.x,
        trace,
    })
}
