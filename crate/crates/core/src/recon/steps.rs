//! One iteration of each recursion.
//!
//! All share the residual update
//!
//! ```text
//! z_t   = y − A x_t + α_t z_{t−1}
//! σ_t   = ‖z_t‖ / √M
//! r_t   = x_t + A* z_t
//! x_t+1 = η(r_t)
//! ```
//!
//! and differ in the shrinkage `η` and in how `α_{t+1}` is produced.

use crate::denoise::{default_epsilon, divergence_with, soft, Denoiser};
use crate::error::{Error, Result};
use crate::image::PixelImage;
use crate::operator::SensingOperator;
use crate::transform::Dct2d;

/// Estimates beyond this magnitude are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const TILE: usize = 8;

/// Iterate plus the memory carried between iterations.
#[derive(Debug, Clone)]
pub struct ReconState {
    /// Completed iterations.
    pub iteration: usize,
    pub x: PixelImage,
    /// Last corrected residual `z_{t−1}` (zeros before the first step).
    pub z: Vec<f64>,
    /// Noise estimate from the last step.
    pub sigma: f64,
    /// Onsager weight to apply in the next step.
    pub alpha: f64,
}

impl ReconState {
    pub fn new(x: PixelImage, measurements: usize) -> Self {
        Self {
            iteration: 0,
            x,
            z: vec![0.0; measurements],
            sigma: 0.0,
            alpha: 0.0,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `‖y − A x‖₂`.
pub fn residual_norm(op: &SensingOperator, y: &[f64], x: &PixelImage) -> Result<f64> {
    let ax = op.forward(x)?;
    Ok(y.iter()
        .zip(&ax)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Computes `z_t`, `σ_t` and `r_t` for the current state.
fn corrected_residual(
    op: &SensingOperator,
    y: &[f64],
    state: &ReconState,
) -> Result<(Vec<f64>, f64, PixelImage)> {
    let ax = op.forward(&state.x)?;
    let z: Vec<f64> = y
        .iter()
        .zip(&ax)
        .zip(&state.z)
        .map(|((yi, ai), zi)| yi - ai + state.alpha * zi)
        .collect();
    let m = op.rows();
    let sigma = if m == 0 {
        0.0
    } else {
        norm(&z) / (m as f64).sqrt()
    };
    let back = op.adjoint(&z)?;
    let r = PixelImage::new(
        state.x.height(),
        state.x.width(),
        state
            .x
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| a + b)
            .collect(),
    )?;
    Ok((z, sigma, r))
}

fn commit(
    state: &mut ReconState,
    x: PixelImage,
    z: Vec<f64>,
    sigma: f64,
    alpha: f64,
) -> Result<()> {
    let iteration = state.iteration + 1;
    if !x.is_finite() || !alpha.is_finite() {
        return Err(Error::Diverged {
            iteration,
            reason: "non-finite estimate".into(),
        });
    }
    let peak = x.max_abs();
    if peak > DIVERGENCE_LIMIT {
        return Err(Error::Diverged {
            iteration,
            reason: format!("max |x| = {peak:.3e}"),
        });
    }
    *state = ReconState {
        iteration,
        x,
        z,
        sigma,
        alpha,
    };
    Ok(())
}

/// Soft thresholding in an 8×8 tile DCT whose tiling is offset by half a
/// tile; pixels not covered by a full tile pass through. Returns the
/// estimate and the number of coefficients (and pass-through pixels) that
/// survive, which is the divergence of the map.
pub fn tile_shrink(r: &PixelImage, tau: f64) -> (PixelImage, usize) {
    let (h, w) = (r.height(), r.width());
    let half = TILE / 2;
    let mut out = r.clone();
    if h < TILE + half || w < TILE + half {
        return (out, h * w);
    }
    let dct = Dct2d::new(TILE);
    let n_rows = (h - half) / TILE;
    let n_cols = (w - half) / TILE;
    let mut patch = vec![0.0; TILE * TILE];
    let mut coef = vec![0.0; TILE * TILE];
    let mut kept = h * w - n_rows * n_cols * TILE * TILE;
    for tr in 0..n_rows {
        for tc in 0..n_cols {
            let (r0, c0) = (half + tr * TILE, half + tc * TILE);
            for i in 0..TILE {
                let s = (r0 + i) * w + c0;
                patch[i * TILE..(i + 1) * TILE].copy_from_slice(&r.data()[s..s + TILE]);
            }
            dct.forward(&patch, &mut coef);
            for v in coef.iter_mut() {
                *v = soft(*v, tau);
                if *v != 0.0 {
                    kept += 1;
                }
            }
            dct.inverse(&coef, &mut patch);
            for i in 0..TILE {
                let d = (r0 + i) * w + c0;
                out.data_mut()[d..d + TILE].copy_from_slice(&patch[i * TILE..(i + 1) * TILE]);
            }
        }
    }
    (out, kept)
}

/// Iterative soft thresholding: `α = 0`, `η` = tile shrinkage at `λσ`.
pub fn ista_step(
    op: &SensingOperator,
    y: &[f64],
    state: &mut ReconState,
    lambda: f64,
) -> Result<()> {
    let (z, sigma, r) = corrected_residual(op, y, state)?;
    let (x, _) = tile_shrink(&r, lambda * sigma);
    commit(state, x, z, sigma, 0.0)
}

/// AMP with the same shrinkage; `α_{t+1} = ⟨η'(r_t)⟩ / δ`.
pub fn amp_step(
    op: &SensingOperator,
    y: &[f64],
    state: &mut ReconState,
    lambda: f64,
) -> Result<()> {
    let (z, sigma, r) = corrected_residual(op, y, state)?;
    let (x, kept) = tile_shrink(&r, lambda * sigma);
    let alpha = if op.rows() == 0 {
        0.0
    } else {
        kept as f64 / op.rows() as f64
    };
    commit(state, x, z, sigma, alpha)
}

/// How the Onsager weight of a denoiser-based step is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Onsager {
    /// `div D / M`, estimated by a Monte-Carlo probe.
    Divergence,
    /// `div D / (M·D_F)`.
    DampedDivergence(f64),
    /// `1 / D_F`.
    Fixed(f64),
}

/// Denoiser-driven step (D-AMP, damped D-AMP, IDA). `seed` selects the
/// divergence probe and is only used when the weight needs one.
pub fn damp_step(
    op: &SensingOperator,
    y: &[f64],
    state: &mut ReconState,
    denoiser: &dyn Denoiser,
    onsager: Onsager,
    seed: u64,
) -> Result<()> {
    let (z, sigma, r) = corrected_residual(op, y, state)?;
    let x = denoiser.denoise(&r, sigma)?;
    let m = op.rows() as f64;
    let alpha = match onsager {
        Onsager::Fixed(df) => 1.0 / df,
        _ if m == 0.0 => 0.0,
        Onsager::Divergence | Onsager::DampedDivergence(_) => {
            let div = divergence_with(denoiser, &r, Some(&x), sigma, default_epsilon(&r), seed, 1)?;
            match onsager {
                Onsager::DampedDivergence(df) => div / (m * df),
                _ => div / m,
            }
        }
    };
    commit(state, x, z, sigma, alpha)
}
