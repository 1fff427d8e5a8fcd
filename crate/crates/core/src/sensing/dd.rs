//! DCT-domain (DD) allocation.
//!
//! Phase 1 takes `⌊B²/(2·C_F)⌋` zigzag coefficients from every block and
//! counts how many exceed the significance threshold T. Phase 2 spends the
//! rest of the budget in proportion to those counts, continuing each block's
//! zigzag prefix.

use crate::error::Result;
use crate::image::PixelImage;
use crate::transform::Dct2d;

use super::allocate::{capped_proportional, AllocationPlan};
use super::{
    block_spectra, finish, grid_for, Algorithm, CompressionRatio, MeasurementSet, SensingConfig,
};

/// Tabulated significance threshold for an image of `height` rows.
///
/// Heights below 384 use the 256-row column, everything else the 512-row one.
pub fn table_threshold(height: usize, ratio: CompressionRatio) -> f64 {
    let cf = ratio.factor();
    let upper = if height < 384 { 3.33 } else { 10.0 };
    if cf <= 2.0 {
        15.0
    } else if cf < upper {
        30.0
    } else {
        60.0
    }
}

/// Phase-1 coefficients per block, `⌊B²/(2·C_F)⌋ = ⌊B²·num / (2·den)⌋`.
pub fn dd_phase1_count(block: usize, ratio: CompressionRatio) -> usize {
    let b2 = (block * block) as u64;
    ((b2 * u64::from(ratio.numerator())) / (2 * u64::from(ratio.denominator()))) as usize
}

pub(crate) fn dd_plan(
    spectra: &[Vec<f64>],
    block: usize,
    ratio: CompressionRatio,
    threshold: f64,
    dct: &Dct2d,
) -> AllocationPlan {
    let n_blocks = spectra.len();
    let b2 = block * block;
    let m1 = dd_phase1_count(block, ratio);
    let target = ratio.budget(n_blocks * b2);
    let significant: Vec<f64> = spectra
        .iter()
        .map(|c| {
            dct.zigzag().offsets()[..m1]
                .iter()
                .filter(|&&off| c[off].abs() > threshold)
                .count() as f64
        })
        .collect();
    let budget = target.saturating_sub(n_blocks * m1);
    let caps = vec![b2 - m1; n_blocks];
    let m2 = capped_proportional(&significant, budget, &caps);
    AllocationPlan {
        m1: vec![m1; n_blocks],
        m2,
        side: 0,
        target,
    }
}

/// Two-phase adaptive sensing in the DCT domain.
pub fn sense_dd(img: &PixelImage, cfg: &SensingConfig) -> Result<MeasurementSet> {
    let grid = grid_for(img, cfg)?;
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| table_threshold(img.height(), cfg.ratio));
    let dct = Dct2d::new(cfg.block);
    let spectra = block_spectra(img, &grid, &dct);
    let plan = dd_plan(&spectra, cfg.block, cfg.ratio, threshold, &dct);
    finish(
        img,
        cfg,
        Algorithm::Dd,
        threshold,
        &spectra,
        plan.coefficient_counts(),
        Vec::new(),
        &dct,
    )
}
