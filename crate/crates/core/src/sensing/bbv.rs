//! Block boundary variation (BBV) allocation.
//!
//! Phase 1 samples absolute differences of adjacent pixels at stride `L`
//! along each block's top row and left column. A block's bottom and right
//! sides are the top and left samples of its neighbours; blocks on the
//! bottom/right image edge sample their own last row/column instead.
//! Phase 2 hands out the remaining DCT coefficients in proportion to the
//! summed variation.

use crate::error::{Error, Result};
use crate::image::{BlockGrid, PixelImage};
use crate::transform::Dct2d;

use super::allocate::{capped_proportional, AllocationPlan};
use super::{
    block_spectra, finish, grid_for, sense_zz, Algorithm, CompressionRatio, MeasurementSet,
    SensingConfig,
};

/// Phase-1 sampling geometry and results.
#[derive(Debug, Clone, PartialEq)]
pub struct BbvParams {
    /// Stride L = ⌊C_F⌋ between samples.
    pub stride: usize,
    /// Offset X₀ = Y₀ = ⌊L/2⌋ of the first sample along a side.
    pub offset: usize,
    /// Samples per block side, n_S = ⌊B/L⌋.
    pub n_s: usize,
    /// Per-block boundary variation.
    pub variation: Vec<f64>,
    /// Phase-1 measurements charged to the budget.
    pub m_bbv: usize,
    /// Raw differences: top then left samples for each block, then the
    /// bottom-edge row, then the right-edge column.
    pub side: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BbvLayout {
    grid: BlockGrid,
    stride: usize,
    offset: usize,
    n_s: usize,
}

impl BbvLayout {
    pub(crate) fn new(grid: BlockGrid, ratio: CompressionRatio) -> Result<Self> {
        let stride = ratio.factor_floor();
        if stride == 0 {
            return Err(Error::Config("compression factor below 1".into()));
        }
        Ok(Self {
            grid,
            stride,
            offset: stride / 2,
            n_s: grid.block() / stride,
        })
    }

    /// `2·n_S·n_B + ⌈(H+W)/L⌉`, zero when no samples fit in a block.
    pub(crate) fn m_bbv(&self) -> usize {
        if self.n_s == 0 {
            return 0;
        }
        let edge = (self.grid.height() + self.grid.width()).div_ceil(self.stride);
        2 * self.n_s * self.grid.n_blocks() + edge
    }

    /// Local position of the first pixel of sample `j` along a side.
    fn local(&self, j: usize) -> usize {
        if self.offset >= 1 {
            self.offset + j * self.stride - 1
        } else {
            j
        }
    }

    /// Adjacent pixel pair starting at `start + local(j)`, shifted back by one
    /// if it would run off the cropped image.
    fn pair(&self, start: usize, j: usize, limit: usize) -> (usize, usize) {
        let a = start + self.local(j);
        if a + 1 >= limit {
            (a - 1, a)
        } else {
            (a, a + 1)
        }
    }

    fn horizontal(&self, img: &PixelImage, row: usize, col0: usize, out: &mut Vec<f64>) {
        for j in 0..self.n_s {
            let (a, b) = self.pair(col0, j, self.grid.width());
            out.push((img.get(row, b) - img.get(row, a)).abs());
        }
    }

    fn vertical(&self, img: &PixelImage, col: usize, row0: usize, out: &mut Vec<f64>) {
        for j in 0..self.n_s {
            let (a, b) = self.pair(row0, j, self.grid.height());
            out.push((img.get(b, col) - img.get(a, col)).abs());
        }
    }

    fn measure(&self, img: &PixelImage) -> BbvParams {
        let g = &self.grid;
        let (b, rows, cols, n) = (g.block(), g.rows(), g.cols(), self.n_s);
        let mut side = Vec::with_capacity(bbv_side_len(g, n));
        for i in 0..g.n_blocks() {
            let (br, bc) = g.position(i);
            self.horizontal(img, br * b, bc * b, &mut side);
            self.vertical(img, bc * b, br * b, &mut side);
        }
        let bottom_at = side.len();
        for bc in 0..cols {
            self.horizontal(img, g.height() - 1, bc * b, &mut side);
        }
        let right_at = side.len();
        for br in 0..rows {
            self.vertical(img, g.width() - 1, br * b, &mut side);
        }

        let sum = |s: &[f64]| s.iter().sum::<f64>();
        let top = |i: usize| sum(&side[2 * n * i..2 * n * i + n]);
        let left = |i: usize| sum(&side[2 * n * i + n..2 * n * (i + 1)]);
        let variation = (0..g.n_blocks())
            .map(|i| {
                let (br, bc) = g.position(i);
                let bottom = if br + 1 < rows {
                    top(i + cols)
                } else {
                    sum(&side[bottom_at + bc * n..bottom_at + (bc + 1) * n])
                };
                let right = if bc + 1 < cols {
                    left(i + 1)
                } else {
                    sum(&side[right_at + br * n..right_at + (br + 1) * n])
                };
                top(i) + left(i) + bottom + right
            })
            .collect();

        BbvParams {
            stride: self.stride,
            offset: self.offset,
            n_s: n,
            variation,
            m_bbv: self.m_bbv(),
            side,
        }
    }
}

/// Number of raw differences stored for a grid with `n_s` samples per side.
pub fn bbv_side_len(grid: &BlockGrid, n_s: usize) -> usize {
    n_s * (2 * grid.n_blocks() + grid.rows() + grid.cols())
}

/// Samples the boundary variation of every block. When `⌊C_F⌋ > B` the
/// returned params have `n_s == 0` and the caller should fall back to
/// uniform sensing.
pub fn bbv_measure(img: &PixelImage, cfg: &SensingConfig) -> Result<BbvParams> {
    let grid = grid_for(img, cfg)?;
    let cropped = img.crop(grid.height(), grid.width())?;
    Ok(BbvLayout::new(grid, cfg.ratio)?.measure(&cropped))
}

/// Splits `target − M_BBV` coefficients over the blocks in proportion to
/// their boundary variation, capping each block at B².
pub fn allocate_bbv(
    params: &BbvParams,
    target: usize,
    n_blocks: usize,
    block: usize,
) -> Result<AllocationPlan> {
    if params.variation.len() != n_blocks {
        return Err(Error::dims(
            format!("{n_blocks} variations"),
            params.variation.len(),
        ));
    }
    if target <= params.m_bbv {
        return Err(Error::Config(format!(
            "budget {target} does not exceed the {} boundary measurements",
            params.m_bbv
        )));
    }
    let caps = vec![block * block; n_blocks];
    let m2 = capped_proportional(&params.variation, target - params.m_bbv, &caps);
    Ok(AllocationPlan {
        m1: vec![0; n_blocks],
        m2,
        side: params.m_bbv,
        target,
    })
}

/// Adaptive sensing driven by block boundary variation.
///
/// Falls back to [`sense_zz`] (and reports [`Algorithm::Zz`]) when no
/// boundary sample fits in a block, or at full rate where every coefficient
/// is collected anyway.
pub fn sense_bbv(img: &PixelImage, cfg: &SensingConfig) -> Result<MeasurementSet> {
    let grid = grid_for(img, cfg)?;
    let layout = BbvLayout::new(grid, cfg.ratio)?;
    if layout.n_s == 0 || cfg.ratio.is_full() {
        return sense_zz(img, cfg);
    }
    let cropped = img.crop(grid.height(), grid.width())?;
    let params = layout.measure(&cropped);
    let target = cfg.ratio.budget(grid.n_pixels());
    let plan = allocate_bbv(&params, target, grid.n_blocks(), grid.block())?;
    let dct = Dct2d::new(cfg.block);
    let spectra = block_spectra(img, &grid, &dct);
    finish(
        img,
        cfg,
        Algorithm::Bbv,
        0.0,
        &spectra,
        plan.coefficient_counts(),
        params.side,
        &dct,
    )
}
