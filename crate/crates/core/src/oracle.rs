//! Full-sensing reference selections (THB and THI).
//!
//! Both see every DCT coefficient and keep the largest magnitudes at their
//! true positions: THB keeps the same number in every block, THI keeps the
//! global top M. They bound what any coefficient-count allocator could reach.

use std::cmp::Ordering;

use crate::error::Result;
use crate::image::{BlockGrid, PixelImage};
use crate::sensing::{balanced_counts, block_spectra, SensingConfig};
use crate::transform::Dct2d;

/// Coefficients kept by an oracle and the resulting decode.
#[derive(Debug, Clone)]
pub struct OracleDecode {
    /// Kept coefficients per block.
    pub counts: Vec<usize>,
    pub image: PixelImage,
}

impl OracleDecode {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Descending magnitude, then lower zigzag index, then lower block index.
fn rank(a: (usize, usize, f64), b: (usize, usize, f64)) -> Ordering {
    b.2.abs()
        .total_cmp(&a.2.abs())
        .then(a.1.cmp(&b.1))
        .then(a.0.cmp(&b.0))
}

fn decode_masks(
    grid: &BlockGrid,
    dct: &Dct2d,
    spectra: &[Vec<f64>],
    keep: &[Vec<bool>],
) -> PixelImage {
    grid.par_map_blocks(|i, out| {
        let coeffs: Vec<f64> = spectra[i]
            .iter()
            .zip(&keep[i])
            .map(|(&c, &k)| if k { c } else { 0.0 })
            .collect();
        dct.inverse(&coeffs, out);
    })
}

fn setup(img: &PixelImage, cfg: &SensingConfig) -> Result<(BlockGrid, Dct2d, Vec<Vec<f64>>)> {
    cfg.validate()?;
    let grid = BlockGrid::new(img.height(), img.width(), cfg.block)?;
    let dct = Dct2d::new(cfg.block);
    let spectra = block_spectra(img, &grid, &dct);
    Ok((grid, dct, spectra))
}

/// One threshold per block: the `⌊M/n_B⌋` (balanced) largest coefficients of
/// every block.
pub fn thb(img: &PixelImage, cfg: &SensingConfig) -> Result<OracleDecode> {
    let (grid, dct, spectra) = setup(img, cfg)?;
    let counts = balanced_counts(cfg.ratio.budget(grid.n_pixels()), grid.n_blocks());
    let zz = dct.zigzag().offsets();
    let keep: Vec<Vec<bool>> = spectra
        .iter()
        .zip(&counts)
        .map(|(spec, &m)| {
            let mut cand: Vec<(usize, usize, f64)> = zz
                .iter()
                .enumerate()
                .map(|(k, &off)| (0, k, spec[off]))
                .collect();
            cand.sort_by(|a, b| rank(*a, *b));
            let mut mask = vec![false; grid.block_len()];
            for &(_, k, _) in &cand[..m] {
                mask[zz[k]] = true;
            }
            mask
        })
        .collect();
    Ok(OracleDecode {
        image: decode_masks(&grid, &dct, &spectra, &keep),
        counts,
    })
}

/// One threshold for the whole image: the global top-M coefficients.
pub fn thi(img: &PixelImage, cfg: &SensingConfig) -> Result<OracleDecode> {
    let (grid, dct, spectra) = setup(img, cfg)?;
    let m = cfg.ratio.budget(grid.n_pixels());
    let zz = dct.zigzag().offsets();
    let mut cand: Vec<(usize, usize, f64)> = spectra
        .iter()
        .enumerate()
        .flat_map(|(i, spec)| {
            zz.iter()
                .enumerate()
                .map(move |(k, &off)| (i, k, spec[off]))
        })
        .collect();
    if m < cand.len() {
        cand.select_nth_unstable_by(m, |a, b| rank(*a, *b));
    }
    let mut keep = vec![vec![false; grid.block_len()]; grid.n_blocks()];
    let mut counts = vec![0; grid.n_blocks()];
    for &(i, k, _) in &cand[..m] {
        keep[i][zz[k]] = true;
        counts[i] += 1;
    }
    Ok(OracleDecode {
        image: decode_masks(&grid, &dct, &spectra, &keep),
        counts,
    })
}
