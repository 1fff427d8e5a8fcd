//! Matrix-free sensing operator `A` and its adjoint.
//!
//! `A` maps a cropped pixel field to the concatenation of every block's
//! zigzag-prefix DCT coefficients. Its rows are orthonormal, so `A·A* = I`
//! and `A*` is exactly the direct inverse-DCT decoder.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{BlockGrid, PixelImage};
use crate::sensing::MeasurementSet;
use crate::transform::Dct2d;

#[derive(Debug, Clone)]
pub struct SensingOperator {
    grid: BlockGrid,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    dct: Dct2d,
}

impl SensingOperator {
    pub fn new(grid: BlockGrid, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != grid.n_blocks() {
            return Err(Error::dims(
                format!("{} block counts", grid.n_blocks()),
                counts.len(),
            ));
        }
        if counts.iter().any(|&c| c > grid.block_len()) {
            return Err(Error::Config("block count exceeds B²".into()));
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for &c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        Ok(Self {
            dct: Dct2d::new(grid.block()),
            grid,
            counts,
            offsets,
        })
    }

    pub fn for_measurements(ms: &MeasurementSet) -> Self {
        Self::new(ms.grid(), ms.counts().to_vec()).expect("measurement set is consistent")
    }

    pub fn grid(&self) -> &BlockGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of measurements M.
    pub fn rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Signal length N = n_B·B².
    pub fn cols(&self) -> usize {
        self.grid.n_pixels()
    }

    /// Undersampling ratio δ = M/N.
    pub fn delta(&self) -> f64 {
        self.rows() as f64 / self.cols() as f64
    }

    /// `y = A x`.
    pub fn forward(&self, x: &PixelImage) -> Result<Vec<f64>> {
        x.check_shape(self.grid.height(), self.grid.width())?;
        let mut y = vec![0.0; self.rows()];
        self.forward_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn forward_into(&self, x: &PixelImage, y: &mut [f64]) {
        let bl = self.grid.block_len();
        let mut chunks: Vec<&mut [f64]> = Vec::with_capacity(self.counts.len());
        let mut rest = y;
        for &c in &self.counts {
            let (head, tail) = rest.split_at_mut(c);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().enumerate().for_each(|(i, out)| {
            if out.is_empty() {
                return;
            }
            let mut px = vec![0.0; bl];
            let mut coeffs = vec![0.0; bl];
            self.grid.read_block(x, i, &mut px);
            self.dct.forward(&px, &mut coeffs);
            let n = out.len();
            self.dct.gather_prefix(&coeffs, n, out);
        });
    }

    /// `x = A* y`: scatter into zigzag positions, inverse DCT, reassemble.
    pub fn adjoint(&self, y: &[f64]) -> Result<PixelImage> {
        if y.len() != self.rows() {
            return Err(Error::dims(
                format!("{} measurements", self.rows()),
                y.len(),
            ));
        }
        Ok(self.grid.par_map_blocks(|i, out| {
            let slice = &y[self.offsets[i]..self.offsets[i + 1]];
            self.dct.decode_prefix(slice, out);
        }))
    }
}
