//! Deterministic low-pass DCT sensing: uniform zigzag sampling and the two
//! adaptive allocators (block boundary variation, DCT-domain estimation).
//!
//! Every measurement a block contributes is a 2D-DCT coefficient taken in
//! zigzag order, so a block's payload is always a prefix of its scan.

mod allocate;
mod bbv;
mod dd;

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{BlockGrid, PixelImage};
use crate::transform::Dct2d;

pub use allocate::{
    balanced_counts, capped_proportional, largest_remainder, proportional_shares, AllocationPlan,
};
pub use bbv::{allocate_bbv, bbv_measure, bbv_side_len, sense_bbv, BbvParams};
pub use dd::{dd_phase1_count, sense_dd, table_threshold};

/// Largest block side whose coefficient count fits the container's u16 field.
pub const MAX_BLOCK: usize = 255;

pub const DEFAULT_BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    /// Uniform zigzag prefix in every block (L-DCT-ZZ).
    Zz,
    /// Block boundary variation allocation (AL-DCT-BBV).
    Bbv,
    /// DCT-domain two-phase allocation (AL-DCT-DD).
    Dd,
}

impl Algorithm {
    pub fn id(self) -> u8 {
        match self {
            Algorithm::Zz => 0,
            Algorithm::Bbv => 1,
            Algorithm::Dd => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Algorithm::Zz),
            1 => Some(Algorithm::Bbv),
            2 => Some(Algorithm::Dd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Zz => "zz",
            Algorithm::Bbv => "bbv",
            Algorithm::Dd => "dd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zz" | "l-dct-zz" => Ok(Algorithm::Zz),
            "bbv" | "al-dct-bbv" => Ok(Algorithm::Bbv),
            "dd" | "al-dct-dd" => Ok(Algorithm::Dd),
            other => Err(Error::Config(format!(
                "unknown sensing algorithm `{other}`"
            ))),
        }
    }
}

/// Compression ratio M/N held as a reduced fraction in (0, 1].
///
/// Keeping it rational makes `M = ⌊C_R·N⌋` and `⌊C_F⌋` exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompressionRatio {
    num: u32,
    den: u32,
}

impl CompressionRatio {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::Config(format!(
                "compression ratio {num}/{den} must lie in (0, 1]"
            )));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// Nearest fraction with denominator 10⁶.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0 && value <= 1.0) {
            return Err(Error::Config(format!(
                "compression ratio {value} must lie in (0, 1]"
            )));
        }
        let num = (value * 1e6).round() as u32;
        Self::new(num.max(1), 1_000_000)
    }

    #[inline]
    pub fn numerator(self) -> u32 {
        self.num
    }

    #[inline]
    pub fn denominator(self) -> u32 {
        self.den
    }

    /// C_R = M/N.
    pub fn value(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// C_F = N/M.
    pub fn factor(self) -> f64 {
        f64::from(self.den) / f64::from(self.num)
    }

    /// ⌊C_F⌋, computed exactly.
    pub fn factor_floor(self) -> usize {
        (self.den / self.num) as usize
    }

    pub fn is_full(self) -> bool {
        self.num == self.den
    }

    /// Measurement budget `⌊C_R·N⌋` for `n` pixels.
    pub fn budget(self, n: usize) -> usize {
        ((n as u128 * u128::from(self.num)) / u128::from(self.den)) as usize
    }
}

impl fmt::Display for CompressionRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for CompressionRatio {
    type Err = Error;

    /// Accepts a decimal (`0.1`) or a fraction (`1/8`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse compression ratio `{s}`"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 9
        {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let num: u64 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let den = 10u64.pow(frac.len() as u32);
        let g = num.gcd(&den).max(1);
        let (num, den) = (num / g, den / g);
        if num > den {
            return Err(Error::Config(format!(
                "compression ratio {s} must lie in (0, 1]"
            )));
        }
        Self::new(
            u32::try_from(num).map_err(|_| bad())?,
            u32::try_from(den).map_err(|_| bad())?,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingConfig {
    pub block: usize,
    pub ratio: CompressionRatio,
    pub algorithm: Algorithm,
    /// DD significance threshold; `None` picks the tabulated value.
    pub threshold: Option<f64>,
}

impl SensingConfig {
    pub fn new(algorithm: Algorithm, ratio: CompressionRatio) -> Self {
        Self {
            block: DEFAULT_BLOCK,
            ratio,
            algorithm,
            threshold: None,
        }
    }

    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.block < 2 || self.block > MAX_BLOCK {
            return Err(Error::Config(format!(
                "block size {} outside 2..={MAX_BLOCK}",
                self.block
            )));
        }
        if let Some(t) = self.threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("threshold {t} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// An encoded image: per-block zigzag-prefix DCT coefficients plus side data.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub(crate) height: usize,
    pub(crate) width: usize,
    pub(crate) block: usize,
    pub(crate) algorithm: Algorithm,
    pub(crate) ratio: CompressionRatio,
    pub(crate) threshold: f64,
    pub(crate) counts: Vec<usize>,
    pub(crate) offsets: Vec<usize>,
    pub(crate) coefficients: Vec<f64>,
    pub(crate) side: Vec<f64>,
}

impl MeasurementSet {
    /// Assembles a set from raw parts, checking the structural invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        height: usize,
        width: usize,
        block: usize,
        algorithm: Algorithm,
        ratio: CompressionRatio,
        threshold: f64,
        counts: Vec<usize>,
        coefficients: Vec<f64>,
        side: Vec<f64>,
    ) -> Result<Self> {
        let grid = BlockGrid::new(height, width, block)?;
        if counts.len() != grid.n_blocks() {
            return Err(Error::dims(
                format!("{} block counts", grid.n_blocks()),
                counts.len(),
            ));
        }
        if let Some(c) = counts.iter().find(|&&c| c > grid.block_len()) {
            return Err(Error::Config(format!(
                "block count {c} exceeds B² = {}",
                grid.block_len()
            )));
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        if *offsets.last().unwrap() != coefficients.len() {
            return Err(Error::dims(
                format!("{} coefficients", offsets.last().unwrap()),
                coefficients.len(),
            ));
        }
        Ok(Self {
            height,
            width,
            block,
            algorithm,
            ratio,
            threshold,
            counts,
            offsets,
            coefficients,
            side,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn ratio(&self) -> CompressionRatio {
        self.ratio
    }

    /// DD threshold in use, 0 for the other algorithms.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn grid(&self) -> BlockGrid {
        BlockGrid::new(self.height, self.width, self.block).expect("validated at construction")
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn block_coefficients(&self, index: usize) -> &[f64] {
        &self.coefficients[self.offsets[index]..self.offsets[index + 1]]
    }

    /// Raw boundary differences (BBV only).
    pub fn side_data(&self) -> &[f64] {
        &self.side
    }

    /// Requested budget `⌊C_R·N⌋` over the cropped region.
    pub fn target(&self) -> usize {
        self.ratio.budget(self.grid().n_pixels())
    }

    /// Phase-1 boundary measurements charged to the budget.
    pub fn side_charge(&self) -> usize {
        match self.algorithm {
            Algorithm::Bbv => bbv::BbvLayout::new(self.grid(), self.ratio)
                .map(|l| l.m_bbv())
                .unwrap_or(0),
            _ => 0,
        }
    }

    /// Measurements spent: DCT coefficients plus charged side measurements.
    pub fn actual(&self) -> usize {
        self.coefficients.len() + self.side_charge()
    }

    /// Same set with every stored value rounded to `f32`, as persisted.
    pub fn to_f32_precision(&self) -> MeasurementSet {
        let round = |v: &f64| f64::from(*v as f32);
        MeasurementSet {
            coefficients: self.coefficients.iter().map(round).collect(),
            side: self.side.iter().map(round).collect(),
            ..self.clone()
        }
    }
}

/// Per-block DCT coefficients of the cropped image, row-major inside blocks.
pub(crate) fn block_spectra(img: &PixelImage, grid: &BlockGrid, dct: &Dct2d) -> Vec<Vec<f64>> {
    (0..grid.n_blocks())
        .into_par_iter()
        .map(|i| {
            let mut px = vec![0.0; grid.block_len()];
            let mut c = vec![0.0; grid.block_len()];
            grid.read_block(img, i, &mut px);
            dct.forward(&px, &mut c);
            c
        })
        .collect()
}

fn gather(spectra: &[Vec<f64>], counts: &[usize], dct: &Dct2d) -> Vec<f64> {
    let total = counts.iter().sum();
    let mut out = vec![0.0; total];
    let mut start = 0;
    for (spec, &n) in spectra.iter().zip(counts) {
        dct.gather_prefix(spec, n, &mut out[start..start + n]);
        start += n;
    }
    out
}

fn grid_for(img: &PixelImage, cfg: &SensingConfig) -> Result<BlockGrid> {
    cfg.validate()?;
    BlockGrid::new(img.height(), img.width(), cfg.block)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    img: &PixelImage,
    cfg: &SensingConfig,
    algorithm: Algorithm,
    threshold: f64,
    spectra: &[Vec<f64>],
    counts: Vec<usize>,
    side: Vec<f64>,
    dct: &Dct2d,
) -> Result<MeasurementSet> {
    let coefficients = gather(spectra, &counts, dct);
    MeasurementSet::from_parts(
        img.height(),
        img.width(),
        cfg.block,
        algorithm,
        cfg.ratio,
        threshold,
        counts,
        coefficients,
        side,
    )
}

/// Uniform low-pass sensing: `⌊M/n_B⌋` zigzag coefficients per block, the
/// remainder spread over the leading blocks.
pub fn sense_zz(img: &PixelImage, cfg: &SensingConfig) -> Result<MeasurementSet> {
    let grid = grid_for(img, cfg)?;
    let plan = zz_plan(&grid, cfg.ratio);
    let dct = Dct2d::new(cfg.block);
    let spectra = block_spectra(img, &grid, &dct);
    finish(
        img,
        cfg,
        Algorithm::Zz,
        0.0,
        &spectra,
        plan.coefficient_counts(),
        Vec::new(),
        &dct,
    )
}

pub(crate) fn zz_plan(grid: &BlockGrid, ratio: CompressionRatio) -> AllocationPlan {
    let target = ratio.budget(grid.n_pixels());
    AllocationPlan::single_phase(balanced_counts(target, grid.n_blocks()), target)
}

/// Collects the zigzag prefix each block is allotted by `plan`.
pub fn apply_plan(
    img: &PixelImage,
    plan: &AllocationPlan,
    cfg: &SensingConfig,
) -> Result<MeasurementSet> {
    let grid = grid_for(img, cfg)?;
    if plan.n_blocks() != grid.n_blocks() {
        return Err(Error::dims(
            format!("plan for {} blocks", grid.n_blocks()),
            plan.n_blocks(),
        ));
    }
    let dct = Dct2d::new(cfg.block);
    let spectra = block_spectra(img, &grid, &dct);
    finish(
        img,
        cfg,
        cfg.algorithm,
        cfg.threshold.unwrap_or(0.0),
        &spectra,
        plan.coefficient_counts(),
        Vec::new(),
        &dct,
    )
}

/// Runs the configured sampler.
pub fn sense(img: &PixelImage, cfg: &SensingConfig) -> Result<MeasurementSet> {
    match cfg.algorithm {
        Algorithm::Zz => sense_zz(img, cfg),
        Algorithm::Bbv => sense_bbv(img, cfg),
        Algorithm::Dd => sense_dd(img, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(s: &str) -> CompressionRatio {
        s.parse().unwrap()
    }

    fn textured(h: usize, w: usize) -> PixelImage {
        PixelImage::from_fn(h, w, |r, c| {
            let (x, y) = (c as f64, r as f64);
            128.0 + 60.0 * (x * 0.21).sin() * (y * 0.13).cos() + if x > y { 40.0 } else { -40.0 }
        })
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!(ratio("0.1"), CompressionRatio::new(1, 10).unwrap());
        assert_eq!(ratio("0.50"), CompressionRatio::new(1, 2).unwrap());
        assert_eq!(ratio("1"), CompressionRatio::new(1, 1).unwrap());
        assert_eq!(ratio("1/8"), CompressionRatio::new(1, 8).unwrap());
        assert_eq!(ratio(".04").factor_floor(), 25);
        for bad in ["1.5", "0", "-0.1", "abc", "", "2/1", "0/4"] {
            assert!(bad.parse::<CompressionRatio>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ratio_and_factor_are_reciprocal() {
        for s in [
            "0.01", "0.02", "0.04", "0.1", "0.2", "0.3", "0.4", "0.5", "1",
        ] {
            let r = ratio(s);
            assert!((r.value() * r.factor() - 1.0).abs() < 1e-12);
        }
        assert_eq!(ratio("0.3").factor_floor(), 3);
        assert_eq!(ratio("0.1").factor_floor(), 10);
    }

    #[test]
    fn zz_budget_on_64x64() {
        let img = textured(64, 64);
        let cfg = SensingConfig::new(Algorithm::Zz, ratio("0.25"));
        let ms = sense_zz(&img, &cfg).unwrap();
        assert_eq!(ms.target(), 1024);
        assert_eq!(ms.counts(), &[256; 4]);
        assert_eq!(ms.actual(), 1024);
    }

    #[test]
    fn zz_remainder_goes_to_first_blocks() {
        let img = textured(64, 64);
        // 0.1 * 4096 = 409.6 -> 409 = 4*102 + 1
        let ms = sense_zz(&img, &SensingConfig::new(Algorithm::Zz, ratio("0.1"))).unwrap();
        assert_eq!(ms.counts(), &[103, 102, 102, 102]);
    }

    #[test]
    fn tiny_budget_leaves_empty_blocks() {
        let img = textured(64, 64);
        let cfg = SensingConfig::new(Algorithm::Zz, CompressionRatio::new(1, 2048).unwrap());
        let ms = sense_zz(&img, &cfg).unwrap();
        assert_eq!(ms.counts(), &[1, 1, 0, 0]);
    }

    #[test]
    fn full_rate_collects_every_coefficient() {
        let img = textured(64, 96);
        for algo in [Algorithm::Zz, Algorithm::Bbv, Algorithm::Dd] {
            let ms = sense(&img, &SensingConfig::new(algo, ratio("1"))).unwrap();
            assert!(ms.counts().iter().all(|&c| c == 1024), "{algo}");
        }
    }

    #[test]
    fn payload_is_the_zigzag_prefix_of_each_block() {
        let img = textured(64, 64);
        let cfg = SensingConfig::new(Algorithm::Dd, ratio("0.2"));
        let ms = sense(&img, &cfg).unwrap();
        let grid = ms.grid();
        let dct = Dct2d::new(32);
        let spectra = block_spectra(&img, &grid, &dct);
        for (i, spectrum) in spectra.iter().enumerate() {
            let got = ms.block_coefficients(i);
            assert_eq!(got.len(), ms.counts()[i]);
            for (k, &v) in got.iter().enumerate() {
                assert_eq!(v, spectrum[dct.zigzag().offsets()[k]]);
            }
        }
    }

    #[test]
    fn apply_plan_honours_counts() {
        let img = textured(64, 64);
        let cfg = SensingConfig::new(Algorithm::Zz, ratio("0.5"));
        let plan = AllocationPlan::single_phase(vec![1024, 0, 7, 300], 2048);
        let ms = apply_plan(&img, &plan, &cfg).unwrap();
        assert_eq!(ms.counts(), &[1024, 0, 7, 300]);
        assert!(ms.block_coefficients(1).is_empty());
        let short = AllocationPlan::single_phase(vec![1, 2], 3);
        assert!(apply_plan(&img, &short, &cfg).is_err());
    }

    #[test]
    fn sensing_is_deterministic() {
        let img = textured(96, 64);
        for algo in [Algorithm::Zz, Algorithm::Bbv, Algorithm::Dd] {
            let cfg = SensingConfig::new(algo, ratio("0.1"));
            assert_eq!(sense(&img, &cfg).unwrap(), sense(&img, &cfg).unwrap());
        }
    }

    #[test]
    fn block_size_limits() {
        let img = textured(64, 64);
        let mut cfg = SensingConfig::new(Algorithm::Zz, ratio("0.1"));
        cfg.block = 1;
        assert!(sense(&img, &cfg).is_err());
        cfg.block = 65;
        assert!(sense(&img, &cfg).is_err());
    }
}
