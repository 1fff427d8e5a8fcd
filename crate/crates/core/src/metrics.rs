//! PSNR and SSIM against an 8-bit reference.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::PixelImage;

const PEAK: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
}

impl QualityReport {
    pub fn compute(reference: &PixelImage, test: &PixelImage) -> Result<Self> {
        let mse = mse(reference, test)?;
        Ok(Self {
            psnr_db: psnr_from_mse(mse),
            ssim: ssim(reference, test)?,
            mse,
        })
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PSNR {} dB  SSIM {:.4}  MSE {:.4}",
            format_psnr(self.psnr_db),
            self.ssim,
            self.mse
        )
    }
}

/// Two decimals, or `inf` for a lossless match.
pub fn format_psnr(psnr: f64) -> String {
    if psnr.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{psnr:.2}")
    }
}

fn check(reference: &PixelImage, test: &PixelImage) -> Result<()> {
    if !reference.same_shape(test) {
        return Err(Error::dims(
            format!("{}x{}", reference.height(), reference.width()),
            format!("{}x{}", test.height(), test.width()),
        ));
    }
    Ok(())
}

pub fn mse(reference: &PixelImage, test: &PixelImage) -> Result<f64> {
    check(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Peak 255; `+∞` when the images match exactly.
pub fn psnr(reference: &PixelImage, test: &PixelImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, test)?))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" Gaussian filtering of a row-major field.
fn filter_valid(data: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &data[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = src[c..c + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for (i, &kv) in k.iter().enumerate() {
            let src = &rows[(r + i) * ow..(r + i + 1) * ow];
            for (o, s) in out[r * ow..(r + 1) * ow].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM over 11×11 Gaussian windows (σ = 1.5, K1 = 0.01, K2 = 0.03,
/// dynamic range 255), evaluated where the window fits inside the image.
pub fn ssim(reference: &PixelImage, test: &PixelImage) -> Result<f64> {
    check(reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::dims(
            format!("at least {SSIM_WINDOW}x{SSIM_WINDOW}"),
            format!("{h}x{w}"),
        ));
    }
    let k = gaussian_kernel();
    let x = reference.data();
    let y = test.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mu_x = filter_valid(x, h, w, &k);
    let mu_y = filter_valid(y, h, w, &k);
    let e_xx = filter_valid(&xx, h, w, &k);
    let e_yy = filter_valid(&yy, h, w, &k);
    let e_xy = filter_valid(&xy, h, w, &k);
    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}
