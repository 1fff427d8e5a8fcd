//! Denoisers `D_σ` for the iterative reconstructions, and the Monte-Carlo
//! divergence estimate that feeds the Onsager correction.
//!
//! Denoisers work on unclamped real fields; values may leave [0, 255]
//! between iterations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::PixelImage;
use crate::transform::Dct2d;

pub trait Denoiser: Send + Sync {
    fn name(&self) -> &'static str;

    /// Removes noise of standard deviation `sigma`. Shape preserving.
    fn denoise(&self, x: &PixelImage, sigma: f64) -> Result<PixelImage>;
}

/// Passes the field through untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Denoiser for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn denoise(&self, x: &PixelImage, _sigma: f64) -> Result<PixelImage> {
        Ok(x.clone())
    }
}

/// Separable Gaussian blur whose width grows with the noise level:
/// `s = min(gain·σ, max_sigma)` pixels, symmetric boundary extension.
#[derive(Debug, Clone, Copy)]
pub struct GaussianBlur {
    pub gain: f64,
    pub max_sigma: f64,
}

impl Default for GaussianBlur {
    fn default() -> Self {
        Self {
            gain: 0.05,
            max_sigma: 3.0,
        }
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

impl GaussianBlur {
    fn kernel(&self, sigma: f64) -> Vec<f64> {
        let s = (self.gain * sigma).min(self.max_sigma);
        if s < 1e-3 {
            return vec![1.0];
        }
        let radius = (3.0 * s).ceil() as isize;
        let mut k: Vec<f64> = (-radius..=radius)
            .map(|d| (-(d * d) as f64 / (2.0 * s * s)).exp())
            .collect();
        let total: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= total);
        k
    }
}

impl Denoiser for GaussianBlur {
    fn name(&self) -> &'static str {
        "blur"
    }

    fn denoise(&self, x: &PixelImage, sigma: f64) -> Result<PixelImage> {
        let k = self.kernel(sigma);
        if k.len() == 1 {
            return Ok(x.clone());
        }
        let r = (k.len() / 2) as isize;
        let (h, w) = (x.height(), x.width());
        let src = x.data();
        let mut tmp = vec![0.0; h * w];
        tmp.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
            let line = &src[row * w..(row + 1) * w];
            for (c, o) in out.iter_mut().enumerate() {
                *o = k
                    .iter()
                    .enumerate()
                    .map(|(j, kv)| kv * line[reflect(c as isize + j as isize - r, w)])
                    .sum();
            }
        });
        let mut out = vec![0.0; h * w];
        out.par_chunks_mut(w).enumerate().for_each(|(row, dst)| {
            for (j, kv) in k.iter().enumerate() {
                let sr = reflect(row as isize + j as isize - r, h);
                for (d, s) in dst.iter_mut().zip(&tmp[sr * w..(sr + 1) * w]) {
                    *d += kv * s;
                }
            }
        });
        PixelImage::new(h, w, out)
    }
}

/// Overlapping block-DCT shrinkage.
///
/// Every `window`×`window` patch on a `step` lattice (the last row and column
/// of patches are pinned to the field edge) is transformed, its AC
/// coefficients are soft-thresholded at `k·σ`, and the inverse patches are
/// averaged back together. The DC term is left alone.
#[derive(Debug, Clone, Copy)]
pub struct DctThreshold {
    pub k: f64,
    pub window: usize,
    pub step: usize,
}

impl Default for DctThreshold {
    fn default() -> Self {
        Self {
            k: DEFAULT_DCT_K,
            window: 8,
            step: 2,
        }
    }
}

/// Default threshold multiplier for [`DctThreshold`].
pub const DEFAULT_DCT_K: f64 = 0.75;

fn lattice(len: usize, window: usize, step: usize) -> Vec<usize> {
    let last = len - window;
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

#[inline]
pub(crate) fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl Denoiser for DctThreshold {
    fn name(&self) -> &'static str {
        "dct"
    }

    fn denoise(&self, x: &PixelImage, sigma: f64) -> Result<PixelImage> {
        let t = self.k * sigma;
        if t <= 0.0 {
            return Ok(x.clone());
        }
        let (h, w) = (x.height(), x.width());
        let n = self.window.min(h).min(w);
        if n == 0 {
            return Ok(x.clone());
        }
        let step = self.step.max(1);
        let dct = Dct2d::new(n);
        let rows = lattice(h, n, step);
        let cols = lattice(w, n, step);
        // each lattice row produces an n-row strip; strips are summed in order
        let strips: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|&r0| {
                let mut strip = vec![0.0; n * w];
                let mut patch = vec![0.0; n * n];
                let mut coef = vec![0.0; n * n];
                let mut back = vec![0.0; n * n];
                for &c0 in &cols {
                    for r in 0..n {
                        let src = (r0 + r) * w + c0;
                        patch[r * n..(r + 1) * n].copy_from_slice(&x.data()[src..src + n]);
                    }
                    dct.forward(&patch, &mut coef);
                    for v in coef.iter_mut().skip(1) {
                        *v = soft(*v, t);
                    }
                    dct.inverse(&coef, &mut back);
                    for r in 0..n {
                        let dst = &mut strip[r * w + c0..r * w + c0 + n];
                        for (d, s) in dst.iter_mut().zip(&back[r * n..(r + 1) * n]) {
                            *d += s;
                        }
                    }
                }
                strip
            })
            .collect();
        let mut acc = vec![0.0; h * w];
        let mut weight = vec![0.0; h * w];
        let col_cover: Vec<f64> = {
            let mut cover = vec![0.0; w];
            for &c0 in &cols {
                cover[c0..c0 + n].iter_mut().for_each(|v| *v += 1.0);
            }
            cover
        };
        for (strip, &r0) in strips.iter().zip(&rows) {
            for r in 0..n {
                let row = (r0 + r) * w;
                for c in 0..w {
                    acc[row + c] += strip[r * w + c];
                    weight[row + c] += col_cover[c];
                }
            }
        }
        let out = acc.iter().zip(&weight).map(|(a, wt)| a / wt).collect();
        PixelImage::new(h, w, out)
    }
}

/// A denoiser chosen by name plus numeric parameters, e.g. `dct:k=1.5,step=4`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenoiserSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
}

impl DenoiserSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_owned(), value);
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!(
                "denoiser `{}` has no parameter `{k}`",
                self.name
            ))),
            None => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Denoiser>> {
        match self.name.as_str() {
            "identity" | "none" => {
                self.check_keys(&[])?;
                Ok(Box::new(Identity))
            }
            "blur" | "gaussian" => {
                self.check_keys(&["gain", "max_sigma"])?;
                let d = GaussianBlur::default();
                let gain = self.param("gain", d.gain);
                let max_sigma = self.param("max_sigma", d.max_sigma);
                if !(gain >= 0.0 && max_sigma >= 0.0) {
                    return Err(Error::Config("blur parameters must be >= 0".into()));
                }
                Ok(Box::new(GaussianBlur { gain, max_sigma }))
            }
            "dct" | "dct-threshold" => {
                self.check_keys(&["k", "window", "step"])?;
                let d = DctThreshold::default();
                let k = self.param("k", d.k);
                let window = self.param("window", d.window as f64);
                let step = self.param("step", d.step as f64);
                if !(k >= 0.0 && window >= 1.0 && step >= 1.0) {
                    return Err(Error::Config(
                        "dct parameters need k >= 0, window >= 1, step >= 1".into(),
                    ));
                }
                Ok(Box::new(DctThreshold {
                    k,
                    window: window as usize,
                    step: step as usize,
                }))
            }
            other => Err(Error::UnknownDenoiser(other.to_owned())),
        }
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = DenoiserSpec::named(name.trim());
        for item in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value in `{item}`")))?;
            spec.params.insert(k.trim().to_owned(), v);
        }
        Ok(spec)
    }
}

/// Runs the named denoiser once.
pub fn denoise(spec: &DenoiserSpec, x: &PixelImage, sigma: f64) -> Result<PixelImage> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::Config(format!("noise level {sigma} must be >= 0")));
    }
    spec.build()?.denoise(x, sigma)
}

/// Probe step used by the reconstructions: `max|x|·1e-3 + 1e-6`.
pub fn default_epsilon(x: &PixelImage) -> f64 {
    x.max_abs() * 1e-3 + 1e-6
}

fn rademacher(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Seeded Rademacher (±1) probe, generated sequentially.
pub fn rademacher_probe(len: usize, seed: u64) -> Vec<f64> {
    rademacher(&mut ChaCha8Rng::seed_from_u64(seed), len)
}

/// Monte-Carlo divergence `(1/ε)·⟨b, D(x + εb) − D(x)⟩`, averaged over
/// `probes` Rademacher vectors drawn in sequence from one seeded stream
/// (the first equals [`rademacher_probe`]). `dx` is `D(x)` if already
/// available.
pub fn divergence_with(
    den: &dyn Denoiser,
    x: &PixelImage,
    dx: Option<&PixelImage>,
    sigma: f64,
    epsilon: f64,
    seed: u64,
    probes: usize,
) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config(format!("probe step {epsilon} must be > 0")));
    }
    if probes == 0 {
        return Err(Error::Config("at least one probe is needed".into()));
    }
    let owned;
    let base = match dx {
        Some(d) => d,
        None => {
            owned = den.denoise(x, sigma)?;
            &owned
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..probes {
        let probe = rademacher(&mut rng, x.len());
        let shifted = PixelImage::new(
            x.height(),
            x.width(),
            x.data()
                .iter()
                .zip(&probe)
                .map(|(v, b)| v + epsilon * b)
                .collect(),
        )?;
        let moved = den.denoise(&shifted, sigma)?;
        let dot: f64 = probe
            .iter()
            .zip(moved.data().iter().zip(base.data()))
            .map(|(b, (m, d))| b * (m - d))
            .sum();
        total += dot / epsilon;
    }
    Ok(total / probes as f64)
}

/// Single-probe Monte-Carlo divergence of the named denoiser.
pub fn divergence(
    spec: &DenoiserSpec,
    x: &PixelImage,
    sigma: f64,
    epsilon: f64,
    seed: u64,
) -> Result<f64> {
    divergence_with(spec.build()?.as_ref(), x, None, sigma, epsilon, seed, 1)
}

/// [`divergence`] averaged over `probes` probes.
pub fn divergence_averaged(
    spec: &DenoiserSpec,
    x: &PixelImage,
    sigma: f64,
    epsilon: f64,
    seed: u64,
    probes: usize,
) -> Result<f64> {
    divergence_with(
        spec.build()?.as_ref(),
        x,
        None,
        sigma,
        epsilon,
        seed,
        probes,
    )
}
