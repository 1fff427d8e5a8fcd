//! Grayscale rasters and their B×B block decomposition.
//!
//! Pixels are held as `f64` everywhere inside the crate. Quantization to
//! 8 bits happens only when writing a file, so reconstructions can be scored
//! before rounding.

use std::path::Path;

use image::{ColorType, DynamicImage, GrayImage, ImageFormat};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major grayscale raster.
///
/// The same type carries intermediate real-valued fields during iterative
/// reconstruction, so values are not range-checked here.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PixelImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dims(
                format!("{} samples for {height}x{width}", height * width),
                data.len(),
            ));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &PixelImage) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn check_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::dims(
                format!("{height}x{width}"),
                format!("{}x{}", self.height, self.width),
            ));
        }
        Ok(())
    }

    /// Top-left `height`×`width` window.
    pub fn crop(&self, height: usize, width: usize) -> Result<PixelImage> {
        if height > self.height || width > self.width {
            return Err(Error::dims(
                format!("at most {}x{}", self.height, self.width),
                format!("{height}x{width}"),
            ));
        }
        if height == self.height && width == self.width {
            return Ok(self.clone());
        }
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            let start = r * self.width;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(PixelImage {
            height,
            width,
            data,
        })
    }

    pub fn clamped(&self) -> PixelImage {
        PixelImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(0.0, 255.0)).collect(),
        }
    }

    /// Rounds and clamps to 8 bits, as written to disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| {
                if v.is_nan() {
                    0
                } else {
                    v.round().clamp(0.0, 255.0) as u8
                }
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Loads an 8-bit grayscale PGM (P5) or PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes)
}

/// Decodes an in-memory PGM or PNG file.
pub fn decode_image(bytes: &[u8]) -> Result<PixelImage> {
    let format = sniff_format(bytes)?;
    if format == ImageFormat::Pnm {
        check_pgm_header(bytes)?;
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Format(e.to_string()))?;
    match decoded.color() {
        ColorType::L8 => {}
        other => {
            return Err(Error::Format(format!(
                "unsupported pixel layout {other:?}; expected 8-bit grayscale"
            )))
        }
    }
    let gray = decoded.into_luma8();
    let (w, h) = gray.dimensions();
    PixelImage::from_bytes(h as usize, w as usize, gray.as_raw())
}

fn sniff_format(bytes: &[u8]) -> Result<ImageFormat> {
    if bytes.starts_with(b"P5") {
        Ok(ImageFormat::Pnm)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        Ok(ImageFormat::Png)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && bytes[1].is_ascii_digit() {
        Err(Error::Format(format!(
            "unsupported netpbm variant P{}; only binary P5 is accepted",
            bytes[1] as char
        )))
    } else {
        Err(Error::Format("not a PGM (P5) or PNG file".into()))
    }
}

/// Rejects maxval other than 255 before the decoder rescales it.
fn check_pgm_header(bytes: &[u8]) -> Result<()> {
    let mut fields = Vec::with_capacity(3);
    let mut i = 2;
    while fields.len() < 3 && i < bytes.len() {
        let b = bytes[i];
        if b == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if b.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            fields.push(
                std::str::from_utf8(&bytes[start..i])
                    .unwrap_or("0")
                    .to_owned(),
            );
            continue;
        } else if !b.is_ascii_whitespace() {
            return Err(Error::Format("malformed PGM header".into()));
        }
        i += 1;
    }
    match fields.get(2).map(|s| s.parse::<u32>()) {
        Some(Ok(255)) => Ok(()),
        Some(Ok(maxval)) => Err(Error::Format(format!(
            "unsupported PGM maxval {maxval}; expected 255"
        ))),
        _ => Err(Error::Format("truncated PGM header".into())),
    }
}

/// Writes the image, choosing PNG for a `.png` extension and binary PGM otherwise.
pub fn save_image(img: &PixelImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(img)?
    } else {
        encode_pgm(img)
    };
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn encode_pgm(img: &PixelImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.to_bytes());
    out
}

pub fn encode_png(img: &PixelImage) -> Result<Vec<u8>> {
    let gray = GrayImage::from_raw(img.width as u32, img.height as u32, img.to_bytes())
        .ok_or_else(|| Error::Format("raster size overflow".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    DynamicImage::ImageLuma8(gray)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(out.into_inner())
}

/// Tiling of an image into non-overlapping `block`×`block` squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    block: usize,
    rows: usize,
    cols: usize,
}

impl BlockGrid {
    /// Grid for a source of `height`×`width`; trailing rows and columns that
    /// do not fill a whole block are dropped.
    pub fn new(height: usize, width: usize, block: usize) -> Result<Self> {
        if block < 2 || block > height.min(width) {
            return Err(Error::BlockSize {
                block,
                height,
                width,
            });
        }
        Ok(Self {
            block,
            rows: height / block,
            cols: width / block,
        })
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn block_len(&self) -> usize {
        self.block * self.block
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.rows * self.block
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.cols * self.block
    }

    /// Total coefficient count over the cropped region.
    #[inline]
    pub fn n_pixels(&self) -> usize {
        self.n_blocks() * self.block_len()
    }

    /// Row-major (block row, block col) of block `index`.
    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Copies block `index` (row-major inside the block) into `out`.
    pub fn read_block(&self, img: &PixelImage, index: usize, out: &mut [f64]) {
        let b = self.block;
        let (br, bc) = self.position(index);
        let w = img.width();
        for r in 0..b {
            let src = (br * b + r) * w + bc * b;
            out[r * b..(r + 1) * b].copy_from_slice(&img.data()[src..src + b]);
        }
    }

    fn write_block(&self, data: &mut [f64], width: usize, index: usize, block: &[f64]) {
        let b = self.block;
        let (br, bc) = self.position(index);
        for r in 0..b {
            let dst = (br * b + r) * width + bc * b;
            data[dst..dst + b].copy_from_slice(&block[r * b..(r + 1) * b]);
        }
    }

    /// Assembles a cropped-size image from per-block pixel vectors.
    pub fn assemble<T: AsRef<[f64]> + Sync>(&self, blocks: &[T]) -> Result<PixelImage> {
        if blocks.len() != self.n_blocks() {
            return Err(Error::dims(
                format!("{} blocks", self.n_blocks()),
                blocks.len(),
            ));
        }
        let (h, w) = (self.height(), self.width());
        let mut data = vec![0.0; h * w];
        for (i, blk) in blocks.iter().enumerate() {
            let blk = blk.as_ref();
            if blk.len() != self.block_len() {
                return Err(Error::dims(
                    format!("{} samples per block", self.block_len()),
                    blk.len(),
                ));
            }
            self.write_block(&mut data, w, i, blk);
        }
        PixelImage::new(h, w, data)
    }

    /// Builds a cropped image by evaluating `f` independently for every block.
    pub(crate) fn par_map_blocks<F>(&self, f: F) -> PixelImage
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let b = self.block;
        let w = self.width();
        let row_len = b * w;
        let mut data = vec![0.0; self.height() * w];
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(br, strip)| {
                let mut buf = vec![0.0; b * b];
                for bc in 0..self.cols {
                    buf.iter_mut().for_each(|v| *v = 0.0);
                    f(br * self.cols + bc, &mut buf);
                    for r in 0..b {
                        let dst = r * w + bc * b;
                        strip[dst..dst + b].copy_from_slice(&buf[r * b..(r + 1) * b]);
                    }
                }
            });
        PixelImage {
            height: self.height(),
            width: w,
            data,
        }
    }
}

/// Crops `img` to whole blocks of size `block` and splits it in row-major block order.
pub fn partition(img: &PixelImage, block: usize) -> Result<(BlockGrid, Vec<Vec<f64>>)> {
    let grid = BlockGrid::new(img.height(), img.width(), block)?;
    let blocks = (0..grid.n_blocks())
        .map(|i| {
            let mut buf = vec![0.0; grid.block_len()];
            grid.read_block(img, i, &mut buf);
            buf
        })
        .collect();
    Ok((grid, blocks))
}

/// Inverse of [`partition`] on the cropped region.
pub fn reassemble(grid: &BlockGrid, blocks: &[Vec<f64>]) -> Result<PixelImage> {
    grid.assemble(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> PixelImage {
        PixelImage::from_fn(h, w, |r, c| ((r * 7 + c * 3) % 256) as f64)
    }

    #[test]
    fn pgm_bytes_map_directly() {
        let mut file = b"P5\n2 2\n255\n".to_vec();
        file.extend_from_slice(&[0, 255, 128, 64]);
        let img = decode_image(&file).unwrap();
        assert_eq!((img.height(), img.width()), (2, 2));
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let mut file = b"P5\n# made by hand\n3 1\n255\n".to_vec();
        file.extend_from_slice(&[1, 2, 3]);
        let img = decode_image(&file).unwrap();
        assert_eq!(img.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn truncated_pgm_is_a_format_error() {
        let mut file = b"P5\n4 4\n255\n".to_vec();
        file.extend_from_slice(&[1, 2, 3]);
        assert!(matches!(decode_image(&file), Err(Error::Format(_))));
    }

    #[test]
    fn sixteen_bit_pgm_is_rejected() {
        let mut file = b"P5\n1 1\n65535\n".to_vec();
        file.extend_from_slice(&[0, 1]);
        assert!(matches!(decode_image(&file), Err(Error::Format(_))));
    }

    #[test]
    fn ascii_pgm_is_rejected() {
        assert!(matches!(
            decode_image(b"P2\n1 1\n255\n7\n"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn png_round_trip() {
        let img = ramp(5, 9);
        let png = encode_png(&img).unwrap();
        assert_eq!(decode_image(&png).unwrap(), img);
    }

    #[test]
    fn rgb_png_is_rejected() {
        let rgb = image::RgbImage::from_pixel(2, 2, image::Rgb([1, 2, 3]));
        let mut out = std::io::Cursor::new(Vec::new());
        DynamicImage::ImageRgb8(rgb)
            .write_to(&mut out, ImageFormat::Png)
            .unwrap();
        assert!(matches!(
            decode_image(&out.into_inner()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn save_quantizes_and_clamps() {
        let img = PixelImage::new(1, 4, vec![-3.0, 12.4, 12.6, 300.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.data(), &[0.0, 12.0, 13.0, 255.0]);
    }

    #[test]
    fn block_counts_follow_floor_rule() {
        assert_eq!(BlockGrid::new(256, 256, 32).unwrap().n_blocks(), 64);
        assert_eq!(BlockGrid::new(512, 512, 32).unwrap().n_blocks(), 256);
        let g = BlockGrid::new(70, 70, 32).unwrap();
        assert_eq!(g.n_blocks(), 4);
        assert_eq!(70 - g.height(), 6);
        assert_eq!(70 - g.width(), 6);
    }

    #[test]
    fn block_size_out_of_range() {
        assert!(BlockGrid::new(16, 16, 1).is_err());
        assert!(BlockGrid::new(16, 40, 17).is_err());
        assert!(BlockGrid::new(16, 16, 16).is_ok());
    }

    #[test]
    fn partition_layout_is_row_major() {
        let img = ramp(8, 12);
        let (grid, blocks) = partition(&img, 4).unwrap();
        assert_eq!((grid.rows(), grid.cols()), (2, 3));
        // block (1,2) covers rows 4..8, cols 8..12
        assert_eq!(blocks[5][0], img.get(4, 8));
        assert_eq!(blocks[5][15], img.get(7, 11));
    }

    #[test]
    fn reassemble_inverts_partition_on_cropped_region() {
        let img = ramp(37, 45);
        let (grid, blocks) = partition(&img, 8).unwrap();
        let back = reassemble(&grid, &blocks).unwrap();
        assert_eq!(back, img.crop(32, 40).unwrap());
    }

    #[test]
    fn single_block_is_identity() {
        let img = ramp(6, 6);
        let (grid, blocks) = partition(&img, 6).unwrap();
        assert_eq!(reassemble(&grid, &blocks).unwrap(), img);
    }

    #[test]
    fn reassemble_rejects_wrong_count() {
        let img = ramp(8, 8);
        let (grid, mut blocks) = partition(&img, 4).unwrap();
        blocks.pop();
        assert!(matches!(
            reassemble(&grid, &blocks),
            Err(Error::Dimension { .. })
        ));
    }
}
