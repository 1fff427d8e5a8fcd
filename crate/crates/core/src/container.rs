//! Binary container for a [`MeasurementSet`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ABCS"            magic
//! u16               format version (1)
//! u32 u32           source height, width
//! u16               block size B
//! u8                algorithm id (0 zz, 1 bbv, 2 dd)
//! u32 u32           compression ratio numerator, denominator
//! f32               DD threshold (0 otherwise)
//! u32               block count n_B
//! u16 × n_B         coefficients per block
//! f32 × Σcounts     coefficients, block by block, zigzag order
//! u32, f32 × n      boundary differences (bbv only)
//! ```
//!
//! Values are stored as `f32`; reading a file yields the set rounded to
//! single precision (see [`MeasurementSet::to_f32_precision`]).

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::BlockGrid;
use crate::sensing::{Algorithm, CompressionRatio, MeasurementSet};

pub const MAGIC: &[u8; 4] = b"ABCS";
pub const VERSION: u16 = 1;

pub fn encode(ms: &MeasurementSet) -> Vec<u8> {
    let n_coef = ms.coefficients.len();
    let mut out = Vec::with_capacity(34 + 2 * ms.counts.len() + 4 * (n_coef + ms.side.len()) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ms.height as u32).to_le_bytes());
    out.extend_from_slice(&(ms.width as u32).to_le_bytes());
    out.extend_from_slice(&(ms.block as u16).to_le_bytes());
    out.push(ms.algorithm.id());
    out.extend_from_slice(&ms.ratio.numerator().to_le_bytes());
    out.extend_from_slice(&ms.ratio.denominator().to_le_bytes());
    out.extend_from_slice(&(ms.threshold as f32).to_le_bytes());
    out.extend_from_slice(&(ms.counts.len() as u32).to_le_bytes());
    for &c in &ms.counts {
        out.extend_from_slice(&(c as u16).to_le_bytes());
    }
    for &v in &ms.coefficients {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if ms.algorithm == Algorithm::Bbv {
        out.extend_from_slice(&(ms.side.len() as u32).to_le_bytes());
        for &v in &ms.side {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Container(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(what)?))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.saturating_mul(4), what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<MeasurementSet> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let block = r.u16("block size")? as usize;
    let algo_id = r.u8("algorithm")?;
    let algorithm = Algorithm::from_id(algo_id)
        .ok_or_else(|| Error::Container(format!("unknown algorithm id {algo_id}")))?;
    let num = r.u32("ratio numerator")?;
    let den = r.u32("ratio denominator")?;
    let ratio = CompressionRatio::new(num, den).map_err(|e| Error::Container(e.to_string()))?;
    let threshold = f64::from(r.f32("threshold")?);
    let n_blocks = r.u32("block count")? as usize;
    let grid = BlockGrid::new(height, width, block).map_err(|e| Error::Container(e.to_string()))?;
    if n_blocks != grid.n_blocks() {
        return Err(Error::Container(format!(
            "header declares {n_blocks} blocks, geometry implies {}",
            grid.n_blocks()
        )));
    }
    let mut counts = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        counts.push(r.u16("block counts")? as usize);
    }
    let total: usize = counts.iter().sum();
    let coefficients = r.f32s(total, "coefficients")?;
    let side = if algorithm == Algorithm::Bbv {
        let n = r.u32("side-data count")? as usize;
        r.f32s(n, "side data")?
    } else {
        Vec::new()
    };
    if r.pos != bytes.len() {
        return Err(Error::Container(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    MeasurementSet::from_parts(
        height,
        width,
        block,
        algorithm,
        ratio,
        threshold,
        counts,
        coefficients,
        side,
    )
    .map_err(|e| Error::Container(e.to_string()))
}

pub fn write_container(ms: &MeasurementSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(ms)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_container(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::PixelImage;
    use crate::sensing::{sense, SensingConfig};
    use proptest::prelude::*;

    fn sample(algo: Algorithm, cr: &str) -> MeasurementSet {
        let img = PixelImage::from_fn(70, 100, |r, c| {
            128.0 + 90.0 * ((r as f64) * 0.3).sin() * ((c as f64) * 0.17).cos()
        });
        sense(&img, &SensingConfig::new(algo, cr.parse().unwrap())).unwrap()
    }

    #[test]
    fn header_layout() {
        let ms = sample(Algorithm::Dd, "0.25");
        let bytes = encode(&ms);
        assert_eq!(&bytes[..4], b"ABCS");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 70);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 100);
        assert_eq!(u16::from_le_bytes([bytes[14], bytes[15]]), 32);
        assert_eq!(bytes[16], 2);
        assert_eq!(u32::from_le_bytes(bytes[17..21].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[21..25].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[29..33].try_into().unwrap()), 6);
        let expected = 33 + 2 * 6 + 4 * ms.coefficients().len();
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn round_trip_is_bit_exact_for_every_algorithm() {
        for algo in [Algorithm::Zz, Algorithm::Bbv, Algorithm::Dd] {
            let ms = sample(algo, "0.2");
            let bytes = encode(&ms);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, ms.to_f32_precision());
            assert_eq!(encode(&back), bytes);
        }
    }

    #[test]
    fn bbv_side_data_survives() {
        let ms = sample(Algorithm::Bbv, "0.2");
        assert_eq!(ms.algorithm(), Algorithm::Bbv);
        assert!(!ms.side_data().is_empty());
        let back = decode(&encode(&ms)).unwrap();
        assert_eq!(back.side_data().len(), ms.side_data().len());
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = encode(&sample(Algorithm::Zz, "0.1"));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(decode(&version).is_err());
        let mut algo = bytes.clone();
        algo[16] = 7;
        assert!(decode(&algo).is_err());
        let mut count = bytes.clone();
        count[33] = 0xff;
        count[34] = 0xff;
        assert!(matches!(decode(&count), Err(Error::Container(_))));
        assert!(decode(&[]).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_payload_round_trips(
            counts in proptest::collection::vec(0usize..=64, 4),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let total: usize = counts.iter().sum();
            let coefs: Vec<f64> = (0..total)
                .map(|_| f64::from(rng.gen_range(-5000.0f32..5000.0)))
                .collect();
            let ms = MeasurementSet::from_parts(
                17, 16, 8, Algorithm::Zz, CompressionRatio::new(3, 7).unwrap(), 0.0,
                counts, coefs, vec![],
            ).unwrap();
            let bytes = encode(&ms);
            prop_assert_eq!(decode(&bytes).unwrap(), ms);
        }
    }
}
