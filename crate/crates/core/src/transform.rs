//! Orthonormal 2D DCT-II on square blocks and the JPEG zigzag scan.
//!
//! The transform is evaluated separably against a cached cosine basis, which
//! costs O(B³) per block. The inverse skips rows and columns that lie outside
//! the populated zigzag prefix, so low-rate decodes touch far fewer terms.

use std::f64::consts::PI;
use std::sync::Arc;

/// Human-readable name of the active transform kernel.
pub const KERNEL_NAME: &str = "separable-basis O(B^3)";

/// Scan positions of a B×B block, DC first, walking anti-diagonals in
/// alternating direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigzagOrder {
    block: usize,
    order: Vec<(usize, usize)>,
    /// Row-major offset of each scan position.
    flat: Vec<usize>,
    /// `extent[m]` = 1 + max(row, col) over the first `m` positions.
    extent: Vec<usize>,
}

impl ZigzagOrder {
    pub fn new(block: usize) -> Self {
        let mut order = Vec::with_capacity(block * block);
        if block > 0 {
            for diag in 0..(2 * block - 1) {
                let lo = diag.saturating_sub(block - 1);
                let hi = diag.min(block - 1);
                if diag % 2 == 0 {
                    // up and to the right
                    order.extend((lo..=hi).map(|c| (diag - c, c)));
                } else {
                    order.extend((lo..=hi).map(|r| (r, diag - r)));
                }
            }
        }
        let flat = order.iter().map(|&(r, c)| r * block + c).collect();
        let mut extent = Vec::with_capacity(order.len() + 1);
        extent.push(0);
        let mut e = 0;
        for &(r, c) in &order {
            e = e.max(r.max(c) + 1);
            extent.push(e);
        }
        Self {
            block,
            order,
            flat,
            extent,
        }
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    #[inline]
    pub fn positions(&self) -> &[(usize, usize)] {
        &self.order
    }

    /// Row-major offsets in scan order.
    #[inline]
    pub fn offsets(&self) -> &[usize] {
        &self.flat
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Side of the smallest top-left square holding the first `m` positions.
    #[inline]
    pub fn extent(&self, m: usize) -> usize {
        self.extent[m.min(self.order.len())]
    }
}

/// Convenience wrapper for a one-off scan table.
pub fn zigzag_order(block: usize) -> ZigzagOrder {
    ZigzagOrder::new(block)
}

/// Precomputed orthonormal DCT-II basis for one block size.
///
/// Cheap to clone; the tables are shared.
#[derive(Debug, Clone)]
pub struct Dct2d {
    block: usize,
    /// basis[k * B + n] = a(k) cos(pi (2n + 1) k / 2B)
    basis: Arc<[f64]>,
    zigzag: Arc<ZigzagOrder>,
}

impl Dct2d {
    pub fn new(block: usize) -> Self {
        assert!(block >= 1, "block size must be positive");
        let b = block as f64;
        let mut basis = vec![0.0; block * block];
        for k in 0..block {
            let scale = if k == 0 {
                (1.0 / b).sqrt()
            } else {
                (2.0 / b).sqrt()
            };
            for n in 0..block {
                basis[k * block + n] =
                    scale * (PI * (2.0 * n as f64 + 1.0) * k as f64 / (2.0 * b)).cos();
            }
        }
        Self {
            block,
            basis: basis.into(),
            zigzag: Arc::new(ZigzagOrder::new(block)),
        }
    }

    #[inline]
    pub fn block(&self) -> usize {
        self.block
    }

    #[inline]
    pub fn zigzag(&self) -> &ZigzagOrder {
        &self.zigzag
    }

    /// `coeffs = C · pixels · Cᵀ`. Both slices are row-major B×B.
    pub fn forward(&self, pixels: &[f64], coeffs: &mut [f64]) {
        let b = self.block;
        debug_assert_eq!(pixels.len(), b * b);
        debug_assert_eq!(coeffs.len(), b * b);
        let c = &self.basis;
        let mut tmp = vec![0.0; b * b];
        // tmp = C · X (columns)
        for k in 0..b {
            let row = &mut tmp[k * b..(k + 1) * b];
            for n in 0..b {
                let w = c[k * b + n];
                let src = &pixels[n * b..(n + 1) * b];
                for (t, s) in row.iter_mut().zip(src) {
                    *t += w * s;
                }
            }
        }
        // coeffs = tmp · Cᵀ (rows)
        for k in 0..b {
            let src = &tmp[k * b..(k + 1) * b];
            for l in 0..b {
                let basis_row = &c[l * b..(l + 1) * b];
                coeffs[k * b + l] = src.iter().zip(basis_row).map(|(x, y)| x * y).sum();
            }
        }
    }

    /// `pixels = Cᵀ · coeffs · C`.
    pub fn inverse(&self, coeffs: &[f64], pixels: &mut [f64]) {
        self.inverse_within(coeffs, self.block, pixels);
    }

    /// Inverse transform assuming every coefficient outside the top-left
    /// `extent`×`extent` square is zero.
    pub fn inverse_within(&self, coeffs: &[f64], extent: usize, pixels: &mut [f64]) {
        let b = self.block;
        debug_assert_eq!(coeffs.len(), b * b);
        debug_assert_eq!(pixels.len(), b * b);
        let e = extent.min(b);
        let c = &self.basis;
        pixels.iter_mut().for_each(|p| *p = 0.0);
        if e == 0 {
            return;
        }
        // tmp[n][l] = sum_k C[k][n] X[k][l], only l < e are nonzero
        let mut tmp = vec![0.0; b * e];
        for k in 0..e {
            let src = &coeffs[k * b..k * b + e];
            for n in 0..b {
                let w = c[k * b + n];
                let row = &mut tmp[n * e..(n + 1) * e];
                for (t, s) in row.iter_mut().zip(src) {
                    *t += w * s;
                }
            }
        }
        // pixels[n][m] = sum_l tmp[n][l] C[l][m]
        for n in 0..b {
            let out = &mut pixels[n * b..(n + 1) * b];
            for l in 0..e {
                let w = tmp[n * e + l];
                if w == 0.0 {
                    continue;
                }
                let basis_row = &c[l * b..(l + 1) * b];
                for (o, s) in out.iter_mut().zip(basis_row) {
                    *o += w * s;
                }
            }
        }
    }

    /// Writes the first `count` zigzag coefficients of `coeffs` into `out`.
    pub fn gather_prefix(&self, coeffs: &[f64], count: usize, out: &mut [f64]) {
        for (dst, &off) in out[..count].iter_mut().zip(&self.zigzag.offsets()[..count]) {
            *dst = coeffs[off];
        }
    }

    /// Zeroes `coeffs` and scatters `values` into the leading zigzag positions.
    pub fn scatter_prefix(&self, values: &[f64], coeffs: &mut [f64]) {
        coeffs.iter_mut().for_each(|v| *v = 0.0);
        for (&v, &off) in values.iter().zip(self.zigzag.offsets()) {
            coeffs[off] = v;
        }
    }

    /// Decodes a zigzag prefix straight to pixels.
    pub fn decode_prefix(&self, values: &[f64], pixels: &mut [f64]) {
        let mut coeffs = vec![0.0; self.block * self.block];
        self.scatter_prefix(values, &mut coeffs);
        self.inverse_within(&coeffs, self.zigzag.extent(values.len()), pixels);
    }
}

/// Orthonormal 2D DCT-II of a square row-major block.
pub fn dct2(block: &[f64]) -> Vec<f64> {
    let b = square_side(block.len());
    let mut out = vec![0.0; block.len()];
    Dct2d::new(b).forward(block, &mut out);
    out
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &[f64]) -> Vec<f64> {
    let b = square_side(coeffs.len());
    let mut out = vec![0.0; coeffs.len()];
    Dct2d::new(b).inverse(coeffs, &mut out);
    out
}

fn square_side(len: usize) -> usize {
    let b = (len as f64).sqrt().round() as usize;
    assert_eq!(b * b, len, "block of {len} samples is not square");
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(rng: &mut impl Rng, b: usize) -> Vec<f64> {
        (0..b * b).map(|_| rng.gen_range(0.0..255.0)).collect()
    }

    fn energy(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    /// Direct evaluation of the DCT-II double sum.
    fn dct2_reference(x: &[f64], b: usize) -> Vec<f64> {
        let a = |k: usize| {
            if k == 0 {
                (1.0 / b as f64).sqrt()
            } else {
                (2.0 / b as f64).sqrt()
            }
        };
        let mut out = vec![0.0; b * b];
        for k in 0..b {
            for l in 0..b {
                let mut s = 0.0;
                for n in 0..b {
                    for m in 0..b {
                        s += x[n * b + m]
                            * (PI * (2 * n + 1) as f64 * k as f64 / (2 * b) as f64).cos()
                            * (PI * (2 * m + 1) as f64 * l as f64 / (2 * b) as f64).cos();
                    }
                }
                out[k * b + l] = a(k) * a(l) * s;
            }
        }
        out
    }

    #[test]
    fn zigzag_small_cases() {
        assert_eq!(
            zigzag_order(3).positions(),
            &[
                (0, 0),
                (0, 1),
                (1, 0),
                (2, 0),
                (1, 1),
                (0, 2),
                (1, 2),
                (2, 1),
                (2, 2)
            ]
        );
        assert_eq!(
            zigzag_order(2).positions(),
            &[(0, 0), (0, 1), (1, 0), (1, 1)]
        );
        assert_eq!(zigzag_order(1).positions(), &[(0, 0)]);
    }

    #[test]
    fn zigzag_matches_jpeg_table_for_8x8() {
        // natural-order index of each zigzag position, from the JPEG standard
        const JPEG: [usize; 64] = [
            0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34,
            27, 20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37,
            44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
        ];
        assert_eq!(zigzag_order(8).offsets(), &JPEG);
    }

    #[test]
    fn zigzag_exhaustive_structure() {
        for b in 1..=16 {
            let z = zigzag_order(b);
            let mut seen = vec![false; b * b];
            for &off in z.offsets() {
                assert!(!seen[off], "B={b}: duplicate {off}");
                seen[off] = true;
            }
            assert!(seen.iter().all(|&s| s));
            assert_eq!(z.positions()[0], (0, 0));
            let diags: Vec<usize> = z.positions().iter().map(|&(r, c)| r + c).collect();
            assert!(diags.windows(2).all(|w| w[0] <= w[1]), "B={b}");
            // direction alternates: even diagonals climb, odd ones descend
            for w in z.positions().windows(2) {
                let (a, b2) = (w[0], w[1]);
                if a.0 + a.1 == b2.0 + b2.1 {
                    if (a.0 + a.1) % 2 == 0 {
                        assert!(b2.0 < a.0);
                    } else {
                        assert!(b2.0 > a.0);
                    }
                }
            }
        }
    }

    #[test]
    fn extent_covers_prefix() {
        let z = zigzag_order(8);
        for m in 0..=64 {
            let e = z.extent(m);
            for &(r, c) in &z.positions()[..m] {
                assert!(r < e && c < e);
            }
        }
        assert_eq!(z.extent(0), 0);
        assert_eq!(z.extent(1), 1);
        assert_eq!(z.extent(3), 2);
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = dct2(&[128.0; 64]);
        assert!((c[0] - 1024.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn matches_direct_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in [2, 3, 5, 8] {
            let x = random_block(&mut rng, b);
            let fast = dct2(&x);
            let slow = dct2_reference(&x, b);
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).abs() < 1e-9, "B={b}: {f} vs {s}");
            }
        }
    }

    #[test]
    fn inverse_edge_cases() {
        assert!(idct2(&[0.0; 16]).iter().all(|&v| v == 0.0));
        let mut dc = vec![0.0; 64];
        dc[0] = 40.0;
        assert!(idct2(&dc).iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn parseval_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for b in [8, 16, 32] {
            let t = Dct2d::new(b);
            let mut c = vec![0.0; b * b];
            let mut back = vec![0.0; b * b];
            for _ in 0..100 {
                let x = random_block(&mut rng, b);
                t.forward(&x, &mut c);
                let ex = energy(&x);
                assert!((energy(&c) - ex).abs() <= 1e-9 * ex);
                t.inverse(&c, &mut back);
                for (a, r) in x.iter().zip(&back) {
                    assert!((a - r).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn truncated_inverse_matches_full_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = 16;
        let t = Dct2d::new(b);
        let x = random_block(&mut rng, b);
        let mut c = vec![0.0; b * b];
        t.forward(&x, &mut c);
        let mut prefix = vec![0.0; b * b];
        let mut fast = vec![0.0; b * b];
        let mut full = vec![0.0; b * b];
        let mut coeffs = vec![0.0; b * b];
        for m in [0, 1, 2, 7, 40, 136, 200, 256] {
            t.gather_prefix(&c, m, &mut prefix);
            t.decode_prefix(&prefix[..m], &mut fast);
            t.scatter_prefix(&prefix[..m], &mut coeffs);
            t.inverse(&coeffs, &mut full);
            for (a, r) in fast.iter().zip(&full) {
                assert!((a - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn prefix_error_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for b in [8, 16, 32] {
            let t = Dct2d::new(b);
            let x = random_block(&mut rng, b);
            let mut c = vec![0.0; b * b];
            t.forward(&x, &mut c);
            let mut prefix = vec![0.0; b * b];
            let mut rec = vec![0.0; b * b];
            let mut last = f64::INFINITY;
            for m in 0..=b * b {
                t.gather_prefix(&c, m, &mut prefix);
                t.decode_prefix(&prefix[..m], &mut rec);
                let mse: f64 = x
                    .iter()
                    .zip(&rec)
                    .map(|(a, r)| (a - r).powi(2))
                    .sum::<f64>()
                    / (b * b) as f64;
                assert!(mse <= last + 1e-9, "B={b} m={m}: {mse} > {last}");
                last = mse;
            }
            assert!(last < 1e-18);
        }
    }

    proptest! {
        #[test]
        fn linearity(
            xs in proptest::collection::vec(-300.0f64..300.0, 64),
            ys in proptest::collection::vec(-300.0f64..300.0, 64),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let mix: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = dct2(&mix);
            let cx = dct2(&xs);
            let cy = dct2(&ys);
            for i in 0..64 {
                prop_assert!((lhs[i] - (a * cx[i] + b * cy[i])).abs() < 1e-8);
            }
        }
    }
}
