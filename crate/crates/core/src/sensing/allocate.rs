//! Integer measurement allocation shared by the adaptive samplers.

/// Per-block measurement counts for a two-phase acquisition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    /// Phase-1 DCT coefficients per block (zigzag prefix).
    pub m1: Vec<usize>,
    /// Phase-2 DCT coefficients per block, continuing the prefix after `m1`.
    pub m2: Vec<usize>,
    /// Phase-1 measurements that are not DCT coefficients (block boundary
    /// differences). Charged to the budget, not to any block.
    pub side: usize,
    /// Requested total budget M.
    pub target: usize,
}

impl AllocationPlan {
    /// Plan that collects `counts[i]` coefficients from block `i` in one phase.
    pub fn single_phase(counts: Vec<usize>, target: usize) -> Self {
        let n = counts.len();
        Self {
            m1: vec![0; n],
            m2: counts,
            side: 0,
            target,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.m1.len()
    }

    /// Zigzag prefix length collected from each block.
    pub fn coefficient_counts(&self) -> Vec<usize> {
        self.m1.iter().zip(&self.m2).map(|(a, b)| a + b).collect()
    }

    /// Measurements actually spent, including side measurements.
    pub fn actual(&self) -> usize {
        self.m1.iter().sum::<usize>() + self.m2.iter().sum::<usize>() + self.side
    }
}

/// `⌊M/n_B⌋` coefficients per block, with the `M mod n_B` leftovers going one
/// each to the leading blocks in row-major order.
pub fn balanced_counts(total: usize, n_blocks: usize) -> Vec<usize> {
    if n_blocks == 0 {
        return Vec::new();
    }
    let base = total / n_blocks;
    let extra = total % n_blocks;
    (0..n_blocks)
        .map(|i| base + usize::from(i < extra))
        .collect()
}

/// Real-valued shares `budget · wᵢ / Σw`, or an even split when every
/// weight is zero.
pub fn proportional_shares(weights: &[f64], budget: usize) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let budget = budget as f64;
    if total > 0.0 {
        weights.iter().map(|w| budget * w / total).collect()
    } else {
        let n = weights.len().max(1) as f64;
        vec![budget / n; weights.len()]
    }
}

/// Splits `budget` in proportion to `weights`, floor first and then one extra
/// unit to each of the largest fractional parts (lower index wins ties).
pub fn largest_remainder(weights: &[f64], budget: usize) -> Vec<usize> {
    let shares = proportional_shares(weights, budget);
    let mut out: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut leftover = budget.saturating_sub(assigned);
    if leftover > 0 {
        let mut order: Vec<usize> = (0..shares.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = shares[a] - shares[a].floor();
            let fb = shares[b] - shares[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            out[i] += 1;
            leftover -= 1;
        }
    }
    out
}

/// Proportional allocation with a per-block ceiling.
///
/// Any amount above a block's cap is pooled and re-split over the blocks that
/// still have room, in proportion to their weights (evenly if those weights
/// are all zero), until the pool is empty or every block is full. Returns the
/// allocation; it sums to `min(budget, Σcaps)`.
pub fn capped_proportional(weights: &[f64], budget: usize, caps: &[usize]) -> Vec<usize> {
    assert_eq!(weights.len(), caps.len());
    let n = weights.len();
    let mut alloc = vec![0usize; n];
    let mut remaining = budget;
    for _round in 0..=n {
        if remaining == 0 {
            break;
        }
        let open: Vec<usize> = (0..n).filter(|&i| alloc[i] < caps[i]).collect();
        if open.is_empty() {
            break;
        }
        let w: Vec<f64> = open.iter().map(|&i| weights[i].max(0.0)).collect();
        let split = largest_remainder(&w, remaining);
        remaining = 0;
        for (&i, add) in open.iter().zip(split) {
            let want = alloc[i] + add;
            if want > caps[i] {
                remaining += want - caps[i];
                alloc[i] = caps[i];
            } else {
                alloc[i] = want;
            }
        }
    }
    alloc
}
