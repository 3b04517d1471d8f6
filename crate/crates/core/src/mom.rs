//! Contiguous-block median-of-means.
//!
//! `n` indices are cut into `M = n / block_len` consecutive blocks of equal
//! length; trailing indices that do not fill a block are dropped. The
//! statistic is the lower median (order statistic `ceil(M/2)`, 1-based) of
//! the block means, so the result is always one of the block means.

use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    block_len: usize,
    blocks: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    /// Number of indices covered by some block (`block_len * M`).
    pub fn covered(&self) -> usize {
        self.block_len * self.blocks.len()
    }

    pub fn unassigned(&self) -> Range<usize> {
        self.covered()..self.n
    }
}

pub fn partition_blocks(n: usize, block_len: usize) -> Result<BlockPartition> {
    if block_len == 0 {
        return Err(Error::config("block_len", "must be at least 1"));
    }
    if block_len > n {
        return Err(Error::config(
            "block_len",
            format!("block length {block_len} exceeds sample size {n}"),
        ));
    }
    let m = n / block_len;
    let blocks = (0..m).map(|j| j * block_len..(j + 1) * block_len).collect();
    Ok(BlockPartition { n, block_len, blocks })
}

/// Means of every block, in block order.
pub fn block_means(values: &[f64], partition: &BlockPartition) -> Result<Vec<f64>> {
    if values.len() < partition.covered() {
        return Err(Error::DimensionMismatch(format!(
            "{} values but the partition covers {} indices",
            values.len(),
            partition.covered()
        )));
    }
    let len = partition.block_len as f64;
    Ok(partition
        .blocks
        .iter()
        .map(|b| values[b.clone()].iter().sum::<f64>() / len)
        .collect())
}

/// Lower median of a non-empty slice; reorders the slice.
pub(crate) fn lower_median_in_place(xs: &mut [f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let k = (xs.len() - 1) / 2;
    let (_, kth, _) = xs.select_nth_unstable_by(k, f64::total_cmp);
    *kth
}

pub fn median_of_means(values: &[f64], partition: &BlockPartition) -> Result<f64> {
    let mut means = block_means(values, partition)?;
    Ok(lower_median_in_place(&mut means))
}

/// `Med_l(|f - g|)`: the median-of-means of the pointwise absolute difference.
pub fn mom_abs_distance(f_vals: &[f64], g_vals: &[f64], partition: &BlockPartition) -> Result<f64> {
    if f_vals.len() != g_vals.len() {
        return Err(Error::DimensionMismatch(format!(
            "columns of length {} and {}",
            f_vals.len(),
            g_vals.len()
        )));
    }
    let diff: Vec<f64> = f_vals
        .iter()
        .zip(g_vals)
        .map(|(f, g)| (f - g).abs())
        .collect();
    median_of_means(&diff, partition)
}
