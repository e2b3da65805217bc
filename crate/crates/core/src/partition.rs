//! Set partitions of `{0, …, d−1}` enumerated as restricted growth strings.

use crate::error::{Error, Result};

/// Largest set size accepted by [`enumerate_set_partitions`]; Bell(10) = 115 975.
pub const MAX_PARTITION_SIZE: usize = 10;

/// A partition of `{0, …, d−1}` into disjoint nonempty blocks.
///
/// Blocks are ordered by their smallest element and each block is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds the partition encoded by a restricted growth string
    /// (`a[0] = 0`, `a[i] ≤ 1 + max(a[..i])`).
    pub fn from_rgs(rgs: &[usize]) -> Self {
        let nblocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nblocks];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block membership as a bitmask per block.
    pub fn masks(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks
            .iter()
            .map(|b| b.iter().fold(0u32, |m, &i| m | (1 << i)))
    }
}

/// Bell number `B(d)` via the Bell triangle.
pub fn bell(d: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..d {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// All partitions of `{0, …, d−1}` in lexicographic restricted-growth-string order.
pub fn enumerate_set_partitions(d: usize) -> Result<Vec<SetPartition>> {
    if d == 0 || d > MAX_PARTITION_SIZE {
        if d > MAX_PARTITION_SIZE {
            return Err(Error::CombinatorialExplosion(d));
        }
        return Err(Error::InvalidParameter("set size must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(bell(d) as usize);
    let mut a = vec![0usize; d];
    // running maxima: m[i] = max(a[0..i])
    let mut m = vec![0usize; d];
    loop {
        out.push(SetPartition::from_rgs(&a));
        // find rightmost position that can be incremented
        let mut i = d - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if a[i] <= m[i] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        for j in i + 1..d {
            a[j] = 0;
            m[j] = m[j - 1].max(a[j - 1]);
        }
    }
}
