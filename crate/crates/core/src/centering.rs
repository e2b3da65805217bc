//! Pairwise Euclidean distances, the V- and U-centering transforms, and the
//! empirical-CDF rank transform.
//!
//! Sign convention: the centered matrices estimate
//! `U(x, x') = E|x − X'| + E|X − x'| − |x − x'| − E|X − X'|`, so a centered
//! entry is `row mean + column mean − distance − grand mean` (V form), which
//! is the negative of the usual "double-centered distance" matrix. Products
//! over an odd number of groups therefore carry this sign.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which centering produced a [`CenteredMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CenterKind {
    V,
    U,
}

/// Symmetric, zero-diagonal, nonnegative `n × n` Euclidean distances for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    group: usize,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.n + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Distances among the rows `idx` (with repetition), i.e. the distance
    /// matrix of a resample drawn from this group. Bit-identical to
    /// recomputing the distances of the resampled rows.
    pub fn resample(&self, idx: &[usize]) -> DistanceMatrix {
        let m = idx.len();
        let mut data = vec![0.0; m * m];
        data.par_chunks_mut(m.max(1)).enumerate().for_each(|(k, row)| {
            let src = &self.data[idx[k] * self.n..(idx[k] + 1) * self.n];
            for (l, out) in row.iter_mut().enumerate() {
                *out = src[idx[l]];
            }
        });
        DistanceMatrix {
            n: m,
            data,
            group: self.group,
        }
    }
}

/// A V- or U-centered distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    data: Vec<f64>,
    kind: CenterKind,
    group: usize,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CenterKind {
        self.kind
    }

    pub fn group(&self) -> usize {
        self.group
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.n + l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    /// Mean absolute entry; the reference scale for degeneracy checks.
    pub fn mean_abs(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.abs()).sum::<f64>() / self.data.len() as f64
    }

    /// Entrywise division by `s`.
    pub fn scaled(&self, s: f64) -> CenteredMatrix {
        CenteredMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v / s).collect(),
            kind: self.kind,
            group: self.group,
        }
    }
}

/// Euclidean distances between all rows restricted to a column range of `values`
/// (row-major, `p` columns).
fn distances_of(values: &[f64], n: usize, p: usize, cols: std::ops::Range<usize>) -> Vec<f64> {
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(k, row)| {
        let xk = &values[k * p + cols.start..k * p + cols.end];
        for (l, out) in row.iter_mut().enumerate() {
            if l == k {
                continue;
            }
            let xl = &values[l * p + cols.start..l * p + cols.end];
            let ss: f64 = xk.iter().zip(xl).map(|(a, b)| (a - b) * (a - b)).sum();
            *out = ss.sqrt();
        }
    });
    data
}

/// Pairwise Euclidean distances for one group of a dataset.
pub fn pairwise_distances(dataset: &Dataset, group: usize) -> Result<DistanceMatrix> {
    let g = dataset
        .groups()
        .groups()
        .get(group)
        .ok_or_else(|| Error::InvalidParameter(format!("no group with index {group}")))?;
    let n = dataset.n();
    Ok(DistanceMatrix {
        n,
        data: distances_of(dataset.values(), n, dataset.p(), g.columns.clone()),
        group,
    })
}

/// Distances over the union of several groups' columns, treated as one vector.
pub fn pairwise_distances_concat(dataset: &Dataset, groups: &[usize]) -> Result<DistanceMatrix> {
    let mut cols = Vec::new();
    for &g in groups {
        let grp = dataset
            .groups()
            .groups()
            .get(g)
            .ok_or_else(|| Error::InvalidParameter(format!("no group with index {g}")))?;
        cols.extend(grp.columns.clone());
    }
    let n = dataset.n();
    let q = cols.len();
    let mut sub = Vec::with_capacity(n * q);
    for r in 0..n {
        let row = dataset.row(r);
        sub.extend(cols.iter().map(|&c| row[c]));
    }
    Ok(DistanceMatrix {
        n,
        data: distances_of(&sub, n, q, 0..q),
        group: groups.first().copied().unwrap_or(0),
    })
}

fn row_sums(n: usize, data: &[f64]) -> Vec<f64> {
    data.par_chunks(n.max(1)).map(|r| r.iter().sum()).collect()
}

/// Double centering of an arbitrary symmetric `n × n` matrix using the
/// sign convention of this module: `Â(k,l) = r_k/n + r_l/n − A(k,l) − S/n²`.
pub fn double_center(n: usize, a: &[f64]) -> Vec<f64> {
    let rs = row_sums(n, a);
    let total: f64 = rs.iter().sum();
    let nf = n as f64;
    let grand = total / (nf * nf);
    let means: Vec<f64> = rs.iter().map(|s| s / nf).collect();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(k, row)| {
        for (l, v) in row.iter_mut().enumerate() {
            *v = means[k] + means[l] - a[k * n + l] - grand;
        }
    });
    out
}

/// V-centering: `Û(k,l) = n⁻¹Σ_v D(k,v) + n⁻¹Σ_u D(u,l) − D(k,l) − n⁻²Σ D`.
pub fn v_center(d: &DistanceMatrix) -> CenteredMatrix {
    CenteredMatrix {
        n: d.n,
        data: double_center(d.n, &d.data),
        kind: CenterKind::V,
        group: d.group,
    }
}

/// U-centering with divisors `n − 2` and `(n − 1)(n − 2)`; zero diagonal.
pub fn u_center(d: &DistanceMatrix) -> Result<CenteredMatrix> {
    let n = d.n;
    if n < 4 {
        return Err(Error::TooFewForU(n));
    }
    let rs = row_sums(n, &d.data);
    let total: f64 = rs.iter().sum();
    let nf = n as f64;
    let grand = total / ((nf - 1.0) * (nf - 2.0));
    let means: Vec<f64> = rs.iter().map(|s| s / (nf - 2.0)).collect();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        for (l, v) in row.iter_mut().enumerate() {
            if l != k {
                *v = means[k] + means[l] - d.data[k * n + l] - grand;
            }
        }
    });
    Ok(CenteredMatrix {
        n,
        data,
        kind: CenterKind::U,
        group: d.group,
    })
}

/// Centers with the transform matching `kind`.
pub fn center(d: &DistanceMatrix, kind: CenterKind) -> Result<CenteredMatrix> {
    match kind {
        CenterKind::V => Ok(v_center(d)),
        CenterKind::U => u_center(d),
    }
}

/// Right-continuous empirical CDF of one column: `#{j : x_j ≤ x_i} / n`.
pub fn ecdf_ranks(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && column[order[j + 1]] == column[order[i]] {
            j += 1;
        }
        let f = (j + 1) as f64 / n as f64;
        for &idx in &order[i..=j] {
            out[idx] = f;
        }
        i = j + 1;
    }
    out
}

/// Replaces every column by its empirical CDF values, componentwise within
/// multivariate groups.
pub fn rank_transform(dataset: &Dataset) -> Dataset {
    let (n, p) = (dataset.n(), dataset.p());
    let mut values = vec![0.0; n * p];
    for c in 0..p {
        for (r, f) in ecdf_ranks(&dataset.column(c)).into_iter().enumerate() {
            values[r * p + c] = f;
        }
    }
    dataset
        .with_values(values)
        .expect("ranks are finite and shape is unchanged")
}
