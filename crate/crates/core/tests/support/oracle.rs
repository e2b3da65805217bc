//! Deliberately naive reference implementations written straight from the
//! definitions. Shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

/// Row-major n×n Euclidean distances between the rows of `x` (n rows of width `w`).
pub fn distances(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| {
            x.iter()
                .map(|b| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

/// `Û(k,l) = ā_k· + ā_·l − a_kl − ā_··`.
pub fn v_centered(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let nf = n as f64;
    let row: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let col: Vec<f64> = (0..n).map(|l| a.iter().map(|r| r[l]).sum::<f64>() / nf).collect();
    let all = row.iter().sum::<f64>() / nf;
    (0..n)
        .map(|k| (0..n).map(|l| row[k] + col[l] - a[k][l] - all).collect())
        .collect()
}

/// U-centering with divisors n−2 and (n−1)(n−2), zero diagonal.
pub fn u_centered(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let nf = n as f64;
    let row: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>()).collect();
    let col: Vec<f64> = (0..n).map(|l| a.iter().map(|r| r[l]).sum::<f64>()).collect();
    let all: f64 = row.iter().sum();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    if k == l {
                        0.0
                    } else {
                        (row[k] + col[l]) / (nf - 2.0) - a[k][l] - all / ((nf - 1.0) * (nf - 2.0))
                    }
                })
                .collect()
        })
        .collect()
}

/// V-form order-|S| distance covariance `n⁻² Σ_{k,l} ∏ Û_i(k,l)` of the given centered matrices.
pub fn dcov_v(mats: &[&Vec<Vec<f64>>]) -> f64 {
    let n = mats[0].len();
    let mut s = 0.0;
    for k in 0..n {
        for l in 0..n {
            s += mats.iter().map(|m| m[k][l]).product::<f64>();
        }
    }
    s / (n * n) as f64
}

/// Unbiased pairwise dCov² as the average of
/// `a_ij b_ij − 2 a_ij b_ik + a_ij b_kl` over ordered distinct `(i, j, k, l)`.
pub fn dcov_u_four_tuple(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    let mut count = 0u64;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                for l in 0..n {
                    if l == i || l == j || l == k {
                        continue;
                    }
                    s += a[i][j] * b[i][j] - 2.0 * a[i][j] * b[i][k] + a[i][j] * b[k][l];
                    count += 1;
                }
            }
        }
    }
    s / count as f64
}

/// V-form JdCov through the subset expansion `Σ_{|S|≥2} c^{d−|S|} dCov²_V(S)`.
pub fn jdcov_v_by_subsets(mats: &[Vec<Vec<f64>>], c: f64) -> f64 {
    let d = mats.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << d) {
        let k = mask.count_ones() as i32;
        if k < 2 {
            continue;
        }
        let sub: Vec<&Vec<Vec<f64>>> = (0..d).filter(|i| mask & (1 << i) != 0).map(|i| &mats[i]).collect();
        total += c.powi(d as i32 - k) * dcov_v(&sub);
    }
    total
}

/// Third-order distance cumulant written out over the five partitions of {1,2,3}.
pub fn cumulant3(m: &[Vec<Vec<f64>>]) -> f64 {
    let mom = |idx: &[usize]| dcov_v(&idx.iter().map(|&i| &m[i]).collect::<Vec<_>>());
    mom(&[0, 1, 2]) - mom(&[0, 1]) * mom(&[2]) - mom(&[0, 2]) * mom(&[1]) - mom(&[1, 2]) * mom(&[0])
        + 2.0 * mom(&[0]) * mom(&[1]) * mom(&[2])
}

/// Bell numbers by `B(m+1) = Σ_k C(m,k) B(k)`.
pub fn bell_by_binomials(d: usize) -> Vec<u64> {
    let mut b = vec![1u64];
    for m in 0..d {
        let mut binom = 1u64;
        let mut next = 0u64;
        for k in 0..=m {
            next += binom * b[k];
            binom = binom * (m - k) as u64 / (k + 1) as u64;
        }
        b.push(next);
    }
    b
}

/// `n` standard normal rows of width `w`.
pub fn normal_rows<R: Rng>(rng: &mut R, n: usize, w: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..w).map(|_| rng.sample(StandardNormal)).collect()).collect()
}
