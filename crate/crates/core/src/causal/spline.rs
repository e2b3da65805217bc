//! Cubic (or other degree) B-spline bases with knots at empirical quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub degree: usize,
    pub interior_knots: usize,
    pub ridge: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            interior_knots: 10,
            ridge: 1e-8,
        }
    }
}

impl SplineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidParameter("spline degree must be at least 1".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge must be nonnegative, got {}", self.ridge)));
        }
        Ok(())
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A B-spline basis fitted to one covariate: knots, centering means and the
/// retained columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    knots: Vec<f64>,
    degree: usize,
    means: Vec<f64>,
    keep: Vec<usize>,
}

impl SplineBasis {
    /// Places knots at quantiles of `x`, then centers the columns over `x`,
    /// discards numerically null columns and drops the last remaining one.
    pub fn fit(x: &[f64], cfg: &SplineConfig) -> Result<Self> {
        cfg.validate()?;
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if !(hi > lo) {
            return Err(Error::RankDeficient("a parent variable is constant".into()));
        }
        let tol = 1e-12 * (hi - lo);
        let mut interior: Vec<f64> = Vec::new();
        for i in 1..=cfg.interior_knots {
            let k = quantile_sorted(&sorted, i as f64 / (cfg.interior_knots + 1) as f64);
            let last = interior.last().copied().unwrap_or(lo);
            if k - last > tol && hi - k > tol {
                interior.push(k);
            }
        }
        let mut knots = vec![lo; cfg.degree + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat_n(hi, cfg.degree + 1));
        let mut basis = Self {
            knots,
            degree: cfg.degree,
            means: Vec::new(),
            keep: Vec::new(),
        };
        let nb = basis.raw_len();
        let n = x.len() as f64;
        let mut means = vec![0.0; nb];
        let mut rows = Vec::with_capacity(x.len());
        for &xi in x {
            let row = basis.raw(xi);
            for (m, v) in means.iter_mut().zip(&row) {
                *m += v;
            }
            rows.push(row);
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut keep: Vec<usize> = (0..nb)
            .filter(|&c| {
                let ss: f64 = rows.iter().map(|r| (r[c] - means[c]).powi(2)).sum();
                ss.sqrt() > 1e-10 * n.sqrt()
            })
            .collect();
        keep.pop();
        if keep.is_empty() {
            return Err(Error::RankDeficient("a parent variable yields no usable basis columns".into()));
        }
        basis.means = means;
        basis.keep = keep;
        Ok(basis)
    }

    fn raw_len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// All uncentered basis functions at `x`, clamped to the boundary knots.
    pub fn raw(&self, x: f64) -> Vec<f64> {
        let p = self.degree;
        let t = &self.knots;
        let nb = self.raw_len();
        let x = x.clamp(t[p], t[nb]);
        // knot span with t[span] ≤ x < t[span+1]; the right end uses the last nonempty span
        let mut span = p;
        while span + 1 < nb && t[span + 1] <= x {
            span += 1;
        }
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; nb];
        for (r, v) in n.into_iter().enumerate() {
            out[span - p + r] = v;
        }
        out
    }

    /// Number of design columns this basis contributes.
    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    /// Centered, retained columns at `x`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let raw = self.raw(x);
        self.keep.iter().map(|&c| raw[c] - self.means[c]).collect()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 / (n - 1) as f64).powi(2) * 4.0 - 1.0).collect()
    }

    #[test]
    fn partition_of_unity_and_clamping() {
        let x = grid(60);
        let b = SplineBasis::fit(&x, &SplineConfig::default()).unwrap();
        for xi in [-1.0, -0.3, 0.0, 1.7, 3.0, 2.999] {
            let s: f64 = b.raw(xi).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x = {xi}: {s}");
        }
        assert_eq!(b.raw(-5.0), b.raw(-1.0));
        assert_eq!(b.raw(10.0), b.raw(3.0));
        assert!(b.raw(-0.5).iter().all(|&v| v >= 0.0));
        // 10 interior knots, cubic: 14 raw functions, one dropped
        assert_eq!(b.len(), 13);
    }

    #[test]
    fn centered_over_training_sample() {
        let x = grid(40);
        let b = SplineBasis::fit(&x, &SplineConfig::default()).unwrap();
        let mut sums = vec![0.0; b.len()];
        for &xi in &x {
            for (s, v) in sums.iter_mut().zip(b.eval(xi)) {
                *s += v;
            }
        }
        assert!(sums.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn tied_data_collapses_knots() {
        let x: Vec<f64> = (0..50).map(|i| (i % 3) as f64).collect();
        let b = SplineBasis::fit(&x, &SplineConfig::default()).unwrap();
        let inner = b.knots().iter().filter(|&&k| k > 0.0 && k < 2.0).count();
        assert_eq!(inner, 1);
        assert!(SplineBasis::fit(&[1.0; 10], &SplineConfig::default()).is_err());
    }

    #[test]
    fn linear_degree_is_hat_functions() {
        let cfg = SplineConfig {
            degree: 1,
            interior_knots: 1,
            ridge: 0.0,
        };
        let b = SplineBasis::fit(&[0.0, 1.0, 2.0], &cfg).unwrap();
        assert_eq!(b.knots(), &[0.0, 0.0, 1.0, 2.0, 2.0]);
        assert_eq!(b.raw(0.5), vec![0.5, 0.5, 0.0]);
        assert_eq!(b.raw(2.0), vec![0.0, 0.0, 1.0]);
    }
}
