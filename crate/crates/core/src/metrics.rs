//! Sample dependence statistics built on centered distance matrices.
//!
//! All double sums `Σ_{k,l}` are reduced row by row: each row sum is computed
//! independently (possibly on different threads) and the row sums are then
//! added in row order, so results do not depend on the worker count.
//!
//! Before any product over groups is formed, the matrices are put in a
//! canonical order (lexicographic on their entries). Floating-point
//! multiplication is not associative, so this is what makes the statistics
//! bit-for-bit invariant to the order in which groups are listed.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::centering::{
    center, pairwise_distances, pairwise_distances_concat, rank_transform, CenterKind,
    CenteredMatrix, DistanceMatrix,
};
use crate::data::{Dataset, Estimator, MetricConfig, Variant};
use crate::error::{Error, Result};
use crate::partition::{enumerate_set_partitions, MAX_PARTITION_SIZE};

/// Relative threshold below which a group's distance standard deviation is
/// treated as zero (relative to the mean absolute centered entry).
pub const DEGENERATE_REL_TOL: f64 = 1e-12;

/// Which quantity a [`MetricValue`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Squared distance covariance of the given order.
    Dcov { order: usize },
    Dvar,
    Jdcov,
    JdcovScaled,
    JdcovRank,
    Cumulant,
    Tmt,
}

/// A computed statistic with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub kind: MetricKind,
    pub estimator: Estimator,
    pub c: Option<f64>,
}

impl MetricValue {
    fn new(value: f64, kind: MetricKind, estimator: Estimator, c: Option<f64>) -> Self {
        Self {
            value,
            kind,
            estimator,
            c,
        }
    }
}

pub(crate) fn kind_for(estimator: Estimator) -> CenterKind {
    match estimator {
        Estimator::V => CenterKind::V,
        Estimator::U => CenterKind::U,
    }
}

fn check(mats: &[&CenteredMatrix], estimator: Estimator, min_d: usize) -> Result<usize> {
    if mats.len() < min_d {
        return Err(Error::TooFewGroups(mats.len()));
    }
    let n = mats[0].n();
    if mats.iter().any(|m| m.n() != n) {
        return Err(Error::Dimension("centered matrices differ in size".into()));
    }
    let want = kind_for(estimator);
    if mats.iter().any(|m| m.kind() != want) {
        return Err(Error::MixedKinds);
    }
    if estimator == Estimator::U && n < 4 {
        return Err(Error::TooFewForU(n));
    }
    Ok(n)
}

fn lex_cmp(a: &CenteredMatrix, b: &CenteredMatrix) -> Ordering {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn canonical<'a>(mats: &[&'a CenteredMatrix]) -> Vec<&'a CenteredMatrix> {
    let mut v = mats.to_vec();
    v.sort_by(|a, b| lex_cmp(a, b));
    v
}

/// `Σ_{k,l} ∏_i (M_i(k,l) + c)`, optionally skipping the diagonal.
fn product_sum(mats: &[&CenteredMatrix], c: f64, skip_diag: bool) -> f64 {
    let n = mats[0].n();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let rows: Vec<&[f64]> = mats.iter().map(|m| m.row(k)).collect();
            let mut acc = 0.0;
            for l in 0..n {
                if skip_diag && l == k {
                    continue;
                }
                let mut prod = 1.0;
                for r in &rows {
                    prod *= r[l] + c;
                }
                acc += prod;
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

fn u_norm(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf - 3.0)
}

/// Squared d-th order distance covariance.
///
/// V form: `n⁻² Σ_{k,l} ∏_i Û_i(k,l)`. U form: `(n(n−3))⁻¹ Σ_{k≠l} ∏_i Ũ_i(k,l)`.
pub fn dcov_sq_high_order(mats: &[&CenteredMatrix], estimator: Estimator) -> Result<MetricValue> {
    let n = check(mats, estimator, 1)?;
    let mats = canonical(mats);
    let value = match estimator {
        Estimator::V => product_sum(&mats, 0.0, false) / (n * n) as f64,
        Estimator::U => product_sum(&mats, 0.0, true) / u_norm(n),
    };
    Ok(MetricValue::new(
        value,
        MetricKind::Dcov { order: mats.len() },
        estimator,
        None,
    ))
}

/// Squared distance variance `dCov²(X, X)` of one group.
pub fn dvar(mat: &CenteredMatrix, estimator: Estimator) -> Result<MetricValue> {
    let v = dcov_sq_high_order(&[mat, mat], estimator)?;
    Ok(MetricValue::new(v.value, MetricKind::Dvar, estimator, None))
}

fn jdcov_raw(mats: &[&CenteredMatrix], c: f64, estimator: Estimator) -> Result<f64> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::NegativeC(c));
    }
    let n = check(mats, estimator, 2)?;
    let mats = canonical(mats);
    let cd = c.powi(mats.len() as i32);
    Ok(match estimator {
        Estimator::V => product_sum(&mats, c, false) / (n * n) as f64 - cd,
        Estimator::U => {
            // The k = l terms of the full double sum each equal c^d.
            let nf = n as f64;
            product_sum(&mats, c, true) / u_norm(n) - (nf - 1.0) / (nf - 3.0) * cd
        }
    })
}

/// Squared joint distance covariance with weights `C_k = c^{d−k}`.
///
/// V form: `n⁻² Σ_{k,l} ∏(Û_i + c) − c^d`.
/// U form: `(n(n−3))⁻¹ Σ_{k,l} ∏(Ũ_i + c) − n c^d/(n−3)`.
pub fn jdcov_sq(mats: &[&CenteredMatrix], c: f64, estimator: Estimator) -> Result<MetricValue> {
    let value = jdcov_raw(mats, c, estimator)?;
    Ok(MetricValue::new(value, MetricKind::Jdcov, estimator, Some(c)))
}

/// Divides each matrix by its group's distance standard deviation.
pub fn unit_scale(mats: &[&CenteredMatrix], estimator: Estimator) -> Result<Vec<CenteredMatrix>> {
    mats.iter()
        .map(|m| {
            let var = dvar(m, estimator)?.value;
            let sd = var.max(0.0).sqrt();
            if !(sd > DEGENERATE_REL_TOL * m.mean_abs()) || sd == 0.0 {
                return Err(Error::DegenerateGroup(format!("#{}", m.group())));
            }
            Ok(m.scaled(sd))
        })
        .collect()
}

/// Scale-invariant JdCov: JdCov of `M_i / dCov(X_i)`.
pub fn jdcov_sq_scaled(mats: &[&CenteredMatrix], c: f64, estimator: Estimator) -> Result<MetricValue> {
    let scaled = unit_scale(mats, estimator)?;
    let refs: Vec<&CenteredMatrix> = scaled.iter().collect();
    let value = jdcov_raw(&refs, c, estimator)?;
    Ok(MetricValue::new(value, MetricKind::JdcovScaled, estimator, Some(c)))
}

/// Centered matrices for every group of a dataset.
pub fn centered_matrices(dataset: &Dataset, estimator: Estimator) -> Result<Vec<CenteredMatrix>> {
    (0..dataset.d())
        .map(|g| center(&pairwise_distances(dataset, g)?, kind_for(estimator)))
        .collect()
}

/// Rank JdCov: plain JdCov of the empirical-CDF transformed data.
pub fn jdcov_sq_rank(dataset: &Dataset, c: f64, estimator: Estimator) -> Result<MetricValue> {
    dataset.validate_joint()?;
    let ranked = rank_transform(dataset);
    let mats = centered_matrices(&ranked, estimator)?;
    let refs: Vec<&CenteredMatrix> = mats.iter().collect();
    let value = jdcov_raw(&refs, c, estimator)?;
    Ok(MetricValue::new(value, MetricKind::JdcovRank, estimator, Some(c)))
}

/// Sample distance cumulant (V form):
/// `Σ_π (−1)^{|π|−1} (|π|−1)! ∏_{D∈π} n⁻² Σ_{k,l} ∏_{i∈D} Û_i(k,l)`.
pub fn distance_cumulant(mats: &[&CenteredMatrix]) -> Result<MetricValue> {
    let d = mats.len();
    if d > MAX_PARTITION_SIZE {
        return Err(Error::CombinatorialExplosion(d));
    }
    let n = check(mats, Estimator::V, 2)?;
    let partitions = enumerate_set_partitions(d)?;
    log::debug!("distance cumulant: d = {d}, summing over {} partitions", partitions.len());
    let nn = (n * n) as f64;
    let mut moments: HashMap<u32, f64> = HashMap::new();
    let mut moment = |mask: u32| -> f64 {
        *moments.entry(mask).or_insert_with(|| {
            let sub: Vec<&CenteredMatrix> = (0..d)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| mats[i])
                .collect();
            product_sum(&sub, 0.0, false) / nn
        })
    };
    let mut total = 0.0;
    for p in &partitions {
        let blocks = p.len();
        let mut term = (1..blocks).map(|k| k as f64).product::<f64>();
        if blocks % 2 == 0 {
            term = -term;
        }
        for mask in p.masks() {
            term *= moment(mask);
        }
        total += term;
    }
    Ok(MetricValue::new(total, MetricKind::Cumulant, Estimator::V, None))
}

/// Matteson–Tsay statistic `Σ_{i<d} dCov²(X_i, (X_{i+1}, …, X_d))`.
///
/// Depends on the group order.
pub fn t_mt(dataset: &Dataset, estimator: Estimator) -> Result<MetricValue> {
    dataset.validate_joint()?;
    let d = dataset.d();
    let kind = kind_for(estimator);
    let mut total = 0.0;
    for i in 0..d - 1 {
        let head = center(&pairwise_distances(dataset, i)?, kind)?;
        let rest: Vec<usize> = (i + 1..d).collect();
        let tail = center(&pairwise_distances_concat(dataset, &rest)?, kind)?;
        total += dcov_sq_high_order(&[&head, &tail], estimator)?.value;
    }
    Ok(MetricValue::new(total, MetricKind::Tmt, estimator, None))
}

/// A dataset-level statistic usable as a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "statistic", rename_all = "kebab-case")]
pub enum Statistic {
    Jdcov(MetricConfig),
    /// d-th order dCov² over all groups.
    Dcov { estimator: Estimator },
    Tmt { estimator: Estimator },
}

impl Statistic {
    /// Builds a statistic from its short name: `jdcov`, `jdcov-s`, `jdcov-r`,
    /// `dcov` or `tmt`. `c` is ignored by the last two.
    pub fn from_name(name: &str, c: f64, estimator: Estimator) -> Result<Self> {
        let variant = match name.to_ascii_lowercase().as_str() {
            "jdcov" => Variant::Plain,
            "jdcov-s" | "jdcov_s" => Variant::Scaled,
            "jdcov-r" | "jdcov_r" => Variant::Rank,
            "dcov" => return Ok(Self::Dcov { estimator }),
            "tmt" => return Ok(Self::Tmt { estimator }),
            other => return Err(Error::InvalidParameter(format!("unknown statistic '{other}'"))),
        };
        Ok(Self::Jdcov(MetricConfig::new(c, estimator, variant)?))
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            Self::Jdcov(cfg) => cfg.estimator,
            Self::Dcov { estimator } | Self::Tmt { estimator } => *estimator,
        }
    }

    /// Short label such as `jdcov-u(c=1)`.
    pub fn label(&self) -> String {
        match self {
            Self::Jdcov(cfg) => {
                let name = match cfg.variant {
                    Variant::Plain => "jdcov",
                    Variant::Scaled => "jdcov-s",
                    Variant::Rank => "jdcov-r",
                };
                format!("{name}-{}(c={})", cfg.estimator, cfg.c)
            }
            Self::Dcov { estimator } => format!("dcov-{estimator}"),
            Self::Tmt { estimator } => format!("tmt-{estimator}"),
        }
    }

    /// Whether the statistic is a function of the per-group distance matrices alone.
    pub fn uses_distances_only(&self) -> bool {
        match self {
            Self::Jdcov(cfg) => cfg.variant != Variant::Rank,
            Self::Dcov { .. } => true,
            Self::Tmt { .. } => false,
        }
    }

    /// Evaluates the (squared, unscaled-by-n) statistic on a dataset.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<f64> {
        dataset.validate_joint()?;
        match self {
            Self::Jdcov(cfg) if cfg.variant == Variant::Rank => {
                Ok(jdcov_sq_rank(dataset, cfg.c, cfg.estimator)?.value)
            }
            Self::Tmt { estimator } => Ok(t_mt(dataset, *estimator)?.value),
            _ => {
                let dists = (0..dataset.d())
                    .map(|g| pairwise_distances(dataset, g))
                    .collect::<Result<Vec<_>>>()?;
                self.evaluate_distances(&dists).map_err(|e| name_group(e, dataset))
            }
        }
    }

    /// Evaluates a distance-only statistic from precomputed distance matrices.
    pub fn evaluate_distances(&self, dists: &[DistanceMatrix]) -> Result<f64> {
        let kind = kind_for(self.estimator());
        let mats = dists
            .iter()
            .map(|d| center(d, kind))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&CenteredMatrix> = mats.iter().collect();
        match self {
            Self::Jdcov(cfg) => match cfg.variant {
                Variant::Plain => jdcov_raw(&refs, cfg.c, cfg.estimator),
                Variant::Scaled => Ok(jdcov_sq_scaled(&refs, cfg.c, cfg.estimator)?.value),
                Variant::Rank => Err(Error::InvalidParameter(
                    "rank statistic needs the data, not distances".into(),
                )),
            },
            Self::Dcov { estimator } => Ok(dcov_sq_high_order(&refs, *estimator)?.value),
            Self::Tmt { .. } => Err(Error::InvalidParameter(
                "T_MT needs the data, not per-group distances".into(),
            )),
        }
    }
}

/// Replaces a `#index` group reference in a degeneracy error by the group name.
pub(crate) fn name_group(err: Error, dataset: &Dataset) -> Error {
    match err {
        Error::DegenerateGroup(s) => {
            let name = s
                .strip_prefix('#')
                .and_then(|i| i.parse::<usize>().ok())
                .and_then(|i| dataset.groups().groups().get(i))
                .map(|g| g.name.clone())
                .unwrap_or(s);
            Error::DegenerateGroup(name)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centering::{u_center, v_center};

    fn mats_for(cols: &[Vec<f64>], est: Estimator) -> Vec<CenteredMatrix> {
        let names: Vec<String> = (0..cols.len()).map(|i| format!("g{i}")).collect();
        let ds = Dataset::from_columns(&names, cols).unwrap();
        centered_matrices(&ds, est).unwrap()
    }

    fn lcg_columns(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut s = seed;
        (0..d)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (s >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn two_point_pair_is_quarter() {
        let m = mats_for(&[vec![0.0, 1.0], vec![0.0, 1.0]], Estimator::V);
        let v = dcov_sq_high_order(&[&m[0], &m[1]], Estimator::V).unwrap();
        assert_eq!(v.value, 0.25);
        assert_eq!(dvar(&m[0], Estimator::V).unwrap().value, 0.25);
    }

    #[test]
    fn constant_group_annihilates() {
        let mut cols = lcg_columns(3, 9, 2);
        cols.push(vec![1.5; 9]);
        for est in [Estimator::V, Estimator::U] {
            let m = mats_for(&cols, est);
            let refs: Vec<_> = m.iter().collect();
            assert_eq!(dcov_sq_high_order(&refs, est).unwrap().value, 0.0);
            assert_eq!(dvar(&m[2], est).unwrap().value, 0.0);
        }
    }

    #[test]
    fn rejects_mixed_kinds_and_negative_c() {
        let cols = lcg_columns(5, 6, 2);
        let names = ["a", "b"];
        let ds = Dataset::from_columns(&names, &cols).unwrap();
        let v = v_center(&pairwise_distances(&ds, 0).unwrap());
        let u = u_center(&pairwise_distances(&ds, 1).unwrap()).unwrap();
        assert!(matches!(dcov_sq_high_order(&[&v, &u], Estimator::V), Err(Error::MixedKinds)));
        let v2 = v_center(&pairwise_distances(&ds, 1).unwrap());
        assert!(matches!(jdcov_sq(&[&v, &v2], -1.0, Estimator::V), Err(Error::NegativeC(_))));
    }

    #[test]
    fn jdcov_at_zero_c_is_top_order_dcov() {
        let m = mats_for(&lcg_columns(11, 10, 3), Estimator::V);
        let refs: Vec<_> = m.iter().collect();
        let j = jdcov_sq(&refs, 0.0, Estimator::V).unwrap().value;
        let h = dcov_sq_high_order(&refs, Estimator::V).unwrap().value;
        assert_eq!(j, h);
    }

    #[test]
    fn scaled_degenerate_group_is_named() {
        let mut cols = lcg_columns(2, 8, 2);
        cols[1] = vec![4.0; 8];
        let ds = Dataset::from_columns(&["x", "flat"], &cols).unwrap();
        let stat = Statistic::Jdcov(MetricConfig::new(1.0, Estimator::U, Variant::Scaled).unwrap());
        match stat.evaluate(&ds) {
            Err(Error::DegenerateGroup(name)) => assert_eq!(name, "flat"),
            other => panic!("expected degenerate-group error, got {other:?}"),
        }
    }

    #[test]
    fn scaled_equals_plain_on_unit_variance_groups() {
        for est in [Estimator::V, Estimator::U] {
            let m = mats_for(&lcg_columns(7, 12, 3), est);
            let refs: Vec<_> = m.iter().collect();
            let unit = unit_scale(&refs, est).unwrap();
            let unit_refs: Vec<_> = unit.iter().collect();
            let a = jdcov_sq(&unit_refs, 0.7, est).unwrap().value;
            let b = jdcov_sq_scaled(&unit_refs, 0.7, est).unwrap().value;
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn cumulant_rejects_large_d() {
        let m = mats_for(&lcg_columns(1, 5, 11), Estimator::V);
        let refs: Vec<_> = m.iter().collect();
        assert!(matches!(distance_cumulant(&refs), Err(Error::CombinatorialExplosion(11))));
    }
}
