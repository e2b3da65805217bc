//! Bootstrap test of mutual independence, the energy-distance normality test
//! and the normality-driven choice of `c`.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::centering::{pairwise_distances, DistanceMatrix};
use crate::data::{Dataset, TestResult};
use crate::error::{Error, Result};
use crate::metrics::{name_group, Statistic};
use crate::rng::{self, Rng};

/// How the bootstrap p-value is formed from the replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PValueRule {
    /// `B⁻¹ Σ 1{T*_b > T_n}`; can be exactly zero.
    #[default]
    Strict,
    /// `(1 + Σ 1{T*_b ≥ T_n}) / (B + 1)`; always in `(0, 1]`.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub b: usize,
    pub seed: u64,
    pub alpha: f64,
    pub statistic: Statistic,
    pub p_value_rule: PValueRule,
}

impl BootstrapConfig {
    pub const DEFAULT_B: usize = 500;

    pub fn new(statistic: Statistic, b: usize, seed: u64, alpha: f64) -> Result<Self> {
        let cfg = Self {
            b,
            seed,
            alpha,
            statistic,
            p_value_rule: PValueRule::Strict,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rule(mut self, rule: PValueRule) -> Self {
        self.p_value_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InvalidParameter("B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Type-1 empirical quantile: the `⌈qB⌉`-th smallest replicate.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn p_value(statistic: f64, replicates: &[f64], rule: PValueRule) -> f64 {
    let b = replicates.len() as f64;
    match rule {
        PValueRule::Strict => replicates.iter().filter(|&&t| t > statistic).count() as f64 / b,
        PValueRule::AddOne => {
            (1 + replicates.iter().filter(|&&t| t >= statistic).count()) as f64 / (b + 1.0)
        }
    }
}

/// Assembles a [`TestResult`] from an observed statistic and its replicates.
pub fn summarize(
    statistic: f64,
    replicates: Vec<f64>,
    alpha: f64,
    rule: PValueRule,
    seed: u64,
) -> TestResult {
    let threshold = empirical_quantile(&replicates, 1.0 - alpha);
    TestResult {
        statistic,
        p_value: p_value(statistic, &replicates, rule),
        alpha,
        threshold,
        reject: statistic > threshold,
        seed,
        b: replicates.len(),
        replicates,
    }
}

/// Independent with-replacement row indices, one vector per group.
pub(crate) fn draw_indices(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<usize>> {
    (0..d)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Dataset whose group `i` row `j` is the original group-`i` row `idx[i][j]`.
pub(crate) fn resample_groups(dataset: &Dataset, idx: &[Vec<usize>]) -> Dataset {
    let (n, p) = (dataset.n(), dataset.p());
    let mut values = vec![0.0; n * p];
    for (gi, g) in dataset.groups().groups().iter().enumerate() {
        for j in 0..n {
            let src = dataset.row(idx[gi][j]);
            values[j * p + g.columns.start..j * p + g.columns.end]
                .copy_from_slice(&src[g.columns.clone()]);
        }
    }
    dataset.with_values(values).expect("resampled values are finite")
}

/// `T_n = n·statistic` and `B` replicates under the product of the empirical
/// marginals. Replicate `b` draws from the stream `(seed, b)`.
pub fn bootstrap_replicates(
    dataset: &Dataset,
    statistic: &Statistic,
    b: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    dataset.validate_joint()?;
    let n = dataset.n();
    let d = dataset.d();
    let scale = n as f64;
    if statistic.uses_distances_only() {
        let dists: Vec<DistanceMatrix> = (0..d)
            .map(|g| pairwise_distances(dataset, g))
            .collect::<Result<_>>()?;
        let observed = statistic
            .evaluate_distances(&dists)
            .map_err(|e| name_group(e, dataset))?;
        let reps = (0..b)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rng::stream(seed, &[rep as u64]);
                let idx = draw_indices(&mut rng, n, d);
                let resampled: Vec<DistanceMatrix> =
                    dists.iter().zip(&idx).map(|(dm, ix)| dm.resample(ix)).collect();
                statistic
                    .evaluate_distances(&resampled)
                    .map(|v| scale * v)
                    .map_err(|e| name_group(e, dataset))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((scale * observed, reps))
    } else {
        let observed = statistic.evaluate(dataset)?;
        let reps = (0..b)
            .into_par_iter()
            .map(|rep| {
                let mut rng = rng::stream(seed, &[rep as u64]);
                let idx = draw_indices(&mut rng, n, d);
                statistic
                    .evaluate(&resample_groups(dataset, &idx))
                    .map(|v| scale * v)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((scale * observed, reps))
    }
}

/// Bootstrap test of mutual independence of the dataset's groups.
pub fn bootstrap_joint_test(dataset: &Dataset, cfg: &BootstrapConfig) -> Result<TestResult> {
    cfg.validate()?;
    let (t, reps) = bootstrap_replicates(dataset, &cfg.statistic, cfg.b, cfg.seed)?;
    Ok(summarize(t, reps, cfg.alpha, cfg.p_value_rule, cfg.seed))
}

/// Settings of the energy-distance normality test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityTestConfig {
    /// Parametric bootstrap replicates.
    pub b_param: usize,
    /// Monte Carlo draws for `E‖a − Z‖` when the dimension exceeds one.
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for NormalityTestConfig {
    fn default() -> Self {
        Self {
            b_param: 200,
            mc_draws: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `E|a − Z|` for standard normal `Z`: `2φ(a) + a(2Φ(a) − 1)`.
pub fn expected_abs_normal(a: f64) -> f64 {
    let z = Normal::standard();
    2.0 * z.pdf(a) + a * (2.0 * z.cdf(a) - 1.0)
}

/// `E‖Z − Z′‖` for independent standard normals in `p` dimensions:
/// `2 Γ((p+1)/2) / Γ(p/2)`.
pub fn expected_normal_pair_distance(p: usize) -> f64 {
    let p = p as f64;
    2.0 * (ln_gamma((p + 1.0) / 2.0) - ln_gamma(p / 2.0)).exp()
}

/// Subtracts the column means and multiplies by the inverse lower Cholesky
/// factor of the sample covariance.
fn standardize(values: &[f64], n: usize, p: usize) -> Result<Vec<f64>> {
    if n <= p {
        return Err(Error::SingularCovariance(format!(
            "need n > p₀ for an invertible covariance (n = {n}, p₀ = {p}); reduce the dimension"
        )));
    }
    let x = DMatrix::from_row_slice(n, p, values);
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let max_diag = cov.diagonal().max();
    let chol = cov.clone().cholesky().ok_or_else(|| {
        Error::SingularCovariance("sample covariance is not positive definite; drop collinear columns".into())
    })?;
    let l = chol.l();
    let min_pivot = l.diagonal().min();
    if !(min_pivot * min_pivot > 1e-12 * max_diag) {
        return Err(Error::SingularCovariance(
            "sample covariance is numerically singular; drop collinear columns".into(),
        ));
    }
    // y_jᵀ = L⁻¹ x_jᵀ for every row, i.e. Y = X L⁻ᵀ
    let yt = l
        .solve_lower_triangular(&centered.transpose())
        .ok_or_else(|| Error::SingularCovariance("triangular solve failed".into()))?;
    let y = yt.transpose();
    let mut out = Vec::with_capacity(n * p);
    for r in 0..n {
        out.extend(y.row(r).iter());
    }
    Ok(out)
}

/// Energy goodness-of-fit statistic on already standardized rows.
fn energy_statistic(y: &[f64], n: usize, p: usize, reference: Option<&[f64]>, ezz: f64) -> f64 {
    let row = |j: usize| &y[j * p..(j + 1) * p];
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    };
    let to_normal: f64 = (0..n)
        .map(|j| match reference {
            None => expected_abs_normal(y[j]),
            Some(z) => {
                let m = z.len() / p;
                (0..m).map(|i| dist(row(j), &z[i * p..(i + 1) * p])).sum::<f64>() / m as f64
            }
        })
        .sum();
    let within: f64 = (0..n)
        .map(|j| (0..n).map(|k| dist(row(j), row(k))).sum::<f64>())
        .sum();
    let nf = n as f64;
    nf * (2.0 / nf * to_normal - ezz - within / (nf * nf))
}

fn normal_block(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Energy-distance test of multivariate normality of the rows of an `n × p`
/// row-major matrix, with a parametric-bootstrap p-value.
pub fn energy_normality_test(
    values: &[f64],
    n: usize,
    p: usize,
    ncfg: &NormalityTestConfig,
) -> Result<NormalityResult> {
    if ncfg.b_param == 0 || ncfg.mc_draws == 0 {
        return Err(Error::InvalidParameter("normality test counts must be positive".into()));
    }
    if values.len() != n * p {
        return Err(Error::Dimension(format!("{} values for {n}×{p}", values.len())));
    }
    let y = standardize(values, n, p)?;
    let reference = if p > 1 {
        let mut rng = rng::stream(ncfg.seed, &[u64::MAX]);
        Some(normal_block(&mut rng, ncfg.mc_draws * p))
    } else {
        None
    };
    let ezz = expected_normal_pair_distance(p);
    let observed = energy_statistic(&y, n, p, reference.as_deref(), ezz);
    let reps = (0..ncfg.b_param)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(ncfg.seed, &[b as u64]);
            let sample = normal_block(&mut rng, n * p);
            let ys = standardize(&sample, n, p)?;
            Ok(energy_statistic(&ys, n, p, reference.as_deref(), ezz))
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = reps.iter().filter(|&&t| t >= observed).count();
    Ok(NormalityResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (ncfg.b_param + 1) as f64,
    })
}

/// p-value of the energy normality test.
pub fn energy_normality_pvalue(values: &[f64], n: usize, p: usize, ncfg: &NormalityTestConfig) -> Result<f64> {
    Ok(energy_normality_test(values, n, p, ncfg)?.p_value)
}

/// `c = 1 + sign(p − α)·|p − α|^{1/4}`.
pub fn c_from_pvalue(p: f64, alpha: f64) -> f64 {
    let diff = p - alpha;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    1.0 + sign * diff.abs().powf(0.25)
}

/// Chooses `c` from the joint-normality p-value of the pooled `p₀`-dimensional vector.
pub fn choose_c_data_driven(dataset: &Dataset, alpha: f64, ncfg: &NormalityTestConfig) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let p = energy_normality_pvalue(dataset.values(), dataset.n(), dataset.p(), ncfg)?;
    Ok(c_from_pvalue(p, alpha))
}
