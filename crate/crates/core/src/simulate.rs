//! Data generators for the simulation examples and a Monte Carlo driver that
//! tabulates rejection proportions.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Exp, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Estimator};
use crate::error::{Error, Result};
use crate::inference::{bootstrap_replicates, empirical_quantile};
use crate::metrics::Statistic;
use crate::rng::{self, Rng};

fn names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn normals(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// `sign(x)` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// `d` independent univariate groups: standard normal (variant 1), its
/// real cube root (2) or its cube (3).
pub fn gen_gaussian_copula(n: usize, d: usize, variant: usize, seed: u64) -> Result<Dataset> {
    check_positive("n", n)?;
    check_positive("d", d)?;
    let f: fn(f64) -> f64 = match variant {
        1 => |z| z,
        2 => f64::cbrt,
        3 => |z| z * z * z,
        _ => return Err(Error::InvalidParameter(format!("copula variant must be 1, 2 or 3, got {variant}"))),
    };
    let mut rng = rng::stream(seed, &[]);
    let values = normals(&mut rng, n * d).into_iter().map(f).collect();
    Dataset::new(values, n, d, crate::data::GroupSpec::univariate(&names("X", d)))
}

/// Covariance structure of the multivariate normal example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    /// `σ_ij = ρ^|i−j|`.
    Ar1,
    /// Unit diagonal, `ρ` within two off the diagonal.
    Banded,
    /// Block diagonal with equicorrelated 5 × 5 blocks.
    Block,
}

impl CovKind {
    pub fn from_variant(v: usize) -> Result<Self> {
        match v {
            1 => Ok(Self::Ar1),
            2 => Ok(Self::Banded),
            3 => Ok(Self::Block),
            _ => Err(Error::InvalidParameter(format!("covariance variant must be 1, 2 or 3, got {v}"))),
        }
    }
}

/// Covariance matrix of the given kind, row-major `d × d`.
pub fn covariance(d: usize, kind: CovKind, rho: f64) -> Result<Vec<f64>> {
    check_positive("d", d)?;
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (-1, 1), got {rho}")));
    }
    if kind == CovKind::Block && d % 5 != 0 {
        return Err(Error::InvalidParameter(format!("block covariance needs d divisible by 5, got {d}")));
    }
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let gap = i.abs_diff(j);
            s[i * d + j] = match kind {
                _ if gap == 0 => 1.0,
                CovKind::Ar1 => rho.powi(gap as i32),
                CovKind::Banded => {
                    if gap <= 2 {
                        rho
                    } else {
                        0.0
                    }
                }
                CovKind::Block => {
                    if i / 5 == j / 5 {
                        rho
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    Ok(s)
}

/// Lower Cholesky factor of a row-major covariance, row-major.
pub fn cholesky_lower(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(d, d, cov);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("covariance matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok((0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect())
}

/// Rows drawn from `N(0, Σ)` as `L z` with `z` standard normal.
pub fn gen_mvn(n: usize, d: usize, kind: CovKind, rho: f64, seed: u64) -> Result<Dataset> {
    check_positive("n", n)?;
    let l = cholesky_lower(&covariance(d, kind, rho)?, d)?;
    let mut rng = rng::stream(seed, &[]);
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z = normals(&mut rng, d);
        for i in 0..d {
            values.push((0..=i).map(|k| l[i * d + k] * z[k]).sum());
        }
    }
    Dataset::new(values, n, d, crate::data::GroupSpec::univariate(&names("X", d)))
}

fn exp_sqrt2() -> Exp<f64> {
    Exp::new(1.0 / std::f64::consts::SQRT_2).expect("positive rate")
}

/// Pairwise independent, jointly dependent triple. Variant 1:
/// `X, Y ~ N(0,1)`, `Z = sign(XY)·W` with `W` exponential of mean √2.
/// Variant 2: fair Bernoulli `X, Y`, `Z = 1{X = Y}`.
pub fn gen_triplet(n: usize, variant: usize, seed: u64) -> Result<Dataset> {
    check_positive("n", n)?;
    let mut rng = rng::stream(seed, &[]);
    let mut values = Vec::with_capacity(3 * n);
    match variant {
        1 => {
            let w = exp_sqrt2();
            for _ in 0..n {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                let z = sign(x * y) * rng.sample(w);
                values.extend([x, y, z]);
            }
        }
        2 => {
            for _ in 0..n {
                let x = f64::from(u8::from(rng.random_bool(0.5)));
                let y = f64::from(u8::from(rng.random_bool(0.5)));
                values.extend([x, y, f64::from(u8::from(x == y))]);
            }
        }
        _ => return Err(Error::InvalidParameter(format!("triplet variant must be 1 or 2, got {variant}"))),
    }
    Dataset::new(values, n, 3, crate::data::GroupSpec::univariate(&["X", "Y", "Z"]))
}

/// Triple of `p`-dimensional vectors plus, for variant 2, the mixture
/// component (0, 1 or 2) used for each row's `Z₁`.
pub fn gen_vector_triplet_with_components(n: usize, p: usize, variant: usize, seed: u64) -> Result<(Dataset, Vec<u8>)> {
    check_positive("n", n)?;
    if p < 2 {
        return Err(Error::InvalidParameter(format!("vector triplet needs p ≥ 2, got {p}")));
    }
    if !(variant == 1 || variant == 2) {
        return Err(Error::InvalidParameter(format!("vector triplet variant must be 1 or 2, got {variant}")));
    }
    let mut rng = rng::stream(seed, &[]);
    let w = exp_sqrt2();
    let eps = Uniform::new(-1.0, 1.0).expect("valid interval");
    let mut values = Vec::with_capacity(3 * p * n);
    let mut comps = Vec::new();
    for _ in 0..n {
        let x = normals(&mut rng, p);
        let y = normals(&mut rng, p);
        let z1 = if variant == 1 {
            sign(x[0] * y[0]) * rng.sample(w)
        } else {
            let c = rng.random_range(0..3u8);
            comps.push(c);
            let base = match c {
                0 => x[0] * x[0],
                1 => y[0] * y[0],
                _ => x[0] * y[0],
            };
            base + rng.sample(eps)
        };
        let rest = normals(&mut rng, p - 1);
        values.extend(x);
        values.extend(y);
        values.push(z1);
        values.extend(rest);
    }
    let spec = crate::data::GroupSpec::from_dims(&["X", "Y", "Z"], &[p, p, p]);
    Ok((Dataset::new(values, n, 3 * p, spec)?, comps))
}

pub fn gen_vector_triplet(n: usize, p: usize, variant: usize, seed: u64) -> Result<Dataset> {
    Ok(gen_vector_triplet_with_components(n, p, variant, seed)?.0)
}

/// One data-generating setting of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// `copula`, `mvn`, `triplet` or `vector-triplet`. The numeric ids
    /// `5.1` to `5.4` are accepted as aliases, in that order.
    pub example: String,
    pub variant: usize,
    pub n: usize,
    /// Number of variables for `copula` and `mvn`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Vector dimension for `vector-triplet`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Correlation for `mvn`; defaults to 0.25.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

pub const GENERATOR_NAMES: [&str; 4] = ["copula", "mvn", "triplet", "vector-triplet"];

impl GeneratorSpec {
    /// Canonical generator name, resolving numeric aliases.
    pub fn kind(&self) -> Result<&'static str> {
        let k = match self.example.as_str() {
            "copula" | "5.1" => 0,
            "mvn" | "5.2" => 1,
            "triplet" | "5.3" => 2,
            "vector-triplet" | "5.4" => 3,
            other => return Err(Error::InvalidParameter(format!("unknown generator '{other}'"))),
        };
        Ok(GENERATOR_NAMES[k])
    }

    pub fn label(&self) -> String {
        let kind = self.kind().unwrap_or(self.example.as_str());
        let mut s = format!("{kind}({}) n={}", self.variant, self.n);
        if let Some(d) = self.d {
            s.push_str(&format!(" d={d}"));
        }
        if let Some(p) = self.p {
            s.push_str(&format!(" p={p}"));
        }
        s
    }

    fn need(v: Option<usize>, what: &str, example: &str) -> Result<usize> {
        v.ok_or_else(|| Error::InvalidParameter(format!("generator {example} needs '{what}'")))
    }

    /// Draws one dataset.
    pub fn generate(&self, seed: u64) -> Result<Dataset> {
        let kind = self.kind()?;
        match kind {
            "copula" => gen_gaussian_copula(self.n, Self::need(self.d, "d", kind)?, self.variant, seed),
            "mvn" => gen_mvn(
                self.n,
                Self::need(self.d, "d", kind)?,
                CovKind::from_variant(self.variant)?,
                self.rho.unwrap_or(0.25),
                seed,
            ),
            "triplet" => gen_triplet(self.n, self.variant, seed),
            _ => gen_vector_triplet(self.n, Self::need(self.p, "p", kind)?, self.variant, seed),
        }
    }

    /// Checks parameters by generating a tiny dataset.
    pub fn validate(&self) -> Result<()> {
        check_positive("n", self.n)?;
        let probe = Self { n: 4, ..self.clone() };
        probe.generate(0).map(|_| ())
    }
}

fn default_c() -> f64 {
    1.0
}

fn default_estimator() -> Estimator {
    Estimator::U
}

/// A test applied to every simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    /// `jdcov`, `jdcov-s`, `jdcov-r`, `dcov` or `tmt`.
    pub statistic: String,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
}

impl TestSpec {
    pub fn build(&self) -> Result<Statistic> {
        Statistic::from_name(&self.statistic, self.c, self.estimator)
    }
}

/// Full experiment description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub reps: usize,
    pub bootstrap: usize,
    pub levels: Vec<f64>,
    #[serde(rename = "generator")]
    pub generators: Vec<GeneratorSpec>,
    #[serde(rename = "test")]
    pub tests: Vec<TestSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("reps", self.reps)?;
        check_positive("bootstrap", self.bootstrap)?;
        if self.levels.is_empty() || self.generators.is_empty() || self.tests.is_empty() {
            return Err(Error::InvalidParameter(
                "an experiment needs at least one level, generator and test".into(),
            ));
        }
        if let Some(a) = self.levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::InvalidParameter(format!("level {a} outside (0,1)")));
        }
        for g in &self.generators {
            g.validate()?;
        }
        for t in &self.tests {
            t.build()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub generator: String,
    pub example: String,
    pub variant: usize,
    pub n: usize,
    pub test: String,
    pub level: f64,
    pub rejections: usize,
    pub proportion: f64,
}

/// Rejection proportions per (generator, test, level).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub reps: usize,
    pub bootstrap: usize,
    pub rows: Vec<ReportRow>,
    /// Not serialized so reports stay byte-identical across runs.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub fn proportion(&self, generator: usize, test: usize, level: usize, ntests: usize, nlevels: usize) -> f64 {
        self.rows[(generator * ntests + test) * nlevels + level].proportion
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["generator", "example", "variant", "n", "test", "level", "rejections", "reps", "proportion"])?;
        for r in &self.rows {
            w.write_record([
                r.generator.clone(),
                r.example.clone(),
                r.variant.to_string(),
                r.n.to_string(),
                r.test.clone(),
                r.level.to_string(),
                r.rejections.to_string(),
                self.reps.to_string(),
                format!("{:.6}", r.proportion),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `reps` datasets per generator and applies every test at every
/// level. Dataset `r` of generator `g` comes from the stream `(seed, 0, g, r)`;
/// its bootstrap uses `(seed, 1, g, r)` for all tests.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let stats: Vec<Statistic> = cfg.tests.iter().map(TestSpec::build).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (gi, gen) in cfg.generators.iter().enumerate() {
        log::info!("simulating {} ({} reps)", gen.label(), cfg.reps);
        // per rep: one flag per (test, level)
        let decisions = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let ds = gen.generate(rng::derive_seed(cfg.seed, &[0, gi as u64, r as u64]))?;
                let boot_seed = rng::derive_seed(cfg.seed, &[1, gi as u64, r as u64]);
                let mut flags = Vec::with_capacity(stats.len() * cfg.levels.len());
                for stat in &stats {
                    let (t, reps) = bootstrap_replicates(&ds, stat, cfg.bootstrap, boot_seed)?;
                    for &alpha in &cfg.levels {
                        flags.push(t > empirical_quantile(&reps, 1.0 - alpha));
                    }
                }
                Ok(flags)
            })
            .collect::<Result<Vec<Vec<bool>>>>()?;
        for (ti, stat) in stats.iter().enumerate() {
            for (li, &level) in cfg.levels.iter().enumerate() {
                let k = ti * cfg.levels.len() + li;
                let rejections = decisions.iter().filter(|f| f[k]).count();
                rows.push(ReportRow {
                    generator: gen.label(),
                    example: gen.kind()?.to_string(),
                    variant: gen.variant,
                    n: gen.n,
                    test: stat.label(),
                    level,
                    rejections,
                    proportion: rejections as f64 / cfg.reps as f64,
                });
            }
        }
    }
    let elapsed = start.elapsed();
    log::info!("experiment finished in {:.1}s", elapsed.as_secs_f64());
    Ok(ExperimentReport {
        seed: cfg.seed,
        reps: cfg.reps,
        bootstrap: cfg.bootstrap,
        rows,
        elapsed,
    })
}
