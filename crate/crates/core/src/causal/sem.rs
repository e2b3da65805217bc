//! Additive structural equation fits, the residual bootstrap goodness-of-fit
//! test and candidate ranking.

use std::cmp::Ordering;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use super::dag::DagModel;
use super::spline::{SplineBasis, SplineConfig};
use crate::data::{Dataset, GroupSpec, TestResult};
use crate::error::{Error, Result};
use crate::inference::{bootstrap_joint_test, draw_indices, summarize, BootstrapConfig};
use crate::rng;

/// Options of the residual bootstrap that are not part of the bootstrap itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemTestOptions {
    /// Regenerate data from the fitted equations and refit in every replicate.
    /// When false the residuals are treated as observed data and tested with
    /// the plain marginal bootstrap.
    pub refit: bool,
    /// Center every variable and scale it to Euclidean norm √n before fitting.
    pub standardize: bool,
}

impl Default for SemTestOptions {
    fn default() -> Self {
        Self {
            refit: true,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone)]
struct NodeFit {
    bases: Vec<SplineBasis>,
    design: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    coef: Vec<f64>,
    intercept: f64,
}

impl NodeFit {
    /// Residual of `y` against this node's fixed design.
    fn residual(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = y.len();
        let mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean));
        match &self.chol {
            None => (mean, Vec::new(), yc.iter().copied().collect()),
            Some(chol) => {
                let beta = chol.solve(&(self.design.transpose() * &yc));
                let r = &yc - &self.design * &beta;
                (mean, beta.iter().copied().collect(), r.iter().copied().collect())
            }
        }
    }
}

/// A fitted additive SEM: per node an intercept, spline coefficients,
/// fitted values and residuals.
#[derive(Debug, Clone)]
pub struct SemFit {
    nodes: Vec<NodeFit>,
    fitted: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl SemFit {
    pub fn coefficients(&self, j: usize) -> &[f64] {
        &self.nodes[j].coef
    }

    pub fn intercept(&self, j: usize) -> f64 {
        self.nodes[j].intercept
    }

    pub fn fitted(&self, j: usize) -> &[f64] {
        &self.fitted[j]
    }

    pub fn residuals(&self, j: usize) -> &[f64] {
        &self.residuals[j]
    }

    /// Centered design columns of node `j` (n × total basis size).
    pub fn design(&self, j: usize) -> &DMatrix<f64> {
        &self.nodes[j].design
    }

    /// Per-parent additive component `f̂_{j,k}` evaluated at `x`.
    pub fn component(&self, dag: &DagModel, j: usize, parent: usize, x: f64) -> Option<f64> {
        let pos = dag.parents(j).iter().position(|&k| k == parent)?;
        let node = &self.nodes[j];
        let offset: usize = node.bases[..pos].iter().map(SplineBasis::len).sum();
        let cols = node.bases[pos].eval(x);
        Some(cols.iter().zip(&node.coef[offset..]).map(|(a, b)| a * b).sum())
    }
}

fn univariate_columns(dataset: &Dataset, dag: &DagModel) -> Result<Vec<Vec<f64>>> {
    if let Some(g) = dataset.groups().groups().iter().find(|g| g.dim() != 1) {
        return Err(Error::InvalidParameter(format!(
            "SEM fitting needs univariate groups; '{}' has {} columns",
            g.name,
            g.dim()
        )));
    }
    if dag.node_count() != dataset.d() {
        return Err(Error::Dimension(format!(
            "model has {} nodes but the data has {} groups",
            dag.node_count(),
            dataset.d()
        )));
    }
    Ok(dataset
        .groups()
        .groups()
        .iter()
        .map(|g| dataset.column(g.columns.start))
        .collect())
}

/// Centers each column and scales it to Euclidean norm √n.
pub fn standardize_columns(columns: &mut [Vec<f64>]) {
    for col in columns {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        col.iter_mut().for_each(|v| *v -= mean);
        let rms = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if rms > 0.0 {
            col.iter_mut().for_each(|v| *v /= rms);
        }
    }
}

fn fit_node(columns: &[Vec<f64>], parents: &[usize], y: &[f64], scfg: &SplineConfig) -> Result<(NodeFit, Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let bases: Vec<SplineBasis> = parents
        .iter()
        .map(|&k| SplineBasis::fit(&columns[k], scfg))
        .collect::<Result<_>>()?;
    let m: usize = bases.iter().map(SplineBasis::len).sum();
    if m + 1 >= n && m > 0 {
        return Err(Error::RankDeficient(format!(
            "{m} basis columns plus intercept need more than {n} observations"
        )));
    }
    let mut design = DMatrix::zeros(n, m);
    for i in 0..n {
        let mut c = 0;
        for (b, &k) in bases.iter().zip(parents) {
            for v in b.eval(columns[k][i]) {
                design[(i, c)] = v;
                c += 1;
            }
        }
    }
    let chol = if m == 0 {
        None
    } else {
        let mut gram = design.transpose() * &design;
        for i in 0..m {
            gram[(i, i)] += scfg.ridge;
        }
        let max_diag = gram.diagonal().max();
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::RankDeficient("normal equations are not positive definite".into()))?;
        let min_pivot = chol.l_dirty().diagonal().min();
        if !(min_pivot * min_pivot > 1e-13 * max_diag) {
            return Err(Error::RankDeficient(
                "design is numerically rank deficient; raise the ridge or use fewer knots".into(),
            ));
        }
        Some(chol)
    };
    let mut node = NodeFit {
        bases,
        design,
        chol,
        coef: Vec::new(),
        intercept: 0.0,
    };
    let (mean, coef, resid) = node.residual(y);
    node.intercept = mean;
    node.coef = coef;
    let fitted: Vec<f64> = y.iter().zip(&resid).map(|(v, r)| v - r).collect();
    Ok((node, fitted, resid))
}

fn fit_columns(columns: &[Vec<f64>], dag: &DagModel, scfg: &SplineConfig) -> Result<SemFit> {
    scfg.validate()?;
    let d = columns.len();
    let mut nodes: Vec<Option<NodeFit>> = vec![None; d];
    let mut fitted = vec![Vec::new(); d];
    let mut residuals = vec![Vec::new(); d];
    for &j in dag.topological_order() {
        let (node, f, r) = fit_node(columns, dag.parents(j), &columns[j], scfg)?;
        nodes[j] = Some(node);
        fitted[j] = f;
        residuals[j] = r;
    }
    Ok(SemFit {
        nodes: nodes.into_iter().map(|n| n.expect("every node visited")).collect(),
        fitted,
        residuals,
    })
}

/// Regresses every node on B-spline bases of its parents (jointly, with an
/// intercept) in topological order.
pub fn fit_additive_sem(dataset: &Dataset, dag: &DagModel, scfg: &SplineConfig) -> Result<SemFit> {
    let columns = univariate_columns(dataset, dag)?;
    fit_columns(&columns, dag, scfg)
}

fn residual_dataset(residuals: &[Vec<f64>], names: &[String]) -> Result<Dataset> {
    let n = residuals[0].len();
    let d = residuals.len();
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        values.extend(residuals.iter().map(|r| r[i]));
    }
    Dataset::new(values, n, d, GroupSpec::univariate(names))
}

/// Residual-bootstrap test that the residuals of `dag` are mutually independent.
///
/// Each replicate resamples every residual column independently, adds it to
/// the fitted values computed from the original covariates, refits each node
/// on the same design and recomputes the statistic on the new residuals.
/// Replicate `b` uses the stream `(seed, b)` whatever the model, so candidate
/// models are compared on common random numbers.
pub fn residual_bootstrap_test(
    dataset: &Dataset,
    dag: &DagModel,
    boot: &BootstrapConfig,
    scfg: &SplineConfig,
    opts: &SemTestOptions,
) -> Result<TestResult> {
    boot.validate()?;
    let mut columns = univariate_columns(dataset, dag)?;
    if opts.standardize {
        standardize_columns(&mut columns);
    }
    let fit = fit_columns(&columns, dag, scfg)?;
    let names: Vec<String> = dataset.groups().groups().iter().map(|g| g.name.clone()).collect();
    let resid = residual_dataset(&fit.residuals, &names)?;
    if !opts.refit {
        return bootstrap_joint_test(&resid, boot);
    }
    let n = dataset.n();
    let d = dataset.d();
    let scale = n as f64;
    let observed = scale * boot.statistic.evaluate(&resid)?;
    let reps = (0..boot.b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(boot.seed, &[rep as u64]);
            let idx = draw_indices(&mut rng, n, d);
            let mut star = vec![Vec::new(); d];
            for &j in dag.topological_order() {
                let y: Vec<f64> = (0..n)
                    .map(|i| fit.fitted[j][i] + fit.residuals[j][idx[j][i]])
                    .collect();
                star[j] = fit.nodes[j].residual(&y).2;
            }
            let ds = residual_dataset(&star, &names)?;
            Ok(scale * boot.statistic.evaluate(&ds)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(observed, reps, boot.alpha, boot.p_value_rule, boot.seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedModel {
    /// Position of the model in the candidate list.
    pub candidate: usize,
    #[serde(skip)]
    pub model: DagModel,
    pub edges: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Tests every candidate and ranks them by descending p-value, then fewer
/// edges, then adjacency encoding.
pub fn select_dag(
    dataset: &Dataset,
    candidates: &[DagModel],
    boot: &BootstrapConfig,
    scfg: &SplineConfig,
    opts: &SemTestOptions,
) -> Result<Vec<RankedModel>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate models".into()));
    }
    let mut ranked = candidates
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            log::debug!("testing candidate {i}: {m}");
            let r = residual_bootstrap_test(dataset, m, boot, scfg, opts)?;
            Ok(RankedModel {
                candidate: i,
                model: m.clone(),
                edges: m.edge_count(),
                statistic: r.statistic,
                p_value: r.p_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| rank_order(a, b).then(a.candidate.cmp(&b.candidate)));
    Ok(ranked)
}

/// Ordering used by [`select_dag`], exposed for callers that merge rankings.
pub fn rank_order(a: &RankedModel, b: &RankedModel) -> Ordering {
    b.p_value
        .total_cmp(&a.p_value)
        .then(a.edges.cmp(&b.edges))
        .then(a.model.encoding().cmp(&b.model.encoding()))
}
