//! Datasets, variable groups and the configuration/result records shared by
//! the statistics, inference and causal modules.
//!
//! A [`Dataset`] is an `n × p₀` row-major matrix of finite reals whose columns
//! are partitioned by a [`GroupSpec`] into `d` named, contiguous groups. Each
//! group is one (possibly multivariate) random vector.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named group: a contiguous, 0-based half-open column range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub columns: Range<usize>,
}

impl Group {
    pub fn new(name: impl Into<String>, columns: Range<usize>) -> Self {
        Self {
            name: name.into(),
            columns,
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

/// Ordered list of groups. Order is preserved exactly as given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    groups: Vec<Group>,
}

impl GroupSpec {
    pub fn new(groups: Vec<Group>) -> Self {
        Self { groups }
    }

    /// One univariate group per column, named by `names`.
    pub fn univariate<S: AsRef<str>>(names: &[S]) -> Self {
        Self::new(
            names
                .iter()
                .enumerate()
                .map(|(i, s)| Group::new(s.as_ref(), i..i + 1))
                .collect(),
        )
    }

    /// Groups of the given dimensions laid out left to right.
    pub fn from_dims<S: AsRef<str>>(names: &[S], dims: &[usize]) -> Self {
        let mut start = 0;
        let groups = names
            .iter()
            .zip(dims)
            .map(|(name, &dim)| {
                let g = Group::new(name.as_ref(), start..start + dim);
                start += dim;
                g
            })
            .collect();
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.name == name)
    }

    /// Every violated invariant, given the total column count `p`.
    fn problems(&self, p: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.groups.is_empty() {
            out.push("no groups".to_string());
            return out;
        }
        let mut seen = HashSet::new();
        for g in &self.groups {
            if !seen.insert(g.name.as_str()) {
                out.push(format!("duplicate group name '{}'", g.name));
            }
            if g.columns.is_empty() {
                out.push(format!("group '{}' has no columns", g.name));
            }
            if g.columns.end > p {
                out.push(format!(
                    "group '{}' range {}-{} out of bounds for {} columns",
                    g.name,
                    g.columns.start + 1,
                    g.columns.end,
                    p
                ));
            }
        }
        let mut owner = vec![0usize; p];
        for g in &self.groups {
            for c in g.columns.clone().filter(|&c| c < p) {
                owner[c] += 1;
            }
        }
        let overlapping: Vec<_> = (0..p).filter(|&c| owner[c] > 1).map(|c| c + 1).collect();
        if !overlapping.is_empty() {
            out.push(format!("overlapping group ranges at columns {overlapping:?}"));
        }
        let uncovered: Vec<_> = (0..p).filter(|&c| owner[c] == 0).map(|c| c + 1).collect();
        if !uncovered.is_empty() {
            out.push(format!("columns {uncovered:?} not covered by any group"));
        }
        out
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    /// Parses `name:a-b,name:c` with 1-based inclusive column indices.
    fn from_str(s: &str) -> Result<Self> {
        let mut groups = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (name, range) = item
                .split_once(':')
                .ok_or_else(|| Error::GroupSpec(format!("'{item}' is not of the form name:a-b")))?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::GroupSpec(format!("empty group name in '{item}'")));
            }
            let parse = |t: &str| -> Result<usize> {
                t.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .ok_or_else(|| Error::GroupSpec(format!("bad column index '{t}' in '{item}'")))
            };
            let (a, b) = match range.split_once('-') {
                Some((a, b)) => (parse(a)?, parse(b)?),
                None => {
                    let a = parse(range)?;
                    (a, a)
                }
            };
            if b < a {
                return Err(Error::GroupSpec(format!("reversed range in '{item}'")));
            }
            groups.push(Group::new(name, a - 1..b));
        }
        if groups.is_empty() {
            return Err(Error::GroupSpec("no groups given".into()));
        }
        Ok(Self::new(groups))
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if g.columns.len() == 1 {
                write!(f, "{}:{}", g.name, g.columns.start + 1)?;
            } else {
                write!(f, "{}:{}-{}", g.name, g.columns.start + 1, g.columns.end)?;
            }
        }
        Ok(())
    }
}

/// `n` observations of `p₀` columns partitioned into groups.
///
/// Immutable after construction; cloning is the only way to derive a new one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    p: usize,
    groups: GroupSpec,
    headers: Vec<String>,
}

impl Dataset {
    /// Builds and validates a dataset from row-major values.
    pub fn new(values: Vec<f64>, n: usize, p: usize, groups: GroupSpec) -> Result<Self> {
        let headers = (1..=p).map(|c| format!("V{c}")).collect();
        Self::with_headers(values, n, p, groups, headers)
    }

    pub fn with_headers(
        values: Vec<f64>,
        n: usize,
        p: usize,
        groups: GroupSpec,
        headers: Vec<String>,
    ) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::Dimension(format!(
                "{} values for a {n}×{p} dataset",
                values.len()
            )));
        }
        if headers.len() != p {
            return Err(Error::Dimension(format!("{} headers for {p} columns", headers.len())));
        }
        let ds = Self {
            values,
            n,
            p,
            groups,
            headers,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset with one univariate group per column.
    pub fn from_columns<S: AsRef<str>>(names: &[S], columns: &[Vec<f64>]) -> Result<Self> {
        let groups: Vec<_> = columns.iter().map(|c| vec![c.clone()]).collect();
        Self::from_group_columns(names, &groups)
    }

    /// Builds a dataset from per-group lists of columns.
    pub fn from_group_columns<S: AsRef<str>>(names: &[S], groups: &[Vec<Vec<f64>>]) -> Result<Self> {
        if names.len() != groups.len() {
            return Err(Error::Dimension("names and groups differ in length".into()));
        }
        let n = groups
            .first()
            .and_then(|g| g.first())
            .map(Vec::len)
            .unwrap_or(0);
        let dims: Vec<usize> = groups.iter().map(Vec::len).collect();
        let p: usize = dims.iter().sum();
        let cols: Vec<&Vec<f64>> = groups.iter().flatten().collect();
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        let mut values = Vec::with_capacity(n * p);
        for r in 0..n {
            values.extend(cols.iter().map(|c| c[r]));
        }
        let spec = GroupSpec::from_dims(names, &dims);
        let mut headers = Vec::with_capacity(p);
        for g in spec.groups() {
            if g.dim() == 1 {
                headers.push(g.name.clone());
            } else {
                headers.extend((1..=g.dim()).map(|k| format!("{}_{k}", g.name)));
            }
        }
        Self::with_headers(values, n, p, spec, headers)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 2 {
            problems.push(format!("n ≥ 2 required (got n = {})", self.n));
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                problems.push(format!(
                    "non-finite value {v} at row {}, column {}",
                    i / self.p + 1,
                    i % self.p + 1
                ));
                break;
            }
        }
        problems.extend(self.groups.problems(self.p));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Validation for joint-dependence work: additionally requires d ≥ 2.
    pub fn validate_joint(&self) -> Result<()> {
        self.validate()?;
        if self.d() < 2 {
            return Err(Error::TooFewGroups(self.d()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &GroupSpec {
        &self.groups
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.p..(r + 1) * self.p]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.p + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, c)).collect()
    }

    /// Row slice restricted to one group's columns.
    pub fn group_row(&self, group: usize, r: usize) -> &[f64] {
        let cols = &self.groups.groups[group].columns;
        &self.row(r)[cols.clone()]
    }

    pub fn group_dims(&self) -> Vec<usize> {
        self.groups.groups().iter().map(Group::dim).collect()
    }

    /// Same shape and groups, new values. Used by transforms.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_headers(values, self.n, self.p, self.groups.clone(), self.headers.clone())
    }

    /// Reads a headered CSV file.
    pub fn load_csv(path: impl AsRef<Path>, groups: Option<GroupSpec>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, groups)
    }

    /// Reads headered CSV; with no `groups`, every column is its own group.
    pub fn read_csv<R: Read>(reader: R, groups: Option<GroupSpec>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let p = headers.len();
        let mut values = Vec::new();
        let mut n = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != p {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(p) + 1,
                    message: format!("expected {p} fields, found {}", rec.len()),
                });
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("'{cell}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("non-finite value '{cell}'"),
                    });
                }
                values.push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        let groups = groups.unwrap_or_else(|| GroupSpec::univariate(&headers));
        Self::with_headers(values, n, p, groups, headers)
    }

    /// Writes headered CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.headers)?;
        for r in 0..self.n {
            wtr.write_record(self.row(r).iter().map(|v| format!("{v:.16e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Which sample estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Plug-in V-statistic with double centering.
    V,
    /// Bias-corrected, U-centered.
    U,
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v" | "v-stat" | "vstat" => Ok(Self::V),
            "u" | "u-centered" | "ucentered" => Ok(Self::U),
            _ => Err(Error::InvalidParameter(format!("unknown estimator '{s}'"))),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::V => "v",
            Self::U => "u",
        })
    }
}

/// JdCov flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    /// Each centered matrix divided by its group's distance standard deviation.
    Scaled,
    /// Computed on per-column empirical-CDF transformed data.
    Rank,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plain => "plain",
            Self::Scaled => "scaled",
            Self::Rank => "rank",
        })
    }
}

/// Configuration of a JdCov-type statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub c: f64,
    pub estimator: Estimator,
    pub variant: Variant,
}

impl MetricConfig {
    pub fn new(c: f64, estimator: Estimator, variant: Variant) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::NegativeC(c));
        }
        Ok(Self {
            c,
            estimator,
            variant,
        })
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            estimator: Estimator::U,
            variant: Variant::Plain,
        }
    }
}

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    /// Observed statistic `T_n` (already multiplied by `n`).
    pub statistic: f64,
    pub replicates: Vec<f64>,
    pub p_value: f64,
    pub alpha: f64,
    /// Empirical `1 − α` quantile of the replicates.
    pub threshold: f64,
    pub reject: bool,
    pub seed: u64,
    pub b: usize,
}
