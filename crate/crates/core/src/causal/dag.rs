use std::fmt;

use crate::error::{Error, Result};

/// Largest node count accepted by [`enumerate_dags`].
pub const MAX_ENUMERATE_NODES: usize = 4;

/// A labeled directed acyclic graph given by per-node parent sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DagModel {
    parents: Vec<Vec<usize>>,
    order: Vec<usize>,
}

impl DagModel {
    /// Validates indices, rejects self-parents and cycles. Parent lists are
    /// sorted and deduplicated.
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self> {
        let d = parents.len();
        if d == 0 {
            return Err(Error::InvalidDag("a model needs at least one node".into()));
        }
        let mut parents = parents;
        for (j, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            ps.dedup();
            if let Some(&bad) = ps.iter().find(|&&k| k >= d) {
                return Err(Error::InvalidDag(format!("node {j} has parent {bad} but there are only {d} nodes")));
            }
            if ps.contains(&j) {
                return Err(Error::InvalidDag(format!("node {j} is its own parent")));
            }
        }
        let order = topological_order(&parents)
            .ok_or_else(|| Error::InvalidDag("the parent sets contain a cycle".into()))?;
        Ok(Self { parents, order })
    }

    /// The model with no edges.
    pub fn empty(d: usize) -> Result<Self> {
        Self::new(vec![Vec::new(); d])
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// Nodes ordered so every parent precedes its children; smallest index first among ties.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Adjacency bitmask, bit `child·d + parent`. Used as the final tie-breaker when ranking.
    pub fn encoding(&self) -> u64 {
        let d = self.node_count();
        let mut code = 0u64;
        for (j, ps) in self.parents.iter().enumerate() {
            for &k in ps {
                code |= 1 << (j * d + k);
            }
        }
        code
    }

    /// The model with every edge reversed.
    pub fn reversed(&self) -> Result<Self> {
        let mut parents = vec![Vec::new(); self.node_count()];
        for (j, ps) in self.parents.iter().enumerate() {
            for &k in ps {
                parents[k].push(j);
            }
        }
        Self::new(parents)
    }

    /// Parses `child<-parent,parent;child<-` against the given node names.
    /// Nodes without a clause have no parents.
    pub fn parse<S: AsRef<str>>(line: &str, names: &[S]) -> Result<Self> {
        let index = |name: &str| {
            names
                .iter()
                .position(|n| n.as_ref() == name)
                .ok_or_else(|| Error::InvalidDag(format!("unknown node '{name}'")))
        };
        let mut parents = vec![Vec::new(); names.len()];
        for clause in line.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (child, rest) = clause
                .split_once("<-")
                .ok_or_else(|| Error::InvalidDag(format!("clause '{clause}' lacks '<-'")))?;
            let child = index(child.trim())?;
            for p in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                parents[child].push(index(p)?);
            }
        }
        Self::new(parents)
    }

    /// Renders the model in the candidate-file syntax; parentless nodes get `name<-`.
    pub fn format_with<S: AsRef<str>>(&self, names: &[S]) -> String {
        self.parents
            .iter()
            .enumerate()
            .map(|(j, ps)| {
                let list: Vec<&str> = ps.iter().map(|&k| names[k].as_ref()).collect();
                format!("{}<-{}", names[j].as_ref(), list.join(","))
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for DagModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.node_count()).map(|i| format!("X{i}")).collect();
        f.write_str(&self.format_with(&names))
    }
}

/// Kahn's algorithm, always releasing the smallest ready node.
fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let d = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut done = vec![false; d];
    let mut order = Vec::with_capacity(d);
    while order.len() < d {
        let next = (0..d).find(|&j| !done[j] && indegree[j] == 0)?;
        done[next] = true;
        order.push(next);
        for (j, ps) in parents.iter().enumerate() {
            if ps.contains(&next) {
                indegree[j] -= 1;
            }
        }
    }
    Some(order)
}

/// Every labeled DAG on `d` nodes. Each unordered pair is absent, forward or
/// backward; assignments are visited in base-3 counting order and cyclic
/// ones are dropped.
pub fn enumerate_dags(d: usize) -> Result<Vec<DagModel>> {
    if d == 0 {
        return Err(Error::InvalidParameter("enumeration needs at least one node".into()));
    }
    if d > MAX_ENUMERATE_NODES {
        return Err(Error::InvalidParameter(format!(
            "enumerating DAGs on {d} nodes is too large (limit {MAX_ENUMERATE_NODES}); supply a candidate file"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut parents = vec![Vec::new(); d];
        let mut rest = code;
        for &(i, j) in &pairs {
            match rest % 3 {
                1 => parents[j].push(i),
                2 => parents[i].push(j),
                _ => {}
            }
            rest /= 3;
        }
        if let Ok(m) = DagModel::new(parents) {
            out.push(m);
        }
    }
    Ok(out)
}

/// Reads a candidate file: one model per line, `#` comments and blank lines skipped.
pub fn parse_candidates<S: AsRef<str>>(text: &str, names: &[S]) -> Result<Vec<DagModel>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let model = DagModel::parse(line, names).map_err(|e| match e {
            Error::InvalidDag(m) => Error::InvalidDag(format!("line {}: {m}", lineno + 1)),
            other => other,
        })?;
        out.push(model);
    }
    if out.is_empty() {
        return Err(Error::InvalidDag("candidate file contains no models".into()));
    }
    Ok(out)
}
