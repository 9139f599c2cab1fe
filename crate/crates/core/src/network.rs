//! Network topology, path enumeration, incidence matrices and the exact
//! Euclidean projection onto the demand-feasible path-flow set.
//!
//! The feasible set is a product of scaled simplices, one per OD pair, since
//! every path serves exactly one OD pair. Projection therefore decomposes into
//! independent sort-and-threshold projections.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: u32,
    pub tail: u32,
    pub head: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdPair {
    pub origin: u32,
    pub destination: u32,
    /// Vehicles per time unit.
    pub demand: f64,
}

/// A simple path, stored as indices into [`Network::arcs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub arcs: Vec<usize>,
    pub od: usize,
}

#[derive(Debug, Clone)]
pub struct IncidenceMatrices {
    /// Arc-path incidence, `A x N`.
    pub delta: DMatrix<f64>,
    /// OD-path incidence, `W x N`.
    pub pi: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<u32>,
    arcs: Vec<Arc>,
    od_pairs: Vec<OdPair>,
    paths: Vec<Path>,
    od_paths: Vec<Vec<usize>>,
    arc_index: HashMap<u32, usize>,
}

impl Network {
    /// Builds a network from explicit paths given as arc indices.
    pub fn new(
        nodes: Vec<u32>,
        arcs: Vec<Arc>,
        od_pairs: Vec<OdPair>,
        paths: Vec<Path>,
    ) -> Result<Self> {
        let mut net = Self::topology(nodes, arcs, od_pairs)?;
        for (i, p) in paths.iter().enumerate() {
            net.check_path(i, p)?;
        }
        net.set_paths(paths)?;
        Ok(net)
    }

    /// Builds a network from paths given per OD pair as lists of arc ids.
    pub fn with_arc_id_paths(
        nodes: Vec<u32>,
        arcs: Vec<Arc>,
        od_pairs: Vec<OdPair>,
        per_od: &[Vec<Vec<u32>>],
    ) -> Result<Self> {
        let net = Self::topology(nodes, arcs, od_pairs)?;
        if per_od.len() != net.od_pairs.len() {
            return Err(Error::InvalidNetwork(format!(
                "paths are given for {} OD pairs but {} are declared",
                per_od.len(),
                net.od_pairs.len()
            )));
        }
        let mut paths = Vec::new();
        for (od, group) in per_od.iter().enumerate() {
            for ids in group {
                let idx = paths.len();
                let arcs = ids
                    .iter()
                    .map(|id| {
                        net.arc_index.get(id).copied().ok_or(Error::UnknownArc {
                            path: idx,
                            arc: id.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                paths.push(Path { arcs, od });
            }
        }
        Self::new(net.nodes, net.arcs, net.od_pairs, paths)
    }

    /// Builds a network whose paths are all simple paths of each OD pair.
    pub fn with_enumerated_paths(
        nodes: Vec<u32>,
        arcs: Vec<Arc>,
        od_pairs: Vec<OdPair>,
        max_paths: usize,
    ) -> Result<Self> {
        let net = Self::topology(nodes, arcs, od_pairs)?;
        let mut paths = Vec::new();
        for od in 0..net.od_pairs.len() {
            paths.extend(net.enumerate_simple_paths(od, max_paths)?);
        }
        Self::new(net.nodes, net.arcs, net.od_pairs, paths)
    }

    fn topology(nodes: Vec<u32>, arcs: Vec<Arc>, od_pairs: Vec<OdPair>) -> Result<Self> {
        let node_set: HashSet<u32> = nodes.iter().copied().collect();
        if node_set.len() != nodes.len() {
            return Err(Error::InvalidNetwork("duplicate node id".into()));
        }
        let mut arc_index = HashMap::with_capacity(arcs.len());
        for (i, a) in arcs.iter().enumerate() {
            if arc_index.insert(a.id, i).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate arc id {}", a.id)));
            }
            if !node_set.contains(&a.tail) || !node_set.contains(&a.head) {
                return Err(Error::InvalidNetwork(format!(
                    "arc {} joins unknown nodes",
                    a.id
                )));
            }
        }
        for od in &od_pairs {
            if !od.demand.is_finite() {
                return Err(Error::InvalidNetwork("demand is not finite".into()));
            }
            if od.demand < 0.0 {
                return Err(Error::NegativeDemand(od.demand));
            }
            if !node_set.contains(&od.origin) || !node_set.contains(&od.destination) {
                return Err(Error::InvalidNetwork(format!(
                    "OD pair {}->{} uses unknown nodes",
                    od.origin, od.destination
                )));
            }
        }
        Ok(Self {
            nodes,
            arcs,
            od_pairs,
            paths: Vec::new(),
            od_paths: Vec::new(),
            arc_index,
        })
    }

    fn check_path(&self, idx: usize, path: &Path) -> Result<()> {
        let od = self.od_pairs.get(path.od).ok_or_else(|| {
            Error::InvalidNetwork(format!("path {idx} references unknown OD {}", path.od))
        })?;
        if path.arcs.is_empty() {
            return Err(Error::InvalidNetwork(format!("path {idx} is empty")));
        }
        let mut seen = HashSet::new();
        let mut at = od.origin;
        for &a in &path.arcs {
            let arc = self.arcs.get(a).ok_or(Error::UnknownArc {
                path: idx,
                arc: format!("#{a}"),
            })?;
            if !seen.insert(a) {
                return Err(Error::InvalidNetwork(format!("path {idx} repeats arc {}", arc.id)));
            }
            if arc.tail != at {
                return Err(Error::DisconnectedPath { path: idx });
            }
            at = arc.head;
        }
        if at != od.destination {
            return Err(Error::DisconnectedPath { path: idx });
        }
        Ok(())
    }

    fn set_paths(&mut self, paths: Vec<Path>) -> Result<()> {
        let mut od_paths = vec![Vec::new(); self.od_pairs.len()];
        for (r, p) in paths.iter().enumerate() {
            od_paths[p.od].push(r);
        }
        if let Some(k) = od_paths.iter().position(Vec::is_empty) {
            return Err(Error::InvalidNetwork(format!("OD pair {k} has no path")));
        }
        self.paths = paths;
        self.od_paths = od_paths;
        Ok(())
    }

    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// Path indices grouped by OD pair, in declaration order.
    pub fn od_paths(&self) -> &[Vec<usize>] {
        &self.od_paths
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn num_od_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn arc_position(&self, id: u32) -> Option<usize> {
        self.arc_index.get(&id).copied()
    }

    pub fn demands(&self) -> Vec<f64> {
        self.od_pairs.iter().map(|o| o.demand).collect()
    }

    pub fn build_incidence(&self) -> IncidenceMatrices {
        let (a, n, w) = (self.num_arcs(), self.num_paths(), self.num_od_pairs());
        let mut delta = DMatrix::zeros(a, n);
        let mut pi = DMatrix::zeros(w, n);
        for (r, p) in self.paths.iter().enumerate() {
            for &arc in &p.arcs {
                delta[(arc, r)] = 1.0;
            }
            pi[(p.od, r)] = 1.0;
        }
        IncidenceMatrices { delta, pi }
    }

    /// All simple directed paths of an OD pair in lexicographic order of arc
    /// ids. An OD pair whose origin equals its destination has none.
    pub fn enumerate_simple_paths(&self, od: usize, max_paths: usize) -> Result<Vec<Path>> {
        let pair = self
            .od_pairs
            .get(od)
            .ok_or_else(|| Error::InvalidNetwork(format!("unknown OD index {od}")))?;
        if pair.origin == pair.destination {
            return Ok(Vec::new());
        }
        let mut outgoing: HashMap<u32, Vec<usize>> = HashMap::new();
        for (i, a) in self.arcs.iter().enumerate() {
            outgoing.entry(a.tail).or_default().push(i);
        }
        for list in outgoing.values_mut() {
            list.sort_by_key(|&i| self.arcs[i].id);
        }

        let mut found = Vec::new();
        let mut stack = Vec::new();
        let mut visited = HashSet::from([pair.origin]);
        self.dfs(
            pair.origin,
            pair.destination,
            &outgoing,
            &mut visited,
            &mut stack,
            &mut found,
            max_paths,
        )?;
        Ok(found.into_iter().map(|arcs| Path { arcs, od }).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        at: u32,
        target: u32,
        outgoing: &HashMap<u32, Vec<usize>>,
        visited: &mut HashSet<u32>,
        stack: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
        max_paths: usize,
    ) -> Result<()> {
        let Some(next) = outgoing.get(&at) else {
            return Ok(());
        };
        for &a in next {
            let head = self.arcs[a].head;
            if visited.contains(&head) {
                continue;
            }
            stack.push(a);
            if head == target {
                if found.len() == max_paths {
                    return Err(Error::TooManyPaths(max_paths));
                }
                found.push(stack.clone());
            } else {
                visited.insert(head);
                self.dfs(head, target, outgoing, visited, stack, found, max_paths)?;
                visited.remove(&head);
            }
            stack.pop();
        }
        Ok(())
    }

    /// `v = Δ f`.
    pub fn path_to_arc_flows(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let mut v = vec![0.0; self.num_arcs()];
        self.arc_flows_into(f, &mut v);
        Ok(v)
    }

    pub(crate) fn arc_flows_into(&self, f: &[f64], v: &mut [f64]) {
        v.fill(0.0);
        for (p, &fr) in self.paths.iter().zip(f) {
            for &a in &p.arcs {
                v[a] += fr;
            }
        }
    }

    /// Euclidean projection of `x` onto `{f >= 0, Πf = q}`.
    pub fn project_feasible(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut block = Vec::new();
        for (od, members) in self.od_pairs.iter().zip(&self.od_paths) {
            block.clear();
            block.extend(members.iter().map(|&r| x[r]));
            let y = project_simplex(&block, od.demand)?;
            for (&r, yr) in members.iter().zip(y) {
                out[r] = yr;
            }
        }
        Ok(())
    }

    /// Feasible starting point splitting each demand evenly over its paths.
    pub fn uniform_split(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.num_paths()];
        for (od, members) in self.od_pairs.iter().zip(&self.od_paths) {
            let share = od.demand / members.len() as f64;
            for &r in members {
                f[r] = share;
            }
        }
        f
    }

    /// `max_k |(Πf)_k - q_k|`.
    pub fn demand_violation(&self, f: &[f64]) -> f64 {
        self.od_pairs
            .iter()
            .zip(&self.od_paths)
            .map(|(od, members)| (members.iter().map(|&r| f[r]).sum::<f64>() - od.demand).abs())
            .fold(0.0, f64::max)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_paths() {
            return Err(Error::DimensionMismatch {
                expected: self.num_paths(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Projects `x` onto `{y >= 0, sum(y) = total}` by the sorted cumulative-sum
/// threshold rule.
pub fn project_simplex(x: &[f64], total: f64) -> Result<Vec<f64>> {
    if total < 0.0 || !total.is_finite() {
        return Err(Error::NegativeDemand(total));
    }
    match x.len() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![total]),
        _ => {}
    }
    if total == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let candidate = (cum - total) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    let mut y: Vec<f64> = x.iter().map(|&xi| (xi - threshold).max(0.0)).collect();

    // Push the rounding residue onto the largest entry so the block sums exactly.
    let residue = total - y.iter().sum::<f64>();
    if residue != 0.0 {
        let (imax, _) = y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        y[imax] = (y[imax] + residue).max(0.0);
    }
    Ok(y)
}
