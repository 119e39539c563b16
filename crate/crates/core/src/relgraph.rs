//! Range graphs between robots: assembly from measurements, motion filtering,
//! algebraic matrices and the rank-based observability test.
//!
//! A [`RelGraph`] is an immutable weighted undirected graph whose edge weights
//! are ranges in meters. Edges are stored once, with `i < j`, sorted
//! lexicographically; that order also fixes the row order of every edge-indexed
//! matrix.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Pose2D;
use crate::motion::Control;
use crate::radio::RangeMeasurement;

/// Relative speed below which two robots count as moving together, m/s.
pub const RELATIVE_SPEED_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct RelGraph {
    n: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl TryFrom<RawGraph> for RelGraph {
    type Error = Error;
    fn try_from(raw: RawGraph) -> Result<Self> {
        RelGraph::new(raw.n, raw.edges)
    }
}

impl From<RelGraph> for RawGraph {
    fn from(g: RelGraph) -> Self {
        RawGraph { n: g.n, edges: g.edges }
    }
}

impl RelGraph {
    /// Validates and normalizes an edge list. Endpoints may be given in either
    /// order; self loops, duplicates and non-positive weights are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut out: Vec<Edge> = Vec::new();
        for e in edges {
            let (i, j) = if e.i <= e.j { (e.i, e.j) } else { (e.j, e.i) };
            if i == j {
                return Err(invalid(format!("self loop on node {i}")));
            }
            if j >= n {
                return Err(invalid(format!("edge ({i}, {j}) references node outside 0..{n}")));
            }
            if !(e.w > 0.0 && e.w.is_finite()) {
                return Err(invalid(format!("edge ({i}, {j}) has non-positive weight {}", e.w)));
            }
            out.push(Edge { i, j, w: e.w });
        }
        out.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = out.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(invalid(format!("duplicate edge ({}, {})", w[0].i, w[0].j)));
        }
        Ok(Self { n, edges: out })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, edges: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by(|e| (e.i, e.j).cmp(&key))
            .ok()
            .map(|k| self.edges[k].w)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j).is_some()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges.iter().filter_map(move |e| {
            if e.i == v {
                Some((e.j, e.w))
            } else if e.j == v {
                Some((e.i, e.w))
            } else {
                None
            }
        })
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.neighbors(v).map(|(_, w)| w).sum()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.i, e.j)] = e.w;
            a[(e.j, e.i)] = e.w;
        }
        a
    }

    /// True when every edge of `self` is an edge of `other` over the same node set.
    pub fn is_subgraph_of(&self, other: &RelGraph) -> bool {
        self.n == other.n && self.edges.iter().all(|e| other.has_edge(e.i, e.j))
    }

    /// Keeps the edges for which `keep` returns true.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge) -> bool) -> RelGraph {
        RelGraph {
            n: self.n,
            edges: self.edges.iter().copied().filter(|e| keep(e)).collect(),
        }
    }
}

/// Collapses directed observations into one symmetric range per robot pair.
///
/// For each directed pair the observation with the latest timestamp wins
/// (later entries win among equal timestamps). The pair range is the mean of
/// the two directions when both exist, otherwise the single one.
pub fn symmetrize(measurements: &[RangeMeasurement]) -> BTreeMap<(usize, usize), f64> {
    let mut directed: BTreeMap<(usize, usize), &RangeMeasurement> = BTreeMap::new();
    for m in measurements {
        let key = (m.from_id, m.to_id);
        match directed.get(&key) {
            Some(prev) if prev.timestamp > m.timestamp => {}
            Some(prev) => {
                if prev.timestamp == m.timestamp {
                    log::debug!(
                        "duplicate measurement {}->{} at t={}, keeping the later one",
                        m.from_id,
                        m.to_id,
                        m.timestamp
                    );
                }
                directed.insert(key, m);
            }
            None => {
                directed.insert(key, m);
            }
        }
    }
    let mut pairs: BTreeMap<(usize, usize), (f64, u32)> = BTreeMap::new();
    for m in directed.values() {
        let key = (m.from_id.min(m.to_id), m.from_id.max(m.to_id));
        let slot = pairs.entry(key).or_insert((0.0, 0));
        slot.0 += m.distance_m;
        slot.1 += 1;
    }
    pairs.into_iter().map(|(k, (sum, c))| (k, sum / c as f64)).collect()
}

/// Assembles the range graph: an edge for each robot pair whose symmetrized
/// range does not exceed `comm_radius`.
pub fn build_rpmg(measurements: &[RangeMeasurement], n: usize, comm_radius: f64) -> Result<RelGraph> {
    if let Some(m) = measurements.iter().find(|m| m.from_id >= n || m.to_id >= n) {
        return Err(invalid(format!(
            "measurement {}->{} references robot outside 0..{n}",
            m.from_id, m.to_id
        )));
    }
    if let Some(m) = measurements.iter().find(|m| m.from_id == m.to_id) {
        return Err(invalid(format!("self measurement on robot {}", m.from_id)));
    }
    let edges = symmetrize(measurements)
        .into_iter()
        .filter(|&(_, d)| d <= comm_radius)
        .map(|((i, j), w)| Edge { i, j, w });
    RelGraph::new(n, edges)
}

/// World-frame planar velocity implied by a heading and a forward speed.
fn planar_velocity(state: &Pose2D, u: &Control) -> (f64, f64) {
    let (s, c) = state.phi.sin_cos();
    (u.v * c, u.v * s)
}

/// Keeps the range edges whose endpoints move relative to each other.
pub fn form_erpmg(rpmg: &RelGraph, controls: &[Control], states: &[Pose2D]) -> Result<RelGraph> {
    let n = rpmg.node_count();
    if controls.len() != n || states.len() != n {
        return Err(invalid(format!(
            "expected {n} controls and states, got {} and {}",
            controls.len(),
            states.len()
        )));
    }
    let vel: Vec<(f64, f64)> = states.iter().zip(controls).map(|(s, u)| planar_velocity(s, u)).collect();
    Ok(rpmg.filter_edges(|e| {
        let (ax, ay) = vel[e.i];
        let (bx, by) = vel[e.j];
        (bx - ax).hypot(by - ay) > RELATIVE_SPEED_EPS
    }))
}

/// Unsigned edge-by-node incidence matrix: row `k` has a 1 at both endpoints of edge `k`.
pub fn incidence_matrix(g: &RelGraph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.edge_count(), g.node_count());
    for (k, e) in g.edges().iter().enumerate() {
        a[(k, e.i)] = 1.0;
        a[(k, e.j)] = 1.0;
    }
    a
}

/// Oriented incidence matrix: +1 at the lower endpoint, −1 at the higher one.
///
/// Its rank is `n − components` for every graph; the unsigned layout only has
/// that rank when each component is bipartite.
pub fn oriented_incidence_matrix(g: &RelGraph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.edge_count(), g.node_count());
    for (k, e) in g.edges().iter().enumerate() {
        a[(k, e.i)] = 1.0;
        a[(k, e.j)] = -1.0;
    }
    a
}

/// Numerical rank from singular values, tolerance `max(max_dim·σ_max·1e-12, 1e-9)`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0f64, f64::max);
    let tol = (m.nrows().max(m.ncols()) as f64 * smax * 1e-12).max(1e-9);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn graph_rank(g: &RelGraph) -> usize {
    numerical_rank(&oriented_incidence_matrix(g))
}

pub fn component_count(g: &RelGraph) -> usize {
    let mut parent: Vec<usize> = (0..g.node_count()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = g.node_count();
    for e in g.edges() {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    components
}

pub fn is_connected(g: &RelGraph) -> bool {
    g.node_count() > 0 && component_count(g) == 1
}

/// Weighted Laplacian `D − A`.
pub fn laplacian(g: &RelGraph) -> DMatrix<f64> {
    let mut l = -g.adjacency();
    for v in 0..g.node_count() {
        l[(v, v)] = g.degree(v);
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub spectral_rank: usize,
    pub threshold: usize,
    pub observable: bool,
    pub component_count: usize,
}

/// Builds `C = Āᵀ W Ā` with `Ā = A(G) ⊗ I_d` (oriented incidence) and `W` the
/// block diagonal of per-edge `w·I_d`, and compares its rank with `d·(n − 1)`.
pub fn spectral_matrix(erpmg: &RelGraph, state_dim: usize) -> DMatrix<f64> {
    let d = state_dim;
    let (m, n) = (erpmg.edge_count(), erpmg.node_count());
    let a = oriented_incidence_matrix(erpmg).kronecker(&DMatrix::<f64>::identity(d, d));
    let mut w = DMatrix::zeros(m * d, m * d);
    for (k, e) in erpmg.edges().iter().enumerate() {
        for r in 0..d {
            w[(k * d + r, k * d + r)] = e.w;
        }
    }
    if m == 0 {
        return DMatrix::zeros(n * d, n * d);
    }
    a.transpose() * w * a
}

pub fn observability_check(erpmg: &RelGraph, state_dim: usize) -> Result<ObservabilityReport> {
    if state_dim == 0 {
        return Err(invalid("state dimension must be at least 1"));
    }
    let n = erpmg.node_count();
    let threshold = state_dim * (n.max(2) - 1);
    let spectral_rank = numerical_rank(&spectral_matrix(erpmg, state_dim));
    Ok(ObservabilityReport {
        spectral_rank,
        threshold,
        observable: n >= 2 && spectral_rank == threshold,
        component_count: component_count(erpmg),
    })
}
