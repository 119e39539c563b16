//! Time-varying communication network: per-iteration link sets with
//! Metropolis weights, assumption checks, and loss-free message delivery.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::Pose2D;
use crate::motion::Control;
use crate::radio::{RangeMeasurement, RobotId};
use crate::relgraph::{component_count, Edge, RelGraph};

/// Active links at one iteration. `edges` lists ordered pairs `(i, j)` with
/// `i ≤ j`, self links included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SliceRecord", into = "SliceRecord")]
pub struct NetworkSlice {
    pub t: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: DMatrix<f64>,
}

/// One line of a network trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SliceRecord {
    t: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<Vec<f64>>,
}

impl TryFrom<SliceRecord> for NetworkSlice {
    type Error = crate::error::Error;
    fn try_from(r: SliceRecord) -> Result<Self> {
        let n = r.weights.len();
        if r.weights.iter().any(|row| row.len() != n) {
            return Err(invalid(format!("weights at t={} are not square", r.t)));
        }
        if let Some(&(i, j)) = r.edges.iter().find(|&&(i, j)| i >= n || j >= n) {
            return Err(invalid(format!("edge ({i}, {j}) at t={} is out of range", r.t)));
        }
        Ok(NetworkSlice {
            t: r.t,
            edges: r.edges,
            weights: DMatrix::from_fn(n, n, |i, j| r.weights[i][j]),
        })
    }
}

impl From<NetworkSlice> for SliceRecord {
    fn from(s: NetworkSlice) -> Self {
        let n = s.weights.nrows();
        SliceRecord {
            t: s.t,
            edges: s.edges,
            weights: (0..n).map(|i| (0..n).map(|j| s.weights[(i, j)]).collect()).collect(),
        }
    }
}

impl NetworkSlice {
    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    /// Whether robots `i` and `j` exchange data at this iteration.
    pub fn linked(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).is_ok()
    }

    /// Undirected graph of the non-self links, unit weights.
    pub fn link_graph(&self) -> RelGraph {
        RelGraph::new(
            self.node_count(),
            self.edges.iter().filter(|(i, j)| i != j).map(|&(i, j)| Edge { i, j, w: 1.0 }),
        )
        .expect("slice edges are validated on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeVaryingNetwork {
    pub n: usize,
    pub schedule: Vec<NetworkSlice>,
}

/// `a_ij = 1 / (1 + max(deg_i, deg_j))` on links, remainder on the diagonal.
pub fn metropolis_weights(edges: &[(usize, usize)], n: usize) -> Result<DMatrix<f64>> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(invalid(format!("edge ({i}, {j}) outside 0..{n}")));
        }
        if i != j {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut degree = vec![0usize; n];
    for &(i, j) in &pairs {
        degree[i] += 1;
        degree[j] += 1;
    }
    let mut a = DMatrix::zeros(n, n);
    for &(i, j) in &pairs {
        let w = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
        a[(i, j)] = w;
        a[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = 1.0 - off;
    }
    Ok(a)
}

impl TimeVaryingNetwork {
    /// Links every pair closer than `comm_radius` at each iteration, plus
    /// self links, weighted by [`metropolis_weights`].
    pub fn from_positions(positions: &[Vec<Pose2D>], comm_radius: f64) -> Result<Self> {
        let n = positions.first().map_or(0, Vec::len);
        let mut schedule = Vec::with_capacity(positions.len());
        for (t, poses) in positions.iter().enumerate() {
            if poses.len() != n {
                return Err(invalid(format!("iteration {t} has {} robots, expected {n}", poses.len())));
            }
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for i in 0..n {
                edges.push((i, i));
                for j in i + 1..n {
                    if poses[i].distance_to(&poses[j]) <= comm_radius {
                        edges.push((i, j));
                    }
                }
            }
            edges.sort_unstable();
            let weights = metropolis_weights(&edges, n)?;
            schedule.push(NetworkSlice { t, edges, weights });
        }
        Ok(Self { n, schedule })
    }

    pub fn slice(&self, t: usize) -> Result<&NetworkSlice> {
        self.schedule
            .get(t)
            .ok_or_else(|| invalid(format!("iteration {t} outside the schedule of {}", self.schedule.len())))
    }

    /// Writes one JSON object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.schedule {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut schedule: Vec<NetworkSlice> = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            schedule.push(serde_json::from_str(&line)?);
        }
        let n = schedule.first().map_or(0, NetworkSlice::node_count);
        if let Some(s) = schedule.iter().find(|s| s.node_count() != n) {
            return Err(invalid(format!("trace changes robot count at t={}", s.t)));
        }
        for s in &mut schedule {
            for e in &mut s.edges {
                *e = (e.0.min(e.1), e.0.max(e.1));
            }
            s.edges.sort_unstable();
            s.edges.dedup();
        }
        Ok(Self { n, schedule })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub doubly_stochastic: bool,
    pub xi_bound: bool,
    pub t_connected: bool,
    /// Iterations violating any of the checks; for a disconnected window its
    /// first iteration is listed.
    pub failing_iterations: Vec<usize>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.doubly_stochastic && self.xi_bound && self.t_connected
    }
}

pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Largest deviation of any row or column sum from 1, or `∞` when an entry
/// is negative.
pub fn doubly_stochastic_defect(a: &DMatrix<f64>) -> f64 {
    if a.iter().any(|&v| v < 0.0 || !v.is_finite()) || a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let rows = a.row_iter().map(|r| (r.sum() - 1.0).abs());
    let cols = a.column_iter().map(|c| (c.sum() - 1.0).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// Checks, over the first `horizon` iterations: doubly stochastic weights;
/// diagonal and every positive weight at least `xi` (both within
/// [`STOCHASTIC_TOL`]); connectivity of the union
/// of links over each window `[sT, (s+1)T − 1]`.
pub fn validate_assumptions(net: &TimeVaryingNetwork, xi: f64, period: usize, horizon: usize) -> Result<AssumptionReport> {
    if !(xi > 0.0) {
        return Err(invalid("xi must be positive"));
    }
    if period == 0 {
        return Err(invalid("T must be at least 1"));
    }
    let horizon = horizon.min(net.schedule.len());
    let mut failing = Vec::new();
    let mut doubly_stochastic = true;
    let mut xi_bound = true;
    for s in &net.schedule[..horizon] {
        let a = &s.weights;
        let ds = doubly_stochastic_defect(a) <= STOCHASTIC_TOL;
        let floor = xi - STOCHASTIC_TOL;
        let diag_ok = (0..a.nrows()).all(|i| a[(i, i)] >= floor);
        let entries_ok = a.iter().all(|&v| v == 0.0 || v >= floor);
        let support_ok = (0..a.nrows()).all(|i| {
            (0..a.ncols()).all(|j| i == j || (a[(i, j)] > 0.0) == s.linked(i, j))
        });
        doubly_stochastic &= ds;
        xi_bound &= diag_ok && entries_ok && support_ok;
        if !(ds && diag_ok && entries_ok && support_ok) {
            failing.push(s.t);
        }
    }

    let mut t_connected = true;
    let mut start = 0;
    while start + period <= horizon {
        let window = &net.schedule[start..start + period];
        let mut union: Vec<(usize, usize)> = window
            .iter()
            .flat_map(|s| s.edges.iter().copied())
            .filter(|(i, j)| i != j)
            .collect();
        union.sort_unstable();
        union.dedup();
        let g = RelGraph::new(net.n, union.into_iter().map(|(i, j)| Edge { i, j, w: 1.0 }))?;
        if net.n > 0 && component_count(&g) != 1 {
            t_connected = false;
            failing.push(window[0].t);
        }
        start += period;
    }
    failing.sort_unstable();
    failing.dedup();
    Ok(AssumptionReport {
        doubly_stochastic,
        xi_bound,
        t_connected,
        failing_iterations: failing,
    })
}

/// What a robot broadcasts each iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageBundle {
    pub sender: RobotId,
    pub pose: Pose2D,
    /// Covariance of `pose`, row-major.
    pub covariance: [[f64; 3]; 3],
    pub control: Control,
    /// Signals this robot received, one per audible peer.
    pub rssi: Vec<RangeMeasurement>,
    pub timestamp: usize,
}

impl MessageBundle {
    pub fn covariance_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.covariance[r][c])
    }

    pub fn set_covariance(&mut self, m: &Matrix3<f64>) {
        self.covariance = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
    }
}

/// Delivers outbox `j` to robot `i` for every link `(i, j)` active at `t`,
/// including each robot's own. Inboxes are ordered by sender.
pub fn exchange<M: Clone>(net: &TimeVaryingNetwork, t: usize, outboxes: &[M]) -> Result<Vec<Vec<(RobotId, M)>>> {
    deliver(net, t, outboxes, 0.0, None)
}

/// Like [`exchange`], dropping each non-self delivery with probability
/// `drop_probability`. With probability 0 no random draws are made.
pub fn exchange_lossy<M: Clone, R: RngCore>(
    net: &TimeVaryingNetwork,
    t: usize,
    outboxes: &[M],
    drop_probability: f64,
    rng: &mut R,
) -> Result<Vec<Vec<(RobotId, M)>>> {
    deliver(net, t, outboxes, drop_probability, Some(rng))
}

fn deliver<M: Clone>(
    net: &TimeVaryingNetwork,
    t: usize,
    outboxes: &[M],
    drop_probability: f64,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Vec<Vec<(RobotId, M)>>> {
    if !(0.0..=1.0).contains(&drop_probability) {
        return Err(invalid("drop probability must lie in [0, 1]"));
    }
    let slice = net.slice(t)?;
    if outboxes.len() != net.n {
        return Err(invalid(format!("{} outboxes for {} robots", outboxes.len(), net.n)));
    }
    let mut inboxes: Vec<Vec<(RobotId, M)>> = vec![Vec::new(); net.n];
    for i in 0..net.n {
        for j in 0..net.n {
            if i != j && !slice.linked(i, j) {
                continue;
            }
            if i != j && drop_probability > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    if r.random_bool(drop_probability) {
                        continue;
                    }
                }
            }
            inboxes[i].push((j, outboxes[j].clone()));
        }
    }
    Ok(inboxes)
}
