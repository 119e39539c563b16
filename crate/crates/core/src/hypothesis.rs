//! Per-robot pose hypotheses and the candidate graphs they induce.
//!
//! Each robot's next pose is represented by `k` weighted candidates obtained
//! by pushing earlier candidates through the noisy motion model and scoring
//! them against measured ranges. Picking one candidate per robot yields a
//! candidate graph, used as an initialization for pose-graph optimization.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{normalize, Pose2D};
use crate::motion::{step_noisy, Control, MotionNoise};
use crate::radio::{RangeMeasurement, RobotId};
use crate::relgraph::RelGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pose: Pose2D,
    pub log_weight: f64,
}

/// `k` candidates for one robot with log-weights normalized so that
/// `Σ exp(log_weight) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    robot_id: RobotId,
    candidates: Vec<Candidate>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl HypothesisSet {
    /// Normalizes the given candidates (softmax over log-weights).
    pub fn new(robot_id: RobotId, mut candidates: Vec<Candidate>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(invalid(format!("robot {robot_id}: hypothesis set needs at least one candidate")));
        }
        if let Some(c) = candidates.iter().find(|c| !c.log_weight.is_finite() || !c.pose.is_valid()) {
            return Err(invalid(format!("robot {robot_id}: invalid candidate {c:?}")));
        }
        let z = log_sum_exp(candidates.iter().map(|c| c.log_weight));
        for c in &mut candidates {
            c.log_weight -= z;
        }
        Ok(Self { robot_id, candidates })
    }

    /// `k` identical copies of `pose` with equal weight.
    pub fn uniform(robot_id: RobotId, pose: Pose2D, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        Self::new(robot_id, vec![Candidate { pose, log_weight: 0.0 }; k])
    }

    pub fn robot_id(&self) -> RobotId {
        self.robot_id
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn weights(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.log_weight.exp()).collect()
    }

    /// The highest-weight candidate; ties go to the lowest index.
    pub fn best(&self) -> &Candidate {
        let mut best = &self.candidates[0];
        for c in &self.candidates[1..] {
            if c.log_weight > best.log_weight {
                best = c;
            }
        }
        best
    }
}

/// Spawns `samples_per_candidate` noisy successors of every candidate.
/// Children inherit their parent's log-weight.
pub fn propagate_candidates<R: Rng + ?Sized>(
    prev: &HypothesisSet,
    u: &Control,
    dt: f64,
    noise: &MotionNoise,
    samples_per_candidate: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    if samples_per_candidate == 0 {
        return Err(invalid("samples_per_candidate must be at least 1"));
    }
    let mut out = Vec::with_capacity(prev.len() * samples_per_candidate);
    for parent in prev.candidates() {
        for _ in 0..samples_per_candidate {
            out.push(Candidate {
                pose: step_noisy(&parent.pose, u, dt, noise, rng)?,
                log_weight: parent.log_weight,
            });
        }
    }
    Ok(out)
}

/// Gaussian log-likelihood (up to a constant) of the ranges between
/// `robot_id`, placed at `candidate`, and peers at the given positions.
///
/// Measurements that do not involve `robot_id`, or whose other endpoint has
/// no known position, are ignored.
pub fn range_log_likelihood(
    robot_id: RobotId,
    candidate: &Pose2D,
    peer_positions: &BTreeMap<RobotId, Pose2D>,
    measured: &[RangeMeasurement],
    sigma_r: f64,
) -> Result<f64> {
    if !(sigma_r > 0.0 && sigma_r.is_finite()) {
        return Err(invalid(format!("range sigma must be positive, got {sigma_r}")));
    }
    let inv = 1.0 / (2.0 * sigma_r * sigma_r);
    Ok(measured
        .iter()
        .filter_map(|m| {
            let peer = m.peer_of(robot_id)?;
            peer_positions.get(&peer).map(|p| (p, m.distance_m))
        })
        .map(|(p, d)| {
            let r = candidate.distance_to(p) - d;
            -r * r * inv
        })
        .sum())
}

/// Keeps the `k` highest-weight candidates (all of them if fewer), ties to
/// the lower input index, and renormalizes.
pub fn select_top_k(robot_id: RobotId, candidates: &[Candidate], k: usize) -> Result<HypothesisSet> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .log_weight
            .total_cmp(&candidates[a].log_weight)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    HypothesisSet::new(robot_id, order.into_iter().map(|i| candidates[i]).collect())
}

/// Pads a set that came back short by resampling around its best candidate.
pub fn ensure_k<R: Rng + ?Sized>(set: HypothesisSet, k: usize, noise: &MotionNoise, rng: &mut R) -> Result<HypothesisSet> {
    if set.len() >= k {
        return Ok(set);
    }
    noise.validate()?;
    let best = *set.best();
    let nx = Normal::new(0.0, noise.sigma_x).map_err(|e| invalid(e.to_string()))?;
    let ny = Normal::new(0.0, noise.sigma_y).map_err(|e| invalid(e.to_string()))?;
    let np = Normal::new(0.0, noise.sigma_phi).map_err(|e| invalid(e.to_string()))?;
    let robot_id = set.robot_id;
    let mut candidates = set.candidates;
    while candidates.len() < k {
        candidates.push(Candidate {
            pose: Pose2D {
                x: best.pose.x + nx.sample(rng),
                y: best.pose.y + ny.sample(rng),
                phi: normalize(best.pose.phi + np.sample(rng)),
            },
            log_weight: best.log_weight,
        });
    }
    HypothesisSet::new(robot_id, candidates)
}

/// One candidate per robot, with the ranges that assignment predicts on the
/// measured edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGraph {
    /// Candidate index chosen for each robot, in the hypothesis sets' own order.
    pub assignment: Vec<usize>,
    pub joint_log_weight: f64,
    pub poses: Vec<Pose2D>,
    /// Measured graph; edge weights are measured ranges.
    pub measured: RelGraph,
    /// Range implied by `poses` for each edge of `measured`, same order.
    pub predicted_ranges: Vec<f64>,
}

#[derive(Debug)]
struct Frontier {
    weight: f64,
    ranks: Vec<usize>,
    last: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Max-heap on weight; among equal weights the lexicographically smallest
    // rank vector pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

/// Lists up to `cap` candidate graphs in non-increasing joint log-weight.
///
/// Uses best-first expansion over per-robot candidates ranked by weight.
/// Every assignment is generated from exactly one parent (the one with its
/// highest non-zero rank decremented), and a parent never weighs less than
/// its children, so the output is the exact top `cap` of the full `kⁿ`
/// space; this is also a full enumeration when `kⁿ ≤ cap`. Ties are ordered
/// by rank vector.
pub fn enumerate_candidate_graphs(
    hyps: &[HypothesisSet],
    measured: &RelGraph,
    cap: usize,
) -> Result<Vec<CandidateGraph>> {
    if cap == 0 {
        return Err(invalid("cap must be at least 1"));
    }
    if hyps.len() != measured.node_count() {
        return Err(invalid(format!(
            "{} hypothesis sets for a graph of {} nodes",
            hyps.len(),
            measured.node_count()
        )));
    }
    if hyps.is_empty() {
        return Ok(Vec::new());
    }

    // ranked[r][q] = index of robot r's q-th best candidate
    let ranked: Vec<Vec<usize>> = hyps
        .iter()
        .map(|h| {
            let c = h.candidates();
            let mut idx: Vec<usize> = (0..c.len()).collect();
            idx.sort_by(|&a, &b| c[b].log_weight.total_cmp(&c[a].log_weight).then(a.cmp(&b)));
            idx
        })
        .collect();
    let weight_of = |ranks: &[usize]| -> f64 {
        ranks
            .iter()
            .enumerate()
            .map(|(r, &q)| hyps[r].candidates()[ranked[r][q]].log_weight)
            .sum()
    };

    let mut heap = BinaryHeap::new();
    let root = vec![0; hyps.len()];
    heap.push(Frontier {
        weight: weight_of(&root),
        ranks: root,
        last: 0,
    });
    let mut out = Vec::new();
    while let Some(node) = heap.pop() {
        for r in node.last..hyps.len() {
            if node.ranks[r] + 1 < ranked[r].len() {
                let mut ranks = node.ranks.clone();
                ranks[r] += 1;
                heap.push(Frontier {
                    weight: weight_of(&ranks),
                    ranks,
                    last: r,
                });
            }
        }
        let assignment: Vec<usize> = node.ranks.iter().enumerate().map(|(r, &q)| ranked[r][q]).collect();
        out.push(candidate_graph(hyps, measured, assignment, node.weight));
        if out.len() == cap {
            break;
        }
    }
    Ok(out)
}

fn candidate_graph(hyps: &[HypothesisSet], measured: &RelGraph, assignment: Vec<usize>, weight: f64) -> CandidateGraph {
    let poses: Vec<Pose2D> = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| hyps[r].candidates()[c].pose)
        .collect();
    let predicted_ranges = measured.edges().iter().map(|e| poses[e.i].distance_to(&poses[e.j])).collect();
    CandidateGraph {
        assignment,
        joint_log_weight: weight,
        poses,
        measured: measured.clone(),
        predicted_ranges,
    }
}
