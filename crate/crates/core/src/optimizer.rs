//! Pose-graph optimization over one candidate graph.
//!
//! Vertices are planar robot poses. Two factor types:
//! - odometry priors: the pose predicted by composing a fixed origin with a
//!   relative motion, weighted by a 3×3 information matrix (world-frame
//!   residual, heading wrapped);
//! - range factors: `‖p_i − p_j‖ − d` with scalar information.
//!
//! The solver is Levenberg-Marquardt with multiplicative (Marquardt) damping
//! on the diagonal of the Gauss-Newton Hessian. Every trial step starts from a
//! saved copy of the state; a step is kept only if the total chi-square
//! decreases, otherwise the copy is restored and the damping is raised.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{normalize, Pose2D};
use crate::hypothesis::CandidateGraph;

/// Positions closer than this make a range factor degenerate.
pub const DEGENERATE_RANGE: f64 = 1e-9;

const DIAG_FLOOR: f64 = 1e-12;
const LAMBDA_CEILING: f64 = 1e20;

mod mat3_rows {
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix3<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix3<f64>, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Ok(Matrix3::from_fn(|r, c| rows[r][c]))
    }
}

/// Prior on one vertex: `origin ⊕ motion`, weighted by `information`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdomFactor {
    pub robot: usize,
    pub origin: Pose2D,
    pub motion: Pose2D,
    #[serde(with = "mat3_rows")]
    pub information: Matrix3<f64>,
}

impl OdomFactor {
    pub fn predicted(&self) -> Pose2D {
        self.origin.compose(&self.motion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeFactor {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub information: f64,
}

/// Euclidean-ball feasible set for the stacked free positions, with the
/// regularization weight and dual variable of its Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub ball_radius: f64,
    pub gamma: f64,
    pub lambda_dual: f64,
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.ball_radius > 0.0 && self.ball_radius.is_finite()) {
            return Err(invalid("ball radius must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma must be positive"));
        }
        if !(self.lambda_dual >= 0.0 && self.lambda_dual.is_finite()) {
            return Err(invalid("dual variable must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseGraphProblem {
    pub vertices: Vec<Pose2D>,
    pub odom_factors: Vec<OdomFactor>,
    pub range_factors: Vec<RangeFactor>,
    /// Vertex held fixed to remove the gauge freedom. Optional when the
    /// odometry priors already pin every vertex.
    #[serde(default)]
    pub anchor: Option<usize>,
    #[serde(default)]
    pub constraint: Option<ConstraintSet>,
}

impl PoseGraphProblem {
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(v) = self.vertices.iter().position(|p| !p.is_valid()) {
            return Err(invalid(format!("vertex {v} is not a valid pose")));
        }
        if let Some(a) = self.anchor {
            if a >= n {
                return Err(invalid(format!("anchor {a} outside 0..{n}")));
            }
        }
        for f in &self.odom_factors {
            if f.robot >= n {
                return Err(invalid(format!("odometry factor on missing vertex {}", f.robot)));
            }
            if !f.origin.is_valid() || !f.motion.is_valid() {
                return Err(invalid(format!("odometry factor on {} has an invalid pose", f.robot)));
            }
            let sym = (f.information - f.information.transpose()).abs().max();
            if sym > 1e-9 * f.information.abs().max().max(1.0) || Cholesky::new(f.information).is_none() {
                return Err(invalid(format!(
                    "odometry information on {} is not symmetric positive definite",
                    f.robot
                )));
            }
        }
        for f in &self.range_factors {
            if f.i >= n || f.j >= n || f.i == f.j {
                return Err(invalid(format!("range factor ({}, {}) is malformed", f.i, f.j)));
            }
            if !(f.information > 0.0 && f.information.is_finite()) {
                return Err(invalid(format!("range factor ({}, {}) needs positive information", f.i, f.j)));
            }
            if !(f.distance >= 0.0 && f.distance.is_finite()) {
                return Err(invalid(format!("range factor ({}, {}) has bad distance", f.i, f.j)));
            }
        }
        if let Some(cs) = &self.constraint {
            cs.validate()?;
        }
        Ok(())
    }

    fn free_slots(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        (0..self.vertices.len())
            .map(|v| {
                if Some(v) == self.anchor {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LMConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for LMConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e-4,
            lambda_up: 10.0,
            lambda_down: 0.5,
            max_iters: 50,
            abs_tol: 1e-9,
            rel_tol: 1e-6,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(invalid("lambda0 must be positive"));
        }
        if !(self.lambda_up > 1.0 && self.lambda_up.is_finite()) {
            return Err(invalid("lambda_up must exceed 1"));
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err(invalid("lambda_down must lie in (0, 1)"));
        }
        if !(self.abs_tol >= 0.0 && self.rel_tol >= 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedGraph {
    pub vertices: Vec<Pose2D>,
    pub final_chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Chi-square at the start and after every accepted step.
    pub chi2_trace: Vec<f64>,
    /// Joint log-weight of the candidate graph this solve started from.
    #[serde(default)]
    pub joint_log_weight: f64,
}

/// Odometry for one robot: where it was, how it moved, and the covariance of
/// the resulting prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryInput {
    pub origin: Pose2D,
    pub motion: Pose2D,
    pub covariance: Matrix3<f64>,
}

/// Range standard deviation `sqrt(floor² + (relative·d)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeNoiseModel {
    pub sigma_floor: f64,
    pub relative: f64,
}

impl RangeNoiseModel {
    pub fn fixed(sigma: f64) -> Self {
        Self {
            sigma_floor: sigma,
            relative: 0.0,
        }
    }

    pub fn sigma(&self, d: f64) -> f64 {
        self.sigma_floor.hypot(self.relative * d)
    }

    pub fn information(&self, d: f64) -> f64 {
        1.0 / self.sigma(d).powi(2)
    }
}

/// Turns a candidate graph into a solvable problem: candidate poses become
/// the initial vertices, each odometry input becomes a prior (skipped for the
/// anchor), and each measured edge becomes a range factor.
pub fn build_problem(
    cg: &CandidateGraph,
    odometry: &[OdometryInput],
    anchor: Option<usize>,
    ranges: &RangeNoiseModel,
) -> Result<PoseGraphProblem> {
    let n = cg.poses.len();
    if odometry.len() != n {
        return Err(invalid(format!("{} odometry inputs for {n} vertices", odometry.len())));
    }
    if !(ranges.sigma_floor > 0.0 && ranges.relative >= 0.0) {
        return Err(invalid("range noise floor must be positive"));
    }
    let mut odom_factors = Vec::with_capacity(n);
    for (robot, o) in odometry.iter().enumerate() {
        if Some(robot) == anchor {
            continue;
        }
        let information = Cholesky::new(o.covariance)
            .map(|c| c.inverse())
            .ok_or_else(|| invalid(format!("odometry covariance of robot {robot} is singular")))?;
        let information = 0.5 * (information + information.transpose());
        odom_factors.push(OdomFactor {
            robot,
            origin: o.origin,
            motion: o.motion,
            information,
        });
    }
    let range_factors = cg
        .measured
        .edges()
        .iter()
        .map(|e| RangeFactor {
            i: e.i,
            j: e.j,
            distance: e.w,
            information: ranges.information(e.w),
        })
        .collect();
    let problem = PoseGraphProblem {
        vertices: cg.poses.clone(),
        odom_factors,
        range_factors,
        anchor,
        constraint: None,
    };
    problem.validate()?;
    Ok(problem)
}

/// Residual of a range factor and its gradient with respect to both poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeLinearization {
    pub residual: f64,
    pub jac_i: [f64; 3],
    pub jac_j: [f64; 3],
    pub degenerate: bool,
}

pub fn range_residual(pi: &Pose2D, pj: &Pose2D, d: f64) -> RangeLinearization {
    let dx = pi.x - pj.x;
    let dy = pi.y - pj.y;
    let dist = dx.hypot(dy);
    if dist <= DEGENERATE_RANGE {
        return RangeLinearization {
            residual: -d,
            jac_i: [0.0; 3],
            jac_j: [0.0; 3],
            degenerate: true,
        };
    }
    let (ux, uy) = (dx / dist, dy / dist);
    RangeLinearization {
        residual: dist - d,
        jac_i: [ux, uy, 0.0],
        jac_j: [-ux, -uy, 0.0],
        degenerate: false,
    }
}

/// World-frame residual `x − predicted` (heading wrapped) and its Jacobian in `x`.
pub fn odometry_residual(x: &Pose2D, predicted: &Pose2D) -> (Vector3<f64>, Matrix3<f64>) {
    (
        Vector3::new(x.x - predicted.x, x.y - predicted.y, normalize(x.phi - predicted.phi)),
        Matrix3::identity(),
    )
}

pub fn chi2(problem: &PoseGraphProblem, poses: &[Pose2D]) -> f64 {
    chi2_shares(problem, poses).iter().sum()
}

/// Per-vertex split of the chi-square: each odometry prior goes to its own
/// vertex, each range factor half to each endpoint.
pub fn chi2_shares(problem: &PoseGraphProblem, poses: &[Pose2D]) -> Vec<f64> {
    let mut shares = vec![0.0; poses.len()];
    for f in &problem.odom_factors {
        let (r, _) = odometry_residual(&poses[f.robot], &f.predicted());
        shares[f.robot] += (r.transpose() * f.information * r)[0];
    }
    for f in &problem.range_factors {
        let lin = range_residual(&poses[f.i], &poses[f.j], f.distance);
        let e = f.information * lin.residual * lin.residual;
        shares[f.i] += 0.5 * e;
        shares[f.j] += 0.5 * e;
    }
    shares
}

/// Gauss-Newton system `H δ = −b` over the free vertices.
fn linearize(problem: &PoseGraphProblem, poses: &[Pose2D], slots: &[Option<usize>], dim: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut h = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    for f in &problem.odom_factors {
        let Some(s) = slots[f.robot] else { continue };
        let (r, j) = odometry_residual(&poses[f.robot], &f.predicted());
        let jt_omega = j.transpose() * f.information;
        let hb = jt_omega * j;
        let bb = jt_omega * r;
        for a in 0..3 {
            b[3 * s + a] += bb[a];
            for c in 0..3 {
                h[(3 * s + a, 3 * s + c)] += hb[(a, c)];
            }
        }
    }
    for f in &problem.range_factors {
        let lin = range_residual(&poses[f.i], &poses[f.j], f.distance);
        if lin.degenerate {
            continue;
        }
        let blocks = [(slots[f.i], lin.jac_i), (slots[f.j], lin.jac_j)];
        for &(sa, ja) in &blocks {
            let Some(sa) = sa else { continue };
            for a in 0..3 {
                b[3 * sa + a] += ja[a] * f.information * lin.residual;
            }
            for &(sc, jc) in &blocks {
                let Some(sc) = sc else { continue };
                for a in 0..3 {
                    for c in 0..3 {
                        h[(3 * sa + a, 3 * sc + c)] += ja[a] * f.information * jc[c];
                    }
                }
            }
        }
    }
    (h, b)
}

/// Scales `x` back onto the ball of radius `radius` when it lies outside.
pub fn project_ball(x: &[f64], radius: f64) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        x.to_vec()
    } else {
        let s = radius / norm;
        x.iter().map(|v| v * s).collect()
    }
}

/// Positions of the non-anchor vertices stacked as `[x0, y0, x1, y1, …]`.
pub fn stacked_positions(problem: &PoseGraphProblem, poses: &[Pose2D]) -> Vec<f64> {
    poses
        .iter()
        .enumerate()
        .filter(|&(v, _)| Some(v) != problem.anchor)
        .flat_map(|(_, p)| [p.x, p.y])
        .collect()
}

fn project_poses(problem: &PoseGraphProblem, poses: &mut [Pose2D], radius: f64) {
    let projected = project_ball(&stacked_positions(problem, poses), radius);
    let mut it = projected.chunks_exact(2);
    for (v, p) in poses.iter_mut().enumerate() {
        if Some(v) == problem.anchor {
            continue;
        }
        let xy = it.next().expect("one chunk per free vertex");
        p.x = xy[0];
        p.y = xy[1];
    }
}

pub fn solve_lm(problem: &PoseGraphProblem, cfg: &LMConfig) -> Result<OptimizedGraph> {
    problem.validate()?;
    cfg.validate()?;
    let slots = problem.free_slots();
    let dim = 3 * slots.iter().flatten().count();

    let mut poses = problem.vertices.clone();
    if let Some(cs) = &problem.constraint {
        project_poses(problem, &mut poses, cs.ball_radius);
    }
    let mut current = chi2(problem, &poses);
    if !current.is_finite() {
        return Err(invalid(format!("initial chi-square is not finite ({current})")));
    }
    let mut trace = vec![current];
    let mut lambda = cfg.lambda0;
    let mut iterations = 0;
    let mut converged = current == 0.0 || dim == 0;
    let (mut h, mut b) = linearize(problem, &poses, &slots, dim);

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        if b.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut damped = h.clone();
        for d in 0..dim {
            damped[(d, d)] += lambda * h[(d, d)].max(DIAG_FLOOR);
        }
        let Some(chol) = Cholesky::new(damped) else {
            lambda *= cfg.lambda_up;
            if lambda > LAMBDA_CEILING {
                break;
            }
            continue;
        };
        let delta = chol.solve(&(-&b));

        let backup = poses.clone();
        for (v, slot) in slots.iter().enumerate() {
            if let Some(s) = slot {
                let p = &mut poses[v];
                p.x += delta[3 * s];
                p.y += delta[3 * s + 1];
                p.phi = normalize(p.phi + delta[3 * s + 2]);
            }
        }
        if let Some(cs) = &problem.constraint {
            project_poses(problem, &mut poses, cs.ball_radius);
        }
        let candidate = chi2(problem, &poses);

        if candidate.is_finite() && candidate < current {
            let gain = current - candidate;
            let relative = gain / current;
            current = candidate;
            trace.push(current);
            lambda = (lambda * cfg.lambda_down).max(f64::MIN_POSITIVE);
            if gain < cfg.abs_tol || relative < cfg.rel_tol || current == 0.0 {
                converged = true;
            } else {
                (h, b) = linearize(problem, &poses, &slots, dim);
            }
        } else {
            poses = backup;
            let scale = poses.iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
            if delta.amax() <= 1e-12 * scale {
                // Nothing left to gain at machine precision.
                converged = true;
                break;
            }
            lambda *= cfg.lambda_up;
            if lambda > LAMBDA_CEILING {
                break;
            }
        }
    }

    Ok(OptimizedGraph {
        vertices: poses,
        final_chi2: current,
        iterations,
        converged,
        chi2_trace: trace,
        joint_log_weight: 0.0,
    })
}

/// Marginal covariance of one free vertex from the undamped Hessian at `poses`.
/// `None` for the anchor or when the Hessian is singular.
pub fn vertex_covariance(problem: &PoseGraphProblem, poses: &[Pose2D], vertex: usize) -> Option<Matrix3<f64>> {
    let slots = problem.free_slots();
    let s = (*slots.get(vertex)?)?;
    let dim = 3 * slots.iter().flatten().count();
    let (h, _) = linearize(problem, poses, &slots, dim);
    let mut rhs = DMatrix::zeros(dim, 3);
    for a in 0..3 {
        rhs[(3 * s + a, a)] = 1.0;
    }
    let cols = Cholesky::new(h)?.solve(&rhs);
    let cov = Matrix3::from_fn(|r, c| cols[(3 * s + r, c)]);
    Some(0.5 * (cov + cov.transpose()))
}

/// `Σ f_i + λ·N·c − (γ/2)·N·λ²` from an already summed objective.
pub fn regularized_lagrangian(objective: f64, n: usize, constraint_value: f64, lambda: f64, gamma: f64) -> f64 {
    let n = n as f64;
    objective + lambda * n * constraint_value - 0.5 * gamma * n * lambda * lambda
}

/// Regularized Lagrangian of the ball-constrained problem at `poses`, with
/// `c(x) = ‖x‖² − R²` over the stacked free positions and `N` the vertex count.
pub fn lagrangian_value(poses: &[Pose2D], lambda_dual: f64, problem: &PoseGraphProblem, cs: &ConstraintSet) -> Result<f64> {
    if !(lambda_dual >= 0.0) {
        return Err(invalid("dual variable must be non-negative"));
    }
    if poses.len() != problem.vertices.len() {
        return Err(invalid("pose count does not match the problem"));
    }
    let objective: f64 = chi2_shares(problem, poses).iter().sum();
    Ok(regularized_lagrangian(
        objective,
        poses.len(),
        ball_constraint_value(problem, poses, cs.ball_radius),
        lambda_dual,
        cs.gamma,
    ))
}

pub fn ball_constraint_value(problem: &PoseGraphProblem, poses: &[Pose2D], radius: f64) -> f64 {
    stacked_positions(problem, poses).iter().map(|v| v * v).sum::<f64>() - radius * radius
}

/// Maximizer of the Lagrangian over `λ ≥ 0` for a fixed primal point.
pub fn dual_update(constraint_value: f64, gamma: f64) -> f64 {
    (constraint_value / gamma).max(0.0)
}

/// Index of the solve with the lowest chi-square; ties go to the higher
/// joint log-weight, then to the lower index.
pub fn select_best(graphs: &[OptimizedGraph]) -> Result<usize> {
    if graphs.is_empty() {
        return Err(invalid("no optimized graphs to choose from"));
    }
    let mut best = 0;
    for (k, g) in graphs.iter().enumerate().skip(1) {
        let b = &graphs[best];
        let better = g.final_chi2 < b.final_chi2
            || (g.final_chi2 == b.final_chi2 && g.joint_log_weight > b.joint_log_weight);
        if better {
            best = k;
        }
    }
    Ok(best)
}

/// Every vertex expressed in the frame of `reference`.
pub fn extract_relative_poses(g: &OptimizedGraph, reference: usize) -> Result<BTreeMap<usize, Pose2D>> {
    let base = g
        .vertices
        .get(reference)
        .ok_or_else(|| invalid(format!("reference {reference} not in graph")))?;
    Ok(g.vertices.iter().enumerate().map(|(j, p)| (j, base.between(p))).collect())
}
