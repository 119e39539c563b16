//! Seeded multi-trial simulation: ground truth, radio and network synthesis,
//! the per-robot localization loop, the dead-reckoning baseline and metrics.

mod config;
mod output;

pub use config::{Area, EstimatorConfig, MotionNoiseConfig, PolicyConfig, ScenarioConfig, SCHEMA_VERSION};
pub use output::{read_trajectory_csv, write_outputs, write_trajectory_csv, TrajectoryRow};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Pose2D;
use crate::hypothesis::{
    enumerate_candidate_graphs, ensure_k, propagate_candidates, range_log_likelihood, select_top_k, Candidate,
    HypothesisSet,
};
use crate::motion::{random_walk_policy, step_ideal, step_noisy, Control, MotionNoise};
use crate::netsim::{exchange, MessageBundle, TimeVaryingNetwork};
use crate::optimizer::{
    ball_constraint_value, build_problem, dual_update, select_best, solve_lm,
    vertex_covariance, ConstraintSet, OdometryInput, OptimizedGraph,
};
use crate::radio::{rssi_from_distance, RangeMeasurement};
use crate::relgraph::{build_rpmg, form_erpmg, observability_check};

/// Added to every predicted covariance diagonal so information matrices stay
/// invertible under zero motion noise.
const COVARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
enum Stream {
    Spawn = 1,
    Policy = 2,
    Motion = 3,
    Radio = 4,
    Hypotheses = 5,
}

/// Independent generator for one (trial, purpose, robot) triple.
fn stream_rng(seed: u64, trial: usize, stream: Stream, robot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(((stream as u64) << 32) | robot as u64);
    rng
}

/// Everything outside the estimators: true poses, commanded controls, received
/// signals and the link schedule of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// `truth[t][robot]`, `t = 0..=iterations`.
    pub truth: Vec<Vec<Pose2D>>,
    /// `controls[t][robot]`, applied between `t` and `t + 1`.
    pub controls: Vec<Vec<Control>>,
    /// `received[t][robot]`: signals that robot heard at time `t`.
    pub received: Vec<Vec<Vec<RangeMeasurement>>>,
    pub network: TimeVaryingNetwork,
}

fn spawn(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Pose2D>> {
    let b = cfg.bounds();
    let mut poses: Vec<Pose2D> = Vec::with_capacity(cfg.n_robots);
    let mut attempts = 0usize;
    while poses.len() < cfg.n_robots {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::Config(format!(
                "could not place {} robots {} m apart",
                cfg.n_robots, cfg.min_separation
            )));
        }
        let p = Pose2D::new(
            rng.random_range(b.min_x..=b.max_x),
            rng.random_range(b.min_y..=b.max_y),
            rng.random_range(-PI..PI),
        );
        if poses.iter().all(|q| q.distance_to(&p) >= cfg.min_separation) {
            poses.push(p);
        }
    }
    Ok(poses)
}

pub fn simulate_world(cfg: &ScenarioConfig, trial: usize) -> Result<World> {
    cfg.validate()?;
    let n = cfg.n_robots;
    let bounds = cfg.bounds();
    let policy = cfg.walk_policy();
    let noise = cfg.motion_noise();
    let mut spawn_rng = stream_rng(cfg.seed, trial, Stream::Spawn, 0);
    let mut policy_rngs: Vec<_> = (0..n).map(|r| stream_rng(cfg.seed, trial, Stream::Policy, r)).collect();
    let mut motion_rngs: Vec<_> = (0..n).map(|r| stream_rng(cfg.seed, trial, Stream::Motion, r)).collect();
    let mut radio_rngs: Vec<_> = (0..n).map(|r| stream_rng(cfg.seed, trial, Stream::Radio, r)).collect();

    let mut truth = vec![spawn(cfg, &mut spawn_rng)?];
    let mut controls = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let now = truth.last().expect("truth starts non-empty");
        let mut u_t = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for r in 0..n {
            let u = random_walk_policy(&policy, &now[r], &bounds, &mut policy_rngs[r]);
            next.push(bounds.clamp(&step_noisy(&now[r], &u, cfg.dt, &noise, &mut motion_rngs[r])?));
            u_t.push(u);
        }
        controls.push(u_t);
        truth.push(next);
    }

    let network = TimeVaryingNetwork::from_positions(&truth, cfg.comm_radius)?;
    let mut received = Vec::with_capacity(truth.len());
    for (t, poses) in truth.iter().enumerate() {
        let slice = network.slice(t)?;
        let mut heard = vec![Vec::new(); n];
        for to in 0..n {
            for from in 0..n {
                if from == to || !slice.linked(from, to) {
                    continue;
                }
                let d = poses[from].distance_to(&poses[to]).max(1e-3);
                let rssi = rssi_from_distance(d, &cfg.path_loss, &mut radio_rngs[to])?;
                heard[to].push(RangeMeasurement::from_rssi(from, to, rssi, &cfg.path_loss, t)?);
            }
        }
        received.push(heard);
    }
    Ok(World {
        truth,
        controls,
        received,
        network,
    })
}

/// Outcome of one trial. Trajectories are indexed `[robot][t]` in the world
/// frame of the simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trial: usize,
    pub truth: Vec<Vec<Pose2D>>,
    pub estimate: Vec<Vec<Pose2D>>,
    /// Wall time of every `solve_lm` call, ms.
    pub solve_times_ms: Vec<f64>,
    /// `observable[t][robot]` for the update from `t` to `t + 1`; empty for
    /// estimators that never check.
    pub observable: Vec<Vec<bool>>,
    pub rmse_per_robot: Vec<f64>,
    pub rmse: f64,
    /// RMSE of estimated inter-robot displacements against the true ones.
    pub relative_rmse: f64,
    /// Whether every solve produced a strictly decreasing chi-square trace.
    pub chi2_monotone: bool,
}

impl SimResult {
    /// Pose of robot 0 at `t = 0`, the frame used for exported trajectories.
    pub fn reference_frame(&self) -> Pose2D {
        self.truth[0][0]
    }

    /// Copy with wall-clock measurements cleared, for reproducibility checks.
    pub fn without_timing(&self) -> SimResult {
        let mut r = self.clone();
        r.solve_times_ms.iter_mut().for_each(|t| *t = 0.0);
        r
    }
}

/// Root mean square of per-step position error; heading is ignored.
pub fn rmse(est: &[Pose2D], truth: &[Pose2D]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(invalid(format!("trajectory lengths differ: {} vs {}", est.len(), truth.len())));
    }
    if est.is_empty() {
        return Err(invalid("trajectories are empty"));
    }
    let sq: f64 = est.iter().zip(truth).map(|(e, t)| (e.x - t.x).powi(2) + (e.y - t.y).powi(2)).sum();
    Ok((sq / est.len() as f64).sqrt())
}

fn transpose<T: Copy>(by_t: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = by_t.first().map_or(0, Vec::len);
    (0..n).map(|r| by_t.iter().map(|row| row[r]).collect()).collect()
}

fn relative_rmse(est: &[Vec<Pose2D>], truth: &[Vec<Pose2D>]) -> f64 {
    let mut sq = 0.0;
    let mut count = 0usize;
    for (e, t) in est.iter().zip(truth) {
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                let (ex, ey) = (e[j].x - e[i].x, e[j].y - e[i].y);
                let (tx, ty) = (t[j].x - t[i].x, t[j].y - t[i].y);
                sq += (ex - tx).powi(2) + (ey - ty).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        (sq / count as f64).sqrt()
    }
}

fn finish(
    trial: usize,
    world: &World,
    est_by_t: Vec<Vec<Pose2D>>,
    solve_times_ms: Vec<f64>,
    observable: Vec<Vec<bool>>,
    chi2_monotone: bool,
) -> Result<SimResult> {
    let rmse_per_robot = transpose(&est_by_t)
        .iter()
        .zip(transpose(&world.truth).iter())
        .map(|(e, t)| rmse(e, t))
        .collect::<Result<Vec<_>>>()?;
    let rmse = (rmse_per_robot.iter().map(|r| r * r).sum::<f64>() / rmse_per_robot.len() as f64).sqrt();
    Ok(SimResult {
        trial,
        relative_rmse: relative_rmse(&est_by_t, &world.truth),
        truth: transpose(&world.truth),
        estimate: transpose(&est_by_t),
        solve_times_ms,
        observable,
        rmse_per_robot,
        rmse,
        chi2_monotone,
    })
}

/// Motion Jacobian of [`step_ideal`] with respect to the pose.
fn motion_jacobian(state: &Pose2D, u: &Control, dt: f64) -> Matrix3<f64> {
    let (s, c) = state.phi.sin_cos();
    let step = u.v * dt;
    Matrix3::new(1.0, 0.0, -step * s, 0.0, 1.0, step * c, 0.0, 0.0, 1.0)
}

fn initial_covariance(cfg: &ScenarioConfig) -> Matrix3<f64> {
    let [sx, sy, sp] = cfg.estimator.initial_sigma;
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        sx * sx + COVARIANCE_FLOOR,
        sy * sy + COVARIANCE_FLOOR,
        sp.to_radians().powi(2) + COVARIANCE_FLOOR,
    ))
}

/// Estimator state a robot publishes each iteration.
#[derive(Debug, Clone, Copy)]
struct Belief {
    pose: Pose2D,
    covariance: Matrix3<f64>,
}

/// Per-iteration byproducts of one robot's update.
struct Update {
    belief: Belief,
    observable: bool,
    solve_times_ms: Vec<f64>,
    chi2_monotone: bool,
}

fn predict(b: &Belief, u: &Control, cfg: &ScenarioConfig, q: &Matrix3<f64>) -> Result<Belief> {
    let f = motion_jacobian(&b.pose, u, cfg.dt);
    let cov = f * b.covariance * f.transpose() + q + Matrix3::identity() * COVARIANCE_FLOOR;
    Ok(Belief {
        pose: step_ideal(&b.pose, u, cfg.dt)?,
        covariance: 0.5 * (cov + cov.transpose()),
    })
}

fn strictly_decreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] < w[0])
}

/// One robot's update from its inbox: predict every sender, check
/// observability of the local range graph, optimize the candidate graphs and
/// keep its own optimized pose.
fn local_update(
    cfg: &ScenarioConfig,
    me: usize,
    inbox: &[(usize, MessageBundle)],
    q: &Matrix3<f64>,
    lambda_dual: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Result<Update> {
    let members: Vec<usize> = inbox.iter().map(|(s, _)| *s).collect();
    let local_of: BTreeMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let me_local = local_of[&me];
    let m = members.len();

    let mut previous = Vec::with_capacity(m);
    let mut priors = Vec::with_capacity(m);
    let mut controls = Vec::with_capacity(m);
    for (s, b) in inbox {
        let scale = if *s == me { 1.0 } else { cfg.estimator.peer_covariance_scale };
        let belief = Belief {
            pose: b.pose,
            covariance: b.covariance_matrix() * scale,
        };
        priors.push(predict(&belief, &b.control, cfg, q)?);
        previous.push(belief);
        controls.push(b.control);
    }
    let fallback = Update {
        belief: priors[me_local],
        observable: false,
        solve_times_ms: Vec::new(),
        chi2_monotone: true,
    };

    // Log-normal shadowing makes RSSI ranges biased high by exp(s²/2).
    let bias = if cfg.estimator.range_bias_correction {
        (-0.5 * cfg.path_loss.relative_range_sigma().powi(2)).exp()
    } else {
        1.0
    };
    let mut measured: Vec<RangeMeasurement> = Vec::new();
    for (_, b) in inbox {
        for r in &b.rssi {
            if let (Some(&f), Some(&t)) = (local_of.get(&r.from_id), local_of.get(&r.to_id)) {
                measured.push(RangeMeasurement {
                    from_id: f,
                    to_id: t,
                    distance_m: r.distance_m * bias,
                    ..*r
                });
            }
        }
    }
    let prior_poses: Vec<Pose2D> = priors.iter().map(|p| p.pose).collect();
    let rpmg = build_rpmg(&measured, m, cfg.estimator.rpmg_radius.unwrap_or(f64::INFINITY))?;
    let erpmg = form_erpmg(&rpmg, &controls, &prior_poses)?;
    if !observability_check(&erpmg, cfg.state_dim)?.observable {
        return Ok(fallback);
    }

    let peers: BTreeMap<usize, Pose2D> = prior_poses.iter().copied().enumerate().collect();
    let mut hyps = Vec::with_capacity(m);
    for l in 0..m {
        let d = priors[l].covariance.diagonal();
        let spread = MotionNoise {
            sigma_x: d[0].sqrt(),
            sigma_y: d[1].sqrt(),
            sigma_phi: d[2].sqrt(),
        };
        let parent = HypothesisSet::uniform(l, previous[l].pose, 1)?;
        let mut cands = vec![Candidate {
            pose: priors[l].pose,
            log_weight: 0.0,
        }];
        cands.extend(propagate_candidates(
            &parent,
            &controls[l],
            cfg.dt,
            &spread,
            cfg.k * cfg.estimator.samples_per_candidate,
            rng,
        )?);
        for c in &mut cands {
            c.log_weight += range_log_likelihood(l, &c.pose, &peers, &measured, cfg.estimator.sigma_r)?;
        }
        hyps.push(ensure_k(select_top_k(l, &cands, cfg.k)?, cfg.k, &spread, rng)?);
    }

    let odometry: Vec<OdometryInput> = (0..m)
        .map(|l| OdometryInput {
            origin: previous[l].pose,
            motion: controls[l].increment(cfg.dt),
            covariance: priors[l].covariance,
        })
        .collect();
    let constraint = ConstraintSet {
        ball_radius: (m as f64).sqrt() * cfg.estimator.ball_radius_scale * cfg.bounds().diagonal(),
        gamma: cfg.estimator.gamma,
        lambda_dual: *lambda_dual,
    };
    let noise_model = cfg.range_noise();
    let mut problems = Vec::new();
    let mut solved: Vec<OptimizedGraph> = Vec::new();
    let mut times = Vec::new();
    let mut monotone = true;
    for cg in enumerate_candidate_graphs(&hyps, &erpmg, cfg.cap)? {
        let mut problem = build_problem(&cg, &odometry, None, &noise_model)?;
        problem.constraint = Some(constraint);
        // Weighting by the measured range would favour short draws.
        for f in &mut problem.range_factors {
            f.information = noise_model.information(prior_poses[f.i].distance_to(&prior_poses[f.j]));
        }
        let start = Instant::now();
        let mut g = solve_lm(&problem, &cfg.lm)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        g.joint_log_weight = cg.joint_log_weight;
        monotone &= strictly_decreasing(&g.chi2_trace);
        problems.push(problem);
        solved.push(g);
    }
    let best = select_best(&solved)?;
    let g = &solved[best];
    let pose = g.vertices[me_local];
    if !pose.is_valid() {
        return Ok(fallback);
    }
    let covariance = vertex_covariance(&problems[best], &g.vertices, me_local)
        .filter(|c| c.iter().all(|v| v.is_finite()))
        .unwrap_or(priors[me_local].covariance);
    *lambda_dual = dual_update(
        ball_constraint_value(&problems[best], &g.vertices, constraint.ball_radius),
        constraint.gamma,
    );
    Ok(Update {
        belief: Belief { pose, covariance },
        observable: true,
        solve_times_ms: times,
        chi2_monotone: monotone,
    })
}

fn dgorl_trial(cfg: &ScenarioConfig, trial: usize, world: &World) -> Result<SimResult> {
    let n = cfg.n_robots;
    let noise = cfg.motion_noise();
    let v = noise.variances();
    let q = Matrix3::from_diagonal(&nalgebra::Vector3::new(v[0], v[1], v[2]));
    let p0 = initial_covariance(cfg);
    let mut hyp_rngs: Vec<_> = (0..n).map(|r| stream_rng(cfg.seed, trial, Stream::Hypotheses, r)).collect();

    let mut beliefs: Vec<Belief> = world.truth[0]
        .iter()
        .map(|&pose| Belief { pose, covariance: p0 })
        .collect();
    let mut lambda_dual = vec![0.0; n];
    let mut est_by_t = vec![beliefs.iter().map(|b| b.pose).collect::<Vec<_>>()];
    let mut observable = Vec::with_capacity(cfg.iterations);
    let mut solve_times = Vec::new();
    let mut monotone = true;

    for t in 0..cfg.iterations {
        let outboxes: Vec<MessageBundle> = (0..n)
            .map(|r| {
                let mut b = MessageBundle {
                    sender: r,
                    pose: beliefs[r].pose,
                    covariance: [[0.0; 3]; 3],
                    control: world.controls[t][r],
                    rssi: world.received[t + 1][r].clone(),
                    timestamp: t + 1,
                };
                b.set_covariance(&beliefs[r].covariance);
                b
            })
            .collect();
        let inboxes = exchange(&world.network, t + 1, &outboxes)?;
        let mut next = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for (r, inbox) in inboxes.iter().enumerate() {
            let u = local_update(cfg, r, inbox, &q, &mut lambda_dual[r], &mut hyp_rngs[r])?;
            flags.push(u.observable);
            solve_times.extend(u.solve_times_ms);
            monotone &= u.chi2_monotone;
            next.push(u.belief);
        }
        beliefs = next;
        est_by_t.push(beliefs.iter().map(|b| b.pose).collect());
        observable.push(flags);
    }
    finish(trial, world, est_by_t, solve_times, observable, monotone)
}

fn dead_reckoning_trial(cfg: &ScenarioConfig, trial: usize, world: &World) -> Result<SimResult> {
    let mut est_by_t = vec![world.truth[0].clone()];
    for u_t in &world.controls {
        let last = est_by_t.last().expect("starts non-empty");
        let next = last
            .iter()
            .zip(u_t)
            .map(|(p, u)| step_ideal(p, u, cfg.dt))
            .collect::<Result<Vec<_>>>()?;
        est_by_t.push(next);
    }
    finish(trial, world, est_by_t, Vec::new(), Vec::new(), true)
}

/// Runs one trial of the full localization loop.
pub fn run_trial(cfg: &ScenarioConfig, trial: usize) -> Result<SimResult> {
    let world = simulate_world(cfg, trial)?;
    dgorl_trial(cfg, trial, &world)
}

/// All trials of the localization loop. The configuration is validated
/// before any trial starts.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<SimResult>> {
    cfg.validate()?;
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

/// Odometry-only estimates over exactly the worlds `run_scenario` simulates.
pub fn dead_reckoning_baseline(cfg: &ScenarioConfig) -> Result<Vec<SimResult>> {
    cfg.validate()?;
    (0..cfg.trials)
        .map(|t| dead_reckoning_trial(cfg, t, &simulate_world(cfg, t)?))
        .collect()
}

/// Simulated worlds with both estimators' results, trial by trial.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub worlds: Vec<World>,
    pub results: Vec<SimResult>,
    pub baseline: Vec<SimResult>,
}

/// Both estimators on each simulated world, sharing the simulation work.
pub fn run_with_baseline(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let mut run = ScenarioRun {
        worlds: Vec::with_capacity(cfg.trials),
        results: Vec::with_capacity(cfg.trials),
        baseline: Vec::with_capacity(cfg.trials),
    };
    for t in 0..cfg.trials {
        let world = simulate_world(cfg, t)?;
        run.results.push(dgorl_trial(cfg, t, &world)?);
        run.baseline.push(dead_reckoning_trial(cfg, t, &world)?);
        run.worlds.push(world);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    /// Mean RMSE divided by the workspace diagonal, when known.
    pub rmse_over_diagonal: Option<f64>,
    pub relative_rmse_mean: f64,
    pub solves: usize,
    pub solve_ms_mean: f64,
    pub solve_ms_std: f64,
    pub solve_ms_median: f64,
    pub observability_failure_rate: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// Across-trial statistics; standard deviations are population values.
pub fn summarize(results: &[SimResult], diagonal: Option<f64>) -> Summary {
    let rmses: Vec<f64> = results.iter().map(|r| r.rmse).collect();
    let (rmse_mean, rmse_std) = mean_std(&rmses);
    let rel: Vec<f64> = results.iter().map(|r| r.relative_rmse).collect();
    let times: Vec<f64> = results.iter().flat_map(|r| r.solve_times_ms.iter().copied()).collect();
    let (solve_ms_mean, solve_ms_std) = mean_std(&times);
    let flags: Vec<bool> = results.iter().flat_map(|r| r.observable.iter().flatten().copied()).collect();
    let failures = flags.iter().filter(|f| !**f).count();
    Summary {
        trials: results.len(),
        rmse_mean,
        rmse_std,
        rmse_over_diagonal: diagonal.filter(|d| *d > 0.0).map(|d| rmse_mean / d),
        relative_rmse_mean: mean_std(&rel).0,
        solves: times.len(),
        solve_ms_mean,
        solve_ms_std,
        solve_ms_median: median(&times),
        observability_failure_rate: if flags.is_empty() {
            0.0
        } else {
            failures as f64 / flags.len() as f64
        },
    }
}

impl Summary {
    pub fn to_table(&self, label: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!("{label}\n"));
        s.push_str(&format!("  trials                     {}\n", self.trials));
        s.push_str(&format!("  RMSE (m)                   {:.3} ± {:.3}\n", self.rmse_mean, self.rmse_std));
        if let Some(r) = self.rmse_over_diagonal {
            s.push_str(&format!("  RMSE / diagonal            {:.2}%\n", 100.0 * r));
        }
        s.push_str(&format!("  relative RMSE (m)          {:.3}\n", self.relative_rmse_mean));
        s.push_str(&format!("  solves                     {}\n", self.solves));
        s.push_str(&format!(
            "  solve time (ms)            {:.3} ± {:.3} (median {:.3})\n",
            self.solve_ms_mean, self.solve_ms_std, self.solve_ms_median
        ));
        s.push_str(&format!(
            "  observability failures     {:.2}%\n",
            100.0 * self.observability_failure_rate
        ));
        s
    }
}
