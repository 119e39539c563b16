//! On-disk artifacts of a run: per-trial trajectory CSVs, network traces and
//! a metrics summary.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{summarize, ScenarioConfig, SimResult, World};
use crate::error::{Error, Result};
use crate::geometry::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `trajectory[robot][t]` re-expressed in `frame`, ordered by `t`
/// then robot.
pub fn write_trajectory_csv<W: Write>(w: W, trajectory: &[Vec<Pose2D>], frame: &Pose2D) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let steps = trajectory.first().map_or(0, Vec::len);
    for t in 0..steps {
        for (robot, traj) in trajectory.iter().enumerate() {
            let p = frame.between(&traj[t]);
            // `+ 0.0` turns a negative zero into a positive one.
            out.serialize(TrajectoryRow {
                t,
                robot,
                x: p.x + 0.0,
                y: p.y + 0.0,
                phi: p.phi + 0.0,
            })
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<TrajectoryRow>, _>>()
        .map_err(csv_err)
}

#[derive(Serialize)]
struct Metrics<'a> {
    config: &'a ScenarioConfig,
    summary: super::Summary,
    baseline: Option<super::Summary>,
    trials: Vec<TrialMetrics>,
}

#[derive(Serialize)]
struct TrialMetrics {
    trial: usize,
    rmse: f64,
    rmse_per_robot: Vec<f64>,
    relative_rmse: f64,
    baseline_rmse: Option<f64>,
    solves: usize,
}

/// Writes `truth_<trial>.csv`, `est_<trial>.csv`, `graphs_<trial>.jsonl` and
/// `metrics.json` into `dir`. Trajectories are expressed in the frame of
/// robot 0's true initial pose.
pub fn write_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    results: &[SimResult],
    worlds: &[World],
    baseline: Option<&[SimResult]>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (r, w) in results.iter().zip(worlds) {
        let frame = r.reference_frame();
        write_trajectory_csv(BufWriter::new(File::create(dir.join(format!("truth_{}.csv", r.trial)))?), &r.truth, &frame)?;
        write_trajectory_csv(BufWriter::new(File::create(dir.join(format!("est_{}.csv", r.trial)))?), &r.estimate, &frame)?;
        w.network
            .write_jsonl(BufWriter::new(File::create(dir.join(format!("graphs_{}.jsonl", r.trial)))?))?;
    }
    let diagonal = Some(cfg.bounds().diagonal());
    let metrics = Metrics {
        config: cfg,
        summary: summarize(results, diagonal),
        baseline: baseline.map(|b| summarize(b, diagonal)),
        trials: results
            .iter()
            .enumerate()
            .map(|(k, r)| TrialMetrics {
                trial: r.trial,
                rmse: r.rmse,
                rmse_per_robot: r.rmse_per_robot.clone(),
                relative_rmse: r.relative_rmse,
                baseline_rmse: baseline.and_then(|b| b.get(k)).map(|b| b.rmse),
                solves: r.solve_times_ms.len(),
            })
            .collect(),
    };
    let mut f = BufWriter::new(File::create(dir.join("metrics.json"))?);
    serde_json::to_writer_pretty(&mut f, &metrics)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
