//! Scenario file schema. TOML, versioned by `schema_version`; angles are in
//! degrees here and radians everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionNoise, RandomWalkPolicy, Rect};
use crate::optimizer::{LMConfig, RangeNoiseModel};
use crate::radio::PathLossParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionNoiseConfig {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_phi_deg: f64,
}

impl Default for MotionNoiseConfig {
    fn default() -> Self {
        Self {
            sigma_x: 0.1,
            sigma_y: 0.1,
            sigma_phi_deg: 0.5,
        }
    }
}

impl From<MotionNoiseConfig> for MotionNoise {
    fn from(c: MotionNoiseConfig) -> Self {
        MotionNoise {
            sigma_x: c.sigma_x,
            sigma_y: c.sigma_y,
            sigma_phi: c.sigma_phi_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max_deg: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let p = RandomWalkPolicy::default();
        Self {
            v_min: p.v_min,
            v_max: p.v_max,
            omega_max_deg: p.omega_max.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Floor of the range standard deviation, m.
    pub sigma_r: f64,
    /// Add the path-loss model's relative range spread to `sigma_r`.
    pub range_sigma_from_path_loss: bool,
    pub samples_per_candidate: usize,
    /// Ball radius per robot as a multiple of the workspace diagonal.
    pub ball_radius_scale: f64,
    pub gamma: f64,
    /// Standard deviation of each robot's initial pose knowledge (m, m, deg).
    pub initial_sigma: [f64; 3],
    /// Multiplier on the covariance of every peer's published pose.
    pub peer_covariance_scale: f64,
    /// Divide RSSI ranges by the mean of the log-normal shadowing factor.
    pub range_bias_correction: bool,
    /// Range cutoff for the estimator's measurement graph; unset keeps every
    /// received range.
    pub rpmg_radius: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sigma_r: 1.0,
            range_sigma_from_path_loss: true,
            samples_per_candidate: 8,
            ball_radius_scale: 1.5,
            gamma: 1.0,
            initial_sigma: [0.01, 0.01, 0.1],
            peer_covariance_scale: 1.0,
            range_bias_correction: true,
            rpmg_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub n_robots: usize,
    pub area: Area,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub cap: usize,
    pub dt: f64,
    pub comm_radius: f64,
    /// Minimum pairwise distance between spawn positions, m.
    pub min_separation: f64,
    pub state_dim: usize,
    /// Number of consecutive iterations whose union must be connected.
    pub connectivity_period: usize,
    pub path_loss: PathLossParams,
    pub motion_noise: MotionNoiseConfig,
    pub policy: PolicyConfig,
    pub lm: LMConfig,
    pub estimator: EstimatorConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_robots: 5,
            area: Area {
                width: 60.0,
                height: 60.0,
            },
            iterations: 100,
            trials: 10,
            seed: 1,
            k: 3,
            cap: 32,
            dt: 1.0,
            comm_radius: 40.0,
            min_separation: 5.0,
            state_dim: 3,
            connectivity_period: 1,
            path_loss: PathLossParams::default(),
            motion_noise: MotionNoiseConfig::default(),
            policy: PolicyConfig::default(),
            lm: LMConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(config_err(msg)) };
        check(
            self.schema_version == SCHEMA_VERSION,
            &format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
        )?;
        check(self.n_robots >= 2, "n_robots must be at least 2")?;
        check(
            self.area.width > 0.0 && self.area.height > 0.0 && self.area.width.is_finite() && self.area.height.is_finite(),
            "area dimensions must be positive",
        )?;
        check(self.iterations >= 1, "iterations must be at least 1")?;
        check(self.trials >= 1, "trials must be at least 1")?;
        check(self.k >= 1, "k must be at least 1")?;
        check(self.cap >= 1, "cap must be at least 1")?;
        check(self.dt > 0.0 && self.dt.is_finite(), "dt must be positive")?;
        check(self.comm_radius > 0.0, "comm_radius must be positive")?;
        check(self.min_separation >= 0.0 && self.min_separation.is_finite(), "min_separation must be >= 0")?;
        check(self.state_dim >= 1, "state_dim must be at least 1")?;
        check(self.connectivity_period >= 1, "connectivity_period must be at least 1")?;
        let e = &self.estimator;
        check(e.sigma_r > 0.0 && e.sigma_r.is_finite(), "estimator.sigma_r must be positive")?;
        check(e.samples_per_candidate >= 1, "estimator.samples_per_candidate must be at least 1")?;
        check(e.ball_radius_scale > 0.0, "estimator.ball_radius_scale must be positive")?;
        check(e.gamma > 0.0, "estimator.gamma must be positive")?;
        check(e.peer_covariance_scale > 0.0, "estimator.peer_covariance_scale must be positive")?;
        check(e.rpmg_radius.is_none_or(|r| r > 0.0), "estimator.rpmg_radius must be positive")?;
        check(
            e.initial_sigma.iter().all(|s| *s >= 0.0 && s.is_finite()),
            "estimator.initial_sigma entries must be >= 0",
        )?;
        // Spawn feasibility: a square grid at the separation must fit.
        let per_side = (self.n_robots as f64).sqrt().ceil();
        check(
            self.min_separation * (per_side - 1.0) <= self.area.width.min(self.area.height),
            "min_separation too large for n_robots in this area",
        )?;
        let wrap = |r: Result<()>| r.map_err(|e| config_err(e.to_string()));
        wrap(self.path_loss.validate())?;
        wrap(self.motion_noise().validate())?;
        wrap(self.walk_policy().validate())?;
        wrap(self.lm.validate())?;
        Ok(())
    }

    pub fn bounds(&self) -> Rect {
        Rect::from_size(self.area.width, self.area.height)
    }

    pub fn motion_noise(&self) -> MotionNoise {
        self.motion_noise.into()
    }

    pub fn walk_policy(&self) -> RandomWalkPolicy {
        RandomWalkPolicy {
            v_min: self.policy.v_min,
            v_max: self.policy.v_max,
            omega_max: self.policy.omega_max_deg.to_radians(),
            dt: self.dt,
        }
    }

    /// Range noise assumed by the estimator.
    pub fn range_noise(&self) -> RangeNoiseModel {
        let relative = if self.estimator.range_sigma_from_path_loss {
            // Both directions of a link are averaged before use.
            self.path_loss.relative_range_sigma() / std::f64::consts::SQRT_2
        } else {
            0.0
        };
        RangeNoiseModel {
            sigma_floor: self.estimator.sigma_r,
            relative,
        }
    }
}
