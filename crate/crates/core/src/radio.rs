//! Log-distance path-loss model used to turn received signal strength into
//! inter-robot ranges, and to synthesize RSSI in simulation.

use std::f64::consts::LN_10;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type RobotId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    /// Received power at the 1 m reference distance, dBm.
    #[serde(default = "default_ref_rssi")]
    pub ref_rssi_dbm: f64,
    /// Propagation exponent, 2 (free space) to 6 (cluttered indoor).
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// Standard deviation of log-normal shadowing, dB.
    #[serde(default = "default_shadowing")]
    pub shadowing_sigma_db: f64,
}

fn default_ref_rssi() -> f64 {
    -40.0
}
fn default_exponent() -> f64 {
    2.0
}
fn default_shadowing() -> f64 {
    2.0
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            ref_rssi_dbm: default_ref_rssi(),
            exponent: default_exponent(),
            shadowing_sigma_db: default_shadowing(),
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !self.ref_rssi_dbm.is_finite() {
            return Err(invalid("reference RSSI must be finite"));
        }
        if !(2.0..=6.0).contains(&self.exponent) {
            return Err(invalid(format!(
                "path-loss exponent must lie in [2, 6], got {}",
                self.exponent
            )));
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err(invalid("shadowing sigma must be finite and non-negative"));
        }
        Ok(())
    }

    /// Relative standard deviation of a single range derived from RSSI.
    ///
    /// Shadowing of σ dB multiplies the range by `10^(ε/10n)`, i.e. the log of
    /// the range has standard deviation `σ·ln10 / 10n`.
    pub fn relative_range_sigma(&self) -> f64 {
        self.shadowing_sigma_db * LN_10 / (10.0 * self.exponent)
    }
}

/// One directed received-signal observation: `to_id` heard `from_id`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub from_id: RobotId,
    pub to_id: RobotId,
    pub rssi_dbm: f64,
    pub distance_m: f64,
    pub timestamp: usize,
}

impl RangeMeasurement {
    pub fn from_rssi(
        from_id: RobotId,
        to_id: RobotId,
        rssi_dbm: f64,
        params: &PathLossParams,
        timestamp: usize,
    ) -> Result<Self> {
        if from_id == to_id {
            return Err(invalid(format!("self measurement on robot {from_id}")));
        }
        let distance_m = distance_from_rssi(rssi_dbm, params)?;
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(invalid(format!("RSSI {rssi_dbm} dBm maps to unusable range {distance_m}")));
        }
        Ok(Self {
            from_id,
            to_id,
            rssi_dbm,
            distance_m,
            timestamp,
        })
    }

    /// The endpoint that is not `id`, if `id` is one of the two.
    pub fn peer_of(&self, id: RobotId) -> Option<RobotId> {
        if self.from_id == id {
            Some(self.to_id)
        } else if self.to_id == id {
            Some(self.from_id)
        } else {
            None
        }
    }
}

/// Synthesizes a received signal strength for a link of length `d`.
///
/// One normal draw is consumed even when shadowing is zero so that random
/// streams stay aligned across noise settings.
pub fn rssi_from_distance<R: Rng + ?Sized>(d: f64, params: &PathLossParams, rng: &mut R) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("distance must be positive and finite, got {d}")));
    }
    let shadow = Normal::new(0.0, params.shadowing_sigma_db)
        .map_err(|e| invalid(format!("shadowing sigma: {e}")))?
        .sample(rng);
    Ok(params.ref_rssi_dbm - 10.0 * params.exponent * d.log10() + shadow)
}

/// Inverts the path-loss model: `d = 10^((A − rssi) / 10n)`.
pub fn distance_from_rssi(rssi_dbm: f64, params: &PathLossParams) -> Result<f64> {
    if !rssi_dbm.is_finite() {
        return Err(invalid(format!("RSSI must be finite, got {rssi_dbm}")));
    }
    Ok(10f64.powf((params.ref_rssi_dbm - rssi_dbm) / (10.0 * params.exponent)))
}
