//! Unicycle kinematics with additive Gaussian disturbance, plus the bounded
//! random-walk driver used by the simulator.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{normalize, Pose2D};

/// Forward speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub const fn stopped() -> Self {
        Self { v: 0.0, omega: 0.0 }
    }

    /// Body-frame displacement produced by one ideal step of length `dt`.
    pub fn increment(&self, dt: f64) -> Pose2D {
        Pose2D::new(self.v * dt, 0.0, self.omega * dt)
    }
}

/// Per-step standard deviations of the additive pose disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_phi: f64,
}

impl Default for MotionNoise {
    /// 0.1 m, 0.1 m, 0.5°.
    fn default() -> Self {
        Self {
            sigma_x: 0.1,
            sigma_y: 0.1,
            sigma_phi: 0.5f64.to_radians(),
        }
    }
}

impl MotionNoise {
    pub const fn zero() -> Self {
        Self {
            sigma_x: 0.0,
            sigma_y: 0.0,
            sigma_phi: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for s in [self.sigma_x, self.sigma_y, self.sigma_phi] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(format!("motion noise sigma must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn variances(&self) -> [f64; 3] {
        [self.sigma_x.powi(2), self.sigma_y.powi(2), self.sigma_phi.powi(2)]
    }
}

pub fn step_ideal(state: &Pose2D, u: &Control, dt: f64) -> Result<Pose2D> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    let (s, c) = state.phi.sin_cos();
    Ok(Pose2D {
        x: state.x + u.v * dt * c,
        y: state.y + u.v * dt * s,
        phi: normalize(state.phi + u.omega * dt),
    })
}

/// Ideal step followed by independent normal noise on x, y and heading.
///
/// Always consumes exactly three normal draws.
pub fn step_noisy<R: Rng + ?Sized>(
    state: &Pose2D,
    u: &Control,
    dt: f64,
    noise: &MotionNoise,
    rng: &mut R,
) -> Result<Pose2D> {
    noise.validate()?;
    let ideal = step_ideal(state, u, dt)?;
    let nx = Normal::new(0.0, noise.sigma_x).map_err(|e| invalid(e.to_string()))?;
    let ny = Normal::new(0.0, noise.sigma_y).map_err(|e| invalid(e.to_string()))?;
    let np = Normal::new(0.0, noise.sigma_phi).map_err(|e| invalid(e.to_string()))?;
    let (ex, ey, ep) = (nx.sample(rng), ny.sample(rng), np.sample(rng));
    Ok(Pose2D {
        x: ideal.x + ex,
        y: ideal.y + ey,
        phi: normalize(ideal.phi + ep),
    })
}

/// Axis-aligned workspace rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn from_size(width: f64, height: f64) -> Self {
        Self {
            min_x: 0.0,
            min_y: 0.0,
            max_x: width,
            max_y: height,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn clamp(&self, p: &Pose2D) -> Pose2D {
        Pose2D {
            x: p.x.clamp(self.min_x, self.max_x),
            y: p.y.clamp(self.min_y, self.max_y),
            phi: p.phi,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    pub fn diagonal(&self) -> f64 {
        (self.max_x - self.min_x).hypot(self.max_y - self.min_y)
    }
}

/// Uniform random-walk driver that turns back toward the workspace center
/// whenever the next ideal step would leave the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkPolicy {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub dt: f64,
}

impl Default for RandomWalkPolicy {
    fn default() -> Self {
        Self {
            v_min: 0.3,
            v_max: 1.0,
            omega_max: 0.5,
            dt: 1.0,
        }
    }
}

impl RandomWalkPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max && self.v_max.is_finite()) {
            return Err(invalid("speed limits must satisfy 0 <= v_min <= v_max"));
        }
        if !(self.omega_max >= 0.0 && self.omega_max.is_finite()) {
            return Err(invalid("turn-rate limit must be finite and >= 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        Ok(())
    }

    /// Draws the next control. Always consumes exactly two uniform draws.
    pub fn sample<R: Rng + ?Sized>(&self, state: &Pose2D, bounds: &Rect, rng: &mut R) -> Control {
        let v = if self.v_max > self.v_min {
            rng.random_range(self.v_min..=self.v_max)
        } else {
            let _: f64 = rng.random();
            self.v_min
        };
        let omega = if self.omega_max > 0.0 {
            rng.random_range(-self.omega_max..=self.omega_max)
        } else {
            let _: f64 = rng.random();
            0.0
        };
        let proposal = Control::new(v, omega);
        if self.stays_inside(state, &proposal, bounds) {
            return proposal;
        }

        let (cx, cy) = bounds.center();
        let toward_center = (cy - state.y).atan2(cx - state.x);
        let turn = (normalize(toward_center - state.phi) / self.dt).clamp(-self.omega_max, self.omega_max);

        // Translation uses the current heading, so only a shorter stride keeps
        // this step inside; the turn takes effect from the next step on.
        let (s, c) = state.phi.sin_cos();
        let stride = v * self.dt;
        let fraction = [
            axis_fraction(state.x, stride * c, bounds.min_x, bounds.max_x),
            axis_fraction(state.y, stride * s, bounds.min_y, bounds.max_y),
        ]
        .into_iter()
        .fold(1.0f64, f64::min)
        .max(0.0);
        let shortened = Control::new(v * fraction, turn);
        if self.stays_inside(state, &shortened, bounds) {
            shortened
        } else {
            Control::new(0.0, turn)
        }
    }

    fn stays_inside(&self, state: &Pose2D, u: &Control, bounds: &Rect) -> bool {
        let (s, c) = state.phi.sin_cos();
        bounds.contains(state.x + u.v * self.dt * c, state.y + u.v * self.dt * s)
    }
}

/// Largest fraction of `delta` that keeps `pos + f·delta` in `[lo, hi]`.
fn axis_fraction(pos: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    if delta > 0.0 {
        (hi - pos) / delta
    } else if delta < 0.0 {
        (lo - pos) / delta
    } else {
        f64::INFINITY
    }
}

pub fn random_walk_policy<R: Rng + ?Sized>(
    policy: &RandomWalkPolicy,
    state: &Pose2D,
    bounds: &Rect,
    rng: &mut R,
) -> Control {
    policy.sample(state, bounds, rng)
}
