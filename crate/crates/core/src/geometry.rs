//! Planar rigid-body poses.
//!
//! Headings are always kept in the half-open interval (−π, π].

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Wraps an angle into (−π, π].
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(invalid(format!("angle must be finite, got {theta}")));
    }
    Ok(normalize(theta))
}

/// Same as [`wrap_angle`] for inputs already known to be finite.
#[inline]
pub(crate) fn normalize(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Robot pose in the plane: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose2D {
    /// Builds a pose, wrapping the heading. Components must be finite.
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && phi.is_finite());
        Self {
            x,
            y,
            phi: normalize(phi),
        }
    }

    pub fn try_new(x: f64, y: f64, phi: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(invalid(format!("pose position must be finite, got ({x}, {y})")));
        }
        Ok(Self {
            x,
            y,
            phi: wrap_angle(phi)?,
        })
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            phi: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.phi.is_finite() && self.phi > -PI && self.phi <= PI
    }

    /// Rigid-body composition `self ⊕ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.phi.sin_cos();
        Pose2D::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.phi + other.phi,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.phi.sin_cos();
        Pose2D::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.phi)
    }

    /// Pose of `other` expressed in the frame of `self`, so that
    /// `self.compose(&self.between(other)) == other`.
    pub fn between(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.phi.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2D::new(c * dx + s * dy, -s * dx + c * dy, other.phi - self.phi)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn translation_norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

pub fn se2_compose(a: &Pose2D, b: &Pose2D) -> Pose2D {
    a.compose(b)
}

pub fn se2_between(a: &Pose2D, b: &Pose2D) -> Pose2D {
    a.between(b)
}

pub fn se2_inverse(a: &Pose2D) -> Pose2D {
    a.inverse()
}
