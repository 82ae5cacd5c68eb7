//! Normalized planar wrenches and twists.
//!
//! Torques are divided by a characteristic length `rho` and angular rates are
//! multiplied by it, so all three components of a load or a twist share the
//! same unit and the dot product of the two is the dissipated power.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Net friction load `(F_x, F_y, tau / rho)` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedLoad(pub Vector3<f64>);

/// Body twist `(V_x, V_y, omega * rho)` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedVelocity(pub Vector3<f64>);

impl GeneralizedLoad {
    pub fn new(fx: f64, fy: f64, fz: f64) -> Self {
        Self(Vector3::new(fx, fy, fz))
    }

    pub fn fx(&self) -> f64 {
        self.0.x
    }

    pub fn fy(&self) -> f64 {
        self.0.y
    }

    pub fn fz(&self) -> f64 {
        self.0.z
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl GeneralizedVelocity {
    pub fn new(vx: f64, vy: f64, vz: f64) -> Self {
        Self(Vector3::new(vx, vy, vz))
    }

    pub fn vx(&self) -> f64 {
        self.0.x
    }

    pub fn vy(&self) -> f64 {
        self.0.y
    }

    pub fn vz(&self) -> f64 {
        self.0.z
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Unit vector along the twist. Fails for the zero twist.
    pub fn unit(&self) -> Result<Self> {
        let n = self.0.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroTwist);
        }
        Ok(Self(self.0 / n))
    }
}

impl From<Vector3<f64>> for GeneralizedLoad {
    fn from(v: Vector3<f64>) -> Self {
        Self(v)
    }
}

impl From<Vector3<f64>> for GeneralizedVelocity {
    fn from(v: Vector3<f64>) -> Self {
        Self(v)
    }
}

/// Maps a physical wrench to the normalized load space.
pub fn embed_wrench(fx: f64, fy: f64, tau: f64, rho: f64) -> Result<GeneralizedLoad> {
    check_rho(rho)?;
    Ok(GeneralizedLoad::new(fx, fy, tau / rho))
}

/// Maps a physical twist to the normalized velocity space.
pub fn embed_twist(vx: f64, vy: f64, omega: f64, rho: f64) -> Result<GeneralizedVelocity> {
    check_rho(rho)?;
    Ok(GeneralizedVelocity::new(vx, vy, omega * rho))
}

/// Dissipated power `F . V`.
pub fn power(load: &GeneralizedLoad, twist: &GeneralizedVelocity) -> f64 {
    load.0.dot(&twist.0)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "characteristic length must be positive, got {rho}"
        )))
    }
}

/// Rigid-body parameters of a sliding object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub mass: f64,
    pub inertia_z: f64,
    pub rho: f64,
    pub mu_support: f64,
    pub gravity: f64,
}

impl BodyParams {
    /// Uses the radius of gyration `sqrt(inertia_z / mass)` as `rho`.
    pub fn new(mass: f64, inertia_z: f64, mu_support: f64, gravity: f64) -> Result<Self> {
        if !(mass > 0.0 && inertia_z > 0.0) {
            return Err(invalid("mass and inertia must be positive"));
        }
        Self::with_rho(
            mass,
            inertia_z,
            (inertia_z / mass).sqrt(),
            mu_support,
            gravity,
        )
    }

    pub fn with_rho(
        mass: f64,
        inertia_z: f64,
        rho: f64,
        mu_support: f64,
        gravity: f64,
    ) -> Result<Self> {
        let ok = mass > 0.0 && inertia_z > 0.0 && rho > 0.0 && mu_support >= 0.0 && gravity > 0.0;
        if !ok
            || ![mass, inertia_z, rho, mu_support, gravity]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(invalid(format!(
                "body parameters out of range: mass={mass}, inertia={inertia_z}, rho={rho}, mu={mu_support}, g={gravity}"
            )));
        }
        Ok(Self {
            mass,
            inertia_z,
            rho,
            mu_support,
            gravity,
        })
    }

    pub fn radius_of_gyration(&self) -> f64 {
        (self.inertia_z / self.mass).sqrt()
    }
}

/// World-frame planar pose. `theta` is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseSE2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PoseSE2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    /// Maps a body-frame vector to the world frame.
    pub fn rotate(&self, v: Vector2<f64>) -> Vector2<f64> {
        self.rotation() * v
    }
}
