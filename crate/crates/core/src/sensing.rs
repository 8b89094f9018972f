//! Noisy state observation for the policy.
//!
//! Layout of the 18 values: position error (3), velocity error (3), row-major rotation (9),
//! angular-velocity error (3).

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::QuadState;
use crate::rotation::{axis_angle, flatten_row_major, random_unit_vector};
use crate::{Error, Result, OBS_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseConfig {
    /// Position noise standard deviation, m.
    pub pos_std: f64,
    /// Velocity noise standard deviation, m/s.
    pub vel_std: f64,
    /// Orientation perturbation angle standard deviation, rad.
    pub att_std: f64,
    /// Gyro white-noise density, rad/s/√Hz.
    pub gyro_noise_density: f64,
    /// Gyro bias random-walk density, rad/s²/√Hz.
    pub gyro_bias_walk: f64,
}

impl Default for SensorNoiseConfig {
    fn default() -> Self {
        SensorNoiseConfig {
            pos_std: 0.005,
            vel_std: 0.01,
            att_std: 0.1f64.to_radians(),
            gyro_noise_density: 0.000175,
            gyro_bias_walk: 0.0105,
        }
    }
}

impl SensorNoiseConfig {
    pub fn off() -> Self {
        SensorNoiseConfig {
            pos_std: 0.0,
            vel_std: 0.0,
            att_std: 0.0,
            gyro_noise_density: 0.0,
            gyro_bias_walk: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.pos_std, self.vel_std, self.att_std, self.gyro_noise_density, self.gyro_bias_walk];
        if all.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidParameter("sensor noise densities must be >= 0".into()));
        }
        Ok(())
    }
}

/// Target the policy is regulating towards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Goal {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl Goal {
    pub fn hover(position: Vector3<f64>) -> Self {
        Goal { position, velocity: Vector3::zeros(), angular_velocity: Vector3::zeros() }
    }
}

/// Persistent gyro bias; reset between episodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GyroBias(pub Vector3<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; OBS_DIM] = v
            .try_into()
            .map_err(|_| Error::Dimension { expected: OBS_DIM, got: v.len() })?;
        Ok(Observation(arr))
    }

    pub fn position_error(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn velocity_error(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn rotation_block(&self) -> &[f64] {
        &self.0[6..15]
    }

    pub fn angular_velocity_error(&self) -> Vector3<f64> {
        Vector3::new(self.0[15], self.0[16], self.0[17])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, std: f64) -> Vector3<f64> {
    if std > 0.0 {
        Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) * std
    } else {
        Vector3::zeros()
    }
}

/// Builds the observation of `state` relative to `goal`, advancing the gyro bias by `dt`.
pub fn observe<R: Rng + ?Sized>(
    state: &QuadState,
    goal: &Goal,
    cfg: &SensorNoiseConfig,
    bias: &mut GyroBias,
    dt: f64,
    rng: &mut R,
) -> Observation {
    let e_p = state.position - goal.position + gaussian3(rng, cfg.pos_std);
    let e_v = state.velocity - goal.velocity + gaussian3(rng, cfg.vel_std);

    let rotation = if cfg.att_std > 0.0 {
        let axis = random_unit_vector(rng);
        let angle = cfg.att_std * rng.sample::<f64, _>(StandardNormal);
        axis_angle(&axis, angle) * state.rotation
    } else {
        state.rotation
    };

    if cfg.gyro_bias_walk > 0.0 {
        bias.0 += gaussian3(rng, cfg.gyro_bias_walk * dt.sqrt());
    }
    let white = if cfg.gyro_noise_density > 0.0 && dt > 0.0 {
        gaussian3(rng, cfg.gyro_noise_density / dt.sqrt())
    } else {
        Vector3::zeros()
    };
    let e_w = state.angular_velocity - goal.angular_velocity + white + bias.0;

    let mut out = [0.0; OBS_DIM];
    out[0..3].copy_from_slice(e_p.as_slice());
    out[3..6].copy_from_slice(e_v.as_slice());
    out[6..15].copy_from_slice(&flatten_row_major(&rotation));
    out[15..18].copy_from_slice(e_w.as_slice());
    Observation(out)
}
