//! Newton–Euler rigid-body dynamics with explicit Euler stepping.
//!
//! `R` maps body to world, `ω` is expressed in the body frame. The rotation update uses the
//! skew matrix of `ω` rotated into the world frame, `Ṙ = (Rω)× R`.

use nalgebra::{Matrix3, Vector3};

use crate::params::{QuadParams, SPIN_DIRECTIONS};
use crate::rotation::{orthogonality_error, skew};
use crate::{Error, Result, GRAVITY};

/// Orthogonality criterion `‖RRᵀ − I‖₁` that triggers re-orthogonalization.
pub const ORTHOGONALITY_TOLERANCE: f64 = 0.01;

/// Periodic re-orthogonalization interval in simulated seconds.
pub const REORTHOGONALIZE_PERIOD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub angular_velocity: Vector3<f64>,
    /// Simulated time since the last re-orthogonalization.
    pub since_reorthogonalization: f64,
}

impl QuadState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        QuadState {
            position,
            velocity: Vector3::zeros(),
            rotation: Matrix3::identity(),
            angular_velocity: Vector3::zeros(),
            since_reorthogonalization: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.rotation.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
    }
}

/// Body-frame force and torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

fn check_thrust(f: &[f64; 4]) -> Result<()> {
    for (motor, &value) in f.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeThrust { motor, value });
        }
    }
    Ok(())
}

/// Thruster torque `Σ rᵢ × (0, 0, fᵢ)` plus the propeller reaction torque about body z.
pub fn total_torque(f: &[f64; 4], params: &QuadParams) -> Result<Vector3<f64>> {
    check_thrust(f)?;
    Ok(torque_unchecked(f, params))
}

fn torque_unchecked(f: &[f64; 4], params: &QuadParams) -> Vector3<f64> {
    let mut tau = Vector3::zeros();
    let mut yaw = 0.0;
    for i in 0..4 {
        let r = params.motor_positions[i];
        // r × (0, 0, f)
        tau += Vector3::new(r.y * f[i], -r.x * f[i], 0.0);
        yaw += SPIN_DIRECTIONS[i] * f[i];
    }
    tau.z += params.torque_to_thrust * yaw;
    tau
}

pub fn wrench(f: &[f64; 4], params: &QuadParams) -> Result<Wrench> {
    check_thrust(f)?;
    Ok(Wrench {
        force: Vector3::new(0.0, 0.0, f.iter().sum()),
        torque: torque_unchecked(f, params),
    })
}

/// Frobenius-nearest orthogonal matrix `U Vᵀ`.
pub fn reorthogonalize(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFiniteState),
    };
    let out = u * v_t;
    let det = out.determinant();
    if det < 0.0 {
        return Err(Error::Reflection(det));
    }
    Ok(out)
}

/// One explicit Euler step of length `dt` under per-motor thrusts `f`.
pub fn step(state: &QuadState, f: &[f64; 4], params: &QuadParams, dt: f64) -> Result<QuadState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}")));
    }
    let w = wrench(f, params)?;
    let r = &state.rotation;
    let omega = &state.angular_velocity;

    let accel = Vector3::new(0.0, 0.0, -GRAVITY) + r * w.force / params.mass;
    let omega_dot = params.inertia_inv * (w.torque - omega.cross(&(params.inertia * omega)));
    let r_dot = skew(&(r * omega)) * r;

    let mut next = QuadState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity + accel * dt,
        rotation: r + r_dot * dt,
        angular_velocity: omega + omega_dot * dt,
        since_reorthogonalization: state.since_reorthogonalization + dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState);
    }
    // Small epsilon so accumulated dt still triggers exactly at the period boundary.
    if next.since_reorthogonalization >= REORTHOGONALIZE_PERIOD - 1e-9
        || orthogonality_error(&next.rotation) >= ORTHOGONALITY_TOLERANCE
    {
        next.rotation = reorthogonalize(&next.rotation)?;
        next.since_reorthogonalization = 0.0;
    }
    Ok(next)
}
