//! Small SO(3) helpers shared by the simulator and the metrics.

use nalgebra::{Matrix3, Rotation3, Unit, UnitQuaternion, Vector3, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

/// Skew-symmetric cross-product matrix: `skew(v) * u == v × u`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Elementwise L1 norm of `R Rᵀ − I`.
pub fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r * r.transpose() - Matrix3::identity()).abs().sum()
}

/// Haar-uniform rotation via a normalized 4-D Gaussian quaternion.
pub fn haar_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = loop {
        let v = Vector4::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            break v / n;
        }
    };
    let uq = UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
    uq.to_rotation_matrix().into_inner()
}

/// Uniformly distributed unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Vector with uniformly random direction and magnitude uniform in `[0, max]`.
pub fn random_bounded_vector<R: Rng + ?Sized>(rng: &mut R, max: f64) -> Vector3<f64> {
    let dir = random_unit_vector(rng);
    let mag = if max > 0.0 { rng.random_range(0.0..=max) } else { 0.0 };
    dir * mag
}

pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    axis_angle(&Vector3::x(), angle)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    axis_angle(&Vector3::y(), angle)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    axis_angle(&Vector3::z(), angle)
}

/// Rotation angle of `R` relative to identity, `acos((tr R − 1)/2)` with the argument clamped.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Tilt of the body z-axis from world up in radians (yaw-free).
pub fn tilt(r: &Matrix3<f64>) -> f64 {
    r[(2, 2)].clamp(-1.0, 1.0).acos()
}

/// Roll and pitch of an intrinsic Z-Y-X decomposition, `None` near gimbal lock.
pub fn roll_pitch(r: &Matrix3<f64>, max_pitch: f64) -> Option<(f64, f64)> {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    if pitch.abs() > max_pitch {
        return None;
    }
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    Some((roll, pitch))
}

/// Row-major flattening.
pub fn flatten_row_major(r: &Matrix3<f64>) -> [f64; 9] {
    [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
    ]
}
