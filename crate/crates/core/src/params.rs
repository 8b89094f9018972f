//! Generalized × quadrotor model, platform presets and the two domain-randomization schemes.
//!
//! The body is assembled from five component classes (baselink, payload, four arms, four
//! motors, four rotors). Motor 1 is front-right at (+x, −y) and motors are numbered clockwise
//! when viewed from above. The body-frame origin is the composite centre of mass.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::{Error, Result, DT_DYNAMICS, GRAVITY};

/// Spin direction per motor for the reaction torque about body z (motor 1 counterclockwise).
pub const SPIN_DIRECTIONS: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

/// Maximum rejection-sampling attempts per parameter draw.
pub const MAX_SAMPLING_ATTEMPTS: usize = 100;

const COM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub body_width: f64,
    pub body_height: f64,
    pub payload_width: f64,
    pub payload_height: f64,
    pub arm_length: f64,
    pub arm_width: f64,
    pub arm_height: f64,
    /// Arm angle from the body x-axis (π/4 for the × layout).
    pub arm_angle: f64,
    pub motor_radius: f64,
    pub motor_height: f64,
    pub rotor_radius: f64,
    pub rotor_height: f64,
}

impl Geometry {
    /// Motor xy positions in the geometric frame (before the centre-of-mass shift).
    pub fn motor_xy(&self) -> [Vector3<f64>; 4] {
        let (s, c) = self.arm_angle.sin_cos();
        let l = self.arm_length;
        [
            Vector3::new(l * c, -l * s, 0.0),
            Vector3::new(-l * c, -l * s, 0.0),
            Vector3::new(-l * c, l * s, 0.0),
            Vector3::new(l * c, l * s, 0.0),
        ]
    }

    fn lengths(&self) -> [f64; 11] {
        [
            self.body_width,
            self.body_height,
            self.payload_width,
            self.payload_height,
            self.arm_length,
            self.arm_width,
            self.arm_height,
            self.motor_radius,
            self.motor_height,
            self.rotor_radius,
            self.rotor_height,
        ]
    }

    /// Smallest distance between neighbouring motor axes.
    pub fn neighbour_spacing(&self) -> f64 {
        let (s, c) = self.arm_angle.sin_cos();
        2.0 * self.arm_length * s.abs().min(c.abs())
    }

    fn scaled(&self, k: f64) -> Geometry {
        Geometry {
            body_width: self.body_width * k,
            body_height: self.body_height * k,
            payload_width: self.payload_width * k,
            payload_height: self.payload_height * k,
            arm_length: self.arm_length * k,
            arm_width: self.arm_width * k,
            arm_height: self.arm_height * k,
            arm_angle: self.arm_angle,
            motor_radius: self.motor_radius * k,
            motor_height: self.motor_height * k,
            rotor_radius: self.rotor_radius * k,
            rotor_height: self.rotor_height * k,
        }
    }
}

/// Masses of the individual components; arm, motor and rotor masses are per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentMasses {
    pub body: f64,
    pub payload: f64,
    pub arm: f64,
    pub motor: f64,
    pub rotor: f64,
}

impl ComponentMasses {
    pub fn total(&self) -> f64 {
        self.body + self.payload + 4.0 * (self.arm + self.motor + self.rotor)
    }

    fn scaled(&self, k: f64) -> ComponentMasses {
        ComponentMasses {
            body: self.body * k,
            payload: self.payload * k,
            arm: self.arm * k,
            motor: self.motor * k,
            rotor: self.rotor * k,
        }
    }
}

/// Analytic rigid shapes, each with its own inertia about its centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Point,
    /// Solid box with full extents along body x, y, z.
    Box { x: f64, y: f64, z: f64 },
    /// Solid cylinder with its axis along body z.
    Cylinder { radius: f64, height: f64 },
    /// Thin rod of the given length along a unit direction.
    Rod { length: f64, direction: Vector3<f64> },
}

impl Shape {
    pub fn own_inertia(&self, mass: f64) -> Matrix3<f64> {
        match *self {
            Shape::Point => Matrix3::zeros(),
            Shape::Box { x, y, z } => Matrix3::from_diagonal(&Vector3::new(
                mass * (y * y + z * z) / 12.0,
                mass * (x * x + z * z) / 12.0,
                mass * (x * x + y * y) / 12.0,
            )),
            Shape::Cylinder { radius, height } => {
                let side = mass * (3.0 * radius * radius + height * height) / 12.0;
                Matrix3::from_diagonal(&Vector3::new(side, side, 0.5 * mass * radius * radius))
            }
            Shape::Rod { length, direction } => {
                let u = direction.normalize();
                (Matrix3::identity() - u * u.transpose()) * (mass * length * length / 12.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub mass: f64,
    pub shape: Shape,
    /// Centroid offset from the body origin.
    pub offset: Vector3<f64>,
}

/// Composite inertia about the body origin via the parallel axis theorem.
///
/// The body origin must coincide with the composite centre of mass.
pub fn compose_inertia(components: &[Component]) -> Result<Matrix3<f64>> {
    if components.is_empty() {
        return Err(Error::InvalidParameter("no components".into()));
    }
    let mut total = 0.0;
    let mut moment = Vector3::zeros();
    for c in components {
        if !(c.mass > 0.0) || !c.mass.is_finite() {
            return Err(Error::InvalidParameter(format!("component mass {}", c.mass)));
        }
        total += c.mass;
        moment += c.offset * c.mass;
    }
    let com = moment / total;
    if com.norm() > COM_TOLERANCE {
        return Err(Error::CenterOfMassOffset(com.norm()));
    }
    let mut inertia = Matrix3::zeros();
    for c in components {
        let d = c.offset;
        inertia += c.shape.own_inertia(c.mass)
            + (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * c.mass;
    }
    Ok(inertia)
}

/// Component list with the body origin moved to the composite centre of mass.
///
/// Returns the components and the shift that was subtracted from every offset.
pub fn layout(geometry: &Geometry, masses: &ComponentMasses) -> (Vec<Component>, Vector3<f64>) {
    let g = geometry;
    let mut parts = vec![
        Component {
            mass: masses.body,
            shape: Shape::Box { x: g.body_width, y: g.body_width, z: g.body_height },
            offset: Vector3::zeros(),
        },
        Component {
            mass: masses.payload,
            shape: Shape::Box { x: g.payload_width, y: g.payload_width, z: g.payload_height },
            offset: Vector3::new(0.0, 0.0, -(g.body_height + g.payload_height) / 2.0),
        },
    ];
    let motor_z = (g.arm_height + g.motor_height) / 2.0;
    let rotor_z = g.arm_height / 2.0 + g.motor_height + g.rotor_height / 2.0;
    for tip in g.motor_xy() {
        parts.push(Component {
            mass: masses.arm,
            shape: Shape::Rod { length: g.arm_length, direction: tip.normalize() },
            offset: tip / 2.0,
        });
        parts.push(Component {
            mass: masses.motor,
            shape: Shape::Cylinder { radius: g.motor_radius, height: g.motor_height },
            offset: tip + Vector3::new(0.0, 0.0, motor_z),
        });
        parts.push(Component {
            mass: masses.rotor,
            shape: Shape::Cylinder { radius: g.rotor_radius, height: g.rotor_height },
            offset: tip + Vector3::new(0.0, 0.0, rotor_z),
        });
    }
    let total: f64 = parts.iter().map(|p| p.mass).sum();
    let com = parts.iter().map(|p| p.offset * p.mass).sum::<Vector3<f64>>() / total;
    for p in &mut parts {
        p.offset -= com;
    }
    (parts, com)
}

/// Full physical description of one quadrotor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub inertia_inv: Matrix3<f64>,
    pub thrust_to_weight: f64,
    pub torque_to_thrust: f64,
    pub settling_time: f64,
    pub geometry: Geometry,
    pub masses: ComponentMasses,
    /// Rotor centres in the body frame (origin at the centre of mass).
    pub motor_positions: [Vector3<f64>; 4],
}

impl QuadParams {
    pub fn assemble(
        geometry: Geometry,
        masses: ComponentMasses,
        thrust_to_weight: f64,
        torque_to_thrust: f64,
        settling_time: f64,
    ) -> Result<Self> {
        let (parts, com) = layout(&geometry, &masses);
        let inertia = compose_inertia(&parts)?;
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular inertia".into()))?;
        let rotor_z = geometry.arm_height / 2.0 + geometry.motor_height + geometry.rotor_height / 2.0;
        let motor_positions = geometry
            .motor_xy()
            .map(|p| p + Vector3::new(0.0, 0.0, rotor_z) - com);
        let params = QuadParams {
            mass: masses.total(),
            inertia,
            inertia_inv,
            thrust_to_weight,
            torque_to_thrust,
            settling_time,
            geometry,
            masses,
            motor_positions,
        };
        params.validate()?;
        Ok(params)
    }

    /// Maximum force per motor: `0.25 · g · m · r_t2w`.
    pub fn f_max(&self) -> f64 {
        0.25 * GRAVITY * self.mass * self.thrust_to_weight
    }

    /// Normalized thrust command per motor that balances gravity.
    pub fn hover_thrust_fraction(&self) -> f64 {
        1.0 / self.thrust_to_weight
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return bad("mass must be positive");
        }
        if !(self.thrust_to_weight > 1.0) {
            return bad("thrust-to-weight must exceed 1");
        }
        if !(self.torque_to_thrust > 0.0) {
            return bad("torque-to-thrust must be positive");
        }
        if self.settling_time < 4.0 * DT_DYNAMICS - 1e-12 {
            return Err(Error::SettlingTooShort {
                settling: self.settling_time,
                min: 4.0 * DT_DYNAMICS,
            });
        }
        if self.geometry.lengths().iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return bad("lengths must be positive");
        }
        if 2.0 * self.geometry.rotor_radius >= self.geometry.neighbour_spacing() {
            return bad("rotors overlap");
        }
        let sym = (self.inertia - self.inertia.transpose()).abs().max();
        if sym > 1e-12 * self.inertia.abs().max() {
            return bad("inertia not symmetric");
        }
        if self.inertia.cholesky().is_none() {
            return bad("inertia not positive definite");
        }
        Ok(())
    }

    fn with_scalars(&self, s: &Scalars) -> Result<QuadParams> {
        let k = s.mass / self.mass;
        QuadParams::assemble(
            s.geometry,
            self.masses.scaled(k),
            s.thrust_to_weight,
            s.torque_to_thrust,
            s.settling_time,
        )
    }
}

/// Table of nominal Crazyflie 2.0 values; component masses sum to 28 g.
pub fn nominal_crazyflie() -> QuadParams {
    let w = 0.065;
    let ratio = 0.3;
    let geometry = Geometry {
        body_width: w,
        body_height: ratio * w,
        payload_width: 0.02,
        payload_height: ratio * 0.02,
        arm_length: 0.046,
        arm_width: 0.005,
        arm_height: ratio * 0.005,
        arm_angle: FRAC_PI_4,
        motor_radius: 0.0035,
        motor_height: ratio * 0.007,
        rotor_radius: 0.022,
        rotor_height: ratio * 0.044,
    };
    let masses = ComponentMasses {
        body: 0.0162,
        payload: 0.001,
        arm: 0.0007,
        motor: 0.0017,
        rotor: 0.0003,
    };
    QuadParams::assemble(geometry, masses, 1.9, 0.006, 0.15).expect("nominal parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Cf,
    Small,
    Medium,
}

impl Platform {
    pub const ALL: [Platform; 3] = [Platform::Cf, Platform::Small, Platform::Medium];

    pub fn name(&self) -> &'static str {
        match self {
            Platform::Cf => "cf",
            Platform::Small => "small",
            Platform::Medium => "medium",
        }
    }

    pub fn parse(s: &str) -> Option<Platform> {
        match s.to_ascii_lowercase().as_str() {
            "cf" | "crazyflie" => Some(Platform::Cf),
            "small" => Some(Platform::Small),
            "medium" => Some(Platform::Medium),
            _ => None,
        }
    }

    /// (mass kg, body width m, rotor radius m, thrust-to-weight)
    fn table(&self) -> (f64, f64, f64, f64) {
        match self {
            Platform::Cf => (0.033, 0.065, 0.022, 1.9),
            Platform::Small => (0.073, 0.085, 0.033, 2.0),
            Platform::Medium => (0.124, 0.090, 0.035, 2.7),
        }
    }

    /// Physical parameters: nominal geometry rescaled to the platform's width and rotor size.
    pub fn params(&self) -> QuadParams {
        let base = nominal_crazyflie();
        let (mass, width, rotor, t2w) = self.table();
        let mut g = base.geometry.scaled(width / base.geometry.body_width);
        let rotor_k = rotor / base.geometry.rotor_radius;
        g.rotor_radius = rotor;
        g.rotor_height = base.geometry.rotor_height * rotor_k;
        g.motor_radius = base.geometry.motor_radius * rotor_k;
        g.motor_height = base.geometry.motor_height * rotor_k;
        let masses = base.masses.scaled(mass / base.mass);
        QuadParams::assemble(g, masses, t2w, base.torque_to_thrust, base.settling_time)
            .expect("platform presets are valid")
    }

    /// Command cap on the normalized thrust, if the platform is flown limited.
    pub fn thrust_cap(&self) -> Option<f64> {
        match self {
            Platform::Medium => Some(0.6),
            _ => None,
        }
    }
}

/// Base airframe: the nominal Crazyflie values or one of the platform presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Airframe {
    #[default]
    Nominal,
    Cf,
    Small,
    Medium,
}

impl Airframe {
    pub fn params(&self) -> QuadParams {
        match self {
            Airframe::Nominal => nominal_crazyflie(),
            Airframe::Cf => Platform::Cf.params(),
            Airframe::Small => Platform::Small.params(),
            Airframe::Medium => Platform::Medium.params(),
        }
    }

    pub fn platform(&self) -> Option<Platform> {
        match self {
            Airframe::Nominal => None,
            Airframe::Cf => Some(Platform::Cf),
            Airframe::Small => Some(Platform::Small),
            Airframe::Medium => Some(Platform::Medium),
        }
    }
}

impl From<Platform> for Airframe {
    fn from(p: Platform) -> Self {
        match p {
            Platform::Cf => Airframe::Cf,
            Platform::Small => Airframe::Small,
            Platform::Medium => Airframe::Medium,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Bounds for total randomization. Geometry beyond the body width is sampled relative to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationLimits {
    pub body_width: Range,
    pub settling_time: Range,
    pub thrust_to_weight: Range,
    pub torque_to_thrust: Range,
    pub max_mass: f64,
    /// Component density in kg/m³.
    pub density: Range,
    pub arm_to_body: Range,
    pub rotor_to_arm: Range,
    pub motor_to_rotor: Range,
    pub payload_to_body: Range,
    pub arm_width_to_length: Range,
    /// Height of every component as a fraction of its width.
    pub height_ratio: f64,
}

impl Default for RandomizationLimits {
    fn default() -> Self {
        RandomizationLimits {
            body_width: Range::new(0.05, 0.2),
            settling_time: Range::new(0.1, 0.2),
            thrust_to_weight: Range::new(1.8, 2.5),
            torque_to_thrust: Range::new(0.005, 0.02),
            max_mass: 5.0,
            density: Range::new(200.0, 1800.0),
            arm_to_body: Range::new(0.55, 0.9),
            rotor_to_arm: Range::new(0.35, 0.65),
            motor_to_rotor: Range::new(0.12, 0.25),
            payload_to_body: Range::new(0.3, 0.8),
            arm_width_to_length: Range::new(0.06, 0.12),
            height_ratio: 0.3,
        }
    }
}

impl RandomizationLimits {
    /// Variant with thrust-to-weight widened to U(1.5, 2.5).
    pub fn wide_thrust_to_weight() -> Self {
        RandomizationLimits { thrust_to_weight: Range::new(1.5, 2.5), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("body_width", self.body_width),
            ("settling_time", self.settling_time),
            ("thrust_to_weight", self.thrust_to_weight),
            ("torque_to_thrust", self.torque_to_thrust),
            ("density", self.density),
            ("arm_to_body", self.arm_to_body),
            ("rotor_to_arm", self.rotor_to_arm),
            ("motor_to_rotor", self.motor_to_rotor),
            ("payload_to_body", self.payload_to_body),
            ("arm_width_to_length", self.arm_width_to_length),
        ];
        for (name, r) in ranges {
            if !(r.lo > 0.0 && r.lo < r.hi) {
                return Err(Error::InvalidParameter(format!("limit {name}: [{}, {}]", r.lo, r.hi)));
            }
        }
        if self.thrust_to_weight.lo <= 1.0 {
            return Err(Error::InvalidParameter("thrust-to-weight lower bound must exceed 1".into()));
        }
        if self.settling_time.lo < 4.0 * DT_DYNAMICS {
            return Err(Error::InvalidParameter("settling time lower bound below 4·dt".into()));
        }
        // Rotors must fit next to each other: 2 r < √2 · L at the × angle.
        if 2.0 * self.rotor_to_arm.hi >= std::f64::consts::SQRT_2 {
            return Err(Error::InvalidParameter("rotor_to_arm too large: rotors overlap".into()));
        }
        if !(self.max_mass > 0.0 && self.height_ratio > 0.0) {
            return Err(Error::InvalidParameter("max_mass and height_ratio must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Scalars {
    mass: f64,
    geometry: Geometry,
    thrust_to_weight: f64,
    torque_to_thrust: f64,
    settling_time: f64,
}

/// Gaussian randomization around `base`: every scalar drawn from N(x, (spread·x)²).
///
/// Invalid draws are rejected and the whole set is resampled, up to
/// [`MAX_SAMPLING_ATTEMPTS`] times.
pub fn sample_nominal<R: Rng + ?Sized>(base: &QuadParams, spread: f64, rng: &mut R) -> Result<QuadParams> {
    if !(0.0..1.0).contains(&spread) {
        return Err(Error::InvalidParameter(format!("spread {spread} outside [0, 1)")));
    }
    let mut last_err = String::new();
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let mut draw = |x: f64| x + spread * x * rng.sample::<f64, _>(StandardNormal);
        let g = &base.geometry;
        let geometry = Geometry {
            body_width: draw(g.body_width),
            body_height: draw(g.body_height),
            payload_width: draw(g.payload_width),
            payload_height: draw(g.payload_height),
            arm_length: draw(g.arm_length),
            arm_width: draw(g.arm_width),
            arm_height: draw(g.arm_height),
            arm_angle: g.arm_angle,
            motor_radius: draw(g.motor_radius),
            motor_height: draw(g.motor_height),
            rotor_radius: draw(g.rotor_radius),
            rotor_height: draw(g.rotor_height),
        };
        let scalars = Scalars {
            mass: draw(base.mass),
            geometry,
            thrust_to_weight: draw(base.thrust_to_weight),
            torque_to_thrust: draw(base.torque_to_thrust),
            settling_time: draw(base.settling_time),
        };
        if !(scalars.mass > 0.0) {
            last_err = "non-positive mass".into();
            continue;
        }
        match base.with_scalars(&scalars) {
            Ok(p) => return Ok(p),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(Error::SamplingExhausted { attempts: MAX_SAMPLING_ATTEMPTS, reason: last_err })
}

/// Only the thrust-to-weight ratio is drawn uniformly; everything else stays at `base`.
pub fn sample_thrust_to_weight<R: Rng + ?Sized>(base: &QuadParams, range: Range, rng: &mut R) -> Result<QuadParams> {
    let mut p = base.clone();
    p.thrust_to_weight = range.sample(rng);
    p.validate()?;
    Ok(p)
}

/// Total randomization: body width first, geometry relative to it, mass from sampled densities.
///
/// Draws exceeding the mass cap are resampled; with positive density bounds a valid draw
/// always exists, so the loop terminates with probability one.
pub fn sample_total<R: Rng + ?Sized>(limits: &RandomizationLimits, rng: &mut R) -> QuadParams {
    loop {
        let w = limits.body_width.sample(rng);
        let arm_length = w * limits.arm_to_body.sample(rng);
        let rotor_radius = arm_length * limits.rotor_to_arm.sample(rng);
        let motor_radius = rotor_radius * limits.motor_to_rotor.sample(rng);
        let payload_width = w * limits.payload_to_body.sample(rng);
        let arm_width = arm_length * limits.arm_width_to_length.sample(rng);
        let h = limits.height_ratio;
        let geometry = Geometry {
            body_width: w,
            body_height: h * w,
            payload_width,
            payload_height: h * payload_width,
            arm_length,
            arm_width,
            arm_height: h * arm_width,
            arm_angle: FRAC_PI_4,
            motor_radius,
            motor_height: h * 2.0 * motor_radius,
            rotor_radius,
            rotor_height: h * 2.0 * rotor_radius,
        };
        let g = &geometry;
        let cyl = |r: f64, hh: f64| std::f64::consts::PI * r * r * hh;
        let masses = ComponentMasses {
            body: limits.density.sample(rng) * g.body_width * g.body_width * g.body_height,
            payload: limits.density.sample(rng) * g.payload_width * g.payload_width * g.payload_height,
            arm: limits.density.sample(rng) * g.arm_length * g.arm_width * g.arm_height,
            motor: limits.density.sample(rng) * cyl(g.motor_radius, g.motor_height),
            rotor: limits.density.sample(rng) * cyl(g.rotor_radius, g.rotor_height),
        };
        let t2w = limits.thrust_to_weight.sample(rng);
        let t2t = limits.torque_to_thrust.sample(rng);
        let settling = limits.settling_time.sample(rng);
        if masses.total() > limits.max_mass {
            continue;
        }
        if let Ok(p) = QuadParams::assemble(geometry, masses, t2w, t2t, settling) {
            return p;
        }
    }
}

/// How dynamics parameters are drawn for each training trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RandomizationMode {
    #[default]
    None,
    Nominal { spread: f64 },
    Total {
        #[serde(default)]
        limits: RandomizationLimits,
    },
    ThrustToWeight { lo: f64, hi: f64 },
}

impl RandomizationMode {
    pub fn sample<R: Rng + ?Sized>(&self, base: &QuadParams, rng: &mut R) -> Result<QuadParams> {
        match self {
            RandomizationMode::None => Ok(base.clone()),
            RandomizationMode::Nominal { spread } => sample_nominal(base, *spread, rng),
            RandomizationMode::Total { limits } => {
                limits.validate()?;
                Ok(sample_total(limits, rng))
            }
            RandomizationMode::ThrustToWeight { lo, hi } => {
                sample_thrust_to_weight(base, Range::new(*lo, *hi), rng)
            }
        }
    }
}
