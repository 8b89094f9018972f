//! Normalized thrust interface, first-order motor lag and Ornstein–Uhlenbeck motor noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::params::QuadParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    /// Filtered normalized rotor angular velocity û′.
    pub filtered: [f64; 4],
    /// Ornstein–Uhlenbeck noise state.
    pub noise: [f64; 4],
}

impl MotorState {
    /// Motors already spinning at a steady normalized thrust command.
    pub fn spinning(thrust_fraction: f64) -> Self {
        MotorState { filtered: [thrust_fraction.clamp(0.0, 1.0).sqrt(); 4], noise: [0.0; 4] }
    }
}

/// Discretized OU process parameters; the mean is fixed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorNoiseConfig {
    /// Per-step decay rate θ.
    pub theta: f64,
    /// Per-step scale σ.
    pub sigma: f64,
}

impl Default for MotorNoiseConfig {
    fn default() -> Self {
        MotorNoiseConfig { theta: 0.15, sigma: 0.05 }
    }
}

impl MotorNoiseConfig {
    pub fn off() -> Self {
        MotorNoiseConfig { theta: 0.15, sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) || !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "motor noise theta={} sigma={}",
                self.theta, self.sigma
            )));
        }
        Ok(())
    }

    /// Stationary variance `σ² / (1 − (1 − θ)²)`.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - (1.0 - self.theta).powi(2))
    }
}

/// Clamps the action to `[−1, 1]`, then `f̂ = (a + 1)/2` and `û = √f̂`.
pub fn action_to_cmd(action: &[f64; 4]) -> ([f64; 4], [f64; 4]) {
    let thrust = action.map(|a| (0.5 * (a.clamp(-1.0, 1.0) + 1.0)).clamp(0.0, 1.0));
    (thrust, thrust.map(f64::sqrt))
}

/// `û′ₜ = (4dt/T)(ûₜ − û′ₜ₋₁) + û′ₜ₋₁`.
pub fn filter_step(cmd: &[f64; 4], previous: &[f64; 4], dt: f64, settling_time: f64) -> Result<[f64; 4]> {
    if settling_time < 4.0 * dt - 1e-12 {
        return Err(Error::SettlingTooShort { settling: settling_time, min: 4.0 * dt });
    }
    let k = (4.0 * dt / settling_time).min(1.0);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = k * (cmd[i] - previous[i]) + previous[i];
    }
    Ok(out)
}

/// `εₜ = εₜ₋₁ + θ(0 − εₜ₋₁) + σ·N(0, I₄)`.
pub fn noise_step<R: Rng + ?Sized>(cfg: &MotorNoiseConfig, previous: &[f64; 4], rng: &mut R) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        let n: f64 = if cfg.sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        out[i] = previous[i] - cfg.theta * previous[i] + cfg.sigma * n;
    }
    out
}

/// `f = f_max · clamp(û′ + ε, 0, 1)²`.
pub fn motor_forces(motor: &MotorState, params: &QuadParams) -> [f64; 4] {
    let f_max = params.f_max();
    let mut f = [0.0; 4];
    for i in 0..4 {
        let u = (motor.filtered[i] + motor.noise[i]).clamp(0.0, 1.0);
        f[i] = f_max * u * u;
    }
    f
}

/// Lag + noise update for one dynamics step, returning the new motor state.
pub fn advance<R: Rng + ?Sized>(
    cmd: &[f64; 4],
    motor: &MotorState,
    noise: &MotorNoiseConfig,
    dt: f64,
    settling_time: f64,
    rng: &mut R,
) -> Result<MotorState> {
    Ok(MotorState {
        filtered: filter_step(cmd, &motor.filtered, dt, settling_time)?,
        noise: noise_step(noise, &motor.noise, rng),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::nominal_crazyflie;
    use crate::GRAVITY;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn action_endpoints() {
        assert_eq!(action_to_cmd(&[1.0; 4]), ([1.0; 4], [1.0; 4]));
        assert_eq!(action_to_cmd(&[-1.0; 4]), ([0.0; 4], [0.0; 4]));
        let (f, u) = action_to_cmd(&[0.0; 4]);
        assert_eq!(f, [0.5; 4]);
        assert!((u[0] - 0.5f64.sqrt()).abs() < 1e-15);
        // out-of-range actions are clamped
        assert_eq!(action_to_cmd(&[3.0, -7.0, 1.0, -1.0]).0, [1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn filter_fixed_point_and_boundary() {
        let prev = [0.3, 0.1, 0.9, 0.5];
        assert_eq!(filter_step(&prev, &prev, 0.005, 0.15).unwrap(), prev);
        let cmd = [0.7, 0.2, 0.0, 1.0];
        assert_eq!(filter_step(&cmd, &prev, 0.005, 0.02).unwrap(), cmd);
        assert!(matches!(
            filter_step(&cmd, &prev, 0.005, 0.019),
            Err(Error::SettlingTooShort { .. })
        ));
    }

    #[test]
    fn settles_within_two_percent_at_step_28() {
        let mut u = [0.0; 4];
        let mut first = None;
        for n in 1..=200 {
            u = filter_step(&[1.0; 4], &u, 0.005, 0.15).unwrap();
            let inside = (1.0 - u[0]).abs() < 0.02;
            if inside && first.is_none() {
                first = Some(n);
            }
            if first.is_some() {
                assert!(inside, "left the band at step {n}");
            }
        }
        assert_eq!(first, Some(28));
    }

    #[test]
    fn noiseless_ou_decays_geometrically() {
        let cfg = MotorNoiseConfig { theta: 0.15, sigma: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut e = [1.0; 4];
        for t in 1..=50 {
            e = noise_step(&cfg, &e, &mut rng);
            assert!((e[0] - 0.85f64.powi(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_power_force() {
        let p = nominal_crazyflie();
        let f = motor_forces(&MotorState { filtered: [1.0; 4], noise: [0.0; 4] }, &p);
        assert!(f.iter().all(|&x| (x - 0.13047).abs() < 1e-5));
        assert_eq!(motor_forces(&MotorState::default(), &p), [0.0; 4]);
    }

    #[test]
    fn hover_command_balances_weight() {
        let p = nominal_crazyflie();
        let u = (1.0 / p.thrust_to_weight).sqrt();
        assert!((u - 0.7255).abs() < 1e-4);
        let f = motor_forces(&MotorState { filtered: [u; 4], noise: [0.0; 4] }, &p);
        let total: f64 = f.iter().sum();
        assert!((total - p.mass * GRAVITY).abs() < 1e-14);
    }

    #[test]
    fn noisy_command_is_clamped() {
        let p = nominal_crazyflie();
        let f = motor_forces(&MotorState { filtered: [0.0, 1.0, 0.5, 0.5], noise: [-0.2, 0.3, 0.0, 0.0] }, &p);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], p.f_max());
    }
}
