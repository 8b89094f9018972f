//! Flight metrics and experiment batteries: hover, figure-eight tracking, throw recovery and
//! the cross-platform grid.
//!
//! Every flight here runs the policy deterministically (mean action) on a fresh environment
//! seeded from the caller's seed, so reports are reproducible.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::actuation::MotorNoiseConfig;
use crate::dynamics::QuadState;
use crate::env::{sample_initial_state, Env, EnvConfig, FigureEight, FlightLog, GoalSpec};
use crate::params::{Platform, QuadParams, RandomizationMode};
use crate::policy::PolicyNet;
use crate::rotation::{haar_rotation, random_bounded_vector, roll_pitch, tilt};
use crate::sensing::SensorNoiseConfig;
use crate::{Error, Result};

/// Tilt of the body z-axis from vertical in degrees, `acos(R₃₃)`; yaw does not enter.
pub fn angular_error(r: &nalgebra::Matrix3<f64>) -> f64 {
    tilt(r).to_degrees()
}

/// Spike detection for the oscillation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpikeConfig {
    /// A bin counts when its magnitude is at least this multiple of the median non-DC bin.
    pub median_ratio: f64,
    /// and its sinusoid amplitude is at least this many degrees.
    pub min_amplitude_deg: f64,
    /// Samples with |pitch| above this are dropped from the series.
    pub max_pitch_deg: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig { median_ratio: 5.0, min_amplitude_deg: 0.05, max_pitch_deg: 85.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoverReport {
    /// Mean position error, m.
    pub e_h: f64,
    /// Mean angular error, degrees.
    pub e_theta: f64,
    /// Highest significant oscillation frequency of roll/pitch, Hz.
    pub f_o: Option<f64>,
}

/// Highest frequency whose amplitude spectrum bin is significant, for a series sampled at
/// `rate` Hz. The series is mean-removed first.
pub fn dominant_frequency(series_deg: &[f64], rate: f64, cfg: &SpikeConfig) -> Option<f64> {
    let n = series_deg.len();
    if n < 4 {
        return None;
    }
    let mean = series_deg.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series_deg.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let amp: Vec<f64> = buf[1..=half].iter().map(|c| 2.0 * c.norm() / n as f64).collect();
    let mut sorted = amp.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let threshold = (cfg.median_ratio * median).max(cfg.min_amplitude_deg);
    amp.iter()
        .enumerate()
        .rev()
        .find(|(_, a)| **a >= threshold)
        .map(|(k, _)| (k + 1) as f64 * rate / n as f64)
}

/// Metrics over the last `window` seconds of a log recorded at `rate` Hz.
pub fn hover_metrics(log: &FlightLog, window: f64, rate: f64, cfg: &SpikeConfig) -> Result<HoverReport> {
    let needed = (window * rate).round() as usize;
    if needed == 0 || log.len() < needed {
        return Err(Error::LogTooShort { needed, have: log.len() });
    }
    let rows = &log.rows[log.len() - needed..];
    let n = rows.len() as f64;
    let e_h = rows.iter().map(|r| (r.state.position - r.goal.position).norm()).sum::<f64>() / n;
    let e_theta = rows.iter().map(|r| angular_error(&r.state.rotation)).sum::<f64>() / n;
    let max_pitch = cfg.max_pitch_deg.to_radians();
    let (roll, pitch): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| roll_pitch(&r.state.rotation, max_pitch))
        .map(|(a, b)| (a.to_degrees(), b.to_degrees()))
        .unzip();
    let f_o = match (dominant_frequency(&roll, rate, cfg), dominant_frequency(&pitch, rate, cfg)) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    Ok(HoverReport { e_h, e_theta, f_o })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackReport {
    /// Mean position error against the reference, m.
    pub e_t: f64,
    pub std: f64,
}

/// A timestamped reference position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub time: f64,
    pub position: Vector3<f64>,
}

/// Reference samples of `curve` at the log's timestamps.
pub fn reference_for(curve: &FigureEight, log: &FlightLog) -> Vec<RefPoint> {
    log.rows
        .iter()
        .map(|r| RefPoint { time: r.time, position: curve.goal(r.time).position })
        .collect()
}

pub fn track_metrics(log: &FlightLog, reference: &[RefPoint]) -> Result<TrackReport> {
    if log.len() != reference.len() {
        return Err(Error::Misaligned(format!("{} log rows, {} reference points", log.len(), reference.len())));
    }
    if log.is_empty() {
        return Err(Error::LogTooShort { needed: 1, have: 0 });
    }
    let mut errors = Vec::with_capacity(log.len());
    for (row, r) in log.rows.iter().zip(reference) {
        if (row.time - r.time).abs() > 1e-9 {
            return Err(Error::Misaligned(format!("log time {} vs reference time {}", row.time, r.time)));
        }
        errors.push((row.state.position - r.position).norm());
    }
    let n = errors.len() as f64;
    let e_t = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - e_t).powi(2)).sum::<f64>() / n;
    Ok(TrackReport { e_t, std: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub log: FlightLog,
    /// Ended early: runaway guard, or the integrator left the finite/orientable range.
    pub diverged: bool,
}

/// Flies `policy` deterministically from `state` for the configured duration.
pub fn fly(policy: &PolicyNet, cfg: EnvConfig, params: QuadParams, state: QuadState, seed: u64) -> Result<Flight> {
    let mut env = Env::new(cfg, params, RandomizationMode::None, seed)?.with_logging();
    let mut obs = env.reset_to(state, None);
    let diverged = loop {
        let action = policy.forward(obs.as_slice())?;
        let out = match env.step(&action) {
            Ok(out) => out,
            Err(Error::NonFiniteState | Error::Reflection(_)) => break true,
            Err(e) => return Err(e),
        };
        obs = out.observation;
        if out.done {
            break out.aborted;
        }
    };
    Ok(Flight { log: env.take_log().unwrap_or_default(), diverged })
}

/// Shared settings for evaluation flights.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSetup {
    pub params: QuadParams,
    pub thrust_cap: Option<f64>,
    pub noise: bool,
    pub seed: u64,
}

impl EvalSetup {
    pub fn new(params: QuadParams) -> Self {
        EvalSetup { params, thrust_cap: None, noise: true, seed: 0 }
    }

    pub fn platform(p: Platform) -> Self {
        EvalSetup { thrust_cap: p.thrust_cap(), ..EvalSetup::new(p.params()) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise: bool) -> Self {
        self.noise = noise;
        self
    }

    fn env(&self, duration: f64, goal: GoalSpec) -> EnvConfig {
        let mut cfg = EnvConfig { duration, goal, thrust_cap: self.thrust_cap, ..EnvConfig::default() };
        if !self.noise {
            cfg.motor_noise = MotorNoiseConfig::off();
            cfg.sensor_noise = SensorNoiseConfig::off();
        }
        cfg
    }
}

pub const HOVER_SETTLE: f64 = 2.0;
pub const HOVER_WINDOW: f64 = 10.0;
pub const TRACK_HOLD: f64 = 1.0;

/// Hover from a random initial state: settle, then measure over the window.
pub fn hover_flight(policy: &PolicyNet, setup: &EvalSetup) -> Result<Flight> {
    let cfg = setup.env(HOVER_SETTLE + HOVER_WINDOW, GoalSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let goal = cfg.goal.at(0.0).position;
    let state = sample_initial_state(&cfg.init, &goal, &mut rng);
    fly(policy, cfg, setup.params.clone(), state, rng.random())
}

/// A diverged flight scores the worst values: infinite position error and 180°.
pub fn eval_hover(policy: &PolicyNet, setup: &EvalSetup, spikes: &SpikeConfig) -> Result<(HoverReport, Flight)> {
    let flight = hover_flight(policy, setup)?;
    if flight.diverged {
        return Ok((HoverReport { e_h: f64::INFINITY, e_theta: 180.0, f_o: None }, flight));
    }
    let rate = 1.0 / EnvConfig::default().policy_dt();
    Ok((hover_metrics(&flight.log, HOVER_WINDOW, rate, spikes)?, flight))
}

/// The default figure-eight preceded by a hold at its start point.
pub fn track_curve() -> FigureEight {
    FigureEight { delay: TRACK_HOLD, ..FigureEight::default() }
}

/// Starts at rest on the curve start, holds, then flies one period; the error is measured
/// over the curve portion.
pub fn eval_track(policy: &PolicyNet, setup: &EvalSetup) -> Result<(TrackReport, Flight)> {
    let curve = track_curve();
    let cfg = setup.env(curve.end_time(), GoalSpec::FigureEight(curve));
    let start = curve.goal(0.0).position;
    let flight = fly(policy, cfg, setup.params.clone(), QuadState::at_rest(start), setup.seed)?;
    if flight.diverged {
        return Ok((TrackReport { e_t: f64::INFINITY, std: 0.0 }, flight));
    }
    let on_curve = FlightLog { rows: flight.log.rows.iter().filter(|r| r.time > curve.delay + 1e-9).cloned().collect() };
    let report = track_metrics(&on_curve, &reference_for(&curve, &on_curve))?;
    Ok((report, flight))
}

/// Throw distribution and recovery thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThrowConfig {
    pub max_speed: f64,
    pub max_angular_speed: f64,
    /// Largest distance of the release point from the goal, m.
    pub max_offset: f64,
    pub min_altitude: f64,
    /// Boundary between moderate and severe initial attitudes, degrees.
    pub moderate_tilt_deg: f64,
    pub horizon: f64,
    pub criterion: RecoveryCriterion,
}

impl Default for ThrowConfig {
    fn default() -> Self {
        ThrowConfig {
            max_speed: 4.0,
            max_angular_speed: 2.0 * std::f64::consts::PI,
            max_offset: 3.0,
            min_altitude: 0.1,
            moderate_tilt_deg: 35.0,
            horizon: 5.0,
            criterion: RecoveryCriterion::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryCriterion {
    pub position_tol: f64,
    pub tilt_tol_deg: f64,
    /// How long both tolerances must hold without interruption, s.
    pub hold: f64,
}

impl Default for RecoveryCriterion {
    fn default() -> Self {
        RecoveryCriterion { position_tol: 0.5, tilt_tol_deg: 25.0, hold: 1.0 }
    }
}

impl RecoveryCriterion {
    /// Whether the log contains an uninterrupted stretch of `hold` seconds inside both tolerances.
    pub fn recovered(&self, log: &FlightLog, rate: f64) -> bool {
        let needed = (self.hold * rate).round().max(1.0) as usize;
        let mut run = 0;
        for r in &log.rows {
            let ok = (r.state.position - r.goal.position).norm() < self.position_tol
                && angular_error(&r.state.rotation) < self.tilt_tol_deg;
            run = if ok { run + 1 } else { 0 };
            if run >= needed {
                return true;
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RecoveryReport {
    pub attempts: usize,
    pub recoveries: usize,
    pub moderate_attempts: usize,
    pub moderate_recoveries: usize,
    pub severe_attempts: usize,
    pub severe_recoveries: usize,
}

fn ratio(k: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| k as f64 / n as f64)
}

impl RecoveryReport {
    /// `None` when there were no attempts.
    pub fn rate(&self) -> Option<f64> {
        ratio(self.recoveries, self.attempts)
    }

    pub fn moderate_rate(&self) -> Option<f64> {
        ratio(self.moderate_recoveries, self.moderate_attempts)
    }

    pub fn severe_rate(&self) -> Option<f64> {
        ratio(self.severe_recoveries, self.severe_attempts)
    }
}

/// Release state of a throw. Even attempts draw a moderate attitude, odd attempts a severe one.
pub fn sample_throw<R: Rng + ?Sized>(cfg: &ThrowConfig, goal: &Vector3<f64>, moderate: bool, rng: &mut R) -> QuadState {
    let limit = cfg.moderate_tilt_deg.to_radians();
    let rotation = loop {
        let r = haar_rotation(rng);
        if (tilt(&r) <= limit) == moderate {
            break r;
        }
    };
    let offset = crate::rotation::random_unit_vector(rng) * cfg.max_offset * rng.random::<f64>().cbrt();
    let mut position = goal + offset;
    position.z = position.z.max(cfg.min_altitude);
    QuadState {
        position,
        velocity: random_bounded_vector(rng, cfg.max_speed),
        rotation,
        angular_velocity: random_bounded_vector(rng, cfg.max_angular_speed),
        since_reorthogonalization: 0.0,
    }
}

/// Logs of `n` throws with their severity class (`true` = moderate).
pub fn throw_flights(policy: &PolicyNet, setup: &EvalSetup, cfg: &ThrowConfig, n: usize) -> Result<Vec<(bool, FlightLog)>> {
    let env = setup.env(cfg.horizon, GoalSpec::default());
    let goal = env.goal.at(0.0).position;
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let moderate = i % 2 == 0;
        let state = sample_throw(cfg, &goal, moderate, &mut rng);
        let flight = fly(policy, env.clone(), setup.params.clone(), state, rng.random())?;
        out.push((moderate, flight.log));
    }
    Ok(out)
}

pub fn summarize_recovery(flights: &[(bool, FlightLog)], criterion: &RecoveryCriterion, rate: f64) -> RecoveryReport {
    let mut rep = RecoveryReport::default();
    for (moderate, log) in flights {
        let ok = criterion.recovered(log, rate) as usize;
        rep.attempts += 1;
        rep.recoveries += ok;
        if *moderate {
            rep.moderate_attempts += 1;
            rep.moderate_recoveries += ok;
        } else {
            rep.severe_attempts += 1;
            rep.severe_recoveries += ok;
        }
    }
    rep
}

pub fn recovery_battery(policy: &PolicyNet, setup: &EvalSetup, cfg: &ThrowConfig, n: usize) -> Result<RecoveryReport> {
    let flights = throw_flights(policy, setup, cfg, n)?;
    Ok(summarize_recovery(&flights, &cfg.criterion, 1.0 / EnvConfig::default().policy_dt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub policy: String,
    pub platform: Platform,
    pub hover: HoverReport,
    pub track: TrackReport,
}

/// Hover and figure-eight for every (policy, platform) pair.
pub fn grid_eval(
    policies: &[(String, PolicyNet)],
    platforms: &[Platform],
    seed: u64,
    noise: bool,
    spikes: &SpikeConfig,
) -> Result<Vec<GridRow>> {
    let mut rows = Vec::with_capacity(policies.len() * platforms.len());
    for (name, policy) in policies {
        for &platform in platforms {
            let setup = EvalSetup::platform(platform).with_seed(seed).with_noise(noise);
            let (hover, _) = eval_hover(policy, &setup, spikes)?;
            let (track, _) = eval_track(policy, &setup)?;
            rows.push(GridRow { policy: name.clone(), platform, hover, track });
        }
    }
    Ok(rows)
}

pub const GRID_HEADER: &str = "policy,platform,e_theta_deg,f_o_hz,e_t_m,e_h_m,e_t_std_m";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn write_grid<W: Write>(rows: &[GridRow], mut out: W) -> Result<()> {
    writeln!(out, "{GRID_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.4},{},{:.4},{:.4},{:.4}",
            r.policy,
            r.platform.name(),
            r.hover.e_theta,
            opt(r.hover.f_o),
            r.track.e_t,
            r.hover.e_h,
            r.track.std
        )?;
    }
    Ok(())
}

pub const HOVER_HEADER: &str = "e_h_m,e_theta_deg,f_o_hz";

impl HoverReport {
    pub fn csv_row(&self) -> String {
        format!("{:.6},{:.6},{}", self.e_h, self.e_theta, opt(self.f_o))
    }
}

pub const TRACK_HEADER: &str = "e_t_m,e_t_std_m";

impl TrackReport {
    pub fn csv_row(&self) -> String {
        format!("{:.6},{:.6}", self.e_t, self.std)
    }
}

pub const RECOVERY_HEADER: &str =
    "attempts,recoveries,rate,moderate_attempts,moderate_recoveries,moderate_rate,severe_attempts,severe_recoveries,severe_rate";

impl RecoveryReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.attempts,
            self.recoveries,
            opt(self.rate()),
            self.moderate_attempts,
            self.moderate_recoveries,
            opt(self.moderate_rate()),
            self.severe_attempts,
            self.severe_recoveries,
            opt(self.severe_rate())
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LogRow;
    use crate::rotation::{rot_x, rot_z};
    use crate::sensing::{Goal, Observation};

    fn row(t: f64, pos: Vector3<f64>, r: nalgebra::Matrix3<f64>) -> LogRow {
        let mut state = QuadState::at_rest(pos);
        state.rotation = r;
        LogRow {
            time: t,
            state,
            observation: Observation([0.0; 18]),
            action: [0.0; 4],
            goal: Goal::hover(Vector3::new(0.0, 0.0, 2.0)),
            cost: 0.0,
        }
    }

    #[test]
    fn angular_error_examples() {
        assert_eq!(angular_error(&nalgebra::Matrix3::identity()), 0.0);
        assert!((angular_error(&rot_x(std::f64::consts::FRAC_PI_2)) - 90.0).abs() < 1e-12);
        let r = rot_x(30f64.to_radians());
        assert!((angular_error(&(rot_z(1.1) * r)) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_hover() {
        let log = FlightLog {
            rows: (1..=1000).map(|k| row(k as f64 * 0.01, Vector3::new(0.0, 0.0, 2.0), nalgebra::Matrix3::identity())).collect(),
        };
        let rep = hover_metrics(&log, 10.0, 100.0, &SpikeConfig::default()).unwrap();
        assert_eq!((rep.e_h, rep.e_theta, rep.f_o), (0.0, 0.0, None));
    }

    #[test]
    fn pure_tone() {
        let log = FlightLog {
            rows: (0..1000)
                .map(|k| {
                    let t = k as f64 * 0.01;
                    let roll = 5f64.to_radians() * (2.0 * std::f64::consts::PI * 2.0 * t).sin();
                    row(t, Vector3::new(0.0, 0.0, 2.0), rot_x(roll))
                })
                .collect(),
        };
        let rep = hover_metrics(&log, 10.0, 100.0, &SpikeConfig::default()).unwrap();
        assert!((rep.f_o.unwrap() - 2.0).abs() <= 0.1);
    }

    #[test]
    fn constant_offset_and_tilt() {
        let log = FlightLog {
            rows: (0..1000).map(|k| row(k as f64 * 0.01, Vector3::new(0.05, 0.0, 2.0), rot_x(10f64.to_radians()))).collect(),
        };
        let rep = hover_metrics(&log, 10.0, 100.0, &SpikeConfig::default()).unwrap();
        assert!((rep.e_h - 0.05).abs() < 1e-12);
        assert!((rep.e_theta - 10.0).abs() < 1e-9);
        assert_eq!(rep.f_o, None);
    }

    #[test]
    fn short_log_rejected() {
        let log = FlightLog { rows: vec![row(0.0, Vector3::zeros(), nalgebra::Matrix3::identity())] };
        assert!(matches!(hover_metrics(&log, 10.0, 100.0, &SpikeConfig::default()), Err(Error::LogTooShort { .. })));
    }

    #[test]
    fn empty_battery_has_no_rate() {
        let rep = recovery_battery(&PolicyNet::zeros(), &EvalSetup::new(crate::params::nominal_crazyflie()), &ThrowConfig::default(), 0)
            .unwrap();
        assert_eq!(rep.attempts, 0);
        assert_eq!(rep.rate(), None);
    }

    #[test]
    fn misaligned_reference() {
        let log = FlightLog { rows: vec![row(0.01, Vector3::zeros(), nalgebra::Matrix3::identity())] };
        let r = [RefPoint { time: 0.02, position: Vector3::zeros() }];
        assert!(matches!(track_metrics(&log, &r), Err(Error::Misaligned(_))));
        assert!(matches!(track_metrics(&log, &[]), Err(Error::Misaligned(_))));
    }
}
