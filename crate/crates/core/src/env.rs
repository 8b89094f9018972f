//! Episodic environment: initial-state sampling, goals, cost and the 100 Hz / 200 Hz stepping
//! contract.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::actuation::{self, action_to_cmd, motor_forces, MotorNoiseConfig, MotorState};
use crate::dynamics::{self, QuadState};
use crate::params::{QuadParams, RandomizationMode};
use crate::rotation::{flatten_row_major, haar_rotation, random_bounded_vector, rotation_angle};
use crate::sensing::{observe, Goal, GyroBias, Observation, SensorNoiseConfig};
use crate::{Error, Result};

/// Weights of the per-tick cost; the position term always has weight one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub velocity: f64,
    pub angular_velocity: f64,
    pub action: f64,
    pub rotation: f64,
}

impl CostWeights {
    /// α_ω = 0.1, α_a = 0.05, α_R = α_v = 0.
    pub fn baseline() -> Self {
        CostWeights { velocity: 0.0, angular_velocity: 0.1, action: 0.05, rotation: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.velocity, self.angular_velocity, self.action, self.rotation];
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("cost weights must be non-negative".into()));
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::baseline()
    }
}

/// `(‖e_p‖ + α_v‖e_v‖ + α_ω‖e_ω‖ + α_a‖a‖ + α_R·angle(R)) · dt`.
pub fn step_cost(state: &QuadState, action: &[f64; 4], goal: &Goal, w: &CostWeights, dt: f64) -> f64 {
    let e_p = (state.position - goal.position).norm();
    let e_v = (state.velocity - goal.velocity).norm();
    let e_w = (state.angular_velocity - goal.angular_velocity).norm();
    let a = action.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut c = e_p + w.velocity * e_v + w.angular_velocity * e_w + w.action * a;
    if w.rotation != 0.0 {
        c += w.rotation * rotation_angle(&state.rotation);
    }
    c * dt
}

/// Initial-state distribution around the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitBounds {
    /// Side of the position cube centred on the goal, m.
    pub box_side: f64,
    pub max_speed: f64,
    pub max_angular_speed: f64,
    /// Initial positions are clipped to at least this altitude.
    pub min_altitude: f64,
}

impl Default for InitBounds {
    fn default() -> Self {
        InitBounds { box_side: 2.0, max_speed: 1.0, max_angular_speed: 2.0 * PI, min_altitude: 0.1 }
    }
}

/// Haar orientation, position uniform in the cube, velocities with uniform direction and
/// magnitude.
pub fn sample_initial_state<R: Rng + ?Sized>(bounds: &InitBounds, goal: &Vector3<f64>, rng: &mut R) -> QuadState {
    let rotation = haar_rotation(rng);
    let half = bounds.box_side / 2.0;
    let mut offset = Vector3::zeros();
    if half > 0.0 {
        for i in 0..3 {
            offset[i] = rng.random_range(-half..=half);
        }
    }
    let mut position = goal + offset;
    position.z = position.z.max(bounds.min_altitude);
    QuadState {
        position,
        velocity: random_bounded_vector(rng, bounds.max_speed),
        rotation,
        angular_velocity: random_bounded_vector(rng, bounds.max_angular_speed),
        since_reorthogonalization: 0.0,
    }
}

/// Planar figure-eight `x = A sin(ωt)`, `y = (B/2) sin(2ωt)` at constant altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureEight {
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub period: f64,
    pub center: [f64; 3],
    /// Hold time at the start point before the curve begins.
    #[serde(default)]
    pub delay: f64,
}

impl Default for FigureEight {
    fn default() -> Self {
        FigureEight::fit(5.5, 1.6, [0.0, 0.0, 2.0])
    }
}

impl FigureEight {
    /// Equal amplitudes solved so the peak speed, reached at the crossing point, equals
    /// `peak_speed`: `ω·√(A² + B²) = v`.
    pub fn fit(period: f64, peak_speed: f64, center: [f64; 3]) -> Self {
        let omega = 2.0 * PI / period;
        let amp = peak_speed / (omega * std::f64::consts::SQRT_2);
        FigureEight { amplitude_x: amp, amplitude_y: amp, period, center, delay: 0.0 }
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Position and velocity on the curve at curve time `t`; outside `[0, period]` the goal
    /// holds at the endpoints with zero velocity.
    pub fn sample(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let c = Vector3::from(self.center);
        if t < 0.0 || t > self.period {
            let end = if t < 0.0 { 0.0 } else { self.period };
            let (p, _) = self.sample(end);
            return (p, Vector3::zeros());
        }
        let w = self.omega();
        let (s1, c1) = (w * t).sin_cos();
        let (s2, c2) = (2.0 * w * t).sin_cos();
        let pos = c + Vector3::new(self.amplitude_x * s1, 0.5 * self.amplitude_y * s2, 0.0);
        let vel = Vector3::new(self.amplitude_x * w * c1, self.amplitude_y * w * c2, 0.0);
        (pos, vel)
    }

    pub fn acceleration(&self, t: f64) -> Vector3<f64> {
        let w = self.omega();
        Vector3::new(
            -self.amplitude_x * w * w * (w * t).sin(),
            -2.0 * self.amplitude_y * w * w * (2.0 * w * t).sin(),
            0.0,
        )
    }

    /// Goal at episode time `t`, accounting for the hold delay.
    pub fn goal(&self, t: f64) -> Goal {
        let (position, velocity) = self.sample(t - self.delay);
        Goal { position, velocity, angular_velocity: Vector3::zeros() }
    }

    /// Total time including the initial hold.
    pub fn end_time(&self) -> f64 {
        self.delay + self.period
    }
}

/// `figure_eight_goal` for the default 5.5 s curve centred at (0, 0, 2).
pub fn figure_eight_goal(t: f64) -> (Vector3<f64>, Vector3<f64>) {
    FigureEight::default().sample(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalSpec {
    Hover { position: [f64; 3] },
    FigureEight(FigureEight),
}

impl Default for GoalSpec {
    fn default() -> Self {
        GoalSpec::Hover { position: [0.0, 0.0, 2.0] }
    }
}

impl GoalSpec {
    pub fn at(&self, t: f64) -> Goal {
        match self {
            GoalSpec::Hover { position } => Goal::hover(Vector3::from(*position)),
            GoalSpec::FigureEight(curve) => curve.goal(t),
        }
    }
}

/// Motor state at reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialMotors {
    /// Filters start at the hover command of the sampled platform.
    #[default]
    Hover,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Episode length, s.
    pub duration: f64,
    pub policy_rate: u32,
    pub dynamics_rate: u32,
    pub init: InitBounds,
    pub goal: GoalSpec,
    pub weights: CostWeights,
    pub motor_noise: MotorNoiseConfig,
    pub sensor_noise: SensorNoiseConfig,
    /// Upper bound on the normalized thrust command.
    #[serde(with = "crate::config::switch")]
    pub thrust_cap: Option<f64>,
    /// Abort when the position error exceeds this norm, m.
    #[serde(with = "crate::config::switch")]
    pub runaway_guard: Option<f64>,
    pub initial_motors: InitialMotors,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            duration: 7.0,
            policy_rate: 100,
            dynamics_rate: 200,
            init: InitBounds::default(),
            goal: GoalSpec::default(),
            weights: CostWeights::baseline(),
            motor_noise: MotorNoiseConfig::default(),
            sensor_noise: SensorNoiseConfig::default(),
            thrust_cap: None,
            runaway_guard: Some(10.0),
            initial_motors: InitialMotors::Hover,
        }
    }
}

impl EnvConfig {
    /// Switches motor and sensor noise off.
    pub fn noiseless(mut self) -> Self {
        self.motor_noise = MotorNoiseConfig::off();
        self.sensor_noise = SensorNoiseConfig::off();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.policy_rate == 0 || self.dynamics_rate == 0 || !self.dynamics_rate.is_multiple_of(self.policy_rate) {
            return Err(Error::InvalidParameter(format!(
                "dynamics rate {} must be a multiple of policy rate {}",
                self.dynamics_rate, self.policy_rate
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        if let Some(cap) = self.thrust_cap {
            if !(cap > 0.0 && cap <= 1.0) {
                return Err(Error::InvalidParameter(format!("thrust cap {cap}")));
            }
        }
        self.weights.validate()?;
        self.motor_noise.validate()?;
        self.sensor_noise.validate()
    }

    pub fn policy_dt(&self) -> f64 {
        1.0 / self.policy_rate as f64
    }

    pub fn dynamics_dt(&self) -> f64 {
        1.0 / self.dynamics_rate as f64
    }

    pub fn substeps(&self) -> usize {
        (self.dynamics_rate / self.policy_rate) as usize
    }

    pub fn max_ticks(&self) -> usize {
        (self.duration * self.policy_rate as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub state: QuadState,
    pub observation: Observation,
    pub action: [f64; 4],
    pub goal: Goal,
    pub cost: f64,
}

/// Per-policy-tick record of an episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightLog {
    pub rows: Vec<LogRow>,
}

pub const FLIGHT_LOG_HEADER: &str =
    "t,x,y,z,vx,vy,vz,r11,r12,r13,r21,r22,r23,r31,r32,r33,wx,wy,wz,a1,a2,a3,a4,gx,gy,gz,cost";

impl FlightLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.rows.iter().map(|r| r.cost).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FLIGHT_LOG_HEADER}")?;
        for r in &self.rows {
            let s = &r.state;
            let mut fields: Vec<f64> = Vec::with_capacity(27);
            fields.push(r.time);
            fields.extend(s.position.iter());
            fields.extend(s.velocity.iter());
            fields.extend(flatten_row_major(&s.rotation));
            fields.extend(s.angular_velocity.iter());
            fields.extend(r.action);
            fields.extend(r.goal.position.iter());
            fields.push(r.cost);
            let line = fields.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub cost: f64,
    pub done: bool,
    /// Episode ended early by the runaway guard.
    pub aborted: bool,
    /// Policy ticks that were left when the episode ended.
    pub remaining_ticks: usize,
}

/// One simulated quadrotor with its own random stream.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    base_params: QuadParams,
    randomization: RandomizationMode,
    params: QuadParams,
    state: QuadState,
    motor: MotorState,
    gyro: GyroBias,
    rng: ChaCha8Rng,
    tick: usize,
    done: bool,
    observation: Observation,
    log: Option<FlightLog>,
}

impl Env {
    pub fn new(cfg: EnvConfig, base_params: QuadParams, randomization: RandomizationMode, seed: u64) -> Result<Self> {
        cfg.validate()?;
        base_params.validate()?;
        let goal = cfg.goal.at(0.0);
        let state = QuadState::at_rest(goal.position);
        let mut env = Env {
            params: base_params.clone(),
            base_params,
            randomization,
            state,
            motor: MotorState::default(),
            gyro: GyroBias::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick: 0,
            done: true,
            observation: Observation([0.0; crate::OBS_DIM]),
            log: None,
            cfg,
        };
        env.observation = env.observe();
        Ok(env)
    }

    /// Records every tick into a [`FlightLog`] from the next reset on.
    pub fn with_logging(mut self) -> Self {
        self.log = Some(FlightLog::default());
        self
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn params(&self) -> &QuadParams {
        &self.params
    }

    pub fn state(&self) -> &QuadState {
        &self.state
    }

    pub fn motor(&self) -> &MotorState {
        &self.motor
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.policy_dt()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn goal(&self) -> Goal {
        self.cfg.goal.at(self.time())
    }

    pub fn log(&self) -> Option<&FlightLog> {
        self.log.as_ref()
    }

    pub fn take_log(&mut self) -> Option<FlightLog> {
        self.log.as_mut().map(std::mem::take)
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Draws platform parameters per the randomization mode and a random initial state.
    pub fn reset(&mut self) -> Result<Observation> {
        self.params = self.randomization.sample(&self.base_params, &mut self.rng)?;
        let goal = self.cfg.goal.at(0.0);
        let state = sample_initial_state(&self.cfg.init, &goal.position, &mut self.rng);
        let motor = self.initial_motor_state();
        Ok(self.start(state, motor))
    }

    /// Starts an episode from a given state with the current parameters.
    pub fn reset_to(&mut self, state: QuadState, motor: Option<MotorState>) -> Observation {
        let motor = motor.unwrap_or_else(|| self.initial_motor_state());
        self.start(state, motor)
    }

    pub fn set_params(&mut self, params: QuadParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    fn initial_motor_state(&self) -> MotorState {
        match self.cfg.initial_motors {
            InitialMotors::Hover => MotorState::spinning(self.params.hover_thrust_fraction()),
            InitialMotors::Idle => MotorState::default(),
        }
    }

    fn start(&mut self, state: QuadState, motor: MotorState) -> Observation {
        self.state = state;
        self.motor = motor;
        self.gyro = GyroBias::default();
        self.tick = 0;
        self.done = false;
        if let Some(log) = self.log.as_mut() {
            log.rows.clear();
        }
        self.observation = self.observe();
        self.observation
    }

    fn observe(&mut self) -> Observation {
        let goal = self.goal();
        observe(&self.state, &goal, &self.cfg.sensor_noise, &mut self.gyro, self.cfg.policy_dt(), &mut self.rng)
    }

    /// Applies `action` for one policy tick (two dynamics sub-steps at the default rates).
    pub fn step(&mut self, action: &[f64; 4]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let applied = action.map(|a| a.clamp(-1.0, 1.0));
        let (mut thrust, _) = action_to_cmd(&applied);
        if let Some(cap) = self.cfg.thrust_cap {
            thrust = thrust.map(|f| f.min(cap));
        }
        let cmd = thrust.map(f64::sqrt);
        let dt = self.cfg.dynamics_dt();
        for _ in 0..self.cfg.substeps() {
            self.motor = actuation::advance(
                &cmd,
                &self.motor,
                &self.cfg.motor_noise,
                dt,
                self.params.settling_time,
                &mut self.rng,
            )?;
            let f = motor_forces(&self.motor, &self.params);
            self.state = dynamics::step(&self.state, &f, &self.params, dt)?;
        }
        self.tick += 1;
        let goal = self.goal();
        let cost = step_cost(&self.state, &applied, &goal, &self.cfg.weights, self.cfg.policy_dt());
        self.observation = self.observe();

        let max_ticks = self.cfg.max_ticks();
        let aborted = self
            .cfg
            .runaway_guard
            .is_some_and(|limit| (self.state.position - goal.position).norm() > limit);
        self.done = aborted || self.tick >= max_ticks;

        if let Some(log) = self.log.as_mut() {
            log.rows.push(LogRow {
                time: self.tick as f64 * self.cfg.policy_dt(),
                state: self.state.clone(),
                observation: self.observation,
                action: applied,
                goal,
                cost,
            });
        }
        Ok(StepOutcome {
            observation: self.observation,
            cost,
            done: self.done,
            aborted,
            remaining_ticks: max_ticks.saturating_sub(self.tick),
        })
    }
}
