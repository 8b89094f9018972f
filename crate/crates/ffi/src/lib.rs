//! C ABI over the quadrl simulator and policy.
//!
//! Handles are opaque pointers owned by the caller and released with the matching `_free`
//! function. Every fallible call returns a [`QrlStatus`]; on failure a message is available
//! from [`qrl_last_error`] until the next failing call on the same thread.
//!
//! The reward returned by [`qrl_env_step`] is the negated per-tick cost.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use quadrl::config::SimConfig;
use quadrl::env::Env;
use quadrl::policy::PolicyNet;
use quadrl::{Error, ACT_DIM, OBS_DIM};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    EpisodeFinished = 4,
    Simulation = 5,
    Io = 6,
    Snapshot = 7,
    Panic = 8,
}

/// Simulator instance.
pub struct QrlEnv {
    env: Env,
    config: SimConfig,
}

/// Loaded policy.
pub struct QrlPolicy {
    net: PolicyNet,
}

/// True simulator state, for diagnostics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QrlState {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Row-major body-to-world rotation.
    pub rotation: [f64; 9],
    pub angular_velocity: [f64; 3],
    pub motor_filtered: [f64; 4],
    pub motor_noise: [f64; 4],
    pub goal_position: [f64; 3],
    pub time: f64,
    pub tick: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QrlStatus {
    match e {
        Error::Config(_) => QrlStatus::Config,
        Error::EpisodeFinished => QrlStatus::EpisodeFinished,
        Error::Io(_) => QrlStatus::Io,
        Error::Snapshot(_) => QrlStatus::Snapshot,
        Error::NonFiniteState | Error::Reflection(_) | Error::NegativeThrust { .. } => QrlStatus::Simulation,
        _ => QrlStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (QrlStatus, String)>>(f: F) -> QrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QrlStatus::Panic
        }
    }
}

fn fail(e: Error) -> (QrlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QrlStatus, String) {
    (QrlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QrlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (QrlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn qrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn qrl_obs_dim() -> usize {
    OBS_DIM
}

#[no_mangle]
pub extern "C" fn qrl_act_dim() -> usize {
    ACT_DIM
}

/// Creates a simulator from a TOML document (may be empty for defaults).
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_new(config_toml: *const c_char, seed: u64, out: *mut *mut QrlEnv) -> QrlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(config_toml, "config")?;
        let config = SimConfig::from_toml(text).map_err(fail)?;
        let env = Env::new(config.env.clone(), config.airframe.params(), config.randomization, seed).map_err(fail)?;
        *out = Box::into_raw(Box::new(QrlEnv { env, config }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`qrl_env_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_free(env: *mut QrlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts an episode. A non-null `seed` reseeds the simulator first.
///
/// # Safety
/// `env` must be a live handle; `obs` must hold 18 doubles.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_reset(env: *mut QrlEnv, seed: *const u64, obs: *mut f64) -> QrlStatus {
    guard(|| {
        let h = env.as_mut().ok_or_else(|| null("env"))?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        if let Some(s) = seed.as_ref() {
            h.env.reseed(*s);
        }
        let o = h.env.reset().map_err(fail)?;
        ptr::copy_nonoverlapping(o.0.as_ptr(), obs, OBS_DIM);
        Ok(())
    })
}

/// Advances one policy tick. `terminated` reports a runaway abort, `truncated` the time limit.
///
/// # Safety
/// `env` must be a live handle; `action` holds 4 doubles, `obs` room for 18; the flag and
/// reward pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_step(
    env: *mut QrlEnv,
    action: *const f64,
    obs: *mut f64,
    reward: *mut f64,
    terminated: *mut bool,
    truncated: *mut bool,
) -> QrlStatus {
    guard(|| {
        let h = env.as_mut().ok_or_else(|| null("env"))?;
        if action.is_null() || obs.is_null() || reward.is_null() || terminated.is_null() || truncated.is_null() {
            return Err(null("argument"));
        }
        let mut a = [0.0; ACT_DIM];
        ptr::copy_nonoverlapping(action, a.as_mut_ptr(), ACT_DIM);
        if a.iter().any(|v| !v.is_finite()) {
            return Err((QrlStatus::InvalidArgument, "action is not finite".into()));
        }
        let out = h.env.step(&a).map_err(fail)?;
        ptr::copy_nonoverlapping(out.observation.0.as_ptr(), obs, OBS_DIM);
        *reward = -out.cost;
        *terminated = out.aborted;
        *truncated = out.done && !out.aborted;
        Ok(())
    })
}

/// # Safety
/// `env` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_state(env: *const QrlEnv, out: *mut QrlState) -> QrlStatus {
    guard(|| {
        let h = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = h.env.state();
        let m = h.env.motor();
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[3 * i + j] = s.rotation[(i, j)];
            }
        }
        *out = QrlState {
            position: s.position.into(),
            velocity: s.velocity.into(),
            rotation,
            angular_velocity: s.angular_velocity.into(),
            motor_filtered: m.filtered,
            motor_noise: m.noise,
            goal_position: h.env.goal().position.into(),
            time: h.env.time(),
            tick: h.env.tick() as u64,
        };
        Ok(())
    })
}

/// Writes the resolved configuration as TOML. `needed` receives the size including the NUL;
/// with a null or short buffer nothing else is written and the call still succeeds.
///
/// # Safety
/// `env` must be a live handle; `buf` must hold `len` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn qrl_env_config(env: *const QrlEnv, buf: *mut c_char, len: usize, needed: *mut usize) -> QrlStatus {
    guard(|| {
        let h = env.as_ref().ok_or_else(|| null("env"))?;
        let text = h.config.to_toml().map_err(fail)?;
        let bytes = text.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if !buf.is_null() && len > bytes.len() {
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
            *buf.add(bytes.len()) = 0;
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrl_policy_load(path: *const c_char, out: *mut *mut QrlPolicy) -> QrlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let net = PolicyNet::load(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(QrlPolicy { net }));
        Ok(())
    })
}

/// Loads a policy from snapshot bytes.
///
/// # Safety
/// `data` must hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrl_policy_from_bytes(data: *const u8, len: usize, out: *mut *mut QrlPolicy) -> QrlStatus {
    guard(|| {
        if out.is_null() || data.is_null() {
            return Err(null("argument"));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let net = PolicyNet::from_snapshot(bytes).map_err(fail)?;
        *out = Box::into_raw(Box::new(QrlPolicy { net }));
        Ok(())
    })
}

/// Deterministic (mean) action for one observation.
///
/// # Safety
/// `policy` must be a live handle; `obs` holds 18 doubles and `action` room for 4.
#[no_mangle]
pub unsafe extern "C" fn qrl_policy_forward(policy: *const QrlPolicy, obs: *const f64, action: *mut f64) -> QrlStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        if obs.is_null() || action.is_null() {
            return Err(null("argument"));
        }
        let o = std::slice::from_raw_parts(obs, OBS_DIM);
        let a = p.net.forward(o).map_err(fail)?;
        ptr::copy_nonoverlapping(a.as_ptr(), action, ACT_DIM);
        Ok(())
    })
}

/// # Safety
/// `policy` must come from a `qrl_policy_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qrl_policy_free(policy: *mut QrlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}
