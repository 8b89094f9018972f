//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line; the process exits
//! non-zero when any criterion fails.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use quadrl::actuation::{filter_step, noise_step, MotorNoiseConfig};
use quadrl::dynamics::{reorthogonalize, step, QuadState};
use quadrl::env::{sample_initial_state, Env, EnvConfig};
use quadrl::eval::{eval_hover, eval_track, recovery_battery, EvalSetup, SpikeConfig, ThrowConfig};
use quadrl::mlp::Mlp;
use quadrl::params::{nominal_crazyflie, Platform, QuadParams, RandomizationMode};
use quadrl::policy::{gaussian_log_prob, PolicyNet};
use quadrl::rotation::{haar_rotation, rotation_angle};
use quadrl::trainer::{compute_gae, final_position_cost, policy_loss_and_grad, train, write_curve, TrainConfig, TrainOutcome};
use quadrl::GRAVITY;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Verdict = (bool, String);

struct Suite {
    failed: Vec<&'static str>,
    total: usize,
}

impl Suite {
    fn run(&mut self, name: &'static str, f: impl FnOnce() -> Verdict) {
        let t0 = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail} [{:.1} s]", t0.elapsed().as_secs_f64());
        self.total += 1;
        if !ok {
            self.failed.push(name);
        }
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("runtime {s:.2} s (limit {limit_s} s)"))
}

fn run_dynamics(mut s: QuadState, f: [f64; 4], p: &QuadParams, dt: f64, t: f64) -> QuadState {
    for _ in 0..(t / dt).round() as usize {
        s = step(&s, &f, p, dt).unwrap();
    }
    s
}

fn ballistics() -> Verdict {
    let t0 = Instant::now();
    let drop = |dt: f64| {
        let s = run_dynamics(QuadState::at_rest(Vector3::new(0.0, 0.0, 2.0)), [0.0; 4], &nominal_crazyflie(), dt, 0.5);
        (s.position.z - (2.0 - 0.5 * GRAVITY * 0.5 * 0.5)).abs()
    };
    let (e1, e2) = (drop(0.005), drop(0.0025));
    let ratio = e1 / e2;
    let (fast, rt) = within(t0.elapsed(), 1.0);
    let ok = e1 <= 0.02 && (ratio - 2.0).abs() <= 0.1 && fast;
    (ok, format!("error {e1:.5} m (tol 0.02), halving ratio {ratio:.3} (first order: 2 ± 0.1), {rt}"))
}

fn hover_fixed_point() -> Verdict {
    let t0 = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for platform in Platform::ALL {
        let p = platform.params();
        // per-motor f̂ = 1/r_t2w through the noiseless environment
        let mut cfg = EnvConfig { duration: 7.0, ..EnvConfig::default() }.noiseless();
        cfg.runaway_guard = None;
        let mut env = Env::new(cfg, p.clone(), RandomizationMode::None, 0).unwrap();
        let start = QuadState::at_rest(Vector3::new(0.0, 0.0, 2.0));
        env.reset_to(start.clone(), None);
        let a = 2.0 / p.thrust_to_weight - 1.0;
        while !env.step(&[a; 4]).unwrap().done {}
        let s = env.state();
        worst.0 = worst.0.max((s.position - start.position).norm());
        worst.1 = worst.1.max(rotation_angle(&s.rotation).to_degrees());
    }
    let (fast, rt) = within(t0.elapsed(), 5.0);
    let ok = worst.0 < 0.01 && worst.1 < 0.1 && fast;
    (ok, format!("worst drift {:.2e} m (tol 0.01), {:.2e} deg (tol 0.1) over 3 presets, {rt}", worst.0, worst.1))
}

fn nearest_orthogonal() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0usize;
    let mut tightest = f64::INFINITY;
    for _ in 0..10_000 {
        let sigma = rng.random_range(0.001..0.1);
        let mut r = haar_rotation(&mut rng);
        for x in r.iter_mut() {
            *x += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let d = (reorthogonalize(&r).unwrap() - r).norm();
        for _ in 0..10_000 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let q = haar_rotation(&mut rng) * sign;
            let dq = (q - r).norm();
            if d > dq {
                violations += 1;
            }
            tightest = tightest.min(dq - d);
        }
    }
    let (fast, rt) = within(t0.elapsed(), 30.0);
    (violations == 0 && fast, format!("{violations} violations in 1e8 comparisons, smallest margin {tightest:.2e}, {rt}"))
}

fn motor_settling() -> Verdict {
    let dt = 0.005;
    let mut u = [0.0; 4];
    let mut entered = None;
    let mut left = false;
    for n in 1..=400 {
        u = filter_step(&[1.0; 4], &u, dt, 0.15).unwrap();
        let inside = (1.0 - u[0]).abs() <= 0.02;
        match entered {
            None if inside => entered = Some(n as f64 * dt),
            Some(_) if !inside => left = true,
            _ => {}
        }
    }
    let ok = entered.is_some_and(|t| (t - 0.14).abs() < 1e-9 && t <= 0.15) && !left;
    (ok, format!("first inside 2% band at {entered:?} s (expect 0.14, ≤ 0.15), left afterwards: {left}"))
}

fn ou_stationarity() -> Verdict {
    let t0 = Instant::now();
    let mut detail = String::new();
    let mut ok = true;
    for (i, (theta, sigma)) in [(0.15, 0.05), (0.5, 0.1), (0.05, 0.02)].into_iter().enumerate() {
        let cfg = MotorNoiseConfig { theta, sigma };
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let mut e = [0.0; 4];
        for _ in 0..1000 {
            e = noise_step(&cfg, &e, &mut rng);
        }
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            e = noise_step(&cfg, &e, &mut rng);
            s1 += e[0];
            s2 += e[0] * e[0];
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let rel = var / (sigma * sigma / (1.0 - (1.0 - theta) * (1.0 - theta))) - 1.0;
        ok &= rel.abs() <= 0.05;
        let _ = write!(detail, "(θ {theta}, σ {sigma}) rel {rel:+.4}; ");
    }
    let (fast, rt) = within(t0.elapsed(), 5.0);
    (ok && fast, format!("{detail}tol 5%, {rt}"))
}

fn gae_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-10.0..0.0)).collect();
        let (gamma, lambda) = (rng.random_range(0.8..1.0), rng.random_range(0.0..1.0));
        let (adv, _) = compute_gae(&r, &v, gamma, lambda).unwrap();
        for t in 0..n {
            let mut a = 0.0;
            for l in 0..n - t {
                a += (gamma * lambda).powi(l as i32) * (r[t + l] + gamma * v[t + l + 1] - v[t + l]);
            }
            worst = worst.max((adv[t] - a).abs());
        }
    }
    let (fast, rt) = within(t0.elapsed(), 1.0);
    (worst <= 1e-10 && fast, format!("max |recursive − brute force| {worst:.2e} (tol 1e-10) on 100 episodes, {rt}"))
}

fn ppo_gradient_check() -> Verdict {
    // 3→4→2 policy net plus two log-stds
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sizes = [3, 4, 2];
    let old = Mlp::init(&sizes, 1.0, &mut rng);
    let old_log_std: Vec<f64> = vec![-0.3, 0.2];
    let n = 64;
    let obs: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let mut actions = Vec::new();
    let mut old_lp = Vec::new();
    for k in 0..n {
        let mu = old.forward(&obs[3 * k..3 * k + 3]);
        let a: Vec<f64> = (0..2).map(|j| mu[j] + old_log_std[j].exp() * rng.sample::<f64, _>(StandardNormal)).collect();
        old_lp.push(gaussian_log_prob(&mu, &old_log_std, &a));
        actions.extend(a);
    }
    let adv: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut theta: Vec<f64> = old.params().to_vec();
    theta.extend(&old_log_std);
    for (i, t) in theta.iter_mut().enumerate() {
        *t += 0.03 * ((i % 5) as f64 - 2.0);
    }
    let np = old.num_params();
    let eval = |th: &[f64]| {
        let mlp = Mlp::from_params(&sizes, th[..np].to_vec()).unwrap();
        policy_loss_and_grad(&mlp, &th[np..], &obs, &actions, &old_lp, &adv, 0.2, 0.01)
    };
    let (stats, grad) = eval(&theta);
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let h = 1e-6;
        let (mut p, mut m) = (theta.clone(), theta.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (eval(&p).0.loss - eval(&m).0.loss) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8));
    }
    (
        worst <= 1e-4,
        format!("max relative error {worst:.2e} (tol 1e-4) over {} parameters, clip fraction {:.2}", theta.len(), stats.clip_fraction),
    )
}

const HOVER_SEEDS: u64 = 10;

fn desk_learning(base: &TrainOutcome, elapsed: Duration) -> Verdict {
    let first = base.curve[0].mean_position_cost;
    let last = base.curve.last().unwrap().mean_position_cost;
    let (mut e_h, mut e_theta) = (0.0, 0.0);
    for seed in 0..HOVER_SEEDS {
        let setup = EvalSetup::new(nominal_crazyflie()).with_seed(seed);
        let (h, _) = eval_hover(&base.policy, &setup, &SpikeConfig::default()).unwrap();
        e_h += h.e_h / HOVER_SEEDS as f64;
        e_theta += h.e_theta / HOVER_SEEDS as f64;
    }
    let minutes = elapsed.as_secs_f64() / 60.0;
    let ok = last <= 0.5 * first && e_h <= 0.15 && e_theta <= 5.0 && minutes <= 30.0;
    (
        ok,
        format!(
            "position cost {first:.3} -> {last:.3} (ratio {:.3}, tol 0.5); hover with noise over {HOVER_SEEDS} seeds \
             e_h {e_h:.3} m (tol 0.15), e_theta {e_theta:.2} deg (tol 5); training {minutes:.1} min (limit 30)",
            last / first
        ),
    )
}

fn cost_ablation(base: &TrainOutcome) -> Verdict {
    let reference = final_position_cost(&base.curve);
    let mut ok = true;
    let mut detail = format!("alpha_w 0.1 final position cost {reference:.3}; ");
    for alpha in [0.0, 1.0] {
        let mut cfg = TrainConfig::desk();
        cfg.env.weights.angular_velocity = alpha;
        let c = final_position_cost(&train(&cfg).unwrap().curve);
        ok &= c > 2.0 * reference;
        let _ = write!(detail, "alpha_w {alpha}: {c:.3} (ratio {:.2}, need > 2); ", c / reference);
    }
    (ok, detail)
}

fn recovery(base: &TrainOutcome) -> Verdict {
    // alternating classes: 400 throws hold 200 with attitude ≤ 35°
    let setup = EvalSetup::new(nominal_crazyflie());
    let r = recovery_battery(&base.policy, &setup, &ThrowConfig::default(), 400).unwrap();
    let (m, s) = (r.moderate_rate().unwrap(), r.severe_rate().unwrap());
    (
        m >= 0.5 && m > s,
        format!(
            "moderate {}/{} = {m:.3} (need ≥ 0.5), severe {}/{} = {s:.3} (need moderate > severe)",
            r.moderate_recoveries, r.moderate_attempts, r.severe_recoveries, r.severe_attempts
        ),
    )
}

fn figure_eight(base: &TrainOutcome) -> Verdict {
    let (t, flight) = eval_track(&base.policy, &EvalSetup::new(nominal_crazyflie())).unwrap();
    (t.e_t <= 0.35, format!("e_t {:.3} m (tol 0.35), std {:.3} m, diverged {}", t.e_t, t.std, flight.diverged))
}

fn export_parity(policy: &PolicyNet) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut src = policy.export_c("policy");
    src.push_str(
        "#include <stdio.h>\n\
         int main(void) {\n\
         \x20   float obs[18], act[4];\n\
         \x20   for (;;) {\n\
         \x20       for (int i = 0; i < 18; ++i) if (scanf(\"%f\", &obs[i]) != 1) return 0;\n\
         \x20       policy(obs, act);\n\
         \x20       printf(\"%.9e %.9e %.9e %.9e\\n\", act[0], act[1], act[2], act[3]);\n\
         \x20   }\n\
         }\n",
    );
    let c_path = dir.path().join("policy.c");
    let bin = dir.path().join("policy");
    std::fs::write(&c_path, src).unwrap();
    let status = Command::new("cc").arg("-O2").arg("-o").arg(&bin).arg(&c_path).arg("-lm").status();
    match status {
        Ok(s) if s.success() => {}
        other => return (false, format!("C compiler failed: {other:?}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let inputs: Vec<[f64; 18]> =
        (0..1000).map(|_| std::array::from_fn(|_| rng.random_range(-3.0f32..3.0) as f64)).collect();
    let text: String = inputs
        .iter()
        .map(|o| o.iter().map(|x| format!("{:e}", *x as f32)).collect::<Vec<_>>().join(" ") + "\n")
        .collect();
    let input_path = dir.path().join("inputs.txt");
    std::fs::write(&input_path, text).unwrap();
    let out = Command::new(&bin).stdin(std::fs::File::open(&input_path).unwrap()).output().unwrap();
    let lines: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect();
    if lines.len() != inputs.len() {
        return (false, format!("compiled policy produced {} of {} outputs", lines.len(), inputs.len()));
    }
    let mut worst: f64 = 0.0;
    for (obs, line) in inputs.iter().zip(&lines) {
        let native = policy.forward(obs).unwrap();
        for (j, v) in line.split_whitespace().enumerate() {
            worst = worst.max((v.parse::<f64>().unwrap() - native[j]).abs());
        }
    }
    (worst <= 1e-5, format!("max |C − native| {worst:.2e} (tol 1e-5) on 1000 inputs"))
}

fn determinism(policy: &PolicyNet) -> Verdict {
    let cfg = TrainConfig { iterations: 3, ..TrainConfig::desk() };
    let curve_bytes = |o: &TrainOutcome| {
        let mut v = Vec::new();
        write_curve(&o.curve, &mut v).unwrap();
        v
    };
    let (a, b) = (train(&cfg).unwrap(), train(&cfg).unwrap());
    let curves = curve_bytes(&a) == curve_bytes(&b) && a.snapshot() == b.snapshot();

    let simulate = || {
        let cfg = EnvConfig::default();
        let mut env = Env::new(cfg.clone(), nominal_crazyflie(), RandomizationMode::None, 5).unwrap().with_logging();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let start = sample_initial_state(&cfg.init, &cfg.goal.at(0.0).position, &mut rng);
        let mut obs = env.reset_to(start, None);
        loop {
            let out = env.step(&policy.forward(obs.as_slice()).unwrap()).unwrap();
            obs = out.observation;
            if out.done {
                break;
            }
        }
        env.take_log().unwrap().to_csv_string()
    };
    let logs = simulate() == simulate();
    let hover = || eval_hover(policy, &EvalSetup::new(nominal_crazyflie()).with_seed(3), &SpikeConfig::default()).unwrap().1.log.to_csv_string();
    let eval_logs = hover() == hover();
    (
        curves && logs && eval_logs,
        format!("learning curves and snapshots identical: {curves}; FlightLogs identical: {logs}, eval logs identical: {eval_logs}"),
    )
}

fn main() {
    let mut suite = Suite { failed: Vec::new(), total: 0 };
    suite.run("ballistics oracle", ballistics);
    suite.run("hover fixed point", hover_fixed_point);
    suite.run("nearest-orthogonal property", nearest_orthogonal);
    suite.run("motor filter settling", motor_settling);
    suite.run("OU stationarity", ou_stationarity);
    suite.run("GAE oracle", gae_oracle);
    suite.run("PPO gradient check", ppo_gradient_check);

    let t0 = Instant::now();
    let base = train(&TrainConfig::desk());
    let elapsed = t0.elapsed();
    match base {
        Ok(base) => {
            suite.run("desk-scale learning", || desk_learning(&base, elapsed));
            suite.run("in-simulator recovery", || recovery(&base));
            suite.run("figure-eight tracking", || figure_eight(&base));
            suite.run("embedded export parity", || export_parity(&base.policy));
            suite.run("determinism", || determinism(&base.policy));
            suite.run("cost-ablation grid", || cost_ablation(&base));
        }
        Err(e) => {
            for name in ["desk-scale learning", "in-simulator recovery", "figure-eight tracking", "embedded export parity", "determinism", "cost-ablation grid"] {
                suite.run(name, || (false, format!("baseline training failed: {e}")));
            }
        }
    }

    println!("{} of {} acceptance criteria passed", suite.total - suite.failed.len(), suite.total);
    if !suite.failed.is_empty() {
        println!("failed: {}", suite.failed.join(", "));
        std::process::exit(1);
    }
}
