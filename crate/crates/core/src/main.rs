use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use plotters::prelude::*;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use quadrl::config::{Preset, RunConfig};
use quadrl::dynamics::QuadState;
use quadrl::env::{sample_initial_state, EnvConfig, FlightLog, GoalSpec};
use quadrl::eval::{self, EvalSetup};
use quadrl::params::{nominal_crazyflie, Platform};
use quadrl::policy::PolicyNet;
use quadrl::trainer::{self, write_curve, IterationStats};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "quadrl", version, about = "Quadrotor simulator, PPO trainer and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies, one run per seed.
    Train(TrainArgs),
    /// Fly one episode and write its flight log.
    Simulate(SimArgs),
    /// Hover: settle 2 s, measure 10 s.
    EvalHover(EvalArgs),
    /// Figure-eight tracking.
    EvalTrack(EvalArgs),
    /// Recovery from randomized throws.
    EvalRecovery(RecoveryArgs),
    /// Hover and tracking for every policy on every platform.
    Grid(GridArgs),
    /// Emit a self-contained C source for the policy.
    Export(ExportArgs),
    /// Print the fully resolved configuration.
    Config(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    preset: String,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let preset = Preset::parse(&self.preset).with_context(|| format!("unknown preset {}", self.preset))?;
        let base = RunConfig::preset(preset);
        let cfg = match &self.config {
            Some(path) => RunConfig::load(path, &base).with_context(|| format!("reading {}", path.display()))?,
            None => base,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Repeat to train several seeds; the best two are reported.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Also write a snapshot every this many iterations.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct Common {
    /// Policy snapshot; the all-zero policy when omitted.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// cf, small, medium or nominal.
    #[arg(long, default_value = "nominal")]
    platform: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    noise: bool,
}

impl Common {
    fn policy(&self) -> Result<PolicyNet> {
        match &self.snapshot {
            Some(p) => PolicyNet::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(PolicyNet::zeros()),
        }
    }

    fn setup(&self) -> Result<EvalSetup> {
        let setup = if self.platform == "nominal" {
            EvalSetup::new(nominal_crazyflie())
        } else {
            let p = Platform::parse(&self.platform).with_context(|| format!("unknown platform {}", self.platform))?;
            EvalSetup::platform(p)
        };
        Ok(setup.with_seed(self.seed).with_noise(self.noise))
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 7.0)]
    duration: f64,
    /// Follow the figure-eight instead of hovering.
    #[arg(long)]
    figure_eight: bool,
    #[arg(long, default_value = "flight.csv")]
    out: PathBuf,
    /// Position traces as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Write the report CSV here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct RecoveryArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    attempts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Repeat for several policies.
    #[arg(long = "snapshot", required = true)]
    snapshots: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    noise: bool,
    #[arg(long, default_value = "grid.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long, default_value = "policy_forward")]
    name: String,
    #[arg(long, default_value = "policy.c")]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Simulate(a) => simulate(a),
        Command::EvalHover(a) => eval_hover(a),
        Command::EvalTrack(a) => eval_track(a),
        Command::EvalRecovery(a) => eval_recovery(a),
        Command::Grid(a) => grid(a),
        Command::Export(a) => export(a),
        Command::Config(a) => {
            print!("{}", a.load()?.to_toml()?);
            Ok(())
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.config.load()?.train;
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds.clone() };
    fs::create_dir_all(&a.out)?;
    let mut runs: Vec<(u64, Vec<IterationStats>)> = Vec::new();
    for &seed in &seeds {
        let run_cfg = trainer::TrainConfig { seed, ..cfg.clone() };
        let dir = a.out.clone();
        let every = a.checkpoint_every;
        let outcome = trainer::train_with(&run_cfg, |s, policy| {
            if s.iteration % 10 == 0 || s.iteration + 1 == run_cfg.iterations {
                eprintln!(
                    "seed {seed} iter {:>5}  position cost {:.4}  cost {:.4}  aborted {:.2}  std {:.3}",
                    s.iteration, s.mean_position_cost, s.mean_cost, s.aborted_fraction, s.mean_std
                );
            }
            if let Some(k) = every {
                if k > 0 && (s.iteration + 1) % k == 0 {
                    let path = dir.join(format!("seed{seed}_iter{:05}.qrlp", s.iteration + 1));
                    if let Err(e) = policy.save(&path) {
                        eprintln!("checkpoint {}: {e}", path.display());
                    }
                }
            }
        })?;
        outcome.policy.save(a.out.join(format!("seed{seed}_final.qrlp")))?;
        fs::write(a.out.join(format!("seed{seed}_best.qrlp")), &outcome.best_snapshot)?;
        write_curve(&outcome.curve, BufWriter::new(File::create(a.out.join(format!("seed{seed}_curve.csv")))?))?;
        println!("seed {seed}: final position cost {:.4}", trainer::final_position_cost(&outcome.curve));
        runs.push((seed, outcome.curve));
    }
    fs::write(a.out.join("config.toml"), RunConfig { train: cfg, ..Default::default() }.to_toml()?)?;
    if runs.len() > 1 {
        let mut f = BufWriter::new(File::create(a.out.join("seeds.csv"))?);
        writeln!(f, "rank,seed,final_position_cost")?;
        for (rank, (seed, c)) in trainer::rank_seeds(&runs, runs.len()).iter().enumerate() {
            writeln!(f, "{},{seed},{c}", rank + 1)?;
        }
        let top: Vec<String> = trainer::rank_seeds(&runs, 2).iter().map(|(s, _)| s.to_string()).collect();
        println!("best seeds: {}", top.join(", "));
    }
    Ok(())
}

fn write_log(log: &FlightLog, path: &Path) -> Result<()> {
    log.write_csv(BufWriter::new(File::create(path)?))?;
    Ok(())
}

fn simulate(a: SimArgs) -> Result<()> {
    let policy = a.common.policy()?;
    let setup = a.common.setup()?;
    let goal = if a.figure_eight { GoalSpec::FigureEight(eval::track_curve()) } else { GoalSpec::default() };
    let mut cfg = EnvConfig { duration: a.duration, goal, thrust_cap: setup.thrust_cap, ..EnvConfig::default() };
    if !setup.noise {
        cfg = cfg.noiseless();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    let start = cfg.goal.at(0.0).position;
    let state = if a.figure_eight { QuadState::at_rest(start) } else { sample_initial_state(&cfg.init, &start, &mut rng) };
    let flight = eval::fly(&policy, cfg, setup.params.clone(), state, setup.seed)?;
    write_log(&flight.log, &a.out)?;
    println!(
        "{} ticks, total cost {:.4}{}",
        flight.log.len(),
        flight.log.total_cost(),
        if flight.diverged { ", diverged" } else { "" }
    );
    if let Some(p) = &a.plot {
        plot_positions(&flight.log, p, "flight")?;
    }
    Ok(())
}

fn emit(header: &str, row: &str, out: &Option<PathBuf>) -> Result<()> {
    println!("{header}\n{row}");
    if let Some(path) = out {
        fs::write(path, format!("{header}\n{row}\n"))?;
    }
    Ok(())
}

fn eval_hover(a: EvalArgs) -> Result<()> {
    let policy = a.common.policy()?;
    let (rep, flight) = eval::eval_hover(&policy, &a.common.setup()?, &eval::SpikeConfig::default())?;
    emit(eval::HOVER_HEADER, &rep.csv_row(), &a.out)?;
    let f_o = rep.f_o.map(|f| format!("{f:.1} Hz")).unwrap_or_else(|| "none".into());
    eprintln!("hover error {:.3} m, angular error {:.2} deg, oscillation {f_o}", rep.e_h, rep.e_theta);
    if let Some(p) = &a.log {
        write_log(&flight.log, p)?;
    }
    if let Some(p) = &a.plot {
        plot_positions(&flight.log, p, "hover")?;
    }
    Ok(())
}

fn eval_track(a: EvalArgs) -> Result<()> {
    let policy = a.common.policy()?;
    let (rep, flight) = eval::eval_track(&policy, &a.common.setup()?)?;
    emit(eval::TRACK_HEADER, &rep.csv_row(), &a.out)?;
    eprintln!("tracking error {:.3} m (std {:.3} m)", rep.e_t, rep.std);
    if let Some(p) = &a.log {
        write_log(&flight.log, p)?;
    }
    if let Some(p) = &a.plot {
        plot_positions(&flight.log, p, "figure-eight")?;
    }
    Ok(())
}

fn eval_recovery(a: RecoveryArgs) -> Result<()> {
    let policy = a.common.policy()?;
    let cfg = a.config.load()?.eval;
    let n = a.attempts.unwrap_or(cfg.throw_attempts);
    let rep = eval::recovery_battery(&policy, &a.common.setup()?, &cfg.throws, n)?;
    emit(eval::RECOVERY_HEADER, &rep.csv_row(), &a.out)?;
    let pct = |r: Option<f64>| r.map(|x| format!("{:.0}%", 100.0 * x)).unwrap_or_else(|| "n/a".into());
    eprintln!(
        "recovered {}/{} ({}); moderate attitude {}, severe attitude {}",
        rep.recoveries,
        rep.attempts,
        pct(rep.rate()),
        pct(rep.moderate_rate()),
        pct(rep.severe_rate())
    );
    Ok(())
}

fn grid(a: GridArgs) -> Result<()> {
    let mut policies = Vec::new();
    for p in &a.snapshots {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        policies.push((name, PolicyNet::load(p).with_context(|| format!("loading {}", p.display()))?));
    }
    let rows = eval::grid_eval(&policies, &Platform::ALL, a.seed, a.noise, &eval::SpikeConfig::default())?;
    eval::write_grid(&rows, BufWriter::new(File::create(&a.out)?))?;
    eval::write_grid(&rows, std::io::stdout())?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    if a.name.is_empty() || !a.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        bail!("function name must be a C identifier");
    }
    let policy = PolicyNet::load(&a.snapshot)?;
    fs::write(&a.out, policy.export_c(&a.name))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn plot_positions(log: &FlightLog, path: &Path, title: &str) -> Result<()> {
    if log.is_empty() {
        bail!("empty flight log");
    }
    let t_end = log.rows.last().map(|r| r.time).unwrap_or(1.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &log.rows {
        for v in r.state.position.iter().chain(r.goal.position.iter()) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let pad = 0.05 * (hi - lo).max(0.1);
    let root = SVGBackend::new(path, (900, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..t_end, (lo - pad)..(hi + pad))?;
    chart.configure_mesh().x_desc("t [s]").y_desc("position [m]").draw()?;
    let colors = [RED, GREEN, BLUE];
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let c = colors[axis];
        chart
            .draw_series(LineSeries::new(log.rows.iter().map(|r| (r.time, r.state.position[axis])), c))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 15, y)], c));
        chart.draw_series(LineSeries::new(
            log.rows.iter().map(|r| (r.time, r.goal.position[axis])),
            c.mix(0.35).stroke_width(1),
        ))?;
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}
