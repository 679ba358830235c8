//! `arcsnake` command-line front end.

mod check;
mod config;
mod output;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arcsnake::arc_model::{arcs_to_motors, motors_to_arcs, RobotGeometry};
use arcsnake::locomotion_sim::{simulate_obstacle, simulate_serpentine, AnchorRule, Trajectory};
use arcsnake::obstacle_gait::{hold_plan, reset_plan, VelocitySchedule};
use arcsnake::segmentation_fit::{fit_segmentation, sweep_segments, FitResult};
use arcsnake::serpenoid::{serpentine_motor_trajectory, time_grid, Segmentation, SerpenoidParams};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<arcsnake::Error> for CliError {
    fn from(e: arcsnake::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o failure: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "arcsnake", version, about = "Arc-chain snake robot toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the segment lengths for one segment count.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Number of segments.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit every segment count in a range, e.g. `--n 2..5`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "2..5")]
        n: String,
    },
    /// Write motor commands.
    Gait {
        #[command(subcommand)]
        gait: GaitCommand,
    },
    /// Run the kinematic simulator and write the trajectory.
    Simulate {
        #[command(subcommand)]
        mode: SimCommand,
    },
    /// Run the built-in invariant suite.
    Check,
}

#[derive(Subcommand)]
enum GaitCommand {
    /// Rack extensions over time for the serpenoid gait.
    Serpentine(SerpentineArgs),
    /// Rack velocity schedule for shape-hold propulsion.
    Obstacle(ObstacleArgs),
}

#[derive(Subcommand)]
enum SimCommand {
    Serpentine {
        #[command(flatten)]
        args: SerpentineArgs,
        /// Also write one SVG per frame.
        #[arg(long)]
        svg: bool,
        /// Place the body on the path by its head or its tail.
        #[arg(long)]
        align: Option<String>,
    },
    Obstacle {
        #[command(flatten)]
        args: ObstacleArgs,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the environment and the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Total robot length [m].
    #[arg(long)]
    length: Option<f64>,
    /// Body width [m].
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha0: Option<f64>,
    /// Serpenoid quarter period [m].
    #[arg(long)]
    l: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// grid or nelder_mead.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fit to the worst of this many phases over one gait cycle.
    #[arg(long)]
    phases: Option<usize>,
}

#[derive(Args)]
struct SerpentineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Comma-separated segment lengths; skips fitting.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<f64>>,
}

#[derive(Args)]
struct ObstacleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Duration of the hold phase [s].
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    v_left: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    v_right: Option<f64>,
    /// Reset all units to even spacing after the hold, at this speed [m/s].
    #[arg(long)]
    reset_speed: Option<f64>,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let set = |slot: &mut Option<f64>, v: Option<f64>| {
        if v.is_some() {
            *slot = v;
        }
    };
    set(&mut cfg.robot.l_all_m, common.length);
    set(&mut cfg.robot.h_m, common.h);
    set(&mut cfg.serpenoid.alpha0_rad, common.alpha0);
    set(&mut cfg.serpenoid.l_m, common.l);
    set(&mut cfg.serpenoid.omega_rad_s, common.omega);
    if common.optimizer.is_some() {
        cfg.fit.optimizer = common.optimizer.clone();
    }
    if common.samples.is_some() {
        cfg.fit.samples = common.samples;
    }
    if common.seed.is_some() {
        cfg.fit.seed = common.seed;
    }
    if common.phases.is_some() {
        cfg.fit.phases = common.phases;
        cfg.fit.phase_objective = Some("cycle_max".into());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, common: &Common) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir(common.out.as_deref());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Validation(format!("cannot create {}: {e}", path.display()))
    })?))
}

fn fit_or_fixed(
    cfg: &RunConfig,
    geom: &RobotGeometry,
    p: &SerpenoidParams,
) -> Result<Segmentation, CliError> {
    if let Some(seg) = cfg.fixed_segmentation(geom)? {
        return Ok(seg);
    }
    let fit_cfg = cfg.fit_config()?;
    let t = cfg.fit_time(p, &fit_cfg)?;
    let fit = fit_segmentation(geom, p, geom.segment_count(), t, &fit_cfg)?;
    require_converged(geom.segment_count(), &fit)?;
    Ok(fit.segmentation)
}

fn require_converged(n: usize, fit: &FitResult) -> Result<(), CliError> {
    if fit.converged {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "fit for N = {n} did not converge"
        )))
    }
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<usize>, CliError> {
    let bad = || CliError::Validation(format!("invalid segment range {s:?} (expected a..b)"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn cmd_fit(common: &Common, n: Option<usize>) -> Result<(), CliError> {
    let mut cfg = load(common)?;
    if n.is_some() {
        cfg.robot.n = n;
    }
    let geom = cfg.geometry()?;
    let p = cfg.serpenoid()?;
    let fit_cfg = cfg.fit_config()?;
    let t = cfg.fit_time(&p, &fit_cfg)?;
    let fit = fit_segmentation(&geom, &p, geom.segment_count(), t, &fit_cfg)?;
    let dir = out_dir(&cfg, common)?;
    output::write_sweep_csv(
        create(&dir.join("fit.csv"))?,
        &[(geom.segment_count(), fit.clone())],
    )?;
    let json = serde_json::to_string_pretty(&fit).expect("fit result serializes");
    fs::write(dir.join("fit.json"), json + "\n")?;
    println!(
        "N = {}: rmse {} m, lengths [{}]",
        geom.segment_count(),
        output::fmt_num(fit.rmse),
        fit.segmentation
            .lengths()
            .iter()
            .map(|&v| output::fmt_num(v))
            .collect::<Vec<_>>()
            .join(", ")
    );
    require_converged(geom.segment_count(), &fit)
}

fn cmd_sweep(common: &Common, range: &str) -> Result<(), CliError> {
    let cfg = load(common)?;
    let range = parse_range(range)?;
    let geom = cfg.geometry()?;
    let p = cfg.serpenoid()?;
    let fit_cfg = cfg.fit_config()?;
    let t = cfg.fit_time(&p, &fit_cfg)?;
    let mut rows = Vec::new();
    for (n, result) in sweep_segments(&geom, &p, range, t, &fit_cfg) {
        rows.push((n, result?));
    }
    let dir = out_dir(&cfg, common)?;
    let path = dir.join("sweep.csv");
    output::write_sweep_csv(create(&path)?, &rows)?;
    println!("wrote {}", path.display());
    for (n, fit) in &rows {
        require_converged(*n, fit)?;
    }
    Ok(())
}

fn apply_time(cfg: &mut RunConfig, dt: Option<f64>, t_end: Option<f64>) {
    if dt.is_some() {
        cfg.sim.dt_s = dt;
    }
    if t_end.is_some() {
        cfg.sim.duration_s = t_end;
    }
}

fn serpentine_setup(
    args: &SerpentineArgs,
) -> Result<(RunConfig, RobotGeometry, SerpenoidParams, Segmentation), CliError> {
    let mut cfg = load(&args.common)?;
    if args.n.is_some() {
        cfg.robot.n = args.n;
    }
    if args.lengths.is_some() {
        cfg.fit.lengths_m = args.lengths.clone();
    }
    apply_time(&mut cfg, args.dt, args.t_end);
    let geom = cfg.geometry()?;
    let p = cfg.require_omega()?;
    p.check_period(&geom)?;
    cfg.sim_config(AnchorRule::PathFollowing)?;
    let seg = fit_or_fixed(&cfg, &geom, &p)?;
    Ok((cfg, geom, p, seg))
}

fn cmd_gait_serpentine(args: &SerpentineArgs) -> Result<(), CliError> {
    let (cfg, geom, p, seg) = serpentine_setup(args)?;
    let sim = cfg.sim_config(AnchorRule::PathFollowing)?;
    let times = time_grid(sim.duration, sim.dt)?;
    let traj = serpentine_motor_trajectory(&geom, &p, &seg, &times)?;
    let dir = out_dir(&cfg, &args.common)?;
    let path = dir.join("gait_serpentine.csv");
    output::write_motor_csv(create(&path)?, &traj)?;
    println!("wrote {} ({} rows)", path.display(), traj.len());
    Ok(())
}

fn obstacle_setup(
    args: &ObstacleArgs,
) -> Result<
    (
        RunConfig,
        RobotGeometry,
        arcsnake::arc_model::ArcChain,
        arcsnake::obstacle_gait::HoldRange,
        VelocitySchedule,
    ),
    CliError,
> {
    let mut cfg = load(&args.common)?;
    if args.n.is_some() {
        cfg.robot.n = args.n;
    }
    apply_time(&mut cfg, args.dt, args.t_end);
    let h = &mut cfg.hold;
    for (slot, v) in [(&mut h.j, args.j), (&mut h.k, args.k)] {
        if v.is_some() {
            *slot = v;
        }
    }
    for (slot, v) in [
        (&mut h.v_left_m_s, args.v_left),
        (&mut h.v_right_m_s, args.v_right),
        (&mut h.reset_speed_m_s, args.reset_speed),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    let geom = cfg.geometry()?;
    let range = cfg.hold_range(&geom)?;
    let chain = cfg.initial_chain(&geom, &range)?;
    let sim = cfg.sim_config(AnchorRule::PinnedHold)?;
    let (vl, vr) = cfg.hold_rates();
    let mut schedule = hold_plan(&geom, &chain, &range, vl, vr, sim.duration, sim.dt)?;
    if let Some(speed) = cfg.hold.reset_speed_m_s {
        let d0 = arcs_to_motors(&geom, &chain)?;
        let held = motors_to_arcs(&geom, &schedule.integrate(&d0))?;
        let units: Vec<usize> = (1..geom.segment_count()).collect();
        schedule.extend(&reset_plan(&geom, &held, &units, speed, sim.dt)?)?;
    }
    Ok((cfg, geom, chain, range, schedule))
}

fn cmd_gait_obstacle(args: &ObstacleArgs) -> Result<(), CliError> {
    let (cfg, _, _, _, schedule) = obstacle_setup(args)?;
    let dir = out_dir(&cfg, &args.common)?;
    let path = dir.join("gait_obstacle.csv");
    output::write_schedule_csv(create(&path)?, &schedule)?;
    println!("wrote {} ({} rows)", path.display(), schedule.len());
    Ok(())
}

fn write_trajectory(
    dir: &Path,
    name: &str,
    traj: &Trajectory,
    body_width: f64,
    svg: bool,
) -> Result<(), CliError> {
    let path = dir.join(format!("{name}.csv"));
    output::write_trajectory_csv(create(&path)?, traj)?;
    let (dx, dy) = traj.head_displacement();
    println!(
        "wrote {} ({} frames, head displacement {} m, {} m)",
        path.display(),
        traj.len(),
        output::fmt_num(dx),
        output::fmt_num(dy)
    );
    if svg {
        let svg_dir = dir.join(format!("{name}_svg"));
        fs::create_dir_all(&svg_dir)?;
        for (i, doc) in output::trajectory_svgs(traj, body_width).iter().enumerate() {
            fs::write(svg_dir.join(format!("frame_{i:05}.svg")), doc)?;
        }
        println!("wrote {}", svg_dir.display());
    }
    Ok(())
}

fn cmd_simulate(mode: &SimCommand) -> Result<(), CliError> {
    match mode {
        SimCommand::Serpentine { args, svg, align } => {
            let (mut cfg, geom, p, seg) = serpentine_setup(args)?;
            if align.is_some() {
                cfg.sim.alignment = align.clone();
            }
            let sim = cfg.sim_config(AnchorRule::PathFollowing)?;
            let traj = simulate_serpentine(&geom, &p, &seg, &sim)?;
            let dir = out_dir(&cfg, &args.common)?;
            write_trajectory(&dir, "simulate_serpentine", &traj, geom.body_width(), *svg)
        }
        SimCommand::Obstacle { args, svg } => {
            let (cfg, geom, chain, range, schedule) = obstacle_setup(args)?;
            let mut sim = cfg.sim_config(AnchorRule::PinnedHold)?;
            sim.duration = schedule.end_time().max(sim.dt);
            let traj = simulate_obstacle(&geom, &chain, &schedule, &range, &sim)?;
            let dir = out_dir(&cfg, &args.common)?;
            write_trajectory(&dir, "simulate_obstacle", &traj, geom.body_width(), *svg)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit { common, n } => cmd_fit(common, *n),
        Command::Sweep { common, n } => cmd_sweep(common, n),
        Command::Gait { gait } => match gait {
            GaitCommand::Serpentine(args) => cmd_gait_serpentine(args),
            GaitCommand::Obstacle(args) => cmd_gait_obstacle(args),
        },
        Command::Simulate { mode } => cmd_simulate(mode),
        Command::Check => {
            if check::run_suite() {
                Ok(())
            } else {
                Err(CliError::Numerical("invariant check failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprintln!("error: missing subcommand (fit, sweep, gait, simulate, check)");
                return ExitCode::from(1);
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}
