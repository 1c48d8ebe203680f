//! `teachkit` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs::{File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dynamics::{rollout, PendulumParams, State};
use crate::error::Error;
use crate::experiments::{
    analyze_study, default_omega_grid, run_sweep, write_sweep_csv, SweepConfig,
};
use crate::learner::ridge_fit;
use crate::rng;
use crate::server::{router, AppState};
use crate::session::{replay_log, Assignment, EventLog, SessionStore, StoreConfig};
use crate::skills::SkillId;
use crate::teaching::{
    canonical_phi, generate_demo_pair, risk_derivative, risk_variance, score_states, NoiseModel,
};

#[derive(Debug, Parser)]
#[command(
    name = "teachkit",
    version,
    about = "Machine teaching for pendulum motor skills"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Teach over a grid of demonstration angles and noise levels; write CSV.
    Sweep(SweepArgs),
    /// Print variance risk and its derivative over a grid of angles.
    Risk(RiskArgs),
    /// Teaching-quality score of two via points.
    Score(ScoreArgs),
    /// Simulate a target or learnt controller and write its trajectory as CSV.
    Rollout(RolloutArgs),
    /// Run the teaching-session HTTP service.
    Serve(ServeArgs),
    /// Analyze a session event log and write the study report as JSON.
    Analyze(AnalyzeArgs),
    /// Generate canonical demonstration pairs as JSON lines.
    DemoGen(DemoGenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SkillArg {
    S1,
    S2,
}

impl From<SkillArg> for SkillId {
    fn from(s: SkillArg) -> Self {
        match s {
            SkillArg::S1 => SkillId::S1,
            SkillArg::S2 => SkillId::S2,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "s1")]
    pub skill: SkillArg,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.15])]
    pub sigmas: Vec<f64>,
    /// Angles in radians; defaults to π/36, 2π/36, …, π/2.
    #[arg(long, value_delimiter = ',')]
    pub omegas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',')]
    pub omegas: Option<Vec<f64>>,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// q1 v1 q2 v2
    #[arg(num_args = 4, required = true, allow_negative_numbers = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long, value_enum, default_value = "s1")]
    pub skill: SkillArg,
    /// Learn from the optimal pair (ω = π/2) instead of rolling out the target.
    #[arg(long, conflicts_with = "omega")]
    pub optimal: bool,
    /// Learn from the canonical pair at this angle.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    /// Write every N-th state (10 gives one row per millisecond).
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AssignmentArg {
    Random,
    Caller,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Event log; replayed on start, appended to while serving.
    #[arg(long, default_value = "events.jsonl")]
    pub log: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "random")]
    pub assignment: AssignmentArg,
    /// Enable the per-session report endpoint.
    #[arg(long)]
    pub experimenter: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoGenArgs {
    #[arg(long, value_enum, default_value = "s1")]
    pub skill: SkillArg,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Config(_) | Error::UnknownSkill(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn open_out(path: &PathBuf) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn sweep(a: SweepArgs) -> CliResult {
    let cfg = SweepConfig {
        skill: a.skill.into(),
        omegas: a.omegas.unwrap_or_else(default_omega_grid),
        sigmas: a.sigmas,
        trials: a.trials as usize,
        lambda: a.lambda,
        seed: a.seed,
        duration: a.duration,
        ..SweepConfig::default()
    };
    cfg.validate()?;
    let rows = run_sweep(&cfg)?;
    let mut out = open_out(&a.out)?;
    write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn risk(a: RiskArgs) -> CliResult {
    let mut omegas = a.omegas.unwrap_or_else(default_omega_grid);
    omegas.sort_by(f64::total_cmp);
    for &o in &omegas {
        canonical_phi(o)?;
    }
    let mut out = open_out(&a.out)?;
    writeln!(out, "omega,risk,derivative")?;
    for o in omegas {
        writeln!(
            out,
            "{:.9},{:.9e},{:.9e}",
            o,
            risk_variance(o, a.sigma, a.lambda)?,
            risk_derivative(o, a.sigma, a.lambda)?
        )?;
    }
    out.flush()?;
    Ok(())
}

fn score(a: ScoreArgs) -> CliResult {
    let v = &a.values;
    let states = [State::new(v[0], v[1]), State::new(v[2], v[3])];
    if !states.iter().all(State::is_finite) {
        return Err(CliError::Usage("via points must be finite".into()));
    }
    println!("{:.1}", score_states(states));
    Ok(())
}

fn rollout_cmd(a: RolloutArgs) -> CliResult {
    let spec = SkillId::from(a.skill).spec();
    let p = PendulumParams::default();
    let omega = if a.optimal {
        Some(std::f64::consts::FRAC_PI_2)
    } else {
        a.omega
    };
    let w = match omega {
        None => spec.w_star,
        Some(omega) => {
            let noise = NoiseModel::new(a.sigma)?;
            let demos = generate_demo_pair(omega, &spec.w_star, &noise, &mut rng::seeded(a.seed))?;
            ridge_fit(&demos.feature_matrix(), &demos.actions, a.lambda)?
        }
    };
    let traj = rollout(&w, spec.x0, a.duration, &p)?;
    let mut out = open_out(&a.out)?;
    traj.write_csv(&mut out, a.stride as usize)?;
    out.flush()?;
    Ok(())
}

fn demo_gen(a: DemoGenArgs) -> CliResult {
    let spec = SkillId::from(a.skill).spec();
    let noise = NoiseModel::new(a.sigma)?;
    let mut out = open_out(&a.out)?;
    for i in 0..a.count {
        let demos = generate_demo_pair(
            a.omega,
            &spec.w_star,
            &noise,
            &mut rng::derive(a.seed, &[i]),
        )?;
        writeln!(
            out,
            "{}",
            serde_json::to_string(&demos).expect("demos serialize")
        )?;
    }
    out.flush()?;
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let file =
        File::open(&a.log).map_err(|e| CliError::Runtime(format!("{}: {e}", a.log.display())))?;
    let sessions = replay_log(BufReader::new(file))?;
    if sessions.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: event log contains no sessions",
            a.log.display()
        )));
    }
    let records: Vec<_> = sessions.iter().map(|s| s.report()).collect();
    let report = analyze_study(&records)?;
    let mut out = open_out(&a.out)?;
    serde_json::to_writer_pretty(&mut out, &report).expect("report serializes");
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    NoiseModel::new(a.sigma)?;
    let restored = match File::open(&a.log) {
        Ok(f) => replay_log(BufReader::new(f))?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let sink = OpenOptions::new().create(true).append(true).open(&a.log)?;
    let config = StoreConfig {
        seed: a.seed,
        noise_sigma: a.sigma,
        assignment: match a.assignment {
            AssignmentArg::Random => Assignment::Random,
            AssignmentArg::Caller => Assignment::Caller,
        },
        pendulum: PendulumParams::default(),
    };
    let store = Arc::new(SessionStore::with_sessions(
        config,
        EventLog::new(sink),
        restored,
    ));
    let app = router(AppState {
        store,
        experimenter: a.experimenter,
    });
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        println!("port {}", addr.port());
        io::stdout().flush()?;
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

pub fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Risk(a) => risk(a),
        Command::Score(a) => score(a),
        Command::Rollout(a) => rollout_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Analyze(a) => analyze(a),
        Command::DemoGen(a) => demo_gen(a),
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}
