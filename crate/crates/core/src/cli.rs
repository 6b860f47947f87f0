//! Command-line front end: `run`, `sweep` and `compare`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::example::{ExampleError, Preset};
use crate::sim::{
    compare_records, compute_metrics, simulate_output_feedback, simulate_state_feedback, ConfigError, MetricsError,
    ScenarioConfig, SimFailure, TrajectoryRecord,
};
use crate::trajio::{self, format_f64, ErrorRecord, RunSummary, TrajIoError};

#[derive(Debug, Parser)]
#[command(name = "obsproj", version, about = "Observer-projection output-feedback simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one preset and write its trajectory CSV plus a `.summary` file.
    Run(RunArgs),
    /// Run a preset over several ρ values in parallel, with a
    /// state-feedback reference for the recovery deviation.
    Sweep(SweepArgs),
    /// Compare two trajectory CSVs sampled on the same time grid.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Feedback {
    /// Controller fed by the true state.
    State,
    /// Controller fed by the observer estimate.
    Output,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// Integration step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Estimate projection.
    #[arg(long, value_enum)]
    pub projection: Option<Toggle>,
    /// Initial estimate, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xhat0: Option<Vec<f64>>,
    /// Log every k-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Threshold for the convergence-time metric.
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub preset: Preset,
    /// Observer parameter; defaults to the preset's first ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value = "output")]
    pub feedback: Feedback,
    /// Trajectory CSV path; the summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value = "fig5")]
    pub preset: Preset,
    /// ρ values, comma separated; defaults to the preset's list.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(TrajIoError),
    #[error(transparent)]
    Parse(TrajIoError),
    #[error(transparent)]
    GridMismatch(#[from] MetricsError),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::Io(_) => "IoError",
            CliError::Parse(_) => "ParseError",
            CliError::GridMismatch(_) => "GridMismatch",
        }
    }
}

impl From<TrajIoError> for CliError {
    fn from(e: TrajIoError) -> Self {
        match e {
            TrajIoError::Parse { .. } | TrajIoError::Csv(_) => CliError::Parse(e),
            TrajIoError::Io { .. } => CliError::Io(e),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::InvalidConfig(e.to_string())
    }
}

impl From<ExampleError> for CliError {
    fn from(e: ExampleError) -> Self {
        CliError::InvalidConfig(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(TrajIoError::Io { path: path.display().to_string(), source: e })
}

/// Builds and validates the scenario for one ρ with flag overrides applied.
pub fn build_scenario(preset: Preset, rho: f64, ov: &Overrides) -> Result<ScenarioConfig, CliError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(CliError::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    let mut cfg = preset.scenario_with_rho(rho)?;
    if let Some(dt) = ov.dt {
        cfg.dt = dt;
    }
    if let Some(t) = ov.t_final {
        cfg.t_final = t;
    }
    if ov.projection == Some(Toggle::Off) {
        cfg.set = None;
        cfg.label.push_str("-noproj");
    }
    if let Some(x) = &ov.xhat0 {
        cfg.xhat0 = x.clone();
    }
    if let Some(k) = ov.stride {
        cfg.log_stride = k;
    }
    if !(ov.eps > 0.0) {
        return Err(CliError::InvalidConfig(format!("eps must be positive, got {}", ov.eps)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(cfg: &ScenarioConfig, feedback: Feedback) -> (TrajectoryRecord, Option<ErrorRecord>) {
    let result = match feedback {
        Feedback::State => simulate_state_feedback(cfg),
        Feedback::Output => simulate_output_feedback(cfg),
    };
    match result {
        Ok(traj) => (traj, None),
        Err(SimFailure { error, partial }) => {
            (*partial, Some(ErrorRecord { name: error.name().to_string(), message: error.to_string() }))
        }
    }
}

fn summarize(
    cfg: &ScenarioConfig,
    traj: &TrajectoryRecord,
    reference: Option<&TrajectoryRecord>,
    eps: f64,
    error: Option<ErrorRecord>,
) -> RunSummary {
    // A failed run logs fewer rows than its reference; recovery is then
    // undefined rather than an error.
    let reference = reference.filter(|r| r.len() == traj.len());
    let metrics = compute_metrics(traj, reference, eps)
        .or_else(|_| compute_metrics(traj, None, eps))
        .expect("metrics without a reference cannot fail");
    RunSummary { label: cfg.label.clone(), rho: cfg.rho, rows: traj.len(), metrics, error }
}

/// `<out>` with its extension replaced by `summary`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary")
}

fn print_summary(out: &mut dyn Write, path: &Path, s: &RunSummary) -> std::io::Result<()> {
    let m = &s.metrics;
    writeln!(out, "{} (rho = {}): {} rows -> {}", s.label, s.rho, s.rows, path.display())?;
    writeln!(out, "  peak |xhat|      {:.6e}", m.peak_xhat)?;
    match m.conv_time {
        Some(t) => writeln!(out, "  conv time (eps={}) {:.6}", m.eps, t)?,
        None => writeln!(out, "  conv time (eps={}) not reached", m.eps)?,
    }
    writeln!(out, "  final |chi|      {:.6e}", m.final_norm)?;
    writeln!(out, "  max |v|          {:.6e}", m.max_abs_v)?;
    if let Some(d) = m.recovery_dev {
        writeln!(out, "  recovery dev     {:.6e}", d)?;
    }
    if let Some(e) = &s.error {
        writeln!(out, "  error            {}: {}", e.name, e.message)?;
    }
    Ok(())
}

fn run(args: &RunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let rho = args.rho.unwrap_or(args.preset.rhos()[0]);
    let mut cfg = build_scenario(args.preset, rho, &args.overrides)?;
    if args.feedback == Feedback::State {
        cfg.label.push_str("-state");
    }
    let (traj, error) = simulate(&cfg, args.feedback);
    trajio::write_csv_file(&traj, &args.out)?;
    let summary = summarize(&cfg, &traj, None, args.overrides.eps, error);
    summary.write_file(&summary_path(&args.out))?;
    print_summary(out, &args.out, &summary).map_err(|e| io_error(&args.out, e))?;
    Ok(summary.exit_code())
}

fn rho_tag(rho: f64) -> String {
    format!("{rho}").replace('.', "p")
}

fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let rhos = args.rho.clone().unwrap_or_else(|| args.preset.rhos().to_vec());
    if rhos.is_empty() {
        return Err(CliError::InvalidConfig("no rho values given".into()));
    }
    let configs =
        rhos.iter().map(|&rho| build_scenario(args.preset, rho, &args.overrides)).collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_error(&args.out_dir, e))?;

    // One state-feedback reference per distinct time grid.
    let mut grids: BTreeMap<(u64, u64, usize), ScenarioConfig> = BTreeMap::new();
    for cfg in &configs {
        grids.entry((cfg.dt.to_bits(), cfg.t_final.to_bits(), cfg.log_stride)).or_insert_with(|| cfg.clone());
    }

    let (runs, references) = thread::scope(|s| {
        let run_handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || simulate(cfg, Feedback::Output))).collect();
        let ref_handles: Vec<_> =
            grids.iter().map(|(key, cfg)| (*key, s.spawn(move || simulate(cfg, Feedback::State)))).collect();
        let runs: Vec<_> = run_handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
        let refs: BTreeMap<_, _> =
            ref_handles.into_iter().map(|(k, h)| (k, h.join().expect("worker panicked"))).collect();
        (runs, refs)
    });

    let preset = args.preset.id();
    let multi_grid = references.len() > 1;
    let mut ref_paths = BTreeMap::new();
    for (key, (traj, _)) in &references {
        let name = if multi_grid {
            format!("{preset}_state_feedback_dt{}.csv", rho_tag(f64::from_bits(key.0)))
        } else {
            format!("{preset}_state_feedback.csv")
        };
        let path = args.out_dir.join(name);
        trajio::write_csv_file(traj, &path)?;
        ref_paths.insert(*key, path);
    }

    let mut table = String::from("rho,peak_xhat,conv_time_eps,final_norm,max_abs_v,recovery_dev,status,error\n");
    let mut exit = 0;
    for (cfg, (traj, error)) in configs.iter().zip(runs) {
        let key = (cfg.dt.to_bits(), cfg.t_final.to_bits(), cfg.log_stride);
        let (reference, ref_error) = &references[&key];
        let usable_ref = ref_error.is_none().then_some(reference);
        let summary = summarize(cfg, &traj, usable_ref, args.overrides.eps, error);
        let path = args.out_dir.join(format!("{preset}_rho{}.csv", rho_tag(cfg.rho)));
        trajio::write_csv_file(&traj, &path)?;
        summary.write_file(&summary_path(&path))?;
        print_summary(out, &path, &summary).map_err(|e| io_error(&path, e))?;

        let m = &summary.metrics;
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            format_f64(cfg.rho),
            format_f64(m.peak_xhat),
            opt(m.conv_time),
            format_f64(m.final_norm),
            format_f64(m.max_abs_v),
            opt(m.recovery_dev),
            if summary.error.is_some() { "error" } else { "ok" },
            summary.error.as_ref().map_or("", |e| e.name.as_str()),
        ));
        exit = exit.max(summary.exit_code());
    }
    for (key, (_, err)) in &references {
        if let Some(e) = err {
            writeln!(out, "reference {}: {}: {}", ref_paths[key].display(), e.name, e.message)
                .map_err(|e| io_error(&args.out_dir, e))?;
            exit = 1;
        }
    }
    let table_path = args.out_dir.join(format!("{preset}_summary.csv"));
    std::fs::write(&table_path, &table).map_err(|e| io_error(&table_path, e))?;
    writeln!(out, "summary -> {}", table_path.display()).map_err(|e| io_error(&table_path, e))?;
    Ok(exit)
}

fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let a = trajio::read_csv_file(&args.a)?;
    let b = trajio::read_csv_file(&args.b)?;
    let c = compare_records(&a, &b)?;
    let mut text = format!("sup_dev={}\n", format_f64(c.sup_dev));
    for (name, d) in &c.per_column {
        text.push_str(&format!("max_dev_{name}={}\n", format_f64(*d)));
    }
    out.write_all(text.as_bytes()).map_err(|e| io_error(&args.a, e))?;
    Ok(0)
}

/// Executes a parsed command line. Simulation failures are reported in the
/// summary and yield exit code 1; configuration, I/O and parse problems are
/// returned as errors.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run(a) => run(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Compare(a) => compare(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("obsproj").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn parses_run_flags() {
        let cli = parse(&[
            "run",
            "--preset",
            "fig3",
            "--out",
            "a.csv",
            "--projection",
            "off",
            "--xhat0",
            "-0.5,0.25",
            "--rho",
            "0.002",
        ]);
        let Command::Run(a) = cli.command else { panic!() };
        assert_eq!(a.preset, Preset::Fig3);
        assert_eq!(a.rho, Some(0.002));
        assert_eq!(a.overrides.projection, Some(Toggle::Off));
        assert_eq!(a.overrides.xhat0, Some(vec![-0.5, 0.25]));
        assert_eq!(a.feedback, Feedback::Output);
    }

    #[test]
    fn parses_sweep_list() {
        let cli = parse(&["sweep", "--rho", "0.2,0.05,0.01", "--out-dir", "d"]);
        let Command::Sweep(a) = cli.command else { panic!() };
        assert_eq!(a.preset, Preset::Fig5);
        assert_eq!(a.rho, Some(vec![0.2, 0.05, 0.01]));
    }

    #[test]
    fn rejects_unknown_preset() {
        assert!(Cli::try_parse_from(["obsproj", "run", "--preset", "fig9", "--out", "a"]).is_err());
    }

    #[test]
    fn overrides_are_validated() {
        let ov = Overrides { dt: Some(1e-3), eps: 1e-2, ..Default::default() };
        let err = build_scenario(Preset::Fig3, 1e-3, &ov).unwrap_err();
        assert_eq!(err.name(), "InvalidConfig");

        let ov = Overrides { xhat0: Some(vec![0.0]), eps: 1e-2, ..Default::default() };
        assert_eq!(build_scenario(Preset::Fig2a, 0.2, &ov).unwrap_err().name(), "InvalidConfig");
        assert!(build_scenario(Preset::Fig2a, -1.0, &Overrides { eps: 1e-2, ..Default::default() }).is_err());
    }

    #[test]
    fn projection_off_drops_set() {
        let ov = Overrides { projection: Some(Toggle::Off), eps: 1e-2, ..Default::default() };
        assert!(build_scenario(Preset::Fig2b, 0.05, &ov).unwrap().set.is_none());
    }

    #[test]
    fn rho_tags_are_filename_safe() {
        assert_eq!(rho_tag(0.05), "0p05");
        assert_eq!(rho_tag(1e-3), "0p001");
    }
}
