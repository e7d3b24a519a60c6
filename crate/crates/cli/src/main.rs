use std::io::{IsTerminal, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use microclimate::orchestrator::{run_pipeline, AdvisorMode, PipelineState, ProbeSpec, RemoteConfig, RunConfig};
use microclimate::weather::RealtimeConfig;

mod inspect;

const EXIT_PIPELINE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "microclimate",
    version,
    about = "Urban microclimate audits from STL geometry and EPW weather"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the audit pipeline; mitigation runs only if the query asks for it.
    Run(RunArgs),
    /// Run the baseline, then material mitigation rounds with a comparative report.
    Mitigate(MitigateArgs),
    /// Print a building index, weather summary or provenance table.
    #[command(subcommand)]
    Inspect(InspectTarget),
}

#[derive(Subcommand, Debug)]
enum InspectTarget {
    /// Directory of STL buildings.
    Geometry { dir: PathBuf },
    /// EPW weather file.
    Epw { file: PathBuf },
    /// params_snapshot.json from a run.
    Snapshot { file: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AdvisorArg {
    Deterministic,
    Remote,
    Off,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Directory of per-building STL files.
    #[arg(long)]
    geometry: PathBuf,
    /// EPW climate file.
    #[arg(long)]
    climate: PathBuf,
    /// Task in plain language.
    #[arg(long, conflicts_with = "query_file")]
    query: Option<String>,
    /// File holding the task; `-` reads stdin. Stdin is also read when no
    /// query is given and it is not a terminal.
    #[arg(long)]
    query_file: Option<PathBuf>,
    /// Output directory [default: runs/run_YYYYmmdd_HHMMSS].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replacement defaults file.
    #[arg(long)]
    defaults: Option<PathBuf>,
    /// User overrides (highest priority).
    #[arg(long)]
    overrides: Option<PathBuf>,
    /// Random seed; the built-in default is fixed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = AdvisorArg::Deterministic)]
    advisor: AdvisorArg,
    /// Extra PET probe as `x,y,hour`; repeatable.
    #[arg(long = "probe", value_parser = parse_probe)]
    probes: Vec<(f64, f64, u32)>,
}

#[derive(Args, Debug)]
struct MitigateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Mitigation rounds; 0 runs the baseline only.
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// Parameter delta applied instead of the material proposal.
    #[arg(long)]
    delta: Option<PathBuf>,
}

fn parse_probe(s: &str) -> Result<(f64, f64, u32), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, h] = parts[..] else {
        return Err("expected x,y,hour".into());
    };
    let x: f64 = x.parse().map_err(|_| format!("bad x '{x}'"))?;
    let y: f64 = y.parse().map_err(|_| format!("bad y '{y}'"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad hour '{h}'"))?;
    if !(x.is_finite() && y.is_finite()) || !(1..=24).contains(&h) {
        return Err("coordinates must be finite and hour in 1..=24".into());
    }
    Ok((x, y, h))
}

/// Problems with the invocation itself, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Pipeline failure already reported on stderr; exit code 1.
#[derive(Debug)]
struct Failed;

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("pipeline failed")
    }
}

impl std::error::Error for Failed {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn read_query(args: &RunArgs) -> anyhow::Result<String> {
    let text = match (&args.query, &args.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) if p.as_os_str() == "-" => read_stdin()?,
        (None, Some(p)) => {
            std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?
        }
        (None, None) if !std::io::stdin().is_terminal() => read_stdin()?,
        (None, None) => return Err(usage("no query: pass --query, --query-file or pipe it on stdin")),
    };
    if text.trim().is_empty() {
        return Err(usage("query is empty"));
    }
    Ok(text)
}

fn read_stdin() -> anyhow::Result<String> {
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .context("reading query from stdin")?;
    Ok(s)
}

fn require(path: &Path, what: &str, dir: bool) -> anyhow::Result<()> {
    let ok = if dir { path.is_dir() } else { path.is_file() };
    if !ok {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn run_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    require(&args.geometry, "geometry directory", true)?;
    require(&args.climate, "climate file", false)?;
    for (p, what) in [(&args.defaults, "defaults file"), (&args.overrides, "overrides file")] {
        if let Some(p) = p {
            require(p, what, false)?;
        }
    }
    let query = read_query(args)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(chrono::Local::now().format("run_%Y%m%d_%H%M%S").to_string()));
    let mut c = RunConfig::new(query, &args.geometry, &args.climate, out);
    c.defaults_path = args.defaults.clone();
    c.overrides_path = args.overrides.clone();
    c.seed = args.seed;
    c.advisor = match args.advisor {
        AdvisorArg::Deterministic => AdvisorMode::Deterministic,
        AdvisorArg::Remote => AdvisorMode::Remote,
        AdvisorArg::Off => AdvisorMode::Off,
    };
    if matches!(args.advisor, AdvisorArg::Remote) {
        c.remote = Some(RemoteConfig::from_env().map_err(usage)?);
    }
    c.probes = args
        .probes
        .iter()
        .enumerate()
        .map(|(i, &(x, y, hour))| ProbeSpec {
            label: format!("probe_{}", i + 1),
            x,
            y,
            hour,
        })
        .collect();
    c.realtime = RealtimeConfig::default().with_env();
    Ok(c)
}

fn summarize(state: &PipelineState, out: &Path) -> anyhow::Result<()> {
    let report = out.join("report.md");
    if let Some(f) = &state.error {
        eprintln!("error: {} stage failed: {}", f.stage, f.message);
        eprintln!("diagnostics report: {}", report.display());
        return Err(Failed.into());
    }
    println!("report: {}", report.display());
    if let Some(b) = &state.baseline {
        if let Some(p) = b.peak {
            println!(
                "peak PET: {:.2} °C at ({:.1}, {:.1}) m, hour {}",
                p.pet_c, p.x, p.y, p.hour
            );
        }
        if let Some(t) = b.total_cooling_kwh {
            println!("envelope cooling energy: {t:.1} kWh");
        }
    }
    if let Some(d) = &state.delta {
        if let Some(pct) = d.total_reduction_pct {
            println!(
                "mitigation: {pct:.1} % less cooling energy, albedo penalty {}",
                d.albedo_penalty
            );
        }
    }
    for w in &state.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let c = run_config(&args)?;
            let state = run_pipeline(&c);
            summarize(&state, &c.out_dir)
        }
        Command::Mitigate(args) => {
            let mut c = run_config(&args.run)?;
            if let Some(d) = &args.delta {
                require(d, "delta file", false)?;
            }
            c.mitigate = true;
            c.rounds = args.rounds;
            c.delta_path = args.delta.clone();
            let state = run_pipeline(&c);
            summarize(&state, &c.out_dir)
        }
        Command::Inspect(target) => {
            let mut out = std::io::stdout().lock();
            match target {
                InspectTarget::Geometry { dir } => inspect::geometry(&dir, &mut out),
                InspectTarget::Epw { file } => inspect::epw(&file, &mut out),
                InspectTarget::Snapshot { file } => inspect::snapshot(&file, &mut out),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}\n\nRun `microclimate --help` for usage.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            if !e.is::<Failed>() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(EXIT_PIPELINE)
        }
    }
}
