use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jiqlab::acceptance::Suite;
use jiqlab::config::{parse_dist_arg, ConfigError, PolicySection, RawConfig, ScenarioConfig, SweepSection};
use jiqlab::curve::Grid;
use jiqlab::dist::{DistKind, DistParams, ServiceDistribution};
use jiqlab::fluid::{default_grid, equilibrium_point, fluid_transient, mg1_bound};
use jiqlab::measure::{default_pair_grid, independence_distance};
use jiqlab::output::{append_csv, write_manifest, CurveRow, IndependenceRow, Manifest, CURVES_CSV, INDEPENDENCE_CSV, MANIFEST_JSON};
use jiqlab::rng::{stream, Stream};
use jiqlab::sweep::{expand_sweep, run_all, run_scenario, write_outputs, RunError, SweepResult};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "jiqlab", version, about = "Join-Idle-Queue load-balancing simulation lab")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; the JIQLAB_OUT environment variable takes precedence.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// `kind` or `kind:key=value,...`, e.g. `pareto:alpha=1.5`.
    #[arg(long)]
    dist: Option<String>,
    /// jiq, jsq_d, random or jiq_biased.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Simulate(Overrides),
    /// Run a grid of scenarios over n, seeds and lambda.
    Sweep {
        /// Comma-separated system sizes.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long)]
        dist: Option<String>,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Equilibrium point and, with --t, the infinite-server trajectory.
    Fluid {
        #[arg(long, default_value_t = 0.4)]
        lambda: f64,
        #[arg(long, default_value = "exponential")]
        dist: String,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
    },
    /// Monte-Carlo estimate of the M/GI/1 dominating curve.
    Mg1Bound {
        #[arg(long, default_value_t = 0.4)]
        lambda: f64,
        #[arg(long, default_value = "exponential")]
        dist: String,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
    },
    /// Independence statistic of tracked servers in one scenario.
    Independence(Overrides),
    /// Run the acceptance suite.
    Validate,
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn default_raw() -> RawConfig {
    RawConfig {
        scenario_id: Some("run".into()),
        n: Some(100),
        lambda: Some(0.4),
        horizon: Some(2000.0),
        ..RawConfig::default()
    }
}

fn load_raw(cli: &Cli) -> Result<RawConfig, Failure> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::from_file(p)?,
        None => default_raw(),
    };
    if let Some(s) = cli.seed {
        raw.seed = Some(s);
    }
    Ok(raw)
}

fn apply(raw: &mut RawConfig, o: &Overrides) -> Result<(), Failure> {
    if let Some(n) = o.n {
        raw.n = Some(n);
        raw.tracked_groups = None;
    }
    if let Some(l) = o.lambda {
        raw.lambda = Some(l);
    }
    if let Some(h) = o.horizon {
        raw.horizon = Some(h);
        raw.warmup = None;
    }
    if let Some(d) = &o.dist {
        raw.dist = parse_dist_arg(d).map_err(|e| Failure::Config(format!("--dist: {e}")))?;
    }
    if let Some(p) = &o.policy {
        raw.policy = PolicySection { kind: p.clone(), ..PolicySection::default() };
    }
    Ok(())
}

fn out_dir(cli: &Cli) -> PathBuf {
    std::env::var_os("JIQLAB_OUT").map(PathBuf::from).unwrap_or_else(|| cli.out.clone())
}

fn service_from_arg(arg: &str) -> Result<ServiceDistribution, Failure> {
    let section = parse_dist_arg(arg).map_err(|e| Failure::Config(format!("--dist: {e}")))?;
    let kind: DistKind = section.kind.parse().map_err(Failure::Config)?;
    DistParams::from_raw(kind, &section.params)
        .and_then(|p| ServiceDistribution::new(p, true))
        .map_err(|e| Failure::Config(format!("--dist: {e}")))
}

fn print_results(result: &SweepResult) {
    println!("scenario_id,n,lambda,busy_frac,wait_prob,sup_dist_to_star,events");
    for o in &result.outcomes {
        let s = &o.summary;
        println!(
            "{},{},{},{:.5},{:.5},{:.5},{}",
            s.scenario_id, s.n, s.lambda, s.busy_frac_mean, s.wait_prob, s.sup_dist_to_star, s.events_processed
        );
    }
    for (id, e) in &result.failures {
        eprintln!("{id}: {e}");
    }
}

fn write_curves(dir: &Path, command: &str, rows: &[CurveRow]) -> Result<(), Failure> {
    append_csv(&dir.join(CURVES_CSV), rows).map_err(runtime)?;
    write_manifest(&dir.join(MANIFEST_JSON), &Manifest::new(command, String::new())).map_err(runtime)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let dir = out_dir(cli);
    match &cli.command {
        Command::Simulate(o) => {
            let mut raw = load_raw(cli)?;
            apply(&mut raw, o)?;
            raw.sweep = None;
            let cfg = ScenarioConfig::from_raw(raw)?;
            let result = SweepResult { outcomes: vec![run_scenario(&cfg, false)?], failures: Vec::new() };
            print_results(&result);
            write_outputs(&dir, "simulate", &cfg, &result).map_err(runtime)?;
        }
        Command::Sweep { n, seeds, lambda, dist, policy, horizon } => {
            let mut raw = load_raw(cli)?;
            let o = Overrides { dist: dist.clone(), policy: policy.clone(), horizon: *horizon, ..Overrides::default() };
            apply(&mut raw, &o)?;
            let mut axes: SweepSection = raw.sweep.clone().unwrap_or_default();
            if !n.is_empty() {
                axes.n = n.clone();
            }
            if !seeds.is_empty() {
                axes.seeds = seeds.clone();
            }
            if !lambda.is_empty() {
                axes.lambda = lambda.clone();
            }
            let base = ScenarioConfig::from_raw(raw)?;
            let configs = expand_sweep(&base, &axes)?;
            let result = run_all(&configs, cli.workers, false)?;
            print_results(&result);
            write_outputs(&dir, "sweep", &base, &result).map_err(runtime)?;
            if !result.failures.is_empty() {
                return Err(Failure::Runtime(format!("{} of {} runs failed", result.failures.len(), configs.len())));
            }
        }
        Command::Fluid { lambda, dist, t } => {
            let service = service_from_arg(dist)?;
            let grid: Grid = default_grid(*lambda, &service).map_err(|e| Failure::Config(e.to_string()))?;
            let eq = equilibrium_point(*lambda, &service, &grid).map_err(|e| Failure::Config(e.to_string()))?;
            let id = format!("fluid-l{lambda}-{}", service.label());
            let mut rows = CurveRow::from_curve(&id, &eq);
            println!("equilibrium w=0: {:.6}", eq.at_zero());
            for &time in t {
                let tr = fluid_transient(*lambda, &service, time, &grid).map_err(|e| Failure::Config(e.to_string()))?;
                println!("transient t={time} w=0: {:.6}", tr.at_zero());
                rows.extend(CurveRow::from_curve(&format!("{id}-t{time}"), &tr));
            }
            write_curves(&dir, "fluid", &rows)?;
        }
        Command::Mg1Bound { lambda, dist, cycles } => {
            let service = service_from_arg(dist)?;
            let grid = default_grid(*lambda, &service).map_err(|e| Failure::Config(e.to_string()))?;
            let mut rng = stream(cli.seed.unwrap_or(1), Stream::Oracle);
            let bound = mg1_bound(*lambda, &service, &grid, *cycles, &mut rng).map_err(|e| Failure::Config(e.to_string()))?;
            let se = bound.stderr().map_or(f64::NAN, |s| s[0]);
            println!("x** w=0: {:.6} +- {:.6} (stderr, {cycles} cycles)", bound.at_zero(), se);
            let id = format!("mg1-l{lambda}-{}", service.label());
            write_curves(&dir, "mg1-bound", &CurveRow::from_curve(&id, &bound))?;
        }
        Command::Independence(o) => {
            let mut raw = load_raw(cli)?;
            apply(&mut raw, o)?;
            raw.sweep = None;
            let cfg = ScenarioConfig::from_raw(raw)?;
            let outcome = run_scenario(&cfg, true)?;
            let trace = outcome.trace.as_ref().expect("trace kept");
            let report = independence_distance(trace, cfg.warmup, &default_pair_grid()).map_err(runtime)?;
            println!(
                "D = {:.6} over {} samples (m = {}, {} groups){}",
                report.distance,
                report.samples,
                cfg.tracked_servers,
                cfg.tracked_groups,
                if report.symmetric { "" } else { "; policy not symmetric, exploratory" }
            );
            append_csv(&dir.join(INDEPENDENCE_CSV), &IndependenceRow::from_report(&cfg.scenario_id, &report)).map_err(runtime)?;
        }
        Command::Validate => {
            let results = Suite::new(cli.workers).run_all(|r| println!("{r}"));
            let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
            if !failed.is_empty() {
                return Err(Failure::Acceptance(format!("failed criteria: {}", failed.join(", "))));
            }
            println!("all {} criteria passed", results.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
    }
}
