mod manifest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hsst::constants::{
    constant_k_and_ktilde, constant_n_hp, constant_n_hp_monte_carlo, constant_n_rp, constant_n_rp_monte_carlo,
    k_quadrature, ktilde_quadrature, ConstantName, ConstantReport,
};
use hsst::cutoff::{parse_c_grid, separation_profile};
use hsst::dual_sim::{simulate_coupled_tau, simulate_tau, SimConfig, DEFAULT_STEP_BUDGET};
use hsst::moments::{closed_form_report, green_moments, variance_quadrature, MomentReport};
use hsst::output::{csv_float, SCHEMA_VERSION};
use hsst::verify::{self, VerifyLevel};
use hsst::{Family, ManifoldSpec};

use manifest::{write_with_manifest, RunManifest};

#[derive(Parser)]
#[command(name = "hsst", version, about = "Covering-time moments, constants, simulation and cutoff profiles")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "HC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean and variance of the covering time.
    Moments(MomentsArgs),
    /// Asymptotic variance constants.
    Constants(ConstantsArgs),
    /// Simulated hitting times of the dual radius.
    Simulate(SimulateArgs),
    /// Empirical separation profile around the cutoff time.
    Profile(ProfileArgs),
    /// Cross-route invariant suite.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MomentMethodArg {
    Closed,
    Quad,
    Green,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ConstantMethodArg {
    Closed,
    Quad,
    Mc,
}

#[derive(Args, Serialize)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Serialize)]
struct SpecArgs {
    /// sphere, rp, cp or hp.
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    n: u32,
}

impl SpecArgs {
    fn spec(&self) -> hsst::Result<ManifoldSpec> {
        ManifoldSpec::new(self.family, self.n)
    }
}

#[derive(Args, Serialize)]
struct SimArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    paths: u64,
    #[arg(long, default_value_t = 1e-5)]
    dt: f64,
    /// Starting radius of the dual process.
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    step_budget: u64,
}

impl SimArgs {
    fn config(&self, spec: ManifoldSpec) -> hsst::Result<SimConfig> {
        Ok(SimConfig::new(spec, self.dt, self.eps, self.seed, self.paths)?.with_step_budget(self.step_budget))
    }
}

#[derive(Args, Serialize)]
struct MomentsArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "quad")]
    method: MomentMethodArg,
    /// Relative tolerance of the quadrature route.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Grid size of the Green-operator route.
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ConstantsArgs {
    /// k, ktilde, n_hp or n_rp.
    #[arg(long, value_parser = parse_constant)]
    name: ConstantName,
    #[arg(long, value_enum, default_value = "quad")]
    method: ConstantMethodArg,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 10_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Simulate the coupled pair instead of the dual radius alone.
    #[arg(long)]
    coupled: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Window offsets as start:stop:step.
    #[arg(long, default_value = "-3:6:1", allow_hyphen_values = true)]
    c_grid: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Deterministic checks only.
    #[arg(long)]
    quick: bool,
    /// Also write the results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: hsst::Error| e.to_string())
}

fn parse_constant(s: &str) -> Result<ConstantName, String> {
    s.parse().map_err(|e: hsst::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Numerical(String),
    Other(String),
}

impl From<hsst::Error> for Failure {
    fn from(e: hsst::Error) -> Self {
        use hsst::Error::*;
        match e {
            Domain { .. } | UnsupportedIndex { .. } | InvalidArgument(_) => Failure::Usage(e.to_string()),
            StepBudget { .. } | Containment { .. } => Failure::Numerical(e.to_string()),
            _ if e.is_numerical() => Failure::Numerical(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

/// Writes to `--out` with a manifest, or to stdout.
fn emit<A: Serialize>(command: &str, args: &A, out: &Option<PathBuf>, body: Vec<u8>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let manifest = RunManifest::new(command, serde_json::to_value(args)?, vec![path.clone()]);
            write_with_manifest(path, &body, &manifest)?;
        }
        None => std::io::stdout().write_all(&body)?,
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(csv_float).unwrap_or_default()
}

fn moments(args: &MomentsArgs) -> Result<(), Failure> {
    let spec = args.spec.spec()?;
    let report: MomentReport = match args.method {
        MomentMethodArg::Closed => closed_form_report(spec)?,
        MomentMethodArg::Quad => variance_quadrature(spec, args.tol)?,
        MomentMethodArg::Green => green_moments(spec, args.grid)?,
    };
    let body = match args.output.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({ "schema_version": SCHEMA_VERSION, "report": report }))? + "\n"
        }
        Format::Csv => format!(
            "family,n,method,mean,variance,second_moment,error_estimate\n{},{},{},{},{},{},{}\n",
            spec.family(),
            spec.n(),
            serde_json::to_value(report.method)?.as_str().unwrap_or_default(),
            csv_float(report.mean),
            opt(report.variance),
            opt(report.second_moment),
            csv_float(report.error_estimate),
        ),
    };
    emit("moments", args, &args.output.out, body.into_bytes())
}

fn constants(args: &ConstantsArgs) -> Result<(), Failure> {
    use ConstantMethodArg::*;
    use ConstantName::*;
    let report: ConstantReport = match (args.name, args.method) {
        (K, Closed) => constant_k_and_ktilde()?.k,
        (Ktilde, Closed) => constant_k_and_ktilde()?.ktilde,
        (K, Quad) => k_quadrature(args.tol)?,
        (Ktilde, Quad) => ktilde_quadrature(args.tol)?,
        (NHp, Quad) => constant_n_hp(args.tol)?,
        (NRp, Quad) => constant_n_rp(args.tol)?,
        (NHp, Mc) => constant_n_hp_monte_carlo(args.samples, args.seed)?,
        (NRp, Mc) => constant_n_rp_monte_carlo(args.samples, args.seed)?,
        (name, method) => {
            return Err(Failure::Usage(format!(
                "method `{}` is not available for {}",
                serde_json::to_value(method)?.as_str().unwrap_or_default(),
                serde_json::to_value(name)?.as_str().unwrap_or_default()
            )))
        }
    };
    let body = match args.output.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({ "schema_version": SCHEMA_VERSION, "report": report }))? + "\n"
        }
        Format::Csv => format!(
            "name,value,method,error_estimate\n{},{},{},{}\n",
            serde_json::to_value(report.name)?.as_str().unwrap_or_default(),
            csv_float(report.value),
            serde_json::to_value(report.method)?.as_str().unwrap_or_default(),
            csv_float(report.error_estimate),
        ),
    };
    emit("constants", args, &args.output.out, body.into_bytes())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = args.sim.config(args.spec.spec()?)?;
    let batch = if args.coupled {
        simulate_coupled_tau(&cfg)?
    } else {
        simulate_tau(&cfg)?
    };
    let body = match args.output.format {
        Format::Json => {
            let doc = json!({ "schema_version": SCHEMA_VERSION, "summary": batch.summary(), "batch": batch });
            (serde_json::to_string_pretty(&doc)? + "\n").into_bytes()
        }
        Format::Csv => {
            let mut v = Vec::new();
            batch.write_csv(&mut v)?;
            v
        }
    };
    emit("simulate", args, &args.output.out, body)
}

fn profile(args: &ProfileArgs) -> Result<(), Failure> {
    let spec = args.spec.spec()?;
    let grid = parse_c_grid(&args.c_grid)?;
    let p = separation_profile(spec, &grid, &args.sim.config(spec)?)?;
    let body = match args.output.format {
        Format::Json => (p.to_json()? + "\n").into_bytes(),
        Format::Csv => {
            let mut v = Vec::new();
            p.write_csv(&mut v)?;
            v
        }
    };
    emit("profile", args, &args.output.out, body)
}

fn verify_cmd(args: &VerifyArgs) -> Result<bool, Failure> {
    let level = if args.quick { VerifyLevel::Quick } else { VerifyLevel::Full };
    let results = verify::run(level);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{:<4}  {:<width$}  {}  ({:.1}s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
            r.seconds
        );
    }
    let all = results.iter().all(|r| r.passed);
    println!("{} of {} checks passed", results.iter().filter(|r| r.passed).count(), results.len());
    if let Some(path) = &args.out {
        let doc = json!({ "schema_version": SCHEMA_VERSION, "level": level, "all_passed": all, "results": results });
        let manifest = RunManifest::new("verify", serde_json::to_value(args)?, vec![path.clone()]);
        write_with_manifest(path, (serde_json::to_string_pretty(&doc)? + "\n").as_bytes(), &manifest)?;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Moments(a) => moments(a),
        Command::Constants(a) => constants(a),
        Command::Simulate(a) => simulate(a),
        Command::Profile(a) => profile(a),
        Command::Verify(a) => match verify_cmd(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
