//! `rnm`: exact and Monte Carlo edge statistics of hard-edge radial ensembles.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rnm_core::gap::{ginibre_rescaled_intensity_with, order_table, rescaled_order_table};
use rnm_core::limits::{
    compare_with_limit, default_alpha, default_xi_grid, hard_edge_sum_decomposition, parse_grid, sup_deviation,
    ComparisonRow, LimitLaw, RescalingKind,
};
use rnm_core::sampler::{sample_statistic, Statistic};
use rnm_core::specfun::{log_gamma, plasma_h, reg_gamma_pair, std_normal_cdf};
use rnm_core::table::fmt_g15;
use rnm_core::{build_mode_table, EnsembleSpec, Error, RadialPotential};

#[derive(Parser)]
#[command(name = "rnm", version, about = "Edge statistics of hard-edge radial random normal matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the droplet {r0, R0, delta, C0} as JSON.
    Droplet(PotentialArg),
    /// Gap probability P[max |z_j| <= x] on an x-grid or rescaled ξ-grid.
    Gap(DistArgs),
    /// CDF of the l-th largest modulus.
    Order(OrderArgs),
    /// Rescaled one-point intensity of hard-edge Ginibre (power:1) against H(2ζ).
    Intensity(IntensityArgs),
    /// Band decomposition of the hard-edge gamma sum.
    Sum(SumArgs),
    /// Monte Carlo samples of the rescaled l-th largest modulus.
    Sample(SampleArgs),
    /// sup |F_n - limit| over a ξ-grid for each n in a list.
    Converge(ConvergeArgs),
    /// Evaluate a special function at a point.
    Specfun(SpecfunArgs),
}

#[derive(Args)]
struct PotentialArg {
    /// `power:<d>`, `evenpoly:<c0>,<c1>,...` or the JSON form.
    #[arg(long, default_value = "power:1")]
    potential: String,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rescaling {
    Radial,
    Power,
}

impl From<Rescaling> for RescalingKind {
    fn from(r: Rescaling) -> Self {
        match r {
            Rescaling::Radial => RescalingKind::Radial,
            Rescaling::Power => RescalingKind::Power,
        }
    }
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long)]
    n: u64,
    /// Raw radius grid, `<value>` or `<min>:<max>:<step>`.
    #[arg(long, conflicts_with_all = ["xi", "rescaled"], allow_hyphen_values = true)]
    x: Option<String>,
    /// Rescaled grid, `<value>` or `<min>:<max>:<step>`.
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    /// Use the rescaled variable; the grid defaults to -8:0:0.05.
    #[arg(long)]
    rescaled: bool,
    /// Emit `xi,finite_n,limit,abs_err` rows instead of `grid,prob`.
    #[arg(long, conflicts_with = "x")]
    compare_limit: bool,
    #[arg(long, value_enum, default_value_t = Rescaling::Radial)]
    rescaling: Rescaling,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[command(flatten)]
    dist: DistArgs,
}

#[derive(Args)]
struct IntensityArgs {
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value = "-4:0:0.25", allow_hyphen_values = true)]
    zeta: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SumArgs {
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    /// Band cut α; defaults to log n.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    potential: PotentialArg,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Master seed of the per-trial streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    potential: PotentialArg,
    /// Comma-separated list of n.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    l: u32,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long, value_enum, default_value_t = Rescaling::Radial)]
    rescaling: Rescaling,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Function {
    /// -log(1 - Φ(x)).
    #[value(name = "H")]
    H,
    #[value(name = "Phi")]
    Phi,
    #[value(name = "lgamma")]
    Lgamma,
    /// Regularized lower incomplete gamma P(a, x).
    #[value(name = "P")]
    P,
    /// Regularized upper incomplete gamma Q(a, x).
    #[value(name = "Q")]
    Q,
}

#[derive(Args)]
struct SpecfunArgs {
    #[arg(long, value_enum)]
    eval: Function,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    /// Shape parameter for P and Q.
    #[arg(long)]
    a: Option<f64>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        return report(f);
    }
    let res = match cli.command {
        Command::Droplet(a) => cmd_droplet(a),
        Command::Gap(a) => cmd_dist(a, 1),
        Command::Order(a) => cmd_dist(a.dist, a.l),
        Command::Intensity(a) => cmd_intensity(a),
        Command::Sum(a) => cmd_sum(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Specfun(a) => cmd_specfun(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Failure::Numerical(m) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> CmdResult {
    let Ok(v) = std::env::var("RNM_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("RNM_THREADS must be a non-negative integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))
}

fn parse_potential(s: &str) -> Result<RadialPotential, Failure> {
    Ok(s.parse::<RadialPotential>()?)
}

fn ensemble(potential: &str, n: u64) -> Result<EnsembleSpec, Failure> {
    Ok(EnsembleSpec::new(parse_potential(potential)?, n)?)
}

fn emit(output: &Output, body: &str) -> CmdResult {
    match &output.out {
        Some(path) => fs::write(path, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn json_line<T: serde::Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_droplet(a: PotentialArg) -> CmdResult {
    let droplet = parse_potential(&a.potential)?.droplet()?;
    print!("{}", json_line(&droplet));
    Ok(())
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("xi,finite_n,limit,abs_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g15(r.xi),
            fmt_g15(r.finite_n),
            fmt_g15(r.limit),
            fmt_g15(r.abs_err)
        ));
    }
    out
}

fn cmd_dist(a: DistArgs, l: u32) -> CmdResult {
    let spec = ensemble(&a.potential.potential, a.n)?;
    let table = build_mode_table(&spec)?;
    let body = if let Some(x) = &a.x {
        let grid = parse_grid(x)?;
        let t = order_table(&spec, &table, l, &grid)?;
        match a.output.format {
            Format::Csv => t.to_csv(),
            Format::Json => json_line(&t),
        }
    } else {
        let grid = match &a.xi {
            Some(xi) => parse_grid(xi)?,
            None => default_xi_grid(),
        };
        if a.compare_limit {
            let rows = compare_with_limit(&spec, &table, LimitLaw::new(l)?, a.rescaling.into(), &grid)?;
            match a.output.format {
                Format::Csv => comparison_csv(&rows),
                Format::Json => json_line(&rows),
            }
        } else {
            if !matches!(a.rescaling, Rescaling::Radial) {
                return Err(Failure::Usage("--rescaling applies with --compare-limit only".into()));
            }
            let t = rescaled_order_table(&spec, &table, l, &grid)?;
            match a.output.format {
                Format::Csv => t.to_csv(),
                Format::Json => json_line(&t),
            }
        }
    };
    emit(&a.output, &body)
}

fn cmd_intensity(a: IntensityArgs) -> CmdResult {
    let potential = parse_potential(&a.potential.potential)?;
    if potential.power_d() != Some(1.0) {
        return Err(Failure::Usage(format!("intensity is available for power:1 only, got {potential}")));
    }
    let spec = EnsembleSpec::new(potential, a.n)?;
    let table = build_mode_table(&spec)?;
    let grid = parse_grid(&a.zeta)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &z in &grid {
        rows.push((z, ginibre_rescaled_intensity_with(&spec, &table, z)?, plasma_h(2.0 * z)));
    }
    let body = match a.output.format {
        Format::Csv => {
            let mut out = String::from("zeta,intensity,plasma_h\n");
            for (z, r, h) in &rows {
                out.push_str(&format!("{},{},{}\n", fmt_g15(*z), fmt_g15(*r), fmt_g15(*h)));
            }
            out
        }
        Format::Json => {
            let v: Vec<_> =
                rows.iter().map(|(z, r, h)| serde_json::json!({"zeta": z, "intensity": r, "plasma_h": h})).collect();
            json_line(&v)
        }
    };
    emit(&a.output, &body)
}

fn cmd_sum(a: SumArgs) -> CmdResult {
    let alpha = a.alpha.unwrap_or_else(|| default_alpha(a.n));
    let s = hard_edge_sum_decomposition(a.n, a.d, a.t, alpha)?;
    let body = match a.output.format {
        Format::Csv => format!(
            "n,d,t,alpha,S_n,eps1,eps2,total\n{},{},{},{},{},{},{},{}\n",
            a.n,
            fmt_g15(a.d),
            fmt_g15(a.t),
            fmt_g15(alpha),
            fmt_g15(s.s_n),
            fmt_g15(s.eps1),
            fmt_g15(s.eps2),
            fmt_g15(s.total())
        ),
        Format::Json => json_line(&serde_json::json!({
            "n": a.n, "d": a.d, "t": a.t, "alpha": alpha,
            "S_n": s.s_n, "eps1": s.eps1, "eps2": s.eps2, "total": s.total(),
        })),
    };
    emit(&a.output, &body)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    let spec = ensemble(&a.potential.potential, a.n)?;
    let table = build_mode_table(&spec)?;
    let stat = if a.l == 1 { Statistic::Max } else { Statistic::Order(a.l) };
    let sample = sample_statistic(&spec, &table, stat, a.trials, a.seed)?;
    let body = match a.output.format {
        Format::Csv => sample.to_csv(),
        Format::Json => {
            let mut meta: serde_json::Value = serde_json::from_str(&sample.metadata_json()).expect("metadata is JSON");
            meta["values"] = serde_json::json!(sample.values);
            json_line(&meta)
        }
    };
    emit(&a.output, &body)?;
    if let (Some(out), Format::Csv) = (&a.output.out, a.output.format) {
        fs::write(sidecar_path(out), sample.metadata_json() + "\n")?;
    }
    Ok(())
}

fn cmd_converge(a: ConvergeArgs) -> CmdResult {
    let potential = parse_potential(&a.potential.potential)?;
    let grid = match &a.xi {
        Some(xi) => parse_grid(xi)?,
        None => default_xi_grid(),
    };
    let law = LimitLaw::new(a.l)?;
    let mut rows = Vec::with_capacity(a.n.len());
    for &n in &a.n {
        let spec = EnsembleSpec::new(potential.clone(), n)?;
        let table = build_mode_table(&spec)?;
        rows.push((n, sup_deviation(&spec, &table, law, a.rescaling.into(), &grid)?));
    }
    let body = match a.output.format {
        Format::Csv => {
            let mut out = String::from("n,sup_deviation\n");
            for (n, s) in &rows {
                out.push_str(&format!("{n},{}\n", fmt_g15(*s)));
            }
            out
        }
        Format::Json => {
            let v: Vec<_> = rows.iter().map(|(n, s)| serde_json::json!({"n": n, "sup_deviation": s})).collect();
            json_line(&v)
        }
    };
    emit(&a.output, &body)
}

fn cmd_specfun(a: SpecfunArgs) -> CmdResult {
    let shape = || a.a.ok_or_else(|| Failure::Usage("--a is required for P and Q".into()));
    let v = match a.eval {
        Function::H => plasma_h(a.x),
        Function::Phi => std_normal_cdf(a.x),
        Function::Lgamma => log_gamma(a.x)?,
        Function::P => reg_gamma_pair(shape()?, a.x)?.0,
        Function::Q => reg_gamma_pair(shape()?, a.x)?.1,
    };
    println!("{}", fmt_g15(v));
    Ok(())
}
