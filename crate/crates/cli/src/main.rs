use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ncdist::pipeline::{self, GridSpec, JobConfig, JobReport, Mode, EXIT_CONFIG};
use ncdist::SpectralDensity;

#[derive(Parser)]
#[command(name = "ncdist", version, about = "Spectral densities of polynomials and rational expressions in free random variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the density of a selfadjoint expression on a grid.
    Density(JobArgs),
    /// Compute the density and compare it with a random-matrix histogram.
    Validate(JobArgs),
    /// Exact moments from the combinatorial oracle.
    Moments(JobArgs),
}

#[derive(Args, Clone, Default)]
struct JobArgs {
    /// JSON job file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Expression in x1 … xd, e.g. "x1*x2+x2*x1+x1^2".
    #[arg(long)]
    expr: Option<String>,
    /// Variable distributions: a JSON file or an inline JSON object keyed x1 … xd.
    #[arg(long)]
    vars: Option<String>,
    /// Grid as min,max,points.
    #[arg(long)]
    grid: Option<String>,
    /// Height above the real axis used for Stieltjes inversion.
    #[arg(long)]
    eps: Option<f64>,
    /// Imaginary filler in the pencil argument.
    #[arg(long)]
    eps_pencil: Option<f64>,
    /// Cancel the first-order smoothing bias with a second solve at eps/2.
    #[arg(long)]
    richardson: bool,
    /// Density CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Histogram CSV path (validate).
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Compare solver moments with the oracle.
    #[arg(long)]
    oracle_check: bool,
    /// Highest moment order for comparisons.
    #[arg(long)]
    order: Option<usize>,
    /// Word or polynomial whose moment is requested (moments).
    #[arg(long)]
    word: Option<String>,
    #[arg(long)]
    rmt_n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random-matrix models as a JSON list, one per variable.
    #[arg(long)]
    rmt_vars: Option<String>,
    #[arg(long)]
    ks_threshold: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') || arg.trim_start().starts_with('[') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn parse_grid(s: &str) -> Result<GridSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("grid must be min,max,points");
    }
    Ok(GridSpec { min: parts[0].parse()?, max: parts[1].parse()?, points: parts[2].parse()? })
}

fn build_config(args: &JobArgs, mode: Mode) -> Result<JobConfig> {
    let mut cfg = match &args.config {
        Some(path) => JobConfig::from_json(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?,
        None => JobConfig::default(),
    };
    cfg.mode = mode;
    if let Some(e) = &args.expr {
        cfg.expression = e.clone();
    }
    if let Some(v) = &args.vars {
        cfg.variables = serde_json::from_str(&read_json_arg(v)?).context("variable specs")?;
        cfg.num_vars = None;
    }
    if let Some(g) = &args.grid {
        cfg.grid = Some(parse_grid(g)?);
    }
    if let Some(e) = args.eps {
        cfg.eps_z = e;
    }
    if let Some(e) = args.eps_pencil {
        cfg.eps_pencil = e;
    }
    cfg.richardson |= args.richardson;
    cfg.oracle_check |= args.oracle_check;
    if let Some(k) = args.order {
        cfg.oracle_order = k;
    }
    if let Some(w) = &args.word {
        cfg.word = Some(w.clone());
    }
    if let Some(n) = args.rmt_n {
        cfg.rmt.n = n;
    }
    if let Some(t) = args.trials {
        cfg.rmt.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.rmt.seed = s;
    }
    if let Some(v) = &args.rmt_vars {
        cfg.rmt.ensembles = Some(serde_json::from_str(&read_json_arg(v)?).context("random-matrix models")?);
    }
    if let Some(k) = args.ks_threshold {
        cfg.ks_threshold = k;
    }
    if let Some(p) = &args.out {
        cfg.output.density_csv = Some(p.display().to_string());
    }
    if let Some(p) = &args.histogram {
        cfg.output.histogram_csv = Some(p.display().to_string());
    }
    if let Some(p) = &args.report {
        cfg.output.report_json = Some(p.display().to_string());
    }
    if cfg.expression.is_empty() && cfg.word.is_none() {
        bail!("an expression is required (--expr or config)");
    }
    if cfg.variables.is_empty() {
        bail!("variable distributions are required (--vars or config)");
    }
    Ok(cfg)
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_density(d: &SpectralDensity, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "rho", "status", "iterations", "residual"])?;
    for p in &d.points {
        w.write_record([
            fmt(p.t),
            p.rho.map(fmt).unwrap_or_default(),
            p.status.as_str().to_string(),
            p.iterations.to_string(),
            fmt(p.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(cfg: &JobConfig, report: &JobReport) -> Result<()> {
    if let Some(d) = &report.density {
        match &cfg.output.density_csv {
            Some(path) => write_density(d, fs::File::create(path).with_context(|| format!("creating {path}"))?)?,
            None if cfg.mode != Mode::Moments => write_density(d, io::stdout().lock())?,
            None => {}
        }
    }
    if let (Some(path), Some(h)) = (&cfg.output.histogram_csv, report.validation.as_ref().and_then(|v| v.histogram.as_ref())) {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {path}"))?;
        w.write_record(["bin_left", "bin_right", "count", "density_estimate"])?;
        for (l, r, c, d) in h.rows() {
            w.write_record([fmt(l), fmt(r), c.to_string(), fmt(d)])?;
        }
        w.flush()?;
    }
    if let Some(path) = &cfg.output.report_json {
        fs::write(path, report.to_json()).with_context(|| format!("writing {path}"))?;
    }
    Ok(())
}

fn summarize(report: &JobReport) {
    let mut err = io::stderr().lock();
    if let Some(s) = &report.stats {
        let _ = writeln!(
            err,
            "grid points {}  failed {}  mass {:.6}  iterations {}  max residual {:.3e}",
            s.grid_points, s.failed_points, s.mass, s.total_iterations, s.max_residual
        );
    }
    for c in report.oracle_check.iter().flatten() {
        let _ = writeln!(err, "moment {}: oracle {:.10}  solver {:.10}  rel {:.2e}", c.order, c.oracle, c.solver, c.relative_error);
    }
    if let Some(v) = &report.validation {
        let _ = writeln!(
            err,
            "KS distance {:.5} (threshold {}) over {} trial(s) at N = {}, seed {} [{}]: {}",
            v.ks_distance,
            v.ks_threshold,
            v.trials,
            v.n,
            v.seed,
            v.generator,
            if v.pass { "pass" } else { "FAIL" }
        );
    }
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn print_moments(report: &JobReport) {
    if let Some(m) = &report.moments {
        println!("phi({}) = {}", m.word, m.value);
        for c in &m.comparisons {
            println!("order {}: oracle {}  solver {}  rel {:.2e}", c.order, c.oracle, c.solver, c.relative_error);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let (args, mode) = match cli.command {
        Command::Density(a) => (a, Mode::Density),
        Command::Validate(a) => (a, Mode::Validate),
        Command::Moments(a) => (a, Mode::Moments),
    };
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let cfg = match build_config(&args, mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_CONFIG);
        }
    };
    match pipeline::run(&cfg) {
        Ok(report) => {
            write_outputs(&cfg, &report)?;
            summarize(&report);
            print_moments(&report);
            Ok(report.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(e.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
