use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fracdyn::config::{ConfigError, SchemeName};
use fracdyn::convergence::{halving, parse_ladder, study};
use fracdyn::output::{convergence_csv, write_run, Summary};
use fracdyn::verify::{report, run_suite, Suite};
use fracdyn::{run, RunError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fracdyn", version, about = "Constrained fractional dynamics scenarios")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its CSV and JSON artifacts.
    Run(Overrides),
    /// Run a verification suite and print its table.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Error and order over a ladder of step sizes.
    Convergence {
        #[command(flatten)]
        over: Overrides,
        /// Comma-separated steps, coarsest first; default halves `grid.h` three times.
        #[arg(long)]
        ladder: Option<String>,
    },
}

/// Failure with its process exit code.
struct Failure(i32, anyhow::Error);

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure(e.exit_code(), e.into())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(1, e.into())
    }
}

fn load(o: &Overrides) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(&o.config)?;
    if let Some(h) = o.h {
        cfg.grid.h = h;
    }
    if let Some(t) = o.t_end {
        cfg.grid.t_end = t;
    }
    if let Some(s) = o.scheme {
        cfg.solver.scheme = s;
    }
    if let Some(d) = &o.out {
        cfg.output.dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_failure(e: std::io::Error, what: &str) -> Failure {
    Failure(1, anyhow::Error::new(e).context(format!("cannot write {what}")))
}

fn cmd_run(o: &Overrides, quiet: bool) -> Result<(), Failure> {
    let cfg = load(o)?;
    let start = Instant::now();
    let out = run(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let summary = Summary::new(&cfg, &out.sim, out.comparison.as_ref(), wall);
    let files = write_run(&cfg.output.dir, &cfg.output.stem, &out.sim, out.comparison.as_ref(), &summary)
        .map_err(|e| io_failure(e, "artifacts"))?;
    if !quiet {
        let res = summary.max_residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
        println!("[run] {} with {} steps, max |f| = {res}, {wall:.2} s", cfg.scenario, summary.steps);
        if let Some(c) = &summary.comparison {
            let verdict = if c.within_tolerance { "within" } else { "OUTSIDE" };
            println!("[run] max |numerical - exact| = {:.3e} ({verdict} {:.1e})", c.max_error, c.tolerance);
        }
        println!("[run] wrote {}", files.trajectory.display());
    }
    Ok(())
}

fn cmd_verify(suite: Suite, quiet: bool) -> Result<(), Failure> {
    let start = Instant::now();
    let checks = run_suite(suite, &fracdyn::thread_pool());
    print!("{}", report(&checks));
    if !quiet {
        println!("[verify] {:.1} s", start.elapsed().as_secs_f64());
    }
    if checks.iter().all(|c| c.passed()) {
        Ok(())
    } else {
        Err(Failure(4, anyhow::anyhow!("verification failed")))
    }
}

fn cmd_convergence(o: &Overrides, ladder: Option<&str>, quiet: bool) -> Result<(), Failure> {
    let cfg = load(o)?;
    let ladder = match ladder {
        Some(s) => parse_ladder(s).map_err(|e| Failure(1, anyhow::anyhow!(e)))?,
        None => halving(cfg.grid.h, 4),
    };
    let table = study(&cfg, &ladder, &fracdyn::thread_pool())?;
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| io_failure(e, "output directory"))?;
    let path = cfg.output.dir.join(format!("{}_convergence.csv", cfg.output.stem));
    std::fs::write(&path, convergence_csv(&table)).map_err(|e| io_failure(e, "convergence table"))?;
    if !quiet {
        for r in &table.rows {
            let order = r.order.map_or("-".to_string(), |o| format!("{o:.3}"));
            println!("h = {:.4e}  error = {:.4e}  order = {order}", r.h, r.error);
        }
        let fitted = table.fitted_order.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("[convergence] fitted order {fitted}, monotone {}", table.monotone);
        println!("[convergence] wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(o) => cmd_run(o, cli.quiet),
        Cmd::Verify { suite } => cmd_verify(*suite, cli.quiet),
        Cmd::Convergence { over, ladder } => cmd_convergence(over, ladder.as_deref(), cli.quiet),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
