//! Command-line front end for the surface FEM experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surfem::harness::{
    adaptive_history_csv, compute_orders, run_adaptive, run_convergence, run_selftest,
    ExperimentConfig, HarnessError,
};
use surfem::recovery::RecoveryMethod;

/// Surface finite elements with gradient recovery and adaptivity.
#[derive(Parser)]
#[command(name = "surfem", version, about)]
struct Cli {
    /// Worker threads (also via the SURFEM_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key=value config file applied before command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Problem name: torus_xy, torus_product, highcurv_x1x2,
    /// sphere_singular, dziuk_peak.
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated recovery methods: pppr, ppr-exact, ppr-avg, sa, wa.
    #[arg(long)]
    recovery: Option<String>,
    /// Output directory for CSV and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a uniform-refinement convergence study and print the table.
    Converge {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of uniform levels.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Run the adaptive solve-estimate-mark-refine loop.
    Adapt {
        #[command(flatten)]
        common: CommonOpts,
        /// Bulk-marking fraction in (0, 1).
        #[arg(long)]
        theta: Option<f64>,
        /// Stop once the vertex count exceeds this budget.
        #[arg(long)]
        max_dof: Option<usize>,
    },
    /// Run the invariant self-test suite.
    Selftest,
    /// Convert a mesh file to another format.
    Export {
        /// Input mesh path (.off or .obj).
        #[arg(long)]
        mesh: PathBuf,
        /// Target format: off, obj, or vtk.
        #[arg(long)]
        format: String,
        /// Output path; defaults to the input with the new extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_config(
    base: Option<&PathBuf>,
    common: &CommonOpts,
    extra: &[(&str, Option<String>)],
) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::default();
    if let Some(path) = base {
        let text = std::fs::read_to_string(path)?;
        config.apply_file(&text)?;
    }
    if let Some(p) = &common.problem {
        config.apply_key("problem", p)?;
    }
    if let Some(r) = &common.recovery {
        config.apply_key("recovery", r)?;
    }
    if let Some(o) = &common.out {
        config.out_dir = Some(o.clone());
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    for (key, value) in extra {
        if let Some(v) = value {
            config.apply_key(key, v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

fn configure_threads(flag: Option<usize>) {
    let from_env = std::env::var("SURFEM_THREADS").ok().and_then(|v| v.parse().ok());
    if let Some(n) = flag.or(from_env) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn fmt_order(o: &Option<f64>) -> String {
    match o {
        Some(v) => format!("{v:5.2}"),
        None => "    -".to_string(),
    }
}

fn print_convergence_table(record: &surfem::harness::ConvergenceRecord) {
    let dofs = record.dofs();
    println!("problem: {}", record.problem);
    print!("{:>8} {:>12} {:>6} {:>12} {:>6}", "dof", "de", "ord", "de_interp", "ord");
    for m in &record.methods {
        print!(" {:>12} {:>6}", format!("de[{}]", m.name()), "ord");
    }
    println!();
    let order_de = compute_orders(&record.de_column(), &dofs);
    let order_di = compute_orders(&record.de_interp_column(), &dofs);
    let method_orders: Vec<Vec<Option<f64>>> = record
        .methods
        .iter()
        .map(|&m| compute_orders(&record.method_column(m), &dofs))
        .collect();
    for (li, lvl) in record.levels.iter().enumerate() {
        print!(
            "{:>8} {:>12.4e} {:>6} {:>12.4e} {:>6}",
            lvl.dof,
            lvl.de,
            fmt_order(&order_de[li]),
            lvl.de_interp,
            fmt_order(&order_di[li]),
        );
        for (mi, m) in lvl.per_method.iter().enumerate() {
            print!(" {:>12.4e} {:>6}", m.de_recovered, fmt_order(&method_orders[mi][li]));
        }
        println!();
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    configure_threads(cli.threads);
    match cli.command {
        Command::Converge { common, levels } => {
            let config = build_config(
                cli.config.as_ref(),
                &common,
                &[("levels", levels.map(|l| l.to_string()))],
            )?;
            let record = run_convergence(&config)?;
            print_convergence_table(&record);
            if let Some(dir) = &config.out_dir {
                println!(
                    "wrote {}",
                    dir.join(format!("convergence_{}.csv", config.problem)).display()
                );
            }
            Ok(true)
        }
        Command::Adapt { common, theta, max_dof } => {
            let mut config = build_config(
                cli.config.as_ref(),
                &common,
                &[
                    ("theta", theta.map(|t| t.to_string())),
                    ("max_dof", max_dof.map(|d| d.to_string())),
                ],
            )?;
            if config.methods.len() > 1 {
                config.methods = vec![RecoveryMethod::MetricCorrected];
            }
            let run = run_adaptive(&config)?;
            print!("{}", adaptive_history_csv(&run));
            if let Some(dir) = &config.out_dir {
                println!(
                    "wrote {} and {}",
                    dir.join(format!("adaptive_{}.csv", config.problem)).display(),
                    dir.join(format!("adaptive_{}.vtk", config.problem)).display()
                );
            }
            Ok(true)
        }
        Command::Selftest => {
            let report = run_selftest();
            for c in &report.checks {
                println!(
                    "[{}] {:<38} measured {:>10.3e}  tolerance {:>8.1e}  ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.detail
                );
            }
            Ok(report.passed())
        }
        Command::Export { mesh, format, out } => {
            let path = surfem::harness::export_converted(&mesh, &format, out.as_deref())?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
