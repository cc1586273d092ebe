use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lecell::glue::Domain;
use lecell::report::{Effort, RunConfig, RunReport, Task};

/// Boundary-singular solutions of Δu + u^p = 0: cells, gluing and verification.
#[derive(Parser, Debug)]
#[command(name = "lecell", version)]
struct Cli {
    /// Output root; each run writes into `<root>/<subcommand>` unless `--out` is given.
    #[arg(long, env = "LECELL_OUT", default_value = "lecell-out", global = true)]
    out_root: PathBuf,

    /// Exact output directory for this run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for randomised sampling.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,

    /// Run a saved `config.json` instead of a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Separable cell: the half-sphere profile φ_p by shooting.
    CellSeparable {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Check the trivial extension to N + k dimensions at random points.
        #[arg(long)]
        extension_k: Option<usize>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Critical cell at p = (N+1)/(N-1) by the two-component fixed point.
    CellCritical {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Defaults to N/2 - 1/4.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Defaults to automatic selection.
        #[arg(long)]
        t_star: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 65)]
        n_alpha: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Use the self-consistent scalar equation instead of the printed one.
        #[arg(long)]
        consistent: bool,
    },
    /// Connection cell for p above the critical exponent.
    CellConnection {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta_prime: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        ds: f64,
        #[arg(long, default_value_t = 65)]
        n_alpha: usize,
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
    },
    /// Glue cells at boundary points of the disk or ball and solve for the corrector.
    Glue(GlueArgs),
    /// Run the acceptance criteria.
    Verify {
        /// Run all eight criteria (the default when none is listed).
        #[arg(long)]
        all: bool,
        /// Comma-separated criterion numbers.
        #[arg(long, value_delimiter = ',', conflicts_with = "all")]
        criteria: Vec<u8>,
        /// Smaller gluing runs and critical-cell grid.
        #[arg(long)]
        quick: bool,
    },
    /// Summarise a finished run directory.
    Report {
        /// Run directory; defaults to `<root>/verify`.
        dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DomainArg {
    Disk,
    Ball,
}

#[derive(Args, Debug)]
struct GlueArgs {
    #[arg(long, value_enum, default_value = "disk")]
    domain: DomainArg,
    /// Boundary angles of the singular points (ball: polar angles 0 or π).
    #[arg(long, value_delimiter = ',', required = true)]
    points: Vec<f64>,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    /// Weight exponent; defaults to 2 - n.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Mesh levels 0..LEVELS for the refinement study.
    #[arg(long, default_value_t = 3)]
    levels: u32,
    /// Finite-stage construction with K stages.
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

fn task(cmd: &Command) -> Option<(Task, &'static str)> {
    Some(match cmd {
        Command::CellSeparable {
            dim,
            p,
            tol,
            extension_k,
            samples,
        } => (
            Task::CellSeparable {
                dim: *dim,
                p: *p,
                tol: *tol,
                extension_k: *extension_k,
                extension_samples: *samples,
            },
            "cell-separable",
        ),
        Command::CellCritical {
            dim,
            sigma,
            mu,
            t_star,
            dt,
            n_alpha,
            tol,
            consistent,
        } => (
            Task::CellCritical {
                dim: *dim,
                sigma: sigma.unwrap_or(*dim as f64 / 2.0 - 0.25),
                mu: *mu,
                t_star: *t_star,
                dt: *dt,
                n_alpha: *n_alpha,
                tol: *tol,
                consistent: *consistent,
            },
            "cell-critical",
        ),
        Command::CellConnection {
            dim,
            p,
            delta,
            delta_prime,
            ds,
            n_alpha,
            tol,
        } => (
            Task::CellConnection {
                dim: *dim,
                p: *p,
                delta: *delta,
                delta_prime: *delta_prime,
                ds: *ds,
                n_alpha: *n_alpha,
                tol: *tol,
            },
            "cell-connection",
        ),
        Command::Glue(g) => (
            Task::Glue {
                domain: match g.domain {
                    DomainArg::Disk => Domain::Disk,
                    DomainArg::Ball => Domain::Ball,
                },
                p: g.p,
                points: g.points.clone(),
                eps: g.eps,
                radius: g.radius,
                delta: g.delta,
                levels: g.levels,
                stages: g.stages,
                tol: g.tol,
            },
            "glue",
        ),
        Command::Verify { criteria, quick, .. } => (
            Task::Verify {
                criteria: criteria.clone(),
                effort: if *quick { Effort::Quick } else { Effort::Full },
            },
            "verify",
        ),
        Command::Report { .. } => return None,
    })
}

fn report(dir: &Path) -> ExitCode {
    match RunReport::read(dir) {
        Ok(rep) => {
            print!("{}", rep.summary());
            for s in &rep.sections {
                for t in &s.tables {
                    println!("table {}", dir.join(t).display());
                }
            }
            println!("{}", if rep.passed { "all checks passed" } else { "some checks failed" });
            if rep.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", dir.join("report.json").display());
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match (&cli.config, &cli.command) {
        (Some(_), Some(_)) => {
            eprintln!("error: --config cannot be combined with a subcommand");
            return ExitCode::from(2);
        }
        (Some(path), None) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match RunConfig::from_json(&text) {
                Ok(mut c) => {
                    if let Some(out) = &cli.out {
                        c.out_dir = out.clone();
                    }
                    c
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        (None, Some(Command::Report { dir })) => {
            let dir = dir.clone().unwrap_or_else(|| cli.out_root.join("verify"));
            return report(&dir);
        }
        (None, Some(cmd)) => {
            let (task, name) = task(cmd).expect("report handled above");
            RunConfig {
                task,
                seed: cli.seed,
                out_dir: cli.out.clone().unwrap_or_else(|| cli.out_root.join(name)),
            }
        }
        (None, None) => {
            eprintln!("error: a subcommand or --config is required (see --help)");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match lecell::run::run(&config) {
        Ok(rep) => {
            print!("{}", rep.summary());
            println!("wrote {}", config.out_dir.join("report.json").display());
            if rep.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
