use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rcd_cli::commands::{self, BenchArgs, GenerateArgs, GenerateKind};
use rcd_cli::{CliError, CliResult, RunManifest};
use rcd_core::{GeneratorParams, SolverKind};

/// Randomized block coordinate descent for l1-regularized least squares and
/// logistic regression.
///
/// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical failure.
#[derive(Parser)]
#[command(name = "rcd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ls,
    Logistic,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance (least squares with known minimizer, or
    /// synthetic logistic data).
    Generate {
        #[arg(long, value_enum, default_value = "ls")]
        kind: Kind,
        /// Number of columns (features).
        #[arg(long)]
        n: usize,
        /// Number of rows (samples).
        #[arg(long)]
        m: usize,
        /// Probability that an entry is nonzero.
        #[arg(long)]
        density: f64,
        /// l1 weight [default: 1 for ls, 10 for logistic].
        #[arg(long)]
        c: Option<f64>,
        /// Planted support size [default: ceil(0.01 n) for ls, ceil(0.05 n) for logistic].
        #[arg(long)]
        sparsity: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(long, short)]
        out: PathBuf,
        /// Write logistic data in LIBSVM format instead of the instance container.
        #[arg(long)]
        libsvm: bool,
    },
    /// Run the solver described by a manifest and write its trace CSV.
    Solve {
        manifest: PathBuf,
        /// Trace output, overriding the manifest's `trace` key.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override a manifest key, as `key=value` (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run several manifests over one instance and write a merged trace CSV.
    Compare {
        #[arg(required = true, num_args = 2..)]
        manifests: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Keep only every k-th iteration of UCDC v.1 runs.
        #[arg(long, value_name = "K")]
        thin_ucdc: Option<usize>,
        /// Run the manifests concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Time all solvers on a generated least-squares instance.
    Bench {
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 1024)]
        m: usize,
        #[arg(long, default_value_t = 1e-2)]
        density: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Block size [default: ceil(0.01 n)].
        #[arg(long)]
        tau: Option<usize>,
        /// Comma-separated solver ids.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "rcd-v1,rcd-v2,ucdc-v1,ucdc-v2"
        )]
        solvers: Vec<SolverKind>,
        /// Relative accuracy (F - F*) / F* at which a run stops.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Per-solver time budget in seconds.
        #[arg(long, default_value_t = 10.0)]
        max_time: f64,
        #[arg(long, default_value_t = 100_000_000)]
        max_iterations: usize,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        run_seed: u64,
        /// Merged trace CSV output.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Keep only every k-th iteration of UCDC v.1 runs in the merged trace.
        #[arg(long, value_name = "K")]
        thin_ucdc: Option<usize>,
    },
}

fn load_manifest(path: &PathBuf, overrides: &[String]) -> CliResult<RunManifest> {
    if overrides.is_empty() {
        return RunManifest::from_file(path);
    }
    let mut text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let keys: Vec<&str> = overrides
        .iter()
        .map(|o| o.split_once('=').map(|(k, _)| k.trim()))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::config("--set expects key=value"))?;
    // drop overridden keys, then append the new values
    text = text
        .lines()
        .filter(|l| {
            let key = l
                .split('#')
                .next()
                .unwrap_or("")
                .split('=')
                .next()
                .unwrap_or("")
                .trim();
            !keys.contains(&key)
        })
        .map(|l| format!("{l}\n"))
        .collect();
    for o in overrides {
        text.push_str(o);
        text.push('\n');
    }
    let base = path.parent().unwrap_or(std::path::Path::new(""));
    RunManifest::parse(&text, base)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate {
            kind,
            n,
            m,
            density,
            c,
            sparsity,
            seed,
            out,
            libsvm,
        } => {
            let args = GenerateArgs {
                kind: match kind {
                    Kind::Ls => GenerateKind::LeastSquares,
                    Kind::Logistic => GenerateKind::Logistic,
                },
                n,
                m,
                density,
                c,
                sparsity,
                seed,
                out,
                libsvm,
            };
            print!("{}", commands::generate(&args)?);
        }
        Command::Solve {
            manifest,
            trace,
            overrides,
        } => {
            let m = load_manifest(&manifest, &overrides)?;
            let out = commands::solve(&m, trace.as_deref())?;
            println!("{}", out.summary());
        }
        Command::Compare {
            manifests,
            out,
            thin_ucdc,
            parallel,
        } => {
            let ms = manifests
                .iter()
                .map(|p| RunManifest::from_file(p))
                .collect::<CliResult<Vec<_>>>()?;
            for o in commands::compare(&ms, &out, thin_ucdc, parallel)? {
                println!("{}", o.summary());
            }
            println!("wrote {}", out.display());
        }
        Command::Bench {
            n,
            m,
            density,
            c,
            seed,
            tau,
            solvers,
            tol,
            max_time,
            max_iterations,
            run_seed,
            out,
            thin_ucdc,
        } => {
            let args = BenchArgs {
                params: GeneratorParams::new(n, m, density, c, seed),
                tau,
                solvers,
                tol,
                max_time,
                max_iterations,
                run_seed,
                out,
                thin_ucdc,
            };
            print!("{}", commands::bench(&args)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rcd: {e}");
            e.exit_code()
        }
    }
}
