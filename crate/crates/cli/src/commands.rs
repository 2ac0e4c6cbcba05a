use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rcd_core::io::{thin_trace, write_instance, write_merged, write_trace};
use rcd_core::probgen::write_libsvm;
use rcd_core::{
    full_residual, generate_l1ls, generate_logistic, GeneratorParams, Instance, LogisticParams,
    LossKind, RunResult, SolverConfig, SolverKind, Termination,
};

use crate::error::{CliError, CliResult};
use crate::manifest::{default_tau, LoadedProblem, ProblemSource, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerateKind {
    LeastSquares,
    Logistic,
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub kind: GenerateKind,
    pub n: usize,
    pub m: usize,
    pub density: f64,
    /// Defaults to 1 for least squares and 10 for logistic.
    pub c: Option<f64>,
    pub sparsity: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// Write logistic data in LIBSVM format instead of the instance container.
    pub libsvm: bool,
}

/// Writes a generated instance and returns the report printed to stdout.
pub fn generate(args: &GenerateArgs) -> CliResult<String> {
    if let Some(s) = args.sparsity {
        if s > args.n {
            return Err(CliError::config(format!(
                "sparsity {s} exceeds the number of columns n = {}",
                args.n
            )));
        }
    }
    let mut report = String::new();
    match args.kind {
        GenerateKind::LeastSquares => {
            if args.libsvm {
                return Err(CliError::config("--libsvm applies to logistic data only"));
            }
            let mut params = GeneratorParams::new(
                args.n,
                args.m,
                args.density,
                args.c.unwrap_or(1.0),
                args.seed,
            );
            if let Some(s) = args.sparsity {
                params.sparsity = s;
            }
            let inst = generate_l1ls(&params)?;
            let (nnz, f_star) = (inst.a.nnz(), inst.f_star);
            write_instance(&args.out, &Instance::from(inst))?;
            let _ = writeln!(
                report,
                "wrote {}: least squares, N = {}, m = {}, nnz = {nnz}, c = {}",
                args.out.display(),
                params.n,
                params.m,
                params.c
            );
            let _ = writeln!(report, "F(x*) = {f_star:.17e}");
            let _ = writeln!(
                report,
                "suggested tau = {}",
                default_tau(LossKind::LeastSquares, params.n)
            );
        }
        GenerateKind::Logistic => {
            let mut params = LogisticParams::new(args.m, args.n, args.density, args.seed);
            if let Some(s) = args.sparsity {
                params.support = s;
            }
            let data = generate_logistic(&params)?;
            let c = args.c.unwrap_or(10.0);
            let nnz = data.a.nnz();
            if args.libsvm {
                write_libsvm(&args.out, &data.a, &data.labels)?;
            } else {
                let inst = Instance {
                    kind: LossKind::Logistic,
                    a: data.a,
                    b: data.labels,
                    c,
                    seed: Some(args.seed),
                    f_star: None,
                    x_star: None,
                    y_star: None,
                };
                write_instance(&args.out, &inst)?;
            }
            let _ = writeln!(
                report,
                "wrote {}: logistic, N = {}, m = {}, nnz = {nnz}, c = {c}",
                args.out.display(),
                params.n,
                params.m
            );
            let _ = writeln!(
                report,
                "suggested tau = {}",
                default_tau(LossKind::Logistic, params.n)
            );
        }
    }
    Ok(report)
}

/// Outcome of one manifest run.
#[derive(Debug)]
pub struct SolveOutcome {
    pub label: String,
    pub solver: SolverKind,
    pub run: RunResult,
    pub residual: f64,
    pub f_star: Option<f64>,
}

impl SolveOutcome {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "solver={} iterations={} time_s={:.6} F={:.17e} residual={:.6e} termination={}",
            self.label,
            self.run.iterations(),
            self.run.elapsed.as_secs_f64(),
            self.run.objective,
            self.residual,
            termination_name(self.run.termination),
        );
        if let Some(f) = self.f_star {
            let _ = write!(
                s,
                " rel_err={:.6e}",
                (self.run.objective - f) / f.abs().max(1e-300)
            );
        }
        s
    }
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::MaxIterations => "max-iterations",
        Termination::MaxTime => "max-time",
        Termination::ResidualTolerance => "residual-tolerance",
        Termination::TargetObjective => "target-objective",
    }
}

/// Runs one configuration and computes the final full residual.
pub fn run_solver(
    loaded: &LoadedProblem,
    solver: SolverKind,
    cfg: &SolverConfig,
    label: String,
) -> CliResult<SolveOutcome> {
    let run = solver.run(&loaded.problem, cfg)?;
    let residual = full_residual(&loaded.problem, &run.x, cfg.beta)?;
    Ok(SolveOutcome {
        label,
        solver,
        run,
        residual,
        f_star: loaded.f_star,
    })
}

/// Runs a manifest, writes its trace (to `trace` when given, else the
/// manifest's own path) and returns the outcome.
pub fn solve(manifest: &RunManifest, trace: Option<&Path>) -> CliResult<SolveOutcome> {
    let loaded = manifest.load_problem()?;
    let cfg = manifest.solver_config(&loaded)?;
    let out = run_solver(&loaded, manifest.solver, &cfg, manifest.label())?;
    if let Some(path) = trace.or(manifest.trace.as_deref()) {
        write_trace(path, &out.run.trace)?;
    }
    Ok(out)
}

/// Runs several manifests over the same instance and writes the merged trace.
///
/// Rows of UCDC v.1 runs are thinned to every `thin_ucdc`-th iteration when set.
/// Runs execute one after another unless `parallel` is set, so that wall-clock
/// columns are not skewed by contention.
pub fn compare(
    manifests: &[RunManifest],
    out: &Path,
    thin_ucdc: Option<usize>,
    parallel: bool,
) -> CliResult<Vec<SolveOutcome>> {
    if manifests.len() < 2 {
        return Err(CliError::config("compare needs at least two manifests"));
    }
    let loaded = load_shared(manifests)?;
    let configs = manifests
        .iter()
        .map(|m| m.solver_config(&loaded))
        .collect::<CliResult<Vec<_>>>()?;
    let labels = unique_labels(manifests);

    let outcomes: Vec<SolveOutcome> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = manifests
                .iter()
                .zip(&configs)
                .zip(&labels)
                .map(|((m, cfg), label)| {
                    let loaded = &loaded;
                    s.spawn(move || run_solver(loaded, m.solver, cfg, label.clone()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect::<CliResult<Vec<_>>>()
        })?
    } else {
        manifests
            .iter()
            .zip(&configs)
            .zip(&labels)
            .map(|((m, cfg), label)| run_solver(&loaded, m.solver, cfg, label.clone()))
            .collect::<CliResult<Vec<_>>>()?
    };

    let runs: Vec<(String, Vec<_>)> = outcomes
        .iter()
        .map(|o| {
            let trace = match thin_ucdc {
                Some(k) if o.solver == SolverKind::UcdcV1 => thin_trace(&o.run.trace, k),
                _ => o.run.trace.clone(),
            };
            (o.label.clone(), trace)
        })
        .collect();
    write_merged(out, &runs, None)?;
    Ok(outcomes)
}

/// Loads the problem of the first manifest and checks that every other
/// manifest describes the same data.
fn load_shared(manifests: &[RunManifest]) -> CliResult<LoadedProblem> {
    let first = manifests[0].load_problem()?;
    let mut seen: Vec<&ProblemSource> = vec![&manifests[0].problem];
    for (i, m) in manifests.iter().enumerate().skip(1) {
        if seen.contains(&&m.problem) {
            continue;
        }
        let other = m.load_problem()?;
        if !first.same_data(&other) {
            return Err(CliError::config(format!(
                "manifest {} uses a different instance than manifest 1",
                i + 1
            )));
        }
        seen.push(&m.problem);
    }
    Ok(first)
}

/// Labels with `#k` suffixes appended where several manifests share one.
fn unique_labels(manifests: &[RunManifest]) -> Vec<String> {
    let labels: Vec<String> = manifests.iter().map(RunManifest::label).collect();
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let total = labels.iter().filter(|x| *x == l).count();
            if total == 1 {
                l.clone()
            } else {
                let k = labels[..=i].iter().filter(|x| *x == l).count();
                format!("{l}#{k}")
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub params: GeneratorParams,
    pub tau: Option<usize>,
    pub solvers: Vec<SolverKind>,
    /// Stop once `(F - F*) / F* <= tol`.
    pub tol: f64,
    pub max_time: f64,
    pub max_iterations: usize,
    pub run_seed: u64,
    pub out: Option<PathBuf>,
    pub thin_ucdc: Option<usize>,
}

/// Runs each solver on one generated instance until a relative accuracy or a
/// budget is reached and returns a table.
pub fn bench(args: &BenchArgs) -> CliResult<String> {
    let mut manifests = Vec::new();
    for &kind in &args.solvers {
        let mut m = RunManifest::new(ProblemSource::Generate(args.params.clone()), kind);
        m.tau = args.tau;
        m.config.seed = args.run_seed;
        m.config.max_time = Some(args.max_time);
        m.config.max_iterations = args.max_iterations;
        manifests.push(m);
    }
    if manifests.is_empty() {
        return Err(CliError::config("no solvers selected"));
    }
    let inst = generate_l1ls(&args.params)?;
    let f_star = inst.f_star;
    let loaded = LoadedProblem {
        problem: inst.problem()?,
        kind: LossKind::LeastSquares,
        f_star: Some(f_star),
    };
    let mut table = format!(
        "instance: N = {}, m = {}, density = {}, c = {}, seed = {}, F* = {f_star:.10e}\n",
        args.params.n, args.params.m, args.params.density, args.params.c, args.params.seed
    );
    let _ = writeln!(
        table,
        "{:<8} {:>4} {:>10} {:>10} {:>22} {:>12} {:>9}",
        "solver", "tau", "iters", "time_s", "F", "rel_err", "reached"
    );
    let mut runs = Vec::new();
    for m in &manifests {
        let mut cfg = m.solver_config(&loaded)?;
        cfg.target_objective = Some(f_star + args.tol * f_star.abs());
        let out = run_solver(&loaded, m.solver, &cfg, m.label())?;
        let rel = (out.run.objective - f_star) / f_star.abs();
        let _ = writeln!(
            table,
            "{:<8} {:>4} {:>10} {:>10.4} {:>22.15e} {:>12.4e} {:>9}",
            out.label,
            cfg.sampling.block_size(),
            out.run.iterations(),
            out.run.elapsed.as_secs_f64(),
            out.run.objective,
            rel,
            if out.run.termination == Termination::TargetObjective {
                "yes"
            } else {
                "no"
            },
        );
        let trace = match args.thin_ucdc {
            Some(k) if m.solver == SolverKind::UcdcV1 => thin_trace(&out.run.trace, k),
            _ => out.run.trace,
        };
        runs.push((m.label(), trace));
    }
    if let Some(path) = &args.out {
        write_merged(path, &runs, None)?;
    }
    Ok(table)
}
