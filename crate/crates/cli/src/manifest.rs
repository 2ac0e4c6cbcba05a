//! Run manifests: flat `key = value` files describing one solver run.
//!
//! ```text
//! # problem source: instance | libsvm | generate
//! problem = instance
//! path = ls4096.inst
//! solver = rcd-v2
//! tau = 41
//! max_time = 5
//! trace = rcd-v2.csv
//! ```
//!
//! Blank lines and text after `#` are ignored. Relative paths are resolved
//! against the manifest's directory. See [`KEYS`] for the accepted keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rcd_core::io::read_instance;
use rcd_core::{
    generate_l1ls, read_libsvm, EtaRule, GeneratorParams, InexactMode, InnerMetric, LossKind,
    Problem, SolverConfig, SolverKind,
};

use crate::error::{CliError, CliResult};

/// Accepted manifest keys with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "instance | libsvm | generate"),
    (
        "path",
        "instance or LIBSVM file (problem = instance | libsvm)",
    ),
    (
        "features",
        "feature count for LIBSVM data (default: largest index)",
    ),
    ("c", "l1 weight (libsvm: default 10; generate: default 1)"),
    ("n", "generate: number of columns"),
    ("m", "generate: number of rows"),
    ("density", "generate: nonzero probability per entry"),
    (
        "sparsity",
        "generate: planted support size (default ceil(0.01 n))",
    ),
    ("instance_seed", "generate: generator seed (default 0)"),
    ("solver", "rcd-v1 | rcd-v2 | ucdc-v1 | ucdc-v2"),
    ("label", "name used in merged output (default: solver id)"),
    (
        "tau",
        "block size (least squares: ceil(0.01 N); logistic: ceil(0.001 N))",
    ),
    (
        "rho",
        "ridge added to the exact block Hessian (default 1e-6)",
    ),
    ("theta", "line-search parameter in (0, 1/2) (default 1e-3)"),
    ("beta", "residual scale (default 1)"),
    ("max_backtracks", "line-search trials (default 10)"),
    ("eta", "forcing term in [0, 1) or 'adaptive' (default 0.9)"),
    (
        "xi",
        "sufficient-decrease parameter; enables that stopping mode",
    ),
    ("max_inner", "inner iteration cap (default 200)"),
    ("inner_metric", "jacobi | scalar (default jacobi)"),
    ("seed", "sampling seed (default 0)"),
    ("max_iterations", "iteration budget (default 10000)"),
    ("max_time", "wall-clock budget in seconds"),
    ("residual_tol", "stop once the full residual is below this"),
    (
        "check_period",
        "iterations between full-residual checks (default 100)",
    ),
    ("target", "stop once F(x) <= target"),
    ("trace", "trace CSV output path"),
];

/// Where the problem data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Instance(PathBuf),
    Libsvm {
        path: PathBuf,
        features: Option<usize>,
        c: f64,
    },
    Generate(GeneratorParams),
}

/// A loaded problem plus what is known about it.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub kind: LossKind,
    /// Optimal value when the instance carries a planted solution.
    pub f_star: Option<f64>,
}

impl LoadedProblem {
    /// Default block size: `⌈0.01 N⌉` for least squares, `⌈0.001 N⌉` for logistic.
    pub fn default_tau(&self) -> usize {
        default_tau(self.kind, self.problem.dim())
    }

    /// Whether two loaded problems hold the same data.
    pub fn same_data(&self, other: &LoadedProblem) -> bool {
        let (a, b) = (self.problem.oracle(), other.problem.oracle());
        a.kind() == b.kind()
            && a.matrix() == b.matrix()
            && a.targets() == b.targets()
            && self.problem.regularizer() == other.problem.regularizer()
    }
}

pub fn default_tau(kind: LossKind, dim: usize) -> usize {
    let frac = match kind {
        LossKind::LeastSquares => 100,
        LossKind::Logistic => 1000,
    };
    dim.div_ceil(frac).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub problem: ProblemSource,
    pub solver: SolverKind,
    pub label: Option<String>,
    /// `None` selects the loss-dependent default.
    pub tau: Option<usize>,
    pub rho: f64,
    /// Solver settings; the Hessian strategy and sampling scheme are filled in
    /// from `solver` and `tau` by [`RunManifest::solver_config`].
    pub config: SolverConfig,
    pub trace: Option<PathBuf>,
}

impl RunManifest {
    pub fn new(problem: ProblemSource, solver: SolverKind) -> Self {
        Self {
            problem,
            solver,
            label: None,
            tau: None,
            rho: rcd_core::driver::DEFAULT_RHO,
            config: SolverConfig::default(),
            trace: None,
        }
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses manifest text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            let key = key.trim().to_string();
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(CliError::config(format!(
                    "line {}: unknown key '{key}'",
                    i + 1
                )));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(format!(
                    "line {}: duplicate key '{key}'",
                    i + 1
                )));
            }
        }
        Self::from_entries(entries, base)
    }

    /// Builds a manifest from `key -> value` pairs.
    pub fn from_entries(mut e: BTreeMap<String, String>, base: &Path) -> CliResult<Self> {
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        let kind = e
            .remove("problem")
            .ok_or_else(|| CliError::config("missing key 'problem'"))?;
        let problem = match kind.as_str() {
            "instance" => ProblemSource::Instance(resolve(required(&mut e, "path")?)),
            "libsvm" => ProblemSource::Libsvm {
                path: resolve(required(&mut e, "path")?),
                features: parse_opt(&mut e, "features")?,
                c: parse_opt(&mut e, "c")?.unwrap_or(10.0),
            },
            "generate" => {
                let n: usize = parse_req(&mut e, "n")?;
                let mut params = GeneratorParams::new(
                    n,
                    parse_req(&mut e, "m")?,
                    parse_req(&mut e, "density")?,
                    parse_opt(&mut e, "c")?.unwrap_or(1.0),
                    parse_opt(&mut e, "instance_seed")?.unwrap_or(0),
                );
                if let Some(s) = parse_opt(&mut e, "sparsity")? {
                    params.sparsity = s;
                }
                ProblemSource::Generate(params)
            }
            other => {
                return Err(CliError::config(format!(
                    "problem must be instance, libsvm or generate, got '{other}'"
                )))
            }
        };
        let solver: SolverKind = parse_req(&mut e, "solver")?;
        let mut m = RunManifest::new(problem, solver);
        m.label = e.remove("label");
        m.tau = parse_opt(&mut e, "tau")?;
        if let Some(rho) = parse_opt(&mut e, "rho")? {
            m.rho = rho;
        }
        let cfg = &mut m.config;
        if let Some(v) = parse_opt(&mut e, "theta")? {
            cfg.theta = v;
        }
        if let Some(v) = parse_opt(&mut e, "beta")? {
            cfg.beta = v;
        }
        if let Some(v) = parse_opt(&mut e, "max_backtracks")? {
            cfg.max_backtracks = v;
        }
        if let Some(v) = e.remove("eta") {
            cfg.policy.eta = if v == "adaptive" {
                EtaRule::Adaptive
            } else {
                EtaRule::Constant(parse_value("eta", &v)?)
            };
        }
        if let Some(xi) = parse_opt(&mut e, "xi")? {
            cfg.policy.mode = InexactMode::SufficientDecrease { xi };
        }
        if let Some(v) = parse_opt(&mut e, "max_inner")? {
            cfg.policy.max_inner = v;
        }
        if let Some(v) = e.remove("inner_metric") {
            cfg.policy.metric = match v.as_str() {
                "jacobi" => InnerMetric::Jacobi,
                "scalar" => InnerMetric::Scalar,
                other => {
                    return Err(CliError::config(format!(
                        "inner_metric must be jacobi or scalar, got '{other}'"
                    )))
                }
            };
        }
        if let Some(v) = parse_opt(&mut e, "seed")? {
            cfg.seed = v;
        }
        if let Some(v) = parse_opt(&mut e, "max_iterations")? {
            cfg.max_iterations = v;
        }
        cfg.max_time = parse_opt(&mut e, "max_time")?;
        cfg.residual_tol = parse_opt(&mut e, "residual_tol")?;
        if let Some(v) = parse_opt(&mut e, "check_period")? {
            cfg.check_period = v;
        }
        cfg.target_objective = parse_opt(&mut e, "target")?;
        m.trace = e.remove("trace").map(resolve);
        if let Some(k) = e.keys().next() {
            return Err(CliError::config(format!(
                "key '{k}' does not apply to this problem source"
            )));
        }
        Ok(m)
    }

    /// Name used in merged output.
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.solver.id().to_string())
    }

    pub fn load_problem(&self) -> CliResult<LoadedProblem> {
        match &self.problem {
            ProblemSource::Instance(path) => {
                let inst = read_instance(path)?;
                Ok(LoadedProblem {
                    problem: inst.problem()?,
                    kind: inst.kind,
                    f_star: inst.f_star,
                })
            }
            ProblemSource::Libsvm { path, features, c } => {
                let data = read_libsvm(path, *features)?;
                Ok(LoadedProblem {
                    problem: data.logistic_problem(*c)?,
                    kind: LossKind::Logistic,
                    f_star: None,
                })
            }
            ProblemSource::Generate(params) => {
                let inst = generate_l1ls(params)?;
                Ok(LoadedProblem {
                    problem: inst.problem()?,
                    kind: LossKind::LeastSquares,
                    f_star: Some(inst.f_star),
                })
            }
        }
    }

    /// Full solver configuration for `loaded`, validated.
    pub fn solver_config(&self, loaded: &LoadedProblem) -> CliResult<SolverConfig> {
        let tau = self.tau.unwrap_or_else(|| loaded.default_tau());
        let mut cfg = self.config.clone();
        self.solver.configure(&mut cfg, tau, self.rho);
        cfg.validate(loaded.problem.dim())?;
        Ok(cfg)
    }

    /// Renders the manifest in the file format accepted by [`RunManifest::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match &self.problem {
            ProblemSource::Instance(p) => {
                kv("problem", "instance".into());
                kv("path", p.display().to_string());
            }
            ProblemSource::Libsvm { path, features, c } => {
                kv("problem", "libsvm".into());
                kv("path", path.display().to_string());
                if let Some(f) = features {
                    kv("features", f.to_string());
                }
                kv("c", c.to_string());
            }
            ProblemSource::Generate(p) => {
                kv("problem", "generate".into());
                kv("n", p.n.to_string());
                kv("m", p.m.to_string());
                kv("density", p.density.to_string());
                kv("c", p.c.to_string());
                kv("sparsity", p.sparsity.to_string());
                kv("instance_seed", p.seed.to_string());
            }
        }
        kv("solver", self.solver.id().into());
        if let Some(l) = &self.label {
            kv("label", l.clone());
        }
        if let Some(t) = self.tau {
            kv("tau", t.to_string());
        }
        kv("rho", self.rho.to_string());
        let c = &self.config;
        kv("theta", c.theta.to_string());
        kv("beta", c.beta.to_string());
        kv("max_backtracks", c.max_backtracks.to_string());
        kv(
            "eta",
            match c.policy.eta {
                EtaRule::Adaptive => "adaptive".into(),
                EtaRule::Constant(v) => v.to_string(),
            },
        );
        if let InexactMode::SufficientDecrease { xi } = c.policy.mode {
            kv("xi", xi.to_string());
        }
        kv("max_inner", c.policy.max_inner.to_string());
        kv(
            "inner_metric",
            match c.policy.metric {
                InnerMetric::Jacobi => "jacobi".into(),
                InnerMetric::Scalar => "scalar".into(),
            },
        );
        kv("seed", c.seed.to_string());
        kv("max_iterations", c.max_iterations.to_string());
        if let Some(t) = c.max_time {
            kv("max_time", t.to_string());
        }
        if let Some(t) = c.residual_tol {
            kv("residual_tol", t.to_string());
        }
        kv("check_period", c.check_period.to_string());
        if let Some(t) = c.target_objective {
            kv("target", t.to_string());
        }
        if let Some(p) = &self.trace {
            kv("trace", p.display().to_string());
        }
        s
    }
}

fn required(e: &mut BTreeMap<String, String>, key: &str) -> CliResult<String> {
    e.remove(key)
        .ok_or_else(|| CliError::config(format!("missing key '{key}'")))
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_opt<T: FromStr>(e: &mut BTreeMap<String, String>, key: &str) -> CliResult<Option<T>> {
    e.remove(key).map(|v| parse_value(key, &v)).transpose()
}

fn parse_req<T: FromStr>(e: &mut BTreeMap<String, String>, key: &str) -> CliResult<T> {
    parse_value(key, &required(e, key)?)
}
