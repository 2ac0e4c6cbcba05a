//! Solver loops: robust coordinate descent with inexact block directions and a
//! backtracking line search, plus the uniform coordinate descent baseline with
//! fixed scalar curvature and unit steps.
//!
//! Objective values in the trace are `F(x_0)` minus the block-locally evaluated
//! decreases of the committed steps, so they never increase. The wall clock is
//! paused while records are written and while optional full-residual checks run.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{gather, norm2, norm_inf, scatter_add, BlockSelection};
use crate::model::{residual_g, BlockModel, Curvature, HessianStrategy};
use crate::problem::Problem;
use crate::regularizer::Regularizer;
use crate::sampler::{BlockSampler, SamplingScheme};
use crate::smooth::{OracleCache, SmoothOracle, StepTrial};
use crate::subsolver::{solve_diagonal, solve_iterative, InexactMode, InexactnessPolicy};

pub const DEFAULT_THETA: f64 = 1e-3;
pub const DEFAULT_RHO: f64 = 1e-6;
pub const DEFAULT_MAX_BACKTRACKS: usize = 10;
/// Relative threshold under which a block residual counts as zero.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Line-search sufficient decrease parameter, in (0, ½).
    pub theta: f64,
    /// Scale used in the stationarity residuals.
    pub beta: f64,
    /// Number of step sizes tried by the line search (1, ½, ¼, ...).
    pub max_backtracks: usize,
    pub hessian: HessianStrategy,
    pub policy: InexactnessPolicy,
    pub sampling: SamplingScheme,
    pub seed: u64,
    pub max_iterations: usize,
    /// Wall-clock budget in seconds.
    pub max_time: Option<f64>,
    /// Stop once `||g(x; 0)||_∞ <= tol`, checked every `check_period` iterations.
    pub residual_tol: Option<f64>,
    pub check_period: usize,
    /// Stop once `F(x) <= target`.
    pub target_objective: Option<f64>,
    /// Starting point; zero when `None`.
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            beta: 1.0,
            max_backtracks: DEFAULT_MAX_BACKTRACKS,
            hessian: HessianStrategy::ExactBlockRidge { rho: DEFAULT_RHO },
            policy: InexactnessPolicy::default(),
            sampling: SamplingScheme::SingleCoordinate,
            seed: 0,
            max_iterations: 10_000,
            max_time: None,
            residual_tol: None,
            check_period: 100,
            target_objective: None,
            initial_point: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(Error::invalid(format!(
                "theta must lie in (0, 1/2), got {}",
                self.theta
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.max_backtracks == 0 {
            return Err(Error::invalid("at least one line-search trial is required"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("iteration budget must be positive"));
        }
        if let Some(t) = self.max_time {
            if !(t > 0.0) {
                return Err(Error::invalid(format!(
                    "time budget must be positive, got {t}"
                )));
            }
        }
        if self.check_period == 0 {
            return Err(Error::invalid("residual check period must be positive"));
        }
        if let Some(tol) = self.residual_tol {
            if !(tol > 0.0) {
                return Err(Error::invalid(format!(
                    "residual tolerance must be positive, got {tol}"
                )));
            }
        }
        self.policy.validate()?;
        if let InexactMode::SufficientDecrease { xi } = self.policy.mode {
            if xi <= self.theta {
                return Err(Error::invalid(format!(
                    "xi ({xi}) must exceed theta ({})",
                    self.theta
                )));
            }
        }
        self.hessian.validate()?;
        if self.sampling.block_size() == 0 || self.sampling.block_size() > dim {
            return Err(Error::invalid(format!(
                "block size {} must lie in [1, {dim}]",
                self.sampling.block_size()
            )));
        }
        if let Some(x0) = &self.initial_point {
            crate::linalg::check_len("initial point", dim, x0.len())?;
            if !crate::linalg::all_finite(x0) {
                return Err(Error::NonFinite("initial point"));
            }
        }
        Ok(())
    }
}

/// Event flags attached to a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Events(u8);

impl Events {
    pub const NONE: Events = Events(0);
    pub const INIT: Events = Events(1);
    /// Block residual was zero; no step taken.
    pub const SKIP: Events = Events(2);
    /// Inner solver hit its cap before the stopping conditions held.
    pub const CAP_HIT: Events = Events(4);
    /// No trial step satisfied the line-search condition.
    pub const LS_EXHAUSTED: Events = Events(8);
    /// No step was committed.
    pub const REJECTED: Events = Events(16);

    const NAMES: [(Events, &'static str); 5] = [
        (Events::INIT, "init"),
        (Events::SKIP, "skip"),
        (Events::CAP_HIT, "cap-hit"),
        (Events::LS_EXHAUSTED, "ls-exhausted"),
        (Events::REJECTED, "rejected"),
    ];

    pub fn contains(self, other: Events) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Events) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn parse(s: &str) -> Option<Events> {
        if s == "step" {
            return Some(Events::NONE);
        }
        let mut ev = Events::NONE;
        for part in s.split('+') {
            let (flag, _) = Self::NAMES.iter().find(|(_, n)| *n == part)?;
            ev.insert(*flag);
        }
        Some(ev)
    }
}

impl fmt::Display for Events {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("step");
        }
        let mut first = true;
        for (flag, name) in Self::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("+")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub time_s: f64,
    pub objective: f64,
    pub alpha: f64,
    pub tau: usize,
    pub inner_iters: usize,
    pub g0_norm: f64,
    pub gt_norm: f64,
    pub backtracks: usize,
    pub events: Events,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    MaxTime,
    ResidualTolerance,
    TargetObjective,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    /// `(iteration, ||g(x; 0)||_∞)` for every periodic residual check.
    pub residual_checks: Vec<(usize, f64)>,
    pub elapsed: Duration,
}

impl RunResult {
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.iter)
    }
}

/// Wall clock that can be paused for bookkeeping.
struct Stopwatch {
    accumulated: Duration,
    started: Option<Instant>,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            accumulated: Duration::ZERO,
            started: Some(Instant::now()),
        }
    }

    fn elapsed(&self) -> Duration {
        self.accumulated + self.started.map_or(Duration::ZERO, |s| s.elapsed())
    }

    fn pause(&mut self) {
        if let Some(s) = self.started.take() {
            self.accumulated += s.elapsed();
        }
    }

    fn resume(&mut self) {
        if self.started.is_none() {
            self.started = Some(Instant::now());
        }
    }
}

/// `||g(x; 0)||_∞` computed full-dimensionally. Costs one full gradient.
pub fn full_residual(problem: &Problem, x: &[f64], beta: f64) -> Result<f64> {
    let grad = problem.oracle().gradient_at(x)?;
    let zero = vec![0.0; x.len()];
    Ok(norm_inf(&residual_g(
        x,
        &zero,
        &grad,
        &zero,
        problem.regularizer(),
        beta,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step, 0 when the step was rejected.
    pub alpha: f64,
    /// Number of halvings before acceptance.
    pub backtracks: usize,
    /// `F(x) - F(x + alpha U_i t)` at the accepted step.
    pub decrease: f64,
    pub exhausted: bool,
}

/// Backtracking from `alpha = 1`, halving until
/// `F(x) - F(x + alpha U_i t) >= theta (ℓ(x; 0) - ℓ(x; alpha U_i t))`.
///
/// After `max_trials` failures the trial with the largest positive decrease is
/// taken; if none decreased `F` the step is rejected.
pub fn line_search(
    model: &BlockModel,
    oracle: &SmoothOracle,
    cache: &OracleCache,
    trial: &StepTrial,
    theta: f64,
    max_trials: usize,
) -> LineSearchOutcome {
    let reg = model.regularizer();
    let t = trial.direction();
    let mut alpha = 1.0;
    let mut best: Option<(f64, usize, f64)> = None;
    for k in 0..max_trials {
        let decrease = oracle.delta_objective(cache, reg, trial, alpha);
        if decrease >= theta * model.loss_diff(t, alpha) && decrease > 0.0 {
            return LineSearchOutcome {
                alpha,
                backtracks: k,
                decrease,
                exhausted: false,
            };
        }
        if decrease > 0.0 && best.is_none_or(|(_, _, d)| decrease > d) {
            best = Some((alpha, k, decrease));
        }
        alpha *= 0.5;
    }
    match best {
        Some((alpha, k, decrease)) => LineSearchOutcome {
            alpha,
            backtracks: k,
            decrease,
            exhausted: true,
        },
        None => LineSearchOutcome {
            alpha: 0.0,
            backtracks: max_trials,
            decrease: 0.0,
            exhausted: true,
        },
    }
}

/// Shared per-run state: iterate, cache, objective bookkeeping, trace and stopping rules.
struct RunState<'a> {
    problem: &'a Problem,
    cfg: &'a SolverConfig,
    x: Vec<f64>,
    cache: OracleCache,
    /// `F(x)`, decreased by the evaluated decrease of every committed step.
    objective: f64,
    clock: Stopwatch,
    trace: Vec<TraceRecord>,
    residual_checks: Vec<(usize, f64)>,
}

impl<'a> RunState<'a> {
    fn new(problem: &'a Problem, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate(problem.dim())?;
        let clock = Stopwatch::start();
        let x = cfg
            .initial_point
            .clone()
            .unwrap_or_else(|| vec![0.0; problem.dim()]);
        let cache = problem.oracle().cache_at(&x)?;
        let objective = problem.oracle().value(&cache) + problem.regularizer().value(&x);
        Ok(Self {
            problem,
            cfg,
            x,
            cache,
            objective,
            clock,
            trace: Vec::new(),
            residual_checks: Vec::new(),
        })
    }

    fn objective(&self) -> f64 {
        self.objective
    }

    fn oracle(&self) -> &'a SmoothOracle {
        self.problem.oracle()
    }

    fn reg(&self) -> &'a Regularizer {
        self.problem.regularizer()
    }

    /// Moves to `x + alpha U_i t`, whose evaluated decrease `F(x) - F(x + alpha U_i t)`
    /// is `decrease >= 0`.
    fn commit(
        &mut self,
        trial: &StepTrial,
        blk: &BlockSelection,
        alpha: f64,
        decrease: f64,
    ) -> Result<()> {
        debug_assert!(decrease >= 0.0);
        let oracle = self.problem.oracle();
        self.objective -= decrease;
        oracle.commit_step(&mut self.cache, trial, alpha);
        scatter_add(&mut self.x, blk, trial.direction(), alpha)?;
        oracle.maybe_refresh(&mut self.cache, &self.x)?;
        if cfg!(debug_assertions) && self.cache.updates_since_refresh() % 4096 < blk.len() {
            let drift = oracle.cache_drift(&self.cache, &self.x)?;
            debug_assert!(drift <= 1e-9, "oracle cache drifted by {drift:e}");
        }
        Ok(())
    }

    fn record(&mut self, mut rec: TraceRecord) {
        self.clock.pause();
        rec.time_s = self.clock.elapsed().as_secs_f64();
        rec.objective = self.objective();
        self.trace.push(rec);
        self.clock.resume();
    }

    fn record_initial(&mut self) {
        self.record(TraceRecord {
            iter: 0,
            time_s: 0.0,
            objective: 0.0,
            alpha: 0.0,
            tau: 0,
            inner_iters: 0,
            g0_norm: f64::NAN,
            gt_norm: f64::NAN,
            backtracks: 0,
            events: Events::INIT,
        });
    }

    /// Checks the stopping rules after iteration `k`.
    fn should_stop(&mut self, k: usize) -> Result<Option<Termination>> {
        if let Some(target) = self.cfg.target_objective {
            if self.objective() <= target {
                return Ok(Some(Termination::TargetObjective));
            }
        }
        if let Some(tol) = self.cfg.residual_tol {
            if k.is_multiple_of(self.cfg.check_period) {
                self.clock.pause();
                let r = full_residual(self.problem, &self.x, self.cfg.beta)?;
                self.residual_checks.push((k, r));
                self.clock.resume();
                if r <= tol {
                    return Ok(Some(Termination::ResidualTolerance));
                }
            }
        }
        if let Some(limit) = self.cfg.max_time {
            if self.clock.elapsed().as_secs_f64() >= limit {
                return Ok(Some(Termination::MaxTime));
            }
        }
        Ok(None)
    }

    fn finish(mut self, termination: Termination) -> RunResult {
        self.clock.pause();
        RunResult {
            objective: self.objective(),
            x: self.x,
            trace: self.trace,
            termination,
            residual_checks: self.residual_checks,
            elapsed: self.clock.elapsed(),
        }
    }
}

/// Robust coordinate descent.
///
/// Each iteration samples a block, skips it if its residual `g_i(x; 0)` vanishes,
/// computes an inexact model minimizer (closed form for identity or diagonal
/// curvature, proximal gradient otherwise), line-searches along it and commits.
pub fn rcd_run(problem: &Problem, cfg: &SolverConfig) -> Result<RunResult> {
    let mut st = RunState::new(problem, cfg)?;
    let mut sampler = BlockSampler::new(&cfg.sampling, problem.dim(), cfg.seed)?;
    st.record_initial();
    if let Some(term) = st.should_stop(0)? {
        return Ok(st.finish(term));
    }

    for k in 1..=cfg.max_iterations {
        let blk = sampler.sample();
        let tau = blk.len();
        let x_blk = gather(&st.x, &blk);
        let grad = st.oracle().block_gradient(&st.cache, &blk);
        let zero = vec![0.0; tau];
        let g0 = norm2(&residual_g(
            &x_blk,
            &zero,
            &grad,
            &zero,
            st.reg(),
            cfg.beta,
        )?);
        let mut rec = TraceRecord {
            iter: k,
            time_s: 0.0,
            objective: 0.0,
            alpha: 0.0,
            tau,
            inner_iters: 0,
            g0_norm: g0,
            gt_norm: g0,
            backtracks: 0,
            events: Events::NONE,
        };

        if g0 <= ZERO_RESIDUAL_TOL * (1.0 + norm2(&grad)) {
            rec.events.insert(Events::SKIP);
        } else {
            let curvature = cfg.hessian.build(st.oracle(), &st.cache, &blk);
            let model =
                BlockModel::from_parts(blk.clone(), x_blk, grad, curvature, *st.reg(), cfg.beta)?;
            let dir = if cfg.hessian.is_diagonal() {
                solve_diagonal(&model)?
            } else {
                solve_iterative(&model, &cfg.policy, g0)?
            };
            rec.inner_iters = dir.inner_iterations;
            rec.gt_norm = dir.residual_norm;
            if !dir.conditions_met && dir.inner_iterations >= cfg.policy.max_inner {
                rec.events.insert(Events::CAP_HIT);
            }
            if dir.model_decrease > 0.0 {
                let trial = st.oracle().prepare_trial(
                    &mut st.cache,
                    &blk,
                    model.point(),
                    &dir.t,
                    model.gradient(),
                )?;
                let ls = line_search(
                    &model,
                    st.oracle(),
                    &st.cache,
                    &trial,
                    cfg.theta,
                    cfg.max_backtracks,
                );
                rec.alpha = ls.alpha;
                rec.backtracks = ls.backtracks;
                if ls.exhausted {
                    rec.events.insert(Events::LS_EXHAUSTED);
                }
                if ls.alpha > 0.0 {
                    st.commit(&trial, &blk, ls.alpha, ls.decrease)?;
                } else {
                    rec.events.insert(Events::REJECTED);
                }
            } else {
                rec.events.insert(Events::REJECTED);
            }
        }
        st.record(rec);
        if let Some(term) = st.should_stop(k)? {
            return Ok(st.finish(term));
        }
    }
    Ok(st.finish(Termination::MaxIterations))
}

/// Uniform coordinate descent: blocks from a fixed partition, curvature
/// `(Σ_{j in block} L_j) I`, exact closed-form step, no line search.
pub fn ucdc_run(problem: &Problem, cfg: &SolverConfig) -> Result<RunResult> {
    let mut st = RunState::new(problem, cfg)?;
    let lipschitz = problem.oracle().coordinate_lipschitz();
    let mut sampler = BlockSampler::new(&cfg.sampling, problem.dim(), cfg.seed)?;
    st.record_initial();
    if let Some(term) = st.should_stop(0)? {
        return Ok(st.finish(term));
    }

    for k in 1..=cfg.max_iterations {
        let blk = sampler.sample();
        let tau = blk.len();
        let scale: f64 = blk.iter().map(|j| lipschitz[j]).sum();
        let x_blk = gather(&st.x, &blk);
        let grad = st.oracle().block_gradient(&st.cache, &blk);
        let model = BlockModel::from_parts(
            blk.clone(),
            x_blk,
            grad,
            Curvature::Diagonal(vec![scale; tau]),
            *st.reg(),
            cfg.beta,
        )?;
        let dir = solve_diagonal(&model)?;
        let mut rec = TraceRecord {
            iter: k,
            time_s: 0.0,
            objective: 0.0,
            alpha: 0.0,
            tau,
            inner_iters: 0,
            g0_norm: model.initial_residual_norm(),
            gt_norm: dir.residual_norm,
            backtracks: 0,
            events: Events::NONE,
        };
        if dir.t.iter().all(|&v| v == 0.0) {
            rec.events.insert(Events::SKIP);
        } else {
            let trial = st.oracle().prepare_trial(
                &mut st.cache,
                &blk,
                model.point(),
                &dir.t,
                model.gradient(),
            )?;
            let decrease = st
                .oracle()
                .delta_objective(&st.cache, st.reg(), &trial, 1.0);
            // The curvature majorizes f on the block, so a negative value is roundoff.
            if decrease >= 0.0 {
                rec.alpha = 1.0;
                st.commit(&trial, &blk, 1.0, decrease)?;
            } else {
                rec.events.insert(Events::REJECTED);
            }
        }
        st.record(rec);
        if let Some(term) = st.should_stop(k)? {
            return Ok(st.finish(term));
        }
    }
    Ok(st.finish(Termination::MaxIterations))
}

/// The four solver variants compared in the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Diagonal Hessian, closed-form direction, τ-subset sampling.
    RcdV1,
    /// Exact block Hessian plus ridge, iterative direction, τ-subset sampling.
    RcdV2,
    /// Uniform coordinate descent, single coordinates.
    UcdcV1,
    /// Uniform coordinate descent over a fixed partition into blocks of τ.
    UcdcV2,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::RcdV1,
        SolverKind::RcdV2,
        SolverKind::UcdcV1,
        SolverKind::UcdcV2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SolverKind::RcdV1 => "rcd-v1",
            SolverKind::RcdV2 => "rcd-v2",
            SolverKind::UcdcV1 => "ucdc-v1",
            SolverKind::UcdcV2 => "ucdc-v2",
        }
    }

    /// Sets the curvature strategy and sampling scheme this variant uses.
    pub fn configure(self, cfg: &mut SolverConfig, tau: usize, rho: f64) {
        match self {
            SolverKind::RcdV1 => {
                cfg.hessian = HessianStrategy::Diagonal;
                cfg.sampling = SamplingScheme::TauSubset { tau };
            }
            SolverKind::RcdV2 => {
                cfg.hessian = HessianStrategy::ExactBlockRidge { rho };
                cfg.sampling = SamplingScheme::TauSubset { tau };
            }
            SolverKind::UcdcV1 => {
                cfg.sampling = SamplingScheme::FixedPartition {
                    tau: 1,
                    probabilities: None,
                };
            }
            SolverKind::UcdcV2 => {
                cfg.sampling = SamplingScheme::FixedPartition {
                    tau,
                    probabilities: None,
                };
            }
        }
    }

    pub fn run(self, problem: &Problem, cfg: &SolverConfig) -> Result<RunResult> {
        match self {
            SolverKind::RcdV1 | SolverKind::RcdV2 => rcd_run(problem, cfg),
            SolverKind::UcdcV1 | SolverKind::UcdcV2 => ucdc_run(problem, cfg),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown solver '{s}' (expected rcd-v1, rcd-v2, ucdc-v1 or ucdc-v2)"
                ))
            })
    }
}
