//! Inexact minimization of the block model `Q_i` to obtain a search direction.
//!
//! Diagonal curvature admits a closed-form minimizer. General curvature is handled
//! by proximal-gradient iterations on the model, stopped as soon as
//!
//! ```text
//! Q(x; U_i t) < Q(x; 0)   and   ||g_i(x; t)|| <= η ||g_i(x; 0)||
//! ```
//!
//! hold (optionally with the stronger sufficient-decrease variant
//! `ξ (ℓ(x;0) - ℓ(x;U_i t)) <= Q(x;0) - Q(x;U_i t)` in place of the first condition).

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};
use crate::model::{residual_g, BlockModel, DIAGONAL_FLOOR};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InexactMode {
    Basic,
    SufficientDecrease { xi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    Constant(f64),
    /// `η = min(½, ||g_i(x; 0)||)`.
    Adaptive,
}

/// Metric of the inner proximal-gradient iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMetric {
    /// Step `1 / Λ_est` with `Λ_est ≈ λ_max(H)`.
    Scalar,
    /// Step `1 / (s D_jj)` per coordinate with `D = diag(H)` and
    /// `s ≈ λ_max(D^{-1/2} H D^{-1/2})`, taken from a row-sum bound or, when
    /// that is loose, a power-iteration estimate.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InexactnessPolicy {
    pub mode: InexactMode,
    pub eta: EtaRule,
    pub max_inner: usize,
    pub metric: InnerMetric,
}

impl Default for InexactnessPolicy {
    fn default() -> Self {
        Self {
            mode: InexactMode::Basic,
            eta: EtaRule::Constant(0.9),
            max_inner: 200,
            metric: InnerMetric::Jacobi,
        }
    }
}

impl InexactnessPolicy {
    pub fn validate(&self) -> Result<()> {
        if let EtaRule::Constant(eta) = self.eta {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::invalid(format!("eta must lie in [0, 1), got {eta}")));
            }
        }
        if let InexactMode::SufficientDecrease { xi } = self.mode {
            if !(xi > 0.0 && xi < 0.5) {
                return Err(Error::invalid(format!("xi must lie in (0, 1/2), got {xi}")));
            }
        }
        if self.max_inner == 0 {
            return Err(Error::invalid("inner iteration cap must be positive"));
        }
        Ok(())
    }

    /// The forcing term `η` for a block with initial residual norm `g0_norm`.
    pub fn eta_for(&self, g0_norm: f64) -> f64 {
        match self.eta {
            EtaRule::Constant(eta) => eta,
            EtaRule::Adaptive => g0_norm.min(0.5),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectionResult {
    pub t: Vec<f64>,
    pub inner_iterations: usize,
    /// `||g_i(x; t)||`.
    pub residual_norm: f64,
    /// `Q(x; 0) - Q(x; U_i t)`.
    pub model_decrease: f64,
    /// Whether the stopping conditions hold for `t`.
    pub conditions_met: bool,
}

/// Exact minimizer of the model for diagonal curvature:
/// `x_i + t = prox_{H^{-1}Ψ}(x_i - H^{-1} ∇_i f)`.
pub fn solve_diagonal(model: &BlockModel) -> Result<DirectionResult> {
    let d = model
        .curvature()
        .diagonal()
        .ok_or_else(|| Error::invalid("closed-form solve needs diagonal curvature"))?;
    if let Some(bad) = d.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!(
            "diagonal curvature entry {bad} is not positive"
        )));
    }
    let x = model.point();
    let g = model.gradient();
    let reg = model.regularizer();
    let t: Vec<f64> = (0..model.dim())
        .map(|j| reg.prox_scalar(1.0 / d[j], x[j] - g[j] / d[j]) - x[j])
        .collect();
    let ht = model.hessian_apply(&t);
    let residual_norm = norm2(&model.residual_with(&t, &ht));
    Ok(DirectionResult {
        model_decrease: -model.model_diff_with(&t, &ht),
        residual_norm,
        t,
        inner_iterations: 0,
        conditions_met: true,
    })
}

/// Evaluates the stopping conditions for `t`. Returns whether they hold and the
/// achieved ratio `||g_i(x; t)|| / ||g_i(x; 0)||`.
pub fn check_stopping(
    model: &BlockModel,
    t: &[f64],
    policy: &InexactnessPolicy,
    g0_norm: f64,
) -> (bool, f64) {
    let ht = model.hessian_apply(t);
    let q = model.model_diff_with(t, &ht);
    let gt = norm2(&model.residual_with(t, &ht));
    let ratio = if g0_norm > 0.0 {
        gt / g0_norm
    } else {
        f64::INFINITY
    };
    (conditions_hold(model, t, q, gt, policy, g0_norm), ratio)
}

fn conditions_hold(
    model: &BlockModel,
    t: &[f64],
    q: f64,
    gt: f64,
    policy: &InexactnessPolicy,
    g0_norm: f64,
) -> bool {
    if !(q < 0.0) || g0_norm <= 0.0 {
        return false;
    }
    if gt > policy.eta_for(g0_norm) * g0_norm {
        return false;
    }
    match policy.mode {
        InexactMode::Basic => true,
        InexactMode::SufficientDecrease { xi } => xi * model.loss_diff(t, 1.0) <= -q,
    }
}

/// Proximal-gradient iterations on the model, started from `t = 0`, in the
/// metric `Λ_est D` (see [`InnerMetric`]). If the curvature along a step exceeds
/// what the metric allows, `Λ_est` is doubled and the iterate discarded, which
/// keeps the model values monotone.
pub fn solve_iterative(
    model: &BlockModel,
    policy: &InexactnessPolicy,
    g0_norm: f64,
) -> Result<DirectionResult> {
    let n = model.dim();
    let x = model.point();
    let g = model.gradient();
    let reg = *model.regularizer();
    let curvature = model.curvature();
    let (metric, mut lipschitz) = match policy.metric {
        InnerMetric::Scalar => (vec![1.0; n], curvature.spectral_upper_estimate()),
        InnerMetric::Jacobi => {
            let d: Vec<f64> = curvature
                .diagonal_entries()
                .into_iter()
                .map(|v| v.max(DIAGONAL_FLOOR))
                .collect();
            let scaling: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
            // the scaled operator has unit diagonal, so λ_max >= 1 and a bound
            // below 2 cannot be improved by more than a factor of two
            let bound = curvature.scaled_row_sum_bound(&scaling);
            let s = if bound <= 2.0 {
                bound
            } else {
                bound.min(curvature.scaled_spectral_estimate(&scaling))
            };
            (d, s)
        }
    };
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!(
            "curvature spectral estimate {lipschitz} is not positive"
        )));
    }

    let mut t = vec![0.0; n];
    let mut ht = vec![0.0; n];
    let mut q = 0.0;
    let mut gt = g0_norm;
    let mut iterations = 0;
    let mut stalled = false;

    while iterations < policy.max_inner {
        iterations += 1;
        let t_new: Vec<f64> = (0..n)
            .map(|j| {
                let step = 1.0 / (lipschitz * metric[j]);
                let w = t[j] - step * (g[j] + ht[j]);
                reg.prox_scalar(step, x[j] + w) - x[j]
            })
            .collect();
        if t_new == t {
            stalled = true;
            break;
        }
        let ht_new = model.hessian_apply(&t_new);
        let (mut dhd, mut ddd) = (0.0, 0.0);
        for j in 0..n {
            let d = t_new[j] - t[j];
            dhd += d * (ht_new[j] - ht[j]);
            ddd += d * d * metric[j];
        }
        if dhd > lipschitz * ddd * (1.0 + 1e-12) {
            lipschitz *= 2.0;
            continue;
        }
        q = model.model_diff_with(&t_new, &ht_new);
        t = t_new;
        ht = ht_new;
        gt = norm2(&model.residual_with(&t, &ht));
        if conditions_hold(model, &t, q, gt, policy, g0_norm) {
            // independent re-check from scratch
            let (ok, _) = check_stopping(model, &t, policy, g0_norm);
            if ok {
                return Ok(DirectionResult {
                    t,
                    inner_iterations: iterations,
                    residual_norm: gt,
                    model_decrease: -q,
                    conditions_met: true,
                });
            }
        }
    }

    // a fixed point is the model minimizer; without decrease the block is
    // optimal up to roundoff and the caller rejects the step
    if q < 0.0 || stalled {
        Ok(DirectionResult {
            t,
            inner_iterations: iterations,
            residual_norm: gt,
            model_decrease: -q,
            conditions_met: false,
        })
    } else {
        Err(Error::DegenerateDirection { iterations })
    }
}

/// Full-dimensional accelerated proximal gradient (with backtracking and
/// function-value restarts) run until `||g(x; 0)||_∞ <= tol` with `β = 1`.
///
/// Used as an independent oracle for the coordinate solvers.
pub fn reference_solve(problem: &Problem, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let oracle = problem.oracle();
    let reg = *problem.regularizer();
    let n = problem.dim();
    let objective = |x: &[f64]| -> Result<f64> { Ok(oracle.value_at(x)? + reg.value(x)) };
    let residual = |x: &[f64]| -> Result<f64> {
        let g = oracle.gradient_at(x)?;
        let zero = vec![0.0; n];
        Ok(norm_inf(&residual_g(x, &zero, &g, &zero, &reg, 1.0)?))
    };

    let mut x = vec![0.0; n];
    let mut fx = objective(&x)?;
    if residual(&x)? <= tol {
        return Ok(x);
    }
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut lipschitz = 1.0f64;

    for _ in 0..max_iter {
        let grad_y = oracle.gradient_at(&y)?;
        let f_y = oracle.value_at(&y)?;
        let (z, smooth_z) = loop {
            let step = 1.0 / lipschitz;
            let z: Vec<f64> = (0..n)
                .map(|j| reg.prox_scalar(step, y[j] - step * grad_y[j]))
                .collect();
            let f_z = oracle.value_at(&z)?;
            let d: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = f_y
                + crate::linalg::dot(&grad_y, &d)
                + 0.5 * lipschitz * crate::linalg::dot(&d, &d);
            if f_z <= model + 1e-14 * f_y.abs().max(1.0) || lipschitz > 1e300 {
                break (z, f_z);
            }
            lipschitz *= 2.0;
        };
        let fz = smooth_z + reg.value(&z);
        if fz > fx && momentum > 1.0 {
            // restart from the last iterate without momentum
            y.clone_from(&x);
            momentum = 1.0;
            continue;
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        y = z
            .iter()
            .zip(&x)
            .map(|(zj, xj)| zj + beta * (zj - xj))
            .collect();
        x = z;
        fx = fz;
        momentum = next;
        if residual(&x)? <= tol {
            return Ok(x);
        }
    }
    Err(Error::MaxIterations(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{BlockSelection, CscMatrix};
    use crate::model::Curvature;
    use crate::regularizer::Regularizer;
    use crate::smooth::SmoothOracle;

    fn one_d(x: f64, curvature: Curvature) -> BlockModel {
        BlockModel::from_parts(
            BlockSelection::single(0),
            vec![x],
            vec![x - 3.0],
            curvature,
            Regularizer::L1 { weight: 1.0 },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn diagonal_solve_examples() {
        let r = solve_diagonal(&one_d(0.0, Curvature::Diagonal(vec![1.0]))).unwrap();
        assert_eq!(r.t, vec![2.0]);
        assert!(r.conditions_met);
        assert_eq!(r.residual_norm, 0.0);
        assert_eq!(r.model_decrease, 2.0);

        // already at the minimizer
        let r = solve_diagonal(&one_d(2.0, Curvature::Diagonal(vec![1.0]))).unwrap();
        assert_eq!(r.t, vec![0.0]);

        // zero regularizer gives the Newton step -H^{-1} g
        let m = BlockModel::from_parts(
            BlockSelection::full(2),
            vec![0.0, 1.0],
            vec![2.0, -3.0],
            Curvature::Diagonal(vec![4.0, 0.5]),
            Regularizer::Zero,
            1.0,
        )
        .unwrap();
        assert_eq!(solve_diagonal(&m).unwrap().t, vec![-0.5, 6.0]);

        assert!(solve_diagonal(&one_d(0.0, Curvature::Diagonal(vec![0.0]))).is_err());
    }

    #[test]
    fn iterative_solve_examples() {
        let exact = Curvature::Diagonal(vec![1.0]);
        let m = one_d(0.0, exact);
        let g0 = m.initial_residual_norm();
        let policy = InexactnessPolicy {
            eta: EtaRule::Constant(0.0),
            ..Default::default()
        };
        let r = solve_iterative(&m, &policy, g0).unwrap();
        assert!((r.t[0] - 2.0).abs() < 1e-12);

        let policy = InexactnessPolicy {
            max_inner: 1,
            ..Default::default()
        };
        let r = solve_iterative(&m, &policy, g0).unwrap();
        assert!(r.model_decrease > 0.0);
    }

    #[test]
    fn stopping_examples() {
        let m = one_d(0.0, Curvature::Diagonal(vec![1.0]));
        let g0 = m.initial_residual_norm();
        let pol = InexactnessPolicy::default();
        assert!(!check_stopping(&m, &[0.0], &pol, g0).0);
        let strict = InexactnessPolicy {
            eta: EtaRule::Constant(0.0),
            ..pol
        };
        assert!(check_stopping(&m, &[2.0], &strict, g0).0);
        // positive model change is rejected regardless of the residual
        assert!(m.model_diff(&[-1.0]) > 0.0);
        assert!(
            !check_stopping(
                &m,
                &[-1.0],
                &InexactnessPolicy {
                    eta: EtaRule::Constant(0.99),
                    ..pol
                },
                g0
            )
            .0
        );
    }

    #[test]
    fn policy_validation() {
        let mut p = InexactnessPolicy::default();
        assert!(p.validate().is_ok());
        p.eta = EtaRule::Constant(1.0);
        assert!(p.validate().is_err());
        p.eta = EtaRule::Adaptive;
        p.mode = InexactMode::SufficientDecrease { xi: 0.6 };
        assert!(p.validate().is_err());
        assert_eq!(p.eta_for(0.01), 0.01);
        assert_eq!(p.eta_for(3.0), 0.5);
    }

    #[test]
    fn reference_solve_one_d() {
        let a = CscMatrix::from_dense(&[vec![1.0]]).unwrap();
        let p = Problem::new(
            SmoothOracle::least_squares(a, vec![3.0]).unwrap(),
            Regularizer::L1 { weight: 1.0 },
        );
        let x = reference_solve(&p, 1e-12, 1000).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn reference_solve_normal_equations() {
        let rows = vec![vec![2.0, 1.0], vec![1.0, 3.0], vec![0.0, 1.0]];
        let b = vec![1.0, 2.0, 3.0];
        let p = Problem::new(
            SmoothOracle::least_squares(CscMatrix::from_dense(&rows).unwrap(), b.clone()).unwrap(),
            Regularizer::Zero,
        );
        let x = reference_solve(&p, 1e-11, 10_000).unwrap();
        // A^T A = [[5,5],[5,11]], A^T b = [4, 10]
        let det = 5.0 * 11.0 - 25.0;
        let exact = [
            (11.0 * 4.0 - 5.0 * 10.0) / det,
            (5.0 * 10.0 - 5.0 * 4.0) / det,
        ];
        assert!((x[0] - exact[0]).abs() < 1e-9 && (x[1] - exact[1]).abs() < 1e-9);
    }
}
