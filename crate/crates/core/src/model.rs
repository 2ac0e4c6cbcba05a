//! The block piecewise-quadratic model
//!
//! ```text
//! Q_i(x; t) = <∇_i f(x), t> + ½ <t, H t> + Ψ_i(x_i + t)
//! ```
//!
//! together with the curvature choices for `H`, the linearized loss used by the
//! line search, and the stationarity residual
//!
//! ```text
//! g(x; t) = ∇f(x) + H t + (1/β) prox_{(βΨ)*}(x + t - β(∇f(x) + H t)).
//! ```
//!
//! `g(x; 0) = 0` exactly at minimizers of `F`, for any `β > 0`.

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, gather, norm2, BlockSelection};
use crate::regularizer::Regularizer;
use crate::smooth::{BlockHessianOperator, OracleCache, SmoothOracle};

/// Floor applied to diagonal curvature entries so the model stays positive definite.
pub const DIAGONAL_FLOOR: f64 = 1e-12;
pub const POWER_ITERATIONS: usize = 20;
/// Multiplier applied to the power-method eigenvalue estimate.
pub const SPECTRAL_INFLATION: f64 = 1.1;

/// How the block curvature `H_k^{(i)}` is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianStrategy {
    /// `H = I`.
    Identity,
    /// `H = diag(∇_i² f(x))`, zeros floored at [`DIAGONAL_FLOOR`].
    Diagonal,
    /// `H = ∇_i² f(x) + ρ I`, applied matrix-free.
    ExactBlockRidge { rho: f64 },
}

impl HessianStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HessianStrategy::ExactBlockRidge { rho } if !(rho >= 0.0 && rho.is_finite()) => {
                Err(Error::invalid(format!("ridge must be >= 0, got {rho}")))
            }
            _ => Ok(()),
        }
    }

    /// Curvature operator for block `blk` at the cached point.
    pub fn build(
        &self,
        oracle: &SmoothOracle,
        cache: &OracleCache,
        blk: &BlockSelection,
    ) -> Curvature {
        match *self {
            HessianStrategy::Identity => Curvature::Diagonal(vec![1.0; blk.len()]),
            HessianStrategy::Diagonal => Curvature::Diagonal(
                oracle
                    .block_hessian_diag(cache, blk)
                    .into_iter()
                    .map(|d| d.max(DIAGONAL_FLOOR))
                    .collect(),
            ),
            HessianStrategy::ExactBlockRidge { rho } => Curvature::Exact {
                op: oracle.block_hessian_operator(cache, blk),
                rho,
            },
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, HessianStrategy::ExactBlockRidge { .. })
    }
}

/// Apply `H` for a strategy without keeping the operator around.
pub fn hessian_apply(
    strategy: &HessianStrategy,
    oracle: &SmoothOracle,
    cache: &OracleCache,
    blk: &BlockSelection,
    t: &[f64],
) -> Result<Vec<f64>> {
    check_len("hessian_apply", blk.len(), t.len())?;
    Ok(strategy.build(oracle, cache, blk).apply(t))
}

/// A concrete block curvature operator.
#[derive(Debug, Clone)]
pub enum Curvature {
    Diagonal(Vec<f64>),
    Exact { op: BlockHessianOperator, rho: f64 },
}

impl Curvature {
    pub fn dim(&self) -> usize {
        match self {
            Curvature::Diagonal(d) => d.len(),
            Curvature::Exact { op, .. } => op.dim(),
        }
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Curvature::Diagonal(d) => d.iter().zip(t).map(|(a, b)| a * b).collect(),
            Curvature::Exact { op, rho } => {
                let mut out = op.apply(t);
                if *rho != 0.0 {
                    for (o, &ti) in out.iter_mut().zip(t) {
                        *o += rho * ti;
                    }
                }
                out
            }
        }
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        match self {
            Curvature::Diagonal(d) => Some(d),
            Curvature::Exact { .. } => None,
        }
    }

    /// Lower spectral bound `λ_lb` that the strategy guarantees.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Curvature::Diagonal(d) => d.iter().copied().fold(f64::INFINITY, f64::min),
            Curvature::Exact { rho, .. } => *rho,
        }
    }

    /// Diagonal entries of `H`.
    pub fn diagonal_entries(&self) -> Vec<f64> {
        match self {
            Curvature::Diagonal(d) => d.clone(),
            Curvature::Exact { op, rho } => op.diagonal().into_iter().map(|d| d + rho).collect(),
        }
    }

    /// Estimate of `λ_max(H)`: exact for diagonal operators, inflated power
    /// iteration otherwise.
    pub fn spectral_upper_estimate(&self) -> f64 {
        match self {
            Curvature::Diagonal(d) => SPECTRAL_INFLATION * d.iter().copied().fold(0.0, f64::max),
            Curvature::Exact { .. } => self
                .scaled_spectral_estimate(&vec![1.0; self.dim()])
                .max(self.lower_bound()),
        }
    }

    /// Upper bound on `λ_max(S H S)` from absolute row sums, `S = diag(scaling)`.
    pub fn scaled_row_sum_bound(&self, scaling: &[f64]) -> f64 {
        match self {
            Curvature::Diagonal(d) => d
                .iter()
                .zip(scaling)
                .map(|(v, s)| v * s * s)
                .fold(0.0, f64::max),
            Curvature::Exact { op, rho } => op
                .abs_row_sums(scaling)
                .into_iter()
                .zip(scaling)
                .map(|(r, s)| r + rho * s * s)
                .fold(0.0, f64::max),
        }
    }

    /// Inflated power-iteration estimate of `λ_max(S H S)` with `S = diag(scaling)`.
    /// Never below the largest scaled diagonal entry.
    pub fn scaled_spectral_estimate(&self, scaling: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(scaling.len(), n);
        // fixed pseudo-random start with mixed signs, so no structured
        // eigenvector (constant, alternating) is missed
        let mut v: Vec<f64> = (0..n as u64)
            .map(|j| {
                let h = (j + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
                h as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut est: f64 = 0.0;
        let mut sv = vec![0.0; n];
        for _ in 0..POWER_ITERATIONS {
            for j in 0..n {
                sv[j] = scaling[j] * v[j];
            }
            let mut hv = self.apply(&sv);
            for j in 0..n {
                hv[j] *= scaling[j];
            }
            let nh = norm2(&hv);
            if nh == 0.0 {
                break;
            }
            est = nh;
            v = hv.into_iter().map(|x| x / nh).collect();
        }
        // λ_max is at least the largest diagonal entry
        let diag_max = self
            .diagonal_entries()
            .iter()
            .zip(scaling)
            .map(|(d, s)| d * s * s)
            .fold(0.0, f64::max);
        SPECTRAL_INFLATION * est.max(diag_max)
    }
}

/// Stationarity residual `g(x; t)` given `ht = H t`.
///
/// Computed as `∇f + Ht + (1/β) prox_{(βΨ)*}(u)` with `u = x + t - β(∇f + Ht)`; in
/// debug builds the equivalent form `(1/β)(x + t - prox_{βΨ}(u))` is checked against it.
pub fn residual_g(
    x: &[f64],
    t: &[f64],
    grad: &[f64],
    ht: &[f64],
    reg: &Regularizer,
    beta: f64,
) -> Result<Vec<f64>> {
    let n = x.len();
    check_len("residual direction", n, t.len())?;
    check_len("residual gradient", n, grad.len())?;
    check_len("residual curvature", n, ht.len())?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let v: Vec<f64> = grad.iter().zip(ht).map(|(g, h)| g + h).collect();
    let u: Vec<f64> = (0..n).map(|j| x[j] + t[j] - beta * v[j]).collect();
    let conj = reg.prox_conjugate(beta, &u)?;
    let out: Vec<f64> = v.iter().zip(&conj).map(|(vj, cj)| vj + cj / beta).collect();
    if cfg!(debug_assertions) {
        let p = reg.prox(beta, &u)?;
        for j in 0..n {
            let alt = (x[j] + t[j] - p[j]) / beta;
            let scale = 1.0 + v[j].abs() + (x[j] + t[j]).abs() / beta + u[j].abs() / beta;
            debug_assert!(
                (alt - out[j]).abs() <= 1e-12 * scale,
                "residual forms disagree: {} vs {}",
                out[j],
                alt
            );
        }
    }
    Ok(out)
}

/// Quadratic model of `F` on one block at the current iterate.
#[derive(Debug, Clone)]
pub struct BlockModel {
    blk: BlockSelection,
    x_blk: Vec<f64>,
    grad: Vec<f64>,
    curvature: Curvature,
    reg: Regularizer,
    beta: f64,
}

impl BlockModel {
    pub fn new(
        oracle: &SmoothOracle,
        cache: &OracleCache,
        reg: Regularizer,
        x: &[f64],
        blk: BlockSelection,
        strategy: &HessianStrategy,
        beta: f64,
    ) -> Result<Self> {
        let x_blk = gather(x, &blk);
        let grad = oracle.block_gradient(cache, &blk);
        let curvature = strategy.build(oracle, cache, &blk);
        Self::from_parts(blk, x_blk, grad, curvature, reg, beta)
    }

    pub fn from_parts(
        blk: BlockSelection,
        x_blk: Vec<f64>,
        grad: Vec<f64>,
        curvature: Curvature,
        reg: Regularizer,
        beta: f64,
    ) -> Result<Self> {
        check_len("model point", blk.len(), x_blk.len())?;
        check_len("model gradient", blk.len(), grad.len())?;
        check_len("model curvature", blk.len(), curvature.dim())?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            blk,
            x_blk,
            grad,
            curvature,
            reg,
            beta,
        })
    }

    pub fn block(&self) -> &BlockSelection {
        &self.blk
    }

    pub fn dim(&self) -> usize {
        self.blk.len()
    }

    pub fn point(&self) -> &[f64] {
        &self.x_blk
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn curvature(&self) -> &Curvature {
        &self.curvature
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hessian_apply(&self, t: &[f64]) -> Vec<f64> {
        self.curvature.apply(t)
    }

    /// `Q(x; U_i t) - Q(x; 0)`.
    pub fn model_diff(&self, t: &[f64]) -> f64 {
        let ht = self.curvature.apply(t);
        self.model_diff_with(t, &ht)
    }

    pub fn model_diff_with(&self, t: &[f64], ht: &[f64]) -> f64 {
        dot(&self.grad, t) + 0.5 * dot(t, ht) + self.reg.block_value_diff(&self.x_blk, t, 1.0)
    }

    /// `ℓ(x; 0) - ℓ(x; alpha U_i t)`.
    pub fn loss_diff(&self, t: &[f64], alpha: f64) -> f64 {
        if alpha == 0.0 {
            return 0.0;
        }
        -(alpha * dot(&self.grad, t) + self.reg.block_value_diff(&self.x_blk, t, alpha))
    }

    /// Block residual `g_i(x; t)`.
    pub fn residual(&self, t: &[f64]) -> Vec<f64> {
        let ht = self.curvature.apply(t);
        self.residual_with(t, &ht)
    }

    pub fn residual_with(&self, t: &[f64], ht: &[f64]) -> Vec<f64> {
        residual_g(&self.x_blk, t, &self.grad, ht, &self.reg, self.beta)
            .expect("block model dimensions are validated at construction")
    }

    /// `||g_i(x; 0)||`.
    pub fn initial_residual_norm(&self) -> f64 {
        let zero = vec![0.0; self.dim()];
        norm2(&self.residual_with(&zero, &zero))
    }
}
