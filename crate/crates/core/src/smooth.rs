//! Smooth loss oracles: least squares `½||Ax - b||²` and logistic
//! `Σ_j log(1 + exp(-b_j a_j^T x))`.
//!
//! Each oracle keeps an [`OracleCache`] with the per-sample quantities that make
//! block-local work cheap: the residual `Ax - b` for least squares, the margins
//! `b_j a_j^T x` for logistic loss, and the current loss value. A search direction
//! is turned into a [`StepTrial`] once; the objective change for any step size and
//! the final commit are then evaluated on the rows the block touches only.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, BlockSelection, CscMatrix};
use crate::regularizer::Regularizer;

/// Coordinates updated between full cache recomputations.
pub const CACHE_REFRESH_PERIOD: usize = 1_000_000;

/// Lower floor applied to coordinate Lipschitz constants of empty columns.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LeastSquares,
    Logistic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least-squares",
            LossKind::Logistic => "logistic",
        }
    }
}

/// `log(1 + exp(-z))` without overflow.
#[inline]
pub fn log1p_exp_neg(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `log(1 + exp(-m)) - log(1 + exp(-(m + delta)))`.
///
/// For small `delta` this is `-log1p(σ(-m) expm1(-delta))`, which keeps full
/// relative accuracy where the plain difference would cancel.
#[inline]
pub fn softplus_decrease(m: f64, delta: f64) -> f64 {
    if delta.abs() <= 1.0 {
        -(sigmoid(-m) * (-delta).exp_m1()).ln_1p()
    } else {
        log1p_exp_neg(m) - log1p_exp_neg(m + delta)
    }
}

/// Logistic sigmoid `1 / (1 + exp(-z))`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct SmoothOracle {
    kind: LossKind,
    a: CscMatrix,
    b: Vec<f64>,
}

/// Incremental state tied to one iterate `x`.
#[derive(Debug, Clone)]
pub struct OracleCache {
    /// Residual `Ax - b` (least squares) or margins `b_j a_j^T x` (logistic).
    aux: Vec<f64>,
    value: f64,
    updates_since_refresh: usize,
    scratch: Vec<f64>,
    touched: Vec<bool>,
    /// Row-to-local-index map used while building block operators; all `usize::MAX`
    /// between uses.
    local_index: RefCell<Vec<usize>>,
}

impl OracleCache {
    pub fn aux(&self) -> &[f64] {
        &self.aux
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }
}

/// A direction `t` on block `blk` prepared for repeated objective-change queries.
#[derive(Debug, Clone)]
pub struct StepTrial {
    rows: Vec<usize>,
    /// Least squares: `(A_i t)_q`; logistic: `b_q (A_i t)_q`.
    row_delta: Vec<f64>,
    grad_dot_t: f64,
    row_delta_sq: f64,
    x_blk: Vec<f64>,
    t: Vec<f64>,
}

impl StepTrial {
    pub fn direction(&self) -> &[f64] {
        &self.t
    }

    pub fn block_point(&self) -> &[f64] {
        &self.x_blk
    }

    /// Rows of `A` touched by the direction.
    pub fn touched_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Matrix-free block Hessian `A_i^T D A_i` restricted to the rows the block touches.
#[derive(Debug, Clone)]
pub struct BlockHessianOperator {
    /// Offsets into `entries` per block column.
    col_ptr: Vec<usize>,
    /// (local row, value) pairs.
    entries: Vec<(usize, f64)>,
    /// Curvature weight per local row (1 for least squares).
    weights: Vec<f64>,
}

impl BlockHessianOperator {
    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.entries[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        debug_assert_eq!(t.len(), self.dim());
        let mut w = vec![0.0; self.weights.len()];
        for (j, &tj) in t.iter().enumerate() {
            if tj == 0.0 {
                continue;
            }
            for &(r, v) in self.column(j) {
                w[r] += v * tj;
            }
        }
        for (wr, d) in w.iter_mut().zip(&self.weights) {
            *wr *= d;
        }
        (0..self.dim())
            .map(|j| self.column(j).iter().map(|&(r, v)| v * w[r]).sum())
            .collect()
    }

    /// Row sums of `|S A_i^T D A_i S|` bounded via `|A_i|`, with `S = diag(scaling)`.
    pub fn abs_row_sums(&self, scaling: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.weights.len()];
        for (j, &sj) in scaling.iter().enumerate() {
            for &(q, v) in self.column(j) {
                r[q] += v.abs() * sj;
            }
        }
        (0..self.dim())
            .map(|j| {
                scaling[j]
                    * self
                        .column(j)
                        .iter()
                        .map(|&(q, v)| v.abs() * self.weights[q] * r[q])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                self.column(j)
                    .iter()
                    .map(|&(r, v)| v * v * self.weights[r])
                    .sum()
            })
            .collect()
    }
}

impl SmoothOracle {
    pub fn least_squares(a: CscMatrix, b: Vec<f64>) -> Result<Self> {
        check_len("least-squares targets", a.nrows(), b.len())?;
        if !crate::linalg::all_finite(&b) {
            return Err(Error::NonFinite("least-squares targets"));
        }
        Ok(Self {
            kind: LossKind::LeastSquares,
            a,
            b,
        })
    }

    pub fn logistic(a: CscMatrix, labels: Vec<f64>) -> Result<Self> {
        check_len("logistic labels", a.nrows(), labels.len())?;
        if let Some(bad) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::invalid(format!("logistic label {bad} is not ±1")));
        }
        Ok(Self {
            kind: LossKind::Logistic,
            a,
            b: labels,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.a
    }

    pub fn targets(&self) -> &[f64] {
        &self.b
    }

    /// Number of variables `N`.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Number of samples `m`.
    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    fn aux_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut ax = self.a.matvec(x)?;
        match self.kind {
            LossKind::LeastSquares => {
                for (v, b) in ax.iter_mut().zip(&self.b) {
                    *v -= b;
                }
            }
            LossKind::Logistic => {
                for (v, b) in ax.iter_mut().zip(&self.b) {
                    *v *= b;
                }
            }
        }
        Ok(ax)
    }

    fn value_from_aux(&self, aux: &[f64]) -> f64 {
        match self.kind {
            LossKind::LeastSquares => 0.5 * dot(aux, aux),
            LossKind::Logistic => aux.iter().map(|&m| log1p_exp_neg(m)).sum(),
        }
    }

    /// Builds a fresh cache for the point `x`.
    pub fn cache_at(&self, x: &[f64]) -> Result<OracleCache> {
        let aux = self.aux_at(x)?;
        let value = self.value_from_aux(&aux);
        let m = self.samples();
        Ok(OracleCache {
            aux,
            value,
            updates_since_refresh: 0,
            scratch: vec![0.0; m],
            touched: vec![false; m],
            local_index: RefCell::new(vec![usize::MAX; m]),
        })
    }

    /// Recomputes the cache from scratch at `x`.
    pub fn refresh(&self, cache: &mut OracleCache, x: &[f64]) -> Result<()> {
        cache.aux = self.aux_at(x)?;
        cache.value = self.value_from_aux(&cache.aux);
        cache.updates_since_refresh = 0;
        Ok(())
    }

    /// Refreshes once enough coordinate updates have accumulated.
    pub fn maybe_refresh(&self, cache: &mut OracleCache, x: &[f64]) -> Result<bool> {
        if cache.updates_since_refresh >= CACHE_REFRESH_PERIOD {
            self.refresh(cache, x)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// `f(x)` from the cache.
    pub fn value(&self, cache: &OracleCache) -> f64 {
        cache.value
    }

    /// `f(x)` recomputed from scratch.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_from_aux(&self.aux_at(x)?))
    }

    /// Per-sample weight `w_q` such that `∇f = A^T w`.
    #[inline]
    fn gradient_weight(&self, aux: &[f64], q: usize) -> f64 {
        match self.kind {
            LossKind::LeastSquares => aux[q],
            LossKind::Logistic => -self.b[q] * sigmoid(-aux[q]),
        }
    }

    #[inline]
    fn curvature_weight(&self, aux: &[f64], q: usize) -> f64 {
        match self.kind {
            LossKind::LeastSquares => 1.0,
            LossKind::Logistic => sigmoid(aux[q]) * sigmoid(-aux[q]),
        }
    }

    fn coordinate_gradient(&self, cache: &OracleCache, j: usize) -> f64 {
        let (rows, vals) = self.a.column(j);
        rows.iter()
            .zip(vals)
            .map(|(&q, &v)| v * self.gradient_weight(&cache.aux, q))
            .sum()
    }

    /// `∇_i f(x)`.
    pub fn block_gradient(&self, cache: &OracleCache, blk: &BlockSelection) -> Vec<f64> {
        blk.iter()
            .map(|j| self.coordinate_gradient(cache, j))
            .collect()
    }

    /// Full gradient `∇f(x)`.
    pub fn gradient(&self, cache: &OracleCache) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.coordinate_gradient(cache, j))
            .collect()
    }

    pub fn gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradient(&self.cache_at(x)?))
    }

    /// Matrix-free operator for the block Hessian `∇_i² f(x)`.
    pub fn block_hessian_operator(
        &self,
        cache: &OracleCache,
        blk: &BlockSelection,
    ) -> BlockHessianOperator {
        let mut local = cache.local_index.borrow_mut();
        let mut rows = Vec::new();
        let mut col_ptr = Vec::with_capacity(blk.len() + 1);
        col_ptr.push(0);
        let mut entries = Vec::new();
        for j in blk.iter() {
            let (rs, vals) = self.a.column(j);
            for (&q, &v) in rs.iter().zip(vals) {
                if local[q] == usize::MAX {
                    local[q] = rows.len();
                    rows.push(q);
                }
                entries.push((local[q], v));
            }
            col_ptr.push(entries.len());
        }
        for &q in &rows {
            local[q] = usize::MAX;
        }
        let weights = rows
            .iter()
            .map(|&q| self.curvature_weight(&cache.aux, q))
            .collect();
        BlockHessianOperator {
            col_ptr,
            entries,
            weights,
        }
    }

    /// `∇_i² f(x) t`.
    pub fn block_hessian_vec(
        &self,
        cache: &OracleCache,
        blk: &BlockSelection,
        t: &[f64],
    ) -> Result<Vec<f64>> {
        check_len("block_hessian_vec", blk.len(), t.len())?;
        Ok(self.block_hessian_operator(cache, blk).apply(t))
    }

    /// `diag(∇_i² f(x))`.
    pub fn block_hessian_diag(&self, cache: &OracleCache, blk: &BlockSelection) -> Vec<f64> {
        blk.iter()
            .map(|j| {
                let (rows, vals) = self.a.column(j);
                rows.iter()
                    .zip(vals)
                    .map(|(&q, &v)| v * v * self.curvature_weight(&cache.aux, q))
                    .sum()
            })
            .collect()
    }

    /// Coordinate Lipschitz constants `L_j`, floored at [`LIPSCHITZ_FLOOR`].
    pub fn coordinate_lipschitz(&self) -> Vec<f64> {
        let scale = match self.kind {
            LossKind::LeastSquares => 1.0,
            LossKind::Logistic => 0.25,
        };
        (0..self.dim())
            .map(|j| {
                let (rows, vals) = self.a.column(j);
                let s: f64 = rows
                    .iter()
                    .zip(vals)
                    .map(|(&q, &v)| {
                        let y = if self.kind == LossKind::Logistic {
                            self.b[q]
                        } else {
                            1.0
                        };
                        (v * y) * (v * y)
                    })
                    .sum();
                (scale * s).max(LIPSCHITZ_FLOOR)
            })
            .collect()
    }

    /// Prepares the block-local data for evaluating `F(x) - F(x + alpha U_i t)`.
    ///
    /// `grad_blk` must be `∇_i f(x)` at the cached point.
    pub fn prepare_trial(
        &self,
        cache: &mut OracleCache,
        blk: &BlockSelection,
        x_blk: &[f64],
        t: &[f64],
        grad_blk: &[f64],
    ) -> Result<StepTrial> {
        check_len("prepare_trial direction", blk.len(), t.len())?;
        check_len("prepare_trial point", blk.len(), x_blk.len())?;
        check_len("prepare_trial gradient", blk.len(), grad_blk.len())?;
        let mut rows = Vec::new();
        for (j, &tj) in blk.iter().zip(t) {
            if tj == 0.0 {
                continue;
            }
            let (rs, vals) = self.a.column(j);
            for (&q, &v) in rs.iter().zip(vals) {
                if !cache.touched[q] {
                    cache.touched[q] = true;
                    rows.push(q);
                }
                cache.scratch[q] += v * tj;
            }
        }
        rows.sort_unstable();
        let mut row_delta = Vec::with_capacity(rows.len());
        for &q in &rows {
            let w = cache.scratch[q];
            cache.scratch[q] = 0.0;
            cache.touched[q] = false;
            row_delta.push(match self.kind {
                LossKind::LeastSquares => w,
                LossKind::Logistic => self.b[q] * w,
            });
        }
        Ok(StepTrial {
            grad_dot_t: dot(grad_blk, t),
            row_delta_sq: dot(&row_delta, &row_delta),
            rows,
            row_delta,
            x_blk: x_blk.to_vec(),
            t: t.to_vec(),
        })
    }

    /// `f(x) - f(x + alpha U_i t)`.
    pub fn trial_loss_decrease(&self, cache: &OracleCache, trial: &StepTrial, alpha: f64) -> f64 {
        if alpha == 0.0 {
            return 0.0;
        }
        match self.kind {
            LossKind::LeastSquares => {
                -alpha * trial.grad_dot_t - 0.5 * alpha * alpha * trial.row_delta_sq
            }
            LossKind::Logistic => trial
                .rows
                .iter()
                .zip(&trial.row_delta)
                .map(|(&q, &d)| softplus_decrease(cache.aux[q], alpha * d))
                .sum(),
        }
    }

    /// `F(x) - F(x + alpha U_i t)`, evaluated block-locally.
    pub fn delta_objective(
        &self,
        cache: &OracleCache,
        reg: &Regularizer,
        trial: &StepTrial,
        alpha: f64,
    ) -> f64 {
        if alpha == 0.0 {
            return 0.0;
        }
        self.trial_loss_decrease(cache, trial, alpha)
            - reg.block_value_diff(&trial.x_blk, &trial.t, alpha)
    }

    /// Moves the cache to `x + alpha U_i t`. The caller updates `x` itself.
    pub fn commit_step(&self, cache: &mut OracleCache, trial: &StepTrial, alpha: f64) {
        if alpha == 0.0 {
            return;
        }
        let decrease = self.trial_loss_decrease(cache, trial, alpha);
        for (&q, &d) in trial.rows.iter().zip(&trial.row_delta) {
            cache.aux[q] += alpha * d;
        }
        cache.value -= decrease;
        cache.updates_since_refresh += trial.t.len();
    }

    /// Largest relative deviation of the cache from a fresh recomputation at `x`.
    pub fn cache_drift(&self, cache: &OracleCache, x: &[f64]) -> Result<f64> {
        let fresh = self.aux_at(x)?;
        let value = self.value_from_aux(&fresh);
        let scale = |a: f64| a.abs().max(1.0);
        let mut drift = (cache.value - value).abs() / scale(value);
        for (c, f) in cache.aux.iter().zip(&fresh) {
            drift = drift.max((c - f).abs() / scale(*f));
        }
        Ok(drift)
    }
}
