mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rcd_core::subsolver::{solve_diagonal, solve_iterative};
use rcd_core::{
    BlockModel, BlockSelection, CscMatrix, EtaRule, HessianStrategy, InexactMode,
    InexactnessPolicy, InnerMetric, Regularizer, SmoothOracle,
};

struct Case {
    a: CscMatrix,
    targets: Vec<f64>,
    logistic: bool,
    x: Vec<f64>,
    cols: Vec<usize>,
    c: f64,
}

impl Case {
    fn random(seed: u64) -> Case {
        let mut r = rng(seed);
        let n = r.random_range(2..=14);
        let m = r.random_range(2..=30);
        let logistic = r.random_bool(0.5);
        let a = CscMatrix::from_dense(&random_dense(&mut r, m, n)).unwrap();
        let targets = if logistic {
            (0..m)
                .map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 })
                .collect()
        } else {
            uniform_vec(&mut r, m, -2.0, 2.0)
        };
        let x = uniform_vec(&mut r, n, -1.0, 1.0);
        let k = r.random_range(1..=n);
        let mut cols = rand::seq::index::sample(&mut r, n, k).into_vec();
        cols.sort_unstable();
        let c = if r.random_bool(0.2) {
            0.0
        } else {
            r.random_range(0.01..1.0)
        };
        Case {
            a,
            targets,
            logistic,
            x,
            cols,
            c,
        }
    }

    fn oracle(&self) -> SmoothOracle {
        if self.logistic {
            SmoothOracle::logistic(self.a.clone(), self.targets.clone()).unwrap()
        } else {
            SmoothOracle::least_squares(self.a.clone(), self.targets.clone()).unwrap()
        }
    }

    fn model(&self, strategy: HessianStrategy, beta: f64) -> BlockModel {
        let o = self.oracle();
        let cache = o.cache_at(&self.x).unwrap();
        let blk = BlockSelection::new(self.cols.clone(), self.x.len()).unwrap();
        BlockModel::new(
            &o,
            &cache,
            Regularizer::l1(self.c).unwrap(),
            &self.x,
            blk,
            &strategy,
            beta,
        )
        .unwrap()
    }

    /// Block gradient and `∇²_B f + ρI` from the dense matrix.
    fn dense_block(&self, rho: f64) -> (Vec<f64>, DMatrix<f64>) {
        let grad = if self.logistic {
            logistic_grad(&self.a, &self.targets, &self.x)
        } else {
            ls_grad(&self.a, &self.targets, &self.x)
        };
        let sub = dense_of(&self.a).select_columns(&self.cols);
        let w: Vec<f64> = if self.logistic {
            let z = ax(&self.a, &self.x);
            z.iter()
                .zip(&self.targets)
                .map(|(zq, yq)| {
                    let s = 1.0 / (1.0 + (-yq * zq).exp());
                    s * (1.0 - s)
                })
                .collect()
        } else {
            vec![1.0; self.a.nrows()]
        };
        let h = sub.transpose() * DMatrix::from_diagonal(&DVector::from_vec(w)) * &sub
            + DMatrix::identity(self.cols.len(), self.cols.len()) * rho;
        (self.cols.iter().map(|&j| grad[j]).collect(), h)
    }
}

/// `Q(x; t) - Q(x; 0)` and `||g(x; t)||` from dense data.
fn dense_check(case: &Case, g: &[f64], h: &DMatrix<f64>, t: &[f64], beta: f64) -> (f64, f64) {
    let tv = DVector::from_column_slice(t);
    let ht = h * &tv;
    let xb: Vec<f64> = case.cols.iter().map(|&j| case.x[j]).collect();
    let moved: Vec<f64> = xb.iter().zip(t).map(|(a, b)| a + b).collect();
    let q = g.iter().zip(t).map(|(a, b)| a * b).sum::<f64>()
        + 0.5 * tv.dot(&ht)
        + case.c * (l1(&moved) - l1(&xb));
    let res: Vec<f64> = (0..t.len())
        .map(|k| {
            let u = moved[k] - beta * (g[k] + ht[k]);
            (moved[k] - soft(u, beta * case.c)) / beta
        })
        .collect();
    (q, res.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn policy(eta: f64, max_inner: usize, metric: InnerMetric) -> InexactnessPolicy {
    InexactnessPolicy {
        mode: InexactMode::Basic,
        eta: EtaRule::Constant(eta),
        max_inner,
        metric,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn accepted_directions_satisfy_conditions_from_scratch(
        seed in any::<u64>(),
        eta in 0.05f64..0.95,
        beta in 0.2f64..5.0,
        rho in 0.0f64..0.1,
        sufficient in any::<bool>(),
    ) {
        let case = Case::random(seed);
        let model = case.model(HessianStrategy::ExactBlockRidge { rho }, beta);
        let g0 = model.initial_residual_norm();
        prop_assume!(g0 > 1e-10);
        let mut pol = policy(eta, 500, InnerMetric::Jacobi);
        if sufficient {
            pol.mode = InexactMode::SufficientDecrease { xi: 0.25 };
        }
        let dir = solve_iterative(&model, &pol, g0).unwrap();
        prop_assume!(dir.conditions_met);

        let (g, h) = case.dense_block(rho);
        let (q, gt) = dense_check(&case, &g, &h, &dir.t, beta);
        let zero = vec![0.0; dir.t.len()];
        let (_, g0_ref) = dense_check(&case, &g, &h, &zero, beta);
        prop_assert!((g0 - g0_ref).abs() <= 1e-10 * (1.0 + g0_ref));
        prop_assert!(q < 0.0, "model did not decrease: {q}");
        prop_assert!(gt <= eta * g0_ref * (1.0 + 1e-9) + 1e-14, "{gt} > {eta} * {g0_ref}");
        if sufficient {
            // ℓ(x; 0) - ℓ(x; t) = -(∇ᵀt + Ψ(x + t) - Ψ(x))
            let xb: Vec<f64> = case.cols.iter().map(|&j| case.x[j]).collect();
            let moved: Vec<f64> = xb.iter().zip(&dir.t).map(|(a, b)| a + b).collect();
            let lin = g.iter().zip(&dir.t).map(|(a, b)| a * b).sum::<f64>()
                + case.c * (l1(&moved) - l1(&xb));
            prop_assert!(-0.25 * lin <= -q * (1.0 + 1e-9) + 1e-14);
        }
    }

    #[test]
    fn accepted_directions_are_not_too_short(
        seed in any::<u64>(),
        eta in 0.05f64..0.95,
        beta in 0.2f64..5.0,
    ) {
        let rho = 1e-6;
        let case = Case::random(seed);
        let model = case.model(HessianStrategy::ExactBlockRidge { rho }, beta);
        let g0 = model.initial_residual_norm();
        prop_assume!(g0 > 1e-10);
        let dir = solve_iterative(&model, &policy(eta, 500, InnerMetric::Jacobi), g0).unwrap();
        prop_assume!(dir.conditions_met);
        let (_, h) = case.dense_block(rho);
        let (_, lmax) = eig_range(&h);
        let norm_t = dir.t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = (1.0 - eta) / (1.0 / beta + 2.0 * lmax) * g0;
        prop_assert!(norm_t >= bound * (1.0 - 1e-9), "{norm_t} < {bound}");
    }

    #[test]
    fn model_value_monotone_in_inner_cap(seed in any::<u64>(), scalar in any::<bool>()) {
        let case = Case::random(seed);
        let model = case.model(HessianStrategy::ExactBlockRidge { rho: 1e-6 }, 1.0);
        let g0 = model.initial_residual_norm();
        prop_assume!(g0 > 1e-10);
        let metric = if scalar { InnerMetric::Scalar } else { InnerMetric::Jacobi };
        let (g, h) = case.dense_block(1e-6);
        let mut prev = 0.0f64;
        for k in 1..=25 {
            // η = 0 never stops early, so each run ends at the cap
            let q = match solve_iterative(&model, &policy(0.0, k, metric), g0) {
                Ok(dir) => dense_check(&case, &g, &h, &dir.t, 1.0).0,
                Err(_) => 0.0,
            };
            prop_assert!(q <= prev + 1e-12 * (1.0 + prev.abs()), "k = {k}: {q} > {prev}");
            prev = q;
        }
    }
}

#[test]
fn diagonal_closed_form_matches_iterative() {
    let mut r: ChaCha8Rng = rng(2024);
    for i in 0..100 {
        let case = Case::random(r.random());
        let model = case.model(HessianStrategy::Diagonal, 1.0);
        let g0 = model.initial_residual_norm();
        let closed = solve_diagonal(&model).unwrap();
        if g0 == 0.0 {
            assert!(closed.t.iter().all(|&v| v == 0.0));
            continue;
        }
        for metric in [InnerMetric::Jacobi, InnerMetric::Scalar] {
            let iter = match solve_iterative(&model, &policy(1e-12, 100_000, metric), g0) {
                Ok(d) => d.t,
                // already optimal on the block
                Err(_) => vec![0.0; closed.t.len()],
            };
            for (a, b) in closed.t.iter().zip(&iter) {
                assert!((a - b).abs() <= 1e-8, "block {i} ({metric:?}): {a} vs {b}");
            }
        }
    }
}
