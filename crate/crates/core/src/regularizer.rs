//! Coordinate-separable convex regularizers.
//!
//! The conjugate prox is always obtained through the Moreau decomposition
//! `u = prox_{bΨ}(u) + prox_{(bΨ)*}(u)`, so there is a single prox code path per
//! regularizer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `Ψ(x) = weight * ||x||_1`.
    L1 { weight: f64 },
    /// `Ψ = 0`.
    Zero,
}

/// `sign(u) * max(|u| - v, 0)` for one coordinate, with `sign(0) = 0`.
#[inline]
pub fn soft_threshold_scalar(u: f64, v: f64) -> f64 {
    let m = u.abs() - v;
    if m > 0.0 {
        m.copysign(u)
    } else {
        0.0
    }
}

/// Componentwise soft-thresholding `S(u, v)`.
pub fn soft_threshold(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    crate::linalg::check_len("soft_threshold", u.len(), v.len())?;
    if let Some(bad) = v.iter().find(|&&vi| !(vi >= 0.0)) {
        return Err(Error::invalid(format!("negative threshold {bad}")));
    }
    Ok(u.iter()
        .zip(v)
        .map(|(&a, &b)| soft_threshold_scalar(a, b))
        .collect())
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "prox scale must be positive, got {beta}"
        )))
    }
}

impl Regularizer {
    pub fn l1(weight: f64) -> Result<Self> {
        if weight >= 0.0 && weight.is_finite() {
            Ok(Regularizer::L1 { weight })
        } else {
            Err(Error::invalid(format!(
                "l1 weight must be >= 0, got {weight}"
            )))
        }
    }

    /// Regularization weight (0 for the zero regularizer).
    pub fn weight(&self) -> f64 {
        match *self {
            Regularizer::L1 { weight } => weight,
            Regularizer::Zero => 0.0,
        }
    }

    #[inline]
    fn coord_value(&self, v: f64) -> f64 {
        match *self {
            Regularizer::L1 { weight } => weight * v.abs(),
            Regularizer::Zero => 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Zero => 0.0,
        }
    }

    /// `Ψ_i(x_blk + alpha t) - Ψ_i(x_blk)`, touching only the block.
    pub fn block_value_diff(&self, x_blk: &[f64], t: &[f64], alpha: f64) -> f64 {
        debug_assert_eq!(x_blk.len(), t.len());
        if alpha == 0.0 {
            return 0.0;
        }
        x_blk
            .iter()
            .zip(t)
            .map(|(&x, &d)| {
                let y = x + alpha * d;
                match *self {
                    // without a sign change |y| - |x| is the signed step itself,
                    // which avoids cancellation when the step is tiny
                    Regularizer::L1 { weight } if x > 0.0 && y >= 0.0 => weight * (alpha * d),
                    Regularizer::L1 { weight } if x < 0.0 && y <= 0.0 => -weight * (alpha * d),
                    _ => self.coord_value(y) - self.coord_value(x),
                }
            })
            .sum()
    }

    /// Scalar prox of `step * Ψ_j` at `u`.
    #[inline]
    pub fn prox_scalar(&self, step: f64, u: f64) -> f64 {
        match *self {
            Regularizer::L1 { weight } => soft_threshold_scalar(u, step * weight),
            Regularizer::Zero => u,
        }
    }

    /// `prox_{beta Ψ}(u)`.
    pub fn prox(&self, beta: f64, u: &[f64]) -> Result<Vec<f64>> {
        check_beta(beta)?;
        Ok(u.iter().map(|&ui| self.prox_scalar(beta, ui)).collect())
    }

    /// Componentwise prox with a separate step per coordinate: `out[j] = prox_{steps[j] Ψ_j}(u[j])`.
    pub fn prox_diagonal(&self, steps: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        crate::linalg::check_len("prox_diagonal", u.len(), steps.len())?;
        for &s in steps {
            check_beta(s)?;
        }
        Ok(u.iter()
            .zip(steps)
            .map(|(&ui, &s)| self.prox_scalar(s, ui))
            .collect())
    }

    /// Prox of the conjugate `(beta Ψ)^*`, computed as `u - prox_{beta Ψ}(u)`.
    pub fn prox_conjugate(&self, beta: f64, u: &[f64]) -> Result<Vec<f64>> {
        let p = self.prox(beta, u)?;
        Ok(u.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

    /// Whether `s ∈ ∂Ψ(x)` up to `tol`.
    pub fn subdiff_contains(&self, x: &[f64], s: &[f64], tol: f64) -> bool {
        if x.len() != s.len() {
            return false;
        }
        match *self {
            Regularizer::L1 { weight } => x.iter().zip(s).all(|(&xj, &sj)| {
                if xj == 0.0 {
                    sj.abs() <= weight + tol
                } else {
                    (sj - weight * xj.signum()).abs() <= tol
                }
            }),
            Regularizer::Zero => s.iter().all(|v| v.abs() <= tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const L1_ONE: Regularizer = Regularizer::L1 { weight: 1.0 };

    #[test]
    fn value_examples() {
        assert_eq!(L1_ONE.value(&[1.0, -2.0]), 3.0);
        assert_eq!(Regularizer::Zero.value(&[1.0, -2.0, 7.0]), 0.0);
        assert_eq!(Regularizer::L1 { weight: 10.0 }.value(&[0.5]), 5.0);
    }

    #[test]
    fn block_value_diff_examples() {
        assert_eq!(L1_ONE.block_value_diff(&[0.0], &[2.0], 1.0), 2.0);
        assert_eq!(L1_ONE.block_value_diff(&[0.3], &[2.0], 0.0), 0.0);
        assert_eq!(L1_ONE.block_value_diff(&[-1.0], &[2.0], 1.0), 0.0);
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[3.0], &[1.0]).unwrap(), vec![2.0]);
        assert_eq!(soft_threshold(&[-0.5], &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(
            soft_threshold(&[-1.7, 4.0], &[0.0, 0.0]).unwrap(),
            vec![-1.7, 4.0]
        );
        assert!(soft_threshold(&[1.0], &[-0.1]).is_err());
        assert!(soft_threshold(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn prox_examples() {
        assert_eq!(L1_ONE.prox(1.0, &[3.0]).unwrap(), vec![2.0]);
        assert_eq!(
            Regularizer::Zero.prox(3.0, &[3.0, -1.0]).unwrap(),
            vec![3.0, -1.0]
        );
        assert_eq!(
            Regularizer::L1 { weight: 2.0 }
                .prox(0.5, &[-3.0, 0.5])
                .unwrap(),
            vec![-2.0, 0.0]
        );
        assert!(L1_ONE.prox(0.0, &[1.0]).is_err());
        assert!(L1_ONE.prox(-1.0, &[1.0]).is_err());
    }

    #[test]
    fn prox_conjugate_examples() {
        assert_eq!(L1_ONE.prox_conjugate(1.0, &[3.0]).unwrap(), vec![1.0]);
        assert_eq!(
            L1_ONE.prox_conjugate(2.0, &[1.5, -0.2]).unwrap(),
            vec![1.5, -0.2]
        );
        assert_eq!(
            Regularizer::Zero.prox_conjugate(1.0, &[4.0]).unwrap(),
            vec![0.0]
        );
        assert!(L1_ONE.prox_conjugate(0.0, &[1.0]).is_err());
    }

    #[test]
    fn subdiff_examples() {
        assert!(L1_ONE.subdiff_contains(&[2.0, 0.0], &[1.0, 0.3], 0.0));
        assert!(!L1_ONE.subdiff_contains(&[2.0, 0.0], &[0.5, 0.0], 1e-12));
        assert!(L1_ONE.subdiff_contains(&[0.0], &[1.0], 0.0));
    }

    fn vec_and_beta() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
        (1usize..8).prop_flat_map(|n| {
            (
                proptest::collection::vec(-10.0f64..10.0, n),
                1e-3f64..10.0,
                0.0f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn moreau_identity((u, beta, c) in vec_and_beta()) {
            let reg = Regularizer::L1 { weight: c };
            let p = reg.prox(beta, &u).unwrap();
            let q = reg.prox_conjugate(beta, &u).unwrap();
            for j in 0..u.len() {
                prop_assert!((p[j] + q[j] - u[j]).abs() <= 1e-14);
            }
        }

        #[test]
        fn prox_is_nonexpansive((u, beta, c) in vec_and_beta(), shift in -3.0f64..3.0) {
            let reg = Regularizer::L1 { weight: c };
            let v: Vec<f64> = u.iter().enumerate().map(|(j, x)| x + shift * (j as f64 - 1.5)).collect();
            let d_in = crate::linalg::norm2(&u.iter().zip(&v).map(|(a, b)| a - b).collect::<Vec<_>>());
            let pu = reg.prox(beta, &u).unwrap();
            let pv = reg.prox(beta, &v).unwrap();
            let qu = reg.prox_conjugate(beta, &u).unwrap();
            let qv = reg.prox_conjugate(beta, &v).unwrap();
            let dp = crate::linalg::norm2(&pu.iter().zip(&pv).map(|(a, b)| a - b).collect::<Vec<_>>());
            let dq = crate::linalg::norm2(&qu.iter().zip(&qv).map(|(a, b)| a - b).collect::<Vec<_>>());
            prop_assert!(dp <= d_in + 1e-12);
            prop_assert!(dq <= d_in + 1e-12);
        }

        #[test]
        fn block_value_diff_matches_full((x, alpha, c) in vec_and_beta(), seed in 0u64..1000) {
            let reg = Regularizer::L1 { weight: c };
            let t: Vec<f64> = x.iter().enumerate().map(|(j, v)| ((seed as f64 + j as f64) * 0.37).sin() * 3.0 - v * 0.1).collect();
            let moved: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + alpha * b).collect();
            let full = reg.value(&moved) - reg.value(&x);
            prop_assert!((reg.block_value_diff(&x, &t, alpha) - full).abs() <= 1e-12 * (1.0 + full.abs()));
        }

        #[test]
        fn prox_is_argmin((u, beta, c) in vec_and_beta(), perturb in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let reg = Regularizer::L1 { weight: c };
            let p = reg.prox(beta, &u).unwrap();
            let obj = |y: &[f64]| beta * reg.value(y)
                + 0.5 * y.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let best = obj(&p);
            let y: Vec<f64> = p.iter().enumerate().map(|(j, v)| v + perturb[j % perturb.len()]).collect();
            prop_assert!(obj(&y) >= best - 1e-12);
        }
    }
}
