use crate::error::Result;
use crate::linalg::check_len;
use crate::regularizer::Regularizer;
use crate::smooth::SmoothOracle;

/// A composite problem `min_x f(x) + Ψ(x)`.
#[derive(Debug, Clone)]
pub struct Problem {
    oracle: SmoothOracle,
    regularizer: Regularizer,
}

impl Problem {
    pub fn new(oracle: SmoothOracle, regularizer: Regularizer) -> Self {
        Self {
            oracle,
            regularizer,
        }
    }

    pub fn oracle(&self) -> &SmoothOracle {
        &self.oracle
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    /// `F(x)` evaluated from scratch.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        check_len("objective", self.dim(), x.len())?;
        Ok(self.oracle.value_at(x)? + self.regularizer.value(x))
    }
}
