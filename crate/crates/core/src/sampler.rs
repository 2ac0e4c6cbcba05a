//! Random block selection.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`; bounded integers use `rand`'s `random_range`. The same seed
//! therefore reproduces the same block sequence on every platform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::BlockSelection;

/// How blocks are drawn each iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingScheme {
    /// Contiguous blocks of size `tau` fixed up front, drawn with `probabilities`
    /// (uniform when `None`).
    FixedPartition {
        tau: usize,
        probabilities: Option<Vec<f64>>,
    },
    /// One coordinate per iteration, uniformly.
    SingleCoordinate,
    /// `tau` distinct coordinates drawn uniformly without replacement.
    TauSubset { tau: usize },
}

impl SamplingScheme {
    pub fn block_size(&self) -> usize {
        match self {
            SamplingScheme::FixedPartition { tau, .. } | SamplingScheme::TauSubset { tau } => *tau,
            SamplingScheme::SingleCoordinate => 1,
        }
    }
}

/// Contiguous blocks `{0..τ-1}, {τ..2τ-1}, ...`; the last block may be smaller.
pub fn make_partition(dim: usize, tau: usize) -> Result<Vec<BlockSelection>> {
    if tau == 0 || tau > dim {
        return Err(Error::invalid(format!(
            "block size {tau} must lie in [1, {dim}]"
        )));
    }
    Ok((0..dim)
        .step_by(tau)
        .map(|s| BlockSelection::range(s, (s + tau).min(dim)))
        .collect())
}

enum Draw {
    Partition {
        blocks: Vec<BlockSelection>,
        weights: Option<WeightedIndex<f64>>,
    },
    Single,
    Subset {
        tau: usize,
        perm: Vec<usize>,
    },
}

/// Stateful sampler owned by a single solver run.
pub struct BlockSampler {
    dim: usize,
    rng: ChaCha8Rng,
    draw: Draw,
}

impl std::fmt::Debug for BlockSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockSampler")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

fn check_probabilities(p: &[f64], blocks: usize) -> Result<()> {
    if p.len() != blocks {
        return Err(Error::DimensionMismatch {
            context: "block probabilities",
            expected: blocks,
            actual: p.len(),
        });
    }
    if let Some(bad) = p.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!(
            "every block needs positive probability, got {bad}"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "block probabilities sum to {sum}, not 1"
        )));
    }
    Ok(())
}

impl BlockSampler {
    pub fn new(scheme: &SamplingScheme, dim: usize, seed: u64) -> Result<Self> {
        let draw = match scheme {
            SamplingScheme::FixedPartition { tau, probabilities } => {
                let blocks = make_partition(dim, *tau)?;
                return Self::with_partition(blocks, probabilities.clone(), dim, seed);
            }
            SamplingScheme::SingleCoordinate => {
                if dim == 0 {
                    return Err(Error::invalid("cannot sample from an empty space"));
                }
                Draw::Single
            }
            SamplingScheme::TauSubset { tau } => {
                if *tau == 0 || *tau > dim {
                    return Err(Error::invalid(format!(
                        "block size {tau} must lie in [1, {dim}]"
                    )));
                }
                Draw::Subset {
                    tau: *tau,
                    perm: (0..dim).collect(),
                }
            }
        };
        Ok(Self {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draw,
        })
    }

    /// Sampler over an explicit partition.
    pub fn with_partition(
        blocks: Vec<BlockSelection>,
        probabilities: Option<Vec<f64>>,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("partition has no blocks"));
        }
        let weights = match probabilities {
            Some(p) => {
                check_probabilities(&p, blocks.len())?;
                Some(WeightedIndex::new(&p).map_err(|e| Error::invalid(e.to_string()))?)
            }
            None => None,
        };
        Ok(Self {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draw: Draw::Partition { blocks, weights },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&mut self) -> BlockSelection {
        match &mut self.draw {
            Draw::Partition { blocks, weights } => {
                let k = match weights {
                    Some(w) => w.sample(&mut self.rng),
                    None => self.rng.random_range(0..blocks.len()),
                };
                blocks[k].clone()
            }
            Draw::Single => BlockSelection::single(self.rng.random_range(0..self.dim)),
            Draw::Subset { tau, perm } => {
                let n = perm.len();
                if *tau == n {
                    return BlockSelection::full(n);
                }
                // partial Fisher-Yates over a persistent permutation
                for j in 0..*tau {
                    let k = self.rng.random_range(j..n);
                    perm.swap(j, k);
                }
                let mut idx = perm[..*tau].to_vec();
                idx.sort_unstable();
                BlockSelection::from_sorted_unchecked(idx)
            }
        }
    }
}
