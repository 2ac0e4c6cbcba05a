//! Problem instances: a sparse ℓ1-regularized least-squares generator with a
//! planted minimizer, and LIBSVM-format input/output for logistic regression.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::driver::full_residual;
use crate::error::{Error, Result};
use crate::linalg::{norm2, CscMatrix};
use crate::problem::Problem;
use crate::regularizer::Regularizer;
use crate::smooth::SmoothOracle;

/// Bound on `||g(x*; 0)||_∞` a generated instance must satisfy.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub n: usize,
    pub m: usize,
    pub density: f64,
    pub c: f64,
    /// Number of nonzeros in the planted minimizer.
    pub sparsity: usize,
    pub seed: u64,
}

impl GeneratorParams {
    /// Parameters with the default support size `⌈0.01 n⌉`.
    pub fn new(n: usize, m: usize, density: f64, c: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            density,
            c,
            sparsity: n.div_ceil(100),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid(format!(
                "dimensions must be positive, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if self.sparsity > self.n {
            return Err(Error::invalid(format!(
                "sparsity {} exceeds n = {}",
                self.sparsity, self.n
            )));
        }
        Ok(())
    }
}

/// `min ½||Ax - b||² + c||x||_1` with known minimizer `x_star`.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub x_star: Vec<f64>,
    /// `A x* - b = -y*`, so `f(x*) = ½||y*||²`.
    pub y_star: Vec<f64>,
    pub f_star: f64,
    pub seed: u64,
}

impl GeneratedInstance {
    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem::new(
            SmoothOracle::least_squares(self.a.clone(), self.b.clone())?,
            Regularizer::l1(self.c)?,
        ))
    }
}

fn random_column(rng: &mut ChaCha8Rng, m: usize, binom: &Binomial) -> (Vec<usize>, Vec<f64>) {
    let k = (binom.sample(rng) as usize).max(1);
    let mut rows = index::sample(rng, m, k).into_vec();
    rows.sort_unstable();
    let vals = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (rows, vals)
}

fn column_dot(rows: &[usize], vals: &[f64], y: &[f64]) -> f64 {
    rows.iter().zip(vals).map(|(&q, &v)| v * y[q]).sum()
}

/// Builds an instance whose minimizer is known by construction.
///
/// Columns are drawn with each entry present with probability `density`
/// (values uniform on `[-1, 1]`, at least one entry per column). With
/// `v = Aᵀy*`, the `sparsity` columns with largest `|v_j|` are rescaled so that
/// `|v_j| = c`, other columns with `|v_j| > c` are shrunk to `u c` with
/// `u ~ U[0.1, 0.9]`, and `b = A x* + y*` where `x*` is supported on the
/// former with `sign(x*_j) = sign(v_j)`. Then `-∇f(x*) = v ∈ c ∂||x*||_1`.
pub fn generate_l1ls(params: &GeneratorParams) -> Result<GeneratedInstance> {
    params.validate()?;
    let GeneratorParams {
        n,
        m,
        density,
        c,
        sparsity,
        seed,
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let binom = Binomial::new(m as u64, density)
        .map_err(|e| Error::invalid(format!("density {density}: {e}")))?;

    let mut cols: Vec<(Vec<usize>, Vec<f64>)> =
        (0..n).map(|_| random_column(&mut rng, m, &binom)).collect();
    let y_star: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut v: Vec<f64> = cols
        .iter()
        .map(|(r, x)| column_dot(r, x, &y_star))
        .collect();
    for j in 0..n {
        while v[j] == 0.0 {
            cols[j] = random_column(&mut rng, m, &binom);
            v[j] = column_dot(&cols[j].0, &cols[j].1, &y_star);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    let mut in_support = vec![false; n];
    for &j in &order[..sparsity] {
        in_support[j] = true;
    }

    let mut x_star = vec![0.0; n];
    for j in 0..n {
        let scale = if in_support[j] {
            c / v[j].abs()
        } else if v[j].abs() > c {
            rng.random_range(0.1..=0.9) * c / v[j].abs()
        } else {
            1.0
        };
        if scale != 1.0 {
            cols[j].1.iter_mut().for_each(|a| *a *= scale);
        }
        if in_support[j] {
            // magnitude in (0, 1]
            let mag = 1.0 - rng.random::<f64>();
            x_star[j] = v[j].signum() * mag;
        }
    }

    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let nnz: usize = cols.iter().map(|(r, _)| r.len()).sum();
    let mut row_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    for (r, x) in cols {
        row_idx.extend(r);
        values.extend(x);
        col_ptr.push(row_idx.len());
    }
    let a = CscMatrix::new(m, n, col_ptr, row_idx, values)?;

    let mut b = a.matvec(&x_star)?;
    b.iter_mut().zip(&y_star).for_each(|(bi, yi)| *bi += yi);

    let y_norm = norm2(&y_star);
    let f_star = 0.5 * y_norm * y_norm + c * x_star.iter().map(|v| v.abs()).sum::<f64>();
    let inst = GeneratedInstance {
        a,
        b,
        c,
        x_star,
        y_star,
        f_star,
        seed,
    };
    let residual = full_residual(&inst.problem()?, &inst.x_star, 1.0)?;
    if !(residual <= CERTIFICATE_TOL) {
        return Err(Error::CertificateFailed {
            residual,
            tolerance: CERTIFICATE_TOL,
        });
    }
    Ok(inst)
}

/// Samples as rows of `a` with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub a: CscMatrix,
    pub labels: Vec<f64>,
}

impl LabeledData {
    pub fn logistic_problem(&self, c: f64) -> Result<Problem> {
        let reg = if c == 0.0 {
            Regularizer::Zero
        } else {
            Regularizer::l1(c)?
        };
        Ok(Problem::new(
            SmoothOracle::logistic(self.a.clone(), self.labels.clone())?,
            reg,
        ))
    }
}

/// Parameters for [`generate_logistic`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    /// Number of samples.
    pub m: usize,
    /// Number of features.
    pub n: usize,
    pub density: f64,
    /// Nonzeros in the planted weight vector.
    pub support: usize,
    pub seed: u64,
}

impl LogisticParams {
    /// Parameters with a planted support of `⌈0.05 n⌉`.
    pub fn new(m: usize, n: usize, density: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            density,
            support: n.div_ceil(20),
            seed,
        }
    }
}

/// Synthetic classification data.
///
/// Features are present with probability `density` (values uniform on
/// `[0, 1)`), a weight vector `w` with `support` entries uniform on `[-1, 1]` is
/// planted, and sample `q` gets label `+1` with probability `σ(2(a_qᵀw + ½))`.
pub fn generate_logistic(params: &LogisticParams) -> Result<LabeledData> {
    let LogisticParams {
        m,
        n,
        density,
        support,
        seed,
    } = *params;
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "dimensions must be positive, got m = {m}, n = {n}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if support > n {
        return Err(Error::invalid(format!("support {support} exceeds n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let binom = Binomial::new(m as u64, density)
        .map_err(|e| Error::invalid(format!("density {density}: {e}")))?;
    let mut triplets = Vec::new();
    for j in 0..n {
        let k = binom.sample(&mut rng) as usize;
        let mut rows = index::sample(&mut rng, m, k).into_vec();
        rows.sort_unstable();
        triplets.extend(rows.into_iter().map(|q| (q, j, rng.random::<f64>())));
    }
    let a = CscMatrix::from_triplets(m, n, &triplets)?;
    let mut w = vec![0.0; n];
    for j in index::sample(&mut rng, n, support) {
        w[j] = rng.random_range(-1.0..=1.0);
    }
    let z = a.matvec(&w)?;
    let labels = z
        .iter()
        .map(|&zq| {
            let p = crate::smooth::sigmoid(2.0 * (zq + 0.5));
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(LabeledData { a, labels })
}

fn parse_label(tok: &str) -> Option<f64> {
    let v: f64 = tok.parse().ok()?;
    if v == 1.0 {
        Some(1.0)
    } else if v == 0.0 || v == -1.0 {
        Some(-1.0)
    } else {
        None
    }
}

/// Parses LIBSVM text: `label idx:val idx:val ...` per line with 1-based,
/// strictly increasing indices. Labels `0`/`-1` map to `-1`, `1`/`+1` to `+1`.
/// The feature count is the largest index seen unless `n_features` is given.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    path: &Path,
    n_features: Option<usize>,
) -> Result<LabeledData> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut triplets = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().unwrap_or_default();
        let label = parse_label(label_tok)
            .ok_or_else(|| err(lineno, format!("invalid label '{label_tok}'")))?;
        let row = labels.len();
        labels.push(label);
        let mut prev = 0usize;
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("invalid index '{idx}'")))?;
            if idx == 0 {
                return Err(err(lineno, "indices are 1-based; found 0".into()));
            }
            if idx <= prev {
                return Err(err(
                    lineno,
                    format!("indices must be strictly increasing ({idx} after {prev})"),
                ));
            }
            prev = idx;
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("invalid value '{val}'")))?;
            if !val.is_finite() {
                return Err(err(lineno, format!("non-finite value '{val}'")));
            }
            max_index = max_index.max(idx);
            triplets.push((row, idx - 1, val));
        }
    }
    let n = match n_features {
        Some(n) if n < max_index => {
            return Err(Error::invalid(format!(
                "feature count {n} is smaller than the largest index {max_index} in {}",
                path.display()
            )))
        }
        Some(n) => n,
        None => max_index,
    };
    let a = CscMatrix::from_triplets(labels.len(), n, &triplets)?;
    Ok(LabeledData { a, labels })
}

pub fn read_libsvm(path: &Path, n_features: Option<usize>) -> Result<LabeledData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(BufReader::new(file), path, n_features)
}

/// Writes rows of `a` in LIBSVM format with shortest round-trip float formatting.
pub fn write_libsvm_to<W: Write>(mut w: W, a: &CscMatrix, labels: &[f64]) -> std::io::Result<()> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); a.nrows()];
    for j in 0..a.ncols() {
        let (rs, vals) = a.column(j);
        for (&q, &v) in rs.iter().zip(vals) {
            rows[q].push((j, v));
        }
    }
    for (row, &label) in rows.iter().zip(labels) {
        write!(w, "{}", if label > 0.0 { "+1" } else { "-1" })?;
        for &(j, v) in row {
            write!(w, " {}:{}", j + 1, v)?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn write_libsvm(path: &Path, a: &CscMatrix, labels: &[f64]) -> Result<()> {
    if labels.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "libsvm labels",
            expected: a.nrows(),
            actual: labels.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_libsvm_to(BufWriter::new(file), a, labels).map_err(|e| Error::io(path, e))
}
