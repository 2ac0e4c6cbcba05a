//! File formats: the instance container and trace CSV.
//!
//! # Instance container
//!
//! Plain text. The first line is the magic string `RCD-INSTANCE 1`. It is
//! followed by `key value` header lines (`kind`, `nrows`, `ncols`, `nnz`, `c`,
//! optionally `seed` and `f_star`), then array sections, each a line
//! `name length` followed by one line of space-separated values: `col_ptr`,
//! `row_idx`, `values`, `b`, and optionally `x_star` and `y_star`. Floats are
//! written in shortest round-trip form, so reading reproduces the data bitwise.
//!
//! # Trace CSV
//!
//! Header `iter,time_s,F,alpha,tau,inner_iters,g0_norm,gt_norm,backtracks,event`.
//! Floats use 17 significant digits; `event` is `step`, `init`, or a `+`-joined
//! subset of `skip`, `cap-hit`, `ls-exhausted`, `rejected`. The merged
//! comparison format prepends a `solver` column.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::driver::{Events, TraceRecord};
use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::probgen::GeneratedInstance;
use crate::problem::Problem;
use crate::regularizer::Regularizer;
use crate::smooth::{LossKind, SmoothOracle};

pub const INSTANCE_MAGIC: &str = "RCD-INSTANCE 1";
pub const TRACE_HEADER: &str =
    "iter,time_s,F,alpha,tau,inner_iters,g0_norm,gt_norm,backtracks,event";

/// A stored problem, with the planted solution when known.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: LossKind,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub seed: Option<u64>,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    pub y_star: Option<Vec<f64>>,
}

impl Instance {
    pub fn problem(&self) -> Result<Problem> {
        let oracle = match self.kind {
            LossKind::LeastSquares => SmoothOracle::least_squares(self.a.clone(), self.b.clone())?,
            LossKind::Logistic => SmoothOracle::logistic(self.a.clone(), self.b.clone())?,
        };
        let reg = if self.c == 0.0 {
            Regularizer::Zero
        } else {
            Regularizer::l1(self.c)?
        };
        Ok(Problem::new(oracle, reg))
    }
}

impl From<GeneratedInstance> for Instance {
    fn from(g: GeneratedInstance) -> Self {
        Self {
            kind: LossKind::LeastSquares,
            a: g.a,
            b: g.b,
            c: g.c,
            seed: Some(g.seed),
            f_star: Some(g.f_star),
            x_star: Some(g.x_star),
            y_star: Some(g.y_star),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_instance_to<W: Write>(mut w: W, inst: &Instance) -> std::io::Result<()> {
    let a = &inst.a;
    writeln!(w, "{INSTANCE_MAGIC}")?;
    writeln!(w, "kind {}", inst.kind.name())?;
    writeln!(w, "nrows {}", a.nrows())?;
    writeln!(w, "ncols {}", a.ncols())?;
    writeln!(w, "nnz {}", a.nnz())?;
    writeln!(w, "c {}", inst.c)?;
    if let Some(s) = inst.seed {
        writeln!(w, "seed {s}")?;
    }
    if let Some(f) = inst.f_star {
        writeln!(w, "f_star {f}")?;
    }
    let mut section = |name: &str, len: usize, body: String| -> std::io::Result<()> {
        writeln!(w, "{name} {len}")?;
        writeln!(w, "{body}")
    };
    section("col_ptr", a.col_ptr().len(), join(a.col_ptr()))?;
    section("row_idx", a.nnz(), join(a.row_indices()))?;
    section("values", a.nnz(), join(a.values()))?;
    section("b", inst.b.len(), join(&inst.b))?;
    if let Some(x) = &inst.x_star {
        section("x_star", x.len(), join(x))?;
    }
    if let Some(y) = &inst.y_star {
        section("y_star", y.len(), join(y))?;
    }
    w.flush()
}

pub fn write_instance(path: &Path, inst: &Instance) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_instance_to(BufWriter::new(file), inst).map_err(|e| Error::io(path, e))
}

struct LineReader<'a, R> {
    lines: std::io::Lines<R>,
    line: usize,
    path: &'a Path,
}

impl<R: BufRead> LineReader<'_, R> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.display().to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Option<String>> {
        match self.lines.next() {
            None => Ok(None),
            Some(l) => {
                self.line += 1;
                l.map(Some).map_err(|e| Error::io(self.path, e))
            }
        }
    }

    fn parse_values<T: FromStr>(&mut self, name: &str, len: usize) -> Result<Vec<T>> {
        let line = self
            .next()?
            .ok_or_else(|| self.err(format!("missing data for section {name}")))?;
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<T>()
                    .map_err(|_| self.err(format!("invalid number '{t}' in {name}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if vals.len() != len {
            return Err(self.err(format!(
                "section {name} declares {len} values, found {}",
                vals.len()
            )));
        }
        Ok(vals)
    }
}

fn parse_field<T: FromStr>(r: &LineReader<'_, impl BufRead>, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| r.err(format!("invalid value '{v}' for {key}")))
}

pub fn parse_instance<R: BufRead>(reader: R, path: &Path) -> Result<Instance> {
    let mut r = LineReader {
        lines: reader.lines(),
        line: 0,
        path,
    };
    match r.next()? {
        Some(l) if l.trim_end() == INSTANCE_MAGIC => {}
        Some(l) if l.starts_with("RCD-INSTANCE") => {
            return Err(r.err(format!("unsupported container version '{}'", l.trim_end())))
        }
        _ => return Err(r.err("not an instance file (missing magic line)")),
    }

    let mut kind = None;
    let (mut nrows, mut ncols, mut nnz) = (None, None, None);
    let mut c = None;
    let (mut seed, mut f_star) = (None, None);
    let (mut col_ptr, mut row_idx, mut values, mut b) = (None, None, None, None);
    let (mut x_star, mut y_star) = (None, None);
    while let Some(line) = r.next()? {
        let line = line.trim().to_string();
        if line.is_empty() {
            continue;
        }
        let (key, val) = line
            .split_once(' ')
            .ok_or_else(|| r.err(format!("expected 'key value', got '{line}'")))?;
        match key {
            "kind" => {
                kind = Some(match val {
                    "least-squares" => LossKind::LeastSquares,
                    "logistic" => LossKind::Logistic,
                    _ => return Err(r.err(format!("unknown loss kind '{val}'"))),
                })
            }
            "nrows" => nrows = Some(parse_field::<usize>(&r, key, val)?),
            "ncols" => ncols = Some(parse_field::<usize>(&r, key, val)?),
            "nnz" => nnz = Some(parse_field::<usize>(&r, key, val)?),
            "c" => c = Some(parse_field::<f64>(&r, key, val)?),
            "seed" => seed = Some(parse_field::<u64>(&r, key, val)?),
            "f_star" => f_star = Some(parse_field::<f64>(&r, key, val)?),
            "col_ptr" | "row_idx" => {
                let len = parse_field::<usize>(&r, key, val)?;
                let v = r.parse_values::<usize>(key, len)?;
                if key == "col_ptr" {
                    col_ptr = Some(v);
                } else {
                    row_idx = Some(v);
                }
            }
            "values" | "b" | "x_star" | "y_star" => {
                let len = parse_field::<usize>(&r, key, val)?;
                let v = Some(r.parse_values::<f64>(key, len)?);
                match key {
                    "values" => values = v,
                    "b" => b = v,
                    "x_star" => x_star = v,
                    _ => y_star = v,
                }
            }
            _ => return Err(r.err(format!("unknown key '{key}'"))),
        }
    }
    let missing = |name: &str| r.err(format!("missing required field '{name}'"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nnz = nnz.ok_or_else(|| missing("nnz"))?;
    let c = c.ok_or_else(|| missing("c"))?;
    let a = CscMatrix::new(
        nrows,
        ncols,
        col_ptr.ok_or_else(|| missing("col_ptr"))?,
        row_idx.ok_or_else(|| missing("row_idx"))?,
        values.ok_or_else(|| missing("values"))?,
    )?;
    if a.nnz() != nnz {
        return Err(r.err(format!(
            "header declares {nnz} nonzeros, arrays hold {}",
            a.nnz()
        )));
    }
    let b = b.ok_or_else(|| missing("b"))?;
    crate::linalg::check_len("instance targets", nrows, b.len())?;
    if let Some(x) = &x_star {
        crate::linalg::check_len("planted solution", ncols, x.len())?;
    }
    if let Some(y) = &y_star {
        crate::linalg::check_len("planted residual", nrows, y.len())?;
    }
    Ok(Instance {
        kind,
        a,
        b,
        c,
        seed,
        f_star,
        x_star,
        y_star,
    })
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_instance(BufReader::new(file), path)
}

fn write_record<W: Write>(w: &mut W, r: &TraceRecord) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{},{}",
        r.iter,
        r.time_s,
        r.objective,
        r.alpha,
        r.tau,
        r.inner_iters,
        r.g0_norm,
        r.gt_norm,
        r.backtracks,
        r.events
    )
}

pub fn write_trace_to<W: Write>(mut w: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        write_record(&mut w, r)?;
    }
    w.flush()
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_to(BufWriter::new(file), trace).map_err(|e| Error::io(path, e))
}

fn parse_record(fields: &[&str]) -> std::result::Result<TraceRecord, String> {
    fn num<T: FromStr>(s: &str, col: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("invalid {col} '{s}'"))
    }
    if fields.len() != 10 {
        return Err(format!("expected 10 fields, found {}", fields.len()));
    }
    Ok(TraceRecord {
        iter: num(fields[0], "iter")?,
        time_s: num(fields[1], "time_s")?,
        objective: num(fields[2], "F")?,
        alpha: num(fields[3], "alpha")?,
        tau: num(fields[4], "tau")?,
        inner_iters: num(fields[5], "inner_iters")?,
        g0_norm: num(fields[6], "g0_norm")?,
        gt_norm: num(fields[7], "gt_norm")?,
        backtracks: num(fields[8], "backtracks")?,
        events: Events::parse(fields[9]).ok_or_else(|| format!("invalid event '{}'", fields[9]))?,
    })
}

pub fn parse_trace<R: BufRead>(reader: R, path: &Path) -> Result<Vec<TraceRecord>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TRACE_HEADER => {}
        Some(Err(e)) => return Err(Error::io(path, e)),
        _ => return Err(err(1, format!("expected header '{TRACE_HEADER}'"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        out.push(parse_record(&fields).map_err(|m| err(i + 2, m))?);
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(BufReader::new(file), path)
}

/// Keeps every `k`-th iteration of a trace plus its last record.
pub fn thin_trace(trace: &[TraceRecord], k: usize) -> Vec<TraceRecord> {
    let k = k.max(1);
    trace
        .iter()
        .enumerate()
        .filter(|(i, r)| r.iter % k == 0 || i + 1 == trace.len())
        .map(|(_, r)| r.clone())
        .collect()
}

/// Writes traces of several solvers in long format with a leading `solver`
/// column. With `thin = Some((id, k))`, rows of solver `id` are kept only
/// every `k`-th iteration (plus the last record).
pub fn write_merged_to<W: Write>(
    mut w: W,
    runs: &[(String, Vec<TraceRecord>)],
    thin: Option<(&str, usize)>,
) -> std::io::Result<()> {
    writeln!(w, "solver,{TRACE_HEADER}")?;
    for (solver, trace) in runs {
        let kept = match thin {
            Some((id, k)) if id == solver => thin_trace(trace, k),
            _ => trace.clone(),
        };
        for r in &kept {
            write!(w, "{solver},")?;
            write_record(&mut w, r)?;
        }
    }
    w.flush()
}

pub fn write_merged(
    path: &Path,
    runs: &[(String, Vec<TraceRecord>)],
    thin: Option<(&str, usize)>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_merged_to(BufWriter::new(file), runs, thin).map_err(|e| Error::io(path, e))
}
