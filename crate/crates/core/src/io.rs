//! Plain-text formats for tensors, spectra and recorded samples.
//!
//! Floats are written with 17 significant digits, which round-trips `f64`
//! exactly.
//!
//! ```text
//! symtensor3 d=3          spectrum d=3 k=1        samples d=2 n=2
//! 0 0 0 1.0000000000000000e0   lambda 1.0…e0      1.0…e0 0.0…e0
//! 0 1 2 -5.0000000000000000e-1 1.0…e0 0.0…e0 0.0…e0   0.0…e0 1.0…e0
//! ```
//!
//! Tensor files list each nonzero entry once with `i ≤ j ≤ k`; unlisted
//! entries are zero.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::streaming::ReplayStream;
use crate::tensor::{Spectrum, SymmetricTensor3};

fn fmt<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_float<T: Scalar>(s: &str, line: usize) -> Result<T> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value `{s}`")));
    }
    Ok(T::lit(v))
}

/// Parses `name key=value key=value` and returns the values in `keys` order.
fn parse_header(line: &str, name: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(name) {
        return Err(parse_err(1, format!("expected `{name}` header")));
    }
    let fields: HashMap<&str, &str> = parts.filter_map(|p| p.split_once('=')).collect();
    keys.iter()
        .map(|k| {
            let v = fields.get(k).ok_or_else(|| parse_err(1, format!("header lacks `{k}=`")))?;
            v.parse().map_err(|_| parse_err(1, format!("bad `{k}` value `{v}`")))
        })
        .collect()
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines<R: BufRead>(r: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn write_tensor<T: Scalar, W: Write>(mut w: W, t: &SymmetricTensor3<T>) -> Result<()> {
    let d = t.dim();
    writeln!(w, "symtensor3 d={d}")?;
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                let v = t.get(i, j, k);
                if v != T::zero() {
                    writeln!(w, "{i} {j} {k} {}", fmt(v))?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_tensor<T: Scalar, R: BufRead>(r: R) -> Result<SymmetricTensor3<T>> {
    let lines = content_lines(r)?;
    let (_, header) = lines.first().ok_or_else(|| parse_err(1, "empty tensor file"))?;
    let d = parse_header(header, "symtensor3", &["d"])?[0];
    if d == 0 {
        return Err(parse_err(1, "dimension must be positive"));
    }
    let mut entries: HashMap<(usize, usize, usize), T> = HashMap::new();
    for (n, line) in &lines[1..] {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(parse_err(*n, "expected `i j k value`"));
        }
        let idx: Vec<usize> = f[..3]
            .iter()
            .map(|s| s.parse().map_err(|_| parse_err(*n, format!("bad index `{s}`"))))
            .collect::<Result<_>>()?;
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        if !(i <= j && j <= k) {
            return Err(parse_err(*n, "indices must satisfy i ≤ j ≤ k"));
        }
        if k >= d {
            return Err(parse_err(*n, format!("index {k} out of range for d = {d}")));
        }
        if entries.insert((i, j, k), parse_float(f[3], *n)?).is_some() {
            return Err(parse_err(*n, format!("duplicate entry ({i}, {j}, {k})")));
        }
    }
    Ok(SymmetricTensor3::from_sorted_fn(d, |i, j, k| {
        entries.get(&(i, j, k)).copied().unwrap_or_else(T::zero)
    }))
}

pub fn write_spectrum<T: Scalar, W: Write>(mut w: W, s: &Spectrum<T>) -> Result<()> {
    writeln!(w, "spectrum d={} k={}", s.dim(), s.k())?;
    for p in s.pairs() {
        writeln!(w, "lambda {}", fmt(p.value))?;
        writeln!(w, "{}", join(&p.vector))?;
    }
    Ok(())
}

pub fn read_spectrum<T: Scalar, R: BufRead>(r: R) -> Result<Spectrum<T>> {
    let lines = content_lines(r)?;
    let (_, header) = lines.first().ok_or_else(|| parse_err(1, "empty spectrum file"))?;
    let hv = parse_header(header, "spectrum", &["d", "k"])?;
    let (d, k) = (hv[0], hv[1]);
    let body = &lines[1..];
    if body.len() != 2 * k {
        return Err(parse_err(lines.len(), format!("expected {} lines for k = {k} pairs", 2 * k)));
    }
    let mut pairs = Vec::with_capacity(k);
    for chunk in body.chunks(2) {
        let (ln, lambda_line) = &chunk[0];
        let value = match lambda_line.split_whitespace().collect::<Vec<_>>()[..] {
            ["lambda", v] => parse_float(v, *ln)?,
            _ => return Err(parse_err(*ln, "expected `lambda <value>`")),
        };
        let (vn, vec_line) = &chunk[1];
        let vector = parse_row(vec_line, d, *vn)?;
        pairs.push((value, vector));
    }
    Spectrum::from_pairs(d, pairs)
}

pub fn write_samples<T: Scalar, W: Write>(mut w: W, d: usize, samples: &[Vec<T>]) -> Result<()> {
    writeln!(w, "samples d={d} n={}", samples.len())?;
    for s in samples {
        writeln!(w, "{}", join(s))?;
    }
    Ok(())
}

pub fn read_samples<T: Scalar, R: BufRead>(r: R) -> Result<ReplayStream<T>> {
    let lines = content_lines(r)?;
    let (_, header) = lines.first().ok_or_else(|| parse_err(1, "empty sample file"))?;
    let hv = parse_header(header, "samples", &["d", "n"])?;
    let (d, n) = (hv[0], hv[1]);
    if lines.len() - 1 != n {
        return Err(parse_err(lines.len(), format!("header announces {n} samples, found {}", lines.len() - 1)));
    }
    let samples = lines[1..]
        .iter()
        .map(|(ln, l)| parse_row(l, d, *ln))
        .collect::<Result<Vec<_>>>()?;
    ReplayStream::new(d, samples)
}

fn join<T: Scalar>(v: &[T]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(" ")
}

fn parse_row<T: Scalar>(line: &str, d: usize, n: usize) -> Result<Vec<T>> {
    let row = line
        .split_whitespace()
        .map(|s| parse_float(s, n))
        .collect::<Result<Vec<T>>>()?;
    if row.len() != d {
        return Err(parse_err(n, format!("expected {d} values, found {}", row.len())));
    }
    Ok(row)
}
