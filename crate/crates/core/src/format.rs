//! Plain-text problem files.
//!
//! ```text
//! # comment lines and trailing comments start with '#'
//! ttrs 1
//! n 2
//! convention half          # or nohalf: the file holds A of xᵀAx + aᵀx
//! delta1 1
//! delta2 1.4142135623730951
//! A dense                  # n·n row-major values
//! -8 2
//! 2 -4
//! a
//! 1 1
//! B sparse 2               # nnz entries "i j v", 1-based, upper triangle
//! 1 1 3
//! 2 2 1
//! c
//! 0 0
//! ```
//!
//! Values are whitespace separated and may wrap freely across lines. Dense
//! sections round-trip bit for bit: floats are written in the shortest form
//! that parses back to the same value.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::problem::TtrsProblem;

pub const MAGIC: &str = "ttrs";
pub const VERSION: u32 = 1;

/// How the file's quadratic term is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// `½xᵀAx + aᵀx`, the in-memory form.
    #[default]
    Half,
    /// `xᵀAx + aᵀx`; A is doubled on reading and halved on writing.
    NoHalf,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Half => "half",
            Convention::NoHalf => "nohalf",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Convention::Half),
            "nohalf" => Ok(Convention::NoHalf),
            _ => Err(Error::Config(format!(
                "unknown convention {s:?}, expected half or nohalf"
            ))),
        }
    }
}

/// Storage of a matrix section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Dense,
    /// Upper-triangle coordinates of the nonzero entries.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteOptions {
    pub convention: Convention,
    pub layout: Layout,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

struct Tokens<'a> {
    items: Vec<Token<'a>>,
    pos: usize,
    end_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(src: &'a str) -> Self {
        let mut items = Vec::new();
        let mut end_line = 1;
        for (i, raw) in src.lines().enumerate() {
            end_line = i + 1;
            let line = raw.split('#').next().unwrap_or("");
            let mut rest = line;
            let mut offset = 0;
            while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
                let tail = &rest[start..];
                let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
                items.push(Token {
                    text: &tail[..len],
                    line: i + 1,
                    column: offset + start + 1,
                });
                offset += start + len;
                rest = &tail[len..];
            }
        }
        Tokens {
            items,
            pos: 0,
            end_line,
        }
    }

    fn error_at(&self, tok: Option<Token<'_>>, message: String) -> Error {
        match tok {
            Some(t) => Error::Parse {
                line: t.line,
                column: t.column,
                message,
            },
            None => Error::Parse {
                line: self.end_line,
                column: 1,
                message: format!("unexpected end of file: {message}"),
            },
        }
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>> {
        let tok = self.items.get(self.pos).copied();
        self.pos += 1;
        tok.ok_or_else(|| self.error_at(None, format!("expected {what}")))
    }

    fn keyword(&mut self, word: &str) -> Result<Token<'a>> {
        let tok = self.next(word)?;
        if tok.text != word {
            return Err(self.error_at(
                Some(tok),
                format!("expected {word:?}, found {:?}", tok.text),
            ));
        }
        Ok(tok)
    }

    fn float(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        match tok.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error_at(
                Some(tok),
                format!("{what}: {:?} is not a finite number", tok.text),
            )),
        }
    }

    fn index(&mut self, n: usize) -> Result<usize> {
        let tok = self.next("index")?;
        match tok.text.parse::<usize>() {
            Ok(i) if (1..=n).contains(&i) => Ok(i - 1),
            _ => Err(self.error_at(Some(tok), format!("index {:?} outside 1..={n}", tok.text))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let tok = self.next(what)?;
        tok.text
            .parse::<usize>()
            .map_err(|_| self.error_at(Some(tok), format!("{what}: {:?} is not a count", tok.text)))
    }

    fn vector(&mut self, name: &str, n: usize) -> Result<DVector<f64>> {
        self.keyword(name)?;
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = self.float(&format!("{name}[{}]", i + 1))?;
        }
        Ok(v)
    }

    fn matrix(&mut self, name: &str, n: usize) -> Result<SymMatrix> {
        let head = self.keyword(name)?;
        let layout = self.next("dense or sparse")?;
        let mut m = DMatrix::zeros(n, n);
        match layout.text {
            "dense" => {
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = self.float(&format!("{name}[{},{}]", i + 1, j + 1))?;
                    }
                }
            }
            "sparse" => {
                let nnz = self.count("entry count")?;
                for _ in 0..nnz {
                    let i = self.index(n)?;
                    let j = self.index(n)?;
                    let v = self.float(&format!("{name} entry"))?;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            other => {
                return Err(self.error_at(
                    Some(layout),
                    format!("expected dense or sparse, found {other:?}"),
                ))
            }
        }
        SymMatrix::new(m).map_err(|e| self.error_at(Some(head), format!("{name}: {e}")))
    }
}

/// Reads a problem file.
pub fn parse(src: &str) -> Result<TtrsProblem> {
    let mut t = Tokens::new(src);
    t.keyword(MAGIC)?;
    let version = t.next("version")?;
    if version.text != VERSION.to_string() {
        return Err(t.error_at(
            Some(version),
            format!("unsupported version {:?}", version.text),
        ));
    }
    t.keyword("n")?;
    let n_tok = t.items.get(t.pos).copied();
    let n = t.count("dimension")?;
    if n == 0 {
        return Err(t.error_at(n_tok, "dimension must be positive".into()));
    }
    t.keyword("convention")?;
    let conv_tok = t.next("half or nohalf")?;
    let convention: Convention = conv_tok.text.parse().map_err(|_| {
        t.error_at(
            Some(conv_tok),
            format!("expected half or nohalf, found {:?}", conv_tok.text),
        )
    })?;
    t.keyword("delta1")?;
    let delta1 = t.float("delta1")?;
    t.keyword("delta2")?;
    let delta2 = t.float("delta2")?;
    let a_mat = t.matrix("A", n)?;
    let a = t.vector("a", n)?;
    let b_tok = t.items.get(t.pos).copied();
    let b_mat = t.matrix("B", n)?;
    let c = t.vector("c", n)?;
    if let Some(extra) = t.items.get(t.pos).copied() {
        return Err(t.error_at(Some(extra), format!("trailing token {:?}", extra.text)));
    }
    let hessian = match convention {
        Convention::Half => a_mat,
        Convention::NoHalf => a_mat.scaled(2.0),
    };
    TtrsProblem::new(hessian, a, b_mat, c, delta1, delta2)
        .map_err(|e| t.error_at(b_tok, e.to_string()))
}

/// Writes a problem file.
pub fn serialize(p: &TtrsProblem, opts: WriteOptions) -> String {
    let n = p.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "n {n}");
    let _ = writeln!(out, "convention {}", opts.convention.as_str());
    let _ = writeln!(out, "delta1 {}", p.delta1);
    let _ = writeln!(out, "delta2 {}", p.delta2);
    let a_mat = match opts.convention {
        Convention::Half => p.hessian.clone(),
        Convention::NoHalf => p.hessian.scaled(0.5),
    };
    write_matrix(&mut out, "A", &a_mat, opts.layout);
    write_vector(&mut out, "a", &p.linear);
    write_matrix(&mut out, "B", &p.shape, opts.layout);
    write_vector(&mut out, "c", &p.center);
    out
}

fn write_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(out, "{name}");
    let _ = writeln!(out, "{}", join(v.iter()));
}

fn write_matrix(out: &mut String, name: &str, m: &SymMatrix, layout: Layout) {
    let n = m.dim();
    match layout {
        Layout::Dense => {
            let _ = writeln!(out, "{name} dense");
            for i in 0..n {
                let _ = writeln!(out, "{}", join(m.matrix().row(i).iter()));
            }
        }
        Layout::Sparse => {
            let entries: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|j| (0..=j).map(move |i| (i, j)))
                .map(|(i, j)| (i, j, m[(i, j)]))
                .filter(|&(_, _, v)| v != 0.0)
                .collect();
            let _ = writeln!(out, "{name} sparse {}", entries.len());
            for (i, j, v) in entries {
                let _ = writeln!(out, "{} {} {v}", i + 1, j + 1);
            }
        }
    }
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
