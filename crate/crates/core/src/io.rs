//! DIMACS CNF/WCNF reading and writing, random instance generation, and the
//! sweep CSV format.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Clause, Instance, InstanceError, Literal, Spin};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing 'p cnf' or 'p wcnf' header")]
    MissingHeader,
    #[error("line {line}: clause not terminated by 0 before end of input")]
    Unterminated { line: usize },
    #[error("invalid instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Cnf,
    Wcnf,
}

/// Parses a DIMACS CNF or WCNF stream.
///
/// A positive literal `i` becomes a member satisfied by `x_i = +1`. CNF
/// clauses get weight 1; WCNF clauses carry their leading weight, and the
/// optional `top` value is kept verbatim as an ordinary (large) weight.
/// Comment lines start with `c`; a line starting with `%` ends the input.
pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Instance, ParseError> {
    let mut header: Option<(Format, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut weight: Option<f64> = None;
    let mut open_line = 0;
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(syntax(lineno, "duplicate header"));
            }
            header = Some(parse_header(trimmed, lineno)?);
            continue;
        }
        let Some((format, num_vars)) = header else {
            return Err(syntax(lineno, "clause before header"));
        };
        for tok in trimmed.split_whitespace() {
            if format == Format::Wcnf && weight.is_none() {
                let w: f64 = tok
                    .parse()
                    .map_err(|_| syntax(lineno, format!("bad weight '{tok}'")))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(syntax(lineno, format!("weight {tok} must be positive")));
                }
                weight = Some(w);
                open_line = lineno;
                continue;
            }
            let lit: i64 = tok
                .parse()
                .map_err(|_| syntax(lineno, format!("bad literal '{tok}'")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(syntax(lineno, "empty clause"));
                }
                let w = weight.take().unwrap_or(1.0);
                clauses.push(Clause::new(std::mem::take(&mut current), w));
                continue;
            }
            let var = lit.unsigned_abs() as usize;
            if var > num_vars {
                return Err(syntax(
                    lineno,
                    format!("literal {lit} out of range 1..={num_vars}"),
                ));
            }
            if current.is_empty() {
                open_line = lineno;
            }
            let member = Literal::new(var - 1, Spin::from_sign(lit));
            match current.iter().find(|l| l.var == member.var) {
                Some(l) if l.sat == member.sat => {}
                Some(_) => return Err(syntax(lineno, format!("tautological clause on variable {var}"))),
                None => current.push(member),
            }
        }
    }
    let Some((_, num_vars)) = header else {
        return Err(ParseError::MissingHeader);
    };
    if !current.is_empty() || weight.is_some() {
        return Err(ParseError::Unterminated {
            line: open_line.max(1).min(last_line.max(1)),
        });
    }
    Ok(Instance::new(num_vars, clauses)?)
}

fn parse_header(line: &str, lineno: usize) -> Result<(Format, usize), ParseError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let format = match toks.get(1).copied() {
        Some("cnf") => Format::Cnf,
        Some("wcnf") => Format::Wcnf,
        _ => return Err(syntax(lineno, "expected 'p cnf' or 'p wcnf'")),
    };
    let expected = if format == Format::Cnf { 4..=4 } else { 4..=5 };
    if !expected.contains(&toks.len()) {
        return Err(syntax(lineno, "malformed header"));
    }
    let num_vars = toks[2]
        .parse::<usize>()
        .map_err(|_| syntax(lineno, "bad variable count"))?;
    toks[3]
        .parse::<usize>()
        .map_err(|_| syntax(lineno, "bad clause count"))?;
    if let Some(top) = toks.get(4) {
        top.parse::<f64>()
            .map_err(|_| syntax(lineno, "bad top weight"))?;
    }
    Ok((format, num_vars))
}

pub fn parse_dimacs_str(text: &str) -> Result<Instance, ParseError> {
    parse_dimacs(text.as_bytes())
}

/// Writes CNF when every weight is 1, WCNF otherwise.
pub fn write_dimacs(inst: &Instance) -> String {
    let mut out = String::new();
    let weighted = !inst.is_unweighted();
    if weighted {
        writeln!(out, "p wcnf {} {}", inst.num_vars(), inst.num_clauses()).unwrap();
    } else {
        writeln!(out, "p cnf {} {}", inst.num_vars(), inst.num_clauses()).unwrap();
    }
    for c in inst.clauses() {
        if weighted {
            write!(out, "{} ", c.weight).unwrap();
        }
        for l in &c.literals {
            let v = l.var as i64 + 1;
            write!(out, "{} ", v * l.sat.value() as i64).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

/// Parameters of the random K-SAT ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_vars: usize,
    pub clause_ratio: f64,
    pub clause_size: usize,
    /// Weights are uniform integers in `[1, weight_max]`; 1 means unweighted.
    pub weight_max: u64,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("clause size {k} must be between 1 and the number of variables {n}")]
    ClauseSize { k: usize, n: usize },
    #[error("clause ratio {0} must be positive")]
    Ratio(f64),
    #[error("weight bound must be at least 1")]
    WeightMax,
}

impl GeneratorConfig {
    pub fn new(num_vars: usize, clause_ratio: f64, clause_size: usize, seed: u64) -> Self {
        GeneratorConfig {
            num_vars,
            clause_ratio,
            clause_size,
            weight_max: 1,
            seed,
        }
    }

    pub fn weighted(mut self, weight_max: u64) -> Self {
        self.weight_max = weight_max;
        self
    }

    /// `round(alpha * N)`, halves rounded up.
    pub fn num_clauses(&self) -> usize {
        (self.clause_ratio * self.num_vars as f64 + 0.5).floor() as usize
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.clause_size == 0 || self.clause_size > self.num_vars {
            return Err(GeneratorError::ClauseSize {
                k: self.clause_size,
                n: self.num_vars,
            });
        }
        if !(self.clause_ratio > 0.0 && self.clause_ratio.is_finite()) {
            return Err(GeneratorError::Ratio(self.clause_ratio));
        }
        if self.weight_max == 0 {
            return Err(GeneratorError::WeightMax);
        }
        Ok(())
    }
}

/// Draws a random instance.
///
/// Per clause, in this order: `K` distinct variables by `below(N)` with
/// redraw on repeats, one sign bit per literal (top bit of `next_u64`), then
/// the weight `1 + below(M_w)` when `M_w > 1`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    cfg.validate()?;
    let mut rng = Rng::stream(cfg.seed, "generator");
    let n = cfg.num_vars as u64;
    let mut clauses = Vec::with_capacity(cfg.num_clauses());
    for _ in 0..cfg.num_clauses() {
        let mut vars: Vec<usize> = Vec::with_capacity(cfg.clause_size);
        while vars.len() < cfg.clause_size {
            let v = rng.below(n) as usize;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let lits = vars
            .into_iter()
            .map(|v| Literal::new(v, Spin::from_bool(rng.coin())))
            .collect();
        let w = if cfg.weight_max > 1 {
            (1 + rng.below(cfg.weight_max)) as f64
        } else {
            1.0
        };
        clauses.push(Clause::new(lits, w));
    }
    Ok(Instance::new(cfg.num_vars, clauses).expect("generated clauses are well formed"))
}

/// One point of a y sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub y: f64,
    pub violations: f64,
    pub converged: bool,
    pub fixed: usize,
}

/// CSV with header `y,violations,converged,fixed`, rows sorted by `y`.
pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.y.total_cmp(&b.y));
    let mut out = String::from("y,violations,converged,fixed\n");
    for r in sorted {
        writeln!(out, "{},{},{},{}", r.y, r.violations, r.converged, r.fixed).unwrap();
    }
    out
}
