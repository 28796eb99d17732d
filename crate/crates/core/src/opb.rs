//! Reading and writing OPB/WBO files and the competition output protocol.
//!
//! The accepted grammar is the linear and nonlinear OPB format plus the WBO
//! extension: `*` comment lines, an optional `min:` objective, terms of the
//! form `[+-]<int> x<i> [x<j> ...]`, relations `>=` and `=`, and `;`
//! terminators. WBO files add a `soft: <top>;` header and `[<w>]` prefixes on
//! soft constraints. Negated literals `~x<i>` are folded into the
//! coefficients and the right-hand side while parsing, so the resulting
//! [`Instance`] only ever mentions positive variables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

/// Largest intsize accepted by the parser. All activities of an instance
/// within this bound fit comfortably into 128-bit accumulators.
pub const MAX_INTSIZE: u32 = 62;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed token `{token}`")]
    Malformed { line: usize, token: String },
    #[error("line {line}: non-integer coefficient `{token}`")]
    NonInteger { line: usize, token: String },
    #[error("line {line}: variable x{var} appears twice in one product")]
    DuplicateVariable { line: usize, var: u32 },
    #[error("line {line}: unsupported relation `{relation}` (only `>=` and `=` are allowed)")]
    Relation { line: usize, relation: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported intsize: {bits} bits exceeds the limit of {limit} bits")]
    UnsupportedIntsize { bits: u32, limit: u32 },
    #[error("cannot read input: {0}")]
    Io(#[from] io::Error),
}

/// A product of distinct variables with an integer coefficient. Variables are
/// 1-based as in the file format and kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub coef: i64,
    pub vars: Vec<u32>,
}

impl Term {
    pub fn is_linear(&self) -> bool {
        self.vars.len() == 1
    }

    /// Exact value of the term under a 0/1 assignment indexed from 0.
    pub fn eval(&self, x: &[bool]) -> i128 {
        if self.vars.iter().all(|&v| x[v as usize - 1]) {
            self.coef as i128
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PbConstraint {
    pub terms: Vec<Term>,
    pub relation: Relation,
    pub rhs: i64,
    /// Violation cost of a soft constraint; `None` means hard.
    pub weight: Option<i64>,
}

impl PbConstraint {
    pub fn activity(&self, x: &[bool]) -> i128 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        let act = self.activity(x);
        match self.relation {
            Relation::Ge => act >= self.rhs as i128,
            Relation::Eq => act == self.rhs as i128,
        }
    }

    pub fn is_soft(&self) -> bool {
        self.weight.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Objective {
    pub terms: Vec<Term>,
    /// Constant produced by folding negated literals.
    pub offset: i64,
}

impl Objective {
    pub fn eval(&self, x: &[bool]) -> i128 {
        self.offset as i128 + self.terms.iter().map(|t| t.eval(x)).sum::<i128>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instance {
    pub n_vars: usize,
    pub objective: Option<Objective>,
    pub constraints: Vec<PbConstraint>,
    pub is_wbo: bool,
    /// WBO: total violation cost must stay strictly below this value.
    pub top_cost: Option<i64>,
    pub intsize: u32,
}

impl Instance {
    pub fn is_nonlinear(&self) -> bool {
        let nl = |ts: &[Term]| ts.iter().any(|t| t.vars.len() > 1);
        self.constraints.iter().any(|c| nl(&c.terms))
            || self.objective.as_ref().is_some_and(|o| nl(&o.terms))
    }

    /// True when the instance asks for an optimum rather than any model.
    pub fn is_optimization(&self) -> bool {
        self.objective.is_some() || self.is_wbo
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Instances whose intsize exceeds this are rejected. Clamped to
    /// [`MAX_INTSIZE`].
    pub max_intsize: u32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_intsize: MAX_INTSIZE,
        }
    }
}

pub fn parse(text: &[u8]) -> Result<Instance, ParseError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_reader<R: io::Read>(mut reader: R, opts: ParseOptions) -> Result<Instance, ParseError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    parse_with(&buf, opts)
}

pub fn parse_with(text: &[u8], opts: ParseOptions) -> Result<Instance, ParseError> {
    let text = String::from_utf8_lossy(text);
    let mut parser = Parser::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim_start();
        if let Some(comment) = trimmed.strip_prefix('*') {
            parser.header_comment(comment);
            continue;
        }
        parser.line(trimmed, line_no)?;
    }
    if !parser.pending.is_empty() {
        return Err(ParseError::Syntax {
            line: parser.pending_line,
            message: "statement not terminated by `;`".into(),
        });
    }
    parser.finish(opts)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(i128),
    Lit { var: u32, negated: bool },
    Ge,
    Eq,
    Weight(i128),
    Min,
    Soft,
}

/// Integer sum with the constant folded out of negated literals.
#[derive(Default)]
struct Folded {
    terms: BTreeMap<Vec<u32>, i128>,
    constant: i128,
}

impl Folded {
    fn add_product(&mut self, coef: i128, lits: &[(u32, bool)], line: usize) -> Result<(), ParseError> {
        let mut seen: Vec<u32> = lits.iter().map(|&(v, _)| v).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(ParseError::DuplicateVariable { line, var: w[0] });
        }
        let positives: Vec<u32> = lits.iter().filter(|l| !l.1).map(|l| l.0).collect();
        let negatives: Vec<u32> = lits.iter().filter(|l| l.1).map(|l| l.0).collect();
        // c * prod(x_p) * prod(1 - x_n) expanded over subsets of the negated factors
        for mask in 0u64..(1u64 << negatives.len()) {
            let mut vars = positives.clone();
            let mut sign = 1i128;
            for (i, &v) in negatives.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    vars.push(v);
                    sign = -sign;
                }
            }
            let c = sign * coef;
            if vars.is_empty() {
                self.constant += c;
            } else {
                vars.sort_unstable();
                *self.terms.entry(vars).or_insert(0) += c;
            }
        }
        Ok(())
    }

    fn into_terms(self) -> (Vec<(Vec<u32>, i128)>, i128) {
        let terms = self.terms.into_iter().filter(|(_, c)| *c != 0).collect();
        (terms, self.constant)
    }
}

struct RawConstraint {
    terms: Vec<(Vec<u32>, i128)>,
    relation: Relation,
    rhs: i128,
    weight: Option<i128>,
    line: usize,
}

#[derive(Default)]
struct Parser {
    pending: Vec<Token>,
    pending_line: usize,
    header_vars: usize,
    max_var: u32,
    objective: Option<(Vec<(Vec<u32>, i128)>, i128, usize)>,
    constraints: Vec<RawConstraint>,
    is_wbo: bool,
    top_cost: Option<i128>,
}

impl Parser {
    fn header_comment(&mut self, comment: &str) {
        if let Some(rest) = comment.split("#variable=").nth(1) {
            if let Some(n) = rest.split_whitespace().next().and_then(|s| s.parse().ok()) {
                self.header_vars = n;
            }
        }
    }

    fn line(&mut self, line: &str, line_no: usize) -> Result<(), ParseError> {
        let mut rest = line;
        loop {
            rest = rest.trim_start();
            if rest.is_empty() {
                return Ok(());
            }
            if self.pending.is_empty() {
                self.pending_line = line_no;
            }
            if let Some(r) = rest.strip_prefix(';') {
                let stmt = std::mem::take(&mut self.pending);
                self.statement(stmt, self.pending_line)?;
                rest = r;
                continue;
            }
            let (tok, r) = lex(rest, line_no)?;
            self.pending.push(tok);
            rest = r;
        }
    }

    fn statement(&mut self, toks: Vec<Token>, line: usize) -> Result<(), ParseError> {
        let syntax = |message: &str| ParseError::Syntax {
            line,
            message: message.into(),
        };
        match toks.first() {
            None => Ok(()),
            Some(Token::Min) => {
                if self.objective.is_some() {
                    return Err(syntax("more than one objective"));
                }
                let folded = self.sum(&toks[1..], line)?;
                let (terms, constant) = folded.into_terms();
                self.objective = Some((terms, constant, line));
                Ok(())
            }
            Some(Token::Soft) => {
                self.is_wbo = true;
                match &toks[1..] {
                    [] => Ok(()),
                    [Token::Int(top)] => {
                        self.top_cost = Some(*top);
                        Ok(())
                    }
                    _ => Err(syntax("expected `soft: <int>;`")),
                }
            }
            Some(_) => {
                let (weight, body) = match toks[0] {
                    Token::Weight(w) => {
                        if w <= 0 {
                            return Err(syntax("soft constraint weight must be positive"));
                        }
                        self.is_wbo = true;
                        (Some(w), &toks[1..])
                    }
                    _ => (None, &toks[..]),
                };
                let rel_pos = body
                    .iter()
                    .position(|t| matches!(t, Token::Ge | Token::Eq))
                    .ok_or_else(|| syntax("constraint without relation"))?;
                let relation = match body[rel_pos] {
                    Token::Ge => Relation::Ge,
                    _ => Relation::Eq,
                };
                let rhs = match &body[rel_pos + 1..] {
                    [Token::Int(v)] => *v,
                    _ => return Err(syntax("expected a single integer right-hand side")),
                };
                let folded = self.sum(&body[..rel_pos], line)?;
                let (terms, constant) = folded.into_terms();
                self.constraints.push(RawConstraint {
                    terms,
                    relation,
                    rhs: rhs - constant,
                    weight,
                    line,
                });
                Ok(())
            }
        }
    }

    fn sum(&mut self, toks: &[Token], line: usize) -> Result<Folded, ParseError> {
        let mut folded = Folded::default();
        let mut i = 0;
        while i < toks.len() {
            let coef = match toks[i] {
                Token::Int(c) => c,
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        message: "expected a coefficient".into(),
                    })
                }
            };
            i += 1;
            let mut lits = Vec::new();
            while let Some(Token::Lit { var, negated }) = toks.get(i) {
                self.max_var = self.max_var.max(*var);
                lits.push((*var, *negated));
                i += 1;
            }
            if lits.is_empty() {
                return Err(ParseError::Syntax {
                    line,
                    message: "coefficient without variables".into(),
                });
            }
            folded.add_product(coef, &lits, line)?;
        }
        Ok(folded)
    }

    fn finish(self, opts: ParseOptions) -> Result<Instance, ParseError> {
        let limit = opts.max_intsize.min(MAX_INTSIZE);
        let mut bits = 0u32;
        let mut check = |ints: &mut dyn Iterator<Item = i128>| -> Result<(), ParseError> {
            let total = ints.fold(0u128, |acc, v| acc.saturating_add(v.unsigned_abs()));
            let b = bit_length(total);
            bits = bits.max(b);
            if b > limit {
                return Err(ParseError::UnsupportedIntsize { bits: b, limit });
            }
            Ok(())
        };
        if let Some((terms, constant, _)) = &self.objective {
            check(&mut terms.iter().map(|t| t.1).chain(std::iter::once(*constant)))?;
        }
        for c in &self.constraints {
            check(
                &mut c
                    .terms
                    .iter()
                    .map(|t| t.1)
                    .chain([c.rhs])
                    .chain(c.weight),
            )?;
        }
        if self.is_wbo && self.objective.is_some() {
            let line = self.objective.as_ref().map_or(0, |o| o.2);
            return Err(ParseError::Syntax {
                line,
                message: "WBO instances carry no `min:` objective".into(),
            });
        }
        if let Some(top) = self.top_cost {
            if top <= 0 || top > i64::MAX as i128 {
                return Err(ParseError::Syntax {
                    line: 0,
                    message: "top cost must be a positive 64-bit integer".into(),
                });
            }
        }
        let to_terms = |ts: Vec<(Vec<u32>, i128)>| -> Vec<Term> {
            ts.into_iter()
                .map(|(vars, coef)| Term {
                    coef: coef as i64,
                    vars,
                })
                .collect()
        };
        let objective = self.objective.map(|(terms, constant, _)| Objective {
            terms: to_terms(terms),
            offset: constant as i64,
        });
        let constraints = self
            .constraints
            .into_iter()
            .map(|c| {
                let _ = c.line;
                PbConstraint {
                    terms: to_terms(c.terms),
                    relation: c.relation,
                    rhs: c.rhs as i64,
                    weight: c.weight.map(|w| w as i64),
                }
            })
            .collect();
        let mut inst = Instance {
            n_vars: self.header_vars.max(self.max_var as usize),
            objective,
            constraints,
            is_wbo: self.is_wbo,
            top_cost: self.top_cost.map(|t| t as i64),
            intsize: 0,
        };
        inst.intsize = compute_intsize(&inst);
        debug_assert_eq!(inst.intsize, bits);
        Ok(inst)
    }
}

fn lex(s: &str, line: usize) -> Result<(Token, &str), ParseError> {
    let word_end = s
        .find(|c: char| c.is_whitespace() || c == ';')
        .unwrap_or(s.len());
    let malformed = |tok: &str| ParseError::Malformed {
        line,
        token: tok.to_string(),
    };
    if let Some(r) = s.strip_prefix(">=") {
        return Ok((Token::Ge, r));
    }
    if let Some(r) = s.strip_prefix("<=") {
        let _ = r;
        return Err(ParseError::Relation {
            line,
            relation: "<=".into(),
        });
    }
    if let Some(r) = s.strip_prefix('=') {
        return Ok((Token::Eq, r));
    }
    for rel in ["<", ">", "!="] {
        if s.starts_with(rel) {
            return Err(ParseError::Relation {
                line,
                relation: s[..word_end].to_string(),
            });
        }
    }
    if let Some(r) = s.strip_prefix("min:") {
        return Ok((Token::Min, r));
    }
    if let Some(r) = s.strip_prefix("soft:") {
        return Ok((Token::Soft, r));
    }
    if let Some(r) = s.strip_prefix('[') {
        let close = r.find(']').ok_or_else(|| malformed(&s[..word_end]))?;
        let inner = r[..close].trim();
        let w = parse_int(inner, line)?;
        return Ok((Token::Weight(w), &r[close + 1..]));
    }
    let word = &s[..word_end];
    let rest = &s[word_end..];
    let (negated, body) = match word.strip_prefix('~') {
        Some(b) => (true, b),
        None => (false, word),
    };
    if let Some(idx) = body.strip_prefix('x') {
        let var: u32 = idx.parse().map_err(|_| malformed(word))?;
        if var == 0 {
            return Err(malformed(word));
        }
        return Ok((Token::Lit { var, negated }, rest));
    }
    if negated {
        return Err(malformed(word));
    }
    // a sign may be separated from its digits by blanks
    if word == "+" || word == "-" {
        let after = rest.trim_start();
        let end = after
            .find(|c: char| c.is_whitespace() || c == ';')
            .unwrap_or(after.len());
        let digits = &after[..end];
        let v = parse_int(digits, line)?;
        return Ok((Token::Int(if word == "-" { -v } else { v }), &after[end..]));
    }
    Ok((Token::Int(parse_int(word, line)?), rest))
}

fn parse_int(tok: &str, line: usize) -> Result<i128, ParseError> {
    let digits = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    if digits.is_empty() {
        return Err(ParseError::Malformed {
            line,
            token: tok.into(),
        });
    }
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        let numeric = digits
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'-' | b'+'));
        if numeric && digits.bytes().any(|b| b.is_ascii_digit()) {
            return Err(ParseError::NonInteger {
                line,
                token: tok.into(),
            });
        }
        return Err(ParseError::Malformed {
            line,
            token: tok.into(),
        });
    }
    match tok.parse::<i128>() {
        Ok(v) if v.unsigned_abs() < 1u128 << 100 => Ok(v),
        _ => Err(ParseError::UnsupportedIntsize {
            bits: (digits.len() as f64 * std::f64::consts::LOG2_10).ceil() as u32,
            limit: MAX_INTSIZE,
        }),
    }
}

/// Number of bits of a non-negative integer (0 for 0).
pub fn bit_length(v: u128) -> u32 {
    128 - v.leading_zeros()
}

/// Maximum over constraints and the objective of the bit length of the sum
/// of absolute values of all integers appearing in it: coefficients, the
/// right-hand side, soft weights, and the objective constant.
pub fn compute_intsize(inst: &Instance) -> u32 {
    let row_bits = |ints: &mut dyn Iterator<Item = i64>| {
        bit_length(ints.map(|v| v.unsigned_abs() as u128).sum())
    };
    let obj = inst
        .objective
        .as_ref()
        .map_or(0, |o| row_bits(&mut o.terms.iter().map(|t| t.coef).chain([o.offset])));
    inst.constraints
        .iter()
        .map(|c| {
            row_bits(
                &mut c
                    .terms
                    .iter()
                    .map(|t| t.coef)
                    .chain([c.rhs])
                    .chain(c.weight),
            )
        })
        .fold(obj, u32::max)
}

/// Canonical OPB/WBO text for an instance; `parse(write_opb(i)) == i`.
pub fn write_opb(inst: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "* #variable= {} #constraint= {}",
        inst.n_vars,
        inst.constraints.len()
    );
    if inst.is_wbo {
        match inst.top_cost {
            Some(t) => {
                let _ = writeln!(out, "soft: {t};");
            }
            None => out.push_str("soft: ;\n"),
        }
    }
    let terms = |out: &mut String, ts: &[Term]| {
        for t in ts {
            let _ = write!(out, "{:+}", t.coef);
            for v in &t.vars {
                let _ = write!(out, " x{v}");
            }
            out.push(' ');
        }
    };
    if let Some(obj) = &inst.objective {
        out.push_str("min: ");
        terms(&mut out, &obj.terms);
        if obj.offset != 0 {
            // c*x1 + c*~x1 folds to the constant c
            let _ = write!(out, "{:+} x1 {:+} ~x1 ", obj.offset, obj.offset);
        }
        out.push_str(";\n");
    }
    for c in &inst.constraints {
        if let Some(w) = c.weight {
            let _ = write!(out, "[{w}] ");
        }
        terms(&mut out, &c.terms);
        let rel = match c.relation {
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, "{rel} {};", c.rhs);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Satisfiable,
    OptimumFound,
    Unsatisfiable,
    Unknown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Satisfiable => "SATISFIABLE",
            Status::OptimumFound => "OPTIMUM FOUND",
            Status::Unsatisfiable => "UNSATISFIABLE",
            Status::Unknown => "UNKNOWN",
        }
    }

    /// Process exit code used by the PB competitions.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Satisfiable => 10,
            Status::Unsatisfiable => 20,
            Status::OptimumFound => 30,
            Status::Unknown => 0,
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn emit_objective<W: Write>(sink: &mut W, value: i64) -> io::Result<()> {
    writeln!(sink, "o {value}")?;
    sink.flush()
}

pub fn emit_comment<W: Write>(sink: &mut W, text: &str) -> io::Result<()> {
    for line in text.lines() {
        writeln!(sink, "c {line}")?;
    }
    sink.flush()
}

/// Formats the body of a `v` line: `x<i>` for true, `-x<i>` for false.
pub fn model_line(assignment: &[bool]) -> String {
    let mut s = String::with_capacity(assignment.len() * 5);
    for (i, &v) in assignment.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        if !v {
            s.push('-');
        }
        let _ = write!(s, "x{}", i + 1);
    }
    s
}

/// Writes the closing lines of a run: `o` for the best objective (if any),
/// the `s` status, and the `v` model line when a model exists.
pub fn emit_result<W: Write>(
    status: Status,
    best_obj: Option<i64>,
    best_assignment: Option<&[bool]>,
    sink: &mut W,
) -> io::Result<()> {
    if let Some(o) = best_obj {
        emit_objective(sink, o)?;
    }
    writeln!(sink, "s {status}")?;
    sink.flush()?;
    if let Some(x) = best_assignment {
        writeln!(sink, "v {}", model_line(x))?;
        sink.flush()?;
    }
    Ok(())
}

/// Parses a `v` line (with or without the leading `v`) into an assignment of
/// `n_vars` variables. Unmentioned variables default to false.
pub fn parse_model_line(line: &str, n_vars: usize) -> Result<Vec<bool>, ParseError> {
    let mut x = vec![false; n_vars];
    for tok in line.split_whitespace() {
        if tok == "v" {
            continue;
        }
        let (val, body) = match tok.strip_prefix('-').or_else(|| tok.strip_prefix('~')) {
            Some(b) => (false, b),
            None => (true, tok),
        };
        let idx: usize = body
            .strip_prefix('x')
            .and_then(|d| d.parse().ok())
            .filter(|&i| i >= 1 && i <= n_vars)
            .ok_or_else(|| ParseError::Malformed {
                line: 1,
                token: tok.into(),
            })?;
        x[idx - 1] = val;
    }
    Ok(x)
}
