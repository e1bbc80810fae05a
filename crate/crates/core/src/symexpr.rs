//! Expression parsing, exact symbolic differentiation and fast evaluation for
//! the scalar fields V(x,y) and F(x,y,pₓ,p_y).
//!
//! Grammar (infix, `^` binds tighter than unary minus, `^` right-associative):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! IDENT  ∈ { x, y, px, py, sin, cos, exp, sqrt }
//! ```
//!
//! Differentiation folds constants eagerly but performs no other rewriting, so
//! repeated differentiation is deterministic and a derivative of an absent
//! variable folds to the literal zero (which downstream code detects to prune
//! whole inhomogeneity terms).

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    Px,
    Py,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::X, Var::Y, Var::Px, Var::Py];

    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Px => "px",
            Var::Py => "py",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    /// Internal only: produced by differentiating general powers, not parseable.
    Ln,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Arc<Expr>),
    Fun(Func, Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// Evaluate at a point. Domain violations (sqrt of a negative number,
    /// fractional powers of negative bases) surface as NaN here rather than as
    /// parse-time errors.
    pub fn eval(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::Px) => px,
            Expr::Var(Var::Py) => py,
            Expr::Neg(a) => -a.eval(x, y, px, py),
            Expr::Fun(f, a) => {
                let v = a.eval(x, y, px, py);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt(),
                    Func::Ln => v.ln(),
                }
            }
            Expr::Add(a, b) => a.eval(x, y, px, py) + b.eval(x, y, px, py),
            Expr::Sub(a, b) => a.eval(x, y, px, py) - b.eval(x, y, px, py),
            Expr::Mul(a, b) => a.eval(x, y, px, py) * b.eval(x, y, px, py),
            Expr::Div(a, b) => a.eval(x, y, px, py) / b.eval(x, y, px, py),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y, px, py);
                if let Expr::Num(e) = **b {
                    if e.fract() == 0.0 && e.abs() <= 512.0 {
                        return base.powi(e as i32);
                    }
                }
                base.powf(b.eval(x, y, px, py))
            }
        }
    }

    fn contains(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Fun(_, a) => a.contains(var),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains(var) || b.contains(var),
        }
    }
}

// ---- folding constructors ----

fn num(v: f64) -> Arc<Expr> {
    Arc::new(Expr::Num(v))
}

fn add(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        (Expr::Num(z), _) if *z == 0.0 => b,
        (_, Expr::Num(z)) if *z == 0.0 => a,
        _ => Arc::new(Expr::Add(a, b)),
    }
}

fn sub(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        (_, Expr::Num(z)) if *z == 0.0 => a,
        (Expr::Num(z), _) if *z == 0.0 => neg(b),
        _ => Arc::new(Expr::Sub(a, b)),
    }
}

fn neg(a: Arc<Expr>) -> Arc<Expr> {
    match &*a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => inner.clone(),
        _ => Arc::new(Expr::Neg(a)),
    }
}

fn mul(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        (Expr::Num(z), _) if *z == 0.0 => num(0.0),
        (_, Expr::Num(z)) if *z == 0.0 => num(0.0),
        (Expr::Num(o), _) if *o == 1.0 => b,
        (_, Expr::Num(o)) if *o == 1.0 => a,
        _ => Arc::new(Expr::Mul(a, b)),
    }
}

fn div(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => num(x / y),
        (Expr::Num(z), _) if *z == 0.0 => num(0.0),
        (_, Expr::Num(o)) if *o == 1.0 => a,
        _ => Arc::new(Expr::Div(a, b)),
    }
}

fn pow(a: Arc<Expr>, b: Arc<Expr>) -> Arc<Expr> {
    match (&*a, &*b) {
        (Expr::Num(x), Expr::Num(y)) => num(x.powf(*y)),
        (_, Expr::Num(e)) if *e == 1.0 => a,
        (_, Expr::Num(e)) if *e == 0.0 => num(1.0),
        _ => Arc::new(Expr::Pow(a, b)),
    }
}

fn fun(f: Func, a: Arc<Expr>) -> Arc<Expr> {
    if let Expr::Num(v) = &*a {
        let r = match f {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
        };
        return num(r);
    }
    Arc::new(Expr::Fun(f, a))
}

/// Exact derivative with eager constant folding.
pub fn differentiate(e: &Arc<Expr>, var: Var) -> Arc<Expr> {
    match &**e {
        Expr::Num(_) => num(0.0),
        Expr::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Add(a, b) => add(differentiate(a, var), differentiate(b, var)),
        Expr::Sub(a, b) => sub(differentiate(a, var), differentiate(b, var)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a, var), b.clone()),
            mul(a.clone(), differentiate(b, var)),
        ),
        Expr::Div(a, b) => div(
            sub(
                mul(differentiate(a, var), b.clone()),
                mul(a.clone(), differentiate(b, var)),
            ),
            mul(b.clone(), b.clone()),
        ),
        Expr::Pow(a, b) => {
            if let Expr::Num(c) = &**b {
                // c·a^(c−1)·a'
                mul(
                    mul(num(*c), pow(a.clone(), num(c - 1.0))),
                    differentiate(a, var),
                )
            } else {
                // a^b · (b'·ln a + b·a'/a)
                mul(
                    pow(a.clone(), b.clone()),
                    add(
                        mul(differentiate(b, var), fun(Func::Ln, a.clone())),
                        mul(b.clone(), div(differentiate(a, var), a.clone())),
                    ),
                )
            }
        }
        Expr::Fun(f, a) => {
            let da = differentiate(a, var);
            match f {
                Func::Sin => mul(fun(Func::Cos, a.clone()), da),
                Func::Cos => neg(mul(fun(Func::Sin, a.clone()), da)),
                Func::Exp => mul(fun(Func::Exp, a.clone()), da),
                Func::Sqrt => div(da, mul(num(2.0), fun(Func::Sqrt, a.clone()))),
                Func::Ln => div(da, a.clone()),
            }
        }
    }
}

// ---- lexer / parser ----

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("invalid number literal '{text}'"),
                })?;
                out.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    position: i,
                    message: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    src_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse {
                position: self.here(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = add(lhs, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Expr>> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = mul(lhs, self.factor()?);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = div(lhs, self.factor()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Arc<Expr>> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            return Ok(neg(self.factor()?));
        }
        let b = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let e = self.factor()?;
            return Ok(pow(b, e));
        }
        Ok(b)
    }

    fn base(&mut self) -> Result<Arc<Expr>> {
        let position = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(fun(f, arg));
                }
                let var = match name.as_str() {
                    "x" => Var::X,
                    "y" => Var::Y,
                    "px" => Var::Px,
                    "py" => Var::Py,
                    _ => {
                        return Err(Error::Parse {
                            position,
                            message: format!("unknown identifier '{name}'"),
                        })
                    }
                };
                if self.peek() == Some(&Tok::LParen) {
                    return Err(Error::Parse {
                        position: self.here(),
                        message: format!("'{name}' is a variable, not a function"),
                    });
                }
                Ok(Arc::new(Expr::Var(var)))
            }
            Some(_) => Err(Error::Parse {
                position,
                message: "expected a number, variable, function call or '('".into(),
            }),
            None => Err(Error::Parse {
                position,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

pub fn parse(src: &str) -> Result<Arc<Expr>> {
    if src.trim().is_empty() {
        return Err(Error::Parse {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        src_len: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse {
            position: p.here(),
            message: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

// ---- fields ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Depends on x, y only; differentiated up to order 4.
    Potential,
    /// Depends on all four phase-space variables; differentiated up to order 3.
    Deformation,
}

impl FieldKind {
    pub fn max_order(self) -> usize {
        match self {
            FieldKind::Potential => 4,
            FieldKind::Deformation => 3,
        }
    }
}

/// A parsed scalar field together with all of its symbolic partial
/// derivatives up to the supported order. Immutable after construction, so it
/// can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct SymbolicField {
    pub kind: FieldKind,
    base: Arc<Expr>,
    partials: HashMap<Vec<Var>, Arc<Expr>>,
}

fn multi_indices(vars: &[Var], max_order: usize) -> Vec<Vec<Var>> {
    let mut out: Vec<Vec<Var>> = vec![vec![]];
    let mut frontier: Vec<Vec<Var>> = vec![vec![]];
    for _ in 0..max_order {
        let mut next = Vec::new();
        for idx in &frontier {
            let start = idx.last().copied();
            for &v in vars {
                if let Some(last) = start {
                    if v < last {
                        continue;
                    }
                }
                let mut n = idx.clone();
                n.push(v);
                next.push(n);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

impl SymbolicField {
    /// Parse a field from source text, reject disallowed variables, and
    /// precompute every partial derivative up to the supported order.
    pub fn parse_field(source: &str, kind: FieldKind) -> Result<Self> {
        let base = parse(source)?;
        if kind == FieldKind::Potential {
            for v in [Var::Px, Var::Py] {
                if base.contains(v) {
                    return Err(Error::Parse {
                        position: 0,
                        message: format!("a potential may not depend on '{}'", v.name()),
                    });
                }
            }
        }
        let vars: &[Var] = match kind {
            FieldKind::Potential => &[Var::X, Var::Y],
            FieldKind::Deformation => &Var::ALL,
        };
        let mut partials = HashMap::new();
        partials.insert(Vec::new(), base.clone());
        for idx in multi_indices(vars, kind.max_order()) {
            if idx.is_empty() || partials.contains_key(&idx) {
                continue;
            }
            let parent = idx[..idx.len() - 1].to_vec();
            let p = partials
                .get(&parent)
                .expect("parents are generated before children");
            let d = differentiate(p, idx[idx.len() - 1]);
            partials.insert(idx, d);
        }
        Ok(Self {
            kind,
            base,
            partials,
        })
    }

    pub fn base(&self) -> &Arc<Expr> {
        &self.base
    }

    /// The exact symbolic partial for a multi-index over {x,y,px,py}.
    ///
    /// The index order does not matter. For a potential, any index touching
    /// px/py yields the literal zero. Orders above the supported maximum are
    /// an error.
    pub fn partial(&self, index: &[Var]) -> Result<Arc<Expr>> {
        if index.len() > self.kind.max_order() {
            return Err(Error::UnsupportedIndex(format!(
                "partial of order {} exceeds the supported maximum {}",
                index.len(),
                self.kind.max_order()
            )));
        }
        let mut key: Vec<Var> = index.to_vec();
        key.sort();
        if self.kind == FieldKind::Potential && key.iter().any(|v| matches!(v, Var::Px | Var::Py)) {
            return Ok(num(0.0));
        }
        self.partials
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::MissingEntry(format!("partial {key:?}")))
    }

    pub fn eval(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        self.base.eval(x, y, px, py)
    }

    pub fn eval_partial(&self, index: &[Var], x: f64, y: f64, px: f64, py: f64) -> Result<f64> {
        Ok(self.partial(index)?.eval(x, y, px, py))
    }
}

/// Outcome of the structural-hypothesis check on V (and optionally F).
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    /// max over probes of |V_x(0,y)| / (1 + |V(0,y)|)
    pub max_violation_vx: f64,
    /// max over the probe grid of |F_x(0,y,0,p_y)| / (1 + |F|)
    pub max_violation_fx: f64,
    /// max over the probe grid of |F_px(0,y,0,p_y)| / (1 + |F|)
    pub max_violation_fpx: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Verify the invariant-plane hypotheses: V_x(0,y) = 0 for all y, and for a
/// deformation both F_x(0,y,0,p_y) = 0 and F_px(0,y,0,p_y) = 0.
pub fn check_hypotheses(
    v: &SymbolicField,
    f: Option<&SymbolicField>,
    probe_ys: &[f64],
    probe_pys: &[f64],
) -> Result<HypothesisReport> {
    if probe_ys.is_empty() {
        return Err(Error::Config(
            "hypothesis check needs at least one probe".into(),
        ));
    }
    let tol = 1e-9;
    let vx = v.partial(&[Var::X])?;
    let mut worst_vx = 0.0_f64;
    for &yy in probe_ys {
        let scale = 1.0 + v.eval(0.0, yy, 0.0, 0.0).abs();
        worst_vx = worst_vx.max(vx.eval(0.0, yy, 0.0, 0.0).abs() / scale);
    }
    let mut worst_fx = 0.0_f64;
    let mut worst_fpx = 0.0_f64;
    if let Some(field) = f {
        let fx = field.partial(&[Var::X])?;
        let fpx = field.partial(&[Var::Px])?;
        for &yy in probe_ys {
            for &pp in probe_pys {
                let scale = 1.0 + field.eval(0.0, yy, 0.0, pp).abs();
                worst_fx = worst_fx.max(fx.eval(0.0, yy, 0.0, pp).abs() / scale);
                worst_fpx = worst_fpx.max(fpx.eval(0.0, yy, 0.0, pp).abs() / scale);
            }
        }
    }
    let passed = worst_vx <= tol && worst_fx <= tol && worst_fpx <= tol;
    Ok(HypothesisReport {
        max_violation_vx: worst_vx,
        max_violation_fx: worst_fx,
        max_violation_fpx: worst_fpx,
        tol,
        passed,
    })
}

/// Chebyshev probe points covering [lo, hi].
pub fn chebyshev_probes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..n)
        .map(|k| mid + half * ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field(src: &str) -> SymbolicField {
        SymbolicField::parse_field(src, FieldKind::Potential).unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        let v = field("0.5*(x^2+y^2)");
        assert_abs_diff_eq!(v.eval(1.0, 2.0, 0.0, 0.0), 2.5);
        let f = SymbolicField::parse_field("x^2*y", FieldKind::Deformation).unwrap();
        assert_abs_diff_eq!(f.eval(2.0, 3.0, 0.0, 0.0), 12.0);
    }

    #[test]
    fn rejects_unknown_identifier() {
        let err = SymbolicField::parse_field("0.5*(x^2+z^2)", FieldKind::Potential).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("unknown identifier 'z'")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_momenta_in_potentials() {
        assert!(SymbolicField::parse_field("0.5*px^2", FieldKind::Potential).is_err());
    }

    #[test]
    fn caret_binds_tighter_than_unary_minus() {
        let e = parse("-x^2").unwrap();
        assert_abs_diff_eq!(e.eval(3.0, 0.0, 0.0, 0.0), -9.0);
        let e = parse("x^-2").unwrap();
        assert_abs_diff_eq!(e.eval(2.0, 0.0, 0.0, 0.0), 0.25);
    }

    #[test]
    fn simple_partials() {
        let v = field("0.5*(x^2+y^2)");
        let vxx = v.partial(&[Var::X, Var::X]).unwrap();
        assert_eq!(*vxx, Expr::Num(1.0));
        let v2 = field("0.5*y^2 + 0.5*x^2*y");
        let vxxy = v2.partial(&[Var::X, Var::X, Var::Y]).unwrap();
        assert_eq!(*vxxy, Expr::Num(1.0));
        let f = SymbolicField::parse_field("x^2*y", FieldKind::Deformation).unwrap();
        let fpx = f.partial(&[Var::Px]).unwrap();
        assert!(fpx.is_zero());
    }

    #[test]
    fn absent_variable_folds_to_zero() {
        let v = field("sin(y)+y^3");
        assert!(v.partial(&[Var::X]).unwrap().is_zero());
    }

    #[test]
    fn order_limit_is_enforced() {
        let v = field("y^6");
        assert!(v.partial(&[Var::Y; 4]).is_ok());
        assert!(v.partial(&[Var::Y; 5]).is_err());
        let f = SymbolicField::parse_field("y^6", FieldKind::Deformation).unwrap();
        assert!(f.partial(&[Var::Y; 4]).is_err());
    }

    #[test]
    fn mixed_partials_commute() {
        let v = field("sin(x*y) + x^3*y^2");
        let a = v.partial(&[Var::X, Var::Y]).unwrap();
        let b = v.partial(&[Var::Y, Var::X]).unwrap();
        for k in 0..20 {
            let x = -1.0 + 0.1 * k as f64;
            let y = 0.3 + 0.07 * k as f64;
            assert_abs_diff_eq!(
                a.eval(x, y, 0.0, 0.0),
                b.eval(x, y, 0.0, 0.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn constant_folding_preserves_values() {
        // raw trees built node by node, against the folding constructors
        let x_var = || Arc::new(Expr::Var(Var::X));
        let y_var = || Arc::new(Expr::Var(Var::Y));
        let raw: Vec<Arc<Expr>> = vec![
            Arc::new(Expr::Add(num(0.0), x_var())),
            Arc::new(Expr::Mul(num(1.0), Arc::new(Expr::Mul(num(0.5), x_var())))),
            Arc::new(Expr::Pow(x_var(), num(1.0))),
            Arc::new(Expr::Pow(y_var(), num(0.0))),
            Arc::new(Expr::Neg(Arc::new(Expr::Neg(x_var())))),
            Arc::new(Expr::Sub(
                Arc::new(Expr::Add(num(2.0), num(3.0))),
                Arc::new(Expr::Mul(x_var(), num(0.0))),
            )),
            Arc::new(Expr::Fun(Func::Sin, Arc::new(Expr::Mul(x_var(), y_var())))),
        ];
        let folded: Vec<Arc<Expr>> = vec![
            add(num(0.0), x_var()),
            mul(num(1.0), mul(num(0.5), x_var())),
            pow(x_var(), num(1.0)),
            pow(y_var(), num(0.0)),
            neg(neg(x_var())),
            sub(add(num(2.0), num(3.0)), mul(x_var(), num(0.0))),
            fun(Func::Sin, mul(x_var(), y_var())),
        ];
        for (r, f) in raw.iter().zip(&folded) {
            for k in 0..12 {
                let x = -1.3 + 0.21 * k as f64;
                let y = 0.7 - 0.13 * k as f64;
                let a = r.eval(x, y, 0.0, 0.0);
                let b = f.eval(x, y, 0.0, 0.0);
                assert!(
                    (a - b).abs() <= 1e-15 * (1.0 + a.abs()),
                    "folding changed a value: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn hypothesis_check_examples() {
        let ys: Vec<f64> = chebyshev_probes(-11.0, 11.0, 33);
        let pys = [0.0, -1.0, 1.0];
        let ok = field("0.5*(x^2+y^2)");
        let rep = check_hypotheses(&ok, None, &ys, &pys).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_violation_vx, 0.0);

        let bad = field("0.5*y^2 + x*y");
        let rep = check_hypotheses(&bad, None, &ys, &pys).unwrap();
        assert!(!rep.passed);

        let f = SymbolicField::parse_field("x^2*y + y^3", FieldKind::Deformation).unwrap();
        let rep = check_hypotheses(&ok, Some(&f), &ys, &pys).unwrap();
        assert!(rep.passed);
    }

    /// Richardson-extrapolated central difference, the independent oracle for
    /// the derivative trees.
    fn fd(e: &Arc<Expr>, var: Var, p: [f64; 4], h: f64) -> f64 {
        let evalp = |d: f64| {
            let mut q = p;
            match var {
                Var::X => q[0] += d,
                Var::Y => q[1] += d,
                Var::Px => q[2] += d,
                Var::Py => q[3] += d,
            }
            e.eval(q[0], q[1], q[2], q[3])
        };
        let d1 = (evalp(h) - evalp(-h)) / (2.0 * h);
        let d2 = (evalp(h / 2.0) - evalp(-h / 2.0)) / h;
        (4.0 * d2 - d1) / 3.0
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let cases = [
            "0.5*(x^2+y^2) + 0.1*x^3*y - y^4/8",
            "sin(x*y) + exp(0.3*y) + sqrt(y+2)",
            "x^2*px + y*py^2 + 0.2*px^2*py",
        ];
        for src in cases {
            let e = SymbolicField::parse_field(src, FieldKind::Deformation).unwrap();
            for var in Var::ALL {
                let d = e.partial(&[var]).unwrap();
                for k in 0..8 {
                    let p = [
                        0.1 + 0.05 * k as f64,
                        0.2 + 0.07 * k as f64,
                        -0.3 + 0.04 * k as f64,
                        0.15 - 0.03 * k as f64,
                    ];
                    let exact = d.eval(p[0], p[1], p[2], p[3]);
                    let approx = fd(e.base(), var, p, 1e-4);
                    assert!(
                        (exact - approx).abs() <= 1e-6 * (1.0 + exact.abs()),
                        "{src} d/d{var}: exact {exact} vs fd {approx}"
                    );
                }
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = String> {
            prop_oneof![
                (-3i32..4).prop_map(|k| format!("{k}")),
                Just("x".to_string()),
                Just("y".to_string()),
                Just("px".to_string()),
                Just("py".to_string()),
            ]
        }

        fn poly(depth: u32) -> BoxedStrategy<String> {
            if depth == 0 {
                return leaf().boxed();
            }
            prop_oneof![
                leaf(),
                (poly(depth - 1), poly(depth - 1)).prop_map(|(a, b)| format!("({a}+{b})")),
                (poly(depth - 1), poly(depth - 1)).prop_map(|(a, b)| format!("({a}*{b})")),
                (poly(depth - 1), 1u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            ]
            .boxed()
        }

        proptest! {
            #[test]
            fn random_polynomials_differentiate_correctly(src in poly(3)) {
                let field = SymbolicField::parse_field(&src, FieldKind::Deformation).unwrap();
                for var in Var::ALL {
                    let d = field.partial(&[var]).unwrap();
                    let p = [0.37, -0.21, 0.11, 0.43];
                    let exact = d.eval(p[0], p[1], p[2], p[3]);
                    let approx = fd(field.base(), var, p, 1e-3);
                    prop_assert!((exact - approx).abs() <= 1e-6 * (1.0 + exact.abs()));
                }
            }

            #[test]
            fn mixed_partials_commute_prop(src in poly(3)) {
                let field = SymbolicField::parse_field(&src, FieldKind::Deformation).unwrap();
                let a = field.partial(&[Var::X, Var::Y]).unwrap();
                let b = field.partial(&[Var::Y, Var::X]).unwrap();
                let p = [0.29, 0.53, -0.17, 0.31];
                let va = a.eval(p[0], p[1], p[2], p[3]);
                let vb = b.eval(p[0], p[1], p[2], p[3]);
                prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
    }
}
