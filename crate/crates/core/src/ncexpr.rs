//! Non-commutative polynomials and rational expressions with the adjoint
//! involution fixing every variable.
//!
//! Variables are written `x1 … xd` in text and stored 0-based.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::matalg::{ComplexMatrix, MatError, C64, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at column {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("variable x{index} is out of range (expression has {num_vars} variables)")]
    VariableOutOfRange { index: usize, num_vars: usize },
    #[error("`{node}` is not defined at these arguments: {source}")]
    Singular { node: String, source: MatError },
    #[error("evaluation needs {expected} square matrices of equal size: {detail}")]
    Arguments { expected: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RationalExpr {
    Constant(C64),
    Variable(usize),
    Sum(Box<RationalExpr>, Box<RationalExpr>),
    Product(Box<RationalExpr>, Box<RationalExpr>),
    Inverse(Box<RationalExpr>),
}

use RationalExpr::*;

impl RationalExpr {
    pub fn constant(c: impl Into<C64>) -> Self {
        Constant(c.into())
    }

    pub fn var(index: usize) -> Self {
        Variable(index)
    }

    pub fn sum(a: RationalExpr, b: RationalExpr) -> Self {
        Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: RationalExpr, b: RationalExpr) -> Self {
        Product(Box::new(a), Box::new(b))
    }

    pub fn inverse(a: RationalExpr) -> Self {
        Inverse(Box::new(a))
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            Constant(_) | Variable(_) => true,
            Sum(a, b) | Product(a, b) => a.is_polynomial() && b.is_polynomial(),
            Inverse(_) => false,
        }
    }

    /// One more than the largest variable index used (0 for constants).
    pub fn min_num_vars(&self) -> usize {
        match self {
            Constant(_) => 0,
            Variable(i) => i + 1,
            Sum(a, b) | Product(a, b) => a.min_num_vars().max(b.min_num_vars()),
            Inverse(a) => a.min_num_vars(),
        }
    }

    pub fn adjoint(&self) -> RationalExpr {
        match self {
            Constant(c) => Constant(c.conj()),
            Variable(i) => Variable(*i),
            Sum(a, b) => RationalExpr::sum(a.adjoint(), b.adjoint()),
            Product(a, b) => RationalExpr::product(b.adjoint(), a.adjoint()),
            Inverse(a) => RationalExpr::inverse(a.adjoint()),
        }
    }

    /// Expand into a polynomial; `None` if the expression contains an inverse.
    pub fn to_polynomial(&self, num_vars: usize) -> Option<NCPolynomial> {
        match self {
            Constant(c) => Some(NCPolynomial::constant(num_vars, *c)),
            Variable(i) => Some(NCPolynomial::new(num_vars, vec![NCMonomial::new(ONE, vec![*i])])),
            Sum(a, b) => Some(a.to_polynomial(num_vars)?.add(&b.to_polynomial(num_vars)?)),
            Product(a, b) => Some(a.to_polynomial(num_vars)?.mul(&b.to_polynomial(num_vars)?)),
            Inverse(_) => None,
        }
    }

    /// Canonical string key: polynomial subtrees in normal form, sums flattened
    /// and sorted, products flattened with scalar factors pulled to the front.
    pub fn canonical_key(&self) -> String {
        if self.is_polynomial() {
            let p = self.to_polynomial(self.min_num_vars()).expect("polynomial subtree");
            return format!("{{{p}}}");
        }
        match self {
            Sum(..) => {
                let mut parts = Vec::new();
                self.collect_summands(&mut parts);
                let mut keys: Vec<String> = parts.iter().map(|p| p.canonical_key()).collect();
                keys.sort();
                format!("sum[{}]", keys.join(";"))
            }
            Product(..) => {
                let mut factors = Vec::new();
                self.collect_factors(&mut factors);
                let mut coefficient = ONE;
                let mut keys = Vec::new();
                for f in factors {
                    match f {
                        Constant(c) => coefficient *= c,
                        other => keys.push(other.canonical_key()),
                    }
                }
                format!("prod[{}|{}]", fmt_complex(coefficient), keys.join(";"))
            }
            Inverse(a) => format!("inv[{}]", a.canonical_key()),
            Constant(_) | Variable(_) => unreachable!("leaves are polynomial"),
        }
    }

    fn collect_summands<'a>(&'a self, out: &mut Vec<&'a RationalExpr>) {
        match self {
            Sum(a, b) => {
                a.collect_summands(out);
                b.collect_summands(out);
            }
            other => out.push(other),
        }
    }

    fn collect_factors<'a>(&'a self, out: &mut Vec<&'a RationalExpr>) {
        match self {
            Product(a, b) => {
                a.collect_factors(out);
                b.collect_factors(out);
            }
            other => out.push(other),
        }
    }

    /// Syntactic selfadjointness: term-set equality for polynomials, canonical
    /// key equality otherwise.
    pub fn is_selfadjoint(&self) -> bool {
        if self.is_polynomial() {
            let d = self.min_num_vars();
            return self.to_polynomial(d).is_some_and(|p| p.is_selfadjoint());
        }
        self.canonical_key() == self.adjoint().canonical_key()
    }

    /// Evaluate at a tuple of square matrices of equal size.
    pub fn evaluate(&self, xs: &[ComplexMatrix]) -> Result<ComplexMatrix, ExprError> {
        let needed = self.min_num_vars();
        let bad = |detail: String| ExprError::Arguments { expected: needed, detail };
        if xs.len() < needed {
            return Err(bad(format!("only {} supplied", xs.len())));
        }
        let n = match xs.first() {
            Some(x) => x.rows(),
            None => 1,
        };
        if xs.iter().any(|x| !x.is_square() || x.rows() != n) {
            return Err(bad("shapes differ".into()));
        }
        self.eval_rec(xs, n)
    }

    fn eval_rec(&self, xs: &[ComplexMatrix], n: usize) -> Result<ComplexMatrix, ExprError> {
        Ok(match self {
            Constant(c) => ComplexMatrix::scalar_identity(n, *c),
            Variable(i) => xs[*i].clone(),
            Sum(a, b) => a.eval_rec(xs, n)? + b.eval_rec(xs, n)?,
            Product(a, b) => a.eval_rec(xs, n)? * b.eval_rec(xs, n)?,
            Inverse(a) => {
                let inner = a.eval_rec(xs, n)?;
                inner.inverse().map_err(|source| ExprError::Singular { node: self.to_string(), source })?
            }
        })
    }

    /// Scalar evaluation, convenient for tests and oracles.
    pub fn evaluate_scalar(&self, xs: &[C64]) -> Result<C64, ExprError> {
        let ms: Vec<ComplexMatrix> = xs.iter().map(|&x| ComplexMatrix::scalar(x)).collect();
        Ok(self.evaluate(&ms)?[(0, 0)])
    }
}

fn fmt_real(x: f64) -> String {
    let s = format!("{x}");
    if x.is_sign_negative() {
        format!("({s})")
    } else {
        s
    }
}

fn fmt_complex(c: C64) -> String {
    if c.im == 0.0 {
        fmt_real(c.re)
    } else if c.re == 0.0 {
        if c.im.is_sign_negative() {
            format!("({}i)", c.im)
        } else {
            format!("{}i", c.im)
        }
    } else {
        let sign = if c.im.is_sign_negative() { "-" } else { "+" };
        format!("({}{sign}{}i)", c.re, c.im.abs())
    }
}

/// Prints in the input grammar; `parse(print(e))` reproduces `e` for parser output.
impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant(c) => write!(f, "{}", fmt_complex(*c)),
            Variable(i) => write!(f, "x{}", i + 1),
            Sum(a, b) => match **b {
                Sum(..) => write!(f, "{a} + ({b})"),
                _ => write!(f, "{a} + {b}"),
            },
            Product(a, b) => {
                match **a {
                    Sum(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                write!(f, "*")?;
                match **b {
                    Sum(..) | Product(..) => write!(f, "({b})"),
                    _ => write!(f, "{b}"),
                }
            }
            Inverse(a) => write!(f, "inv({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NCMonomial {
    pub coefficient: C64,
    pub word: Vec<usize>,
}

impl NCMonomial {
    pub fn new(coefficient: C64, word: Vec<usize>) -> Self {
        Self { coefficient, word }
    }

    pub fn degree(&self) -> usize {
        self.word.len()
    }
}

/// Graded lexicographic order on words.
pub fn graded_lex(a: &[usize], b: &[usize]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NCPolynomial {
    num_vars: usize,
    terms: Vec<NCMonomial>,
}

#[derive(PartialEq, Eq)]
struct GradedWord(Vec<usize>);

impl PartialOrd for GradedWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GradedWord {
    fn cmp(&self, other: &Self) -> Ordering {
        graded_lex(&self.0, &other.0)
    }
}

impl NCPolynomial {
    /// Canonicalizes: merges equal words, drops zero coefficients, sorts graded-lex.
    /// Panics if a word uses a variable index `>= num_vars`.
    pub fn new(num_vars: usize, terms: Vec<NCMonomial>) -> Self {
        let mut merged: BTreeMap<GradedWord, C64> = BTreeMap::new();
        for t in terms {
            assert!(t.word.iter().all(|&i| i < num_vars), "variable index out of range");
            *merged.entry(GradedWord(t.word)).or_insert(ZERO) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| *c != ZERO)
            .map(|(w, c)| NCMonomial::new(c, w.0))
            .collect();
        Self { num_vars, terms }
    }

    pub fn constant(num_vars: usize, c: C64) -> Self {
        Self::new(num_vars, vec![NCMonomial::new(c, vec![])])
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[NCMonomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(NCMonomial::degree).max().unwrap_or(0)
    }

    pub fn add(&self, other: &NCPolynomial) -> NCPolynomial {
        let nv = self.num_vars.max(other.num_vars);
        Self::new(nv, self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn mul(&self, other: &NCPolynomial) -> NCPolynomial {
        let nv = self.num_vars.max(other.num_vars);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let mut w = a.word.clone();
                w.extend_from_slice(&b.word);
                terms.push(NCMonomial::new(a.coefficient * b.coefficient, w));
            }
        }
        Self::new(nv, terms)
    }

    pub fn scale(&self, c: C64) -> NCPolynomial {
        Self::new(self.num_vars, self.terms.iter().map(|t| NCMonomial::new(t.coefficient * c, t.word.clone())).collect())
    }

    pub fn adjoint(&self) -> NCPolynomial {
        Self::new(
            self.num_vars,
            self.terms
                .iter()
                .map(|t| NCMonomial::new(t.coefficient.conj(), t.word.iter().rev().copied().collect()))
                .collect(),
        )
    }

    pub fn is_selfadjoint(&self) -> bool {
        self.adjoint() == *self
    }

    pub fn to_expr(&self) -> RationalExpr {
        let mut acc: Option<RationalExpr> = None;
        for t in &self.terms {
            let mut term: Option<RationalExpr> =
                if t.coefficient == ONE && !t.word.is_empty() { None } else { Some(Constant(t.coefficient)) };
            for &i in &t.word {
                term = Some(match term {
                    None => Variable(i),
                    Some(e) => RationalExpr::product(e, Variable(i)),
                });
            }
            let term = term.expect("non-empty term");
            acc = Some(match acc {
                None => term,
                Some(a) => RationalExpr::sum(a, term),
            });
        }
        acc.unwrap_or(Constant(ZERO))
    }

    pub fn evaluate(&self, xs: &[ComplexMatrix]) -> Result<ComplexMatrix, ExprError> {
        self.to_expr().evaluate(xs)
    }
}

impl fmt::Display for NCPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", fmt_complex(t.coefficient))?;
            for &i in &t.word {
                write!(f, "*x{}", i + 1)?;
            }
        }
        Ok(())
    }
}

/// Parse an expression in `x1 … x{num_vars}`.
///
/// Grammar: sums and differences of products; factors are complex literals
/// (`2`, `1.5e-3`, `i`, `3i`), variables, `inv(expr)`, parenthesized
/// expressions, each optionally raised to a non-negative integer power `^k`;
/// unary minus binds like a factor. Constant sub-expressions are folded.
pub fn parse(text: &str, num_vars: usize) -> Result<RationalExpr, ExprError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, num_vars };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected `{}`", p.chars[p.pos])));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    num_vars: usize,
}

fn fold_sum(a: RationalExpr, b: RationalExpr) -> RationalExpr {
    match (a, b) {
        (Constant(x), Constant(y)) => Constant(x + y),
        (a, b) => RationalExpr::sum(a, b),
    }
}

fn fold_product(a: RationalExpr, b: RationalExpr) -> RationalExpr {
    match (a, b) {
        (Constant(x), Constant(y)) => Constant(x * y),
        (a, b) => RationalExpr::product(a, b),
    }
}

fn negate(e: RationalExpr) -> RationalExpr {
    match e {
        Constant(c) => Constant(-c),
        other => RationalExpr::product(Constant(-ONE), other),
    }
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax { position: self.pos + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn is_minus(c: char) -> bool {
        c == '-' || c == '−'
    }

    fn expr(&mut self) -> Result<RationalExpr, ExprError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            if c == '+' {
                self.pos += 1;
                acc = fold_sum(acc, self.term()?);
            } else if Self::is_minus(c) {
                self.pos += 1;
                acc = fold_sum(acc, negate(self.term()?));
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RationalExpr, ExprError> {
        let mut acc = self.unary()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = fold_product(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<RationalExpr, ExprError> {
        match self.peek() {
            Some(c) if Self::is_minus(c) => {
                self.pos += 1;
                Ok(negate(self.unary()?))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<RationalExpr, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a non-negative integer exponent"));
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        let k: usize = digits.parse().map_err(|_| self.error("exponent too large"))?;
        if k > 64 {
            return Err(self.error("exponent above 64"));
        }
        if k == 0 {
            return Ok(Constant(ONE));
        }
        let mut acc = base.clone();
        for _ in 1..k {
            acc = fold_product(acc, base.clone());
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<RationalExpr, ExprError> {
        let Some(c) = self.peek() else {
            return Err(self.error("unexpected end of input"));
        };
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident: String = self.chars[start..self.pos].iter().collect();
            if ident == "i" {
                return Ok(Constant(C64::new(0.0, 1.0)));
            }
            if ident == "inv" {
                if self.peek() != Some('(') {
                    return Err(self.error("expected `(` after inv"));
                }
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                if inner == Constant(ZERO) {
                    return Err(self.error("inverse of zero"));
                }
                return Ok(RationalExpr::inverse(inner));
            }
            if let Some(num) = ident.strip_prefix('x') {
                if let Ok(k) = num.parse::<usize>() {
                    if k == 0 || k > self.num_vars {
                        return Err(ExprError::VariableOutOfRange { index: k, num_vars: self.num_vars });
                    }
                    return Ok(Variable(k - 1));
                }
            }
            self.pos = start;
            return Err(self.error(format!("unknown identifier `{ident}`")));
        }
        Err(self.error(format!("unexpected `{c}`")))
    }

    fn number(&mut self) -> Result<RationalExpr, ExprError> {
        let start = self.pos;
        let n = self.chars.len();
        while self.pos < n && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.') {
            self.pos += 1;
        }
        if self.pos < n && (self.chars[self.pos] == 'e' || self.chars[self.pos] == 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < n && (self.chars[self.pos] == '+' || self.chars[self.pos] == '-') {
                self.pos += 1;
            }
            if self.pos < n && self.chars[self.pos].is_ascii_digit() {
                while self.pos < n && self.chars[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            position: start + 1,
            message: format!("malformed number `{text}`"),
        })?;
        // Imaginary literal such as `3i` (but not the start of an identifier like `3inv`).
        if self.pos < n && self.chars[self.pos] == 'i' && !self.chars.get(self.pos + 1).is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
            return Ok(Constant(C64::new(0.0, value)));
        }
        Ok(Constant(C64::new(value, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> RationalExpr {
        Variable(i)
    }

    #[test]
    fn parse_example_polynomial() {
        let e = parse("x1*x2 + x2*x1 + x1^2", 2).unwrap();
        let expected = RationalExpr::sum(
            RationalExpr::sum(RationalExpr::product(x(0), x(1)), RationalExpr::product(x(1), x(0))),
            RationalExpr::product(x(0), x(0)),
        );
        assert_eq!(e, expected);
        assert!(e.is_polynomial());
    }

    #[test]
    fn parse_harmonic_sum() {
        let e = parse("inv(inv(x1)+inv(x2))", 2).unwrap();
        let expected =
            RationalExpr::inverse(RationalExpr::sum(RationalExpr::inverse(x(0)), RationalExpr::inverse(x(1))));
        assert_eq!(e, expected);
        assert!(!e.is_polynomial());
    }

    #[test]
    fn parse_constants_and_errors() {
        assert_eq!(parse("0", 1).unwrap(), Constant(ZERO));
        assert_eq!(parse("2+3i", 0).unwrap(), Constant(C64::new(2.0, 3.0)));
        assert_eq!(parse("-x1", 1).unwrap(), RationalExpr::product(Constant(-ONE), x(0)));
        assert_eq!(parse("x1^0", 1).unwrap(), Constant(ONE));
        assert_eq!(parse("1.5e-3", 0).unwrap(), Constant(C64::new(1.5e-3, 0.0)));
        assert!(matches!(parse("x3", 2), Err(ExprError::VariableOutOfRange { index: 3, .. })));
        assert!(matches!(parse("x1 +", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x1 * (x1", 1), Err(ExprError::Syntax { position: 9, .. })));
        assert!(matches!(parse("inv(0)", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("y1", 1), Err(ExprError::Syntax { position: 1, .. })));
    }

    #[test]
    fn precedence() {
        // `^` binds tighter than `*`, which binds tighter than `+`.
        let e = parse("x1 + x2*x1^2", 2).unwrap();
        let p = e.to_polynomial(2).unwrap();
        assert_eq!(p, NCPolynomial::new(2, vec![NCMonomial::new(ONE, vec![0]), NCMonomial::new(ONE, vec![1, 0, 0])]));
    }

    #[test]
    fn adjoint_examples() {
        let e = parse("x1*x2", 2).unwrap();
        assert_eq!(e.adjoint(), parse("x2*x1", 2).unwrap());
        let p = parse("x1*x2 + x2*x1 + x1^2", 2).unwrap().to_polynomial(2).unwrap();
        assert_eq!(p.adjoint(), p);
        let e = parse("(2+i)*x1", 1).unwrap();
        assert_eq!(e.adjoint(), parse("x1*(2-i)", 1).unwrap());
        assert_eq!(e.adjoint().to_polynomial(1).unwrap(), parse("(2-i)*x1", 1).unwrap().to_polynomial(1).unwrap());
    }

    #[test]
    fn selfadjointness() {
        assert!(parse("x1*x2+x2*x1+x1^2", 2).unwrap().is_selfadjoint());
        assert!(!parse("x1*x2", 2).unwrap().is_selfadjoint());
        assert!(parse("inv(x1)", 1).unwrap().is_selfadjoint());
        assert!(parse("inv(inv(x1)+inv(x2))", 2).unwrap().is_selfadjoint());
        assert!(parse("inv(x1*x2+x2*x1)", 2).unwrap().is_selfadjoint());
        assert!(parse("x2*inv(x1)*x2", 2).unwrap().is_selfadjoint());
        assert!(!parse("x2*inv(x1)", 2).unwrap().is_selfadjoint());
        assert!(parse("2*inv(x1)", 1).unwrap().is_selfadjoint());
        assert!(!parse("i*inv(x1)", 1).unwrap().is_selfadjoint());
    }

    #[test]
    fn evaluate_examples() {
        let x1 = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let x2 = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let e = parse("x1*x2 + x2*x1 + x1^2", 2).unwrap();
        let v = e.evaluate(&[x1.clone(), x2]).unwrap();
        assert_eq!(v, ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]));
        assert_eq!(parse("x1", 1).unwrap().evaluate(&[x1.clone()]).unwrap(), x1);
        let inv = parse("inv(x1)", 1).unwrap().evaluate_scalar(&[C64::new(2.0, 0.0)]).unwrap();
        assert_eq!(inv, C64::new(0.5, 0.0));
    }

    #[test]
    fn singular_evaluation_names_node() {
        let e = parse("x2 + inv(x1)", 2).unwrap();
        match e.evaluate_scalar(&[ZERO, ONE]) {
            Err(ExprError::Singular { node, .. }) => assert_eq!(node, "inv(x1)"),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "x1*x2 + x2*x1 + x1^2",
            "inv(inv(x1)+inv(x2))",
            "-x1 + 3*x2*(x1 - 2i)",
            "x1*(x2*x1) - 0.25",
            "(x1 + x2)*(x1 - x2)*inv(x1 + 1.5)",
            "(1-2i)*x1 + (-3)",
        ] {
            let e = parse(text, 2).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed, 2).unwrap(), e, "{text} -> {printed}");
        }
    }

    #[test]
    fn polynomial_canonical_form() {
        let p = parse("x2*x1 + x1 + 3 + x1*x2 - x1", 2).unwrap().to_polynomial(2).unwrap();
        let words: Vec<Vec<usize>> = p.terms().iter().map(|t| t.word.clone()).collect();
        assert_eq!(words, vec![vec![], vec![0, 1], vec![1, 0]]);
        assert!(parse("x1 - x1", 1).unwrap().to_polynomial(1).unwrap().is_zero());
        let q = parse(&p.to_string(), 2).unwrap().to_polynomial(2).unwrap();
        assert_eq!(p, q);
    }
}
