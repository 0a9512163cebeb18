//! Square polynomial systems over ℚ.
//!
//! Coefficients are kept as exact rationals. Two compiled views are derived at
//! construction: nearest-float coefficients for plain evaluation, and
//! two-float enclosures for interval evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::interval::{ComplexInterval, RealInterval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown variable `{name}` at line {line}, column {column}")]
    UnknownVariable {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("zero denominator at line {line}, column {column}")]
    ZeroDenominator { line: usize, column: usize },
    #[error("system is not square: {vars} variables but {polys} polynomials")]
    NonSquare { vars: usize, polys: usize },
    #[error("dimension mismatch: system has {expected} variables, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point has a non-finite coordinate")]
    NonFinite,
    #[error("Taylor order must be at least 2, got {0}")]
    TaylorOrder(usize),
}

/// A point of ℂⁿ with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint(Vec<Complex64>);

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Result<Self, PolyError> {
        if coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        Ok(Self(coords))
    }

    /// Real point `(x_1, …, x_n)`.
    pub fn real(coords: &[f64]) -> Self {
        Self(coords.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    #[allow(dead_code)]
    pub(crate) fn coords_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn is_exactly_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }
}

impl Deref for ComplexPoint {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl From<Vec<Complex64>> for ComplexPoint {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

/// Nearest float to an exact rational.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Tightest two-float enclosure of an exact rational.
pub fn rational_enclosure(q: &BigRational) -> RealInterval {
    let f = rational_to_f64(q);
    if !f.is_finite() {
        return if f > 0.0 {
            RealInterval::raw(f64::MAX, f64::INFINITY)
        } else {
            RealInterval::raw(f64::NEG_INFINITY, -f64::MAX)
        };
    }
    let back = BigRational::from_float(f).expect("finite float");
    match q.cmp(&back) {
        std::cmp::Ordering::Equal => RealInterval::point(f),
        std::cmp::Ordering::Less => RealInterval::raw(f.next_down(), f),
        std::cmp::Ordering::Greater => RealInterval::raw(f, f.next_up()),
    }
}

/// A multivariate polynomial: exponent vector ↦ nonzero rational coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Self {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(n_vars);
        p.add_term(vec![0; n_vars], c);
        p
    }

    /// The variable `x_{var+1}` (zero-based index).
    pub fn var(n_vars: usize, var: usize) -> Self {
        let mut exps = vec![0; n_vars];
        exps[var] = 1;
        let mut p = Self::zero(n_vars);
        p.add_term(exps, BigRational::one());
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Adds `c·x^exps`, dropping the term if the coefficient cancels.
    pub fn add_term(&mut self, exps: Vec<u32>, c: BigRational) {
        assert_eq!(exps.len(), self.n_vars, "exponent vector length");
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        let mut out = Polynomial::zero(self.n_vars);
        for (e, a) in &self.terms {
            out.add_term(e.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.n_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    /// `∂/∂x_{var+1}`.
    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n_vars);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut d = e.clone();
                d[var] -= 1;
                out.add_term(d, c * BigRational::from_integer(BigInt::from(e[var])));
            }
        }
        out
    }

    fn sorted_terms(&self) -> Vec<(&Vec<u32>, &BigRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        v
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (exps, c)) in self.sorted_terms().into_iter().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            let mut parts: Vec<String> = Vec::new();
            let is_const = exps.iter().all(|&e| e == 0);
            if !mag.is_one() || is_const {
                parts.push(mag.to_string());
            }
            for (j, &e) in exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => parts.push(format!("x{}", j + 1)),
                    _ => parts.push(format!("x{}^{}", j + 1, e)),
                }
            }
            write!(f, "{}", parts.join(" * "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    exps: Box<[u32]>,
    coef: f64,
    coef_iv: RealInterval,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledPoly {
    terms: Vec<CompiledTerm>,
}

impl CompiledPoly {
    fn new(p: &Polynomial) -> Self {
        Self {
            terms: p
                .terms
                .iter()
                .map(|(e, c)| CompiledTerm {
                    exps: e.clone().into_boxed_slice(),
                    coef: rational_to_f64(c),
                    coef_iv: rational_enclosure(c),
                })
                .collect(),
        }
    }

    fn eval(&self, pows: &[Vec<Complex64>]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let mut m = Complex64::new(t.coef, 0.0);
            for (j, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    m *= pows[j][e as usize];
                }
            }
            acc += m;
        }
        acc
    }

    pub(crate) fn eval_interval(&self, pows: &[Vec<ComplexInterval>]) -> ComplexInterval {
        let mut acc = ComplexInterval::ZERO;
        for t in &self.terms {
            let mut m = ComplexInterval::real(t.coef_iv);
            for (j, &e) in t.exps.iter().enumerate() {
                if e > 0 {
                    m = m * pows[j][e as usize];
                }
            }
            acc = acc + m;
        }
        acc
    }
}

/// Taylor coefficients of order `k` at a point: for each polynomial, the
/// coefficients of `y^β`, `|β| = k`, in `f_i(p + y)`, as enclosures.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorData {
    pub order: usize,
    pub entries: Vec<Vec<(Vec<u32>, ComplexInterval)>>,
}

impl TaylorData {
    /// True when every polynomial's order-`k` part vanishes identically.
    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(Vec::is_empty)
    }

    /// Enclosure of the coefficient of `y^exps` in polynomial `i`.
    pub fn coefficient(&self, i: usize, exps: &[u32]) -> Option<ComplexInterval> {
        self.entries[i]
            .iter()
            .find(|(e, _)| e.as_slice() == exps)
            .map(|(_, c)| *c)
    }
}

/// `n` polynomials in `n` variables with exact rational coefficients.
#[derive(Debug, Clone)]
pub struct PolynomialSystem {
    n_vars: usize,
    polys: Vec<Polynomial>,
    max_degree: u32,
    compiled: Vec<CompiledPoly>,
    // row-major ∂f_i/∂x_j
    jac_compiled: Vec<CompiledPoly>,
}

impl PartialEq for PolynomialSystem {
    fn eq(&self, other: &Self) -> bool {
        self.n_vars == other.n_vars && self.polys == other.polys
    }
}

impl PolynomialSystem {
    pub fn new(n_vars: usize, polys: Vec<Polynomial>) -> Result<Self, PolyError> {
        if n_vars == 0 || polys.len() != n_vars {
            return Err(PolyError::NonSquare {
                vars: n_vars,
                polys: polys.len(),
            });
        }
        if let Some(p) = polys.iter().find(|p| p.n_vars != n_vars) {
            return Err(PolyError::DimensionMismatch {
                expected: n_vars,
                got: p.n_vars,
            });
        }
        let max_degree = polys.iter().map(Polynomial::degree).max().unwrap_or(0);
        let compiled = polys.iter().map(CompiledPoly::new).collect();
        let jac_compiled = polys
            .iter()
            .flat_map(|p| (0..n_vars).map(move |j| CompiledPoly::new(&p.derivative(j))))
            .collect();
        Ok(Self {
            n_vars,
            polys,
            max_degree,
            compiled,
            jac_compiled,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub(crate) fn compiled(&self) -> &[CompiledPoly] {
        &self.compiled
    }

    pub(crate) fn jac_compiled(&self) -> &[CompiledPoly] {
        &self.jac_compiled
    }

    pub fn check_dim(&self, got: usize) -> Result<(), PolyError> {
        if got != self.n_vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.n_vars,
                got,
            });
        }
        Ok(())
    }

    fn powers(&self, p: &[Complex64]) -> Vec<Vec<Complex64>> {
        let deg = self.max_degree as usize;
        p.iter()
            .map(|&z| {
                let mut v = Vec::with_capacity(deg + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                v.push(acc);
                for _ in 0..deg {
                    acc *= z;
                    v.push(acc);
                }
                v
            })
            .collect()
    }

    /// `(f_1(p), …, f_n(p))` in complex floating point.
    pub fn evaluate(&self, p: &[Complex64]) -> Result<Vec<Complex64>, PolyError> {
        self.check_dim(p.len())?;
        let pows = self.powers(p);
        Ok(self.compiled.iter().map(|c| c.eval(&pows)).collect())
    }

    /// `Jac_F(p)` with entry `(i, j) = ∂f_i/∂x_j (p)`.
    pub fn jacobian_at(&self, p: &[Complex64]) -> Result<DMatrix<Complex64>, PolyError> {
        self.check_dim(p.len())?;
        let pows = self.powers(p);
        let n = self.n_vars;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.jac_compiled[i * n + j].eval(&pows)
        }))
    }

    /// Order-`k` Taylor coefficients of each `f_i` expanded at `p`.
    ///
    /// `p` is a float vector, hence an exact rational point; the binomial
    /// shift is evaluated in outward-rounded interval arithmetic, so every
    /// returned coefficient encloses the exact one.
    pub fn taylor_at(&self, p: &[Complex64], k: usize) -> Result<TaylorData, PolyError> {
        self.check_dim(p.len())?;
        if k < 2 {
            return Err(PolyError::TaylorOrder(k));
        }
        let n = self.n_vars;
        let deg = self.max_degree as usize;
        let pows: Vec<Vec<ComplexInterval>> = p
            .iter()
            .map(|&z| {
                let zi = ComplexInterval::point(z);
                let mut v = vec![ComplexInterval::ONE];
                for e in 1..=deg {
                    v.push(v[e - 1] * zi);
                }
                v
            })
            .collect();
        let mut entries = Vec::with_capacity(n);
        for poly in &self.polys {
            let mut acc: BTreeMap<Vec<u32>, ComplexInterval> = BTreeMap::new();
            if (poly.degree() as usize) >= k {
                for (alpha, c) in &poly.terms {
                    let total: u32 = alpha.iter().sum();
                    if (total as usize) < k {
                        continue;
                    }
                    let base = ComplexInterval::real(rational_enclosure(c));
                    let mut beta = vec![0u32; n];
                    sub_indices(alpha, k as u32, 0, &mut beta, &mut |beta| {
                        let mut term = base;
                        for j in 0..n {
                            let b = binomial_enclosure(alpha[j], beta[j]);
                            if !(b.is_point() && b.lo() == 1.0) {
                                term = term.scale(b);
                            }
                            let rest = (alpha[j] - beta[j]) as usize;
                            if rest > 0 {
                                term = term * pows[j][rest];
                            }
                        }
                        acc.entry(beta.to_vec())
                            .and_modify(|v| *v = *v + term)
                            .or_insert(term);
                    });
                }
            }
            entries.push(acc.into_iter().collect());
        }
        Ok(TaylorData { order: k, entries })
    }
}

// Enumerates every β ≤ α (componentwise) with |β| = remaining.
fn sub_indices(
    alpha: &[u32],
    remaining: u32,
    j: usize,
    beta: &mut Vec<u32>,
    f: &mut impl FnMut(&[u32]),
) {
    if j == alpha.len() {
        if remaining == 0 {
            f(beta);
        }
        return;
    }
    let tail: u32 = alpha[j + 1..].iter().sum();
    let lo = remaining.saturating_sub(tail);
    let hi = alpha[j].min(remaining);
    for b in lo..=hi {
        beta[j] = b;
        sub_indices(alpha, remaining - b, j + 1, beta, f);
    }
    beta[j] = 0;
}

fn binomial_enclosure(n: u32, k: u32) -> RealInterval {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    rational_enclosure(&BigRational::from_integer(acc))
}

impl fmt::Display for PolynomialSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars: {}", self.n_vars)?;
        for p in &self.polys {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

struct Lexer {
    line: usize,
    chars: Vec<(usize, char)>,
    pos: usize,
    n_vars: usize,
}

impl Lexer {
    fn new(src: &str, line: usize, n_vars: usize) -> Self {
        Self {
            line,
            chars: src.chars().enumerate().map(|(i, c)| (i + 1, c)).collect(),
            pos: 0,
            n_vars,
        }
    }

    fn err(&self, column: usize, message: impl Into<String>) -> PolyError {
        PolyError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, PolyError> {
        let mut out = Vec::new();
        while self.pos < self.chars.len() {
            let (col, c) = self.chars[self.pos];
            match c {
                ' ' | '\t' | '\r' => self.pos += 1,
                '+' => {
                    out.push((col, Tok::Plus));
                    self.pos += 1;
                }
                '-' => {
                    out.push((col, Tok::Minus));
                    self.pos += 1;
                }
                '*' => {
                    out.push((col, Tok::Star));
                    self.pos += 1;
                }
                '/' => {
                    out.push((col, Tok::Slash));
                    self.pos += 1;
                }
                '^' => {
                    out.push((col, Tok::Caret));
                    self.pos += 1;
                }
                '0'..='9' | '.' => {
                    let start = self.pos;
                    while self.pos < self.chars.len()
                        && (self.chars[self.pos].1.is_ascii_digit() || self.chars[self.pos].1 == '.')
                    {
                        self.pos += 1;
                    }
                    let text: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                    out.push((col, Tok::Num(self.decimal(&text, col)?)));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = self.pos;
                    while self.pos < self.chars.len()
                        && (self.chars[self.pos].1.is_ascii_alphanumeric() || self.chars[self.pos].1 == '_')
                    {
                        self.pos += 1;
                    }
                    let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
                    let idx = name
                        .strip_prefix('x')
                        .and_then(|d| d.parse::<usize>().ok())
                        .filter(|&i| i >= 1 && i <= self.n_vars);
                    match idx {
                        Some(i) => out.push((col, Tok::Var(i - 1))),
                        None => {
                            return Err(PolyError::UnknownVariable {
                                name,
                                line: self.line,
                                column: col,
                            })
                        }
                    }
                }
                other => return Err(self.err(col, format!("unexpected character `{other}`"))),
            }
        }
        Ok(out)
    }

    fn decimal(&self, text: &str, col: usize) -> Result<BigRational, PolyError> {
        let mut parts = text.splitn(2, '.');
        let int = parts.next().unwrap_or("");
        let frac = parts.next();
        if int.is_empty() && frac.map_or(true, str::is_empty) {
            return Err(self.err(col, format!("malformed number `{text}`")));
        }
        if frac.is_some_and(|f| f.contains('.')) {
            return Err(self.err(col, format!("malformed number `{text}`")));
        }
        let digits = format!("{int}{}", frac.unwrap_or(""));
        let num: BigInt = digits
            .parse()
            .map_err(|_| self.err(col, format!("malformed number `{text}`")))?;
        let scale = frac.map_or(0, str::len);
        let den = num_traits::pow(BigInt::from(10), scale);
        Ok(BigRational::new(num, den))
    }
}

fn parse_poly_line(text: &str, line: usize, n_vars: usize) -> Result<Polynomial, PolyError> {
    let toks = Lexer::new(text, line, n_vars).tokens()?;
    let err = |column: usize, message: &str| PolyError::Syntax {
        line,
        column,
        message: message.to_string(),
    };
    let end_col = text.chars().count() + 1;
    let mut poly = Polynomial::zero(n_vars);
    let mut i = 0;
    let mut first = true;
    while i < toks.len() || first {
        let mut sign = BigRational::one();
        match toks.get(i) {
            Some((_, Tok::Plus)) => i += 1,
            Some((_, Tok::Minus)) => {
                sign = -sign;
                i += 1;
            }
            Some((col, _)) if !first => return Err(err(*col, "expected `+` or `-`")),
            None if first => return Err(err(1, "empty polynomial")),
            _ => {}
        }
        first = false;
        // term := factor ('*' factor)*
        let mut coef = sign;
        let mut exps = vec![0u32; n_vars];
        loop {
            match toks.get(i) {
                Some((_, Tok::Num(a))) => {
                    let mut value = a.clone();
                    i += 1;
                    if let Some((scol, Tok::Slash)) = toks.get(i) {
                        i += 1;
                        match toks.get(i) {
                            Some((dcol, Tok::Num(b))) => {
                                if b.is_zero() {
                                    return Err(PolyError::ZeroDenominator {
                                        line,
                                        column: *dcol,
                                    });
                                }
                                value /= b.clone();
                                i += 1;
                            }
                            Some((c, _)) => return Err(err(*c, "expected denominator after `/`")),
                            None => return Err(err(end_col.max(*scol + 1), "expected denominator after `/`")),
                        }
                    }
                    coef *= value;
                }
                Some((_, Tok::Var(v))) => {
                    let v = *v;
                    i += 1;
                    let mut e = 1u32;
                    if let Some((ccol, Tok::Caret)) = toks.get(i) {
                        i += 1;
                        match toks.get(i) {
                            Some((ecol, Tok::Num(q))) => {
                                if !q.is_integer() || q.is_negative() {
                                    return Err(err(*ecol, "exponent must be a non-negative integer"));
                                }
                                e = q.to_integer().to_u32().ok_or_else(|| err(*ecol, "exponent too large"))?;
                                i += 1;
                            }
                            Some((c, _)) => return Err(err(*c, "expected exponent after `^`")),
                            None => return Err(err(end_col.max(*ccol + 1), "expected exponent after `^`")),
                        }
                    }
                    exps[v] += e;
                }
                Some((col, _)) => return Err(err(*col, "expected a number or variable")),
                None => return Err(err(end_col, "unexpected end of line")),
            }
            match toks.get(i) {
                Some((_, Tok::Star)) => i += 1,
                _ => break,
            }
        }
        poly.add_term(exps, coef);
    }
    Ok(poly)
}

/// Parses the system text format: an optional `vars: n` header followed by
/// one polynomial per line; `#` starts a comment.
pub fn parse_system(text: &str) -> Result<PolynomialSystem, PolyError> {
    let mut declared: Option<usize> = None;
    let mut bodies: Vec<(usize, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("vars:") {
            if declared.is_some() || !bodies.is_empty() {
                return Err(PolyError::Syntax {
                    line,
                    column: 1,
                    message: "`vars:` header must come first".into(),
                });
            }
            let n = rest.trim().parse::<usize>().map_err(|_| PolyError::Syntax {
                line,
                column: raw.find("vars:").unwrap_or(0) + 6,
                message: format!("invalid variable count `{}`", rest.trim()),
            })?;
            declared = Some(n);
            continue;
        }
        bodies.push((line, content));
    }
    let n_vars = declared.unwrap_or(bodies.len());
    if n_vars == 0 || bodies.len() != n_vars {
        return Err(PolyError::NonSquare {
            vars: n_vars,
            polys: bodies.len(),
        });
    }
    let polys = bodies
        .into_iter()
        // columns are relative to the comment-stripped, trimmed line
        .map(|(line, body)| parse_poly_line(body, line, n_vars))
        .collect::<Result<Vec<_>, _>>()?;
    PolynomialSystem::new(n_vars, polys)
}
