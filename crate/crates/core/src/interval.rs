//! Outward-rounded interval arithmetic over the reals and rectangular complex
//! intervals, plus boxes and square matrices of complex intervals.
//!
//! Every elementary operation is computed in round-to-nearest and then
//! corrected with an error-free transformation (TwoSum / FMA residual): if the
//! rounded result is inexact, the endpoint is moved one representable float in
//! the unfavourable direction. Results are therefore true directed roundings,
//! never narrower than the exact range.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

use crate::poly::PolynomialSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("division by an interval containing zero")]
    DivisionByZero,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid interval endpoints [{lo}, {hi}]")]
    InvalidEndpoints { lo: f64, hi: f64 },
}

// Below this magnitude the FMA residual of a product may itself be rounded.
const TINY: f64 = 1.0e-290;

#[inline]
fn from_err(s: f64, err: f64) -> (f64, f64) {
    if err > 0.0 {
        (s, s.next_up())
    } else if err < 0.0 {
        (s.next_down(), s)
    } else {
        (s, s)
    }
}

#[inline]
fn overflowed(s: f64) -> (f64, f64) {
    if s > 0.0 {
        (f64::MAX, f64::INFINITY)
    } else {
        (f64::NEG_INFINITY, -f64::MAX)
    }
}

/// Enclosure `(lo, hi)` of the exact sum `a + b`.
#[inline]
pub fn add_enclose(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if s.is_finite() {
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        from_err(s, err)
    } else if a.is_finite() && b.is_finite() {
        overflowed(s)
    } else {
        (s, s)
    }
}

/// Enclosure of the exact product `a * b`. `0 * inf` is taken as `0`.
#[inline]
pub fn mul_enclose(a: f64, b: f64) -> (f64, f64) {
    if a == 0.0 || b == 0.0 {
        return (0.0, 0.0);
    }
    let p = a * b;
    if !p.is_finite() {
        return if a.is_finite() && b.is_finite() {
            overflowed(p)
        } else {
            (p, p)
        };
    }
    if p.abs() < TINY {
        return (p.next_down(), p.next_up());
    }
    let err = a.mul_add(b, -p);
    from_err(p, err)
}

/// Enclosure of the exact quotient `a / b`, `b != 0`.
#[inline]
pub fn div_enclose(a: f64, b: f64) -> (f64, f64) {
    debug_assert!(b != 0.0);
    if a == 0.0 {
        return (0.0, 0.0);
    }
    let q = a / b;
    if !q.is_finite() {
        return if a.is_finite() && b.is_finite() {
            overflowed(q)
        } else {
            (q, q)
        };
    }
    if q == 0.0 || q.abs() < TINY || b.is_infinite() {
        return (q.next_down(), q.next_up());
    }
    // a - q*b, exact when nothing underflows
    let r = (-q).mul_add(b, a);
    let err = if b > 0.0 { r } else { -r };
    from_err(q, err)
}

/// Enclosure of `sqrt(a)` for `a >= 0`.
#[inline]
pub fn sqrt_enclose(a: f64) -> (f64, f64) {
    debug_assert!(a >= 0.0);
    let s = a.sqrt();
    if !s.is_finite() || s == 0.0 || a < TINY {
        return (if s == 0.0 { 0.0 } else { s.next_down() }, s.next_up());
    }
    let r = (-s).mul_add(s, a);
    from_err(s, r)
}

#[inline]
fn nan_to_zero(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x
    }
}

/// A closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealInterval {
    lo: f64,
    hi: f64,
}

impl RealInterval {
    pub const ZERO: RealInterval = RealInterval { lo: 0.0, hi: 0.0 };
    pub const ONE: RealInterval = RealInterval { lo: 1.0, hi: 1.0 };
    pub const ENTIRE: RealInterval = RealInterval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(IntervalError::InvalidEndpoints { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Builds `[lo, hi]` without validation; callers guarantee `lo <= hi`.
    #[inline]
    pub(crate) fn raw(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "bad interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    #[inline]
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Symmetric interval `[c - r, c + r]`, outward rounded.
    pub fn centered(c: f64, r: f64) -> Self {
        let r = r.abs();
        Self {
            lo: add_enclose(c, -r).0,
            hi: add_enclose(c, r).1,
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    /// `self ⊆ other`.
    pub fn subset_of(&self, other: &RealInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Both endpoints strictly inside `other`.
    pub fn interior_of(&self, other: &RealInterval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersect(&self, other: &RealInterval) -> Option<RealInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn hull(&self, other: &RealInterval) -> RealInterval {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Upper bound on the width.
    pub fn width(&self) -> f64 {
        add_enclose(self.hi, -self.lo).1
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_infinite() || self.hi.is_infinite() {
            return if self.lo.is_infinite() && self.hi.is_infinite() {
                0.0
            } else if self.lo.is_infinite() {
                -f64::MAX
            } else {
                f64::MAX
            };
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    /// Largest absolute value over the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value over the interval.
    pub fn mig(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn abs(&self) -> RealInterval {
        Self {
            lo: self.mig(),
            hi: self.mag(),
        }
    }

    /// `{x^2 : x ∈ self}`, tighter than `self * self`.
    pub fn sqr(&self) -> RealInterval {
        let a = self.mig();
        let b = self.mag();
        Self {
            lo: mul_enclose(a, a).0,
            hi: mul_enclose(b, b).1,
        }
    }

    /// Square root of a non-negative interval; negative parts are clipped.
    pub fn sqrt(&self) -> RealInterval {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        Self {
            lo: sqrt_enclose(lo).0.max(0.0),
            hi: sqrt_enclose(hi).1,
        }
    }

    pub fn recip(&self) -> Result<RealInterval, IntervalError> {
        RealInterval::ONE.checked_div(self)
    }

    pub fn checked_div(&self, rhs: &RealInterval) -> Result<RealInterval, IntervalError> {
        if rhs.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let cands = [
            div_enclose(self.lo, rhs.lo),
            div_enclose(self.lo, rhs.hi),
            div_enclose(self.hi, rhs.lo),
            div_enclose(self.hi, rhs.hi),
        ];
        Ok(min_max(&cands))
    }

    /// Multiply by an exactly representable scalar.
    pub fn scale(&self, c: f64) -> RealInterval {
        *self * RealInterval::point(c)
    }
}

#[inline]
fn min_max(cands: &[(f64, f64)]) -> RealInterval {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(l, h) in cands {
        lo = lo.min(nan_to_zero(l));
        hi = hi.max(nan_to_zero(h));
    }
    RealInterval { lo, hi }
}

impl Default for RealInterval {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Display for RealInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for RealInterval {
    type Output = RealInterval;
    #[inline]
    fn add(self, rhs: RealInterval) -> RealInterval {
        let mut lo = add_enclose(self.lo, rhs.lo).0;
        let mut hi = add_enclose(self.hi, rhs.hi).1;
        if lo.is_nan() {
            lo = f64::NEG_INFINITY;
        }
        if hi.is_nan() {
            hi = f64::INFINITY;
        }
        RealInterval { lo, hi }
    }
}

impl Sub for RealInterval {
    type Output = RealInterval;
    #[inline]
    fn sub(self, rhs: RealInterval) -> RealInterval {
        self + (-rhs)
    }
}

impl Neg for RealInterval {
    type Output = RealInterval;
    #[inline]
    fn neg(self) -> RealInterval {
        RealInterval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for RealInterval {
    type Output = RealInterval;
    #[inline]
    fn mul(self, rhs: RealInterval) -> RealInterval {
        if self.is_point() && rhs.is_point() {
            let (lo, hi) = mul_enclose(self.lo, rhs.lo);
            return RealInterval { lo, hi };
        }
        let cands = [
            mul_enclose(self.lo, rhs.lo),
            mul_enclose(self.lo, rhs.hi),
            mul_enclose(self.hi, rhs.lo),
            mul_enclose(self.hi, rhs.hi),
        ];
        min_max(&cands)
    }
}

/// Axis-aligned rectangle `re + i·im` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexInterval {
    pub re: RealInterval,
    pub im: RealInterval,
}

impl ComplexInterval {
    pub const ZERO: ComplexInterval = ComplexInterval {
        re: RealInterval::ZERO,
        im: RealInterval::ZERO,
    };
    pub const ONE: ComplexInterval = ComplexInterval {
        re: RealInterval::ONE,
        im: RealInterval::ZERO,
    };

    pub fn new(re: RealInterval, im: RealInterval) -> Self {
        Self { re, im }
    }

    pub fn point(z: Complex64) -> Self {
        Self {
            re: RealInterval::point(z.re),
            im: RealInterval::point(z.im),
        }
    }

    pub fn real(x: RealInterval) -> Self {
        Self {
            re: x,
            im: RealInterval::ZERO,
        }
    }

    /// Square of side `2r` centred at `z`.
    pub fn centered(z: Complex64, r: f64) -> Self {
        Self {
            re: RealInterval::centered(z.re, r),
            im: RealInterval::centered(z.im, r),
        }
    }

    pub fn mid(&self) -> Complex64 {
        Complex64::new(self.re.mid(), self.im.mid())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re.contains(z.re) && self.im.contains(z.im)
    }

    pub fn contains_zero(&self) -> bool {
        self.re.contains_zero() && self.im.contains_zero()
    }

    pub fn subset_of(&self, other: &ComplexInterval) -> bool {
        self.re.subset_of(&other.re) && self.im.subset_of(&other.im)
    }

    pub fn interior_of(&self, other: &ComplexInterval) -> bool {
        self.re.interior_of(&other.re) && self.im.interior_of(&other.im)
    }

    pub fn intersect(&self, other: &ComplexInterval) -> Option<ComplexInterval> {
        Some(Self {
            re: self.re.intersect(&other.re)?,
            im: self.im.intersect(&other.im)?,
        })
    }

    pub fn hull(&self, other: &ComplexInterval) -> ComplexInterval {
        Self {
            re: self.re.hull(&other.re),
            im: self.im.hull(&other.im),
        }
    }

    pub fn conj(&self) -> ComplexInterval {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    /// Enclosure of `|z|^2`.
    pub fn norm_sqr(&self) -> RealInterval {
        self.re.sqr() + self.im.sqr()
    }

    /// Enclosure of `|z|` over the rectangle.
    pub fn abs(&self) -> RealInterval {
        self.norm_sqr().sqrt()
    }

    /// Upper bound on `|z|`.
    pub fn mag(&self) -> f64 {
        self.abs().hi()
    }

    /// Lower bound on `|z|`.
    pub fn mig(&self) -> f64 {
        self.abs().lo()
    }

    pub fn sqr(&self) -> ComplexInterval {
        let re = self.re.sqr() - self.im.sqr();
        let im = (self.re * self.im).scale(2.0);
        Self { re, im }
    }

    pub fn powu(&self, e: u32) -> ComplexInterval {
        match e {
            0 => ComplexInterval::ONE,
            1 => *self,
            2 => self.sqr(),
            _ => {
                let mut acc = *self;
                for _ in 1..e {
                    acc = acc * *self;
                }
                acc
            }
        }
    }

    pub fn scale(&self, c: RealInterval) -> ComplexInterval {
        Self {
            re: self.re * c,
            im: self.im * c,
        }
    }

    pub fn checked_div(&self, rhs: &ComplexInterval) -> Result<ComplexInterval, IntervalError> {
        let den = rhs.norm_sqr();
        if den.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let num = *self * rhs.conj();
        Ok(Self {
            re: num.re.checked_div(&den)?,
            im: num.im.checked_div(&den)?,
        })
    }
}

impl fmt::Display for ComplexInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + i{}", self.re, self.im)
    }
}

impl Add for ComplexInterval {
    type Output = ComplexInterval;
    #[inline]
    fn add(self, rhs: ComplexInterval) -> ComplexInterval {
        Self {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for ComplexInterval {
    type Output = ComplexInterval;
    #[inline]
    fn sub(self, rhs: ComplexInterval) -> ComplexInterval {
        Self {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl Neg for ComplexInterval {
    type Output = ComplexInterval;
    fn neg(self) -> ComplexInterval {
        Self {
            re: -self.re,
            im: -self.im,
        }
    }
}

impl Mul for ComplexInterval {
    type Output = ComplexInterval;
    #[inline]
    fn mul(self, rhs: ComplexInterval) -> ComplexInterval {
        if self.im == RealInterval::ZERO && rhs.im == RealInterval::ZERO {
            return Self::real(self.re * rhs.re);
        }
        Self {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

/// A box `I ⊂ ℂⁿ`, one complex interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub coords: Vec<ComplexInterval>,
}

impl IntervalBox {
    pub fn new(coords: Vec<ComplexInterval>) -> Self {
        Self { coords }
    }

    pub fn point(p: &[Complex64]) -> Self {
        Self {
            coords: p.iter().map(|&z| ComplexInterval::point(z)).collect(),
        }
    }

    /// Box with half-width `r[j]` around `p[j]` in both real and imaginary parts.
    pub fn around(p: &[Complex64], r: &[f64]) -> Self {
        Self {
            coords: p
                .iter()
                .zip(r)
                .map(|(&z, &r)| ComplexInterval::centered(z, r))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn mid(&self) -> Vec<Complex64> {
        self.coords.iter().map(ComplexInterval::mid).collect()
    }

    /// Every endpoint finite.
    pub fn is_certifiable_sized(&self) -> bool {
        self.coords.iter().all(ComplexInterval::is_finite)
    }

    pub fn contains_point(&self, p: &[Complex64]) -> bool {
        p.len() == self.dim() && self.coords.iter().zip(p).all(|(c, &z)| c.contains(z))
    }

    fn check_dim(&self, other: &IntervalBox) -> Result<(), IntervalError> {
        if self.dim() != other.dim() {
            return Err(IntervalError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Componentwise intersection; `None` when any component is empty.
    pub fn intersect(&self, other: &IntervalBox) -> Result<Option<IntervalBox>, IntervalError> {
        self.check_dim(other)?;
        let mut coords = Vec::with_capacity(self.dim());
        for (a, b) in self.coords.iter().zip(&other.coords) {
            match a.intersect(b) {
                Some(c) => coords.push(c),
                None => return Ok(None),
            }
        }
        Ok(Some(IntervalBox { coords }))
    }

    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check_dim(other)?;
        Ok(IntervalBox {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.hull(b))
                .collect(),
        })
    }

    pub fn disjoint(&self, other: &IntervalBox) -> Result<bool, IntervalError> {
        Ok(self.intersect(other)?.is_none())
    }

    pub fn subset_of(&self, other: &IntervalBox) -> Result<bool, IntervalError> {
        self.check_dim(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .all(|(a, b)| a.subset_of(b)))
    }

    /// Every endpoint of `self` strictly inside the matching endpoint of `other`.
    pub fn contained_in_interior(&self, other: &IntervalBox) -> Result<bool, IntervalError> {
        self.check_dim(other)?;
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .all(|(a, b)| a.interior_of(b)))
    }

    pub fn conj(&self) -> IntervalBox {
        IntervalBox {
            coords: self.coords.iter().map(ComplexInterval::conj).collect(),
        }
    }

    /// Upper bound of the largest coordinate width (real or imaginary).
    pub fn max_width(&self) -> f64 {
        self.coords
            .iter()
            .map(|c| c.re.width().max(c.im.width()))
            .fold(0.0, f64::max)
    }
}

/// Row-major square matrix of complex intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    n: usize,
    data: Vec<ComplexInterval>,
}

impl IntervalMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ComplexInterval::ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ComplexInterval::ONE;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<ComplexInterval>) -> Result<Self, IntervalError> {
        if data.len() != n * n {
            return Err(IntervalError::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    /// Point matrix from a row-major float matrix.
    pub fn from_points(n: usize, data: &[Complex64]) -> Result<Self, IntervalError> {
        Self::from_rows(n, data.iter().map(|&z| ComplexInterval::point(z)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> ComplexInterval {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: ComplexInterval) {
        self.data[i * self.n + j] = v;
    }

    pub fn mid(&self) -> Vec<Complex64> {
        self.data.iter().map(ComplexInterval::mid).collect()
    }

    pub fn mul_mat(&self, rhs: &IntervalMatrix) -> Result<IntervalMatrix, IntervalError> {
        if self.n != rhs.n {
            return Err(IntervalError::DimensionMismatch {
                expected: self.n,
                got: rhs.n,
            });
        }
        let n = self.n;
        let mut out = IntervalMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ComplexInterval::ZERO;
                for l in 0..n {
                    acc = acc + self.get(i, l) * rhs.get(l, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[ComplexInterval]) -> Result<Vec<ComplexInterval>, IntervalError> {
        if v.len() != self.n {
            return Err(IntervalError::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| {
                v.iter()
                    .enumerate()
                    .fold(ComplexInterval::ZERO, |acc, (j, x)| acc + self.get(i, j) * *x)
            })
            .collect())
    }

    /// `Id - self`.
    pub fn identity_minus(&self) -> IntervalMatrix {
        let n = self.n;
        let mut out = IntervalMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let id = if i == j {
                    ComplexInterval::ONE
                } else {
                    ComplexInterval::ZERO
                };
                out.set(i, j, id - self.get(i, j));
            }
        }
        out
    }

    /// Upper bound on the max-row-sum norm over every matrix in the enclosure.
    pub fn norm_inf_upper(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(0.0, |acc, j| add_enclose(acc, self.get(i, j).mag()).1)
            })
            .fold(0.0, f64::max)
    }
}

/// Upper bound on `max_i |v_i|`.
pub fn norm_inf_upper(v: &[ComplexInterval]) -> f64 {
    v.iter().map(ComplexInterval::mag).fold(0.0, f64::max)
}

/// Lower bound on `max_i |v_i|`.
pub fn norm_inf_lower(v: &[ComplexInterval]) -> f64 {
    v.iter().map(ComplexInterval::mig).fold(0.0, f64::max)
}

fn box_powers(f: &PolynomialSystem, b: &IntervalBox) -> Vec<Vec<ComplexInterval>> {
    let deg = f.max_degree() as usize;
    b.coords
        .iter()
        .map(|&z| {
            let mut v = Vec::with_capacity(deg + 1);
            v.push(ComplexInterval::ONE);
            if deg >= 1 {
                v.push(z);
            }
            for e in 2..=deg {
                let next = if e % 2 == 0 { v[e / 2].sqr() } else { v[e - 1] * z };
                v.push(next);
            }
            v
        })
        .collect()
}

/// Enclosure of `F(I)`: for every `p ∈ I`, `F(p)` lies in the result.
pub fn eval_system_on_box(
    f: &PolynomialSystem,
    b: &IntervalBox,
) -> Result<Vec<ComplexInterval>, IntervalError> {
    check_system_dim(f, b)?;
    let pows = box_powers(f, b);
    Ok(f.compiled().iter().map(|c| c.eval_interval(&pows)).collect())
}

/// Entrywise enclosure of `Jac_F(I)`.
pub fn jacobian_on_box(
    f: &PolynomialSystem,
    b: &IntervalBox,
) -> Result<IntervalMatrix, IntervalError> {
    check_system_dim(f, b)?;
    let pows = box_powers(f, b);
    let data = f
        .jac_compiled()
        .iter()
        .map(|c| c.eval_interval(&pows))
        .collect();
    IntervalMatrix::from_rows(f.n_vars(), data)
}

fn check_system_dim(f: &PolynomialSystem, b: &IntervalBox) -> Result<(), IntervalError> {
    if f.n_vars() != b.dim() {
        return Err(IntervalError::DimensionMismatch {
            expected: f.n_vars(),
            got: b.dim(),
        });
    }
    Ok(())
}
