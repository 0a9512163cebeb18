//! Deterministic candidate families for the generator backend.
//!
//! A family maps an index in `0..d` to a point in O(1) work, which keeps
//! skips honest. Spec strings select a family:
//!
//! * `grid:d=4,n=1` gives Re(x_j) = i and Im = 0 for candidate i.
//! * `uniform:d=100,n=3,seed=1` gives coordinates uniform in [−1,1)+[−1,1)i.
//! * `points:1.8;-1.2+1.4i;0.5` is an explicit list. Candidates are
//!   separated by `;` and coordinates by whitespace.
//! * `product:a=1..10,seed=7` gives Newton-refined roots of a product system.
//!   `a` lists one entry per variable, separated by `;`, and each entry may
//!   hold several factors joined with `|`. A range `p..q` expands to one
//!   variable per integer. `noise=` sets the seed perturbation size.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::poly::{rational_to_f64, Polynomial, PolynomialSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("unknown generator family `{0}`")]
    UnknownFamily(String),
    #[error("generator spec: {0}")]
    Spec(String),
}

/// Exact value `re + im·i`.
pub type GaussianRational = (BigRational, BigRational);

pub trait Family: Send + Sync {
    fn len(&self) -> u64;
    fn dim(&self) -> usize;
    /// Writes candidate `index` into `out`.
    fn point(&self, index: u64, out: &mut [Complex64]);
    fn describe(&self) -> String;
    /// The system whose roots the candidates approximate, if any.
    fn system(&self) -> Option<PolynomialSystem> {
        None
    }
    /// Closed-form root attached to candidate `index`, when it is rational.
    fn exact_root(&self, _index: u64) -> Option<Vec<GaussianRational>> {
        None
    }
    /// Whether the root attached to candidate `index` is real.
    fn root_is_real(&self, _index: u64) -> Option<bool> {
        None
    }
}

fn noise_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct GridFamily {
    pub d: u64,
    pub n: usize,
}

impl Family for GridFamily {
    fn len(&self) -> u64 {
        self.d
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn point(&self, index: u64, out: &mut [Complex64]) {
        out.fill(Complex64::new(index as f64, 0.0));
    }

    fn describe(&self) -> String {
        format!("grid:d={},n={}", self.d, self.n)
    }
}

#[derive(Debug, Clone)]
pub struct UniformFamily {
    pub d: u64,
    pub n: usize,
    pub seed: u64,
}

impl Family for UniformFamily {
    fn len(&self) -> u64 {
        self.d
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn point(&self, index: u64, out: &mut [Complex64]) {
        let mut rng = noise_rng(self.seed, index);
        for z in out {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }

    fn describe(&self) -> String {
        format!("uniform:d={},n={},seed={}", self.d, self.n, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct PointsFamily {
    pub n: usize,
    pub points: Vec<Vec<Complex64>>,
}

impl Family for PointsFamily {
    fn len(&self) -> u64 {
        self.points.len() as u64
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn point(&self, index: u64, out: &mut [Complex64]) {
        out.copy_from_slice(&self.points[index as usize]);
    }

    fn describe(&self) -> String {
        format!("points:{}", self.points.len())
    }
}

/// Root of `x² − a`, `±√a` or `±i√|a|`.
#[derive(Debug, Clone)]
struct FactorRoot {
    a: BigRational,
    approx: f64,
    exact: Option<BigRational>,
}

impl FactorRoot {
    fn new(a: BigRational) -> Self {
        let mag = a.abs();
        let approx = rational_to_f64(&mag).sqrt();
        Self {
            exact: rational_sqrt(&mag),
            approx,
            a,
        }
    }

    fn imaginary(&self) -> bool {
        self.a.is_negative()
    }

    fn value(&self, negative: bool) -> Complex64 {
        let v = if negative { -self.approx } else { self.approx };
        if self.imaginary() {
            Complex64::new(0.0, v)
        } else {
            Complex64::new(v, 0.0)
        }
    }

    fn exact_value(&self, negative: bool) -> Option<GaussianRational> {
        let r = self.exact.clone()?;
        let v = if negative { -r } else { r };
        Some(if self.imaginary() {
            (BigRational::zero(), v)
        } else {
            (v, BigRational::zero())
        })
    }
}

/// Exact square root of a non-negative rational, when it exists.
pub fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    (&rn * &rn == *n && &rd * &rd == *d).then(|| BigRational::new(rn, rd))
}

/// Roots of `f₁ = Π_t((x₁ − Σ_{j≥2} w_j x_j)² − a_{1t})`,
/// `f_j = Π_t(x_j² − a_{jt})`.
///
/// Candidate indices decode in mixed radix, one digit per variable, each
/// digit picking a factor and a sign. The exact root is perturbed by seeded
/// noise and then refined with six Newton steps.
#[derive(Clone)]
pub struct ProductFamily {
    factors: Vec<Vec<FactorRoot>>,
    weights: Vec<BigRational>,
    weights_f: Vec<f64>,
    radix: Vec<u64>,
    d: u64,
    pub seed: u64,
    pub noise: f64,
}

impl fmt::Debug for ProductFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

pub const NEWTON_STEPS: usize = 6;

impl ProductFamily {
    pub fn new(a: Vec<Vec<BigRational>>, seed: u64, noise: f64) -> Result<Self, FamilyError> {
        if a.is_empty() || a.iter().any(Vec::is_empty) {
            return Err(FamilyError::Spec("every variable needs at least one factor".into()));
        }
        if a.iter().flatten().any(Zero::is_zero) {
            return Err(FamilyError::Spec("a factor x² − 0 has a double root".into()));
        }
        for v in &a {
            for (i, x) in v.iter().enumerate() {
                if v[..i].contains(x) {
                    return Err(FamilyError::Spec(format!("repeated factor {x}")));
                }
            }
        }
        let mut d: u64 = 1;
        for v in &a {
            d = d
                .checked_mul(2 * v.len() as u64)
                .ok_or_else(|| FamilyError::Spec("too many candidates".into()))?;
        }
        let scale = |v: &[BigRational]| rational_sqrt(&v[0].abs()).unwrap_or_else(BigRational::one);
        let c1 = scale(&a[0]);
        let mut weights = vec![BigRational::one()];
        for (j, v) in a.iter().enumerate().skip(1) {
            let pow = BigRational::new(BigInt::one(), BigInt::one() << j);
            weights.push(pow * &c1 / scale(v));
        }
        let weights_f = weights.iter().map(rational_to_f64).collect();
        let radix = a.iter().map(|v| 2 * v.len() as u64).collect();
        Ok(Self {
            factors: a
                .into_iter()
                .map(|v| v.into_iter().map(FactorRoot::new).collect())
                .collect(),
            weights,
            weights_f,
            radix,
            d,
            seed,
            noise,
        })
    }

    /// `a_j = lo..=hi`, one single-factor variable per integer.
    pub fn range(lo: i64, hi: i64, seed: u64) -> Result<Self, FamilyError> {
        let a = (lo..=hi)
            .map(|x| vec![BigRational::from_integer(BigInt::from(x))])
            .collect();
        Self::new(a, seed, DEFAULT_NOISE)
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    // (factor, negative) per variable
    fn digits(&self, mut index: u64) -> Vec<(usize, bool)> {
        self.radix
            .iter()
            .map(|&r| {
                let dgt = index % r;
                index /= r;
                ((dgt / 2) as usize, dgt % 2 == 1)
            })
            .collect()
    }

    /// Unperturbed floating root for candidate `index`.
    pub fn approx_root(&self, index: u64) -> Vec<Complex64> {
        let digits = self.digits(index);
        let mut out: Vec<Complex64> = digits
            .iter()
            .zip(&self.factors)
            .map(|(&(t, neg), f)| f[t].value(neg))
            .collect();
        let shift: Complex64 = (1..out.len()).map(|j| out[j] * self.weights_f[j]).sum();
        out[0] += shift;
        out
    }

    fn newton(&self, x: &mut [Complex64]) {
        let step = |z: Complex64, f: &[FactorRoot]| {
            // g = Π (z² − a_t), g' = Σ 2z Π_{s≠t} (z² − a_s)
            let h: Vec<Complex64> = f.iter().map(|r| z * z - rational_to_f64(&r.a)).collect();
            let g: Complex64 = h.iter().product();
            let dg: Complex64 = (0..h.len())
                .map(|t| {
                    2.0 * z
                        * h.iter()
                            .enumerate()
                            .filter(|&(s, _)| s != t)
                            .map(|(_, v)| *v)
                            .product::<Complex64>()
                })
                .sum();
            if g == Complex64::new(0.0, 0.0) || dg == Complex64::new(0.0, 0.0) {
                Complex64::new(0.0, 0.0)
            } else {
                g / dg
            }
        };
        for _ in 0..NEWTON_STEPS {
            let u = x[0]
                - (1..x.len())
                    .map(|j| x[j] * self.weights_f[j])
                    .sum::<Complex64>();
            let mut d1 = step(u, &self.factors[0]);
            for j in 1..x.len() {
                let dj = step(x[j], &self.factors[j]);
                d1 += dj * self.weights_f[j];
                x[j] -= dj;
            }
            x[0] -= d1;
        }
    }
}

pub const DEFAULT_NOISE: f64 = 1e-7;

impl Family for ProductFamily {
    fn len(&self) -> u64 {
        self.d
    }

    fn dim(&self) -> usize {
        self.factors.len()
    }

    fn point(&self, index: u64, out: &mut [Complex64]) {
        let root = self.approx_root(index);
        let mut rng = noise_rng(self.seed, index);
        for (o, r) in out.iter_mut().zip(root) {
            let e = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *o = r + e * self.noise * (1.0 + r.norm());
        }
        self.newton(out);
    }

    fn describe(&self) -> String {
        let a: Vec<String> = self
            .factors
            .iter()
            .map(|v| v.iter().map(|r| r.a.to_string()).collect::<Vec<_>>().join("|"))
            .collect();
        format!("product:a={},seed={},noise={}", a.join(";"), self.seed, self.noise)
    }

    fn system(&self) -> Option<PolynomialSystem> {
        let n = self.factors.len();
        let mut u = Polynomial::var(n, 0);
        for j in 1..n {
            u = u.sub(&Polynomial::var(n, j).scale(&self.weights[j]));
        }
        let mut polys = Vec::with_capacity(n);
        for (j, f) in self.factors.iter().enumerate() {
            let base = if j == 0 { u.clone() } else { Polynomial::var(n, j) };
            let sq = base.mul(&base);
            let mut p = Polynomial::constant(n, BigRational::one());
            for r in f {
                p = p.mul(&sq.sub(&Polynomial::constant(n, r.a.clone())));
            }
            polys.push(p);
        }
        PolynomialSystem::new(n, polys).ok()
    }

    fn exact_root(&self, index: u64) -> Option<Vec<GaussianRational>> {
        let digits = self.digits(index);
        let mut out = Vec::with_capacity(digits.len());
        for (&(t, neg), f) in digits.iter().zip(&self.factors) {
            out.push(f[t].exact_value(neg)?);
        }
        let (mut re, mut im) = out[0].clone();
        for j in 1..out.len() {
            re += &out[j].0 * &self.weights[j];
            im += &out[j].1 * &self.weights[j];
        }
        out[0] = (re, im);
        Some(out)
    }

    fn root_is_real(&self, index: u64) -> Option<bool> {
        let digits = self.digits(index);
        Some(
            digits
                .iter()
                .zip(&self.factors)
                .all(|(&(t, _), f)| !f[t].imaginary()),
        )
    }
}

impl ProductFamily {
    /// Number of roots with every coordinate real.
    pub fn real_root_count(&self) -> u64 {
        self.factors
            .iter()
            .map(|v| 2 * v.iter().filter(|r| !r.imaginary()).count() as u64)
            .product()
    }
}

fn parse_rational(s: &str) -> Result<BigRational, FamilyError> {
    let bad = || FamilyError::Spec(format!("bad number `{s}`"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let q = BigRational::new(num, den);
    Ok(if neg { -q } else { q })
}

/// Parses `1.5`, `-2i`, `-1.2+1.4i`, `3.2-1.1i`.
pub fn parse_complex(s: &str) -> Result<Complex64, FamilyError> {
    let bad = || FamilyError::Spec(format!("bad complex number `{s}`"));
    let t = s.trim();
    let num = |x: &str| -> Result<f64, FamilyError> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse::<f64>().map_err(|_| bad()),
        }
    };
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    // split at the last sign that is not at the start or after an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(Complex64::new(
            body[..k].parse().map_err(|_| bad())?,
            num(&body[k..])?,
        )),
        None => Ok(Complex64::new(0.0, num(body)?)),
    }
}

fn kv(body: &str) -> Result<Vec<(&str, &str)>, FamilyError> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| FamilyError::Spec(format!("expected key=value, got `{p}`")))
        })
        .collect()
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, FamilyError> {
    v.parse()
        .map_err(|_| FamilyError::Spec(format!("`{key}` needs an integer, got `{v}`")))
}

fn parse_factor_list(v: &str) -> Result<Vec<Vec<BigRational>>, FamilyError> {
    if let Some((lo, hi)) = v.split_once("..") {
        let lo: i64 = int("a", lo)?;
        let hi: i64 = int("a", hi)?;
        if lo > hi {
            return Err(FamilyError::Spec(format!("empty range {lo}..{hi}")));
        }
        return Ok((lo..=hi)
            .map(|x| vec![BigRational::from_integer(BigInt::from(x))])
            .collect());
    }
    v.split(';')
        .map(|var| var.split('|').map(parse_rational).collect())
        .collect()
}

/// Builds a family from its spec string.
pub fn parse_generator(spec: &str) -> Result<Arc<dyn Family>, FamilyError> {
    let (name, body) = spec.split_once(':').unwrap_or((spec, ""));
    let missing = |k: &str| FamilyError::Spec(format!("`{name}` needs `{k}=`"));
    match name.trim() {
        "points" => {
            let mut points = Vec::new();
            for cand in body.split(';').filter(|c| !c.trim().is_empty()) {
                let p = cand
                    .split_whitespace()
                    .map(parse_complex)
                    .collect::<Result<Vec<_>, _>>()?;
                points.push(p);
            }
            let n = points.first().map_or(1, Vec::len);
            if points.iter().any(|p| p.len() != n) {
                return Err(FamilyError::Spec("points differ in dimension".into()));
            }
            Ok(Arc::new(PointsFamily { n, points }))
        }
        "grid" | "uniform" => {
            let (mut d, mut n, mut seed) = (None, None, 0u64);
            for (k, v) in kv(body)? {
                match k {
                    "d" => d = Some(int(k, v)?),
                    "n" => n = Some(int(k, v)?),
                    "seed" => seed = int(k, v)?,
                    _ => return Err(FamilyError::Spec(format!("unknown key `{k}`"))),
                }
            }
            let d: u64 = d.ok_or_else(|| missing("d"))?;
            let n: usize = n.ok_or_else(|| missing("n"))?;
            if n == 0 {
                return Err(FamilyError::Spec("n must be positive".into()));
            }
            if name == "grid" {
                Ok(Arc::new(GridFamily { d, n }))
            } else {
                Ok(Arc::new(UniformFamily { d, n, seed }))
            }
        }
        "product" => {
            let (mut a, mut seed, mut noise) = (None, 0u64, DEFAULT_NOISE);
            for (k, v) in kv(body)? {
                match k {
                    "a" => a = Some(parse_factor_list(v)?),
                    "seed" => seed = int(k, v)?,
                    "noise" => {
                        noise = v
                            .parse()
                            .ok()
                            .filter(|x: &f64| x.is_finite() && *x >= 0.0)
                            .ok_or_else(|| FamilyError::Spec(format!("bad noise `{v}`")))?
                    }
                    _ => return Err(FamilyError::Spec(format!("unknown key `{k}`"))),
                }
            }
            Ok(Arc::new(ProductFamily::new(
                a.ok_or_else(|| missing("a"))?,
                seed,
                noise,
            )?))
        }
        other => Err(FamilyError::UnknownFamily(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.8").unwrap(), Complex64::new(1.8, 0.0));
        assert_eq!(parse_complex("-1.2+1.4i").unwrap(), Complex64::new(-1.2, 1.4));
        assert_eq!(parse_complex("3.2-1.1i").unwrap(), Complex64::new(3.2, -1.1));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("2i").unwrap(), Complex64::new(0.0, 2.0));
        assert_eq!(parse_complex("1e-3+2e-3i").unwrap(), Complex64::new(1e-3, 2e-3));
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(parse_generator("spiral:d=1"), Err(FamilyError::UnknownFamily(_))));
        assert!(parse_generator("grid:n=1").is_err());
        assert!(parse_generator("grid:d=1,n=1,q=2").is_err());
        assert!(parse_generator("product:a=3..1").is_err());
        assert!(parse_generator("product:a=1|1").is_err());
        assert!(parse_generator("product:a=0").is_err());
        assert!(parse_generator("points:1 2;3").is_err());
    }

    #[test]
    fn product_roots_are_refined() {
        let fam = parse_generator("product:a=1;4;9,seed=3").unwrap();
        assert_eq!(fam.len(), 8);
        let sys = fam.system().unwrap();
        let mut p = vec![Complex64::new(0.0, 0.0); 3];
        for i in 0..fam.len() {
            fam.point(i, &mut p);
            let r = fam.exact_root(i).unwrap();
            for (z, (re, im)) in p.iter().zip(&r) {
                assert!((z.re - rational_to_f64(re)).abs() < 1e-13);
                assert!((z.im - rational_to_f64(im)).abs() < 1e-13);
            }
            let v = sys.evaluate(&p).unwrap();
            assert!(v.iter().all(|x| x.norm() < 1e-10), "{v:?}");
        }
    }

    #[test]
    fn exact_roots_satisfy_the_system_exactly() {
        let fam = ProductFamily::new(vec![vec![q(4), q(-1)], vec![q(9)]], 0, 1e-6).unwrap();
        let sys = fam.system().unwrap();
        assert_eq!(fam.len(), 8);
        assert_eq!(fam.real_root_count(), 4);
        for i in 0..fam.len() {
            let r = fam.exact_root(i).unwrap();
            // evaluate in Gaussian rationals
            for p in sys.polys() {
                let (mut re, mut im) = (q(0), q(0));
                for (e, c) in p.terms() {
                    let (mut tr, mut ti) = (c.clone(), q(0));
                    for (j, &k) in e.iter().enumerate() {
                        for _ in 0..k {
                            let (a, b) = &r[j];
                            let nr = &tr * a - &ti * b;
                            let ni = &tr * b + &ti * a;
                            tr = nr;
                            ti = ni;
                        }
                    }
                    re += tr;
                    im += ti;
                }
                assert!(re.is_zero() && im.is_zero());
            }
            let real = r.iter().all(|(_, b)| b.is_zero());
            assert_eq!(fam.root_is_real(i), Some(real));
        }
    }

    #[test]
    fn square_weights_put_real_parts_on_a_lattice() {
        let fam = ProductFamily::new(vec![vec![q(4)], vec![q(9)], vec![q(1)]], 0, 0.0).unwrap();
        // w = [1, 2^-1·2/3, 2^-2·2/1]
        assert_eq!(fam.weights()[1], BigRational::new(BigInt::from(1), BigInt::from(3)));
        let mut re: Vec<BigRational> = (0..fam.len()).map(|i| fam.exact_root(i).unwrap()[0].0.clone()).collect();
        re.sort();
        re.dedup();
        assert_eq!(re.len() as u64, fam.len());
    }

    #[test]
    fn irrational_roots_have_no_exact_form() {
        let fam = ProductFamily::range(1, 3, 0).unwrap();
        assert!(fam.exact_root(0).is_none());
        assert_eq!(fam.len(), 8);
    }

    #[test]
    fn rational_sqrt_detects_squares() {
        assert_eq!(rational_sqrt(&BigRational::new(BigInt::from(9), BigInt::from(4))),
            Some(BigRational::new(BigInt::from(3), BigInt::from(2))));
        assert!(rational_sqrt(&q(2)).is_none());
        assert!(rational_sqrt(&q(-4)).is_none());
    }

    #[test]
    fn uniform_is_deterministic_and_index_addressed() {
        let fam = parse_generator("uniform:d=10,n=2,seed=5").unwrap();
        let mut a = vec![Complex64::new(0.0, 0.0); 2];
        let mut b = a.clone();
        fam.point(7, &mut a);
        fam.point(3, &mut b);
        fam.point(7, &mut b);
        assert_eq!(a, b);
        assert!(a.iter().all(|z| z.re.abs() <= 1.0 && z.im.abs() <= 1.0));
    }
}
