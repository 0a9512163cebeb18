use std::sync::OnceLock;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;

use super::{float_inverse, Certificate, Engine, EngineError, Realness};
use crate::interval::{
    add_enclose, div_enclose, eval_system_on_box, mul_enclose, norm_inf_lower, norm_inf_upper,
    ComplexInterval, IntervalBox, IntervalMatrix, RealInterval,
};
use crate::poly::PolynomialSystem;

/// Realness test applies only below this α.
pub const ALPHA_REAL_LIMIT: f64 = 0.03;

/// Enclosures of Smale's constants at a point.
///
/// `beta` and `gamma` enclose the ∞-norm bounds actually used, so `hi` is a
/// sound upper bound of the true β and γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConstants {
    pub alpha: RealInterval,
    pub beta: RealInterval,
    pub gamma: RealInterval,
}

/// Largest double not exceeding `(13 − 3√17)/4`.
pub fn alpha_threshold() -> f64 {
    static A0: OnceLock<f64> = OnceLock::new();
    *A0.get_or_init(|| {
        // x ≤ (13 − 3√17)/4  ⇔  13 − 4x ≥ 0 and (13 − 4x)² ≥ 153
        let ok = |x: f64| {
            let d = BigRational::from_integer(BigInt::from(13))
                - BigRational::from_float(x).unwrap() * BigInt::from(4);
            d >= BigRational::from_integer(BigInt::from(0))
                && &d * &d >= BigRational::from_integer(BigInt::from(153))
        };
        let mut x = (13.0 - 3.0 * 17f64.sqrt()) / 4.0;
        while !ok(x) {
            x = x.next_down();
        }
        while ok(x.next_up()) {
            x = x.next_up();
        }
        x
    })
}

fn sum_up(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |a, b| add_enclose(a, b).1)
}

fn div_up(a: f64, b: f64) -> f64 {
    div_enclose(a, b).1
}

fn div_down(a: f64, b: f64) -> f64 {
    div_enclose(a, b).0
}

// Smallest double g (found by bumping) with g^e ≥ x, e ≥ 1.
fn root_up(x: f64, e: u32) -> f64 {
    if x <= 0.0 || e == 1 {
        return x.max(0.0);
    }
    if !x.is_finite() {
        return f64::INFINITY;
    }
    let pow_lo = |g: f64| {
        let gi = RealInterval::point(g);
        (1..e).fold(gi, |acc, _| acc * gi).lo()
    };
    let mut g = x.powf(1.0 / e as f64);
    while pow_lo(g) < x {
        g = g.next_up();
    }
    g
}

// Largest double g with g^e ≤ x.
fn root_down(x: f64, e: u32) -> f64 {
    if x <= 0.0 || e == 1 {
        return x.max(0.0);
    }
    if !x.is_finite() {
        return f64::MAX;
    }
    let pow_hi = |g: f64| {
        let gi = RealInterval::point(g);
        (1..e).fold(gi, |acc, _| acc * gi).hi()
    };
    let mut g = x.powf(1.0 / e as f64);
    while g > 0.0 && pow_hi(g) > x {
        g = g.next_down();
    }
    g
}

/// Validated enclosures of β, γ and α = βγ at `s`.
///
/// With `Y` the floating inverse of `Jac_F(s)` and `θ ≥ ‖Id − Y·Jac_F(s)‖∞`,
/// `θ < 1` gives `‖Jac_F(s)⁻¹ v‖ ≤ ‖Y v‖/(1 − θ)`; that bound is applied to
/// `F(s)` for β and to every Taylor tensor for γ.
pub fn alpha_constants(
    f: &PolynomialSystem,
    s: &[Complex64],
) -> Result<AlphaConstants, EngineError> {
    f.check_dim(s.len())?;
    let n = f.n_vars();
    let y = float_inverse(f.jacobian_at(s)?).ok_or(EngineError::SingularJacobian)?;
    let ydata: Vec<Complex64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| y[(i, j)])
        .collect();
    let yi = IntervalMatrix::from_points(n, &ydata)?;

    let pb = IntervalBox::point(s);
    let jac = crate::interval::jacobian_on_box(f, &pb)?;
    let theta = yi.mul_mat(&jac)?.identity_minus().norm_inf_upper();
    if !(theta < 1.0) {
        return Err(EngineError::SingularJacobian);
    }
    let one_minus = add_enclose(1.0, -theta).0;
    let one_plus = add_enclose(1.0, theta).1;

    let yf = yi.mul_vec(&eval_system_on_box(f, &pb)?)?;
    let beta = RealInterval::new(
        div_down(norm_inf_lower(&yf), one_plus),
        div_up(norm_inf_upper(&yf), one_minus),
    )?;

    let mut g_lo = 0.0f64;
    let mut g_hi = 0.0f64;
    for k in 2..=f.max_degree() as usize {
        let t = f.taylor_at(s, k)?;
        if t.is_empty() {
            continue;
        }
        // (Y·T_k)_{iβ} = Σ_l Y_il c_lβ over every multi-index present
        let mut keys: Vec<&Vec<u32>> = t.entries.iter().flatten().map(|(e, _)| e).collect();
        keys.sort();
        keys.dedup();
        let mut row_hi = 0.0f64;
        let mut row_lo = 0.0f64;
        for i in 0..n {
            let mut hi = Vec::with_capacity(keys.len());
            let mut lo = Vec::with_capacity(keys.len());
            for e in &keys {
                let mut acc = ComplexInterval::ZERO;
                for l in 0..n {
                    if let Some(c) = t.coefficient(l, e) {
                        acc = acc + yi.get(i, l) * c;
                    }
                }
                hi.push(acc.mag());
                lo.push(acc.mig());
            }
            row_hi = row_hi.max(sum_up(hi));
            row_lo = row_lo.max(lo.into_iter().fold(0.0, |a, b| add_enclose(a, b).0));
        }
        let e = (k - 1) as u32;
        g_hi = g_hi.max(root_up(div_up(row_hi, one_minus), e));
        g_lo = g_lo.max(root_down(div_down(row_lo, one_plus), e));
    }
    let gamma = RealInterval::new(g_lo.min(g_hi), g_hi)?;
    let (_, a_hi) = mul_enclose(beta.hi(), gamma.hi());
    let (a_lo, _) = mul_enclose(beta.lo(), gamma.lo());
    Ok(AlphaConstants {
        alpha: RealInterval::new(a_lo.min(a_hi), a_hi)?,
        beta,
        gamma,
    })
}

/// Certifies `s` as an approximate zero when `ᾱ < α₀`.
///
/// The associated root lies within `2β̄` of `s` in the ∞-norm; `region` is the
/// box of that radius around `s`.
pub fn alpha_certify(f: &PolynomialSystem, s: &[Complex64]) -> Result<Certificate, EngineError> {
    f.check_dim(s.len())?;
    let k = match alpha_constants(f, s) {
        Ok(k) => k,
        Err(EngineError::SingularJacobian) => return Ok(Certificate::failed(Engine::Alpha, s)),
        Err(e) => return Err(e),
    };
    if !(k.alpha.hi() < alpha_threshold()) {
        let mut c = Certificate::failed(Engine::Alpha, s);
        c.beta_bound = Some(k.beta);
        c.alpha_value = Some(k.alpha);
        return Ok(c);
    }
    let r = 2.0 * k.beta.hi();
    let region = IntervalBox::around(s, &vec![r; s.len()]);
    let mut c = Certificate {
        engine: Engine::Alpha,
        candidate_index: 0,
        success: true,
        re1_range: region.coords[0].re,
        region,
        beta_bound: Some(k.beta),
        alpha_value: Some(k.alpha),
        real_certified: Realness::Undetermined,
    };
    c.real_certified = realness_from(s, &k);
    Ok(c)
}

fn realness_from(s: &[Complex64], k: &AlphaConstants) -> Realness {
    if s.iter().all(|z| z.im == 0.0) {
        return Realness::Yes;
    }
    if !(k.alpha.hi() < ALPHA_REAL_LIMIT) {
        return Realness::Undetermined;
    }
    // ‖s − conj(s)‖∞ = 2·max|Im s_j|, exact
    let dist = 2.0 * s.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let limit = if k.gamma.hi() == 0.0 {
        f64::INFINITY
    } else {
        div_down(1.0, mul_enclose(20.0, k.gamma.hi()).1)
    };
    if dist < limit {
        Realness::Yes
    } else {
        Realness::Undetermined
    }
}

/// Distinct roots when `‖s1 − s2‖∞ > 2(β̄₁ + β̄₂)` with the left side bounded
/// below and the right side bounded above.
pub fn alpha_distinct(
    c1: &Certificate,
    c2: &Certificate,
    s1: &[Complex64],
    s2: &[Complex64],
) -> Result<bool, EngineError> {
    if !c1.success || !c2.success {
        return Err(EngineError::FailedCertificate);
    }
    if c1.engine != Engine::Alpha || c2.engine != Engine::Alpha {
        return Err(EngineError::EngineMismatch);
    }
    if s1.len() != s2.len() {
        return Err(EngineError::Interval(
            crate::interval::IntervalError::DimensionMismatch {
                expected: s1.len(),
                got: s2.len(),
            },
        ));
    }
    let (Some(b1), Some(b2)) = (c1.beta_bound, c2.beta_bound) else {
        return Err(EngineError::FailedCertificate);
    };
    let diff: Vec<ComplexInterval> = s1
        .iter()
        .zip(s2)
        .map(|(&a, &b)| ComplexInterval::point(a) - ComplexInterval::point(b))
        .collect();
    let lhs = norm_inf_lower(&diff);
    let rhs = 2.0 * add_enclose(b1.hi(), b2.hi()).1;
    Ok(lhs > rhs)
}

/// `Yes` for an exactly real `s`, or when `ᾱ < 0.03` and
/// `‖s − conj(s)‖ < 1/(20γ̄)`.
pub fn alpha_real(
    f: &PolynomialSystem,
    s: &[Complex64],
    c: &Certificate,
) -> Result<Realness, EngineError> {
    if !c.success {
        return Err(EngineError::FailedCertificate);
    }
    let k = alpha_constants(f, s)?;
    Ok(realness_from(s, &k))
}
