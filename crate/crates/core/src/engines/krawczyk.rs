use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{float_inverse, newton_step, Certificate, Engine, EngineError, Realness};
use crate::interval::{
    eval_system_on_box, jacobian_on_box, ComplexInterval, IntervalBox, IntervalMatrix,
    RealInterval,
};
use crate::poly::PolynomialSystem;

/// Box radii tried around a candidate.
///
/// The first attempt uses `s ± max(min_radius, 8 ulps)` per real component.
/// If it fails, `s` receives one floating-point Newton step and the box is
/// re-tried with the radius multiplied by `growth` up to `attempts` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationSchedule {
    pub min_radius: f64,
    pub growth: f64,
    pub attempts: u32,
}

impl Default for InflationSchedule {
    fn default() -> Self {
        Self {
            min_radius: 1e-7,
            growth: 8.0,
            attempts: 5,
        }
    }
}

fn ulp(x: f64) -> f64 {
    let a = x.abs();
    a.next_up() - a
}

fn component_radius(x: f64, min_radius: f64) -> f64 {
    min_radius.max(8.0 * ulp(x))
}

fn preconditioner(y: &DMatrix<Complex64>) -> Result<IntervalMatrix, EngineError> {
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EngineError::NonFiniteMatrix);
    }
    let n = y.nrows();
    if y.ncols() != n {
        return Err(EngineError::NonFiniteMatrix);
    }
    let rows: Vec<Complex64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| y[(i, j)])
        .collect();
    Ok(IntervalMatrix::from_points(n, &rows)?)
}

struct KrawczykEval {
    image: IntervalBox,
    // upper bound of ‖Id − Y·Jac_F(I)‖∞
    contraction: f64,
}

fn evaluate(
    f: &PolynomialSystem,
    b: &IntervalBox,
    x: &[Complex64],
    y: &DMatrix<Complex64>,
) -> Result<KrawczykEval, EngineError> {
    f.check_dim(b.dim())?;
    f.check_dim(x.len())?;
    if y.nrows() != f.n_vars() {
        return Err(EngineError::Interval(crate::interval::IntervalError::DimensionMismatch {
            expected: f.n_vars(),
            got: y.nrows(),
        }));
    }
    if !b.contains_point(x) {
        return Err(EngineError::PointOutsideBox);
    }
    let yi = preconditioner(y)?;
    let xb = IntervalBox::point(x);
    let fx = eval_system_on_box(f, &xb)?;
    let yfx = yi.mul_vec(&fx)?;
    let jac = jacobian_on_box(f, b)?;
    let m = yi.mul_mat(&jac)?.identity_minus();
    let diff: Vec<ComplexInterval> = b
        .coords
        .iter()
        .zip(&xb.coords)
        .map(|(i, p)| *i - *p)
        .collect();
    let md = m.mul_vec(&diff)?;
    let image = xb
        .coords
        .iter()
        .zip(yfx.iter().zip(&md))
        .map(|(p, (a, c))| *p - *a + *c)
        .collect();
    Ok(KrawczykEval {
        image: IntervalBox::new(image),
        contraction: m.norm_inf_upper(),
    })
}

/// `K(x, I) = x − Y·F(x) + (Id − Y·Jac_F(I))·(I − x)` in interval arithmetic.
///
/// Every root of `F` inside `I` lies inside the returned box.
pub fn krawczyk_operator(
    f: &PolynomialSystem,
    b: &IntervalBox,
    x: &[Complex64],
    y: &DMatrix<Complex64>,
) -> Result<IntervalBox, EngineError> {
    Ok(evaluate(f, b, x, y)?.image)
}

fn build_box(s: &[Complex64], center: &[Complex64], scale: f64, min_radius: f64) -> IntervalBox {
    IntervalBox::new(
        s.iter()
            .zip(center)
            .map(|(a, c)| {
                let re = RealInterval::point(a.re).hull(&RealInterval::point(c.re));
                let im = RealInterval::point(a.im).hull(&RealInterval::point(c.im));
                let rr = scale * component_radius(c.re, min_radius);
                let ri = scale * component_radius(c.im, min_radius);
                ComplexInterval::new(
                    RealInterval::centered(re.lo(), rr).hull(&RealInterval::centered(re.hi(), rr)),
                    RealInterval::centered(im.lo(), ri).hull(&RealInterval::centered(im.hi(), ri)),
                )
            })
            .collect(),
    )
}

// Success test on a single box; returns the realness verdict on success.
fn try_box(
    f: &PolynomialSystem,
    b: &IntervalBox,
    center: &[Complex64],
) -> Result<Option<Realness>, EngineError> {
    let Some(y) = f.jacobian_at(center).ok().and_then(float_inverse) else {
        return Ok(None);
    };
    let ev = evaluate(f, b, center, &y)?;
    if ev.contraction < 1.0 && ev.image.contained_in_interior(b)? {
        let real = if ev.image.subset_of(&b.conj())? {
            Realness::Yes
        } else {
            Realness::Undetermined
        };
        return Ok(Some(real));
    }
    Ok(None)
}

/// Tries to prove that a box around `s` contains exactly one root of `F`.
///
/// Success requires `K(I)` strictly inside `I` together with a verified
/// contraction bound `‖Id − Y·Jac_F(I)‖∞ < 1`. Failure is reported through
/// `success = false`, not as an error.
pub fn krawczyk_certify(f: &PolynomialSystem, s: &[Complex64]) -> Result<Certificate, EngineError> {
    krawczyk_certify_with(f, s, InflationSchedule::default())
}

pub fn krawczyk_certify_with(
    f: &PolynomialSystem,
    s: &[Complex64],
    schedule: InflationSchedule,
) -> Result<Certificate, EngineError> {
    f.check_dim(s.len())?;
    let mut attempts: Vec<(Vec<Complex64>, f64)> = vec![(s.to_vec(), 1.0)];
    if let Some(refined) = newton_step(f, s) {
        let mut scale = 1.0;
        for _ in 0..schedule.attempts {
            attempts.push((refined.clone(), scale));
            scale *= schedule.growth;
        }
    }
    for (center, scale) in attempts {
        let b = build_box(s, &center, scale, schedule.min_radius);
        if !b.is_certifiable_sized() {
            continue;
        }
        if let Some(real) = try_box(f, &b, &center)? {
            let re1_range = b.coords[0].re;
            return Ok(Certificate {
                engine: Engine::Krawczyk,
                candidate_index: 0,
                success: true,
                region: b,
                beta_bound: None,
                alpha_value: None,
                real_certified: real,
                re1_range,
            });
        }
    }
    Ok(Certificate::failed(Engine::Krawczyk, s))
}

/// Two successful Krawczyk certificates prove distinct roots when their boxes
/// are disjoint.
pub fn krawczyk_distinct(c1: &Certificate, c2: &Certificate) -> Result<bool, EngineError> {
    if !c1.success || !c2.success {
        return Err(EngineError::FailedCertificate);
    }
    if c1.engine != Engine::Krawczyk || c2.engine != Engine::Krawczyk {
        return Err(EngineError::EngineMismatch);
    }
    Ok(c1.region.disjoint(&c2.region)?)
}

/// `Yes` iff `K(I) ⊆ conj(I)`: the unique root in `I` then equals its own
/// conjugate. The converse is not certified, hence `Undetermined` otherwise.
pub fn krawczyk_real(f: &PolynomialSystem, c: &Certificate) -> Result<Realness, EngineError> {
    if !c.success {
        return Err(EngineError::FailedCertificate);
    }
    let center = c.region.mid();
    let y = f
        .jacobian_at(&center)?
        .clone_owned();
    let Some(y) = float_inverse(y) else {
        return Ok(Realness::Undetermined);
    };
    let k = krawczyk_operator(f, &c.region, &center, &y)?;
    Ok(if k.subset_of(&c.region.conj())? {
        Realness::Yes
    } else {
        Realness::Undetermined
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_system;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rbox(lo: f64, hi: f64) -> IntervalBox {
        IntervalBox::new(vec![ComplexInterval::real(RealInterval::new(lo, hi).unwrap())])
    }

    #[test]
    fn operator_on_simple_quadratic() {
        let f = parse_system("x1^2 - 1").unwrap();
        let y = DMatrix::from_element(1, 1, c(0.5, 0.0));
        let k = krawczyk_operator(&f, &rbox(0.9, 1.1), &[c(1.0, 0.0)], &y).unwrap();
        let re = k.coords[0].re;
        // hand computation: 1 + (1 − 0.5·[1.8, 2.2])·[−0.1, 0.1] = [0.99, 1.01]
        assert!(re.lo() <= 0.99 && re.hi() >= 1.01);
        let delta = 4.0 * f64::EPSILON;
        assert!(re.lo() >= 0.99 - delta && re.hi() <= 1.01 + delta);
        assert_eq!(k.coords[0].im, RealInterval::ZERO);
    }

    #[test]
    fn operator_fixed_point_on_point_box() {
        let f = parse_system("x1^2 - 1").unwrap();
        let y = DMatrix::from_element(1, 1, c(0.5, 0.0));
        let k = krawczyk_operator(&f, &rbox(1.0, 1.0), &[c(1.0, 0.0)], &y).unwrap();
        assert!(k.coords[0].re.contains(1.0));
        assert!(k.coords[0].re.width() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn operator_cannot_contract_at_double_root() {
        let f = parse_system("x1^2 - 2*x1 + 1").unwrap();
        let b = rbox(0.9, 1.1);
        for y in [0.5, 1.0, -3.0, 100.0] {
            let y = DMatrix::from_element(1, 1, c(y, 0.0));
            let k = krawczyk_operator(&f, &b, &[c(1.0, 0.0)], &y).unwrap();
            assert!(!k.contained_in_interior(&b).unwrap());
        }
    }

    #[test]
    fn operator_errors() {
        let f = parse_system("x1^2 - 1").unwrap();
        let y = DMatrix::from_element(1, 1, c(f64::NAN, 0.0));
        assert_eq!(
            krawczyk_operator(&f, &rbox(0.9, 1.1), &[c(1.0, 0.0)], &y),
            Err(EngineError::NonFiniteMatrix)
        );
        let y = DMatrix::from_element(1, 1, c(0.5, 0.0));
        assert_eq!(
            krawczyk_operator(&f, &rbox(0.9, 1.1), &[c(2.0, 0.0)], &y),
            Err(EngineError::PointOutsideBox)
        );
    }

    #[test]
    fn certifies_simple_root_tightly() {
        let f = parse_system("x1^2 - 1").unwrap();
        let cert = krawczyk_certify(&f, &[c(1.0, 0.0)]).unwrap();
        assert!(cert.success);
        let re = cert.region.coords[0].re;
        assert!(re.lo() >= 1.0 - 1e-3 && re.hi() <= 1.0 + 1e-3);
        assert_eq!(cert.re1_range, re);
        assert_eq!(cert.real_certified, Realness::Yes);
    }

    #[test]
    fn singular_root_fails() {
        let f = parse_system("x1^2 - 2*x1 + 1").unwrap();
        let cert = krawczyk_certify(&f, &[c(1.0, 0.0)]).unwrap();
        assert!(!cert.success);
        assert_eq!(cert.real_certified, Realness::Undetermined);
    }

    #[test]
    fn certifies_perturbed_two_dimensional_root() {
        let f = parse_system("x1^2 - 1\nx2^2 - 4").unwrap();
        let cert = krawczyk_certify(&f, &[c(1.0000001, 0.0), c(-2.0000001, 0.0)]).unwrap();
        assert!(cert.success);
        // exact containment of the true root (1, −2)
        let q = |x: f64| BigRational::from_float(x).unwrap();
        let one = BigRational::from_integer(BigInt::from(1));
        let m2 = BigRational::from_integer(BigInt::from(-2));
        let [a, b] = [&cert.region.coords[0].re, &cert.region.coords[1].re];
        assert!(q(a.lo()) <= one && one <= q(a.hi()));
        assert!(q(b.lo()) <= m2 && m2 <= q(b.hi()));
    }

    #[test]
    fn distinctness() {
        let f = parse_system("x1^2 - 1").unwrap();
        let a = krawczyk_certify(&f, &[c(1.0, 0.0)]).unwrap();
        let b = krawczyk_certify(&f, &[c(-1.0, 0.0)]).unwrap();
        assert!(krawczyk_distinct(&a, &b).unwrap());
        assert!(!krawczyk_distinct(&a, &a).unwrap());

        let mut p = a.clone();
        p.region = rbox(0.99, 1.01);
        let mut q = a.clone();
        q.region = rbox(-1.01, -0.99);
        assert!(krawczyk_distinct(&p, &q).unwrap());
        q.region = rbox(1.005, 1.02);
        assert!(!krawczyk_distinct(&p, &q).unwrap());

        let failed = krawczyk_certify(&parse_system("x1^2").unwrap(), &[c(0.0, 0.0)]).unwrap();
        assert_eq!(krawczyk_distinct(&a, &failed), Err(EngineError::FailedCertificate));
    }

    #[test]
    fn realness() {
        let f = parse_system("x1^2 - 1").unwrap();
        let mut cert = krawczyk_certify(&f, &[c(1.0, 0.0)]).unwrap();
        cert.region = IntervalBox::new(vec![ComplexInterval::new(
            RealInterval::new(0.999, 1.001).unwrap(),
            RealInterval::new(-1e-3, 1e-3).unwrap(),
        )]);
        assert_eq!(krawczyk_real(&f, &cert).unwrap(), Realness::Yes);

        let g = parse_system("x1^2 + 1").unwrap();
        let ci = krawczyk_certify(&g, &[c(0.0, 1.0)]).unwrap();
        assert!(ci.success);
        assert_eq!(ci.real_certified, Realness::Undetermined);
        assert_eq!(krawczyk_real(&g, &ci).unwrap(), Realness::Undetermined);

        let mut point = cert.clone();
        point.region = IntervalBox::point(&[c(1.0, 0.0)]);
        assert_eq!(krawczyk_real(&f, &point).unwrap(), Realness::Yes);

        let failed = Certificate::failed(Engine::Krawczyk, &[c(1.0, 0.0)]);
        assert_eq!(krawczyk_real(&f, &failed), Err(EngineError::FailedCertificate));
    }
}
