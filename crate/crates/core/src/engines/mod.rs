//! Certification engines: the Krawczyk interval test and α-theory.
//!
//! Both engines answer the same three questions for a candidate `s`: is there
//! a true root attached to it, which region provably contains that root, and
//! are two certified candidates attached to different roots.

mod alpha;
mod krawczyk;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::interval::{IntervalBox, IntervalError, RealInterval};
use crate::poly::{PolyError, PolynomialSystem};

pub use alpha::{
    alpha_certify, alpha_constants, alpha_distinct, alpha_real, alpha_threshold, AlphaConstants,
    ALPHA_REAL_LIMIT,
};
pub use krawczyk::{
    krawczyk_certify, krawczyk_distinct, krawczyk_operator, krawczyk_real, InflationSchedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("preconditioner matrix has non-finite entries")]
    NonFiniteMatrix,
    #[error("expansion point lies outside the box")]
    PointOutsideBox,
    #[error("Jacobian enclosure is singular or could not be verified invertible")]
    SingularJacobian,
    #[error("operation requires a successful certificate")]
    FailedCertificate,
    #[error("certificates come from different engines")]
    EngineMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Krawczyk,
    Alpha,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Krawczyk => "krawczyk",
            Engine::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "krawczyk" => Ok(Engine::Krawczyk),
            "alpha" => Ok(Engine::Alpha),
            other => Err(format!("unknown engine `{other}` (expected krawczyk or alpha)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realness {
    Yes,
    No,
    Undetermined,
}

/// Outcome of certifying one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub engine: Engine,
    pub candidate_index: u64,
    pub success: bool,
    /// Krawczyk: the certified box. α: bounding box of the ball of radius 2β̄.
    pub region: IntervalBox,
    /// α only: enclosure of β(F, s).
    pub beta_bound: Option<RealInterval>,
    /// α only: enclosure of α(F, s).
    pub alpha_value: Option<RealInterval>,
    pub real_certified: Realness,
    /// Projection of `region` on Re(x₁).
    pub re1_range: RealInterval,
}

impl Certificate {
    pub(crate) fn failed(engine: Engine, s: &[Complex64]) -> Self {
        let region = IntervalBox::point(s);
        let re1_range = region.coords[0].re;
        Self {
            engine,
            candidate_index: 0,
            success: false,
            region,
            beta_bound: None,
            alpha_value: None,
            real_certified: Realness::Undetermined,
            re1_range,
        }
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.candidate_index = index;
        self
    }
}

/// Certifies `s` with the chosen engine.
pub fn certify(
    engine: Engine,
    f: &PolynomialSystem,
    s: &[Complex64],
) -> Result<Certificate, EngineError> {
    match engine {
        Engine::Krawczyk => krawczyk_certify(f, s),
        Engine::Alpha => alpha_certify(f, s),
    }
}

/// Engine-appropriate distinctness test for two successful certificates.
pub fn distinct(
    c1: &Certificate,
    c2: &Certificate,
    s1: &[Complex64],
    s2: &[Complex64],
) -> Result<bool, EngineError> {
    if c1.engine != c2.engine {
        return Err(EngineError::EngineMismatch);
    }
    match c1.engine {
        Engine::Krawczyk => krawczyk_distinct(c1, c2),
        Engine::Alpha => alpha_distinct(c1, c2, s1, s2),
    }
}

/// Nearest-float inverse; `None` when singular or non-finite.
pub fn float_inverse(m: DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let inv = m.try_inverse()?;
    inv.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(inv)
}

/// One plain floating-point Newton step `s − Jac_F(s)⁻¹ F(s)`.
pub fn newton_step(f: &PolynomialSystem, s: &[Complex64]) -> Option<Vec<Complex64>> {
    let jac = f.jacobian_at(s).ok()?;
    let rhs = DVector::from_vec(f.evaluate(s).ok()?);
    let delta = jac.lu().solve(&rhs)?;
    let out: Vec<Complex64> = s.iter().zip(delta.iter()).map(|(a, d)| a - d).collect();
    out.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_system;

    #[test]
    fn engine_names_round_trip() {
        for e in [Engine::Krawczyk, Engine::Alpha] {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("newton".parse::<Engine>().is_err());
    }

    #[test]
    fn newton_step_converges_on_simple_root() {
        let f = parse_system("x1^2 - 2").unwrap();
        let mut s = vec![Complex64::new(1.5, 0.0)];
        for _ in 0..6 {
            s = newton_step(&f, &s).unwrap();
        }
        assert!((s[0].re - 2f64.sqrt()).abs() < 1e-15);
        let g = parse_system("x1^2").unwrap();
        assert!(newton_step(&g, &[Complex64::new(0.0, 0.0)]).is_none());
    }

    #[test]
    fn mixed_engine_distinctness_rejected() {
        let f = parse_system("x1^2 - 1").unwrap();
        let s1 = [Complex64::new(1.0, 0.0)];
        let s2 = [Complex64::new(-1.0, 0.0)];
        let a = krawczyk_certify(&f, &s1).unwrap();
        let b = alpha_certify(&f, &s2).unwrap();
        assert_eq!(distinct(&a, &b, &s1, &s2), Err(EngineError::EngineMismatch));
    }
}
