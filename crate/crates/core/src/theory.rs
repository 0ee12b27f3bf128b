//! Closed-form constants and the hypotheses/conclusions of the existence and
//! nonexistence criteria for the critically deformed strip.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::quadrature::Quadrature;

/// Relative width of the band in which a strict inequality is reported as
/// undecided.
const BOUNDARY_TOL: f64 = 1e-12;

/// Strip width `a`, deformation half-support `b` and amplitude `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Geometry {
    pub fn new(a: f64, b: f64, lambda: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", format!("strip width must be positive, got {a}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::invalid("b", format!("half-support must be positive, got {b}")));
        }
        if !lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be finite"));
        }
        Ok(Self { a, b, lambda })
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// Bottom of the essential spectrum, `(π/a)²`.
    pub fn threshold(&self) -> f64 {
        (PI / self.a).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KMode {
    ClosedForm,
    Series(usize),
}

/// Outcome of a strict inequality test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Fails,
    /// Equality within rounding; the criterion says nothing.
    Boundary,
}

impl Verdict {
    fn strict_less(lhs: f64, rhs: f64) -> Verdict {
        let scale = lhs.abs().max(rhs.abs());
        if (lhs - rhs).abs() <= BOUNDARY_TOL * scale {
            Verdict::Boundary
        } else if lhs < rhs {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// `a > (4/√3)·b`.
    pub nonexistence: Verdict,
    /// `‖f′‖²/‖f‖² < (π/a)² / z_threshold`.
    pub existence: Verdict,
}

impl Conditions {
    pub fn nonexistence_applies(&self) -> bool {
        self.nonexistence.holds()
    }

    pub fn existence_applies(&self) -> bool {
        self.existence.holds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DConstants {
    pub d0: f64,
    pub d1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBracket {
    /// Lower-bound prefactor: `gap ≥ -c1 λ⁴`.
    pub c1: f64,
    /// Upper-bound prefactor: `gap ≤ -c2 λ⁴`.
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRatios {
    pub nonexistence_ratio: f64,
    pub existence_ratio: f64,
}

/// Every theory quantity for one (geometry, profile) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TheoryReport {
    pub K: f64,
    pub z: f64,
    pub z_threshold: f64,
    pub d0: f64,
    pub d1: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub normf2: f64,
    pub normfp2: f64,
    pub threshold: f64,
    pub nonexistence: Verdict,
    pub existence: Verdict,
    pub nonexistence_applies: bool,
    pub existence_applies: bool,
}

pub fn constant_k(mode: KMode) -> Result<f64> {
    match mode {
        KMode::ClosedForm => Ok(k_squared().sqrt()),
        KMode::Series(n) => {
            if n < 2 {
                return Err(Error::invalid("N", format!("series needs N ≥ 2, got {n}")));
            }
            // summed from the smallest term up
            let s: f64 = (2..=n)
                .rev()
                .map(|k| {
                    let k = k as f64;
                    let t = 2.0 * k / (k * k - 1.0);
                    t * t
                })
                .sum();
            Ok(s.sqrt())
        }
    }
}

/// `K² = π²/3 + 1/4`.
pub fn k_squared() -> f64 {
    PI * PI / 3.0 + 0.25
}

/// `(3 + √(9 + 4K²))/2`, the value `z` must exceed for the existence criterion.
pub fn z_threshold() -> f64 {
    0.5 * (3.0 + (9.0 + 4.0 * k_squared()).sqrt())
}

/// `z = (π/a)² ‖f‖²/‖f′‖²`.
pub fn compute_z(g: &Geometry, p: &Profile) -> Result<f64> {
    let n = p.norms();
    if n.normfp2 <= 0.0 || n.normf2 <= 0.0 {
        return Err(Error::ZeroProfile);
    }
    Ok(g.threshold() * n.normf2 / n.normfp2)
}

pub fn check_conditions(g: &Geometry, p: &Profile) -> Result<Conditions> {
    let n = p.norms();
    if n.normf2 <= 0.0 || n.normfp2 <= 0.0 {
        return Err(Error::ZeroProfile);
    }
    let nonexistence = Verdict::strict_less(4.0 / 3f64.sqrt() * g.b, g.a);
    let existence = Verdict::strict_less(n.normfp2 / n.normf2, g.threshold() / z_threshold());
    Ok(Conditions {
        nonexistence,
        existence,
    })
}

pub fn compute_d_constants(g: &Geometry, p: &Profile) -> Result<DConstants> {
    let k2 = g.threshold();
    let d0 = (4.0 * PI * g.b / (g.a * g.a)).powi(2) - 3.0 * k2;
    let z = compute_z(g, p)?;
    let d1 = k2 * (z - 3.0 - k_squared() / z);
    Ok(DConstants { d0, d1 })
}

pub fn gap_bracket(g: &Geometry, p: &Profile) -> Result<GapBracket> {
    let d = compute_d_constants(g, p)?;
    let f4 = p.norms().normf2.powi(2);
    if d.d0 <= 0.0 {
        return Err(Error::Unavailable {
            what: "c1",
            reason: format!("d0 = {:.6e} is not positive", d.d0),
        });
    }
    if d.d1 <= 0.0 {
        return Err(Error::Unavailable {
            what: "c2",
            reason: format!("d1 = {:.6e} is not positive", d.d1),
        });
    }
    Ok(GapBracket {
        c1: d.d0 * d.d0 * f4,
        c2: 0.25 * d.d1 * d.d1 * f4,
    })
}

/// `(2b)²`: for `g(−b) = 0`, `‖g‖² ≤ (2b)² ‖g′‖²` on `[−b, b]`.
pub fn crude_embedding_constant(b: f64) -> f64 {
    4.0 * b * b
}

/// `(π/4b)²`: for `g(−b) = 0`, `‖g′‖² ≥ (π/4b)² ‖g‖²` on `[−b, b]`, attained by
/// `sin(π(x+b)/4b)`.
pub fn sharp_embedding_constant(b: f64) -> f64 {
    (PI / (4.0 * b)).powi(2)
}

/// `(‖g‖², ‖g′‖²)` on `[−b, b]`; `g` returns value and derivative.
pub fn embedding_norms(b: f64, g: impl Fn(f64) -> (f64, f64)) -> Result<(f64, f64)> {
    let q = Quadrature::gauss_legendre(-b, b, 16, 8)?;
    let norm2 = q.integrate(|x| g(x).0.powi(2));
    let dnorm2 = q.integrate(|x| g(x).1.powi(2));
    Ok((norm2, dnorm2))
}

pub fn critical_ratios() -> CriticalRatios {
    CriticalRatios {
        nonexistence_ratio: 4.0 / 3f64.sqrt(),
        existence_ratio: (1.0 / z_threshold()).sqrt(),
    }
}

impl TheoryReport {
    pub fn compute(g: &Geometry, p: &Profile) -> Result<Self> {
        let n = p.norms();
        let conditions = check_conditions(g, p)?;
        let d = compute_d_constants(g, p)?;
        let f4 = n.normf2 * n.normf2;
        Ok(Self {
            K: constant_k(KMode::ClosedForm)?,
            z: compute_z(g, p)?,
            z_threshold: z_threshold(),
            d0: d.d0,
            d1: d.d1,
            c1: (d.d0 > 0.0).then_some(d.d0 * d.d0 * f4),
            c2: (d.d1 > 0.0).then_some(0.25 * d.d1 * d.d1 * f4),
            normf2: n.normf2,
            normfp2: n.normfp2,
            threshold: g.threshold(),
            nonexistence: conditions.nonexistence,
            existence: conditions.existence,
            nonexistence_applies: conditions.nonexistence_applies(),
            existence_applies: conditions.existence_applies(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_profile, ProfileKind};

    fn sine(b: f64) -> Profile {
        make_profile(ProfileKind::Sine, b, 1.0).unwrap()
    }

    fn geom(b: f64) -> Geometry {
        Geometry::new(1.0, b, 0.1).unwrap()
    }

    #[test]
    fn k_closed_form_and_series() {
        let k = constant_k(KMode::ClosedForm).unwrap();
        assert!((k - 1.8814537288215336).abs() < 1e-14);
        assert!((k - 1.881458).abs() < 1e-5);
        // partial sum to N = 10, summed independently
        let mut s = 0.0;
        for n in 2..=10 {
            let t = 2.0 * n as f64 / (n * n - 1) as f64;
            s += t * t;
        }
        let s10 = constant_k(KMode::Series(10)).unwrap();
        assert!((s10 - s.sqrt()).abs() < 1e-14);
        assert!((s10 - 1.7767).abs() < 1e-4);
        assert!(constant_k(KMode::Series(1)).is_err());
        let mut prev = 0.0;
        for n in [2, 3, 10, 100, 1000] {
            let v = constant_k(KMode::Series(n)).unwrap();
            assert!(v > prev && v < k);
            prev = v;
        }
    }

    #[test]
    fn series_tail_bound() {
        let k = constant_k(KMode::ClosedForm).unwrap();
        for n in [100, 1000, 10_000] {
            let d = k - constant_k(KMode::Series(n)).unwrap();
            assert!(d > 0.0 && d < 2.0 / (n as f64).sqrt() * k, "N = {n}: {d}");
        }
    }

    #[test]
    fn existence_constant_identity() {
        let lhs = 6.0 / (9.0 + (90.0 + 12.0 * PI * PI).sqrt());
        let rhs = 2.0 / (3.0 + (9.0 + 4.0 * k_squared()).sqrt());
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((1.0 / z_threshold() - rhs).abs() < 1e-15);
    }

    #[test]
    fn z_values() {
        assert!((compute_z(&geom(2.5), &sine(2.5)).unwrap() - 6.25).abs() < 1e-11);
        assert!((compute_z(&geom(1.0), &sine(1.0)).unwrap() - 1.0).abs() < 1e-12);
        let big = make_profile(ProfileKind::Sine, 2.5, 7.0).unwrap();
        assert!((compute_z(&geom(2.5), &big).unwrap() - 6.25).abs() < 1e-11);
    }

    #[test]
    fn conditions_on_reference_instances() {
        let c = check_conditions(&geom(0.4), &sine(0.4)).unwrap();
        assert!(c.nonexistence_applies() && !c.existence_applies());
        let c = check_conditions(&geom(2.5), &sine(2.5)).unwrap();
        assert!(c.existence_applies() && !c.nonexistence_applies());
        let c = check_conditions(&geom(1.0), &sine(1.0)).unwrap();
        assert!(!c.existence_applies() && !c.nonexistence_applies());
    }

    #[test]
    fn boundary_is_reported() {
        let b = 3f64.sqrt() / 4.0;
        let c = check_conditions(&Geometry::new(1.0, b, 0.1).unwrap(), &sine(b)).unwrap();
        assert_eq!(c.nonexistence, Verdict::Boundary);
    }

    #[test]
    fn d_constants() {
        let d = compute_d_constants(&geom(2.5), &sine(2.5)).unwrap();
        assert!((d.d0 - 97.0 * PI * PI).abs() < 1e-9);
        assert!((d.d0 - 957.35).abs() < 0.01);
        assert!((d.d1 - PI * PI * (3.25 - k_squared() / 6.25)).abs() < 1e-9);
        assert!((d.d1 - 26.49).abs() < 0.01);
        let d = compute_d_constants(&geom(0.4), &sine(0.4)).unwrap();
        assert!((d.d0 - PI * PI * (2.56 - 3.0)).abs() < 1e-12);
        assert!(d.d0 < 0.0);
    }

    #[test]
    fn bracket_values() {
        let br = gap_bracket(&geom(2.5), &sine(2.5)).unwrap();
        let d1 = PI * PI * (3.25 - k_squared() / 6.25);
        assert!((br.c2 - d1 * d1 * 6.25 / 4.0).abs() < 1e-8);
        assert!((br.c2 - 1096.0).abs() < 1.0);
        assert!((br.c1 / 5.73e6 - 1.0).abs() < 2e-3);
        assert!(br.c1 > br.c2);
        let err = gap_bracket(&geom(0.4), &sine(0.4)).unwrap_err();
        assert!(matches!(err, Error::Unavailable { what: "c1", .. }));
    }

    #[test]
    fn ratios() {
        let r = critical_ratios();
        assert!((r.nonexistence_ratio - 2.3094).abs() < 1e-4);
        assert!((r.existence_ratio - 0.5060).abs() < 1e-4);
        assert!(r.existence_ratio < r.nonexistence_ratio);
    }

    #[test]
    fn report_is_consistent() {
        let r = TheoryReport::compute(&geom(2.5), &sine(2.5)).unwrap();
        assert!(r.existence_applies);
        assert_eq!(r.existence_applies, r.z > r.z_threshold);
        assert!((r.c2.unwrap() - r.d1 * r.d1 * r.normf2 * r.normf2 / 4.0).abs() < 1e-9);
        let r = TheoryReport::compute(&geom(0.4), &sine(0.4)).unwrap();
        assert!(r.c1.is_none() && r.c2.is_none() && r.nonexistence_applies);
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::new(0.0, 1.0, 0.1).is_err());
        assert!(Geometry::new(1.0, -1.0, 0.1).is_err());
        assert!(Geometry::new(1.0, 1.0, f64::NAN).is_err());
    }
}
