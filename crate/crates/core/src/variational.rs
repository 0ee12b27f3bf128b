//! Trial functions `(1 + ληf(x))χ₁` on the deformation with exponential tails
//! `e^{−κ(|x|−b)}χ₁` outside, their exact Rayleigh quotients, and the
//! asymptotic lower-bound certificate.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{mapped_dirichlet_form, Piece, TrialField};
use crate::profiles::Profile;
use crate::theory::{compute_d_constants, compute_z, k_squared, Geometry};

/// Tails are cut where `e^{−κt}` drops below `e^{−TAIL_DECAYS}`.
const TAIL_DECAYS: f64 = 40.0;
pub const DEFAULT_TAIL_CAP: f64 = 1.0e5;
const TAIL_PANELS: usize = 64;
const CORE_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaChoice {
    pub eta: f64,
    /// `η² − 2ηz + 3z + K²` at the chosen `η`.
    pub bracket: f64,
}

impl EtaChoice {
    pub fn admissible(&self) -> bool {
        self.bracket < 0.0
    }
}

/// `η² − 2ηz + 3z + K²`.
pub fn trial_bracket(eta: f64, z: f64) -> f64 {
    eta * eta - 2.0 * eta * z + 3.0 * z + k_squared()
}

/// `η = z`, which minimizes the bracket to `−(z² − 3z − K²)`.
pub fn optimal_eta(z: f64) -> Result<EtaChoice> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid("z", format!("must be positive, got {z}")));
    }
    Ok(EtaChoice {
        eta: z,
        bracket: -(z * z - 3.0 * z - k_squared()),
    })
}

/// Trial `(1 + ληf)χ₁` on `[−b, b]`, `e^{−κ(|x|−b)}χ₁` outside.
#[derive(Debug, Clone)]
pub struct TrialSpec {
    pub geometry: Geometry,
    pub profile: Profile,
    pub eta: f64,
    pub kappa: f64,
    /// Longest tail the quadrature may span.
    pub tail_cap: f64,
}

impl TrialSpec {
    pub fn new(geometry: Geometry, profile: Profile, eta: f64, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
        }
        if !eta.is_finite() {
            return Err(Error::invalid("eta", "must be finite"));
        }
        Ok(Self {
            geometry,
            profile,
            eta,
            kappa,
            tail_cap: DEFAULT_TAIL_CAP,
        })
    }

    pub fn tail_length(&self) -> f64 {
        TAIL_DECAYS / self.kappa
    }

    /// Mode-1 field `u` on the straight strip.
    pub fn field(&self, lambda: f64) -> Result<TrialField> {
        let tail = self.tail_length();
        if tail > self.tail_cap {
            return Err(Error::invalid(
                "kappa",
                format!("tail length {tail:.3e} exceeds the cap {:.3e}", self.tail_cap),
            ));
        }
        let b = self.profile.b();
        let (eta, kappa) = (self.eta, self.kappa);
        let p = self.profile.clone();
        let phi = Arc::new(move |x: f64| {
            let t = x.abs() - b;
            if t > 0.0 {
                let e = (-kappa * t).exp();
                (e, -kappa * x.signum() * e)
            } else {
                let (f, f1, _) = p.derivatives(x);
                (1.0 + lambda * eta * f, lambda * eta * f1)
            }
        });
        let pieces = vec![
            Piece {
                lo: -b - tail,
                hi: -b,
                panels: TAIL_PANELS,
            },
            Piece {
                lo: -b,
                hi: b,
                panels: CORE_PANELS,
            },
            Piece {
                lo: b,
                hi: b + tail,
                panels: TAIL_PANELS,
            },
        ];
        TrialField::single_mode(self.geometry.a, 1, phi, pieces)
    }
}

/// Rayleigh quotient of the trial on the deformed strip at amplitude `λ`.
pub fn rayleigh_quotient(t: &TrialSpec, lambda: f64) -> Result<f64> {
    t.profile.check_nondegenerate(lambda)?;
    let psi = t.field(lambda)?.rescaled_by_width(&t.profile, lambda, -0.5)?;
    Ok(mapped_dirichlet_form(&psi, &t.profile, lambda)?.quotient())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub n_eta: usize,
    pub n_kappa: usize,
    /// Ratio between the largest and smallest grid value.
    pub span: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            n_eta: 17,
            n_kappa: 17,
            span: 10.0,
        }
    }
}

impl SearchGrid {
    /// Log-spaced values centred (geometrically) on `centre`.
    pub fn values(n: usize, centre: f64, span: f64) -> Vec<f64> {
        if n == 1 {
            return vec![centre];
        }
        (0..n)
            .map(|i| centre * span.powf(i as f64 / (n - 1) as f64 - 0.5))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub quotient: f64,
    pub eta: f64,
    pub kappa: f64,
    /// `quotient − (π/a)²`.
    pub gap: f64,
}

/// Centre of the κ search: `½λ²d₁‖f‖²` when `d₁ > 0`, else `λ²‖f‖²`.
pub fn kappa_scale(g: &Geometry, p: &Profile, lambda: f64) -> Result<f64> {
    let d = compute_d_constants(g, p)?;
    let nf2 = p.norms().normf2;
    let l2 = lambda * lambda;
    let k = if d.d1 > 0.0 { 0.5 * l2 * d.d1 * nf2 } else { l2 * nf2 };
    if !(k > 0.0) {
        return Err(Error::invalid("lambda", "κ scale vanishes; λ must be nonzero"));
    }
    Ok(k)
}

pub fn best_upper_bound(g: &Geometry, p: &Profile, lambda: f64) -> Result<UpperBound> {
    best_upper_bound_on(g, p, lambda, SearchGrid::default())
}

/// Minimum of the Rayleigh quotient over log grids in `η` (around `z`) and
/// `κ` (around [`kappa_scale`]).
pub fn best_upper_bound_on(g: &Geometry, p: &Profile, lambda: f64, grid: SearchGrid) -> Result<UpperBound> {
    if grid.n_eta == 0 || grid.n_kappa == 0 || !(grid.span >= 1.0) {
        return Err(Error::invalid("grid", "need at least one point per axis and span ≥ 1"));
    }
    p.check_nondegenerate(lambda)?;
    let z = compute_z(g, p)?;
    let etas = SearchGrid::values(grid.n_eta, optimal_eta(z)?.eta, grid.span);
    let kappas = SearchGrid::values(grid.n_kappa, kappa_scale(g, p, lambda)?, grid.span);
    let pairs: Vec<(f64, f64)> = etas.iter().flat_map(|&e| kappas.iter().map(move |&k| (e, k))).collect();
    let values = pairs
        .par_iter()
        .map(|&(eta, kappa)| rayleigh_quotient(&TrialSpec::new(*g, p.clone(), eta, kappa)?, lambda))
        .collect::<Result<Vec<f64>>>()?;
    let (best, &(eta, kappa)) = values
        .iter()
        .zip(&pairs)
        .min_by(|a, b| a.0.total_cmp(b.0))
        .expect("grid is non-empty");
    Ok(UpperBound {
        quotient: *best,
        eta,
        kappa,
        gap: best - g.threshold(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `(π/a)² − d₀²‖f‖⁴λ⁴`.
    pub value: f64,
    /// Always false: the bound holds only up to `O(λ⁵)`.
    pub rigorous: bool,
}

pub fn asymptotic_lower_certificate(g: &Geometry, p: &Profile, lambda: f64) -> Result<Certificate> {
    let d = compute_d_constants(g, p)?;
    if !(d.d0 > 0.0) {
        return Err(Error::Unavailable {
            what: "lower certificate",
            reason: format!("d0 = {:.6e} is not positive", d.d0),
        });
    }
    let nf2 = p.norms().normf2;
    Ok(Certificate {
        value: g.threshold() - d.d0 * d.d0 * nf2 * nf2 * lambda.powi(4),
        rigorous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_profile, ProfileKind};
    use crate::theory::z_threshold;
    use std::f64::consts::PI;

    fn existence() -> (Geometry, Profile) {
        (
            Geometry::new(1.0, 2.5, 0.1).unwrap(),
            make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap(),
        )
    }

    #[test]
    fn eta_examples() {
        let c = optimal_eta(6.25).unwrap();
        assert_eq!(c.eta, 6.25);
        assert!((c.bracket + 16.772632).abs() < 1e-6);
        assert!((trial_bracket(c.eta, 6.25) - c.bracket).abs() < 1e-12);
        assert!(optimal_eta(z_threshold()).unwrap().bracket.abs() < 1e-12);
        let low = optimal_eta(1.0).unwrap();
        assert!(low.bracket > 0.0 && !low.admissible());
        assert!(optimal_eta(0.0).is_err());
    }

    #[test]
    fn bracket_is_minimized_at_z() {
        for z in [0.5, 3.0, 6.25] {
            let best = trial_bracket(z, z);
            for d in [-1.0, -0.1, 0.1, 1.0] {
                assert!(trial_bracket(z + d, z) > best);
            }
        }
    }

    #[test]
    fn flat_strip_quotient_approaches_threshold() {
        let (g, p) = existence();
        let mut prev = f64::INFINITY;
        for kappa in [1.0, 0.3, 0.1] {
            let t = TrialSpec::new(g, p.clone(), 6.25, kappa).unwrap();
            let q = rayleigh_quotient(&t, 0.0).unwrap();
            // κ² ∫tail² / (2b + 1/κ)
            let expect = PI * PI + kappa / (2.0 * 2.5 + 1.0 / kappa);
            assert!((q - expect).abs() < 1e-9, "{q} vs {expect}");
            assert!(q >= PI * PI && q < prev);
            prev = q;
        }
    }

    #[test]
    fn trial_is_continuous_at_matching_points() {
        let (g, p) = existence();
        let t = TrialSpec::new(g, p, 6.25, 0.3).unwrap();
        let u = t.field(0.1).unwrap();
        for b in [-2.5, 2.5] {
            let inner = u.mode_values(b)[0].0;
            let outer = u.mode_values(b + b.signum() * 1e-300)[0].0;
            assert_eq!(inner, 1.0);
            assert_eq!(outer, 1.0);
        }
    }

    #[test]
    fn existence_trial_binds() {
        let (g, p) = existence();
        let kappa = kappa_scale(&g, &p, 0.1).unwrap();
        assert!((kappa - 0.331).abs() < 2e-3);
        let t = TrialSpec::new(g, p, 6.25, kappa).unwrap();
        assert!(rayleigh_quotient(&t, 0.1).unwrap() < PI * PI);
    }

    #[test]
    fn tail_cap_is_enforced() {
        let (g, p) = existence();
        let t = TrialSpec::new(g, p, 6.25, 1e-5).unwrap();
        assert!(rayleigh_quotient(&t, 0.1).is_err());
        assert!(TrialSpec::new(g, make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap(), 1.0, 0.0).is_err());
    }

    #[test]
    fn certificate_examples() {
        let (g, p) = existence();
        let c = asymptotic_lower_certificate(&g, &p, 0.05).unwrap();
        assert!((PI * PI - c.value - 35.8).abs() < 0.1);
        assert!(!c.rigorous);
        assert_eq!(asymptotic_lower_certificate(&g, &p, 0.0).unwrap().value, PI * PI);
        let narrow = make_profile(ProfileKind::Sine, 0.4, 1.0).unwrap();
        let gn = Geometry::new(1.0, 0.4, 0.1).unwrap();
        assert!(asymptotic_lower_certificate(&gn, &narrow, 0.1).is_err());
    }

    #[test]
    fn grid_values_are_nested() {
        let coarse = SearchGrid::values(17, 0.3, 10.0);
        let fine = SearchGrid::values(33, 0.3, 10.0);
        for (i, c) in coarse.iter().enumerate() {
            assert_eq!(*c, fine[2 * i]);
        }
        assert!((coarse[16] / coarse[0] - 10.0).abs() < 1e-12);
    }
}
