//! Cross-module invariant suite run by `critwell validate`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forms::{
    h_lambda_form, mapped_dirichlet_form, random_smooth_field, transverse_element, ElementKind, ModeBasis,
};
use crate::profiles::{make_profile, validate, Profile, ProfileKind};
use crate::solver::{assemble, solve, SolverConfig};
use crate::theory::{
    constant_k, critical_ratios, crude_embedding_constant, embedding_norms, k_squared, sharp_embedding_constant,
    z_threshold, Geometry, KMode,
};
use crate::variational::{best_upper_bound_on, SearchGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

/// Random `g(x) = (x + b) Σₖ cₖ (x/b)ᵏ`, degree ≤ 6, with its derivative.
pub fn random_anchored_polynomial<R: Rng + ?Sized>(rng: &mut R, b: f64) -> impl Fn(f64) -> (f64, f64) {
    let degree = rng.random_range(0..=5usize);
    let c: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
    move |x: f64| {
        let t = x / b;
        let mut p = 0.0;
        let mut dp = 0.0;
        for ck in c.iter().rev() {
            dp = dp * t + p;
            p = p * t + ck;
        }
        let dp = dp / b;
        ((x + b) * p, p + (x + b) * dp)
    }
}

/// Violation counts of the crude and sharp embedding bounds over `samples`
/// random anchored polynomials on `[−b, b]`.
pub fn embedding_violations(b: f64, samples: usize, seed: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let crude = crude_embedding_constant(b);
    let sharp = sharp_embedding_constant(b);
    let mut bad = (0, 0);
    for _ in 0..samples {
        let g = random_anchored_polynomial(&mut rng, b);
        let (n2, d2) = embedding_norms(b, g)?;
        if n2 > crude * d2 * (1.0 + 1e-12) {
            bad.0 += 1;
        }
        if d2 < sharp * n2 * (1.0 - 1e-12) {
            bad.1 += 1;
        }
    }
    Ok(bad)
}

fn small_config(g: &Geometry, l: f64, h: f64, n_modes: usize) -> SolverConfig {
    SolverConfig {
        l,
        nx: (2.0 * l / h).round() as usize,
        n_modes,
        ..SolverConfig::defaults_for(g)
    }
}

fn sine(b: f64) -> Result<Profile> {
    make_profile(ProfileKind::Sine, b, 1.0)
}

fn constants() -> Result<(bool, String)> {
    let k = constant_k(KMode::ClosedForm)?;
    let series = constant_k(KMode::Series(10_000))?;
    let identity =
        (6.0 / (9.0 + (90.0 + 12.0 * PI * PI).sqrt()) - 2.0 / (3.0 + (9.0 + 4.0 * k_squared()).sqrt())).abs();
    let r = critical_ratios();
    let ok = series < k
        && (k - series) / k < 0.02
        && identity < 1e-12
        && (1.0 / z_threshold() - r.existence_ratio.powi(2)).abs() < 1e-12
        && r.existence_ratio < r.nonexistence_ratio;
    Ok((
        ok,
        format!("K = {k:.12}, series(1e4) = {series:.12}, identity residual {identity:.1e}"),
    ))
}

fn matrix_elements() -> Result<(bool, String)> {
    let basis = ModeBasis::new(1.0, 12)?;
    let mut worst: f64 = (transverse_element(ElementKind::YDChi, 1, 1, &basis)? + 0.5).abs();
    for n in 2..=12 {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let exact = sign * 2.0 * nf / (nf * nf - 1.0);
        worst = worst.max((transverse_element(ElementKind::YDChi, 1, n, &basis)? - exact).abs());
    }
    for m in 1..=12 {
        for n in 1..=12 {
            let expect = if m == n { 1.0 } else { 0.0 };
            worst = worst.max((basis.element(ElementKind::Mass, m, n)? - expect).abs());
        }
    }
    Ok((worst < 1e-10, format!("max deviation {worst:.1e}")))
}

fn profile_invariants() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in [ProfileKind::Sine, ProfileKind::BumpDerivative] {
        let p = make_profile(kind, 2.5, 1.0)?;
        let report = validate(&p, 0.1);
        ok &= report.passed();
        detail.push(format!("{kind}: {:?}", report.failures()));
    }
    let n = sine(2.5)?.norms();
    let ratio = n.normfp2 / n.normf2 / (PI / 2.5).powi(2);
    ok &= (ratio - 1.0).abs() < 1e-9;
    detail.push(format!("sine ‖f′‖²/‖f‖² ÷ (π/b)² = {ratio:.12}"));
    Ok((ok, detail.join("; ")))
}

fn unitary_identity(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for kind in [ProfileKind::Sine, ProfileKind::BumpDerivative] {
        let p = make_profile(kind, 2.5, 1.0)?;
        for lambda in [0.1, -0.02] {
            let u = random_smooth_field(&mut rng, 1.0, 3.5, 3)?;
            let h = h_lambda_form(&u, &p, lambda)?;
            let m = mapped_dirichlet_form(&u.rescaled_by_width(&p, lambda, -0.5)?, &p, lambda)?;
            worst = worst.max((h.energy - m.q).abs() / (1.0 + m.q.abs()));
            worst = worst.max((h.norm2 - m.weighted_norm2).abs());
        }
    }
    Ok((worst < 1e-7, format!("max relative mismatch {worst:.1e}")))
}

fn assembly_symmetry() -> Result<(bool, String)> {
    let g = Geometry::new(1.0, 2.5, 0.1)?;
    let sys = assemble(&g, &sine(2.5)?, &small_config(&g, 6.0, 0.05, 4))?;
    let asym = sys.a.asymmetry();
    Ok((asym < 1e-13, format!("max asymmetry {asym:.1e}")))
}

fn free_strip() -> Result<(bool, String)> {
    let g = Geometry::new(1.0, 2.5, 0.0)?;
    let cfg = small_config(&g, 10.0, 0.05, 2);
    let r = solve(&g, &sine(2.5)?, &cfg)?;
    let q = PI / 20.0;
    let discrete = PI * PI + 4.0 / (r.h * r.h) * (0.5 * q * r.h).sin().powi(2);
    let err = (r.eigenvalues[0] - discrete).abs();
    Ok((err < 1e-9 && !r.is_bound_state, format!("box level error {err:.1e}")))
}

fn invariances() -> Result<(bool, String)> {
    let g = Geometry::new(1.0, 2.5, 0.1)?;
    let cfg = small_config(&g, 8.0, 0.05, 4);
    let p = sine(2.5)?;
    let base = solve(&g, &p, &cfg)?.gap;
    let mirrored = solve(&g.with_lambda(-0.1), &p, &cfg)?.gap;
    let mut worst = (base - mirrored).abs();
    for s in [2.0, 5.0] {
        let scaled = solve(&g.with_lambda(0.1 / s), &p.scaled(s)?, &cfg)?.gap;
        worst = worst.max((base - scaled).abs());
    }
    Ok((worst < 1e-8, format!("gap {base:.10}, max deviation {worst:.1e}")))
}

fn sandwich() -> Result<(bool, String)> {
    let g = Geometry::new(1.0, 2.5, 0.1)?;
    let p = sine(2.5)?;
    let r = solve(&g, &p, &small_config(&g, 10.0, 0.05, 6))?;
    let grid = SearchGrid {
        n_eta: 5,
        n_kappa: 5,
        span: 10.0,
    };
    let ub = best_upper_bound_on(&g, &p, 0.1, grid)?;
    Ok((
        r.gap <= ub.gap && r.is_bound_state,
        format!("solver gap {:.6}, trial gap {:.6}", r.gap, ub.gap),
    ))
}

fn embedding(seed: u64) -> Result<(bool, String)> {
    let mut counts = (0, 0);
    for b in [0.4, 1.0, 2.5] {
        let (c, s) = embedding_violations(b, 200, seed)?;
        counts.0 += c;
        counts.1 += s;
    }
    Ok((
        counts == (0, 0),
        format!("violations: crude {}, sharp {} (600 samples)", counts.0, counts.1),
    ))
}

/// Run every invariant; failures are reported, never raised.
pub fn run_invariant_suite(seed: u64) -> Vec<InvariantCheck> {
    vec![
        InvariantCheck::from_result("constants", constants()),
        InvariantCheck::from_result("matrix_elements", matrix_elements()),
        InvariantCheck::from_result("profiles", profile_invariants()),
        InvariantCheck::from_result("unitary_identity", unitary_identity(seed)),
        InvariantCheck::from_result("assembly_symmetry", assembly_symmetry()),
        InvariantCheck::from_result("free_strip", free_strip()),
        InvariantCheck::from_result("invariances", invariances()),
        InvariantCheck::from_result("upper_bound_sandwich", sandwich()),
        InvariantCheck::from_result("embedding", embedding(seed)),
    ]
}
