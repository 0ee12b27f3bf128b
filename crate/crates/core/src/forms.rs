//! Transverse-mode basis and quadrature evaluation of the quadratic forms on
//! the straight strip `ℝ × [0, a]`.
//!
//! A [`TrialField`] is a finite mode expansion `ψ(x, v) = Σₙ φₙ(x) χₙ(v)`.
//! Two routes to the energy of a field on the deformed strip are provided:
//!
//! * [`h_lambda_form`] applies the straightened operator
//!   `H_λ = −Δ + λA₁ − λ²A₂` to `u` and integrates against `u`;
//! * [`mapped_dirichlet_form`] pulls `∫|∇φ|²` on the deformed strip back
//!   through `y = v(1 + λf(x))`.
//!
//! They agree for `ψ = (1 + λf)^{-1/2} u`, which is how the operator
//! coefficients are checked.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::quadrature::gauss_legendre;

const X_POINTS: usize = 16;
const V_POINTS: usize = 16;
/// Largest x-panel inside the profile support, as a fraction of `b`.
const SUPPORT_PANEL: f64 = 1.0 / 96.0;

/// Dirichlet sine modes `χₙ(v) = √(2/a) sin(πnv/a)`, `n = 1..=N`, with
/// precomputed element tables.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    a: f64,
    n_modes: usize,
    v_nodes: Vec<f64>,
    v_weights: Vec<f64>,
    mass: DMatrix<f64>,
    ydchi: DMatrix<f64>,
    y2gradgrad: DMatrix<f64>,
    gradgrad: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    /// `∫ χₘ χₙ`
    Mass,
    /// `∫ v χₘ′ χₙ`
    YDChi,
    /// `∫ v² χₘ′ χₙ′`
    Y2GradGrad,
    /// `∫ χₘ′ χₙ′`
    GradGrad,
}

impl ModeBasis {
    pub fn new(a: f64, n_modes: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", format!("strip width must be positive, got {a}")));
        }
        if n_modes == 0 {
            return Err(Error::invalid("nmodes", "need at least one mode"));
        }
        let panels = n_modes.max(4);
        let (tn, tw) = gauss_legendre(V_POINTS);
        let mut v_nodes = Vec::with_capacity(panels * V_POINTS);
        let mut v_weights = Vec::with_capacity(panels * V_POINTS);
        let h = a / panels as f64;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (t, w) in tn.iter().zip(&tw) {
                v_nodes.push(mid + 0.5 * h * t);
                v_weights.push(0.5 * h * w);
            }
        }
        let mut basis = Self {
            a,
            n_modes,
            v_nodes,
            v_weights,
            mass: DMatrix::zeros(n_modes, n_modes),
            ydchi: DMatrix::zeros(n_modes, n_modes),
            y2gradgrad: DMatrix::zeros(n_modes, n_modes),
            gradgrad: DMatrix::zeros(n_modes, n_modes),
        };
        let chi: Vec<Vec<f64>> = (1..=n_modes)
            .map(|n| basis.v_nodes.iter().map(|&v| basis.chi(n, v)).collect())
            .collect();
        let dchi: Vec<Vec<f64>> = (1..=n_modes)
            .map(|n| basis.v_nodes.iter().map(|&v| basis.dchi(n, v)).collect())
            .collect();
        for m in 0..n_modes {
            for n in 0..n_modes {
                let (mut ms, mut yd, mut y2, mut gg) = (0.0, 0.0, 0.0, 0.0);
                for (j, (&v, &w)) in basis.v_nodes.iter().zip(&basis.v_weights).enumerate() {
                    ms += w * chi[m][j] * chi[n][j];
                    yd += w * v * dchi[m][j] * chi[n][j];
                    y2 += w * v * v * dchi[m][j] * dchi[n][j];
                    gg += w * dchi[m][j] * dchi[n][j];
                }
                basis.mass[(m, n)] = ms;
                basis.ydchi[(m, n)] = yd;
                basis.y2gradgrad[(m, n)] = y2;
                basis.gradgrad[(m, n)] = gg;
            }
        }
        for m in [&mut basis.mass, &mut basis.y2gradgrad, &mut basis.gradgrad] {
            *m = (m.clone() + m.transpose()) * 0.5;
        }
        Ok(basis)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn chi(&self, n: usize, v: f64) -> f64 {
        (2.0 / self.a).sqrt() * (PI * n as f64 * v / self.a).sin()
    }

    pub fn dchi(&self, n: usize, v: f64) -> f64 {
        let k = PI * n as f64 / self.a;
        (2.0 / self.a).sqrt() * k * (k * v).cos()
    }

    /// Transverse eigenvalue `(πn/a)²`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        (PI * n as f64 / self.a).powi(2)
    }

    pub fn table(&self, kind: ElementKind) -> &DMatrix<f64> {
        match kind {
            ElementKind::Mass => &self.mass,
            ElementKind::YDChi => &self.ydchi,
            ElementKind::Y2GradGrad => &self.y2gradgrad,
            ElementKind::GradGrad => &self.gradgrad,
        }
    }

    /// 1-based element lookup.
    pub fn element(&self, kind: ElementKind, m: usize, n: usize) -> Result<f64> {
        for idx in [m, n] {
            if idx == 0 || idx > self.n_modes {
                return Err(Error::ModeIndex {
                    index: idx,
                    max: self.n_modes,
                });
            }
        }
        Ok(self.table(kind)[(m - 1, n - 1)])
    }

    pub(crate) fn v_rule(&self) -> (&[f64], &[f64]) {
        (&self.v_nodes, &self.v_weights)
    }
}

pub fn transverse_element(kind: ElementKind, m: usize, n: usize, basis: &ModeBasis) -> Result<f64> {
    basis.element(kind, m, n)
}

/// `x ↦ (φ(x), φ′(x))`.
pub type ModeFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

#[derive(Clone)]
pub enum ModeCoefficient {
    Zero,
    Closed(ModeFn),
    Sampled(Arc<SampledMode>),
}

impl fmt::Debug for ModeCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeCoefficient::Zero => f.write_str("Zero"),
            ModeCoefficient::Closed(_) => f.write_str("Closed(..)"),
            ModeCoefficient::Sampled(s) => f.debug_tuple("Sampled").field(&s.values.len()).finish(),
        }
    }
}

impl ModeCoefficient {
    fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            ModeCoefficient::Zero => (0.0, 0.0),
            ModeCoefficient::Closed(g) => g(x),
            ModeCoefficient::Sampled(s) => s.eval(x),
        }
    }
}

/// Values on a uniform grid, interpolated by cubic Hermite pieces whose
/// slopes come from fourth-order differences.
#[derive(Debug, Clone)]
pub struct SampledMode {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl SampledMode {
    pub fn new(x0: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 5 {
            return Err(Error::invalid("samples", "need at least 5 grid values"));
        }
        if !(h > 0.0) {
            return Err(Error::invalid("h", "grid spacing must be positive"));
        }
        let slopes = fourth_order_slopes(&values, h);
        Ok(Self { x0, h, values, slopes })
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.values.len();
        let t = (x - self.x0) / self.h;
        if t < 0.0 || t > (n - 1) as f64 {
            return (0.0, 0.0);
        }
        let i = (t.floor() as usize).min(n - 2);
        let s = t - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.h, self.slopes[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        let d = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / self.h;
        (v, d)
    }
}

fn fourth_order_slopes(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    let k = n - 1;
    d[k] = (25.0 * f[k] - 48.0 * f[k - 1] + 36.0 * f[k - 2] - 16.0 * f[k - 3] + 3.0 * f[k - 4]) / (12.0 * h);
    d[k - 1] = (3.0 * f[k] + 10.0 * f[k - 1] - 18.0 * f[k - 2] + 6.0 * f[k - 3] - f[k - 4]) / (12.0 * h);
    d
}

/// An x-interval of a trial field and the number of Gauss panels used on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub panels: usize,
}

/// Mode expansion `ψ(x, v) = Σₙ φₙ(x) χₙ(v)`, zero outside its pieces.
#[derive(Debug, Clone)]
pub struct TrialField {
    a: f64,
    modes: Vec<ModeCoefficient>,
    pieces: Vec<Piece>,
}

impl TrialField {
    /// `modes[n-1]` multiplies `χₙ`. Pieces must be contiguous and ascending.
    pub fn new(a: f64, modes: Vec<ModeCoefficient>, pieces: Vec<Piece>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("modes", "trial field needs at least one mode"));
        }
        if pieces.is_empty() {
            return Err(Error::invalid("pieces", "trial field needs at least one piece"));
        }
        for (i, p) in pieces.iter().enumerate() {
            if !(p.hi > p.lo) || p.panels == 0 {
                return Err(Error::invalid("pieces", format!("piece {i} is empty")));
            }
            if i > 0 && pieces[i - 1].hi != p.lo {
                return Err(Error::invalid("pieces", "pieces must be contiguous"));
            }
        }
        Ok(Self { a, modes, pieces })
    }

    /// Single-mode field `φ(x) χₙ(v)`.
    pub fn single_mode(a: f64, n: usize, phi: ModeFn, pieces: Vec<Piece>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ModeIndex {
                index: 0,
                max: usize::MAX,
            });
        }
        let mut modes = vec![ModeCoefficient::Zero; n];
        modes[n - 1] = ModeCoefficient::Closed(phi);
        Self::new(a, modes, pieces)
    }

    /// Grid samples per mode, `coeffs[n-1][i]` at `x0 + i·h`; one Gauss panel
    /// per grid cell.
    pub fn sampled(a: f64, x0: f64, h: f64, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let len = coeffs.first().map(Vec::len).unwrap_or(0);
        if coeffs.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("samples", "all modes need the same number of samples"));
        }
        let modes = coeffs
            .into_iter()
            .map(|c| SampledMode::new(x0, h, c).map(|s| ModeCoefficient::Sampled(Arc::new(s))))
            .collect::<Result<Vec<_>>>()?;
        let cells = len - 1;
        let piece = Piece {
            lo: x0,
            hi: x0 + h * cells as f64,
            panels: cells,
        };
        Self::new(a, modes, vec![piece])
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    /// `(φₙ(x), φₙ′(x))` for `n = 1..=modes`; zero outside the support.
    pub fn mode_values(&self, x: f64) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return vec![(0.0, 0.0); self.modes.len()];
        }
        self.modes.iter().map(|m| m.eval(x)).collect()
    }

    /// Pointwise value `ψ(x, v)`.
    pub fn value(&self, x: f64, v: f64) -> f64 {
        let k = (2.0 / self.a).sqrt();
        self.mode_values(x)
            .iter()
            .enumerate()
            .map(|(i, (p, _))| p * k * (PI * (i + 1) as f64 * v / self.a).sin())
            .sum()
    }

    /// Multiply every mode by `(1 + λf(x))^exponent`.
    pub fn rescaled_by_width(&self, p: &Profile, lambda: f64, exponent: f64) -> Result<Self> {
        p.check_nondegenerate(lambda)?;
        let modes = self
            .modes
            .iter()
            .map(|m| match m {
                ModeCoefficient::Zero => ModeCoefficient::Zero,
                other => {
                    let inner = other.clone();
                    let prof = p.clone();
                    ModeCoefficient::Closed(Arc::new(move |x| {
                        let (phi, dphi) = inner.eval(x);
                        let (f0, f1, _) = prof.derivatives(x);
                        let s = 1.0 + lambda * f0;
                        let w = s.powf(exponent);
                        let dw = exponent * s.powf(exponent - 1.0) * lambda * f1;
                        (w * phi, w * dphi + dw * phi)
                    }))
                }
            })
            .collect();
        Self::new(self.a, modes, self.pieces.clone())
    }

    /// Sum of two fields on the union of their supports.
    pub fn add(&self, other: &TrialField, weight: f64) -> Result<Self> {
        if self.a != other.a {
            return Err(Error::invalid("a", "fields live on different strips"));
        }
        let n = self.modes.len().max(other.modes.len());
        let (a_lo, a_hi) = self.support();
        let (b_lo, b_hi) = other.support();
        let lhs = self.clone();
        let rhs = other.clone();
        let modes = (0..n)
            .map(|i| {
                let l = lhs.modes.get(i).cloned().unwrap_or(ModeCoefficient::Zero);
                let r = rhs.modes.get(i).cloned().unwrap_or(ModeCoefficient::Zero);
                ModeCoefficient::Closed(Arc::new(move |x| {
                    let (p, dp) = if x >= a_lo && x <= a_hi { l.eval(x) } else { (0.0, 0.0) };
                    let (q, dq) = if x >= b_lo && x <= b_hi { r.eval(x) } else { (0.0, 0.0) };
                    (p + weight * q, dp + weight * dq)
                }))
            })
            .collect();
        let mut edges: Vec<f64> = self
            .pieces
            .iter()
            .chain(&other.pieces)
            .flat_map(|p| [p.lo, p.hi])
            .collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let pieces = edges
            .windows(2)
            .map(|w| Piece {
                lo: w[0],
                hi: w[1],
                panels: [self, other]
                    .iter()
                    .map(|f| f.panels_for(w[0], w[1]))
                    .max()
                    .unwrap_or(1)
                    .max(1),
            })
            .collect();
        Self::new(self.a, modes, pieces)
    }

    /// Panels this field would spend on `[lo, hi]`, proportional to length.
    fn panels_for(&self, lo: f64, hi: f64) -> usize {
        self.pieces
            .iter()
            .filter(|p| p.lo < hi && p.hi > lo)
            .map(|p| {
                let overlap = hi.min(p.hi) - lo.max(p.lo);
                (p.panels as f64 * overlap / (p.hi - p.lo)).ceil() as usize
            })
            .max()
            .unwrap_or(0)
    }
}

/// How terms containing `f″` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondDerivative {
    /// Use `f″` pointwise (smooth profiles only).
    Direct,
    /// Move the x-derivative onto the field: `∫ f″ g = −∫ f′ g′`.
    ByParts,
}

impl SecondDerivative {
    pub fn for_profile(p: &Profile) -> Self {
        if p.limited_smoothness() {
            SecondDerivative::ByParts
        } else {
            SecondDerivative::Direct
        }
    }
}

/// Field derivatives at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
struct Jet {
    val: f64,
    dx: f64,
    dv: f64,
    dvv: f64,
    dxv: f64,
}

/// Profile data at one x node.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    f: f64,
    f1: f64,
    f2: f64,
}

/// Tensor quadrature over the common support of `u` and `w`, split at the
/// profile breakpoints; `integrand(v, coeffs, U, W)` is summed with weights.
fn integrate_pair(
    u: &TrialField,
    w: &TrialField,
    p: &Profile,
    mut integrand: impl FnMut(f64, Coeffs, &Jet, &Jet) -> [f64; 2],
) -> Result<[f64; 2]> {
    if u.a != w.a {
        return Err(Error::invalid("a", "fields live on different strips"));
    }
    let a = u.a;
    let n = u.n_modes().max(w.n_modes());
    let basis = ModeBasis::new(a, n)?;
    let (v_nodes, v_weights) = basis.v_rule();
    let chi: Vec<Vec<f64>> = (1..=n)
        .map(|k| v_nodes.iter().map(|&v| basis.chi(k, v)).collect())
        .collect();
    let dchi: Vec<Vec<f64>> = (1..=n)
        .map(|k| v_nodes.iter().map(|&v| basis.dchi(k, v)).collect())
        .collect();
    let eig: Vec<f64> = (1..=n).map(|k| basis.eigenvalue(k)).collect();

    let (lo, hi) = {
        let (a0, a1) = u.support();
        let (b0, b1) = w.support();
        (a0.max(b0), a1.min(b1))
    };
    let mut total = [0.0; 2];
    if !(hi > lo) {
        return Ok(total);
    }
    let mut edges: Vec<f64> = u
        .pieces
        .iter()
        .chain(&w.pieces)
        .flat_map(|pc| [pc.lo, pc.hi])
        .chain(p.breakpoints())
        .filter(|&x| x > lo && x < hi)
        .collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let (tn, tw) = gauss_legendre(X_POINTS);
    let mut jets_u = vec![Jet::default(); v_nodes.len()];
    let mut jets_w = vec![Jet::default(); v_nodes.len()];
    for seg in edges.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        let mut panels = u.panels_for(s0, s1).max(w.panels_for(s0, s1)).max(1);
        if s0 < p.b() && s1 > -p.b() {
            panels = panels.max(((s1 - s0) / (p.b() * SUPPORT_PANEL)).ceil() as usize);
        }
        let h = (s1 - s0) / panels as f64;
        for k in 0..panels {
            let mid = s0 + (k as f64 + 0.5) * h;
            for (t, wt) in tn.iter().zip(&tw) {
                let x = mid + 0.5 * h * t;
                let wx = 0.5 * h * wt;
                let (f, f1, f2) = p.derivatives(x);
                let c = Coeffs { f, f1, f2 };
                fill_jets(&u.mode_values(x), &chi, &dchi, &eig, &mut jets_u);
                fill_jets(&w.mode_values(x), &chi, &dchi, &eig, &mut jets_w);
                for (j, (&v, &wv)) in v_nodes.iter().zip(v_weights).enumerate() {
                    let r = integrand(v, c, &jets_u[j], &jets_w[j]);
                    total[0] += wx * wv * r[0];
                    total[1] += wx * wv * r[1];
                }
            }
        }
    }
    Ok(total)
}

fn fill_jets(modes: &[(f64, f64)], chi: &[Vec<f64>], dchi: &[Vec<f64>], eig: &[f64], out: &mut [Jet]) {
    for (j, jet) in out.iter_mut().enumerate() {
        let mut acc = Jet::default();
        for (k, &(phi, dphi)) in modes.iter().enumerate() {
            if phi == 0.0 && dphi == 0.0 {
                continue;
            }
            let c = chi[k][j];
            let d = dchi[k][j];
            acc.val += phi * c;
            acc.dx += dphi * c;
            acc.dv += phi * d;
            acc.dvv -= eig[k] * phi * c;
            acc.dxv += dphi * d;
        }
        *jet = acc;
    }
}

/// Random field `Σₙ Σₖ cₙₖ sin(kπ(x+X)/2X) χₙ` on `[-X, X]`, five sines per
/// mode with coefficients in `(-1, 1)/n`.
pub fn random_smooth_field<R: Rng + ?Sized>(rng: &mut R, a: f64, half: f64, modes: usize) -> Result<TrialField> {
    let coeffs: Vec<Vec<f64>> = (0..modes)
        .map(|n| (0..5).map(|_| rng.random_range(-1.0..1.0) / (1 + n) as f64).collect())
        .collect();
    let modes = coeffs
        .into_iter()
        .map(|c| {
            ModeCoefficient::Closed(Arc::new(move |x: f64| {
                let mut v = 0.0;
                let mut d = 0.0;
                for (k, ck) in c.iter().enumerate() {
                    let w = (k + 1) as f64 * PI / (2.0 * half);
                    let (s, co) = (w * (x + half)).sin_cos();
                    v += ck * s;
                    d += ck * w * co;
                }
                (v, d)
            }))
        })
        .collect();
    TrialField::new(
        a,
        modes,
        vec![Piece {
            lo: -half,
            hi: half,
            panels: 48,
        }],
    )
}

/// `(A₁u, w)` with the first-order coefficients
/// `2f∂²_v + v f″∂_v + 2v f′∂²_{xv} + f′∂_x + ½f″`.
pub fn a1_bilinear(u: &TrialField, w: &TrialField, p: &Profile, mode: SecondDerivative) -> Result<f64> {
    let r = integrate_pair(u, w, p, |v, c, uj, wj| {
        let base = 2.0 * c.f * uj.dvv * wj.val + 2.0 * v * c.f1 * uj.dxv * wj.val + c.f1 * uj.dx * wj.val;
        let second = match mode {
            SecondDerivative::Direct => v * c.f2 * uj.dv * wj.val + 0.5 * c.f2 * uj.val * wj.val,
            SecondDerivative::ByParts => {
                -v * c.f1 * (uj.dxv * wj.val + uj.dv * wj.dx) - 0.5 * c.f1 * (uj.dx * wj.val + uj.val * wj.dx)
            }
        };
        [base + second, 0.0]
    })?;
    Ok(r[0])
}

/// `(A₂u, w)` at amplitude `λ` with the six second-order coefficients.
///
/// The zeroth-order coefficient pairs `f f″`, i.e. `f f″ / 2(1+λf)`; this is
/// the choice that makes [`h_lambda_form`] match [`mapped_dirichlet_form`]
/// exactly.
pub fn a2_bilinear(u: &TrialField, w: &TrialField, p: &Profile, lambda: f64, mode: SecondDerivative) -> Result<f64> {
    p.check_nondegenerate(lambda)?;
    let r = integrate_pair(u, w, p, |v, c, uj, wj| {
        let s = 1.0 + lambda * c.f;
        let s2 = s * s;
        let (f, f1, f2) = (c.f, c.f1, c.f2);
        let c21 = (3.0 * f * f + 2.0 * lambda * f * f * f + v * v * f1 * f1) / s2;
        let c23 = 2.0 * v * f * f1 / s;
        let c24 = f * f1 / s;
        let c26 = 0.75 * f1 * f1 / s2;
        let mut acc = c21 * uj.dvv * wj.val
            + 3.0 * v * f1 * f1 / s2 * uj.dv * wj.val
            + c23 * uj.dxv * wj.val
            + c24 * uj.dx * wj.val
            + c26 * uj.val * wj.val;
        acc += match mode {
            SecondDerivative::Direct => v * f * f2 / s * uj.dv * wj.val + 0.5 * f * f2 / s * uj.val * wj.val,
            SecondDerivative::ByParts => {
                // d/dx (f/s) = f′/s²
                -v * f1 * (f1 / s2 * uj.dv * wj.val + f / s * (uj.dxv * wj.val + uj.dv * wj.dx))
                    - 0.5 * f1 * (f1 / s2 * uj.val * wj.val + f / s * (uj.dx * wj.val + uj.val * wj.dx))
            }
        };
        [acc, 0.0]
    })?;
    Ok(r[0])
}

pub fn a1_form(u: &TrialField, p: &Profile) -> Result<f64> {
    a1_bilinear(u, u, p, SecondDerivative::for_profile(p))
}

pub fn a2_form(u: &TrialField, p: &Profile, lambda: f64) -> Result<f64> {
    a2_bilinear(u, u, p, lambda, SecondDerivative::for_profile(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HForm {
    pub energy: f64,
    pub norm2: f64,
}

impl HForm {
    pub fn quotient(&self) -> f64 {
        self.energy / self.norm2
    }
}

/// `‖∇u‖² + λ(A₁u,u) − λ²(A₂u,u)` and `‖u‖²` on the straight strip.
pub fn h_lambda_form(u: &TrialField, p: &Profile, lambda: f64) -> Result<HForm> {
    p.check_nondegenerate(lambda)?;
    let free = integrate_pair(u, u, p, |_, _, uj, _| [uj.dx * uj.dx + uj.dv * uj.dv, uj.val * uj.val])?;
    let mode = SecondDerivative::for_profile(p);
    let a1 = a1_bilinear(u, u, p, mode)?;
    let a2 = a2_bilinear(u, u, p, lambda, mode)?;
    Ok(HForm {
        energy: free[0] + lambda * a1 - lambda * lambda * a2,
        norm2: free[1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedForm {
    pub q: f64,
    pub weighted_norm2: f64,
}

impl MappedForm {
    /// Rayleigh quotient on the deformed strip.
    pub fn quotient(&self) -> f64 {
        self.q / self.weighted_norm2
    }
}

/// Dirichlet form `∫|∇φ|²` and `∫φ²` on the deformed strip for
/// `φ(x, y) = ψ(x, y/(1 + λf(x)))`, evaluated on the straight strip.
pub fn mapped_dirichlet_form(psi: &TrialField, p: &Profile, lambda: f64) -> Result<MappedForm> {
    p.check_nondegenerate(lambda)?;
    let r = integrate_pair(psi, psi, p, |v, c, j, _| {
        let s = 1.0 + lambda * c.f;
        let sp = lambda * c.f1;
        let q = s * j.dx * j.dx - 2.0 * sp * v * j.dx * j.dv + (1.0 + sp * sp * v * v) / s * j.dv * j.dv;
        [q, s * j.val * j.val]
    })?;
    Ok(MappedForm {
        q: r[0],
        weighted_norm2: r[1],
    })
}
