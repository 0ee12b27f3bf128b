//! Compactly supported, zero-mean deformation profiles.
//!
//! A profile `f` describes the deformed strip `0 < y < a(1 + λ f(x))`. Every
//! profile vanishes outside `[-b, b]` and integrates to zero, so the
//! deformation adds no net area.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_split, Quadrature};

/// Largest relative trapezoid mean `|∫f| / ∫|f|` a table may carry before the
/// mean projection refuses to repair it.
pub const MEAN_PROJECTION_LIMIT: f64 = 1e-2;

const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Sine,
    BumpDerivative,
    Tabulated,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Sine => "sine",
            ProfileKind::BumpDerivative => "bump-derivative",
            ProfileKind::Tabulated => "tabulated",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProfileKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sine" => Ok(ProfileKind::Sine),
            "bump-derivative" | "bump_derivative" => Ok(ProfileKind::BumpDerivative),
            "tabulated" => Ok(ProfileKind::Tabulated),
            other => Err(format!("unknown profile kind `{other}`")),
        }
    }
}

/// Derivative order accepted by [`Profile::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Order::Value),
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            _ => Err(Error::invalid("order", format!("{v} is not 0, 1 or 2"))),
        }
    }
}

/// A deformation profile with support in `[-b, b]`.
#[derive(Clone)]
pub struct Profile {
    kind: ProfileKind,
    b: f64,
    amplitude: f64,
    spline: Option<Arc<Spline>>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("kind", &self.kind)
            .field("b", &self.b)
            .field("amplitude", &self.amplitude)
            .finish()
    }
}

/// Norms of `f` and `f′` on `[-b, b]` together with `∫f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub normf2: f64,
    pub normfp2: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub zero_mean: bool,
    pub mean: f64,
    pub support_contained: bool,
    pub vanishes_at_edges: bool,
    /// `min_x (1 + λ f(x))`.
    pub min_width_factor: f64,
    pub nondegenerate: bool,
    /// `f′` jumps at the support edges (sine and tabulated kinds); forms
    /// involving `f″` are then evaluated after integrating by parts.
    pub limited_smoothness: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.zero_mean && self.support_contained && self.vanishes_at_edges && self.nondegenerate
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.zero_mean {
            out.push("zero-mean");
        }
        if !self.support_contained {
            out.push("support");
        }
        if !self.vanishes_at_edges {
            out.push("edge-values");
        }
        if !self.nondegenerate {
            out.push("degenerate-strip");
        }
        out
    }
}

/// Build one of the analytic profiles. Tabulated profiles come from
/// [`Profile::from_samples`] or [`Profile::from_table_file`].
pub fn make_profile(kind: ProfileKind, b: f64, amplitude: f64) -> Result<Profile> {
    check_b_amplitude(b, amplitude)?;
    match kind {
        ProfileKind::Sine | ProfileKind::BumpDerivative => Ok(Profile {
            kind,
            b,
            amplitude,
            spline: None,
        }),
        ProfileKind::Tabulated => Err(Error::invalid(
            "kind",
            "tabulated profiles need samples; use Profile::from_samples",
        )),
    }
}

fn check_b_amplitude(b: f64, amplitude: f64) -> Result<()> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::invalid("b", format!("half-support must be positive, got {b}")));
    }
    if !amplitude.is_finite() || amplitude == 0.0 {
        return Err(Error::invalid(
            "amplitude",
            format!("must be finite and nonzero, got {amplitude}"),
        ));
    }
    Ok(())
}

impl Profile {
    /// Natural cubic spline through `(xs, fs)`, scaled by `amplitude`.
    ///
    /// The samples must vanish at both ends and `xs` must be strictly
    /// increasing. A small residual mean is removed by subtracting a multiple
    /// of a parabolic window that is zero at both ends.
    pub fn from_samples(xs: &[f64], fs: &[f64], amplitude: f64) -> Result<Profile> {
        if xs.len() != fs.len() {
            return Err(Error::invalid("table", "x and f columns differ in length"));
        }
        if xs.len() < 4 {
            return Err(Error::invalid("table", "need at least 4 samples"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("table", "x must be strictly increasing"));
        }
        if xs.iter().chain(fs).any(|v| !v.is_finite()) {
            return Err(Error::invalid("table", "non-finite sample"));
        }
        let b = xs[0].abs().max(xs[xs.len() - 1].abs());
        check_b_amplitude(b, amplitude)?;
        let scale = fs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::ZeroProfile);
        }
        if fs[0].abs() > 1e-12 * scale || fs[fs.len() - 1].abs() > 1e-12 * scale {
            return Err(Error::invalid("table", "profile must vanish at both ends of the table"));
        }

        let mut values = fs.to_vec();
        let n = values.len();
        values[0] = 0.0;
        values[n - 1] = 0.0;

        let trap_mean: f64 = xs
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
            .sum();
        let trap_abs: f64 = xs
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0].abs() + f[1].abs()))
            .sum();
        let relative_mean = trap_mean.abs() / trap_abs;
        if relative_mean > MEAN_PROJECTION_LIMIT {
            return Err(Error::NonZeroMean { relative_mean });
        }

        // The spline integral is linear in the data, so one projection step
        // makes the interpolant itself mean-free.
        let (x0, x1) = (xs[0], xs[n - 1]);
        let window: Vec<f64> = xs.iter().map(|&x| (x - x0) * (x1 - x)).collect();
        let spline_f = Spline::natural(xs, &values);
        let spline_w = Spline::natural(xs, &window);
        let coef = spline_f.integral() / spline_w.integral();
        for (v, w) in values.iter_mut().zip(&window) {
            *v -= coef * w;
        }
        let spline = Spline::natural(xs, &values);

        Ok(Profile {
            kind: ProfileKind::Tabulated,
            b,
            amplitude,
            spline: Some(Arc::new(spline)),
        })
    }

    /// Read a two-column `x f` table; `#` starts a comment.
    pub fn from_table_file(path: &Path, amplitude: f64) -> Result<Profile> {
        let text = std::fs::read_to_string(path)?;
        let (xs, fs) = parse_table(&text).map_err(|(line, reason)| Error::Table {
            path: path.to_path_buf(),
            line,
            reason,
        })?;
        Profile::from_samples(&xs, &fs, amplitude)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Same shape with the amplitude multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Profile> {
        check_b_amplitude(self.b, self.amplitude * s)?;
        Ok(Profile {
            amplitude: self.amplitude * s,
            ..self.clone()
        })
    }

    /// `f` has a jump in `f′` at the support edges.
    pub fn limited_smoothness(&self) -> bool {
        !matches!(self.kind, ProfileKind::BumpDerivative)
    }

    /// Points where `f′` may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.spline {
            Some(s) => s.xs.clone(),
            None => vec![-self.b, self.b],
        }
    }

    /// `f`, `f′` or `f″` at `x`; exactly zero for `|x| ≥ b`.
    pub fn evaluate(&self, x: f64, order: Order) -> f64 {
        let (f0, f1, f2) = self.derivatives(x);
        match order {
            Order::Value => f0,
            Order::First => f1,
            Order::Second => f2,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.evaluate(x, Order::Value)
    }

    pub fn first(&self, x: f64) -> f64 {
        self.evaluate(x, Order::First)
    }

    /// `(f, f′, f″)` at `x`.
    pub fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        if !(x.abs() < self.b) {
            return (0.0, 0.0, 0.0);
        }
        let s = self.amplitude;
        match self.kind {
            ProfileKind::Sine => {
                let k = std::f64::consts::PI / self.b;
                let (sn, cs) = (k * x).sin_cos();
                (s * sn, s * k * cs, -s * k * k * sn)
            }
            ProfileKind::BumpDerivative => {
                let (_, g1, g2, g3) = bump_derivatives(x / self.b);
                let ib = 1.0 / self.b;
                (s * g1 * ib, s * g2 * ib * ib, s * g3 * ib * ib * ib)
            }
            ProfileKind::Tabulated => {
                let spline = self.spline.as_ref().expect("tabulated profile without spline");
                let (v, d1, d2) = spline.eval(x);
                (s * v, s * d1, s * d2)
            }
        }
    }

    /// `min_x (1 + λ f(x))` over the support.
    pub fn min_width_factor(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 1.0;
        }
        match self.kind {
            ProfileKind::Sine => 1.0 - (lambda * self.amplitude).abs(),
            _ => {
                let n = 20_000;
                let mut m = 1.0f64;
                for i in 0..=n {
                    let x = -self.b + 2.0 * self.b * i as f64 / n as f64;
                    m = m.min(1.0 + lambda * self.value(x));
                }
                m
            }
        }
    }

    /// Fails with [`Error::DegenerateStrip`] unless `1 + λf > 0` everywhere.
    pub fn check_nondegenerate(&self, lambda: f64) -> Result<f64> {
        let m = self.min_width_factor(lambda);
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::DegenerateStrip { min_factor: m })
        }
    }

    /// Norms with the default rule (16-point Gauss-Legendre, 64 panels);
    /// tabulated profiles are integrated knot by knot instead.
    pub fn norms(&self) -> Norms {
        if self.spline.is_some() {
            let (n, w) = gauss_legendre(8);
            let knots = self.breakpoints();
            let by = |g: &dyn Fn(f64, f64) -> f64| {
                integrate_split(-self.b, self.b, &knots, &n, &w, |x| {
                    let (f0, f1, _) = self.derivatives(x);
                    g(f0, f1)
                })
            };
            return Norms {
                normf2: by(&|f0, _| f0 * f0),
                normfp2: by(&|_, f1| f1 * f1),
                mean: by(&|f0, _| f0),
            };
        }
        let q = Quadrature::default_for_support(self.b).expect("b > 0 by construction");
        norms_and_mean(self, &q).expect("default rule covers the support")
    }
}

pub fn evaluate(p: &Profile, x: f64, order: u8) -> Result<f64> {
    Ok(p.evaluate(x, Order::try_from(order)?))
}

pub fn norms_and_mean(p: &Profile, q: &Quadrature) -> Result<Norms> {
    let (lo, hi) = q.interval();
    if !q.covers(-p.b, p.b) {
        return Err(Error::QuadratureCoverage {
            lo,
            hi,
            need_lo: -p.b,
            need_hi: p.b,
        });
    }
    let mut normf2 = 0.0;
    let mut normfp2 = 0.0;
    let mut mean = 0.0;
    for (&x, &w) in q.nodes().iter().zip(q.weights()) {
        let (f0, f1, _) = p.derivatives(x);
        normf2 += w * f0 * f0;
        normfp2 += w * f1 * f1;
        mean += w * f0;
    }
    Ok(Norms { normf2, normfp2, mean })
}

pub fn validate(p: &Profile, lambda: f64) -> ValidationReport {
    let norms = p.norms();
    let mean_tol = ZERO_MEAN_TOL * (1.0f64).max(norms.normf2.sqrt() * 2.0 * p.b);
    let outside = [-3.0 * p.b, -p.b, p.b, 1.5 * p.b];
    let support_contained = outside.iter().all(|&x| {
        let (a, b, c) = p.derivatives(x);
        a == 0.0 && b == 0.0 && c == 0.0
    });
    let edge_scale = p.amplitude.abs();
    let vanishes_at_edges = [-p.b, p.b].iter().all(|&x| {
        let inner = x * (1.0 - 1e-12);
        p.value(x) == 0.0 && p.value(inner).abs() <= 1e-6 * edge_scale
    });
    let min_width_factor = p.min_width_factor(lambda);
    ValidationReport {
        zero_mean: norms.mean.abs() <= mean_tol,
        mean: norms.mean,
        support_contained,
        vanishes_at_edges,
        min_width_factor,
        nondegenerate: min_width_factor > 0.0,
        limited_smoothness: p.limited_smoothness(),
    }
}

/// `g(t) = exp(-1/(1-t²))` and its first three derivatives on `(-1, 1)`.
fn bump_derivatives(t: f64) -> (f64, f64, f64, f64) {
    let q = 1.0 - t * t;
    if q <= 0.0 || 1.0 / q > 700.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let g = (-1.0 / q).exp();
    let q2 = q * q;
    let q3 = q2 * q;
    let q4 = q3 * q;
    let w = -2.0 * t / q2;
    let w1 = -2.0 / q2 - 8.0 * t * t / q3;
    let w2 = -24.0 * t / q3 - 48.0 * t * t * t / q4;
    let g1 = g * w;
    let g2 = g * (w * w + w1);
    let g3 = g * (w * w * w + 3.0 * w * w1 + w2);
    (g, g1, g2, g3)
}

fn parse_table(text: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), (usize, String)> {
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err((i + 1, format!("expected 2 columns, found {}", cols.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| (i + 1, format!("`{s}`: {e}")));
        let x = parse(cols[0])?;
        let f = parse(cols[1])?;
        if let Some(&last) = xs.last() {
            if !(x > last) {
                return Err((i + 1, format!("x = {x} is not greater than the previous {last}")));
            }
        }
        xs.push(x);
        fs.push(f);
    }
    Ok((xs, fs))
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn natural(xs: &[f64], ys: &[f64]) -> Spline {
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Spline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        }
    }

    fn integral(&self) -> f64 {
        self.xs
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let h = w[1] - w[0];
                0.5 * h * (self.ys[i] + self.ys[i + 1]) - h * h * h * (self.m[i] + self.m[i + 1]) / 24.0
            })
            .sum()
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return (0.0, 0.0, 0.0);
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (y0, y1, m0, m1) = (self.ys[i], self.ys[i + 1], self.m[i], self.m[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }
}
