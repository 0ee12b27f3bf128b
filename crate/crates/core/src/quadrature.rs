//! Composite quadrature rules on finite intervals.
//!
//! Gauss-Legendre nodes are computed by Newton iteration on the Legendre
//! three-term recurrence, which is accurate to a few ulps for the rule sizes
//! used here (≤ 64 points).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    GaussLegendre { points: usize },
    Trapezoid,
}

/// Nodes and weights of a composite rule on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    rule: Rule,
    panels: usize,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1, "Gauss-Legendre rule needs at least one point");
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess for the i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl Quadrature {
    pub fn gauss_legendre(lo: f64, hi: f64, points: usize, panels: usize) -> Result<Self> {
        check_interval(lo, hi, panels)?;
        if points == 0 {
            return Err(Error::invalid("points", "must be positive"));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(points);
        let mut nodes = Vec::with_capacity(points * panels);
        let mut weights = Vec::with_capacity(points * panels);
        for p in 0..panels {
            let a = panel_edge(lo, hi, panels, p);
            let b = panel_edge(lo, hi, panels, p + 1);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (t, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * t);
                weights.push(half * w);
            }
        }
        Ok(Self {
            rule: Rule::GaussLegendre { points },
            panels,
            lo,
            hi,
            nodes,
            weights,
        })
    }

    pub fn trapezoid(lo: f64, hi: f64, panels: usize) -> Result<Self> {
        check_interval(lo, hi, panels)?;
        let h = (hi - lo) / panels as f64;
        let nodes: Vec<f64> = (0..=panels).map(|i| panel_edge(lo, hi, panels, i)).collect();
        let mut weights = vec![h; panels + 1];
        weights[0] = 0.5 * h;
        weights[panels] = 0.5 * h;
        Ok(Self {
            rule: Rule::Trapezoid,
            panels,
            lo,
            hi,
            nodes,
            weights,
        })
    }

    /// 16-point Gauss-Legendre on 64 panels over `[-b, b]`.
    pub fn default_for_support(b: f64) -> Result<Self> {
        Self::gauss_legendre(-b, b, 16, 64)
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest polynomial degree integrated exactly on each panel.
    pub fn exactness_degree(&self) -> usize {
        match self.rule {
            Rule::GaussLegendre { points } => 2 * points - 1,
            Rule::Trapezoid => 1,
        }
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.lo <= lo && self.hi >= hi
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Panel edges are computed from the endpoints directly so that a rule on a
/// symmetric interval has exactly mirrored nodes.
fn panel_edge(lo: f64, hi: f64, panels: usize, i: usize) -> f64 {
    if i == 0 {
        lo
    } else if i == panels {
        hi
    } else {
        let t = i as f64 / panels as f64;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        mid + half * (2.0 * t - 1.0)
    }
}

fn check_interval(lo: f64, hi: f64, panels: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(
            "interval",
            format!("[{lo}, {hi}] is empty or not finite"),
        ));
    }
    if panels == 0 {
        return Err(Error::invalid("panels", "must be positive"));
    }
    Ok(())
}

/// Integrate `f` over `[lo, hi]` with a fixed Gauss rule on every piece between
/// consecutive breakpoints that fall inside the interval.
pub(crate) fn integrate_split(
    lo: f64,
    hi: f64,
    breaks: &[f64],
    nodes: &[f64],
    weights: &[f64],
    f: impl Fn(f64) -> f64,
) -> f64 {
    let mut total = 0.0;
    let mut a = lo;
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.push(hi);
    for b in inner {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut s = 0.0;
        for (t, w) in nodes.iter().zip(weights) {
            s += w * f(mid + half * t);
        }
        total += half * s;
        a = b;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_positive_and_sum_to_length() {
        for points in [1, 2, 5, 16, 33] {
            let q = Quadrature::gauss_legendre(-1.5, 2.0, points, 7).unwrap();
            assert!(q.weights().iter().all(|&w| w > 0.0));
            let total: f64 = q.weights().iter().sum();
            assert!((total - 3.5).abs() < 1e-13);
        }
        let t = Quadrature::trapezoid(0.0, 1.0, 10).unwrap();
        assert!(t.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn exact_for_polynomials_up_to_degree() {
        let q = Quadrature::gauss_legendre(-1.0, 3.0, 16, 4).unwrap();
        let deg = q.exactness_degree() as i32;
        assert_eq!(deg, 31);
        for k in [0, 5, 17, 31] {
            let exact = (3f64.powi(k + 1) - (-1f64).powi(k + 1)) / (k + 1) as f64;
            let got = q.integrate(|x| x.powi(k));
            assert!(((got - exact) / exact).abs() < 1e-13, "degree {k}: {got} vs {exact}");
        }
        let t = Quadrature::trapezoid(0.0, 2.0, 3).unwrap();
        assert!((t.integrate(|x| 3.0 * x + 1.0) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_interval_has_mirrored_nodes() {
        let q = Quadrature::gauss_legendre(-2.5, 2.5, 16, 64).unwrap();
        let n = q.nodes().len();
        for i in 0..n {
            assert_eq!(q.nodes()[i], -q.nodes()[n - 1 - i]);
            assert_eq!(q.weights()[i], q.weights()[n - 1 - i]);
        }
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(Quadrature::gauss_legendre(1.0, 1.0, 4, 2).is_err());
        assert!(Quadrature::trapezoid(0.0, 1.0, 0).is_err());
        assert!(Quadrature::gauss_legendre(0.0, f64::NAN, 4, 2).is_err());
    }

    #[test]
    fn split_integration_handles_kink() {
        let (n, w) = gauss_legendre(8);
        let got = integrate_split(-1.0, 2.0, &[0.3], &n, &w, |x: f64| (x - 0.3).abs());
        let exact = 0.5 * 1.3 * 1.3 + 0.5 * 1.7 * 1.7;
        assert!((got - exact).abs() < 1e-14);
    }
}
