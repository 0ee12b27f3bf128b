//! λ sweeps, power-law fits of the gap, convergence studies and box-size
//! scans for the nonexistence regime.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{Profile, ProfileKind};
use crate::solver::{self, SolverConfig, SpectrumResult};
use crate::theory::{check_conditions, gap_bracket, Geometry};
use crate::variational::best_upper_bound;

/// Relative discretization error above which a row is not used for fitting.
pub const FIT_ERROR_FRACTION: f64 = 0.1;
/// Localization below which a box state counts as delocalized.
pub const DELOCALIZED: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub eigenvalue: f64,
    pub gap: f64,
    /// Gap of the best trial-function quotient.
    pub upper_bound_gap: Option<f64>,
    /// `−c₁λ⁴`.
    pub bracket_lo: Option<f64>,
    /// `−c₂λ⁴`.
    pub bracket_hi: Option<f64>,
    pub is_bound_state: bool,
    pub localization: f64,
    pub residual: f64,
    pub l_used: f64,
    pub l_converged: Option<bool>,
    /// `|gap(h) − gap(2h)| / 3` at the final `L`.
    pub discretization_error: Option<f64>,
    /// Solver failure for this λ, if any.
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(lambda: f64, e: &Error) -> Self {
        Self {
            lambda,
            eigenvalue: f64::NAN,
            gap: f64::NAN,
            upper_bound_gap: None,
            bracket_lo: None,
            bracket_hi: None,
            is_bound_state: false,
            localization: f64::NAN,
            residual: f64::NAN,
            l_used: f64::NAN,
            l_converged: None,
            discretization_error: None,
            error: Some(e.to_string()),
        }
    }

    /// Bound, localized, `L`-converged and resolved to 10% of the gap.
    pub fn usable(&self) -> bool {
        self.error.is_none()
            && self.is_bound_state
            && self.l_converged != Some(false)
            && self
                .discretization_error
                .is_none_or(|e| e < FIT_ERROR_FRACTION * self.gap.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub log_prefactor: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub geometry: Geometry,
    pub profile_kind: ProfileKind,
    pub amplitude: f64,
    pub config: SolverConfig,
    pub rows: Vec<SweepRow>,
    pub fit: Option<PowerFit>,
    /// Whether the gap deepens monotonically with `|λ|` (diagnostic only).
    pub monotone: bool,
}

impl SweepReport {
    pub fn usable_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.usable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub upper_bound: bool,
    pub discretization_check: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            upper_bound: true,
            discretization_check: true,
        }
    }
}

pub fn lambda_sweep(g: &Geometry, p: &Profile, lambdas: &[f64], cfg: &SolverConfig) -> Result<SweepReport> {
    lambda_sweep_with(g, p, lambdas, cfg, SweepOptions::default())
}

/// One adaptive-`L` solve per λ, run concurrently; rows sorted by λ.
pub fn lambda_sweep_with(
    g: &Geometry,
    p: &Profile,
    lambdas: &[f64],
    cfg: &SolverConfig,
    opts: SweepOptions,
) -> Result<SweepReport> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambdas", "sweep needs at least one λ"));
    }
    for &l in lambdas {
        if l == 0.0 || !l.is_finite() {
            return Err(Error::invalid(
                "lambdas",
                format!("λ must be finite and nonzero, got {l}"),
            ));
        }
        p.check_nondegenerate(l)?;
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut local = *cfg;
    local.adapt_l = true;
    let rows: Vec<SweepRow> = sorted
        .par_iter()
        .map(|&lambda| {
            sweep_row(&g.with_lambda(lambda), p, &local, opts).unwrap_or_else(|e| SweepRow::failed(lambda, &e))
        })
        .collect();
    let usable: Vec<(f64, f64)> = rows.iter().filter(|r| r.usable()).map(|r| (r.lambda, r.gap)).collect();
    let fit = fit_power_law_points(&usable).ok();
    let monotone = is_monotone(&rows);
    Ok(SweepReport {
        geometry: *g,
        profile_kind: p.kind(),
        amplitude: p.amplitude(),
        config: *cfg,
        rows,
        fit,
        monotone,
    })
}

fn sweep_row(g: &Geometry, p: &Profile, cfg: &SolverConfig, opts: SweepOptions) -> Result<SweepRow> {
    let r = solver::solve(g, p, cfg)?;
    let lambda = g.lambda;
    let (bracket_lo, bracket_hi) = match gap_bracket(g, p) {
        Ok(br) => {
            let l4 = lambda.powi(4);
            (Some(-br.c1 * l4), Some(-br.c2 * l4))
        }
        Err(_) => (None, None),
    };
    let upper_bound_gap = if opts.upper_bound {
        best_upper_bound(g, p, lambda).ok().map(|u| u.gap)
    } else {
        None
    };
    let discretization_error = if opts.discretization_check {
        coarse_gap(g, p, cfg, &r).map(|c| (r.gap - c).abs() / 3.0)
    } else {
        None
    };
    Ok(SweepRow {
        lambda,
        eigenvalue: r.eigenvalues[0],
        gap: r.gap,
        upper_bound_gap,
        bracket_lo,
        bracket_hi,
        is_bound_state: r.is_bound_state,
        localization: r.localization,
        residual: r.residual,
        l_used: r.l_used,
        l_converged: r.l_converged,
        discretization_error,
        error: None,
    })
}

/// Gap on the same box with twice the spacing.
fn coarse_gap(g: &Geometry, p: &Profile, cfg: &SolverConfig, fine: &SpectrumResult) -> Option<f64> {
    let intervals = (2.0 * fine.l_used / fine.h).round() as usize;
    let coarse = SolverConfig {
        l: fine.l_used,
        nx: intervals / 2,
        adapt_l: false,
        ..*cfg
    };
    solver::solve(g, p, &coarse).ok().map(|r| r.gap)
}

fn is_monotone(rows: &[SweepRow]) -> bool {
    let mut by_size: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| (r.lambda.abs(), r.gap))
        .collect();
    by_size.sort_by(|a, b| a.0.total_cmp(&b.0));
    by_size.windows(2).all(|w| w[1].1 <= w[0].1 || w[1].0 == w[0].0)
}

/// Least-squares fit of `log(−gap)` against `log|λ|` over the usable rows.
pub fn fit_power_law(report: &SweepReport) -> Result<PowerFit> {
    let points: Vec<(f64, f64)> = report.usable_rows().map(|r| (r.lambda, r.gap)).collect();
    fit_power_law_points(&points)
}

/// Fit `−gap = C|λ|^p`; needs three points spanning a factor of three in `|λ|`.
pub fn fit_power_law_points(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable rows, need 3", points.len())));
    }
    if let Some(&(l, g)) = points.iter().find(|(_, g)| !(*g < 0.0)) {
        return Err(Error::InsufficientData(format!("non-negative gap {g} at λ = {l}")));
    }
    let (lo, hi) = points
        .iter()
        .map(|(l, _)| l.abs())
        .fold((f64::INFINITY, 0.0f64), |(a, b), l| (a.min(l), b.max(l)));
    if hi < 3.0 * lo {
        return Err(Error::InsufficientData(format!(
            "λ range [{lo}, {hi}] spans less than a factor 3"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(l, _)| l.abs().ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, g)| (-g).ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(PowerFit {
        exponent: slope,
        prefactor: intercept.exp(),
        log_prefactor: intercept,
        r2,
        points: points.len(),
    })
}

/// Ordinary least squares `y = slope·x + intercept` and `r²`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knob {
    /// Halve the grid spacing.
    H,
    /// Double the box half-length.
    L,
    /// Add two transverse modes.
    N,
}

impl FromStr for Knob {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Knob::H),
            "L" | "l" => Ok(Knob::L),
            "N" | "n" => Ok(Knob::N),
            other => Err(Error::invalid(
                "knob",
                format!("unknown knob `{other}` (expected h, L or N)"),
            )),
        }
    }
}

impl fmt::Display for Knob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Knob::H => "h",
            Knob::L => "L",
            Knob::N => "N",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Knob value (`h`, `L` or `N`).
    pub value: f64,
    pub eigenvalue: f64,
    pub gap: f64,
    /// Change from the previous level.
    pub delta: Option<f64>,
    pub is_bound_state: bool,
    pub localization: f64,
    pub residual: f64,
    pub l_used: f64,
    /// `log₂(|δ_{k−1}| / |δ_k|)` for `h`; ratio `|δ_{k−1}| / |δ_k|` otherwise.
    pub observed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub knob: Knob,
    pub lambda: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Last observed order (or ratio).
    pub fn observed(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.observed)
    }

    /// Richardson value from the last two levels for a second-order knob.
    pub fn richardson(&self) -> Option<f64> {
        let n = self.rows.len();
        (n >= 2).then(|| (4.0 * self.rows[n - 1].eigenvalue - self.rows[n - 2].eigenvalue) / 3.0)
    }
}

/// Refine one knob over `levels ≥ 3` levels starting from `cfg` at fixed `L`
/// (no adaptation); levels run concurrently.
pub fn convergence_study(
    g: &Geometry,
    p: &Profile,
    cfg: &SolverConfig,
    knob: Knob,
    levels: usize,
) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::invalid("levels", "need at least 3 levels"));
    }
    let configs: Vec<SolverConfig> = (0..levels)
        .map(|k| {
            let mut c = SolverConfig { adapt_l: false, ..*cfg };
            match knob {
                Knob::H => c.nx = cfg.nx << k,
                Knob::L => {
                    c.l = cfg.l * (1u64 << k) as f64;
                    c.nx = cfg.nx << k;
                }
                Knob::N => c.n_modes = cfg.n_modes + 2 * k,
            }
            c
        })
        .collect();
    for c in &configs {
        let grid = solver::Grid::aligned(c.l, c.spacing(), p.b())?;
        let unknowns = (grid.intervals() - 1) * c.n_modes;
        if unknowns > c.max_unknowns {
            return Err(Error::TooLarge {
                unknowns,
                cap: c.max_unknowns,
            });
        }
    }
    let results = configs
        .par_iter()
        .map(|c| solver::solve(g, p, c))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for (k, (c, r)) in configs.iter().zip(&results).enumerate() {
        let value = match knob {
            Knob::H => r.h,
            Knob::L => r.l_used,
            Knob::N => c.n_modes as f64,
        };
        let delta = (k > 0).then(|| r.eigenvalues[0] - rows[k - 1].eigenvalue);
        let observed = match (k > 1, delta, rows.last().and_then(|row| row.delta)) {
            (true, Some(d), Some(prev)) => {
                let ratio = prev.abs() / d.abs();
                Some(if knob == Knob::H { ratio.log2() } else { ratio })
            }
            _ => None,
        };
        rows.push(ConvergenceRow {
            value,
            eigenvalue: r.eigenvalues[0],
            gap: r.gap,
            delta,
            is_bound_state: r.is_bound_state,
            localization: r.localization,
            residual: r.residual,
            l_used: r.l_used,
            observed,
        });
    }
    Ok(ConvergenceTable {
        knob,
        lambda: g.lambda,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub l: f64,
    pub eigenvalue: f64,
    pub gap: f64,
    pub localization: f64,
    pub residual: f64,
    pub is_bound_state: bool,
    pub box_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub geometry: Geometry,
    pub rows: Vec<ScanRow>,
    /// Exponent `q` of `gap_L ~ L^q`, when all gaps are positive.
    pub exponent: Option<f64>,
    /// Box half-lengths at which a sub-threshold or localized state appeared.
    pub violations: Vec<f64>,
    /// `"OK"` or `"VIOLATION"`.
    pub verdict: String,
}

/// Lowest eigenvalue against box size at fixed spacing.
pub fn nonexistence_scan(g: &Geometry, p: &Profile, cfg: &SolverConfig, ls: &[f64]) -> Result<NonexistenceReport> {
    let conditions = check_conditions(g, p)?;
    if !conditions.nonexistence_applies() {
        return Err(Error::Unavailable {
            what: "nonexistence scan",
            reason: "the nonexistence hypothesis does not hold for this geometry".into(),
        });
    }
    if ls.is_empty() {
        return Err(Error::invalid("Ls", "need at least one box length"));
    }
    let h = cfg.spacing();
    let results = ls
        .par_iter()
        .map(|&l| {
            let c = SolverConfig {
                l,
                nx: (2.0 * l / h).round() as usize,
                adapt_l: false,
                ..*cfg
            };
            solver::solve(g, p, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ScanRow> = results
        .iter()
        .map(|r| ScanRow {
            l: r.l_used,
            eigenvalue: r.eigenvalues[0],
            gap: r.gap,
            localization: r.localization,
            residual: r.residual,
            is_bound_state: r.is_bound_state,
            box_level: r.box_artifacts,
        })
        .collect();
    let violations: Vec<f64> = rows
        .iter()
        .filter(|r| !(r.gap > 0.0) || r.localization >= DELOCALIZED)
        .map(|r| r.l)
        .collect();
    let exponent = if rows.len() >= 2 && rows.iter().all(|r| r.gap > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.l.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.gap.ln()).collect();
        Some(linear_fit(&xs, &ys).0)
    } else {
        None
    };
    Ok(NonexistenceReport {
        geometry: *g,
        rows,
        exponent,
        verdict: if violations.is_empty() { "OK" } else { "VIOLATION" }.into(),
        violations,
    })
}

/// `n` geometrically spaced values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = hi / lo;
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => lo * ratio.powf(i as f64 / (n - 1) as f64),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::make_profile;

    #[test]
    fn exact_power_laws_are_recovered() {
        let lams = geometric_grid(0.02, 0.1, 5);
        let quartic: Vec<(f64, f64)> = lams.iter().map(|&l| (l, -7.0 * l.powi(4))).collect();
        let fit = fit_power_law_points(&quartic).unwrap();
        assert!((fit.exponent - 4.0).abs() < 1e-12);
        assert!((fit.prefactor - 7.0).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let quadratic: Vec<(f64, f64)> = lams.iter().map(|&l| (l, -7.0 * l * l)).collect();
        assert!((fit_power_law_points(&quadratic).unwrap().exponent - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        assert!(fit_power_law_points(&[(0.1, -1.0), (0.2, -2.0)]).is_err());
        assert!(fit_power_law_points(&[(0.1, -1.0), (0.15, -2.0), (0.2, -3.0)]).is_err());
        assert!(fit_power_law_points(&[(0.1, -1.0), (0.2, 0.0), (0.4, -3.0)]).is_err());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(0.02, 0.1, 5);
        assert_eq!(g[0], 0.02);
        assert_eq!(g[4], 0.1);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - 5f64.powf(0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn knobs_parse() {
        assert_eq!("h".parse::<Knob>().unwrap(), Knob::H);
        assert_eq!("L".parse::<Knob>().unwrap(), Knob::L);
        assert_eq!("N".parse::<Knob>().unwrap(), Knob::N);
        assert!("x".parse::<Knob>().is_err());
    }

    #[test]
    fn sweep_rejects_zero_lambda() {
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let p = make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap();
        let cfg = SolverConfig::defaults_for(&g);
        assert!(lambda_sweep(&g, &p, &[0.0, 0.1], &cfg).is_err());
        assert!(lambda_sweep(&g, &p, &[], &cfg).is_err());
        assert!(lambda_sweep(&g, &p, &[1.5], &cfg).is_err());
    }

    #[test]
    fn usable_filter() {
        let mut row = SweepRow::failed(0.1, &Error::ZeroProfile);
        assert!(!row.usable());
        row.error = None;
        row.gap = -1.0;
        row.is_bound_state = true;
        row.l_converged = Some(true);
        row.discretization_error = Some(0.05);
        assert!(row.usable());
        row.discretization_error = Some(0.2);
        assert!(!row.usable());
        row.discretization_error = None;
        row.l_converged = Some(false);
        assert!(!row.usable());
    }
}
