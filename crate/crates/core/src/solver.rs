//! Lowest eigenvalues of the Dirichlet Laplacian on the deformed strip.
//!
//! The mapped Dirichlet form is discretized with transverse sine modes in `v`
//! and second-order differences on a uniform grid in `x`, which gives a
//! symmetric block-tridiagonal pencil `A c = ε B c` with diagonal `B`. A
//! five-point stair-step solver on the physical domain serves as an
//! independent check.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{ElementKind, ModeBasis};
use crate::linalg::{lowest_eigenpairs, BlockTridiag, EigenOptions};
use crate::profiles::Profile;
use crate::quadrature::{gauss_legendre, integrate_split};
use crate::theory::Geometry;

pub const DEFAULT_MAX_UNKNOWNS: usize = 200_000;
pub const DEFAULT_MODES: usize = 10;
/// Default grid spacing in units of the strip width.
pub const DEFAULT_POINTS_PER_WIDTH: f64 = 40.0;
/// Localization window is `|x| ≤ b + LOCALIZATION_MARGIN·a`.
pub const LOCALIZATION_MARGIN: f64 = 2.0;
pub const BOUND_STATE_LOCALIZATION: f64 = 0.9;
const MAX_DOUBLINGS: usize = 8;
const CELL_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ModeGalerkin,
    FdStairstep,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mode-galerkin" => Ok(Backend::ModeGalerkin),
            "fd-stairstep" => Ok(Backend::FdStairstep),
            other => Err(Error::invalid(
                "backend",
                format!("unknown backend `{other}` (expected mode-galerkin or fd-stairstep)"),
            )),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::ModeGalerkin => "mode-galerkin",
            Backend::FdStairstep => "fd-stairstep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Half-length of the truncated strip.
    pub l: f64,
    /// Grid intervals on `[-L, L]`; the spacing `2L/nx` is kept when `L` adapts.
    pub nx: usize,
    /// Transverse modes (mode-Galerkin) or points across the width (FD).
    pub n_modes: usize,
    pub eig_tol: f64,
    pub max_iter: usize,
    pub backend: Backend,
    pub adapt_l: bool,
    /// Number of eigenpairs.
    pub k: usize,
    pub max_unknowns: usize,
}

impl SolverConfig {
    /// `L = b + 10a`, spacing at most `a/40`, 10 modes.
    pub fn defaults_for(g: &Geometry) -> Self {
        let l = g.b + 10.0 * g.a;
        let h = g.a / DEFAULT_POINTS_PER_WIDTH;
        Self {
            l,
            nx: (2.0 * l / h).ceil() as usize,
            n_modes: DEFAULT_MODES,
            eig_tol: 1e-8,
            max_iter: 500,
            backend: Backend::ModeGalerkin,
            adapt_l: false,
            k: 1,
            max_unknowns: DEFAULT_MAX_UNKNOWNS,
        }
    }

    pub fn validate(&self, g: &Geometry) -> Result<()> {
        if !(self.l.is_finite() && self.l > g.b) {
            return Err(Error::invalid("L", format!("must exceed b = {}, got {}", g.b, self.l)));
        }
        if self.nx < 16 {
            return Err(Error::invalid(
                "nx",
                format!("need at least 16 intervals, got {}", self.nx),
            ));
        }
        if self.n_modes < 2 {
            return Err(Error::invalid(
                "N",
                format!("need at least 2 modes, got {}", self.n_modes),
            ));
        }
        if !(self.eig_tol > 0.0) {
            return Err(Error::invalid("eig_tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be positive"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k", "need at least one eigenvalue"));
        }
        Ok(())
    }

    /// Nominal spacing `2L/nx`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.nx as f64
    }
}

/// Uniform grid `x_i = (i − M)h`, `i = 0..=2M`, with `b` on a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    /// Half the number of intervals.
    pub half: usize,
}

impl Grid {
    /// Largest spacing `≤ h_max` that puts `±b` on nodes; `L` rounded up.
    pub fn aligned(l: f64, h_max: f64, b: f64) -> Result<Self> {
        if !(h_max > 0.0 && l > 0.0) {
            return Err(Error::invalid("nx", "grid spacing must be positive"));
        }
        let per_b = (b / h_max - 1e-9).ceil().max(1.0);
        let h = b / per_b;
        let half = (l / h - 1e-9).ceil() as usize;
        Ok(Self { h, half })
    }

    pub fn l(&self) -> f64 {
        self.half as f64 * self.h
    }

    pub fn intervals(&self) -> usize {
        2 * self.half
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    /// Interior nodes, excluding `±L`.
    pub fn interior(&self) -> Vec<f64> {
        (1..self.intervals()).map(|i| self.node(i)).collect()
    }
}

/// Assembled pencil with its grid.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub a: BlockTridiag,
    /// Diagonal of `B`.
    pub mass: DVector<f64>,
    pub grid: Grid,
    pub n_modes: usize,
    pub backend: Backend,
}

impl DiscreteSystem {
    pub fn unknowns(&self) -> usize {
        self.mass.len()
    }

    /// `cᵀAc` for coefficients ordered node-major.
    pub fn energy(&self, c: &DVector<f64>) -> f64 {
        let m = DMatrix::from_column_slice(c.len(), 1, c.as_slice());
        (m.transpose() * self.a.mul(&m))[(0, 0)]
    }

    /// `cᵀBc`.
    pub fn norm2(&self, c: &DVector<f64>) -> f64 {
        c.iter().zip(self.mass.iter()).map(|(x, b)| x * x * b).sum()
    }
}

/// Mode-Galerkin pencil for the mapped form on `[-L, L] × [0, a]`.
pub fn assemble(g: &Geometry, p: &Profile, cfg: &SolverConfig) -> Result<DiscreteSystem> {
    cfg.validate(g)?;
    check_profile(g, p)?;
    p.check_nondegenerate(g.lambda)?;
    let grid = Grid::aligned(cfg.l, cfg.spacing(), p.b())?;
    let n = cfg.n_modes;
    let unknowns = (grid.intervals() - 1) * n;
    if unknowns > cfg.max_unknowns {
        return Err(Error::TooLarge {
            unknowns,
            cap: cfg.max_unknowns,
        });
    }
    let basis = ModeBasis::new(g.a, n)?;
    let lambda = g.lambda;
    let h = grid.h;

    // ∫ v χₘ χₙ′ = ydchi(n, m)
    let t = basis.table(ElementKind::YDChi).transpose();
    let t_sym = (&t + t.transpose()) * 0.5;
    let t_anti = (&t - t.transpose()) * 0.5;
    let y2 = basis.table(ElementKind::Y2GradGrad);
    let eig = DVector::from_fn(n, |i, _| basis.eigenvalue(i + 1));

    let (qn, qw) = gauss_legendre(CELL_POINTS);
    let breaks = p.breakpoints();
    let integral = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| integrate_split(lo, hi, &breaks, &qn, &qw, f);
    let width = |x: f64| 1.0 + lambda * p.value(x);

    let interior = grid.intervals() - 1;
    let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(interior);
    let mut mass = DVector::zeros(interior * n);
    for k in 0..interior {
        let x = grid.node(k + 1);
        let (lo, hi) = (x - 0.5 * h, x + 0.5 * h);
        let inv_s = integral(lo, hi, &|x| 1.0 / width(x));
        let slope = integral(lo, hi, &|x| {
            let d = lambda * p.first(x);
            d * d / width(x)
        });
        let mut block = y2 * slope;
        for j in 0..n {
            block[(j, j)] += inv_s * eig[j];
        }
        diag.push(block);
        let m = integral(lo, hi, &width);
        for j in 0..n {
            mass[k * n + j] = m;
        }
    }
    let mut sub = vec![DMatrix::zeros(n, n); interior.saturating_sub(1)];
    for c in 0..grid.intervals() {
        let (x0, x1) = (grid.node(c), grid.node(c + 1));
        let kin = integral(x0, x1, &width) / (h * h);
        let cross = lambda * (p.value(x1) - p.value(x0)) / h;
        // cell c couples interior blocks c-1 (left) and c (right)
        let left = c.checked_sub(1);
        let right = (c < interior).then_some(c);
        if let Some(i) = left {
            for j in 0..n {
                diag[i][(j, j)] += kin;
            }
            diag[i] += &t_sym * cross;
        }
        if let Some(i) = right {
            for j in 0..n {
                diag[i][(j, j)] += kin;
            }
            diag[i] -= &t_sym * cross;
        }
        if let (Some(i), Some(_)) = (left, right) {
            for j in 0..n {
                sub[i][(j, j)] -= kin;
            }
            sub[i] -= &t_anti * cross;
        }
    }
    Ok(DiscreteSystem {
        a: BlockTridiag::new(diag, sub)?,
        mass,
        grid,
        n_modes: n,
        backend: Backend::ModeGalerkin,
    })
}

fn check_profile(g: &Geometry, p: &Profile) -> Result<()> {
    if p.b() > g.b * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "b",
            format!("profile support half-width {} exceeds geometry b = {}", p.b(), g.b),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub threshold: f64,
    /// Lowest eigenvalue minus `(π/a)²`.
    pub gap: f64,
    pub localization: f64,
    /// Largest `‖Ac − εBc‖/‖Bc‖` over the reported pairs.
    pub residual: f64,
    pub is_bound_state: bool,
    /// Lowest box level above threshold, `(π/2L)²`.
    pub box_artifacts: f64,
    pub l_used: f64,
    pub h: f64,
    pub n_modes: usize,
    pub iterations: usize,
    /// Whether the `L` adaptation met its tolerance; `None` for a fixed `L`.
    pub l_converged: Option<bool>,
    /// Lowest eigenvector, `eigenvector[(i, n)]` at interior node `i`, mode `n`.
    #[serde(skip)]
    pub eigenvector: DMatrix<f64>,
    #[serde(skip)]
    pub x_nodes: Vec<f64>,
    /// `B` weight of each interior node.
    #[serde(skip)]
    pub node_mass: Vec<f64>,
}

/// Lowest `cfg.k` eigenpairs of an assembled pencil, classified against the
/// threshold.
pub fn solve_ground(sys: &DiscreteSystem, g: &Geometry, cfg: &SolverConfig) -> Result<SpectrumResult> {
    let opts = EigenOptions {
        k: cfg.k,
        tol: cfg.eig_tol,
        max_iter: cfg.max_iter,
        ..Default::default()
    };
    let pairs = lowest_eigenpairs(&sys.a, &sys.mass, opts)?;
    let per_node = sys.a.diag()[0].nrows();
    let nodes = sys.unknowns() / per_node;
    let v = pairs.vectors.column(0);
    let eigenvector = DMatrix::from_fn(nodes, per_node, |i, j| v[i * per_node + j]);
    let node_mass: Vec<f64> = (0..nodes).map(|i| sys.mass[i * per_node]).collect();
    let x_nodes: Vec<f64> = (1..=nodes).map(|i| sys.grid.node(i)).collect();
    let threshold = g.threshold();
    let l_used = sys.grid.l();
    let mut result = SpectrumResult {
        gap: pairs.values[0] - threshold,
        eigenvalues: pairs.values,
        threshold,
        localization: 0.0,
        residual: pairs.residuals.iter().copied().fold(0.0, f64::max),
        is_bound_state: false,
        box_artifacts: (PI / (2.0 * l_used)).powi(2),
        l_used,
        h: sys.grid.h,
        n_modes: sys.n_modes,
        iterations: pairs.iterations,
        l_converged: None,
        eigenvector,
        x_nodes,
        node_mass,
    };
    result.localization = localization_metric(&result, g);
    result.is_bound_state = classify(&result, cfg.eig_tol);
    Ok(result)
}

fn classify(r: &SpectrumResult, eig_tol: f64) -> bool {
    r.gap < -(2.0 * r.box_artifacts).max(10.0 * eig_tol) && r.localization >= BOUND_STATE_LOCALIZATION
}

/// Fraction of the eigenvector's `B`-mass in `|x| ≤ b + 2a`.
pub fn localization_metric(r: &SpectrumResult, g: &Geometry) -> f64 {
    localization_in_window(r, g.b + LOCALIZATION_MARGIN * g.a)
}

/// Fraction of the eigenvector's `B`-mass in `|x| ≤ window`.
pub fn localization_in_window(r: &SpectrumResult, window: f64) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for (i, (&x, &m)) in r.x_nodes.iter().zip(&r.node_mass).enumerate() {
        let w = m * r.eigenvector.row(i).norm_squared();
        total += w;
        if x.abs() <= window * (1.0 + 1e-12) {
            inside += w;
        }
    }
    if total > 0.0 {
        (inside / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Assemble and solve at the configured `L`, or adapt `L` when requested.
pub fn solve(g: &Geometry, p: &Profile, cfg: &SolverConfig) -> Result<SpectrumResult> {
    match cfg.backend {
        Backend::ModeGalerkin if cfg.adapt_l => adapt_l(g, p, cfg),
        Backend::ModeGalerkin => {
            let sys = assemble(g, p, cfg)?;
            solve_ground(&sys, g, cfg)
        }
        Backend::FdStairstep => {
            let h = cfg.spacing();
            let grid = FdGrid {
                hx: h,
                hy: g.a / cfg.n_modes.max(20) as f64,
                l: cfg.l,
            };
            let value = fd_oracle_solve(g, p, grid)?;
            let threshold = g.threshold();
            Ok(SpectrumResult {
                eigenvalues: vec![value],
                threshold,
                gap: value - threshold,
                localization: f64::NAN,
                residual: f64::NAN,
                is_bound_state: false,
                box_artifacts: (PI / (2.0 * cfg.l)).powi(2),
                l_used: cfg.l,
                h,
                n_modes: 0,
                iterations: 0,
                l_converged: None,
                eigenvector: DMatrix::zeros(0, 0),
                x_nodes: Vec::new(),
                node_mass: Vec::new(),
            })
        }
    }
}

/// Double `L` from `b + 10a` at fixed spacing until
/// `|Δgap| < max(1e-4·|gap|, eig_tol)`.
///
/// When the unknown cap stops the doubling, the last result is returned with
/// `l_converged = Some(false)`.
pub fn adapt_l(g: &Geometry, p: &Profile, cfg: &SolverConfig) -> Result<SpectrumResult> {
    let h = cfg.spacing();
    let mut local = *cfg;
    local.l = g.b + 10.0 * g.a;
    local.nx = ((2.0 * local.l / h) - 1e-9).ceil() as usize;
    let mut prev = solve_ground(&assemble(g, p, &local)?, g, &local)?;
    for _ in 0..MAX_DOUBLINGS {
        local.l *= 2.0;
        local.nx *= 2;
        let sys = match assemble(g, p, &local) {
            Ok(sys) => sys,
            Err(Error::TooLarge { .. }) => break,
            Err(e) => return Err(e),
        };
        let mut next = solve_ground(&sys, g, &local)?;
        let change = (next.gap - prev.gap).abs();
        if change < (1e-4 * next.gap.abs()).max(cfg.eig_tol) {
            next.l_converged = Some(true);
            return Ok(next);
        }
        prev = next;
    }
    prev.l_converged = Some(false);
    Ok(prev)
}

/// Grid of the stair-step oracle on `[-L, L] × (0, a(1+λf))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub hx: f64,
    pub hy: f64,
    pub l: f64,
}

impl FdGrid {
    pub fn halved(&self) -> Self {
        Self {
            hx: 0.5 * self.hx,
            hy: 0.5 * self.hy,
            l: self.l,
        }
    }
}

/// Five-point Laplacian on the physical domain; grid points with
/// `y ≥ a(1 + λf(x))` are treated as outside (Dirichlet).
pub fn fd_oracle_solve(g: &Geometry, p: &Profile, grid: FdGrid) -> Result<f64> {
    check_profile(g, p)?;
    p.check_nondegenerate(g.lambda)?;
    if !(grid.hx > 0.0 && grid.hy > 0.0) {
        return Err(Error::invalid("grid", "spacings must be positive"));
    }
    if g.a / grid.hy < 20.0 - 1e-9 {
        return Err(Error::invalid(
            "grid",
            format!("need at least 20 points across a, got {:.1}", g.a / grid.hy),
        ));
    }
    if g.b / grid.hx < 10.0 - 1e-9 {
        return Err(Error::invalid(
            "grid",
            format!("need at least 10 points across b, got {:.1}", g.b / grid.hx),
        ));
    }
    if !(grid.l > g.b) {
        return Err(Error::invalid("L", "must exceed b"));
    }
    let half = (grid.l / grid.hx).round() as usize;
    let cols = 2 * half - 1;
    let (ix2, iy2) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    let heights: Vec<usize> = (1..=cols)
        .map(|i| {
            let x = (i as f64 - half as f64) * grid.hx;
            let top = g.a * (1.0 + g.lambda * p.value(x));
            // interior points j·hy < top
            ((top / grid.hy) - 1e-12).ceil() as usize - 1
        })
        .collect();
    let unknowns: usize = heights.iter().sum();
    if unknowns > 4 * DEFAULT_MAX_UNKNOWNS {
        return Err(Error::TooLarge {
            unknowns,
            cap: 4 * DEFAULT_MAX_UNKNOWNS,
        });
    }
    let diag = heights
        .iter()
        .map(|&n| {
            DMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    2.0 * ix2 + 2.0 * iy2
                } else if r.abs_diff(c) == 1 {
                    -iy2
                } else {
                    0.0
                }
            })
        })
        .collect();
    let sub = heights
        .windows(2)
        .map(|w| DMatrix::from_fn(w[1], w[0], |r, c| if r == c { -ix2 } else { 0.0 }))
        .collect();
    let a = BlockTridiag::new(diag, sub)?;
    let mass = DVector::from_element(unknowns, 1.0);
    let opts = EigenOptions {
        tol: 1e-9,
        ..Default::default()
    };
    Ok(lowest_eigenpairs(&a, &mass, opts)?.values[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub coarse: f64,
    pub fine: f64,
    /// First-order Richardson value `2ε(h/2) − ε(h)`.
    pub extrapolated: f64,
}

pub fn fd_oracle_extrapolated(g: &Geometry, p: &Profile, grid: FdGrid) -> Result<FdEstimate> {
    let coarse = fd_oracle_solve(g, p, grid)?;
    let fine = fd_oracle_solve(g, p, grid.halved())?;
    Ok(FdEstimate {
        coarse,
        fine,
        extrapolated: 2.0 * fine - coarse,
    })
}

/// Write `A` and `B` as MatrixMarket coordinate files `<prefix>_A.mtx` and
/// `<prefix>_B.mtx` (1-based, all nonzeros).
pub fn dump_matrices(sys: &DiscreteSystem, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "matrices".into());
    let a_path = prefix.with_file_name(format!("{name}_A.mtx"));
    let b_path = prefix.with_file_name(format!("{name}_B.mtx"));

    let mut entries = Vec::new();
    let offsets = sys.a.offsets();
    for (i, d) in sys.a.diag().iter().enumerate() {
        let o = offsets[i];
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                if d[(r, c)] != 0.0 {
                    entries.push((o + r, o + c, d[(r, c)]));
                }
            }
        }
        if let Some(s) = sys.a.sub().get(i) {
            let on = offsets[i + 1];
            for r in 0..s.nrows() {
                for c in 0..s.ncols() {
                    if s[(r, c)] != 0.0 {
                        entries.push((on + r, o + c, s[(r, c)]));
                        entries.push((o + c, on + r, s[(r, c)]));
                    }
                }
            }
        }
    }
    entries.sort_by_key(|&(r, c, _)| (c, r));
    write_mtx(&a_path, sys.unknowns(), &entries)?;
    let diag: Vec<_> = sys.mass.iter().enumerate().map(|(i, &m)| (i, i, m)).collect();
    write_mtx(&b_path, sys.unknowns(), &diag)?;
    Ok((a_path, b_path))
}

fn write_mtx(path: &Path, n: usize, entries: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{n} {n} {}", entries.len())?;
    for &(r, c, v) in entries {
        writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_profile, ProfileKind};

    fn sine(b: f64) -> Profile {
        make_profile(ProfileKind::Sine, b, 1.0).unwrap()
    }

    fn small_cfg(g: &Geometry, l: f64, h: f64, n: usize) -> SolverConfig {
        SolverConfig {
            l,
            nx: (2.0 * l / h).round() as usize,
            n_modes: n,
            ..SolverConfig::defaults_for(g)
        }
    }

    #[test]
    fn grid_is_aligned_and_symmetric() {
        let grid = Grid::aligned(12.5, 0.03, 2.5).unwrap();
        assert!(grid.h <= 0.03);
        let nodes: Vec<f64> = (0..=grid.intervals()).map(|i| grid.node(i)).collect();
        assert!(nodes.iter().any(|&x| (x - 2.5).abs() < 1e-12));
        for i in 0..nodes.len() {
            assert_eq!(nodes[i], -nodes[nodes.len() - 1 - i]);
        }
        assert!(grid.l() >= 12.5 - 1e-9);
    }

    #[test]
    fn config_validation() {
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let ok = SolverConfig::defaults_for(&g);
        assert!(ok.validate(&g).is_ok());
        assert!(SolverConfig { l: 2.0, ..ok }.validate(&g).is_err());
        assert!(SolverConfig { nx: 8, ..ok }.validate(&g).is_err());
        assert!(SolverConfig { n_modes: 1, ..ok }.validate(&g).is_err());
        assert!(SolverConfig { eig_tol: 0.0, ..ok }.validate(&g).is_err());
    }

    #[test]
    fn zero_lambda_decouples_modes() {
        let g = Geometry::new(1.0, 2.5, 0.0).unwrap();
        let cfg = small_cfg(&g, 5.0, 0.1, 4);
        let sys = assemble(&g, &sine(2.5), &cfg).unwrap();
        for d in sys.a.diag() {
            for r in 0..4 {
                for c in 0..4 {
                    if r != c {
                        assert_eq!(d[(r, c)], 0.0);
                    }
                }
            }
        }
        for s in sys.a.sub() {
            assert_eq!(s.clone() - DMatrix::from_diagonal(&s.diagonal()), DMatrix::zeros(4, 4));
        }
    }

    #[test]
    fn assembly_is_exactly_symmetric() {
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let sys = assemble(&g, &sine(2.5), &small_cfg(&g, 6.0, 0.1, 6)).unwrap();
        assert_eq!(sys.a.asymmetry(), 0.0);
        assert!(sys.mass.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn degenerate_and_oversized_inputs_fail() {
        let g = Geometry::new(1.0, 2.5, 1.5).unwrap();
        let cfg = small_cfg(&g, 6.0, 0.1, 4);
        assert!(matches!(
            assemble(&g, &sine(2.5), &cfg),
            Err(Error::DegenerateStrip { .. })
        ));
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let cfg = SolverConfig {
            max_unknowns: 100,
            ..small_cfg(&g, 6.0, 0.1, 4)
        };
        assert!(matches!(assemble(&g, &sine(2.5), &cfg), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn free_strip_box_levels() {
        let g = Geometry::new(1.0, 2.5, 0.0).unwrap();
        let mut cfg = small_cfg(&g, 10.0, 0.05, 2);
        cfg.k = 3;
        let r = solve(&g, &sine(2.5), &cfg).unwrap();
        let h = r.h;
        for (k, &e) in r.eigenvalues.iter().enumerate() {
            let q = (k + 1) as f64 * PI / 20.0;
            let discrete = PI * PI + 4.0 / (h * h) * (0.5 * q * h).sin().powi(2);
            assert!((e - discrete).abs() < 1e-9, "{e} vs {discrete}");
        }
        assert!(!r.is_bound_state);
        // cos² envelope: W/L + sin(πW/L)/π
        let w = 4.5 / r.l_used;
        assert!(
            (r.localization - (w + (PI * w).sin() / PI)).abs() < 5e-3,
            "{} {}",
            r.localization,
            w
        );
    }

    #[test]
    fn reflection_flips_sign_of_lambda() {
        let p = sine(2.5);
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let mut cfg = small_cfg(&g, 8.0, 0.1, 4);
        cfg.eig_tol = 1e-11;
        let plus = solve(&g, &p, &cfg).unwrap();
        let minus = solve(&g.with_lambda(-0.1), &p, &cfg).unwrap();
        assert!((plus.gap - minus.gap).abs() < 1e-10);
    }

    #[test]
    fn matrix_dump_round_trips() {
        let g = Geometry::new(1.0, 1.0, 0.1).unwrap();
        let sys = assemble(&g, &sine(1.0), &small_cfg(&g, 2.0, 0.1, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a_path, b_path) = dump_matrices(&sys, &dir.path().join("sys")).unwrap();
        let text = std::fs::read_to_string(&a_path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("%%MatrixMarket"));
        let header: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(header[0], sys.unknowns());
        let dense = sys.a.to_dense();
        let mut count = 0;
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let (r, c): (usize, usize) = (t[0].parse().unwrap(), t[1].parse().unwrap());
            let v: f64 = t[2].parse().unwrap();
            assert_eq!(v, dense[(r - 1, c - 1)]);
            count += 1;
        }
        assert_eq!(count, header[2]);
        assert!(std::fs::read_to_string(b_path).unwrap().lines().count() == sys.unknowns() + 2);
    }

    #[test]
    fn fd_oracle_rejects_coarse_grid() {
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let grid = FdGrid {
            hx: 0.05,
            hy: 0.1,
            l: 6.0,
        };
        assert!(fd_oracle_solve(&g, &sine(2.5), grid).is_err());
    }

    #[test]
    fn fd_oracle_free_strip() {
        let g = Geometry::new(1.0, 1.0, 0.0).unwrap();
        let grid = FdGrid {
            hx: 0.05,
            hy: 0.05,
            l: 3.0,
        };
        let e = fd_oracle_solve(&g, &sine(1.0), grid).unwrap();
        let dx = 4.0 / (grid.hx * grid.hx) * (0.5 * PI / 6.0 * grid.hx).sin().powi(2);
        let dy = 4.0 / (grid.hy * grid.hy) * (0.5 * PI * grid.hy).sin().powi(2);
        assert!((e - dx - dy).abs() < 1e-8);
    }
}
