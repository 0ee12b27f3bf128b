//! Symmetric block-tridiagonal pencils `(A, B)` with diagonal `B`, their
//! shifted Cholesky factorization and a shift-and-invert subspace iteration
//! for the lowest eigenpairs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric block-tridiagonal matrix; `sub[i]` is the block `A[i+1, i]`.
/// Block sizes may vary.
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    diag: Vec<DMatrix<f64>>,
    sub: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
}

impl BlockTridiag {
    pub fn new(diag: Vec<DMatrix<f64>>, sub: Vec<DMatrix<f64>>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::invalid("blocks", "matrix has no blocks"));
        }
        if sub.len() + 1 != diag.len() {
            return Err(Error::invalid("blocks", "need one sub-diagonal block per block row"));
        }
        for (i, d) in diag.iter().enumerate() {
            if !d.is_square() {
                return Err(Error::invalid("blocks", format!("diagonal block {i} is not square")));
            }
        }
        for (i, s) in sub.iter().enumerate() {
            if s.nrows() != diag[i + 1].nrows() || s.ncols() != diag[i].nrows() {
                return Err(Error::invalid(
                    "blocks",
                    format!("sub-diagonal block {i} has the wrong shape"),
                ));
            }
        }
        let mut offsets = Vec::with_capacity(diag.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &diag {
            acc += d.nrows();
            offsets.push(acc);
        }
        Ok(Self { diag, sub, offsets })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[DMatrix<f64>] {
        &self.diag
    }

    pub fn sub(&self) -> &[DMatrix<f64>] {
        &self.sub
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `A X` for a block of column vectors.
    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..self.diag.len() {
            let (o, n) = (self.offsets[i], self.diag[i].nrows());
            let xi = x.rows(o, n);
            let mut yi = &self.diag[i] * xi;
            if i > 0 {
                let (op, np) = (self.offsets[i - 1], self.diag[i - 1].nrows());
                yi += &self.sub[i - 1] * x.rows(op, np);
            }
            if i + 1 < self.diag.len() {
                let (on, nn) = (self.offsets[i + 1], self.diag[i + 1].nrows());
                yi += self.sub[i].transpose() * x.rows(on, nn);
            }
            y.rows_mut(o, n).copy_from(&yi);
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..self.diag.len() {
            let o = self.offsets[i];
            let d = &self.diag[i];
            m.view_mut((o, o), d.shape()).copy_from(d);
            if i + 1 < self.diag.len() {
                let on = self.offsets[i + 1];
                let s = &self.sub[i];
                m.view_mut((on, o), s.shape()).copy_from(s);
                m.view_mut((o, on), (s.ncols(), s.nrows())).copy_from(&s.transpose());
            }
        }
        m
    }

    /// Largest `|A[i,j] − A[j,i]|` inside the diagonal blocks.
    pub fn asymmetry(&self) -> f64 {
        self.diag.iter().map(|d| (d - d.transpose()).amax()).fold(0.0, f64::max)
    }

    /// Cholesky factorization of `A − σB`; `None` when the pencil is not
    /// positive definite, i.e. `σ` is not below the lowest eigenvalue.
    pub fn shifted_cholesky(&self, sigma: f64, mass: &DVector<f64>) -> Option<BlockCholesky> {
        let nb = self.diag.len();
        let mut l = Vec::with_capacity(nb);
        let mut w: Vec<DMatrix<f64>> = Vec::with_capacity(nb.saturating_sub(1));
        for i in 0..nb {
            let (o, n) = (self.offsets[i], self.diag[i].nrows());
            let mut s = self.diag[i].clone();
            for j in 0..n {
                s[(j, j)] -= sigma * mass[o + j];
            }
            if i > 0 {
                let wp: &DMatrix<f64> = &w[i - 1];
                s -= wp * wp.transpose();
            }
            let li = s.cholesky()?.l();
            if i + 1 < nb {
                // W = sub · L⁻ᵀ, i.e. L Wᵀ = subᵀ
                let wt = li.solve_lower_triangular(&self.sub[i].transpose())?;
                w.push(wt.transpose());
            }
            l.push(li);
        }
        Some(BlockCholesky {
            l,
            w,
            offsets: self.offsets.clone(),
        })
    }
}

/// Block lower-bidiagonal factor `L` with `L Lᵀ = A − σB`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    l: Vec<DMatrix<f64>>,
    w: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
}

impl BlockCholesky {
    /// Solve `(A − σB) X = R`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let nb = self.l.len();
        let mut y = rhs.clone();
        for i in 0..nb {
            let (o, n) = (self.offsets[i], self.l[i].nrows());
            let mut yi = y.rows(o, n).clone_owned();
            if i > 0 {
                let (op, np) = (self.offsets[i - 1], self.l[i - 1].nrows());
                yi -= &self.w[i - 1] * y.rows(op, np);
            }
            self.l[i].solve_lower_triangular_mut(&mut yi);
            y.rows_mut(o, n).copy_from(&yi);
        }
        for i in (0..nb).rev() {
            let (o, n) = (self.offsets[i], self.l[i].nrows());
            let mut xi = y.rows(o, n).clone_owned();
            if i + 1 < nb {
                let (on, nn) = (self.offsets[i + 1], self.l[i + 1].nrows());
                xi -= self.w[i].transpose() * y.rows(on, nn);
            }
            self.l[i].tr_solve_lower_triangular_mut(&mut xi);
            y.rows_mut(o, n).copy_from(&xi);
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Number of wanted eigenpairs.
    pub k: usize,
    /// Extra subspace vectors beyond `k`.
    pub extra: usize,
    /// Bound on `‖Ac − εBc‖ / ‖Bc‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            k: 1,
            extra: 3,
            tol: 1e-8,
            max_iter: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// B-normalized eigenvectors, one column each.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Final shift; below the lowest eigenvalue up to rounding.
    pub shift: f64,
}

/// Lowest `k` eigenpairs of `A c = ε B c` for SPD `A` and positive diagonal `B`.
///
/// Shift-and-invert subspace iteration with Rayleigh-Ritz. The shift is only
/// moved to values where `A − σB` factors, so it stays below the spectrum.
pub fn lowest_eigenpairs(a: &BlockTridiag, mass: &DVector<f64>, opts: EigenOptions) -> Result<EigenPairs> {
    let n = a.dim();
    if mass.len() != n {
        return Err(Error::invalid("mass", "mass diagonal does not match the matrix"));
    }
    if mass.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::invalid("mass", "mass diagonal must be positive"));
    }
    if opts.k == 0 {
        return Err(Error::invalid("k", "need at least one eigenpair"));
    }
    let m = (opts.k + opts.extra).min(n);
    if opts.k > n {
        return Err(Error::invalid(
            "k",
            format!("asked for {} eigenpairs of a {n}×{n} pencil", opts.k),
        ));
    }

    let mut sigma = gershgorin_lower(a, mass);
    let mut factor = a
        .shifted_cholesky(sigma, mass)
        .ok_or_else(|| Error::Breakdown("pencil is not positive definite below its Gershgorin bound".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    b_orthonormalize(&mut x, mass, &mut rng);

    let mut residuals = vec![f64::INFINITY; opts.k];
    for it in 1..=opts.max_iter {
        let bx = scale_rows(&x, mass);
        let mut y = factor.solve(&bx);
        b_orthonormalize(&mut y, mass, &mut rng);
        let ay = a.mul(&y);
        let h = y.transpose() * &ay;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let c = DMatrix::from_fn(m, m, |r, j| eig.eigenvectors[(r, order[j])]);
        x = &y * &c;
        let ax = &ay * &c;
        let bx = scale_rows(&x, mass);

        let mut delta = vec![0.0; m];
        for j in 0..m {
            let r = ax.column(j) - bx.column(j) * theta[j];
            residuals_push(&mut residuals, j, opts.k, r.norm() / bx.column(j).norm());
            delta[j] = r
                .iter()
                .zip(mass.iter())
                .map(|(ri, bi)| ri * ri / bi)
                .sum::<f64>()
                .sqrt();
        }
        if residuals.iter().all(|&r| r <= opts.tol) {
            return Ok(EigenPairs {
                values: theta[..opts.k].to_vec(),
                vectors: x.columns(0, opts.k).clone_owned(),
                residuals,
                iterations: it,
                shift: sigma,
            });
        }

        // move the shift toward θ₁, keeping A − σB positive definite
        let target = theta[0] - 2.0 * delta[0];
        let mut candidate = if target > sigma {
            target
        } else {
            0.5 * (sigma + theta[0])
        };
        for _ in 0..4 {
            if !(candidate > sigma && candidate < theta[0]) {
                break;
            }
            if let Some(f) = a.shifted_cholesky(candidate, mass) {
                factor = f;
                sigma = candidate;
                break;
            }
            candidate = 0.5 * (sigma + candidate);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: residuals.iter().copied().fold(0.0, f64::max),
    })
}

fn residuals_push(res: &mut [f64], j: usize, k: usize, value: f64) {
    if j < k {
        res[j] = value;
    }
}

/// Lower bound on the spectrum of `B⁻¹A` from Gershgorin discs, shifted
/// slightly further down.
fn gershgorin_lower(a: &BlockTridiag, mass: &DVector<f64>) -> f64 {
    let dense_rows = a.n_blocks();
    let mut lo = f64::INFINITY;
    for i in 0..dense_rows {
        let o = a.offsets[i];
        let d = &a.diag[i];
        for r in 0..d.nrows() {
            let mut radius = 0.0;
            for c in 0..d.ncols() {
                if c != r {
                    radius += d[(r, c)].abs();
                }
            }
            if i > 0 {
                radius += a.sub[i - 1].row(r).iter().map(|v| v.abs()).sum::<f64>();
            }
            if i + 1 < dense_rows {
                radius += a.sub[i].column(r).iter().map(|v| v.abs()).sum::<f64>();
            }
            lo = lo.min((d[(r, r)] - radius) / mass[o + r]);
        }
    }
    lo - 1e-8 * lo.abs().max(1.0)
}

fn scale_rows(x: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    for (mut row, &s) in y.row_iter_mut().zip(d.iter()) {
        row *= s;
    }
    y
}

/// Gram-Schmidt (twice) in the `B` inner product; rank-deficient columns are
/// replaced by random vectors.
fn b_orthonormalize(x: &mut DMatrix<f64>, mass: &DVector<f64>, rng: &mut ChaCha8Rng) {
    let n = x.nrows();
    let sq: DVector<f64> = mass.map(f64::sqrt);
    let mut z = scale_rows(x, &sq);
    for j in 0..z.ncols() {
        let original = z.column(j).norm();
        for attempt in 0..3 {
            for _ in 0..2 {
                for i in 0..j {
                    let p = z.column(i).dot(&z.column(j));
                    let ci = z.column(i).clone_owned();
                    z.column_mut(j).axpy(-p, &ci, 1.0);
                }
            }
            let norm = z.column(j).norm();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) && norm > 0.0 {
                z.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            let fresh = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            z.set_column(j, &fresh);
            if attempt == 2 {
                let norm = z.column(j).norm();
                z.column_mut(j).scale_mut(1.0 / norm);
            }
        }
    }
    let inv: DVector<f64> = sq.map(|s| 1.0 / s);
    *x = scale_rows(&z, &inv);
}
