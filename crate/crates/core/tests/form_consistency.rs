use critwell::forms::{mapped_dirichlet_form, random_smooth_field, TrialField};
use critwell::solver::{assemble, solve, DiscreteSystem, SolverConfig};
use critwell::{make_profile, Geometry, Profile, ProfileKind};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(g: &Geometry, l: f64, nx: usize, n_modes: usize) -> SolverConfig {
    SolverConfig {
        l,
        nx,
        n_modes,
        ..SolverConfig::defaults_for(g)
    }
}

fn sample(sys: &DiscreteSystem, field: &TrialField) -> DVector<f64> {
    let n = sys.n_modes;
    let nodes = sys.grid.interior();
    let mut c = DVector::zeros(nodes.len() * n);
    for (k, &x) in nodes.iter().enumerate() {
        for (j, (v, _)) in field.mode_values(x).into_iter().enumerate().take(n) {
            c[k * n + j] = v;
        }
    }
    c
}

/// Relative errors of `cᵀAc` and `cᵀBc` against the mapped form of the field
/// the coefficients were sampled from.
fn discrete_errors(g: &Geometry, p: &Profile, field: &TrialField, nx: usize) -> (f64, f64) {
    let sys = assemble(g, p, &config(g, 4.0, nx, field.n_modes())).unwrap();
    let c = sample(&sys, field);
    let exact = mapped_dirichlet_form(field, p, g.lambda).unwrap();
    (
        (sys.energy(&c) - exact.q).abs() / exact.q,
        (sys.norm2(&c) - exact.weighted_norm2).abs() / exact.weighted_norm2,
    )
}

#[test]
fn discrete_forms_converge_to_the_mapped_form_at_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for kind in [ProfileKind::Sine, ProfileKind::BumpDerivative] {
        let p = make_profile(kind, 2.5, 1.0).unwrap();
        for lambda in [0.1, -0.05] {
            let g = Geometry::new(1.0, 2.5, lambda).unwrap();
            let field = random_smooth_field(&mut rng, 1.0, 4.0, 4).unwrap();
            let coarse = discrete_errors(&g, &p, &field, 80);
            let fine = discrete_errors(&g, &p, &field, 160);
            let finer = discrete_errors(&g, &p, &field, 320);
            assert!(finer.0 < 1e-3 && finer.1 < 1e-3, "{kind} λ={lambda}: {finer:?}");
            let order = (fine.0 / finer.0).log2();
            assert!(
                order > 1.5,
                "{kind} λ={lambda}: energy order {order} ({coarse:?}, {fine:?}, {finer:?})"
            );
        }
    }
}

#[test]
fn interpolated_eigenvector_reproduces_the_eigenvalue() {
    let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
    let p = make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap();
    let cfg = config(&g, 10.0, 800, 6);
    let r = solve(&g, &p, &cfg).unwrap();
    let n = r.n_modes;
    let mut coeffs = vec![Vec::with_capacity(r.x_nodes.len() + 2); n];
    for (j, column) in coeffs.iter_mut().enumerate() {
        column.push(0.0);
        column.extend((0..r.x_nodes.len()).map(|i| r.eigenvector[(i, j)]));
        column.push(0.0);
    }
    let h = r.h;
    let field = TrialField::sampled(1.0, -r.l_used, h, coeffs).unwrap();
    let m = mapped_dirichlet_form(&field, &p, 0.1).unwrap();
    let q = m.quotient();
    let e = r.eigenvalues[0];
    assert!((q - e).abs() < 1e-3 * e, "quotient {q} vs eigenvalue {e}");
    assert!(q - r.threshold < 0.0, "interpolant is a sub-threshold trial state");
}
