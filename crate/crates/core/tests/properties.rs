use std::f64::consts::PI;

use critwell::config::parse_config;
use critwell::experiments::fit_power_law_points;
use critwell::forms::{h_lambda_form, mapped_dirichlet_form, random_smooth_field};
use critwell::linalg::{lowest_eigenpairs, BlockTridiag, EigenOptions};
use critwell::profiles::validate;
use critwell::report::format_float;
use critwell::solver::{solve, SolverConfig};
use critwell::theory::{check_conditions, constant_k, critical_ratios, KMode};
use critwell::validation::embedding_violations;
use critwell::{make_profile, Geometry, Profile, ProfileKind};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn analytic_kind() -> impl Strategy<Value = ProfileKind> {
    prop_oneof![Just(ProfileKind::Sine), Just(ProfileKind::BumpDerivative)]
}

fn amplitude() -> impl Strategy<Value = f64> {
    (0.1f64..10.0, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m })
}

/// Zero-mean trigonometric profile on `[-b, b]` vanishing at both ends.
fn trig_profile(b: f64, odd: &[f64], even: &[f64], knots: usize) -> Profile {
    let f = |x: f64| {
        let t = PI * x / b;
        let mut v = 0.0;
        for (k, c) in odd.iter().enumerate() {
            v += c * ((k + 1) as f64 * t).sin();
        }
        for (k, c) in even.iter().enumerate() {
            let k = (k + 2) as f64;
            v += c * ((k * t).cos() - (-1f64).powf(k - 1.0) * t.cos());
        }
        v
    };
    let xs: Vec<f64> = (0..knots)
        .map(|i| -b + 2.0 * b * i as f64 / (knots - 1) as f64)
        .collect();
    let mut fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let n = fs.len();
    fs[0] = 0.0;
    fs[n - 1] = 0.0;
    Profile::from_samples(&xs, &fs, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_profiles_satisfy_the_profile_invariants(kind in analytic_kind(), b in 0.2f64..5.0, amp in amplitude()) {
        let p = make_profile(kind, b, amp).unwrap();
        let r = validate(&p, 0.1 / amp.abs());
        prop_assert!(r.zero_mean, "mean {}", r.mean);
        prop_assert!(r.support_contained && r.vanishes_at_edges);
        let n = p.norms();
        prop_assert!(n.normfp2 / n.normf2 >= (PI / b).powi(2) * (1.0 - 1e-9));
    }

    #[test]
    fn mutual_exclusion_of_the_conditions(kind in analytic_kind(), a in 0.05f64..5.0, b in 0.05f64..5.0) {
        let p = make_profile(kind, b, 1.0).unwrap();
        let g = Geometry::new(a, b, 0.0).unwrap();
        let c = check_conditions(&g, &p).unwrap();
        let r = critical_ratios();
        prop_assert!(!(c.existence_applies() && c.nonexistence_applies()));
        if c.existence_applies() {
            prop_assert!(a / b < r.existence_ratio + 1e-12);
        }
        if c.nonexistence_applies() {
            prop_assert!(a / b > r.nonexistence_ratio - 1e-12);
        }
    }

    #[test]
    fn k_series_approaches_from_below(n in 10usize..20_000) {
        let k = constant_k(KMode::ClosedForm).unwrap();
        let s = constant_k(KMode::Series(n)).unwrap();
        prop_assert!(k - s > 0.0 && k - s < 2.0 / (n as f64).sqrt() * k);
    }

    #[test]
    fn floats_round_trip_through_the_report_format(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn power_fit_recovers_exact_laws(c in 0.1f64..1e6, p in 1.0f64..6.0, lo in 0.001f64..0.05) {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let l = lo * 1.5f64.powi(i);
            (l, -c * l.powf(p))
        }).collect();
        let fit = fit_power_law_points(&pts).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-9);
        prop_assert!((fit.prefactor / c - 1.0).abs() < 1e-8);
        prop_assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_values_survive_parsing(a in 0.1f64..10.0, b in 0.1f64..10.0, lambda in -1.0f64..1.0, nmodes in 2usize..30) {
        let text = format!(
            "[profile]\nkind = bump-derivative\n[geometry]\nb = {b:e}\nlambda = {lambda:e}\na = {a:e}\n[solver]\nnmodes = {nmodes}\n"
        );
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(c.a, a);
        prop_assert_eq!(c.b, b);
        prop_assert_eq!(c.solver.n_modes, nmodes);
        let h = c.solver.spacing();
        prop_assert!(h <= a / 40.0 * (1.0 + 1e-12) && h > a / 40.0 * (1.0 - 1.0 / c.solver.nx as f64));
    }

    #[test]
    fn embedding_bounds_hold_for_any_half_width(b in 0.05f64..8.0, seed in any::<u64>()) {
        prop_assert_eq!(embedding_violations(b, 20, seed).unwrap(), (0, 0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tabulated_profiles_respect_the_infimum(
        b in 0.3f64..4.0,
        odd in prop::collection::vec(-1.0f64..1.0, 1..5),
        even in prop::collection::vec(-1.0f64..1.0, 0..4),
    ) {
        let p = trig_profile(b, &odd, &even, 801);
        let n = p.norms();
        prop_assert!(n.mean.abs() < 1e-12 * (1.0 + n.normf2.sqrt()));
        prop_assert!(n.normfp2 / n.normf2 >= (PI / b).powi(2) * (1.0 - 1e-9));
    }

    #[test]
    fn block_solver_matches_dense_eigen(seed in any::<u64>(), blocks in 3usize..9, size in 1usize..4) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut diag = Vec::new();
        let mut sub = Vec::new();
        for i in 0..blocks {
            let m = DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
            diag.push(&m * m.transpose() + DMatrix::identity(size, size) * (4.0 * size as f64));
            if i + 1 < blocks {
                sub.push(DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0)));
            }
        }
        let a = BlockTridiag::new(diag, sub).unwrap();
        let mass = DVector::from_fn(blocks * size, |_, _| rng.random_range(0.5..2.0));
        let pairs = lowest_eigenpairs(&a, &mass, EigenOptions { k: 2.min(blocks * size), ..Default::default() }).unwrap();
        let s = mass.map(|m| 1.0 / m.sqrt());
        let dense = a.to_dense();
        let scaled = DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| s[i] * dense[(i, j)] * s[j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(scaled).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (k, v) in pairs.values.iter().enumerate() {
            prop_assert!((v - ev[k]).abs() < 1e-7 * ev[k].abs().max(1.0), "{} vs {}", v, ev[k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn straightened_and_mapped_forms_agree(kind in analytic_kind(), lambda in -0.3f64..0.3, seed in any::<u64>()) {
        let p = make_profile(kind, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_smooth_field(&mut rng, 1.0, 3.0, 3).unwrap();
        let h = h_lambda_form(&u, &p, lambda).unwrap();
        let m = mapped_dirichlet_form(&u.rescaled_by_width(&p, lambda, -0.5).unwrap(), &p, lambda).unwrap();
        prop_assert!((h.energy - m.q).abs() < 1e-7 * (1.0 + m.q.abs()));
        prop_assert!((h.norm2 - m.weighted_norm2).abs() < 1e-7 * (1.0 + m.weighted_norm2));
    }

    #[test]
    fn gap_depends_only_on_lambda_times_f(kind in analytic_kind(), lambda in 0.02f64..0.15, s in 0.3f64..6.0) {
        let p = make_profile(kind, 2.5, 1.0).unwrap();
        let g = Geometry::new(1.0, 2.5, lambda).unwrap();
        let cfg = SolverConfig { l: 6.0, nx: 160, n_modes: 3, ..SolverConfig::defaults_for(&g) };
        let base = solve(&g, &p, &cfg).unwrap().gap;
        let scaled = solve(&g.with_lambda(lambda / s), &p.scaled(s).unwrap(), &cfg).unwrap().gap;
        prop_assert!((base - scaled).abs() < 1e-8, "{} vs {}", base, scaled);
    }
}
