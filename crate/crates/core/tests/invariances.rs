use critwell::experiments::{lambda_sweep_with, SweepOptions};
use critwell::solver::{solve, SolverConfig};
use critwell::{make_profile, Geometry, ProfileKind};

fn config(g: &Geometry) -> SolverConfig {
    SolverConfig {
        l: 10.0,
        nx: 400,
        n_modes: 6,
        ..SolverConfig::defaults_for(g)
    }
}

#[test]
fn amplitude_rescaling_leaves_the_gap_unchanged() {
    for kind in [ProfileKind::Sine, ProfileKind::BumpDerivative] {
        let p = make_profile(kind, 2.5, 1.0).unwrap();
        let g = Geometry::new(1.0, 2.5, 0.1).unwrap();
        let base = solve(&g, &p, &config(&g)).unwrap().gap;
        for s in [2.0, 5.0] {
            let scaled = solve(&g.with_lambda(0.1 / s), &p.scaled(s).unwrap(), &config(&g))
                .unwrap()
                .gap;
            assert!((base - scaled).abs() < 1e-8, "{kind} s={s}: {base} vs {scaled}");
        }
    }
}

#[test]
fn sine_gap_is_even_in_lambda() {
    let p = make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap();
    for lambda in [0.03, 0.1] {
        let g = Geometry::new(1.0, 2.5, lambda).unwrap();
        let plus = solve(&g, &p, &config(&g)).unwrap().gap;
        let minus = solve(&g.with_lambda(-lambda), &p, &config(&g)).unwrap().gap;
        assert!((plus - minus).abs() < 1e-8, "λ={lambda}: {plus} vs {minus}");
    }
}

#[test]
fn sweep_rows_for_opposite_lambdas_match() {
    let p = make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap();
    let g = Geometry::new(1.0, 2.5, 0.0).unwrap();
    let cfg = SolverConfig {
        nx: 200,
        n_modes: 4,
        ..config(&g)
    };
    let opts = SweepOptions {
        upper_bound: false,
        discretization_check: false,
    };
    let r = lambda_sweep_with(&g, &p, &[-0.1, 0.1], &cfg, opts).unwrap();
    assert_eq!(r.rows[0].lambda, -0.1);
    assert!((r.rows[0].gap - r.rows[1].gap).abs() < 1e-8);
}
