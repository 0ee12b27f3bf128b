use critwell::experiments::{convergence_study, Knob};
use critwell::solver::SolverConfig;
use critwell::{make_profile, Geometry, ProfileKind};

fn setup() -> (Geometry, critwell::Profile) {
    (
        Geometry::new(1.0, 2.5, 0.1).unwrap(),
        make_profile(ProfileKind::Sine, 2.5, 1.0).unwrap(),
    )
}

#[test]
fn spacing_refinement_is_second_order() {
    let (g, p) = setup();
    let cfg = SolverConfig {
        l: 15.0,
        nx: 300,
        ..SolverConfig::defaults_for(&g)
    };
    let t = convergence_study(&g, &p, &cfg, Knob::H, 4).unwrap();
    for row in t.rows.iter().skip(2) {
        let order = row.observed.unwrap();
        assert!((order - 2.0).abs() <= 0.2, "observed order {order}");
    }
}

#[test]
fn box_doubling_converges_geometrically() {
    let (g, p) = setup();
    let cfg = SolverConfig {
        l: 7.5,
        nx: 300,
        n_modes: 6,
        ..SolverConfig::defaults_for(&g)
    };
    let t = convergence_study(&g, &p, &cfg, Knob::L, 3).unwrap();
    let ratio = t.rows[2].observed.unwrap();
    assert!(ratio >= 10.0, "Δgap ratio {ratio}");
}

#[test]
fn mode_refinement_decreases_monotonically() {
    let (g, p) = setup();
    let cfg = SolverConfig {
        l: 12.5,
        nx: 500,
        n_modes: 4,
        ..SolverConfig::defaults_for(&g)
    };
    let t = convergence_study(&g, &p, &cfg, Knob::N, 5).unwrap();
    let deltas: Vec<f64> = t.rows.iter().filter_map(|r| r.delta).collect();
    assert!(deltas.iter().all(|d| *d < 0.0), "variational in N: {deltas:?}");
    assert!(deltas.windows(2).all(|w| w[1].abs() < w[0].abs()), "{deltas:?}");
}
