mod common;

use common::*;
use stopgame::equilibrium::GameSpec;
use stopgame::montecarlo::{
    empirical_best_response_scan, simulate_game, simulate_game_two_sided, Barriers, Exit, Scheme, SimConfig, Simulator,
};

fn cfg(paths: usize) -> SimConfig {
    SimConfig {
        paths,
        ..SimConfig::default()
    }
}

#[test]
fn discount_without_effective_opponent() {
    let m = case_study();
    let q = 0.05;
    let sim = Simulator::new(m, q, 1.0, cfg(100_000)).unwrap();
    let (x, a) = (1.2, 0.4);
    let [e] = sim.estimate(x, &Barriers::game(a, a - 50.0), |exit| match exit {
        Exit::Lower { t, .. } => [(-q * t).exp()],
        _ => [0.0],
    });
    let exact = (-m.phi(q).unwrap() * (x - a)).exp();
    assert!(e.agrees_with(exact, 3.0, 0.005), "{exact} vs {e:?}");
}

#[test]
fn antithetic_mean_consistent_with_plain() {
    let spec = case_spec();
    let (x, a, l) = (45f64.ln(), 30f64.ln(), 35f64.ln());
    let (c0, p0) = simulate_game(&spec, x, a, l, &cfg(100_000)).unwrap();
    let anti = SimConfig {
        antithetic: true,
        ..cfg(100_000)
    };
    let (c1, p1) = simulate_game(&spec, x, a, l, &anti).unwrap();
    assert!((c1.mean - c0.mean).abs() <= 3.0 * c0.stderr);
    assert!((p1.mean - p0.mean).abs() <= 3.0 * p0.stderr);
    assert!(c1.stderr != c0.stderr);
}

#[test]
fn horizon_truncation_negligible() {
    let spec = case_spec();
    let (x, a, l) = (45f64.ln(), 30f64.ln(), 35f64.ln());
    let (c0, p0) = simulate_game(&spec, x, a, l, &cfg(100_000)).unwrap();
    let long = SimConfig {
        horizon: 400.0,
        ..cfg(100_000)
    };
    let (c1, p1) = simulate_game(&spec, x, a, l, &long).unwrap();
    assert!((c1.mean - c0.mean).abs() < c0.stderr);
    assert!((p1.mean - p0.mean).abs() < p0.stderr);
    assert!(c0.truncated_fraction >= c1.truncated_fraction);
}

#[test]
fn far_upper_barrier_recovers_infinite_horizon() {
    let spec = case_spec();
    let (x, a, l) = (45f64.ln(), 30f64.ln(), 35f64.ln());
    let (c, p) = simulate_game_two_sided(&spec, x, a, l, l + 40.0, &cfg(100_000)).unwrap();
    assert!(c.agrees_with(spec.v_c(x, a, l), 3.0, 0.0), "{c:?}");
    assert!(p.agrees_with(spec.v_p(x, a, l), 3.0, 0.0), "{p:?}");
    assert!((spec.v_c_finite(x, a, l, l + 40.0).unwrap() - spec.v_c(x, a, l)).abs() < 1e-9);
}

#[test]
fn upper_barrier_at_l_kills_most_value_near_l() {
    let spec = case_spec();
    let (a, l) = (30f64.ln(), 40f64.ln());
    let x = l - 0.01;
    let (c1, p1) = simulate_game(&spec, x, a, l, &cfg(20_000)).unwrap();
    let (c2, p2) = simulate_game_two_sided(&spec, x, a, l, l, &cfg(20_000)).unwrap();
    assert!(c2.mean < 0.5 * c1.mean && p2.mean < 0.5 * p1.mean);
    assert!(c2.agrees_with(spec.v_c_finite(x, a, l, l).unwrap(), 3.0, 0.005));
    assert!(p2.agrees_with(spec.v_p_finite(x, a, l, l).unwrap(), 3.0, 0.005));
}

#[test]
fn grid_scheme_agrees_at_spec_step() {
    let spec = case_spec();
    let (x, a, l) = (45f64.ln(), 30f64.ln(), 35f64.ln());
    let grid = SimConfig {
        scheme: Scheme::Grid,
        ..cfg(2_000)
    };
    let (c, p) = simulate_game(&spec, x, a, l, &grid).unwrap();
    assert!(c.agrees_with(spec.v_c(x, a, l), 3.0, 0.005), "{c:?}");
    assert!(p.agrees_with(spec.v_p(x, a, l), 3.0, 0.005), "{p:?}");
}

#[test]
fn repeated_runs_bit_identical() {
    let spec = case_spec();
    let (x, a, l) = (50f64.ln(), 35f64.ln(), 42f64.ln());
    let r1 = simulate_game(&spec, x, a, l, &cfg(5_000)).unwrap();
    let r2 = simulate_game(&spec, x, a, l, &cfg(5_000)).unwrap();
    assert_eq!(r1, r2);
    let other = SimConfig { seed: 7, ..cfg(5_000) };
    assert_ne!(r1, simulate_game(&spec, x, a, l, &other).unwrap());
}

#[test]
fn scan_endpoints_worse_when_separated() {
    let spec = case_spec();
    let eq = spec.solve_equilibrium().unwrap();
    let x = eq.l_star + 0.1;
    let scan = empirical_best_response_scan(&spec, &eq, x, 5, &cfg(100_000)).unwrap();
    assert!(scan.passed());
    let a_ends = [scan.c.grid[0], *scan.c.grid.last().unwrap()];
    for (i, a) in [0, scan.c.grid.len() - 1].into_iter().zip(a_ends) {
        let gap = spec.v_c(x, eq.a_star, eq.l_star) - spec.v_c(x, a, eq.l_star);
        let se = scan.c.at_optimum.stderr;
        if gap > 6.0 * se {
            assert!(scan.c.at_optimum.mean - scan.c.estimates[i].mean > 3.0 * se, "a={a}");
        }
    }
    let l_ends = [scan.p.grid[0], *scan.p.grid.last().unwrap()];
    for (i, l) in [0, scan.p.grid.len() - 1].into_iter().zip(l_ends) {
        let gap = spec.v_p(x, eq.a_star, eq.l_star) - spec.v_p(x, eq.a_star, l);
        let se = scan.p.at_optimum.stderr;
        if gap > 6.0 * se {
            assert!(scan.p.at_optimum.mean - scan.p.estimates[i].mean > 3.0 * se, "l={l}");
        }
    }
}

#[test]
fn one_point_scan_passes() {
    let spec = case_spec();
    let eq = spec.solve_equilibrium().unwrap();
    let scan = empirical_best_response_scan(&spec, &eq, eq.l_star + 0.1, 1, &cfg(1_000)).unwrap();
    assert!(scan.passed());
    assert_eq!(scan.c.grid, vec![eq.a_star]);
}

#[test]
fn bounded_variation_game_matches_analytic() {
    let m = stopgame::LevyModel::new(0.5, 0.0, 1.0, 2.0).unwrap();
    let spec = GameSpec::puts(m, 0.05, 1.0, 50.0, 60.0).unwrap();
    let (x, a, l) = (45f64.ln(), 30f64.ln(), 35f64.ln());
    let (c, p) = simulate_game(&spec, x, a, l, &cfg(100_000)).unwrap();
    assert!(c.agrees_with(spec.v_c(x, a, l), 3.0, 0.005), "{c:?}");
    assert!(p.agrees_with(spec.v_p(x, a, l), 3.0, 0.005), "{p:?}");
}
