//! Implementation-independent oracles: brute-force evaluation, explicit
//! sums of squares, closed-form recurrences.

mod support;

use std::f64::consts::PI;

use laserprof_core::control::reslice_layer_count;
use laserprof_core::grr::anova_table;
use laserprof_core::profile::parabola_vertex;
use laserprof_core::*;
use rand::Rng;
use support::*;

fn pass(check: Check) {
    if let Err(e) = check {
        panic!("{e}");
    }
}

#[test]
fn parabola_vertex_matches_dense_evaluation() {
    let closed = parabola_vertex(0.10, 0.20, 0.18).unwrap();
    assert!((closed - brute_force_vertex(0.10, 0.20, 0.18)).abs() < 1e-9);
    assert!((5.0 + closed - 5.333_333_333_333_333).abs() < 1e-12);
    pass(check_parabola_vertex(1000));
}

#[test]
fn platform_medians_match_counting_oracle() {
    pass(check_platform_medians(1000));
}

#[test]
fn edge_scan_matches_brute_force() {
    pass(check_edge_scan(1000));
}

#[test]
fn hand_computable_anova() {
    // part 1: op A (1, 3), op B (2, 4); part 2: op A (5, 7), op B (6, 10)
    let d = GrrMeasurementSet::new(2, 2, 2, vec![1.0, 3.0, 2.0, 4.0, 5.0, 7.0, 6.0, 10.0], Unit::Px).unwrap();
    let t = anova_table(&d);
    // grand 4.75; part means 2.5, 7; op means 4, 5.5; cells 2, 3, 6, 8; within-cell SS 2 + 2 + 2 + 8
    assert!((t.ss_part - 40.5).abs() < 1e-12);
    assert!((t.ss_operator - 4.5).abs() < 1e-12);
    assert!((t.ss_interaction - 0.5).abs() < 1e-12);
    assert!((t.ss_error - 14.0).abs() < 1e-12);
    let g = grr_study(&d).unwrap();
    assert!((g.repeatability_ev - 6.0 * 3.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn anova_matches_raw_sum_oracle_on_all_small_grids() {
    pass(check_anova_small_grids(10));
}

#[test]
fn ellipse_round_trip_on_random_ellipses() {
    pass(check_ellipse_round_trip(1000));
}

#[test]
fn ellipse_round_trip_on_upper_arcs() {
    // Track cross-sections only show the upper half.
    let mut r = rng(6);
    for _ in 0..300 {
        let truth = Ellipse::new(
            r.random_range(0.0..500.0),
            0.0,
            r.random_range(50.0..200.0),
            r.random_range(20.0..45.0),
            0.0,
        );
        let n = r.random_range(10..40);
        let pts: Vec<_> = (0..n)
            .map(|i| truth.point_at(0.1 + (PI - 0.2) * i as f64 / (n - 1) as f64))
            .collect();
        let fit = fit_ellipse(&pts).unwrap();
        assert!(
            ellipse_error(&fit.ellipse, &truth) <= 1e-6,
            "{:?} vs {truth:?}",
            fit.ellipse
        );
        assert!(fit.mean_abs_residual < 1e-9);
    }
}

/// Distance by dense sampling of the whole curve plus golden-section polish.
fn distance_oracle(e: &Ellipse, x: f64, z: f64) -> f64 {
    let d = |t: f64| {
        let (px, pz) = e.point_at(t);
        (px - x).hypot(pz - z)
    };
    let n = 20_000;
    let step = 2.0 * PI / n as f64;
    let best = (0..n)
        .map(|i| i as f64 * step)
        .min_by(|a, b| d(*a).total_cmp(&d(*b)))
        .unwrap();
    let (mut lo, mut hi) = (best - step, best + step);
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if d(m1) < d(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    d(0.5 * (lo + hi))
}

#[test]
fn point_distance_matches_dense_oracle() {
    let mut r = rng(7);
    for _ in 0..400 {
        let e = random_ellipse(&mut r);
        let spread = 2.5 * e.semi_axis_a;
        let x = e.center_x + r.random_range(-spread..spread);
        let z = e.center_z + r.random_range(-spread..spread);
        let got = e.signed_distance(x, z);
        let oracle = distance_oracle(&e, x, z);
        assert!(
            (got.abs() - oracle).abs() < 1e-8 * e.semi_axis_a,
            "{e:?} ({x},{z}) {got} vs {oracle}"
        );
    }
}

#[test]
fn proportional_trace_matches_closed_form() {
    pass(check_proportional_closed_form(200));
}

#[test]
fn constant_bias_settles_after_one_corrected_layer() {
    let model = ProcessModel {
        thickness_bias_um: 7.0,
        ..ProcessModel::ideal()
    };
    let res = run_simulation(&SimConfig::new(
        10,
        200.0,
        Strategy::Proportional { kp: 1.0 },
        model,
    ))
    .unwrap();
    assert!(res.trace.iter().all(|r| (r.z_error_um - 7.0).abs() < 1e-9));
}

#[test]
fn reslice_count_is_brute_force_optimal() {
    let mut r = rng(9);
    for _ in 0..2000 {
        let nominal = r.random_range(50.0..400.0);
        let remaining = r.random_range(1.0..20.0 * nominal);
        let n = reslice_layer_count(remaining, nominal);
        let err = |n: usize| (remaining / n as f64 - nominal).abs();
        let best = (1..=40).map(err).fold(f64::INFINITY, f64::min);
        assert!(err(n) <= best, "remaining={remaining} nominal={nominal} n={n}");
    }
    // 690 µm at 200 µm nominal: |230 - 200| = 30 > |172.5 - 200| = 27.5.
    assert_eq!(reslice_layer_count(690.0, 200.0), 4);
}
