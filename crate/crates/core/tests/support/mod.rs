//! Brute-force oracles and the equivalence sweeps built on them. Each check
//! returns a one-line summary, or the first counterexample.
//!
//! Shared by the oracle tests here and the workspace acceptance suite.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use laserprof_core::ellipse::fit_ellipse_algebraic;
use laserprof_core::grr::anova_table;
use laserprof_core::profile::parabola_vertex;
use laserprof_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maximiser of the Lagrange parabola through (-1,a), (0,b), (1,c): dense
/// evaluation brackets the maximum, bisection on the sign of the
/// derivative pins it down (the value itself is too flat near the top to
/// resolve 1e-9).
pub fn brute_force_vertex(a: f64, b: f64, c: f64) -> f64 {
    let p = |x: f64| a * x * (x - 1.0) / 2.0 - b * (x + 1.0) * (x - 1.0) + c * x * (x + 1.0) / 2.0;
    let dp = |x: f64| a * (2.0 * x - 1.0) / 2.0 - 2.0 * b * x + c * (2.0 * x + 1.0) / 2.0;
    let n = 4000;
    let h = 2.0 / n as f64;
    let (mut best_x, mut best) = (-1.0, f64::NEG_INFINITY);
    for i in 0..=n {
        let x = -1.0 + i as f64 * h;
        if p(x) > best {
            best = p(x);
            best_x = x;
        }
    }
    let (mut lo, mut hi) = (best_x - h, best_x + h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dp(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn check_parabola_vertex(instances: usize) -> Check {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let peak: f64 = r.random_range(0.2..1.0);
        let a = peak * r.random_range(0.0..0.999);
        let c = peak * r.random_range(0.0..0.999);
        let v = parabola_vertex(a, peak, c).ok_or_else(|| format!("no vertex for ({a}, {peak}, {c})"))?;
        let err = (v - brute_force_vertex(a, peak, c)).abs();
        if err > 1e-9 {
            return Err(format!("a={a} b={peak} c={c}: error {err:.3e} px"));
        }
        worst = worst.max(err);
    }
    Ok(format!("{instances} vertices, worst error {worst:.1e} px"))
}

/// k-th smallest by counting, no sorting.
pub fn kth_by_counting(values: &[f64], k: usize) -> f64 {
    for &v in values {
        let below = values.iter().filter(|&&x| x < v).count();
        let equal = values.iter().filter(|&&x| x == v).count();
        if below <= k && k < below + equal {
            return v;
        }
    }
    unreachable!()
}

pub fn median_oracle(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        kth_by_counting(values, n / 2)
    } else {
        0.5 * (kth_by_counting(values, n / 2 - 1) + kth_by_counting(values, n / 2))
    }
}

pub fn random_profile(r: &mut ChaCha8Rng, columns: usize) -> LaserProfile {
    LaserProfile {
        row_subpixel: (0..columns).map(|_| r.random_range(50.0..60.0)).collect(),
        valid: (0..columns).map(|_| r.random_bool(0.8)).collect(),
    }
}

pub fn check_platform_medians(instances: usize) -> Check {
    let mut r = rng(2);
    let mut checked = 0;
    let mut rejected = 0;
    while checked < instances {
        let cols = r.random_range(16..200);
        let mut p = random_profile(&mut r, cols);
        // Duplicated values exercise ties.
        if r.random_bool(0.3) {
            p.row_subpixel.iter_mut().for_each(|v| *v = v.round());
        }
        let band = cols / 8;
        let left: Vec<f64> = (0..band)
            .filter(|&c| p.valid[c])
            .map(|c| p.row_subpixel[c])
            .collect();
        let right: Vec<f64> = (cols - band..cols)
            .filter(|&c| p.valid[c])
            .map(|c| p.row_subpixel[c])
            .collect();
        match detect_platform(&p) {
            Ok(b) => {
                if b.left_median != median_oracle(&left) || b.right_median != median_oracle(&right) {
                    return Err(format!("{cols} columns: {b:?}"));
                }
                checked += 1;
            }
            Err(Error::NoPlatformSignal { .. }) if left.is_empty() || right.is_empty() => rejected += 1,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!(
        "{checked} profiles exact ({rejected} empty-band rejections)"
    ))
}

pub fn check_edge_scan(instances: usize) -> Check {
    let mut r = rng(3);
    let mut found = 0;
    for _ in 0..instances {
        let cols = r.random_range(16..120);
        let run = r.random_range(1..6);
        let threshold = 3.0;
        let mut p = random_profile(&mut r, cols);
        // Flat platform at row 100 with random raised blocks.
        p.row_subpixel
            .iter_mut()
            .for_each(|v| *v = 100.0 - r.random_range(0.0..1.0));
        for _ in 0..r.random_range(0..4) {
            let s = r.random_range(0..cols);
            let len = r.random_range(1..8);
            for c in s..(s + len).min(cols) {
                p.row_subpixel[c] = 100.0 - r.random_range(2.0..10.0);
            }
        }
        let baseline = PlatformBaseline {
            left_median: 100.0,
            right_median: 100.0,
            left_center: 0.0,
            right_center: cols as f64 - 1.0,
        };
        let above = |c: usize| p.valid[c] && 100.0 - p.row_subpixel[c] > threshold;
        let left = (0..cols).find(|&c| c + run <= cols && (c..c + run).all(above));
        let right = (0..cols)
            .rev()
            .find(|&c| c + 1 >= run && (c + 1 - run..=c).all(above));
        let d = detect_track(&p, &baseline, threshold, run);
        match (left, right) {
            (Some(l), Some(rt)) if l < rt => {
                if (d.left_edge, d.right_edge) != (l, rt) || d.width_px != (rt - l) as f64 {
                    return Err(format!("run {run}: got {d:?}, oracle edges ({l}, {rt})"));
                }
                found += 1;
            }
            _ => {
                if d.found {
                    return Err(format!("run {run}: spurious detection {d:?}"));
                }
            }
        }
    }
    Ok(format!("{instances} sequences exact ({found} with a track)"))
}

/// Sums of squares from raw totals (textbook computing formulas).
#[allow(clippy::needless_range_loop)]
pub fn anova_oracle(d: &GrrMeasurementSet) -> [f64; 4] {
    let (p, o, r) = (d.parts(), d.operators(), d.trials());
    let n = (p * o * r) as f64;
    let total: f64 = d.values().iter().sum();
    let correction = total * total / n;
    let sum_sq: f64 = d.values().iter().map(|v| v * v).sum();
    let mut part_tot = vec![0.0; p];
    let mut op_tot = vec![0.0; o];
    let mut cells = 0.0;
    for i in 0..p {
        for j in 0..o {
            let t: f64 = (0..r).map(|k| d.get(i, j, k)).sum();
            part_tot[i] += t;
            op_tot[j] += t;
            cells += t * t / r as f64;
        }
    }
    let ss_part = part_tot.iter().map(|t| t * t).sum::<f64>() / (o * r) as f64 - correction;
    let ss_op = op_tot.iter().map(|t| t * t).sum::<f64>() / (p * r) as f64 - correction;
    let ss_cells = cells - correction;
    let ss_int = if p > 1 && o > 1 {
        ss_cells - ss_part - ss_op
    } else {
        0.0
    };
    [ss_part, ss_op, ss_int, sum_sq - cells]
}

pub fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(scale)
}

/// Every grid with p, o ≤ 4 and 2 ≤ r ≤ 4, `reps` random fills each.
pub fn check_anova_small_grids(reps: usize) -> Check {
    let mut r = rng(4);
    let mut grids = 0;
    for p in 1..=4 {
        for o in 1..=4 {
            for t in 2..=4 {
                for _ in 0..reps {
                    let values: Vec<f64> = (0..p * o * t).map(|_| r.random_range(95.0..105.0)).collect();
                    let d = GrrMeasurementSet::new(p, o, t, values, Unit::Um).map_err(|e| e.to_string())?;
                    let table = anova_table(&d);
                    // Sums of squares are shift invariant; centring keeps the
                    // raw-total formulas free of cancellation.
                    let oracle = anova_oracle(&d.shifted(-100.0));
                    let scale = oracle.iter().sum::<f64>();
                    let got = [
                        table.ss_part,
                        table.ss_operator,
                        table.ss_interaction,
                        table.ss_error,
                    ];
                    for (g, e) in got.iter().zip(oracle) {
                        if !close(*g, e, 1e-9, scale) {
                            return Err(format!("{p}x{o}x{t}: {g} vs {e}"));
                        }
                    }
                    let res = grr_study(&d).map_err(|e| e.to_string())?;
                    let ev = 6.0 * (oracle[3] / (p * o * (t - 1)) as f64).sqrt();
                    if !close(res.repeatability_ev, ev, 1e-9, scale) {
                        return Err(format!("{p}x{o}x{t}: EV {} vs {ev}", res.repeatability_ev));
                    }
                    grids += 1;
                }
            }
        }
    }
    Ok(format!("{grids} grids (all p,o <= 4, r in 2..=4) agree"))
}

pub fn random_ellipse(r: &mut ChaCha8Rng) -> Ellipse {
    let a = r.random_range(2.0..50.0);
    let b = a * r.random_range(0.2..0.83);
    Ellipse::new(
        r.random_range(-100.0..100.0),
        r.random_range(-100.0..100.0),
        a,
        b,
        r.random_range(-FRAC_PI_2 + 1e-3..FRAC_PI_2),
    )
}

pub fn angle_mod_pi_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Largest relative parameter error (rotation compared modulo π).
pub fn ellipse_error(got: &Ellipse, truth: &Ellipse) -> f64 {
    let scale = truth.semi_axis_a;
    let rel = |g: f64, t: f64| (g - t).abs() / t.abs().max(scale);
    rel(got.center_x, truth.center_x)
        .max(rel(got.center_z, truth.center_z))
        .max(rel(got.semi_axis_a, truth.semi_axis_a))
        .max(rel(got.semi_axis_b, truth.semi_axis_b))
        .max(angle_mod_pi_diff(got.rotation, truth.rotation))
}

pub fn check_ellipse_round_trip(instances: usize) -> Check {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut worst_residual = 0.0f64;
    for _ in 0..instances {
        let truth = random_ellipse(&mut r);
        let n = r.random_range(6..60);
        let phase = r.random_range(0.0..2.0 * PI);
        let pts: Vec<_> = (0..n)
            .map(|i| truth.point_at(phase + 2.0 * PI * i as f64 / n as f64))
            .collect();
        let fit = fit_ellipse(&pts).map_err(|e| format!("{truth:?}: {e}"))?;
        let algebraic = fit_ellipse_algebraic(&pts).map_err(|e| format!("{truth:?}: {e}"))?;
        let err = ellipse_error(&fit.ellipse, &truth).max(ellipse_error(&algebraic, &truth));
        if err > 1e-6 || fit.mean_abs_residual >= 1e-9 {
            return Err(format!(
                "{truth:?}: parameter error {err:.3e}, residual {:.3e}",
                fit.mean_abs_residual
            ));
        }
        worst = worst.max(err);
        worst_residual = worst_residual.max(fit.mean_abs_residual);
    }
    Ok(format!(
        "{instances} ellipses, worst relative error {worst:.1e}, worst residual {worst_residual:.1e}"
    ))
}

pub fn check_proportional_closed_form(instances: usize) -> Check {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let kp = r.random_range(0.1..=2.0);
        let bias = r.random_range(-20.0..20.0);
        let e0 = r.random_range(-50.0..50.0);
        let model = ProcessModel {
            thickness_bias_um: bias,
            ..ProcessModel::ideal()
        };
        let cfg = SimConfig {
            initial_offset_um: e0,
            ..SimConfig::new(60, 200.0, Strategy::Proportional { kp }, model)
        };
        let res = run_simulation(&cfg).map_err(|e| e.to_string())?;
        for (k, row) in res.trace.iter().enumerate() {
            let k = (k + 1) as i32;
            let q = (1.0 - kp).powi(k);
            let expect = q * e0 + bias * (1.0 - q) / kp;
            let err = (row.z_error_um - expect).abs() / expect.abs().max(1.0);
            if err > 1e-9 {
                return Err(format!("kp={kp} k={k}: {} vs {expect}", row.z_error_um));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("{instances} traces, worst relative error {worst:.1e}"))
}
