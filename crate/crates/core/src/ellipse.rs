//! Ellipse fitting and point-to-ellipse distances.
//!
//! The fit is the direct ellipse-specific least-squares conic fit
//! (Fitzgibbon, Pilu & Fisher) in the numerically stable partitioned form of
//! Halíř & Flusser, computed on centred and scaled coordinates. That
//! algebraic solution seeds a Levenberg–Marquardt refinement of the
//! orthogonal distances, because the algebraic criterion is biased on the
//! partial arcs a track presents and would inflate the residuals. Residuals
//! are true geometric distances obtained by projecting every point onto the
//! fitted curve.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix5, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points for a conic fit.
pub const MIN_FIT_POINTS: usize = 6;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const FALLBACK_STEP_RAD: f64 = 1e-3;
const LM_MAX_ITER: usize = 100;

/// Geometric ellipse in the `(x, z)` plane.
///
/// `semi_axis_a` is the major semi-axis and `rotation` is the angle of the
/// major axis from +x, in `(-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center_x: f64,
    pub center_z: f64,
    pub semi_axis_a: f64,
    pub semi_axis_b: f64,
    pub rotation: f64,
}

/// Result of [`fit_ellipse`]: the ellipse plus signed geometric residuals
/// (positive outside the curve).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub ellipse: Ellipse,
    pub residuals: Vec<f64>,
    pub mean_abs_residual: f64,
    pub rms_residual: f64,
}

/// General conic `A x² + B xz + C z² + D x + E z + F = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic(pub [f64; 6]);

impl Ellipse {
    pub fn new(center_x: f64, center_z: f64, semi_axis_a: f64, semi_axis_b: f64, rotation: f64) -> Self {
        Self {
            center_x,
            center_z,
            semi_axis_a,
            semi_axis_b,
            rotation,
        }
    }

    /// Point at eccentric anomaly `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let px = self.semi_axis_a * t.cos();
        let pz = self.semi_axis_b * t.sin();
        (self.center_x + c * px - s * pz, self.center_z + s * px + c * pz)
    }

    /// Outward unit normal at eccentric anomaly `t`.
    pub fn normal_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let nx = self.semi_axis_b * t.cos();
        let nz = self.semi_axis_a * t.sin();
        let len = nx.hypot(nz);
        let (nx, nz) = (nx / len, nz / len);
        (c * nx - s * nz, s * nx + c * nz)
    }

    /// `n` points equally spaced in eccentric anomaly.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| self.point_at(2.0 * PI * i as f64 / n as f64))
            .collect()
    }

    pub fn to_conic(&self) -> Conic {
        let (s, c) = self.rotation.sin_cos();
        let ia = 1.0 / (self.semi_axis_a * self.semi_axis_a);
        let ib = 1.0 / (self.semi_axis_b * self.semi_axis_b);
        let a = c * c * ia + s * s * ib;
        let b = 2.0 * c * s * (ia - ib);
        let cc = s * s * ia + c * c * ib;
        let (x0, z0) = (self.center_x, self.center_z);
        let d = -2.0 * a * x0 - b * z0;
        let e = -b * x0 - 2.0 * cc * z0;
        let f = a * x0 * x0 + b * x0 * z0 + cc * z0 * z0 - 1.0;
        Conic([a, b, cc, d, e, f])
    }

    /// Length of the chord cut by the horizontal line at height `z`, or
    /// `None` when the line misses the ellipse.
    pub fn chord_at_z(&self, z: f64) -> Option<f64> {
        let [a, b, c, d, e, f] = self.to_conic().0;
        let lin = b * z + d;
        let cst = c * z * z + e * z + f;
        let disc = lin * lin - 4.0 * a * cst;
        if disc < 0.0 || a <= 0.0 {
            return None;
        }
        Some(disc.sqrt() / a)
    }

    /// Signed geometric distance from `(x, z)` to the curve; negative inside.
    pub fn signed_distance(&self, x: f64, z: f64) -> f64 {
        self.closest_point(x, z).1
    }

    /// Eccentric anomaly of the foot point nearest to `(x, z)` and the signed
    /// distance to it (negative inside).
    pub fn closest_point(&self, x: f64, z: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center_x;
        let dz = z - self.center_z;
        let u = c * dx + s * dz;
        let v = -s * dx + c * dz;
        let (a, b) = (self.semi_axis_a, self.semi_axis_b);
        let swapped = a < b;
        let (a, b, u, v) = if swapped { (b, a, v, u) } else { (a, b, u, v) };
        let (pu, pv) = (u.abs(), v.abs());
        let (tq, dist) = quadrant_foot(a, b, pu, pv);
        // Back from the first quadrant of the (possibly swapped) frame.
        let (mut cu, mut sv) = (tq.cos(), tq.sin());
        if u < 0.0 {
            cu = -cu;
        }
        if v < 0.0 {
            sv = -sv;
        }
        // Swapped frame: u' = v, v' = u, a' = b, b' = a, so cos t = sv, sin t = cu.
        let t = if swapped { cu.atan2(sv) } else { sv.atan2(cu) };
        let inside = (pu / a).powi(2) + (pv / b).powi(2) < 1.0;
        (t, if inside { -dist } else { dist })
    }
}

/// Foot-point anomaly and unsigned distance from `(pu, pv)`, both ≥ 0, to
/// the axis-aligned ellipse with `a ≥ b`. The foot lies in the same quadrant.
fn quadrant_foot(a: f64, b: f64, pu: f64, pv: f64) -> (f64, f64) {
    let at = |t: f64| (a * t.cos() - pu).hypot(b * t.sin() - pv);
    if pv == 0.0 {
        let focal = (a * a - b * b) / a;
        if pu < focal {
            let t = (a * pu / (a * a - b * b)).clamp(-1.0, 1.0).acos();
            return (t, at(t));
        }
        return (0.0, (pu - a).abs());
    }
    if pu == 0.0 {
        return (FRAC_PI_2, (pv - b).abs());
    }
    match newton_anomaly(a, b, pu, pv) {
        Some(t) => (t, at(t)),
        None => {
            // Dense sampling of the quadrant arc, then bisection on g inside
            // the bracketing samples.
            let steps = (FRAC_PI_2 / FALLBACK_STEP_RAD).ceil() as usize;
            let sample = |i: usize| (i as f64 * FALLBACK_STEP_RAD).min(FRAC_PI_2);
            let best = (0..=steps)
                .min_by(|&i, &j| at(sample(i)).total_cmp(&at(sample(j))))
                .unwrap_or(0);
            let g = |t: f64| {
                let (s, c) = t.sin_cos();
                (b * b - a * a) * s * c + a * pu * s - b * pv * c
            };
            let (mut lo, mut hi) = (sample(best.saturating_sub(1)), sample((best + 1).min(steps)));
            if g(lo) > 0.0 || g(hi) < 0.0 {
                let t = sample(best);
                return (t, at(t));
            }
            while (hi - lo) * a > NEWTON_TOL {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            (t, at(t))
        }
    }
}

/// Newton iteration on the orthogonality condition
/// `g(t) = (b² − a²) sin t cos t + a·pu·sin t − b·pv·cos t = 0`.
/// Returns `None` if the iterate leaves `[0, π/2]` or fails to converge.
fn newton_anomaly(a: f64, b: f64, pu: f64, pv: f64) -> Option<f64> {
    let k = b * b - a * a;
    let mut t = (a * pv).atan2(b * pu);
    for _ in 0..NEWTON_MAX_ITER {
        let (s, c) = t.sin_cos();
        let g = k * s * c + a * pu * s - b * pv * c;
        let dg = k * (c * c - s * s) + a * pu * c + b * pv * s;
        if dg <= 0.0 || !dg.is_finite() {
            return None;
        }
        let step = g / dg;
        t -= step;
        if !(0.0..=FRAC_PI_2).contains(&t) {
            return None;
        }
        if step.abs() * a < NEWTON_TOL {
            return Some(t);
        }
    }
    None
}

impl Conic {
    pub fn eval(&self, x: f64, z: f64) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * x * x + b * x * z + c * z * z + d * x + e * z + f
    }

    /// Geometric parameters, or `None` unless the conic is a real ellipse.
    pub fn to_ellipse(&self) -> Option<Ellipse> {
        let mut k = self.0;
        if k[0] + k[2] < 0.0 {
            k.iter_mut().for_each(|v| *v = -*v);
        }
        let [a, b, c, d, e, f] = k;
        let det = 4.0 * a * c - b * b;
        if !(det > 0.0) {
            return None;
        }
        let x0 = (b * e - 2.0 * c * d) / det;
        let z0 = (b * d - 2.0 * a * e) / det;
        let f0 = f + 0.5 * (d * x0 + e * z0);
        if !(f0 < 0.0) {
            return None;
        }
        let mean = 0.5 * (a + c);
        let half_diff = (0.5 * (a - c)).hypot(0.5 * b);
        let lambda_min = mean - half_diff;
        let lambda_max = mean + half_diff;
        if !(lambda_min > 0.0) {
            return None;
        }
        let semi_a = (-f0 / lambda_min).sqrt();
        let semi_b = (-f0 / lambda_max).sqrt();
        let mut rotation = 0.5 * (-b).atan2(c - a);
        if rotation <= -FRAC_PI_2 {
            rotation += PI;
        }
        let out = Ellipse::new(x0, z0, semi_a, semi_b, rotation);
        [x0, z0, semi_a, semi_b, rotation]
            .iter()
            .all(|v| v.is_finite())
            .then_some(out)
    }
}

/// Ellipse fit with geometric residuals: direct ellipse-constrained
/// least squares followed by orthogonal-distance refinement.
///
/// Needs at least [`MIN_FIT_POINTS`] points that are not collinear.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseFit> {
    let initial = fit_ellipse_algebraic(points)?;
    Ok(with_residuals(refine_geometric(initial, points), points))
}

/// Direct algebraic fit only, no geometric refinement.
pub fn fit_ellipse_algebraic(points: &[(f64, f64)]) -> Result<Ellipse> {
    fit_ellipse_params(points)
}

/// Residuals of `points` against `ellipse`.
pub fn with_residuals(ellipse: Ellipse, points: &[(f64, f64)]) -> EllipseFit {
    let residuals: Vec<f64> = points
        .iter()
        .map(|&(x, z)| ellipse.signed_distance(x, z))
        .collect();
    let n = residuals.len().max(1) as f64;
    let mean_abs_residual = residuals.iter().map(|r| r.abs()).sum::<f64>() / n;
    let rms_residual = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    EllipseFit {
        ellipse,
        residuals,
        mean_abs_residual,
        rms_residual,
    }
}

fn params(e: &Ellipse) -> Vector5<f64> {
    Vector5::new(e.center_x, e.center_z, e.semi_axis_a, e.semi_axis_b, e.rotation)
}

fn from_params(p: &Vector5<f64>) -> Ellipse {
    Ellipse::new(p[0], p[1], p[2], p[3], p[4])
}

/// Puts the major axis first and the rotation in `(-π/2, π/2]`.
fn canonical(mut e: Ellipse) -> Ellipse {
    if e.semi_axis_a < e.semi_axis_b {
        std::mem::swap(&mut e.semi_axis_a, &mut e.semi_axis_b);
        e.rotation += FRAC_PI_2;
    }
    e.rotation = e.rotation.rem_euclid(PI);
    if e.rotation > FRAC_PI_2 {
        e.rotation -= PI;
    }
    e
}

fn residuals_and_jacobian(e: &Ellipse, points: &[(f64, f64)]) -> (DVector<f64>, DMatrix<f64>) {
    let (s, c) = e.rotation.sin_cos();
    let mut r = DVector::zeros(points.len());
    let mut j = DMatrix::zeros(points.len(), 5);
    for (i, &(x, z)) in points.iter().enumerate() {
        let (t, d) = e.closest_point(x, z);
        let (nx, nz) = e.normal_at(t);
        let (ct, st) = (t.cos(), t.sin());
        let (px, pz) = (e.semi_axis_a * ct, e.semi_axis_b * st);
        // d = (X - P(t*)) · n, so ∂d/∂p = -n · ∂P/∂p at the foot point.
        let dp = [
            (1.0, 0.0),
            (0.0, 1.0),
            (c * ct, s * ct),
            (-s * st, c * st),
            (-s * px - c * pz, c * px - s * pz),
        ];
        r[i] = d;
        for (k, (gx, gz)) in dp.iter().enumerate() {
            j[(i, k)] = -(nx * gx + nz * gz);
        }
    }
    (r, j)
}

/// Levenberg–Marquardt on the orthogonal distances.
pub fn refine_geometric(initial: Ellipse, points: &[(f64, f64)]) -> Ellipse {
    let mut p = params(&initial);
    let (mut r, mut j) = residuals_and_jacobian(&initial, points);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITER {
        if cost == 0.0 {
            break;
        }
        let jt = j.transpose();
        let h: Matrix5<f64> = (&jt * &j).fixed_view::<5, 5>(0, 0).into_owned();
        let g: Vector5<f64> = (&jt * &r).fixed_rows::<5>(0).into_owned();
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = h;
            for k in 0..5 {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&-g)) else {
                lambda *= 4.0;
                continue;
            };
            let trial = p + step;
            if trial[2] <= 0.0 || trial[3] <= 0.0 || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 4.0;
                continue;
            }
            let te = from_params(&trial);
            let (tr, tj) = residuals_and_jacobian(&te, points);
            let tcost = tr.norm_squared();
            if tcost < cost {
                let rel_drop = (cost - tcost) / cost;
                let rel_step = step.norm() / p.norm().max(1.0);
                p = trial;
                r = tr;
                j = tj;
                cost = tcost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel_drop > 1e-14 && rel_step > 1e-14;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    canonical(from_params(&p))
}

fn fit_ellipse_params(points: &[(f64, f64)]) -> Result<Ellipse> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "need at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, z)| !x.is_finite() || !z.is_finite()) {
        return Err(Error::DegenerateFit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mz = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxz, mut szz) = (0.0, 0.0, 0.0);
    for &(x, z) in points {
        let (dx, dz) = (x - mx, z - mz);
        sxx += dx * dx;
        sxz += dx * dz;
        szz += dz * dz;
    }
    let spread = sxx + szz;
    // Smallest eigenvalue of the scatter matrix vanishes for collinear input.
    let min_eig = 0.5 * (spread - ((sxx - szz).powi(2) + 4.0 * sxz * sxz).sqrt());
    if !(spread > 0.0) || min_eig <= 1e-12 * spread {
        return Err(Error::DegenerateFit("points are collinear".into()));
    }
    let scale = (spread / (2.0 * n)).sqrt();

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for &(x, z) in points {
        let (x, z) = ((x - mx) / scale, (z - mz) / scale);
        let quad = Vector3::new(x * x, x * z, z * z);
        let lin = Vector3::new(x, z, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("singular linear scatter".into()))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]].
    let reduced = Matrix3::from_rows(&[m.row(2) * 0.5, -m.row(1), m.row(0) * 0.5]);

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in reduced.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint <= 0.0 {
            continue;
        }
        if best.as_ref().is_none_or(|(l, _)| lambda.re.abs() < l.abs()) {
            best = Some((lambda.re, v));
        }
    }
    let (_, quad) = best.ok_or_else(|| Error::DegenerateFit("no elliptic eigenvector".into()))?;
    let lin = t * quad;
    let conic = Conic([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]]);
    let unit = conic
        .to_ellipse()
        .ok_or_else(|| Error::DegenerateFit("conic is not a real ellipse".into()))?;
    Ok(Ellipse::new(
        unit.center_x * scale + mx,
        unit.center_z * scale + mz,
        unit.semi_axis_a * scale,
        unit.semi_axis_b * scale,
        unit.rotation,
    ))
}

/// Right singular vector of the smallest singular value.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let v: Vector3<f64> = v_t.row(idx).transpose();
    let norm = v.norm();
    (norm > 0.0).then(|| v / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn exact_points_recovered() {
        let truth = Ellipse::new(50.0, 80.0, 15.0, 6.0, 0.0);
        let fit = fit_ellipse(&truth.sample(12)).unwrap();
        let e = fit.ellipse;
        assert!(rel(e.center_x, 50.0) < 1e-6);
        assert!(rel(e.center_z, 80.0) < 1e-6);
        assert!(rel(e.semi_axis_a, 15.0) < 1e-6);
        assert!(rel(e.semi_axis_b, 6.0) < 1e-6);
        assert!(e.rotation.abs() < 1e-6);
        assert!(fit.mean_abs_residual < 1e-9, "{}", fit.mean_abs_residual);
    }

    #[test]
    fn five_points_rejected() {
        let pts = Ellipse::new(0.0, 0.0, 3.0, 2.0, 0.3).sample(5);
        assert!(matches!(fit_ellipse(&pts), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn collinear_rejected() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!(matches!(fit_ellipse(&pts), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn distance_simple_cases() {
        let e = Ellipse::new(0.0, 0.0, 5.0, 3.0, 0.0);
        assert!((e.signed_distance(7.0, 0.0) - 2.0).abs() < 1e-12);
        assert!((e.signed_distance(0.0, -4.0) - 1.0).abs() < 1e-12);
        assert!((e.signed_distance(0.0, 1.0) + 2.0).abs() < 1e-12);
        assert!((e.signed_distance(0.0, 0.0) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn distance_along_normal() {
        let e = Ellipse::new(3.0, -2.0, 7.0, 2.5, 0.7);
        for i in 0..64 {
            let t = 2.0 * PI * i as f64 / 64.0;
            let (px, pz) = e.point_at(t);
            let (nx, nz) = e.normal_at(t);
            for d in [-0.4, 0.25, 1.5] {
                let got = e.signed_distance(px + d * nx, pz + d * nz);
                assert!((got - d).abs() < 1e-9, "t={t} d={d} got={got}");
            }
        }
    }

    #[test]
    fn chord_through_center_is_major_axis() {
        let e = Ellipse::new(10.0, 0.0, 8.0, 3.0, 0.0);
        assert!((e.chord_at_z(0.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(e.chord_at_z(5.0).is_none());
    }

    #[test]
    fn conic_round_trip() {
        let e = Ellipse::new(-4.0, 9.0, 6.0, 2.0, -1.1);
        let back = e.to_conic().to_ellipse().unwrap();
        assert!(rel(back.center_x, e.center_x) < 1e-12);
        assert!(rel(back.semi_axis_a, 6.0) < 1e-12);
        assert!((back.rotation - e.rotation).abs() < 1e-12);
    }
}
