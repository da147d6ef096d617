#![allow(dead_code)]

use nalgebra::{Rotation2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rotgrasp_core::motion::{MarkerMotion, MotionVectorSet};

/// `p` turned by `deg` about `c`; positive is clockwise on a y-down screen.
pub fn rotate_about(p: Vector2<f64>, c: Vector2<f64>, deg: f64) -> Vector2<f64> {
    c + Rotation2::new(deg.to_radians()) * (p - c)
}

/// Motion set where every marker starts at `points`, stays put through
/// contact and then turns rigidly, with optional Gaussian noise on the
/// current positions.
pub fn rigid_motion(
    points: &[Vector2<f64>],
    cor: Vector2<f64>,
    deg: f64,
    noise_px: f64,
    rng: &mut impl Rng,
) -> MotionVectorSet {
    let noise = Normal::new(0.0, noise_px.max(0.0)).unwrap();
    let markers = points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut mt = rotate_about(p, cor, deg);
            if noise_px > 0.0 {
                mt += Vector2::new(noise.sample(rng), noise.sample(rng));
            }
            MarkerMotion {
                id: i as u32,
                m0: p,
                mc: p,
                mt,
            }
        })
        .collect();
    MotionVectorSet { markers }
}

/// Square grid of `n x n` points with spacing `s` centered on `c`.
pub fn grid(n: usize, s: f64, c: Vector2<f64>) -> Vec<Vector2<f64>> {
    let half = 0.5 * (n as f64 - 1.0) * s;
    (0..n * n)
        .map(|k| c + Vector2::new((k % n) as f64 * s - half, (k / n) as f64 * s - half))
        .collect()
}

/// Brute-force minimizer of `cost` over a square grid of `step` spacing
/// centered on `around` with `half_width` reach.
pub fn grid_search(
    around: Vector2<f64>,
    half_width: f64,
    step: f64,
    cost: impl Fn(&Vector2<f64>) -> f64,
) -> Vector2<f64> {
    let n = (half_width / step).round() as i64;
    let mut best = (f64::INFINITY, around);
    for i in -n..=n {
        for j in -n..=n {
            let c = around + Vector2::new(i as f64 * step, j as f64 * step);
            let v = cost(&c);
            if v < best.0 {
                best = (v, c);
            }
        }
    }
    best.1
}

/// Sum over markers of the squared distance from `c` to the perpendicular
/// bisector of each motion, weighted by motion length. Written from the
/// geometry, independent of the library's least-squares code.
pub fn bisector_cost(v: &MotionVectorSet, c: &Vector2<f64>, floor: f64) -> f64 {
    v.markers
        .iter()
        .filter(|m| (m.mt - m.m0).norm() > floor)
        .map(|m| {
            let d = m.mt - m.m0;
            let mid = (m.m0 + m.mt) / 2.0;
            let along = (c - mid).dot(&d);
            along * along
        })
        .sum()
}

/// Angle of `p` turned about `c`, clockwise-positive, in `(-180, 180]`.
pub fn signed_turn_deg(c: Vector2<f64>, from: Vector2<f64>, to: Vector2<f64>) -> f64 {
    let (a, b) = (from - c, to - c);
    (a.x * b.y - a.y * b.x).atan2(a.dot(&b)).to_degrees()
}
