//! Gauss-type point sets on intervals and triangles.
//!
//! These rules serve two purposes: building the 1D SBP node sets and acting as
//! independent, high-order integration oracles in verification code.

use std::f64::consts::PI;

use crate::mesh::Point;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint limit
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        x[n - 1 - i] = t;
        w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// `n`-point Legendre–Gauss–Lobatto rule on `[-1, 1]`, exact to degree `2n - 3`.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let m = n - 1;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[m] = 1.0;
    // interior nodes are the roots of P_m'
    for i in 1..m {
        let mut t = -(PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, t);
            // P_m'' from the Legendre ODE
            let ddp = (2.0 * t * dp - (m * (m + 1)) as f64 * p) / (1.0 - t * t);
            let dt = dp / ddp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = t;
    }
    let w = x
        .iter()
        .map(|&t| {
            let (p, _) = legendre(m, t);
            2.0 / ((m * (m + 1)) as f64 * p * p)
        })
        .collect();
    (x, w)
}

/// Gauss rule on the segment `a`–`b`, weights scaled by the segment length.
pub fn segment_rule(a: Point, b: Point, n: usize) -> Vec<(Point, f64)> {
    let (x, w) = gauss_legendre(n);
    let len = crate::mesh::dist(a, b);
    x.iter()
        .zip(&w)
        .map(|(&t, &wt)| {
            let s = 0.5 * (t + 1.0);
            ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], 0.5 * len * wt)
        })
        .collect()
}

/// Collapsed-coordinate Gauss rule on the triangle `v0 v1 v2`, exact for
/// polynomials of total degree `degree`.
pub fn triangle_rule(v: [Point; 3], degree: usize) -> Vec<(Point, f64)> {
    let n = degree / 2 + 2;
    let (x, w) = gauss_legendre(n);
    let area2 = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
    let mut out = Vec::with_capacity(n * n);
    for (i, &ti) in x.iter().enumerate() {
        let t = 0.5 * (ti + 1.0);
        for (j, &sj) in x.iter().enumerate() {
            let s = 0.5 * (sj + 1.0);
            // reference (xi, eta) = (s (1 - t), t)
            let xi = s * (1.0 - t);
            let eta = t;
            let p = [
                v[0][0] + xi * (v[1][0] - v[0][0]) + eta * (v[2][0] - v[0][0]),
                v[0][1] + xi * (v[1][1] - v[0][1]) + eta * (v[2][1] - v[0][1]),
            ];
            out.push((p, 0.25 * w[i] * w[j] * (1.0 - t) * area2));
        }
    }
    out
}

/// Gauss rule on the interval `[a, b]` embedded in the plane.
pub fn interval_rule(a: f64, b: f64, degree: usize) -> Vec<(Point, f64)> {
    segment_rule([a, 0.0], [b, 0.0], degree / 2 + 1)
}
