//! Independent oracles for the integration tests. Nothing here calls into the
//! crate's density code.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Characteristic function, 0-parameterization, written out from the formula.
pub fn cf0(alpha: f64, beta: f64, gamma: f64, delta: f64, u: f64) -> Complex64 {
    if u == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let s = u.signum();
    let gu = (gamma * u).abs();
    let expo = if alpha == 1.0 {
        Complex64::new(-gu, -gu * beta * 2.0 / PI * s * gu.ln())
    } else {
        let t = (PI * alpha / 2.0).tan();
        let ga = gu.powf(alpha);
        Complex64::new(-ga, -ga * beta * t * s * (gu.powf(1.0 - alpha) - 1.0))
    };
    (expo + Complex64::new(0.0, delta * u)).exp()
}

/// Standard (gamma = 1, delta = 0) density at every `z` by Gauss-Legendre
/// quadrature of `(1/pi) int_0^U Re[exp(-i u z) Phi(u)] du`. Panels keep the
/// phase change per panel below pi/2; geometric panels resolve the cusp at 0.
/// Intended for alpha >= 0.45 and |z| up to a few tens.
pub fn dense_fourier(alpha: f64, beta: f64, zs: &[f64]) -> Vec<f64> {
    assert!(alpha != 1.0);
    let t = (PI * alpha / 2.0).tan();
    let zmax = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let upper = 36f64.powf(1.0 / alpha);
    // Phase of Phi beyond the -u z term: -beta t (u - u^alpha).
    let skew = |u: f64| -beta * t * (u - u.powf(alpha));
    let (gx, gw) = gauss_legendre(16);
    let mut acc = vec![0.0; zs.len()];
    let mut a = 1e-12;
    while a < upper {
        let mut h = (a).min(upper - a);
        loop {
            let dphase = (skew(a + h) - skew(a)).abs() + zmax * h;
            if dphase <= PI / 2.0 || h < 1e-9 {
                break;
            }
            h *= 0.5;
        }
        let (mid, half) = (a + h / 2.0, h / 2.0);
        for (xi, wi) in gx.iter().zip(&gw) {
            let u = mid + half * xi;
            let amp = (-u.powf(alpha)).exp() * wi * half;
            if amp == 0.0 {
                continue;
            }
            let ph = skew(u);
            for (k, z) in zs.iter().enumerate() {
                acc[k] += amp * (ph - u * z).cos();
            }
        }
        a += h;
    }
    acc.iter().map(|v| v / PI).collect()
}

/// Standard density for alpha < 0.45 by rotating the inversion contour onto
/// the imaginary axis, where `exp(-i u y)` decays.
pub fn rotated_contour(alpha: f64, beta: f64, z: f64) -> f64 {
    assert!(alpha < 0.45);
    let t = (PI * alpha / 2.0).tan();
    let y = z + beta * t;
    let c = Complex64::new(1.0, -beta * t);
    let (rot, dir) = if y > 0.0 {
        (Complex64::from_polar(1.0, -PI * alpha / 2.0), Complex64::new(0.0, -1.0))
    } else {
        (Complex64::from_polar(1.0, PI * alpha / 2.0), Complex64::new(0.0, 1.0))
    };
    let k = c * rot;
    assert!(k.re > 0.0);
    let ay = y.abs();
    let r_hi = (45.0 / ay).min((45.0 / k.re).powf(1.0 / alpha));
    let (t_lo, t_hi) = ((1e-16f64).ln(), r_hi.ln());
    let (gx, gw) = gauss_legendre(16);
    let panels = 4000;
    let h = (t_hi - t_lo) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = t_lo + (p as f64 + 0.5) * h;
        for (xi, wi) in gx.iter().zip(&gw) {
            let r = (mid + 0.5 * h * xi).exp();
            sum += (-(k * r.powf(alpha)) - r * ay).exp() * (r * wi * 0.5 * h);
        }
    }
    (dir * sum).re / PI
}

/// Standard density on the grid `x_j = (j - n/2) dx` by FFT of Phi sampled at
/// `u_k = (k - n/2) du`, `du = 2 pi / (n dx)`. Returns (x, f).
pub fn fft_density(alpha: f64, beta: f64, dx: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n % 4 == 0);
    let du = 2.0 * PI / (n as f64 * dx);
    let half = (n / 2) as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let u = (k as f64 - half) * du;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            cf0(alpha, beta, 1.0, 0.0, u) * sign
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let xs = (0..n).map(|j| (j as f64 - half) * dx).collect();
    let fs = buf
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * v.re * du / (2.0 * PI)
        })
        .collect();
    (xs, fs)
}

/// Levy density with location `mu` and scale `c` (one-parameterization).
pub fn levy(x: f64, mu: f64, c: f64) -> f64 {
    if x <= mu {
        return 0.0;
    }
    let d = x - mu;
    (c / (2.0 * PI)).sqrt() * (-c / (2.0 * d)).exp() / d.powf(1.5)
}

/// Latin hypercube of `n` points in `[lo, hi]^4`.
pub fn latin_hypercube(n: usize, lo: [f64; 4], hi: [f64; 4], seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for k in 0..4 {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            strata.swap(i, rng.random_range(0..=i));
        }
        cols.push(strata.iter().map(|&s| lo[k] + (hi[k] - lo[k]) * (s as f64 + rng.random::<f64>()) / n as f64).collect());
    }
    (0..n).map(|i| [cols[0][i], cols[1][i], cols[2][i], cols[3][i]]).collect()
}

/// Adaptive Gauss-Kronrod-free Simpson on [a, b]; used for normalization.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}
