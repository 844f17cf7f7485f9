//! Integer-order Bessel functions of the first and second kind, their zeros,
//! and spherical Bessel functions of low order.

use std::f64::consts::{FRAC_2_PI, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 12.0;

fn series_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k > half {
            break;
        }
        k += 1.0;
        if k > 500.0 {
            break;
        }
    }
    sum
}

/// Coefficients of the large-argument expansion, returned as (P, Q).
fn hankel_pq(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu as f64).powi(2);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() > last {
            break;
        }
        last = a.abs();
        // a_k/x^k alternates between Q (odd k) and P (even k) with sign (-1)^floor(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

fn hankel(nu: u32, x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(nu, x);
    let chi = x - (0.5 * nu as f64 + 0.25) * PI;
    let amp = (FRAC_2_PI / x).sqrt();
    let (s, c) = chi.sin_cos();
    (amp * (p * c - q * s), amp * (p * s + q * c))
}

/// J_n(x) for integer n ≥ 0 and real x.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n.is_multiple_of(2) { v } else { -v };
    }
    if x <= SERIES_LIMIT || n as f64 > x {
        return series_j(n, x);
    }
    let (j0, _) = hankel(0, x);
    if n == 0 {
        return j0;
    }
    let (j1, _) = hankel(1, x);
    upward(n, x, j0, j1)
}

/// Y_n(x) for integer n ≥ 0 and x > 0.
pub fn bessel_y(n: u32, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_y requires a positive argument");
    let (y0, y1) = if x <= SERIES_LIMIT {
        (series_y0(x), series_y1(x))
    } else {
        (hankel(0, x).1, hankel(1, x).1)
    };
    match n {
        0 => y0,
        1 => y1,
        _ => upward(n, x, y0, y1),
    }
}

fn upward(n: u32, x: f64, f0: f64, f1: f64) -> f64 {
    let (mut a, mut b) = (f0, f1);
    for k in 1..n {
        let c = 2.0 * k as f64 / x * b - a;
        a = b;
        b = c;
    }
    b
}

fn series_y0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        let t = -term * harmonic;
        sum += t;
        if t.abs() < 1e-18 * sum.abs().max(1e-300) && kf > 0.5 * x {
            break;
        }
    }
    FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * series_j(0, x) + sum)
}

fn series_y1(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    // sum_k (-1)^k (psi(k+1) + psi(k+2)) (x/2)^{2k+1} / (k! (k+1)!)
    let mut term = half;
    let mut psi_a = -EULER_GAMMA;
    let mut psi_b = 1.0 - EULER_GAMMA;
    let mut sum = term * (psi_a + psi_b);
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        psi_a += 1.0 / kf;
        psi_b += 1.0 / (kf + 1.0);
        let t = term * (psi_a + psi_b);
        sum += t;
        if t.abs() < 1e-18 * sum.abs() && kf > half {
            break;
        }
    }
    -FRAC_2_PI / x + FRAC_2_PI * half.ln() * series_j(1, x) - sum / PI
}

/// Bisect a bracketed sign change of `f` down to relative width 1e-14.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * mid.abs().max(1e-300) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The first `count` positive zeros of `f`, found by scanning with `step`
/// from `start` and bisecting each sign change.
pub fn scan_zeros(f: impl Fn(f64) -> f64, start: f64, step: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let mut a = start;
    let mut fa = f(a);
    while zeros.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if (fa < 0.0) != (fb < 0.0) {
            zeros.push(bisect(&f, a, b));
        }
        a = b;
        fa = fb;
        if a > 1e6 {
            break;
        }
    }
    zeros
}

/// The s-th positive zero (s ≥ 1) of J_n.
pub fn bessel_j_zero(n: u32, s: usize) -> f64 {
    bessel_j_zeros(n, s)[s - 1]
}

/// First `count` positive zeros of J_n, ascending.
pub fn bessel_j_zeros(n: u32, count: usize) -> Vec<f64> {
    // McMahon: zeros are spaced by about pi, the first sits above n.
    let start = if n == 0 { 0.5 } else { n as f64 };
    scan_zeros(|x| bessel_j(n, x), start, 0.05, count)
}

/// Spherical Bessel functions (j_l(x), y_l(x)) by upward recurrence; accurate for x > l.
pub fn spherical_jy(l: u32, x: f64) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    let mut j0 = s / x;
    let mut y0 = -c / x;
    if l == 0 {
        return (j0, y0);
    }
    let mut j1 = s / (x * x) - c / x;
    let mut y1 = -c / (x * x) - s / x;
    for k in 1..l {
        let f = (2 * k + 1) as f64 / x;
        let j2 = f * j1 - j0;
        let y2 = f * y1 - y0;
        j0 = j1;
        j1 = j2;
        y0 = y1;
        y1 = y2;
    }
    (j1, y1)
}
