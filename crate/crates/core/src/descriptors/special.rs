//! Special functions for the spherical expansion.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

/// Index of `(l, m)` in the flat `(l_max + 1)^2` harmonic layout, `m` in `-l..=l`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    (l * l) + (l as i64 + m) as usize
}

/// Real spherical harmonics `Y_lm` for `l <= l_max` at the direction of `(x, y, z)`.
///
/// `Y_l0 = N_l0 P_l(cos t)`, `Y_lm = sqrt(2) N_lm P_l^m(cos t) cos(m p)` and
/// `Y_l,-m = sqrt(2) N_lm P_l^m(cos t) sin(m p)` for `m > 0`, without the
/// Condon-Shortley phase. The direction need not be normalized but must be
/// nonzero.
pub fn real_spherical_harmonics(l_max: usize, dir: [f64; 3]) -> Vec<f64> {
    let r = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let (x, y, z) = (dir[0] / r, dir[1] / r, dir[2] / r);
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];

    // (x + iy)^m = sin^m(t) e^{imp}
    let mut re = vec![1.0; l_max + 1];
    let mut im = vec![0.0; l_max + 1];
    for m in 1..=l_max {
        re[m] = re[m - 1] * x - im[m - 1] * y;
        im[m] = re[m - 1] * y + im[m - 1] * x;
    }

    for m in 0..=l_max {
        // q_l = P_l^m(z) / sin^m(t), a polynomial in z
        let mut q_prev = 0.0;
        let mut q = double_factorial(2 * m as i64 - 1);
        for l in m..=l_max {
            if l > m {
                let next = if l == m + 1 {
                    z * (2 * m + 1) as f64 * q
                } else {
                    ((2 * l - 1) as f64 * z * q - (l + m - 1) as f64 * q_prev) / (l - m) as f64
                };
                q_prev = q;
                q = next;
            }
            let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial_ratio(l - m, l + m)).sqrt();
            if m == 0 {
                out[lm_index(l, 0)] = norm * q;
            } else {
                let f = std::f64::consts::SQRT_2 * norm * q;
                out[lm_index(l, m as i64)] = f * re[m];
                out[lm_index(l, -(m as i64))] = f * im[m];
            }
        }
    }
    out
}

fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// `a! / b!` for `a <= b`.
fn factorial_ratio(a: usize, b: usize) -> f64 {
    ((a + 1)..=b).fold(1.0, |acc, k| acc / k as f64)
}

/// `exp(-x) * i_l(x)` for `l = 0..=l_max`, where `i_l` is the modified
/// spherical Bessel function of the first kind.
///
/// Uses the power series for small arguments and Miller's downward recurrence,
/// normalized by the closed form of `i_0`, otherwise.
pub fn scaled_modified_spherical_bessel(l_max: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() > l_max);
    debug_assert!(x >= 0.0);
    if x < 1.0 {
        for (l, o) in out.iter_mut().enumerate().take(l_max + 1) {
            *o = (-x).exp() * bessel_series(l, x);
        }
        return;
    }

    let start = l_max + 20 + (x + 4.0 * x.sqrt()).ceil() as usize;
    let mut f_next = 0.0;
    let mut f = 1e-300;
    for o in out.iter_mut().take(l_max + 1) {
        *o = 0.0;
    }
    for l in (1..=start).rev() {
        let f_prev = f_next + (2 * l + 1) as f64 / x * f;
        f_next = f;
        f = f_prev;
        if l - 1 <= l_max {
            out[l - 1] = f;
        }
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_next *= 1e-250;
            for o in out.iter_mut().take(l_max + 1) {
                *o *= 1e-250;
            }
        }
    }
    let i0 = -(-2.0 * x).exp_m1() / (2.0 * x);
    let scale = i0 / out[0];
    for o in out.iter_mut().take(l_max + 1) {
        *o *= scale;
    }
}

/// Unscaled `i_l(x)` from its everywhere-convergent power series.
pub fn bessel_series(l: usize, x: f64) -> f64 {
    let lead = x.powi(l as i32) / double_factorial(2 * l as i64 + 1);
    let y = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..1000 {
        term *= y / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    lead * sum
}
