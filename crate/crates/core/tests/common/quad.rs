//! Double-exponential (tanh-sinh) quadrature used as an independent oracle.
//!
//! Points are placed by distance from the nearest endpoint, so algebraic
//! endpoint singularities are resolved without special casing. Each level
//! halves the step and only evaluates the new odd nodes.

use std::f64::consts::FRAC_PI_2;

const MAX_LEVEL: u32 = 14;
const T_MAX: f64 = 6.5;

/// `∫_a^b f(x) dx`, refined until two successive levels agree to `tol` relative.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    assert!(b > a);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    // contribution of the node pair at parameter t (a single node at t = 0)
    let pair = |t: f64| -> f64 {
        if t == 0.0 {
            return half * FRAC_PI_2 * f(mid);
        }
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u).exp();
        // distance of the nodes from the endpoints, relative to b - a
        let s = e / (1.0 + e);
        let w = half * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if w == 0.0 {
            return 0.0;
        }
        let d = (b - a) * s;
        let mut acc = 0.0;
        let xl = a + d;
        if xl > a && xl < b {
            acc += w * f(xl);
        }
        let xr = b - d;
        if xr > a && xr < b {
            acc += w * f(xr);
        }
        acc
    };

    let mut h = 1.0;
    let mut sum: f64 = (0..=(T_MAX as usize)).map(|j| pair(j as f64)).sum();
    let mut estimate = h * sum;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let mut j = 1usize;
        let mut fresh = 0.0;
        loop {
            let t = j as f64 * h;
            if t > T_MAX {
                break;
            }
            fresh += pair(t);
            j += 2;
        }
        sum += fresh;
        let next = h * sum;
        let converged = (next - estimate).abs() <= tol * next.abs().max(1e-300);
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// `∫_a^b f` split at the interior points in `breaks`.
pub fn tanh_sinh_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);
    cuts.windows(2).map(|w| tanh_sinh(&f, w[0], w[1], tol)).sum()
}

/// `∫₀¹∫₀¹ |r + u − v|^p du dv` through the density `1 − |s|` of `u − v`.
pub fn lag_kernel_integral(p: f64, r: f64, tol: f64) -> f64 {
    tanh_sinh_split(|s| (1.0 - s.abs()) * (r + s).abs().powf(p), -1.0, 1.0, &[-r, 0.0], tol)
}

/// `∫₀¹ (∫₀¹ |r + u − v|^p du)^q dv` by nested quadrature.
pub fn nested_middle_integral(p: f64, q: i32, r: f64, tol: f64) -> f64 {
    let inner = |v: f64| tanh_sinh_split(|u| (r + u - v).abs().powf(p), 0.0, 1.0, &[v - r], tol).powi(q);
    tanh_sinh_split(inner, 0.0, 1.0, &[1.0 - r, 0.5], tol)
}

#[allow(dead_code)]
pub fn self_check() {
    let v = tanh_sinh(|x| x.powf(-0.4), 0.0, 1.0, 1e-13);
    assert!((v - 1.0 / 0.6).abs() < 1e-11, "{v}");
}
