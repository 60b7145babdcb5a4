//! Shared numerical kernels: accurate power differences, binomial series,
//! Hurwitz zeta, Gauss–Legendre rules and compensated summation.

use std::sync::OnceLock;

/// Generalized binomial coefficient `C(p, k)` for real `p`.
pub fn binomial(p: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c *= (p - j as f64) / (j as f64 + 1.0);
    }
    c
}

/// Lag at and above which the second difference is summed as a convergent
/// binomial series instead of subtracting large powers.
const SERIES_LAG: u64 = 4;

/// `(r+1)^p − 2 r^p + |r−1|^p` for `p > 0` and integer `r ≥ 0`.
///
/// For `r ≥ 4` this uses `r^p · 2 Σ_{k≥1} C(p,2k) r^{−2k}`, which is exact
/// (convergent, not asymptotic) and free of the `eps·r²` cancellation of the
/// direct form.
pub fn second_difference_pow(p: f64, r: u64) -> f64 {
    if r == 0 {
        return 2.0;
    }
    let rf = r as f64;
    if r < SERIES_LAG {
        return (rf + 1.0).powf(p) - 2.0 * rf.powf(p) + (rf - 1.0).powf(p);
    }
    let x2 = 1.0 / (rf * rf);
    let mut coeff = 1.0; // C(p, 2k) built incrementally
    let mut xk = 1.0;
    let mut sum = 0.0;
    for k in 1..=200usize {
        let j = 2 * k;
        coeff *= (p - (j - 2) as f64) / (j - 1) as f64;
        coeff *= (p - (j - 1) as f64) / j as f64;
        xk *= x2;
        let term = coeff * xk;
        sum += term;
        if term == 0.0 || term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 * rf.powf(p) * sum
}

/// `(x+1)^p − x^p` for `x ≥ 0`, accurate for large `x`.
pub fn first_difference_pow(p: f64, x: f64) -> f64 {
    if x >= 1.0 {
        x.powf(p) * (p * (1.0 / x).ln_1p()).exp_m1()
    } else {
        (x + 1.0).powf(p) - x.powf(p)
    }
}

const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (a+k)^{−s}` for `s > 1`, `a > 0`,
/// by direct summation up to a shift followed by Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1, a > 0");
    let shift_to = 20.0_f64.max(s);
    let mut head = 0.0;
    let mut x = a;
    while x < shift_to {
        head += x.powf(-s);
        x += 1.0;
    }
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) / (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut pow = x.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * pow;
        tail += term;
        if term.abs() < 1e-20 * tail.abs() {
            break;
        }
        let jj = (2 * j + 2) as f64;
        rising *= (s + jj - 1.0) * (s + jj);
        fact *= (jj + 1.0) * (jj + 2.0);
        pow /= x * x;
    }
    head + tail
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let nf = order as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Number of Gauss–Legendre nodes per half-interval in [`graded_unit_rule`].
pub const GRADED_NODES: usize = 64;
const GRADING_POWER: f64 = 4.0;

/// Quadrature rule on `[0, 1]` that resolves algebraic endpoint behaviour.
///
/// Each half of the interval receives a 64-node Gauss–Legendre rule after the
/// substitution `v = t^4 / 2` (mirrored on the right half), which turns an
/// endpoint factor `v^β` into the smooth `t^{4β+3}`.
pub fn graded_unit_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_legendre(GRADED_NODES);
        let p = GRADING_POWER;
        let mut rule = Vec::with_capacity(2 * GRADED_NODES);
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (xi + 1.0);
            let v = 0.5 * t.powf(p);
            let jac = 0.5 * p * t.powf(p - 1.0) * 0.5 * wi;
            rule.push((v, jac));
            rule.push((1.0 - v, jac));
        }
        rule
    })
}

/// Neumaier-compensated sum, independent of rounding order effects up to O(eps).
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
