//! Hermite power variations `V_n` and their regime-dependent renormalizations.
//!
//! With `threshold = 1 − 1/(2q)`:
//!
//! * `H < threshold`: `Z_n = V_n / (σ_{q,H} √n)`, Gaussian limit;
//! * `H = threshold`: `Z_n = V_n / (σ_H √(n log n))`, Gaussian limit;
//! * `H > threshold`: `Z_n = V_n / n^{1 − q(1 − H)}`, Hermite-distributed limit.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fgn::{rho, FgnPath, FgnSampler, Hurst, SamplerMethod, Seed};
use crate::hermite::{hermite_eval, HermiteOrder};
use crate::numerics::{binomial, hurwitz_zeta, CompensatedSum};

/// Distance from the threshold within which `H` counts as critical.
pub const CRITICAL_TOL: f64 = 1e-12;
/// Absolute accuracy of `σ²_{q,H}` cached inside a subcritical [`RegimeSpec`].
pub const DEFAULT_SIGMA_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Regime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// `1 − 1/(2q)`.
pub fn threshold(q: HermiteOrder) -> f64 {
    1.0 - 1.0 / (2.0 * q.as_f64())
}

/// A `(q, H)` pair classified against the threshold, with its normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSpec {
    pub q: HermiteOrder,
    pub h: Hurst,
    pub regime: Regime,
    pub threshold: f64,
    sigma: Option<f64>,
}

impl RegimeSpec {
    pub fn new(q: HermiteOrder, h: Hurst) -> Result<Self> {
        let t = threshold(q);
        let regime = if h.value() < t - CRITICAL_TOL {
            Regime::Subcritical
        } else if h.value() > t + CRITICAL_TOL {
            Regime::Supercritical
        } else {
            Regime::Critical
        };
        let sigma = match regime {
            Regime::Subcritical => Some(sigma_subcritical(q, h, DEFAULT_SIGMA_TOL)?),
            Regime::Critical => Some(sigma_critical(q)),
            Regime::Supercritical => None,
        };
        Ok(RegimeSpec {
            q,
            h,
            regime,
            threshold: t,
            sigma,
        })
    }

    /// The critical pair `(q, 1 − 1/(2q))`, with `H` computed from `q`.
    pub fn critical(q: HermiteOrder) -> Self {
        let t = threshold(q);
        RegimeSpec {
            q,
            h: Hurst::new(t).expect("threshold lies in (0, 1)"),
            regime: Regime::Critical,
            threshold: t,
            sigma: Some(sigma_critical(q)),
        }
    }

    /// `σ_{q,H}` (subcritical) or `σ_H` (critical); `None` when supercritical.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        if self.regime == regime {
            Ok(())
        } else {
            Err(Error::RegimeMismatch {
                expected: regime.name(),
                actual: self.regime.name(),
                q: self.q.get(),
                h: self.h.value(),
            })
        }
    }

    /// Divisor `d(n)` with `Z_n = V_n / d(n)`.
    pub fn divisor(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        match self.regime {
            Regime::Subcritical => {
                if n == 0 {
                    return Err(Error::ResolutionTooSmall { n, min: 1 });
                }
                Ok(self.sigma.expect("subcritical sigma") * nf.sqrt())
            }
            Regime::Critical => {
                if n < 2 {
                    return Err(Error::ResolutionTooSmall { n, min: 2 });
                }
                Ok(self.sigma.expect("critical sigma") * (nf * nf.ln()).sqrt())
            }
            Regime::Supercritical => {
                if n == 0 {
                    return Err(Error::ResolutionTooSmall { n, min: 1 });
                }
                let q = self.q.as_f64();
                Ok(nf.powf(1.0 - q * (1.0 - self.h.value())))
            }
        }
    }
}

/// One evaluated statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Statistic {
    pub q: u32,
    #[serde(rename = "H")]
    pub h: f64,
    pub regime: Regime,
    pub n: usize,
    pub vn: f64,
    pub zn: f64,
}

impl Statistic {
    pub fn compute(spec: &RegimeSpec, path: &FgnPath) -> Result<Self> {
        if path.h != spec.h {
            return Err(Error::HurstMismatch {
                expected: spec.h.value(),
                found: path.h.value(),
            });
        }
        let vn = v_n(spec.q, path);
        let zn = normalize(spec, vn, path.n())?;
        Ok(Statistic {
            q: spec.q.get(),
            h: spec.h.value(),
            regime: spec.regime,
            n: path.n(),
            vn,
            zn,
        })
    }
}

/// `V_n = Σ_k H_q(xi[k])`.
pub fn v_n(q: HermiteOrder, path: &FgnPath) -> f64 {
    path.xi.iter().map(|&x| hermite_eval(q.get(), x)).sum()
}

/// `Z_n` from `V_n` with the renormalization of `spec.regime`.
pub fn normalize(spec: &RegimeSpec, vn: f64, n: usize) -> Result<f64> {
    Ok(vn / spec.divisor(n)?)
}

/// `σ_H = √(2 q! ((2q−1)(q−1)/(2q²))^q)`, the critical-regime constant.
pub fn sigma_critical(q: HermiteOrder) -> f64 {
    let qf = q.as_f64();
    let base = (2.0 * qf - 1.0) * (qf - 1.0) / (2.0 * qf * qf);
    (2.0 * q.factorial() * base.powi(q.get() as i32)).sqrt()
}

/// Result of summing `σ² = q! Σ_{r∈ℤ} ρ_H(r)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    pub sigma2: f64,
    /// Lags `|r| ≤ cutoff` are summed term by term.
    pub cutoff: u64,
    /// Contribution of `|r| > cutoff` (both signs, including `q!`).
    pub tail: f64,
    /// Bound on the error of `tail` (first omitted expansion order).
    pub error_bound: f64,
    /// Integral majorant `2 q! (H|2H−1|)^q (cutoff−1)^{1−P}/(P−1)` of `|tail|`, `P = q(2−2H)`.
    pub tail_majorant: f64,
}

const TAIL_ORDERS: usize = 12;

/// Breuer–Major variance series with an exact tail.
///
/// For `r ≥ 4`, `ρ_H(r) = r^{2H−2} Σ_j C(2H, 2j+2) r^{−2j}` converges, so
/// `ρ^q` expands into powers `r^{−P−2j}` and the tail beyond the cutoff is a
/// finite combination of Hurwitz zeta values.
pub fn breuer_major_series(q: HermiteOrder, h: Hurst, tol: f64) -> Result<SeriesSum> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let qi = q.get() as usize;
    let hv = h.value();
    let p = q.as_f64() * (2.0 - 2.0 * hv);
    if p <= 1.0 + 1e-12 {
        return Err(Error::NonSummable { q: q.get(), h: hv });
    }
    // coefficients of E(y) = Σ_j C(2H, 2j+2) y^j, then E(y)^q truncated
    let e: Vec<f64> = (0..=TAIL_ORDERS).map(|j| binomial(2.0 * hv, 2 * j + 2)).collect();
    let mut d = vec![0.0; TAIL_ORDERS + 1];
    d[0] = 1.0;
    for _ in 0..qi {
        let mut next = vec![0.0; TAIL_ORDERS + 1];
        for (i, di) in d.iter().enumerate() {
            for (j, ej) in e.iter().enumerate().take(TAIL_ORDERS + 1 - i) {
                next[i + j] += di * ej;
            }
        }
        d = next;
    }
    let qfact = q.factorial();
    let c = hv * (2.0 * hv - 1.0).abs();

    let mut cutoff: u64 = 16;
    loop {
        let a = cutoff as f64 + 1.0;
        let tail_one_side: f64 = (0..TAIL_ORDERS)
            .map(|j| d[j] * hurwitz_zeta(p + 2.0 * j as f64, a))
            .sum();
        let error_bound =
            2.0 * qfact * (d[TAIL_ORDERS].abs() * hurwitz_zeta(p + 2.0 * TAIL_ORDERS as f64, a) + 1e-16 * tail_one_side.abs());
        if error_bound <= tol || cutoff >= 1 << 24 {
            let head: CompensatedSum = (1..=cutoff as i64).rev().map(|r| rho(h, r).powi(qi as i32)).collect();
            let sum = 1.0 + 2.0 * head.value();
            let tail = 2.0 * qfact * tail_one_side;
            let tail_majorant =
                2.0 * qfact * c.powi(qi as i32) * (cutoff as f64 - 1.0).powf(1.0 - p) / (p - 1.0);
            return Ok(SeriesSum {
                sigma2: qfact * sum + tail,
                cutoff,
                tail,
                error_bound,
                tail_majorant,
            });
        }
        cutoff *= 2;
    }
}

/// `σ_{q,H} = √(q! Σ_{r∈ℤ} ρ_H(r)^q)` for `H < 1 − 1/(2q)`.
pub fn sigma_subcritical(q: HermiteOrder, h: Hurst, tol: f64) -> Result<f64> {
    if h.value() >= threshold(q) - CRITICAL_TOL {
        return Err(Error::NonSummable { q: q.get(), h: h.value() });
    }
    Ok(breuer_major_series(q, h, tol)?.sigma2.sqrt())
}

/// Lag sums of `ρ^q` over `|r| < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSums {
    /// `Σ_{k,l<n} ρ(k−l)^q = Σ_{|r|<n} (n−|r|) ρ(r)^q`
    pub weighted: f64,
    /// `Σ_{|r|<n} ρ(r)^q`
    pub plain: f64,
    /// `Σ_{|r|<n} |r| ρ(r)^q`
    pub first_moment: f64,
}

/// O(n) evaluation of [`LagSums`]; small terms are accumulated first.
pub fn lag_sums(q: u32, h: Hurst, n: usize) -> LagSums {
    let nf = n as f64;
    let mut weighted = CompensatedSum::new();
    let mut plain = CompensatedSum::new();
    let mut first = CompensatedSum::new();
    for r in (1..n).rev() {
        let v = rho(h, r as i64).powi(q as i32);
        let rf = r as f64;
        weighted.add(2.0 * (nf - rf) * v);
        plain.add(2.0 * v);
        first.add(2.0 * rf * v);
    }
    weighted.add(nf);
    plain.add(1.0);
    LagSums {
        weighted: weighted.value(),
        plain: plain.value(),
        first_moment: first.value(),
    }
}

/// Exact `Var(Z_n) = c(n) q! Σ_{k,l<n} ρ(k−l)^q` with `c(n) = 1/divisor(n)²`.
pub fn variance_zn_exact(spec: &RegimeSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::ResolutionTooSmall { n, min: 2 });
    }
    let d = spec.divisor(n)?;
    Ok(spec.q.factorial() * lag_sums(spec.q.get(), spec.h, n).weighted / (d * d))
}

/// `Z_n` for `batch` independent exact paths drawn from `seed.child(i)`.
pub fn sample_zn(spec: &RegimeSpec, n: usize, batch: usize, seed: Seed) -> Result<Vec<f64>> {
    let sampler = FgnSampler::new(spec.h, n, SamplerMethod::Auto)?;
    let d = spec.divisor(n)?;
    let q = spec.q;
    Ok(sampler.map_batch(seed, batch, |p| v_n(q, p) / d))
}
