//! Exact evaluation of the supercritical discrepancy `‖f_n − f‖²` between the
//! kernel of `S_n` and the kernel of the limiting Hermite variable.
//!
//! With `a = 2qH − 2q ∈ (−1, 0)` and `K = H^q (2H−1)^q`,
//!
//! ```text
//! delta(n) = K n^{2q−2−2qH} Σ_{|r|<n} (n − |r|) { t1(r) − 2 t2(r) + t3(r) }
//! t1(r) = (∫∫ |r+u−v|^{2H−2})^q
//! t2(r) = ∫ dv (∫ du |r+u−v|^{2H−2})^q
//! t3(r) = ∫∫ |r+u−v|^a
//! ```
//!
//! all integrals over the unit square. The bracket cancels to `O(r^{a−4})`
//! while each term is of order `r^a`, so past [`SERIES_LAG`] it is computed
//! from its expansion in `1/r` rather than by subtraction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fgn::{increment_cov, Hurst};
use crate::hermite::HermiteOrder;
use crate::numerics::{
    binomial, first_difference_pow, graded_unit_rule, hurwitz_zeta, second_difference_pow, CompensatedSum,
};
use crate::table::{write_csv, Cell};
use crate::variations::{lag_sums, Regime, RegimeSpec};

/// Lag from which the bracket is summed from its `1/r` expansion.
pub const SERIES_LAG: u64 = 16;
/// Highest power of `1/r` kept in the bracket expansion.
const SERIES_ORDER: usize = 24;

fn require_supercritical(q: HermiteOrder, h: Hurst) -> Result<RegimeSpec> {
    let spec = RegimeSpec::new(q, h)?;
    spec.require(Regime::Supercritical)?;
    Ok(spec)
}

/// `∫₀¹∫₀¹ |r+u−v|^{2H−2} du dv`.
pub fn inner_uv(h: Hurst, r: u64) -> Result<f64> {
    let hv = h.require_long_memory()?.value();
    Ok(second_difference_pow(2.0 * hv, r) / (2.0 * hv * (2.0 * hv - 1.0)))
}

/// `∫₀¹ (∫₀¹ |r+u−v|^{2H−2} du)^p dv` for any power `p ≥ 1`.
pub fn middle_term_pow(p: u32, h: Hurst, r: u64) -> Result<f64> {
    let hv = h.require_long_memory()?.value();
    if p == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let beta = 2.0 * hv - 1.0;
    let rf = r as f64;
    let g = |v: f64| -> f64 {
        if r == 0 {
            ((1.0 - v).powf(beta) + v.powf(beta)) / beta
        } else {
            first_difference_pow(beta, rf - v) / beta
        }
    };
    let sum: CompensatedSum = graded_unit_rule()
        .iter()
        .map(|&(v, w)| w * g(v).powi(p as i32))
        .collect();
    Ok(sum.value())
}

/// `∫₀¹ (∫₀¹ |r+u−v|^{2H−2} du)^q dv`.
pub fn middle_term(q: HermiteOrder, h: Hurst, r: u64) -> Result<f64> {
    middle_term_pow(q.get(), h, r)
}

/// `∫₀¹∫₀¹ |r+u−v|^{2qH−2q} du dv`, finite only above the threshold.
pub fn third_term(q: HermiteOrder, h: Hurst, r: u64) -> Result<f64> {
    let spec = require_supercritical(q, h)?;
    let a = 2.0 * q.as_f64() * spec.h.value() - 2.0 * q.as_f64();
    Ok(second_difference_pow(a + 2.0, r) / ((a + 1.0) * (a + 2.0)))
}

/// The three terms at one lag and their combination `t1 − 2 t2 + t3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BracketTerm {
    pub r: u64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub bracket: f64,
}

/// `bracket(r) = r^a Σ_{k even, k ≥ 4} c_k r^{−k}` for `r ≥ SERIES_LAG`.
///
/// Writing `u − v = (u − ½) − (v − ½)`, each term is a moment series in
/// `ε = 1/r`: the inner integral of `t2` is a polynomial in `ε` and
/// `w = v − ½`, raised to the `q`-th power before integrating over `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketSeries {
    a: f64,
    coeffs: Vec<f64>,
}

fn centered_uniform_moment(i: usize) -> f64 {
    if i % 2 == 1 {
        0.0
    } else {
        0.5f64.powi(i as i32) / (i as f64 + 1.0)
    }
}

fn difference_moment(k: usize) -> f64 {
    // E(U − V)^k for independent uniforms
    if k % 2 == 1 {
        0.0
    } else {
        2.0 / ((k as f64 + 1.0) * (k as f64 + 2.0))
    }
}

fn series_pow(x: &[f64], q: u32) -> Vec<f64> {
    let len = x.len();
    let mut out = vec![0.0; len];
    out[0] = 1.0;
    for _ in 0..q {
        let mut next = vec![0.0; len];
        for (i, oi) in out.iter().enumerate() {
            for (j, xj) in x.iter().enumerate().take(len - i) {
                next[i + j] += oi * xj;
            }
        }
        out = next;
    }
    out
}

type Bivariate = Vec<Vec<f64>>;

fn bivariate_pow(x: &Bivariate, q: u32) -> Bivariate {
    let len = x.len();
    let mut out = vec![vec![0.0; len]; len];
    out[0][0] = 1.0;
    for _ in 0..q {
        let mut next = vec![vec![0.0; len]; len];
        for i in 0..len {
            for j in 0..=i {
                let o = out[i][j];
                if o == 0.0 {
                    continue;
                }
                for k in 0..len - i {
                    for l in 0..=k {
                        next[i + k][j + l] += o * x[k][l];
                    }
                }
            }
        }
        out = next;
    }
    out
}

impl BracketSeries {
    pub fn new(q: HermiteOrder, h: Hurst) -> Result<Self> {
        let raw = Self::raw_coefficients(q, h)?;
        let a = 2.0 * q.as_f64() * h.value() - 2.0 * q.as_f64();
        // orders below 4 and all odd orders cancel identically
        let coeffs = raw
            .iter()
            .enumerate()
            .map(|(k, &c)| if k >= 4 && k % 2 == 0 { c } else { 0.0 })
            .collect();
        Ok(BracketSeries { a, coeffs })
    }

    /// Coefficients of `t1 − 2 t2 + t3` in `ε`, before discarding the orders
    /// that vanish analytically.
    pub fn raw_coefficients(q: HermiteOrder, h: Hurst) -> Result<Vec<f64>> {
        let spec = require_supercritical(q, h)?;
        let hv = spec.h.value();
        let len = SERIES_ORDER + 1;
        let b = 2.0 * hv - 2.0;
        let a = q.as_f64() * b;

        let inner: Vec<f64> = (0..len).map(|k| binomial(b, k) * difference_moment(k)).collect();
        let t1 = series_pow(&inner, q.get());

        let mut g: Bivariate = vec![vec![0.0; len]; len];
        for (k, row) in g.iter_mut().enumerate() {
            let cb = binomial(b, k);
            for i in (0..=k).step_by(2) {
                let j = k - i;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                row[j] += cb * binomial(k as f64, i) * centered_uniform_moment(i) * sign;
            }
        }
        let gq = bivariate_pow(&g, q.get());
        let t2: Vec<f64> = gq
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, c)| c * centered_uniform_moment(j)).sum())
            .collect();

        let t3: Vec<f64> = (0..len).map(|k| binomial(a, k) * difference_moment(k)).collect();

        Ok((0..len).map(|k| t1[k] - 2.0 * t2[k] + t3[k]).collect())
    }

    pub fn exponent(&self) -> f64 {
        self.a
    }

    /// `c_k` for `k = 0..=SERIES_ORDER`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, r: u64) -> f64 {
        let rf = r as f64;
        let e2 = 1.0 / (rf * rf);
        let mut acc = 0.0;
        for k in (4..self.coeffs.len()).step_by(2).rev() {
            acc = acc * e2 + self.coeffs[k];
        }
        rf.powf(self.a) * acc * e2 * e2
    }

    /// `Σ_{r ≥ from} bracket(r)` through Hurwitz zeta values.
    pub fn tail_sum(&self, from: u64) -> f64 {
        assert!(from >= SERIES_LAG);
        (4..self.coeffs.len())
            .step_by(2)
            .rev()
            .map(|k| self.coeffs[k] * hurwitz_zeta(k as f64 - self.a, from as f64))
            .sum()
    }
}

/// Bracket terms for lags `0..len`, extended on demand.
#[derive(Debug, Clone)]
pub struct BracketTable {
    q: HermiteOrder,
    h: Hurst,
    series: BracketSeries,
    terms: Vec<BracketTerm>,
}

impl BracketTable {
    pub fn new(q: HermiteOrder, h: Hurst) -> Result<Self> {
        Ok(BracketTable {
            q,
            h,
            series: BracketSeries::new(q, h)?,
            terms: Vec::new(),
        })
    }

    pub fn q(&self) -> HermiteOrder {
        self.q
    }

    pub fn h(&self) -> Hurst {
        self.h
    }

    pub fn series(&self) -> &BracketSeries {
        &self.series
    }

    pub fn terms(&self) -> &[BracketTerm] {
        &self.terms
    }

    /// Ensure lags `0..len` are available.
    pub fn extend_to(&mut self, len: usize) -> Result<()> {
        let start = self.terms.len() as u64;
        if len as u64 <= start {
            return Ok(());
        }
        let (q, h, series) = (self.q, self.h, &self.series);
        let fresh: Result<Vec<BracketTerm>> = (start..len as u64)
            .into_par_iter()
            .map(|r| evaluate_term(q, h, series, r))
            .collect();
        self.terms.extend(fresh?);
        Ok(())
    }

    /// `Σ_{|r|<n} (n − |r|) bracket(r)`.
    fn weighted_sum(&mut self, n: usize) -> Result<f64> {
        self.extend_to(n)?;
        let nf = n as f64;
        let mut sum = CompensatedSum::new();
        for t in self.terms[1..n].iter().rev() {
            sum.add(2.0 * (nf - t.r as f64) * t.bracket);
        }
        sum.add(nf * self.terms[0].bracket);
        Ok(sum.value())
    }

    pub fn discrepancy(&mut self, n: usize) -> Result<DiscrepancyReport> {
        if n == 0 {
            return Err(Error::ResolutionTooSmall { n, min: 1 });
        }
        let (qf, hv) = (self.q.as_f64(), self.h.value());
        let k = (hv * (2.0 * hv - 1.0)).powi(self.q.get() as i32);
        let nf = n as f64;
        let delta = k * nf.powf(2.0 * qf - 2.0 - 2.0 * qf * hv) * self.weighted_sum(n)?;
        Ok(DiscrepancyReport {
            q: self.q.get(),
            h: hv,
            n,
            delta,
            l2_error: self.q.factorial() * delta,
            normalized: delta * nf.powf(2.0 * qf * hv - 2.0 * qf + 1.0),
            terms: self.terms[..n].to_vec(),
        })
    }

    /// `lim normalized(n) = H^q(2H−1)^q Σ_{r∈ℤ} bracket(r)`.
    pub fn limit_constant(&mut self) -> Result<f64> {
        let head = SERIES_LAG as usize;
        self.extend_to(head)?;
        let mut sum = CompensatedSum::new();
        sum.add(2.0 * self.series.tail_sum(SERIES_LAG));
        for t in self.terms[1..head].iter().rev() {
            sum.add(2.0 * t.bracket);
        }
        sum.add(self.terms[0].bracket);
        let hv = self.h.value();
        Ok((hv * (2.0 * hv - 1.0)).powi(self.q.get() as i32) * sum.value())
    }

    /// CSV with columns `r,t1,t2,t3,bracket`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let rows: Vec<Vec<Cell>> = self
            .terms
            .iter()
            .map(|t| vec![t.r.into(), t.t1.into(), t.t2.into(), t.t3.into(), t.bracket.into()])
            .collect();
        write_csv(out, &["r", "t1", "t2", "t3", "bracket"], &rows)
    }
}

fn evaluate_term(q: HermiteOrder, h: Hurst, series: &BracketSeries, r: u64) -> Result<BracketTerm> {
    let t1 = inner_uv(h, r)?.powi(q.get() as i32);
    let t2 = middle_term(q, h, r)?;
    let t3 = third_term(q, h, r)?;
    let bracket = if r >= SERIES_LAG {
        series.eval(r)
    } else {
        t1 - 2.0 * t2 + t3
    };
    Ok(BracketTerm { r, t1, t2, t3, bracket })
}

/// One bracket term.
pub fn bracket(q: HermiteOrder, h: Hurst, r: u64) -> Result<BracketTerm> {
    let series = BracketSeries::new(q, h)?;
    evaluate_term(q, h, &series, r)
}

/// `delta(n)` with its normalized form and the per-lag terms used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub q: u32,
    #[serde(rename = "H")]
    pub h: f64,
    pub n: usize,
    /// `‖f_n − f‖²` without the `q!` factor.
    pub delta: f64,
    /// `q! · delta = E|S_n − Z|²`.
    pub l2_error: f64,
    /// `delta · n^{2qH−2q+1}`.
    pub normalized: f64,
    #[serde(skip)]
    pub terms: Vec<BracketTerm>,
}

pub fn discrepancy(q: HermiteOrder, h: Hurst, n: usize) -> Result<DiscrepancyReport> {
    BracketTable::new(q, h)?.discrepancy(n)
}

/// [`discrepancy`] over several resolutions sharing one bracket table.
pub fn discrepancy_sweep(q: HermiteOrder, h: Hurst, ns: &[usize]) -> Result<Vec<DiscrepancyReport>> {
    let mut table = BracketTable::new(q, h)?;
    if let Some(&max) = ns.iter().max() {
        table.extend_to(max)?;
    }
    ns.iter().map(|&n| table.discrepancy(n)).collect()
}

/// CSV with columns `n,delta,l2_error,normalized`.
pub fn write_sweep_csv<W: std::io::Write>(out: W, reports: &[DiscrepancyReport]) -> std::io::Result<()> {
    let rows: Vec<Vec<Cell>> = reports
        .iter()
        .map(|r| vec![r.n.into(), r.delta.into(), r.l2_error.into(), r.normalized.into()])
        .collect();
    write_csv(out, &["n", "delta", "l2_error", "normalized"], &rows)
}

/// `‖f_n‖² = n^{2q−2−2qH} Σ_{|r|<n} (n − |r|) ρ(r)^q`, without `q!`.
pub fn lag_norm_sq(q: HermiteOrder, h: Hurst, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ResolutionTooSmall { n, min: 1 });
    }
    let (qf, hv, nf) = (q.as_f64(), h.value(), n as f64);
    Ok(nf.powf(2.0 * qf - 2.0 - 2.0 * qf * hv) * lag_sums(q.get(), h, n).weighted)
}

/// `‖f_n‖² = n^{2q−2} Σ_{k,l} ⟨1_k, 1_l⟩^q` from interval covariances.
pub fn gram_norm_sq(q: HermiteOrder, h: Hurst, n: usize) -> Result<f64> {
    cross_inner(q, h, n, n)
}

/// `⟨f_n, f_N⟩ = (nN)^{q−1} Σ_{k<n, j<N} ⟨1^n_k, 1^N_j⟩^q`.
fn cross_inner(q: HermiteOrder, h: Hurst, n: usize, big_n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ResolutionTooSmall { n, min: 1 });
    }
    let (nf, bf) = (n as f64, big_n as f64);
    let qi = q.get() as i32;
    let rows: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k as f64 / nf, (k + 1) as f64 / nf);
            let mut s = CompensatedSum::new();
            for j in 0..big_n {
                let c = increment_cov(h, a, b, j as f64 / bf, (j + 1) as f64 / bf)?;
                s.add(c.powi(qi));
            }
            Ok(s.value())
        })
        .collect();
    let total: CompensatedSum = rows?.into_iter().collect();
    Ok((nf * bf).powi(qi - 1) * total.value())
}

/// Exact `E|S_n − S_N|² = q! (‖f_n‖² + ‖f_N‖² − 2⟨f_n, f_N⟩)` for nested grids.
pub fn cross_gram(q: HermiteOrder, h: Hurst, n: usize, big_n: usize) -> Result<f64> {
    require_supercritical(q, h)?;
    if n == 0 || !big_n.is_multiple_of(n) {
        return Err(Error::NotDivisible { n: big_n, divisor: n });
    }
    if n == big_n {
        return Ok(0.0);
    }
    let d = lag_norm_sq(q, h, n)? + lag_norm_sq(q, h, big_n)? - 2.0 * cross_inner(q, h, n, big_n)?;
    Ok(q.factorial() * d.max(0.0))
}

/// The total variation rate `n^{1 − 1/(2q) − H}` (unknown constant omitted).
pub fn tv_rate_curve(q: HermiteOrder, h: Hurst, ns: &[usize]) -> Result<Vec<f64>> {
    require_supercritical(q, h)?;
    let e = 1.0 - 1.0 / (2.0 * q.as_f64()) - h.value();
    Ok(ns.iter().map(|&n| (n as f64).powf(e)).collect())
}
