//! Critical-regime quantities at `H = 1 − 1/(2q)`, where
//! `S_n = V_n / (σ_H √(n log n))`.
//!
//! `S_n` lives in the `q`-th chaos, and `q⁻¹‖DS_n‖²` reduces to a quadratic
//! form in `H_{q−1}(ξ_k)` with Toeplitz matrix `ρ_H(k − l)`. The Berry-type
//! bound `d_TV(S_n, N(0,1)) ≤ 2 √E(1 − q⁻¹‖DS_n‖²)²` is estimated by Monte Carlo.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fgn::{rho_table, CirculantEmbedding, FgnPath, FgnSampler, Hurst, SamplerMethod, Seed};
use crate::hermite::{hermite_eval, HermiteOrder};
use crate::numerics::CompensatedSum;
use crate::variations::{lag_sums, sigma_critical, RegimeSpec};

/// Minimum batch accepted by [`berry_estimate`].
pub const MIN_BATCH: usize = 100;

/// `(q, H = 1 − 1/(2q), σ_H²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSpec {
    pub q: HermiteOrder,
    pub h: Hurst,
    pub sigma2: f64,
}

impl CriticalSpec {
    pub fn new(q: HermiteOrder) -> Self {
        let spec = RegimeSpec::critical(q);
        CriticalSpec {
            q,
            h: spec.h,
            sigma2: sigma_critical(q).powi(2),
        }
    }

    fn scale(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::ResolutionTooSmall { n, min: 2 });
        }
        let nf = n as f64;
        Ok(1.0 / (self.sigma2 * nf * nf.ln()))
    }
}

/// `Var(S_n) = q!/(σ_H² n log n) Σ_{k,l<n} ρ(k−l)^q`.
pub fn variance_sn(spec: &CriticalSpec, n: usize) -> Result<f64> {
    let c = spec.scale(n)?;
    Ok(c * spec.q.factorial() * lag_sums(spec.q.get(), spec.h, n).weighted)
}

/// `1 − A_{q−1}(n) = 1 − q!/(σ² log n) Σ_{|r|<n} ρ^q + q!/(σ² n log n) Σ_{|r|<n} |r| ρ^q`.
pub fn one_minus_a_top(spec: &CriticalSpec, n: usize) -> Result<f64> {
    let c = spec.scale(n)?;
    let s = lag_sums(spec.q.get(), spec.h, n);
    let qf = spec.q.factorial();
    let nf = n as f64;
    Ok(1.0 - c * nf * qf * s.plain + c * qf * s.first_moment)
}

fn check_path(spec: &CriticalSpec, path: &FgnPath) -> Result<()> {
    if path.h != spec.h {
        return Err(Error::HurstMismatch {
            expected: spec.h.value(),
            found: path.h.value(),
        });
    }
    Ok(())
}

fn lowered(spec: &CriticalSpec, path: &FgnPath) -> Vec<f64> {
    let p = spec.q.get() - 1;
    path.xi.iter().map(|&x| hermite_eval(p, x)).collect()
}

/// `q⁻¹‖DS_n‖² = q/(σ_H² n log n) Σ_{k,l} H_{q−1}(ξ_k) H_{q−1}(ξ_l) ρ(k−l)`, O(n²).
pub fn ds_norm_sq(spec: &CriticalSpec, path: &FgnPath) -> Result<f64> {
    check_path(spec, path)?;
    let n = path.n();
    let c = spec.scale(n)?;
    let y = lowered(spec, path);
    let rho = rho_table(spec.h, n);
    let mut total = CompensatedSum::new();
    for (k, &yk) in y.iter().enumerate() {
        let mut row = 0.0;
        for (l, &yl) in y.iter().enumerate().take(k) {
            row += yl * rho[k - l];
        }
        total.add(yk * (2.0 * row + yk));
    }
    Ok(spec.q.as_f64() * c * total.value())
}

/// [`ds_norm_sq`] for many paths at one resolution, in O(n log n) per path
/// through the circulant embedding of the Toeplitz matrix.
#[derive(Debug, Clone)]
pub struct DsNormEvaluator {
    spec: CriticalSpec,
    n: usize,
    scale: f64,
    embedding: CirculantEmbedding,
}

impl DsNormEvaluator {
    pub fn new(spec: CriticalSpec, n: usize) -> Result<Self> {
        let scale = spec.q.as_f64() * spec.scale(n)?;
        Ok(DsNormEvaluator {
            spec,
            n,
            scale,
            embedding: CirculantEmbedding::for_fgn(spec.h, n)?,
        })
    }

    pub fn eval(&self, path: &FgnPath) -> Result<f64> {
        check_path(&self.spec, path)?;
        if path.n() != self.n {
            return Err(Error::SizeMismatch(path.n(), self.n));
        }
        Ok(self.scale * self.embedding.quadratic_form(&lowered(&self.spec, path)))
    }
}

/// Monte Carlo estimate of `E(1 − q⁻¹‖DS_n‖²)²` and the resulting bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub q: u32,
    pub n: usize,
    pub batch: usize,
    pub seed: Seed,
    pub mean_sq: f64,
    pub se: f64,
    /// `2 √mean_sq`
    pub tv_bound: f64,
}

fn summarize(spec: &CriticalSpec, n: usize, seed: Seed, deficits: &[f64]) -> BoundEstimate {
    let b = deficits.len() as f64;
    let sq: Vec<f64> = deficits.iter().map(|d| d * d).collect();
    let mean_sq = sq.iter().copied().collect::<CompensatedSum>().value() / b;
    let var = sq
        .iter()
        .map(|s| (s - mean_sq).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / (b - 1.0);
    BoundEstimate {
        q: spec.q.get(),
        n,
        batch: deficits.len(),
        seed,
        mean_sq,
        se: (var / b).sqrt(),
        tv_bound: 2.0 * mean_sq.sqrt(),
    }
}

/// `tv_bound = 2 √mean((1 − q⁻¹‖DS_n‖²)²)` over `batch` exact paths.
pub fn berry_estimate(spec: &CriticalSpec, n: usize, batch: usize, seed: Seed) -> Result<BoundEstimate> {
    if batch < MIN_BATCH {
        return Err(Error::BatchTooSmall { min: MIN_BATCH, got: batch });
    }
    let eval = DsNormEvaluator::new(*spec, n)?;
    let sampler = FgnSampler::new(spec.h, n, SamplerMethod::Auto)?;
    let deficits: Result<Vec<f64>> = sampler
        .map_batch(seed, batch, |p| eval.eval(p).map(|d| 1.0 - d))
        .into_iter()
        .collect();
    Ok(summarize(spec, n, seed, &deficits?))
}

/// [`berry_estimate`] over caller-supplied paths of a common resolution.
pub fn berry_from_paths(spec: &CriticalSpec, paths: &[FgnPath], seed: Seed) -> Result<BoundEstimate> {
    if paths.len() < MIN_BATCH {
        return Err(Error::BatchTooSmall {
            min: MIN_BATCH,
            got: paths.len(),
        });
    }
    let n = paths[0].n();
    let deficits: Result<Vec<f64>> = paths
        .iter()
        .map(|p| {
            if p.n() != n {
                return Err(Error::SizeMismatch(p.n(), n));
            }
            ds_norm_sq(spec, p).map(|d| 1.0 - d)
        })
        .collect();
    Ok(summarize(spec, n, seed, &deficits?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgn::{covariance_matrix, rho};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(q: u32) -> CriticalSpec {
        CriticalSpec::new(HermiteOrder::new(q).unwrap())
    }

    #[test]
    fn critical_spec_fields() {
        let s = spec(2);
        assert_eq!(s.h.value(), 0.75);
        assert_relative_eq!(s.sigma2, 0.5625, max_relative = 1e-15);
        assert_eq!(spec(5).h.value(), 0.9);
    }

    #[test]
    fn variance_examples() {
        let s = spec(2);
        // the approach to 1 is logarithmic: Var(S_n) = 1 + c/log n + o(1/log n), c ≈ 3.38
        let v16 = variance_sn(&s, 1 << 16).unwrap();
        assert_relative_eq!(v16, 1.3047488694696703, max_relative = 1e-10);
        let v8 = variance_sn(&s, 1 << 8).unwrap();
        assert!((v16 - 1.0).abs() < (v8 - 1.0).abs());
        assert!(variance_sn(&s, 1).is_err());
    }

    #[test]
    fn one_minus_a_top_is_one_minus_variance() {
        for q in [2u32, 3, 4] {
            let s = spec(q);
            for n in [2usize, 4, 64, 1024, 4096] {
                let lhs = one_minus_a_top(&s, n).unwrap();
                let rhs = 1.0 - variance_sn(&s, n).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "q={q} n={n}");
            }
        }
    }

    #[test]
    fn one_minus_a_top_hand_sum() {
        let s = spec(2);
        let h = s.h;
        let r2 = |r: i64| rho(h, r).powi(2);
        let plain = r2(0) + 2.0 * (r2(1) + r2(2) + r2(3));
        let first = 2.0 * (r2(1) + 2.0 * r2(2) + 3.0 * r2(3));
        let l4 = 4f64.ln();
        let expected = 1.0 - 2.0 / (0.5625 * l4) * plain + 2.0 / (0.5625 * 4.0 * l4) * first;
        assert_relative_eq!(one_minus_a_top(&s, 4).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn one_minus_a_top_is_o_of_inverse_log() {
        let s = spec(2);
        for e in 6..=16 {
            let n = 1usize << e;
            let scaled = one_minus_a_top(&s, n).unwrap().abs() * (n as f64).ln();
            assert!(scaled < 4.0, "n = 2^{e}: {scaled}");
        }
    }

    #[test]
    fn ds_norm_examples() {
        let s = spec(2);
        let zero = FgnPath::new(s.h, vec![0.0; 16]).unwrap();
        assert_eq!(ds_norm_sq(&s, &zero).unwrap(), 0.0);
        // n = 2, xi = [1, 1]: H_1 = x, so Σ ρ(k−l) = 2 + 2ρ(1)
        let p = FgnPath::new(s.h, vec![1.0, 1.0]).unwrap();
        let rho1 = 0.5 * (2f64.powf(1.5) - 2.0);
        let expected = 2.0 / (0.5625 * 2.0 * 2f64.ln()) * (2.0 + 2.0 * rho1);
        assert_relative_eq!(ds_norm_sq(&s, &p).unwrap(), expected, max_relative = 1e-14);
        let wrong = FgnPath::new(Hurst::new(0.7).unwrap(), vec![1.0, 1.0]).unwrap();
        assert!(matches!(ds_norm_sq(&s, &wrong), Err(Error::HurstMismatch { .. })));
    }

    #[test]
    fn evaluator_matches_direct() {
        for q in [2u32, 3] {
            let s = spec(q);
            let ev = DsNormEvaluator::new(s, 300).unwrap();
            for i in 0..5 {
                let p = crate::fgn::sample_fgn(s.h, 300, Seed::new(i)).unwrap();
                let a = ds_norm_sq(&s, &p).unwrap();
                let b = ev.eval(&p).unwrap();
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn malliavin_identity_monte_carlo() {
        let s = spec(2);
        let n = 512;
        let ev = DsNormEvaluator::new(s, n).unwrap();
        let sampler = FgnSampler::new(s.h, n, SamplerMethod::Auto).unwrap();
        let vals: Vec<f64> = sampler.map_batch(Seed::new(9), 10_000, |p| ev.eval(p).unwrap());
        let b = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / b;
        let var = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0);
        let target = variance_sn(&s, n).unwrap();
        assert!((m - target).abs() <= 3.0 * (var / b).sqrt(), "{m} vs {target}");
    }

    fn exact_mean_sq_q2(n: usize) -> f64 {
        // X = c ξᵀCξ with ξ ~ N(0, C): E X = c tr C², Var X = 2c² tr C⁴
        let s = spec(2);
        let c = 2.0 / (s.sigma2 * n as f64 * (n as f64).ln());
        let m = covariance_matrix(s.h, n);
        let m2 = &m * &m;
        let tr2 = m2.trace();
        let tr4 = (&m2 * &m2).trace();
        (1.0 - c * tr2).powi(2) + 2.0 * c * c * tr4
    }

    #[test]
    fn berry_estimate_matches_exact_second_moment() {
        let s = spec(2);
        let n = 64;
        let est = berry_estimate(&s, n, 4000, Seed::new(5)).unwrap();
        let exact = exact_mean_sq_q2(n);
        assert!((est.mean_sq - exact).abs() <= 4.0 * est.se, "{} vs {exact}", est.mean_sq);
        assert_relative_eq!(est.tv_bound, 2.0 * est.mean_sq.sqrt(), max_relative = 1e-15);
        let again = berry_estimate(&s, n, 4000, Seed::new(5)).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn berry_trend() {
        let s = spec(2);
        let lo = berry_estimate(&s, 64, 2000, Seed::new(1)).unwrap();
        let hi = berry_estimate(&s, 4096, 2000, Seed::new(1)).unwrap();
        assert!(hi.tv_bound < lo.tv_bound);
    }

    #[test]
    fn degenerate_batch() {
        let s = spec(2);
        let paths = vec![FgnPath::new(s.h, vec![0.0; 32]).unwrap(); 100];
        let est = berry_from_paths(&s, &paths, Seed::new(0)).unwrap();
        assert_eq!(est.mean_sq, 1.0);
        assert_eq!(est.tv_bound, 2.0);
        assert_eq!(est.se, 0.0);
    }

    #[test]
    fn small_batches_rejected() {
        let s = spec(2);
        assert_eq!(
            berry_estimate(&s, 64, 1, Seed::new(0)),
            Err(Error::BatchTooSmall { min: 100, got: 1 })
        );
        let paths = vec![FgnPath::new(s.h, vec![0.0; 8]).unwrap(); 10];
        assert!(berry_from_paths(&s, &paths, Seed::new(0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ds_norm_is_even_in_the_path(xs in proptest::collection::vec(-4.0f64..4.0, 2..40)) {
            // H_1 is odd, so the q = 2 form is invariant under ξ → −ξ
            let s = spec(2);
            let p = FgnPath::new(s.h, xs.clone()).unwrap();
            let m = FgnPath::new(s.h, xs.iter().map(|x| -x).collect()).unwrap();
            let (a, b) = (ds_norm_sq(&s, &p).unwrap(), ds_norm_sq(&s, &m).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            prop_assert!(a >= -1e-12);
        }
    }
}
