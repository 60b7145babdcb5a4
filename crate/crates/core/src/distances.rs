//! Empirical distances between samples and reference laws, coupled L²
//! estimation across nested grids, and log–log rate fitting.
//!
//! Total variation is not estimable from samples without density estimation,
//! so Kolmogorov (`d_K ≤ d_TV`) and Wasserstein-1 distances serve as proxies.

use serde::Serialize;
use libm::erfc;

use crate::error::{Error, Result};
use crate::fgn::{aggregate, FgnSampler, Hurst, SamplerMethod, Seed};
use crate::hermite::HermiteOrder;
use crate::numerics::CompensatedSum;
use crate::variations::{v_n, Regime, RegimeSpec};

/// Provenance of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMeta {
    pub q: u32,
    #[serde(rename = "H")]
    pub h: f64,
    pub n: usize,
    pub batch: usize,
    pub seed: Seed,
}

/// A nonempty sample of finite values with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, meta: SampleMeta) -> Result<Self> {
        check_sample(&values)?;
        Ok(SampleSet { values, meta })
    }

    /// `Z_n` over `batch` exact paths.
    pub fn zn(spec: &RegimeSpec, n: usize, batch: usize, seed: Seed) -> Result<Self> {
        let values = crate::variations::sample_zn(spec, n, batch, seed)?;
        let meta = SampleMeta {
            q: spec.q.get(),
            h: spec.h.value(),
            n,
            batch,
            seed,
        };
        SampleSet::new(values, meta)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl AsRef<[f64]> for SampleSet {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_sample(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_emp(x) − cdf(x)|`, both one-sided gaps included.
pub fn ks_distance<S: AsRef<[f64]>, F: Fn(f64) -> f64>(s: S, cdf: F) -> Result<f64> {
    let values = s.as_ref();
    check_sample(values)?;
    let x = sorted(values);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_s(x) − F_t(x)|`.
pub fn ks_two_sample<S: AsRef<[f64]>, T: AsRef<[f64]>>(s: S, t: T) -> Result<f64> {
    check_sample(s.as_ref())?;
    check_sample(t.as_ref())?;
    let a = sorted(s.as_ref());
    let b = sorted(t.as_ref());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov tail `P(D > d)` for effective size `n_eff`
/// (`n` one-sample, `nm/(n+m)` two-sample), with the usual small-sample correction.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Standard deviation of `√n · D` under the null (Kolmogorov distribution).
pub fn kolmogorov_sd() -> f64 {
    let pi = std::f64::consts::PI;
    let ln2 = std::f64::consts::LN_2;
    (pi * pi / 12.0 - 0.5 * pi * ln2 * ln2).sqrt()
}

/// Sampling standard error of a one-sample KS statistic at size `batch`.
pub fn ks_sampling_se(batch: usize) -> f64 {
    kolmogorov_sd() / (batch as f64).sqrt()
}

/// Wasserstein-1 distance between equal-size samples by quantile coupling.
pub fn wasserstein1<S: AsRef<[f64]>, T: AsRef<[f64]>>(s: S, t: T) -> Result<f64> {
    let (s, t) = (s.as_ref(), t.as_ref());
    check_sample(s)?;
    check_sample(t)?;
    if s.len() != t.len() {
        return Err(Error::SizeMismatch(s.len(), t.len()));
    }
    let (a, b) = (sorted(s), sorted(t));
    let sum: CompensatedSum = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
    Ok(sum.value() / a.len() as f64)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub se: f64,
    pub batch: usize,
}

impl McSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        check_sample(values)?;
        let b = values.len() as f64;
        let mean = values.iter().copied().collect::<CompensatedSum>().value() / b;
        let se = if values.len() > 1 {
            let var = values
                .iter()
                .map(|x| (x - mean).powi(2))
                .collect::<CompensatedSum>()
                .value()
                / (b - 1.0);
            (var / b).sqrt()
        } else {
            0.0
        };
        Ok(McSummary {
            mean,
            se,
            batch: values.len(),
        })
    }

    pub fn variance(&self) -> f64 {
        self.se * self.se * self.batch as f64
    }
}

/// `E|S_n − S_N|²` for each `n` in `ns`, with `S_n` computed from the
/// aggregated fine path so that both statistics share one fBm.
pub fn coupled_l2_sweep(
    q: HermiteOrder,
    h: Hurst,
    ns: &[usize],
    big_n: usize,
    batch: usize,
    seed: Seed,
) -> Result<Vec<McSummary>> {
    let spec = RegimeSpec::new(q, h)?;
    spec.require(Regime::Supercritical)?;
    for &n in ns {
        if n == 0 || !big_n.is_multiple_of(n) {
            return Err(Error::NotDivisible { n: big_n, divisor: n });
        }
    }
    if batch == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = FgnSampler::new(h, big_n, SamplerMethod::Auto)?;
    let fine_scale = spec.divisor(big_n)?;
    let scales: Vec<f64> = ns.iter().map(|&n| spec.divisor(n)).collect::<Result<_>>()?;
    let per_path: Vec<Vec<f64>> = sampler.map_batch(seed, batch, |path| {
        let s_big = v_n(q, path) / fine_scale;
        ns.iter()
            .zip(&scales)
            .map(|(&n, &d)| {
                if n == big_n {
                    return 0.0;
                }
                let coarse = aggregate(path, big_n / n).expect("divisibility checked");
                (v_n(q, &coarse) / d - s_big).powi(2)
            })
            .collect()
    });
    (0..ns.len())
        .map(|i| {
            let col: Vec<f64> = per_path.iter().map(|row| row[i]).collect();
            McSummary::from_values(&col)
        })
        .collect()
}

/// [`coupled_l2_sweep`] at a single coarse resolution; `n = N` gives `(0, 0)`.
pub fn coupled_l2(q: HermiteOrder, h: Hurst, n: usize, big_n: usize, batch: usize, seed: Seed) -> Result<McSummary> {
    Ok(coupled_l2_sweep(q, h, &[n], big_n, batch, seed)?[0])
}

/// Ordinary least squares of `log y` on `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr_slope: f64,
    /// `(log n, log y)`
    pub points: Vec<(f64, f64)>,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            min: 3,
            got: points.len(),
        });
    }
    for &(x, y) in points {
        if y.is_nan() || y <= 0.0 || y.is_infinite() {
            return Err(Error::NonPositive(y));
        }
        if x.is_nan() || x <= 0.0 || x.is_infinite() {
            return Err(Error::InvalidArgument(format!("abscissa must be positive, got {x}")));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let stderr_slope = (ss_res / (m - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        r2,
        stderr_slope,
        points: logs,
    })
}
