//! Fractional Gaussian noise: closed-form covariances, exact samplers and
//! cross-resolution coupling by aggregation.
//!
//! A path at resolution `n` holds the standardized increments
//! `xi[k] = n^H (B_{(k+1)/n} − B_{k/n})`, which by self-similarity have the
//! law of unit-lag increments with autocovariance `rho(H, ·)`.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::second_difference_pow;
use crate::table::fmt_real;

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Hurst(value))
        } else {
            Err(Error::InvalidHurst(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Rejects `H <= 1/2`, for the integral representations that need `2H − 2 > −1`.
    pub fn require_long_memory(self) -> Result<Self> {
        if self.0 > 0.5 {
            Ok(self)
        } else {
            Err(Error::ShortMemory(self.0))
        }
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Hurst::new(value)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

impl fmt::Display for Hurst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Reproducible randomness: `(value, stream_id)` selects one ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(value: u64) -> Self {
        Seed {
            value,
            stream_id: 0,
        }
    }

    pub fn with_stream(value: u64, stream_id: u64) -> Self {
        Seed { value, stream_id }
    }

    /// Deterministic sub-stream for task `index` (batch member, sweep point, ...).
    pub fn child(self, index: u64) -> Seed {
        Seed {
            value: self.value,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ index),
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.value);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Standardized fGn increments at resolution `n = xi.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgnPath {
    pub h: Hurst,
    pub xi: Vec<f64>,
}

impl FgnPath {
    pub fn new(h: Hurst, xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::ResolutionTooSmall { n: 0, min: 1 });
        }
        Ok(FgnPath { h, xi })
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    /// One value per line under the header `xi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "xi")?;
        for x in &self.xi {
            writeln!(out, "{}", fmt_real(*x))?;
        }
        Ok(())
    }
}

/// Autocovariance of unit-lag fGn: `½(|r+1|^{2H} − 2|r|^{2H} + |r−1|^{2H})`.
pub fn rho(h: Hurst, r: i64) -> f64 {
    0.5 * second_difference_pow(2.0 * h.value(), r.unsigned_abs())
}

/// `rho(h, 0..len)` as a vector.
pub fn rho_table(h: Hurst, len: usize) -> Vec<f64> {
    (0..len as i64).map(|r| rho(h, r)).collect()
}

/// `E[(B_b − B_a)(B_d − B_c)]` in closed form.
pub fn increment_cov(h: Hurst, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
        return Err(Error::DegenerateInterval(a, b));
    }
    if c.partial_cmp(&d) != Some(std::cmp::Ordering::Less) {
        return Err(Error::DegenerateInterval(c, d));
    }
    let p = 2.0 * h.value();
    let g = |x: f64| x.abs().powf(p);
    Ok(0.5 * (g(b - c) + g(a - d) - g(b - d) - g(a - c)))
}

/// Toeplitz covariance matrix of `n` consecutive standardized increments.
pub fn covariance_matrix(h: Hurst, n: usize) -> DMatrix<f64> {
    let r = rho_table(h, n);
    DMatrix::from_fn(n, n, |i, j| r[i.abs_diff(j)])
}

/// Largest resolution accepted by the dense Cholesky sampler.
pub const CHOLESKY_MAX_N: usize = 1 << 13;
/// `SamplerMethod::Auto` switches from Cholesky to circulant embedding above this.
pub const AUTO_CHOLESKY_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMethod {
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

/// Circulant embedding of the `n × n` fGn covariance into size `m = 2n`.
///
/// The eigenvalues are nonnegative for every `H ∈ (0, 1)`, so the embedding
/// yields exact samples (Davies–Harte) and fast Toeplitz products.
#[derive(Clone)]
pub struct CirculantEmbedding {
    n: usize,
    eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("n", &self.n)
            .field("m", &self.eigenvalues.len())
            .finish()
    }
}

impl CirculantEmbedding {
    /// Embeds the Toeplitz matrix whose first row is `first_row[0..n]`;
    /// `first_row` must hold `n + 1` entries (the extra one fills the wrap point).
    pub fn from_first_row(first_row: &[f64]) -> Result<Self> {
        let n = first_row.len().saturating_sub(1);
        if n == 0 {
            return Err(Error::ResolutionTooSmall { n, min: 1 });
        }
        let m = 2 * n;
        let mut buf: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(first_row[lag], 0.0)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        forward.process(&mut buf);
        let max = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let floor = 1e-12 * max.max(1.0);
        let mut eigenvalues = Vec::with_capacity(m);
        for (j, c) in buf.iter().enumerate() {
            if c.re < -floor {
                return Err(Error::Factorization {
                    n,
                    reason: format!("circulant eigenvalue {j} is {:.3e}", c.re),
                });
            }
            // values within round-off of zero are zero
            eigenvalues.push(c.re.max(0.0));
        }
        Ok(CirculantEmbedding {
            n,
            eigenvalues,
            forward,
            inverse,
        })
    }

    pub fn for_fgn(h: Hurst, n: usize) -> Result<Self> {
        Self::from_first_row(&rho_table(h, n + 1))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Exact draw of `n` jointly Gaussian values with the embedded covariance.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.eigenvalues.len();
        let half = m / 2;
        let mf = m as f64;
        let mut w = vec![Complex::new(0.0, 0.0); m];
        let z0: f64 = StandardNormal.sample(rng);
        w[0] = Complex::new((self.eigenvalues[0] / mf).sqrt() * z0, 0.0);
        let zh: f64 = StandardNormal.sample(rng);
        w[half] = Complex::new((self.eigenvalues[half] / mf).sqrt() * zh, 0.0);
        for j in 1..half {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            let s = (self.eigenvalues[j] / (2.0 * mf)).sqrt();
            w[j] = Complex::new(s * a, s * b);
            w[m - j] = w[j].conj();
        }
        self.forward.process(&mut w);
        w[..self.n].iter().map(|c| c.re).collect()
    }

    /// `T x` for the embedded Toeplitz matrix `T`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must equal n");
        let m = self.eigenvalues.len();
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &l) in buf.iter_mut().zip(&self.eigenvalues) {
            *b *= l;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / m as f64;
        buf[..self.n].iter().map(|c| c.re * scale).collect()
    }

    /// Quadratic form `xᵀ T x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Cholesky(DMatrix<f64>),
    Circulant(CirculantEmbedding),
}

/// Exact fGn sampler for one `(H, n)`; set up once and shared across a batch.
#[derive(Debug, Clone)]
pub struct FgnSampler {
    h: Hurst,
    n: usize,
    engine: Engine,
}

impl FgnSampler {
    pub fn new(h: Hurst, n: usize, method: SamplerMethod) -> Result<Self> {
        if n == 0 {
            return Err(Error::ResolutionTooSmall { n, min: 1 });
        }
        let use_cholesky = match method {
            SamplerMethod::Auto => n <= AUTO_CHOLESKY_LIMIT,
            SamplerMethod::Cholesky => true,
            SamplerMethod::Circulant => false,
        };
        let engine = if use_cholesky {
            if n > CHOLESKY_MAX_N {
                return Err(Error::InvalidArgument(format!(
                    "dense Cholesky sampling supports n <= {CHOLESKY_MAX_N}, got {n}"
                )));
            }
            let chol = covariance_matrix(h, n)
                .cholesky()
                .ok_or_else(|| Error::Factorization {
                    n,
                    reason: "covariance matrix is not numerically positive definite".into(),
                })?;
            Engine::Cholesky(chol.unpack())
        } else {
            Engine::Circulant(CirculantEmbedding::for_fgn(h, n)?)
        };
        Ok(FgnSampler { h, n, engine })
    }

    pub fn hurst(&self) -> Hurst {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample(&self, seed: Seed) -> FgnPath {
        let mut rng = seed.rng();
        let xi = match &self.engine {
            Engine::Cholesky(l) => {
                let z: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut out = vec![0.0; self.n];
                for (i, o) in out.iter_mut().enumerate() {
                    let row = l.row(i);
                    *o = (0..=i).map(|j| row[j] * z[j]).sum();
                }
                out
            }
            Engine::Circulant(c) => c.sample(&mut rng),
        };
        FgnPath { h: self.h, xi }
    }

    /// Evaluates `f` on `batch` independent paths drawn from `seed.child(i)`.
    /// Output order is by batch index regardless of scheduling.
    pub fn map_batch<T, F>(&self, seed: Seed, batch: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&FgnPath) -> T + Sync + Send,
    {
        (0..batch as u64)
            .into_par_iter()
            .map(|i| f(&self.sample(seed.child(i))))
            .collect()
    }
}

/// Exact sample of `n` standardized increments.
pub fn sample_fgn(h: Hurst, n: usize, seed: Seed) -> Result<FgnPath> {
    Ok(FgnSampler::new(h, n, SamplerMethod::Auto)?.sample(seed))
}

/// Coarsens a path by `m`: `xi'_k = m^{−H} Σ_{j<m} xi[k m + j]`.
///
/// The result is the standardized increment sequence of the same underlying
/// fBm at resolution `n / m`.
pub fn aggregate(path: &FgnPath, m: usize) -> Result<FgnPath> {
    let n = path.n();
    if m == 0 || !n.is_multiple_of(m) {
        return Err(Error::NotDivisible { n, divisor: m });
    }
    let scale = (m as f64).powf(-path.h.value());
    let xi = path
        .xi
        .chunks_exact(m)
        .map(|block| scale * block.iter().sum::<f64>())
        .collect();
    Ok(FgnPath { h: path.h, xi })
}
