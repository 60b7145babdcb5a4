//! Hermite power variations of fractional Brownian motion.
//!
//! Exact fGn sampling, the Hermite transform, regime-aware renormalization,
//! an exact engine for the supercritical L² discrepancy, critical-regime
//! Malliavin quantities, and empirical distances with log–log rate fits.

pub mod distances;
pub mod error;
pub mod fgn;
pub mod hermite;
pub mod kernel_norms;
pub mod malliavin_bound;
pub mod numerics;
pub mod table;
pub mod variations;

#[cfg(test)]
#[path = "../tests/common/quad.rs"]
mod test_quad;

pub use error::{Error, Result};
pub use fgn::{FgnPath, FgnSampler, Hurst, SamplerMethod, Seed};
pub use hermite::HermiteOrder;
pub use malliavin_bound::CriticalSpec;
pub use variations::{Regime, RegimeSpec, Statistic};
