//! Probabilists' Hermite polynomials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::FgnPath;

/// Largest supported Hermite order.
pub const MAX_ORDER: u32 = 16;

/// Hermite rank `q` of the power variation, `2 ≤ q ≤ 16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct HermiteOrder(u32);

impl HermiteOrder {
    pub fn new(q: u32) -> Result<Self> {
        if (2..=MAX_ORDER).contains(&q) {
            Ok(HermiteOrder(q))
        } else {
            Err(Error::InvalidOrder(q))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// `q!`
    pub fn factorial(self) -> f64 {
        factorial(self.0)
    }
}

impl TryFrom<u32> for HermiteOrder {
    type Error = Error;
    fn try_from(q: u32) -> Result<Self> {
        HermiteOrder::new(q)
    }
}

impl From<HermiteOrder> for u32 {
    fn from(q: HermiteOrder) -> u32 {
        q.0
    }
}

pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `H_q(x)` by the recurrence `H_{k+1} = x H_k − k H_{k−1}`.
pub fn hermite_eval(q: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            for k in 1..q {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Element-wise `H_q(xi[k])`.
pub fn hermite_transform(q: HermiteOrder, path: &FgnPath) -> Vec<f64> {
    path.xi.iter().map(|&x| hermite_eval(q.get(), x)).collect()
}
