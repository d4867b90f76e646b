use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and derived exponents of the energy-critical problem.
///
/// `p = (d+2)/(d-2)` is never stored; it is recomputed from `d` so the
/// rational identity `1/(p-1) = (d-2)/4` holds exactly in the integers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    d: u32,
    /// Filled in by the spectral module once the unstable eigenvalue is known.
    e0: Option<f64>,
    exploratory: bool,
}

impl Params {
    /// Parameters in the covered range `d >= 7`.
    pub fn new(d: u32) -> Result<Self> {
        if d < 7 {
            return Err(Error::Config(format!(
                "dimension {d} is below 7; use Params::exploratory for uncovered dimensions"
            )));
        }
        Ok(Self {
            d,
            e0: None,
            exploratory: false,
        })
    }

    /// Parameters for `3 <= d < 7`, flagged as outside the theory.
    pub fn exploratory(d: u32) -> Result<Self> {
        if d < 3 {
            return Err(Error::Config(format!("dimension {d} has no critical exponent")));
        }
        Ok(Self {
            d,
            e0: None,
            exploratory: d < 7,
        })
    }

    pub fn with_e0(mut self, e0: f64) -> Self {
        self.e0 = Some(e0);
        self
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    pub fn e0(&self) -> Option<f64> {
        self.e0
    }

    pub fn is_exploratory(&self) -> bool {
        self.exploratory
    }

    /// `(numerator, denominator)` of `p`.
    pub fn p_ratio(&self) -> (u32, u32) {
        (self.d + 2, self.d - 2)
    }

    pub fn p(&self) -> f64 {
        (self.d + 2) as f64 / (self.d - 2) as f64
    }

    /// `1/(p-1) = (d-2)/4`, the type I blow-up exponent.
    pub fn inv_p_minus_1(&self) -> f64 {
        (self.d - 2) as f64 / 4.0
    }

    /// `(d-2)/2`, the scaling weight of `Λ`.
    pub fn half_weight(&self) -> f64 {
        (self.d - 2) as f64 / 2.0
    }

    /// Critical Sobolev exponent `2d/(d-2) = p + 1`.
    pub fn sobolev_exponent(&self) -> f64 {
        2.0 * self.dim() / (self.d - 2) as f64
    }

    /// Area of the unit sphere `S^{d-1}`.
    pub fn sphere_area(&self) -> f64 {
        let half = self.dim() / 2.0;
        2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(self.d)
    }
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half_integer(k: u32) -> f64 {
    let (mut g, mut x) = if k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < k as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}
