//! ARS(2,2,2) implicit–explicit Runge–Kutta step.
//!
//! Diffusion is implicit (L-stable, stiffly accurate), the reaction explicit.
//! Both tableaux share row sums, so any exact steady state of the
//! semi-discrete system is reproduced exactly.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linalg::BandLu;

use super::operator::{Fd4Laplacian, OuterCondition};

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
const DELTA: f64 = 1.0 - 1.0 / (2.0 * GAMMA);

/// `|u|^{p-1} u`, or nothing when the reaction is switched off.
#[derive(Clone, Copy, Debug)]
pub struct Reaction {
    pub p: f64,
    pub enabled: bool,
}

impl Reaction {
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        if !self.enabled {
            return vec![0.0; u.len()];
        }
        u.iter().map(|&v| v.abs().powf(self.p - 1.0) * v).collect()
    }
}

/// Holds the operator and a small cache of factorizations keyed by `dt`.
pub struct Stepper {
    lap: Fd4Laplacian,
    reaction: Reaction,
    boundary: Option<f64>,
    cache: RefCell<Vec<(u64, BandLu)>>,
}

impl Stepper {
    /// `boundary` is the value held at `R_max` (ignored for Neumann).
    pub fn new(lap: Fd4Laplacian, reaction: Reaction, boundary: f64) -> Self {
        let boundary = match lap.outer() {
            OuterCondition::Dirichlet => Some(boundary),
            OuterCondition::Neumann => None,
        };
        Self {
            lap,
            reaction,
            boundary,
            cache: RefCell::new(Vec::new()),
        }
    }

    pub fn laplacian(&self) -> &Fd4Laplacian {
        &self.lap
    }

    /// Semi-discrete right-hand side `Lu + N(u)` (zero at a Dirichlet node).
    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.lap.apply(u);
        for (o, n) in out.iter_mut().zip(self.reaction.eval(u)) {
            *o += n;
        }
        if self.boundary.is_some() {
            *out.last_mut().unwrap() = 0.0;
        }
        out
    }

    fn with_factor<T>(&self, dt: f64, f: impl FnOnce(&BandLu) -> T) -> Result<T> {
        let key = dt.to_bits();
        let mut cache = self.cache.borrow_mut();
        if let Some(pos) = cache.iter().position(|(k, _)| *k == key) {
            return Ok(f(&cache[pos].1));
        }
        let lu = self.lap.implicit_factor(GAMMA * dt)?;
        if cache.len() >= 8 {
            cache.remove(0);
        }
        cache.push((key, lu));
        Ok(f(&cache.last().unwrap().1))
    }

    /// One step of size `dt`. Non-finite output is reported as an error so
    /// the controller can retry with a smaller step.
    pub fn step(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let n = u.len();
        let n1 = self.reaction.eval(u);
        let mut b: Vec<f64> = (0..n).map(|i| u[i] + GAMMA * dt * n1[i]).collect();
        self.pin(&mut b);
        let u2 = self.with_factor(dt, |lu| lu.solve(&b))?;
        let l2 = self.lap.apply(&u2);
        let n2 = self.reaction.eval(&u2);
        let mut b: Vec<f64> = (0..n)
            .map(|i| u[i] + dt * ((1.0 - GAMMA) * l2[i] + DELTA * n1[i] + (1.0 - DELTA) * n2[i]))
            .collect();
        self.pin(&mut b);
        let u3 = self.with_factor(dt, |lu| lu.solve(&b))?;
        if u3.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state after step dt = {dt:.3e}")));
        }
        Ok(u3)
    }

    fn pin(&self, b: &mut [f64]) {
        if let Some(g) = self.boundary {
            *b.last_mut().unwrap() = g;
        }
    }
}
