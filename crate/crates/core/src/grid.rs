//! Graded radial grid, radial quadrature and sampled radial fields.
//!
//! Nodes follow the odd map `r(ξ) = A sinh(β ξ)` at integer `ξ`, so spacing is
//! `≈ Aβ` at the origin and grows geometrically (ratio `e^β`) in the far
//! field. Because the map is odd, mirror nodes `r_{-j} = -r_j` give exact ghost
//! values for even extensions at `r = 0`.
//!
//! Quadrature weights are the exact moments `∫ r^{d-1} dr` over dual cells
//! `[r_{i-1/2}, r_{i+1/2}]`, so constants integrate exactly and the same weights
//! make the finite-volume Laplacian self-adjoint.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

/// User-facing grid knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Number of cells; the grid has `cells + 1` nodes.
    pub cells: usize,
    pub r_max: f64,
    /// Width of the first cell `[0, r_1]`.
    pub first_cell: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            cells: 4000,
            r_max: 100.0,
            first_cell: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Finite-volume flux coefficients `r_{i+1/2}^{d-1} / h_i`, one per cell.
    flux: Vec<f64>,
    d: u32,
    scale: f64,
    stretch: f64,
    /// `dr/dξ` at the nodes.
    jacobian: Vec<f64>,
    /// Trapezoid-in-`ξ` weights for `∫ f r^{d-1} dr`.
    xi_weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(settings: &GridSettings, params: &Params) -> Result<Self> {
        Self::sinh(settings.cells, settings.r_max, settings.first_cell, params.d())
    }

    pub fn sinh(cells: usize, r_max: f64, first_cell: f64, d: u32) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Config(format!("grid needs at least 2 cells, got {cells}")));
        }
        if !(r_max > 0.0 && first_cell > 0.0 && first_cell * cells as f64 <= r_max) {
            return Err(Error::Config(format!(
                "invalid grid extent: r_max = {r_max}, first_cell = {first_cell}, cells = {cells}"
            )));
        }
        let n = cells as f64;
        // Solve first_cell * sinh(β n) / sinh(β) = r_max for β; the left side
        // increases with β from first_cell * n.
        let target = r_max / first_cell;
        let ratio = |b: f64| {
            if b == 0.0 {
                n
            } else {
                (b * n).sinh() / b.sinh()
            }
        };
        let stretch = if (ratio(0.0) - target).abs() <= 1e-12 * target {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while ratio(hi) < target {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ratio(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let scale = if stretch == 0.0 {
            first_cell
        } else {
            first_cell / stretch.sinh()
        };
        let mut nodes: Vec<f64> = (0..=cells)
            .map(|i| map_r(scale, stretch, i as f64))
            .collect();
        nodes[cells] = r_max;
        Ok(Self::assemble(nodes, d, scale, stretch))
    }

    fn assemble(nodes: Vec<f64>, d: u32, scale: f64, stretch: f64) -> Self {
        let n = nodes.len();
        let df = d as f64;
        let mut mids = Vec::with_capacity(n + 1);
        mids.push(0.0);
        for i in 1..n {
            mids.push(0.5 * (nodes[i - 1] + nodes[i]));
        }
        mids.push(nodes[n - 1]);
        let weights = (0..n)
            .map(|i| (mids[i + 1].powf(df) - mids[i].powf(df)) / df)
            .collect();
        let flux = (0..n - 1)
            .map(|i| mids[i + 1].powf(df - 1.0) / (nodes[i + 1] - nodes[i]))
            .collect();
        let jacobian: Vec<f64> = (0..n)
            .map(|i| map_derivatives(scale, stretch, i as f64).1)
            .collect();
        // the integrand is even in ξ at the origin, so the rule is high order there
        let xi_weights = (0..n)
            .map(|i| {
                let end = if i == n - 1 { 0.5 } else { 1.0 };
                end * nodes[i].powi(d as i32 - 1) * jacobian[i]
            })
            .collect();
        Self {
            nodes,
            weights,
            flux,
            d,
            scale,
            stretch,
            jacobian,
            xi_weights,
        }
    }

    /// `dr/dξ` at every node.
    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    /// Trapezoid weights in `ξ` for `∫ f r^{d-1} dr`; high order for smooth
    /// even integrands, used by the energy functionals.
    pub fn xi_weights(&self) -> &[f64] {
        &self.xi_weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// `(A, β)` of the node map `r = A sinh(β ξ)`.
    pub fn map_parameters(&self) -> (f64, f64) {
        (self.scale, self.stretch)
    }

    /// `(r, dr/dξ, d²r/dξ²)` at the (possibly fractional or negative) index `xi`.
    pub fn map_derivatives(&self, xi: f64) -> (f64, f64, f64) {
        map_derivatives(self.scale, self.stretch, xi)
    }

    /// Exact dual-cell moments `∫ r^k dr` (for `k > -1`).
    pub fn power_weights(&self, k: f64) -> Vec<f64> {
        let n = self.len();
        let mut mids = Vec::with_capacity(n + 1);
        mids.push(0.0);
        for i in 1..n {
            mids.push(0.5 * (self.nodes[i - 1] + self.nodes[i]));
        }
        mids.push(self.r_max());
        (0..n)
            .map(|i| (mids[i + 1].powf(k + 1.0) - mids[i].powf(k + 1.0)) / (k + 1.0))
            .collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `∫ |∂_r u|² r^{d-1} dr` in flux form.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        self.flux
            .iter()
            .enumerate()
            .map(|(i, k)| k * (u[i + 1] - u[i]).powi(2))
            .sum()
    }

    /// Finite-volume radial Laplacian. The last node is a Dirichlet node and
    /// its entry is left at zero.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            let f = self.flux[i] * (u[i + 1] - u[i]);
            out[i] += f;
            if i + 1 < n - 1 {
                out[i + 1] -= f;
            }
        }
        for i in 0..n - 1 {
            out[i] /= self.weights[i];
        }
        out
    }

    /// Discrete `‖v‖²_{Ḣ^s}` for `s ∈ {1, 2, 3}`: `‖∂_r v‖²`, `‖Δv‖²`, `‖∂_r Δv‖²`.
    pub fn homogeneous_norm_sq(&self, v: &[f64], s: u32) -> Result<f64> {
        match s {
            1 => Ok(self.dirichlet_form(v)),
            2 => {
                let lap = self.laplacian(v);
                Ok(self.inner(&lap, &lap))
            }
            3 => Ok(self.dirichlet_form(&self.laplacian(v))),
            _ => Err(Error::Config(format!("Sobolev order {s} not supported (1, 2 or 3)"))),
        }
    }
}

fn map_derivatives(a: f64, b: f64, xi: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (a * xi, a, 0.0);
    }
    (
        a * (b * xi).sinh(),
        a * b * (b * xi).cosh(),
        a * b * b * (b * xi).sinh(),
    )
}

fn map_r(scale: f64, stretch: f64, xi: f64) -> f64 {
    if stretch == 0.0 {
        scale * xi
    } else {
        scale * (stretch * xi).sinh()
    }
}

/// A real function of `r` sampled on the nodes of a shared grid.
#[derive(Clone, Debug)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} samples but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite sample {} at node {i} (r = {})",
                values[i],
                grid.nodes()[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn inner(&self, other: &RadialField) -> f64 {
        self.grid.inner(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn h1_sq(&self) -> f64 {
        self.grid.dirichlet_form(&self.values)
    }

    pub fn axpy(&self, alpha: f64, other: &RadialField) -> RadialField {
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> RadialField {
        self.with_values(self.values.iter().map(|v| alpha * v).collect())
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson) of a radial
/// profile, with zero slope at `r = 0` (even extension) and a harmonic tail
/// `u(R) (R/r)^{d-2}` beyond the last node.
#[derive(Clone, Debug)]
pub struct RadialInterpolant {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    tail_power: f64,
}

impl RadialInterpolant {
    pub fn new(field: &RadialField) -> Self {
        Self::from_samples(field.grid().nodes(), field.values(), field.grid().d())
    }

    pub fn from_samples(x: &[f64], y: &[f64], d: u32) -> Self {
        let n = x.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let mut m = vec![0.0; n];
        for i in 1..n - 1 {
            let (d0, d1) = (delta[i - 1], delta[i]);
            if d0 * d1 > 0.0 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                m[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        m[0] = 0.0;
        // one-sided three-point end slope, limited
        if n >= 3 {
            let h0 = x[n - 1] - x[n - 2];
            let h1 = x[n - 2] - x[n - 3];
            let (d0, d1) = (delta[n - 2], delta[n - 3]);
            let mut s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s * d0 <= 0.0 {
                s = 0.0;
            } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
                s = 3.0 * d0;
            }
            m[n - 1] = s;
        } else {
            m[n - 1] = delta[n - 2];
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
            tail_power: d as f64 - 2.0,
        }
    }

    fn locate(&self, r: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let last = *self.x.last().unwrap();
        if r > last {
            return *self.y.last().unwrap() * (last / r).powf(self.tail_power);
        }
        let i = self.locate(r);
        let h = self.x[i + 1] - self.x[i];
        let t = (r - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1]
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        let r = r.abs();
        let last = *self.x.last().unwrap();
        if r > last {
            let y = *self.y.last().unwrap();
            return sign * -self.tail_power * y * (last / r).powf(self.tail_power) / r;
        }
        let i = self.locate(r);
        let h = self.x[i + 1] - self.x[i];
        let t = (r - self.x[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        sign * (d00 * self.y[i] + d10 * self.m[i] + d01 * self.y[i + 1] + d11 * self.m[i + 1])
    }
}
