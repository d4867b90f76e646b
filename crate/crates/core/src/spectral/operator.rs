use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::ground_state::eval_v;
use crate::linalg;
use crate::params::Params;

/// Finite-volume discretization of
/// `H^(n) = -∂_rr - (d-1)/r ∂_r + n(d+n-2)/r² - pQ^{p-1}`
/// on a [`RadialGrid`].
///
/// Row `i` reads `(H u)_i = -(F_{i+1/2} - F_{i-1/2})/w_i + c_i u_i` with
/// fluxes `F_{i+1/2} = k_i (u_{i+1} - u_i)`. For `n = 0` the origin row has no
/// inward flux (regularity `∂_r u(0) = 0`); for `n ≥ 1` the origin node is
/// pinned to zero. The last node is a homogeneous Dirichlet node.
#[derive(Clone, Debug)]
pub struct RadialOperator {
    n: u32,
    grid: Arc<RadialGrid>,
    /// Zeroth-order coefficient `n(d+n-2)/r² + V` per node.
    potential: Vec<f64>,
    first: usize,
}

/// Minimum node count accepted by [`assemble_h`].
pub const MIN_NODES: usize = 10;

pub fn assemble_h(n: u32, grid: Arc<RadialGrid>, params: &Params) -> Result<RadialOperator> {
    if grid.len() < MIN_NODES {
        return Err(Error::Config(format!(
            "grid has {} nodes; the operator needs at least {MIN_NODES}",
            grid.len()
        )));
    }
    let d = params.dim();
    let centrifugal = n as f64 * (d + n as f64 - 2.0);
    let potential = grid
        .nodes()
        .iter()
        .map(|&r| {
            let c = if n == 0 || r == 0.0 { 0.0 } else { centrifugal / (r * r) };
            c + eval_v(r, params)
        })
        .collect();
    Ok(RadialOperator {
        n,
        grid,
        potential,
        first: if n == 0 { 0 } else { 1 },
    })
}

impl RadialOperator {
    pub fn index(&self) -> u32 {
        self.n
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Range of unknown nodes (both boundary conditions removed).
    pub fn active(&self) -> std::ops::Range<usize> {
        self.first..self.grid.len() - 1
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Applies the stencil to a full-length sample using the values it
    /// actually holds at the neighbours. Entries outside the active range are 0.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (k, w) = (g.flux(), g.weights());
        let mut out = vec![0.0; g.len()];
        for i in self.active() {
            let right = k[i] * (u[i + 1] - u[i]);
            let left = if i == 0 { 0.0 } else { k[i - 1] * (u[i] - u[i - 1]) };
            out[i] = -(right - left) / w[i] + self.potential[i] * u[i];
        }
        out
    }

    pub fn apply_field(&self, u: &RadialField) -> RadialField {
        u.with_values(self.apply(u.values()))
    }

    /// Symmetrized tridiagonal `W^{1/2} H W^{-1/2}` over the active nodes as
    /// `(diag, off)`.
    pub fn symmetric_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let (k, w) = (g.flux(), g.weights());
        let range = self.active();
        let diag = range
            .clone()
            .map(|i| {
                let left = if i == 0 { 0.0 } else { k[i - 1] };
                (k[i] + left) / w[i] + self.potential[i]
            })
            .collect();
        let off = range
            .clone()
            .take(range.len() - 1)
            .map(|i| -k[i] / (w[i] * w[i + 1]).sqrt())
            .collect();
        (diag, off)
    }

    /// Number of negative eigenvalues (Sylvester inertia).
    pub fn negative_count(&self) -> usize {
        let (diag, off) = self.symmetric_tridiagonal();
        linalg::sturm_count(&diag, &off, 0.0)
    }

    /// Quadratic form `⟨u, H u⟩` in flux form, for `u` vanishing at `R_max`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let g = &self.grid;
        g.dirichlet_form(u)
            + g.weights()
                .iter()
                .zip(&self.potential)
                .zip(u)
                .skip(self.first)
                .map(|((w, c), x)| w * c * x * x)
                .sum::<f64>()
    }
}
