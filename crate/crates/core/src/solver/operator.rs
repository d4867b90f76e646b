//! Fourth-order radial Laplacian on the sinh-mapped grid.
//!
//! Derivatives are taken in the uniform index variable `ξ` and mapped back
//! with `u_r = u_ξ / r_ξ`, `u_rr = (u_ξξ - r_ξξ u_r) / r_ξ²`. The odd map
//! supplies exact ghost nodes `u_{-j} = u_j` at the origin.

use crate::error::Result;
use crate::grid::RadialGrid;
use crate::linalg::{BandLu, BandMatrix};

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
const D1_LOW: [f64; 5] = [0.0, -0.5, 0.0, 0.5, 0.0];
const D2_LOW: [f64; 5] = [0.0, 1.0, -2.0, 1.0, 0.0];

/// Condition at `R_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuterCondition {
    /// Value prescribed by the caller; the last row of the operator is zero.
    Dirichlet,
    /// Even reflection about the last node.
    Neumann,
}

/// Pentadiagonal radial Laplacian; row `i` holds the weights of columns
/// `i-2 ..= i+2`.
#[derive(Clone, Debug)]
pub struct Fd4Laplacian {
    rows: Vec<[f64; 5]>,
    outer: OuterCondition,
}

impl Fd4Laplacian {
    pub fn new(grid: &RadialGrid, outer: OuterCondition) -> Self {
        let n = grid.len();
        let last = n - 1;
        let d = grid.d() as f64;
        let mut rows = vec![[0.0; 5]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            if i == last && outer == OuterCondition::Dirichlet {
                continue;
            }
            let (r, rx, rxx) = grid.map_derivatives(i as f64);
            let (d1, d2) = if i + 1 == last && outer == OuterCondition::Dirichlet {
                (D1_LOW, D2_LOW)
            } else {
                (D1, D2)
            };
            let mut w = [0.0; 5];
            if i == 0 {
                // Δu(0) = d u_rr(0); r_ξξ(0) = 0
                for k in 0..5 {
                    w[k] = d * d2[k] / (rx * rx);
                }
            } else {
                for k in 0..5 {
                    let ur = d1[k] / rx;
                    w[k] = (d2[k] - rxx * ur) / (rx * rx) + (d - 1.0) / r * ur;
                }
            }
            // fold ghost columns back onto the grid
            for (k, wk) in w.iter().enumerate() {
                let col = i as isize + k as isize - 2;
                let col = if col < 0 {
                    -col
                } else if col > last as isize {
                    2 * last as isize - col
                } else {
                    col
                };
                row[(col - i as isize + 2) as usize] += wk;
            }
        }
        Self { rows, outer }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn outer(&self) -> OuterCondition {
        self.outer
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        (0..n)
            .map(|i| {
                let row = &self.rows[i];
                let mut s = 0.0;
                for (k, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        s += w * u[i + k - 2];
                    }
                }
                s
            })
            .collect()
    }

    /// LU factors of `I - c·L`, with an identity row at a Dirichlet boundary.
    pub fn implicit_factor(&self, c: f64) -> Result<BandLu> {
        let n = self.rows.len();
        let mut m = BandMatrix::zeros(n, 2, 2);
        for (i, row) in self.rows.iter().enumerate() {
            m.add(i, i, 1.0);
            for (k, w) in row.iter().enumerate() {
                if *w != 0.0 {
                    m.add(i, i + k - 2, -c * w);
                }
            }
        }
        m.factor()
    }
}

impl Fd4Laplacian {
    /// LU factors of `L + diag(potential) - σ`, with an identity row at a
    /// Dirichlet boundary.
    pub fn shifted_factor(&self, potential: &[f64], sigma: f64) -> Result<BandLu> {
        let n = self.rows.len();
        let mut m = BandMatrix::zeros(n, 2, 2);
        for (i, row) in self.rows.iter().enumerate() {
            if i == n - 1 && self.outer == OuterCondition::Dirichlet {
                m.add(i, i, 1.0);
                continue;
            }
            m.add(i, i, potential[i] - sigma);
            for (k, w) in row.iter().enumerate() {
                if *w != 0.0 {
                    m.add(i, i + k - 2, *w);
                }
            }
        }
        m.factor()
    }
}

/// Fourth-order `∂_r u` at the nodes (zero at the origin; one-sided at
/// `R_max`).
pub fn gradient(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let last = n - 1;
    let jac = grid.jacobian();
    let at = |j: isize| u[j.unsigned_abs()];
    (0..n)
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let ii = i as isize;
            let ux = if i + 2 <= last {
                (at(ii - 2) - 8.0 * at(ii - 1) + 8.0 * u[i + 1] - u[i + 2]) / 12.0
            } else if i + 1 == last {
                0.5 * (u[i + 1] - u[i - 1])
            } else {
                (25.0 * u[i] - 48.0 * u[i - 1] + 36.0 * u[i - 2] - 16.0 * u[i - 3] + 3.0 * u[i - 4])
                    / 12.0
            };
            ux / jac[i]
        })
        .collect()
}
