//! Spectral structure of the linearized operator `H = -Δ - pQ^{p-1}` on
//! radial functions: the unstable eigenpair, the localized orthogonality
//! profile, zero modes and coercivity estimates.

mod coercivity;
mod operator;
mod shooting;
mod zero_modes;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

pub use coercivity::{
    coercivity_estimate, factorization_check, hardy_check, project_out, random_smooth_field,
    rayleigh_quotients, CoercivityReport,
};
pub use operator::{assemble_h, RadialOperator, MIN_NODES};
pub use shooting::shoot_e0;
pub use zero_modes::{zero_modes, ZeroModePair};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::ground_state::{eval_lambda_q, eval_q};
use crate::linalg;
use crate::params::Params;

/// Default localization radius of `χ_M`.
pub const DEFAULT_M: f64 = 20.0;

/// Smallest admissible `∫χ_M (ΛQ)²`.
const MIN_LOCALIZED_MASS: f64 = 1e-6;

/// Unstable eigenvalue and eigenfunction of discretized `H^(0)`.
///
/// `e0 > 0` is the decay rate, the eigenvalue being `-e0`. `y` has unit
/// discrete `L²(r^{d-1}dr)` norm and is positive.
pub fn ground_eig(op: &RadialOperator) -> Result<(f64, RadialField)> {
    if op.index() != 0 {
        return Err(Error::Config(format!(
            "ground_eig needs the n = 0 operator, got n = {}",
            op.index()
        )));
    }
    let (diag, off) = op.symmetric_tridiagonal();
    let negatives = linalg::sturm_count(&diag, &off, 0.0);
    if negatives == 0 {
        return Err(Error::Discretization(
            "no negative eigenvalue; grid too coarse or R_max too small".into(),
        ));
    }
    let sturm = -linalg::tridiagonal_eigenvalue(&diag, &off, 0);
    let grid = op.grid().clone();
    let m = match_node(&grid);
    // polish the eigenvalue on the matching condition; keep the Sturm value
    // if the secant wanders off
    let (mut e_prev, mut e) = (sturm * (1.0 - 1e-9), sturm);
    let (mut f_prev, mut f) = (mismatch(op, e_prev, m), mismatch(op, e, m));
    for _ in 0..20 {
        if f == f_prev || f == 0.0 {
            break;
        }
        let next = e - f * (e - e_prev) / (f - f_prev);
        (e_prev, f_prev) = (e, f);
        e = next;
        f = mismatch(op, e, m);
        if (e - e_prev).abs() <= 1e-15 * e.abs() {
            break;
        }
    }
    let e0 = if (e - sturm).abs() <= 1e-8 * sturm { e } else { sturm };
    let mut values = matched_profile(op, e0, m);
    let norm = grid.norm(&values);
    values.iter_mut().for_each(|v| *v /= norm);
    Ok((e0, RadialField::new(grid, values)?))
}

/// Node near `r = 8`, past the potential well, where the outward and inward
/// solutions are joined.
fn match_node(grid: &RadialGrid) -> usize {
    let r = grid.nodes();
    let target = 8.0f64.min(0.5 * grid.r_max());
    r.partition_point(|&x| x < target).clamp(2, r.len() - 3)
}

/// Rows `i` of `(H + e) y = 0` written for the flux differences
/// `δ_i = y_{i+1} - y_i`: `k_i δ_i = k_{i-1} δ_{i-1} + (c_i + e) w_i y_i`.
/// Solved outward from `y_0 = 1` (no cancellation near the finely resolved
/// origin) and inward from `y_N = 0, y_{N-1} = 1`.
fn recurrences(op: &RadialOperator, e: f64, m: usize) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let g = op.grid();
    let (k, w, c) = (g.flux(), g.weights(), op.potential());
    let n = g.len();
    let mut fwd = vec![0.0; m + 2];
    fwd[0] = 1.0;
    let mut delta = 0.0;
    for i in 0..=m {
        let inflow = if i == 0 { 0.0 } else { k[i - 1] * delta };
        delta = (inflow + (c[i] + e) * w[i] * fwd[i]) / k[i];
        fwd[i + 1] = fwd[i] + delta;
    }
    let fwd_slope = fwd[m + 1] - fwd[m];
    let mut bwd = vec![0.0; n];
    bwd[n - 1] = 0.0;
    bwd[n - 2] = 1.0;
    let mut delta = bwd[n - 1] - bwd[n - 2];
    for i in (m + 1..n - 1).rev() {
        // k_{i-1} δ_{i-1} = k_i δ_i - (c_i + e) w_i y_i
        let prev = (k[i] * delta - (c[i] + e) * w[i] * bwd[i]) / k[i - 1];
        bwd[i - 1] = bwd[i] - prev;
        delta = prev;
        // rescale to avoid overflow on long inward sweeps
        if bwd[i - 1].abs() > 1e200 {
            let s = 1.0 / bwd[i - 1].abs();
            bwd[i - 1..].iter_mut().for_each(|v| *v *= s);
            delta *= s;
        }
    }
    let bwd_slope = bwd[m + 1] - bwd[m];
    (fwd, fwd_slope, bwd, bwd_slope)
}

/// Log-derivative jump at the matching node.
fn mismatch(op: &RadialOperator, e: f64, m: usize) -> f64 {
    let (fwd, fs, bwd, bs) = recurrences(op, e, m);
    fs / fwd[m] - bs / bwd[m]
}

fn matched_profile(op: &RadialOperator, e: f64, m: usize) -> Vec<f64> {
    let (fwd, _, mut bwd, _) = recurrences(op, e, m);
    let scale = fwd[m] / bwd[m];
    bwd.iter_mut().for_each(|v| *v *= scale);
    bwd[..=m].copy_from_slice(&fwd[..=m]);
    bwd
}

/// Smooth cutoff equal to 1 on `[0, 1]` and 0 on `[2, ∞)`.
pub fn cutoff(x: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let a = f(2.0 - x);
        a / (a + f(x - 1.0))
    }
}

/// `Ψ₀ = χ_M ΛQ - ⟨χ_M ΛQ, 𝒴⟩ 𝒴` for a unit-norm `𝒴`.
pub fn build_psi0(y: &RadialField, params: &Params, m: f64) -> Result<RadialField> {
    if !(m > 0.0) {
        return Err(Error::Config(format!("localization radius must be positive, got {m}")));
    }
    let grid = y.grid().clone();
    let local = RadialField::from_fn(grid.clone(), |r| cutoff(r / m) * eval_lambda_q(r, params));
    let lq = RadialField::from_fn(grid.clone(), |r| eval_lambda_q(r, params));
    let mass = local.inner(&lq);
    if mass < MIN_LOCALIZED_MASS {
        return Err(Error::Config(format!(
            "M = {m} leaves ∫χ_M(ΛQ)² = {mass:.3e} below {MIN_LOCALIZED_MASS:.0e}"
        )));
    }
    let yy = y.inner(y);
    Ok(local.axpy(-local.inner(y) / yy, y))
}

/// Everything downstream modules need from the spectral analysis.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub params: Params,
    pub grid: Arc<RadialGrid>,
    pub op: RadialOperator,
    pub e0: f64,
    /// Unit-norm unstable eigenfunction.
    pub y: RadialField,
    /// `∫ 𝒴 r^{d-1} dr` of the unit-norm `𝒴`; dividing by it gives the
    /// unit-mass normalization.
    pub y_mass: f64,
    pub psi0: RadialField,
    pub m: f64,
    pub q: RadialField,
    pub lambda_q: RadialField,
}

impl SpectralData {
    pub fn compute(params: &Params, grid: Arc<RadialGrid>, m: f64) -> Result<Self> {
        let op = assemble_h(0, grid.clone(), params)?;
        let (e0, y) = ground_eig(&op)?;
        let psi0 = build_psi0(&y, params, m)?;
        let y_mass = grid.integrate(y.values());
        Ok(Self {
            params: params.with_e0(e0),
            q: RadialField::from_fn(grid.clone(), |r| eval_q(r, params)),
            lambda_q: RadialField::from_fn(grid.clone(), |r| eval_lambda_q(r, params)),
            grid,
            op,
            e0,
            y,
            y_mass,
            psi0,
            m,
        })
    }

    /// `𝒴` normalized to unit mass, `∫𝒴 r^{d-1}dr = 1`.
    pub fn y_unit_mass(&self) -> RadialField {
        self.y.scaled(1.0 / self.y_mass)
    }

    /// `‖H𝒴 + e₀𝒴‖ / ‖𝒴‖`.
    pub fn eigen_residual(&self) -> f64 {
        let hy = self.op.apply_field(&self.y);
        hy.axpy(self.e0, &self.y).norm() / self.y.norm()
    }

    /// `‖H f‖ / ‖f‖` for a sampled kernel candidate, over the active nodes.
    pub fn kernel_residual(op: &RadialOperator, f: &RadialField) -> f64 {
        let mut masked = f.values().to_vec();
        let range = op.active();
        for (i, v) in masked.iter_mut().enumerate() {
            if !range.contains(&i) {
                *v = 0.0;
            }
        }
        let hf = op.apply(f.values());
        let g = op.grid();
        g.norm(&hf) / g.norm(&masked)
    }
}

/// Numbers reported by the `spectrum` experiment.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub d: u32,
    pub cells: usize,
    pub r_max: f64,
    pub m: f64,
    pub e0: f64,
    pub e0_shooting: f64,
    pub negative_eigenvalues: usize,
    pub eigen_residual: f64,
    pub kernel_residual_n0: f64,
    pub kernel_residual_n1: f64,
    pub psi0_y_overlap: f64,
    pub psi0_lambda_q: f64,
    pub y_mass: f64,
    pub coercivity: Option<CoercivityReport>,
    pub zero_mode_exponents: Vec<(u32, f64, Option<f64>)>,
}

impl SpectralReport {
    pub fn build(spec: &SpectralData, coercivity: Option<CoercivityReport>) -> Result<Self> {
        let params = &spec.params;
        let op1 = assemble_h(1, spec.grid.clone(), params)?;
        let dq = RadialField::from_fn(spec.grid.clone(), |r| {
            -crate::ground_state::eval_dr_q(r, params)
        });
        let mut exps = vec![];
        for n in 0..3 {
            let z = zero_modes(n, spec.grid.clone(), params)?;
            exps.push((n, z.origin_exponent, z.infinity_exponent));
        }
        Ok(Self {
            d: params.d(),
            cells: spec.grid.len() - 1,
            r_max: spec.grid.r_max(),
            m: spec.m,
            e0: spec.e0,
            e0_shooting: shoot_e0(params)?,
            negative_eigenvalues: spec.op.negative_count(),
            eigen_residual: spec.eigen_residual(),
            kernel_residual_n0: SpectralData::kernel_residual(&spec.op, &spec.lambda_q),
            kernel_residual_n1: SpectralData::kernel_residual(&op1, &dq),
            psi0_y_overlap: spec.psi0.inner(&spec.y),
            psi0_lambda_q: spec.psi0.inner(&spec.lambda_q),
            y_mass: spec.y_mass,
            coercivity,
            zero_mode_exponents: exps,
        })
    }

    /// Two-column `key,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{v}");
        };
        row("d", self.d.to_string());
        row("cells", self.cells.to_string());
        row("r_max", format!("{:e}", self.r_max));
        row("M", format!("{:e}", self.m));
        row("e0", format!("{:.15e}", self.e0));
        row("e0_shooting", format!("{:.15e}", self.e0_shooting));
        row("negative_eigenvalues", self.negative_eigenvalues.to_string());
        row("eigen_residual", format!("{:.6e}", self.eigen_residual));
        row("kernel_residual_n0", format!("{:.6e}", self.kernel_residual_n0));
        row("kernel_residual_n1", format!("{:.6e}", self.kernel_residual_n1));
        row("psi0_y_overlap", format!("{:.6e}", self.psi0_y_overlap));
        row("psi0_lambda_q", format!("{:.6e}", self.psi0_lambda_q));
        row("y_mass", format!("{:.15e}", self.y_mass));
        if let Some(c) = &self.coercivity {
            row("coercivity_samples", c.samples.to_string());
            row("coercivity_c1", format!("{:.6e}", c.c1));
            row("coercivity_c2", format!("{:.6e}", c.c2));
            row("coercivity_c3", format!("{:.6e}", c.c3));
        }
        for (n, o, i) in &self.zero_mode_exponents {
            row(&format!("gamma{n}_origin_exponent"), format!("{o:.6}"));
            if let Some(i) = i {
                row(&format!("t{n}_infinity_exponent"), format!("{i:.6}"));
            }
        }
        s
    }
}
