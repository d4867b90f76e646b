use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::ground_state::eval_v;
use crate::linalg::fit_line;
use crate::ode::rk4_span;
use crate::params::Params;

/// Largest RK4 step in `t = log r`.
const LOG_STEP: f64 = 2e-3;
/// Start of the forward integration, `r = e^{-25}`.
const T_FORWARD_START: f64 = -25.0;
/// Decades beyond `R_max` used to read off the growth exponent at infinity.
const FAR_DECADES: f64 = 2.0;

/// Regular and singular zeros of `H^(n)`.
#[derive(Clone, Debug)]
pub struct ZeroModePair {
    pub n: u32,
    /// Regular-at-origin zero `T^(n)` on every node (`T^(n)(0)` from its limit).
    pub t_mode: RadialField,
    /// `∂_r log T^(n)` on every node except the origin, where it is set to 0.
    pub t_log_derivative: Vec<f64>,
    /// Radii (all grid nodes except `r = 0`) where `Γ^(n)` is sampled.
    pub gamma_radii: Vec<f64>,
    pub gamma_values: Vec<f64>,
    /// Log-log slope of `|Γ^(n)|` over the first two decades of nodes.
    pub origin_exponent: f64,
    /// Log-log slope of `T^(n)` far out (reported for `n ≥ 2`).
    pub infinity_exponent: Option<f64>,
}

/// Integrates `w'' + (d-2)w' - [e^{2t}V(e^t) + n(d+n-2)]w = 0` (with
/// `w(t) = f(e^t)`) forward from `w ≈ e^{nt}` and backward from
/// `w ≈ e^{-(d+n-2)t}` (for `n = 0`, from `w = 0, w' = 1` at `t = 0`).
pub fn zero_modes(n: u32, grid: Arc<RadialGrid>, params: &Params) -> Result<ZeroModePair> {
    let d = params.dim();
    let nf = n as f64;
    let centrifugal = nf * (d + nf - 2.0);
    let rhs = move |t: f64, s: [f64; 2]| {
        let r = t.exp();
        [s[1], -(d - 2.0) * s[1] + (r * r * eval_v(r, params) + centrifugal) * s[0]]
    };
    let nodes = grid.nodes();
    let len = nodes.len();

    // forward: T^(n)
    let mut t_values = vec![0.0; len];
    let mut t_logd = vec![0.0; len];
    t_values[0] = if n == 0 { 1.0 } else { 0.0 };
    let mut t = T_FORWARD_START;
    let mut state = [(nf * t).exp(), nf * (nf * t).exp()];
    for i in 1..len {
        let target = nodes[i].ln();
        state = rk4_span(&rhs, t, target, state, LOG_STEP);
        t = target;
        check(state, t)?;
        t_values[i] = state[0];
        t_logd[i] = state[1] / (state[0] * nodes[i]);
    }
    let infinity_exponent = if n >= 2 {
        let start = t;
        let stop = start + FAR_DECADES * std::f64::consts::LN_10;
        let mut xs = vec![];
        let mut ys = vec![];
        let mut s = state;
        let mut tt = start;
        let samples = 200;
        let h = (stop - start) / samples as f64;
        for _ in 0..samples {
            s = rk4_span(&rhs, tt, tt + h, s, LOG_STEP);
            tt += h;
            check(s, tt)?;
            if tt >= start + (FAR_DECADES - 1.0) * std::f64::consts::LN_10 {
                xs.push(tt);
                ys.push(s[0].abs().ln());
            }
        }
        Some(fit_line(&xs, &ys)?.0)
    } else {
        None
    };

    // Γ^(n): for n ≥ 1 integrate back from far out along the decaying
    // branch. For n = 0 that branch is T^(0) itself (ΛQ ~ r^{2-d}), so Γ^(0)
    // starts from w = 0, w' = 1 at r = 1 and is continued both ways.
    let mut gamma_values = vec![0.0; len - 1];
    let (t_start, seed) = if n == 0 {
        (0.0, [0.0, 1.0])
    } else {
        let decay = d + nf - 2.0;
        let t_end = nodes[len - 1].ln() + 10.0;
        (t_end, [(-decay * t_end).exp(), -decay * (-decay * t_end).exp()])
    };
    let split = nodes.partition_point(|&r| r.ln() <= t_start).max(1);
    let (mut t, mut state) = (t_start, seed);
    for i in (1..split).rev() {
        let target = nodes[i].ln();
        state = rk4_span(&rhs, t, target, state, LOG_STEP);
        t = target;
        check(state, t)?;
        gamma_values[i - 1] = state[0];
    }
    let (mut t, mut state) = (t_start, seed);
    for i in split..len {
        let target = nodes[i].ln();
        state = rk4_span(&rhs, t, target, state, LOG_STEP);
        t = target;
        check(state, t)?;
        gamma_values[i - 1] = state[0];
    }
    let gamma_radii = nodes[1..].to_vec();
    let r_first = gamma_radii[0];
    let (xs, ys): (Vec<f64>, Vec<f64>) = gamma_radii
        .iter()
        .zip(&gamma_values)
        .take_while(|(r, _)| **r <= 100.0 * r_first)
        .map(|(r, g)| (r.ln(), g.abs().ln()))
        .unzip();
    let origin_exponent = fit_line(&xs, &ys)?.0;

    Ok(ZeroModePair {
        n,
        t_mode: RadialField::new(grid, t_values)?,
        t_log_derivative: t_logd,
        gamma_radii,
        gamma_values,
        origin_exponent,
        infinity_exponent,
    })
}

fn check(state: [f64; 2], t: f64) -> Result<()> {
    if state[0].is_finite() && state[1].is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "zero-mode integration lost finiteness at t = {t:.4} (r = {:.4e})",
            t.exp()
        )))
    }
}

impl ZeroModePair {
    /// Relative residual of `H^(n) T^(n)` over interior nodes, excluding
    /// `margin` nodes at each end.
    pub fn residual(&self, params: &Params, margin: usize) -> Result<f64> {
        let grid = self.t_mode.grid().clone();
        let op = super::assemble_h(self.n, grid.clone(), params)?;
        let ht = op.apply(self.t_mode.values());
        let len = grid.len();
        let w = grid.weights();
        let (mut num, mut den) = (0.0, 0.0);
        for i in margin..len - margin {
            num += w[i] * ht[i] * ht[i];
            den += w[i] * self.t_mode.values()[i].powi(2);
        }
        Ok((num / den).sqrt())
    }
}
