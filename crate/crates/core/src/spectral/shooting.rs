use crate::error::{Error, Result};
use crate::ground_state::eval_v;
use crate::ode::rk4_step;
use crate::params::Params;

const START: f64 = 1e-3;
const END: f64 = 30.0;
const STEP: f64 = 1e-3;

/// Independent estimate of `e₀` by shooting the continuous radial ODE
/// `y'' + (d-1)/r y' = (V + e) y` from the origin with `y(0) = 1`.
///
/// A trial `e` above `e₀` gives a node-free solution that grows; one below
/// `e₀` crosses zero. Bisection on that dichotomy converges to `e₀`.
pub fn shoot_e0(params: &Params) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, params.p());
    if crosses_zero(params, hi) {
        return Err(Error::Discretization("shooting found no bound state".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crosses_zero(params, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn crosses_zero(params: &Params, e: f64) -> bool {
    let d = params.dim();
    let rhs = |r: f64, s: [f64; 2]| [s[1], -(d - 1.0) / r * s[1] + (eval_v(r, params) + e) * s[0]];
    let c2 = (eval_v(0.0, params) + e) / (2.0 * d);
    let mut state = [1.0 + c2 * START * START, 2.0 * c2 * START];
    let mut r = START;
    while r < END {
        state = rk4_step(&rhs, r, state, STEP);
        r += STEP;
        if state[0] < 0.0 {
            return true;
        }
        if state[0] > 1e6 {
            return false;
        }
    }
    state[0] < 0.0
}
