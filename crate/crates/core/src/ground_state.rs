//! Closed forms of the Aubin–Talenti ground state and its derived profiles.
//!
//! With `c = d(d-2)` and `x = r²/c` the ground state is
//! `Q(r) = (1 + x)^{-(d-2)/2}`. Every derivative below is differentiated by
//! hand; nothing here uses finite differences.

use crate::params::Params;

fn base(r: f64, params: &Params) -> f64 {
    let d = params.dim();
    1.0 + r * r / (d * (d - 2.0))
}

/// Ground state `Q(r)`.
pub fn eval_q(r: f64, params: &Params) -> f64 {
    base(r, params).powf(-params.half_weight())
}

/// Radial derivative `∂_r Q = -(r/d)(1+x)^{-d/2}`.
pub fn eval_dr_q(r: f64, params: &Params) -> f64 {
    let d = params.dim();
    -(r / d) * base(r, params).powf(-d / 2.0)
}

/// Second radial derivative `∂_rr Q`.
pub fn eval_drr_q(r: f64, params: &Params) -> f64 {
    let d = params.dim();
    let b = base(r, params);
    -b.powf(-d / 2.0) / d + r * r / (d * (d - 2.0)) * b.powf(-d / 2.0 - 1.0)
}

/// Radial Laplacian `∂_rr Q + (d-1)/r ∂_r Q`, equal to `-Q^p`.
pub fn eval_laplacian_q(r: f64, params: &Params) -> f64 {
    let d = params.dim();
    if r == 0.0 {
        return d * eval_drr_q(0.0, params);
    }
    eval_drr_q(r, params) + (d - 1.0) / r * eval_dr_q(r, params)
}

/// Potential `V = -p Q^{p-1} = -p (1+x)^{-2}`.
pub fn eval_v(r: f64, params: &Params) -> f64 {
    -params.p() * base(r, params).powi(-2)
}

/// `V'(r)`.
pub fn eval_dr_v(r: f64, params: &Params) -> f64 {
    let d = params.dim();
    4.0 * params.p() * r / (d * (d - 2.0)) * base(r, params).powi(-3)
}

/// Scaling generator `ΛQ = (d-2)/2 Q + r ∂_r Q = (d-2)/2 (1-x)(1+x)^{-d/2}`.
pub fn eval_lambda_q(r: f64, params: &Params) -> f64 {
    params.half_weight() * eval_q(r, params) + r * eval_dr_q(r, params)
}

/// `∂_r(ΛQ) = d/2 ∂_r Q + r ∂_rr Q`.
pub fn eval_dr_lambda_q(r: f64, params: &Params) -> f64 {
    (params.half_weight() + 1.0) * eval_dr_q(r, params) + r * eval_drr_q(r, params)
}

/// The ODE blow-up constant `κ = (1/(p-1))^{1/(p-1)}`.
pub fn kappa_const(params: &Params) -> f64 {
    let k = params.inv_p_minus_1();
    k.powf(k)
}

/// Rescaled ground state `Q_μ(r) = μ^{-(d-2)/2} Q(r/μ)`.
pub fn eval_q_scaled(r: f64, mu: f64, params: &Params) -> f64 {
    mu.powf(-params.half_weight()) * eval_q(r / mu, params)
}

/// The radius where `r²|V(r)|` attains its maximum `d(d+2)/4`.
pub fn potential_peak_radius(params: &Params) -> f64 {
    let d = params.dim();
    (d * (d - 2.0)).sqrt()
}
