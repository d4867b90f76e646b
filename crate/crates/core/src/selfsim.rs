//! Self-similar variables `w(y, s) = (T-t)^{1/(p-1)} u(t, √(T-t) y)`,
//! `s = -log(T-t)`, and the Gaussian-weighted functionals `E(w)`, `I(w)`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialInterpolant};
use crate::ground_state::kappa_const;
use crate::linalg::fit_line;
use crate::params::Params;
use crate::solver::{PreciseTime, RunRecord};

/// Outer end of the `y` grid.
pub const Y_MAX: f64 = 12.0;
/// Default number of `y` intervals (even, for Simpson's rule).
pub const Y_INTERVALS: usize = 1200;
/// Relative threshold for the blow-up criterion `I(w) > tol`.
pub const I_TOL: f64 = 1e-8;

/// Uniform `y` nodes on `[0, Y_MAX]` with Simpson weights for `∫ f ρ dy`,
/// `ρ = (4π)^{-d/2} e^{-|y|²/4}` (surface factor included).
#[derive(Clone, Debug)]
pub struct SelfSimGrid {
    params: Params,
    y: Vec<f64>,
    rho_w: Vec<f64>,
    h: f64,
}

impl SelfSimGrid {
    pub fn new(params: &Params, intervals: usize) -> Result<Self> {
        if intervals < 8 || intervals % 2 == 1 {
            return Err(Error::Config(format!(
                "y grid needs an even number (≥ 8) of intervals, got {intervals}"
            )));
        }
        let h = Y_MAX / intervals as f64;
        let d = params.dim();
        let norm = params.sphere_area() * (4.0 * std::f64::consts::PI).powf(-d / 2.0);
        let y: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
        let rho_w = y
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let simpson = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                simpson * h / 3.0 * norm * y.powf(d - 1.0) * (-y * y / 4.0).exp()
            })
            .collect();
        Ok(Self { params: *params, y, rho_w, h })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn rho_weights(&self) -> &[f64] {
        &self.rho_w
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.rho_w).map(|(a, w)| a * w).sum()
    }

    /// Fourth-order derivative on the uniform nodes, using the even extension
    /// at `y = 0` and one-sided stencils at `Y_MAX`.
    pub fn derivative(&self, w: &[f64]) -> Vec<f64> {
        let n = w.len();
        let h = self.h;
        let at = |j: isize| w[j.unsigned_abs()];
        (0..n)
            .map(|i| {
                let i = i as isize;
                if (i as usize) + 2 < n {
                    (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h)
                } else {
                    let k = i as usize;
                    (25.0 * w[k] - 48.0 * w[k - 1] + 36.0 * w[k - 2] - 16.0 * w[k - 3] + 3.0 * w[k - 4])
                        / (12.0 * h)
                }
            })
            .collect()
    }
}

/// `w` on the `y` grid at one time.
#[derive(Clone, Debug)]
pub struct SelfSimFrame {
    pub grid: Arc<SelfSimGrid>,
    pub t: f64,
    /// `T - t`.
    pub remaining: f64,
    /// Absolute `T`, shared by frames of one renormalization.
    pub t_blow: f64,
    pub s_ss: f64,
    pub w: Vec<f64>,
}

/// Largest `y` at which `u` on `[0, r_max]` can be sampled for `T - t = tau`.
pub fn max_usable_y(r_max: f64, tau: f64) -> f64 {
    r_max / tau.sqrt()
}

/// Renormalizes `u(t)` with `tau = T - t > 0`.
pub fn renormalize(u: &RadialField, t: f64, tau: f64, t_blow: f64, grid: Arc<SelfSimGrid>) -> Result<SelfSimFrame> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("renormalization needs t < T, got T - t = {tau:e}")));
    }
    let max_y = max_usable_y(u.grid().r_max(), tau);
    if max_y < Y_MAX {
        return Err(Error::DomainExceeded { max_y });
    }
    let interp = RadialInterpolant::new(u);
    let amp = tau.powf(grid.params.inv_p_minus_1());
    let root = tau.sqrt();
    let w = grid.y.iter().map(|&y| amp * interp.eval(root * y)).collect();
    Ok(SelfSimFrame {
        t,
        remaining: tau,
        t_blow,
        s_ss: -tau.ln(),
        w,
        grid,
    })
}

impl SelfSimFrame {
    /// Frame holding a given profile (for analytic checks).
    pub fn from_profile(grid: Arc<SelfSimGrid>, f: impl Fn(f64) -> f64) -> Self {
        let w = grid.y.iter().map(|&y| f(y)).collect();
        Self {
            grid,
            t: 0.0,
            remaining: 1.0,
            t_blow: 1.0,
            s_ss: 0.0,
            w,
        }
    }

    /// `∫ w² ρ dy`.
    pub fn mass(&self) -> f64 {
        let sq: Vec<f64> = self.w.iter().map(|v| v * v).collect();
        self.grid.integrate(&sq)
    }
}

/// `E(w) = ∫ (½|∇w|² + w²/(2(p-1)) - |w|^{p+1}/(p+1)) ρ dy`.
pub fn energy_w(frame: &SelfSimFrame) -> f64 {
    let p = frame.grid.params.p();
    let dw = frame.grid.derivative(&frame.w);
    let density: Vec<f64> = frame
        .w
        .iter()
        .zip(&dw)
        .map(|(w, g)| 0.5 * g * g + w * w / (2.0 * (p - 1.0)) - w.abs().powf(p + 1.0) / (p + 1.0))
        .collect();
    frame.grid.integrate(&density)
}

/// `I(w) = -2E(w) + ((p-1)/(p+1)) (∫ w² ρ)^{(p+1)/2}`.
pub fn i_w(frame: &SelfSimFrame) -> f64 {
    let p = frame.grid.params.p();
    -2.0 * energy_w(frame) + (p - 1.0) / (p + 1.0) * frame.mass().powf(0.5 * (p + 1.0))
}

/// `I(w) > 10⁻⁸ · (1 + |2E| + ((p-1)/(p+1))(∫w²ρ)^{(p+1)/2})`: certifies
/// blow-up before `T`.
pub fn blowup_criterion(frame: &SelfSimFrame) -> bool {
    let p = frame.grid.params.p();
    let e = energy_w(frame);
    let m = (p - 1.0) / (p + 1.0) * frame.mass().powf(0.5 * (p + 1.0));
    -2.0 * e + m > I_TOL * (1.0 + 2.0 * e.abs() + m)
}

/// Monotonicity of `E(w(s))` and the dissipation balance
/// `-dE/ds = ∫ w_s² ρ` along time-ordered frames.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub s: Vec<f64>,
    pub energies: Vec<f64>,
    /// Largest increase `E(s_{i+1}) - E(s_i)` (0 if monotone).
    pub max_increase: f64,
    /// Median over interior frames of `|(-ΔE/Δs) - ∫w_s²ρ| / ∫w_s²ρ`.
    pub balance_error: f64,
}

pub fn lyapunov_check(frames: &[SelfSimFrame]) -> Result<LyapunovReport> {
    if frames.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Lyapunov check needs ≥ 3 frames, got {}",
            frames.len()
        )));
    }
    let t_blow = frames[0].t_blow;
    for f in frames {
        if f.t_blow != t_blow {
            return Err(Error::FrameMismatch(format!(
                "frames renormalized at T = {t_blow} and T = {}",
                f.t_blow
            )));
        }
    }
    if frames.windows(2).any(|w| w[1].s_ss <= w[0].s_ss) {
        return Err(Error::FrameMismatch("frames are not ordered in s".into()));
    }
    let energies: Vec<f64> = frames.iter().map(energy_w).collect();
    let s: Vec<f64> = frames.iter().map(|f| f.s_ss).collect();
    let max_increase = energies.windows(2).map(|e| e[1] - e[0]).fold(0.0, f64::max);
    let mut errors: Vec<f64> = (1..frames.len() - 1)
        .filter_map(|i| {
            let ds = s[i + 1] - s[i - 1];
            let ws: Vec<f64> = frames[i + 1]
                .w
                .iter()
                .zip(&frames[i - 1].w)
                .map(|(a, b)| ((a - b) / ds).powi(2))
                .collect();
            let diss = frames[i].grid.integrate(&ws);
            let de = -(energies[i + 1] - energies[i - 1]) / ds;
            (diss > 0.0).then(|| (de - diss).abs() / diss)
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let balance_error = if errors.is_empty() { 0.0 } else { errors[errors.len() / 2] };
    Ok(LyapunovReport { s, energies, max_increase, balance_error })
}

/// `κ̂` (median of `‖u‖_∞ (T-t)^{1/(p-1)}`) and the fitted exponent of
/// `‖u‖_∞ ∝ (T-t)^{-β}` over the last decade of growth.
pub fn rate_fit(remaining: &[f64], linf: &[f64], params: &Params) -> Result<(f64, f64)> {
    if remaining.len() != linf.len() || linf.is_empty() {
        return Err(Error::InsufficientData("empty or mismatched rate trace".into()));
    }
    let top = linf.iter().copied().zip(remaining).filter(|(_, r)| **r > 0.0).map(|(l, _)| l).fold(0.0, f64::max);
    let idx: Vec<usize> = (0..linf.len())
        .filter(|&i| remaining[i] > 0.0 && linf[i] >= top / 10.0)
        .collect();
    if idx.len() < crate::solver::MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in the last decade before cutoff",
            idx.len()
        )));
    }
    let q = params.inv_p_minus_1();
    let mut ks: Vec<f64> = idx.iter().map(|&i| linf[i] * remaining[i].powf(q)).collect();
    ks.sort_by(f64::total_cmp);
    let k = if ks.len() % 2 == 1 {
        ks[ks.len() / 2]
    } else {
        0.5 * (ks[ks.len() / 2 - 1] + ks[ks.len() / 2])
    };
    let xs: Vec<f64> = idx.iter().map(|&i| remaining[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| linf[i].ln()).collect();
    Ok((k, -fit_line(&xs, &ys)?.0))
}

/// [`rate_fit`] against the run's extrapolated blow-up time (or `t_blow` if
/// given), with remaining times taken from the extended-precision clock.
pub fn rate_check(record: &RunRecord, t_blow: Option<PreciseTime>) -> Result<(f64, f64)> {
    let t_blow = t_blow
        .or(record.blowup_time)
        .ok_or_else(|| Error::InsufficientData("run has no blow-up time".into()))?;
    let remaining: Vec<f64> = record.precise_times.iter().map(|t| t_blow.minus(*t)).collect();
    rate_fit(&remaining, &record.linf_trace, &record.params)
}

/// Frames for every snapshot before `t_blow` that fits the radial domain.
pub fn frames_from_record(
    record: &RunRecord,
    t_blow: PreciseTime,
    grid: Arc<SelfSimGrid>,
) -> Result<Vec<SelfSimFrame>> {
    let mut out = vec![];
    for snap in &record.snapshots {
        let tau = t_blow.minus(snap.time);
        if tau <= 0.0 {
            continue;
        }
        match renormalize(&snap.field, snap.t, tau, t_blow.value(), grid.clone()) {
            Ok(f) => out.push(f),
            Err(Error::DomainExceeded { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `t,s_ss,E_w,I_w,criterion,kappa_hat_running`; the running `κ̂` is
/// `sup_y |w|`.
pub fn frames_to_csv(frames: &[SelfSimFrame]) -> String {
    let mut s = String::from("t,s_ss,E_w,I_w,criterion,kappa_hat_running\n");
    for f in frames {
        let k = f.w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e}",
            f.t,
            f.s_ss,
            energy_w(f),
            i_w(f),
            u8::from(blowup_criterion(f)),
            k
        );
    }
    s
}

/// `E(κ) = κ²/(2(p+1))`.
pub fn kappa_energy(params: &Params) -> f64 {
    kappa_const(params).powi(2) / (2.0 * (params.p() + 1.0))
}
