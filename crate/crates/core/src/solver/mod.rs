//! Radial evolution of `∂ₜu = Δu + |u|^{p-1}u` with adaptive IMEX stepping,
//! blow-up / dissipation detection and energy bookkeeping.

mod imex;
mod operator;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use imex::{Reaction, Stepper};
pub use operator::{gradient, Fd4Laplacian, OuterCondition};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::linalg::fit_line;
use crate::params::Params;

/// Fewest samples accepted by the blow-up-time fit.
pub const MIN_FIT_SAMPLES: usize = 20;

/// Boundary handling at `R_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Dirichlet, holding `u(R_max)` at its initial value (homogeneous for
    /// decaying data; keeps `Q` exactly stationary for data near `Q`).
    #[default]
    Hold,
    /// Homogeneous Dirichlet.
    Zero,
    /// Reflecting; used for the spatially constant ODE mode.
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Two-stage, second-order, L-stable IMEX Runge–Kutta.
    #[default]
    Ars222,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub blowup_linf: f64,
    pub dissip_linf: f64,
    /// Step-controller safety factor.
    pub safety: f64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// ODE-timescale cap `dt ≤ c_dt ‖u‖_∞^{-(p-1)}`, active once `‖u‖_∞`
    /// exceeds `cap_onset_linf`.
    pub c_dt: f64,
    pub cap_onset_linf: f64,
    pub integrator: Integrator,
    pub boundary: Boundary,
    /// Switch the nonlinearity off (linear heat flow).
    pub reaction: bool,
    /// Snapshots are stored exactly at multiples of this time.
    pub snapshot_interval: f64,
    /// Extra snapshot whenever `‖u‖_∞` has grown by this factor.
    pub snapshot_growth: f64,
    /// Accepted steps of monotone growth required for a blow-up verdict.
    pub blowup_window: usize,
    /// Accepted steps of monotone decay required for a dissipation verdict.
    pub dissip_window: usize,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            dt_min: 1e-13,
            dt_max: 0.5,
            blowup_linf: 1e6,
            dissip_linf: 1e-4,
            safety: 0.9,
            t_end: 300.0,
            rtol: 1e-7,
            atol: 1e-12,
            c_dt: 0.02,
            cap_onset_linf: 2.0,
            integrator: Integrator::Ars222,
            boundary: Boundary::Hold,
            reaction: true,
            snapshot_interval: 0.25,
            snapshot_growth: 1.1,
            blowup_window: 10,
            dissip_window: 50,
            max_steps: 5_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init < self.dt_max) {
            return bad("need 0 < dt_min < dt_init < dt_max");
        }
        if !(self.blowup_linf > 0.0 && self.dissip_linf > 0.0 && self.dissip_linf < self.blowup_linf) {
            return bad("thresholds must be positive with dissip_linf < blowup_linf");
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad("safety must lie in (0, 1)");
        }
        if !(self.t_end > 0.0 && self.rtol > 0.0 && self.atol >= 0.0 && self.c_dt > 0.0) {
            return bad("t_end, rtol, c_dt must be positive and atol nonnegative");
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_growth > 1.0) {
            return bad("snapshot_interval must be positive and snapshot_growth > 1");
        }
        if self.blowup_window == 0 || self.dissip_window == 0 {
            return bad("verdict windows must be nonzero");
        }
        Ok(())
    }

    pub fn stepper(&self, grid: &RadialGrid, params: &Params, boundary_value: f64) -> Stepper {
        let outer = match self.boundary {
            Boundary::Neumann => OuterCondition::Neumann,
            _ => OuterCondition::Dirichlet,
        };
        let value = match self.boundary {
            Boundary::Hold => boundary_value,
            _ => 0.0,
        };
        Stepper::new(
            Fd4Laplacian::new(grid, outer),
            Reaction {
                p: params.p(),
                enabled: self.reaction,
            },
            value,
        )
    }
}

/// Growing mode of the solver's own linearization `L + pQ^{p-1}` about `Q`
/// (homogeneous Dirichlet at `R_max`), by shifted inverse iteration from
/// `(e0_guess, guess)`. The returned field has `⟨mode, guess⟩ = ⟨guess, guess⟩`.
pub fn unstable_mode(guess: &RadialField, e0_guess: f64, params: &Params) -> Result<(f64, RadialField)> {
    let grid = guess.grid();
    let lap = Fd4Laplacian::new(grid, OuterCondition::Dirichlet);
    let p = params.p();
    let potential: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| p * crate::ground_state::eval_q(r, params).powf(p - 1.0))
        .collect();
    // shift just above the guess so the iteration cannot stall on it
    let sigma = e0_guess * (1.0 + 1e-3);
    let lu = lap.shifted_factor(&potential, sigma)?;
    let mut v = guess.values().to_vec();
    *v.last_mut().unwrap() = 0.0;
    let mut mu = e0_guess;
    for _ in 0..50 {
        let x = lu.solve(&v);
        let vx = grid.inner(&v, &x);
        let next = sigma + grid.inner(&v, &v) / vx;
        let nx = grid.norm(&x);
        v = x.iter().map(|a| a / nx).collect();
        let done = (next - mu).abs() <= 1e-14 * next.abs();
        mu = next;
        if done {
            break;
        }
    }
    if !mu.is_finite() {
        return Err(Error::Numeric("inverse iteration for the unstable mode diverged".into()));
    }
    let field = guess.with_values(v);
    let scale = guess.inner(guess) / field.inner(guess);
    Ok((mu, field.scaled(scale)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunVerdict {
    Dissipation,
    Blowup { t_est: f64, uncertainty: f64 },
    TrappedAtHorizon,
}

impl RunVerdict {
    pub fn flag(&self) -> u8 {
        match self {
            RunVerdict::Dissipation => 1,
            RunVerdict::Blowup { .. } => 2,
            RunVerdict::TrappedAtHorizon => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RunVerdict::Dissipation => "dissipation",
            RunVerdict::Blowup { .. } => "blowup",
            RunVerdict::TrappedAtHorizon => "trapped_at_horizon",
        }
    }
}

/// Time as an unevaluated sum `hi + lo`, so that `T - t` stays accurate
/// when it is many orders of magnitude below `t` (deep into a blow-up).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PreciseTime {
    pub hi: f64,
    pub lo: f64,
}

impl PreciseTime {
    pub fn new(t: f64) -> Self {
        Self { hi: t, lo: 0.0 }
    }

    /// Compensated addition (two-sum).
    pub fn add(self, h: f64) -> Self {
        let s = self.hi + h;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (h - bb);
        let lo = self.lo + err;
        let hi = s + lo;
        Self {
            hi,
            lo: lo - (hi - s),
        }
    }

    /// `self - other` as a plain float.
    pub fn minus(self, other: PreciseTime) -> f64 {
        (self.hi - other.hi) + (self.lo - other.lo)
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub time: PreciseTime,
    pub field: RadialField,
}

/// Time series of one run. Row 0 is the initial state.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub params: Params,
    pub times: Vec<f64>,
    pub precise_times: Vec<PreciseTime>,
    /// Step that produced each row (0 for the initial row).
    pub dts: Vec<f64>,
    pub linf_trace: Vec<f64>,
    pub h1dot_trace: Vec<f64>,
    pub energy_trace: Vec<f64>,
    /// Energy gap between the full step and the two half steps.
    pub energy_error: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_field: RadialField,
    pub verdict: RunVerdict,
    /// Extrapolated blow-up time for a blow-up verdict.
    pub blowup_time: Option<PreciseTime>,
    pub rejected_steps: usize,
}

/// Fourth-order `∫|∂_r u|² r^{d-1} dr`.
pub fn h1dot_sq(u: &RadialField) -> f64 {
    let g = u.grid();
    let du = gradient(g, u.values());
    g.xi_weights().iter().zip(&du).map(|(w, d)| w * d * d).sum()
}

/// `E(u) = ½∫|∇u|² - ((d-2)/(2d))∫|u|^{2d/(d-2)}` (radial measure, without
/// the sphere area).
pub fn energy(u: &RadialField, params: &Params) -> Result<f64> {
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("energy of a non-finite field".into()));
    }
    let g = u.grid();
    let d = params.dim();
    let q = 2.0 * d / (d - 2.0);
    let w = g.xi_weights();
    let pot: f64 = w.iter().zip(u.values()).map(|(w, v)| w * v.abs().powf(q)).sum();
    Ok(0.5 * h1dot_sq(u) - (d - 2.0) / (2.0 * d) * pot)
}

/// One step of size `dt` from `u` (boundary value taken from `u`).
pub fn step(u: &RadialField, dt: f64, cfg: &SolverConfig, params: &Params) -> Result<RadialField> {
    if !(dt >= cfg.dt_min && dt <= cfg.dt_max) {
        return Err(Error::Config(format!(
            "dt = {dt:e} outside [{:e}, {:e}]",
            cfg.dt_min, cfg.dt_max
        )));
    }
    let stepper = cfg.stepper(u.grid(), params, *u.values().last().unwrap());
    RadialField::new(u.grid().clone(), stepper.step(u.values(), dt)?)
}

/// Semi-discrete `∂ₜu = Lu + N(u)` under the configuration's boundary rule.
pub fn time_derivative(u: &RadialField, cfg: &SolverConfig, params: &Params) -> RadialField {
    let stepper = cfg.stepper(u.grid(), params, *u.values().last().unwrap());
    u.with_values(stepper.rhs(u.values()))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn strictly_monotone(trace: &[f64], window: usize, increasing: bool) -> bool {
    if trace.len() < window + 1 {
        return false;
    }
    trace[trace.len() - window - 1..]
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Adaptive evolution to a verdict (see [`RunVerdict`]).
///
/// Step size is controlled by step doubling: the two-half-step result is
/// kept, and its difference from the full step (divided by 3) is the local
/// error estimate.
pub fn evolve(u0: &RadialField, cfg: &SolverConfig, params: &Params) -> Result<RunRecord> {
    cfg.validate()?;
    if u0.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite initial data".into()));
    }
    let grid: Arc<RadialGrid> = u0.grid().clone();
    let stepper = cfg.stepper(&grid, params, *u0.values().last().unwrap());
    let pm1 = params.p() - 1.0;

    let mut u = u0.values().to_vec();
    let mut t = 0.0;
    let mut clock = PreciseTime::default();
    let mut dt = cfg.dt_init;
    let field = |v: Vec<f64>| RadialField::new(grid.clone(), v);
    let f0 = field(u.clone())?;
    let mut rec = RunRecord {
        params: *params,
        times: vec![0.0],
        precise_times: vec![PreciseTime::default()],
        dts: vec![0.0],
        linf_trace: vec![sup(&u)],
        h1dot_trace: vec![h1dot_sq(&f0).sqrt()],
        energy_trace: vec![energy(&f0, params)?],
        energy_error: vec![0.0],
        snapshots: vec![Snapshot {
            t: 0.0,
            time: PreciseTime::default(),
            field: f0,
        }],
        final_field: RadialField::zeros(grid.clone()),
        verdict: RunVerdict::TrappedAtHorizon,
        blowup_time: None,
        rejected_steps: 0,
    };
    let mut next_snap = cfg.snapshot_interval;
    let mut snap_linf = sup(&u);
    let mut verdict = RunVerdict::TrappedAtHorizon;

    for _ in 0..cfg.max_steps {
        if t >= cfg.t_end {
            break;
        }
        let linf = sup(&u);
        let cap = if linf > cfg.cap_onset_linf {
            cfg.c_dt * linf.powf(-pm1)
        } else {
            f64::INFINITY
        };
        let mut h = dt.min(cfg.dt_max).min(cap);
        let target = next_snap.min(cfg.t_end);
        let mut lands = false;
        if t + h >= target - 1e-12 * target.max(1.0) {
            h = target - t;
            lands = true;
        }
        if h < cfg.dt_min {
            if strictly_monotone(&rec.linf_trace, cfg.blowup_window, true) {
                verdict = blowup_verdict(&mut rec, params);
                break;
            }
            return Err(Error::Numeric(format!(
                "step size {h:.3e} fell below dt_min at t = {t:.6}"
            )));
        }
        let attempt = (|| -> Result<(Vec<f64>, f64, f64)> {
            let full = stepper.step(&u, h)?;
            let half = stepper.step(&u, 0.5 * h)?;
            let two = stepper.step(&half, 0.5 * h)?;
            let diff = full.iter().zip(&two).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let err = diff / (3.0 * (cfg.atol + cfg.rtol * sup(&two)));
            let ef = energy(&field(full)?, params)?;
            let et = energy(&field(two.clone())?, params)?;
            Ok((two, err, (ef - et).abs() / 3.0))
        })();
        let (next, err, e_err) = match attempt {
            Ok(x) => x,
            Err(Error::Numeric(_)) => {
                rec.rejected_steps += 1;
                dt = 0.5 * h;
                continue;
            }
            Err(e) => return Err(e),
        };
        let factor = (cfg.safety * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 5.0);
        if err > 1.0 {
            rec.rejected_steps += 1;
            dt = h * factor.min(0.9);
            continue;
        }
        // accept
        u = next;
        clock = if lands { PreciseTime::new(target) } else { clock.add(h) };
        t = clock.hi;
        // a step clipped to land on a snapshot time says little about the
        // next admissible step, so the earlier proposal is kept
        dt = if lands && h < dt { dt } else { h * factor };
        if lands {
            next_snap += cfg.snapshot_interval;
        }
        let f = field(u.clone())?;
        let linf = sup(&u);
        rec.times.push(t);
        rec.precise_times.push(clock);
        rec.dts.push(h);
        rec.linf_trace.push(linf);
        rec.h1dot_trace.push(h1dot_sq(&f).sqrt());
        rec.energy_trace.push(energy(&f, params)?);
        rec.energy_error.push(e_err);
        if lands || linf >= snap_linf * cfg.snapshot_growth {
            snap_linf = linf;
            rec.snapshots.push(Snapshot {
                t,
                time: clock,
                field: f,
            });
        }
        if linf >= cfg.blowup_linf && strictly_monotone(&rec.linf_trace, cfg.blowup_window, true) {
            verdict = blowup_verdict(&mut rec, params);
            break;
        }
        if linf <= cfg.dissip_linf && strictly_monotone(&rec.linf_trace, cfg.dissip_window, false) {
            verdict = RunVerdict::Dissipation;
            break;
        }
    }
    rec.final_field = field(u)?;
    if rec.snapshots.last().map(|s| s.t) != Some(t) {
        rec.snapshots.push(Snapshot {
            t,
            time: clock,
            field: rec.final_field.clone(),
        });
    }
    rec.verdict = verdict;
    Ok(rec)
}

fn blowup_verdict(rec: &mut RunRecord, params: &Params) -> RunVerdict {
    let last = *rec.precise_times.last().unwrap();
    let offsets = rec.time_offsets();
    match estimate_t(&offsets, &rec.linf_trace, params) {
        Ok((ahead, uncertainty)) => {
            let t_blow = last.add(ahead);
            rec.blowup_time = Some(t_blow);
            RunVerdict::Blowup {
                t_est: t_blow.value(),
                uncertainty,
            }
        }
        Err(_) => {
            rec.blowup_time = Some(last);
            RunVerdict::Blowup {
                t_est: last.value(),
                uncertainty: f64::NAN,
            }
        }
    }
}

/// Samples whose `‖u‖_∞` lies within `decades` of the final value.
fn tail_window(linf: &[f64], decades: f64) -> usize {
    let top = *linf.last().unwrap();
    let floor = top * 10f64.powf(-decades);
    // last contiguous stretch above the floor
    let mut start = linf.len();
    while start > 0 && linf[start - 1] >= floor {
        start -= 1;
    }
    start
}

/// Blow-up time from a linear fit of `‖u‖_∞^{-(p-1)}` against `t` over the
/// last decade of growth. The uncertainty is the spread of the estimates over
/// the last half decade, decade and two decades (windows with fewer than
/// [`MIN_FIT_SAMPLES`] points are skipped, except the decade itself).
pub fn estimate_t(times: &[f64], linf: &[f64], params: &Params) -> Result<(f64, f64)> {
    if times.len() != linf.len() || times.is_empty() {
        return Err(Error::InsufficientData("empty or mismatched trace".into()));
    }
    let pm1 = params.p() - 1.0;
    let fit = |decades: f64| -> Option<Result<f64>> {
        let start = tail_window(linf, decades);
        if linf.len() - start < MIN_FIT_SAMPLES {
            return None;
        }
        let xs = &times[start..];
        let ys: Vec<f64> = linf[start..].iter().map(|v| v.powf(-pm1)).collect();
        Some(fit_line(xs, &ys).and_then(|(slope, icpt)| {
            if slope < 0.0 {
                Ok(-icpt / slope)
            } else {
                Err(Error::InsufficientData("trace is not growing".into()))
            }
        }))
    };
    let main = match fit(1.0) {
        Some(r) => r?,
        None => {
            return Err(Error::InsufficientData(format!(
                "fewer than {MIN_FIT_SAMPLES} samples in the last decade of growth"
            )))
        }
    };
    let mut lo = main;
    let mut hi = main;
    for dec in [0.5, 2.0] {
        if let Some(Ok(t)) = fit(dec) {
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    Ok((main, hi - lo))
}

/// Outcome of [`comparison_check`].
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Largest `u_low - u_high` seen over the compared snapshots.
    pub worst_violation: f64,
    pub tolerance: f64,
    /// Times at which both runs had a snapshot.
    pub compared_times: Vec<f64>,
    pub low: RunRecord,
    pub high: RunRecord,
}

/// Evolves both data and checks `u_low ≤ u_high + tol` nodewise at every
/// common snapshot time (up to the earlier end of the two runs), with
/// `tol = 10·ε_mach·max‖u‖_∞` plus the larger local error tolerance
/// `10·(atol + rtol·max‖u‖_∞)`.
pub fn comparison_check(
    low: &RadialField,
    high: &RadialField,
    cfg: &SolverConfig,
    params: &Params,
) -> Result<ComparisonReport> {
    if low.values().iter().zip(high.values()).any(|(a, b)| a > b) {
        return Err(Error::Config("comparison needs u_low ≤ u_high nodewise".into()));
    }
    if low.values().iter().any(|v| *v < 0.0) {
        return Err(Error::Config("comparison needs nonnegative data".into()));
    }
    let (rl, rh) = rayon::join(|| evolve(low, cfg, params), || evolve(high, cfg, params));
    let (rl, rh) = (rl?, rh?);
    let end = rl.times.last().unwrap().min(*rh.times.last().unwrap());
    let mut worst = f64::NEG_INFINITY;
    let mut compared = vec![];
    let mut scale = 0.0f64;
    let mut j = 0;
    for sl in &rl.snapshots {
        if sl.t > end {
            break;
        }
        while j < rh.snapshots.len() && rh.snapshots[j].t < sl.t {
            j += 1;
        }
        if j == rh.snapshots.len() {
            break;
        }
        let sh = &rh.snapshots[j];
        if sh.t != sl.t {
            continue;
        }
        compared.push(sl.t);
        scale = scale.max(sl.field.sup_norm()).max(sh.field.sup_norm());
        for (a, b) in sl.field.values().iter().zip(sh.field.values()) {
            worst = worst.max(a - b);
        }
    }
    let tol = 10.0 * f64::EPSILON * scale + 10.0 * (cfg.atol + cfg.rtol * scale);
    Ok(ComparisonReport {
        holds: worst <= tol,
        worst_violation: worst,
        tolerance: tol,
        compared_times: compared,
        low: rl,
        high: rh,
    })
}

impl RunRecord {
    /// `t,dt,linf,h1dot,energy,verdict_flag`; the flag is 0 on every row
    /// except the last, which carries the verdict code (1 dissipation,
    /// 2 blow-up, 3 trapped at horizon).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,dt,linf,h1dot,energy,verdict_flag\n");
        let last = self.times.len() - 1;
        for i in 0..=last {
            let flag = if i == last { self.verdict.flag() } else { 0 };
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{flag}",
                self.times[i], self.dts[i], self.linf_trace[i], self.h1dot_trace[i], self.energy_trace[i]
            );
        }
        s
    }

    /// Largest single-step energy increase divided by the step's energy
    /// error estimate (≤ 10 is the acceptance bound); also returns the
    /// largest raw increase.
    pub fn energy_monotonicity(&self) -> (f64, f64) {
        let mut ratio = 0.0f64;
        let mut raw = 0.0f64;
        for i in 1..self.energy_trace.len() {
            let inc = self.energy_trace[i] - self.energy_trace[i - 1];
            if inc > 0.0 {
                raw = raw.max(inc);
                let floor = 64.0 * f64::EPSILON * self.energy_trace[i].abs().max(1.0);
                ratio = ratio.max(inc / (self.energy_error[i] + floor));
            }
        }
        (ratio, raw)
    }

    /// `t_i - t_last` for every row, accurate near the end of the run.
    pub fn time_offsets(&self) -> Vec<f64> {
        let last = *self.precise_times.last().unwrap();
        self.precise_times.iter().map(|t| t.minus(last)).collect()
    }

    /// `T - t` against the extrapolated blow-up time, if any.
    pub fn remaining(&self, at: PreciseTime) -> Option<f64> {
        self.blowup_time.map(|b| b.minus(at))
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// Columnar field file: a comment header naming `d`, `p`, `t`, then `r,u`.
pub fn field_to_csv(field: &RadialField, params: &Params, t: f64) -> String {
    let mut s = format!("# d={} p={} t={t:.17e}\nr,u\n", params.d(), params.p());
    for (r, u) in field.grid().nodes().iter().zip(field.values()) {
        let _ = writeln!(s, "{r:.17e},{u:.17e}");
    }
    s
}

#[cfg(test)]
mod tests;
