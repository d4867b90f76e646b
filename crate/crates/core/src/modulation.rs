//! Decomposition `u = (Q + a𝒴 + ε)_λ` with `ε ⟂ 𝒴, Ψ₀`, and its tracking
//! along a run in renormalized time `s` (`ds/dt = 1/λ²`).

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialInterpolant};
use crate::solver::{energy, RunRecord};
use crate::spectral::SpectralData;

/// Newton iteration cap.
pub const MAX_ITERATIONS: usize = 50;
/// Tolerance on both normalized inner products.
pub const SOLVE_TOL: f64 = 1e-10;
/// Orbital closeness required before a decomposition is attempted.
pub const CLOSENESS: f64 = 0.5;

/// One decomposed time slice.
#[derive(Clone, Debug)]
pub struct ModulationState {
    pub t: f64,
    pub s: f64,
    pub lambda: f64,
    pub a: f64,
    pub eps: RadialField,
    pub eps_h1: f64,
    pub eps_h2: f64,
    /// `∫ εHε`.
    pub eps_energy: f64,
    /// `∫ (Hε)²`.
    pub eps_h_sq: f64,
    /// `|a| + ‖ε‖_{Ḣ¹}`.
    pub dist: f64,
    pub iterations: usize,
}

/// `λ^{(d-2)/2} u(λy)` sampled on the nodes of `u`'s grid.
pub fn rescale(interp: &RadialInterpolant, u: &RadialField, lambda: f64, half_weight: f64) -> RadialField {
    let amp = lambda.powf(half_weight);
    u.with_values(u.grid().nodes().iter().map(|&y| amp * interp.eval(lambda * y)).collect())
}

struct Problem<'a> {
    spec: &'a SpectralData,
    u: &'a RadialField,
    interp: RadialInterpolant,
    yy: f64,
    scale: f64,
}

impl Problem<'_> {
    fn profile(&self, log_lambda: f64) -> RadialField {
        rescale(&self.interp, self.u, log_lambda.exp(), self.spec.params.half_weight())
    }

    fn eps(&self, log_lambda: f64, a: f64) -> RadialField {
        self.profile(log_lambda).axpy(-1.0, &self.spec.q).axpy(-a, &self.spec.y)
    }

    /// Normalized `(⟨ε, 𝒴⟩, ⟨ε, Ψ₀⟩)`.
    fn residual(&self, log_lambda: f64, a: f64) -> [f64; 2] {
        let e = self.eps(log_lambda, a);
        [
            e.inner(&self.spec.y) / self.scale,
            e.inner(&self.spec.psi0) / self.scale,
        ]
    }
}

/// Solves the orthogonality system for `(λ, a)` by damped Newton with a
/// finite-difference Jacobian, starting from `guess`.
pub fn decompose(u: &RadialField, spec: &SpectralData, guess: (f64, f64)) -> Result<ModulationState> {
    let (g_lambda, g_a) = guess;
    if !(g_lambda > 0.0 && g_lambda.is_finite() && g_a.is_finite()) {
        return Err(Error::Config(format!("invalid decomposition guess ({g_lambda}, {g_a})")));
    }
    let params = &spec.params;
    let interp = RadialInterpolant::new(u);
    let q_h1 = spec.q.h1_sq().sqrt();
    {
        let start = rescale(&interp, u, g_lambda, params.half_weight());
        let rel = start.axpy(-1.0, &spec.q).h1_sq().sqrt() / q_h1;
        if !(rel < CLOSENESS) {
            return Err(Error::NotNearManifold(rel));
        }
    }
    let yy = spec.y.inner(&spec.y);
    let scale = spec.q.norm() * spec.psi0.norm().max(spec.y.norm());
    let prob = Problem { spec, u, interp, yy, scale };

    let (lo, hi) = (g_lambda / 4.0, 4.0 * g_lambda);
    let mut x = [g_lambda.ln(), g_a];
    let mut f = prob.residual(x[0], x[1]);
    let mut fnorm = f[0].hypot(f[1]);
    let mut iterations = 0;
    while fnorm > SOLVE_TOL {
        if iterations == MAX_ITERATIONS {
            return Err(Error::DecompositionFailure { iterations, residual: fnorm });
        }
        iterations += 1;
        let hl = 1e-6;
        let fl = prob.residual(x[0] + hl, x[1]);
        let fm = prob.residual(x[0] - hl, x[1]);
        let j00 = (fl[0] - fm[0]) / (2.0 * hl);
        let j10 = (fl[1] - fm[1]) / (2.0 * hl);
        // ε is affine in a
        let j01 = -prob.yy / prob.scale;
        let j11 = -spec.y.inner(&spec.psi0) / prob.scale;
        let det = j00 * j11 - j01 * j10;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::DecompositionFailure { iterations, residual: fnorm });
        }
        let dx = [
            -(j11 * f[0] - j01 * f[1]) / det,
            -(-j10 * f[0] + j00 * f[1]) / det,
        ];
        let mut damping = 1.0;
        loop {
            let trial = [x[0] + damping * dx[0], x[1] + damping * dx[1]];
            let ft = prob.residual(trial[0], trial[1]);
            let nt = ft[0].hypot(ft[1]);
            if nt < fnorm || damping < 1e-4 {
                x = trial;
                f = ft;
                fnorm = nt;
                break;
            }
            damping *= 0.5;
        }
        let lambda = x[0].exp();
        if !(lo..=hi).contains(&lambda) {
            return Err(Error::TrustRegion { lambda, lo, hi });
        }
    }
    let lambda = x[0].exp();
    let eps = prob.eps(x[0], x[1]);
    Ok(state_from(spec, 0.0, 0.0, lambda, x[1], eps, iterations))
}

fn state_from(
    spec: &SpectralData,
    t: f64,
    s: f64,
    lambda: f64,
    a: f64,
    eps: RadialField,
    iterations: usize,
) -> ModulationState {
    let grid = &spec.grid;
    let eps_h1 = eps.h1_sq().sqrt();
    let eps_h2 = grid.homogeneous_norm_sq(eps.values(), 2).unwrap_or(f64::NAN).sqrt();
    let he = spec.op.apply(eps.values());
    ModulationState {
        t,
        s,
        lambda,
        a,
        eps_energy: spec.op.quadratic_form(eps.values()),
        eps_h_sq: grid.inner(&he, &he),
        eps_h1,
        eps_h2,
        dist: a.abs() + eps_h1,
        eps,
        iterations,
    }
}

/// `(Q + a𝒴 + ε)_λ` on the grid of `state.eps`.
pub fn reconstruct(state: &ModulationState, spec: &SpectralData) -> RadialField {
    let inner = spec.q.axpy(state.a, &spec.y).axpy(1.0, &state.eps);
    rescale(
        &RadialInterpolant::new(&inner),
        &inner,
        1.0 / state.lambda,
        spec.params.half_weight(),
    )
}

/// Decomposed snapshots of a run, in time order.
#[derive(Clone, Debug, Default)]
pub struct ModulationTrace {
    pub states: Vec<ModulationState>,
    /// `E(u)` at each state's time.
    pub energies: Vec<f64>,
    /// Time of the first failed decomposition, if any.
    pub exit_time: Option<f64>,
}

/// Decomposes every snapshot of `record`, warm-starting each solve from the
/// previous state (the first from the scale matching `‖u‖_∞`), and integrates `s` by the trapezoid rule in `dt/λ²`.
pub fn track(record: &RunRecord, spec: &SpectralData) -> Result<ModulationTrace> {
    let mut trace = ModulationTrace::default();
    let mut prev: Option<(f64, f64)> = None;
    let mut guess = (1.0, 0.0);
    let mut s = 0.0;
    for snap in &record.snapshots {
        if prev.is_none() {
            // Q_λ(0) = λ^{-(d-2)/2}
            let peak = snap.field.sup_norm();
            if peak > 0.0 {
                guess.0 = peak.powf(-1.0 / spec.params.half_weight());
            }
        }
        match decompose(&snap.field, spec, guess) {
            Ok(mut st) => {
                if let Some((t0, l0)) = prev {
                    s += 0.5 * (snap.t - t0) * (l0.powi(-2) + st.lambda.powi(-2));
                }
                st.t = snap.t;
                st.s = s;
                guess = (st.lambda, st.a);
                prev = Some((snap.t, st.lambda));
                trace.energies.push(energy(&snap.field, &spec.params)?);
                trace.states.push(st);
            }
            Err(
                Error::NotNearManifold(_)
                | Error::DecompositionFailure { .. }
                | Error::TrustRegion { .. },
            ) => {
                trace.exit_time = Some(snap.t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

impl ModulationTrace {
    /// `t,s,lambda,a,eps_h1,eps_h2,int_eH_e,dist_M`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,lambda,a,eps_h1,eps_h2,int_eH_e,dist_M\n");
        for st in &self.states {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                st.t, st.s, st.lambda, st.a, st.eps_h1, st.eps_h2, st.eps_energy, st.dist
            );
        }
        out
    }

    /// Length of the prefix whose normalized distance
    /// `(|a|‖𝒴‖_{Ḣ¹} + ‖ε‖_{Ḣ¹}) / ‖Q‖_{Ḣ¹}` stays at or below `threshold`.
    pub fn trapped_len(&self, spec: &SpectralData, threshold: f64) -> usize {
        let yh = spec.y.h1_sq().sqrt();
        let qh = spec.q.h1_sq().sqrt();
        self.states
            .iter()
            .position(|st| (st.a.abs() * yh + st.eps_h1) / qh > threshold)
            .unwrap_or(self.states.len())
    }

    /// Time at which the normalized distance first exceeds `threshold`, or
    /// the decomposition first fails; `None` if neither happens.
    pub fn trapped_time(&self, spec: &SpectralData, threshold: f64) -> Option<f64> {
        let n = self.trapped_len(spec, threshold);
        if n < self.states.len() {
            Some(self.states[n].t)
        } else {
            self.exit_time
        }
    }

    /// Slope of `log|a|` against `s` over the states where
    /// `|a| ≥ k (a² + ‖ε‖²_{Ḣ²})` and `|a| ≤ a_max`, together with the
    /// number of states used.
    pub fn growth_rate(&self, k: f64, a_max: f64) -> Result<(f64, usize)> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .states
            .iter()
            .filter(|st| st.a != 0.0 && st.a.abs() <= a_max && st.a.abs() >= k * (st.a * st.a + st.eps_h2 * st.eps_h2))
            .map(|st| (st.s, st.a.abs().ln()))
            .unzip();
        if xs.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "{} states in the instability-dominated window",
                xs.len()
            )));
        }
        Ok((crate::linalg::fit_line(&xs, &ys)?.0, xs.len()))
    }

    /// Largest `|λ - λ(0)| / λ(0)` over the first `len` states.
    pub fn scale_drift(&self, len: usize) -> f64 {
        let Some(first) = self.states.first() else { return 0.0 };
        self.states[..len.min(self.states.len())]
            .iter()
            .map(|st| (st.lambda - first.lambda).abs() / first.lambda)
            .fold(0.0, f64::max)
    }
}

/// Energy-bound diagnostics of a trace; the constants are empirical.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    /// `∫ (a² + ‖ε‖²_{Ḣ²}) ds`.
    pub dissipation_integral: f64,
    /// `sup (|a| + ‖ε‖_{Ḣ¹})²`.
    pub eta_sq: f64,
    /// `dissipation_integral / eta_sq` (0 when `eta_sq = 0`).
    pub dissipation_ratio: f64,
    /// Steps where `a⁴ < 10⁻³ ∫(Hε)²` held at both ends.
    pub lyapunov_steps: usize,
    /// Of those, steps where `½∫εHε` increased beyond round-off.
    pub lyapunov_violations: usize,
    /// Largest `|E(u) - E(Q)| / (a² + ‖ε‖²_{Ḣ¹})`.
    pub energy_constant: f64,
}

pub fn energy_diagnostics(trace: &ModulationTrace, spec: &SpectralData) -> Result<EnergyReport> {
    let states = &trace.states;
    if states.is_empty() {
        return Err(Error::InsufficientData("empty modulation trace".into()));
    }
    let e_q = energy(&spec.q, &spec.params)?;
    let integrand = |st: &ModulationState| st.a * st.a + st.eps_h2 * st.eps_h2;
    let mut integral = 0.0;
    let (mut steps, mut violations) = (0, 0);
    for w in states.windows(2) {
        integral += 0.5 * (w[1].s - w[0].s) * (integrand(&w[0]) + integrand(&w[1]));
        let quiet = |st: &ModulationState| st.a.powi(4) < 1e-3 * st.eps_h_sq;
        if quiet(&w[0]) && quiet(&w[1]) {
            steps += 1;
            let tol = 1e-10 * w[0].eps_energy.abs().max(1e-300);
            if 0.5 * (w[1].eps_energy - w[0].eps_energy) > tol {
                violations += 1;
            }
        }
    }
    let eta_sq = states.iter().map(|st| st.dist * st.dist).fold(0.0, f64::max);
    let energy_constant = states
        .iter()
        .zip(&trace.energies)
        .filter_map(|(st, e)| {
            let den = st.a * st.a + st.eps_h1 * st.eps_h1;
            (den > 0.0).then(|| (e - e_q).abs() / den)
        })
        .fold(0.0, f64::max);
    Ok(EnergyReport {
        dissipation_integral: integral,
        eta_sq,
        dissipation_ratio: if eta_sq > 0.0 { integral / eta_sq } else { 0.0 },
        lyapunov_steps: steps,
        lyapunov_violations: violations,
        energy_constant,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{GridSettings, RadialGrid};
    use crate::ground_state::eval_q_scaled;
    use crate::params::Params;
    use crate::solver::{evolve, SolverConfig};
    use crate::spectral::DEFAULT_M;

    fn spec() -> SpectralData {
        let p = Params::new(7).unwrap();
        let g = Arc::new(RadialGrid::new(&GridSettings::default(), &p).unwrap());
        SpectralData::compute(&p, g, DEFAULT_M).unwrap()
    }

    #[test]
    fn ground_state_is_a_fixed_point() {
        let sp = spec();
        let st = decompose(&sp.q, &sp, (1.0, 0.0)).unwrap();
        assert!((st.lambda - 1.0).abs() < 1e-12);
        assert!(st.a.abs() < 1e-12);
        assert!(st.eps.sup_norm() < 1e-12);
    }

    #[test]
    fn rescaled_ground_state_recovers_scale() {
        let sp = spec();
        let p = sp.params;
        let u = RadialField::from_fn(sp.grid.clone(), |r| eval_q_scaled(r, 1.3, &p));
        let st = decompose(&u, &sp, (1.0, 0.0)).unwrap();
        assert!((st.lambda - 1.3).abs() < 1e-6, "{}", st.lambda);
        assert!(st.a.abs() < 1e-6, "{}", st.a);
        // dominated by the far-field extension beyond R_max/λ
        assert!(st.eps_h1 / sp.q.h1_sq().sqrt() < 1e-4);
    }

    #[test]
    fn unstable_direction_is_read_off() {
        let sp = spec();
        let u = sp.q.axpy(0.01, &sp.y);
        let st = decompose(&u, &sp, (1.0, 0.0)).unwrap();
        assert!((st.lambda - 1.0).abs() < 1e-10);
        assert!((st.a - 0.01).abs() < 1e-10);
        assert!(st.eps.sup_norm() < 1e-10);
        let r = st.eps.inner(&sp.y).abs() + st.eps.inner(&sp.psi0).abs();
        assert!(r < 1e-9 * sp.q.norm());
    }

    #[test]
    fn round_trip_reconstructs_input() {
        let sp = spec();
        let p = sp.params;
        let u = RadialField::from_fn(sp.grid.clone(), |r| {
            eval_q_scaled(r, 0.9, &p) + 0.02 * (-r * r / 4.0).exp()
        });
        let st = decompose(&u, &sp, (1.0, 0.0)).unwrap();
        let back = reconstruct(&st, &sp);
        let rel = back.axpy(-1.0, &u).h1_sq().sqrt() / u.h1_sq().sqrt();
        assert!(rel < 1e-4, "{rel}");
        assert!(st.eps.inner(&sp.y).abs() < 1e-9 * sp.q.norm());
        assert!(st.eps.inner(&sp.psi0).abs() < 1e-9 * sp.q.norm() * sp.psi0.norm());
    }

    #[test]
    fn far_states_are_rejected() {
        let sp = spec();
        let z = RadialField::zeros(sp.grid.clone());
        assert!(matches!(decompose(&z, &sp, (1.0, 0.0)), Err(Error::NotNearManifold(_))));
        assert!(decompose(&sp.q, &sp, (0.0, 0.0)).is_err());
    }

    #[test]
    fn stationary_run_gives_constant_trace() {
        let sp = spec();
        let cfg = SolverConfig {
            t_end: 2.0,
            snapshot_interval: 0.5,
            ..SolverConfig::default()
        };
        let rec = evolve(&sp.q, &cfg, &sp.params).unwrap();
        let tr = track(&rec, &sp).unwrap();
        assert_eq!(tr.states.len(), 5);
        assert!(tr.exit_time.is_none());
        for st in &tr.states {
            assert!((st.lambda - 1.0).abs() < 1e-6 && st.a.abs() < 1e-6);
        }
        assert!((tr.states[4].s - 2.0).abs() < 1e-5);
        let rep = energy_diagnostics(&tr, &sp).unwrap();
        assert!(rep.dissipation_integral < 1e-10);
        assert!(tr.to_csv().starts_with("t,s,lambda,a,eps_h1,eps_h2,int_eH_e,dist_M\n"));
    }

    #[test]
    fn empty_trace_is_rejected() {
        let sp = spec();
        assert!(energy_diagnostics(&ModulationTrace::default(), &sp).is_err());
    }
}
