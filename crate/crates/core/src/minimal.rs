//! Approximants of the minimal solutions `Q±` by evolving
//! `u(-n) = Q ± ε e^{-n e₀} 𝒴` up to `t = 0`, and their forward fate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::linalg::fit_line;
use crate::modulation::decompose;
use crate::solver::{evolve, time_derivative, unstable_mode, RunRecord, RunVerdict, SolverConfig};
use crate::spectral::SpectralData;

/// Largest admissible seed amplitude.
pub const MAX_EPSILON: f64 = 0.1;
/// Smallest resolvable seed `ε e^{-n e₀}`.
pub const MIN_SEED: f64 = 1e-14;
/// Nodewise tolerance for the ordering `Q⁻ ≤ Q ≤ Q⁺`.
pub const ORDER_TOL: f64 = 1e-10;
/// Step cap during construction: the controller measures error relative to
/// `‖u‖_∞ ≈ 1`, which leaves the growth rate of the small perturbation
/// `u - Q` under-resolved at larger steps.
pub const CONSTRUCTION_DT_MAX: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// The approximant at `t = 0` with its backward history (times are shifted
/// so the run covers `[-n, 0]`).
#[derive(Clone, Debug)]
pub struct MinimalApproximant {
    pub sign: Sign,
    pub n: u32,
    pub epsilon: f64,
    pub u_at_0: RadialField,
    pub times: Vec<f64>,
    /// `⟨u - Q, 𝒴⟩ / ‖𝒴‖²` at each stored time.
    pub a_trace: Vec<f64>,
    /// `‖u - Q - a𝒴‖_∞`, with `𝒴` the solver's discrete growing mode.
    pub v_norm_trace: Vec<f64>,
    /// `‖u - Q - a𝒴‖_{Ḣ¹}`.
    pub v_h1_trace: Vec<f64>,
    pub record: RunRecord,
}

/// Evolves `Q ± ε e^{-n e₀} 𝒴` (unit-norm `𝒴`, refined to the solver's
/// discrete growing mode) from `t = -n` to `t = 0`,
/// storing a snapshot at every `cfg.snapshot_interval`.
pub fn construct(sign: Sign, n: u32, epsilon: f64, cfg: &SolverConfig, spec: &SpectralData) -> Result<MinimalApproximant> {
    if !(0.0..=MAX_EPSILON).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must lie in [0, {MAX_EPSILON}], got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::Config("backward depth n must be at least 1".into()));
    }
    // seeding along the solver's own growing mode (and with its rate) keeps
    // the discretization mismatch in e₀ out of the n-dependence
    let (rate, mode) = unstable_mode(&spec.y, spec.e0, &spec.params)?;
    let seed = epsilon * (-(n as f64) * rate).exp();
    if epsilon > 0.0 && seed < MIN_SEED {
        return Err(Error::Config(format!("seed ε e^(-n e0) = {seed:.2e} is below {MIN_SEED:.0e}")));
    }
    let u0 = spec.q.axpy(sign.value() * seed, &mode);
    let cfg = SolverConfig {
        t_end: n as f64,
        dt_max: cfg.dt_max.min(CONSTRUCTION_DT_MAX),
        dt_init: cfg.dt_init.min(0.5 * CONSTRUCTION_DT_MAX),
        ..cfg.clone()
    };
    let record = evolve(&u0, &cfg, &spec.params)?;
    let end = *record.times.last().unwrap();
    if !matches!(record.verdict, RunVerdict::TrappedAtHorizon) || end < n as f64 {
        return Err(Error::Construction { time: end - n as f64 });
    }
    let yy = spec.y.inner(&spec.y);
    let shift = n as f64;
    let (mut times, mut a_trace, mut v_norm_trace, mut v_h1_trace) = (vec![], vec![], vec![], vec![]);
    for snap in &record.snapshots {
        let diff = snap.field.axpy(-1.0, &spec.q);
        let a = diff.inner(&spec.y) / yy;
        // the discrete mode also satisfies ⟨mode, 𝒴⟩ = ‖𝒴‖², so v ⟂ 𝒴
        let v = diff.axpy(-a, &mode);
        times.push(snap.t - shift);
        a_trace.push(a);
        v_norm_trace.push(v.sup_norm());
        v_h1_trace.push(v.h1_sq().sqrt());
    }
    Ok(MinimalApproximant {
        sign,
        n,
        epsilon,
        u_at_0: record.final_field.clone(),
        times,
        a_trace,
        v_norm_trace,
        v_h1_trace,
        record,
    })
}

impl MinimalApproximant {
    /// Worst violation of `Q⁻ ≤ Q ≤ Q⁺` (and `Q⁻ ≥ 0`) over stored times;
    /// positive values are violations.
    pub fn ordering_violation(&self, spec: &SpectralData) -> f64 {
        let q = spec.q.values();
        let mut worst = f64::NEG_INFINITY;
        for snap in &self.record.snapshots {
            for (u, q) in snap.field.values().iter().zip(q) {
                let v = match self.sign {
                    Sign::Plus => q - u,
                    Sign::Minus => (u - q).max(-u),
                };
                worst = worst.max(v);
            }
        }
        worst
    }

    /// Largest increase `u(t_{k+1}) - u(t_k)` between stored times (for `Q⁻`
    /// this should not be positive), or largest decrease for `Q⁺`.
    pub fn monotonicity_violation(&self) -> f64 {
        let s = self.sign.value();
        self.record
            .snapshots
            .windows(2)
            .flat_map(|w| {
                w[0].field
                    .values()
                    .iter()
                    .zip(w[1].field.values())
                    .map(move |(a, b)| -s * (b - a))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Slope of `log|a|` against `t` where `|a| ≥ 100 ‖v‖_∞`.
    pub fn backward_slope(&self) -> Result<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.a_trace)
            .zip(&self.v_norm_trace)
            .filter(|((_, a), v)| **a != 0.0 && a.abs() >= 100.0 * **v)
            .map(|((t, a), _)| (*t, a.abs().ln()))
            .unzip();
        if xs.len() < 3 {
            return Err(Error::InsufficientData(format!("{} points in the exponential window", xs.len())));
        }
        Ok(fit_line(&xs, &ys)?.0)
    }

    /// Largest `‖v‖_∞ / (ε e^{e₀ t})²` over stored times.
    pub fn remainder_constant(&self, e0: f64) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        self.times
            .iter()
            .zip(&self.v_norm_trace)
            .map(|(t, v)| v / (self.epsilon * (e0 * t).exp()).powi(2))
            .fold(0.0, f64::max)
    }

    /// Range of `a(t) / (ε e^{e₀ t})` over stored times.
    pub fn amplitude_band(&self, e0: f64) -> (f64, f64) {
        self.times
            .iter()
            .zip(&self.a_trace)
            .map(|(t, a)| self.sign.value() * a / (self.epsilon * (e0 * t).exp()))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }
}

/// Successive sup-differences of `u_at_0` across increasing `n`.
#[derive(Clone, Debug, Serialize)]
pub struct CauchyReport {
    pub n_list: Vec<u32>,
    /// `‖u(n_{k+1}) - u(n_k)‖_∞`.
    pub sup_diffs: Vec<f64>,
    /// `sup_diffs[k+1] / sup_diffs[k]`.
    pub ratios: Vec<f64>,
    /// `e^{-e₀ Δn}` for each ratio.
    pub expected: Vec<f64>,
    pub monotone: bool,
}

pub fn cauchy_in_n(approximants: &[MinimalApproximant], e0: f64) -> Result<CauchyReport> {
    if approximants.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Cauchy test needs ≥ 3 depths, got {}",
            approximants.len()
        )));
    }
    if approximants.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::Config("depths must be strictly increasing".into()));
    }
    let sup_diffs: Vec<f64> = approximants
        .windows(2)
        .map(|w| w[1].u_at_0.axpy(-1.0, &w[0].u_at_0).sup_norm())
        .collect();
    let ratios: Vec<f64> = sup_diffs
        .windows(2)
        .map(|d| if d[0] > 0.0 { d[1] / d[0] } else { 0.0 })
        .collect();
    let expected = approximants
        .windows(2)
        .skip(1)
        .map(|w| (-e0 * (w[1].n - w[0].n) as f64).exp())
        .collect();
    let monotone = sup_diffs.windows(2).all(|d| d[1] <= d[0]);
    Ok(CauchyReport {
        n_list: approximants.iter().map(|a| a.n).collect(),
        sup_diffs,
        ratios,
        expected,
        monotone,
    })
}

/// Result of evolving an approximant forward from `t = 0`.
#[derive(Clone, Debug)]
pub struct ForwardFate {
    pub record: RunRecord,
    /// `(κ̂, exponent)` for blow-up runs.
    pub rate: Option<(f64, f64)>,
    /// `‖∇u‖_{L²}` at the end over its initial value.
    pub h1_ratio: f64,
    /// Whether the verdict is the one predicted for the sign
    /// (blow-up for `+`, dissipation for `-`, trapped for `ε = 0`).
    pub matches_theory: bool,
}

pub fn forward_fate(approx: &MinimalApproximant, cfg: &SolverConfig) -> Result<ForwardFate> {
    let record = evolve(&approx.u_at_0, cfg, &approx.record.params)?;
    let rate = match record.verdict {
        RunVerdict::Blowup { .. } => crate::selfsim::rate_check(&record, None).ok(),
        _ => None,
    };
    let h1_ratio = record.h1dot_trace.last().unwrap() / record.h1dot_trace[0];
    let matches_theory = match (approx.epsilon == 0.0, approx.sign, &record.verdict) {
        (true, _, RunVerdict::TrappedAtHorizon) => true,
        (false, Sign::Plus, RunVerdict::Blowup { .. }) => true,
        (false, Sign::Minus, RunVerdict::Dissipation) => true,
        _ => false,
    };
    Ok(ForwardFate { record, rate, h1_ratio, matches_theory })
}

/// Forward check of `ṁ ≥ e₀ m + g(m)` for `m = ∫(u - Q)𝒴₁` with the unit-mass
/// `𝒴₁` and `g(x) = (1+x)^p - 1 - px`, which bounds the pointwise convex gap
/// `(Q+x)^p - Q^p - pQ^{p-1}x` from below because `Q ≤ 1`.
#[derive(Clone, Debug, Serialize)]
pub struct JensenReport {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub m_dot: Vec<f64>,
    /// `min (ṁ - e₀m - g(m)) / (|ṁ| + e₀|m|)`; non-negative up to tolerance.
    pub worst_margin: f64,
    /// Blow-up time of `ẋ = e₀x + g(x)`, `x(0) = m(0)` (infinite if `m(0) ≤ 0`).
    pub comparison_blowup: f64,
    /// Whether `m` was increasing and convex across the stored times.
    pub convex_increasing: bool,
}

pub fn jensen_lower_bound(fate: &ForwardFate, spec: &SpectralData, cfg: &SolverConfig) -> Result<JensenReport> {
    let params = &spec.params;
    let p = params.p();
    let y1 = spec.y_unit_mass();
    let g = |x: f64| (1.0 + x).powf(p) - 1.0 - p * x;
    let (mut times, mut m, mut m_dot) = (vec![], vec![], vec![]);
    let mut worst = f64::INFINITY;
    for snap in &fate.record.snapshots {
        let diff = snap.field.axpy(-1.0, &spec.q);
        let mi = diff.inner(&y1);
        let md = time_derivative(&snap.field, cfg, params).inner(&y1);
        let scale = md.abs() + spec.e0 * mi.abs();
        if scale > 0.0 {
            worst = worst.min((md - spec.e0 * mi - g(mi.max(0.0))) / scale);
        }
        times.push(snap.t);
        m.push(mi);
        m_dot.push(md);
    }
    if times.is_empty() {
        return Err(Error::InsufficientData("forward run stored no snapshots".into()));
    }
    let comparison_blowup = if m[0] > 0.0 {
        comparison_time(m[0], spec.e0, p)
    } else {
        f64::INFINITY
    };
    let convex_increasing = m.windows(2).all(|w| w[1] >= w[0])
        && (1..m.len().saturating_sub(1)).all(|i| {
            let (h0, h1) = (times[i] - times[i - 1], times[i + 1] - times[i]);
            let s0 = (m[i] - m[i - 1]) / h0;
            let s1 = (m[i + 1] - m[i]) / h1;
            s1 >= s0 * (1.0 - 1e-6)
        });
    Ok(JensenReport {
        times,
        m,
        m_dot,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        comparison_blowup,
        convex_increasing,
    })
}

/// `∫_{x0}^∞ dx / (e₀x + g(x))` by Simpson's rule in `log x`.
fn comparison_time(x0: f64, e0: f64, p: f64) -> f64 {
    let g = |x: f64| (1.0 + x).powf(p) - 1.0 - p * x;
    let (a, b) = (x0.ln(), (x0.max(1.0) * 1e12).ln());
    let n = 20000;
    let h = (b - a) / n as f64;
    let f = |z: f64| {
        let x = z.exp();
        x / (e0 * x + g(x))
    };
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    // tail beyond b: g ~ x^p
    let xb = b.exp();
    s * h / 3.0 + xb.powf(1.0 - p) / (p - 1.0)
}

/// Full modulation decomposition of `u_at_0` (expected `a ≈ ±ε`, `λ ≈ 1`).
pub fn decomposition_at_0(approx: &MinimalApproximant, spec: &SpectralData) -> Result<(f64, f64)> {
    let st = decompose(&approx.u_at_0, spec, (1.0, 0.0))?;
    Ok((st.lambda, st.a))
}

/// One row of the summary table.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub sign: Sign,
    pub n: u32,
    pub epsilon: f64,
    /// Sup-difference to the previous depth (NaN for the first).
    pub sup_diff: f64,
    pub fate: String,
    pub exponent_hat: f64,
    pub kappa_hat: f64,
}

/// `sign,n,epsilon,sup_diff,fate,exponent_hat,kappa_hat`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("sign,n,epsilon,sup_diff,fate,exponent_hat,kappa_hat\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.17e},{:.17e},{},{:.17e},{:.17e}",
            r.sign.symbol(),
            r.n,
            r.epsilon,
            r.sup_diff,
            r.fate,
            r.exponent_hat,
            r.kappa_hat
        );
    }
    s
}

/// `t,a,v_linf,v_h1` for one approximant.
pub fn trace_csv(approx: &MinimalApproximant) -> String {
    let mut s = String::from("t,a,v_linf,v_h1\n");
    for i in 0..approx.times.len() {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            approx.times[i], approx.a_trace[i], approx.v_norm_trace[i], approx.v_h1_trace[i]
        );
    }
    s
}
