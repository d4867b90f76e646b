//! Trichotomy classification of single runs and threshold bisection.

use std::sync::Arc;

use serde::Serialize;

use super::config::{ClassifyConfig, InitialData};
use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::modulation::{decompose, track, ModulationState, ModulationTrace};
use crate::selfsim::{blowup_criterion, i_w, rate_check, renormalize, SelfSimGrid};
use crate::solver::{evolve, RunRecord, RunVerdict, SolverConfig};
use crate::spectral::SpectralData;

/// Amplitudes below this are round-off, not instability.
pub const A_FLOOR: f64 = 1e-10;
/// `‖ε‖_{Ḣ²}` below this is round-off (exact `Q` develops ~1e-7 by t = 60).
pub const EPS_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Soliton,
    Dissipation,
    TypeIBlowup,
    Undecided,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Self::Soliton => "soliton",
            Self::Dissipation => "dissipation",
            Self::TypeIBlowup => "type_i_blowup",
            Self::Undecided => "undecided",
        }
    }
}

/// Measurements behind a [`Verdict`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct Evidence {
    /// `‖u0 − Q‖_{Ḣ¹} / ‖Q‖_{Ḣ¹}`.
    pub neighborhood_distance: f64,
    /// Outside the operational neighbourhood or at `d < 7`.
    pub exploratory: bool,
    pub solver_verdict: String,
    pub t_final: f64,
    pub blowup_time: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub exponent_hat: Option<f64>,
    pub h1_initial: f64,
    pub h1_final: f64,
    pub h1_max: f64,
    /// Slope of `log ‖∇u‖` against `log ‖u‖_∞` over the last decade of growth.
    pub h1_growth_slope: Option<f64>,
    /// `‖∇u‖_{L²}` grew over the final decade (no bounded-`Ḣ¹` concentration).
    pub h1_unbounded: Option<bool>,
    /// First time with `|a| ≥ K ‖ε‖²_{Ḣ²}` (and `|a|` above round-off).
    pub t_ins: Option<f64>,
    /// First time with `|a| ≥ 1/K`.
    pub t_trans: Option<f64>,
    /// First time the trace leaves the trapped region or stops decomposing.
    pub t_exit: Option<f64>,
    pub trapped_states: usize,
    pub tracked_states: usize,
    pub max_abs_a: f64,
    pub lambda_initial: Option<f64>,
    pub lambda_final: Option<f64>,
    pub scale_drift: f64,
    pub eps_h2_initial: Option<f64>,
    pub eps_h2_final: Option<f64>,
    /// Largest `I(w)` over the probes of a global run.
    pub max_i_w: Option<f64>,
    /// Probe frames certifying blow-up (`I(w) > 0`); must be 0 on global runs.
    pub i_w_positive: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub record: RunRecord,
    pub trace: ModulationTrace,
}

impl Classification {
    /// Two-column `key,value` CSV of the verdict and its evidence.
    pub fn to_csv(&self) -> String {
        let mut s = format!("key,value\nverdict,{}\n", self.verdict.name());
        let json = serde_json::to_value(&self.evidence).expect("evidence serializes");
        if let serde_json::Value::Object(map) = json {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(x) => x,
                    serde_json::Value::Array(xs) => xs
                        .iter()
                        .map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string()))
                        .collect::<Vec<_>>()
                        .join("; "),
                    other => other.to_string(),
                };
                s.push_str(&format!("{k},\"{}\"\n", v.replace('"', "'")));
            }
        }
        s
    }
}

/// `‖u − Q‖_{Ḣ¹} / ‖Q‖_{Ḣ¹}`.
pub fn neighborhood_distance(u: &RadialField, spec: &SpectralData) -> f64 {
    u.axpy(-1.0, &spec.q).h1_sq().sqrt() / spec.q.h1_sq().sqrt()
}

/// `(|a| ‖𝒴‖_{Ḣ¹} + ‖ε‖_{Ḣ¹}) / ‖Q‖_{Ḣ¹}`.
pub fn normalized_distance(st: &ModulationState, spec: &SpectralData) -> f64 {
    (st.a.abs() * spec.y.h1_sq().sqrt() + st.eps_h1) / spec.q.h1_sq().sqrt()
}

/// Largest `I(w)` and number of blow-up certificates over frames built from
/// every snapshot with hypothetical blow-up times `T = t + τ`. A global
/// solution must give no certificate for any `T`.
pub fn global_i_w_probe(record: &RunRecord, taus: &[f64], grid: &Arc<SelfSimGrid>) -> Result<(f64, usize)> {
    let mut max_i = f64::NEG_INFINITY;
    let mut positive = 0;
    for snap in &record.snapshots {
        for &tau in taus {
            match renormalize(&snap.field, snap.t, tau, snap.t + tau, grid.clone()) {
                Ok(frame) => {
                    max_i = max_i.max(i_w(&frame));
                    positive += usize::from(blowup_criterion(&frame));
                }
                Err(Error::DomainExceeded { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((max_i, positive))
}

/// Slope of `log ‖∇u‖_{L²}` against `log ‖u‖_∞` over the rows within the
/// last decade of `‖u‖_∞`.
pub fn h1_growth_slope(record: &RunRecord) -> Option<f64> {
    let top = record.linf_trace.iter().copied().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = record
        .linf_trace
        .iter()
        .zip(&record.h1dot_trace)
        .filter(|(l, _)| **l >= top / 10.0)
        .map(|(l, h)| (l.ln(), h.ln()))
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    crate::linalg::fit_line(&xs, &ys).ok().map(|f| f.0)
}

/// Runs the solver, the modulation tracker and the self-similar diagnostics
/// on `u0` and assigns exactly one class.
pub fn classify(
    u0: &RadialField,
    spec: &SpectralData,
    solver: &SolverConfig,
    cfg: &ClassifyConfig,
    y_intervals: usize,
) -> Result<Classification> {
    let params = &spec.params;
    let dist = neighborhood_distance(u0, spec);
    let outside = !(dist < cfg.eta);
    if outside && !cfg.override_neighborhood {
        return Err(Error::Config(format!(
            "initial data lies at relative Ḣ¹ distance {dist:.4} from Q, outside the neighbourhood {} \
             (set classify.override_neighborhood or pass --override-neighborhood)",
            cfg.eta
        )));
    }
    let mut ev = Evidence {
        neighborhood_distance: dist,
        exploratory: outside || params.d() < 7,
        ..Default::default()
    };
    if outside {
        ev.notes.push("outside the operational neighbourhood".into());
    }
    if params.d() < 7 {
        ev.notes.push(format!("d = {} is not covered by the theory", params.d()));
    }

    let record = evolve(u0, solver, params)?;
    let trace = track(&record, spec)?;
    let k = cfg.instability_k;

    ev.solver_verdict = record.verdict.name().into();
    ev.t_final = *record.times.last().unwrap();
    ev.blowup_time = record.blowup_time.map(|t| t.value());
    ev.h1_initial = record.h1dot_trace[0];
    ev.h1_final = *record.h1dot_trace.last().unwrap();
    ev.h1_max = record.h1dot_trace.iter().copied().fold(0.0, f64::max);

    let states = &trace.states;
    ev.tracked_states = states.len();
    ev.trapped_states = trace.trapped_len(spec, cfg.exit_threshold);
    ev.t_exit = trace.trapped_time(spec, cfg.exit_threshold);
    ev.t_ins = states
        .iter()
        .find(|st| st.a.abs() > A_FLOOR && st.a.abs() >= k * st.eps_h2 * st.eps_h2)
        .map(|st| st.t);
    ev.t_trans = states.iter().find(|st| st.a.abs() >= 1.0 / k).map(|st| st.t);
    ev.max_abs_a = states.iter().map(|st| st.a.abs()).fold(0.0, f64::max);
    ev.lambda_initial = states.first().map(|st| st.lambda);
    ev.lambda_final = states.last().map(|st| st.lambda);
    ev.scale_drift = trace.scale_drift(ev.trapped_states);
    ev.eps_h2_initial = states.first().map(|st| st.eps_h2);
    ev.eps_h2_final = states.last().map(|st| st.eps_h2);

    let grid = Arc::new(SelfSimGrid::new(params, y_intervals)?);
    let verdict = match record.verdict {
        RunVerdict::Blowup { .. } => {
            let slope = h1_growth_slope(&record);
            ev.h1_growth_slope = slope;
            let unbounded = slope.is_some_and(|s| s > 0.0) && ev.h1_final > ev.h1_initial;
            ev.h1_unbounded = Some(unbounded);
            match rate_check(&record, None) {
                Ok((kappa, beta)) => {
                    ev.kappa_hat = Some(kappa);
                    ev.exponent_hat = Some(beta);
                    let target = params.inv_p_minus_1();
                    if (beta - target).abs() > cfg.exponent_tol * target {
                        ev.notes.push(format!("exponent {beta:.4} is not within tolerance of {target}"));
                        Verdict::Undecided
                    } else if !unbounded {
                        ev.notes.push("concentration with bounded Ḣ¹ norm (type-II candidate)".into());
                        Verdict::Undecided
                    } else {
                        Verdict::TypeIBlowup
                    }
                }
                Err(e) => {
                    ev.notes.push(format!("rate fit failed: {e}"));
                    Verdict::Undecided
                }
            }
        }
        RunVerdict::Dissipation | RunVerdict::TrappedAtHorizon => {
            let (max_i, positive) = global_i_w_probe(&record, &cfg.global_probe_taus, &grid)?;
            ev.max_i_w = max_i.is_finite().then_some(max_i);
            ev.i_w_positive = positive;
            if positive > 0 {
                ev.notes.push(format!("{positive} probe frames certify blow-up on a global run"));
                Verdict::Undecided
            } else if record.verdict == RunVerdict::Dissipation {
                Verdict::Dissipation
            } else {
                let trapped = trace.exit_time.is_none()
                    && ev.trapped_states == states.len()
                    && states.last().is_some_and(|st| st.t == record.snapshots.last().unwrap().t);
                let small_a = ev.max_abs_a <= 1.0 / k;
                let eps_settles = match (ev.eps_h2_initial, ev.eps_h2_final) {
                    (Some(a), Some(b)) => b <= a.max(EPS_FLOOR) * 1.1,
                    _ => false,
                };
                if trapped && small_a && eps_settles {
                    Verdict::Soliton
                } else {
                    ev.notes.push(format!(
                        "horizon reached mid-transient (trapped {trapped}, |a| small {small_a}, ε settling {eps_settles})"
                    ));
                    Verdict::Undecided
                }
            }
        }
    };
    Ok(Classification { verdict, evidence: ev, record, trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Dissipation,
    Blowup,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dissipation => "dissipation",
            Self::Blowup => "blowup",
        }
    }
}

/// One oracle evaluation of the bisection.
#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub c: f64,
    pub side: Side,
    /// `"solver"` for a solver verdict, `"amplitude"` when the sign of the
    /// last decomposed unstable amplitude decided a run that reached the horizon.
    pub decided_by: &'static str,
    /// Longest time spent within the trapped region.
    pub trapped_time: f64,
    pub t_final: f64,
}

/// Longest contiguous time within normalized distance `threshold` of the
/// rescaled ground states, and the last decomposed amplitude. Unlike
/// [`track`], decomposition is retried after a failure so that data
/// entering the neighbourhood late are measured too.
pub fn trapped_duration(record: &RunRecord, spec: &SpectralData, threshold: f64) -> (f64, Option<f64>) {
    let mut best = 0.0f64;
    let mut start: Option<f64> = None;
    let mut guess: Option<(f64, f64)> = None;
    let mut last_a = None;
    for snap in &record.snapshots {
        let g = guess.unwrap_or_else(|| {
            let peak = snap.field.sup_norm();
            let lambda = if peak > 0.0 { peak.powf(-1.0 / spec.params.half_weight()) } else { 1.0 };
            (lambda, 0.0)
        });
        let inside = match decompose(&snap.field, spec, g) {
            Ok(st) => {
                guess = Some((st.lambda, st.a));
                last_a = Some(st.a);
                normalized_distance(&st, spec) <= threshold
            }
            Err(_) => {
                guess = None;
                false
            }
        };
        match (inside, start) {
            (true, None) => start = Some(snap.t),
            (false, Some(t0)) => {
                best = best.max(snap.t - t0);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(t0) = start {
        best = best.max(record.snapshots.last().map_or(t0, |s| s.t) - t0);
    }
    (best, last_a)
}

/// Evolves `family(c)` to `horizon` and decides its side.
pub fn probe(
    family: &InitialData,
    c: f64,
    spec: &SpectralData,
    solver: &SolverConfig,
    horizon: f64,
    threshold: f64,
    seed: u64,
) -> Result<Probe> {
    let u0 = family.with_parameter(c)?.build(spec, seed)?;
    let cfg = SolverConfig { t_end: horizon, ..solver.clone() };
    let record = evolve(&u0, &cfg, &spec.params)?;
    let (trapped_time, last_a) = trapped_duration(&record, spec, threshold);
    let (side, decided_by) = match record.verdict {
        RunVerdict::Dissipation => (Side::Dissipation, "solver"),
        RunVerdict::Blowup { .. } => (Side::Blowup, "solver"),
        RunVerdict::TrappedAtHorizon => match last_a {
            Some(a) if a > 0.0 => (Side::Blowup, "amplitude"),
            Some(a) if a < 0.0 => (Side::Dissipation, "amplitude"),
            _ => {
                return Err(Error::Bracket(format!(
                    "run at c = {c} reached the horizon without a decidable amplitude"
                )))
            }
        },
    };
    Ok(Probe {
        c,
        side,
        decided_by,
        trapped_time,
        t_final: *record.times.last().unwrap(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BisectLevel {
    pub level: usize,
    pub c_low: f64,
    pub c_high: f64,
    /// Probe at the midpoint of the previous bracket (none at level 0).
    pub probe: Option<Probe>,
    /// Mean trapped time of the two endpoint runs.
    pub bracket_trapped_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BisectReport {
    pub levels: Vec<BisectLevel>,
    pub c_star: f64,
    pub bracket_width: f64,
    pub low: Probe,
    pub high: Probe,
    /// Bracket trapped time strictly increased over the last five levels.
    pub trapped_time_increasing: bool,
}

impl BisectReport {
    /// `level,c_low,c_high,width,c_mid,side,decided_by,trapped_time_mid,bracket_trapped_time`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,c_low,c_high,width,c_mid,side,decided_by,trapped_time_mid,bracket_trapped_time\n");
        for l in &self.levels {
            let (c, side, by, tt) = match &l.probe {
                Some(p) => (format!("{:.17e}", p.c), p.side.name(), p.decided_by, format!("{:.17e}", p.trapped_time)),
                None => (String::new(), "", "", String::new()),
            };
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{c},{side},{by},{tt},{:.17e}\n",
                l.level,
                l.c_low,
                l.c_high,
                l.c_high - l.c_low,
                l.bracket_trapped_time
            ));
        }
        s
    }
}

/// Bisects `family` between a dissipating `c_low` and a blowing-up `c_high`
/// until the bracket is narrower than `rel_width (c_high − c_low)`.
#[allow(clippy::too_many_arguments)]
pub fn bisect_threshold(
    family: &InitialData,
    c_low: f64,
    c_high: f64,
    rel_width: f64,
    horizon: f64,
    spec: &SpectralData,
    solver: &SolverConfig,
    threshold: f64,
    seed: u64,
) -> Result<BisectReport> {
    if !(c_low < c_high) {
        return Err(Error::Bracket(format!("need c_low < c_high, got [{c_low}, {c_high}]")));
    }
    let run = |c| probe(family, c, spec, solver, horizon, threshold, seed);
    let (lo, hi) = rayon::join(|| run(c_low), || run(c_high));
    let (mut lo, mut hi) = (lo?, hi?);
    if lo.side != Side::Dissipation || hi.side != Side::Blowup {
        return Err(Error::Bracket(format!(
            "endpoints give {} at c = {c_low} and {} at c = {c_high}; need dissipation below and blow-up above",
            lo.side.name(),
            hi.side.name()
        )));
    }
    let target = rel_width * (c_high - c_low);
    let mut levels = vec![BisectLevel {
        level: 0,
        c_low,
        c_high,
        probe: None,
        bracket_trapped_time: 0.5 * (lo.trapped_time + hi.trapped_time),
    }];
    while hi.c - lo.c > target {
        let mid = 0.5 * (lo.c + hi.c);
        if mid <= lo.c || mid >= hi.c {
            break;
        }
        let p = run(mid)?;
        match p.side {
            Side::Dissipation => lo = p.clone(),
            Side::Blowup => hi = p.clone(),
        }
        levels.push(BisectLevel {
            level: levels.len(),
            c_low: lo.c,
            c_high: hi.c,
            probe: Some(p),
            bracket_trapped_time: 0.5 * (lo.trapped_time + hi.trapped_time),
        });
    }
    let tail = &levels[levels.len().saturating_sub(5)..];
    let trapped_time_increasing =
        tail.len() == 5 && tail.windows(2).all(|w| w[1].bracket_trapped_time > w[0].bracket_trapped_time);
    Ok(BisectReport {
        c_star: 0.5 * (lo.c + hi.c),
        bracket_width: hi.c - lo.c,
        levels,
        low: lo,
        high: hi,
        trapped_time_increasing,
    })
}
