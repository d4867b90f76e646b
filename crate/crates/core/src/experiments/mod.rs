//! Configuration-driven experiment harness: one entry point per experiment
//! kind, CSV outputs with a comment header, and a JSON manifest.

mod classify;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub use classify::{
    bisect_threshold, classify, global_i_w_probe, h1_growth_slope, neighborhood_distance, normalized_distance,
    probe, trapped_duration, BisectLevel, BisectReport, Classification, Evidence, Probe, Side, Verdict, A_FLOOR,
    EPS_FLOOR,
};
pub use config::{
    BisectConfig, ClassifyConfig, ExperimentConfig, ExperimentKind, InitialData, MinimalConfig, ParamsConfig,
    SelfSimConfig, SpectralConfig,
};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::minimal::{
    cauchy_in_n, construct, forward_fate, jensen_lower_bound, summary_csv, trace_csv, MinimalApproximant, SummaryRow,
};
use crate::modulation::track;
use crate::params::Params;
use crate::selfsim::{
    blowup_criterion, frames_from_record, frames_to_csv, i_w, kappa_energy, lyapunov_check, rate_check, SelfSimGrid,
};
use crate::solver::{evolve, field_to_csv, PreciseTime, RunVerdict, SolverConfig};
use crate::spectral::{coercivity_estimate, shoot_e0, zero_modes, SpectralData, SpectralReport};

/// One file written by an experiment.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// What [`run_config`] produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub config_hash: String,
    pub files: Vec<OutputFile>,
    /// Kind-specific headline numbers (also stored in the manifest).
    pub summary: Value,
}

impl RunSummary {
    pub fn manifest_path(&self) -> PathBuf {
        self.out.join(MANIFEST)
    }
}

pub const MANIFEST: &str = "manifest.json";

struct Outputs {
    dir: PathBuf,
    header: String,
    files: Vec<OutputFile>,
}

impl Outputs {
    fn new(cfg: &ExperimentConfig, params: &Params, hash: &str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", cfg.out.display())))
        })?;
        let g = &cfg.grid;
        let header = format!(
            "# critheat {}\n# d={} p={} covered_by_theory={}\n# grid cells={} r_max={} first_cell={:e}\n# config_hash={hash}\n",
            cfg.kind.map_or("", |k| k.name()),
            params.d(),
            params.p(),
            !params.is_exploratory(),
            g.cells,
            g.r_max,
            g.first_cell
        );
        Ok(Self { dir: cfg.out.clone(), header, files: vec![] })
    }

    /// Writes `body` verbatim.
    fn raw(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display()))))?;
        self.files.push(OutputFile {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
            bytes: body.len(),
        });
        Ok(())
    }

    /// Writes a CSV behind the comment header.
    fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        let text = format!("{}{body}", self.header);
        self.raw(name, &text)
    }
}

/// Loads, validates and runs a configuration file.
pub fn run_path(path: &Path) -> Result<RunSummary> {
    run_config(&ExperimentConfig::load(path)?)
}

/// Runs one experiment and writes its CSVs, the effective configuration and
/// `manifest.json` into `cfg.out`. Outputs depend only on the configuration.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let kind = cfg
        .kind
        .ok_or_else(|| Error::Config("no experiment kind given (set `kind` or use a subcommand)".into()))?;
    let params = cfg.params.build()?;
    let hash = cfg.hash();
    let mut out = Outputs::new(cfg, &params, &hash)?;
    out.raw("config.toml", &cfg.canonical())?;
    let summary = match kind {
        ExperimentKind::Spectrum => run_spectrum(cfg, &params, &mut out)?,
        ExperimentKind::Shoot => run_shoot(cfg, &params, &mut out)?,
        ExperimentKind::Evolve => run_evolve(cfg, &params, &mut out)?,
        ExperimentKind::Classify => run_classify(cfg, &params, &mut out)?,
        ExperimentKind::Minimal => run_minimal(cfg, &params, &mut out)?,
        ExperimentKind::Selfsim => run_selfsim(cfg, &params, &mut out)?,
    };
    let manifest = json!({
        "tool": "critheat",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind.name(),
        "config_hash": hash,
        "seed": cfg.seed,
        "d": params.d(),
        "p": params.p(),
        "covered_by_theory": !params.is_exploratory(),
        "summary": summary,
        "files": out.files,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = cfg.out.join(MANIFEST);
    std::fs::write(&path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display()))))?;
    Ok(RunSummary { out: cfg.out.clone(), config_hash: hash, files: out.files, summary })
}

fn spectral_data(cfg: &ExperimentConfig, params: &Params) -> Result<SpectralData> {
    let grid = Arc::new(RadialGrid::new(&cfg.grid, params)?);
    SpectralData::compute(params, grid, cfg.spectral.m)
}

fn key_value_csv(rows: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.17e}")).unwrap_or_default()
}

fn run_spectrum(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let spec = spectral_data(cfg, params)?;
    let mut violation = None;
    let coercivity = if cfg.spectral.coercivity_samples > 0 {
        match coercivity_estimate(&spec, cfg.spectral.coercivity_samples, cfg.seed) {
            Ok(c) => Some(c),
            Err(Error::CoercivityViolation { quotient, value, witness }) => {
                let w = RadialField::new(spec.grid.clone(), witness)?;
                out.csv("coercivity_witness.csv", &field_to_csv(&w, params, 0.0))?;
                violation = Some((quotient, value));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let report = SpectralReport::build(&spec, coercivity)?;
    let mut body = report.to_csv();
    if let Some((q, v)) = violation {
        let _ = writeln!(body, "coercivity_violation_quotient,{q}\ncoercivity_violation_value,{v:.6e}");
    }
    out.csv("spectrum.csv", &body)?;
    let mut prof = String::from("r,Q,Y,Lambda_Q,Psi0\n");
    for (i, r) in spec.grid.nodes().iter().enumerate() {
        let _ = writeln!(
            prof,
            "{r:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            spec.q.values()[i],
            spec.y.values()[i],
            spec.lambda_q.values()[i],
            spec.psi0.values()[i]
        );
    }
    out.csv("profiles.csv", &prof)?;
    let mut v = serde_json::to_value(&report).expect("report serializes");
    v["coercivity_violation"] = json!(violation);
    Ok(v)
}

fn run_shoot(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let e0_shoot = shoot_e0(params)?;
    let spec = spectral_data(cfg, params)?;
    let rel = (e0_shoot - spec.e0).abs() / spec.e0;
    out.csv(
        "shoot.csv",
        &key_value_csv(&[
            ("e0_shooting", format!("{e0_shoot:.17e}")),
            ("e0_grid", format!("{:.17e}", spec.e0)),
            ("relative_difference", format!("{rel:.6e}")),
            ("negative_eigenvalues", spec.op.negative_count().to_string()),
        ]),
    )?;
    let mut zm = String::from("n,origin_exponent,expected_origin_exponent,infinity_exponent\n");
    let mut exps = vec![];
    for n in 0..3 {
        let z = zero_modes(n, spec.grid.clone(), params)?;
        let expected = -((params.d() - 2 + n) as f64);
        let _ = writeln!(zm, "{n},{:.17e},{expected},{}", z.origin_exponent, opt(z.infinity_exponent));
        exps.push(json!({"n": n, "origin": z.origin_exponent, "infinity": z.infinity_exponent}));
    }
    out.csv("zero_modes.csv", &zm)?;
    Ok(json!({"e0_shooting": e0_shoot, "e0_grid": spec.e0, "relative_difference": rel, "zero_modes": exps}))
}

fn run_evolve(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let spec = spectral_data(cfg, params)?;
    let init = cfg.initial.as_ref().expect("validated");
    let u0 = init.build(&spec, cfg.seed)?;
    let record = evolve(&u0, &cfg.solver, params)?;
    let trace = track(&record, &spec)?;
    out.csv("evolve.csv", &record.to_csv())?;
    out.csv("modulation.csv", &trace.to_csv())?;
    out.csv("field_initial.csv", &field_to_csv(&u0, params, 0.0))?;
    out.csv("field_final.csv", &field_to_csv(&record.final_field, params, *record.times.last().unwrap()))?;
    let rate = match record.verdict {
        RunVerdict::Blowup { .. } => rate_check(&record, None).ok(),
        _ => None,
    };
    let (mono_ratio, mono_raw) = record.energy_monotonicity();
    let t_final = *record.times.last().unwrap();
    out.csv(
        "summary.csv",
        &key_value_csv(&[
            ("initial", init.label()),
            ("verdict", record.verdict.name().into()),
            ("t_final", format!("{t_final:.17e}")),
            ("blowup_time", opt(record.blowup_time.map(PreciseTime::value))),
            ("kappa_hat", opt(rate.map(|r| r.0))),
            ("exponent_hat", opt(rate.map(|r| r.1))),
            ("h1_initial", format!("{:.17e}", record.h1dot_trace[0])),
            ("h1_final", format!("{:.17e}", record.h1dot_trace.last().unwrap())),
            ("energy_increase_ratio", format!("{mono_ratio:.6e}")),
            ("energy_increase_max", format!("{mono_raw:.6e}")),
            ("accepted_steps", (record.times.len() - 1).to_string()),
            ("rejected_steps", record.rejected_steps.to_string()),
            ("modulation_exit_time", opt(trace.exit_time)),
        ]),
    )?;
    Ok(json!({
        "initial": init.label(),
        "verdict": record.verdict,
        "t_final": t_final,
        "kappa_hat": rate.map(|r| r.0),
        "exponent_hat": rate.map(|r| r.1),
        "energy_increase_ratio": mono_ratio,
    }))
}

fn run_classify(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let spec = spectral_data(cfg, params)?;
    let mut summary = json!({});
    if let Some(init) = &cfg.initial {
        let u0 = init.build(&spec, cfg.seed)?;
        let c = classify(&u0, &spec, &cfg.solver, &cfg.classify, cfg.selfsim.y_intervals)?;
        out.csv("verdict.csv", &c.to_csv())?;
        out.csv("evolve.csv", &c.record.to_csv())?;
        out.csv("modulation.csv", &c.trace.to_csv())?;
        summary["initial"] = json!(init.label());
        summary["verdict"] = json!(c.verdict);
        summary["evidence"] = serde_json::to_value(&c.evidence).expect("evidence serializes");
    }
    if let Some(b) = &cfg.bisect {
        let report = bisect_threshold(
            &b.family,
            b.c_low,
            b.c_high,
            b.rel_width,
            b.horizon,
            &spec,
            &cfg.solver,
            cfg.classify.exit_threshold,
            cfg.seed,
        )?;
        out.csv("bisection.csv", &report.to_csv())?;
        summary["bisection"] = json!({
            "family": b.family.label(),
            "c_star": report.c_star,
            "bracket_width": report.bracket_width,
            "levels": report.levels.len(),
            "trapped_time_increasing": report.trapped_time_increasing,
        });
    }
    Ok(summary)
}

fn run_minimal(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let spec = spectral_data(cfg, params)?;
    let m = &cfg.minimal;
    let mut n_list = m.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let jobs: Vec<(crate::minimal::Sign, f64, u32)> = m
        .signs
        .iter()
        .flat_map(|&s| m.epsilons.iter().flat_map({
            let n_list = &n_list;
            move |&e| n_list.iter().map(move |&n| (s, e, n))
        }))
        .collect();
    let approx: Vec<MinimalApproximant> = jobs
        .par_iter()
        .map(|&(s, e, n)| construct(s, n, e, &cfg.solver, &spec))
        .collect::<Result<_>>()?;

    let fcfg = SolverConfig {
        t_end: m.forward_t_end,
        dissip_linf: m.forward_dissip_linf,
        ..cfg.solver.clone()
    };
    let forward_eps = m.epsilons.first().copied();
    let forward: Vec<(usize, crate::minimal::ForwardFate)> = match m.forward_n {
        Some(fnn) => approx
            .par_iter()
            .enumerate()
            .filter(|(_, a)| a.n == fnn && Some(a.epsilon) == forward_eps)
            .map(|(i, a)| forward_fate(a, &fcfg).map(|f| (i, f)))
            .collect::<Result<_>>()?,
        None => vec![],
    };

    let mut rows = vec![];
    let mut cauchy = String::from("sign,epsilon,n,sup_diff,ratio,expected\n");
    let mut checks = String::from("sign,epsilon,n,ordering_violation,monotonicity_violation,backward_slope,slope_over_e0,remainder_constant\n");
    let mut cauchy_json = vec![];
    for group in approx.chunk_by(|a, b| a.sign == b.sign && a.epsilon == b.epsilon) {
        let sign = group[0].sign;
        let eps = group[0].epsilon;
        for (k, a) in group.iter().enumerate() {
            let sup_diff = if k == 0 { f64::NAN } else { a.u_at_0.axpy(-1.0, &group[k - 1].u_at_0).sup_norm() };
            let idx = approx.iter().position(|x| std::ptr::eq(x, a)).unwrap();
            let fate = forward.iter().find(|(i, _)| *i == idx).map(|(_, f)| f);
            rows.push(SummaryRow {
                sign,
                n: a.n,
                epsilon: eps,
                sup_diff,
                fate: fate.map_or(String::new(), |f| f.record.verdict.name().to_string()),
                exponent_hat: fate.and_then(|f| f.rate).map_or(f64::NAN, |r| r.1),
                kappa_hat: fate.and_then(|f| f.rate).map_or(f64::NAN, |r| r.0),
            });
            let slope = a.backward_slope().ok();
            let _ = writeln!(
                checks,
                "{},{eps:.17e},{},{:.6e},{:.6e},{},{},{:.6e}",
                sign.symbol(),
                a.n,
                a.ordering_violation(&spec),
                a.monotonicity_violation(),
                opt(slope),
                opt(slope.map(|s| s / spec.e0)),
                a.remainder_constant(spec.e0)
            );
            out.csv(&format!("minimal_{}_n{}_eps{eps}.csv", sign_name(sign), a.n), &trace_csv(a))?;
        }
        if group.len() >= 3 {
            let c = cauchy_in_n(group, spec.e0)?;
            for k in 0..c.sup_diffs.len() {
                let (r, e) = if k == 0 { (String::new(), String::new()) } else {
                    (format!("{:.6e}", c.ratios[k - 1]), format!("{:.6e}", c.expected[k - 1]))
                };
                let _ = writeln!(cauchy, "{},{eps:.17e},{},{:.17e},{r},{e}", sign.symbol(), c.n_list[k + 1], c.sup_diffs[k]);
            }
            cauchy_json.push(json!({"sign": sign, "epsilon": eps, "report": c}));
        }
    }
    out.csv("minimal_summary.csv", &summary_csv(&rows))?;
    out.csv("minimal_checks.csv", &checks)?;
    out.csv("minimal_cauchy.csv", &cauchy)?;
    let mut fates = vec![];
    for (i, f) in &forward {
        let a = &approx[*i];
        out.csv(&format!("forward_{}.csv", sign_name(a.sign)), &f.record.to_csv())?;
        let mut entry = json!({
            "sign": a.sign,
            "n": a.n,
            "verdict": f.record.verdict,
            "rate": f.rate,
            "h1_ratio": f.h1_ratio,
            "matches_theory": f.matches_theory,
        });
        if matches!(f.record.verdict, RunVerdict::Blowup { .. }) {
            let j = jensen_lower_bound(f, &spec, &fcfg)?;
            let mut s = String::from("t,m,m_dot\n");
            for k in 0..j.times.len() {
                let _ = writeln!(s, "{:.17e},{:.17e},{:.17e}", j.times[k], j.m[k], j.m_dot[k]);
            }
            out.csv(&format!("jensen_{}.csv", sign_name(a.sign)), &s)?;
            entry["jensen"] = json!({
                "worst_margin": j.worst_margin,
                "comparison_blowup": j.comparison_blowup,
                "convex_increasing": j.convex_increasing,
            });
        }
        fates.push(entry);
    }
    Ok(json!({"e0": spec.e0, "approximants": approx.len(), "cauchy": cauchy_json, "forward": fates}))
}

fn sign_name(s: crate::minimal::Sign) -> &'static str {
    match s {
        crate::minimal::Sign::Plus => "plus",
        crate::minimal::Sign::Minus => "minus",
    }
}

fn run_selfsim(cfg: &ExperimentConfig, params: &Params, out: &mut Outputs) -> Result<Value> {
    let spec = spectral_data(cfg, params)?;
    let sweep: Vec<InitialData> = if !cfg.selfsim.sweep.is_empty() {
        cfg.selfsim.sweep.clone()
    } else if let Some(i) = &cfg.initial {
        vec![i.clone()]
    } else {
        vec![InitialData::QPlusY { c: 0.05 }]
    };
    let grid = Arc::new(SelfSimGrid::new(params, cfg.selfsim.y_intervals)?);
    struct Entry {
        frames_csv: Option<String>,
        row: String,
        probes: String,
        json: Value,
    }
    let entries: Vec<Entry> = sweep
        .par_iter()
        .enumerate()
        .map(|(idx, init)| -> Result<Entry> {
            let u0 = init.build(&spec, cfg.seed)?;
            let record = evolve(&u0, &cfg.solver, params)?;
            let label = init.label();
            let mut probes = String::new();
            match (record.verdict, record.blowup_time) {
                (RunVerdict::Blowup { .. }, Some(t_blow)) => {
                    let frames = frames_from_record(&record, t_blow, grid.clone())?;
                    let lyap = lyapunov_check(&frames).ok();
                    let rate = rate_check(&record, None).ok();
                    let e_final = lyap.as_ref().and_then(|l| l.energies.last().copied());
                    let t_last = *record.precise_times.last().unwrap();
                    let gap = t_blow.minus(t_last);
                    for &f in &cfg.selfsim.t_factors {
                        let tb = t_last.add(f * gap);
                        let fr = frames_from_record(&record, tb, grid.clone())?;
                        let max_i = fr.iter().map(i_w).fold(f64::NEG_INFINITY, f64::max);
                        let pos = fr.iter().filter(|x| blowup_criterion(x)).count();
                        let _ = writeln!(probes, "{idx},{f},{:.17e},{},{},{pos}", tb.value(), fr.len(), opt(max_i.is_finite().then_some(max_i)));
                    }
                    let row = format!(
                        "{idx},\"{label}\",blowup,{:.17e},{},{},{},{:.17e},{},{}\n",
                        t_blow.value(),
                        opt(rate.map(|r| r.0)),
                        opt(rate.map(|r| r.1)),
                        opt(e_final),
                        kappa_energy(params),
                        opt(lyap.as_ref().map(|l| l.max_increase)),
                        opt(lyap.as_ref().map(|l| l.balance_error)),
                    );
                    Ok(Entry {
                        json: json!({
                            "initial": label,
                            "verdict": record.verdict,
                            "frames": frames.len(),
                            "kappa_hat": rate.map(|r| r.0),
                            "exponent_hat": rate.map(|r| r.1),
                            "energy_final": e_final,
                            "energy_kappa": kappa_energy(params),
                            "max_increase": lyap.as_ref().map(|l| l.max_increase),
                        }),
                        frames_csv: Some(frames_to_csv(&frames)),
                        row,
                        probes,
                    })
                }
                _ => {
                    let (max_i, pos) = global_i_w_probe(&record, &cfg.classify.global_probe_taus, &grid)?;
                    let max_i = max_i.is_finite().then_some(max_i);
                    let row = format!("{idx},\"{label}\",{},,,,,,,\n", record.verdict.name());
                    let _ = writeln!(probes, "{idx},global,,,{},{pos}", opt(max_i));
                    Ok(Entry {
                        json: json!({"initial": label, "verdict": record.verdict, "max_i_w": max_i, "i_w_positive": pos}),
                        frames_csv: None,
                        row,
                        probes,
                    })
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut summary = String::from("index,initial,verdict,t_blow,kappa_hat,exponent_hat,E_final,E_kappa,max_increase,balance_error\n");
    let mut probes = String::from("index,factor,t_blow,frames,max_I_w,certified_frames\n");
    let mut js = vec![];
    for (i, e) in entries.iter().enumerate() {
        summary.push_str(&e.row);
        probes.push_str(&e.probes);
        if let Some(f) = &e.frames_csv {
            out.csv(&format!("selfsim_{i}.csv"), f)?;
        }
        js.push(e.json.clone());
    }
    out.csv("selfsim_summary.csv", &summary)?;
    out.csv("selfsim_probes.csv", &probes)?;
    Ok(json!({"runs": js}))
}
