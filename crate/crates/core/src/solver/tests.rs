use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::GridSettings;
use crate::ground_state::{eval_dr_q, eval_q, eval_q_scaled, kappa_const};

fn params() -> Params {
    Params::new(7).unwrap()
}

fn grid() -> Arc<RadialGrid> {
    Arc::new(RadialGrid::new(&GridSettings::default(), &params()).unwrap())
}

fn q_field(g: &Arc<RadialGrid>) -> RadialField {
    let p = params();
    RadialField::from_fn(g.clone(), |r| eval_q(r, &p))
}

/// Composite Simpson in `x = log r` on a fine grid, over `[0, r_max]`.
fn simpson_log(f: impl Fn(f64) -> f64, r_max: f64, intervals: usize) -> f64 {
    let (a, b) = (-30.0, r_max.ln());
    let h = (b - a) / intervals as f64;
    let g = |x: f64| {
        let r = x.exp();
        f(r) * r
    };
    let mut s = g(a) + g(b);
    for i in 1..intervals {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn energy_of_zero_is_zero() {
    let g = grid();
    assert_eq!(energy(&RadialField::zeros(g), &params()).unwrap(), 0.0);
}

#[test]
fn energy_of_ground_state_matches_fine_quadrature() {
    let p = params();
    let g = grid();
    let e = energy(&q_field(&g), &p).unwrap();
    let oracle = simpson_log(
        |r| {
            let dq = eval_dr_q(r, &p);
            (0.5 * dq * dq - 5.0 / 14.0 * eval_q(r, &p).powf(14.0 / 5.0)) * r.powi(6)
        },
        g.r_max(),
        10 * 2 * g.len(),
    );
    assert!(e > 0.0);
    assert!((e - oracle).abs() < 1e-6 * oracle, "{e} vs {oracle}");
}

#[test]
fn energy_is_scale_invariant() {
    let p = params();
    // a large domain, so the r^{-5} tail cut at R_max is negligible
    let settings = GridSettings {
        cells: 6000,
        r_max: 1000.0,
        first_cell: 1e-4,
    };
    let g = Arc::new(RadialGrid::new(&settings, &p).unwrap());
    let e = energy(&q_field(&g), &p).unwrap();
    for mu in [0.5, 2.0] {
        let qm = RadialField::from_fn(g.clone(), |r| eval_q_scaled(r, mu, &p));
        let em = energy(&qm, &p).unwrap();
        assert!((em - e).abs() < 1e-6 * e, "mu={mu}: {em} vs {e}");
    }
}

#[test]
fn energy_rejects_non_finite() {
    let g = grid();
    let mut f = RadialField::zeros(g);
    f.values_mut()[3] = f64::NAN;
    assert!(energy(&f, &params()).is_err());
}

#[test]
fn zero_is_a_fixed_point() {
    let g = grid();
    let cfg = SolverConfig::default();
    let out = step(&RadialField::zeros(g), 1e-2, &cfg, &params()).unwrap();
    assert!(out.values().iter().all(|v| *v == 0.0));
}

#[test]
fn ground_state_is_stationary_under_a_step() {
    let p = params();
    let g = grid();
    let q = q_field(&g);
    let cfg = SolverConfig::default();
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let out = step(&q, dt, &cfg, &p).unwrap();
        let diff = out.axpy(-1.0, &q).sup_norm();
        assert!(diff / (dt * dt) < 1e-3, "dt={dt}: {diff}");
    }
}

#[test]
fn step_rejects_out_of_range_dt() {
    let g = grid();
    let cfg = SolverConfig::default();
    assert!(step(&RadialField::zeros(g), 10.0, &cfg, &params()).is_err());
}

#[test]
fn ground_state_stays_put() {
    let p = params();
    let g = grid();
    let q = q_field(&g);
    let cfg = SolverConfig {
        t_end: 1.0,
        ..Default::default()
    };
    let rec = evolve(&q, &cfg, &p).unwrap();
    let drift = rec.final_field.axpy(-1.0, &q).sup_norm() / q.sup_norm();
    assert!(drift < 1e-4, "{drift}");
    assert_eq!(rec.verdict, RunVerdict::TrappedAtHorizon);
}

#[test]
fn constant_mode_follows_the_ode() {
    let p = params();
    let settings = GridSettings {
        cells: 200,
        r_max: 10.0,
        first_cell: 1e-2,
    };
    let g = Arc::new(RadialGrid::new(&settings, &p).unwrap());
    let c = 1.0f64;
    let pm1 = p.p() - 1.0;
    let blow = c.powf(-pm1) / pm1;
    let cfg = SolverConfig {
        boundary: Boundary::Neumann,
        t_end: 0.5 * blow,
        snapshot_interval: 0.05,
        ..Default::default()
    };
    let rec = evolve(&RadialField::from_fn(g, |_| c), &cfg, &p).unwrap();
    let kappa = kappa_const(&p);
    for s in &rec.snapshots {
        let exact = kappa * (blow - s.t).powf(-1.0 / pm1);
        for v in s.field.values() {
            assert!((v - exact).abs() < 1e-4 * exact, "t={}: {v} vs {exact}", s.t);
        }
    }
    assert!((rec.times.last().unwrap() - 0.5 * blow).abs() < 1e-12);
}

fn heat_error(cells: usize, dt: f64) -> f64 {
    let p = params();
    let settings = GridSettings {
        cells,
        r_max: 40.0,
        first_cell: 40.0 / (cells as f64 * 20.0),
    };
    let g = Arc::new(RadialGrid::new(&settings, &p).unwrap());
    let cfg = SolverConfig {
        reaction: false,
        dt_max: 1.0,
        ..Default::default()
    };
    let stepper = cfg.stepper(&g, &p, 0.0);
    let exact = |t: f64, r: f64| (1.0 / (1.0 + t)).powf(3.5) * (-r * r / (4.0 * (1.0 + t))).exp();
    let mut u: Vec<f64> = g.nodes().iter().map(|r| exact(0.0, *r)).collect();
    let steps = (1.0 / dt).round() as usize;
    for _ in 0..steps {
        u = stepper.step(&u, dt).unwrap();
    }
    g.nodes()
        .iter()
        .zip(&u)
        .map(|(r, v)| (v - exact(1.0, *r)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn heat_kernel_second_order() {
    let e1 = heat_error(200, 0.1);
    let e2 = heat_error(400, 0.05);
    let e3 = heat_error(800, 0.025);
    let (o1, o2) = ((e1 / e2).log2(), (e2 / e3).log2());
    assert!(o1 > 1.8 && o2 > 1.8, "errors {e1:e} {e2:e} {e3:e}");
}

#[test]
fn half_ground_state_dissipates_with_decreasing_energy() {
    let p = params();
    let g = grid();
    let u0 = q_field(&g).scaled(0.5);
    let rec = evolve(&u0, &SolverConfig::default(), &p).unwrap();
    assert_eq!(rec.verdict, RunVerdict::Dissipation);
    let (ratio, _) = rec.energy_monotonicity();
    assert!(ratio <= 10.0, "{ratio}");
}

#[test]
fn large_gaussian_blows_up_at_the_ode_rate() {
    let p = params();
    let g = grid();
    let u0 = RadialField::from_fn(g, |r| 5.0 * (-r * r / 16.0).exp());
    let rec = evolve(&u0, &SolverConfig::default(), &p).unwrap();
    let RunVerdict::Blowup { t_est, uncertainty } = rec.verdict else {
        panic!("{:?}", rec.verdict)
    };
    assert!(t_est > *rec.times.last().unwrap() - 1e-6);
    assert!(uncertainty < 1e-3 * t_est, "{uncertainty}");
    let (ratio, _) = rec.energy_monotonicity();
    assert!(ratio <= 10.0, "{ratio}");
    // at least 20 samples in the last decade
    let top = *rec.linf_trace.last().unwrap();
    assert!(rec.linf_trace.iter().filter(|v| **v >= top / 10.0).count() >= MIN_FIT_SAMPLES);
}

#[test]
fn dissipation_identity() {
    let p = params();
    let g = grid();
    let u0 = RadialField::from_fn(g.clone(), |r| 0.8 * (-r * r / 4.0).exp());
    let cfg = SolverConfig {
        t_end: 2.0,
        snapshot_interval: 0.1,
        ..Default::default()
    };
    let rec = evolve(&u0, &cfg, &p).unwrap();
    let w = g.xi_weights();
    for pair in rec.snapshots.windows(3) {
        let (a, b, c) = (&pair[0], &pair[1], &pair[2]);
        let de = (energy(&c.field, &p).unwrap() - energy(&a.field, &p).unwrap()) / (c.t - a.t);
        let ut = time_derivative(&b.field, &cfg, &p);
        let diss: f64 = w.iter().zip(ut.values()).map(|(w, v)| w * v * v).sum();
        assert!((-de - diss).abs() < 0.05 * diss, "t={}: {} vs {diss}", b.t, -de);
    }
}

#[test]
fn synthetic_trace_gives_exact_blowup_time() {
    let p = params();
    let kappa = kappa_const(&p);
    let times: Vec<f64> = (0..400).map(|i| 1.0 - 0.97f64.powi(i)).collect();
    let linf: Vec<f64> = times.iter().map(|t| kappa * (1.0 - t).powf(-1.25)).collect();
    let (t_est, unc) = estimate_t(&times, &linf, &p).unwrap();
    assert!((t_est - 1.0).abs() < 1e-6, "{t_est}");
    assert!(unc < 1e-6);
}

#[test]
fn noisy_trace_gives_blowup_time_to_a_percent() {
    let p = params();
    let kappa = kappa_const(&p);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times: Vec<f64> = (0..400).map(|i| 1.0 - 0.97f64.powi(i)).collect();
        let linf: Vec<f64> = times
            .iter()
            .map(|t| kappa * (1.0 - t).powf(-1.25) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            .collect();
        let (t_est, _) = estimate_t(&times, &linf, &p).unwrap();
        worst = worst.max((t_est - 1.0).abs());
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn short_trace_is_insufficient() {
    let p = params();
    let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.01).collect();
    let linf: Vec<f64> = times.iter().map(|t| (1.0 - t).powf(-1.25)).collect();
    assert!(matches!(estimate_t(&times, &linf, &p), Err(Error::InsufficientData(_))));
}

#[test]
fn comparison_of_zero_and_ground_state() {
    let p = params();
    let g = grid();
    let cfg = SolverConfig {
        t_end: 5.0,
        ..Default::default()
    };
    let rep = comparison_check(&RadialField::zeros(g.clone()), &q_field(&g), &cfg, &p).unwrap();
    assert!(rep.holds);
    assert!(rep.compared_times.len() > 10);
    assert!(comparison_check(&q_field(&g), &RadialField::zeros(g), &cfg, &p).is_err());
}

#[test]
fn config_validation() {
    let ok = SolverConfig::default();
    assert!(ok.validate().is_ok());
    for bad in [
        SolverConfig { dt_min: 1.0, ..ok.clone() },
        SolverConfig { dissip_linf: -1.0, ..ok.clone() },
        SolverConfig { safety: 1.5, ..ok.clone() },
        SolverConfig { snapshot_growth: 1.0, ..ok.clone() },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn csv_layout() {
    let p = params();
    let g = grid();
    let cfg = SolverConfig {
        t_end: 0.5,
        ..Default::default()
    };
    let rec = evolve(&q_field(&g), &cfg, &p).unwrap();
    let csv = rec.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,dt,linf,h1dot,energy,verdict_flag");
    assert_eq!(lines.len(), rec.times.len() + 1);
    assert!(lines.last().unwrap().ends_with(",3"));
    let field = field_to_csv(&rec.final_field, &p, 0.5);
    assert!(field.starts_with("# d=7 p=1.8 t="));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn nonnegative_data_stays_nonnegative(amp in 0.05f64..1.5, width in 0.3f64..4.0, shift in 0.0f64..5.0) {
        let p = params();
        let settings = GridSettings { cells: 800, r_max: 60.0, first_cell: 1e-3 };
        let g = Arc::new(RadialGrid::new(&settings, &p).unwrap());
        let u0 = RadialField::from_fn(g, |r| amp * (-((r - shift) / width).powi(2)).exp());
        let cfg = SolverConfig { t_end: 1.0, ..Default::default() };
        let rec = evolve(&u0, &cfg, &p).unwrap();
        for s in &rec.snapshots {
            let min = s.field.values().iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(min > -1e-12, "undershoot {min} at t = {}", s.t);
        }
    }
}

#[test]
fn unstable_mode_matches_spectral_eigenpair() {
    let (p, g) = (params(), grid());
    let sp = crate::spectral::SpectralData::compute(&p, g, crate::spectral::DEFAULT_M).unwrap();
    let (mu, mode) = unstable_mode(&sp.y, sp.e0, &p).unwrap();
    assert!((mu / sp.e0 - 1.0).abs() < 1e-4, "{mu} {}", sp.e0);
    assert!((mode.inner(&sp.y) / sp.y.inner(&sp.y) - 1.0).abs() < 1e-12);
    let cos = mode.inner(&sp.y) / (mode.norm() * sp.y.norm());
    assert!(cos > 1.0 - 1e-6);
}
