use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{SpectralData, ZeroModePair};
use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::ground_state::eval_v;
use crate::params::Params;

/// Powers `r^k` entering the random test fields (even, so fields are smooth
/// at the origin).
const POWERS: [i32; 4] = [0, 2, 4, 6];
const SIGMA_RANGE: (f64, f64) = (1.0, 10.0);

/// Empirical minima of the three coercivity quotients.
#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub samples: usize,
    pub seed: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// A random smooth radial field `Σ_k c_k r^k e^{-r²/σ_k²}` with standard
/// normal `c_k`, `σ_k ∈ [1, 10]`, each term scaled to unit maximum.
pub fn random_smooth_field(spec: &SpectralData, rng: &mut impl Rng) -> RadialField {
    let terms: Vec<(i32, f64, f64)> = POWERS
        .iter()
        .map(|&k| {
            let sigma = rng.random_range(SIGMA_RANGE.0..SIGMA_RANGE.1);
            let c: f64 = rng.sample(StandardNormal);
            // max of r^k e^{-r²/σ²} is (kσ²/2)^{k/2} e^{-k/2}
            let peak = if k == 0 {
                1.0
            } else {
                let kf = k as f64;
                (kf * sigma * sigma / 2.0).powf(kf / 2.0) * (-kf / 2.0).exp()
            };
            (k, sigma, c / peak)
        })
        .collect();
    let mut field = RadialField::from_fn(spec.grid.clone(), |r| {
        terms
            .iter()
            .map(|(k, s, c)| c * r.powi(*k) * (-(r * r) / (s * s)).exp())
            .sum()
    });
    *field.values_mut().last_mut().unwrap() = 0.0;
    field
}

/// Removes the components along `𝒴` and `Ψ₀` (two Gram–Schmidt passes).
pub fn project_out(spec: &SpectralData, v: &RadialField) -> RadialField {
    let psi_norm = spec.psi0.norm();
    let psi_hat = spec.psi0.scaled(1.0 / psi_norm);
    let y_hat = spec.y.scaled(1.0 / spec.y.norm());
    let mut out = v.clone();
    for _ in 0..2 {
        out = out.axpy(-out.inner(&y_hat), &y_hat);
        out = out.axpy(-out.inner(&psi_hat), &psi_hat);
    }
    out
}

/// The three quotients
/// `⟨v,Hv⟩/‖v‖²_{Ḣ¹}`, `‖Hv‖²/‖v‖²_{Ḣ²}`, `⟨Hv, H Hv⟩/‖v‖²_{Ḣ³}`.
pub fn rayleigh_quotients(spec: &SpectralData, v: &RadialField) -> Result<[f64; 3]> {
    let g = &spec.grid;
    let vals = v.values();
    let h1 = g.homogeneous_norm_sq(vals, 1)?;
    let h2 = g.homogeneous_norm_sq(vals, 2)?;
    let h3 = g.homogeneous_norm_sq(vals, 3)?;
    if h1 == 0.0 || h2 == 0.0 || h3 == 0.0 {
        return Err(Error::Degenerate("field has vanishing homogeneous norm".into()));
    }
    let hv = spec.op.apply(vals);
    let q1 = spec.op.quadratic_form(vals) / h1;
    let q2 = g.inner(&hv, &hv) / h2;
    let q3 = spec.op.quadratic_form(&hv) / h3;
    Ok([q1, q2, q3])
}

/// Minimum quotients over `samples` projected random fields. Sampling fans
/// out over the rayon pool; sample `i` uses stream `i` of a ChaCha generator
/// seeded with `seed`, so the result does not depend on the thread count.
pub fn coercivity_estimate(spec: &SpectralData, samples: usize, seed: u64) -> Result<CoercivityReport> {
    if samples < 100 {
        return Err(Error::Config(format!("coercivity needs at least 100 samples, got {samples}")));
    }
    let results: Vec<(RadialField, [f64; 3])> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let v = project_out(spec, &random_smooth_field(spec, &mut rng));
            let q = rayleigh_quotients(spec, &v)?;
            Ok((v, q))
        })
        .collect::<Result<_>>()?;
    let mut mins = [f64::INFINITY; 3];
    for (v, q) in &results {
        for k in 0..3 {
            if q[k] <= 0.0 {
                return Err(Error::CoercivityViolation {
                    quotient: k + 1,
                    value: q[k],
                    witness: v.values().to_vec(),
                });
            }
            mins[k] = mins[k].min(q[k]);
        }
    }
    Ok(CoercivityReport {
        samples,
        seed,
        c1: mins[0],
        c2: mins[1],
        c3: mins[2],
    })
}

/// `∫ v² r^{-2s} r^{d-1} dr / ‖v‖²_{Ḣ^s}`.
pub fn hardy_check(v: &RadialField, s: u32) -> Result<f64> {
    if !(1..=3).contains(&s) {
        return Err(Error::Config(format!("Hardy order {s} not supported (1, 2 or 3)")));
    }
    let g = v.grid();
    let vals = v.values();
    let sup = v.sup_norm();
    if sup == 0.0 {
        return Err(Error::Degenerate("Hardy ratio of the zero field".into()));
    }
    if vals.last().unwrap().abs() > 1e-12 * sup {
        return Err(Error::Config("field must vanish at R_max".into()));
    }
    let power = g.d() as f64 - 1.0 - 2.0 * s as f64;
    let w = g.power_weights(power);
    let num: f64 = w.iter().zip(vals).map(|(w, x)| w * x * x).sum();
    let den = g.homogeneous_norm_sq(vals, s)?;
    if den == 0.0 {
        return Err(Error::Degenerate("field has vanishing homogeneous norm".into()));
    }
    Ok(num / den)
}

/// Both sides of `∫ v H^(n) v r^{d-1}dr = ∫ |(-∂_r + ∂_r log T^(n)) v|² r^{d-1}dr`
/// for an analytic `v`, given as `r ↦ (v, v', v'')`.
pub fn factorization_check(
    zero: &ZeroModePair,
    params: &Params,
    v: impl Fn(f64) -> (f64, f64, f64),
) -> (f64, f64) {
    let g = zero.t_mode.grid();
    let d = params.dim();
    let nf = zero.n as f64;
    let centrifugal = nf * (d + nf - 2.0);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (i, (&r, &w)) in g.nodes().iter().zip(g.weights()).enumerate() {
        if r == 0.0 {
            continue;
        }
        let (f, df, ddf) = v(r);
        let hv = -ddf - (d - 1.0) / r * df + (centrifugal / (r * r) + eval_v(r, params)) * f;
        lhs += w * f * hv;
        let av = -df + zero.t_log_derivative[i] * f;
        rhs += w * av * av;
    }
    (lhs, rhs)
}
