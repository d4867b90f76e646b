//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSettings, RadialField};
use crate::ground_state::eval_q_scaled;
use crate::minimal::Sign;
use crate::params::Params;
use crate::solver::SolverConfig;
use crate::spectral::{random_smooth_field, SpectralData, DEFAULT_M};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    Evolve,
    Shoot,
    Minimal,
    Classify,
    #[serde(alias = "selfsim-sweep", alias = "selfsim_sweep")]
    Selfsim,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Evolve => "evolve",
            Self::Shoot => "shoot",
            Self::Minimal => "minimal",
            Self::Classify => "classify",
            Self::Selfsim => "selfsim",
        }
    }
}

/// Initial data, named by family; `Q + c𝒴` uses the unit-norm `𝒴`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `Q`.
    GroundState,
    /// `Q_μ(r) = μ^{-(d-2)/2} Q(r/μ)`.
    ScaledGroundState { mu: f64 },
    /// `Q + c𝒴`.
    QPlusY { c: f64 },
    /// `Q + c e^{-r²/w²}`.
    QPlusBump {
        c: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// `A e^{-r²/w²}`.
    Gaussian {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// `Q + δ φ` with `φ` a random smooth field scaled so that
    /// `‖δφ‖_{Ḣ¹} = |δ| ‖Q‖_{Ḣ¹}`; `φ` is drawn from stream `index` of the
    /// experiment seed.
    QPlusRandom { delta: f64, index: u64 },
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    pub fn build(&self, spec: &SpectralData, seed: u64) -> Result<RadialField> {
        let p = spec.params;
        let g = spec.grid.clone();
        let field = match *self {
            Self::GroundState => spec.q.clone(),
            Self::ScaledGroundState { mu } => {
                if !(mu > 0.0) {
                    return Err(Error::Config(format!("scale mu must be positive, got {mu}")));
                }
                RadialField::from_fn(g, |r| eval_q_scaled(r, mu, &p))
            }
            Self::QPlusY { c } => spec.q.axpy(c, &spec.y),
            Self::QPlusBump { c, width } => {
                check_width(width)?;
                spec.q.axpy(c, &RadialField::from_fn(g, |r| (-(r * r) / (width * width)).exp()))
            }
            Self::Gaussian { amplitude, width } => {
                check_width(width)?;
                RadialField::from_fn(g, |r| amplitude * (-(r * r) / (width * width)).exp())
            }
            Self::QPlusRandom { delta, index } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                let phi = random_smooth_field(spec, &mut rng);
                let scale = delta * spec.q.h1_sq().sqrt() / phi.h1_sq().sqrt();
                spec.q.axpy(scale, &phi)
            }
        };
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("initial data {self:?} is not finite")));
        }
        Ok(field)
    }

    /// The family parameter varied by bisection.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Self::QPlusY { c } | Self::QPlusBump { c, .. } => Some(c),
            Self::Gaussian { amplitude, .. } => Some(amplitude),
            Self::QPlusRandom { delta, .. } => Some(delta),
            Self::ScaledGroundState { mu } => Some(mu),
            Self::GroundState => None,
        }
    }

    pub fn with_parameter(&self, x: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            Self::QPlusY { c } | Self::QPlusBump { c, .. } => *c = x,
            Self::Gaussian { amplitude, .. } => *amplitude = x,
            Self::QPlusRandom { delta, .. } => *delta = x,
            Self::ScaledGroundState { mu } => *mu = x,
            Self::GroundState => {
                return Err(Error::Config("the ground state has no family parameter".into()));
            }
        }
        Ok(out)
    }

    pub fn label(&self) -> String {
        match self {
            Self::GroundState => "Q".into(),
            Self::ScaledGroundState { mu } => format!("Q_mu(mu={mu})"),
            Self::QPlusY { c } => format!("Q+({c})Y"),
            Self::QPlusBump { c, width } => format!("Q+({c})exp(-r^2/{width}^2)"),
            Self::Gaussian { amplitude, width } => format!("{amplitude}exp(-r^2/{width}^2)"),
            Self::QPlusRandom { delta, index } => format!("Q+random(delta={delta},index={index})"),
        }
    }
}

fn check_width(w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("width must be positive, got {w}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub d: u32,
    /// Permit `d < 7` (outside the covered range; results are flagged).
    pub exploratory: bool,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { d: 7, exploratory: false }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<Params> {
        if self.exploratory {
            Params::exploratory(self.d)
        } else {
            Params::new(self.d)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Localization radius `M` of `Ψ₀ = χ_M ΛQ − ⟨χ_M ΛQ, 𝒴⟩𝒴`.
    pub m: f64,
    /// Random fields for the coercivity estimate (0 disables it).
    pub coercivity_samples: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_M,
            coercivity_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Operational neighbourhood: `‖u0 − Q‖_{Ḣ¹} < eta ‖Q‖_{Ḣ¹}`.
    pub eta: f64,
    /// Run outside the neighbourhood anyway (the verdict is flagged exploratory).
    pub override_neighborhood: bool,
    /// Trapped while `(|a|‖𝒴‖_{Ḣ¹} + ‖ε‖_{Ḣ¹}) / ‖Q‖_{Ḣ¹} ≤ exit_threshold`.
    pub exit_threshold: f64,
    /// Instability flagged once `|a| ≥ k ‖ε‖²_{Ḣ²}`; soliton requires `|a| ≤ 1/k`.
    pub instability_k: f64,
    /// Relative tolerance on the type-I exponent `1/(p-1)`.
    pub exponent_tol: f64,
    /// Remaining-time probes `T − t` for the `I(w) ≤ 0` check on global runs.
    pub global_probe_taus: Vec<f64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            eta: 0.3,
            override_neighborhood: false,
            exit_threshold: 0.1,
            instability_k: 10.0,
            exponent_tol: 0.1,
            global_probe_taus: vec![0.5, 2.0, 8.0, 32.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    /// Family; its parameter value is replaced by the bisection.
    pub family: InitialData,
    pub c_low: f64,
    pub c_high: f64,
    /// Stop once the bracket is narrower than `rel_width (c_high − c_low)`.
    #[serde(default = "default_rel_width")]
    pub rel_width: f64,
    /// Horizon of each bisection run; undecided runs fall back to the sign of
    /// the final unstable amplitude.
    #[serde(default = "default_bisect_horizon")]
    pub horizon: f64,
}

fn default_rel_width() -> f64 {
    1e-6
}

fn default_bisect_horizon() -> f64 {
    150.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimalConfig {
    pub signs: Vec<Sign>,
    pub n_list: Vec<u32>,
    pub epsilons: Vec<f64>,
    /// Depth whose approximant is evolved forward (must be in `n_list`).
    pub forward_n: Option<u32>,
    pub forward_t_end: f64,
    pub forward_dissip_linf: f64,
}

impl Default for MinimalConfig {
    fn default() -> Self {
        Self {
            signs: vec![Sign::Plus, Sign::Minus],
            n_list: vec![3, 5, 7, 9],
            epsilons: vec![0.01],
            forward_n: Some(7),
            forward_t_end: 600.0,
            forward_dissip_linf: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfSimConfig {
    /// Intervals of the uniform `y` grid on `[0, 12]` (even).
    pub y_intervals: usize,
    /// Factors applied to `T_est − t_last` to probe the "blows up before T"
    /// semantics of the criterion.
    pub t_factors: Vec<f64>,
    /// Initial data swept by the `selfsim` experiment (defaults to `initial`).
    pub sweep: Vec<InitialData>,
}

impl Default for SelfSimConfig {
    fn default() -> Self {
        Self {
            y_intervals: crate::selfsim::Y_INTERVALS,
            t_factors: vec![0.9, 1.0, 1.1],
            sweep: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional in files; the CLI subcommand supplies it.
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub bisect: Option<BisectConfig>,
    #[serde(default)]
    pub minimal: MinimalConfig,
    #[serde(default)]
    pub selfsim: SelfSimConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind: Some(kind),
            seed: 0,
            out: default_out(),
            params: ParamsConfig::default(),
            grid: GridSettings::default(),
            spectral: SpectralConfig::default(),
            solver: SolverConfig::default(),
            initial: None,
            classify: ClassifyConfig::default(),
            bisect: None,
            minimal: MinimalConfig::default(),
            selfsim: SelfSimConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.build()?;
        self.solver.validate()?;
        if !(self.spectral.m > 0.0) {
            return Err(Error::Config("spectral.m must be positive".into()));
        }
        if self.kind == Some(ExperimentKind::Evolve) && self.initial.is_none() {
            return Err(Error::Config("kind = \"evolve\" needs an [initial] table".into()));
        }
        if self.kind == Some(ExperimentKind::Classify) && self.initial.is_none() && self.bisect.is_none() {
            return Err(Error::Config("kind = \"classify\" needs an [initial] or [bisect] table".into()));
        }
        if let Some(b) = &self.bisect {
            if b.family.parameter().is_none() {
                return Err(Error::Config("bisect.family has no parameter to vary".into()));
            }
            if !(b.c_low < b.c_high) || !(b.rel_width > 0.0) || !(b.horizon > 0.0) {
                return Err(Error::Config("bisect needs c_low < c_high, rel_width > 0, horizon > 0".into()));
            }
        }
        if let Some(n) = self.minimal.forward_n {
            if !self.minimal.n_list.contains(&n) {
                return Err(Error::Config(format!("minimal.forward_n = {n} is not in n_list")));
            }
        }
        if self.classify.eta <= 0.0 || self.classify.exit_threshold <= 0.0 {
            return Err(Error::Config("classify.eta and exit_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Sets the experiment kind; a different kind already in the file is an error.
    pub fn with_kind(mut self, kind: ExperimentKind) -> Result<Self> {
        match self.kind {
            Some(k) if k != kind => Err(Error::Config(format!(
                "config declares kind = \"{}\" but the {} command was used",
                k.name(),
                kind.name()
            ))),
            _ => {
                self.kind = Some(kind);
                self.validate()?;
                Ok(self)
            }
        }
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
