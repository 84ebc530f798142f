use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use subgeo::drift_geometry::CoefficientModel;
use subgeo::rate_calculus::Family;
use subgeo::simulate::JumpSdeSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Names accepted in `analysis.checks`.
pub const CHECKS: [&str; 6] =
    ["tv_condition", "classical_subgeo", "wasserstein_contraction", "lyapunov_verify", "hitting_bound", "subordinate"];

/// Top-level run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Built-in coefficient families, selected by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `b(x) = −θx`, `σ = s·I`.
    Ou {
        theta: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    /// `b = 0`, `σ = s·I`.
    Brownian {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    /// `b_i(x) = −sgn(x_i)|x_i|^p`.
    PowerDrift {
        p: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one_usize")]
        dim: usize,
    },
    /// `b(x) = −sgn(x)(cos x + ρ)` in one dimension.
    CosineDrift {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    /// Scalar jump diffusion with clamped drift and state-dependent uniform jumps.
    ExampleE3,
    /// Additive jump SDE: clamped drift, unit Gaussian part, rate-one uniform jumps on `[−1, 1]`.
    ClampedJumps,
    /// User coefficients resolved by symbol name from a shared library.
    Plugin { library: String, symbol: String },
}

/// The model as the library sees it.
pub struct BuiltModel {
    pub coefficients: CoefficientModel<f64>,
    pub jump_spec: Option<JumpSdeSpec<f64>>,
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        match *self {
            ModelConfig::Ou { dim, .. } | ModelConfig::Brownian { dim, .. } | ModelConfig::PowerDrift { dim, .. } => dim,
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<BuiltModel> {
        let coefficients = match *self {
            ModelConfig::Ou { theta, sigma, dim } => CoefficientModel::ou(theta, sigma, dim)?,
            ModelConfig::Brownian { sigma, dim } => CoefficientModel::ou(0.0, sigma, dim)?,
            ModelConfig::PowerDrift { p, sigma, dim } => CoefficientModel::power_drift(p, sigma, dim)?,
            ModelConfig::CosineDrift { rho, sigma } => CoefficientModel::cosine_drift(rho, sigma)?,
            ModelConfig::ExampleE3 => CoefficientModel::example_e3(),
            ModelConfig::ClampedJumps => {
                let spec = JumpSdeSpec::clamped_drift_uniform_jumps();
                return Ok(BuiltModel { coefficients: spec.diffusion_model()?, jump_spec: Some(spec) });
            }
            ModelConfig::Plugin { ref library, ref symbol } => {
                bail!("plugin models are not supported by this build (requested {symbol} from {library})")
            }
        };
        Ok(BuiltModel { coefficients, jump_spec: None })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Checks to run and to collect in the consolidated report.
    pub checks: Vec<String>,
    #[serde(default)]
    pub tv: TvConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub hitting: HittingConfig,
    #[serde(default)]
    pub wass: WassConfig,
    #[serde(default)]
    pub subordinate: SubordinateConfig,
}

impl AnalysisConfig {
    pub fn wants(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == check)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileChoice {
    Diffusion,
    JumpSecondMoment,
}

/// Integral test, Lyapunov construction and verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvConfig {
    /// Rate family φ; `identity` selects the geometric branch.
    pub rate: String,
    /// Centres `x₀` tried in order; empty means the origin.
    pub centers: Vec<Vec<f64>>,
    /// Base radii `r₀` tried for each centre.
    pub base_radii: Vec<f64>,
    pub r_max: f64,
    pub grid_points: usize,
    pub profile: ProfileChoice,
    pub slope_margin: f64,
    pub doubling_rel_change: f64,
    pub tail_rel_tol: f64,
    /// Inner radius of the Lyapunov construction; 0 means `1.5 r₀`.
    pub r1: f64,
    pub verify_points: usize,
    pub verify_tolerance: f64,
    pub rate_t_max: f64,
    pub rate_points: usize,
    /// Whether Λ is expected to be finite.
    pub expect_finite: bool,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            rate: "power(0.5)".into(),
            centers: Vec::new(),
            base_radii: vec![1.0],
            r_max: 400.0,
            grid_points: 15961,
            profile: ProfileChoice::Diffusion,
            slope_margin: 0.1,
            doubling_rel_change: 1e-8,
            tail_rel_tol: 1e-8,
            r1: 0.0,
            verify_points: 200,
            verify_tolerance: 1e-6,
            rate_t_max: 1e4,
            rate_points: 200,
            expect_finite: true,
        }
    }
}

/// Classical polynomial drift condition `A − (1 − γ/2)C + B ≤ −Γ|x|^{γα−γ+2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub alpha: f64,
    pub gamma_exp: f64,
    pub big_gamma: f64,
    pub r0: f64,
    pub r_max: f64,
    pub points_per_unit: usize,
    pub expect_feasible: bool,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self { alpha: 0.5, gamma_exp: 2.0, big_gamma: 0.1, r0: 1.0, r_max: 50.0, points_per_unit: 200, expect_feasible: true }
    }
}

/// Probability bound for never entering a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HittingConfig {
    /// Ball centre; empty means the origin.
    pub center: Vec<f64>,
    pub radius: f64,
    /// Starting points; empty means `numeric.starts`.
    pub points: Vec<Vec<f64>>,
    pub r_max: f64,
    pub step: f64,
}

impl Default for HittingConfig {
    fn default() -> Self {
        Self { center: Vec::new(), radius: 1.0, points: Vec::new(), r_max: 40.0, step: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitChoice {
    Exponential,
    Power,
    PsiInverse,
}

/// Synchronous coupling against the `Ψ⁻¹` bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WassConfig {
    /// Concave modulus family f.
    pub f: String,
    /// Convex family ψ.
    pub psi: String,
    pub gamma_threshold: f64,
    /// Contraction constant Γ; 0 means certify it by a grid scan.
    pub contraction: f64,
    pub flatness_half_width: f64,
    pub flatness_points: usize,
    /// Start pairs `[x, y]`.
    pub pairs: Vec<[Vec<f64>; 2]>,
    /// Exponent of the coupling cost.
    pub p: f64,
    pub fit: FitChoice,
    /// Start of the fitting window; 0 means a tenth of `numeric.t_end`.
    pub fit_from: f64,
    /// Allowed excess over the bound; 0 means `10·dt`.
    pub excess_tolerance: f64,
}

impl Default for WassConfig {
    fn default() -> Self {
        Self {
            f: "identity".into(),
            psi: "power(2)".into(),
            gamma_threshold: 6.0,
            contraction: 0.0,
            flatness_half_width: 3.0,
            flatness_points: 121,
            pairs: vec![[vec![1.0], vec![-1.0]]],
            p: 1.0,
            fit: FitChoice::Power,
            fit_from: 0.0,
            excess_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubordinatorConfig {
    Gamma { a: f64, b: f64 },
    DriftOnly { b: f64 },
    /// Compound Poisson with exponential jumps of the given rate.
    CompoundPoisson { drift: f64, rate: f64, jump_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseRateConfig {
    /// `e^{−λt}`.
    Exponential { lambda: f64 },
    /// `(1 + t)^{−q}`.
    PowerDecay { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    MonteCarlo,
    DensityQuadrature,
}

/// Rate transform under a subordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubordinateConfig {
    pub subordinator: SubordinatorConfig,
    pub base: BaseRateConfig,
    pub p: f64,
    pub times: Vec<f64>,
    pub method: MethodChoice,
    pub samples: usize,
}

impl Default for SubordinateConfig {
    fn default() -> Self {
        Self {
            subordinator: SubordinatorConfig::Gamma { a: 1.0, b: 1.0 },
            base: BaseRateConfig::Exponential { lambda: 1.0 },
            p: 1.0,
            times: vec![0.5, 1.0, 2.0],
            method: MethodChoice::MonteCarlo,
            samples: 100_000,
        }
    }
}

/// Simulation and tolerance settings shared by the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub record_every: usize,
    /// Multiplies every acceptance tolerance.
    pub tolerance_scale: f64,
    /// Simulation and hitting-bound starts; empty means `(2, 0, …, 0)`.
    pub starts: Vec<Vec<f64>>,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self { seed: 1, dt: 1e-3, t_end: 10.0, n_paths: 1000, record_every: 100, tolerance_scale: 1.0, starts: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), formats: vec![Format::Json, Format::Text, Format::Csv] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Canonical TOML with every default filled in.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML, in hex.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Replaces the dimension-dependent empty defaults with explicit values.
    pub fn resolve(&mut self) {
        let d = self.model.dim();
        let origin = vec![0.0; d];
        if self.numeric.starts.is_empty() {
            let mut s = origin.clone();
            s[0] = 2.0;
            self.numeric.starts.push(s);
        }
        if self.analysis.tv.centers.is_empty() {
            self.analysis.tv.centers.push(origin.clone());
        }
        if self.analysis.hitting.center.is_empty() {
            self.analysis.hitting.center = origin;
        }
        if self.analysis.hitting.points.is_empty() {
            self.analysis.hitting.points = self.numeric.starts.clone();
        }
        if self.analysis.wass.fit_from == 0.0 {
            self.analysis.wass.fit_from = 0.1 * self.numeric.t_end;
        }
        if self.analysis.wass.excess_tolerance == 0.0 {
            self.analysis.wass.excess_tolerance = 10.0 * self.numeric.dt;
        }
        if self.analysis.tv.r1 == 0.0 {
            if let Some(&r0) = self.analysis.tv.base_radii.first() {
                self.analysis.tv.r1 = 1.5 * r0;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (this build reads {SCHEMA_VERSION})", self.schema_version);
        }
        for c in &self.analysis.checks {
            if !CHECKS.contains(&c.as_str()) {
                bail!("unknown check '{c}'; expected one of {}", CHECKS.join(", "));
            }
        }
        let tv = &self.analysis.tv;
        tv.rate.parse::<Family>().context("analysis.tv.rate")?;
        self.analysis.wass.f.parse::<Family>().context("analysis.wass.f")?;
        self.analysis.wass.psi.parse::<Family>().context("analysis.wass.psi")?;
        if tv.base_radii.is_empty() || tv.base_radii.iter().any(|&r| !(r > 0.0)) {
            bail!("analysis.tv.base_radii must be a non-empty list of positive radii");
        }
        let d = self.model.dim();
        let dims_ok = |pts: &[Vec<f64>]| pts.iter().all(|p| p.len() == d);
        if !dims_ok(&tv.centers) || !dims_ok(&self.numeric.starts) || !dims_ok(&self.analysis.hitting.points) {
            bail!("points must have the model dimension {d}");
        }
        if !self.analysis.hitting.center.is_empty() && self.analysis.hitting.center.len() != d {
            bail!("analysis.hitting.center must have the model dimension {d}");
        }
        if self.analysis.wass.pairs.iter().any(|[x, y]| x.len() != d || y.len() != d) {
            bail!("analysis.wass.pairs must have the model dimension {d}");
        }
        let n = &self.numeric;
        if !(n.dt > 0.0) || !(n.t_end > 0.0) || n.n_paths == 0 || !(n.tolerance_scale > 0.0) {
            bail!("numeric.dt, t_end, n_paths and tolerance_scale must be positive");
        }
        Ok(())
    }
}
