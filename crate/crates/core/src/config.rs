//! TOML run configuration.

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleSpec, EstimatorRequest};
use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField};
use crate::integrator::{CutoffSpec, NonnegPolicy, TrajectoryOptions, DEFAULT_CEILING};
use crate::model::{
    p0_window, validate_a1, validate_a1_a2, validate_h1, validate_h2, H2Certificate, LinearNoiseSpec, ModelParams,
    Noise, NonlinearNoiseSpec, Profile, SourceSpec, Violation, DEFAULT_PROFILE_WINDOW, DEFAULT_S_MAX,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub ito: ItoSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "pi")]
    pub lx: f64,
    #[serde(default = "pi")]
    pub ly: f64,
}

fn pi() -> f64 {
    std::f64::consts::PI
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub chi: f64,
    /// Check the source against its damping/growth claims before running.
    #[serde(default = "yes")]
    pub check_assumptions: bool,
    #[serde(default)]
    pub initial: InitialCondition,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { chi: 1.0, check_assumptions: true, initial: InitialCondition::default() }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `base + amplitude cos(kx pi x / lx) cos(ky pi y / ly)`
    Cosine {
        #[serde(default = "one")]
        base: f64,
        amplitude: f64,
        #[serde(default = "one_usize")]
        kx: usize,
        #[serde(default)]
        ky: usize,
    },
    /// `base + amplitude exp(-|x - (x0, y0)|^2 / (2 width^2))`
    Gaussian {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        #[serde(default)]
        x0: f64,
        #[serde(default)]
        y0: f64,
        width: f64,
    },
}

fn one_usize() -> usize {
    1
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Cosine { base: 1.0, amplitude: 0.5, kx: 1, ky: 0 }
    }
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid2D) -> ScalarField {
        let (lx, ly) = (grid.lx(), grid.ly());
        match *self {
            InitialCondition::Constant { value } => ScalarField::constant(grid, value),
            InitialCondition::Cosine { base, amplitude, kx, ky } => ScalarField::from_fn(grid, |x, y| {
                base + amplitude * (kx as f64 * pi() * x / lx).cos() * (ky as f64 * pi() * y / ly).cos()
            }),
            InitialCondition::Gaussian { base, amplitude, x0, y0, width } => ScalarField::from_fn(grid, |x, y| {
                base + amplitude * (-((x - x0).powi(2) + (y - y0).powi(2)) / (2.0 * width * width)).exp()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    #[default]
    None,
    Logistic,
    Polynomial,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(default)]
    pub kind: SourceKind,
    pub mu: Option<f64>,
    /// Coefficients `c_0, c_1, ...` of a polynomial source.
    pub coeffs: Option<Vec<f64>>,
    /// Requested quadratic damping rate; defaults to `0.9 mu` for the logistic source.
    pub mu_tilde: Option<f64>,
    pub c1: Option<f64>,
    /// Growth claim `|g(s)| <= c2 + mu_prime s^n` used with nonlinear noise.
    pub c2: Option<f64>,
    pub mu_prime: Option<f64>,
    pub n: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    #[default]
    Linear,
    Saturating,
    Tanh,
    Affine,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub kappas: Vec<f64>,
    #[serde(default)]
    pub profile: ProfileKind,
    pub slope: Option<f64>,
    pub offset: Option<f64>,
    #[serde(default)]
    pub bs: Vec<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum NonnegSetting {
    #[default]
    Clip,
    Off,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub nonneg: NonnegSetting,
    #[serde(default)]
    pub m_thresholds: Vec<f64>,
    pub stop_at: Option<f64>,
    pub cutoff_m: Option<f64>,
    #[serde(default = "ceiling")]
    pub ceiling: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_lp")]
    pub lp_norms: Vec<f64>,
    #[serde(default)]
    pub store_fields: bool,
    pub brownian_base_dt: Option<f64>,
}

fn ceiling() -> f64 {
    DEFAULT_CEILING
}

fn default_lp() -> Vec<f64> {
    vec![2.0]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "one_usize")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Exponent of the moment estimator; must lie in the admissible window.
    pub p0: Option<f64>,
    /// Exponent of the fractional sup moment.
    pub gamma: Option<f64>,
    /// Exponent and `[lo, hi]` range of the tail estimator.
    pub tail_q: Option<f64>,
    pub tail_range: Option<[f64; 2]>,
    #[serde(default = "tail_points")]
    pub tail_points: usize,
}

fn tail_points() -> usize {
    21
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { paths: 1, seed: 0, workers: 1, p0: None, gamma: None, tail_q: None, tail_range: None, tail_points: 21 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "picard_tol")]
    pub tol: f64,
    #[serde(default = "picard_iter")]
    pub max_iter: usize,
    /// Horizon; defaults to the integrator's `t_end`.
    pub t_end: Option<f64>,
}

fn picard_tol() -> f64 {
    1e-9
}

fn picard_iter() -> usize {
    20
}

impl Default for PicardSection {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 20, t_end: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default = "trials")]
    pub trials: usize,
    #[serde(default = "t_range")]
    pub t_range: [f64; 2],
    #[serde(default = "t_points")]
    pub t_points: usize,
    #[serde(default = "cert_p")]
    pub p: Vec<f64>,
    #[serde(default = "cert_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "epsilon")]
    pub epsilon: f64,
    #[serde(default = "cert_seed")]
    pub seed: u64,
}

fn trials() -> usize {
    100
}
fn t_range() -> [f64; 2] {
    [1e-3, 1.0]
}
fn t_points() -> usize {
    10
}
fn cert_p() -> Vec<f64> {
    vec![2.0, 4.0, f64::INFINITY]
}
fn cert_beta() -> Vec<f64> {
    vec![0.0, 0.25, 0.45]
}
fn epsilon() -> f64 {
    0.05
}
fn cert_seed() -> u64 {
    7
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            trials: trials(),
            t_range: t_range(),
            t_points: t_points(),
            p: cert_p(),
            beta: cert_beta(),
            epsilon: epsilon(),
            seed: cert_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ItoSection {
    #[serde(default = "two")]
    pub p: f64,
    /// Step sizes of the convergence sweep; empty for a single ledger.
    #[serde(default)]
    pub dt_sweep: Vec<f64>,
    #[serde(default = "sweep_paths")]
    pub sweep_paths: usize,
}

fn two() -> f64 {
    2.0
}

fn sweep_paths() -> usize {
    32
}

impl Default for ItoSection {
    fn default() -> Self {
        Self { p: 2.0, dt_sweep: Vec::new(), sweep_paths: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "out_dir")]
    pub dir: String,
}

fn out_dir() -> String {
    "out".to_string()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: out_dir() }
    }
}

/// Model plus the certificates obtained while building it.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub params: ModelParams,
    pub h2: Option<H2Certificate>,
    /// `K` of a linear-growth noise.
    pub noise_k: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)
    }

    pub fn source_spec(&self) -> Result<SourceSpec> {
        let s = &self.source;
        Ok(match s.kind {
            SourceKind::None => SourceSpec::zero(),
            SourceKind::Logistic => SourceSpec::logistic(
                s.mu.ok_or_else(|| Error::Config("source.mu is required for the logistic source".into()))?,
            ),
            SourceKind::Polynomial => SourceSpec::Polynomial {
                coeffs: s
                    .coeffs
                    .clone()
                    .ok_or_else(|| Error::Config("source.coeffs is required for a polynomial source".into()))?,
            },
        })
    }

    /// Requested damping rate for the source certificate.
    pub fn mu_tilde(&self) -> Option<f64> {
        self.source.mu_tilde.or(match (self.source.kind, self.source.mu) {
            (SourceKind::Logistic, Some(mu)) => Some(0.9 * mu),
            _ => None,
        })
    }

    /// Builds the model, running every validator that applies. Violations
    /// come back as [`Error::Violation`].
    pub fn build_model(&self) -> Result<BuiltModel> {
        let grid = self.grid()?;
        let source = self.source_spec()?;
        let check = self.model.check_assumptions;
        let n = &self.noise;
        let mut noise_k = None;
        let noise = match n.kind {
            NoiseKind::None => Noise::None,
            NoiseKind::Linear => {
                let profile = match n.profile {
                    ProfileKind::Linear => Profile::Linear,
                    ProfileKind::Saturating => Profile::Saturating,
                    ProfileKind::Tanh => Profile::Tanh,
                    ProfileKind::Affine => {
                        Profile::Affine { slope: n.slope.unwrap_or(1.0), offset: n.offset.unwrap_or(0.0) }
                    }
                };
                let certified = validate_h1(&LinearNoiseSpec::new(n.kappas.clone(), profile), DEFAULT_PROFILE_WINDOW)?;
                noise_k = Some(certified.k());
                Noise::Linear(certified)
            }
            NoiseKind::Nonlinear => {
                let spec = NonlinearNoiseSpec::new(
                    n.bs.clone(),
                    n.q.ok_or_else(|| Error::Config("noise.q is required for nonlinear noise".into()))?,
                    n.r.ok_or_else(|| Error::Config("noise.r is required for nonlinear noise".into()))?,
                );
                let growth = self.source.n.unwrap_or(2.0);
                let certified = if check {
                    validate_a1_a2(
                        &spec,
                        &source,
                        self.source.c2.unwrap_or(0.0),
                        self.source.mu_prime.unwrap_or(1.0),
                        growth,
                        DEFAULT_S_MAX,
                    )?
                } else {
                    validate_a1(&spec, growth)?
                };
                Noise::Nonlinear(certified)
            }
        };
        let h2 = if check && !matches!(noise, Noise::Nonlinear(_)) {
            let mu_tilde = self.mu_tilde().ok_or_else(|| {
                Error::Violation(Violation {
                    condition: "g(s) <= c1 - mu s^2".into(),
                    detail: "no damping rate: set source.mu_tilde or model.check_assumptions = false".into(),
                    witness: None,
                })
            })?;
            Some(validate_h2(&source, mu_tilde, self.source.c1, DEFAULT_S_MAX)?)
        } else {
            None
        };
        if check {
            if let Some(p0) = self.ensemble.p0 {
                let mu = self.mu_tilde().unwrap_or(0.0);
                match p0_window(self.model.chi, mu) {
                    Some((lo, hi)) if p0 > lo && p0 < hi => {}
                    window => {
                        return Err(Error::Violation(Violation {
                            condition: "p0 in (2, chi / (chi - mu)^+)".into(),
                            detail: format!("p0 = {p0}, window = {window:?}"),
                            witness: None,
                        }))
                    }
                }
            }
        }
        let u0 = self.model.initial.build(&grid);
        let params = ModelParams::new(self.model.chi, source, noise, u0)?;
        Ok(BuiltModel { params, h2, noise_k })
    }

    pub fn trajectory_options(&self) -> Result<TrajectoryOptions> {
        let i = &self.integrator;
        Ok(TrajectoryOptions {
            nonneg: match i.nonneg {
                NonnegSetting::Clip => NonnegPolicy::Clip,
                NonnegSetting::Off => NonnegPolicy::Off,
            },
            ceiling: i.ceiling,
            cutoff: i.cutoff_m.map(CutoffSpec::new).transpose()?,
            stop_at: i.stop_at,
            m_thresholds: i.m_thresholds.clone(),
            lp_norms: self.recorded_norms(),
            snapshot_times: i.snapshot_times.clone(),
            store_fields: i.store_fields,
            brownian_base_dt: i.brownian_base_dt,
        })
    }
}

impl RunConfig {
    /// Configured norms plus any exponent an estimator needs.
    fn recorded_norms(&self) -> Vec<f64> {
        let mut ps = self.integrator.lp_norms.clone();
        for p in [self.ensemble.p0, self.ensemble.tail_q].into_iter().flatten() {
            if !ps.contains(&p) {
                ps.push(p);
            }
        }
        ps
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            paths: self.ensemble.paths,
            seed: self.ensemble.seed,
            workers: self.ensemble.workers,
            t_end: self.integrator.t_end,
            dt: self.integrator.dt,
        }
    }

    pub fn estimator_request(&self) -> EstimatorRequest {
        let e = &self.ensemble;
        EstimatorRequest {
            p0: e.p0,
            gamma: e.gamma,
            tail_q: e.tail_q,
            tail_range: e.tail_range,
            tail_points: e.tail_points,
        }
    }
}
