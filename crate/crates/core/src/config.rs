//! JSON run configuration.
//!
//! Only `alpha` is required. Rates default to γ31 = γ41 = 1.25, γ21 = 0.
//! Every section is optional; the command that needs a section reports it
//! as a missing key.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fit::{Controls, FreeParam, NelderMead};
use crate::geometry::{BeamGeometry, RunKind, DEFAULT_N_RAYS};
use crate::num::{cplx, Cplx};
use crate::params::{
    build_grid, Grids, PhysParams, DEFAULT_GAMMA_OPTICAL, DEFAULT_GAMMA_UNIT_HZ, DEFAULT_LENGTH_MM,
};
use crate::profile::{ControlProfile, TabulatedProfile};
use crate::pulse::{PulseSpec, DEFAULT_FWHM, DEFAULT_PEAK, MAX_BLOCH_STEP, MIN_POINTS_PER_FWHM, MIN_Z_POINTS};
use crate::steady::{SteadySolver, DEFAULT_N_Z};

const PROFILE_KINDS: [&str; 4] = ["uniform", "sincos", "gaussian-pair", "custom-tabulated"];

fn gamma_optical() -> f64 {
    DEFAULT_GAMMA_OPTICAL
}
fn gamma_unit_hz() -> f64 {
    DEFAULT_GAMMA_UNIT_HZ
}
fn length_mm() -> f64 {
    DEFAULT_LENGTH_MM
}

/// Fully resolved configuration; serializing it gives a self-contained snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub alpha: f64,
    #[serde(default = "gamma_optical")]
    pub gamma31: f64,
    #[serde(default = "gamma_optical")]
    pub gamma41: f64,
    #[serde(default)]
    pub gamma21: f64,
    #[serde(default = "gamma_unit_hz")]
    pub gamma_unit_hz: f64,
    #[serde(default = "length_mm")]
    pub length_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Uniform(UniformSpec),
    Sincos(SincosSpec),
    GaussianPair(GaussianPairSpec),
    CustomTabulated(TabulatedSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSpec {
    pub omega_c: f64,
    pub omega_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SincosSpec {
    pub omega_0: f64,
}

/// Tilted control beams. The medium length comes from the top-level `length_mm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPairSpec {
    pub omega_c_peak: f64,
    pub omega_d_peak: f64,
    #[serde(default)]
    pub delta_s_um: f64,
    #[serde(default = "GaussianPairSpec::angle")]
    pub angle_deg: f64,
    #[serde(default = "GaussianPairSpec::control_waist")]
    pub control_waist_um: f64,
    /// Zero selects the single on-axis ray.
    #[serde(default = "GaussianPairSpec::probe_waist")]
    pub probe_waist_um: f64,
    #[serde(default = "GaussianPairSpec::n_rays")]
    pub n_rays: usize,
}

impl GaussianPairSpec {
    fn angle() -> f64 {
        2.0
    }
    fn control_waist() -> f64 {
        124.0
    }
    fn probe_waist() -> f64 {
        141.0
    }
    fn n_rays() -> usize {
        DEFAULT_N_RAYS
    }
}

/// Real control amplitudes sampled on z ∈ [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedSpec {
    pub z: Vec<f64>,
    pub omega_c: Vec<f64>,
    pub omega_d: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to 2001 for CW runs and 500 for pulse runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_z: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "SolverSpec::check")]
    pub check_convergence: bool,
    #[serde(default = "SolverSpec::tolerance")]
    pub tolerance: f64,
}

impl SolverSpec {
    fn check() -> bool {
        true
    }
    fn tolerance() -> f64 {
        1e-8
    }
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            check_convergence: true,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum PulseConfig {
    Gaussian(GaussianPulseSpec),
    CustomTabulated(TabulatedPulseSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPulseSpec {
    #[serde(default = "GaussianPulseSpec::peak")]
    pub peak: f64,
    /// Intensity FWHM in units of 1/Γ.
    #[serde(default = "GaussianPulseSpec::fwhm")]
    pub fwhm: f64,
    /// Defaults to two FWHM after the window start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

impl GaussianPulseSpec {
    fn peak() -> f64 {
        DEFAULT_PEAK
    }
    fn fwhm() -> f64 {
        DEFAULT_FWHM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedPulseSpec {
    pub t: Vec<f64>,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Cw,
    Pulse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ds_um: Vec<f64>,
    #[serde(default)]
    pub mode: RunMode,
    /// Per-point dotted-path overrides, one object per sweep value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<Map<String, Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub free: Vec<FreeParam<f64>>,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub settings: NelderMead,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_starts: Vec<Vec<f64>>,
}

/// Output of [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub params: PhysParams<f64>,
    pub profile: Option<ProfileSpec>,
    pub config: Config,
    pub warnings: Vec<String>,
}

/// Parses and checks a raw configuration document.
pub fn validate_config(raw: &Value) -> Result<Validated> {
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
    if !obj.contains_key("alpha") {
        return Err(Error::MissingKey("alpha".into()));
    }
    if let Some(p) = obj.get("profile") {
        match p.get("kind") {
            None => return Err(Error::MissingKey("profile.kind".into())),
            Some(Value::String(k)) if PROFILE_KINDS.contains(&k.as_str()) => {}
            Some(k) => return Err(Error::Config(format!("unknown profile kind {k}"))),
        }
    }
    let config: Config = serde_json::from_value(raw.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let params = config.params();
    let mut warnings = params.check()?;
    if let Some(p) = &config.profile {
        p.check()?;
        if let ProfileSpec::GaussianPair(g) = p {
            if g.geometry(config.length_mm).is_negligible() {
                warnings.push(format!(
                    "control beams displaced far outside the medium (delta_s = {} um)",
                    g.delta_s_um
                ));
            }
        }
    }
    if let Some(PulseConfig::Gaussian(g)) = &config.pulse {
        if !(g.fwhm > 0.0) {
            return Err(Error::Config("pulse fwhm must be positive".into()));
        }
    }
    if let Some(f) = &config.fit {
        if f.free.is_empty() {
            return Err(Error::Config("fit needs at least one free parameter".into()));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Validated {
        params,
        profile: config.profile.clone(),
        config,
        warnings,
    })
}

impl ProfileSpec {
    pub fn check(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("profile.{name} must be finite and non-negative, got {v}")))
            }
        };
        match self {
            ProfileSpec::Uniform(u) => {
                pos("omega_c", u.omega_c)?;
                pos("omega_d", u.omega_d)?;
                if u.omega_c == 0.0 && u.omega_d == 0.0 {
                    return Err(Error::Config("profile needs a nonzero control field".into()));
                }
            }
            ProfileSpec::Sincos(s) => {
                if !(s.omega_0 > 0.0 && s.omega_0.is_finite()) {
                    return Err(Error::Config("profile.omega_0 must be positive".into()));
                }
            }
            ProfileSpec::GaussianPair(g) => {
                pos("omega_c_peak", g.omega_c_peak)?;
                pos("omega_d_peak", g.omega_d_peak)?;
                if g.n_rays < 3 || g.n_rays % 2 == 0 {
                    return Err(Error::Config(format!("profile.n_rays must be odd and at least 3, got {}", g.n_rays)));
                }
                g.geometry(DEFAULT_LENGTH_MM).check()?;
            }
            ProfileSpec::CustomTabulated(t) => {
                t.build()?;
            }
        }
        Ok(())
    }

    /// On-axis control profile.
    pub fn build(&self, length_mm: f64) -> Result<ControlProfile<f64>> {
        Ok(match self {
            ProfileSpec::Uniform(u) => ControlProfile::uniform(u.omega_c, u.omega_d),
            ProfileSpec::Sincos(s) => ControlProfile::Sincos { omega_0: s.omega_0 },
            ProfileSpec::GaussianPair(g) => crate::geometry::profile_gaussian_pair(&g.geometry(length_mm))?,
            ProfileSpec::CustomTabulated(t) => ControlProfile::Tabulated(t.build()?),
        })
    }

    pub fn geometry(&self, length_mm: f64) -> Option<(BeamGeometry<f64>, usize)> {
        match self {
            ProfileSpec::GaussianPair(g) => Some((g.geometry(length_mm), g.n_rays)),
            _ => None,
        }
    }
}

impl GaussianPairSpec {
    pub fn geometry(&self, length_mm: f64) -> BeamGeometry<f64> {
        BeamGeometry {
            angle_rad: self.angle_deg.to_radians(),
            control_waist_um: self.control_waist_um,
            probe_waist_um: self.probe_waist_um,
            delta_s_um: self.delta_s_um,
            medium_length_mm: length_mm,
            omega_c_peak: self.omega_c_peak,
            omega_d_peak: self.omega_d_peak,
        }
    }
}

impl TabulatedSpec {
    fn build(&self) -> Result<TabulatedProfile<f64>> {
        let c: Vec<Cplx<f64>> = self.omega_c.iter().map(|&v| cplx(v)).collect();
        let d: Vec<Cplx<f64>> = self.omega_d.iter().map(|&v| cplx(v)).collect();
        TabulatedProfile::new(self.z.clone(), c, d).map_err(|e| Error::Config(format!("profile: {e}")))
    }
}

impl Config {
    pub fn from_value(raw: &Value) -> Result<Self> {
        Ok(validate_config(raw)?.config)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn params(&self) -> PhysParams<f64> {
        PhysParams {
            alpha: self.alpha,
            gamma31: self.gamma31,
            gamma41: self.gamma41,
            gamma21: self.gamma21,
            length_mm: self.length_mm,
            gamma_unit_hz: self.gamma_unit_hz,
        }
    }

    pub fn profile_spec(&self) -> Result<&ProfileSpec> {
        self.profile.as_ref().ok_or_else(|| Error::MissingKey("profile".into()))
    }

    pub fn control_profile(&self) -> Result<ControlProfile<f64>> {
        self.profile_spec()?.build(self.length_mm)
    }

    /// Geometry when ray averaging applies, else the on-axis profile.
    pub fn controls(&self) -> Result<Controls<f64>> {
        let spec = self.profile_spec()?;
        Ok(match spec.geometry(self.length_mm) {
            Some((geom, n_rays)) => Controls::Geometry { geom, n_rays },
            None => Controls::Profile(spec.build(self.length_mm)?),
        })
    }

    pub fn steady_solver(&self) -> SteadySolver<f64> {
        SteadySolver {
            n_z: self.grid.n_z.unwrap_or(DEFAULT_N_Z),
            check_convergence: self.solver.check_convergence,
            tolerance: self.solver.tolerance,
        }
    }

    pub fn pulse_spec(&self) -> Result<PulseSpec<f64>> {
        let p = self.pulse.as_ref().ok_or_else(|| Error::MissingKey("pulse".into()))?;
        let spec = match p {
            PulseConfig::Gaussian(g) => PulseSpec::Gaussian {
                peak: g.peak,
                t0: g.t0.unwrap_or(2.5 * g.fwhm),
                fwhm: g.fwhm,
            },
            PulseConfig::CustomTabulated(t) => {
                let im = t.im.clone().unwrap_or_else(|| vec![0.0; t.re.len()]);
                if im.len() != t.re.len() {
                    return Err(Error::Config("pulse.re and pulse.im differ in length".into()));
                }
                PulseSpec::Tabulated {
                    t: t.t.clone(),
                    amplitude: t.re.iter().zip(&im).map(|(&r, &i)| Cplx::new(r, i)).collect(),
                }
            }
        };
        spec.check().map_err(|e| Error::Config(format!("pulse: {e}")))?;
        Ok(spec)
    }

    /// Time and space grids for pulse runs. Missing entries are derived:
    /// the window spans six FWHM with the peak at 2.5 FWHM, and the step satisfies both the
    /// per-FWHM and the Bloch stability limits.
    pub fn pulse_grids(&self, pulse: &PulseSpec<f64>) -> Result<Grids<f64>> {
        let fwhm = pulse.fwhm();
        let t_span = match (self.grid.t_span, pulse) {
            (Some(s), _) => s,
            (None, PulseSpec::Gaussian { fwhm, .. }) => 6.0 * fwhm,
            (None, PulseSpec::Tabulated { t, .. }) => 2.0 * t.last().unwrap(),
        };
        let n_t = match self.grid.n_t {
            Some(n) => n,
            None => {
                let omega_max = match &self.profile {
                    Some(p) => control_peak(p),
                    None => 0.0,
                };
                let rate = self.gamma31.max(self.gamma41) + omega_max;
                let mut dt = 0.9 * 2.0 * MAX_BLOCH_STEP / rate;
                if fwhm > 0.0 {
                    dt = dt.min(fwhm / MIN_POINTS_PER_FWHM / 1.1);
                }
                (t_span / dt).ceil() as usize + 1
            }
        };
        let n_z = self.grid.n_z.unwrap_or(MIN_Z_POINTS);
        build_grid(n_z, Some(n_t), Some(t_span)).map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn run_kind(&self, mode: RunMode) -> Result<RunKind<f64>> {
        Ok(match mode {
            RunMode::Cw => RunKind::Cw(self.steady_solver()),
            RunMode::Pulse => {
                let pulse = self.pulse_spec()?;
                let grids = self.pulse_grids(&pulse)?;
                RunKind::Pulse { pulse, grids }
            }
        })
    }
}

/// Upper bound on Ω_tot over the medium.
fn control_peak(p: &ProfileSpec) -> f64 {
    match p {
        ProfileSpec::Uniform(u) => u.omega_c.hypot(u.omega_d),
        ProfileSpec::Sincos(s) => s.omega_0,
        ProfileSpec::GaussianPair(g) => g.omega_c_peak.hypot(g.omega_d_peak),
        ProfileSpec::CustomTabulated(t) => t
            .omega_c
            .iter()
            .zip(&t.omega_d)
            .map(|(c, d)| c.hypot(*d))
            .fold(0.0, f64::max),
    }
}

/// Parses the right-hand side of `path=value`: JSON when it parses, a string otherwise.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form path=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override '{spec}' has an empty path")));
    }
    let value = value.trim();
    let v = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((path.to_string(), v))
}

/// Sets a dotted path in a JSON document, creating intermediate objects.
pub fn apply_override(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("override path '{path}' has an empty segment")));
        }
        let obj = match cur {
            Value::Object(m) => m,
            Value::Null => {
                *cur = Value::Object(Map::new());
                cur.as_object_mut().unwrap()
            }
            _ => {
                return Err(Error::Config(format!(
                    "override path '{path}': '{}' is not an object",
                    parts[..k].join(".")
                )))
            }
        };
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}
