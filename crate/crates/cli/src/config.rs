//! Run configuration: a single TOML document per run.

use serde::{Deserialize, Serialize};

use kinetic_swarm::eps_dynamics::Scheme;
use kinetic_swarm::init::{InitDistribution, InitSpec};
use kinetic_swarm::{KernelChoice, KernelSpec, ModelParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulateEps,
    SimulateLimit,
    Compare,
    Sweep,
    Roots,
    Flow,
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "zero_potential")]
    pub potential: KernelChoice,
    #[serde(default = "zero_weight")]
    pub weight: KernelChoice,
}

fn zero_potential() -> KernelChoice {
    KernelChoice::new("zero_potential", &[])
}

fn zero_weight() -> KernelChoice {
    KernelChoice::new("constant_weight", &[("k", 0.0)])
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { potential: zero_potential(), weight: zero_weight() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub n: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(alias = "L0")]
    pub l0: f64,
    pub r0: f64,
    #[serde(rename = "R0", alias = "big_r0")]
    pub big_r0: f64,
    pub distribution: InitDistribution,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub diffusion: bool,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps_list: Vec<f64>,
    pub t_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsSection {
    /// Signed forcing values `A`.
    pub forcing: Vec<f64>,
    pub eps_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub v: Vec<f64>,
    /// Rescaled flow times.
    pub s_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSection {
    pub input: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: ModelSection,
    #[serde(default)]
    pub kernels: KernelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roots: Option<RootsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<ProjectSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn require<'a, T>(section: &'a Option<T>, name: &str, mode: Mode) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| invalid(format!("mode {mode:?} requires a [{name}] section")))
}

fn strictly_decreasing(name: &str, xs: &[f64]) -> Result<(), CliError> {
    if xs.is_empty() {
        return Err(invalid(format!("{name} must not be empty")));
    }
    if xs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(invalid(format!("{name} entries must be positive")));
    }
    if xs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.model.alpha, self.model.beta, self.model.eps).map_err(|e| invalid(e.to_string()))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        KernelSpec::from_builtins(&self.kernels.potential, &self.kernels.weight).map_err(|e| invalid(e.to_string()))
    }

    pub fn init_spec(&self) -> Result<InitSpec, CliError> {
        let i = require(&self.init, "init", self.mode)?;
        Ok(InitSpec {
            n: i.n,
            dim: i.dim,
            l0: i.l0,
            r0: i.r0,
            big_r0: i.big_r0,
            distribution: i.distribution,
            seed: i.seed,
        })
    }

    pub fn integrator(&self) -> Result<&IntegratorSection, CliError> {
        require(&self.integrator, "integrator", self.mode)
    }

    /// Seed shared by initial data, noise and subsampling.
    pub fn seed(&self) -> u64 {
        self.init.as_ref().map_or(0, |i| i.seed)
    }

    pub fn set_seed(&mut self, seed: u64) {
        if let Some(i) = self.init.as_mut() {
            i.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let params = self.params()?;
        self.kernel_spec()?;
        let r = params.r();
        let needs_init = matches!(self.mode, Mode::SimulateEps | Mode::SimulateLimit | Mode::Sweep);
        if needs_init {
            let i = require(&self.init, "init", self.mode)?;
            if i.n == 0 {
                return Err(invalid("init.n must be positive"));
            }
            if i.dim != 2 && i.dim != 3 {
                return Err(invalid(format!("init.dim must be 2 or 3, got {}", i.dim)));
            }
            if !(i.l0 >= 0.0 && i.l0.is_finite()) {
                return Err(invalid("init.L0 must be nonnegative"));
            }
            if i.distribution == InitDistribution::UniformAnnulus {
                if !(i.r0 > 0.0) {
                    return Err(invalid("0 < r0 required"));
                }
                if !(i.r0 < r) {
                    return Err(invalid(format!("r0 < r required (r0 = {}, r = {r})", i.r0)));
                }
                if !(r < i.big_r0) {
                    return Err(invalid(format!("r < R0 required (r = {r}, R0 = {})", i.big_r0)));
                }
            }
            let g = self.integrator()?;
            if !(g.dt > 0.0 && g.dt.is_finite()) {
                return Err(invalid("integrator.dt must be positive"));
            }
            if !(g.horizon >= g.dt) || !g.horizon.is_finite() {
                return Err(invalid("integrator.T must be at least dt"));
            }
            if g.stride == 0 {
                return Err(invalid("integrator.stride must be at least 1"));
            }
        }
        match self.mode {
            Mode::Sweep => {
                let s = require(&self.sweep, "sweep", self.mode)?;
                strictly_decreasing("sweep.eps_list", &s.eps_list)?;
                if s.t_grid.is_empty() || s.t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return Err(invalid("sweep.t_grid must hold nonnegative times"));
                }
            }
            Mode::Compare => {
                require(&self.compare, "compare", self.mode)?;
            }
            Mode::Roots => {
                let s = require(&self.roots, "roots", self.mode)?;
                strictly_decreasing("roots.eps_list", &s.eps_list)?;
                if s.forcing.is_empty() || s.forcing.iter().any(|a| !a.is_finite()) {
                    return Err(invalid("roots.forcing must hold finite values"));
                }
            }
            Mode::Flow => {
                let s = require(&self.flow, "flow", self.mode)?;
                if s.v.len() != 2 && s.v.len() != 3 {
                    return Err(invalid("flow.v must have 2 or 3 components"));
                }
                if s.v.iter().all(|&c| c == 0.0) {
                    return Err(invalid("flow.v must be nonzero"));
                }
            }
            Mode::Project => {
                require(&self.project, "project", self.mode)?;
            }
            Mode::SimulateEps | Mode::SimulateLimit => {}
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats must not be empty"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Parses and validates a TOML run configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| 1 + text[..s.start.min(text.len())].matches('\n').count());
        CliError::Parse { line, message: e.message().trim().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "simulate-eps"
[model]
alpha = 1.0
beta = 1.0
eps = 0.05
[init]
n = 256
L0 = 1.0
r0 = 0.5
R0 = 1.5
distribution = "uniform_annulus"
[integrator]
T = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        let g = cfg.integrator().unwrap();
        assert_eq!((g.dt, g.stride, g.scheme, g.diffusion), (1e-3, 100, Scheme::Strang, false));
        assert_eq!(cfg.init.as_ref().unwrap().dim, 2);
        assert_eq!(cfg.output, OutputSection::default());
        assert_eq!(cfg.kernels, KernelSection::default());
    }

    #[test]
    fn band_ordering_is_enforced() {
        let err = parse_config(&MINIMAL.replace("r0 = 0.5", "r0 = 1.5")).unwrap_err();
        assert!(matches!(err, CliError::Validation(ref m) if m.contains("r0 < r required")), "{err}");
        let err = parse_config(&MINIMAL.replace("R0 = 1.5", "R0 = 0.9")).unwrap_err();
        assert!(err.to_string().contains("r < R0 required"));
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = parse_config(&MINIMAL.replace("T = 1.0", "T = 1.0\nbogus = 3")).unwrap_err();
        match err {
            CliError::Parse { line, ref message } => {
                // Unknown keys are reported at their table header.
                assert_eq!(line, Some(15), "{message}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
        match parse_config(&MINIMAL.replace("n = 256", "n = \"many\"")).unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, Some(8)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_mode_section_is_named() {
        let text = MINIMAL.replace("simulate-eps", "sweep");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("[sweep]"));
        let err = parse_config(&format!("{text}[sweep]\neps_list = [0.02, 0.04]\nt_grid = [1.0]\n")).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"));
    }
}
