//! Run configuration.
//!
//! A run is described by a TOML file with three sections: `[problem]`
//! selects phantoms and discretization, `[solver]` sets optimization
//! parameters (with `[solver.wolfe]` and `[solver.armijo]` for the line
//! searches), `[output]` names the destination directory. Every field
//! except the phantom list has a default, so a minimal file is
//!
//! ```toml
//! [problem]
//! phantoms = ["mixed"]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linesearch::{ArmijoParams, WolfeParams};
use crate::manifold::EPS_CLIP;
use crate::optimizer::{SolverConfig, SolverMode};
use crate::phantom::PhantomKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Phantom names; the one required field.
    pub phantoms: Vec<String>,
    #[serde(default = "defaults::size")]
    pub size: usize,
    #[serde(default = "defaults::undersampling")]
    pub undersampling: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            phantoms: PhantomKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            size: defaults::size(),
            undersampling: defaults::undersampling(),
            lambda: defaults::lambda(),
            rho: defaults::rho(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "defaults::modes")]
    pub modes: Vec<String>,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::eps_dist")]
    pub eps_dist: f64,
    #[serde(default = "defaults::max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::coarse_iters")]
    pub coarse_iters: usize,
    #[serde(default = "defaults::gtol")]
    pub gtol: f64,
    #[serde(default = "defaults::init_value")]
    pub init_value: f64,
    /// Box clipping threshold. Compiled into the manifold layer; the config
    /// records it and rejects any other value rather than silently running
    /// with a different clip than requested.
    #[serde(default = "defaults::eps_clip")]
    pub eps_clip: f64,
    #[serde(default)]
    pub wall_clock: bool,
    #[serde(default)]
    pub wolfe: WolfeSection,
    #[serde(default)]
    pub armijo: ArmijoSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            modes: defaults::modes(),
            eta: defaults::eta(),
            eps_dist: defaults::eps_dist(),
            max_iter: defaults::max_iter(),
            coarse_iters: defaults::coarse_iters(),
            gtol: defaults::gtol(),
            init_value: defaults::init_value(),
            eps_clip: defaults::eps_clip(),
            wall_clock: false,
            wolfe: WolfeSection::default(),
            armijo: ArmijoSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WolfeSection {
    #[serde(default = "defaults::wolfe_delta")]
    pub delta: f64,
    #[serde(default = "defaults::wolfe_sigma")]
    pub sigma: f64,
    #[serde(default = "defaults::wolfe_eps")]
    pub eps: f64,
    #[serde(default = "defaults::wolfe_gamma")]
    pub gamma: f64,
    #[serde(default = "defaults::wolfe_rho")]
    pub rho: f64,
    #[serde(default = "defaults::wolfe_c_init")]
    pub c_init: f64,
    #[serde(default = "defaults::wolfe_max_evals")]
    pub max_evals: usize,
}

impl Default for WolfeSection {
    fn default() -> Self {
        let p = WolfeParams::default();
        Self {
            delta: p.delta,
            sigma: p.sigma,
            eps: p.eps,
            gamma: p.gamma,
            rho: p.rho,
            c_init: p.c_init,
            max_evals: p.max_evals,
        }
    }
}

impl WolfeSection {
    fn to_params(&self) -> WolfeParams {
        WolfeParams {
            delta: self.delta,
            sigma: self.sigma,
            eps: self.eps,
            gamma: self.gamma,
            rho: self.rho,
            c_init: self.c_init,
            max_evals: self.max_evals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmijoSection {
    #[serde(default = "defaults::armijo_sigma")]
    pub sigma: f64,
    #[serde(default = "defaults::armijo_beta")]
    pub beta: f64,
    #[serde(default = "defaults::armijo_alpha0")]
    pub alpha0: f64,
}

impl Default for ArmijoSection {
    fn default() -> Self {
        let p = ArmijoParams::default();
        Self {
            sigma: p.sigma,
            beta: p.beta,
            alpha0: p.alpha0,
        }
    }
}

impl ArmijoSection {
    fn to_params(&self) -> ArmijoParams {
        ArmijoParams {
            sigma: self.sigma,
            beta: self.beta,
            alpha0: self.alpha0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "defaults::dir")]
    pub dir: PathBuf,
    /// Reserved. Data synthesis is deterministic, so the seed does not
    /// influence results yet; it is part of the format so configs stay
    /// valid if randomized starts are added.
    #[serde(default)]
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: defaults::dir(),
            seed: 0,
        }
    }
}

mod defaults {
    use std::path::PathBuf;

    use crate::linesearch::{ArmijoParams, WolfeParams};
    use crate::manifold::EPS_CLIP;
    use crate::optimizer::SolverMode;

    pub fn size() -> usize {
        64
    }
    pub fn undersampling() -> f64 {
        0.02
    }
    pub fn lambda() -> f64 {
        0.5
    }
    pub fn rho() -> f64 {
        0.5
    }
    pub fn modes() -> Vec<String> {
        SolverMode::ALL.iter().map(|m| m.name().to_string()).collect()
    }
    pub fn eta() -> f64 {
        0.49
    }
    pub fn eps_dist() -> f64 {
        1e-3
    }
    pub fn max_iter() -> usize {
        50
    }
    pub fn coarse_iters() -> usize {
        5
    }
    pub fn gtol() -> f64 {
        1e-8
    }
    pub fn init_value() -> f64 {
        0.5
    }
    pub fn eps_clip() -> f64 {
        EPS_CLIP
    }
    pub fn wolfe_delta() -> f64 {
        WolfeParams::default().delta
    }
    pub fn wolfe_sigma() -> f64 {
        WolfeParams::default().sigma
    }
    pub fn wolfe_eps() -> f64 {
        WolfeParams::default().eps
    }
    pub fn wolfe_gamma() -> f64 {
        WolfeParams::default().gamma
    }
    pub fn wolfe_rho() -> f64 {
        WolfeParams::default().rho
    }
    pub fn wolfe_c_init() -> f64 {
        WolfeParams::default().c_init
    }
    pub fn wolfe_max_evals() -> usize {
        WolfeParams::default().max_evals
    }
    pub fn armijo_sigma() -> f64 {
        ArmijoParams::default().sigma
    }
    pub fn armijo_beta() -> f64 {
        ArmijoParams::default().beta
    }
    pub fn armijo_alpha0() -> f64 {
        ArmijoParams::default().alpha0
    }
    pub fn dir() -> PathBuf {
        PathBuf::from("runs")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.phantoms.is_empty() {
            return Err(invalid("problem.phantoms", "must name at least one phantom"));
        }
        self.phantom_kinds()?;
        if self.problem.size < 8 || self.problem.size % 2 != 0 {
            return Err(invalid(
                "problem.size",
                format!("must be even and at least 8, got {}", self.problem.size),
            ));
        }
        if !(self.problem.undersampling > 0.0 && self.problem.undersampling <= 1.0) {
            return Err(invalid(
                "problem.undersampling",
                format!("must be in (0, 1], got {}", self.problem.undersampling),
            ));
        }
        if !(self.problem.lambda >= 0.0 && self.problem.lambda.is_finite()) {
            return Err(invalid(
                "problem.lambda",
                format!("must be nonnegative, got {}", self.problem.lambda),
            ));
        }
        if !(self.problem.rho > 0.0 && self.problem.rho.is_finite()) {
            return Err(invalid(
                "problem.rho",
                format!("must be positive, got {}", self.problem.rho),
            ));
        }
        if self.solver.modes.is_empty() {
            return Err(invalid("solver.modes", "must name at least one mode"));
        }
        let modes = self.modes()?;
        if self.solver.eps_clip != EPS_CLIP {
            return Err(invalid(
                "solver.eps_clip",
                format!(
                    "the clip threshold is fixed at {EPS_CLIP:e}; got {}",
                    self.solver.eps_clip
                ),
            ));
        }
        for mode in modes {
            self.solver_config(mode)
                .validate()
                .map_err(|e| invalid("solver", e.to_string()))?;
        }
        Ok(())
    }

    pub fn phantom_kinds(&self) -> Result<Vec<PhantomKind>, ConfigError> {
        self.problem
            .phantoms
            .iter()
            .map(|name| {
                name.parse::<PhantomKind>()
                    .map_err(|e| invalid("problem.phantoms", e.to_string()))
            })
            .collect()
    }

    pub fn modes(&self) -> Result<Vec<SolverMode>, ConfigError> {
        self.solver
            .modes
            .iter()
            .map(|name| {
                name.parse::<SolverMode>()
                    .map_err(|e| invalid("solver.modes", e))
            })
            .collect()
    }

    pub fn solver_config(&self, mode: SolverMode) -> SolverConfig {
        SolverConfig {
            mode,
            eta: self.solver.eta,
            eps_dist: self.solver.eps_dist,
            max_iter: self.solver.max_iter,
            coarse_iters: self.solver.coarse_iters,
            gtol: self.solver.gtol,
            init_value: self.solver.init_value,
            wolfe: self.solver.wolfe.to_params(),
            armijo: self.solver.armijo.to_params(),
            wall_clock: self.solver.wall_clock,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_in_defaults() {
        let cfg = RunConfig::from_toml_str("[problem]\nphantoms = [\"mixed\"]\n").unwrap();
        assert_eq!(cfg.problem.size, 64);
        assert_eq!(cfg.problem.undersampling, 0.02);
        assert_eq!(cfg.problem.lambda, 0.5);
        assert_eq!(cfg.problem.rho, 0.5);
        assert_eq!(cfg.solver.eta, 0.49);
        assert_eq!(cfg.solver.eps_dist, 1e-3);
        assert_eq!(cfg.solver.max_iter, 50);
        assert_eq!(cfg.solver.init_value, 0.5);
        assert_eq!(cfg.solver.eps_clip, 1e-10);
        assert_eq!(cfg.solver.armijo.sigma, 1e-4);
        assert_eq!(cfg.solver.armijo.beta, 0.6);
        assert_eq!(cfg.solver.modes.len(), 4);
        assert_eq!(cfg.output.dir, PathBuf::from("runs"));
        assert!(!cfg.solver.wall_clock);
    }

    #[test]
    fn default_dump_round_trips_exactly() {
        let dump = RunConfig::default().to_toml_string();
        let parsed = RunConfig::from_toml_str(&dump).unwrap();
        assert_eq!(parsed, RunConfig::default());
    }

    #[test]
    fn missing_phantom_list_names_the_field() {
        let err = RunConfig::from_toml_str("[problem]\nsize = 32\n").unwrap_err();
        assert!(err.to_string().contains("phantoms"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str(
            "[problem]\nphantoms = [\"mixed\"]\nsmoothing = 2.0\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn invalid_values_are_rejected_with_field_names() {
        let cases = [
            ("[problem]\nphantoms = [\"vortex\"]\n", "phantoms"),
            ("[problem]\nphantoms = [\"bars\"]\nsize = 9\n", "size"),
            (
                "[problem]\nphantoms = [\"bars\"]\nundersampling = 0.0\n",
                "undersampling",
            ),
            (
                "[problem]\nphantoms = [\"bars\"]\n[solver]\nmodes = [\"newton\"]\n",
                "modes",
            ),
            (
                "[problem]\nphantoms = [\"bars\"]\n[solver]\neps_clip = 1e-8\n",
                "eps_clip",
            ),
            (
                "[problem]\nphantoms = [\"bars\"]\n[solver]\neta = 1.5\n",
                "solver",
            ),
        ];
        for (text, field) in cases {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert!(err.to_string().contains(field), "{text} -> {err}");
        }
    }

    #[test]
    fn solver_section_maps_onto_solver_config() {
        let cfg = RunConfig::from_toml_str(
            "[problem]\nphantoms = [\"disks\"]\n\n[solver]\neta = 0.3\nmax_iter = 7\n\n[solver.armijo]\nbeta = 0.5\n",
        )
        .unwrap();
        let sc = cfg.solver_config(SolverMode::TwoLevelRg);
        assert_eq!(sc.mode, SolverMode::TwoLevelRg);
        assert_eq!(sc.eta, 0.3);
        assert_eq!(sc.max_iter, 7);
        assert_eq!(sc.armijo.beta, 0.5);
        // Untouched fields keep their defaults.
        assert_eq!(sc.armijo.sigma, 1e-4);
        assert_eq!(sc.wolfe.delta, 0.1);
    }
}
