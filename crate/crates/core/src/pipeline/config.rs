//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mesh::octree::MAX_LEVEL;
use crate::network::ReactionNetwork;
use crate::solver::SolverOptions;
use crate::ssa::SamplingPlan;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub species: Vec<String>,
    /// `reactants -> products @ rate` strings.
    pub reactions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartsConfig {
    /// Newton guesses; converged steady states are rounded to SSA starts.
    pub guesses: Vec<Vec<f64>>,
    /// Explicit SSA starts used as given.
    pub points: Vec<Vec<i64>>,
    /// Trajectories launched from every start.
    pub trajectories_per_start: usize,
}

impl Default for StartsConfig {
    fn default() -> Self {
        Self {
            guesses: Vec::new(),
            points: Vec::new(),
            trajectories_per_start: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsaConfig {
    /// Recorded window `T`.
    pub duration: f64,
    /// Samples per unit time `Q`.
    pub rate: f64,
    /// Burn-in `B`; `T / 10` when absent.
    #[serde(default)]
    pub burn_in: Option<f64>,
}

fn default_max_cells() -> usize {
    2_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub beta1: f64,
    pub beta2: f64,
    /// Refinement passes `H`.
    pub max_level: u8,
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(default)]
    pub lower_clamps: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub vtk: bool,
    pub marginals: bool,
    pub samples_csv: bool,
    pub hanging_table: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            vtk: true,
            marginals: true,
            samples_csv: false,
            hanging_table: false,
        }
    }
}

fn default_sign() -> i8 {
    -1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub network: NetworkConfig,
    #[serde(default)]
    pub starts: StartsConfig,
    pub ssa: SsaConfig,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
    /// `sigma` in the flux `D grad p + sigma v p`.
    #[serde(default = "default_sign")]
    pub drift_sign: i8,
    #[serde(default)]
    pub output: OutputConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.network.species.len() != 3 {
            return Err(Error::Config(format!(
                "exactly 3 species are required, got {}",
                self.network.species.len()
            )));
        }
        if self.starts.guesses.is_empty() && self.starts.points.is_empty() {
            return Err(Error::Config("no steady-state guesses or SSA start points given".into()));
        }
        if self.starts.trajectories_per_start == 0 {
            return Err(Error::Config("trajectories_per_start must be at least 1".into()));
        }
        for g in &self.starts.guesses {
            if g.len() != 3 {
                return Err(Error::Config(format!("guess {g:?} must have 3 coordinates")));
            }
        }
        for p in &self.starts.points {
            if p.len() != 3 || p.iter().any(|v| *v < 0) {
                return Err(Error::Config(format!("start point {p:?} must be 3 non-negative counts")));
            }
        }
        let plan = self.plan()?;
        if plan.samples_per_trajectory() == 0 {
            return Err(Error::Config("Q * T must be at least 1".into()));
        }
        positive("beta1", self.mesh.beta1)?;
        positive("beta2", self.mesh.beta2)?;
        if self.mesh.max_level == 0 || self.mesh.max_level > MAX_LEVEL {
            return Err(Error::Config(format!(
                "max_level must lie in 1..={MAX_LEVEL}, got {}",
                self.mesh.max_level
            )));
        }
        if self.mesh.max_cells == 0 {
            return Err(Error::Config("max_cells must be positive".into()));
        }
        if self.mesh.lower_clamps.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("lower_clamps must be finite".into()));
        }
        if self.drift_sign != -1 && self.drift_sign != 1 {
            return Err(Error::Config(format!("drift_sign must be -1 or 1, got {}", self.drift_sign)));
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be at least 1".into()));
        }
        if let Some(s) = self.solver.shift {
            positive("solver.shift", s)?;
        }
        Ok(())
    }

    pub fn plan(&self) -> Result<SamplingPlan> {
        match self.ssa.burn_in {
            Some(b) => SamplingPlan::new(b, self.ssa.duration, self.ssa.rate),
            None => SamplingPlan::with_default_burn_in(self.ssa.duration, self.ssa.rate),
        }
    }

    pub fn network<T: Real>(&self) -> Result<ReactionNetwork<T>> {
        ReactionNetwork::from_strings(self.network.species.clone(), &self.network.reactions)
    }

    pub fn lower_clamps<T: Real>(&self) -> [T; 3] {
        self.mesh.lower_clamps.map(T::c)
    }

    /// `{S, 2T, 2Q, 2B, 2 beta1, beta2, H + 1}`.
    pub fn doubled(&self) -> Self {
        let mut d = self.clone();
        let b = self.plan().map(|p| p.burn_in).unwrap_or(self.ssa.duration / 10.0);
        d.ssa.duration *= 2.0;
        d.ssa.rate *= 2.0;
        d.ssa.burn_in = Some(2.0 * b);
        d.mesh.beta1 *= 2.0;
        d.mesh.max_level += 1;
        d
    }

    /// True when both configs drive the same SSA ensemble.
    pub fn same_ssa(&self, other: &Self) -> bool {
        self.network == other.network
            && self.starts == other.starts
            && self.seed == other.seed
            && self.plan().ok() == other.plan().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const LINEAR: &str = r#"
name = "linear"
seed = 7

[network]
species = ["X1", "X2", "X3"]
reactions = ["0 -> X1 @ 100", "X1 -> X2 @ 5", "X2 -> X1 @ 5", "X2 -> X3 @ 1", "X3 -> 0 @ 1"]

[starts]
guesses = [[100.0, 100.0, 100.0]]

[ssa]
duration = 1e4
rate = 0.1
burn_in = 1e3

[mesh]
beta1 = 0.01
beta2 = 0.55
max_level = 4
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = RunConfig::from_toml_str(LINEAR).unwrap();
        assert_eq!(c.drift_sign, -1);
        assert_eq!(c.mesh.max_cells, 2_000_000);
        assert_eq!(c.mesh.lower_clamps, [0.0; 3]);
        assert_eq!(c.starts.trajectories_per_start, 1);
        assert_eq!(c.solver, SolverOptions::default());
        assert_eq!(c.plan().unwrap().samples_per_trajectory(), 1000);
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("duration = 1e4", "duration = 0"),
            ("duration = 1e4", "duration = -5"),
            ("rate = 0.1", "rate = 0.0"),
            ("burn_in = 1e3", "burn_in = -1"),
            ("beta1 = 0.01", "beta1 = 0"),
            ("beta2 = 0.55", "beta2 = -0.1"),
            ("max_level = 4", "max_level = 0"),
            ("seed = 7", "seed = 7\ndrift_sign = 0"),
            ("guesses = [[100.0, 100.0, 100.0]]", "guesses = []"),
            ("\"X3\"]", "\"X3\", \"X4\"]"),
            ("max_level = 4", "max_level = 4\nbogus = 1"),
        ] {
            let s = LINEAR.replace(from, to);
            assert_ne!(s, LINEAR);
            let e = RunConfig::from_toml_str(&s).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{to}: {e}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn doubled_parameters() {
        let c = RunConfig::from_toml_str(LINEAR).unwrap();
        let d = c.doubled();
        assert_eq!(d.ssa.duration, 2e4);
        assert_eq!(d.ssa.rate, 0.2);
        assert_eq!(d.ssa.burn_in, Some(2e3));
        assert_eq!(d.mesh.beta1, 0.02);
        assert_eq!(d.mesh.beta2, c.mesh.beta2);
        assert_eq!(d.mesh.max_level, 5);
        assert_eq!(d.starts, c.starts);
        assert!(!c.same_ssa(&d));
    }

    #[test]
    fn default_burn_in_is_a_tenth() {
        let c = RunConfig::from_toml_str(&LINEAR.replace("burn_in = 1e3\n", "")).unwrap();
        assert_eq!(c.plan().unwrap().burn_in, 1e3);
        assert_eq!(c.doubled().ssa.burn_in, Some(2e3));
    }
}
