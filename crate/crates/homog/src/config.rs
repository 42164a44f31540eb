//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};

use homog_core::parabolic::ParabolicOptions;
use homog_core::{CellGrid, FluxModel, Lattice, ProblemSpec, Regime, SolverOptions, SpaceTimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: FluxModel,
    pub mu: f64,
    /// Strictly decreasing, each `1/ε` an integer.
    pub epsilons: Vec<f64>,
    pub problem: ProblemSpec,
    pub grids: Grids,
    /// `δξ` of the corrector cache; `null` selects `0.05 (1 + max|Du|)`.
    #[serde(default)]
    pub quantization: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Gradients for `cell-solve`; defaults to the all-ones vector.
    #[serde(default)]
    pub xi: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub table: TableConfig,
    /// Largest number of distinct cell solves the corrector cache may hold.
    #[serde(default = "default_budget")]
    pub cache_budget: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_budget() -> usize {
    100_000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub cell: CellGrid,
    pub space_time: SpaceTimeParams,
}

/// Fine grids are derived per ε: `n_x = elements_per_cell / ε` and
/// `n_t = max(min_steps, steps_per_period · T / ε^μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimeParams {
    pub elements_per_cell: usize,
    pub steps_per_period: usize,
    #[serde(default = "default_min_steps")]
    pub min_steps: usize,
}

fn default_min_steps() -> usize {
    16
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Residual dual norm of every nonlinear solve; `null` picks 1e-10 (p = 2) or 1e-8.
    #[serde(default)]
    pub nonlinear: Option<f64>,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_identity")]
    pub energy_identity: f64,
    #[serde(default = "default_structure_samples")]
    pub structure_samples: usize,
}

fn default_period() -> f64 {
    1e-8
}

fn default_identity() -> f64 {
    1e-6
}

fn default_structure_samples() -> usize {
    1000
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            nonlinear: None,
            period: default_period(),
            energy_identity: default_identity(),
            structure_samples: default_structure_samples(),
        }
    }
}

/// ξ-box of the effective-flux table: `[−radius, radius]^N` with the given spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub radius: f64,
    pub spacing: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { radius: 2.0, spacing: 0.25 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Validation(format!("config key '{}': {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Validation(m));
        let dim = self.model.coefficients().dim;
        Regime::from_mu(self.mu).map_err(|e| CliError::Validation(e.to_string()))?;
        if self.epsilons.is_empty() {
            return fail("epsilons must not be empty".into());
        }
        for w in self.epsilons.windows(2) {
            if w[1] >= w[0] {
                return fail(format!("epsilons must be strictly decreasing, got {} then {}", w[0], w[1]));
            }
        }
        for &e in &self.epsilons {
            let k = 1.0 / e;
            if !(e > 0.0 && e <= 1.0) || (k - k.round()).abs() > 1e-9 * k {
                return fail(format!("1/epsilon must be an integer, got epsilon = {e}"));
            }
        }
        if self.problem.dim != dim || self.grids.cell.dim != dim {
            return fail(format!("model, problem and cell grid dimensions differ (model has {dim})"));
        }
        self.problem.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        self.grids.cell.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        let st = &self.grids.space_time;
        if st.elements_per_cell == 0 || st.steps_per_period == 0 || st.min_steps == 0 {
            return fail("space_time grid parameters must be positive".into());
        }
        if let Some(q) = self.quantization {
            if !(q > 0.0 && q.is_finite()) {
                return fail(format!("quantization must be positive, got {q}"));
            }
        }
        let t = &self.tolerances;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(t.period) || !positive(t.energy_identity) || t.nonlinear.is_some_and(|v| !positive(v)) {
            return fail("all tolerances must be positive".into());
        }
        if !positive(self.table.radius) || !positive(self.table.spacing) {
            return fail("table radius and spacing must be positive".into());
        }
        if let Some(xs) = &self.xi {
            if xs.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
                return fail(format!("every xi must have {dim} finite components"));
            }
        }
        for &e in &self.epsilons {
            self.fine_grid(e)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.model.coefficients().dim
    }

    pub fn p(&self) -> f64 {
        self.model.constants().p
    }

    pub fn fine_grid(&self, epsilon: f64) -> Result<SpaceTimeGrid, CliError> {
        let st = &self.grids.space_time;
        let k = (1.0 / epsilon).round() as usize;
        let t_end = self.problem.t_end;
        let steps = st.steps_per_period as f64 * t_end / epsilon.powf(self.mu);
        if steps > 1e8 {
            return Err(CliError::Validation(format!("epsilon = {epsilon} needs {steps:.3e} time steps")));
        }
        let n_t = (steps.round() as usize).max(st.min_steps);
        SpaceTimeGrid::new(self.dim(), st.elements_per_cell * k, n_t, t_end, epsilon, self.mu)
            .map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn cell_options(&self) -> SolverOptions {
        let mut o = SolverOptions::for_exponent(self.p());
        if let Some(t) = self.tolerances.nonlinear {
            o.tol = t;
        }
        o.period_tol = self.tolerances.period;
        o.identity_tol = self.tolerances.energy_identity;
        o.seed = self.seed;
        o
    }

    pub fn parabolic_options(&self) -> ParabolicOptions {
        let mut o = ParabolicOptions::for_exponent(self.p());
        if let Some(t) = self.tolerances.nonlinear {
            o.nonlinear.tol = t;
        }
        o.structure_samples = self.tolerances.structure_samples;
        o.seed = self.seed;
        o
    }

    pub fn lattice(&self) -> Result<Lattice, CliError> {
        Lattice::symmetric(self.dim(), self.table.radius, self.table.spacing).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn xi_list(&self) -> Vec<Vec<f64>> {
        self.xi.clone().unwrap_or_else(|| vec![vec![1.0; self.dim()]])
    }
}
