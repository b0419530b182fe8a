//! Tolerances and seeds shared by every stage.

use serde::{Deserialize, Serialize};

/// Containment, seed grid and integration settings.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GeomConfig {
    /// Containment tolerance on the log scale.
    pub tol: f64,
    pub grid_per_axis: usize,
    pub seed: u64,
    /// Relative integration tolerance; d = 3 uses at least 1e-3.
    pub rel_tol: f64,
}

impl Default for GeomConfig {
    fn default() -> Self {
        GeomConfig { tol: 1e-7, grid_per_axis: 33, seed: 42, rel_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Seed grid per axis used while generating cuts.
    pub cut_grid: usize,
    /// Violation level below which the cutting loop stops.
    pub cut_tol: f64,
    /// Duality gap of the barrier subproblems.
    pub gap_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 120, cut_grid: 17, cut_tol: 1e-10, gap_tol: 1e-11 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CertConfig {
    pub contact_tol: f64,
    pub cert_tol: f64,
}

impl Default for CertConfig {
    fn default() -> Self {
        CertConfig { contact_tol: 1e-5, cert_tol: 1e-6 }
    }
}

/// Settings for the s → 0 and s → ∞ comparisons.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct LimitsConfig {
    /// Width of the excluded boundary collar as a fraction of the region diameter.
    pub collar: f64,
    /// Evaluation points per axis for sup-distances.
    pub dist_grid: usize,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig { collar: 0.05, dist_grid: 0 }
    }
}

/// Everything a run needs; the seed fixes every stochastic choice.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct RunConfig {
    pub geom: GeomConfig,
    pub solver: SolverConfig,
    pub cert: CertConfig,
    pub limits: LimitsConfig,
}

impl RunConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.geom.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.geom.seed
    }
}
