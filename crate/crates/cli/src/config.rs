//! Experiment configuration: a single JSON document with every default made
//! explicit when echoed back into run summaries, so runs are self-describing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lineage_core::sampling::Scheme;
use lineage_core::{Lifetime64, Offspring64};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Offspring probabilities `p_0, p_1, ...`.
    pub offspring: Vec<f64>,
    pub lifetime: LifetimeConfig,
    pub horizon: f64,
    #[serde(default = "defaults::scheme")]
    pub scheme: SchemeName,
    #[serde(default = "defaults::replicates")]
    pub replicates: u64,
    #[serde(default = "defaults::base_seed")]
    pub base_seed: u64,
    #[serde(default = "defaults::max_nodes")]
    pub max_nodes: usize,
    #[serde(default)]
    pub genfun: GenFunParams,
    #[serde(default)]
    pub predict: PredictParams,
    #[serde(default)]
    pub compare: CompareParams,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub strict_numerics: bool,
    /// Worker threads; absent or 0 means one per CPU. Results never depend
    /// on this value.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Dump the genealogy of the first N replicates as CSV.
    #[serde(default)]
    pub trace_trees: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LifetimeConfig {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Gamma { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Uniform,
    Palm,
    Leftmost,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Scheme {
        match s {
            SchemeName::Uniform => Scheme::UniformMarker,
            SchemeName::Palm => Scheme::Palm,
            SchemeName::Leftmost => Scheme::Leftmost,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenFunParams {
    pub steps: usize,
    pub s_points: usize,
}

impl Default for GenFunParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            s_points: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictParams {
    pub t_points: usize,
    pub ell_max: usize,
    pub s_points: usize,
    pub quad_points: usize,
}

impl Default for PredictParams {
    fn default() -> Self {
        Self {
            t_points: 21,
            ell_max: 3,
            s_points: 101,
            quad_points: 2001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    /// Number of lineage events selected by the comparison slice.
    pub slice_j: usize,
    /// Event sizes selected by the slice (length must equal `slice_j`).
    pub slice_sizes: Vec<usize>,
    pub t_bins: usize,
    pub s_bins: usize,
    /// Bins for the one-dimensional marker-density comparison.
    pub density_bins: usize,
    /// Simpson panels per axis per bin for expected histograms.
    pub quad_panels: usize,
    pub min_survivors: u64,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            slice_j: 1,
            slice_sizes: vec![2],
            t_bins: 10,
            s_bins: 10,
            density_bins: 20,
            quad_panels: 8,
            min_survivors: 1000,
        }
    }
}

mod defaults {
    use std::path::PathBuf;

    pub fn scheme() -> super::SchemeName {
        super::SchemeName::Uniform
    }
    pub fn replicates() -> u64 {
        10_000
    }
    pub fn base_seed() -> u64 {
        42
    }
    pub fn max_nodes() -> usize {
        1_000_000
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(CliError::Config("replicates must be >= 1".into()));
        }
        if self.horizon <= 0.0 {
            return Err(CliError::Config("horizon must be positive".into()));
        }
        if self.compare.slice_sizes.len() != self.compare.slice_j {
            return Err(CliError::Config(format!(
                "compare.slice_sizes must list exactly slice_j = {} sizes",
                self.compare.slice_j
            )));
        }
        // surface offspring/lifetime validation errors early
        self.offspring_law()?;
        self.lifetime_law()?;
        Ok(())
    }

    pub fn offspring_law(&self) -> Result<Offspring64> {
        Ok(Offspring64::new(self.offspring.clone())?)
    }

    pub fn lifetime_law(&self) -> Result<Lifetime64> {
        Ok(match self.lifetime {
            LifetimeConfig::Exponential { rate } => Lifetime64::exponential(rate)?,
            LifetimeConfig::Deterministic { value } => Lifetime64::deterministic(value)?,
            LifetimeConfig::Gamma { shape, scale } => Lifetime64::gamma(shape, scale)?,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.into()
    }

    /// Exponential rate, when the lifetime law is exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.lifetime {
            LifetimeConfig::Exponential { rate } => Some(rate),
            _ => None,
        }
    }

    /// Integer horizon for the lattice (`μ = δ_1`) paths.
    pub fn lattice_horizon(&self) -> Result<usize> {
        match self.lifetime {
            LifetimeConfig::Deterministic { value: 1.0 } => {
                let n = self.horizon.round();
                if (self.horizon - n).abs() < 1e-12 && n >= 1.0 {
                    Ok(n as usize)
                } else {
                    Err(CliError::Config(format!(
                        "lattice comparisons need an integer horizon, got {}",
                        self.horizon
                    )))
                }
            }
            _ => Err(CliError::Config(
                "lattice comparisons need lifetime = deterministic with value 1".into(),
            )),
        }
    }
}
