//! Experiment configuration: TOML key-value files with nested tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lsgrad_core::error::{Error, Result};
use lsgrad_core::grid::{build_disk_grid, build_square_grid, Grid};
use lsgrad_core::tvmin::SolverOptions;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    /// "square" or "disk".
    pub shape: String,
    pub n: usize,
    /// Side length (square) or radius (disk).
    #[serde(default = "default_size")]
    pub size: f64,
}

fn default_size() -> f64 {
    1.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            shape: "disk".to_string(),
            n: 64,
            size: 1.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        match self.shape.as_str() {
            "square" => build_square_grid(self.n, self.size),
            "disk" => build_disk_grid(self.n, self.size),
            other => Err(Error::InvalidArgument(format!(
                "unknown grid shape '{other}' (expected square or disk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_div_tolerance")]
    pub div_tolerance: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_div_tolerance() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    400_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: default_tolerance(),
            div_tolerance: default_div_tolerance(),
            max_iters: default_max_iters(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            div_tolerance: self.div_tolerance,
            max_iters: self.max_iters,
            seed,
            ..Default::default()
        }
    }
}

/// A recipe run: everything an experiment needs, with explicit seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Registered recipe name.
    pub recipe: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Emit rendered SVG plots next to the plot data.
    #[serde(default)]
    pub svg: bool,
    /// Recipe-specific knobs.
    #[serde(default)]
    pub params: toml::value::Table,
}

impl ExperimentConfig {
    pub fn for_recipe(recipe: &str) -> Self {
        ExperimentConfig {
            recipe: recipe.to_string(),
            seed: 0,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            svg: false,
            params: toml::value::Table::new(),
        }
    }

    pub fn param_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(v)) => Ok(*v),
            Some(toml::Value::Integer(v)) => Ok(*v as f64),
            Some(other) => Err(Error::InvalidArgument(format!(
                "param '{key}' must be a number, got {other}"
            ))),
        }
    }

    pub fn param_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
            Some(other) => Err(Error::InvalidArgument(format!(
                "param '{key}' must be a nonnegative integer, got {other}"
            ))),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::InvalidArgument(format!(
        "{}: {e}",
        path.display()
    )))
}

pub fn save_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_recipe_key_is_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\n").unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("recipe"), "{err}");
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let mut cfg = ExperimentConfig::for_recipe("sign_data");
        cfg.seed = 42;
        cfg.grid.n = 32;
        cfg.params.insert("tau".into(), toml::Value::Float(0.05));
        save_config(&path, &cfg).unwrap();
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded.recipe, "sign_data");
        assert_eq!(loaded.seed, 42);
        assert_eq!(loaded.grid.n, 32);
        assert_eq!(loaded.param_f64("tau", 0.1).unwrap(), 0.05);
    }

    #[test]
    fn nested_tables_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "recipe = \"semigroup_decay\"\n[grid]\nshape = \"disk\"\nn = 48\n[solver]\ntolerance = 1e-7\n",
        )
        .unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.grid.n, 48);
        assert_eq!(cfg.solver.tolerance, 1e-7);
    }
}
