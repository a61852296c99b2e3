use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fcnet_core::generators::{GeneratorConfig, Model};
use fcnet_core::jackknife::Parameter;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    McSweep,
    ApproxCheck,
    JackknifeSweep,
}

/// One experiment, read from TOML or JSON. Every field has a default, so an
/// empty document describes the baseline Monte Carlo cell
/// (N = 4000, q = 0.1, B = 10, 100 trials).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub generator: GeneratorConfig,
    pub node_counts: Vec<usize>,
    pub q_values: Vec<f64>,
    pub budgets: Vec<usize>,
    /// Trials per sweep cell; networks per family for `approx_check`.
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub paper_literal_kw: bool,
    /// Also jackknife the second-moment and clustering estimates.
    pub second_moment_jackknife: bool,
    /// Families for `approx_check`.
    pub families: Vec<Model>,
    /// Redraws allowed when a survey selects no seeds.
    pub max_retries: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::McSweep,
            generator: GeneratorConfig::default(),
            node_counts: vec![4000],
            q_values: vec![0.1],
            budgets: vec![10],
            trials: 100,
            master_seed: 0,
            output: None,
            paper_literal_kw: false,
            second_moment_jackknife: false,
            families: vec![Model::ModifiedWs, Model::HolmeKim, Model::Ba, Model::Rrt],
            max_retries: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
            _ => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.node_counts.is_empty() || self.q_values.is_empty() || self.budgets.is_empty() {
            bail!("sweep axes must be nonempty");
        }
        if let Some(q) = self.q_values.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            bail!("q values must lie in (0, 1), got {q}");
        }
        if self.budgets.contains(&0) {
            bail!("B values must be at least 1");
        }
        if self.node_counts.contains(&0) {
            bail!("node counts must be positive");
        }
        if self.kind == ExperimentKind::ApproxCheck && self.families.is_empty() {
            bail!("approx_check needs at least one family");
        }
        self.generator.validate()?;
        Ok(())
    }

    pub fn jackknife_parameters(&self) -> Vec<Parameter> {
        if self.second_moment_jackknife {
            Parameter::ALL.to_vec()
        } else {
            Parameter::FIRST_MOMENTS.to_vec()
        }
    }

    /// `(N, q, B)` for every sweep cell, in cell-id order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.node_counts {
            for &q in &self.q_values {
                for &budget in &self.budgets {
                    out.push(Cell { id: out.len(), n, q, budget });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub n: usize,
    pub q: f64,
    pub budget: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
        assert_eq!(c.cells().len(), 1);
    }

    #[test]
    fn toml_sweep() {
        let c: ExperimentConfig = toml::from_str(
            r#"
            kind = "mc_sweep"
            node_counts = [1000, 2000]
            q_values = [0.1, 0.2]
            budgets = [4]
            trials = 3
            [generator]
            model = "modified_ws"
            weak_mean_degree_range = [50.0, 60.0]
            "#,
        )
        .unwrap();
        c.validate().unwrap();
        let cells = c.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[3].n, cells[3].q, cells[3].budget), (2000, 0.2, 4));
        assert_eq!(c.generator.weak_mean_degree_range, (50.0, 60.0));
    }

    #[test]
    fn rejects_bad_values() {
        for doc in ["trials = 0", "q_values = [1.0]", "budgets = [0]", "node_counts = []", "bogus = 1"] {
            let parsed: Result<ExperimentConfig, _> = toml::from_str(doc);
            assert!(parsed.map_or(true, |c| c.validate().is_err()), "{doc}");
        }
    }
}
