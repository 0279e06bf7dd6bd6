use std::path::Path;

use calibkit::hydration::ThermalConditions;
use calibkit::optimizer::OptimizerConfig;
use calibkit::pipeline::PipelineConfig;
use calibkit::trainer::TrainConfig;
use calibkit::{Error, Result};
use serde::Deserialize;

/// Contents of a `--config` TOML file. Every key is optional; command-line
/// flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub lhs_iterations: Option<usize>,
    pub conditions: Option<ThermalConditions>,
    pub train: Option<TrainConfig>,
    pub optimizer: Option<OptimizerConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            location: match e.span() {
                Some(span) => format!("{} line {}", path.display(), line_of(&text, span.start)),
                None => path.display().to_string(),
            },
            message: e.message().to_string(),
        })
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Effective settings after merging defaults, the config file and flags.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub pipeline: PipelineConfig,
}

impl Settings {
    pub fn resolve(file: Option<&Path>, seed: Option<u64>, jobs: Option<usize>) -> Result<Self> {
        let fc = match file {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let defaults = PipelineConfig::default();
        let seed = seed.or(fc.seed).unwrap_or(0);
        let pipeline = PipelineConfig {
            n_train: fc.n_train.unwrap_or(defaults.n_train),
            n_test: fc.n_test.unwrap_or(defaults.n_test),
            lhs_iterations: fc.lhs_iterations.unwrap_or(defaults.lhs_iterations),
            conditions: fc.conditions.unwrap_or(defaults.conditions),
            train: fc.train.unwrap_or(defaults.train),
            optimizer: fc.optimizer.unwrap_or(defaults.optimizer),
            seed,
        }
        .with_seed(seed);
        Ok(Settings {
            seed,
            jobs: jobs.or(fc.jobs),
            pipeline,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "seed = 3\nn_train = 40\n[train]\nv_folds = 5\n[optimizer]\nbudget = 500\n",
        )
        .unwrap();
        let s = Settings::resolve(Some(&path), None, None).unwrap();
        assert_eq!((s.seed, s.pipeline.n_train, s.pipeline.train.v_folds), (3, 40, 5));
        assert_eq!((s.pipeline.train.seed, s.pipeline.optimizer.seed), (3, 3));
        assert_eq!(s.pipeline.optimizer.budget, 500);
        let s = Settings::resolve(Some(&path), Some(9), Some(2)).unwrap();
        assert_eq!((s.seed, s.pipeline.train.seed, s.jobs), (9, 9, Some(2)));
    }

    #[test]
    fn unknown_keys_report_a_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 1\n[train]\nfolds = 3\n").unwrap();
        let err = Settings::resolve(Some(&path), None, None).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
