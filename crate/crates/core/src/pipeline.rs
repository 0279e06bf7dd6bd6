//! End-to-end verification run: design, simulation, bank training and
//! verification on the training and test sets.

use serde::{Deserialize, Serialize};

use crate::analysis::pca_fit;
use crate::calibration::{verify, CalibrationReport, Method};
use crate::doe::{generate_lhs, generate_random, Design, DEFAULT_LHS_MOVES};
use crate::error::{Error, Result};
use crate::hydration::{simulate_bundle, Bundle, ThermalConditions, TimeGrid};
use crate::optimizer::OptimizerConfig;
use crate::parallel::derive_seed;
use crate::strategies::{train_bank, Extras, StrategyConfig, StrategyId, StrategyKind, SurrogateBank, TestSet};
use crate::trainer::{TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub lhs_iterations: usize,
    pub conditions: ThermalConditions,
    pub train: TrainConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_train: 100,
            n_test: 50,
            seed: 0,
            lhs_iterations: DEFAULT_LHS_MOVES,
            conditions: ThermalConditions::default(),
            train: TrainConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Sets one seed for every stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.optimizer.seed = seed;
        self
    }
}

/// Training and test data of one run. The test design is uniform random
/// and drawn from an independent stream.
#[derive(Debug, Clone)]
pub struct DataSets {
    pub design: Design,
    pub bundle: Bundle,
    pub test_design: Design,
    pub test_bundle: Bundle,
}

pub fn build_data(config: &PipelineConfig, grid: &TimeGrid) -> Result<DataSets> {
    let design = generate_lhs(config.n_train, 4, config.seed, config.lhs_iterations).map_err(|e| e.in_stage("doe"))?;
    let test_design = generate_random(config.n_test, 4, derive_seed(config.seed, 1)).map_err(|e| e.in_stage("doe"))?;
    let sim = |d: &Design| simulate_bundle(&d.params()?, grid, &config.conditions).map_err(|e| e.in_stage("simulate"));
    Ok(DataSets {
        bundle: sim(&design)?,
        test_bundle: sim(&test_design)?,
        design,
        test_design,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetSummary {
    pub output_id: String,
    pub chosen_h: usize,
    pub train_mrp: f64,
    pub test_mrp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub strategy: String,
    pub config: PipelineConfig,
    pub design_hash: String,
    pub test_design_hash: String,
    pub nets: Vec<NetSummary>,
    pub train: CalibrationReport,
    pub test: CalibrationReport,
}

pub struct PipelineRun {
    pub data: DataSets,
    pub bank: SurrogateBank,
    pub train_reports: Vec<TrainReport>,
    pub report: PipelineReport,
}

/// Trains a bank for `strategy` and verifies it. Error-function strategies
/// need an observed curve and are rejected.
pub fn run_pipeline(strategy: StrategyId, config: &PipelineConfig) -> Result<PipelineRun> {
    if strategy.kind() == StrategyKind::Error {
        return Err(Error::Config(format!(
            "{strategy} is trained against one observed curve and cannot be verified on a design"
        )));
    }
    config.train.validate()?;
    config.optimizer.validate()?;
    let grid = TimeGrid::default();
    let data = build_data(config, &grid)?;
    let pca = match strategy {
        StrategyId::InvPCA => Some(pca_fit(&data.bundle.curves).map_err(|e| e.in_stage("pca"))?),
        _ => None,
    };
    let extras = Extras {
        pca: pca.as_ref(),
        observed: None,
    };
    let test = TestSet {
        design: &data.test_design,
        bundle: &data.test_bundle,
    };
    let (bank, train_reports) = train_bank(
        &StrategyConfig::new(strategy),
        &data.design,
        &data.bundle,
        extras,
        &config.train,
        Some(test),
    )
    .map_err(|e| e.in_stage("train"))?;

    let method = Method::Bank(&bank);
    let run_verify = |d: &Design, b: &Bundle| {
        verify(
            method,
            &data.design,
            &data.bundle,
            d,
            b,
            &config.optimizer,
            &config.conditions,
        )
        .map_err(|e| e.in_stage("verify"))
    };
    let train = run_verify(&data.design, &data.bundle)?;
    let test = run_verify(&data.test_design, &data.test_bundle)?;
    let nets = bank
        .nets
        .iter()
        .map(|n| NetSummary {
            output_id: n.output_id.clone(),
            chosen_h: n.chosen_h,
            train_mrp: n.train_mrp,
            test_mrp: n.test_mrp,
        })
        .collect();
    let report = PipelineReport {
        strategy: strategy.to_string(),
        config: config.clone(),
        design_hash: data.design.hash(),
        test_design_hash: data.test_design.hash(),
        nets,
        train,
        test,
    };
    Ok(PipelineRun {
        data,
        bank,
        train_reports,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PipelineConfig {
        PipelineConfig {
            n_train: 30,
            n_test: 5,
            lhs_iterations: 200,
            train: TrainConfig {
                v_folds: 3,
                ratio_window: 20,
                max_iters: 200,
                h_max: 3,
                ..TrainConfig::default()
            },
            optimizer: OptimizerConfig {
                budget: 400,
                ..OptimizerConfig::default()
            },
            ..PipelineConfig::default()
        }
        .with_seed(5)
    }

    #[test]
    fn small_inverse_run_is_reproducible() {
        let a = run_pipeline(StrategyId::InvPCA, &small()).unwrap();
        let b = run_pipeline(StrategyId::InvPCA, &small()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.report.test.curves.len(), 5);
        assert_eq!(a.report.train.curves.len(), 30);
        assert!(a.report.test.param_errors.unwrap().iter().all(|e| *e >= 0.0));
    }

    #[test]
    fn error_strategies_are_rejected() {
        let err = run_pipeline(StrategyId::ErrorF1, &small()).err().unwrap();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn stage_labels_wrap_failures() {
        let cfg = PipelineConfig { n_train: 1, ..small() };
        let err = run_pipeline(StrategyId::ForwSpli, &cfg).err().unwrap();
        assert!(matches!(err, Error::Stage { ref stage, .. } if stage == "doe"), "{err}");
    }
}
