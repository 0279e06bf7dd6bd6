//! The nine approximation strategies: what each surrogate network maps from
//! and to, dataset construction from a simulation bundle, and trained banks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::PcaModel;
use crate::doe::Design;
use crate::error::{Error, Result};
use crate::hydration::Bundle;
use crate::io;
use crate::mlp::{NeuralNet, OutputActivation};
use crate::parallel;
use crate::trainer::{self, TrainConfig, TrainReport};

/// Number of principal-component coefficients fed to InvPCA networks.
pub const PCA_INPUTS: usize = 9;
/// Time subsampling step of ForwComp.
pub const FORWCOMP_STEP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyId {
    ForwComp,
    ForwSpli,
    ForwSpliII,
    ForwSpliIII,
    ErrorF1,
    ErrorF2,
    InvExp,
    InvExpII,
    InvPCA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Forward,
    Error,
    Inverse,
}

impl StrategyId {
    pub const ALL: [StrategyId; 9] = [
        StrategyId::ForwComp,
        StrategyId::ForwSpli,
        StrategyId::ForwSpliII,
        StrategyId::ForwSpliIII,
        StrategyId::ErrorF1,
        StrategyId::ErrorF2,
        StrategyId::InvExp,
        StrategyId::InvExpII,
        StrategyId::InvPCA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::ForwComp => "ForwComp",
            StrategyId::ForwSpli => "ForwSpli",
            StrategyId::ForwSpliII => "ForwSpliII",
            StrategyId::ForwSpliIII => "ForwSpliIII",
            StrategyId::ErrorF1 => "ErrorF1",
            StrategyId::ErrorF2 => "ErrorF2",
            StrategyId::InvExp => "InvExp",
            StrategyId::InvExpII => "InvExpII",
            StrategyId::InvPCA => "InvPCA",
        }
    }

    pub fn kind(self) -> StrategyKind {
        match self {
            StrategyId::ForwComp | StrategyId::ForwSpli | StrategyId::ForwSpliII | StrategyId::ForwSpliIII => {
                StrategyKind::Forward
            }
            StrategyId::ErrorF1 | StrategyId::ErrorF2 => StrategyKind::Error,
            StrategyId::InvExp | StrategyId::InvExpII | StrategyId::InvPCA => StrategyKind::Inverse,
        }
    }

    pub fn valid_ids() -> String {
        Self::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`; valid ids: {}", Self::valid_ids())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorFunction {
    F1,
    F2,
}

impl ErrorFunction {
    pub fn eval(self, response: &[f64], data: &[f64]) -> Result<f64> {
        match self {
            ErrorFunction::F1 => error_f1(response, data),
            ErrorFunction::F2 => error_f2(response, data),
        }
    }
}

fn check_lengths(response: &[f64], data: &[f64]) -> Result<()> {
    if response.len() != data.len() {
        return Err(Error::Shape(format!(
            "response has {} values, data has {}",
            response.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Sum of squared residuals.
pub fn error_f1(response: &[f64], data: &[f64]) -> Result<f64> {
    check_lengths(response, data)?;
    Ok(response.iter().zip(data).map(|(r, d)| (r - d) * (r - d)).sum())
}

/// Sum of absolute residuals.
pub fn error_f2(response: &[f64], data: &[f64]) -> Result<f64> {
    check_lengths(response, data)?;
    Ok(response.iter().zip(data).map(|(r, d)| (r - d).abs()).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Params,
    /// Parameters plus log10 of the time of each component.
    ParamsAndTime(Vec<usize>),
    Components(Vec<usize>),
    PcCoefficients(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpec {
    /// One network per component.
    Components(Vec<usize>),
    /// One network predicting all components through a time input.
    ComponentOverTime(Vec<usize>),
    ErrorFunction(ErrorFunction),
    Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub id: StrategyId,
    pub input_spec: InputSpec,
    pub output_spec: OutputSpec,
    pub subsample_m: Option<usize>,
}

fn stepped(from: usize, to: usize, step: usize) -> Vec<usize> {
    (from..=to).step_by(step).collect()
}

/// Components 100, 130, 150, 170, 200, ..., 1100, 1130, 1150.
fn forw_spli_iii_components() -> Vec<usize> {
    let mut out: Vec<usize> = (1..=10).flat_map(|h| [0, 30, 50, 70].map(|o| 100 * h + o)).collect();
    out.extend([1100, 1130, 1150]);
    out
}

impl StrategyConfig {
    pub fn new(id: StrategyId) -> Self {
        let (input_spec, output_spec, subsample_m) = match id {
            StrategyId::ForwComp => {
                let k = stepped(1, 1161, FORWCOMP_STEP);
                (
                    InputSpec::ParamsAndTime(k.clone()),
                    OutputSpec::ComponentOverTime(k),
                    Some(FORWCOMP_STEP),
                )
            }
            StrategyId::ForwSpli => (InputSpec::Params, OutputSpec::Components(stepped(300, 1100, 100)), None),
            StrategyId::ForwSpliII => (InputSpec::Params, OutputSpec::Components(stepped(100, 1150, 50)), None),
            StrategyId::ForwSpliIII => (
                InputSpec::Params,
                OutputSpec::Components(forw_spli_iii_components()),
                None,
            ),
            StrategyId::ErrorF1 => (InputSpec::Params, OutputSpec::ErrorFunction(ErrorFunction::F1), None),
            StrategyId::ErrorF2 => (InputSpec::Params, OutputSpec::ErrorFunction(ErrorFunction::F2), None),
            StrategyId::InvExp => (InputSpec::Components(stepped(300, 1100, 100)), OutputSpec::Params, None),
            StrategyId::InvExpII => (InputSpec::Components(stepped(200, 1100, 100)), OutputSpec::Params, None),
            StrategyId::InvPCA => (InputSpec::PcCoefficients(PCA_INPUTS), OutputSpec::Params, None),
        };
        StrategyConfig {
            id,
            input_spec,
            output_spec,
            subsample_m,
        }
    }

    pub fn n_nets(&self) -> usize {
        match &self.output_spec {
            OutputSpec::Components(k) => k.len(),
            OutputSpec::ComponentOverTime(_) | OutputSpec::ErrorFunction(_) => 1,
            OutputSpec::Params => 4,
        }
    }

    /// Component indices a forward bank predicts.
    pub fn forward_components(&self) -> Option<&[usize]> {
        match &self.output_spec {
            OutputSpec::Components(k) | OutputSpec::ComponentOverTime(k) => Some(k),
            _ => None,
        }
    }

    pub fn output_ids(&self) -> Vec<String> {
        match &self.output_spec {
            OutputSpec::Components(k) => k.iter().map(|k| format!("alpha_{k}")).collect(),
            OutputSpec::ComponentOverTime(_) => vec!["alpha_t".into()],
            OutputSpec::ErrorFunction(f) => vec![format!("{f:?}")],
            OutputSpec::Params => (1..=4).map(|j| format!("p{j}")).collect(),
        }
    }
}

/// Data a strategy needs beyond the design and bundle.
#[derive(Debug, Clone, Copy, Default)]
pub struct Extras<'a> {
    pub pca: Option<&'a PcaModel>,
    /// Observed curve resampled to the full grid.
    pub observed: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetDataset {
    pub output_id: String,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl NetDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

fn curve_features(spec: &InputSpec, curve: &[f64], pca: Option<&PcaModel>) -> Result<Vec<f64>> {
    match spec {
        InputSpec::Components(k) => k
            .iter()
            .map(|&k| {
                curve
                    .get(k.wrapping_sub(1))
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("component {k} outside curve of length {}", curve.len())))
            })
            .collect(),
        InputSpec::PcCoefficients(n) => {
            let pca = pca.ok_or_else(|| Error::Config("InvPCA needs a fitted PCA model".into()))?;
            pca.project(curve, Some(*n))
        }
        _ => Err(Error::Config("not an inverse input layout".into())),
    }
}

/// Builds one dataset per network of the strategy.
pub fn build_dataset(
    strategy: &StrategyConfig,
    design: &Design,
    bundle: &Bundle,
    extras: Extras<'_>,
) -> Result<Vec<NetDataset>> {
    if design.len() != bundle.len() {
        return Err(Error::Shape(format!(
            "design has {} rows, bundle has {} curves",
            design.len(),
            bundle.len()
        )));
    }
    if design.dim() != 4 {
        return Err(Error::Shape(format!("design has {} columns, expected 4", design.dim())));
    }
    let n_time = bundle.grid.len();
    let check_k = |k: usize| {
        if k == 0 || k > n_time {
            Err(Error::Config(format!("component {k} outside grid of {n_time} points")))
        } else {
            Ok(())
        }
    };
    let ids = strategy.output_ids();
    match (&strategy.input_spec, &strategy.output_spec) {
        (InputSpec::Params, OutputSpec::Components(ks)) => ks
            .iter()
            .zip(ids)
            .map(|(&k, output_id)| {
                check_k(k)?;
                Ok(NetDataset {
                    output_id,
                    inputs: design.points.clone(),
                    targets: bundle.curves.iter().map(|c| vec![c[k - 1]]).collect(),
                })
            })
            .collect(),
        (InputSpec::ParamsAndTime(ks), OutputSpec::ComponentOverTime(_)) => {
            let mut inputs = Vec::with_capacity(design.len() * ks.len());
            let mut targets = Vec::with_capacity(design.len() * ks.len());
            for (p, c) in design.points.iter().zip(&bundle.curves) {
                for &k in ks {
                    check_k(k)?;
                    let mut x = p.clone();
                    x.push(bundle.grid.times()[k - 1].log10());
                    inputs.push(x);
                    targets.push(vec![c[k - 1]]);
                }
            }
            Ok(vec![NetDataset {
                output_id: ids.into_iter().next().unwrap_or_default(),
                inputs,
                targets,
            }])
        }
        (InputSpec::Params, OutputSpec::ErrorFunction(f)) => {
            let observed = extras
                .observed
                .ok_or_else(|| Error::Config(format!("{} needs an observed curve", strategy.id)))?;
            let targets = bundle
                .curves
                .iter()
                .map(|c| f.eval(c, observed).map(|v| vec![v]))
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![NetDataset {
                output_id: ids.into_iter().next().unwrap_or_default(),
                inputs: design.points.clone(),
                targets,
            }])
        }
        (spec, OutputSpec::Params) => {
            if let InputSpec::Components(ks) = spec {
                ks.iter().try_for_each(|&k| check_k(k))?;
            }
            let inputs = bundle
                .curves
                .iter()
                .map(|c| curve_features(spec, c, extras.pca))
                .collect::<Result<Vec<_>>>()?;
            Ok(ids
                .into_iter()
                .enumerate()
                .map(|(j, output_id)| NetDataset {
                    output_id,
                    inputs: inputs.clone(),
                    targets: design.points.iter().map(|p| vec![p[j]]).collect(),
                })
                .collect())
        }
        _ => Err(Error::Config(format!("inconsistent input and output layout for {}", strategy.id))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankProvenance {
    pub design_seed: u64,
    pub design_hash: String,
    pub bundle_hash: String,
    pub train_config: TrainConfig,
    #[serde(default)]
    pub observed_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankNet {
    pub output_id: String,
    pub net: NeuralNet,
    pub chosen_h: usize,
    pub train_mrp: f64,
    pub test_mrp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateBank {
    pub strategy: StrategyConfig,
    pub nets: Vec<BankNet>,
    pub provenance: BankProvenance,
    /// log10 time of each forward component, for time-input banks.
    pub log_times: Vec<f64>,
    pub pca: Option<PcaModel>,
}

#[derive(Serialize, Deserialize)]
struct BankEntry {
    output_id: String,
    file: String,
    chosen_h: usize,
    train_mrp: f64,
    test_mrp: Option<f64>,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct BankManifest {
    strategy: StrategyConfig,
    provenance: BankProvenance,
    log_times: Vec<f64>,
    pca: Option<String>,
    nets: Vec<BankEntry>,
}

impl SurrogateBank {
    pub fn id(&self) -> StrategyId {
        self.strategy.id
    }

    fn input_row(&self, p: &[f64], k_pos: usize) -> Vec<f64> {
        let mut x = p.to_vec();
        if matches!(self.strategy.input_spec, InputSpec::ParamsAndTime(_)) {
            x.push(self.log_times[k_pos]);
        }
        x
    }

    /// Forward prediction of the configured components at standardized `p`.
    pub fn predict_components(&self, p: &[f64]) -> Result<Vec<f64>> {
        match &self.strategy.output_spec {
            OutputSpec::Components(_) => self.nets.iter().map(|n| Ok(n.net.forward(p)?[0])).collect(),
            OutputSpec::ComponentOverTime(ks) => {
                let net = &self.nets[0].net;
                (0..ks.len())
                    .map(|i| Ok(net.forward(&self.input_row(p, i))?[0]))
                    .collect()
            }
            _ => Err(Error::Config(format!("{} is not a forward strategy", self.strategy.id))),
        }
    }

    /// Error-function surrogate value at `p`.
    pub fn predict_error(&self, p: &[f64]) -> Result<f64> {
        match self.strategy.output_spec {
            OutputSpec::ErrorFunction(_) => Ok(self.nets[0].net.forward(p)?[0]),
            _ => Err(Error::Config(format!("{} is not an error strategy", self.strategy.id))),
        }
    }

    /// Inverse identification from a full-grid curve.
    pub fn identify(&self, curve: &[f64]) -> Result<[f64; 4]> {
        if self.strategy.output_spec != OutputSpec::Params {
            return Err(Error::Config(format!(
                "{} is not an inverse strategy",
                self.strategy.id
            )));
        }
        let x = curve_features(&self.strategy.input_spec, curve, self.pca.as_ref())?;
        let mut p = [0.0; 4];
        for (j, n) in self.nets.iter().enumerate() {
            p[j] = n.net.forward(&x)?[0];
        }
        Ok(p)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.nets.len());
        for n in &self.nets {
            let file = format!("{}_{}.json", self.strategy.id, n.output_id);
            let path = dir.join(&file);
            n.net.save(&path)?;
            entries.push(BankEntry {
                output_id: n.output_id.clone(),
                sha256: io::hash_file(&path)?,
                file,
                chosen_h: n.chosen_h,
                train_mrp: n.train_mrp,
                test_mrp: n.test_mrp,
            });
        }
        let pca = match &self.pca {
            Some(model) => {
                model.write(&dir.join("pca.json"), &dir.join("pca_basis.csv"))?;
                Some("pca.json".to_string())
            }
            None => None,
        };
        io::write_json(
            &dir.join("bank.json"),
            &BankManifest {
                strategy: self.strategy.clone(),
                provenance: self.provenance.clone(),
                log_times: self.log_times.clone(),
                pca,
                nets: entries,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("bank.json");
        let text = std::fs::read_to_string(&manifest_path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let manifest: BankManifest = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::parse(
                format!("{}: {}", manifest_path.display(), e.path()),
                e.inner().to_string(),
            )
        })?;
        let nets = manifest
            .nets
            .into_iter()
            .map(|e| {
                let net = NeuralNet::load(&dir.join(&e.file)).map_err(|err| err.for_net(&e.output_id))?;
                Ok(BankNet {
                    output_id: e.output_id,
                    net,
                    chosen_h: e.chosen_h,
                    train_mrp: e.train_mrp,
                    test_mrp: e.test_mrp,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pca = match manifest.pca {
            Some(_) => Some(PcaModel::read(&dir.join("pca.json"), &dir.join("pca_basis.csv"))?),
            None => None,
        };
        let bank = SurrogateBank {
            strategy: manifest.strategy,
            nets,
            provenance: manifest.provenance,
            log_times: manifest.log_times,
            pca,
        };
        if bank.nets.len() != bank.strategy.n_nets() {
            return Err(Error::parse(
                manifest_path.display().to_string(),
                format!(
                    "{} nets listed, strategy needs {}",
                    bank.nets.len(),
                    bank.strategy.n_nets()
                ),
            ));
        }
        Ok(bank)
    }
}

/// Held-out data for reporting test errors.
#[derive(Debug, Clone, Copy)]
pub struct TestSet<'a> {
    pub design: &'a Design,
    pub bundle: &'a Bundle,
}

/// Trains every network of a strategy. Network `i` uses training seed
/// `derive_seed(config.seed, i)`.
pub fn train_bank(
    strategy: &StrategyConfig,
    design: &Design,
    bundle: &Bundle,
    extras: Extras<'_>,
    config: &TrainConfig,
    test: Option<TestSet<'_>>,
) -> Result<(SurrogateBank, Vec<TrainReport>)> {
    config.validate()?;
    let datasets = build_dataset(strategy, design, bundle, extras)?;
    let test_sets = match test {
        Some(t) => Some(build_dataset(strategy, t.design, t.bundle, extras)?),
        None => None,
    };
    let reports = parallel::try_map_range(datasets.len(), |i| {
        let d = &datasets[i];
        let cfg = TrainConfig {
            seed: parallel::derive_seed(config.seed, i as u64),
            ..config.clone()
        };
        let mut report = trainer::cross_validate(&d.inputs, &d.targets, &cfg, OutputActivation::Sigmoid)
            .map_err(|e| e.for_net(format!("{}_{}", strategy.id, d.output_id)))?;
        if let Some(ts) = &test_sets {
            report.test_mrp = Some(trainer::net_mrp(&report.final_net, &ts[i].inputs, &ts[i].targets)?);
        }
        let prov = &mut report.final_net.provenance;
        prov.strategy = Some(strategy.id.to_string());
        prov.output_id = Some(d.output_id.clone());
        prov.train_mrp = Some(report.train_mrp);
        prov.test_mrp = report.test_mrp;
        prov.seed = Some(cfg.seed);
        Ok::<_, Error>(report)
    })?;
    let nets = datasets
        .iter()
        .zip(&reports)
        .map(|(d, r)| BankNet {
            output_id: d.output_id.clone(),
            net: r.final_net.clone(),
            chosen_h: r.chosen_h,
            train_mrp: r.train_mrp,
            test_mrp: r.test_mrp,
        })
        .collect();
    let log_times = strategy
        .forward_components()
        .map(|ks| ks.iter().map(|&k| bundle.grid.times()[k - 1].log10()).collect())
        .unwrap_or_default();
    let bank = SurrogateBank {
        strategy: strategy.clone(),
        nets,
        provenance: BankProvenance {
            design_seed: design.seed,
            design_hash: design.hash(),
            bundle_hash: bundle.hash(),
            train_config: config.clone(),
            observed_hash: extras.observed.map(|o| io::hash_rows(&[o.to_vec()])),
        },
        log_times,
        pca: match strategy.input_spec {
            InputSpec::PcCoefficients(_) => extras.pca.cloned(),
            _ => None,
        },
    };
    Ok((bank, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::pca_fit;
    use crate::doe::generate_lhs;
    use crate::hydration::{simulate_bundle, ThermalConditions, TimeGrid};

    #[test]
    fn component_lists_and_net_counts() {
        let counts: Vec<usize> = StrategyId::ALL
            .iter()
            .map(|&id| StrategyConfig::new(id).n_nets())
            .collect();
        assert_eq!(counts, vec![1, 9, 22, 43, 1, 1, 4, 4, 4]);

        let iii = forw_spli_iii_components();
        assert_eq!(&iii[..8], &[100, 130, 150, 170, 200, 230, 250, 270]);
        assert_eq!(&iii[iii.len() - 4..], &[1070, 1100, 1130, 1150]);
        let ii = StrategyConfig::new(StrategyId::ForwSpliII);
        assert_eq!(ii.forward_components().unwrap(), stepped(100, 1150, 50).as_slice());
        let comp = StrategyConfig::new(StrategyId::ForwComp);
        let ks = comp.forward_components().unwrap();
        assert_eq!((ks.len(), ks[0], ks[1], ks[116]), (117, 1, 11, 1161));
        assert_eq!(
            StrategyConfig::new(StrategyId::InvExpII).input_spec,
            InputSpec::Components(vec![200, 300, 400, 500, 600, 700, 800, 900, 1000, 1100])
        );
    }

    #[test]
    fn parse_ids() {
        assert_eq!("forwspliiii".parse::<StrategyId>().unwrap(), StrategyId::ForwSpliIII);
        let err = "Bogus".parse::<StrategyId>().unwrap_err().to_string();
        assert!(err.contains("ForwComp") && err.contains("InvPCA"), "{err}");
    }

    #[test]
    fn error_function_examples() {
        assert_eq!(error_f1(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert_eq!(error_f1(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!((error_f1(&[0.3], &[0.1]).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(error_f2(&[0.2], &[0.2]).unwrap(), 0.0);
        assert_eq!(error_f2(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 3.0);
        assert_eq!(error_f2(&[-1.0], &[1.0]).unwrap(), 2.0);
        assert!(error_f1(&[1.0], &[]).is_err());
        assert!(error_f2(&[1.0], &[]).is_err());
    }

    fn small_setup() -> (Design, Bundle) {
        let design = generate_lhs(12, 4, 5, 200).unwrap();
        let bundle = simulate_bundle(
            &design.params().unwrap(),
            &TimeGrid::default(),
            &ThermalConditions::default(),
        )
        .unwrap();
        (design, bundle)
    }

    #[test]
    fn dataset_shapes_and_targets() {
        let (design, bundle) = small_setup();
        let n = design.len();
        let comp = build_dataset(
            &StrategyConfig::new(StrategyId::ForwComp),
            &design,
            &bundle,
            Extras::default(),
        )
        .unwrap();
        assert_eq!(comp.len(), 1);
        assert_eq!(comp[0].len(), n * 117);
        assert_eq!(comp[0].inputs[1][4], bundle.grid.times()[10].log10());
        assert_eq!(comp[0].targets[1][0], bundle.curves[0][10]);

        let spli = build_dataset(
            &StrategyConfig::new(StrategyId::ForwSpliIII),
            &design,
            &bundle,
            Extras::default(),
        )
        .unwrap();
        assert_eq!(spli.len(), 43);
        assert_eq!(spli[1].output_id, "alpha_130");
        for (i, c) in bundle.curves.iter().enumerate() {
            assert_eq!(spli[1].targets[i][0], c[129]);
            assert_eq!(spli[1].inputs[i], design.points[i]);
        }

        let inv = build_dataset(
            &StrategyConfig::new(StrategyId::InvExp),
            &design,
            &bundle,
            Extras::default(),
        )
        .unwrap();
        assert_eq!(inv.len(), 4);
        assert_eq!(inv[0].inputs[0].len(), 9);
        assert_eq!(inv[2].targets[3][0], design.points[3][2]);
        assert_eq!(inv[0].inputs, inv[3].inputs);
    }

    #[test]
    fn missing_extras_are_config_errors() {
        let (design, bundle) = small_setup();
        for id in [StrategyId::InvPCA, StrategyId::ErrorF1, StrategyId::ErrorF2] {
            assert!(matches!(
                build_dataset(&StrategyConfig::new(id), &design, &bundle, Extras::default()),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn pca_inputs_of_mean_curve_are_zero() {
        let (design, mut bundle) = small_setup();
        let pca = pca_fit(&bundle.curves).unwrap();
        bundle.curves[0] = pca.mean.clone();
        let ds = build_dataset(
            &StrategyConfig::new(StrategyId::InvPCA),
            &design,
            &bundle,
            Extras {
                pca: Some(&pca),
                observed: None,
            },
        )
        .unwrap();
        assert_eq!(ds[0].inputs[0].len(), PCA_INPUTS);
        assert!(ds[0].inputs[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn error_targets_are_non_negative_and_zero_on_match() {
        let (design, bundle) = small_setup();
        let observed = bundle.curves[4].clone();
        let ds = build_dataset(
            &StrategyConfig::new(StrategyId::ErrorF1),
            &design,
            &bundle,
            Extras {
                pca: None,
                observed: Some(&observed),
            },
        )
        .unwrap();
        assert!(ds[0].targets.iter().all(|t| t[0] >= 0.0));
        assert_eq!(ds[0].targets[4][0], 0.0);
        assert!(ds[0].targets.iter().enumerate().all(|(i, t)| i == 4 || t[0] > 0.0));
    }

    #[test]
    fn bank_round_trips_through_directory() {
        let (design, bundle) = small_setup();
        let pca = pca_fit(&bundle.curves).unwrap();
        let cfg = TrainConfig {
            v_folds: 3,
            ratio_window: 5,
            max_iters: 30,
            h_max: 2,
            seed: 4,
            ..TrainConfig::default()
        };
        let extras = Extras {
            pca: Some(&pca),
            observed: None,
        };
        let (bank, reports) = train_bank(
            &StrategyConfig::new(StrategyId::InvPCA),
            &design,
            &bundle,
            extras,
            &cfg,
            Some(TestSet {
                design: &design,
                bundle: &bundle,
            }),
        )
        .unwrap();
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| r.test_mrp.is_some()));
        let dir = tempfile::tempdir().unwrap();
        bank.save(dir.path()).unwrap();
        assert!(dir.path().join("InvPCA_p3.json").exists());
        let back = SurrogateBank::load(dir.path()).unwrap();
        assert_eq!(back, bank);
        let p = bank.identify(&bundle.curves[2]).unwrap();
        assert_eq!(p, back.identify(&bundle.curves[2]).unwrap());
        assert!(bank.predict_components(&[0.5; 4]).is_err());
    }
}
