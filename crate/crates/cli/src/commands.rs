use std::path::Path;

use calibkit::analysis::{pca_fit, sensitivity_table};
use calibkit::calibration::{self, CalibrationReport, Method, ObservedCurve};
use calibkit::doe::{generate_lhs, generate_random, Design};
use calibkit::hydration::{simulate, simulate_bundle, Bundle, StandardizedParams, ThermalConditions, TimeGrid};
use calibkit::io;
use calibkit::pipeline::run_pipeline;
use calibkit::strategies::{
    train_bank, ErrorFunction, Extras, StrategyConfig, StrategyId, StrategyKind, SurrogateBank, TestSet,
};
use calibkit::{Error, Result};
use serde::Serialize;

use crate::cli::{
    CalibrateArgs, DirectArgs, DoeArgs, DoeKind, GridArgs, IdentifyArgs, ObservedArgs, PcaArgs, PipelineArgs,
    ReportArgs, SenseArgs, SimulateArgs, TrainArgs, ValidationArgs,
};
use crate::manifest::{manifest_path, Recorder};
use crate::settings::Settings;

fn conditions(
    settings: &Settings,
    temperature: Option<f64>,
    activation_energy: Option<f64>,
) -> Result<ThermalConditions> {
    let base = settings.pipeline.conditions;
    ThermalConditions::new(
        temperature.unwrap_or(base.temperature),
        activation_energy.unwrap_or(base.activation_energy),
    )
}

fn grid(args: &GridArgs) -> Result<TimeGrid> {
    TimeGrid::log_uniform(args.t_min, args.t_max, args.points)
}

fn finish(rec: Recorder, out: &Path) -> Result<()> {
    rec.finish(&manifest_path(out))
}

pub fn simulate_cmd(args: &SimulateArgs, settings: &Settings) -> Result<()> {
    let grid = grid(&args.grid)?;
    let cond = conditions(settings, args.temperature, args.activation_energy)?;
    let mut rec = Recorder::new("simulate", settings.seed);
    rec.config(&(&cond, &args.grid));
    match (&args.p, &args.design) {
        (Some(p), None) => {
            let p = StandardizedParams::from_slice(p)?;
            simulate(&p, &grid, &cond)?.write_csv(&args.out)?;
        }
        (None, Some(path)) => {
            let design = Design::read(path)?;
            rec.input(path);
            simulate_bundle(&design.params()?, &grid, &cond)?.write_csv(&args.out)?;
        }
        _ => return Err(Error::Config("give exactly one of --p or --design".into())),
    }
    rec.output(&args.out);
    finish(rec, &args.out)
}

pub fn doe_cmd(args: &DoeArgs, settings: &Settings) -> Result<()> {
    let iterations = args.iterations.unwrap_or(settings.pipeline.lhs_iterations);
    let design = match args.kind {
        DoeKind::Lhs => generate_lhs(args.n, args.dim, settings.seed, iterations)?,
        DoeKind::Random => generate_random(args.n, args.dim, settings.seed)?,
    };
    design.write(&args.out)?;
    let mut rec = Recorder::new("doe", settings.seed);
    rec.config(&design.meta());
    rec.output(&args.out);
    rec.output(&Design::meta_path(&args.out));
    println!("discrepancy {:.6e}", design.discrepancy);
    finish(rec, &args.out)
}

pub fn sense_cmd(args: &SenseArgs, settings: &Settings) -> Result<()> {
    let design = Design::read(&args.design)?;
    let bundle = Bundle::read_csv(&args.bundle)?;
    let labels = (1..=bundle.grid.len()).map(|k| format!("alpha_{k}")).collect();
    let table = sensitivity_table(&design.points, &bundle.curves, labels)?;
    table.write_csv(&args.out)?;
    let mut rec = Recorder::new("sense", settings.seed);
    rec.input(&args.design);
    rec.input(&args.bundle);
    rec.output(&args.out);
    finish(rec, &args.out)
}

pub fn pca_cmd(args: &PcaArgs, settings: &Settings) -> Result<()> {
    let bundle = Bundle::read_csv(&args.bundle)?;
    let model = pca_fit(&bundle.curves)?;
    std::fs::create_dir_all(&args.out_dir)?;
    model.write(&args.out_dir.join("pca.json"), &args.out_dir.join("pca_basis.csv"))?;
    for (i, r) in model.explained_ratio().iter().take(9).enumerate() {
        println!("PC{} {:.6}", i + 1, r);
    }
    let mut rec = Recorder::new("pca", settings.seed);
    rec.input(&args.bundle);
    rec.output(&args.out_dir);
    finish(rec, &args.out_dir)
}

fn read_observed(args: &ObservedArgs) -> Result<ObservedCurve> {
    ObservedCurve::read_csv(&args.observed, args.time_shift, args.qpot)
}

pub fn train_cmd(args: &TrainArgs, settings: &Settings) -> Result<()> {
    let design = Design::read(&args.design)?;
    let bundle = Bundle::read_csv(&args.bundle)?;
    let mut rec = Recorder::new("train", settings.seed);
    rec.config(&settings.pipeline.train);
    rec.input(&args.design);
    rec.input(&args.bundle);
    let strategy = StrategyConfig::new(args.strategy);
    let pca = match args.strategy {
        StrategyId::InvPCA => Some(pca_fit(&bundle.curves)?),
        _ => None,
    };
    let observed = match (&args.observed, args.strategy.kind()) {
        (Some(path), StrategyKind::Error) => {
            rec.input(path);
            let curve = ObservedCurve::read_csv(path, args.time_shift, args.qpot)?;
            Some(calibration::resample_to_grid(&curve, &bundle.grid, None)?)
        }
        (None, StrategyKind::Error) => {
            return Err(Error::Config(format!("{} needs --observed", args.strategy)));
        }
        _ => None,
    };
    for w in observed.iter().flat_map(|r| &r.warnings) {
        eprintln!("warning: {w}");
    }
    let extras = Extras {
        pca: pca.as_ref(),
        observed: observed.as_ref().map(|r| r.values.as_slice()),
    };
    let test = match (&args.test_design, &args.test_bundle) {
        (Some(d), Some(b)) => {
            rec.input(d);
            rec.input(b);
            Some((Design::read(d)?, Bundle::read_csv(b)?))
        }
        (None, None) => None,
        _ => return Err(Error::Config("--test-design and --test-bundle go together".into())),
    };
    let (bank, reports) = train_bank(
        &strategy,
        &design,
        &bundle,
        extras,
        &settings.pipeline.train,
        test.as_ref().map(|(d, b)| TestSet { design: d, bundle: b }),
    )?;
    bank.save(&args.out_dir)?;
    io::write_json(&args.out_dir.join("train_report.json"), &reports)?;
    for (net, r) in bank.nets.iter().zip(&reports) {
        println!(
            "{} h={} train_mrp={:.4}{}",
            net.output_id,
            r.chosen_h,
            r.train_mrp,
            r.test_mrp.map(|t| format!(" test_mrp={t:.4}")).unwrap_or_default()
        );
    }
    rec.output(&args.out_dir);
    finish(rec, &args.out_dir)
}

fn write_report(report: &CalibrationReport, out: &Path) -> Result<()> {
    io::write_json(out, report)?;
    report.write_csv(&out.with_extension("csv"))
}

fn print_report(report: &CalibrationReport) {
    for c in &report.curves {
        let p: Vec<String> = c.identified.iter().map(|v| format!("{v:.4}")).collect();
        let flag = if c.extrapolated { " (extrapolated)" } else { "" };
        match c.response_error {
            Some(e) => println!("{}: p = [{}]{flag}, response error {e:.3}%", c.label, p.join(", ")),
            None => println!("{}: p = [{}]{flag}, not simulable", c.label, p.join(", ")),
        }
    }
}

fn validate_with(
    command: &str,
    method: Method<'_>,
    args: &ValidationArgs,
    cond: ThermalConditions,
    settings: &Settings,
    extra_input: Option<&Path>,
) -> Result<()> {
    let (bundle_path, out) = (&args.bundle, &args.out);
    let bundle = Bundle::read_csv(bundle_path)?;
    let curve = read_observed(&args.observed)?;
    let report = calibration::validate(method, &curve, &bundle, &settings.pipeline.optimizer, &cond)?;
    for w in report.curves.iter().flat_map(|c| &c.warnings) {
        eprintln!("warning: {w}");
    }
    write_report(&report, out)?;
    print_report(&report);
    let mut rec = Recorder::new(command, settings.seed);
    rec.config(&settings.pipeline.optimizer);
    rec.input(&args.observed.observed);
    rec.input(bundle_path);
    if let Some(p) = extra_input {
        rec.input(p);
    }
    rec.output(out);
    rec.output(&out.with_extension("csv"));
    finish(rec, out)
}

pub fn calibrate_cmd(args: &CalibrateArgs, settings: &Settings) -> Result<()> {
    let bank = SurrogateBank::load(&args.bank)?;
    if bank.id().kind() == StrategyKind::Inverse {
        return Err(Error::Config(format!(
            "{} is an inverse strategy; use `identify`",
            bank.id()
        )));
    }
    let cond = conditions(settings, None, None)?;
    validate_with(
        "calibrate",
        Method::Bank(&bank),
        &args.validation,
        cond,
        settings,
        Some(&args.bank),
    )
}

pub fn identify_cmd(args: &IdentifyArgs, settings: &Settings) -> Result<()> {
    let bank = SurrogateBank::load(&args.bank)?;
    if bank.id().kind() != StrategyKind::Inverse {
        return Err(Error::Config(format!(
            "{} is not an inverse strategy; use `calibrate`",
            bank.id()
        )));
    }
    let cond = conditions(settings, None, None)?;
    validate_with(
        "identify",
        Method::Bank(&bank),
        &args.validation,
        cond,
        settings,
        Some(&args.bank),
    )
}

pub fn direct_cmd(args: &DirectArgs, settings: &Settings) -> Result<()> {
    let f = match args.function.as_str() {
        "F1" | "f1" | "Direct1" => ErrorFunction::F1,
        "F2" | "f2" | "Direct2" => ErrorFunction::F2,
        other => return Err(Error::Config(format!("unknown error function `{other}`; use F1 or F2"))),
    };
    let cond = conditions(settings, args.temperature, args.activation_energy)?;
    validate_with("direct", Method::Direct(f), &args.validation, cond, settings, None)
}

pub fn pipeline_cmd(args: &PipelineArgs, settings: &Settings) -> Result<()> {
    let mut config = settings.pipeline.clone();
    if let Some(n) = args.n_train {
        config.n_train = n;
    }
    if let Some(n) = args.n_test {
        config.n_test = n;
    }
    let run = run_pipeline(args.strategy, &config)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let report_path = args.out_dir.join("report.json");
    io::write_json(&report_path, &run.report)?;
    run.report.test.write_csv(&args.out_dir.join("test.csv"))?;
    run.report.train.write_csv(&args.out_dir.join("train.csv"))?;
    run.bank.save(&args.out_dir.join("bank"))?;
    let summary = |name: &str, r: &CalibrationReport| {
        let pe = r.param_errors.unwrap_or_default();
        println!(
            "{name}: p errors [{:.2}, {:.2}, {:.2}, {:.2}]%, response error {}",
            pe[0],
            pe[1],
            pe[2],
            pe[3],
            r.response_error
                .map(|e| format!("{e:.3}%"))
                .unwrap_or_else(|| "n/a".into())
        );
    };
    summary("train", &run.report.train);
    summary("test", &run.report.test);
    let mut rec = Recorder::new("pipeline", settings.seed);
    rec.config(&config);
    rec.output(&args.out_dir);
    rec.output(&args.out_dir.join("bank"));
    finish(rec, &args.out_dir)
}

#[derive(Debug, Serialize)]
struct Row {
    source: String,
    strategy: String,
    set: String,
    errors: [Option<f64>; 4],
    response_error: Option<f64>,
}

fn rows_of(source: &str, value: &serde_json::Value) -> Result<Vec<Row>> {
    let bad = || Error::Parse {
        location: source.to_string(),
        message: "not a calibration or pipeline report".into(),
    };
    let one = |set: &str, v: &serde_json::Value| -> Result<Row> {
        let errors = match v.get("param_errors").and_then(|e| e.as_array()) {
            Some(a) if a.len() == 4 => [0, 1, 2, 3].map(|j| a[j].as_f64()),
            _ => [None; 4],
        };
        Ok(Row {
            source: source.to_string(),
            strategy: v.get("strategy").and_then(|s| s.as_str()).ok_or_else(bad)?.to_string(),
            set: set.to_string(),
            errors,
            response_error: v.get("response_error").and_then(|e| e.as_f64()),
        })
    };
    match (value.get("train"), value.get("test")) {
        (Some(train), Some(test)) => Ok(vec![one("train", train)?, one("test", test)?]),
        _ => {
            let mode = value.get("mode").and_then(|m| m.as_str()).ok_or_else(bad)?;
            Ok(vec![one(mode, value)?])
        }
    }
}

pub fn report_cmd(args: &ReportArgs, settings: &Settings) -> Result<()> {
    let mut rows = Vec::new();
    let mut rec = Recorder::new("report", settings.seed);
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: format!("{} line {}", path.display(), e.line()),
            message: e.to_string(),
        })?;
        rows.extend(rows_of(&path.display().to_string(), &value)?);
        rec.input(path);
    }
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    let mut out = String::from("source,strategy,set,err_p1,err_p2,err_p3,err_p4,err_alpha\n");
    println!(
        "{:<14} {:<12} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "strategy", "set", "p1", "p2", "p3", "p4", "alpha"
    );
    for r in &rows {
        let e: Vec<String> = r.errors.iter().map(|&v| opt(v)).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.source,
            r.strategy,
            r.set,
            e.join(","),
            opt(r.response_error)
        ));
        let short = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<14} {:<12} {:>8} {:>8} {:>8} {:>8} {:>9}",
            r.strategy,
            r.set,
            short(r.errors[0]),
            short(r.errors[1]),
            short(r.errors[2]),
            short(r.errors[3]),
            r.response_error
                .map(|x| format!("{x:.3}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    io::write_atomic(&args.out, out.as_bytes())?;
    rec.output(&args.out);
    finish(rec, &args.out)
}
