//! Verification on simulated data and validation on observed curves.
//!
//! Prediction errors are in percent and normalised by the spread of the
//! training data: per parameter for identified parameters, and over the
//! whole training bundle for responses.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::doe::Design;
use crate::error::{Error, Result};
use crate::hydration::{self, heat_to_alpha, simulate, Bundle, StandardizedParams, ThermalConditions, TimeGrid};
use crate::io;
use crate::optimizer::{self, OptimizerConfig};
use crate::parallel;
use crate::strategies::{ErrorFunction, StrategyKind, SurrogateBank};

/// Start-time corrections used for synthetic pseudo-experimental curves.
pub const SYNTHETIC_SHIFTS: [f64; 4] = [0.5, 1.0, 3.5, 4.5];
pub const DEFAULT_NOISE_SIGMA: f64 = 0.005;

/// A measured hydration curve. Corrected times are `times + time_shift`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedCurve {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub time_shift: f64,
}

impl ObservedCurve {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>, time_shift: f64) -> Result<Self> {
        let label = label.into();
        if times.is_empty() {
            return Err(Error::Data(format!("curve `{label}` has no observations")));
        }
        if times.len() != values.len() {
            return Err(Error::Data(format!(
                "curve `{label}` has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "curve `{label}`: times not strictly increasing at row {}",
                i + 2
            )));
        }
        if !(times[0] + time_shift > 0.0) || !time_shift.is_finite() {
            return Err(Error::Data(format!(
                "curve `{label}`: corrected start time {} is not positive",
                times[0] + time_shift
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("curve `{label}` contains non-finite values")));
        }
        Ok(ObservedCurve {
            label,
            times,
            values,
            time_shift,
        })
    }

    pub fn corrected_times(&self) -> Vec<f64> {
        self.times.iter().map(|t| t + self.time_shift).collect()
    }

    /// Reads `time_h,alpha`, or `time_h,heat_J_per_g` converted with `q_pot`.
    pub fn read_csv(path: &Path, time_shift: f64, q_pot: Option<f64>) -> Result<Self> {
        let (header, rows) = io::read_matrix_csv(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let cols: Vec<&str> = header.iter().map(String::as_str).collect();
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let second: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let values = match (cols.as_slice(), q_pot) {
            (["time_h", "alpha"], _) => second,
            (["time_h", "heat_J_per_g"], Some(q)) => heat_to_alpha(&second, q)?.alpha,
            (["time_h", "heat_J_per_g"], None) => {
                return Err(Error::Config(format!(
                    "{}: heat data needs the potential heat q_pot",
                    path.display()
                )))
            }
            _ => {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!(
                        "expected header `time_h,alpha` or `time_h,heat_J_per_g`, found `{}`",
                        header.join(",")
                    ),
                ))
            }
        };
        Self::new(label, times, values, time_shift)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.times.iter().zip(&self.values).map(|(&t, &v)| vec![t, v]).collect();
        io::write_matrix_csv(path, &["time_h".to_string(), "alpha".to_string()], &rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Interpolates the corrected observations linearly in log10 time at the
/// 1-based grid `indices` (all grid points if `None`). Values are held
/// constant after the last observation and, with a warning, before the
/// first.
pub fn resample_to_grid(obs: &ObservedCurve, grid: &TimeGrid, indices: Option<&[usize]>) -> Result<Resampled> {
    if obs.times.len() < 2 {
        return Err(Error::Data(format!(
            "curve `{}` needs at least 2 observations to interpolate",
            obs.label
        )));
    }
    let log_t: Vec<f64> = obs.corrected_times().iter().map(|t| t.log10()).collect();
    let all: Vec<usize>;
    let indices = match indices {
        Some(ix) => ix,
        None => {
            all = (1..=grid.len()).collect();
            &all
        }
    };
    let last = log_t.len() - 1;
    let mut before_first = 0;
    let mut values = Vec::with_capacity(indices.len());
    for &k in indices {
        let t = grid
            .time_at(k)
            .ok_or_else(|| Error::Shape(format!("grid has no component {k}")))?
            .log10();
        let v = if t >= log_t[last] {
            obs.values[last]
        } else if t <= log_t[0] {
            if t < log_t[0] {
                before_first += 1;
            }
            obs.values[0]
        } else {
            let hi = log_t.partition_point(|&x| x <= t);
            let lo = hi - 1;
            let w = (t - log_t[lo]) / (log_t[hi] - log_t[lo]);
            obs.values[lo] + w * (obs.values[hi] - obs.values[lo])
        };
        values.push(v);
    }
    let mut warnings = Vec::new();
    if before_first > 0 {
        warnings.push(format!(
            "curve `{}`: {before_first} grid points precede the first observation; held at the first value",
            obs.label
        ));
    }
    Ok(Resampled { values, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub label: String,
    pub p: [f64; 4],
    pub noise_sigma: f64,
    pub time_shift: f64,
    pub seed: u64,
}

/// Simulated measurement: observations at the default grid times of the
/// measurement clock, taken from the model at true time `t + time_shift`,
/// plus Gaussian noise.
pub fn synthetic_curve(spec: &SyntheticSpec, cond: &ThermalConditions) -> Result<ObservedCurve> {
    let clock = TimeGrid::default();
    let true_times: Vec<f64> = clock.times().iter().map(|t| t + spec.time_shift).collect();
    let grid = TimeGrid::from_times(true_times)?;
    let mut values = simulate(&StandardizedParams::new(spec.p)?, &grid, cond)?.alpha;
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::Config(format!("noise sigma {}: {e}", spec.noise_sigma)))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    ObservedCurve::new(spec.label.clone(), clock.times().to_vec(), values, spec.time_shift)
}

/// Mean absolute parameter error in percent of the training design spread.
pub fn parameter_errors(identified: &[[f64; 4]], truth: &[[f64; 4]], train_design: &Design) -> Result<[f64; 4]> {
    if identified.len() != truth.len() || identified.is_empty() {
        return Err(Error::Shape(format!(
            "{} identified vs {} true parameter sets",
            identified.len(),
            truth.len()
        )));
    }
    let ranges = train_design.column_ranges();
    let mut out = [0.0; 4];
    for (j, o) in out.iter_mut().enumerate() {
        let (lo, hi) = ranges[j];
        if !(hi > lo) {
            return Err(Error::DegenerateTarget(format!(
                "training design has no spread in p{}",
                j + 1
            )));
        }
        let sum: f64 = identified.iter().zip(truth).map(|(a, b)| (a[j] - b[j]).abs()).sum();
        *o = 100.0 * sum / (identified.len() as f64 * (hi - lo));
    }
    Ok(out)
}

/// Spread of the training responses over all samples and components.
/// Pre-onset components span only ~1e-5, so per-component spreads would
/// let them dominate the average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSpread(pub f64);

impl ResponseSpread {
    pub fn from_bundle(bundle: &Bundle) -> Self {
        let (lo, hi) = bundle
            .curves
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        ResponseSpread((hi - lo).max(0.0))
    }

    /// Mean absolute error over all components, in percent of the spread.
    pub fn error(&self, response: &[f64], reference: &[f64]) -> Result<f64> {
        if response.len() != reference.len() || response.is_empty() {
            return Err(Error::Shape(format!(
                "response lengths {} and {} differ or are empty",
                response.len(),
                reference.len()
            )));
        }
        if !(self.0 > 0.0) {
            return Err(Error::DegenerateTarget("training responses have no spread".into()));
        }
        let sum: f64 = response.iter().zip(reference).map(|(r, d)| (r - d).abs()).sum();
        Ok(100.0 * sum / (response.len() as f64 * self.0))
    }
}

/// How parameters are obtained from a curve.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Bank(&'a SurrogateBank),
    /// Simulator in the loop, minimising F1 (`Direct1`) or F2 (`Direct2`).
    Direct(ErrorFunction),
}

impl Method<'_> {
    pub fn name(&self) -> String {
        match self {
            Method::Bank(b) => b.id().to_string(),
            Method::Direct(ErrorFunction::F1) => "Direct1".into(),
            Method::Direct(ErrorFunction::F2) => "Direct2".into(),
        }
    }
}

/// Parameters identified from one full-grid curve, with the number of
/// objective evaluations spent.
pub fn identify(
    method: Method<'_>,
    curve: &[f64],
    config: &OptimizerConfig,
    grid: &TimeGrid,
    cond: &ThermalConditions,
) -> Result<([f64; 4], usize)> {
    match method {
        Method::Direct(f) => {
            let (p, r) = optimizer::direct_calibrate(curve, f, grid, cond, config)?;
            Ok((p.0, r.evaluations))
        }
        Method::Bank(bank) => match bank.id().kind() {
            StrategyKind::Inverse => Ok((bank.identify(curve)?, 0)),
            StrategyKind::Forward | StrategyKind::Error => {
                let (p, r) = optimizer::fit_surrogate_response(bank, curve, config)?;
                Ok((p.0, r.evaluations))
            }
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveResult {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_p: Option<[f64; 4]>,
    pub identified: [f64; 4],
    /// Per-parameter flag for values outside [0, 1].
    pub out_of_cube: [bool; 4],
    pub extrapolated: bool,
    /// Absent when the identified parameters cannot be simulated.
    pub response_error: Option<f64>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Deterministic cost counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TimingMeta {
    pub optimizer_evaluations: usize,
    pub simulations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub strategy: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param_errors: Option<[f64; 4]>,
    pub response_error: Option<f64>,
    pub unsimulated: usize,
    pub curves: Vec<CurveResult>,
    pub timing: TimingMeta,
}

impl CalibrationReport {
    /// One row per curve: identified and true parameters, flags and errors.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out =
            String::from("label,p1,p2,p3,p4,true_p1,true_p2,true_p3,true_p4,extrapolated,response_error,evaluations\n");
        let opt = |v: Option<f64>| v.map(io::fmt_f64).unwrap_or_default();
        for c in &self.curves {
            let truth = c.true_p.map(|p| p.map(Some)).unwrap_or([None; 4]);
            let fields: Vec<String> = std::iter::once(c.label.clone())
                .chain(c.identified.iter().map(|&v| io::fmt_f64(v)))
                .chain(truth.iter().map(|&v| opt(v)))
                .chain([
                    c.extrapolated.to_string(),
                    opt(c.response_error),
                    c.evaluations.to_string(),
                ])
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        io::write_atomic(path, out.as_bytes())
    }
}

fn simulate_response(p: [f64; 4], grid: &TimeGrid, cond: &ThermalConditions) -> Option<Vec<f64>> {
    let phys = StandardizedParams::unbounded(p).to_physical_unchecked();
    if !phys.is_physical() {
        return None;
    }
    hydration::simulate_physical(&phys, grid, cond, &Default::default())
        .ok()
        .map(|c| c.alpha)
}

fn curve_result(
    label: String,
    true_p: Option<[f64; 4]>,
    identified: [f64; 4],
    evaluations: usize,
    response_error: Option<f64>,
    warnings: Vec<String>,
) -> CurveResult {
    let out_of_cube = identified.map(|v| !(0.0..=1.0).contains(&v));
    CurveResult {
        label,
        true_p,
        identified,
        extrapolated: out_of_cube.iter().any(|&b| b),
        out_of_cube,
        response_error,
        evaluations,
        warnings,
    }
}

fn mean_response(curves: &[CurveResult]) -> (Option<f64>, usize) {
    let errs: Vec<f64> = curves.iter().filter_map(|c| c.response_error).collect();
    let missing = curves.len() - errs.len();
    let mean = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
    (mean, missing)
}

/// Verification on simulated curves with known parameters. Sample `i` is
/// optimised with seed `derive_seed(config.seed, i)`.
pub fn verify(
    method: Method<'_>,
    train_design: &Design,
    train_bundle: &Bundle,
    design: &Design,
    bundle: &Bundle,
    config: &OptimizerConfig,
    cond: &ThermalConditions,
) -> Result<CalibrationReport> {
    if design.len() != bundle.len() {
        return Err(Error::Shape(format!(
            "design has {} rows, bundle has {} curves",
            design.len(),
            bundle.len()
        )));
    }
    if let Method::Bank(b) = method {
        if b.id().kind() == StrategyKind::Error {
            return Err(Error::Config(format!(
                "{} needs one bank per observed curve; use validation instead",
                b.id()
            )));
        }
    }
    let spread = ResponseSpread::from_bundle(train_bundle);
    let grid = &bundle.grid;
    let curves = parallel::try_map_range(design.len(), |i| {
        let cfg = OptimizerConfig {
            seed: parallel::derive_seed(config.seed, i as u64),
            ..config.clone()
        };
        let (p, evals) = identify(method, &bundle.curves[i], &cfg, grid, cond)?;
        let err = match simulate_response(p, grid, cond) {
            Some(sim) => Some(spread.error(&sim, &bundle.curves[i])?),
            None => None,
        };
        let truth: [f64; 4] = design.points[i]
            .as_slice()
            .try_into()
            .map_err(|_| Error::Shape("design rows must have 4 columns".into()))?;
        Ok::<_, Error>(curve_result(
            format!("sample_{}", i + 1),
            Some(truth),
            p,
            evals,
            err,
            Vec::new(),
        ))
    })?;
    let identified: Vec<[f64; 4]> = curves.iter().map(|c| c.identified).collect();
    let truth: Vec<[f64; 4]> = curves.iter().filter_map(|c| c.true_p).collect();
    let (response_error, unsimulated) = mean_response(&curves);
    Ok(CalibrationReport {
        strategy: method.name(),
        mode: "verification".into(),
        param_errors: Some(parameter_errors(&identified, &truth, train_design)?),
        response_error,
        unsimulated,
        timing: TimingMeta {
            optimizer_evaluations: curves.iter().map(|c| c.evaluations).sum(),
            simulations: curves.len(),
        },
        curves,
    })
}

/// Validation against one observed curve.
pub fn validate(
    method: Method<'_>,
    obs: &ObservedCurve,
    train_bundle: &Bundle,
    config: &OptimizerConfig,
    cond: &ThermalConditions,
) -> Result<CalibrationReport> {
    let grid = &train_bundle.grid;
    let resampled = resample_to_grid(obs, grid, None)?;
    if let Method::Bank(b) = method {
        if b.id().kind() == StrategyKind::Error {
            let expected = io::hash_rows(std::slice::from_ref(&resampled.values));
            if b.provenance.observed_hash.as_deref() != Some(expected.as_str()) {
                return Err(Error::Config(format!(
                    "{} bank was not trained against curve `{}`",
                    b.id(),
                    obs.label
                )));
            }
        }
    }
    let spread = ResponseSpread::from_bundle(train_bundle);
    let (p, evals) = identify(method, &resampled.values, config, grid, cond)?;
    let err = match simulate_response(p, grid, cond) {
        Some(sim) => Some(spread.error(&sim, &resampled.values)?),
        None => None,
    };
    let curve = curve_result(obs.label.clone(), None, p, evals, err, resampled.warnings);
    Ok(CalibrationReport {
        strategy: method.name(),
        mode: "validation".into(),
        param_errors: None,
        response_error: curve.response_error,
        unsimulated: usize::from(curve.response_error.is_none()),
        timing: TimingMeta {
            optimizer_evaluations: evals,
            simulations: 1,
        },
        curves: vec![curve],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::generate_lhs;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn obs(times: Vec<f64>, values: Vec<f64>) -> ObservedCurve {
        ObservedCurve::new("t", times, values, 0.0).unwrap()
    }

    #[test]
    fn resampling_on_grid_points_is_identity() {
        let grid = TimeGrid::default();
        let values: Vec<f64> = (0..grid.len()).map(|i| (i as f64 / 2000.0).sqrt()).collect();
        let o = obs(grid.times().to_vec(), values.clone());
        let r = resample_to_grid(&o, &grid, None).unwrap();
        assert_eq!(r.values, values);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn constant_extrapolation_after_last_point() {
        let grid = TimeGrid::default();
        let o = obs(vec![0.01, 1.0, 10.0], vec![0.0, 0.3, 0.6]);
        let r = resample_to_grid(&o, &grid, None).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            if t >= 10.0 {
                assert_eq!(r.values[k], 0.6);
            }
        }
    }

    #[test]
    fn log_midpoint_is_arithmetic_mean() {
        let grid = TimeGrid::from_times(vec![1.0, 10.0, 100.0]).unwrap();
        let o = obs(vec![1.0, 100.0], vec![0.2, 0.6]);
        let r = resample_to_grid(&o, &grid, Some(&[2])).unwrap();
        assert_relative_eq!(r.values[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn leading_gap_warns_and_holds_first_value() {
        let grid = TimeGrid::default();
        let o = ObservedCurve::new("late", vec![0.5, 2.0, 50.0], vec![0.1, 0.2, 0.7], 1.0).unwrap();
        let r = resample_to_grid(&o, &grid, None).unwrap();
        assert_eq!(r.values[0], 0.1);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn observed_curve_validation() {
        assert!(matches!(
            ObservedCurve::new("e", vec![], vec![], 0.0),
            Err(Error::Data(_))
        ));
        assert!(ObservedCurve::new("d", vec![1.0, 1.0], vec![0.1, 0.2], 0.0).is_err());
        assert!(ObservedCurve::new("s", vec![1.0, 2.0], vec![0.1, 0.2], -1.5).is_err());
        let one = ObservedCurve::new("one", vec![1.0], vec![0.1], 0.0).unwrap();
        assert!(matches!(
            resample_to_grid(&one, &TimeGrid::default(), None),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn curve_csv_round_trip_and_heat_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let o = obs(vec![0.5, 1.0, 4.0], vec![0.01, 0.05, 0.3]);
        o.write_csv(&path).unwrap();
        let back = ObservedCurve::read_csv(&path, 0.0, None).unwrap();
        assert_eq!(back.values, o.values);
        std::fs::write(&path, "time_h,heat_J_per_g\n1,50\n2,100\n").unwrap();
        assert!(ObservedCurve::read_csv(&path, 0.0, None).is_err());
        let heat = ObservedCurve::read_csv(&path, 0.0, Some(500.0)).unwrap();
        assert_relative_eq!(heat.values[1], 0.2);
    }

    #[test]
    fn synthetic_shift_is_undone_by_correction() {
        let cond = ThermalConditions::default();
        let p = [0.4, 0.5, 0.3, 0.6];
        let spec = SyntheticSpec {
            label: "s".into(),
            p,
            noise_sigma: 0.0,
            time_shift: 0.0,
            seed: 1,
        };
        let c0 = synthetic_curve(&spec, &cond).unwrap();
        let sim = simulate(&StandardizedParams::new(p).unwrap(), &TimeGrid::default(), &cond).unwrap();
        assert_eq!(c0.values, sim.alpha);

        let shifted = synthetic_curve(
            &SyntheticSpec {
                time_shift: 3.5,
                ..spec.clone()
            },
            &cond,
        )
        .unwrap();
        let r = resample_to_grid(&shifted, &TimeGrid::default(), None).unwrap();
        for (k, &t) in TimeGrid::default().times().iter().enumerate() {
            if t > 5.0 {
                assert!((r.values[k] - sim.alpha[k]).abs() < 1e-4, "t={t}");
            }
        }
        let noisy = synthetic_curve(
            &SyntheticSpec {
                noise_sigma: 0.005,
                ..spec
            },
            &cond,
        )
        .unwrap();
        let resid: Vec<f64> = noisy.values.iter().zip(&sim.alpha).map(|(a, b)| a - b).collect();
        let sd = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
        assert!((sd - 0.005).abs() < 0.0005, "{sd}");
    }

    #[test]
    fn parameter_error_examples() {
        let design = generate_lhs(10, 4, 1, 0).unwrap();
        let p = [[0.1, 0.2, 0.3, 0.4], [0.5, 0.5, 0.5, 0.5]];
        assert_eq!(parameter_errors(&p, &p, &design).unwrap(), [0.0; 4]);
        let shifted: Vec<[f64; 4]> = p.iter().map(|r| r.map(|v| v + 0.09)).collect();
        // Stratum centres span 0.05..0.95.
        for e in parameter_errors(&shifted, &p, &design).unwrap() {
            assert_relative_eq!(e, 10.0, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn parameter_error_is_order_invariant(seed in 0u64..500) {
            use rand::Rng;
            let design = generate_lhs(8, 4, seed, 0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<[f64; 4]> = (0..7).map(|_| [(); 4].map(|_| rng.gen::<f64>())).collect();
            let b: Vec<[f64; 4]> = (0..7).map(|_| [(); 4].map(|_| rng.gen::<f64>())).collect();
            let e1 = parameter_errors(&a, &b, &design).unwrap();
            let (mut ra, mut rb) = (a.clone(), b.clone());
            ra.reverse();
            rb.reverse();
            let e2 = parameter_errors(&ra, &rb, &design).unwrap();
            for j in 0..4 {
                prop_assert!((e1[j] - e2[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn response_error_uses_global_spread() {
        let s = ResponseSpread(0.5);
        assert_relative_eq!(s.error(&[0.1, 0.0, 0.2], &[0.0, 0.0, 0.0]).unwrap(), 100.0 * 0.1 / 0.5);
        assert!(ResponseSpread(0.0).error(&[1.0], &[0.0]).is_err());
        assert!(s.error(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn direct_validation_on_clean_synthetic_curve() {
        let cond = ThermalConditions::default();
        let design = generate_lhs(20, 4, 3, 100).unwrap();
        let bundle = hydration::simulate_bundle(&design.params().unwrap(), &TimeGrid::default(), &cond).unwrap();
        let spec = SyntheticSpec {
            label: "clean".into(),
            p: [0.6, 0.4, 0.5, 0.3],
            noise_sigma: 0.0,
            time_shift: 0.0,
            seed: 0,
        };
        let o = synthetic_curve(&spec, &cond).unwrap();
        let cfg = OptimizerConfig {
            budget: 3000,
            seed: 2,
            ..OptimizerConfig::default()
        };
        let rep = validate(Method::Direct(ErrorFunction::F1), &o, &bundle, &cfg, &cond).unwrap();
        assert_eq!(rep.strategy, "Direct1");
        let c = &rep.curves[0];
        assert!(!c.extrapolated);
        assert!(rep.response_error.unwrap() < 1.0, "{rep:?}");
        assert_eq!(rep.timing.optimizer_evaluations, 3000);
    }
}
