//! Affinity hydration model: parameters, time grids and the forward
//! simulator for the degree of hydration.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parallel;

/// Universal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;
/// Reference temperature of the affinity, degrees Celsius.
pub const REFERENCE_TEMPERATURE_C: f64 = 25.0;
const KELVIN_OFFSET: f64 = 273.15;

/// Parameter bounds, in order b1, b2, eta_bar, alpha_inf.
pub const LOWER_BOUNDS: [f64; 4] = [0.1, 1e-6, 2.0, 0.7];
pub const UPPER_BOUNDS: [f64; 4] = [1.0, 1e-3, 12.0, 1.0];
pub const PARAM_NAMES: [&str; 4] = ["b1", "b2", "eta_bar", "alpha_inf"];

/// Relative slack allowed on bound checks so that round trips through the
/// standardized space do not trip on the last ulp.
const BOUND_SLACK: f64 = 1e-12;

/// Physical parameters of the affinity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Rate coefficient, 1/h.
    pub b1: f64,
    /// Chemical coefficient.
    pub b2: f64,
    /// Microdiffusion exponent.
    pub eta_bar: f64,
    /// Ultimate degree of hydration.
    pub alpha_inf: f64,
}

impl PhysicalParams {
    /// Creates parameters, checking the calibration bounds.
    pub fn new(b1: f64, b2: f64, eta_bar: f64, alpha_inf: f64) -> Result<Self> {
        let p = PhysicalParams {
            b1,
            b2,
            eta_bar,
            alpha_inf,
        };
        p.check_bounds()?;
        Ok(p)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b1, self.b2, self.eta_bar, self.alpha_inf]
    }

    fn check_bounds(&self) -> Result<()> {
        for (i, v) in self.as_array().into_iter().enumerate() {
            let (lo, hi) = (LOWER_BOUNDS[i], UPPER_BOUNDS[i]);
            let slack = BOUND_SLACK * hi.abs();
            if !v.is_finite() || v < lo - slack || v > hi + slack {
                return Err(Error::domain(PARAM_NAMES[i], format!("{v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Whether the parameters define a well-posed rate law, even if they lie
    /// outside the calibration bounds.
    pub fn is_physical(&self) -> bool {
        self.b1 > 0.0
            && self.b2 > 0.0
            && self.eta_bar.is_finite()
            && self.alpha_inf > 0.0
            && self.alpha_inf.is_finite()
            && self.b1.is_finite()
            && self.b2.is_finite()
    }

    /// Maps into the unit cube.
    pub fn standardize(&self) -> Result<StandardizedParams> {
        self.check_bounds()?;
        let p = [
            (self.b1 - 0.1) / 0.9,
            (self.b2.log10() + 6.0) / 3.0,
            (self.eta_bar - 2.0) / 10.0,
            (self.alpha_inf - 0.7) / 0.3,
        ];
        Ok(StandardizedParams(p.map(|v| v.clamp(0.0, 1.0))))
    }
}

/// Parameters scaled to the unit cube. Components may lie outside [0, 1]
/// only when constructed through [`StandardizedParams::unbounded`], as
/// happens for extrapolating inverse surrogates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizedParams(pub [f64; 4]);

impl StandardizedParams {
    /// Checked constructor: every component in [0, 1].
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for (i, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("p{}", i + 1), format!("{v} outside [0, 1]")));
            }
        }
        Ok(StandardizedParams(p))
    }

    /// Unchecked constructor for extrapolated estimates.
    pub fn unbounded(p: [f64; 4]) -> Self {
        StandardizedParams(p)
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let arr: [f64; 4] = p
            .try_into()
            .map_err(|_| Error::Shape(format!("expected 4 parameters, got {}", p.len())))?;
        Self::new(arr)
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn in_cube(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Maps back to physical parameters; components must lie in [0, 1].
    pub fn destandardize(&self) -> Result<PhysicalParams> {
        Self::new(self.0)?;
        Ok(self.to_physical_unchecked())
    }

    /// Applies the inverse relations without bound checks.
    pub fn to_physical_unchecked(&self) -> PhysicalParams {
        let [p1, p2, p3, p4] = self.0;
        PhysicalParams {
            b1: 0.1 + 0.9 * p1,
            b2: 10f64.powf(3.0 * p2 - 6.0),
            eta_bar: 2.0 + 10.0 * p3,
            alpha_inf: 0.7 + 0.3 * p4,
        }
    }
}

/// Isothermal conditions for the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConditions {
    /// Degrees Celsius.
    pub temperature: f64,
    /// J/mol.
    pub activation_energy: f64,
}

impl Default for ThermalConditions {
    fn default() -> Self {
        ThermalConditions {
            temperature: REFERENCE_TEMPERATURE_C,
            activation_energy: 0.0,
        }
    }
}

impl ThermalConditions {
    pub fn new(temperature: f64, activation_energy: f64) -> Result<Self> {
        if !(temperature > -KELVIN_OFFSET) || !temperature.is_finite() {
            return Err(Error::domain(
                "temperature",
                format!("{temperature} below absolute zero"),
            ));
        }
        if !(activation_energy >= 0.0) || !activation_energy.is_finite() {
            return Err(Error::domain(
                "activation_energy",
                format!("{activation_energy} must be non-negative"),
            ));
        }
        Ok(ThermalConditions {
            temperature,
            activation_energy,
        })
    }
}

/// Arrhenius scaling of the 25 degC affinity to the given temperature.
pub fn arrhenius_factor(cond: &ThermalConditions) -> f64 {
    let reference = 1.0 / (KELVIN_OFFSET + REFERENCE_TEMPERATURE_C);
    let actual = 1.0 / (KELVIN_OFFSET + cond.temperature);
    (cond.activation_energy / GAS_CONSTANT * (reference - actual)).exp()
}

#[inline]
fn rate(alpha: f64, phys: &PhysicalParams) -> f64 {
    let ainf = phys.alpha_inf;
    phys.b1 * (phys.b2 / ainf + alpha) * (ainf - alpha) * (-phys.eta_bar * alpha / ainf).exp()
}

/// Normalized chemical affinity at 25 degC, 1/h.
pub fn affinity25(alpha: f64, phys: &PhysicalParams) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::domain("alpha", format!("{alpha} is negative")));
    }
    if alpha > phys.alpha_inf {
        return Err(Error::domain(
            "alpha",
            format!("{alpha} exceeds alpha_inf = {}", phys.alpha_inf),
        ));
    }
    Ok(rate(alpha, phys))
}

/// Ordered simulation times in hours, uniformly spaced in log10(t).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Arc<[f64]>,
}

pub const DEFAULT_GRID_POINTS: usize = 1161;
pub const DEFAULT_T_MIN_H: f64 = 1e-2;
/// Long enough for most curves to approach alpha_inf. A window ending at
/// 1e3 h leaves alpha_inf confounded with eta_bar in the slow curves.
pub const DEFAULT_T_MAX_H: f64 = 1e5;

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::log_uniform(DEFAULT_T_MIN_H, DEFAULT_T_MAX_H, DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

impl TimeGrid {
    pub fn log_uniform(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0) || !(t_max > t_min) {
            return Err(Error::domain(
                "grid",
                format!("need 0 < t_min < t_max, got {t_min}, {t_max}"),
            ));
        }
        if count < 2 {
            return Err(Error::domain("grid", "need at least 2 points"));
        }
        let (a, b) = (t_min.log10(), t_max.log10());
        let step = (b - a) / (count - 1) as f64;
        let mut times: Vec<f64> = (0..count).map(|k| 10f64.powf(a + step * k as f64)).collect();
        times[0] = t_min;
        times[count - 1] = t_max;
        Ok(TimeGrid { times: times.into() })
    }

    /// Arbitrary strictly increasing positive times.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || !(times[0] > 0.0) {
            return Err(Error::domain("grid", "times must be positive and non-empty"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("grid", "times must be strictly increasing"));
        }
        Ok(TimeGrid { times: times.into() })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time at a 1-based grid index, the convention used for response
    /// components throughout the toolkit.
    pub fn time_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.times.get(i).copied())
    }
}

/// Degree of hydration sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HydrationCurve {
    pub grid: TimeGrid,
    pub alpha: Vec<f64>,
}

impl HydrationCurve {
    /// Value at a 1-based component index.
    pub fn component(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.alpha.get(i).copied())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .grid
            .times()
            .iter()
            .zip(&self.alpha)
            .map(|(&t, &a)| vec![t, a])
            .collect();
        io::write_matrix_csv(path, &["time_h".into(), "alpha".into()], &rows)
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Absolute step-doubling tolerance on alpha per grid interval.
    pub tolerance: f64,
    /// Maximum RK4 substeps per grid interval.
    pub max_substeps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tolerance: 1e-8,
            max_substeps: 1 << 16,
        }
    }
}

#[inline]
fn rk4_span(alpha0: f64, t0: f64, t1: f64, substeps: usize, phys: &PhysicalParams, scale: f64) -> f64 {
    let h = (t1 - t0) / substeps as f64;
    let mut a = alpha0;
    for _ in 0..substeps {
        let k1 = scale * rate(a, phys);
        let k2 = scale * rate(a + 0.5 * h * k1, phys);
        let k3 = scale * rate(a + 0.5 * h * k2, phys);
        let k4 = scale * rate(a + h * k3, phys);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    a
}

/// Simulates alpha(t) from alpha(0) = 0 at t = 0 with the default integrator.
pub fn simulate(p: &StandardizedParams, grid: &TimeGrid, cond: &ThermalConditions) -> Result<HydrationCurve> {
    simulate_with(p, grid, cond, &IntegratorConfig::default())
}

pub fn simulate_with(
    p: &StandardizedParams,
    grid: &TimeGrid,
    cond: &ThermalConditions,
    integrator: &IntegratorConfig,
) -> Result<HydrationCurve> {
    let phys = p.to_physical_unchecked();
    if !phys.is_physical() {
        return Err(Error::domain(
            "params",
            format!("{:?} maps to non-physical {:?}", p.0, phys),
        ));
    }
    simulate_physical(&phys, grid, cond, integrator)
}

/// Adaptive RK4: each grid interval is integrated with n and 2n substeps,
/// doubling n until the two results agree within the tolerance.
pub fn simulate_physical(
    phys: &PhysicalParams,
    grid: &TimeGrid,
    cond: &ThermalConditions,
    integrator: &IntegratorConfig,
) -> Result<HydrationCurve> {
    let scale = arrhenius_factor(cond);
    let mut alpha = Vec::with_capacity(grid.len());
    let mut a = 0.0;
    let mut t_prev = 0.0;
    let mut n = 1usize;
    for (interval, &t) in grid.times().iter().enumerate() {
        let mut coarse = rk4_span(a, t_prev, t, n, phys, scale);
        loop {
            let fine = rk4_span(a, t_prev, t, 2 * n, phys, scale);
            let err = (fine - coarse).abs();
            if err <= integrator.tolerance {
                a = fine;
                if err < integrator.tolerance / 64.0 && n > 1 {
                    n /= 2;
                }
                break;
            }
            if !err.is_finite() || 4 * n > integrator.max_substeps {
                return Err(Error::Integrator {
                    interval,
                    residual: err,
                    substeps: 2 * n,
                });
            }
            n *= 2;
            coarse = fine;
        }
        alpha.push(a);
        t_prev = t;
    }
    Ok(HydrationCurve {
        grid: grid.clone(),
        alpha,
    })
}

/// Fixed number of RK4 substeps per grid interval; used for convergence
/// studies.
pub fn simulate_fixed(
    p: &StandardizedParams,
    grid: &TimeGrid,
    cond: &ThermalConditions,
    substeps: usize,
) -> HydrationCurve {
    let phys = p.to_physical_unchecked();
    let scale = arrhenius_factor(cond);
    let mut a = 0.0;
    let mut t_prev = 0.0;
    let alpha = grid
        .times()
        .iter()
        .map(|&t| {
            a = rk4_span(a, t_prev, t, substeps.max(1), &phys, scale);
            t_prev = t;
            a
        })
        .collect();
    HydrationCurve {
        grid: grid.clone(),
        alpha,
    }
}

/// Responses of many simulations on a shared grid; one row per simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub grid: TimeGrid,
    pub curves: Vec<Vec<f64>>,
}

impl Bundle {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Column of values at a 1-based component index.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.curves.iter().map(|c| c[k - 1]).collect()
    }

    /// Per-component (min, max) over the bundle.
    pub fn component_ranges(&self) -> Vec<(f64, f64)> {
        let n_time = self.grid.len();
        (0..n_time)
            .map(|k| {
                self.curves
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                        (lo.min(c[k]), hi.max(c[k]))
                    })
            })
            .collect()
    }

    pub fn hash(&self) -> String {
        io::hash_rows(&self.curves)
    }

    /// CSV with a `time_h` column followed by `alpha_<i>` columns.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["time_h".to_string()];
        header.extend((1..=self.curves.len()).map(|i| format!("alpha_{i}")));
        let rows: Vec<Vec<f64>> = self
            .grid
            .times()
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let mut row = Vec::with_capacity(self.curves.len() + 1);
                row.push(t);
                row.extend(self.curves.iter().map(|c| c[k]));
                row
            })
            .collect();
        io::write_matrix_csv(path, &header, &rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (header, rows) = io::read_matrix_csv(path)?;
        if header.first().map(String::as_str) != Some("time_h") {
            return Err(Error::parse(
                path.display().to_string(),
                "first column must be `time_h`",
            ));
        }
        let n = header.len() - 1;
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let grid = TimeGrid::from_times(times)?;
        let curves = (0..n).map(|i| rows.iter().map(|r| r[i + 1]).collect()).collect();
        Ok(Bundle { grid, curves })
    }
}

/// Simulates every point of a design, in parallel.
pub fn simulate_bundle(points: &[StandardizedParams], grid: &TimeGrid, cond: &ThermalConditions) -> Result<Bundle> {
    let curves = parallel::map(points, |p| simulate(p, grid, cond).map(|c| c.alpha))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Bundle {
        grid: grid.clone(),
        curves,
    })
}

/// Result of converting calorimetric heat to hydration degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatConversion {
    pub alpha: Vec<f64>,
    /// Set when any value falls outside [0, 1]. Values are never clamped.
    pub out_of_range: bool,
}

/// Converts cumulative heat (J/g) to degree of hydration via Q / Q_pot.
pub fn heat_to_alpha(heat: &[f64], q_pot: f64) -> Result<HeatConversion> {
    if !(q_pot > 0.0) || !q_pot.is_finite() {
        return Err(Error::domain("q_pot", format!("{q_pot} must be positive")));
    }
    let alpha: Vec<f64> = heat.iter().map(|&q| q / q_pot).collect();
    let out_of_range = alpha.iter().any(|a| !(0.0..=1.0).contains(a));
    Ok(HeatConversion { alpha, out_of_range })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mid() -> StandardizedParams {
        StandardizedParams([0.5; 4])
    }

    #[test]
    fn standardize_bounds_and_midpoint() {
        let lo = PhysicalParams::new(0.1, 1e-6, 2.0, 0.7).unwrap();
        assert_eq!(lo.standardize().unwrap().0, [0.0; 4]);
        let hi = PhysicalParams::new(1.0, 1e-3, 12.0, 1.0).unwrap();
        assert_eq!(hi.standardize().unwrap().0, [1.0; 4]);
        let m = PhysicalParams::new(0.55, 10f64.powf(-4.5), 7.0, 0.85).unwrap();
        let p = m.standardize().unwrap().0;
        for v in p {
            assert_relative_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_out_of_bounds_naming_field() {
        let err = PhysicalParams::new(0.5, 2e-3, 5.0, 0.8).unwrap_err().to_string();
        assert!(err.contains("b2"), "{err}");
        let err = PhysicalParams::new(0.5, 1e-4, 5.0, 1.2).unwrap_err().to_string();
        assert!(err.contains("alpha_inf"), "{err}");
    }

    #[test]
    fn destandardize_known_points() {
        let lo = StandardizedParams([0.0; 4]).destandardize().unwrap();
        assert_relative_eq!(lo.b1, 0.1);
        assert_relative_eq!(lo.b2, 1e-6, max_relative = 1e-14);
        assert_relative_eq!(lo.eta_bar, 2.0);
        assert_relative_eq!(lo.alpha_inf, 0.7);
        let hi = StandardizedParams([1.0; 4]).destandardize().unwrap();
        assert_relative_eq!(hi.b1, 1.0);
        assert_relative_eq!(hi.b2, 1e-3, max_relative = 1e-14);
        assert_relative_eq!(hi.eta_bar, 12.0);
        assert_relative_eq!(hi.alpha_inf, 1.0);
        let m = mid().destandardize().unwrap();
        assert_relative_eq!(m.b1, 0.55);
        assert_relative_eq!(m.b2, 10f64.powf(-4.5), max_relative = 1e-14);
        assert_relative_eq!(m.eta_bar, 7.0);
        assert_relative_eq!(m.alpha_inf, 0.85);
        assert!(StandardizedParams::unbounded([0.5, 1.2, 0.5, 0.5])
            .destandardize()
            .is_err());
    }

    proptest! {
        #[test]
        fn standardize_round_trip(p in proptest::array::uniform4(0.0f64..=1.0)) {
            let back = StandardizedParams(p).destandardize().unwrap().standardize().unwrap();
            for i in 0..4 {
                prop_assert!((back.0[i] - p[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn affinity_endpoints(p in proptest::array::uniform4(0.0f64..=1.0)) {
            let phys = StandardizedParams(p).destandardize().unwrap();
            let a0 = affinity25(0.0, &phys).unwrap();
            prop_assert!((a0 - phys.b1 * phys.b2).abs() <= 1e-15 * phys.b1 * phys.b2 * 4.0);
            prop_assert_eq!(affinity25(phys.alpha_inf, &phys).unwrap(), 0.0);
        }

        #[test]
        fn simulated_curves_are_monotone_and_bounded(p in proptest::array::uniform4(0.0f64..=1.0)) {
            let grid = TimeGrid::default();
            let c = simulate(&StandardizedParams(p), &grid, &ThermalConditions::default()).unwrap();
            let ainf = StandardizedParams(p).to_physical_unchecked().alpha_inf;
            prop_assert_eq!(c.alpha.len(), grid.len());
            prop_assert!(c.alpha[0] >= 0.0);
            for w in c.alpha.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!(c.alpha.iter().all(|&a| a < ainf + 1e-8));
        }

        #[test]
        fn arrhenius_monotone_in_temperature(t in -50.0f64..100.0, dt in 0.1f64..50.0, ea in 1.0f64..1e5) {
            let a = arrhenius_factor(&ThermalConditions::new(t, ea).unwrap());
            let b = arrhenius_factor(&ThermalConditions::new(t + dt, ea).unwrap());
            prop_assert!(b > a);
        }
    }

    #[test]
    fn affinity_hand_value() {
        // b1 (b2/ainf + a)(ainf - a) exp(-eta a / ainf) at a = 0.4,
        // b1 = 0.5, b2 = 1e-4, eta = 7, ainf = 0.85, evaluated with mpmath
        // at 30 digits: 0.5 * (1e-4/0.85 + 0.4) * 0.45 * exp(-7*0.4/0.85).
        let phys = PhysicalParams::new(0.5, 1e-4, 7.0, 0.85).unwrap();
        let v = affinity25(0.4, &phys).unwrap();
        assert_relative_eq!(v, 3.3400510712809456e-3, max_relative = 1e-13);
        assert!(affinity25(0.9, &phys).is_err());
    }

    #[test]
    fn arrhenius_reference_cases() {
        assert_eq!(arrhenius_factor(&ThermalConditions::new(25.0, 40_000.0).unwrap()), 1.0);
        assert_eq!(arrhenius_factor(&ThermalConditions::new(60.0, 0.0).unwrap()), 1.0);
        // Inverting the factor 1.651 at 35 degC gives E_a = 38.30 kJ/mol.
        let ea = GAS_CONSTANT * 1.651f64.ln() / (1.0 / 298.15 - 1.0 / 308.15);
        assert!((ea - 38_300.0).abs() < 10.0, "{ea}");
        let f = arrhenius_factor(&ThermalConditions::new(35.0, 38_300.0).unwrap());
        assert!((f - 1.651).abs() < 1e-3, "{f}");
        assert!(ThermalConditions::new(-300.0, 0.0).is_err());
        assert!(ThermalConditions::new(20.0, -1.0).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = TimeGrid::default();
        assert_eq!(g.len(), 1161);
        assert_eq!(g.times()[0], 1e-2);
        assert_eq!(g.times()[1160], 1e5);
        let logs: Vec<f64> = g.times().iter().map(|t| t.log10()).collect();
        let d0 = logs[1] - logs[0];
        for w in logs.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-12);
        }
        assert_eq!(g.time_at(1), Some(1e-2));
        assert_eq!(g.time_at(0), None);
    }

    #[test]
    fn small_time_limit_matches_euler_oracle() {
        // Explicit Euler with tiny steps on [0, t]; independent of the RK4 path.
        let p = mid();
        let phys = p.to_physical_unchecked();
        let grid = TimeGrid::log_uniform(1e-3, 1e-2, 5).unwrap();
        let c = simulate(&p, &grid, &ThermalConditions::default()).unwrap();
        let t_end = 1e-2;
        let steps = 200_000;
        let h = t_end / steps as f64;
        let mut a = 0.0;
        for _ in 0..steps {
            a += h
                * phys.b1
                * (phys.b2 / phys.alpha_inf + a)
                * (phys.alpha_inf - a)
                * (-phys.eta_bar * a / phys.alpha_inf).exp();
        }
        assert_relative_eq!(c.alpha[4], a, max_relative = 1e-5);
        assert_relative_eq!(c.alpha[0], phys.b1 * phys.b2 * 1e-3, max_relative = 1e-2);
    }

    #[test]
    fn halving_step_changes_little() {
        let grid = TimeGrid::default();
        let cond = ThermalConditions::default();
        let tight = IntegratorConfig {
            tolerance: 1e-10,
            ..Default::default()
        };
        let a = simulate(&mid(), &grid, &cond).unwrap();
        let b = simulate_with(&mid(), &grid, &cond, &tight).unwrap();
        let diff = a
            .alpha
            .iter()
            .zip(&b.alpha)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn fixed_step_fourth_order() {
        let grid = TimeGrid::default();
        let cond = ThermalConditions::default();
        let c1 = simulate_fixed(&mid(), &grid, &cond, 1);
        let c2 = simulate_fixed(&mid(), &grid, &cond, 2);
        let c4 = simulate_fixed(&mid(), &grid, &cond, 4);
        let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ratio = sup(&c1.alpha, &c2.alpha) / sup(&c2.alpha, &c4.alpha);
        assert!(ratio >= 8.0, "{ratio}");
    }

    #[test]
    fn integrator_failure_reports_residual() {
        let grid = TimeGrid::default();
        let cfg = IntegratorConfig {
            tolerance: 1e-30,
            max_substeps: 8,
        };
        match simulate_with(&mid(), &grid, &ThermalConditions::default(), &cfg) {
            Err(Error::Integrator { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected integrator error, got {other:?}"),
        }
    }

    #[test]
    fn arrhenius_scaling_speeds_up_hydration() {
        let grid = TimeGrid::default();
        let hot = ThermalConditions::new(35.0, 38_300.0).unwrap();
        let a = simulate(&mid(), &grid, &ThermalConditions::default()).unwrap();
        let b = simulate(&mid(), &grid, &hot).unwrap();
        assert!(b.alpha[600] > a.alpha[600]);
    }

    #[test]
    fn heat_conversion() {
        assert_eq!(heat_to_alpha(&[0.0], 500.0).unwrap().alpha, vec![0.0]);
        assert_eq!(heat_to_alpha(&[250.0], 500.0).unwrap().alpha, vec![0.5]);
        let c = heat_to_alpha(&[500.0, 510.0], 500.0).unwrap();
        assert_eq!(c.alpha, vec![1.0, 1.02]);
        assert!(c.out_of_range);
        assert!(!heat_to_alpha(&[100.0], 500.0).unwrap().out_of_range);
        assert!(heat_to_alpha(&[1.0], 0.0).is_err());
    }

    #[test]
    fn bundle_csv_round_trip() {
        let grid = TimeGrid::log_uniform(0.1, 100.0, 20).unwrap();
        let pts = vec![mid(), StandardizedParams([0.1, 0.9, 0.3, 0.7])];
        let b = simulate_bundle(&pts, &grid, &ThermalConditions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.csv");
        b.write_csv(&path).unwrap();
        let back = Bundle::read_csv(&path).unwrap();
        assert_eq!(back, b);
    }
}
