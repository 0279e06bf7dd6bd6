//! Designs of experiments in the standardized parameter cube: optimized
//! Latin hypercubes for training and i.i.d. uniform designs for testing.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydration::StandardizedParams;
use crate::io;

pub const DEFAULT_LHS_MOVES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    LhsOptimized,
    UniformRandom,
}

/// A set of design points, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub points: Vec<Vec<f64>>,
    pub kind: DesignKind,
    pub seed: u64,
    /// Centered L2 discrepancy (squared form) of `points`.
    pub discrepancy: f64,
}

/// Sidecar metadata stored next to a design CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub kind: DesignKind,
    pub seed: u64,
    pub discrepancy: f64,
    pub n: usize,
    pub dim: usize,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Values of one coordinate over all points.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[j]).collect()
    }

    /// Interprets the rows as standardized model parameters.
    pub fn params(&self) -> Result<Vec<StandardizedParams>> {
        self.points.iter().map(|p| StandardizedParams::from_slice(p)).collect()
    }

    /// Per-column (min, max).
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|j| {
                self.points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[j]), hi.max(p[j]))
                    })
            })
            .collect()
    }

    pub fn hash(&self) -> String {
        io::hash_rows(&self.points)
    }

    pub fn meta(&self) -> DesignMeta {
        DesignMeta {
            kind: self.kind,
            seed: self.seed,
            discrepancy: self.discrepancy,
            n: self.len(),
            dim: self.dim(),
        }
    }

    pub fn meta_path(csv_path: &Path) -> PathBuf {
        let mut s = csv_path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    /// Writes `p1,...,pd` CSV plus a `.meta.json` sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("p{j}")).collect();
        io::write_matrix_csv(path, &header, &self.points)?;
        io::write_json(&Self::meta_path(path), &self.meta())
    }

    /// Reads a design CSV; the sidecar is optional; without it the design is
    /// treated as uniform random with seed 0 and its discrepancy recomputed.
    pub fn read(path: &Path) -> Result<Self> {
        let (header, points) = io::read_matrix_csv(path)?;
        for (j, h) in header.iter().enumerate() {
            if *h != format!("p{}", j + 1) {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("column {} must be named p{}, found `{h}`", j + 1, j + 1),
                ));
            }
        }
        let discrepancy = centered_l2_discrepancy(&points)?;
        let meta_path = Self::meta_path(path);
        let (kind, seed) = if meta_path.exists() {
            let meta: DesignMeta = serde_json::from_slice(&std::fs::read(&meta_path)?)?;
            (meta.kind, meta.seed)
        } else {
            (DesignKind::UniformRandom, 0)
        };
        Ok(Design {
            points,
            kind,
            seed,
            discrepancy,
        })
    }

    /// Builds a design from explicit points (e.g. a single inline parameter).
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let discrepancy = centered_l2_discrepancy(&points)?;
        Ok(Design {
            points,
            kind: DesignKind::UniformRandom,
            seed: 0,
            discrepancy,
        })
    }
}

/// Uniformity criterion minimised by the LHS optimiser.
pub trait SpaceFillingCriterion {
    fn score(&self, points: &[Vec<f64>]) -> Result<f64>;

    /// Change of the score if coordinate `col` of rows `a` and `b` were
    /// swapped. The default recomputes the full score.
    fn swap_delta(&self, points: &mut [Vec<f64>], col: usize, a: usize, b: usize) -> f64 {
        let before = self.score(points).unwrap_or(f64::INFINITY);
        swap_coord(points, col, a, b);
        let after = self.score(points).unwrap_or(f64::INFINITY);
        swap_coord(points, col, a, b);
        after - before
    }
}

fn swap_coord(points: &mut [Vec<f64>], col: usize, a: usize, b: usize) {
    let tmp = points[a][col];
    points[a][col] = points[b][col];
    points[b][col] = tmp;
}

/// Hickernell's centered L2 discrepancy, returned in squared form.
#[derive(Debug, Clone, Copy, Default)]
pub struct CenteredL2;

#[inline]
fn cl2_single(x: f64) -> f64 {
    let d = (x - 0.5).abs();
    1.0 + 0.5 * d - 0.5 * d * d
}

#[inline]
fn cl2_pair(x: f64, y: f64) -> f64 {
    1.0 + 0.5 * (x - 0.5).abs() + 0.5 * (y - 0.5).abs() - 0.5 * (x - y).abs()
}

impl CenteredL2 {
    fn pair_product(p: &[f64], q: &[f64]) -> f64 {
        p.iter().zip(q).map(|(&x, &y)| cl2_pair(x, y)).product()
    }

    /// Sum of every single and pair term touching rows `a` or `b`, weighted
    /// as they appear in the score.
    fn rows_part(points: &[Vec<f64>], a: usize, b: usize) -> f64 {
        let n = points.len() as f64;
        let single: f64 = [a, b]
            .iter()
            .map(|&i| points[i].iter().map(|&x| cl2_single(x)).product::<f64>())
            .sum();
        let mut pairs = 0.0;
        for q in points {
            pairs += Self::pair_product(&points[a], q) + Self::pair_product(&points[b], q);
        }
        pairs = 2.0 * pairs
            - Self::pair_product(&points[a], &points[a])
            - Self::pair_product(&points[b], &points[b])
            - 2.0 * Self::pair_product(&points[a], &points[b]);
        -2.0 / n * single + pairs / (n * n)
    }
}

impl SpaceFillingCriterion for CenteredL2 {
    fn score(&self, points: &[Vec<f64>]) -> Result<f64> {
        centered_l2_discrepancy(points)
    }

    fn swap_delta(&self, points: &mut [Vec<f64>], col: usize, a: usize, b: usize) -> f64 {
        let before = Self::rows_part(points, a, b);
        swap_coord(points, col, a, b);
        let after = Self::rows_part(points, a, b);
        swap_coord(points, col, a, b);
        after - before
    }
}

/// Squared centered L2 discrepancy of points in the unit cube.
pub fn centered_l2_discrepancy(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Shape("empty design".into()));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::Shape(format!(
                "row {i} has {} coordinates, expected {dim}",
                p.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("row {i}"), format!("{v} outside unit cube")));
        }
    }
    let nf = n as f64;
    let single: f64 = points
        .iter()
        .map(|p| p.iter().map(|&x| cl2_single(x)).product::<f64>())
        .sum();
    let mut pairs = 0.0;
    for p in points {
        for q in points {
            pairs += CenteredL2::pair_product(p, q);
        }
    }
    Ok((13.0f64 / 12.0).powi(dim as i32) - 2.0 / nf * single + pairs / (nf * nf))
}

/// Optimised LHS together with the score after each accepted move.
#[derive(Debug, Clone)]
pub struct LhsRun {
    pub design: Design,
    pub initial_discrepancy: f64,
    pub accepted_scores: Vec<f64>,
}

/// Latin hypercube with points at stratum centres, improved by greedy
/// within-column swaps.
pub fn generate_lhs(n: usize, dim: usize, seed: u64, iterations: usize) -> Result<Design> {
    Ok(generate_lhs_traced(n, dim, seed, iterations, &CenteredL2)?.design)
}

pub fn generate_lhs_traced(
    n: usize,
    dim: usize,
    seed: u64,
    iterations: usize,
    criterion: &dyn SpaceFillingCriterion,
) -> Result<LhsRun> {
    if n < 2 {
        return Err(Error::Config(format!("LHS needs n >= 2, got {n}")));
    }
    if dim < 1 {
        return Err(Error::Config("LHS needs dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            points[i][j] = (s as f64 + 0.5) / n as f64;
        }
    }
    let initial = criterion.score(&points)?;
    let mut current = initial;
    let mut accepted = Vec::new();
    for _ in 0..iterations {
        let col = rng.gen_range(0..dim);
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let delta = criterion.swap_delta(&mut points, col, a, b);
        if delta < 0.0 {
            swap_coord(&mut points, col, a, b);
            current += delta;
            accepted.push(current);
        }
    }
    let mut discrepancy = criterion.score(&points)?;
    if discrepancy > initial {
        // Accumulated rounding in the incremental updates can only matter when
        // no real improvement was found.
        discrepancy = initial;
    }
    Ok(LhsRun {
        design: Design {
            points,
            kind: DesignKind::LhsOptimized,
            seed,
            discrepancy,
        },
        initial_discrepancy: initial,
        accepted_scores: accepted,
    })
}

/// I.i.d. uniform design.
pub fn generate_random(n: usize, dim: usize, seed: u64) -> Result<Design> {
    if n < 1 {
        return Err(Error::Config("random design needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    let discrepancy = centered_l2_discrepancy(&points)?;
    Ok(Design {
        points,
        kind: DesignKind::UniformRandom,
        seed,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn strata_ok(d: &Design) -> bool {
        let n = d.len();
        (0..d.dim()).all(|j| {
            let mut s: Vec<usize> = d.column(j).iter().map(|x| (x * n as f64).floor() as usize).collect();
            s.sort_unstable();
            s == (0..n).collect::<Vec<_>>()
        })
    }

    #[test]
    fn one_dimensional_lhs_uses_centres() {
        let d = generate_lhs(4, 1, 3, 100).unwrap();
        let mut c = d.column(0);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn seeded_lhs_is_reproducible() {
        let a = generate_lhs(100, 4, 11, 2000).unwrap();
        let b = generate_lhs(100, 4, 11, 2000).unwrap();
        assert_eq!(a, b);
        assert!(strata_ok(&a));
        let c = generate_lhs(100, 4, 12, 2000).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn optimisation_never_worsens() {
        let run = generate_lhs_traced(30, 4, 5, 5000, &CenteredL2).unwrap();
        assert!(run.design.discrepancy <= run.initial_discrepancy);
        let mut prev = run.initial_discrepancy;
        for &s in &run.accepted_scores {
            assert!(s < prev);
            prev = s;
        }
        let recomputed = centered_l2_discrepancy(&run.design.points).unwrap();
        assert_relative_eq!(run.design.discrepancy, recomputed, max_relative = 1e-12);
        assert!(strata_ok(&run.design));
    }

    #[test]
    fn incremental_delta_matches_full_recompute() {
        let mut pts = generate_random(12, 3, 9).unwrap().points;
        let before = centered_l2_discrepancy(&pts).unwrap();
        let delta = CenteredL2.swap_delta(&mut pts, 1, 2, 7);
        swap_coord(&mut pts, 1, 2, 7);
        let after = centered_l2_discrepancy(&pts).unwrap();
        assert_relative_eq!(after - before, delta, epsilon = 1e-14);
    }

    #[test]
    fn optimised_beats_median_of_random_lhs() {
        // Brute-force oracle: the median discrepancy of 1000 unoptimised LHS.
        let opt = generate_lhs(8, 2, 1, DEFAULT_LHS_MOVES).unwrap();
        let mut scores: Vec<f64> = (0..1000)
            .map(|s| generate_lhs(8, 2, 10_000 + s, 0).unwrap().discrepancy)
            .collect();
        scores.sort_by(f64::total_cmp);
        assert!(opt.discrepancy <= scores[500]);
    }

    #[test]
    fn discrepancy_reference_values() {
        // Single centre point in 1D: 13/12 - 2 + 1 = 1/12.
        assert_relative_eq!(
            centered_l2_discrepancy(&[vec![0.5]]).unwrap(),
            1.0 / 12.0,
            epsilon = 1e-15
        );
        // Values computed with scipy.stats.qmc.discrepancy(method="CD").
        let pts = vec![vec![0.1, 0.7], vec![0.4, 0.2], vec![0.9, 0.55]];
        assert_relative_eq!(
            centered_l2_discrepancy(&pts).unwrap(),
            SCIPY_THREE_POINTS,
            max_relative = 1e-12
        );
    }

    const SCIPY_THREE_POINTS: f64 = 0.041_883_333_333_333_05;

    #[test]
    fn duplicates_score_worse_than_filled_stratum() {
        let dup = vec![vec![0.125], vec![0.125], vec![0.625], vec![0.875]];
        let filled = vec![vec![0.125], vec![0.375], vec![0.625], vec![0.875]];
        assert!(centered_l2_discrepancy(&dup).unwrap() > centered_l2_discrepancy(&filled).unwrap());
    }

    #[test]
    fn rejects_points_outside_cube() {
        assert!(centered_l2_discrepancy(&[vec![1.5]]).is_err());
        assert!(generate_lhs(1, 2, 0, 10).is_err());
    }

    #[test]
    fn random_design_properties() {
        let a = generate_random(1, 4, 42).unwrap();
        assert_eq!(a, generate_random(1, 4, 42).unwrap());
        let b = generate_random(50, 4, 1).unwrap();
        assert!(b.points.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        let big = generate_random(20_000, 4, 8).unwrap();
        for j in 0..4 {
            let mean = big.column(j).iter().sum::<f64>() / 2e4;
            assert!((mean - 0.5).abs() < 0.01, "{mean}");
        }
    }

    #[test]
    fn design_file_round_trip() {
        let d = generate_lhs(10, 4, 2, 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doe.csv");
        d.write(&path).unwrap();
        let back = Design::read(&path).unwrap();
        assert_eq!(back.points, d.points);
        assert_eq!(back.kind, DesignKind::LhsOptimized);
        assert_relative_eq!(back.discrepancy, d.discrepancy, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn discrepancy_is_permutation_invariant(seed in 0u64..1000) {
            let d = generate_random(9, 3, seed).unwrap();
            let mut rev = d.points.clone();
            rev.reverse();
            let a = centered_l2_discrepancy(&d.points).unwrap();
            let b = centered_l2_discrepancy(&rev).unwrap();
            prop_assert!((a - b).abs() <= 1e-14);
            prop_assert!(a >= 0.0);
        }
    }
}
