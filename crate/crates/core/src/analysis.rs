//! Sampling-based sensitivity analysis and principal component analysis of
//! response bundles.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parallel;

/// Ranks starting at 1, ties replaced by their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Shape("need at least 2 samples".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant input vector".into()))
}

/// Spearman coefficients between each input and each response column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMatrix {
    /// `rho[i][j]` for input `i` and response column `j`; `None` where a
    /// column is constant and the coefficient undefined.
    pub rho: Vec<Vec<Option<f64>>>,
    pub column_labels: Vec<String>,
}

impl SensitivityMatrix {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("param");
        for l in &self.column_labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, row) in self.rho.iter().enumerate() {
            out.push_str(&format!("p{}", i + 1));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&io::fmt_f64(*v));
                }
            }
            out.push('\n');
        }
        io::write_atomic(path, out.as_bytes())
    }
}

/// Sensitivity of every response column to every design coordinate.
/// `inputs` and `responses` are row-per-sample.
pub fn sensitivity_table(
    inputs: &[Vec<f64>],
    responses: &[Vec<f64>],
    column_labels: Vec<String>,
) -> Result<SensitivityMatrix> {
    if inputs.len() != responses.len() {
        return Err(Error::Shape(format!(
            "{} design rows but {} response rows",
            inputs.len(),
            responses.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::Shape("need at least 2 samples".into()));
    }
    let m = responses[0].len();
    if column_labels.len() != m {
        return Err(Error::Shape(format!("{} labels for {m} columns", column_labels.len())));
    }
    let dim = inputs[0].len();
    let input_ranks: Vec<Vec<f64>> = (0..dim)
        .map(|i| average_ranks(&inputs.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect();
    let columns: Vec<Vec<Option<f64>>> = parallel::map_range(m, |j| {
        let col: Vec<f64> = responses.iter().map(|r| r[j]).collect();
        let ranks = average_ranks(&col);
        input_ranks.iter().map(|xr| pearson(xr, &ranks)).collect()
    });
    let rho = (0..dim).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(SensitivityMatrix { rho, column_labels })
}

/// Linear PCA of a response bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal components, one row per component.
    #[serde(skip)]
    pub basis: Vec<Vec<f64>>,
    /// Component variances (divisor N - 1), non-increasing.
    pub variances: Vec<f64>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fraction of total variance per component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.variances.iter().sum();
        self.variances
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect()
    }

    /// Coefficients of `curve - mean` on the first `n` components (all if `None`).
    pub fn project(&self, curve: &[f64], n: Option<usize>) -> Result<Vec<f64>> {
        if curve.len() != self.dim() {
            return Err(Error::Shape(format!(
                "curve has {} values, model expects {}",
                curve.len(),
                self.dim()
            )));
        }
        let n = n.unwrap_or(self.n_components());
        if n > self.n_components() {
            return Err(Error::Shape(format!(
                "requested {n} components, model has {}",
                self.n_components()
            )));
        }
        Ok(self.basis[..n]
            .iter()
            .map(|b| b.iter().zip(curve).zip(&self.mean).map(|((b, c), m)| b * (c - m)).sum())
            .collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (b, &c) in self.basis.iter().zip(coeffs) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += c * v;
            }
        }
        out
    }

    /// Writes `<stem>.json` (mean, variances) and `<stem>_basis.csv`.
    pub fn write(&self, json_path: &Path, basis_path: &Path) -> Result<()> {
        io::write_json(json_path, self)?;
        let header: Vec<String> = (1..=self.n_components()).map(|j| format!("pc{j}")).collect();
        let rows: Vec<Vec<f64>> = (0..self.dim())
            .map(|k| self.basis.iter().map(|b| b[k]).collect())
            .collect();
        io::write_matrix_csv(basis_path, &header, &rows)
    }

    pub fn read(json_path: &Path, basis_path: &Path) -> Result<Self> {
        let mut model: PcaModel = serde_json::from_slice(&std::fs::read(json_path)?)?;
        let (header, rows) = io::read_matrix_csv(basis_path)?;
        if rows.len() != model.dim() {
            return Err(Error::parse(
                basis_path.display().to_string(),
                format!("{} basis rows, mean has {}", rows.len(), model.dim()),
            ));
        }
        model.basis = (0..header.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(model)
    }
}

/// Fits a PCA via the SVD of the mean-centred data matrix.
pub fn pca_fit(responses: &[Vec<f64>]) -> Result<PcaModel> {
    let n = responses.len();
    if n < 2 {
        return Err(Error::Shape(format!("PCA needs at least 2 samples, got {n}")));
    }
    let t = responses[0].len();
    if responses.iter().any(|r| r.len() != t) {
        return Err(Error::Shape("ragged response matrix".into()));
    }
    let mut mean = vec![0.0; t];
    for r in responses {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    // Columns are samples, so the left singular vectors live in response space.
    let x = DMatrix::from_fn(t, n, |k, i| responses[i][k] - mean[k]);
    let svd = x.svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Config("SVD did not return vectors".into()))?;
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let s_max = order.first().map_or(0.0, |&i| sigma[i]);
    // Scale by the raw data too, so rounding residue of identical rows is dropped.
    let magnitude = responses.iter().flatten().fold(0.0f64, |a, v| a + v * v).sqrt();
    let cutoff = s_max.max(magnitude) * n.max(t) as f64 * f64::EPSILON;
    let mut basis = Vec::new();
    let mut variances = Vec::new();
    for &i in &order {
        let s = sigma[i];
        if !(s > cutoff) || s == 0.0 {
            break;
        }
        let mut v: Vec<f64> = u.column(i).iter().copied().collect();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        basis.push(v);
        variances.push(s * s / (n - 1) as f64);
    }
    let warning = basis
        .is_empty()
        .then(|| "all responses identical; model has zero components".to_string());
    Ok(PcaModel {
        mean,
        basis,
        variances,
        n_samples: n,
        warning,
    })
}
