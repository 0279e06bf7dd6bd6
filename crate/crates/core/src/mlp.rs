//! One-hidden-layer perceptron with sigmoid hidden units.
//!
//! # Weight layout
//!
//! Weights are stored in one flat vector, hidden layer first:
//!
//! * hidden block: `n_hidden` rows of `n_inputs + 1` values,
//!   `[bias, w_1, ..., w_n_inputs]` for each hidden neuron;
//! * output block: `n_outputs` rows of `n_hidden + 1` values,
//!   `[bias, w_1, ..., w_n_hidden]` for each output neuron.
//!
//! The network operates in scaled space: inputs are mapped affinely to
//! [0, 1] and targets to [0.1, 0.9] using training minima and maxima, and
//! outputs are mapped back before being returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const INPUT_RANGE: (f64, f64) = (0.0, 1.0);
pub const OUTPUT_RANGE: (f64, f64) = (0.1, 0.9);
pub const INIT_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetTopology {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl NetTopology {
    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Result<Self> {
        let t = NetTopology {
            n_inputs,
            n_hidden,
            n_outputs,
            hidden_activation: HiddenActivation::Sigmoid,
            output_activation: OutputActivation::Sigmoid,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_output(mut self, act: OutputActivation) -> Self {
        self.output_activation = act;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_hidden == 0 || self.n_outputs == 0 {
            return Err(Error::Config(format!("layer sizes must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        (self.n_inputs + 1) * self.n_hidden + (self.n_hidden + 1) * self.n_outputs
    }

    fn hidden_len(&self) -> usize {
        (self.n_inputs + 1) * self.n_hidden
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Per-dimension affine map from `[min, max]` onto `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Scaler {
    /// Fits to row-per-sample data.
    pub fn fit(rows: &[Vec<f64>], (lo, hi): (f64, f64)) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Shape("no samples".into()))?;
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape("ragged sample matrix".into()));
            }
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self::new(min, max, lo, hi)
    }

    pub fn new(min: Vec<f64>, max: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Shape("scaler min/max lengths differ".into()));
        }
        if !(hi > lo) {
            return Err(Error::Config(format!("scaler target range [{lo}, {hi}] is empty")));
        }
        for (j, (a, b)) in min.iter().zip(&max).enumerate() {
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Err(Error::DegenerateTarget(format!(
                    "dimension {j} has range [{a}, {b}]; scaler would not be invertible"
                )));
            }
        }
        Ok(Scaler { min, max, lo, hi })
    }

    /// Identity map on each dimension (`[lo, hi]` onto itself).
    pub fn identity(dim: usize, lo: f64, hi: f64) -> Self {
        Scaler {
            min: vec![lo; dim],
            max: vec![hi; dim],
            lo,
            hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        self.lo + (self.hi - self.lo) * (v - self.min[j]) / (self.max[j] - self.min[j])
    }

    #[inline]
    pub fn unscale(&self, j: usize, s: f64) -> f64 {
        self.min[j] + (s - self.lo) * (self.max[j] - self.min[j]) / (self.hi - self.lo)
    }

    pub fn range(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }
}

/// Training metadata carried inside network files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub output_id: Option<String>,
    #[serde(default)]
    pub train_mrp: Option<f64>,
    #[serde(default)]
    pub test_mrp: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub topology: NetTopology,
    pub weights: Vec<f64>,
    pub input_scaler: Scaler,
    pub output_scaler: Scaler,
    #[serde(default)]
    pub provenance: Provenance,
}

/// Samples mapped into the network's scaled space, stored row-major.
#[derive(Debug, Clone)]
pub struct ScaledBatch {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl ScaledBatch {
    pub fn len(&self) -> usize {
        self.t.len() / self.n_outputs
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> ScaledBatch {
        let mut x = Vec::with_capacity(rows.len() * self.n_inputs);
        let mut t = Vec::with_capacity(rows.len() * self.n_outputs);
        for &r in rows {
            x.extend_from_slice(&self.x[r * self.n_inputs..(r + 1) * self.n_inputs]);
            t.extend_from_slice(&self.t[r * self.n_outputs..(r + 1) * self.n_outputs]);
        }
        ScaledBatch {
            n_inputs: self.n_inputs,
            n_outputs: self.n_outputs,
            x,
            t,
        }
    }
}

/// Work buffers for one evaluation.
struct Scratch {
    hidden: Vec<f64>,
    out: Vec<f64>,
    d_out: Vec<f64>,
}

impl Scratch {
    fn new(topo: &NetTopology) -> Self {
        Scratch {
            hidden: vec![0.0; topo.n_hidden],
            out: vec![0.0; topo.n_outputs],
            d_out: vec![0.0; topo.n_outputs],
        }
    }
}

#[inline]
fn forward_scaled(topo: &NetTopology, w: &[f64], x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
    let ni = topo.n_inputs;
    let (wh, wo) = w.split_at(topo.hidden_len());
    for (j, h) in hidden.iter_mut().enumerate() {
        let row = &wh[j * (ni + 1)..(j + 1) * (ni + 1)];
        let mut u = row[0];
        for (wk, xk) in row[1..].iter().zip(x) {
            u += wk * xk;
        }
        *h = sigmoid(u);
    }
    let nh = topo.n_hidden;
    for (o, y) in out.iter_mut().enumerate() {
        let row = &wo[o * (nh + 1)..(o + 1) * (nh + 1)];
        let mut v = row[0];
        for (wk, hk) in row[1..].iter().zip(hidden.iter()) {
            v += wk * hk;
        }
        *y = match topo.output_activation {
            OutputActivation::Sigmoid => sigmoid(v),
            OutputActivation::Linear => v,
        };
    }
}

/// Loss, absolute-error sum and (optionally) the accumulated gradient of
/// `sum (y - t)^2` over a scaled batch.
pub(crate) fn loss_and_gradient(
    topo: &NetTopology,
    w: &[f64],
    batch: &ScaledBatch,
    mut grad: Option<&mut [f64]>,
) -> (f64, f64) {
    let mut s = Scratch::new(topo);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let (ni, nh, no) = (topo.n_inputs, topo.n_hidden, topo.n_outputs);
    let hl = topo.hidden_len();
    let mut loss = 0.0;
    let mut abs_sum = 0.0;
    for r in 0..batch.len() {
        let x = &batch.x[r * ni..(r + 1) * ni];
        let t = &batch.t[r * no..(r + 1) * no];
        forward_scaled(topo, w, x, &mut s.hidden, &mut s.out);
        for o in 0..no {
            let e = s.out[o] - t[o];
            loss += e * e;
            abs_sum += e.abs();
            let dy = 2.0 * e;
            s.d_out[o] = match topo.output_activation {
                OutputActivation::Sigmoid => dy * s.out[o] * (1.0 - s.out[o]),
                OutputActivation::Linear => dy,
            };
        }
        let Some(g) = grad.as_deref_mut() else {
            continue;
        };
        let (gh, go) = g.split_at_mut(hl);
        let wo = &w[hl..];
        for o in 0..no {
            let dv = s.d_out[o];
            let grow = &mut go[o * (nh + 1)..(o + 1) * (nh + 1)];
            grow[0] += dv;
            for (gk, hk) in grow[1..].iter_mut().zip(&s.hidden) {
                *gk += dv * hk;
            }
        }
        for j in 0..nh {
            let mut dz = 0.0;
            for o in 0..no {
                dz += s.d_out[o] * wo[o * (nh + 1) + 1 + j];
            }
            let du = dz * s.hidden[j] * (1.0 - s.hidden[j]);
            let grow = &mut gh[j * (ni + 1)..(j + 1) * (ni + 1)];
            grow[0] += du;
            for (gk, xk) in grow[1..].iter_mut().zip(x) {
                *gk += du * xk;
            }
        }
    }
    (loss, abs_sum)
}

impl NeuralNet {
    pub fn new(topology: NetTopology, weights: Vec<f64>, input_scaler: Scaler, output_scaler: Scaler) -> Result<Self> {
        let net = NeuralNet {
            topology,
            weights,
            input_scaler,
            output_scaler,
            provenance: Provenance::default(),
        };
        net.validate("")?;
        Ok(net)
    }

    /// Weights drawn uniformly from [-0.5, 0.5].
    pub fn random(topology: NetTopology, input_scaler: Scaler, output_scaler: Scaler, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..topology.weight_count())
            .map(|_| rng.gen_range(-INIT_HALF_WIDTH..=INIT_HALF_WIDTH))
            .collect();
        Self::new(topology, weights, input_scaler, output_scaler)
    }

    fn validate(&self, path: &str) -> Result<()> {
        self.topology.validate()?;
        let expected = self.topology.weight_count();
        if self.weights.len() != expected {
            return Err(Error::parse(
                format!("{path}weights"),
                format!("expected {expected} weights, found {}", self.weights.len()),
            ));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::parse(format!("{path}weights"), "non-finite weight"));
        }
        for (name, sc, dim) in [
            ("input_scaler", &self.input_scaler, self.topology.n_inputs),
            ("output_scaler", &self.output_scaler, self.topology.n_outputs),
        ] {
            if sc.dim() != dim {
                return Err(Error::parse(
                    format!("{path}{name}"),
                    format!("scaler has {} dimensions, topology needs {dim}", sc.dim()),
                ));
            }
            Scaler::new(sc.min.clone(), sc.max.clone(), sc.lo, sc.hi)
                .map_err(|e| Error::parse(format!("{path}{name}"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    /// Raw inputs to raw outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.topology.n_inputs {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.topology.n_inputs
            )));
        }
        let xs: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| self.input_scaler.scale(j, v))
            .collect();
        let mut hidden = vec![0.0; self.topology.n_hidden];
        let mut out = vec![0.0; self.topology.n_outputs];
        forward_scaled(&self.topology, &self.weights, &xs, &mut hidden, &mut out);
        Ok(out
            .iter()
            .enumerate()
            .map(|(o, &y)| self.output_scaler.unscale(o, y))
            .collect())
    }

    /// First output for a raw input; panics on a length mismatch.
    pub fn predict1(&self, x: &[f64]) -> f64 {
        self.forward(x).expect("input length matches topology")[0]
    }

    /// Maps raw samples into scaled space with this network's scalers.
    pub fn scale_batch(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<ScaledBatch> {
        if inputs.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let (ni, no) = (self.topology.n_inputs, self.topology.n_outputs);
        let mut x = Vec::with_capacity(inputs.len() * ni);
        let mut t = Vec::with_capacity(inputs.len() * no);
        for (xi, ti) in inputs.iter().zip(targets) {
            if xi.len() != ni || ti.len() != no {
                return Err(Error::Shape(format!(
                    "sample has {}/{} values, expected {ni}/{no}",
                    xi.len(),
                    ti.len()
                )));
            }
            x.extend(xi.iter().enumerate().map(|(j, &v)| self.input_scaler.scale(j, v)));
            t.extend(ti.iter().enumerate().map(|(j, &v)| self.output_scaler.scale(j, v)));
        }
        Ok(ScaledBatch {
            n_inputs: ni,
            n_outputs: no,
            x,
            t,
        })
    }

    /// Loss `sum (y_s - t_s)^2` in scaled space and its exact gradient.
    pub fn gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let batch = self.scale_batch(inputs, targets)?;
        let mut g = vec![0.0; self.weight_count()];
        let (loss, _) = loss_and_gradient(&self.topology, &self.weights, &batch, Some(&mut g));
        Ok((loss, g))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = NetDocument {
            format_version: FORMAT_VERSION,
            topology: self.topology,
            weights: self.weights.clone(),
            input_scaler: self.input_scaler.clone(),
            output_scaler: self.output_scaler.clone(),
            provenance: self.provenance.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .ok_or_else(|| Error::parse("format_version", "missing field"))?;
        let found = found
            .as_u64()
            .ok_or_else(|| Error::parse("format_version", "must be an unsigned integer"))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::UnsupportedVersion {
                found: found as u32,
                expected: FORMAT_VERSION,
            });
        }
        let doc: NetDocument = serde_path_to_error::deserialize(value)
            .map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))?;
        let net = NeuralNet {
            topology: doc.topology,
            weights: doc.weights,
            input_scaler: doc.input_scaler,
            output_scaler: doc.output_scaler,
            provenance: doc.provenance,
        };
        net.validate("")?;
        Ok(net)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct NetDocument {
    format_version: u32,
    topology: NetTopology,
    weights: Vec<f64>,
    input_scaler: Scaler,
    output_scaler: Scaler,
    #[serde(default)]
    provenance: Provenance,
}
