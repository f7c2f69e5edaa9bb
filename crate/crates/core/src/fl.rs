//! Federated-learning primitives: regularized empirical loss, the one-sample
//! SGD step each user runs locally, and sample-weighted averaging at the cloud.

use crate::error::{Error, Result};

/// Dense model parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams(Vec<f64>);

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "parameter {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(w, x)| w * x).sum()
    }
}

impl From<ModelParams> for Vec<f64> {
    fn from(p: ModelParams) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// The data held by one mobile user.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    samples: Vec<Sample>,
}

impl LocalDataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("dataset must hold at least one sample".into()));
        }
        let dim = samples[0].x.len();
        if samples.iter().any(|s| s.x.len() != dim) {
            return Err(Error::InvalidInput("samples have mixed dimensions".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn count(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }
}

/// Per-sample loss `l_i` applied to the margin `z = x·w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `½ (z − y)²`
    SquaredError,
    /// `ln(1 + exp(−y z))` with labels `y ∈ {−1, +1}`.
    Logistic,
}

impl LossKind {
    fn value(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::SquaredError => 0.5 * (z - y) * (z - y),
            LossKind::Logistic => softplus(-y * z),
        }
    }

    /// Derivative with respect to the margin.
    fn slope(self, z: f64, y: f64) -> f64 {
        match self {
            LossKind::SquaredError => z - y,
            LossKind::Logistic => -y * sigmoid(-y * z),
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Loss, L2 regularizer `r(w) = ½‖w‖²` with weight `xi`, and step size `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub loss: LossKind,
    pub xi: f64,
    pub eta: f64,
}

impl LossSpec {
    pub fn new(loss: LossKind, xi: f64, eta: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(Error::InvalidInput(format!("regularizer weight must be >= 0, got {xi}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!("learning rate must be > 0, got {eta}")));
        }
        Ok(Self { loss, xi, eta })
    }

    /// `l(x·w; y) + xi·r(w)` for a single sample.
    pub fn sample_loss(&self, w: &ModelParams, sample: &Sample) -> f64 {
        self.loss.value(w.dot(&sample.x), sample.y) + self.xi * l2_half(w.as_slice())
    }
}

fn l2_half(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Global objective: mean per-sample loss over every dataset plus `xi·r(w)`.
pub fn global_loss(w: &ModelParams, datasets: &[LocalDataset], spec: &LossSpec) -> Result<f64> {
    let mut total = KahanSum::default();
    let mut n = 0u64;
    for ds in datasets {
        if ds.dim() != w.dim() {
            return Err(Error::InvalidInput(format!(
                "dataset dimension {} does not match model dimension {}",
                ds.dim(),
                w.dim()
            )));
        }
        for s in ds.samples() {
            total.add(spec.loss.value(w.dot(&s.x), s.y));
        }
        n += ds.count();
    }
    if n == 0 {
        return Err(Error::InvalidInput("no samples".into()));
    }
    Ok(total.value() / n as f64 + spec.xi * l2_half(w.as_slice()))
}

/// One SGD step from the broadcast model `psi` on sample `sample_index`:
/// `psi − eta·(∇l_i(psi) + xi·∇r(psi))`.
pub fn local_sgd_update(
    psi: &ModelParams,
    dataset: &LocalDataset,
    spec: &LossSpec,
    sample_index: usize,
) -> Result<ModelParams> {
    let sample = dataset.samples().get(sample_index).ok_or_else(|| {
        Error::InvalidInput(format!(
            "sample index {sample_index} out of range for {} samples",
            dataset.count()
        ))
    })?;
    if sample.x.len() != psi.dim() {
        return Err(Error::InvalidInput(format!(
            "sample dimension {} does not match model dimension {}",
            sample.x.len(),
            psi.dim()
        )));
    }
    let slope = spec.loss.slope(psi.dot(&sample.x), sample.y);
    let next = psi
        .as_slice()
        .iter()
        .zip(&sample.x)
        .map(|(&w, &x)| w - spec.eta * (slope * x + spec.xi * w))
        .collect();
    ModelParams::new(next)
}

/// Sample-weighted mean of local models as computed by a cloud that receives
/// every user's model directly.
pub fn global_aggregate_star(locals: &[(u64, ModelParams)]) -> Result<ModelParams> {
    weighted_mean(locals.iter().map(|(n, w)| (*n, w.as_slice())))
}

/// `Σ n_k w_k / Σ n_k`, compensated per component, single division at the end.
///
/// Sums are taken relative to the first member's parameters, so a set of
/// identical models averages to exactly that model.
pub(crate) fn weighted_mean<'a, I>(items: I) -> Result<ModelParams>
where
    I: IntoIterator<Item = (u64, &'a [f64])>,
{
    let mut acc: Vec<KahanSum> = Vec::new();
    let mut reference: &[f64] = &[];
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    let mut total: u64 = 0;
    let mut dim = None;
    for (count, w) in items {
        if count == 0 {
            return Err(Error::InvalidInput("sample count must be >= 1".into()));
        }
        match dim {
            None => {
                dim = Some(w.len());
                acc = vec![KahanSum::default(); w.len()];
                reference = w;
                lo = w.to_vec();
                hi = w.to_vec();
            }
            Some(d) if d != w.len() => {
                return Err(Error::InvalidInput(format!(
                    "dimension mismatch: expected {d}, got {}",
                    w.len()
                )));
            }
            Some(_) => {}
        }
        let c = count as f64;
        for (j, (&v, &r)) in w.iter().zip(reference).enumerate() {
            acc[j].add(c * (v - r));
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
        total = total
            .checked_add(count)
            .ok_or_else(|| Error::InvalidInput("sample count overflow".into()))?;
    }
    if dim.is_none() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    let n = total as f64;
    ModelParams::new(
        acc.iter()
            .zip(reference)
            .enumerate()
            // the exact mean lies in [lo, hi]; clamp away the last-ulp rounding
            .map(|(j, (a, &r))| (r + a.value() / n).clamp(lo[j], hi[j]))
            .collect(),
    )
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
