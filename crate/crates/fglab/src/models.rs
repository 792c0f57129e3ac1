//! Differentiable classifiers: multinomial logistic regression (MCLR)
//! and a one-hidden-layer ReLU perceptron (MLP), both over flattened
//! parameter vectors.
//!
//! Losses are mean softmax cross-entropy; gradients are analytic and
//! checked against central finite differences in the tests. The MCLR
//! loss is convex in its parameters, which the bound-verification
//! harness relies on.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, ParamVector, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mclr,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    /// 0 for MCLR.
    pub hidden_units: usize,
}

impl ModelSpec {
    pub fn mclr(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mclr,
            input_dim,
            num_classes,
            hidden_units: 0,
        }
    }

    pub fn mlp(input_dim: usize, num_classes: usize, hidden_units: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_units,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self.kind {
            ModelKind::Mclr => self.input_dim * self.num_classes + self.num_classes,
            ModelKind::Mlp => {
                self.input_dim * self.hidden_units
                    + self.hidden_units
                    + self.hidden_units * self.num_classes
                    + self.num_classes
            }
        }
    }
}

/// A model's parameters: its shape descriptor plus a flat coordinate
/// vector.
///
/// Flat layout (row-major, inputs outer): MCLR is `[W (D x C), b (C)]`;
/// MLP is `[W1 (D x H), b1 (H), W2 (H x C), b2 (C)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    spec: ModelSpec,
    flat: ParamVector,
}

impl ModelParams {
    /// All-zero parameters (the deterministic MCLR start).
    pub fn zeros(spec: ModelSpec) -> Self {
        ModelParams {
            flat: ParamVector::zeros(spec.parameter_count()),
            spec,
        }
    }

    /// Reproducible initialization: MCLR starts at zero; MLP weights
    /// are uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)) and
    /// zero biases.
    pub fn init(spec: ModelSpec, rng: &mut RngStream) -> Self {
        match spec.kind {
            ModelKind::Mclr => ModelParams::zeros(spec),
            ModelKind::Mlp => {
                let mut flat = vec![0.0; spec.parameter_count()];
                let (d, h, c) = (spec.input_dim, spec.hidden_units, spec.num_classes);
                let s1 = (6.0 / (d + h) as f64).sqrt();
                for w in flat.iter_mut().take(d * h) {
                    *w = rng.random_range(-s1..s1);
                }
                let s2 = (6.0 / (h + c) as f64).sqrt();
                let off = d * h + h;
                for w in flat.iter_mut().skip(off).take(h * c) {
                    *w = rng.random_range(-s2..s2);
                }
                ModelParams {
                    spec,
                    flat: ParamVector::from_vec(flat),
                }
            }
        }
    }

    pub fn from_flat(spec: ModelSpec, flat: ParamVector) -> Result<Self> {
        if flat.dim() != spec.parameter_count() {
            return Err(Error::DimMismatch {
                expected: spec.parameter_count(),
                got: flat.dim(),
            });
        }
        Ok(ModelParams { spec, flat })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn flat(&self) -> &ParamVector {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut ParamVector {
        &mut self.flat
    }

    pub fn into_flat(self) -> ParamVector {
        self.flat
    }
}

/// A batch of labeled examples.
#[derive(Debug, Clone)]
pub struct Batch {
    features: DenseMatrix,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: DenseMatrix, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        Ok(Batch { features, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Sub-batch of the given rows.
    pub fn select(&self, indices: &[usize]) -> Result<Batch> {
        let mut features = DenseMatrix::zeros(indices.len(), self.feature_dim());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            features.row_mut(r).copy_from_slice(self.feature_row(i));
            labels.push(self.label(i));
        }
        Batch::new(features, labels)
    }
}

fn check_batch(p: &ModelParams, b: &Batch) -> Result<()> {
    if b.feature_dim() != p.spec.input_dim {
        return Err(Error::DimMismatch {
            expected: p.spec.input_dim,
            got: b.feature_dim(),
        });
    }
    if let Some(&bad) = b.labels.iter().find(|&&l| l >= p.spec.num_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {} classes",
            p.spec.num_classes
        )));
    }
    Ok(())
}

/// log(sum(exp(z))) with the max subtracted, plus softmax probabilities.
fn softmax_into(logits: &[f64], probs: &mut [f64]) -> f64 {
    let zmax = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - zmax).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    zmax + sum.ln()
}

struct McLrView<'a> {
    w: &'a [f64],
    b: &'a [f64],
}

fn mclr_view(p: &ModelParams) -> McLrView<'_> {
    let d = p.spec.input_dim;
    let c = p.spec.num_classes;
    let flat = p.flat.as_slice();
    McLrView {
        w: &flat[..d * c],
        b: &flat[d * c..d * c + c],
    }
}

struct MlpView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

fn mlp_view(p: &ModelParams) -> MlpView<'_> {
    let d = p.spec.input_dim;
    let h = p.spec.hidden_units;
    let c = p.spec.num_classes;
    let flat = p.flat.as_slice();
    MlpView {
        w1: &flat[..d * h],
        b1: &flat[d * h..d * h + h],
        w2: &flat[d * h + h..d * h + h + h * c],
        b2: &flat[d * h + h + h * c..],
    }
}

fn logits_into(p: &ModelParams, x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
    let c = p.spec.num_classes;
    match p.spec.kind {
        ModelKind::Mclr => {
            let v = mclr_view(p);
            logits.copy_from_slice(v.b);
            for (d, &xd) in x.iter().enumerate() {
                if xd == 0.0 {
                    continue;
                }
                let row = &v.w[d * c..(d + 1) * c];
                for (l, &w) in logits.iter_mut().zip(row) {
                    *l += xd * w;
                }
            }
        }
        ModelKind::Mlp => {
            let h = p.spec.hidden_units;
            let v = mlp_view(p);
            hidden.copy_from_slice(v.b1);
            for (d, &xd) in x.iter().enumerate() {
                if xd == 0.0 {
                    continue;
                }
                let row = &v.w1[d * h..(d + 1) * h];
                for (a, &w) in hidden.iter_mut().zip(row) {
                    *a += xd * w;
                }
            }
            for a in hidden.iter_mut() {
                if *a < 0.0 {
                    *a = 0.0;
                }
            }
            logits.copy_from_slice(v.b2);
            for (j, &hj) in hidden.iter().enumerate() {
                if hj == 0.0 {
                    continue;
                }
                let row = &v.w2[j * c..(j + 1) * c];
                for (l, &w) in logits.iter_mut().zip(row) {
                    *l += hj * w;
                }
            }
        }
    }
}

/// Mean softmax cross-entropy over the batch.
pub fn loss(p: &ModelParams, b: &Batch) -> Result<f64> {
    check_batch(p, b)?;
    let c = p.spec.num_classes;
    let h = p.spec.hidden_units;
    let mut hidden = vec![0.0; h];
    let mut logits = vec![0.0; c];
    let mut probs = vec![0.0; c];
    let mut total = 0.0;
    for i in 0..b.n() {
        logits_into(p, b.feature_row(i), &mut hidden, &mut logits);
        let lse = softmax_into(&logits, &mut probs);
        total += lse - logits[b.label(i)];
    }
    Ok(total / b.n() as f64)
}

/// Analytic gradient of [`loss`] with the same flat layout as the
/// parameters.
pub fn gradient(p: &ModelParams, b: &Batch) -> Result<ParamVector> {
    check_batch(p, b)?;
    let d = p.spec.input_dim;
    let c = p.spec.num_classes;
    let h = p.spec.hidden_units;
    let inv_n = 1.0 / b.n() as f64;
    let mut grad = vec![0.0; p.spec.parameter_count()];
    let mut hidden = vec![0.0; h];
    let mut logits = vec![0.0; c];
    let mut probs = vec![0.0; c];
    match p.spec.kind {
        ModelKind::Mclr => {
            for i in 0..b.n() {
                let x = b.feature_row(i);
                logits_into(p, x, &mut hidden, &mut logits);
                softmax_into(&logits, &mut probs);
                probs[b.label(i)] -= 1.0;
                for (dd, &xd) in x.iter().enumerate() {
                    if xd == 0.0 {
                        continue;
                    }
                    let row = &mut grad[dd * c..(dd + 1) * c];
                    for (g, &pc) in row.iter_mut().zip(&probs) {
                        *g += inv_n * xd * pc;
                    }
                }
                let brow = &mut grad[d * c..d * c + c];
                for (g, &pc) in brow.iter_mut().zip(&probs) {
                    *g += inv_n * pc;
                }
            }
        }
        ModelKind::Mlp => {
            let mut ghidden = vec![0.0; h];
            for i in 0..b.n() {
                let x = b.feature_row(i);
                logits_into(p, x, &mut hidden, &mut logits);
                softmax_into(&logits, &mut probs);
                probs[b.label(i)] -= 1.0;
                let v = mlp_view(p);
                // output layer
                {
                    let (w2_off, b2_off) = (d * h + h, d * h + h + h * c);
                    for (j, &hj) in hidden.iter().enumerate() {
                        if hj != 0.0 {
                            let row = &mut grad[w2_off + j * c..w2_off + (j + 1) * c];
                            for (g, &pc) in row.iter_mut().zip(&probs) {
                                *g += inv_n * hj * pc;
                            }
                        }
                    }
                    let brow = &mut grad[b2_off..b2_off + c];
                    for (g, &pc) in brow.iter_mut().zip(&probs) {
                        *g += inv_n * pc;
                    }
                }
                // backprop into the hidden layer; ReLU passes gradient
                // only where the activation is strictly positive
                for (j, gh) in ghidden.iter_mut().enumerate() {
                    *gh = if hidden[j] > 0.0 {
                        let row = &v.w2[j * c..(j + 1) * c];
                        row.iter().zip(&probs).map(|(w, pc)| w * pc).sum()
                    } else {
                        0.0
                    };
                }
                for (dd, &xd) in x.iter().enumerate() {
                    if xd == 0.0 {
                        continue;
                    }
                    let row = &mut grad[dd * h..(dd + 1) * h];
                    for (g, &gh) in row.iter_mut().zip(&ghidden) {
                        *g += inv_n * xd * gh;
                    }
                }
                let b1row = &mut grad[d * h..d * h + h];
                for (g, &gh) in b1row.iter_mut().zip(&ghidden) {
                    *g += inv_n * gh;
                }
            }
        }
    }
    Ok(ParamVector::from_vec(grad))
}

/// Gradient of the proximally regularized objective
/// `loss(w) + (mu/2) ||w - anchor||^2`, i.e. `gradient + mu (w - anchor)`.
pub fn prox_gradient(
    p: &ModelParams,
    b: &Batch,
    anchor: &ParamVector,
    mu: f64,
) -> Result<ParamVector> {
    if mu < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "proximal weight must be nonnegative, got {mu}"
        )));
    }
    if anchor.dim() != p.flat.dim() {
        return Err(Error::DimMismatch {
            expected: p.flat.dim(),
            got: anchor.dim(),
        });
    }
    let mut g = gradient(p, b)?;
    if mu > 0.0 {
        for ((g, w), a) in g
            .as_mut_slice()
            .iter_mut()
            .zip(p.flat.as_slice())
            .zip(anchor.as_slice())
        {
            *g += mu * (w - a);
        }
    }
    Ok(g)
}

/// Predicted class for one feature row; argmax ties break to the
/// lowest class index.
pub fn predict(p: &ModelParams, x: &[f64]) -> usize {
    let c = p.spec.num_classes;
    let mut hidden = vec![0.0; p.spec.hidden_units];
    let mut logits = vec![0.0; c];
    logits_into(p, x, &mut hidden, &mut logits);
    let mut arg = 0;
    for (j, &z) in logits.iter().enumerate() {
        if z > logits[arg] {
            arg = j;
        }
    }
    arg
}

/// Number of correct top-1 predictions on the batch.
pub fn correct_count(p: &ModelParams, test: &Batch) -> Result<usize> {
    check_batch(p, test)?;
    let mut correct = 0;
    for i in 0..test.n() {
        if predict(p, test.feature_row(i)) == test.label(i) {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Top-1 accuracy on a nonempty test batch.
pub fn accuracy(p: &ModelParams, test: &Batch) -> Result<f64> {
    Ok(correct_count(p, test)? as f64 / test.n() as f64)
}
