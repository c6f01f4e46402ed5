//! The three-branch network: a CNN over the SMILES feature matrix, a row-gating
//! attention layer driven by the CNN summary, and a dense branch over scaled
//! descriptors, joined by a single logistic output unit.

mod io;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::descriptors::{DescriptorError, ScalerParams};
use crate::featurize::{FEATURE_COLS, MAX_ROWS};
use crate::nn::{
    conv_output_dim, sigmoid, BatchNorm, Conv2d, Dropout, ForwardCtx, Layer, Linear, MaxPool2d,
    NnError, Param, Relu, Tensor,
};

pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    VersionUnsupported(u32),
    #[error("model file checksum mismatch (file truncated or corrupted)")]
    ChecksumMismatch,
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Architecture hyperparameters. Only `dropout`, `descriptor_width` and `threshold`
/// vary between runs; the rest are fixed by the architecture and stored for checking.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub max_rows: usize,
    pub feat_cols: usize,
    pub conv_channels: [usize; 2],
    pub kernel: usize,
    pub m_dim: usize,
    pub md_widths: [usize; 3],
    pub descriptor_width: usize,
    pub dropout: f64,
    pub threshold: f64,
}

impl ModelConfig {
    pub fn new(descriptor_width: usize, dropout: f64) -> ModelConfig {
        ModelConfig {
            max_rows: MAX_ROWS,
            feat_cols: FEATURE_COLS,
            conv_channels: [6, 16],
            kernel: 3,
            m_dim: FEATURE_COLS,
            md_widths: [512, 128, 64],
            descriptor_width,
            dropout,
            threshold: 0.5,
        }
    }

    /// `(channels, height, width)` after each conv block (conv, then 2×2 pooling).
    pub fn block_shapes(&self) -> Result<[(usize, usize, usize); 2], ModelError> {
        let mut h = self.max_rows;
        let mut w = self.feat_cols;
        let mut out = [(0, 0, 0); 2];
        for (i, &c) in self.conv_channels.iter().enumerate() {
            let too_small = move || ModelError::InvalidConfig(format!("{h}×{w} input too small for conv block {}", i + 1));
            let ho = conv_output_dim(h, self.kernel, 1).ok_or_else(too_small)? / 2;
            let wo = conv_output_dim(w, self.kernel, 1).ok_or_else(too_small)? / 2;
            if ho == 0 || wo == 0 {
                return Err(too_small());
            }
            (h, w) = (ho, wo);
            out[i] = (c, h, w);
        }
        Ok(out)
    }

    pub fn flatten_width(&self) -> Result<usize, ModelError> {
        let (c, h, w) = self.block_shapes()?[1];
        Ok(c * h * w)
    }

    /// Width of the classifier input `[f, m, t]`.
    pub fn concat_width(&self) -> usize {
        self.feat_cols + self.m_dim + self.md_widths[2]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.m_dim != self.feat_cols {
            return Err(ModelError::InvalidConfig(format!(
                "m_dim {} must equal feature columns {}",
                self.m_dim, self.feat_cols
            )));
        }
        if self.descriptor_width == 0
            || self.md_widths.contains(&0)
            || self.conv_channels.contains(&0)
            || self.kernel == 0
        {
            return Err(ModelError::InvalidConfig("widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ModelError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        self.block_shapes()?;
        Ok(())
    }
}

/// Per-molecule outputs of an eval-mode pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    /// One weight per feature-matrix row.
    pub a: Vec<f64>,
    pub f: Vec<f64>,
    pub m: Vec<f64>,
    pub t: Vec<f64>,
    pub probability: f64,
}

/// Batch outputs, each field row-major by sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput {
    pub a: Tensor,
    pub f: Tensor,
    pub m: Tensor,
    pub t: Tensor,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl BatchOutput {
    pub fn sample(&self, i: usize) -> AttentionOutput {
        let pick = |t: &Tensor| {
            let w = t.len() / t.batch().max(1);
            t.data[i * w..(i + 1) * w].to_vec()
        };
        AttentionOutput {
            a: pick(&self.a),
            f: pick(&self.f),
            m: pick(&self.m),
            t: pick(&self.t),
            probability: self.probabilities[i],
        }
    }
}

/// Row gates `aᵢ = 1/(1 + exp(Rᵢ·m))` and the gated sum `f = Σ aᵢ Rᵢ` for one sample.
/// `r` is row-major with `m.len()` columns.
pub fn attention_forward(r: &[f64], m: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    let cols = m.len();
    if cols == 0 || r.len() % cols != 0 {
        return Err(NnError::ShapeMismatch {
            expected: format!("rows of {cols} columns"),
            found: format!("{} values", r.len()),
        });
    }
    let mut a = Vec::with_capacity(r.len() / cols);
    let mut f = vec![0.0; cols];
    for row in r.chunks_exact(cols) {
        let s: f64 = row.iter().zip(m).map(|(x, y)| x * y).sum();
        let ai = sigmoid(-s);
        for (fk, x) in f.iter_mut().zip(row) {
            *fk += ai * x;
        }
        a.push(ai);
    }
    Ok((a, f))
}

/// Gradient with respect to `m` given upstream gradients on `f` (and optionally on `a`).
pub fn attention_backward(r: &[f64], a: &[f64], df: &[f64], da: Option<&[f64]>) -> Vec<f64> {
    let cols = df.len();
    let mut dm = vec![0.0; cols];
    for (i, row) in r.chunks_exact(cols).enumerate() {
        let mut g = row.iter().zip(df).map(|(x, y)| x * y).sum::<f64>();
        if let Some(da) = da {
            g += da[i];
        }
        // d a / d s = −a(1 − a) because the gate is sigmoid(−s)
        let ds = -g * a[i] * (1.0 - a[i]);
        if ds != 0.0 {
            for (d, x) in dm.iter_mut().zip(row) {
                *d += ds * x;
            }
        }
    }
    dm
}

#[derive(Clone, Debug)]
struct ConvBlock {
    conv: Conv2d,
    bn: BatchNorm,
    relu: Relu,
    drop: Dropout,
    pool: MaxPool2d,
}

impl ConvBlock {
    fn new(name: &str, cin: usize, cout: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        Ok(ConvBlock {
            conv: Conv2d::new(&format!("{name}.conv"), cin, cout, k, rng),
            bn: BatchNorm::new(&format!("{name}.bn"), cout),
            relu: Relu::new(),
            drop: Dropout::new(p)?,
            pool: MaxPool2d::new(),
        })
    }

    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let x = self.conv.forward(x, ctx)?;
        let x = self.bn.forward_owned(x, ctx)?;
        let x = self.relu.forward_owned(x, ctx)?;
        let x = self.drop.forward_owned(x, ctx)?;
        self.pool.forward(&x, ctx)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor, NnError> {
        let g = self.pool.backward(g)?;
        let g = self.drop.backward_owned(g)?;
        let g = self.relu.backward_owned(g)?;
        let g = self.bn.backward_owned(g)?;
        self.conv.backward(&g)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let x = self.conv.infer(x)?;
        let x = self.bn.infer(&x)?;
        let x = self.relu.infer(&x)?;
        self.pool.infer(&x)
    }
}

#[derive(Clone, Debug)]
struct DenseBlock {
    linear: Linear,
    bn: BatchNorm,
    relu: Relu,
    drop: Dropout,
}

impl DenseBlock {
    fn new(name: &str, inp: usize, out: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        Ok(DenseBlock {
            linear: Linear::new(&format!("{name}.linear"), inp, out, rng),
            bn: BatchNorm::new(&format!("{name}.bn"), out),
            relu: Relu::new(),
            drop: Dropout::new(p)?,
        })
    }

    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let x = self.linear.forward(x, ctx)?;
        let x = self.bn.forward_owned(x, ctx)?;
        let x = self.relu.forward_owned(x, ctx)?;
        self.drop.forward_owned(x, ctx)
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor, NnError> {
        let g = self.drop.backward(g)?;
        let g = self.relu.backward_owned(g)?;
        let g = self.bn.backward_owned(g)?;
        self.linear.backward(&g)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let x = self.linear.infer(x)?;
        let x = self.bn.infer(&x)?;
        self.relu.infer(&x)
    }
}

/// Values recorded by [`MultiInputModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
struct Recorded {
    r: Tensor,
    a: Tensor,
    flat_shape: Vec<usize>,
}

/// Saved parameter and running-statistic values.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot(Vec<Vec<f64>>);

#[derive(Clone, Debug)]
pub struct MultiInputModel {
    pub config: ModelConfig,
    /// Scaler fitted on the training descriptors; applied before the dense branch.
    pub scaler: ScalerParams,
    pub seed: u64,
    /// Free-form key/value provenance stored with the weights (tool version, config hash, ...).
    pub provenance: BTreeMap<String, String>,
    blocks: [ConvBlock; 2],
    project: Linear,
    md: [DenseBlock; 3],
    head: Linear,
    recorded: Option<Recorded>,
}

impl MultiInputModel {
    pub fn new(config: ModelConfig, scaler: ScalerParams, seed: u64) -> Result<MultiInputModel, ModelError> {
        config.validate()?;
        if scaler.kept_count() != config.descriptor_width {
            return Err(ModelError::InvalidConfig(format!(
                "scaler keeps {} descriptors but the model expects {}",
                scaler.kept_count(),
                config.descriptor_width
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = config.dropout;
        let [c1, c2] = config.conv_channels;
        let k = config.kernel;
        let mut conv1 = ConvBlock::new("conv1", 1, c1, k, p, &mut rng)?;
        conv1.conv.input_grad = false;
        let conv2 = ConvBlock::new("conv2", c1, c2, k, p, &mut rng)?;
        let project = Linear::new("project", config.flatten_width()?, config.m_dim, &mut rng);
        let [w1, w2, w3] = config.md_widths;
        let md = [
            DenseBlock::new("md1", config.descriptor_width, w1, p, &mut rng)?,
            DenseBlock::new("md2", w1, w2, p, &mut rng)?,
            DenseBlock::new("md3", w2, w3, p, &mut rng)?,
        ];
        let head = Linear::new("head", config.concat_width(), 1, &mut rng);
        Ok(MultiInputModel {
            config,
            scaler,
            seed,
            provenance: BTreeMap::new(),
            blocks: [conv1, conv2],
            project,
            md,
            head,
            recorded: None,
        })
    }

    pub fn set_dropout(&mut self, p: f64) -> Result<(), ModelError> {
        let d = Dropout::new(p)?;
        for b in &mut self.blocks {
            b.drop = d.clone();
        }
        for b in &mut self.md {
            b.drop = d.clone();
        }
        self.config.dropout = p;
        Ok(())
    }

    fn check_inputs(&self, r: &Tensor, d: &Tensor) -> Result<usize, ModelError> {
        let n = r.batch();
        let c = &self.config;
        if r.shape() != [n, c.max_rows, c.feat_cols] {
            return Err(NnError::ShapeMismatch {
                expected: format!("[N, {}, {}]", c.max_rows, c.feat_cols),
                found: format!("{:?}", r.shape()),
            }
            .into());
        }
        if d.shape() != [n, c.descriptor_width] {
            return Err(ModelError::Descriptor(DescriptorError::SchemaMismatch {
                expected: format!("[{n}, {}] scaled descriptors", c.descriptor_width),
                found: format!("{:?}", d.shape()),
            }));
        }
        Ok(n)
    }

    fn attention_and_head(&self, r: &Tensor, m: &Tensor, t: &Tensor) -> Result<(BatchOutput, Tensor), ModelError> {
        let n = r.batch();
        let (rows, cols) = (self.config.max_rows, self.config.feat_cols);
        let mut a = Tensor::zeros(&[n, rows]);
        let mut f = Tensor::zeros(&[n, cols]);
        let width = self.config.concat_width();
        let mut concat = Tensor::zeros(&[n, width]);
        let (mw, tw) = (self.config.m_dim, self.config.md_widths[2]);
        for s in 0..n {
            let rs = &r.data[s * rows * cols..(s + 1) * rows * cols];
            let ms = &m.data[s * mw..(s + 1) * mw];
            let (as_, fs) = attention_forward(rs, ms)?;
            a.data[s * rows..(s + 1) * rows].copy_from_slice(&as_);
            f.data[s * cols..(s + 1) * cols].copy_from_slice(&fs);
            let row = &mut concat.data[s * width..(s + 1) * width];
            row[..cols].copy_from_slice(&fs);
            row[cols..cols + mw].copy_from_slice(ms);
            row[cols + mw..].copy_from_slice(&t.data[s * tw..(s + 1) * tw]);
        }
        let out = BatchOutput {
            a,
            f,
            m: m.clone(),
            t: t.clone(),
            logits: Vec::new(),
            probabilities: Vec::new(),
        };
        Ok((out, concat))
    }

    /// Recording forward pass. `r` is `[N, 150, 42]`, `d` is `[N, descriptor_width]` scaled.
    pub fn forward(&mut self, r: &Tensor, d: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<BatchOutput, ModelError> {
        let n = self.check_inputs(r, d)?;
        let img = r.clone().reshape(&[n, 1, self.config.max_rows, self.config.feat_cols])?;
        let x = self.blocks[0].forward(&img, ctx)?;
        let x = self.blocks[1].forward(&x, ctx)?;
        let flat_shape = x.shape().to_vec();
        let x = x.reshape(&[n, self.config.flatten_width()?])?;
        let m = self.project.forward(&x, ctx)?;
        let mut t = d.clone();
        for b in &mut self.md {
            t = b.forward(&t, ctx)?;
        }
        let (mut out, concat) = self.attention_and_head(r, &m, &t)?;
        let z = self.head.forward(&concat, ctx)?;
        out.probabilities = z.data.iter().map(|&v| sigmoid(v)).collect();
        out.logits = z.data;
        self.recorded = Some(Recorded {
            r: r.clone(),
            a: out.a.clone(),
            flat_shape,
        });
        Ok(out)
    }

    /// Backpropagates `d loss / d logit` for each sample, accumulating parameter gradients.
    pub fn backward(&mut self, grad_logits: &[f64]) -> Result<(), ModelError> {
        let rec = self.recorded.take().ok_or(NnError::NoForwardRecorded)?;
        let n = rec.r.batch();
        if grad_logits.len() != n {
            return Err(NnError::ShapeMismatch {
                expected: format!("{n} logit gradients"),
                found: format!("{}", grad_logits.len()),
            }
            .into());
        }
        let result = self.backward_recorded(&rec, grad_logits);
        self.recorded = Some(rec);
        result
    }

    fn backward_recorded(&mut self, rec: &Recorded, grad_logits: &[f64]) -> Result<(), ModelError> {
        let n = rec.r.batch();
        let (rows, cols) = (self.config.max_rows, self.config.feat_cols);
        let (mw, tw) = (self.config.m_dim, self.config.md_widths[2]);
        let width = self.config.concat_width();
        let dconcat = self.head.backward(&Tensor::new(&[n, 1], grad_logits.to_vec())?)?;
        let mut dm = Tensor::zeros(&[n, mw]);
        let mut dt = Tensor::zeros(&[n, tw]);
        for s in 0..n {
            let row = &dconcat.data[s * width..(s + 1) * width];
            let rs = &rec.r.data[s * rows * cols..(s + 1) * rows * cols];
            let as_ = &rec.a.data[s * rows..(s + 1) * rows];
            let via_attention = attention_backward(rs, as_, &row[..cols], None);
            for (k, d) in dm.data[s * mw..(s + 1) * mw].iter_mut().enumerate() {
                *d = row[cols + k] + via_attention[k];
            }
            dt.data[s * tw..(s + 1) * tw].copy_from_slice(&row[cols + mw..]);
        }
        let mut g = dt;
        for b in self.md.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        let g = self.project.backward(&dm)?.reshape(&rec.flat_shape)?;
        let g = self.blocks[1].backward(&g)?;
        self.blocks[0].backward(&g)?;
        Ok(())
    }

    /// Cache-free eval-mode pass; safe to share across threads.
    pub fn infer(&self, r: &Tensor, d: &Tensor) -> Result<BatchOutput, ModelError> {
        let n = self.check_inputs(r, d)?;
        let img = r.clone().reshape(&[n, 1, self.config.max_rows, self.config.feat_cols])?;
        let x = self.blocks[0].infer(&img)?;
        let x = self.blocks[1].infer(&x)?;
        let x = x.reshape(&[n, self.config.flatten_width()?])?;
        let m = self.project.infer(&x)?;
        let mut t = d.clone();
        for b in &self.md {
            t = b.infer(&t)?;
        }
        let (mut out, concat) = self.attention_and_head(r, &m, &t)?;
        let z = self.head.infer(&concat)?;
        out.probabilities = z.data.iter().map(|&v| sigmoid(v)).collect();
        out.logits = z.data;
        Ok(out)
    }

    /// Trainable parameters in a fixed order.
    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend(b.conv.params());
            out.extend(b.bn.params());
        }
        out.extend(self.project.params());
        for b in &self.md {
            out.extend(b.linear.params());
            out.extend(b.bn.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.conv.params_mut());
            out.extend(b.bn.params_mut());
        }
        out.extend(self.project.params_mut());
        for b in &mut self.md {
            out.extend(b.linear.params_mut());
            out.extend(b.bn.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Batch-norm running statistics, in the same block order as [`params`](Self::params).
    pub fn norm_layers(&self) -> Vec<&BatchNorm> {
        let mut out: Vec<&BatchNorm> = self.blocks.iter().map(|b| &b.bn).collect();
        out.extend(self.md.iter().map(|b| &b.bn));
        out
    }

    pub fn norm_layers_mut(&mut self) -> Vec<&mut BatchNorm> {
        let mut out: Vec<&mut BatchNorm> = self.blocks.iter_mut().map(|b| &mut b.bn).collect();
        out.extend(self.md.iter_mut().map(|b| &mut b.bn));
        out
    }

    /// Copies every stored value (parameters, then running statistics).
    pub fn snapshot(&self) -> Snapshot {
        let mut values: Vec<Vec<f64>> = self.params().iter().map(|p| p.value.data.clone()).collect();
        for bn in self.norm_layers() {
            values.push(bn.running_mean.clone());
            values.push(bn.running_var.clone());
        }
        Snapshot(values)
    }

    /// Restores values taken by [`snapshot`](Self::snapshot) from a model of the same config.
    pub fn restore(&mut self, snap: &Snapshot) -> Result<(), ModelError> {
        let mismatch = || ModelError::InvalidConfig("snapshot does not match this model".into());
        let mut it = snap.0.iter();
        for p in self.params_mut() {
            let v = it.next().filter(|v| v.len() == p.value.len()).ok_or_else(mismatch)?;
            p.value.data.copy_from_slice(v);
        }
        for bn in self.norm_layers_mut() {
            let c = bn.channels();
            let m = it.next().filter(|v| v.len() == c).ok_or_else(mismatch)?;
            let v = it.next().filter(|v| v.len() == c).ok_or_else(mismatch)?;
            bn.running_mean.clone_from(m);
            bn.running_var.clone_from(v);
        }
        if it.next().is_some() {
            return Err(mismatch());
        }
        Ok(())
    }

    /// A copy with the same values but no recorded forward state.
    pub fn frozen(&self) -> MultiInputModel {
        let mut out = MultiInputModel::new(self.config.clone(), self.scaler.clone(), self.seed)
            .expect("config already validated");
        out.provenance = self.provenance.clone();
        out.restore(&self.snapshot()).expect("same config");
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.value.is_finite())
            && self
                .norm_layers()
                .iter()
                .all(|b| b.running_mean.iter().chain(&b.running_var).all(|v| v.is_finite()))
    }
}
