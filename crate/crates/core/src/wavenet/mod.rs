//! WaveNet-style separator over I/Q sequences with one learnable dilation
//! per residual block.
//!
//! Dataflow: a 1×1 input projection to the residual width, then per block a
//! gated unit over two fractional-dilation convolutions (filter and gate,
//! sharing the block's dilation), a 1×1 residual projection added back onto
//! the running signal and a 1×1 skip projection summed across blocks. The
//! head is 1×1 → ReLU → 1×1 down to two channels, optionally added onto the
//! input.

mod checkpoint;
mod recovery;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DilationParam, Graph, NodeId, PaddingPolicy, ParamRef, Tensor, TensorError};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use recovery::{recover_dilation, RecoveryRun, RecoverySetup};

const INIT_STREAM: u64 = 0x494e_4954;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveNetConfig {
    pub residual_channels: usize,
    pub skip_channels: usize,
    pub kernel_size: usize,
    pub num_blocks: usize,
    pub dilation_cycle_length: usize,
    /// Upper bound of each dilation as a multiple of its initial value.
    pub d_max_factor: f64,
    pub learnable_dilation: bool,
    /// Run the network on the mixture divided by its RMS and scale the
    /// estimate back; the training loss is then measured in the normalized
    /// domain.
    pub normalize_input: bool,
    /// Add the (normalized) mixture to the head output so the network
    /// predicts a correction to the identity. The last head layer then
    /// starts at zero.
    pub input_skip: bool,
}

impl Default for WaveNetConfig {
    fn default() -> Self {
        Self {
            residual_channels: 64,
            skip_channels: 64,
            kernel_size: 3,
            num_blocks: 9,
            dilation_cycle_length: 3,
            d_max_factor: 2.0,
            learnable_dilation: true,
            normalize_input: true,
            input_skip: true,
        }
    }
}

impl WaveNetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("wavenet: {msg}")));
        if self.residual_channels == 0 || self.skip_channels == 0 {
            return fail("channel counts must be positive");
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return fail("kernel_size must be odd");
        }
        if self.num_blocks == 0 {
            return fail("num_blocks must be at least 1");
        }
        if self.dilation_cycle_length == 0 {
            return fail("dilation_cycle_length must be at least 1");
        }
        if self.dilation_cycle_length > 52 {
            return fail("dilation_cycle_length too large");
        }
        if !(self.d_max_factor.is_finite() && self.d_max_factor > 1.0) {
            return fail("d_max_factor must be a finite real > 1");
        }
        Ok(())
    }

    /// `2^(i mod cycle)` for block `i`.
    pub fn initial_dilation(&self, block: usize) -> f64 {
        (1u64 << (block % self.dilation_cycle_length)) as f64
    }
}

/// Weight and bias of one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    /// `U(−1/√fan_in, 1/√fan_in)` for weight and bias alike.
    fn init(rng: &mut Rng, weight_shape: &[usize]) -> Self {
        let out_ch = weight_shape[0];
        let fan_in: usize = weight_shape[1..].iter().product();
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| rng.uniform_in(-bound, bound)).collect::<Vec<_>>();
        let n: usize = weight_shape.iter().product();
        let weight = Tensor::new(weight_shape, draw(n)).expect("valid shape").requires_grad(true);
        let bias = Tensor::new(&[out_ch], draw(out_ch)).expect("valid shape").requires_grad(true);
        Self { weight, bias }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub filter: ConvLayer,
    pub gate: ConvLayer,
    pub residual: ConvLayer,
    pub skip: ConvLayer,
    pub dilation: DilationParam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveNetModel {
    config: WaveNetConfig,
    pub input: ConvLayer,
    pub blocks: Vec<ResidualBlock>,
    pub head_hidden: ConvLayer,
    pub head_out: ConvLayer,
}

/// Graph nodes holding the parameters, in [`WaveNetModel::named_tensors`]
/// order.
struct Bound {
    leaves: Vec<NodeId>,
}

/// Deterministic, seeded construction.
pub fn wavenet_init(config: &WaveNetConfig, seed: u64) -> Result<WaveNetModel> {
    WaveNetModel::new(config.clone(), seed)
}

impl WaveNetModel {
    pub fn new(config: WaveNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(derive_seed(seed, INIT_STREAM));
        let (r, s, k) = (config.residual_channels, config.skip_channels, config.kernel_size);
        let input = ConvLayer::init(&mut rng, &[r, 2]);
        let blocks = (0..config.num_blocks)
            .map(|i| {
                let d0 = config.initial_dilation(i);
                let mut dilation = DilationParam::new(d0, d0 * config.d_max_factor)?;
                dilation.tensor_mut().set_requires_grad(config.learnable_dilation);
                Ok(ResidualBlock {
                    filter: ConvLayer::init(&mut rng, &[r, r, k]),
                    gate: ConvLayer::init(&mut rng, &[r, r, k]),
                    residual: ConvLayer::init(&mut rng, &[r, r]),
                    skip: ConvLayer::init(&mut rng, &[s, r]),
                    dilation,
                })
            })
            .collect::<Result<Vec<_>, TensorError>>()?;
        let head_hidden = ConvLayer::init(&mut rng, &[s, s]);
        let mut head_out = ConvLayer::init(&mut rng, &[2, s]);
        if config.input_skip {
            head_out.weight.data_mut().fill(0.0);
            head_out.bias.data_mut().fill(0.0);
        }
        Ok(Self {
            config,
            input,
            blocks,
            head_hidden,
            head_out,
        })
    }

    pub fn config(&self) -> &WaveNetConfig {
        &self.config
    }

    pub fn dilations(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.dilation.value()).collect()
    }

    /// `1 + (k − 1)·Σ d_i` at the current dilations.
    pub fn receptive_field(&self) -> f64 {
        receptive_field(self.config.kernel_size, &self.dilations())
    }

    /// Every tensor of the model, dilations included, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        fn conv<'a>(out: &mut Vec<(String, &'a Tensor)>, name: String, layer: &'a ConvLayer) {
            out.push((format!("{name}.weight"), &layer.weight));
            out.push((format!("{name}.bias"), &layer.bias));
        }
        conv(&mut out, "input".into(), &self.input);
        for (i, b) in self.blocks.iter().enumerate() {
            conv(&mut out, format!("blocks.{i}.filter"), &b.filter);
            conv(&mut out, format!("blocks.{i}.gate"), &b.gate);
            conv(&mut out, format!("blocks.{i}.residual"), &b.residual);
            conv(&mut out, format!("blocks.{i}.skip"), &b.skip);
            out.push((format!("blocks.{i}.dilation"), b.dilation.tensor()));
        }
        conv(&mut out, "head.hidden".into(), &self.head_hidden);
        conv(&mut out, "head.out".into(), &self.head_out);
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        fn conv<'a>(out: &mut Vec<(String, &'a mut Tensor)>, name: String, layer: &'a mut ConvLayer) {
            out.push((format!("{name}.weight"), &mut layer.weight));
            out.push((format!("{name}.bias"), &mut layer.bias));
        }
        conv(&mut out, "input".into(), &mut self.input);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            conv(&mut out, format!("blocks.{i}.filter"), &mut b.filter);
            conv(&mut out, format!("blocks.{i}.gate"), &mut b.gate);
            conv(&mut out, format!("blocks.{i}.residual"), &mut b.residual);
            conv(&mut out, format!("blocks.{i}.skip"), &mut b.skip);
            out.push((format!("blocks.{i}.dilation"), b.dilation.tensor_mut()));
        }
        conv(&mut out, "head.hidden".into(), &mut self.head_hidden);
        conv(&mut out, "head.out".into(), &mut self.head_out);
        out
    }

    /// The trainable tensors: everything except frozen dilations.
    pub fn model_params(&self) -> Vec<(String, &Tensor)> {
        let learnable = self.config.learnable_dilation;
        self.named_tensors()
            .into_iter()
            .filter(|(name, _)| learnable || !name.ends_with(".dilation"))
            .collect()
    }

    /// Optimizer views of [`Self::model_params`]; dilations get their
    /// projection bounds and `dilation_lr_scale`.
    pub fn param_refs(&mut self, dilation_lr_scale: f64) -> Vec<ParamRef<'_>> {
        let learnable = self.config.learnable_dilation;
        let mut out = Vec::new();
        let WaveNetModel {
            input,
            blocks,
            head_hidden,
            head_out,
            ..
        } = self;
        fn conv<'a>(out: &mut Vec<ParamRef<'a>>, name: String, layer: &'a mut ConvLayer) {
            out.push(ParamRef::weight(format!("{name}.weight"), &mut layer.weight));
            out.push(ParamRef::weight(format!("{name}.bias"), &mut layer.bias));
        }
        conv(&mut out, "input".into(), input);
        for (i, b) in blocks.iter_mut().enumerate() {
            conv(&mut out, format!("blocks.{i}.filter"), &mut b.filter);
            conv(&mut out, format!("blocks.{i}.gate"), &mut b.gate);
            conv(&mut out, format!("blocks.{i}.residual"), &mut b.residual);
            conv(&mut out, format!("blocks.{i}.skip"), &mut b.skip);
            if learnable {
                let mut p = ParamRef::dilation(format!("blocks.{i}.dilation"), &mut b.dilation);
                p.lr_scale = dilation_lr_scale;
                out.push(p);
            }
        }
        conv(&mut out, "head.hidden".into(), head_hidden);
        conv(&mut out, "head.out".into(), head_out);
        out
    }

    pub fn param_count(&self) -> usize {
        self.model_params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }

    pub fn zero_grad(&mut self) {
        for (_, t) in self.named_tensors_mut() {
            t.zero_grad();
        }
    }

    /// Adds `scale × grads[i]` to the gradient of tensor `i` (in
    /// [`Self::named_tensors`] order); empty entries are skipped.
    pub fn add_grads(&mut self, grads: &[Vec<f64>], scale: f64) {
        for ((_, t), g) in self.named_tensors_mut().into_iter().zip(grads) {
            for (acc, &v) in t.grad_mut().iter_mut().zip(g) {
                *acc += scale * v;
            }
        }
    }

    /// Places the parameters and the network on `graph`, returning the
    /// output node `[2, T]`.
    fn build(&self, graph: &mut Graph, mixture: NodeId, track_grads: bool) -> Result<(NodeId, Bound), TensorError> {
        let leaves: Vec<NodeId> = self
            .named_tensors()
            .into_iter()
            .map(|(_, t)| {
                let requires = track_grads && t.is_requires_grad();
                graph.leaf(t.clone().requires_grad(requires))
            })
            .collect();
        let mut it = leaves.iter().copied();
        let mut next = || it.next().expect("one leaf per tensor");

        let conv1x1 = |g: &mut Graph, x: NodeId, w: NodeId, b: NodeId| g.conv1x1(x, w, Some(b));
        let (w, b) = (next(), next());
        let mut h = conv1x1(graph, mixture, w, b)?;
        let mut skip_sum: Option<NodeId> = None;
        for _ in &self.blocks {
            let (fw, fb, gw, gb) = (next(), next(), next(), next());
            let (rw, rb, sw, sb) = (next(), next(), next(), next());
            let d = next();
            let f = graph.conv1d_frac(h, fw, d, PaddingPolicy::Same)?;
            let f = graph.add_bias(f, fb)?;
            let gt = graph.conv1d_frac(h, gw, d, PaddingPolicy::Same)?;
            let gt = graph.add_bias(gt, gb)?;
            let z = graph.gated_unit(f, gt)?;
            let res = conv1x1(graph, z, rw, rb)?;
            h = graph.add(h, res)?;
            let s = conv1x1(graph, z, sw, sb)?;
            skip_sum = Some(match skip_sum {
                Some(acc) => graph.add(acc, s)?,
                None => s,
            });
        }
        let (hw, hb, ow, ob) = (next(), next(), next(), next());
        let hidden = conv1x1(graph, skip_sum.expect("at least one block"), hw, hb)?;
        let hidden = graph.relu(hidden);
        let mut out = conv1x1(graph, hidden, ow, ob)?;
        if self.config.input_skip {
            out = graph.add(out, mixture)?;
        }
        Ok((out, Bound { leaves }))
    }

    fn check_input(mixture: &Tensor) -> Result<(), TensorError> {
        match mixture.shape() {
            &[2, t] if t >= 1 => {}
            s => {
                return Err(TensorError::InvalidShape {
                    shape: s.to_vec(),
                    reason: "mixture must be [2, T] with T ≥ 1",
                })
            }
        }
        if !mixture.all_finite() {
            return Err(TensorError::NonFinite {
                op: "wavenet_forward",
                what: "mixture",
            });
        }
        Ok(())
    }

    /// Per-example scale `s`: the RMS of the complex mixture, or 1 when
    /// normalization is off or the mixture is all zeros.
    pub fn input_scale(&self, mixture: &Tensor) -> f64 {
        if !self.config.normalize_input {
            return 1.0;
        }
        let t = mixture.shape()[1] as f64;
        let rms = (mixture.data().iter().map(|v| v * v).sum::<f64>() / t).sqrt();
        if rms > 0.0 {
            rms
        } else {
            1.0
        }
    }

    fn scaled(t: &Tensor, factor: f64) -> Tensor {
        let data = t.data().iter().map(|v| v * factor).collect();
        Tensor::new(t.shape(), data).expect("same shape")
    }

    /// SOI estimate `[2, T]` for a mixture `[2, T]`.
    pub fn forward(&self, mixture: &Tensor) -> Result<Tensor> {
        Self::check_input(mixture)?;
        let s = self.input_scale(mixture);
        let mut graph = Graph::new();
        let x = graph.leaf(Self::scaled(mixture, 1.0 / s));
        let (out, _) = self.build(&mut graph, x, false)?;
        Ok(Self::scaled(graph.tensor(out), s))
    }

    /// Training objective for one example without gradients: the MSE
    /// between estimate and `target`, both divided by the input scale.
    pub fn loss(&self, mixture: &Tensor, target: &Tensor) -> Result<f64> {
        let est = self.forward(mixture)?;
        if est.shape() != target.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "loss",
                left: est.shape().to_vec(),
                right: target.shape().to_vec(),
            }
            .into());
        }
        let s = self.input_scale(mixture);
        let sum: f64 = est.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(sum / est.numel() as f64 / (s * s))
    }

    /// [`Self::loss`] with its gradient for every trainable tensor in
    /// [`Self::named_tensors`] order (frozen tensors get an empty vector).
    /// The model is not modified, so examples of a batch can be processed
    /// concurrently.
    pub fn loss_grad(&self, mixture: &Tensor, target: &Tensor) -> Result<(f64, Vec<Vec<f64>>)> {
        Self::check_input(mixture)?;
        let s = self.input_scale(mixture);
        let mut graph = Graph::new();
        let x = graph.leaf(Self::scaled(mixture, 1.0 / s));
        let y = graph.leaf(Self::scaled(target, 1.0 / s));
        let (out, bound) = self.build(&mut graph, x, true)?;
        let loss = graph.mse_loss(out, y)?;
        let value = graph.tensor(loss).item();
        if !value.is_finite() {
            return Ok((value, Vec::new()));
        }
        graph.backward(loss)?;
        let grads = bound
            .leaves
            .iter()
            .map(|&id| {
                let t = graph.tensor(id);
                if t.is_requires_grad() {
                    t.grad().to_vec()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok((value, grads))
    }

    /// [`Self::loss_grad`] followed by [`Self::add_grads`].
    pub fn accumulate_loss_grad(&mut self, mixture: &Tensor, target: &Tensor, scale: f64) -> Result<f64> {
        let (loss, grads) = self.loss_grad(mixture, target)?;
        self.add_grads(&grads, scale);
        Ok(loss)
    }

    /// Replaces tensors by name; shapes must match.
    pub(crate) fn load_tensors(&mut self, tensors: Vec<(String, Vec<f64>)>) -> Result<()> {
        let mut slots = self.named_tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, model has {}",
                tensors.len(),
                slots.len()
            )));
        }
        for ((name, t), (src_name, data)) in slots.iter_mut().zip(tensors) {
            if *name != src_name || t.numel() != data.len() {
                return Err(Error::Config(format!(
                    "checkpoint tensor `{src_name}` does not match model tensor `{name}`"
                )));
            }
            t.data_mut().copy_from_slice(&data);
        }
        for b in &mut self.blocks {
            let v = b.dilation.value();
            if !(v.is_finite() && (1.0..=b.dilation.d_max()).contains(&v)) {
                return Err(TensorError::InvalidDilation { value: v }.into());
            }
        }
        Ok(())
    }
}

/// `1 + (k − 1)·Σ d_i`.
pub fn receptive_field(kernel_size: usize, dilations: &[f64]) -> f64 {
    1.0 + (kernel_size as f64 - 1.0) * dilations.iter().sum::<f64>()
}
