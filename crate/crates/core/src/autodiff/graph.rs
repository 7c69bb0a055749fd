use super::conv::{pointwise_backward, pointwise_forward, FracConv, PaddingPolicy};
use super::{Tensor, TensorError, D_MIN};

/// Handle to a node of a [`Graph`]. Ids are dense and assigned in creation
/// order, so every op's inputs have smaller ids than the op itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    FracConv {
        input: NodeId,
        kernel: NodeId,
        dilation: NodeId,
        padding: PaddingPolicy,
    },
    Pointwise {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    },
    AddBias {
        input: NodeId,
        bias: NodeId,
    },
    Add(NodeId, NodeId),
    Gated {
        filter: NodeId,
        gate: NodeId,
    },
    Relu(NodeId),
    Mse {
        pred: NodeId,
        target: NodeId,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A recorded computation over [`Tensor`]s supporting reverse-mode
/// differentiation.
///
/// Leaves are owned by the graph. Callers that keep parameters elsewhere copy
/// them in with [`Graph::leaf`] and read gradients back with [`Graph::tensor`]
/// after [`Graph::backward`].
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds `tensor` as an input. Any gradient it carries is cleared.
    pub fn leaf(&mut self, mut tensor: Tensor) -> NodeId {
        tensor.zero_grad();
        self.push(tensor, Op::Leaf)
    }

    pub fn tensor(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn tensor_mut(&mut self, id: NodeId) -> &mut Tensor {
        &mut self.nodes[id.0].value
    }

    pub fn zero_grad(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.value.zero_grad());
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn derived(&mut self, shape: &[usize], data: Vec<f64>, op: Op, inputs: &[NodeId]) -> NodeId {
        let requires_grad = inputs.iter().any(|&i| self.tensor(i).is_requires_grad());
        let value = Tensor::new(shape, data)
            .expect("op produced a tensor with an inconsistent shape")
            .requires_grad(requires_grad);
        self.push(value, op)
    }

    fn signal_dims(&self, op: &'static str, id: NodeId) -> Result<(usize, usize), TensorError> {
        match self.tensor(id).shape() {
            &[c, t] => Ok((c, t)),
            s => Err(TensorError::RankMismatch {
                op,
                expected: 2,
                shape: s.to_vec(),
            }),
        }
    }

    fn check_finite(&self, op: &'static str, what: &'static str, id: NodeId) -> Result<(), TensorError> {
        if self.tensor(id).all_finite() {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op, what })
        }
    }

    /// 1-D convolution over `[in_ch, T]` whose tap spacing `d` is a
    /// continuous value read from the one-element `dilation` node.
    ///
    /// `out[o, t] = Σ_{c, m} kernel[o, c, m] · x̂_c(t + m·d)` where `x̂_c`
    /// linearly interpolates between integer samples and reads zero outside
    /// the signal. Output length equals input length.
    pub fn conv1d_frac(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        dilation: NodeId,
        padding: PaddingPolicy,
    ) -> Result<NodeId, TensorError> {
        const OP: &str = "conv1d_frac";
        let (in_ch, len) = self.signal_dims(OP, input)?;
        let (out_ch, k) = match self.tensor(kernel).shape() {
            &[o, c, k] if c == in_ch => (o, k),
            &[_, c, _] => {
                return Err(TensorError::ChannelMismatch {
                    op: OP,
                    expected: in_ch,
                    found: c,
                })
            }
            s => {
                return Err(TensorError::RankMismatch {
                    op: OP,
                    expected: 3,
                    shape: s.to_vec(),
                })
            }
        };
        if k % 2 == 0 {
            return Err(TensorError::EvenKernel { taps: k });
        }
        let d_tensor = self.tensor(dilation);
        if !d_tensor.is_scalar() {
            return Err(TensorError::NotScalar {
                shape: d_tensor.shape().to_vec(),
            });
        }
        let d = d_tensor.item();
        if !(d.is_finite() && d >= D_MIN) {
            return Err(TensorError::InvalidDilation { value: d });
        }
        self.check_finite(OP, "input", input)?;
        self.check_finite(OP, "kernel", kernel)?;

        let conv = FracConv {
            in_ch,
            out_ch,
            taps: k,
            len,
            dilation: d,
            padding,
        };
        let out = conv.forward(self.tensor(input).data(), self.tensor(kernel).data());
        Ok(self.derived(
            &[out_ch, len],
            out,
            Op::FracConv {
                input,
                kernel,
                dilation,
                padding,
            },
            &[input, kernel, dilation],
        ))
    }

    /// Pointwise convolution: `weight` is `[out_ch, in_ch]`, `bias` is `[out_ch]`.
    pub fn conv1x1(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    ) -> Result<NodeId, TensorError> {
        const OP: &str = "conv1x1";
        let (in_ch, len) = self.signal_dims(OP, input)?;
        let out_ch = match self.tensor(weight).shape() {
            &[o, c] if c == in_ch => o,
            &[_, c] => {
                return Err(TensorError::ChannelMismatch {
                    op: OP,
                    expected: in_ch,
                    found: c,
                })
            }
            s => {
                return Err(TensorError::RankMismatch {
                    op: OP,
                    expected: 2,
                    shape: s.to_vec(),
                })
            }
        };
        if let Some(b) = bias {
            let shape = self.tensor(b).shape();
            if shape != [out_ch] {
                return Err(TensorError::ShapeMismatch {
                    op: OP,
                    left: vec![out_ch],
                    right: shape.to_vec(),
                });
            }
        }
        self.check_finite(OP, "input", input)?;
        let out = pointwise_forward(
            self.tensor(input).data(),
            in_ch,
            len,
            self.tensor(weight).data(),
            out_ch,
            bias.map(|b| self.tensor(b).data()),
        );
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.derived(&[out_ch, len], out, Op::Pointwise { input, weight, bias }, &inputs))
    }

    /// Adds a per-channel bias `[C]` to a `[C, T]` signal.
    pub fn add_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId, TensorError> {
        let (ch, len) = self.signal_dims("add_bias", input)?;
        if self.tensor(bias).shape() != [ch] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                left: vec![ch],
                right: self.tensor(bias).shape().to_vec(),
            });
        }
        let b = self.tensor(bias).data();
        let mut out = self.tensor(input).data().to_vec();
        for (row, &bv) in out.chunks_exact_mut(len).zip(b) {
            row.iter_mut().for_each(|v| *v += bv);
        }
        Ok(self.derived(&[ch, len], out, Op::AddBias { input, bias }, &[input, bias]))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), TensorError> {
        let (sa, sb) = (self.tensor(a).shape(), self.tensor(b).shape());
        if sa == sb {
            Ok(())
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            })
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.same_shape("add", a, b)?;
        let out = self
            .tensor(a)
            .data()
            .iter()
            .zip(self.tensor(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.tensor(a).shape().to_vec();
        Ok(self.derived(&shape, out, Op::Add(a, b), &[a, b]))
    }

    /// WaveNet gate: `tanh(filter) ⊙ sigmoid(gate)`.
    pub fn gated_unit(&mut self, filter: NodeId, gate: NodeId) -> Result<NodeId, TensorError> {
        self.same_shape("gated_unit", filter, gate)?;
        let out = self
            .tensor(filter)
            .data()
            .iter()
            .zip(self.tensor(gate).data())
            .map(|(&f, &g)| f.tanh() * sigmoid(g))
            .collect();
        let shape = self.tensor(filter).shape().to_vec();
        Ok(self.derived(&shape, out, Op::Gated { filter, gate }, &[filter, gate]))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.tensor(x).data().iter().map(|&v| v.max(0.0)).collect();
        let shape = self.tensor(x).shape().to_vec();
        self.derived(&shape, out, Op::Relu(x), &[x])
    }

    /// Mean over all elements of `(pred − target)²`. The target must be a
    /// constant.
    pub fn mse_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId, TensorError> {
        self.same_shape("mse_loss", pred, target)?;
        if self.tensor(target).is_requires_grad() {
            return Err(TensorError::TargetRequiresGrad);
        }
        let p = self.tensor(pred).data();
        let t = self.tensor(target).data();
        let sum: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let loss = sum / p.len() as f64;
        Ok(self.derived(&[1], vec![loss], Op::Mse { pred, target }, &[pred, target]))
    }

    /// Back-propagates from a scalar node, adding `∂loss/∂node` into the
    /// gradient buffer of every `requires_grad` node that `loss` depends on.
    /// Calling it twice without [`Graph::zero_grad`] accumulates.
    pub fn backward(&mut self, loss: NodeId) -> Result<(), TensorError> {
        let root = self.tensor(loss);
        if !root.is_scalar() {
            return Err(TensorError::NotScalar {
                shape: root.shape().to_vec(),
            });
        }
        let n = loss.0 + 1;
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; n];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].value.is_requires_grad() {
                continue;
            }
            self.propagate(i, &g, &mut adj);
            self.nodes[i]
                .value
                .grad_mut()
                .iter_mut()
                .zip(&g)
                .for_each(|(acc, v)| *acc += v);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let wants = |id: NodeId| self.tensor(id).is_requires_grad();
        // Split borrows: adjoint slots are indexed by node id.
        fn slot<'a>(adj: &'a mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &'a mut [f64] {
            adj[id.0].get_or_insert_with(|| vec![0.0; len])
        }

        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::FracConv {
                input,
                kernel,
                dilation,
                padding,
            } => {
                let x = self.tensor(input);
                let w = self.tensor(kernel);
                let (in_ch, len) = (x.shape()[0], x.shape()[1]);
                let (out_ch, k) = (w.shape()[0], w.shape()[2]);
                let conv = FracConv {
                    in_ch,
                    out_ch,
                    taps: k,
                    len,
                    dilation: self.tensor(dilation).item(),
                    padding,
                };
                let mut gx = wants(input).then(|| vec![0.0; x.numel()]);
                let mut gw = wants(kernel).then(|| vec![0.0; w.numel()]);
                let mut gd = wants(dilation).then_some(0.0);
                conv.backward(
                    x.data(),
                    w.data(),
                    g,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                    gd.as_mut(),
                );
                for (id, buf) in [(input, gx), (kernel, gw), (dilation, gd.map(|v| vec![v]))] {
                    if let Some(buf) = buf {
                        let dst = slot(adj, id, buf.len());
                        dst.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
                    }
                }
            }
            &Op::Pointwise {
                input,
                weight,
                bias,
            } => {
                let x = self.tensor(input);
                let w = self.tensor(weight);
                let (in_ch, len) = (x.shape()[0], x.shape()[1]);
                let out_ch = w.shape()[0];
                let mut gx = wants(input).then(|| vec![0.0; x.numel()]);
                let mut gw = wants(weight).then(|| vec![0.0; w.numel()]);
                let mut gb = bias.filter(|&b| wants(b)).map(|_| vec![0.0; out_ch]);
                pointwise_backward(
                    x.data(),
                    in_ch,
                    len,
                    w.data(),
                    out_ch,
                    g,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                let mut pairs = vec![(input, gx), (weight, gw)];
                if let Some(b) = bias {
                    pairs.push((b, gb));
                }
                for (id, buf) in pairs {
                    if let Some(buf) = buf {
                        let dst = slot(adj, id, buf.len());
                        dst.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
                    }
                }
            }
            &Op::AddBias { input, bias } => {
                let len = self.tensor(input).shape()[1];
                if wants(input) {
                    let dst = slot(adj, input, g.len());
                    dst.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
                if wants(bias) {
                    let ch = self.tensor(bias).numel();
                    let dst = slot(adj, bias, ch);
                    for (d, row) in dst.iter_mut().zip(g.chunks_exact(len)) {
                        *d += row.iter().sum::<f64>();
                    }
                }
            }
            &Op::Add(a, b) => {
                for id in [a, b] {
                    if wants(id) {
                        let dst = slot(adj, id, g.len());
                        dst.iter_mut().zip(g).for_each(|(acc, v)| *acc += v);
                    }
                }
            }
            &Op::Gated { filter, gate } => {
                let f = self.tensor(filter).data();
                let s = self.tensor(gate).data();
                if wants(filter) {
                    let dst = slot(adj, filter, g.len());
                    for ((d, &gv), (&fv, &sv)) in dst.iter_mut().zip(g).zip(f.iter().zip(s)) {
                        let th = fv.tanh();
                        *d += gv * sigmoid(sv) * (1.0 - th * th);
                    }
                }
                if wants(gate) {
                    let dst = slot(adj, gate, g.len());
                    for ((d, &gv), (&fv, &sv)) in dst.iter_mut().zip(g).zip(f.iter().zip(s)) {
                        let sg = sigmoid(sv);
                        *d += gv * fv.tanh() * sg * (1.0 - sg);
                    }
                }
            }
            &Op::Relu(x) => {
                if wants(x) {
                    let xv = self.tensor(x).data();
                    let dst = slot(adj, x, g.len());
                    for ((d, &gv), &v) in dst.iter_mut().zip(g).zip(xv) {
                        if v > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            &Op::Mse { pred, target } => {
                if wants(pred) {
                    let p = self.tensor(pred).data();
                    let t = self.tensor(target).data();
                    let scale = 2.0 * g[0] / p.len() as f64;
                    let dst = slot(adj, pred, p.len());
                    for ((d, &a), &b) in dst.iter_mut().zip(p).zip(t) {
                        *d += scale * (a - b);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(g: &mut Graph, data: &[f64]) -> NodeId {
        g.leaf(Tensor::new(&[1, data.len()], data.to_vec()).unwrap())
    }

    fn kernel(g: &mut Graph, taps: &[f64]) -> NodeId {
        g.leaf(Tensor::new(&[1, 1, taps.len()], taps.to_vec()).unwrap())
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        for d in [1.0, 1.7, 3.0] {
            let mut g = Graph::new();
            let x = signal(&mut g, &[0.0, 1.0, 2.0, 3.0, 4.0]);
            let w = kernel(&mut g, &[0.0, 1.0, 0.0]);
            let dn = g.leaf(Tensor::scalar(d));
            let y = g.conv1d_frac(x, w, dn, PaddingPolicy::Same).unwrap();
            assert_eq!(g.tensor(y).data(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        }
    }

    #[test]
    fn left_tap_interpolates_between_samples() {
        let mut g = Graph::new();
        let x = signal(&mut g, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let w = kernel(&mut g, &[1.0, 0.0, 0.0]);
        let d = g.leaf(Tensor::scalar(1.5));
        let y = g.conv1d_frac(x, w, d, PaddingPolicy::Same).unwrap();
        // out[t] = x̂(t − 1.5); out[3] = (x[1] + x[2]) / 2
        assert!((g.tensor(y).data()[3] - 1.5).abs() < 1e-15);
        assert_eq!(g.tensor(y).data()[0], 0.0);
    }

    #[test]
    fn conv_rejects_bad_arguments() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[2, 4], vec![0.0; 8]).unwrap());
        let even = g.leaf(Tensor::new(&[1, 2, 2], vec![0.0; 4]).unwrap());
        let wrong_ch = g.leaf(Tensor::new(&[1, 3, 3], vec![0.0; 9]).unwrap());
        let d = g.leaf(Tensor::scalar(1.0));
        let small = g.leaf(Tensor::scalar(0.5));
        assert!(matches!(
            g.conv1d_frac(x, even, d, PaddingPolicy::Same),
            Err(TensorError::EvenKernel { taps: 2 })
        ));
        assert!(matches!(
            g.conv1d_frac(x, wrong_ch, d, PaddingPolicy::Same),
            Err(TensorError::ChannelMismatch { .. })
        ));
        let ok = g.leaf(Tensor::new(&[1, 2, 3], vec![0.0; 6]).unwrap());
        assert!(matches!(
            g.conv1d_frac(x, ok, small, PaddingPolicy::Same),
            Err(TensorError::InvalidDilation { .. })
        ));
        let nan = g.leaf(Tensor::new(&[2, 4], vec![f64::NAN; 8]).unwrap());
        assert!(matches!(
            g.conv1d_frac(nan, ok, d, PaddingPolicy::Same),
            Err(TensorError::NonFinite { .. })
        ));
    }

    #[test]
    fn gated_unit_values() {
        let mut g = Graph::new();
        let f = g.leaf(Tensor::new(&[3], vec![0.0, 40.0, 1.0]).unwrap());
        let s = g.leaf(Tensor::new(&[3], vec![0.0, 40.0, 0.0]).unwrap());
        let y = g.gated_unit(f, s).unwrap();
        let out = g.tensor(y).data();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 1.0).abs() < 1e-12);
        assert!((out[2] - 0.380_797_077_977_882_3).abs() < 1e-12);

        let bad = g.leaf(Tensor::new(&[2], vec![0.0; 2]).unwrap());
        assert!(g.gated_unit(f, bad).is_err());
    }

    #[test]
    fn mse_values_and_gradient() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::new(&[1], vec![3.0]).unwrap().requires_grad(true));
        let t = g.leaf(Tensor::new(&[1], vec![1.0]).unwrap());
        let l = g.mse_loss(p, t).unwrap();
        assert_eq!(g.tensor(l).item(), 4.0);
        g.backward(l).unwrap();
        assert_eq!(g.tensor(p).grad(), &[4.0]);

        let mut g = Graph::new();
        let p = g.leaf(Tensor::new(&[2], vec![1.0, 1.0]).unwrap());
        let t = g.leaf(Tensor::new(&[2], vec![0.0, 0.0]).unwrap());
        let l = g.mse_loss(p, t).unwrap();
        assert_eq!(g.tensor(l).item(), 1.0);
        let same = g.mse_loss(p, p).unwrap();
        assert_eq!(g.tensor(same).item(), 0.0);
    }

    #[test]
    fn mse_rejects_differentiable_target() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::new(&[2], vec![0.0; 2]).unwrap());
        let t = g.leaf(Tensor::new(&[2], vec![0.0; 2]).unwrap().requires_grad(true));
        assert!(matches!(g.mse_loss(p, t), Err(TensorError::TargetRequiresGrad)));
        let short = g.leaf(Tensor::new(&[3], vec![0.0; 3]).unwrap());
        assert!(matches!(g.mse_loss(p, short), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn backward_accumulates_and_ignores_unused_params() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[1], vec![2.0]).unwrap().requires_grad(true));
        let unused = g.leaf(Tensor::new(&[1], vec![7.0]).unwrap().requires_grad(true));
        let zero = g.leaf(Tensor::new(&[1], vec![0.0]).unwrap());
        let l = g.mse_loss(x, zero).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.tensor(x).grad(), &[4.0]);
        assert_eq!(g.tensor(unused).grad(), &[0.0]);
        g.backward(l).unwrap();
        assert_eq!(g.tensor(x).grad(), &[8.0]);
        g.zero_grad();
        assert_eq!(g.tensor(x).grad(), &[0.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad(true));
        let y = g.relu(x);
        assert!(matches!(g.backward(y), Err(TensorError::NotScalar { .. })));
    }

    fn dilation_grad(d: f64) -> f64 {
        let mut g = Graph::new();
        let x = signal(&mut g, &[0.0, 3.0, -1.0, 4.0, 2.0, -2.0, 5.0]);
        let k = kernel(&mut g, &[1.0, 0.0, 1.0]);
        let dn = g.leaf(Tensor::scalar(d).requires_grad(true));
        let y = g.conv1d_frac(x, k, dn, PaddingPolicy::Same).unwrap();
        let t = g.leaf(Tensor::zeros(&[1, 7]).unwrap());
        let l = g.mse_loss(y, t).unwrap();
        g.backward(l).unwrap();
        g.tensor(dn).grad()[0]
    }

    fn loss_at(d: f64) -> f64 {
        let mut g = Graph::new();
        let x = signal(&mut g, &[0.0, 3.0, -1.0, 4.0, 2.0, -2.0, 5.0]);
        let k = kernel(&mut g, &[1.0, 0.0, 1.0]);
        let dn = g.leaf(Tensor::scalar(d));
        let y = g.conv1d_frac(x, k, dn, PaddingPolicy::Same).unwrap();
        let t = g.leaf(Tensor::zeros(&[1, 7]).unwrap());
        let l = g.mse_loss(y, t).unwrap();
        g.tensor(l).item()
    }

    #[test]
    fn integer_dilation_uses_feasible_one_sided_slope() {
        let h = 1e-7;
        // interior integer: left limit
        let left = (loss_at(2.0) - loss_at(2.0 - h)) / h;
        assert!((dilation_grad(2.0) - left).abs() < 1e-4 * left.abs().max(1.0));
        // lower bound: right limit
        let right = (loss_at(1.0 + h) - loss_at(1.0)) / h;
        assert!((dilation_grad(1.0) - right).abs() < 1e-4 * right.abs().max(1.0));
    }

    #[test]
    fn leaf_starts_with_zero_grad() {
        let mut t = Tensor::scalar(2.0).requires_grad(true);
        t.grad_mut()[0] = 7.0;
        let mut g = Graph::new();
        let id = g.leaf(t);
        assert_eq!(g.tensor(id).grad(), &[0.0]);
    }
}
