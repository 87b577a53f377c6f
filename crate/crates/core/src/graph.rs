//! Static computation graphs.
//!
//! A [`Graph`] is built once per model configuration and batch size, then
//! replayed by an [`crate::Executor`]. Shapes are fully static and include
//! the batch dimension. Nodes are appended in topological order, so the node
//! index is also the evaluation order.

use std::collections::HashMap;

use crate::error::{GradError, Result};
use crate::kernels::ConvGeom;
use crate::param::{ParamId, ParamSet};
use crate::scalar::Scalar;
use crate::tensor::numel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Positional input slot.
    Input { index: usize },
    Param(ParamId),
    /// `[B, in] x [out, in]^T + [out]`
    Dense { x: NodeId, w: NodeId, b: NodeId },
    /// `[B, C, H, W]` with kernel `[O, C, kh, kw]`, zero padding.
    Conv2d { x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize },
    /// Nearest-neighbour x2 on the trailing two axes.
    Upsample2(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Concat { inputs: Vec<NodeId>, axis: usize },
    Reshape(NodeId),
    /// Mean over every element, shape `[1]`.
    MeanReduce(NodeId),
    /// Identity forward, `-lambda * g` backward.
    Grl { x: NodeId, lambda: f64 },
    Mse { pred: NodeId, target: NodeId },
    Bce { p: NodeId, target: NodeId },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Param(_) => "param",
            Op::Dense { .. } => "dense",
            Op::Conv2d { .. } => "conv2d",
            Op::Upsample2(_) => "upsample2",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Concat { .. } => "concat",
            Op::Reshape(_) => "reshape",
            Op::MeanReduce(_) => "mean",
            Op::Grl { .. } => "grl",
            Op::Mse { .. } => "mse",
            Op::Bce { .. } => "bce",
        }
    }

    pub fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input { .. } | Op::Param(_) => vec![],
            Op::Dense { x, w, b } | Op::Conv2d { x, w, b, .. } => vec![*x, *w, *b],
            Op::Upsample2(x) | Op::Relu(x) | Op::Sigmoid(x) | Op::Reshape(x) | Op::MeanReduce(x) => {
                vec![*x]
            }
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Grl { x, .. } => vec![*x],
            Op::Mse { pred, target } => vec![*pred, *target],
            Op::Bce { p, target } => vec![*p, *target],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub shape: Vec<usize>,
    /// Optional label; the executor counts evaluations of tagged nodes.
    pub tag: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn mismatch(context: &str, expected: &[usize], actual: &[usize]) -> GradError {
    GradError::ShapeMismatch {
        context: context.to_string(),
        expected: expected.to_vec(),
        actual: actual.to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape, tag: None });
        id
    }

    fn check(&self, id: NodeId) -> Result<&[usize]> {
        self.nodes
            .get(id.0)
            .map(|n| n.shape.as_slice())
            .ok_or_else(|| GradError::InvalidGraph(format!("unknown node {id:?}")))
    }

    pub fn mark_output(&mut self, id: NodeId) {
        self.outputs.push(id);
    }

    pub fn set_tag(&mut self, id: NodeId, tag: &str) {
        self.nodes[id.0].tag = Some(tag.to_string());
    }

    pub fn input(&mut self, shape: Vec<usize>) -> NodeId {
        let index = self.inputs.len();
        let id = self.push(Op::Input { index }, shape);
        self.inputs.push(id);
        id
    }

    /// Node reading parameter `id`; repeated calls share one node.
    pub fn param<T: Scalar>(&mut self, params: &ParamSet<T>, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = self.push(Op::Param(id), params.get(id).shape().to_vec());
        self.param_nodes.insert(id, node);
        node
    }

    pub fn param_node(&self, id: ParamId) -> Option<NodeId> {
        self.param_nodes.get(&id).copied()
    }

    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xs = self.check(x)?.to_vec();
        let ws = self.check(w)?.to_vec();
        let bs = self.check(b)?.to_vec();
        if xs.len() != 2 || ws.len() != 2 || ws[1] != xs[1] {
            return Err(mismatch("dense input", &[xs.first().copied().unwrap_or(0), ws.get(1).copied().unwrap_or(0)], &xs));
        }
        if bs != [ws[0]] {
            return Err(mismatch("dense bias", &[ws[0]], &bs));
        }
        Ok(self.push(Op::Dense { x, w, b }, vec![xs[0], ws[0]]))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        let xs = self.check(x)?.to_vec();
        let ws = self.check(w)?.to_vec();
        let bs = self.check(b)?.to_vec();
        if xs.len() != 4 || ws.len() != 4 || ws[1] != xs[1] {
            return Err(mismatch("conv2d input", &ws, &xs));
        }
        if bs != [ws[0]] {
            return Err(mismatch("conv2d bias", &[ws[0]], &bs));
        }
        if stride == 0 || xs[2] + 2 * padding < ws[2] || xs[3] + 2 * padding < ws[3] {
            return Err(GradError::InvalidGraph(format!(
                "conv2d kernel {:?} does not fit input {:?} (stride {stride}, padding {padding})",
                ws, xs
            )));
        }
        let geom = conv_geom(&xs, &ws, stride, padding);
        Ok(self.push(
            Op::Conv2d { x, w, b, stride, padding },
            vec![xs[0], ws[0], geom.out_height(), geom.out_width()],
        ))
    }

    pub fn upsample2(&mut self, x: NodeId) -> Result<NodeId> {
        let mut s = self.check(x)?.to_vec();
        if s.len() < 2 {
            return Err(mismatch("upsample2", &[0, 0], &s));
        }
        let r = s.len();
        s[r - 1] *= 2;
        s[r - 2] *= 2;
        Ok(self.push(Op::Upsample2(x), s))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.check(x)?.to_vec();
        Ok(self.push(Op::Relu(x), s))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.check(x)?.to_vec();
        Ok(self.push(Op::Sigmoid(x), s))
    }

    // negated so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn grl(&mut self, x: NodeId, lambda: f64) -> Result<NodeId> {
        if !(lambda >= 0.0) {
            return Err(GradError::InvalidGraph(format!("grl lambda must be >= 0, got {lambda}")));
        }
        let s = self.check(x)?.to_vec();
        Ok(self.push(Op::Grl { x, lambda }, s))
    }

    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = self
            .check(*inputs.first().ok_or_else(|| GradError::InvalidGraph("empty concat".into()))?)?
            .to_vec();
        if axis >= first.len() {
            return Err(GradError::InvalidGraph(format!("concat axis {axis} out of range")));
        }
        let mut out = first.clone();
        out[axis] = 0;
        for &i in inputs {
            let s = self.check(i)?;
            let same_rest = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !same_rest {
                return Err(mismatch("concat", &first, s));
            }
            out[axis] += s[axis];
        }
        Ok(self.push(Op::Concat { inputs: inputs.to_vec(), axis }, out))
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let s = self.check(x)?;
        if numel(s) != numel(&shape) {
            return Err(mismatch("reshape", s, &shape));
        }
        Ok(self.push(Op::Reshape(x), shape))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.check(x)?;
        Ok(self.push(Op::MeanReduce(x), vec![1]))
    }

    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        let ps = self.check(pred)?.to_vec();
        let ts = self.check(target)?;
        if ps != ts {
            return Err(mismatch("mse", &ps, ts));
        }
        Ok(self.push(Op::Mse { pred, target }, vec![1]))
    }

    pub fn bce(&mut self, p: NodeId, target: NodeId) -> Result<NodeId> {
        let ps = self.check(p)?.to_vec();
        let ts = self.check(target)?;
        if ps != ts {
            return Err(mismatch("bce", &ps, ts));
        }
        Ok(self.push(Op::Bce { p, target }, vec![1]))
    }
}

pub(crate) fn conv_geom(xs: &[usize], ws: &[usize], stride: usize, padding: usize) -> ConvGeom {
    ConvGeom {
        in_channels: xs[1],
        height: xs[2],
        width: xs[3],
        out_channels: ws[0],
        kernel_h: ws[2],
        kernel_w: ws[3],
        stride,
        padding,
    }
}
