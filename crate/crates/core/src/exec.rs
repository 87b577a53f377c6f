//! Forward evaluation and reverse-mode differentiation of a [`Graph`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{GradError, Result};
use crate::graph::{conv_geom, Graph, NodeId, Op};
use crate::kernels::{self, axis_split, ConvGeom, ConvPlan, ConvSource};
use crate::loss;
use crate::param::{ParamId, ParamSet};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Convolutions whose batched column matrices exceed this many values
/// rebuild them per sample in the backward pass instead of keeping them;
/// the rebuilt columns stay in cache, the kept ones would not.
const KEEP_COLS_LIMIT: usize = 1 << 20;

/// Upstream gradient injected at a node before the reverse sweep.
#[derive(Clone, Debug)]
pub struct Seed<T> {
    pub node: NodeId,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Seed<T> {
    /// Weighted scalar loss seed.
    pub fn scalar(node: NodeId, weight: T) -> Self {
        Self { node, grad: Tensor::scalar(weight) }
    }
}

/// Which leaves the reverse sweep should produce gradients for.
#[derive(Clone, Debug, Default)]
pub struct GradRequest {
    pub params: BTreeSet<ParamId>,
    pub inputs: bool,
}

impl GradRequest {
    pub fn params(ids: impl IntoIterator<Item = ParamId>) -> Self {
        Self { params: ids.into_iter().collect(), inputs: false }
    }

    pub fn with_inputs(mut self) -> Self {
        self.inputs = true;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Gradients<T> {
    /// One entry per requested parameter (zeros when unreachable).
    pub params: BTreeMap<ParamId, Tensor<T>>,
    /// Per input slot, present when inputs were requested.
    pub inputs: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id)
    }

    /// Flattened concatenation of the listed parameter gradients.
    pub fn flatten(&self, ids: &[ParamId]) -> Vec<T> {
        ids.iter()
            .flat_map(|id| self.params.get(id).map(|t| t.data().to_vec()).unwrap_or_default())
            .collect()
    }
}

/// Holds cached activations between a forward pass and its backward pass.
#[derive(Debug)]
pub struct Executor<T> {
    values: Vec<Option<Tensor<T>>>,
    /// Forward column matrices of conv nodes, reused by the weight gradient.
    cols: Vec<Option<Vec<T>>>,
    plans: HashMap<ConvGeom, Arc<ConvPlan>>,
    tag_counts: BTreeMap<String, usize>,
    forwarded: bool,
}

impl<T: Scalar> Default for Executor<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Executor<T> {
    pub fn new() -> Self {
        Self { values: Vec::new(), cols: Vec::new(), plans: HashMap::new(), tag_counts: BTreeMap::new(), forwarded: false }
    }

    /// Number of times nodes carrying `tag` were evaluated.
    pub fn tag_count(&self, tag: &str) -> usize {
        self.tag_counts.get(tag).copied().unwrap_or(0)
    }

    pub fn reset_counters(&mut self) {
        self.tag_counts.clear();
    }

    /// Cached value of a non-parameter node.
    pub fn value(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.values.get(id.0).and_then(|v| v.as_ref())
    }

    /// Scalar value of a `[1]`-shaped node.
    pub fn scalar(&self, id: NodeId) -> Option<T> {
        self.value(id).and_then(|t| t.data().first().copied())
    }

    /// Evaluates every node; returns the graph's marked outputs.
    pub fn forward(&mut self, graph: &Graph, params: &ParamSet<T>, inputs: Vec<Tensor<T>>) -> Result<Vec<Tensor<T>>> {
        if inputs.len() != graph.inputs().len() {
            return Err(GradError::InputCount { expected: graph.inputs().len(), actual: inputs.len() });
        }
        self.values = vec![None; graph.len()];
        // column buffers are kept across passes to avoid reallocating them
        self.cols.resize(graph.len(), None);
        self.forwarded = false;
        for (slot, tensor) in graph.inputs().iter().zip(inputs) {
            tensor.expect_shape(graph.shape(*slot), "graph input")?;
            self.values[slot.0] = Some(tensor);
        }
        for i in 0..graph.len() {
            self.eval_node(graph, params, NodeId(i))?;
        }
        self.forwarded = true;
        Ok(graph
            .outputs()
            .iter()
            .filter_map(|&o| self.value_in(graph, params, o).ok().cloned())
            .collect())
    }

    /// Re-evaluates only the nodes downstream of replaced inputs or changed
    /// parameters, keeping every other cached activation.
    pub fn refresh(
        &mut self,
        graph: &Graph,
        params: &ParamSet<T>,
        replaced_inputs: Vec<(usize, Tensor<T>)>,
        changed_params: &[ParamId],
    ) -> Result<()> {
        if !self.forwarded {
            return Err(GradError::NotForwarded);
        }
        let mut dirty = vec![false; graph.len()];
        for (index, tensor) in replaced_inputs {
            let slot = *graph
                .inputs()
                .get(index)
                .ok_or(GradError::InputCount { expected: graph.inputs().len(), actual: index + 1 })?;
            tensor.expect_shape(graph.shape(slot), "graph input")?;
            self.values[slot.0] = Some(tensor);
            dirty[slot.0] = true;
        }
        for id in changed_params {
            if let Some(n) = graph.param_node(*id) {
                dirty[n.0] = true;
            }
        }
        for (i, node) in graph.nodes().iter().enumerate() {
            if matches!(node.op, Op::Input { .. } | Op::Param(_)) {
                continue;
            }
            if node.op.inputs().iter().any(|x| dirty[x.0]) {
                dirty[i] = true;
                self.eval_node(graph, params, NodeId(i))?;
            }
        }
        Ok(())
    }

    fn value_in<'a>(&'a self, graph: &Graph, params: &'a ParamSet<T>, id: NodeId) -> Result<&'a Tensor<T>> {
        match graph.node(id).op {
            Op::Param(pid) => Ok(params.get(pid)),
            _ => self.values[id.0].as_ref().ok_or(GradError::NotForwarded),
        }
    }

    fn plan(&mut self, geom: ConvGeom) -> Arc<ConvPlan> {
        self.plans.entry(geom).or_insert_with(|| Arc::new(ConvPlan::new(&geom))).clone()
    }

    fn eval_node(&mut self, graph: &Graph, params: &ParamSet<T>, id: NodeId) -> Result<()> {
        let node = graph.node(id);
        if let Op::Conv2d { x, w, stride, padding, .. } = &node.op {
            let plan = self.plan(conv_geom(graph.shape(*x), graph.shape(*w), *stride, *padding));
            let mut cols = self.cols[id.0].take().unwrap_or_default();
            let keep = node.shape[0] * plan.cols_len() <= KEEP_COLS_LIMIT;
            cols.resize(if keep { node.shape[0] } else { 1 } * plan.cols_len(), T::zero());
            let result = self.eval_conv(graph, params, id, &plan, &mut cols, keep);
            self.cols[id.0] = keep.then_some(cols);
            return result;
        }
        let shape = node.shape.clone();
        let v = |n: NodeId| self.value_in(graph, params, n);
        let data: Vec<T> = match &node.op {
            Op::Input { .. } => return Ok(()),
            Op::Param(pid) => {
                params.get(*pid).expect_shape(&shape, params.name(*pid))?;
                return Ok(());
            }
            Op::Dense { x, w, b } => {
                let (xs, ws) = (graph.shape(*x), graph.shape(*w));
                kernels::dense_forward(v(*x)?.data(), v(*w)?.data(), v(*b)?.data(), xs[0], xs[1], ws[0])
            }
            Op::Conv2d { .. } => unreachable!("handled by eval_conv"),
            Op::Upsample2(x) => {
                let xs = graph.shape(*x);
                let r = xs.len();
                let planes = xs[..r - 2].iter().product();
                kernels::upsample2_forward(v(*x)?.data(), planes, xs[r - 2], xs[r - 1])
            }
            Op::Relu(x) => v(*x)?.data().iter().map(|&a| a.max(T::zero())).collect(),
            Op::Sigmoid(x) => v(*x)?.data().iter().map(|&a| T::one() / (T::one() + (-a).exp())).collect(),
            Op::Concat { inputs, axis } => {
                let (outer, _) = axis_split(&shape, *axis);
                let mut out = Vec::with_capacity(shape.iter().product());
                let parts: Vec<(&[T], usize)> = inputs
                    .iter()
                    .map(|&i| Ok((v(i)?.data(), axis_split(graph.shape(i), *axis).1)))
                    .collect::<Result<_>>()?;
                for o in 0..outer {
                    for (data, chunk) in &parts {
                        out.extend_from_slice(&data[o * chunk..(o + 1) * chunk]);
                    }
                }
                out
            }
            Op::Reshape(x) | Op::Grl { x, .. } => v(*x)?.data().to_vec(),
            Op::MeanReduce(x) => {
                let t = v(*x)?;
                vec![t.sum() / T::from_usize(t.len()).unwrap_or_else(T::one)]
            }
            Op::Mse { pred, target } => vec![loss::mse_slices(v(*pred)?.data(), v(*target)?.data())],
            Op::Bce { p, target } => vec![loss::bce_slices(v(*p)?.data(), v(*target)?.data())],
        };
        self.store(graph, id, data)
    }

    fn eval_conv(
        &mut self,
        graph: &Graph,
        params: &ParamSet<T>,
        id: NodeId,
        plan: &ConvPlan,
        cols: &mut [T],
        keep: bool,
    ) -> Result<()> {
        let node = graph.node(id);
        let Op::Conv2d { x, w, b, .. } = &node.op else { unreachable!() };
        let v = |n: NodeId| self.value_in(graph, params, n);
        let data = kernels::conv2d_forward_planned(plan, v(*x)?.data(), v(*w)?.data(), v(*b)?.data(), node.shape[0], cols, keep);
        self.store(graph, id, data)
    }

    fn store(&mut self, graph: &Graph, id: NodeId, data: Vec<T>) -> Result<()> {
        let node = graph.node(id);
        if !data.iter().all(|a| a.is_finite()) {
            return Err(GradError::NonFinite { node: id, op: node.op.name() });
        }
        if let Some(tag) = &node.tag {
            *self.tag_counts.entry(tag.clone()).or_insert(0) += 1;
        }
        self.values[id.0] = Some(Tensor::new(node.shape.clone(), data)?);
        Ok(())
    }

    fn needs_grad(graph: &Graph, request: &GradRequest) -> Vec<bool> {
        let mut needs = vec![false; graph.len()];
        for (i, node) in graph.nodes().iter().enumerate() {
            needs[i] = match &node.op {
                Op::Input { .. } => request.inputs,
                Op::Param(pid) => request.params.contains(pid),
                // a zero-weight reversal blocks the path entirely
                Op::Grl { x, lambda } => *lambda != 0.0 && needs[x.0],
                op => op.inputs().iter().any(|x| needs[x.0]),
            };
        }
        needs
    }

    /// Reverse sweep from `seeds` over the cached forward pass.
    pub fn backward(
        &self,
        graph: &Graph,
        params: &ParamSet<T>,
        seeds: &[Seed<T>],
        request: &GradRequest,
    ) -> Result<Gradients<T>> {
        if !self.forwarded {
            return Err(GradError::NotForwarded);
        }
        let needs = Self::needs_grad(graph, request);
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; graph.len()];
        for seed in seeds {
            seed.grad.expect_shape(graph.shape(seed.node), "backward seed")?;
            if !needs[seed.node.0] || seed.grad.data().iter().all(|g| g.is_zero()) {
                continue;
            }
            accumulate(&mut grads, seed.node, seed.grad.data(), graph.shape(seed.node))?;
        }

        for i in (0..graph.len()).rev() {
            if !needs[i] {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = graph.node(NodeId(i));
            let g = g.data();
            let v = |n: NodeId| self.value_in(graph, params, n);
            match &node.op {
                Op::Input { .. } | Op::Param(_) => {
                    grads[i] = Some(Tensor::new(node.shape.clone(), g.to_vec())?);
                }
                Op::Dense { x, w, b } => {
                    let (xs, ws) = (graph.shape(*x), graph.shape(*w));
                    let (batch, inp, out) = (xs[0], xs[1], ws[0]);
                    let mut dx = needs[x.0].then(|| vec![T::zero(); batch * inp]);
                    let mut dw = needs[w.0].then(|| vec![T::zero(); out * inp]);
                    let mut db = needs[b.0].then(|| vec![T::zero(); out]);
                    kernels::dense_backward(
                        g,
                        v(*x)?.data(),
                        v(*w)?.data(),
                        batch,
                        inp,
                        out,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    add_opt(&mut grads, graph, *x, dx)?;
                    add_opt(&mut grads, graph, *w, dw)?;
                    add_opt(&mut grads, graph, *b, db)?;
                }
                Op::Conv2d { x, w, b, stride, padding } => {
                    let geom = conv_geom(graph.shape(*x), graph.shape(*w), *stride, *padding);
                    let plan = self.plans.get(&geom).ok_or(GradError::NotForwarded)?;
                    let source = match self.cols[i].as_deref() {
                        Some(cols) => ConvSource::Cols(cols),
                        None => ConvSource::Input(v(*x)?.data()),
                    };
                    let batch = node.shape[0];
                    let (xn, wn) = (v(*x)?.len(), v(*w)?.len());
                    let mut dx = needs[x.0].then(|| vec![T::zero(); xn]);
                    let mut dw = needs[w.0].then(|| vec![T::zero(); wn]);
                    let mut db = needs[b.0].then(|| vec![T::zero(); geom.out_channels]);
                    kernels::conv2d_backward_planned(
                        plan,
                        g,
                        source,
                        v(*w)?.data(),
                        batch,
                        dx.as_deref_mut(),
                        dw.as_deref_mut(),
                        db.as_deref_mut(),
                    );
                    add_opt(&mut grads, graph, *x, dx)?;
                    add_opt(&mut grads, graph, *w, dw)?;
                    add_opt(&mut grads, graph, *b, db)?;
                }
                Op::Upsample2(x) => {
                    let xs = graph.shape(*x);
                    let r = xs.len();
                    let planes = xs[..r - 2].iter().product();
                    let mut dx = vec![T::zero(); v(*x)?.len()];
                    kernels::upsample2_backward(g, planes, xs[r - 2], xs[r - 1], &mut dx);
                    accumulate(&mut grads, *x, &dx, xs)?;
                }
                Op::Relu(x) => {
                    let y = self.values[i].as_ref().ok_or(GradError::NotForwarded)?;
                    let dx: Vec<T> = g
                        .iter()
                        .zip(y.data())
                        .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
                        .collect();
                    accumulate(&mut grads, *x, &dx, graph.shape(*x))?;
                }
                Op::Sigmoid(x) => {
                    let y = self.values[i].as_ref().ok_or(GradError::NotForwarded)?;
                    let dx: Vec<T> = g.iter().zip(y.data()).map(|(&g, &y)| g * y * (T::one() - y)).collect();
                    accumulate(&mut grads, *x, &dx, graph.shape(*x))?;
                }
                Op::Concat { inputs, axis } => {
                    let (outer, total) = axis_split(&node.shape, *axis);
                    let mut offset = 0;
                    for &inp in inputs {
                        let (_, chunk) = axis_split(graph.shape(inp), *axis);
                        if needs[inp.0] {
                            let mut dx = Vec::with_capacity(outer * chunk);
                            for o in 0..outer {
                                let start = o * total + offset;
                                dx.extend_from_slice(&g[start..start + chunk]);
                            }
                            accumulate(&mut grads, inp, &dx, graph.shape(inp))?;
                        }
                        offset += chunk;
                    }
                }
                Op::Reshape(x) => accumulate(&mut grads, *x, g, graph.shape(*x))?,
                Op::Grl { x, lambda } => {
                    let dx = kernels::grl_backward(g, T::from_f64_lossy(*lambda));
                    accumulate(&mut grads, *x, &dx, graph.shape(*x))?;
                }
                Op::MeanReduce(x) => {
                    let n = v(*x)?.len();
                    let share = g[0] / T::from_usize(n).unwrap_or_else(T::one);
                    accumulate(&mut grads, *x, &vec![share; n], graph.shape(*x))?;
                }
                Op::Mse { pred, target } => {
                    let (p, t) = (v(*pred)?.data(), v(*target)?.data());
                    let scale = g[0] * T::from_f64_lossy(2.0) / T::from_usize(p.len()).unwrap_or_else(T::one);
                    let dp: Vec<T> = p.iter().zip(t).map(|(&p, &t)| scale * (p - t)).collect();
                    if needs[target.0] {
                        let dt: Vec<T> = dp.iter().map(|&d| -d).collect();
                        accumulate(&mut grads, *target, &dt, graph.shape(*target))?;
                    }
                    if needs[pred.0] {
                        accumulate(&mut grads, *pred, &dp, graph.shape(*pred))?;
                    }
                }
                Op::Bce { p, target } => {
                    let (pv, tv) = (v(*p)?.data(), v(*target)?.data());
                    if needs[p.0] {
                        let n = pv.len();
                        let dp: Vec<T> = pv.iter().zip(tv).map(|(&p, &t)| g[0] * loss::bce_grad(p, t, n)).collect();
                        accumulate(&mut grads, *p, &dp, graph.shape(*p))?;
                    }
                    if needs[target.0] {
                        let n = T::from_usize(pv.len()).unwrap_or_else(T::one);
                        let dt: Vec<T> = pv
                            .iter()
                            .map(|&p| {
                                let c = loss::clamp_prob(p);
                                g[0] * ((T::one() - c).ln() - c.ln()) / n
                            })
                            .collect();
                        accumulate(&mut grads, *target, &dt, graph.shape(*target))?;
                    }
                }
            }
        }

        let mut out = Gradients { params: BTreeMap::new(), inputs: Vec::new() };
        for &pid in &request.params {
            let t = graph
                .param_node(pid)
                .and_then(|n| grads[n.0].take())
                .unwrap_or_else(|| Tensor::zeros(params.get(pid).shape().to_vec()));
            out.params.insert(pid, t);
        }
        if request.inputs {
            out.inputs = graph
                .inputs()
                .iter()
                .map(|&n| Some(grads[n.0].take().unwrap_or_else(|| Tensor::zeros(graph.shape(n).to_vec()))))
                .collect();
        }
        Ok(out)
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], node: NodeId, g: &[T], shape: &[usize]) -> Result<()> {
    match &mut grads[node.0] {
        Some(t) => {
            for (a, &b) in t.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(Tensor::new(shape.to_vec(), g.to_vec())?),
    }
    Ok(())
}

fn add_opt<T: Scalar>(grads: &mut [Option<Tensor<T>>], graph: &Graph, node: NodeId, g: Option<Vec<T>>) -> Result<()> {
    match g {
        Some(g) => accumulate(grads, node, &g, graph.shape(node)),
        None => Ok(()),
    }
}
