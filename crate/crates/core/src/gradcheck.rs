//! Central finite-difference verification of reverse-mode gradients.
//!
//! The numerical side only ever calls [`Executor::forward`], so it shares no
//! code with the reverse sweep it checks.

use rand::Rng as _;

use crate::error::Result;
use crate::exec::{Executor, GradRequest, Seed};
use crate::graph::Graph;
use crate::param::ParamSet;
use crate::rng::stream_rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Relative error with a floor so that near-zero gradients are compared
/// absolutely.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

fn objective(graph: &Graph, params: &ParamSet<f64>, inputs: &[Tensor<f64>], proj: &[Tensor<f64>]) -> Result<f64> {
    let mut ex = Executor::new();
    let outs = ex.forward(graph, params, inputs.to_vec())?;
    Ok(outs.iter().zip(proj).map(|(o, r)| o.dot(r)).sum())
}

/// Checks every parameter and input element of `graph` against central
/// differences of `sum_k <r_k, output_k>` with fixed random projections.
pub fn check_graph(graph: &Graph, params: &ParamSet<f64>, inputs: &[Tensor<f64>], eps: f64, seed: u64) -> Result<GradCheckReport> {
    let mut rng = stream_rng(seed, 0x6772_6164);
    let proj: Vec<Tensor<f64>> = graph
        .outputs()
        .iter()
        .map(|&o| {
            let shape = graph.shape(o).to_vec();
            let n = shape.iter().product::<usize>();
            let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            Tensor::new(shape, data)
        })
        .collect::<Result<_>>()?;

    let mut ex = Executor::new();
    ex.forward(graph, params, inputs.to_vec())?;
    let seeds: Vec<Seed<f64>> = graph
        .outputs()
        .iter()
        .zip(&proj)
        .map(|(&node, r)| Seed { node, grad: r.clone() })
        .collect();
    let request = GradRequest::params(params.ids()).with_inputs();
    let grads = ex.backward(graph, params, &seeds, &request)?;

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0 };
    let mut record = |label: String, a: f64, n: f64| {
        let e = rel_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = format!("{label}: analytic {a:.9e} numeric {n:.9e}");
        }
    };

    let mut work = params.clone();
    for id in params.ids() {
        for j in 0..params.get(id).len() {
            let orig = params.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = orig + eps;
            let up = objective(graph, &work, inputs, &proj)?;
            work.get_mut(id).data_mut()[j] = orig - eps;
            let down = objective(graph, &work, inputs, &proj)?;
            work.get_mut(id).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.params[&id].data()[j];
            record(format!("{}[{j}]", params.name(id)), analytic, numeric);
        }
    }
    let mut xs = inputs.to_vec();
    for k in 0..xs.len() {
        for j in 0..xs[k].len() {
            let orig = xs[k].data()[j];
            xs[k].data_mut()[j] = orig + eps;
            let up = objective(graph, params, &xs, &proj)?;
            xs[k].data_mut()[j] = orig - eps;
            let down = objective(graph, params, &xs, &proj)?;
            xs[k].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.inputs[k].as_ref().map_or(0.0, |g| g.data()[j]);
            record(format!("input{k}[{j}]"), analytic, numeric);
        }
    }
    Ok(report)
}
