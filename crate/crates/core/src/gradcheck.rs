//! Central finite-difference checks of analytic gradients.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{ComputationGraph, NodeId};
use crate::inference::MessageSet;
use crate::learning::{compute_gradient, objective_value, Sample};
use crate::params::{GradientStore, ParameterStore};
use crate::potentials::PotentialModel;
use crate::region::RegionGraph;
use crate::tensor::TensorValue;

/// Worst disagreement found by a finite-difference sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1, |numeric|)` over all scalars.
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `objective` for every
/// scalar parameter.
pub fn check_gradient<F>(
    params: &ParameterStore,
    analytic: &GradientStore,
    h: f64,
    mut objective: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (p, name) in params.names().iter().enumerate() {
        let grad = analytic
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        for i in 0..params.tensors()[p].len() {
            let orig = params.tensors()[p].data()[i];
            probe.tensors_mut()[p].data_mut()[i] = orig + h;
            let plus = objective(&probe)?;
            probe.tensors_mut()[p].data_mut()[i] = orig - h;
            let minus = objective(&probe)?;
            probe.tensors_mut()[p].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[i];
            let err = (a - numeric).abs() / numeric.abs().max(1.0);
            report.checked += 1;
            if err > report.max_relative_error || report.worst_parameter.is_empty() {
                report.max_relative_error = err;
                report.worst_parameter = name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Finite-difference check of a graph whose `output` node is a scalar.
pub fn finite_difference_check(
    graph: &ComputationGraph,
    params: &ParameterStore,
    inputs: &HashMap<String, TensorValue>,
    output: NodeId,
    h: f64,
) -> Result<GradCheckReport> {
    let act = graph.forward(params, inputs)?;
    if act.get(output).len() != 1 {
        return Err(Error::NotScalar(graph.node(output).name.clone()));
    }
    let seed = TensorValue::new(act.get(output).shape().to_vec(), vec![1.0])?;
    let analytic = graph.backward(params, &act, &[(output, seed)])?;
    check_gradient(params, &analytic, h, |p| {
        Ok(graph.forward(p, inputs)?.get(output).data()[0])
    })
}

/// Checks the learning gradient against central differences of the batch
/// objective with the messages held fixed.
pub fn structured_gradient_check(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[&Sample],
    messages: &[MessageSet],
    loss_weight: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let analytic = compute_gradient(graph, model, params, samples, messages, loss_weight)?.grads;
    check_gradient(params, &analytic, h, |p| {
        objective_value(graph, model, p, samples, messages, loss_weight)
    })
}
