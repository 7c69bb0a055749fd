//! Finite-difference verification of analytic gradients.

use serde::Serialize;

use super::{Graph, NodeId, Tensor, TensorError};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this in magnitude are compared absolutely.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct InputReport {
    pub input: usize,
    pub elements: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_element: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub error: Option<String>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn evaluate<F>(op: &F, inputs: &[Tensor]) -> Result<(Graph, Vec<NodeId>, NodeId), TensorError>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let mut graph = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| graph.leaf(t.clone())).collect();
    let loss = op(&mut graph, &ids)?;
    if !graph.tensor(loss).is_scalar() {
        return Err(TensorError::NotScalar {
            shape: graph.tensor(loss).shape().to_vec(),
        });
    }
    Ok((graph, ids, loss))
}

/// Compares the analytic gradient of a scalar-valued `op` against central
/// finite differences for every input marked `requires_grad`.
///
/// Never fails: a graph construction error is recorded in the report.
pub fn grad_check<F>(op: F, inputs: &[Tensor], tolerance: f64) -> GradCheckReport
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId, TensorError>,
{
    let failed = |e: TensorError| GradCheckReport {
        inputs: Vec::new(),
        max_rel_error: f64::INFINITY,
        tolerance,
        passed: false,
        error: Some(e.to_string()),
    };

    let (mut graph, ids, loss) = match evaluate(&op, inputs) {
        Ok(v) => v,
        Err(e) => return failed(e),
    };
    if let Err(e) = graph.backward(loss) {
        return failed(e);
    }

    let mut reports = Vec::new();
    let mut perturbed = inputs.to_vec();
    for (idx, id) in ids.iter().enumerate() {
        if !inputs[idx].is_requires_grad() {
            continue;
        }
        let analytic = graph.tensor(*id).grad().to_vec();
        let mut report = InputReport {
            input: idx,
            elements: analytic.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_element: 0,
        };
        for (e, &a) in analytic.iter().enumerate() {
            let base = inputs[idx].data()[e];
            let mut side = |delta: f64| -> Result<f64, TensorError> {
                perturbed[idx].data_mut()[e] = base + delta;
                let (g, _, l) = evaluate(&op, &perturbed)?;
                Ok(g.tensor(l).item())
            };
            let numeric = match (side(FD_STEP), side(-FD_STEP)) {
                (Ok(plus), Ok(minus)) => (plus - minus) / (2.0 * FD_STEP),
                (Err(err), _) | (_, Err(err)) => return failed(err),
            };
            perturbed[idx].data_mut()[e] = base;
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_element = e;
            }
        }
        reports.push(report);
    }

    let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    GradCheckReport {
        passed: max_rel_error < tolerance,
        inputs: reports,
        max_rel_error,
        tolerance,
        error: None,
    }
}
