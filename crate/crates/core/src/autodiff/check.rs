use super::graph::{Graph, NodeId};
use super::GraphError;

/// Denominator floor of the relative error. Below it the comparison is
/// effectively absolute, so near-zero gradients are not judged by round-off.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct LeafCheck {
    pub leaf: NodeId,
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the element that attains `max_rel_error`.
    pub worst_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub leaves: Vec<LeafCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.leaves.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }

    /// Names of leaves whose error exceeds the tolerance.
    pub fn failing(&self) -> Vec<&str> {
        self.leaves
            .iter()
            .filter(|l| !(l.max_rel_error <= self.tolerance))
            .map(|l| l.name.as_str())
            .collect()
    }
}

/// Compares the adjoints of `leaves` with central finite differences of `root`.
///
/// Runs forward and backward itself; leaf values are restored afterwards.
/// The relative error per element is `|a - fd| / max(|a|, |fd|, REL_ERROR_FLOOR)`.
pub fn check_gradients(
    graph: &mut Graph,
    root: NodeId,
    leaves: &[NodeId],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, GraphError> {
    graph.forward(root)?;
    graph.backward(root)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|&l| match graph.adjoint(l) {
            Some(a) => a.data().to_vec(),
            None => vec![0.0; graph.shape(l).iter().product()],
        })
        .collect();

    let mut out = Vec::with_capacity(leaves.len());
    for (&leaf, grad) in leaves.iter().zip(&analytic) {
        let original = graph.value(leaf).ok_or_else(|| GraphError::UnboundLeaf(leaf_name(graph, leaf)))?.clone();
        let mut worst = (0.0_f64, 0_usize);
        for k in 0..original.len() {
            let mut plus = original.clone();
            plus.data_mut()[k] += step;
            graph.bind(leaf, plus)?;
            let fp = graph.forward(root)?.item();
            let mut minus = original.clone();
            minus.data_mut()[k] -= step;
            graph.bind(leaf, minus)?;
            let fm = graph.forward(root)?.item();
            let fd = (fp - fm) / (2.0 * step);
            let a = grad[k];
            let denom = a.abs().max(fd.abs()).max(REL_ERROR_FLOOR);
            let rel = (a - fd).abs() / denom;
            if !(rel <= worst.0) {
                worst = (rel, k);
            }
        }
        graph.bind(leaf, original)?;
        out.push(LeafCheck {
            leaf,
            name: leaf_name(graph, leaf),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    graph.forward(root)?;
    let passed = out.iter().all(|l| l.max_rel_error <= tolerance);
    Ok(GradCheckReport { leaves: out, tolerance, passed })
}

fn leaf_name(graph: &Graph, leaf: NodeId) -> String {
    graph.name(leaf).map(str::to_string).unwrap_or_else(|| format!("#{}", leaf.index()))
}
