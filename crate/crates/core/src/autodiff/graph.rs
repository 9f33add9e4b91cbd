use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::array::{matmul, matmul_nt, matmul_tn, Array};
use super::params::ParameterStore;
use super::GraphError;

/// Lower bound applied to the argument of `log`.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive tags, used for shape errors and diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Square,
    Sum,
    Mean,
    Concat,
    Slice,
    Broadcast,
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Primitive::Leaf => "leaf",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::MatMul => "matmul",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Square => "square",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::Concat => "concat",
            Primitive::Slice => "slice",
            Primitive::Broadcast => "broadcast",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Square(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Concat(NodeId, NodeId),
    Slice { input: NodeId, start: usize, len: usize },
    Broadcast(NodeId),
}

impl Op {
    fn primitive(&self) -> Primitive {
        match self {
            Op::Leaf => Primitive::Leaf,
            Op::Add(..) => Primitive::Add,
            Op::Sub(..) => Primitive::Sub,
            Op::Mul(..) => Primitive::Mul,
            Op::MatMul(..) => Primitive::MatMul,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Sigmoid(_) => Primitive::Sigmoid,
            Op::Exp(_) => Primitive::Exp,
            Op::Log(_) => Primitive::Log,
            Op::Square(_) => Primitive::Square,
            Op::Sum(_) => Primitive::Sum,
            Op::Mean(_) => Primitive::Mean,
            Op::Concat(..) => Primitive::Concat,
            Op::Slice { .. } => Primitive::Slice,
            Op::Broadcast(_) => Primitive::Broadcast,
        }
    }

    fn inputs(&self) -> [Option<NodeId>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::Concat(a, b) => {
                [Some(a), Some(b)]
            }
            Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Broadcast(a) => [Some(a), None],
            Op::Slice { input, .. } => [Some(input), None],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Option<Array>,
    name: Option<String>,
    /// Binding generation the cached value was computed under.
    generation: u64,
    /// Log-floor clamps recorded when the value was computed.
    clamps: usize,
}

/// Define-by-run expression graph.
///
/// Building a node only records the operation and checks shapes; values are
/// produced by [`Graph::forward`]. Node ids are issued in creation order, so
/// id order is a topological order.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    adjoints: Vec<Option<Array>>,
    params: HashMap<String, NodeId>,
    clamp_events: usize,
    /// Bumped by every `bind`; cached values from older generations are stale.
    generation: u64,
    #[cfg(test)]
    pub(crate) fault: Option<Primitive>,
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

    /// All node ids in creation (topological) order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Option<Array>, name: Option<String>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape, value, name, generation: u64::MAX, clamps: 0 });
        id
    }

    /// A bound leaf.
    pub fn leaf(&mut self, name: impl Into<String>, value: Array) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(Op::Leaf, shape, Some(value), Some(name.into()))
    }

    /// An anonymous bound leaf.
    pub fn constant(&mut self, value: Array) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(Op::Leaf, shape, Some(value), None)
    }

    /// A leaf that must be bound with [`Graph::bind`] before forward.
    pub fn placeholder(&mut self, name: impl Into<String>, shape: &[usize]) -> NodeId {
        self.push(Op::Leaf, shape.to_vec(), None, Some(name.into()))
    }

    /// Leaf holding the named entry of `store`; repeated calls return the same node.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<NodeId, GraphError> {
        if let Some(&id) = self.params.get(name) {
            return Ok(id);
        }
        let value = store
            .get(name)
            .ok_or_else(|| GraphError::UnknownParameter(name.to_string()))?
            .clone();
        let id = self.leaf(name, value);
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn bind(&mut self, leaf: NodeId, value: Array) -> Result<(), GraphError> {
        let node = &mut self.nodes[leaf.0];
        if !matches!(node.op, Op::Leaf) {
            return Err(GraphError::NotALeaf(leaf.0));
        }
        if node.shape != value.shape() {
            return Err(GraphError::BindShape {
                name: node.name.clone().unwrap_or_default(),
                expected: node.shape.clone(),
                got: value.shape().to_vec(),
            });
        }
        node.value = Some(value);
        self.generation += 1;
        Ok(())
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.nodes[id.0].name.as_deref()
    }

    pub fn value(&self, id: NodeId) -> Option<&Array> {
        self.nodes[id.0].value.as_ref()
    }

    /// Adjoint from the last backward pass; `None` if the node was unreachable.
    pub fn adjoint(&self, id: NodeId) -> Option<&Array> {
        self.adjoints.get(id.0).and_then(|a| a.as_ref())
    }

    /// Number of `log` inputs raised to [`LOG_FLOOR`] during the last forward pass.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Adjoints of every parameter leaf, keyed by parameter name. Unreached
    /// parameters get zero arrays.
    pub fn param_gradients(&self) -> BTreeMap<String, Array> {
        self.params
            .iter()
            .map(|(name, &id)| {
                let g = self.adjoint(id).cloned().unwrap_or_else(|| Array::zeros(self.shape(id)));
                (name.clone(), g)
            })
            .collect()
    }

    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    fn shape_err(&self, tag: Primitive, ids: &[NodeId]) -> GraphError {
        GraphError::Shape { tag, shapes: ids.iter().map(|&i| self.nodes[i.0].shape.clone()).collect() }
    }

    fn elementwise_binary(&mut self, a: NodeId, b: NodeId, op: Op) -> Result<NodeId, GraphError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err(op.primitive(), &[a, b]));
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, shape, None, None))
    }

    fn unary(&mut self, a: NodeId, op: Op) -> NodeId {
        let shape = self.shape(a).to_vec();
        self.push(op, shape, None, None)
    }

    /// Elementwise sum of equal shapes.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise_binary(a, b, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise_binary(a, b, Op::Sub(a, b))
    }

    /// Elementwise product of equal shapes.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        self.elementwise_binary(a, b, Op::Mul(a, b))
    }

    /// `[m, k] × [k, n] → [m, n]` or `[m, k] × [k] → [m]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        let ok = sa.len() == 2 && (sb.len() == 1 || sb.len() == 2) && sa[1] == sb[0];
        if !ok {
            return Err(self.shape_err(Primitive::MatMul, &[a, b]));
        }
        let shape = if sb.len() == 2 { vec![sa[0], sb[1]] } else { vec![sa[0]] };
        Ok(self.push(Op::MatMul(a, b), shape, None, None))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp(a))
    }

    /// Natural log of `max(a, LOG_FLOOR)`.
    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Log(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Square(a))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum(a), Vec::new(), None, None)
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: NodeId) -> Result<NodeId, GraphError> {
        if self.shape(a).iter().product::<usize>() == 0 {
            return Err(self.shape_err(Primitive::Mean, &[a]));
        }
        Ok(self.push(Op::Mean(a), Vec::new(), None, None))
    }

    /// Stacks along the leading axis; trailing dimensions must agree.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa.is_empty() || sa.len() != sb.len() || sa[1..] != sb[1..] {
            return Err(self.shape_err(Primitive::Concat, &[a, b]));
        }
        let mut shape = sa.to_vec();
        shape[0] += sb[0];
        Ok(self.push(Op::Concat(a, b), shape, None, None))
    }

    /// Rows `start..start + len` along the leading axis.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, GraphError> {
        let sa = self.shape(a);
        if sa.is_empty() || len == 0 || start + len > sa[0] {
            return Err(self.shape_err(Primitive::Slice, &[a]));
        }
        let mut shape = sa.to_vec();
        shape[0] = len;
        Ok(self.push(Op::Slice { input: a, start, len }, shape, None, None))
    }

    /// Repeats `a` to `target`. `a` must be a scalar or its shape must be a
    /// prefix of `target` (each element is repeated along the trailing axes).
    pub fn broadcast(&mut self, a: NodeId, target: &[usize]) -> Result<NodeId, GraphError> {
        let sa = self.shape(a);
        let is_scalar = sa.iter().product::<usize>() == 1 && sa.iter().all(|&d| d == 1);
        let is_prefix = sa.len() <= target.len() && sa == &target[..sa.len()];
        if !(is_scalar || is_prefix) {
            return Err(GraphError::Shape {
                tag: Primitive::Broadcast,
                shapes: vec![sa.to_vec(), target.to_vec()],
            });
        }
        Ok(self.push(Op::Broadcast(a), target.to_vec(), None, None))
    }

    /// `a * c` for a constant `c`.
    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, GraphError> {
        let shape = self.shape(a).to_vec();
        let k = self.constant(Array::scalar(c));
        let kb = self.broadcast(k, &shape)?;
        self.mul(a, kb)
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: NodeId, c: f64) -> Result<NodeId, GraphError> {
        let shape = self.shape(a).to_vec();
        let k = self.constant(Array::scalar(c));
        let kb = self.broadcast(k, &shape)?;
        self.add(a, kb)
    }

    fn ancestors(&self, root: NodeId) -> Vec<bool> {
        let mut mark = vec![false; root.0 + 1];
        mark[root.0] = true;
        for i in (0..=root.0).rev() {
            if !mark[i] {
                continue;
            }
            for inp in self.nodes[i].op.inputs().into_iter().flatten() {
                mark[inp.0] = true;
            }
        }
        mark
    }

    /// Evaluates every ancestor of `root` in id order and returns its value.
    ///
    /// Values computed since the last `bind` are reused.
    pub fn forward(&mut self, root: NodeId) -> Result<&Array, GraphError> {
        let mark = self.ancestors(root);
        self.clamp_events = 0;
        for i in 0..=root.0 {
            if !mark[i] {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                if self.nodes[i].value.is_none() {
                    let name = self.nodes[i].name.clone().unwrap_or_else(|| format!("#{i}"));
                    return Err(GraphError::UnboundLeaf(name));
                }
                continue;
            }
            if self.nodes[i].generation != self.generation || self.nodes[i].value.is_none() {
                let (v, clamps) = self.eval(i);
                let node = &mut self.nodes[i];
                node.value = Some(v);
                node.generation = self.generation;
                node.clamps = clamps;
            }
            self.clamp_events += self.nodes[i].clamps;
        }
        Ok(self.nodes[root.0].value.as_ref().expect("root evaluated"))
    }

    fn val(&self, id: NodeId) -> &Array {
        self.nodes[id.0].value.as_ref().expect("input evaluated before use")
    }

    fn eval(&self, i: usize) -> (Array, usize) {
        let op = self.nodes[i].op.clone();
        let v = match op {
            Op::Leaf => unreachable!(),
            Op::Add(a, b) => self.val(a).zip_map(self.val(b), |x, y| x + y),
            Op::Sub(a, b) => self.val(a).zip_map(self.val(b), |x, y| x - y),
            Op::Mul(a, b) => self.val(a).zip_map(self.val(b), |x, y| x * y),
            Op::MatMul(a, b) => matmul(self.val(a), self.val(b)),
            Op::Tanh(a) => self.val(a).map(f64::tanh),
            Op::Sigmoid(a) => self.val(a).map(sigmoid),
            Op::Exp(a) => self.val(a).map(f64::exp),
            Op::Log(a) => {
                let x = self.val(a);
                let clamped = x.data().iter().filter(|&&v| v < LOG_FLOOR).count();
                return (x.map(|v| v.max(LOG_FLOOR).ln()), clamped);
            }
            Op::Square(a) => self.val(a).map(|x| x * x),
            Op::Sum(a) => Array::scalar(self.val(a).data().iter().sum()),
            Op::Mean(a) => {
                let x = self.val(a);
                Array::scalar(x.data().iter().sum::<f64>() / x.len() as f64)
            }
            Op::Concat(a, b) => {
                let (x, y) = (self.val(a), self.val(b));
                let mut data = Vec::with_capacity(x.len() + y.len());
                data.extend_from_slice(x.data());
                data.extend_from_slice(y.data());
                Array::new(self.nodes[i].shape.clone(), data)
            }
            Op::Slice { input, start, len } => {
                let x = self.val(input);
                let w = x.row_len();
                Array::new(self.nodes[i].shape.clone(), x.data()[start * w..(start + len) * w].to_vec())
            }
            Op::Broadcast(a) => {
                let x = self.val(a);
                let target = &self.nodes[i].shape;
                let n: usize = target.iter().product();
                let rep = n / x.len();
                let mut data = Vec::with_capacity(n);
                for &v in x.data() {
                    data.extend(std::iter::repeat(v).take(rep));
                }
                Array::new(target.clone(), data)
            }
        };
        (v, 0)
    }

    /// Reverse sweep from a scalar `root`. Adjoints are reset on every call.
    pub fn backward(&mut self, root: NodeId) -> Result<(), GraphError> {
        let shape = self.shape(root).to_vec();
        if shape.iter().product::<usize>() != 1 {
            return Err(GraphError::NonScalarRoot(shape));
        }
        if self.nodes[root.0].value.is_none() {
            return Err(GraphError::NotEvaluated(root.0));
        }
        self.adjoints = vec![None; self.nodes.len()];
        self.adjoints[root.0] = Some(Array::filled(&shape, 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = self.adjoints[i].take() else { continue };
            self.propagate(i, &g);
            self.adjoints[i] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, contrib: Array) {
        match &mut self.adjoints[id.0] {
            Some(acc) => acc.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&mut self, i: usize, g: &Array) {
        let op = self.nodes[i].op.clone();
        #[cfg(test)]
        let g = &match self.fault {
            Some(p) if p == op.primitive() => g.map(|v| 2.0 * v),
            _ => g.clone(),
        };
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let ga = g.zip_map(self.val(b), |d, y| d * y);
                let gb = g.zip_map(self.val(a), |d, x| d * x);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::MatMul(a, b) => {
                let ga = matmul_nt(g, self.val(b));
                let gb = matmul_tn(self.val(a), g);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Tanh(a) => {
                let y = self.nodes[i].value.as_ref().expect("forward ran");
                let ga = g.zip_map(y, |d, y| d * (1.0 - y * y));
                self.accumulate(a, ga);
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[i].value.as_ref().expect("forward ran");
                let ga = g.zip_map(y, |d, y| d * y * (1.0 - y));
                self.accumulate(a, ga);
            }
            Op::Exp(a) => {
                let y = self.nodes[i].value.as_ref().expect("forward ran");
                let ga = g.zip_map(y, |d, y| d * y);
                self.accumulate(a, ga);
            }
            Op::Log(a) => {
                let ga = g.zip_map(self.val(a), |d, x| if x < LOG_FLOOR { 0.0 } else { d / x });
                self.accumulate(a, ga);
            }
            Op::Square(a) => {
                let ga = g.zip_map(self.val(a), |d, x| 2.0 * d * x);
                self.accumulate(a, ga);
            }
            Op::Sum(a) => {
                let ga = Array::filled(self.shape(a), g.item());
                self.accumulate(a, ga);
            }
            Op::Mean(a) => {
                let n = self.val(a).len() as f64;
                let ga = Array::filled(self.shape(a), g.item() / n);
                self.accumulate(a, ga);
            }
            Op::Concat(a, b) => {
                let na = self.val(a).len();
                let ga = Array::new(self.shape(a).to_vec(), g.data()[..na].to_vec());
                let gb = Array::new(self.shape(b).to_vec(), g.data()[na..].to_vec());
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Slice { input, start, len } => {
                let mut ga = Array::zeros(self.shape(input));
                let w = ga.row_len();
                ga.data_mut()[start * w..(start + len) * w].copy_from_slice(g.data());
                self.accumulate(input, ga);
            }
            Op::Broadcast(a) => {
                let n = self.val(a).len();
                let rep = g.len() / n;
                let data = g.data().chunks(rep).map(|c| c.iter().sum()).collect();
                self.accumulate(a, Array::new(self.shape(a).to_vec(), data));
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
