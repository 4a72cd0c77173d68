//! Reverse-mode gradient tape.
//!
//! Every traced operation appends a node holding its output and the ids of
//! its operands. Node ids are handed out in creation order, so walking the
//! node list backwards is a valid reverse topological order.

use std::collections::BTreeMap;

use super::array::{broadcast_rule, sigmoid, Array2, Broadcast, ElementwiseOp};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId, Broadcast),
    Sub(NodeId, NodeId, Broadcast),
    Mul(NodeId, NodeId, Broadcast),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    Mean(NodeId),
    ConcatCols(NodeId, NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2,
    op: Op,
    param: Option<String>,
}

/// Records a computation for one backward pass.
///
/// A tape is a single-owner context: it is `Send` but holds no shared state,
/// so independent training runs each build their own.
#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Result of [`GradTape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    params: BTreeMap<String, Array2>,
    nodes: Vec<Option<Array2>>,
}

impl Gradients {
    /// Gradient of a named parameter.
    pub fn get(&self, name: &str) -> Option<&Array2> {
        self.params.get(name)
    }

    /// Gradient with respect to any recorded node. `None` when the loss does
    /// not depend on it.
    pub fn wrt(&self, node: NodeId) -> Option<&Array2> {
        self.nodes.get(node.0).and_then(Option::as_ref)
    }

    pub fn params(&self) -> &BTreeMap<String, Array2> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<String, Array2> {
        self.params
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Untracked input: receives a gradient but is not reported by name.
    pub fn constant(&mut self, value: Array2) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Trainable input whose gradient is reported under `name`. Registering
    /// the same name twice sums both contributions.
    pub fn param(&mut self, name: impl Into<String>, value: Array2) -> NodeId {
        let id = self.push(value, Op::Leaf);
        self.nodes[id.0].param = Some(name.into());
        id
    }

    pub fn value(&self, id: NodeId) -> &Array2 {
        &self.nodes[id.0].value
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn elementwise(
        &mut self,
        op: ElementwiseOp,
        a: NodeId,
        b: Option<NodeId>,
    ) -> Result<NodeId> {
        let out = self.value(a).elementwise(op, b.map(|b| self.value(b)))?;
        let rule = || broadcast_rule(self.value(a), self.value(b.expect("binary op")));
        let recorded = match op {
            ElementwiseOp::Add => Op::Add(a, b.expect("checked"), rule()?),
            ElementwiseOp::Sub => Op::Sub(a, b.expect("checked"), rule()?),
            ElementwiseOp::Mul => Op::Mul(a, b.expect("checked"), rule()?),
            ElementwiseOp::Sigmoid => Op::Sigmoid(a),
            ElementwiseOp::Tanh => Op::Tanh(a),
            ElementwiseOp::Relu => Op::Relu(a),
        };
        Ok(self.push(out, recorded))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(ElementwiseOp::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(ElementwiseOp::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise(ElementwiseOp::Mul, a, Some(b))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let out = self.value(a).scale(factor);
        self.push(out, Op::Scale(a, factor))
    }

    /// Sum of all elements as a 1x1 node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let out = Array2::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Mean of all elements as a 1x1 node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let out = Array2::scalar(v.sum() / v.len().max(1) as f64);
        self.push(out, Op::Mean(a))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Propagates d(loss)/d(node) back to every node. Consumes the tape.
    pub fn backward(self, loss: NodeId) -> Result<Gradients> {
        let loss_shape = self.value(loss).shape();
        if loss_shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                loss_shape.0, loss_shape.1
            )));
        }
        let mut grads: Vec<Option<Array2>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(self.value(b));
                    let gb = self.value(a).matmul_tn(&g);
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::Add(a, b, rule) => {
                    accumulate(&mut grads, a, reduce(&g, rule, Side::Left));
                    accumulate(&mut grads, b, reduce(&g, rule, Side::Right));
                }
                Op::Sub(a, b, rule) => {
                    accumulate(&mut grads, a, reduce(&g, rule, Side::Left));
                    accumulate(&mut grads, b, reduce(&g, rule, Side::Right).scale(-1.0));
                }
                Op::Mul(a, b, rule) => {
                    let (va, vb) = (self.value(a), self.value(b));
                    let ga = g.zip_with(vb, rule_for_grad(rule, Side::Left), |x, y| x * y);
                    let gb = g.zip_with(va, rule_for_grad(rule, Side::Right), |x, y| x * y);
                    accumulate(&mut grads, a, reduce(&ga, rule, Side::Left));
                    accumulate(&mut grads, b, reduce(&gb, rule, Side::Right));
                }
                Op::Sigmoid(a) => {
                    let local = node.value.map(|s| s * (1.0 - s));
                    accumulate(&mut grads, a, hadamard(&g, &local));
                }
                Op::Tanh(a) => {
                    let local = node.value.map(|t| 1.0 - t * t);
                    accumulate(&mut grads, a, hadamard(&g, &local));
                }
                Op::Relu(a) => {
                    let local = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    accumulate(&mut grads, a, hadamard(&g, &local));
                }
                Op::Scale(a, factor) => accumulate(&mut grads, a, g.scale(factor)),
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    accumulate(&mut grads, a, Array2::filled(r, c, g.get(0, 0)));
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(a).shape();
                    let n = (r * c).max(1) as f64;
                    accumulate(&mut grads, a, Array2::filled(r, c, g.get(0, 0) / n));
                }
                Op::ConcatCols(a, b) => {
                    let wa = self.value(a).cols();
                    let wb = self.value(b).cols();
                    accumulate(&mut grads, a, g.slice_cols(0, wa)?);
                    accumulate(&mut grads, b, g.slice_cols(wa, wb)?);
                }
            }
            grads[idx] = Some(g);
        }

        let mut params: BTreeMap<String, Array2> = BTreeMap::new();
        for (node, grad) in self.nodes.iter().zip(&grads) {
            if let Some(name) = &node.param {
                let (r, c) = node.value.shape();
                let grad = grad.clone().unwrap_or_else(|| Array2::zeros(r, c));
                match params.get_mut(name) {
                    Some(existing) => existing.add_assign(&grad)?,
                    None => {
                        params.insert(name.clone(), grad);
                    }
                }
            }
        }
        Ok(Gradients {
            params,
            nodes: grads,
        })
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

fn accumulate(grads: &mut [Option<Array2>], id: NodeId, contribution: Array2) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(contribution.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(contribution),
    }
}

fn hadamard(a: &Array2, b: &Array2) -> Array2 {
    a.zip_with(b, Broadcast::Same, |x, y| x * y)
}

/// Broadcast rule for multiplying the full-shape upstream gradient by the
/// *other* operand's value.
fn rule_for_grad(rule: Broadcast, side: Side) -> Broadcast {
    match (rule, side) {
        (Broadcast::Same, _) => Broadcast::Same,
        // Left gradient multiplies by the right value, which is the bias row.
        (Broadcast::RightRow, Side::Left) => Broadcast::RightRow,
        (Broadcast::RightRow, Side::Right) => Broadcast::Same,
        (Broadcast::LeftRow, Side::Left) => Broadcast::Same,
        (Broadcast::LeftRow, Side::Right) => Broadcast::RightRow,
    }
}

/// Sums the full-shape gradient back down to the operand's own shape.
fn reduce(g: &Array2, rule: Broadcast, side: Side) -> Array2 {
    match (rule, side) {
        (Broadcast::RightRow, Side::Right) | (Broadcast::LeftRow, Side::Left) => g.sum_rows(),
        _ => g.clone(),
    }
}
