//! Traced forward passes. Every public forward function records onto a
//! [`GradTape`], so prediction and training share one implementation.

use std::collections::BTreeMap;

use super::spec::{CellKind, Direction, ModelSpec, ParameterSet};
use crate::dataset::WindowedSample;
use crate::error::{Error, Result};
use crate::numeric::{Array2, GradTape, Gradients, NodeId};

/// Tape handles for every parameter of a model.
pub struct TracedParams {
    nodes: BTreeMap<String, NodeId>,
}

impl TracedParams {
    pub fn register(tape: &mut GradTape, params: &ParameterSet) -> Self {
        let nodes = params
            .iter()
            .map(|(name, value)| (name.clone(), tape.param(name.clone(), value.clone())))
            .collect();
        Self { nodes }
    }

    pub fn get(&self, name: &str) -> Result<NodeId> {
        self.nodes
            .get(name)
            .copied()
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))
    }

    fn gate(&self, dir: Direction, gate: &str) -> Result<Gate> {
        let p = dir.prefix();
        Ok(Gate {
            w: self.get(&format!("{p}.w_{gate}"))?,
            u: self.get(&format!("{p}.u_{gate}"))?,
            b: self.get(&format!("{p}.b_{gate}"))?,
        })
    }
}

#[derive(Clone, Copy)]
struct Gate {
    w: NodeId,
    u: NodeId,
    b: NodeId,
}

/// `x W + h U + b`
fn affine(tape: &mut GradTape, g: Gate, x: NodeId, h: NodeId) -> Result<NodeId> {
    let xw = tape.matmul(x, g.w)?;
    let hu = tape.matmul(h, g.u)?;
    let s = tape.add(xw, hu)?;
    tape.add(s, g.b)
}

/// One GRU step on a batch (`x: B x F`, `h: B x H`).
///
/// z = sigmoid(xW_z + hU_z + b_z), r = sigmoid(xW_r + hU_r + b_r),
/// c = tanh(xW_h + (r*h)U_h + b_h), h' = (1 - z)*h + z*c.
pub fn trace_gru_step(
    tape: &mut GradTape,
    params: &TracedParams,
    dir: Direction,
    x: NodeId,
    h: NodeId,
) -> Result<NodeId> {
    let (gz, gr, gh) = (
        params.gate(dir, "z")?,
        params.gate(dir, "r")?,
        params.gate(dir, "h")?,
    );
    let z_pre = affine(tape, gz, x, h)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = affine(tape, gr, x, h)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h)?;
    let c_pre = affine(tape, gh, x, rh)?;
    let c = tape.tanh(c_pre);
    // (1 - z)*h + z*c == h + z*(c - h)
    let delta = tape.sub(c, h)?;
    let step = tape.mul(z, delta)?;
    tape.add(h, step)
}

/// One LSTM step; returns `(h', c')`.
pub fn trace_lstm_step(
    tape: &mut GradTape,
    params: &TracedParams,
    dir: Direction,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let i_pre = affine(tape, params.gate(dir, "i")?, x, h)?;
    let i = tape.sigmoid(i_pre);
    let f_pre = affine(tape, params.gate(dir, "f")?, x, h)?;
    let f = tape.sigmoid(f_pre);
    let o_pre = affine(tape, params.gate(dir, "o")?, x, h)?;
    let o = tape.sigmoid(o_pre);
    let g_pre = affine(tape, params.gate(dir, "g")?, x, h)?;
    let g = tape.tanh(g_pre);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// Runs one direction over `steps` (already in visiting order) and returns
/// the final hidden state.
fn trace_direction(
    tape: &mut GradTape,
    spec: &ModelSpec,
    params: &TracedParams,
    dir: Direction,
    steps: &[NodeId],
) -> Result<NodeId> {
    let batch = tape.value(steps[0]).rows();
    let mut h = tape.constant(Array2::zeros(batch, spec.hidden_size));
    match spec.cell {
        CellKind::Gru => {
            for &x in steps {
                h = trace_gru_step(tape, params, dir, x, h)?;
            }
        }
        CellKind::Lstm => {
            let mut c = tape.constant(Array2::zeros(batch, spec.hidden_size));
            for &x in steps {
                (h, c) = trace_lstm_step(tape, params, dir, x, h, c)?;
            }
        }
    }
    Ok(h)
}

/// Encodes `steps` (one `B x F` node per time step, oldest first).
/// Bidirectional output is `[forward final | backward final]`.
pub fn trace_encode(
    tape: &mut GradTape,
    spec: &ModelSpec,
    params: &TracedParams,
    steps: &[NodeId],
) -> Result<NodeId> {
    if steps.is_empty() {
        return Err(Error::Shape(
            "window must have at least one time step".into(),
        ));
    }
    for &s in steps {
        if tape.value(s).cols() != spec.input_features {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                tape.value(s).cols(),
                spec.input_features
            )));
        }
    }
    let fwd = trace_direction(tape, spec, params, Direction::Forward, steps)?;
    if !spec.bidirectional {
        return Ok(fwd);
    }
    let reversed: Vec<NodeId> = steps.iter().rev().copied().collect();
    let bwd = trace_direction(tape, spec, params, Direction::Backward, &reversed)?;
    tape.concat_cols(fwd, bwd)
}

/// ReLU -> dense -> ReLU -> dense (linear output).
pub fn trace_head(tape: &mut GradTape, params: &TracedParams, rep: NodeId) -> Result<NodeId> {
    let a = tape.relu(rep);
    let l1 = tape.matmul(a, params.get("head.w1")?)?;
    let l1 = tape.add(l1, params.get("head.b1")?)?;
    let a1 = tape.relu(l1);
    let l2 = tape.matmul(a1, params.get("head.w2")?)?;
    tape.add(l2, params.get("head.b2")?)
}

/// Splits a batch of `w x F` windows into per-time-step `B x F` nodes.
pub fn batch_steps(tape: &mut GradTape, windows: &[&Array2]) -> Result<Vec<NodeId>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Contract("empty batch".into()))?;
    let (w, f) = first.shape();
    if let Some(bad) = windows.iter().find(|x| x.shape() != (w, f)) {
        return Err(Error::Shape(format!(
            "batch mixes {w}x{f} and {}x{} windows",
            bad.rows(),
            bad.cols()
        )));
    }
    (0..w)
        .map(|t| {
            let mut data = Vec::with_capacity(windows.len() * f);
            for x in windows {
                data.extend_from_slice(x.row(t));
            }
            Ok(tape.constant(Array2::new(windows.len(), f, data)?))
        })
        .collect()
}

/// Full traced forward over a batch of windows; output is `B x horizon`.
pub fn trace_forward(
    tape: &mut GradTape,
    spec: &ModelSpec,
    params: &TracedParams,
    windows: &[&Array2],
) -> Result<NodeId> {
    let steps = batch_steps(tape, windows)?;
    let rep = trace_encode(tape, spec, params, &steps)?;
    trace_head(tape, params, rep)
}

/// Mean squared error node between `pred` and a constant target.
pub fn trace_mse(tape: &mut GradTape, pred: NodeId, target: Array2) -> Result<NodeId> {
    let t = tape.constant(target);
    if tape.value(pred).shape() != tape.value(t).shape() {
        let (a, b) = (tape.value(pred).shape(), tape.value(t).shape());
        return Err(Error::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    let d = tape.sub(pred, t)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

fn one_off<T>(
    params: &ParameterSet,
    f: impl FnOnce(&mut GradTape, &TracedParams) -> Result<T>,
) -> Result<T> {
    let mut tape = GradTape::new();
    let traced = TracedParams::register(&mut tape, params);
    f(&mut tape, &traced)
}

/// GRU cell on plain arrays (`x: B x F`, `h_prev: B x H`).
pub fn gru_cell(
    params: &ParameterSet,
    dir: Direction,
    x: &Array2,
    h_prev: &Array2,
) -> Result<Array2> {
    one_off(params, |tape, p| {
        let (x, h) = (tape.constant(x.clone()), tape.constant(h_prev.clone()));
        let out = trace_gru_step(tape, p, dir, x, h)?;
        Ok(tape.value(out).clone())
    })
}

/// LSTM cell on plain arrays; returns `(h, c)`.
pub fn lstm_cell(
    params: &ParameterSet,
    dir: Direction,
    x: &Array2,
    h_prev: &Array2,
    c_prev: &Array2,
) -> Result<(Array2, Array2)> {
    one_off(params, |tape, p| {
        let (x, h, c) = (
            tape.constant(x.clone()),
            tape.constant(h_prev.clone()),
            tape.constant(c_prev.clone()),
        );
        let (h, c) = trace_lstm_step(tape, p, dir, x, h, c)?;
        Ok((tape.value(h).clone(), tape.value(c).clone()))
    })
}

/// Encoder representation of one `w x F` window (length `H` or `2H`).
pub fn encode(window: &Array2, spec: &ModelSpec, params: &ParameterSet) -> Result<Vec<f64>> {
    one_off(params, |tape, p| {
        let steps = batch_steps(tape, &[window])?;
        let rep = trace_encode(tape, spec, p, &steps)?;
        Ok(tape.value(rep).data().to_vec())
    })
}

/// Dense head on a representation vector.
pub fn head(representation: &[f64], spec: &ModelSpec, params: &ParameterSet) -> Result<Vec<f64>> {
    if representation.len() != spec.representation_size() {
        return Err(Error::Shape(format!(
            "representation has {} values, head expects {}",
            representation.len(),
            spec.representation_size()
        )));
    }
    one_off(params, |tape, p| {
        let rep = tape.constant(Array2::row_vector(representation));
        let out = trace_head(tape, p, rep)?;
        Ok(tape.value(out).data().to_vec())
    })
}

/// A model specification with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParameterSet,
}

impl Model {
    pub fn new(spec: ModelSpec, params: ParameterSet) -> Result<Self> {
        spec.validate()?;
        params.check(&spec)?;
        Ok(Self { spec, params })
    }

    /// Freshly initialised from `spec.seed`.
    pub fn init(spec: ModelSpec) -> Result<Self> {
        let params = ParameterSet::init(&spec)?;
        Ok(Self { spec, params })
    }

    /// Prediction for one `w x F` window.
    pub fn forward(&self, inputs: &Array2) -> Result<Vec<f64>> {
        Ok(self.predict_windows(&[inputs])?.into_data())
    }

    pub fn forward_sample(&self, sample: &WindowedSample) -> Result<Vec<f64>> {
        self.forward(&sample.inputs)
    }

    /// `B x horizon` predictions for a batch of windows.
    pub fn predict_windows(&self, windows: &[&Array2]) -> Result<Array2> {
        one_off(&self.params, |tape, p| {
            let out = trace_forward(tape, &self.spec, p, windows)?;
            Ok(tape.value(out).clone())
        })
    }

    /// Predictions for many samples, evaluated in chunks of `chunk`.
    pub fn predict_samples(&self, samples: &[WindowedSample], chunk: usize) -> Result<Array2> {
        let mut data = Vec::with_capacity(samples.len() * self.spec.horizon);
        for part in samples.chunks(chunk.max(1)) {
            let windows: Vec<&Array2> = part.iter().map(|s| &s.inputs).collect();
            data.extend_from_slice(self.predict_windows(&windows)?.data());
        }
        Array2::new(samples.len(), self.spec.horizon, data)
    }

    /// Batch MSE and its gradient for every parameter.
    pub fn loss_and_gradients(&self, samples: &[&WindowedSample]) -> Result<(f64, Gradients)> {
        let mut tape = GradTape::new();
        let traced = TracedParams::register(&mut tape, &self.params);
        let windows: Vec<&Array2> = samples.iter().map(|s| &s.inputs).collect();
        let pred = trace_forward(&mut tape, &self.spec, &traced, &windows)?;
        let target = targets_matrix(samples, self.spec.horizon)?;
        let loss = trace_mse(&mut tape, pred, target)?;
        let value = tape.value(loss).get(0, 0);
        Ok((value, tape.backward(loss)?))
    }
}

pub(crate) fn targets_matrix(samples: &[&WindowedSample], horizon: usize) -> Result<Array2> {
    let mut data = Vec::with_capacity(samples.len() * horizon);
    for s in samples {
        if s.targets.len() != horizon {
            return Err(Error::Shape(format!(
                "sample has {} targets, model horizon is {horizon}",
                s.targets.len()
            )));
        }
        data.extend_from_slice(&s.targets);
    }
    Array2::new(samples.len(), horizon, data)
}
