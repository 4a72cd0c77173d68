use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Array2;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Gru,
    Lstm,
}

impl CellKind {
    /// Gate suffixes in parameter order.
    pub fn gates(self) -> &'static [&'static str] {
        match self {
            CellKind::Gru => &["z", "r", "h"],
            CellKind::Lstm => &["i", "f", "o", "g"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn prefix(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

/// Recurrent encoder plus two-layer dense head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub cell: CellKind,
    pub bidirectional: bool,
    pub input_features: usize,
    pub hidden_size: usize,
    pub head_hidden: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_features", self.input_features),
            ("hidden_size", self.hidden_size),
            ("head_hidden", self.head_hidden),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn directions(&self) -> &'static [Direction] {
        if self.bidirectional {
            &[Direction::Forward, Direction::Backward]
        } else {
            &[Direction::Forward]
        }
    }

    /// Width of the encoder output fed to the head.
    pub fn representation_size(&self) -> usize {
        self.hidden_size * self.directions().len()
    }

    /// Every parameter array as `(name, rows, cols)`, in initialisation order.
    ///
    /// Weights act on row vectors: a gate computes `x W + h U + b` with
    /// `W: F x H`, `U: H x H`, `b: 1 x H`.
    pub fn parameter_shapes(&self) -> Vec<(String, usize, usize)> {
        let (f, h) = (self.input_features, self.hidden_size);
        let mut shapes = Vec::new();
        for dir in self.directions() {
            for gate in self.cell.gates() {
                let p = dir.prefix();
                shapes.push((format!("{p}.w_{gate}"), f, h));
                shapes.push((format!("{p}.u_{gate}"), h, h));
                shapes.push((format!("{p}.b_{gate}"), 1, h));
            }
        }
        shapes.push((
            "head.w1".into(),
            self.representation_size(),
            self.head_hidden,
        ));
        shapes.push(("head.b1".into(), 1, self.head_hidden));
        shapes.push(("head.w2".into(), self.head_hidden, self.horizon));
        shapes.push(("head.b2".into(), 1, self.horizon));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes().iter().map(|(_, r, c)| r * c).sum()
    }

    pub fn encoder_parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .filter(|(n, _, _)| !n.starts_with("head."))
            .map(|(_, r, c)| r * c)
            .sum()
    }
}

/// Named parameter arrays of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    arrays: BTreeMap<String, Array2>,
}

impl ParameterSet {
    /// Uniform initialisation from `spec.seed`.
    ///
    /// Recurrent arrays draw from `[-1/sqrt(H), 1/sqrt(H)]`; dense layers from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`. Arrays are filled in
    /// [`ModelSpec::parameter_shapes`] order from a single stream.
    pub fn init(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(spec.seed);
        let mut arrays = BTreeMap::new();
        for (name, rows, cols) in spec.parameter_shapes() {
            let fan = if name.starts_with("head.w") {
                rows
            } else if name.starts_with("head.b") {
                if name == "head.b1" {
                    spec.representation_size()
                } else {
                    spec.head_hidden
                }
            } else {
                spec.hidden_size
            };
            let bound = 1.0 / (fan as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let data = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
            arrays.insert(name, Array2::new(rows, cols, data)?);
        }
        Ok(Self { arrays })
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            arrays: spec
                .parameter_shapes()
                .into_iter()
                .map(|(n, r, c)| (n, Array2::zeros(r, c)))
                .collect(),
        })
    }

    pub fn from_arrays(arrays: BTreeMap<String, Array2>) -> Self {
        Self { arrays }
    }

    /// Checks names and shapes against `spec`.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let shapes = spec.parameter_shapes();
        if shapes.len() != self.arrays.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter arrays, found {}",
                shapes.len(),
                self.arrays.len()
            )));
        }
        for (name, r, c) in shapes {
            let a = self.get(&name)?;
            if a.shape() != (r, c) {
                return Err(Error::Shape(format!(
                    "parameter `{name}` is {}x{}, expected {r}x{c}",
                    a.rows(),
                    a.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Array2> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array2> {
        self.arrays
            .get_mut(name)
            .ok_or_else(|| Error::Contract(format!("no parameter named `{name}`")))
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2) {
        self.arrays.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array2)> {
        self.arrays.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array2)> {
        self.arrays.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.arrays.values().map(Array2::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(cell: CellKind, bidirectional: bool, f: usize, h: usize) -> ModelSpec {
        ModelSpec {
            cell,
            bidirectional,
            input_features: f,
            hidden_size: h,
            head_hidden: 7,
            horizon: 3,
            seed: 1,
        }
    }

    #[test]
    fn bigru_encoder_count_formula() {
        for (f, h) in [(1, 1), (2, 4), (3, 8), (4, 64)] {
            let s = spec(CellKind::Gru, true, f, h);
            assert_eq!(s.encoder_parameter_count(), 2 * 3 * (h * f + h * h + h));
            let p = ParameterSet::init(&s).unwrap();
            let head = 2 * h * 7 + 7 + 7 * 3 + 3;
            assert_eq!(p.scalar_count(), s.encoder_parameter_count() + head);
        }
    }

    #[test]
    fn lstm_has_four_gates() {
        let s = spec(CellKind::Lstm, false, 2, 5);
        assert_eq!(s.encoder_parameter_count(), 4 * (5 * 2 + 5 * 5 + 5));
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let s = spec(CellKind::Gru, true, 2, 16);
        let a = ParameterSet::init(&s).unwrap();
        assert_eq!(a, ParameterSet::init(&s).unwrap());
        let bound = 0.25;
        assert!(a
            .get("fwd.u_z")
            .unwrap()
            .data()
            .iter()
            .all(|v| v.abs() <= bound));
        let other = ParameterSet::init(&ModelSpec {
            seed: 2,
            ..s.clone()
        })
        .unwrap();
        assert_ne!(a, other);
        a.check(&s).unwrap();
    }

    #[test]
    fn zero_counts_are_rejected() {
        let mut s = spec(CellKind::Gru, false, 1, 1);
        s.horizon = 0;
        assert!(ParameterSet::init(&s).is_err());
    }
}
