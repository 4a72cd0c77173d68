use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Array2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Elementwise operations available both on plain arrays and on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
}

impl ElementwiseOp {
    pub fn is_binary(self) -> bool {
        matches!(self, Self::Add | Self::Sub | Self::Mul)
    }
}

impl fmt::Debug for Array2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Array2({}x{}) [", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How a binary operation lines its operands up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Broadcast {
    Same,
    /// Right operand is a `1 x cols` row applied to every row of the left.
    RightRow,
    /// Left operand is a `1 x cols` row applied to every row of the right.
    LeftRow,
}

pub(crate) fn broadcast_rule(a: &Array2, b: &Array2) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        Ok(Broadcast::Same)
    } else if b.rows == 1 && a.cols == b.cols {
        Ok(Broadcast::RightRow)
    } else if a.rows == 1 && a.cols == b.cols {
        Ok(Broadcast::LeftRow)
    } else {
        Err(Error::Shape(format!(
            "operands {}x{} and {}x{} are neither equal nor a bias-row broadcast",
            a.rows, a.cols, b.rows, b.cols
        )))
    }
}

impl Array2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} array",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    /// Single-row array.
    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// Builds an array from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// Column sums as a `1 x cols` row.
    pub fn sum_rows(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            for (acc, v) in out.data.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        out
    }

    /// `self += other`, shapes must match exactly.
    pub fn add_assign(&mut self, other: &Array2) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot accumulate {}x{} into {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Array2) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul of {}x{} by {}x{}: inner dimensions differ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.matmul_unchecked(other))
    }

    fn matmul_unchecked(&self, other: &Array2) -> Self {
        let (n, m) = (self.rows, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * m..(k + 1) * m];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// `self^T * other` without materialising the transpose.
    pub(crate) fn matmul_tn(&self, other: &Array2) -> Self {
        debug_assert_eq!(self.rows, other.rows);
        let (n, m) = (self.cols, other.cols);
        let mut out = Self::zeros(n, m);
        for k in 0..self.rows {
            let b_row = &other.data[k * m..(k + 1) * m];
            for i in 0..n {
                let aki = self.data[k * self.cols + i];
                if aki == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * m..(i + 1) * m];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += aki * b;
                }
            }
        }
        out
    }

    /// `self * other^T` without materialising the transpose.
    pub(crate) fn matmul_nt(&self, other: &Array2) -> Self {
        debug_assert_eq!(self.cols, other.cols);
        let (n, m) = (self.rows, other.rows);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let a_row = self.row(i);
            for j in 0..m {
                out.data[i * m + j] = a_row.iter().zip(other.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    pub(crate) fn zip_with(
        &self,
        other: &Array2,
        rule: Broadcast,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        match rule {
            Broadcast::Same => Self {
                rows: self.rows,
                cols: self.cols,
                data: self
                    .data
                    .iter()
                    .zip(&other.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect(),
            },
            Broadcast::RightRow => {
                let mut data = Vec::with_capacity(self.data.len());
                for r in 0..self.rows {
                    data.extend(self.row(r).iter().zip(&other.data).map(|(&a, &b)| f(a, b)));
                }
                Self {
                    rows: self.rows,
                    cols: self.cols,
                    data,
                }
            }
            Broadcast::LeftRow => {
                let mut data = Vec::with_capacity(other.data.len());
                for r in 0..other.rows {
                    data.extend(self.data.iter().zip(other.row(r)).map(|(&a, &b)| f(a, b)));
                }
                Self {
                    rows: other.rows,
                    cols: other.cols,
                    data,
                }
            }
        }
    }

    /// Applies `op` elementwise. Binary operations need `rhs` with an equal
    /// shape or a `1 x cols` bias row.
    pub fn elementwise(&self, op: ElementwiseOp, rhs: Option<&Array2>) -> Result<Self> {
        match (op.is_binary(), rhs) {
            (true, Some(b)) => {
                let rule = broadcast_rule(self, b)?;
                Ok(match op {
                    ElementwiseOp::Add => self.zip_with(b, rule, |x, y| x + y),
                    ElementwiseOp::Sub => self.zip_with(b, rule, |x, y| x - y),
                    _ => self.zip_with(b, rule, |x, y| x * y),
                })
            }
            (true, None) => Err(Error::Contract(format!("{op:?} needs a second operand"))),
            (false, Some(_)) => Err(Error::Contract(format!("{op:?} takes a single operand"))),
            (false, None) => Ok(match op {
                ElementwiseOp::Sigmoid => self.map(sigmoid),
                ElementwiseOp::Tanh => self.map(f64::tanh),
                _ => self.map(|v| v.max(0.0)),
            }),
        }
    }

    pub fn add(&self, other: &Array2) -> Result<Self> {
        self.elementwise(ElementwiseOp::Add, Some(other))
    }

    pub fn sub(&self, other: &Array2) -> Result<Self> {
        self.elementwise(ElementwiseOp::Sub, Some(other))
    }

    pub fn mul(&self, other: &Array2) -> Result<Self> {
        self.elementwise(ElementwiseOp::Mul, Some(other))
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn concat_cols(&self, other: &Array2) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "cannot concatenate {}x{} and {}x{} side by side",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Copies columns `start..start + width`.
    pub fn slice_cols(&self, start: usize, width: usize) -> Result<Self> {
        if start + width > self.cols {
            return Err(Error::Shape(format!(
                "columns {start}..{} out of range for {}x{}",
                start + width,
                self.rows,
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..start + width]);
        }
        Ok(Self {
            rows: self.rows,
            cols: width,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Array2) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_hand_example() {
        let a = Array2::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Array2::from_rows(&[[1.0], [1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Array2::from_rows(&[[3.0], [7.0]]).unwrap());
    }

    #[test]
    fn identity_is_exact_on_both_sides() {
        let a = Array2::from_rows(&[[1.5, -2.25, 3.0], [0.1, 0.2, 0.3]]).unwrap();
        assert_eq!(Array2::identity(2).matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&Array2::identity(3)).unwrap(), a);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = Array2::zeros(2, 3)
            .matmul(&Array2::zeros(2, 2))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn unary_definitions() {
        let z = Array2::scalar(0.0);
        assert_eq!(
            z.elementwise(ElementwiseOp::Sigmoid, None)
                .unwrap()
                .get(0, 0),
            0.5
        );
        assert_eq!(
            z.elementwise(ElementwiseOp::Tanh, None).unwrap().get(0, 0),
            0.0
        );
        let r = Array2::row_vector(&[-1.0, 2.0])
            .elementwise(ElementwiseOp::Relu, None)
            .unwrap();
        assert_eq!(r.data(), &[0.0, 2.0]);
    }

    #[test]
    fn bias_row_broadcast_and_rejection() {
        let a = Array2::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Array2::row_vector(&[10.0, 20.0]);
        assert_eq!(a.add(&b).unwrap().data(), &[11.0, 22.0, 13.0, 24.0]);
        assert_eq!(b.sub(&a).unwrap().data(), &[9.0, 18.0, 7.0, 16.0]);
        assert!(a.add(&Array2::zeros(2, 1)).is_err());
        assert!(a.mul(&Array2::zeros(3, 2)).is_err());
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        for x in [-1e6, -800.0, 0.0, 800.0, 1e6] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let a = Array2::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let b = Array2::from_rows(&[[0.5, -1.0], [2.0, 0.25]]).unwrap();
        assert_eq!(a.matmul_tn(&b), a.transpose().matmul(&b).unwrap());
        let c = Array2::from_rows(&[[1.0, 0.0, -1.0], [2.0, 2.0, 2.0]]).unwrap();
        assert_eq!(a.matmul_nt(&c), a.matmul(&c.transpose()).unwrap());
    }
}
