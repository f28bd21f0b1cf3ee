use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Unipolar sigmoid `1 / (1 + e^-z)`, evaluated so that neither branch can
/// overflow: `σ(-750)` is exactly `0.0`, `σ(750)` exactly `1.0`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(z: &Matrix) -> Matrix {
    z.map(sigmoid)
}

/// Backpropagates through the sigmoid given its output `a`:
/// `dZ = dA ⊙ a ⊙ (1 - a)`.
pub fn sigmoid_backward(a: &Matrix, da: &Matrix) -> Result<Matrix> {
    if a.shape() != da.shape() {
        return Err(Error::Shape {
            op: "sigmoid_backward",
            left: a.shape(),
            right: da.shape(),
        });
    }
    let data = a
        .as_slice()
        .iter()
        .zip(da.as_slice())
        .map(|(&a, &g)| g * a * (1.0 - a))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}
