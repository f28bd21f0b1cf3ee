use crate::error::{Error, Result};
use crate::matrix::{matmul, matmul_transa, matmul_transb, Matrix};

/// Gradients of a dense layer for one batch.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
    pub dx: Matrix,
}

/// Values saved by a forward call for the matching backward call.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Matrix,
    /// Pre-activations fed to the activation (or the loss head).
    pub z: Matrix,
    /// Present for ARP layers only.
    pub rotation: Option<RotationCache>,
}

/// ARP-specific forward state.
#[derive(Debug, Clone)]
pub struct RotationCache {
    /// Per-neuron rotation coefficients ρ.
    pub rho: Vec<f64>,
    /// Per-neuron affine value at the probe point, `u = w·x_Q + b`.
    pub u: Vec<f64>,
    /// Neurons whose `|u|` fell below the clamp floor.
    pub clamped: Vec<bool>,
    /// Unrotated affine values `f = W x + b`, batch × out.
    pub affine: Matrix,
}

/// Plain affine layer `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicDense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl ClassicDense {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        check_bias(&weights, &bias)?;
        Ok(ClassicDense { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        let z = affine_forward(x, &self.weights, &self.bias)?;
        let cache = LayerCache {
            input: x.clone(),
            z: z.clone(),
            rotation: None,
        };
        Ok((z, cache))
    }

    pub fn backward(&self, cache: &LayerCache, dz: &Matrix) -> Result<LayerGrads> {
        check_upstream(cache, dz, self.out_dim())?;
        affine_backward(&cache.input, &self.weights, dz)
    }
}

pub(crate) fn check_bias(weights: &Matrix, bias: &[f64]) -> Result<()> {
    if bias.len() != weights.rows() {
        return Err(Error::Shape {
            op: "bias",
            left: weights.shape(),
            right: (bias.len(), 1),
        });
    }
    Ok(())
}

pub(crate) fn check_upstream(cache: &LayerCache, dz: &Matrix, out_dim: usize) -> Result<()> {
    if dz.shape() != (cache.input.rows(), out_dim) || dz.shape() != cache.z.shape() {
        return Err(Error::Shape {
            op: "backward",
            left: cache.z.shape(),
            right: dz.shape(),
        });
    }
    Ok(())
}

/// `X Wᵀ + b` for a batch `X` (batch × in) and weights `W` (out × in).
pub(crate) fn affine_forward(x: &Matrix, weights: &Matrix, bias: &[f64]) -> Result<Matrix> {
    if x.cols() != weights.cols() {
        return Err(Error::Shape {
            op: "dense_forward",
            left: x.shape(),
            right: weights.shape(),
        });
    }
    let mut z = matmul_transb(x, weights)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(z)
}

/// Gradients of `X Wᵀ + b` given the upstream gradient `dZ`.
pub(crate) fn affine_backward(x: &Matrix, weights: &Matrix, dz: &Matrix) -> Result<LayerGrads> {
    let dw = matmul_transa(dz, x)?;
    let db = dz.column_sums();
    let dx = matmul(dz, weights)?;
    Ok(LayerGrads { dw, db, dx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = ClassicDense::new(Matrix::identity(3), vec![0.0; 3]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 0.25, 9.0]]).unwrap();
        let (z, _) = layer.forward(&x).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn bias_length_is_checked() {
        assert!(ClassicDense::new(Matrix::zeros(2, 3), vec![0.0; 3]).is_err());
    }

    #[test]
    fn forward_rejects_wrong_input_width() {
        let layer = ClassicDense::new(Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        assert!(layer.forward(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn backward_rejects_mismatched_upstream() {
        let layer = ClassicDense::new(Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        let (_, cache) = layer.forward(&Matrix::zeros(4, 3)).unwrap();
        assert!(layer.backward(&cache, &Matrix::zeros(4, 3)).is_err());
        assert!(layer.backward(&cache, &Matrix::zeros(4, 2)).is_ok());
    }

    #[test]
    fn single_sample_gradients() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let layer = ClassicDense::new(w, vec![0.5]).unwrap();
        let x = Matrix::from_rows(&[vec![3.0, -1.0]]).unwrap();
        let (z, cache) = layer.forward(&x).unwrap();
        assert_eq!(z.get(0, 0), 1.5);
        let g = layer
            .backward(&cache, &Matrix::from_rows(&[vec![2.0]]).unwrap())
            .unwrap();
        assert_eq!(g.dw.as_slice(), &[6.0, -2.0]);
        assert_eq!(g.db, vec![2.0]);
        assert_eq!(g.dx.as_slice(), &[2.0, 4.0]);
    }
}
