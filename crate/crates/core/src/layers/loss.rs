use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits, `(softmax - onehot) / batch`.
///
/// An empty batch has loss 0 and an empty gradient.
pub fn softmax_xent(logits: &Matrix, labels: &[u8]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::Shape {
            op: "softmax_xent",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    let classes = logits.cols();
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::Label {
            label: bad as usize,
            classes,
        });
    }
    let n = labels.len();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, classes)));
    }

    let mut grad = logits.clone();
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = grad.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        // -log softmax_y = log Σ exp(z - max) - (z_y - max)
        loss += log_total - (row[y as usize] - max);
        for v in row.iter_mut() {
            *v = (*v - max - log_total).exp();
        }
        row[y as usize] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    for v in grad.as_mut_slice() {
        *v *= inv;
    }
    Ok((loss * inv, grad))
}

/// Index of the largest logit in each row (first one on ties).
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
