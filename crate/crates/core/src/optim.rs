//! Parameter update rules.
//!
//! Parameters and gradients are passed as matching lists of flat slices
//! (one per weight matrix or bias vector), the layout produced by
//! [`NetworkModel::param_slices_mut`](crate::layers::NetworkModel::param_slices_mut).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?} (expected adam|sgd)")),
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for parameter tensors of the given lengths, with
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(lr: f64, lengths: &[usize]) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8, lengths)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64, lengths: &[usize]) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: lengths.iter().map(|&n| vec![0.0; n]).collect(),
            v: lengths.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_shapes(
            "adam_step",
            params.iter().map(|p| p.len()),
            self.m.iter().map(Vec::len),
        )?;
        check_shapes(
            "adam_step",
            params.iter().map(|p| p.len()),
            grads.iter().map(|g| g.len()),
        )?;

        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// `p ← p − lr·g`.
pub fn sgd_step(params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
    check_shapes(
        "sgd_step",
        params.iter().map(|p| p.len()),
        grads.iter().map(|g| g.len()),
    )?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi -= lr * gi;
        }
    }
    Ok(())
}

/// Either optimizer behind one interface, as the training loop needs it.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, lengths: &[usize]) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(lr, lengths)),
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        match self {
            Optimizer::Adam(state) => state.step(params, grads),
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
        }
    }
}

fn check_shapes(
    op: &'static str,
    left: impl ExactSizeIterator<Item = usize>,
    right: impl ExactSizeIterator<Item = usize>,
) -> Result<()> {
    let left: Vec<usize> = left.collect();
    let right: Vec<usize> = right.collect();
    if left != right {
        let total = |v: &[usize]| v.iter().sum::<usize>();
        return Err(Error::Shape {
            op,
            left: (left.len(), total(&left)),
            right: (right.len(), total(&right)),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut adam = AdamState::new(0.003, &[3]);
        adam.step(&mut [&mut p], &[&g]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![0.0];
        let mut adam = AdamState::new(0.003, &[1]);
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        // m̂ = v̂ = 1 so the step is lr / (1 + ε).
        assert!((p[0] + 0.003).abs() < 1e-10, "{}", p[0]);
    }

    #[test]
    fn adam_rejects_mismatched_shapes() {
        let mut p = vec![0.0; 2];
        let mut adam = AdamState::new(0.1, &[2]);
        assert!(adam.step(&mut [&mut p], &[&[1.0]]).is_err());
        let mut q = vec![0.0; 3];
        assert!(adam.step(&mut [&mut q], &[&[1.0, 1.0, 1.0]]).is_err());
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn second_moments_stay_non_negative() {
        let mut p = vec![0.5, 0.5];
        let mut adam = AdamState::new(0.01, &[2]);
        for k in 0..20 {
            let g = [(k as f64).sin(), -(k as f64).cos() * 1e3];
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert!(adam.second_moments()[0].iter().all(|&v| v >= 0.0));
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sgd_cases() {
        let mut p = vec![1.0];
        sgd_step(&mut [&mut p], &[&[2.0]], 0.0).unwrap();
        assert_eq!(p, vec![1.0]);
        sgd_step(&mut [&mut p], &[&[2.0]], 0.5).unwrap();
        assert_eq!(p, vec![0.0]);
        assert!(sgd_step(&mut [&mut p], &[&[2.0, 1.0]], 0.5).is_err());
    }

    #[test]
    fn optimizer_kind_parses() {
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
