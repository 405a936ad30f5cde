//! AdaDelta and Adam parameter updates over flat tensor bundles. A model
//! exposes its tensors as an ordered list of slices; the optimizer keeps
//! matching accumulators and updates the parameters in place.

use super::TensorError;

pub const ADADELTA_RHO: f64 = 0.95;
pub const ADADELTA_EPS: f64 = 1e-6;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

fn check_shapes(
    op: &'static str,
    accum: &[Vec<f64>],
    params: &[&mut [f64]],
    grads: &[&[f64]],
) -> Result<(), TensorError> {
    if params.len() != accum.len() || grads.len() != accum.len() {
        return Err(TensorError::Shape {
            op,
            detail: format!(
                "state has {} tensors, got {} params and {} grads",
                accum.len(),
                params.len(),
                grads.len()
            ),
        });
    }
    for (i, ((a, p), g)) in accum.iter().zip(params).zip(grads).enumerate() {
        if p.len() != a.len() || g.len() != a.len() {
            return Err(TensorError::Shape {
                op,
                detail: format!(
                    "tensor {}: state length {}, param length {}, grad length {}",
                    i,
                    a.len(),
                    p.len(),
                    g.len()
                ),
            });
        }
    }
    Ok(())
}

/// AdaDelta (Zeiler 2012): parameter-free adaptive steps from running RMS of
/// gradients and updates.
#[derive(Clone, Debug)]
pub struct AdaDeltaState {
    rho: f64,
    eps: f64,
    accum_grad: Vec<Vec<f64>>,
    accum_update: Vec<Vec<f64>>,
}

impl AdaDeltaState {
    pub fn new(rho: f64, eps: f64, shapes: &[usize]) -> AdaDeltaState {
        AdaDeltaState {
            rho,
            eps,
            accum_grad: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            accum_update: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), TensorError> {
        check_shapes("adadelta_step", &self.accum_grad, params, grads)?;
        for ((param, grad), (eg, eu)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.accum_grad.iter_mut().zip(&mut self.accum_update))
        {
            for i in 0..param.len() {
                let g = grad[i];
                eg[i] = self.rho * eg[i] + (1.0 - self.rho) * g * g;
                let dx = -((eu[i] + self.eps) / (eg[i] + self.eps)).sqrt() * g;
                eu[i] = self.rho * eu[i] + (1.0 - self.rho) * dx * dx;
                param[i] += dx;
            }
        }
        Ok(())
    }
}

/// Adam (Kingma–Ba) with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, shapes: &[usize]) -> AdamState {
        AdamState::with_config(lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, shapes)
    }

    pub fn with_config(lr: f64, beta1: f64, beta2: f64, eps: f64, shapes: &[usize]) -> AdamState {
        AdamState {
            lr,
            beta1,
            beta2,
            eps,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), TensorError> {
        check_shapes("adam_step", &self.first_moment, params, grads)?;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
