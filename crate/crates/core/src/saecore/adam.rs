//! Adam updates over the SAE parameter set.

use ndarray::{Array, Array1, Array2, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::loss::ParamGrads;
use super::model::{Nonlinearity, SaeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second-moment state for every parameter tensor.
#[derive(Debug, Clone)]
pub(crate) struct AdamState {
    step: u64,
    m_w_enc: Array2<f64>,
    v_w_enc: Array2<f64>,
    m_b_enc: Array1<f64>,
    v_b_enc: Array1<f64>,
    m_w_dec: Array2<f64>,
    v_w_dec: Array2<f64>,
    m_b_dec: Array1<f64>,
    v_b_dec: Array1<f64>,
    m_theta: Option<Array1<f64>>,
    v_theta: Option<Array1<f64>>,
}

impl AdamState {
    pub fn new(model: &SaeModel) -> Self {
        let theta_len = match &model.nonlinearity {
            Nonlinearity::Relu => None,
            Nonlinearity::JumpRelu { thresholds, .. } => Some(thresholds.len()),
        };
        AdamState {
            step: 0,
            m_w_enc: Array2::zeros(model.w_enc.dim()),
            v_w_enc: Array2::zeros(model.w_enc.dim()),
            m_b_enc: Array1::zeros(model.b_enc.len()),
            v_b_enc: Array1::zeros(model.b_enc.len()),
            m_w_dec: Array2::zeros(model.w_dec.dim()),
            v_w_dec: Array2::zeros(model.w_dec.dim()),
            m_b_dec: Array1::zeros(model.b_dec.len()),
            v_b_dec: Array1::zeros(model.b_dec.len()),
            m_theta: theta_len.map(Array1::zeros),
            v_theta: theta_len.map(Array1::zeros),
        }
    }

    /// Apply one Adam update with the given gradients.
    pub fn apply(
        &mut self,
        model: &mut SaeModel,
        grads: &ParamGrads,
        learning_rate: f64,
        params: &AdamParams,
    ) {
        self.step += 1;
        let bias1 = 1.0 - params.beta1.powi(self.step as i32);
        let bias2 = 1.0 - params.beta2.powi(self.step as i32);

        update_tensor(
            &mut model.w_enc,
            &mut self.m_w_enc,
            &mut self.v_w_enc,
            &grads.w_enc,
            learning_rate,
            params,
            bias1,
            bias2,
        );
        update_tensor(
            &mut model.b_enc,
            &mut self.m_b_enc,
            &mut self.v_b_enc,
            &grads.b_enc,
            learning_rate,
            params,
            bias1,
            bias2,
        );
        update_tensor(
            &mut model.w_dec,
            &mut self.m_w_dec,
            &mut self.v_w_dec,
            &grads.w_dec,
            learning_rate,
            params,
            bias1,
            bias2,
        );
        update_tensor(
            &mut model.b_dec,
            &mut self.m_b_dec,
            &mut self.v_b_dec,
            &grads.b_dec,
            learning_rate,
            params,
            bias1,
            bias2,
        );
        if let Nonlinearity::JumpRelu { thresholds, .. } = &mut model.nonlinearity {
            if let (Some(m), Some(v), Some(g)) = (
                self.m_theta.as_mut(),
                self.v_theta.as_mut(),
                grads.thresholds.as_ref(),
            ) {
                update_tensor(thresholds, m, v, g, learning_rate, params, bias1, bias2);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_tensor<D: Dimension>(
    param: &mut Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    learning_rate: f64,
    params: &AdamParams,
    bias1: f64,
    bias2: f64,
) {
    Zip::from(param)
        .and(m)
        .and(v)
        .and(grad)
        .for_each(|p, m, v, &g| {
            *m = params.beta1 * *m + (1.0 - params.beta1) * g;
            *v = params.beta2 * *v + (1.0 - params.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + params.epsilon);
        });
}
