use serde::{Deserialize, Serialize};

use super::{ModelParams, NnError};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    /// Applies one update from the stored gradients and bumps `params.step`.
    /// Every parameter must carry a gradient.
    pub fn step(&self, params: &mut ModelParams) -> Result<(), NnError> {
        if let Some(e) = params.entries().iter().find(|e| e.grad.is_none()) {
            return Err(NnError::MissingGradient { name: e.name.clone() });
        }
        let mut moments = params.moments.take().unwrap_or_else(|| {
            params
                .entries()
                .iter()
                .map(|e| (vec![0.0; e.value.len()], vec![0.0; e.value.len()]))
                .collect()
        });
        params.step += 1;
        let t = params.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (e, (m, v)) in params.entries_mut().iter_mut().zip(moments.iter_mut()) {
            let g = e.grad.as_ref().expect("checked above");
            for (((w, &gi), mi), vi) in e.value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        params.moments = Some(moments);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn scalar(w: f64) -> ModelParams {
        let mut p = ModelParams::new(0);
        p.push("w", Tensor::vector(vec![w]));
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ModelParams::with_rng(3, |p, rng| p.push_linear("fc", 3, 2, rng));
        let before = p.clone();
        p.set_grads(vec![vec![0.0; 6], vec![0.0; 2]]).unwrap();
        Adam::default().step(&mut p).unwrap();
        assert_eq!(p.step, 1);
        for (a, b) in p.entries().iter().zip(before.entries()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.5);
        p.set_grads(vec![vec![1.0]]).unwrap();
        let adam = Adam::default();
        adam.step(&mut p).unwrap();
        let moved = p.get("w").unwrap().data()[0] - 0.5;
        assert!((moved + adam.lr).abs() < 1e-10, "moved {moved}");
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut p = scalar(0.0);
        let adam = Adam::with_lr(0.1);
        for _ in 0..50 {
            let w = p.get("w").unwrap().data()[0];
            p.set_grads(vec![vec![2.0 * (w - 3.0)]]).unwrap();
            adam.step(&mut p).unwrap();
        }
        let w = p.get("w").unwrap().data()[0];
        assert!((w - 3.0).abs() < 0.5, "w = {w}");
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut p = scalar(1.0);
        assert_eq!(
            Adam::default().step(&mut p),
            Err(NnError::MissingGradient { name: "w".into() })
        );
    }
}
