use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-parameter first/second moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, param_shapes: &[Vec<usize>]) -> Self {
        AdamState {
            cfg,
            m: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// Change the learning rate mid-run; moments and step count carry over,
    /// which is what rate schedules need.
    pub fn set_lr(&mut self, lr: f32) {
        self.cfg.lr = lr;
    }

    /// Bias-corrected Adam step, applied in place. NaN gradients are
    /// rejected: they signal diverged training.
    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::InvalidArgument(format!(
                "adam state tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params[i].shape() {
                return Err(Error::InvalidArgument(format!(
                    "gradient {i} shape {:?} does not match parameter {:?}",
                    g.shape(),
                    params[i].shape()
                )));
            }
            if !g.all_finite() {
                return Err(Error::TrainDiverged(format!("non-finite gradient in parameter {i}")));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - (self.cfg.beta1 as f64).powf(t);
        let bc2 = 1.0 - (self.cfg.beta2 as f64).powf(t);
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        for i in 0..params.len() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params[i].data_mut();
            let g = grads[i].data();
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let mh = m[j] / bc1 as f32;
                let vh = v[j] / bc2 as f32;
                p[j] -= self.cfg.lr * mh / (vh.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let shapes = vec![vec![3]];
        let mut st = AdamState::new(AdamConfig::default(), &shapes);
        let mut params = vec![Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = params.clone();
        st.update(&mut params, &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(params, before);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_is_signed_unit_lr_step() {
        // bias correction makes m_hat = g, v_hat = g^2, so the first update is
        // -lr * g / (|g| + eps)
        let cfg = AdamConfig { lr: 0.01, ..Default::default() };
        let mut st = AdamState::new(cfg, &[vec![2]]);
        let mut params = vec![Tensor::zeros(&[2])];
        let g = Tensor::from_vec(&[2], vec![3.0, -0.25]).unwrap();
        st.update(&mut params, &[g]).unwrap();
        assert!((params[0].data()[0] + 0.01).abs() < 1e-6);
        assert!((params[0].data()[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn update_is_deterministic() {
        let shapes = vec![vec![4]];
        let mk = || {
            let mut st = AdamState::new(AdamConfig::default(), &shapes);
            let mut params = vec![Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap()];
            let g = Tensor::from_vec(&[4], vec![0.5, -0.5, 1.0, -1.0]).unwrap();
            st.update(&mut params, &[g.clone()]).unwrap();
            st.update(&mut params, &[g]).unwrap();
            params
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn set_lr_scales_the_next_step() {
        // first-step update is -lr * sign(g), so halving lr halves the step
        let mk = |lr| {
            let mut st = AdamState::new(AdamConfig { lr: 0.01, ..Default::default() }, &[vec![1]]);
            st.set_lr(lr);
            let mut params = vec![Tensor::zeros(&[1])];
            st.update(&mut params, &[Tensor::from_vec(&[1], vec![2.0]).unwrap()]).unwrap();
            params[0].data()[0]
        };
        assert!((mk(0.005) - 0.5 * mk(0.01)).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let mut st = AdamState::new(AdamConfig::default(), &[vec![1]]);
        let mut params = vec![Tensor::zeros(&[1])];
        let g = Tensor::from_vec(&[1], vec![f32::NAN]).unwrap();
        assert!(st.update(&mut params, &[g]).is_err());
    }

    #[test]
    fn moments_decay_toward_zero_under_zero_gradient() {
        let mut st = AdamState::new(AdamConfig::default(), &[vec![1]]);
        let mut params = vec![Tensor::zeros(&[1])];
        st.update(&mut params, &[Tensor::from_vec(&[1], vec![1.0]).unwrap()]).unwrap();
        let m0 = st.m[0].data()[0];
        for _ in 0..50 {
            st.update(&mut params, &[Tensor::zeros(&[1])]).unwrap();
        }
        assert!(st.m[0].data()[0].abs() < m0.abs() * 1e-2);
    }
}
