use super::net::DenoiserNet;
use super::schedule::NoiseSchedule;
use crate::autodiff::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// Anything usable as ε_θ in the reverse process; lets tests drive the
/// sampler with analytic oracles instead of a trained network.
pub trait NoisePredictor {
    /// Predict the noise in `x_t` (1, C, H, W) at original timestep `t`
    /// (1-based), conditioned on `obs` (1, 1, S, S).
    fn predict_noise(&self, x_t: &Tensor, obs: &Tensor, t: usize) -> Result<Tensor>;
}

impl NoisePredictor for DenoiserNet {
    fn predict_noise(&self, x_t: &Tensor, obs: &Tensor, t: usize) -> Result<Tensor> {
        let temb =
            Tensor::from_vec(&[1, self.cfg.time_embed], self.time_embedding(t))?;
        self.predict(x_t, obs, &temb)
    }
}

/// Ancestral sampling over the (possibly strided) schedule, starting from
/// standard normal x_T:
/// x_{i-1} = 1/√a_i · (x_i − β_i/√(1−ᾱ_i) · ε_θ) + √β̃_i · z, with z = 0 at
/// the final step. Returns a (C, H, W) tensor in the working range.
///
/// The update is evaluated in posterior-mean form with the implied x̂0
/// clamped to the working range [−1, 1]. For in-range predictions the two
/// forms are identical; clamping keeps trajectories bounded when ε_θ
/// extrapolates badly off the training distribution, without which heavily
/// overfit predictors diverge under their own recursion.
pub fn sample<P: NoisePredictor, R: Rng>(
    predictor: &P,
    obs: &Tensor,
    map_shape: [usize; 3],
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Tensor> {
    if sched.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let [c, h, w] = map_shape;
    let mut x = Tensor::randn(&[1, c, h, w], rng);
    for i in (0..sched.len()).rev() {
        let eps = predictor.predict_noise(&x, obs, sched.timestep(i))?;
        if eps.shape() != x.shape() {
            return Err(Error::InvalidArgument(format!(
                "predictor returned {:?} for x of shape {:?}",
                eps.shape(),
                x.shape()
            )));
        }
        let ab = sched.alpha_bar(i);
        let (x0_num, x0_den) = ((1.0 - ab).sqrt() as f32, ab.sqrt() as f32);
        let (c0, ct) = sched.posterior_mean_coeffs(i);
        let (c0, ct) = (c0 as f32, ct as f32);
        let std = if i > 0 { sched.posterior_std(i) as f32 } else { 0.0 };
        for (j, v) in x.data_mut().iter_mut().enumerate() {
            let x0_hat = ((*v - x0_num * eps.data()[j]) / x0_den).clamp(-1.0, 1.0);
            let mut nv = c0 * x0_hat + ct * *v;
            if std > 0.0 {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                nv += std * z as f32;
            }
            *v = nv;
        }
        if !x.all_finite() {
            return Err(Error::TrainDiverged(format!(
                "sampling produced non-finite values at step {i}"
            )));
        }
    }
    x.reshaped(&[c, h, w])
}
