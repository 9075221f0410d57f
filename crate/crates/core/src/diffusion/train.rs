use super::net::{time_embedding, DenoiserNet};
use super::schedule::NoiseSchedule;
use crate::autodiff::{AdamState, Tensor};
use crate::pipeline::{DepthObservation, TranslationMap};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// One training pair in model space.
#[derive(Debug, Clone)]
pub struct TrainSample {
    /// (1, S, S) conditioning image in [0, 1].
    pub obs: Tensor,
    /// (3, H, W) translation map in [-1, 1].
    pub map: Tensor,
}

/// Preprocessed depth → conditioning tensor: gray levels scaled to [0, 1].
pub fn obs_to_tensor(obs: &DepthObservation) -> Tensor {
    let data = obs.values.iter().map(|&v| v / 255.0).collect();
    Tensor::from_vec(&[1, obs.size, obs.size], data).expect("size * size values")
}

/// Quantized map → planar (3, H, W) tensor in the working range [-1, 1].
pub fn map_to_working(t: &TranslationMap) -> Tensor {
    let (h, w) = (t.grid_h(), t.grid_w());
    let q = t.quantized();
    let mut data = vec![0.0f32; 3 * h * w];
    for cell in 0..h * w {
        for ch in 0..3 {
            data[ch * h * w + cell] = q[cell * 3 + ch] as f32 / 255.0 * 2.0 - 1.0;
        }
    }
    Tensor::from_vec(&[3, h, w], data).expect("3 * h * w values")
}

/// Working-range tensor → quantized map (clamped, round half away from zero).
pub fn working_to_map(x: &Tensor) -> Result<TranslationMap> {
    let shape = x.shape();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(Error::InvalidArgument(format!("expected (3, H, W) tensor, got {shape:?}")));
    }
    let (h, w) = (shape[1], shape[2]);
    let mut q = vec![0u8; h * w * 3];
    for cell in 0..h * w {
        for ch in 0..3 {
            let v = x.data()[ch * h * w + cell].clamp(-1.0, 1.0);
            q[cell * 3 + ch] = ((v + 1.0) / 2.0 * 255.0).round() as u8;
        }
    }
    TranslationMap::new(h, w, q)
}

/// One pass over the dataset in shuffled minibatches: per-sample uniform
/// timestep, ε-prediction MSE, Adam update. Conditioning images are
/// perturbed by uniform noise of amplitude `depth_noise` (in [0,1] units).
/// Returns the per-batch losses. Deterministic given the RNG state.
pub fn train_epoch<R: Rng>(
    net: &mut DenoiserNet,
    adam: &mut AdamState,
    data: &[TrainSample],
    sched: &NoiseSchedule,
    batch_size: usize,
    depth_noise: f32,
    rng: &mut R,
) -> Result<Vec<f32>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let (gh, gw, s) = (net.cfg.grid_h, net.cfg.grid_w, net.cfg.img_size);
    let emb = net.cfg.time_embed;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut losses = Vec::new();
    for chunk in order.chunks(batch_size) {
        let n = chunk.len();
        let mut x_t = Tensor::zeros(&[n, 3, gh, gw]);
        let mut obs = Tensor::zeros(&[n, 1, s, s]);
        let mut temb = Tensor::zeros(&[n, emb]);
        let mut target = Tensor::zeros(&[n, 3, gh, gw]);
        let map_len = 3 * gh * gw;
        let obs_len = s * s;
        for (bi, &di) in chunk.iter().enumerate() {
            let sample = &data[di];
            if sample.map.len() != map_len || sample.obs.len() != obs_len {
                return Err(Error::InvalidArgument(format!(
                    "sample {di} shape {:?}/{:?} does not match net config",
                    sample.map.shape(),
                    sample.obs.shape()
                )));
            }
            let ti = rng.gen_range(0..sched.len());
            let (a, b) =
                (sched.alpha_bar(ti).sqrt() as f32, (1.0 - sched.alpha_bar(ti)).sqrt() as f32);
            for j in 0..map_len {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                let e = e as f32;
                x_t.data_mut()[bi * map_len + j] = a * sample.map.data()[j] + b * e;
                target.data_mut()[bi * map_len + j] = e;
            }
            for j in 0..obs_len {
                let noise =
                    if depth_noise > 0.0 { rng.gen_range(-depth_noise..=depth_noise) } else { 0.0 };
                obs.data_mut()[bi * obs_len + j] = sample.obs.data()[j] + noise;
            }
            temb.data_mut()[bi * emb..(bi + 1) * emb]
                .copy_from_slice(&time_embedding(sched.timestep(ti), emb));
        }
        let (loss, grads) = net.loss_and_grads(&x_t, &obs, &temb, &target)?;
        if !loss.is_finite() {
            return Err(Error::TrainDiverged(format!("non-finite loss {loss}")));
        }
        adam.update(&mut net.params, &grads)?;
        losses.push(loss);
    }
    Ok(losses)
}
