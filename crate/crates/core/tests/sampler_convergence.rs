//! End-to-end sampler checks that need a trained network: identifiability
//! on a single training pair, and strided-vs-full sampling fidelity.

use clothdiff_core::autodiff::{AdamConfig, AdamState, Tensor};
use clothdiff_core::diffusion::{
    make_schedule, sample, train_epoch, working_to_map, DenoiserNet, NetConfig, ScheduleKind,
    TrainSample,
};
use clothdiff_core::metrics::ssim_maps;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_cfg() -> NetConfig {
    // production widths: narrower nets plateau above the 0.05 MAE target
    NetConfig::new(6, 6, 16)
}

type Trained = (DenoiserNet, TrainSample, clothdiff_core::diffusion::NoiseSchedule);

/// Both tests share one training run.
fn trained_single_pair() -> &'static Trained {
    static TRAINED: std::sync::OnceLock<Trained> = std::sync::OnceLock::new();
    TRAINED.get_or_init(train_single_pair)
}

fn train_single_pair() -> Trained {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let pair = TrainSample {
        obs: Tensor::randn(&[1, 16, 16], &mut rng).map(|v| (v * 0.25 + 0.5).clamp(0.0, 1.0)),
        map: Tensor::randn(&[3, 6, 6], &mut rng).map(|v| (v * 0.5).clamp(-1.0, 1.0)),
    };
    let sched = make_schedule(100, ScheduleKind::SquaredCosine).unwrap();
    let mut net = DenoiserNet::new(tiny_cfg(), &mut rng).unwrap();
    let mut trng = ChaCha8Rng::seed_from_u64(2);
    let data = [pair.clone()];
    // constant-rate phase, then a lower-rate polish phase
    for lr in [1e-3f32, 3e-4] {
        let mut adam =
            AdamState::new(AdamConfig { lr, ..Default::default() }, &net.param_shapes());
        for _ in 0..5000 {
            train_epoch(&mut net, &mut adam, &data, &sched, 1, 0.0, &mut trng).unwrap();
        }
    }
    (net, pair, sched)
}

#[test]
fn trained_sampler_reproduces_a_single_training_map() {
    // with one x0 the noise is a deterministic function of (x_t, t), so a
    // trained sampler must land on that map from any starting noise
    let (net, pair, sched) = trained_single_pair();
    let obs = pair.obs.clone().reshaped(&[1, 1, 16, 16]).unwrap();
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = sample(net, &obs, [3, 6, 6], &sched, &mut rng).unwrap();
        let mae = x
            .data()
            .iter()
            .zip(pair.map.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f32>()
            / pair.map.len() as f32;
        assert!(mae < 0.05, "seed {seed}: sampled map MAE {mae}");
    }
}

#[test]
fn ten_step_strided_sampling_matches_full_sampling() {
    let (net, pair, sched) = trained_single_pair();
    let obs = pair.obs.clone().reshaped(&[1, 1, 16, 16]).unwrap();
    let strided = sched.strided(10).unwrap();
    let mut total = 0.0;
    let n = 4;
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let full = sample(net, &obs, [3, 6, 6], &sched, &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let fast = sample(net, &obs, [3, 6, 6], &strided, &mut rng).unwrap();
        total += ssim_maps(&working_to_map(&full).unwrap(), &working_to_map(&fast).unwrap())
            .unwrap();
    }
    let mean = total / n as f64;
    assert!(mean >= 0.9, "mean SSIM between 10-step and 100-step outputs {mean}");
}
