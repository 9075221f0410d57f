use crate::config::RunConfig;
use crate::{render, CliError, CliResult, Refine, RegMethod};
use clothdiff_core::autodiff::{AdamConfig, AdamState, Tensor};
use clothdiff_core::diffusion::{
    load_checkpoint, make_schedule, obs_to_tensor, sample, save_checkpoint, train_epoch,
    working_to_map, CheckpointMeta, DenoiserNet, NetConfig, NoiseSchedule, TrainSample,
};
use clothdiff_core::formats;
use clothdiff_core::metrics::{chamfer, evaluate_run, ssim_maps, EvalSample};
use clothdiff_core::pipeline::{
    decode_translation_map, preprocess_depth, read_dataset, write_dataset, Dataset, StoredSample,
    TranslationMap,
};
use clothdiff_core::postprocess::{
    canonical_to_world, fit_image_transform, fit_z_affine, mask_depth_values, mask_pixel_coords,
};
use clothdiff_core::registration::{cpd_nonrigid, icp_2d, refine_mesh, spr_nonrigid};
use clothdiff_core::sim::{generate_dataset, ClothMesh, DatasetSpec, DepthImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

pub fn gen_data(
    mut cfg: RunConfig,
    out: &Path,
    episodes: Option<usize>,
    actions: Option<usize>,
    grid: Option<usize>,
    img: Option<usize>,
    seed: Option<u64>,
) -> CliResult<()> {
    if let Some(v) = episodes {
        cfg.episodes = v;
    }
    if let Some(v) = actions {
        cfg.actions = v;
    }
    if let Some(v) = grid {
        cfg.grid = v;
    }
    if let Some(v) = img {
        cfg.img = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    let spec = DatasetSpec {
        episodes: cfg.episodes,
        actions_per_episode: cfg.actions,
        grid_h: cfg.grid,
        grid_w: cfg.grid,
        side: cfg.cloth_side,
        camera: cfg.camera(),
        seed: cfg.seed,
        sim: cfg.sim,
        workspace_half_extent: cfg.workspace_half_extent,
        lift_range: cfg.lift_range,
    };
    eprintln!(
        "generating {} episodes x {} actions ({}x{} grid, {}px camera, seed {})",
        spec.episodes, spec.actions_per_episode, spec.grid_h, spec.grid_w, cfg.img, spec.seed
    );
    let raw = generate_dataset(&spec)?;
    let ds = Dataset::from_raw(&raw)?;
    write_dataset(&ds, out)?;
    eprintln!("wrote {} samples to {}", ds.samples.len(), out.display());
    Ok(())
}

fn depth_image(sample: &StoredSample, ds: &Dataset) -> DepthImage {
    DepthImage {
        rows: ds.manifest.camera.rows,
        cols: ds.manifest.camera.cols,
        depth: sample.depth_meters(),
        mask: sample.mask.clone(),
    }
}

fn training_set(ds: &Dataset, obs_size: usize) -> CliResult<Vec<TrainSample>> {
    ds.samples
        .iter()
        .map(|s| {
            let obs = preprocess_depth(&depth_image(s, ds), obs_size)?;
            Ok(TrainSample {
                obs: obs_to_tensor(&obs),
                map: clothdiff_core::diffusion::map_to_working(&s.tmap),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    mut cfg: RunConfig,
    data: &Path,
    out: &Path,
    epochs: Option<usize>,
    batch: Option<usize>,
    train_steps: Option<usize>,
    infer_steps: Option<usize>,
    lr: Option<f64>,
    lr_final: Option<f64>,
    seed: Option<u64>,
) -> CliResult<()> {
    crate::require_exists(data)?;
    if let Some(v) = epochs {
        cfg.epochs = v;
    }
    if let Some(v) = batch {
        cfg.batch = v;
    }
    if let Some(v) = train_steps {
        cfg.train_steps = v;
    }
    if let Some(v) = infer_steps {
        cfg.infer_steps = v;
    }
    if let Some(v) = lr {
        cfg.lr = v;
    }
    if let Some(v) = lr_final {
        cfg.lr_final = Some(v);
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    let ds = read_dataset(data)?;
    let obs_size = ds.manifest.camera.rows.min(ds.manifest.camera.cols);
    let samples = training_set(&ds, obs_size)?;
    let net_cfg = NetConfig::new(ds.manifest.grid_h, ds.manifest.grid_w, obs_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = DenoiserNet::new(net_cfg.clone(), &mut rng)?;
    let sched = make_schedule(cfg.train_steps, cfg.schedule)?;
    let mut adam = AdamState::new(
        AdamConfig { lr: cfg.lr as f32, ..Default::default() },
        &net.param_shapes(),
    );
    eprintln!(
        "training {} params on {} samples: {} epochs, batch {}, lr {}{}, T={}, seed {}",
        net.param_count(),
        samples.len(),
        cfg.epochs,
        cfg.batch,
        cfg.lr,
        cfg.lr_final.map_or(String::new(), |v| format!(" (cosine to {v})")),
        cfg.train_steps,
        cfg.seed
    );
    let mut train_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_rng.set_stream(1);
    let lr_end = cfg.lr_final.unwrap_or(cfg.lr);
    for epoch in 0..cfg.epochs {
        // cosine interpolation from lr at epoch 0 to lr_final at the last epoch
        let frac = if cfg.epochs > 1 { epoch as f64 / (cfg.epochs - 1) as f64 } else { 0.0 };
        let lr_e = lr_end + (cfg.lr - lr_end) * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos());
        adam.set_lr(lr_e as f32);
        let losses =
            train_epoch(&mut net, &mut adam, &samples, &sched, cfg.batch, cfg.depth_noise, &mut train_rng)?;
        let mean = losses.iter().sum::<f32>() / losses.len() as f32;
        eprintln!("epoch {}/{}: mean loss {mean:.4}", epoch + 1, cfg.epochs);
    }
    let meta = CheckpointMeta {
        net: net_cfg,
        train_steps: cfg.train_steps,
        schedule: cfg.schedule,
        seed: cfg.seed,
        epochs: cfg.epochs,
    };
    save_checkpoint(&net, &meta, out)?;
    eprintln!("saved checkpoint to {}", out.display());
    Ok(())
}

/// One full prediction: depth → sampled translation map → decoded canonical
/// mesh → world-frame placement.
pub(crate) fn predict_world_mesh<R: Rng>(
    net: &DenoiserNet,
    ds: &Dataset,
    sample_ix: usize,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> CliResult<(TranslationMap, ClothMesh)> {
    let s = &ds.samples[sample_ix];
    let depth = depth_image(s, ds);
    let obs = preprocess_depth(&depth, net.cfg.img_size)?;
    let obs_t: Tensor = obs_to_tensor(&obs).reshaped(&[1, 1, obs.size, obs.size])?;
    let (gh, gw) = (ds.manifest.grid_h, ds.manifest.grid_w);
    let map_t = sample(net, &obs_t, [3, gh, gw], sched, rng)?;
    let map = working_to_map(&map_t)?;
    let canonical = ds.canonical()?;
    let decoded = decode_translation_map(&map, &canonical)?;
    let mask_px = mask_pixel_coords(&depth);
    let canonical_xy: Vec<[f64; 2]> =
        decoded.vertices().iter().map(|v| [v[0], v[1]]).collect();
    let t_im = fit_image_transform(&canonical_xy, &mask_px)?;
    let zs: Vec<f64> = decoded.vertices().iter().map(|v| v[2]).collect();
    let zaff = fit_z_affine(&zs, &mask_depth_values(&depth))?;
    let world = canonical_to_world(&decoded, &t_im, &zaff, &ds.manifest.camera)?;
    Ok((map, world))
}

/// Observed world-frame point cloud: back-projected mask pixels.
fn observed_cloud(depth: &DepthImage, camera: &clothdiff_core::sim::DepthCamera) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    for r in 0..depth.rows {
        for c in 0..depth.cols {
            if depth.mask[r * depth.cols + c] {
                let [x, y] = camera.pixel_to_world(r, c);
                pts.push([x, y, camera.height - depth.depth[r * depth.cols + c]]);
            }
        }
    }
    pts
}

fn parse_sample_ref(s: &str) -> CliResult<(std::path::PathBuf, usize)> {
    let (dir, ix) = s
        .rsplit_once('/')
        .ok_or_else(|| CliError::Usage(format!("--sample must be DIR/index, got {s}")))?;
    let ix = ix
        .parse()
        .map_err(|_| CliError::Usage(format!("--sample index must be a number, got {ix}")))?;
    Ok((dir.into(), ix))
}

pub fn infer(
    cfg: RunConfig,
    model: &Path,
    sample_ref: &str,
    out: &Path,
    refine: Refine,
    infer_steps: Option<usize>,
    seed: Option<u64>,
) -> CliResult<()> {
    crate::require_exists(model)?;
    let (dir, ix) = parse_sample_ref(sample_ref)?;
    crate::require_exists(&dir)?;
    let (net, meta) = load_checkpoint(model)?;
    let ds = read_dataset(&dir)?;
    if ix >= ds.samples.len() {
        return Err(CliError::Usage(format!(
            "sample index {ix} out of range for a {}-sample dataset",
            ds.samples.len()
        )));
    }
    let steps = infer_steps.unwrap_or(cfg.infer_steps);
    let sched = make_schedule(meta.train_steps, meta.schedule)?.strided(steps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.seed));
    let (_, mut world) = predict_world_mesh(&net, &ds, ix, &sched, &mut rng)?;
    if refine == Refine::Spr {
        let depth = depth_image(&ds.samples[ix], &ds);
        let cloud = observed_cloud(&depth, &ds.manifest.camera);
        world = refine_mesh(&world, &cloud, &cfg.registration)?;
        eprintln!("refined with SPR against {} observed points", cloud.len());
    }
    formats::write_ply(&world, out)?;
    eprintln!("wrote mesh to {}", out.display());
    Ok(())
}

pub fn eval(
    cfg: RunConfig,
    model: &Path,
    data: &Path,
    refine: Refine,
    report_path: &Path,
    infer_steps: Option<usize>,
    seed: Option<u64>,
) -> CliResult<()> {
    crate::require_exists(model)?;
    crate::require_exists(data)?;
    let (net, meta) = load_checkpoint(model)?;
    let ds = read_dataset(data)?;
    let steps = infer_steps.unwrap_or(cfg.infer_steps);
    let sched = make_schedule(meta.train_steps, meta.schedule)?.strided(steps)?;
    let seed = seed.unwrap_or(cfg.seed);
    eprintln!("evaluating {} samples with a {steps}-step sampler", ds.samples.len());
    let mut raw_samples = Vec::new();
    let mut refined_samples = Vec::new();
    for ix in 0..ds.samples.len() {
        // per-sample RNG stream: evaluation order never changes results
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ix as u64 + 1);
        let truth = ds.samples[ix].mesh_f64(ds.manifest.grid_h, ds.manifest.grid_w)?;
        let start = Instant::now();
        let (map, world) = predict_world_mesh(&net, &ds, ix, &sched, &mut rng)?;
        let raw_secs = start.elapsed().as_secs_f64();
        raw_samples.push(EvalSample {
            chamfer: chamfer(world.vertices(), truth.vertices())?,
            ssim: Some(ssim_maps(&map, &ds.samples[ix].tmap)?),
            seconds: raw_secs,
        });
        if refine == Refine::Spr {
            let depth = depth_image(&ds.samples[ix], &ds);
            let cloud = observed_cloud(&depth, &ds.manifest.camera);
            let start = Instant::now();
            let refined = refine_mesh(&world, &cloud, &cfg.registration)?;
            refined_samples.push(EvalSample {
                chamfer: chamfer(refined.vertices(), truth.vertices())?,
                ssim: None,
                seconds: raw_secs + start.elapsed().as_secs_f64(),
            });
        }
        eprintln!("evaluated sample {}/{}", ix + 1, ds.samples.len());
    }
    let config = serde_json::to_value(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let raw = evaluate_run("raw", config.clone(), raw_samples)?;
    let refined = if refine == Refine::Spr {
        Some(evaluate_run("refined", config, refined_samples)?)
    } else {
        None
    };
    let report = serde_json::json!({ "raw": raw, "refined": refined });
    std::fs::write(report_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!(
        "mean chamfer {:.6}{}",
        raw.mean_chamfer,
        refined
            .as_ref()
            .map(|r| format!(" -> refined {:.6}", r.mean_chamfer))
            .unwrap_or_default()
    );
    Ok(())
}

pub fn register(
    cfg: RunConfig,
    method: RegMethod,
    src: &Path,
    dst: &Path,
    out: &Path,
) -> CliResult<()> {
    crate::require_exists(src)?;
    crate::require_exists(dst)?;
    let template = formats::read_ply(src)?;
    let reference = formats::read_ply(dst)?;
    let result = match method {
        RegMethod::Cpd | RegMethod::Spr => {
            let run = if method == RegMethod::Cpd { cpd_nonrigid } else { spr_nonrigid };
            let r = run(reference.vertices(), template.vertices(), &cfg.registration)?;
            serde_json::json!({
                "method": if method == RegMethod::Cpd { "cpd" } else { "spr" },
                "iterations": r.iterations,
                "sigma2": r.sigma2,
                "objective": r.objective,
                "aligned": r.aligned,
            })
        }
        RegMethod::Icp2d => {
            let to_2d =
                |m: &ClothMesh| m.vertices().iter().map(|v| [v[0], v[1]]).collect::<Vec<_>>();
            let r = icp_2d(&to_2d(&template), &to_2d(&reference), 100, 1e-9)?;
            serde_json::json!({
                "method": "icp2d",
                "theta": r.transform.theta,
                "translation": r.transform.translation,
                "residuals": r.residuals,
            })
        }
    };
    std::fs::write(out, serde_json::to_string_pretty(&result).unwrap())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("wrote registration result to {}", out.display());
    Ok(())
}

pub fn viz(mesh: Option<&Path>, map: Option<&Path>, out: &Path) -> CliResult<()> {
    match (mesh, map) {
        (Some(mesh_path), None) => {
            crate::require_exists(mesh_path)?;
            let mesh = formats::read_ply(mesh_path)?;
            render::render_mesh_preview(&mesh, out)?;
        }
        (None, Some(map_path)) => {
            crate::require_exists(map_path)?;
            render::render_map_preview(map_path, out)?;
        }
        _ => {
            return Err(CliError::Usage("viz needs exactly one of --mesh or --map".into()));
        }
    }
    eprintln!("wrote preview to {}", out.display());
    Ok(())
}
