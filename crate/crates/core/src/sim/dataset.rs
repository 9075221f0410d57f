use super::action::PickPlaceAction;
use super::camera::{render_depth, DepthCamera, DepthImage};
use super::mesh::ClothMesh;
use super::state::{SimParams, SimState};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generation settings for a simulated dataset.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DatasetSpec {
    pub episodes: usize,
    pub actions_per_episode: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub side: f64,
    pub camera: DepthCamera,
    pub seed: u64,
    pub sim: SimParams,
    /// Place points are sampled in [-half_extent, half_extent]^2.
    pub workspace_half_extent: f64,
    pub lift_range: [f64; 2],
}

/// One recorded post-action state.
#[derive(Debug, Clone)]
pub struct RawSample {
    pub depth: DepthImage,
    pub mesh: ClothMesh,
}

/// In-memory dataset; the on-disk layout lives in [`crate::pipeline`].
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub spec: DatasetSpec,
    pub canonical: ClothMesh,
    pub samples: Vec<RawSample>,
}

fn random_action<R: Rng>(state: &SimState, spec: &DatasetSpec, rng: &mut R) -> PickPlaceAction {
    let vs = state.mesh().vertices();
    let (mut minx, mut maxx, mut miny, mut maxy) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in vs {
        minx = minx.min(v[0]);
        maxx = maxx.max(v[0]);
        miny = miny.min(v[1]);
        maxy = maxy.max(v[1]);
    }
    let he = spec.workspace_half_extent;
    PickPlaceAction {
        pick: [rng.gen_range(minx..=maxx), rng.gen_range(miny..=maxy)],
        place: [rng.gen_range(-he..=he), rng.gen_range(-he..=he)],
        lift: rng.gen_range(spec.lift_range[0]..=spec.lift_range[1]),
    }
}

fn apply_random_action<R: Rng>(
    state: &mut SimState,
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<()> {
    // a pick sampled in the cloth bounding box can still miss the cloth
    // (e.g. a folded L-shape); resample a bounded number of times
    for _ in 0..32 {
        let action = random_action(state, spec, rng);
        match state.apply_pick_and_place(&action, 1e-3) {
            Err(Error::GraspMiss) => continue,
            other => return other,
        }
    }
    Err(Error::GraspMiss)
}

/// Run `episodes` independent episodes: flatten, randomize with 1-3 warm-up
/// actions, then record (depth, mask, mesh) after each subsequent action.
/// Episode RNG streams derive from (seed, episode index), so output is a pure
/// function of the spec.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<RawDataset> {
    if spec.episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be >= 1".into()));
    }
    let canonical = ClothMesh::flat(spec.grid_h, spec.grid_w, spec.side, [0.0, 0.0], 0.0)?;
    let mut samples = Vec::with_capacity(spec.episodes * spec.actions_per_episode);
    for ep in 0..spec.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(ep as u64 + 1);
        let mut state =
            SimState::init_flat(spec.grid_h, spec.grid_w, spec.side, [0.0, 0.0], spec.sim)?;
        let warmups = rng.gen_range(1..=3usize);
        for _ in 0..warmups {
            apply_random_action(&mut state, spec, &mut rng)?;
        }
        for _ in 0..spec.actions_per_episode {
            apply_random_action(&mut state, spec, &mut rng)?;
            let depth = render_depth(state.mesh(), &spec.camera)?;
            if depth.mask_pixel_count() == 0 {
                return Err(Error::Dataset(format!(
                    "episode {ep}: recorded state renders to an empty mask"
                )));
            }
            samples.push(RawSample { depth, mesh: state.mesh().clone() });
        }
    }
    Ok(RawDataset { spec: spec.clone(), canonical, samples })
}
