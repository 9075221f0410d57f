use clothdiff_core::diffusion::ScheduleKind;
use clothdiff_core::registration::RegistrationConfig;
use clothdiff_core::sim::{DepthCamera, SimParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Fully resolved run configuration. Resolution order: built-in defaults,
/// then the optional JSON config file, then command-line flags. The resolved
/// value is serialized into reports for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    // data generation
    pub episodes: usize,
    pub actions: usize,
    pub grid: usize,
    /// Camera resolution; observations are preprocessed to this size too.
    pub img: usize,
    pub cloth_side: f64,
    pub workspace_half_extent: f64,
    pub lift_range: [f64; 2],
    pub camera_height: f64,
    /// Meters per pixel; `None` derives it so the workspace fills the frame.
    pub meters_per_pixel: Option<f64>,
    pub sim: SimParams,
    // diffusion
    pub schedule: ScheduleKind,
    pub train_steps: usize,
    pub infer_steps: usize,
    pub lr: f64,
    /// Final learning rate of a per-epoch cosine decay; `None` keeps the
    /// rate constant at `lr`.
    pub lr_final: Option<f64>,
    pub batch: usize,
    pub epochs: usize,
    /// Amplitude of uniform noise added to conditioning images (in [0,1]
    /// gray units) during training.
    pub depth_noise: f32,
    // registration
    pub registration: RegistrationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            episodes: 10,
            actions: 2,
            grid: 8,
            img: 64,
            cloth_side: 0.5,
            workspace_half_extent: 0.45,
            lift_range: [0.1, 0.3],
            camera_height: 1.5,
            meters_per_pixel: None,
            sim: SimParams::default(),
            schedule: ScheduleKind::SquaredCosine,
            train_steps: 100,
            infer_steps: 10,
            lr: 1e-4,
            lr_final: None,
            batch: 64,
            epochs: 10,
            depth_noise: 0.02,
            registration: RegistrationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(config_file: Option<&Path>) -> Result<Self, String> {
        match config_file {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("bad config {}: {e}", p.display()))
            }
        }
    }

    pub fn camera(&self) -> DepthCamera {
        let mpp = self.meters_per_pixel.unwrap_or_else(|| {
            2.0 * (self.workspace_half_extent + self.cloth_side) / self.img as f64
        });
        DepthCamera {
            height: self.camera_height,
            rows: self.img,
            cols: self.img,
            meters_per_pixel: mpp,
            center: [0.0, 0.0],
        }
    }
}
