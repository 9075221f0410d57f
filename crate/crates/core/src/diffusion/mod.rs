//! Conditional DDPM over translation maps: schedule, FiLM-conditioned
//! denoiser, training loop, ancestral (optionally strided) sampling, and
//! checkpointing.

mod checkpoint;
mod net;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use net::{time_embedding, DenoiserNet, NetConfig};
pub use sampler::{sample, NoisePredictor};
pub use schedule::{add_noise, make_schedule, NoiseSchedule, ScheduleKind};
pub use train::{map_to_working, obs_to_tensor, train_epoch, working_to_map, TrainSample};
