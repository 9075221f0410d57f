//! Reconstruction quality metrics: symmetric squared Chamfer distance over
//! point sets, windowed SSIM over images/maps, and evaluation report
//! aggregation.

mod chamfer;
mod report;
mod ssim;

pub use chamfer::chamfer;
pub use report::{evaluate_run, EvalReport, EvalSample};
pub use ssim::{ssim, ssim_maps};
