//! clothdiff-core — cloth state estimation from single top-down depth images.
//!
//! The pipeline stages are:
//!
//! 1. **sim** – mass-spring cloth simulator; generates ground-truth meshes and
//!    rendered depth observations via random pick-and-place episodes.
//! 2. **pipeline** – depth preprocessing, translation-map encode/decode, and
//!    the on-disk dataset format.
//! 3. **autodiff** – a small dense-tensor layer with reverse-mode gradients
//!    and Adam, enough to express and train the denoiser.
//! 4. **diffusion** – conditional DDPM over translation maps: noise schedule,
//!    FiLM-conditioned U-net denoiser, training loop, strided sampling.
//! 5. **registration** – non-rigid point-set registration (CPD / SPR) and
//!    rigid 2-D ICP, used for baselines and mesh refinement.
//! 6. **postprocess** – canonical-space mesh → observed image space → world
//!    frame.
//! 7. **metrics** – Chamfer distance, SSIM, evaluation reports.

pub mod autodiff;
pub mod diffusion;
pub mod error;
pub mod formats;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod registration;
pub mod sim;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
