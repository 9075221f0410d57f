//! Point-set registration: non-rigid CPD and SPR (expectation-maximization
//! over a Gaussian mixture with a smoothed displacement field), rigid 2-D
//! ICP, and SPR-based mesh refinement.

mod cpd;
mod icp;

pub use cpd::{cpd_nonrigid, refine_mesh, spr_nonrigid, RegResult, RegistrationConfig};
pub use icp::{icp_2d, IcpResult, RigidTransform2};
