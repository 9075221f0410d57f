//! Mass-spring cloth simulation and synthetic depth rendering.
//!
//! Produces ground-truth meshes plus top-down orthographic depth/mask
//! observations via random pick-and-place episodes.

mod action;
mod camera;
mod dataset;
mod mesh;
mod state;

pub use action::{occluded_vertex_count, PickPlaceAction};
pub use camera::{render_depth, DepthCamera, DepthImage};
pub use dataset::{generate_dataset, DatasetSpec, RawDataset, RawSample};
pub use mesh::ClothMesh;
pub use state::{SimParams, SimState};
