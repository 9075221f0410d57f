//! Placement of canonical-space meshes: renormalization + rigid ICP fit in
//! the image plane, an affine height-to-depth map, and orthographic
//! back-projection to the world frame.

use crate::registration::{icp_2d, RigidTransform2};
use crate::sim::{ClothMesh, DepthCamera};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Invertible planar affine map p ↦ M·p + t. Covers per-axis scalings
/// (renormalization), rigid transforms (ICP), and their compositions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarTransform {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl PlanarTransform {
    pub fn identity() -> Self {
        PlanarTransform { m: [[1.0, 0.0], [0.0, 1.0]], t: [0.0, 0.0] }
    }

    pub fn scale_offset(scale: [f64; 2], offset: [f64; 2]) -> Result<Self> {
        if scale[0] == 0.0 || scale[1] == 0.0 {
            return Err(Error::Degenerate("zero scale in planar transform".into()));
        }
        Ok(PlanarTransform { m: [[scale[0], 0.0], [0.0, scale[1]]], t: offset })
    }

    pub fn from_rigid(r: &RigidTransform2) -> Self {
        PlanarTransform { m: r.rotation_matrix(), t: r.translation }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * p[0] + self.m[0][1] * p[1] + self.t[0],
            self.m[1][0] * p[0] + self.m[1][1] * p[1] + self.t[1],
        ]
    }

    /// self ∘ other: apply `other` first.
    pub fn compose(&self, other: &PlanarTransform) -> Self {
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = self.m[i][0] * other.m[0][j] + self.m[i][1] * other.m[1][j];
            }
        }
        PlanarTransform { m, t: self.apply(other.t) }
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Degenerate("singular planar transform".into()));
        }
        let m = [
            [self.m[1][1] / det, -self.m[0][1] / det],
            [-self.m[1][0] / det, self.m[0][0] / det],
        ];
        let t = [
            -(m[0][0] * self.t[0] + m[0][1] * self.t[1]),
            -(m[1][0] * self.t[0] + m[1][1] * self.t[1]),
        ];
        Ok(PlanarTransform { m, t })
    }
}

/// Per-axis affine map from canonical height to image-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZAffine {
    pub a: f64,
    pub b: f64,
}

impl ZAffine {
    pub fn apply(&self, z: f64) -> f64 {
        self.a * z + self.b
    }
}

/// Normalize a planar point set to zero mean and unit variance per axis;
/// returns the transform that was applied.
pub fn renormalize(points: &[[f64; 2]]) -> Result<(PlanarTransform, Vec<[f64; 2]>)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("renormalize needs at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mut mu = [0.0f64; 2];
    for p in points {
        mu[0] += p[0];
        mu[1] += p[1];
    }
    mu[0] /= n;
    mu[1] /= n;
    let mut var = [0.0f64; 2];
    for p in points {
        var[0] += (p[0] - mu[0]).powi(2);
        var[1] += (p[1] - mu[1]).powi(2);
    }
    let sigma = [(var[0] / n).sqrt(), (var[1] / n).sqrt()];
    if sigma[0] == 0.0 || sigma[1] == 0.0 {
        return Err(Error::Degenerate("zero variance axis in renormalize".into()));
    }
    let t = PlanarTransform::scale_offset(
        [1.0 / sigma[0], 1.0 / sigma[1]],
        [-mu[0] / sigma[0], -mu[1] / sigma[1]],
    )?;
    Ok((t, points.iter().map(|&p| t.apply(p)).collect()))
}

/// Mean distance from each transformed source point to its nearest target.
fn alignment_residual(t: &PlanarTransform, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
    src.iter()
        .map(|&p| {
            let q = t.apply(p);
            dst.iter()
                .map(|d| ((d[0] - q[0]).powi(2) + (d[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / src.len() as f64
}

const ICP_MAX_MASK_POINTS: usize = 1500;

/// Fit the canonical → image-plane transform: normalize both the canonical
/// x–y cloud (T_c) and the observed mask pixels (T_r), form T̃ = T_r⁻¹ ∘ T_c,
/// then fine-tune rigidly with ICP. The result is never worse than T̃ in
/// mean nearest-neighbor residual against the mask.
pub fn fit_image_transform(
    canonical_xy: &[[f64; 2]],
    mask_pixels: &[[f64; 2]],
) -> Result<PlanarTransform> {
    let (t_c, _) = renormalize(canonical_xy)?;
    let dst = if mask_pixels.len() > ICP_MAX_MASK_POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_736b);
        let mut idx: Vec<usize> = (0..mask_pixels.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(ICP_MAX_MASK_POINTS);
        idx.sort_unstable();
        idx.into_iter().map(|i| mask_pixels[i]).collect()
    } else {
        mask_pixels.to_vec()
    };
    let (t_r, _) = renormalize(&dst)?;
    let t_tilde = t_r.inverse()?.compose(&t_c);
    let src: Vec<[f64; 2]> = canonical_xy.iter().map(|&p| t_tilde.apply(p)).collect();
    let icp = icp_2d(&src, &dst, 50, 1e-9)?;
    let refined = PlanarTransform::from_rigid(&icp.transform).compose(&t_tilde);
    let keep_refined = alignment_residual(&refined, canonical_xy, &dst)
        <= alignment_residual(&t_tilde, canonical_xy, &dst);
    Ok(if keep_refined { refined } else { t_tilde })
}

/// Affine height → depth map sending the maximum canonical height to the
/// minimum observed depth and vice versa; a flat cloth maps to mean depth.
pub fn fit_z_affine(canonical_z: &[f64], masked_depths: &[f64]) -> Result<ZAffine> {
    if canonical_z.is_empty() || masked_depths.is_empty() {
        return Err(Error::InvalidArgument("fit_z_affine with empty input".into()));
    }
    if canonical_z.iter().chain(masked_depths).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite z or depth".into()));
    }
    let (h_min, h_max) = canonical_z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (d_min, d_max) = masked_depths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if h_max - h_min == 0.0 {
        let mean = masked_depths.iter().sum::<f64>() / masked_depths.len() as f64;
        return Ok(ZAffine { a: 0.0, b: mean });
    }
    let a = -(d_max - d_min) / (h_max - h_min);
    Ok(ZAffine { a, b: d_min - a * h_max })
}

/// Map a canonical mesh into the world frame: T_im on x–y into pixel
/// coordinates (col, row), the z-affine into depth, then invert the
/// orthographic projection (depth = camera height − world height).
pub fn canonical_to_world(
    mesh: &ClothMesh,
    t_im: &PlanarTransform,
    zaff: &ZAffine,
    camera: &DepthCamera,
) -> Result<ClothMesh> {
    if !zaff.a.is_finite() || !zaff.b.is_finite() {
        return Err(Error::InvalidArgument("non-finite z affine".into()));
    }
    let mut out = mesh.clone();
    for v in out.vertices_mut() {
        let [px, py] = t_im.apply([v[0], v[1]]);
        v[0] = camera.center[0] + (px + 0.5 - camera.cols as f64 / 2.0) * camera.meters_per_pixel;
        v[1] = camera.center[1] + (py + 0.5 - camera.rows as f64 / 2.0) * camera.meters_per_pixel;
        v[2] = camera.height - zaff.apply(v[2]);
    }
    Ok(out)
}

/// Mask pixels of a depth image as continuous (col, row) coordinates.
pub fn mask_pixel_coords(depth: &crate::sim::DepthImage) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for r in 0..depth.rows {
        for c in 0..depth.cols {
            if depth.mask[r * depth.cols + c] {
                pts.push([c as f64, r as f64]);
            }
        }
    }
    pts
}

/// Depth values at mask pixels.
pub fn mask_depth_values(depth: &crate::sim::DepthImage) -> Vec<f64> {
    depth
        .mask
        .iter()
        .zip(&depth.depth)
        .filter_map(|(&m, &d)| m.then_some(d))
        .collect()
}
