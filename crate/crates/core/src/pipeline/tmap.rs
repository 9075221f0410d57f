use crate::sim::ClothMesh;
use crate::{Error, Result};

/// Clip range of normalized translation components.
pub const TMAP_CLIP: f64 = 3.0;

/// Flat rest mesh in canonical space: centered at the origin, z = 0,
/// x spanning [-w/2, w/2] and y spanning [-l/2, l/2].
#[derive(Debug, Clone)]
pub struct CanonicalFlatMesh {
    mesh: ClothMesh,
    w: f64,
    l: f64,
}

impl CanonicalFlatMesh {
    pub fn new(grid_h: usize, grid_w: usize, w: f64, l: f64) -> Result<Self> {
        if !(w > 0.0 && l > 0.0) {
            return Err(Error::InvalidArgument("canonical cloth size must be positive".into()));
        }
        let mut vertices = Vec::with_capacity(grid_h * grid_w);
        for i in 0..grid_h {
            for j in 0..grid_w {
                let x = -w / 2.0 + w * j as f64 / (grid_w as f64 - 1.0);
                let y = -l / 2.0 + l * i as f64 / (grid_h as f64 - 1.0);
                vertices.push([x, y, 0.0]);
            }
        }
        Ok(Self { mesh: ClothMesh::new(grid_h, grid_w, vertices)?, w, l })
    }

    pub fn mesh(&self) -> &ClothMesh {
        &self.mesh
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// z axis normalization constant.
    pub fn z_scale(&self) -> f64 {
        0.4 * self.w
    }
}

/// Per-vertex displacement from the canonical mesh, stored quantized.
///
/// Channels are interleaved (x, y, z) per grid cell, row-major. The
/// quantized and normalized forms interconvert within half a step (6/255/2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationMap {
    grid_h: usize,
    grid_w: usize,
    q: Vec<u8>,
}

/// Round half away from zero onto the 0..=255 grid over [-3, 3].
pub fn quantize(v: f64) -> u8 {
    let c = v.clamp(-TMAP_CLIP, TMAP_CLIP);
    ((c + TMAP_CLIP) / (2.0 * TMAP_CLIP) * 255.0).round() as u8
}

pub fn dequantize(q: u8) -> f64 {
    q as f64 / 255.0 * (2.0 * TMAP_CLIP) - TMAP_CLIP
}

impl TranslationMap {
    pub fn new(grid_h: usize, grid_w: usize, q: Vec<u8>) -> Result<Self> {
        if q.len() != grid_h * grid_w * 3 {
            return Err(Error::InvalidArgument(format!(
                "translation map needs {}x{}x3 = {} values, got {}",
                grid_h,
                grid_w,
                grid_h * grid_w * 3,
                q.len()
            )));
        }
        Ok(Self { grid_h, grid_w, q })
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn quantized(&self) -> &[u8] {
        &self.q
    }

    /// Normalized float form in [-3, 3].
    pub fn normalized(&self) -> Vec<f64> {
        self.q.iter().map(|&q| dequantize(q)).collect()
    }
}

/// Canonicalize `mesh` (x-y centroid to the origin; z stays relative to the
/// ground, matching the canonical plane at z = 0), rescale axes so the
/// canonical cloth spans [-1, 1] in x and y and z by 0.4w, and store the
/// per-vertex offset from the canonical mesh, clipped and quantized.
pub fn encode_translation_map(
    mesh: &ClothMesh,
    canonical: &CanonicalFlatMesh,
) -> Result<TranslationMap> {
    let (gh, gw) = (canonical.mesh.grid_h(), canonical.mesh.grid_w());
    if mesh.grid_h() != gh || mesh.grid_w() != gw {
        return Err(Error::InvalidArgument(format!(
            "mesh grid {}x{} does not match canonical {}x{}",
            mesh.grid_h(),
            mesh.grid_w(),
            gh,
            gw
        )));
    }
    let c = mesh.centroid();
    let (sx, sy, sz) = (2.0 / canonical.w, 2.0 / canonical.l, 1.0 / canonical.z_scale());
    let mut q = Vec::with_capacity(gh * gw * 3);
    for (v, cv) in mesh.vertices().iter().zip(canonical.mesh.vertices()) {
        q.push(quantize((v[0] - c[0] - cv[0]) * sx));
        q.push(quantize((v[1] - c[1] - cv[1]) * sy));
        q.push(quantize((v[2] - cv[2]) * sz));
    }
    TranslationMap::new(gh, gw, q)
}

/// Inverse of [`encode_translation_map`] up to quantization: canonical
/// vertices plus the dequantized, de-scaled offsets. The result lives in
/// canonical space (x-y centroid near the origin).
pub fn decode_translation_map(
    tmap: &TranslationMap,
    canonical: &CanonicalFlatMesh,
) -> Result<ClothMesh> {
    let (gh, gw) = (canonical.mesh.grid_h(), canonical.mesh.grid_w());
    if tmap.grid_h != gh || tmap.grid_w != gw {
        return Err(Error::InvalidArgument(format!(
            "map grid {}x{} does not match canonical {}x{}",
            tmap.grid_h, tmap.grid_w, gh, gw
        )));
    }
    let (sx, sy, sz) = (canonical.w / 2.0, canonical.l / 2.0, canonical.z_scale());
    let vertices = canonical
        .mesh
        .vertices()
        .iter()
        .zip(tmap.q.chunks_exact(3))
        .map(|(cv, t)| {
            [
                cv[0] + dequantize(t[0]) * sx,
                cv[1] + dequantize(t[1]) * sy,
                cv[2] + dequantize(t[2]) * sz,
            ]
        })
        .collect();
    ClothMesh::new(gh, gw, vertices)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Half a quantization step in normalized units.
    const HALF_STEP: f64 = 6.0 / 255.0 / 2.0;

    #[test]
    fn identity_mesh_quantizes_to_128() {
        let canonical = CanonicalFlatMesh::new(5, 5, 1.0, 1.0).unwrap();
        let t = encode_translation_map(canonical.mesh(), &canonical).unwrap();
        assert!(t.quantized().iter().all(|&q| q == 128), "127.5 must round up to 128");
    }

    #[test]
    fn xy_translation_is_removed_by_centering() {
        let canonical = CanonicalFlatMesh::new(6, 6, 1.0, 1.0).unwrap();
        let mut mesh = canonical.mesh().clone();
        // jitter all axes so no component lands on a quantization tie, where
        // float round-off from the translation could flip the bucket
        for (k, v) in mesh.vertices_mut().iter_mut().enumerate() {
            v[0] += 0.011 * ((k * 5 % 9) as f64 - 4.0);
            v[1] += 0.013 * ((k * 7 % 11) as f64 - 5.0);
            v[2] = 0.02 * (k % 7) as f64 + 0.003;
        }
        let base = encode_translation_map(&mesh, &canonical).unwrap();
        let mut moved = mesh.clone();
        for v in moved.vertices_mut() {
            v[0] += 0.73;
            v[1] -= 1.21;
        }
        let shifted = encode_translation_map(&moved, &canonical).unwrap();
        assert_eq!(base, shifted);
    }

    #[test]
    fn clip_boundary_quantizes_to_extremes() {
        let canonical = CanonicalFlatMesh::new(4, 4, 1.0, 1.0).unwrap();
        let mut mesh = canonical.mesh().clone();
        // normalized x displacement of 5 at one vertex: 5 * w/2 meters
        mesh.vertices_mut()[5][0] += 5.0 * 0.5;
        let t = encode_translation_map(&mesh, &canonical).unwrap();
        // the centroid shift spreads -5/16 across all vertices; the displaced
        // vertex still clips high
        assert_eq!(t.quantized()[5 * 3], 255);
    }

    #[test]
    fn all_128_decodes_to_canonical_within_half_step() {
        let canonical = CanonicalFlatMesh::new(5, 7, 1.2, 0.8).unwrap();
        let t = TranslationMap::new(5, 7, vec![128u8; 5 * 7 * 3]).unwrap();
        let mesh = decode_translation_map(&t, &canonical).unwrap();
        for (v, cv) in mesh.vertices().iter().zip(canonical.mesh().vertices()) {
            assert!((v[0] - cv[0]).abs() <= HALF_STEP * canonical.w() / 2.0 + 1e-12);
            assert!((v[1] - cv[1]).abs() <= HALF_STEP * canonical.l() / 2.0 + 1e-12);
            assert!((v[2] - cv[2]).abs() <= HALF_STEP * canonical.z_scale() + 1e-12);
        }
    }

    #[test]
    fn quantize_dequantize_within_half_step_and_monotone() {
        let mut prev = dequantize(0);
        for q in 1..=255u8 {
            let v = dequantize(q);
            assert!(v > prev);
            prev = v;
        }
        for i in 0..=600 {
            let v = -3.0 + 6.0 * i as f64 / 600.0;
            let back = dequantize(quantize(v));
            assert!((back - v).abs() <= HALF_STEP + 1e-12, "v={v} back={back}");
        }
        // out-of-range values clip to the extremes
        assert_eq!(quantize(5.0), 255);
        assert_eq!(quantize(-5.0), 0);
    }

    #[test]
    fn round_trip_error_bounded_for_unclipped_meshes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let canonical = CanonicalFlatMesh::new(8, 8, 1.0, 1.0).unwrap();
        for _ in 0..50 {
            let mut mesh = canonical.mesh().clone();
            for v in mesh.vertices_mut() {
                v[0] += rng.gen_range(-0.4..0.4);
                v[1] += rng.gen_range(-0.4..0.4);
                v[2] = rng.gen_range(0.0..0.5);
            }
            let t = encode_translation_map(&mesh, &canonical).unwrap();
            let back = decode_translation_map(&t, &canonical).unwrap();
            // compare against the canonicalized input: x-y centroid at origin
            let c = mesh.centroid();
            for (v, b) in mesh.vertices().iter().zip(back.vertices()) {
                let ex = ((v[0] - c[0]) - b[0]).abs() * 2.0 / canonical.w();
                let ey = ((v[1] - c[1]) - b[1]).abs() * 2.0 / canonical.l();
                let ez = (v[2] - b[2]).abs() / canonical.z_scale();
                assert!(ex.max(ey).max(ez) <= 0.011765, "ex={ex} ey={ey} ez={ez}");
            }
        }
    }

    #[test]
    fn encode_decode_is_idempotent_on_realizable_maps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let canonical = CanonicalFlatMesh::new(6, 6, 1.0, 1.0).unwrap();
        for _ in 0..50 {
            let mut mesh = canonical.mesh().clone();
            for v in mesh.vertices_mut() {
                v[0] += rng.gen_range(-0.3..0.3);
                v[1] += rng.gen_range(-0.3..0.3);
                v[2] = rng.gen_range(0.0..0.4);
            }
            let t = encode_translation_map(&mesh, &canonical).unwrap();
            let back = decode_translation_map(&t, &canonical).unwrap();
            let t2 = encode_translation_map(&back, &canonical).unwrap();
            assert_eq!(t, t2);
        }
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let canonical = CanonicalFlatMesh::new(5, 5, 1.0, 1.0).unwrap();
        let other = ClothMesh::flat(4, 5, 1.0, [0.0, 0.0], 0.0).unwrap();
        assert!(encode_translation_map(&other, &canonical).is_err());
    }
}
