use crate::CliResult;
use clothdiff_core::formats;
use clothdiff_core::sim::{render_depth, ClothMesh, DepthCamera};
use std::path::Path;

const PREVIEW_SIZE: usize = 200;

/// Depth-shaded orthographic render: brighter is closer to the camera,
/// auto-contrast over the covered pixels, background black. A flat mesh
/// renders at a constant shade.
pub fn render_mesh_preview(mesh: &ClothMesh, out: &Path) -> CliResult<()> {
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for v in mesh.vertices() {
        for a in 0..3 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6) * 1.1;
    let camera = DepthCamera {
        height: hi[2] + 1.0,
        rows: PREVIEW_SIZE,
        cols: PREVIEW_SIZE,
        meters_per_pixel: span / PREVIEW_SIZE as f64,
        center: [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
    };
    let img = render_depth(mesh, &camera)?;
    let heights: Vec<f64> = img
        .mask
        .iter()
        .zip(&img.depth)
        .filter_map(|(&m, &d)| m.then_some(camera.height - d))
        .collect();
    let (h_lo, h_hi) = heights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = h_hi - h_lo;
    let mut rgb = vec![0u8; PREVIEW_SIZE * PREVIEW_SIZE * 3];
    for (i, (&m, &d)) in img.mask.iter().zip(&img.depth).enumerate() {
        if !m {
            continue;
        }
        let g = if range > 1e-12 {
            (64.0 + 191.0 * (camera.height - d - h_lo) / range).round() as u8
        } else {
            200
        };
        rgb[i * 3] = g;
        rgb[i * 3 + 1] = g;
        rgb[i * 3 + 2] = g;
    }
    formats::write_ppm8(out, PREVIEW_SIZE, PREVIEW_SIZE, &rgb)?;
    Ok(())
}

/// Translation map preview: the quantized RGB map upscaled by nearest
/// neighbor to a viewable size.
pub fn render_map_preview(map_path: &Path, out: &Path) -> CliResult<()> {
    let (h, w, q) = formats::read_ppm8(map_path)?;
    let scale = (PREVIEW_SIZE / h.max(w)).max(1);
    let (oh, ow) = (h * scale, w * scale);
    let mut rgb = vec![0u8; oh * ow * 3];
    for r in 0..oh {
        for c in 0..ow {
            let src = ((r / scale) * w + c / scale) * 3;
            let dst = (r * ow + c) * 3;
            rgb[dst..dst + 3].copy_from_slice(&q[src..src + 3]);
        }
    }
    formats::write_ppm8(out, oh, ow, &rgb)?;
    Ok(())
}
