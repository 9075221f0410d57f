use clothdiff_core::metrics::chamfer;
use clothdiff_core::pipeline::{decode_translation_map, read_dataset};
use clothdiff_core::postprocess::{
    canonical_to_world, fit_image_transform, fit_z_affine, mask_depth_values, mask_pixel_coords,
};
use clothdiff_core::sim::DepthImage;
use std::path::Path;

#[test]
#[ignore]
fn oracle_tmap_floor() {
    let ds = read_dataset(Path::new("/tmp/e2e/test")).unwrap();
    let canonical = ds.canonical().unwrap();
    let mut total = 0.0;
    for s in &ds.samples {
        let depth = DepthImage {
            rows: ds.manifest.camera.rows,
            cols: ds.manifest.camera.cols,
            depth: s.depth_meters(),
            mask: s.mask.clone(),
        };
        let decoded = decode_translation_map(&s.tmap, &canonical).unwrap();
        let canonical_xy: Vec<[f64; 2]> =
            decoded.vertices().iter().map(|v| [v[0], v[1]]).collect();
        let t_im = fit_image_transform(&canonical_xy, &mask_pixel_coords(&depth)).unwrap();
        let zs: Vec<f64> = decoded.vertices().iter().map(|v| v[2]).collect();
        let zaff = fit_z_affine(&zs, &mask_depth_values(&depth)).unwrap();
        let world = canonical_to_world(&decoded, &t_im, &zaff, &ds.manifest.camera).unwrap();
        let truth = s.mesh_f64(8, 8).unwrap();
        total += chamfer(world.vertices(), truth.vertices()).unwrap();
    }
    println!("oracle tmap floor: {}", total / ds.samples.len() as f64);
}
