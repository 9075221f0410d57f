use super::mesh::ClothMesh;
use crate::{Error, Result};

/// Orthographic top-down depth camera.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DepthCamera {
    /// Camera height above the ground plane, meters.
    pub height: f64,
    /// Image rows.
    pub rows: usize,
    /// Image columns.
    pub cols: usize,
    /// Meters per pixel.
    pub meters_per_pixel: f64,
    /// World (x, y) at the image center.
    pub center: [f64; 2],
}

impl DepthCamera {
    pub fn validate(&self, max_cloth_height: f64) -> Result<()> {
        if self.rows < 16 || self.cols < 16 {
            return Err(Error::InvalidArgument(format!(
                "camera image must be at least 16x16, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.height <= max_cloth_height {
            return Err(Error::InvalidArgument(format!(
                "camera height {} does not clear the cloth ({max_cloth_height})",
                self.height
            )));
        }
        if self.meters_per_pixel <= 0.0 {
            return Err(Error::InvalidArgument("meters_per_pixel must be positive".into()));
        }
        Ok(())
    }

    /// World (x, y) of a pixel center.
    pub fn pixel_to_world(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.center[0] + (col as f64 + 0.5 - self.cols as f64 / 2.0) * self.meters_per_pixel,
            self.center[1] + (row as f64 + 0.5 - self.rows as f64 / 2.0) * self.meters_per_pixel,
        ]
    }

    /// Continuous pixel coordinates (col, row) of a world (x, y) point.
    pub fn world_to_pixel(&self, x: f64, y: f64) -> [f64; 2] {
        [
            (x - self.center[0]) / self.meters_per_pixel + self.cols as f64 / 2.0 - 0.5,
            (y - self.center[1]) / self.meters_per_pixel + self.rows as f64 / 2.0 - 0.5,
        ]
    }
}

/// Raw depth + coverage mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub rows: usize,
    pub cols: usize,
    /// Depth in meters; camera height where no cloth covers the pixel.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
}

impl DepthImage {
    pub fn mask_pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Signed height of the surface over (x, y), if the triangle covers it.
/// Barycentric test inclusive of edges; shared by rasterizer and tests.
pub fn triangle_height_at(a: [f64; 3], b: [f64; 3], c: [f64; 3], x: f64, y: f64) -> Option<f64> {
    let d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    if d.abs() < 1e-18 {
        return None; // degenerate in projection
    }
    let w0 = ((b[1] - c[1]) * (x - c[0]) + (c[0] - b[0]) * (y - c[1])) / d;
    let w1 = ((c[1] - a[1]) * (x - c[0]) + (a[0] - c[0]) * (y - c[1])) / d;
    let w2 = 1.0 - w0 - w1;
    if w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 {
        Some(w0 * a[2] + w1 * b[2] + w2 * c[2])
    } else {
        None
    }
}

/// Z-buffer rasterization of the cloth triangles under orthographic top-down
/// projection. Depth is camera height minus the topmost surface height;
/// uncovered pixels read camera height (the ground) with mask false.
pub fn render_depth(mesh: &ClothMesh, camera: &DepthCamera) -> Result<DepthImage> {
    let max_h = mesh.vertices().iter().map(|v| v[2]).fold(f64::NEG_INFINITY, f64::max);
    camera.validate(max_h)?;
    let mut img = DepthImage {
        rows: camera.rows,
        cols: camera.cols,
        depth: vec![camera.height; camera.rows * camera.cols],
        mask: vec![false; camera.rows * camera.cols],
    };
    let mut top = vec![f64::NEG_INFINITY; camera.rows * camera.cols];
    let vs = mesh.vertices();
    for tri in mesh.triangles() {
        let [a, b, c] = [vs[tri[0]], vs[tri[1]], vs[tri[2]]];
        // pixel bounding box of the triangle
        let minx = a[0].min(b[0]).min(c[0]);
        let maxx = a[0].max(b[0]).max(c[0]);
        let miny = a[1].min(b[1]).min(c[1]);
        let maxy = a[1].max(b[1]).max(c[1]);
        let p0 = camera.world_to_pixel(minx, miny);
        let p1 = camera.world_to_pixel(maxx, maxy);
        let c0 = (p0[0].floor().max(0.0)) as usize;
        let c1 = (p1[0].ceil().min(camera.cols as f64 - 1.0)).max(0.0) as usize;
        let r0 = (p0[1].floor().max(0.0)) as usize;
        let r1 = (p1[1].ceil().min(camera.rows as f64 - 1.0)).max(0.0) as usize;
        for row in r0..=r1.min(camera.rows - 1) {
            for col in c0..=c1.min(camera.cols - 1) {
                let [x, y] = camera.pixel_to_world(row, col);
                if let Some(h) = triangle_height_at(a, b, c, x, y) {
                    let idx = row * camera.cols + col;
                    if h > top[idx] {
                        top[idx] = h;
                        img.depth[idx] = camera.height - h;
                    }
                    img.mask[idx] = true;
                }
            }
        }
    }
    Ok(img)
}
