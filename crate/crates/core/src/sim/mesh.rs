use crate::{Error, Result};

/// Grid-structured cloth mesh. Edges are implicit (4-neighborhood) and each
/// grid quad splits into two triangles; neither is ever stored or mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct ClothMesh {
    grid_h: usize,
    grid_w: usize,
    vertices: Vec<[f64; 3]>,
}

impl ClothMesh {
    pub fn new(grid_h: usize, grid_w: usize, vertices: Vec<[f64; 3]>) -> Result<Self> {
        if grid_h < 2 || grid_w < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid must be at least 2x2, got {grid_h}x{grid_w}"
            )));
        }
        if vertices.len() != grid_h * grid_w {
            return Err(Error::InvalidArgument(format!(
                "expected {} vertices for a {grid_h}x{grid_w} grid, got {}",
                grid_h * grid_w,
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("non-finite vertex coordinate".into()));
        }
        Ok(ClothMesh { grid_h, grid_w, vertices })
    }

    /// Planar uniform grid spanning `side x side` around `center`, at height z.
    pub fn flat(grid_h: usize, grid_w: usize, side: f64, center: [f64; 2], z: f64) -> Result<Self> {
        if side <= 0.0 {
            return Err(Error::InvalidArgument("side length must be positive".into()));
        }
        let mut vertices = Vec::with_capacity(grid_h * grid_w);
        for i in 0..grid_h {
            for j in 0..grid_w {
                let x = center[0] - side / 2.0 + side * j as f64 / (grid_w - 1) as f64;
                let y = center[1] - side / 2.0 + side * i as f64 / (grid_h - 1) as f64;
                vertices.push([x, y, z]);
            }
        }
        ClothMesh::new(grid_h, grid_w, vertices)
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.grid_w + j
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn vertices_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.vertices
    }

    /// 4-neighborhood edges, (lower index, higher index), deterministic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..self.grid_h {
            for j in 0..self.grid_w {
                let a = self.index(i, j);
                if j + 1 < self.grid_w {
                    e.push((a, self.index(i, j + 1)));
                }
                if i + 1 < self.grid_h {
                    e.push((a, self.index(i + 1, j)));
                }
            }
        }
        e
    }

    /// Each grid quad split into two triangles, CCW in grid coordinates.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut t = Vec::with_capacity(2 * (self.grid_h - 1) * (self.grid_w - 1));
        for i in 0..self.grid_h - 1 {
            for j in 0..self.grid_w - 1 {
                let a = self.index(i, j);
                let b = self.index(i, j + 1);
                let c = self.index(i + 1, j + 1);
                let d = self.index(i + 1, j);
                t.push([a, b, c]);
                t.push([a, c, d]);
            }
        }
        t
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for k in 0..3 {
                c[k] += v[k];
            }
        }
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn min_z(&self) -> f64 {
        self.vertices.iter().map(|v| v[2]).fold(f64::INFINITY, f64::min)
    }
}
