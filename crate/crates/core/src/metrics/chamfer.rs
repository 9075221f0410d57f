use crate::{Error, Result};

/// Uniform-grid spatial hash for nearest-neighbor queries.
struct PointGrid<'a> {
    points: &'a [[f64; 3]],
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [[f64; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0f64, f64::max);
        // ~n buckets total; degenerate clouds collapse to a single cell
        let per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = if extent > 0.0 { extent / per_axis } else { 1.0 };
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of_raw(p, &lo, cell, &dims);
            buckets[c].push(i as u32);
        }
        PointGrid { points, origin: lo, cell, dims, buckets }
    }

    fn cell_of_raw(p: &[f64; 3], lo: &[f64; 3], cell: f64, dims: &[usize; 3]) -> usize {
        let ix = [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell) as usize).min(dims[a] - 1));
        (ix[0] * dims[1] + ix[1]) * dims[2] + ix[2]
    }

    fn coords_of(&self, p: &[f64; 3]) -> [isize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor() as isize;
            c.clamp(0, self.dims[a] as isize - 1)
        })
    }

    /// Squared distance to the nearest stored point, by expanding cell
    /// shells. Safe stopping rule: a point in a cell at Chebyshev distance k
    /// from the query cell is at Euclidean distance ≥ (k−1)·cell.
    fn nn_dist2(&self, q: &[f64; 3]) -> f64 {
        let c = self.coords_of(q);
        let max_shell = (0..3)
            .map(|a| (c[a].max(self.dims[a] as isize - 1 - c[a])) as usize)
            .max()
            .unwrap();
        let mut best = f64::INFINITY;
        for k in 0..=max_shell {
            if k > 0 && best <= ((k as f64 - 1.0) * self.cell).powi(2) {
                break;
            }
            for dx in -(k as isize)..=k as isize {
                for dy in -(k as isize)..=k as isize {
                    for dz in -(k as isize)..=k as isize {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != k as isize {
                            continue;
                        }
                        let (x, y, z) = (c[0] + dx, c[1] + dy, c[2] + dz);
                        if x < 0
                            || y < 0
                            || z < 0
                            || x >= self.dims[0] as isize
                            || y >= self.dims[1] as isize
                            || z >= self.dims[2] as isize
                        {
                            continue;
                        }
                        let b = (x as usize * self.dims[1] + y as usize) * self.dims[2]
                            + z as usize;
                        for &pi in &self.buckets[b] {
                            let p = &self.points[pi as usize];
                            let d2 = (p[0] - q[0]).powi(2)
                                + (p[1] - q[1]).powi(2)
                                + (p[2] - q[2]).powi(2);
                            if d2 < best {
                                best = d2;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

fn mean_nn_dist2(from: &[[f64; 3]], to_grid: &PointGrid) -> f64 {
    from.iter().map(|p| to_grid.nn_dist2(p)).sum::<f64>() / from.len() as f64
}

/// Symmetric mean of squared nearest-neighbor distances:
/// (1/|S1|)Σ min‖x−y‖² + (1/|S2|)Σ min‖y−x‖².
pub fn chamfer(s1: &[[f64; 3]], s2: &[[f64; 3]]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::InvalidArgument("chamfer distance of an empty set".into()));
    }
    let g1 = PointGrid::new(s1);
    let g2 = PointGrid::new(s2);
    Ok(mean_nn_dist2(s1, &g2) + mean_nn_dist2(s2, &g1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent O(n·m) double loop.
    fn brute(s1: &[[f64; 3]], s2: &[[f64; 3]]) -> f64 {
        let one = |a: &[[f64; 3]], b: &[[f64; 3]]| {
            a.iter()
                .map(|p| {
                    b.iter()
                        .map(|q| {
                            (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / a.len() as f64
        };
        one(s1, s2) + one(s2, s1)
    }

    fn cloud<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-0.1 * scale..0.3 * scale),
                ]
            })
            .collect()
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = cloud(40, 1.0, &mut rng);
        assert_eq!(chamfer(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_closed_form() {
        let s1 = vec![[0.0, 0.0, 0.0]];
        let s2 = vec![[1.0, 0.0, 0.0]];
        assert_eq!(chamfer(&s1, &s2).unwrap(), 2.0);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..30 {
            let n = rng.gen_range(1..=200);
            let m = rng.gen_range(1..=200);
            let s1 = cloud(n, 1.0, &mut rng);
            let s2 = cloud(m, 1.2, &mut rng);
            let fast = chamfer(&s1, &s2).unwrap();
            let slow = brute(&s1, &s2);
            assert!((fast - slow).abs() < 1e-12, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn symmetric_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s1 = cloud(77, 1.0, &mut rng);
        let s2 = cloud(33, 0.7, &mut rng);
        assert_eq!(chamfer(&s1, &s2).unwrap(), chamfer(&s2, &s1).unwrap());
    }

    #[test]
    fn squared_distance_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s1 = cloud(50, 1.0, &mut rng);
        let s2 = cloud(60, 1.0, &mut rng);
        let a = 2.7f64;
        let scale = |s: &[[f64; 3]]| s.iter().map(|p| p.map(|c| a * c)).collect::<Vec<_>>();
        let base = chamfer(&s1, &s2).unwrap();
        let scaled = chamfer(&scale(&s1), &scale(&s2)).unwrap();
        assert!((scaled - a * a * base).abs() < 1e-9 * scaled.max(1.0));
    }

    #[test]
    fn degenerate_clouds() {
        // coincident points and empty sets
        let s = vec![[0.5, 0.5, 0.5]; 10];
        assert_eq!(chamfer(&s, &s).unwrap(), 0.0);
        assert!(chamfer(&s, &[]).is_err());
        assert!(chamfer(&[], &s).is_err());
    }
}
