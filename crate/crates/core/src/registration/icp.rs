use crate::{Error, Result};

/// Rigid 2-D transform p ↦ R(θ)·p + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2 {
    pub theta: f64,
    pub translation: [f64; 2],
}

impl RigidTransform2 {
    pub fn identity() -> Self {
        RigidTransform2 { theta: 0.0, translation: [0.0, 0.0] }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [
            c * p[0] - s * p[1] + self.translation[0],
            s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        let [tx, ty] = self.translation;
        RigidTransform2 {
            theta: -self.theta,
            translation: [-(c * tx + s * ty), -(-s * tx + c * ty)],
        }
    }

    pub fn rotation_matrix(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[c, -s], [s, c]]
    }
}

/// Converged ICP result.
#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: RigidTransform2,
    /// Mean point-to-nearest-neighbor residual after each iteration.
    pub residuals: Vec<f64>,
}

fn mean2(pts: &[[f64; 2]]) -> [f64; 2] {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

fn collinear(pts: &[[f64; 2]]) -> bool {
    // smallest eigenvalue of the 2x2 covariance vanishes on a line
    let c = mean2(pts);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    if tr <= 0.0 {
        return true;
    }
    let lmin = tr / 2.0 - ((tr / 2.0).powi(2) - det).max(0.0).sqrt();
    lmin < 1e-12 * tr
}

/// Closed-form rigid alignment of paired 2-D points (cross-covariance angle).
fn fit_rigid(src: &[[f64; 2]], dst: &[[f64; 2]]) -> RigidTransform2 {
    let (cs, cd) = (mean2(src), mean2(dst));
    let (mut a, mut b) = (0.0, 0.0); // Σ cross terms: a = Σ s·d, b = Σ s×d
    for (s, d) in src.iter().zip(dst) {
        let (sx, sy) = (s[0] - cs[0], s[1] - cs[1]);
        let (dx, dy) = (d[0] - cd[0], d[1] - cd[1]);
        a += sx * dx + sy * dy;
        b += sx * dy - sy * dx;
    }
    let theta = b.atan2(a);
    let (sn, csn) = theta.sin_cos();
    RigidTransform2 {
        theta,
        translation: [
            cd[0] - (csn * cs[0] - sn * cs[1]),
            cd[1] - (sn * cs[0] + csn * cs[1]),
        ],
    }
}

/// Rigid 2-D ICP: alternate nearest-neighbor matching and closed-form
/// alignment until the mean residual change drops below `tol`. Returns the
/// best transform seen.
pub fn icp_2d(
    src: &[[f64; 2]],
    dst: &[[f64; 2]],
    max_iters: usize,
    tol: f64,
) -> Result<IcpResult> {
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "ICP needs ≥3 points per set, got {} and {}",
            src.len(),
            dst.len()
        )));
    }
    if collinear(src) || collinear(dst) {
        return Err(Error::Degenerate("collinear point set in ICP".into()));
    }
    let mut transform = RigidTransform2::identity();
    let mut residuals = Vec::new();
    let mut best = (f64::INFINITY, transform);
    for _ in 0..max_iters.max(1) {
        // match transformed src to nearest dst
        let moved: Vec<[f64; 2]> = src.iter().map(|&p| transform.apply(p)).collect();
        let matched: Vec<[f64; 2]> = moved
            .iter()
            .map(|p| {
                *dst.iter()
                    .min_by(|a, b| {
                        let da = (a[0] - p[0]).powi(2) + (a[1] - p[1]).powi(2);
                        let db = (b[0] - p[0]).powi(2) + (b[1] - p[1]).powi(2);
                        da.total_cmp(&db)
                    })
                    .expect("dst non-empty")
            })
            .collect();
        // re-fit from the original src so errors never accumulate
        transform = fit_rigid(src, &matched);
        let res = src
            .iter()
            .zip(&matched)
            .map(|(&s, d)| {
                let q = transform.apply(s);
                ((q[0] - d[0]).powi(2) + (q[1] - d[1]).powi(2)).sqrt()
            })
            .sum::<f64>()
            / src.len() as f64;
        if res < best.0 {
            best = (res, transform);
        }
        let done = residuals.last().is_some_and(|&prev: &f64| (prev - res).abs() < tol);
        residuals.push(res);
        if done {
            break;
        }
    }
    Ok(IcpResult { transform: best.1, residuals })
}
