use crate::sim::DepthImage;
use crate::{Error, Result};

/// Depth observation after cropping, centering, rescaling, and value
/// normalization. Background pixels are exactly 0; cloth pixels lie in
/// [55, 200] with the cloth centroid at the image center.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthObservation {
    pub size: usize,
    /// Row-major, `size * size` values in {0} ∪ [55, 200].
    pub values: Vec<f32>,
    pub mask: Vec<bool>,
}

/// Crop to the mask bounding box, move the mask centroid to the image
/// center, isotropically rescale so the larger bounding-box side fills the
/// output, then normalize cloth depths: subtract the mean, divide by 3σ,
/// clip to [-1, 1], and map affinely onto [55, 200]. σ = 0 collapses every
/// cloth pixel to 127.5. Resampling is nearest-neighbor, so integer-pixel
/// translations of the raw mask leave the output bit-identical.
pub fn preprocess_depth(depth: &DepthImage, out_size: usize) -> Result<DepthObservation> {
    if out_size < 2 {
        return Err(Error::InvalidArgument("output size must be at least 2".into()));
    }
    let (rows, cols) = (depth.rows, depth.cols);
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0usize, usize::MAX, 0usize);
    let (mut cr, mut cc, mut n) = (0.0f64, 0.0f64, 0usize);
    for r in 0..rows {
        for c in 0..cols {
            if depth.mask[r * cols + c] {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
                cr += r as f64;
                cc += c as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Degenerate("cannot preprocess an empty mask".into()));
    }
    let (cr, cc) = (cr / n as f64, cc / n as f64);
    let side = (r1 - r0 + 1).max(c1 - c0 + 1) as f64;
    let scale = out_size as f64 / side;
    let half = (out_size as f64 - 1.0) / 2.0;

    // nearest-neighbor pull from the raw image; raw depths gathered first so
    // the normalization statistics come from the resampled cloth pixels
    let mut mask = vec![false; out_size * out_size];
    let mut raw = vec![0.0f64; out_size * out_size];
    let (mut sum, mut sum_sq, mut cloth) = (0.0f64, 0.0f64, 0usize);
    for i in 0..out_size {
        for j in 0..out_size {
            let rr = (cr + (i as f64 - half) / scale).round();
            let rc = (cc + (j as f64 - half) / scale).round();
            if rr < 0.0 || rc < 0.0 || rr >= rows as f64 || rc >= cols as f64 {
                continue;
            }
            let src = rr as usize * cols + rc as usize;
            if depth.mask[src] {
                let v = depth.depth[src];
                mask[i * out_size + j] = true;
                raw[i * out_size + j] = v;
                sum += v;
                sum_sq += v * v;
                cloth += 1;
            }
        }
    }
    if cloth == 0 {
        return Err(Error::Degenerate("mask vanished during resampling".into()));
    }
    let mean = sum / cloth as f64;
    let sigma = (sum_sq / cloth as f64 - mean * mean).max(0.0).sqrt();
    let values = raw
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| {
            if !m {
                return 0.0;
            }
            let z = if sigma > 0.0 { ((v - mean) / (3.0 * sigma)).clamp(-1.0, 1.0) } else { 0.0 };
            (127.5 + 72.5 * z) as f32
        })
        .collect();
    Ok(DepthObservation { size: out_size, values, mask })
}

impl DepthObservation {
    /// Mask centroid in pixel coordinates (row, col).
    pub fn mask_centroid(&self) -> [f64; 2] {
        let (mut cr, mut cc, mut n) = (0.0, 0.0, 0usize);
        for i in 0..self.size {
            for j in 0..self.size {
                if self.mask[i * self.size + j] {
                    cr += i as f64;
                    cc += j as f64;
                    n += 1;
                }
            }
        }
        [cr / n as f64, cc / n as f64]
    }
}
