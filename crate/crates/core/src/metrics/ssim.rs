use crate::pipeline::TranslationMap;
use crate::{Error, Result};

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const L: f64 = 255.0;

/// Windowed SSIM with a Gaussian window (σ = 1.5), size 11 clamped to the
/// image. `a` and `b` are channel-interleaved with values on the [0, 255]
/// scale; the result averages valid window positions and channels.
pub fn ssim(a: &[f64], b: &[f64], rows: usize, cols: usize, channels: usize) -> Result<f64> {
    if a.len() != rows * cols * channels || b.len() != a.len() {
        return Err(Error::InvalidArgument(format!(
            "ssim needs two {rows}x{cols}x{channels} images, got {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if rows == 0 || cols == 0 || channels == 0 {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let win = 11.min(rows).min(cols);
    let g = gaussian_window(win, 1.5);
    let c1 = (K1 * L).powi(2);
    let c2 = (K2 * L).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for ch in 0..channels {
        for wr in 0..=rows - win {
            for wc in 0..=cols - win {
                let (mut mx, mut my) = (0.0, 0.0);
                let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
                for i in 0..win {
                    for j in 0..win {
                        let w = g[i * win + j];
                        let idx = ((wr + i) * cols + wc + j) * channels + ch;
                        let (x, y) = (a[idx], b[idx]);
                        mx += w * x;
                        my += w * y;
                        sxx += w * x * x;
                        syy += w * y * y;
                        sxy += w * x * y;
                    }
                }
                let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2)
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    Ok(acc / count as f64)
}

/// SSIM of two quantized translation maps (3-channel, [0, 255]).
pub fn ssim_maps(a: &TranslationMap, b: &TranslationMap) -> Result<f64> {
    if a.grid_h() != b.grid_h() || a.grid_w() != b.grid_w() {
        return Err(Error::InvalidArgument(format!(
            "map dims {}x{} vs {}x{}",
            a.grid_h(),
            a.grid_w(),
            b.grid_h(),
            b.grid_w()
        )));
    }
    let fa: Vec<f64> = a.quantized().iter().map(|&q| q as f64).collect();
    let fb: Vec<f64> = b.quantized().iter().map(|&q| q as f64).collect();
    ssim(&fa, &fb, a.grid_h(), a.grid_w(), 3)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|k| {
            let (i, j) = ((k / size) as f64 - c, (k % size) as f64 - c);
            (-(i * i + j * j) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.0..255.0)).collect()
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let im = random_image(24 * 24, &mut rng);
        let s = ssim(&im, &im, 24, 24, 1).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "self SSIM {s}");
    }

    #[test]
    fn constant_images_match_the_closed_form() {
        let a = vec![100.0; 16 * 16];
        let b = vec![120.0; 16 * 16];
        let c1 = (0.01 * 255.0f64).powi(2);
        let expected = (2.0 * 100.0 * 120.0 + c1) / (100.0f64.powi(2) + 120.0f64.powi(2) + c1);
        let s = ssim(&a, &b, 16, 16, 1).unwrap();
        assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
    }

    #[test]
    fn heavy_noise_degrades_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // smooth ramp: local structure is weak, so heavy noise dominates it
        let im: Vec<f64> =
            (0..32 * 32).map(|k| 60.0 + 120.0 * ((k / 32) as f64 / 31.0)).collect();
        let noisy: Vec<f64> =
            im.iter().map(|v| (v + rng.gen_range(-120.0..120.0)).clamp(0.0, 255.0)).collect();
        assert!(ssim(&im, &noisy, 32, 32, 1).unwrap() < 0.5);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_image(20 * 20 * 3, &mut rng);
        let b = random_image(20 * 20 * 3, &mut rng);
        let ab = ssim(&a, &b, 20, 20, 3).unwrap();
        let ba = ssim(&b, &a, 20, 20, 3).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn small_images_clamp_the_window() {
        // 8x8 grid → a single 8x8 window; still well-defined and 1 on self
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_image(8 * 8 * 3, &mut rng);
        assert!((ssim(&a, &a, 8, 8, 3).unwrap() - 1.0).abs() < 1e-12);
        let b = random_image(8 * 8 * 3, &mut rng);
        let s = ssim(&a, &b, 8, 8, 3).unwrap();
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = vec![0.0; 100];
        let b = vec![0.0; 99];
        assert!(ssim(&a, &b, 10, 10, 1).is_err());
    }
}
