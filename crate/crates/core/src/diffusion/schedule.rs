use crate::autodiff::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ScheduleKind {
    SquaredCosine,
    Linear,
}

/// Forward-process noise schedule, possibly strided.
///
/// Step `i` (0-based) carries the original 1-based timestep in
/// `timesteps[i]`, so a strided schedule keeps conditioning consistent with
/// the full one it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    timesteps: Vec<usize>,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// Squared-cosine ᾱ profile (offset s = 0.008) or a linear β ramp. Per-step
/// β is clipped at 0.999 and ᾱ re-accumulated from the clipped values so
/// both stay mutually consistent.
pub fn make_schedule(t_count: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if t_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "schedule needs at least 2 steps, got {t_count}"
        )));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::SquaredCosine => {
            const S: f64 = 0.008;
            let f = |t: f64| {
                ((t / t_count as f64 + S) / (1.0 + S) * std::f64::consts::FRAC_PI_2).cos().powi(2)
            };
            // ᾱ_t = f(t)/f(0); β_t comes from the telescoping ratio, where
            // f(0) cancels
            (1..=t_count).map(|t| (1.0 - f(t as f64) / f((t - 1) as f64)).min(0.999)).collect()
        }
        ScheduleKind::Linear => {
            let (lo, hi) = (1e-4, 0.02);
            (0..t_count)
                .map(|i| lo + (hi - lo) * i as f64 / (t_count as f64 - 1.0))
                .collect()
        }
    };
    let mut alpha_bars = Vec::with_capacity(t_count);
    let mut prod = 1.0;
    for &b in &betas {
        prod *= 1.0 - b;
        alpha_bars.push(prod);
    }
    Ok(NoiseSchedule { timesteps: (1..=t_count).collect(), betas, alpha_bars })
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.timesteps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timesteps.is_empty()
    }

    /// Original 1-based timestep carried by step `i`.
    pub fn timestep(&self, i: usize) -> usize {
        self.timesteps[i]
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.betas[i]
    }

    pub fn alpha_bar(&self, i: usize) -> f64 {
        self.alpha_bars[i]
    }

    fn prev_alpha_bar(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.alpha_bars[i - 1]
        }
    }

    /// 1/√a_i with a_i = 1 − β_i.
    pub fn recip_sqrt_alpha(&self, i: usize) -> f64 {
        1.0 / (1.0 - self.betas[i]).sqrt()
    }

    /// β_i/√(1 − ᾱ_i), the ε coefficient of the reverse update.
    pub fn gamma(&self, i: usize) -> f64 {
        self.betas[i] / (1.0 - self.alpha_bars[i]).sqrt()
    }

    /// Posterior std of the reverse kernel, √(β̃_i).
    pub fn posterior_std(&self, i: usize) -> f64 {
        ((1.0 - self.prev_alpha_bar(i)) / (1.0 - self.alpha_bars[i]) * self.betas[i]).sqrt()
    }

    /// Coefficients (c0, ct) of the reverse posterior mean
    /// μ = c0·x̂0 + ct·x_i: c0 = √ᾱ_{i−1}·β_i/(1−ᾱ_i),
    /// ct = √a_i·(1−ᾱ_{i−1})/(1−ᾱ_i). Substituting the implied
    /// x̂0 = (x_i − √(1−ᾱ_i)·ε̂)/√ᾱ_i recovers 1/√a_i·(x_i − γ_i·ε̂).
    pub fn posterior_mean_coeffs(&self, i: usize) -> (f64, f64) {
        let (ab, ab_prev, b) = (self.alpha_bars[i], self.prev_alpha_bar(i), self.betas[i]);
        (ab_prev.sqrt() * b / (1.0 - ab), (1.0 - b).sqrt() * (1.0 - ab_prev) / (1.0 - ab))
    }

    /// Evenly strided sub-schedule over `n_steps` retained timesteps. The ᾱ
    /// values are a subsequence of the parent's, so marginals q(x_t|x_0) at
    /// retained steps are unchanged; per-step β re-derives from consecutive
    /// retained ᾱ ratios.
    pub fn strided(&self, n_steps: usize) -> Result<NoiseSchedule> {
        if n_steps < 1 || n_steps > self.len() {
            return Err(Error::InvalidArgument(format!(
                "stride count {n_steps} outside 1..={}",
                self.len()
            )));
        }
        if n_steps == self.len() {
            // re-deriving β from ᾱ ratios would perturb the last ulp
            return Ok(self.clone());
        }
        let idx: Vec<usize> = (1..=n_steps).map(|k| k * self.len() / n_steps - 1).collect();
        let timesteps = idx.iter().map(|&i| self.timesteps[i]).collect();
        let alpha_bars: Vec<f64> = idx.iter().map(|&i| self.alpha_bars[i]).collect();
        let mut betas = Vec::with_capacity(n_steps);
        let mut prev = 1.0;
        for &ab in &alpha_bars {
            betas.push(1.0 - ab / prev);
            prev = ab;
        }
        Ok(NoiseSchedule { timesteps, betas, alpha_bars })
    }
}

/// Closed-form forward marginal: x_i = √ᾱ_i·x0 + √(1−ᾱ_i)·ε.
pub fn add_noise(x0: &Tensor, eps: &Tensor, i: usize, sched: &NoiseSchedule) -> Result<Tensor> {
    if i >= sched.len() {
        return Err(Error::InvalidArgument(format!(
            "timestep index {i} outside schedule of length {}",
            sched.len()
        )));
    }
    if x0.shape() != eps.shape() {
        return Err(Error::InvalidArgument(format!(
            "x0 shape {:?} != eps shape {:?}",
            x0.shape(),
            eps.shape()
        )));
    }
    let a = sched.alpha_bar(i).sqrt() as f32;
    let b = (1.0 - sched.alpha_bar(i)).sqrt() as f32;
    let mut out = x0.clone();
    for (v, &e) in out.data_mut().iter_mut().zip(eps.data()) {
        *v = a * *v + b * e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn cosine_alpha_bar_is_strictly_decreasing() {
        let s = make_schedule(100, ScheduleKind::SquaredCosine).unwrap();
        assert_eq!(s.len(), 100);
        let mut prev = 1.0;
        for i in 0..s.len() {
            assert!(s.alpha_bar(i) < prev && s.alpha_bar(i) > 0.0);
            assert!(s.beta(i) > 0.0 && s.beta(i) <= 0.999);
            prev = s.alpha_bar(i);
        }
        // near-identity first step
        assert!(s.alpha_bar(0) > 0.99);
    }

    #[test]
    fn cosine_midpoint_matches_closed_form() {
        // independent evaluation of the squared-cosine profile ratio at t=T/2
        let t_count = 100usize;
        let s = make_schedule(t_count, ScheduleKind::SquaredCosine).unwrap();
        let f = |t: f64| {
            ((t / t_count as f64 + 0.008) / 1.008 * std::f64::consts::FRAC_PI_2).cos().powi(2)
        };
        let expected = f(50.0) / f(0.0);
        assert!((s.alpha_bar(49) - expected).abs() < 1e-12);
    }

    #[test]
    fn too_short_schedule_is_an_error() {
        assert!(make_schedule(1, ScheduleKind::SquaredCosine).is_err());
        assert!(make_schedule(0, ScheduleKind::Linear).is_err());
    }

    #[test]
    fn full_stride_is_identity() {
        let s = make_schedule(50, ScheduleKind::SquaredCosine).unwrap();
        assert_eq!(s.strided(50).unwrap(), s);
    }

    #[test]
    fn strided_alpha_bars_are_a_subsequence_with_matching_marginals() {
        let s = make_schedule(100, ScheduleKind::SquaredCosine).unwrap();
        let sub = s.strided(10).unwrap();
        assert_eq!(sub.len(), 10);
        for k in 0..10 {
            let t = sub.timestep(k);
            assert_eq!(t, (k + 1) * 10);
            assert_eq!(sub.alpha_bar(k), s.alpha_bar(t - 1));
            let marg = (1.0 - sub.alpha_bar(k)).sqrt();
            let parent = (1.0 - s.alpha_bar(t - 1)).sqrt();
            assert!((marg - parent).abs() < 1e-12);
        }
        // re-derived betas telescope back to the same products
        let mut prod = 1.0;
        for k in 0..10 {
            prod *= 1.0 - sub.beta(k);
            assert!((prod - sub.alpha_bar(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn composed_per_step_kernels_match_closed_form_marginal() {
        // mean coefficient: Π√(1−β) == √ᾱ; variance: composing
        // var' = (1−β)var + β equals 1 − ᾱ
        for kind in [ScheduleKind::SquaredCosine, ScheduleKind::Linear] {
            let s = make_schedule(20, kind).unwrap();
            let mut mean_coeff = 1.0f64;
            let mut var = 0.0f64;
            for i in 0..s.len() {
                mean_coeff *= (1.0 - s.beta(i)).sqrt();
                var = (1.0 - s.beta(i)) * var + s.beta(i);
                assert!((mean_coeff - s.alpha_bar(i).sqrt()).abs() < 1e-6);
                assert!((var - (1.0 - s.alpha_bar(i))).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn posterior_mean_form_matches_epsilon_form() {
        // c0·x̂0 + ct·x must equal 1/√a·(x − γ·ε) when x̂0 is not clamped
        let s = make_schedule(100, ScheduleKind::SquaredCosine).unwrap();
        for i in [0usize, 1, 37, 99] {
            let (x, eps) = (0.63f64, -0.41f64);
            let x0_hat = (x - (1.0 - s.alpha_bar(i)).sqrt() * eps) / s.alpha_bar(i).sqrt();
            let (c0, ct) = s.posterior_mean_coeffs(i);
            let lhs = c0 * x0_hat + ct * x;
            let rhs = s.recip_sqrt_alpha(i) * (x - s.gamma(i) * eps);
            assert!((lhs - rhs).abs() < 1e-12, "step {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn add_noise_monte_carlo_std_matches_marginal() {
        let s = make_schedule(100, ScheduleKind::SquaredCosine).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let x0 = Tensor::zeros(&[10_000]);
        let i = 60;
        let eps = Tensor::randn(&[10_000], &mut rng);
        let xt = add_noise(&x0, &eps, i, &s).unwrap();
        let var: f64 =
            xt.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / 10_000.0;
        let expect = (1.0 - s.alpha_bar(i)).sqrt();
        assert!((var.sqrt() - expect).abs() / expect < 0.02);
    }

    #[test]
    fn add_noise_validates_and_matches_formula() {
        let s = make_schedule(10, ScheduleKind::Linear).unwrap();
        let x0 = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap();
        let eps = Tensor::from_vec(&[2], vec![0.5, 0.25]).unwrap();
        let xt = add_noise(&x0, &eps, 3, &s).unwrap();
        let (a, b) = (s.alpha_bar(3).sqrt() as f32, (1.0 - s.alpha_bar(3)).sqrt() as f32);
        assert_eq!(xt.data(), &[a + b * 0.5, -2.0 * a + b * 0.25]);
        assert!(add_noise(&x0, &eps, 10, &s).is_err());
    }
}
