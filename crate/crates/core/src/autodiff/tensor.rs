use crate::{Error, Result};

/// Element type of a tensor: `f32` in production, `f64` for the
/// finite-difference oracle's high-precision forward pass.
pub trait Scalar: num_traits::Float + Copy + Send + Sync + std::fmt::Debug + 'static {
    /// C(m,n) = alpha * A * B + beta * C, row-major storage. `ta`/`tb` treat
    /// the stored matrix as transposed (A stored (k,m), B stored (n,k)).
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]);
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]) {
        debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
        let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
        let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha,
                a.as_ptr(), rsa, csa,
                b.as_ptr(), rsb, csb,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]) {
        debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
        let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
        let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha,
                a.as_ptr(), rsa, csa,
                b.as_ptr(), rsb, csb,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorG<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

/// The production 32-bit tensor.
pub type Tensor = TensorG<f32>;

impl<F: Scalar> TensorG<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        TensorG { shape: shape.to_vec(), data: vec![F::zero(); n] }
    }

    pub fn full(shape: &[usize], v: F) -> Self {
        let n: usize = shape.iter().product();
        TensorG { shape: shape.to_vec(), data: vec![v; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::InvalidArgument(format!(
                "tensor data length {} does not match shape {:?} ({} elements)",
                data.len(), shape, n
            )));
        }
        Ok(TensorG { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot reshape {:?} to {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        TensorG { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn cast<G: Scalar>(&self) -> TensorG<G> {
        TensorG {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| G::from_f64(x.to_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Tensor {
    /// He-style normal init with the given fan-in, for conv/linear weights.
    pub fn randn_he<R: rand::Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Self {
        use rand::prelude::Distribution;
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = rand_distr::StandardNormal;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = normal.sample(rng);
                (z * std) as f32
            })
            .collect();
        TensorG { shape: shape.to_vec(), data }
    }

    /// Standard-normal samples.
    pub fn randn<R: rand::Rng>(shape: &[usize], rng: &mut R) -> Self {
        use rand::prelude::Distribution;
        let normal = rand_distr::StandardNormal;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = normal.sample(rng);
                z as f32
            })
            .collect();
        TensorG { shape: shape.to_vec(), data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(TensorG::<f32>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(TensorG::<f32>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn gemm_matches_naive() {
        // 2x3 * 3x2
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0f32, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c = [0.0f32; 4];
        f32::gemm(2, 3, 2, 1.0, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
        // transposed A: store A as 3x2 column dump of the 2x3 above
        let at = [1.0f32, 4.0, 2.0, 5.0, 3.0, 6.0];
        let mut ct = [0.0f32; 4];
        f32::gemm(2, 3, 2, 1.0, &at, true, &b, false, 0.0, &mut ct);
        assert_eq!(ct, c);
    }
}
