//! Seedable random streams and the variate generators the samplers need.
//!
//! Every chain owns one [`RandomStream`]: a ChaCha20 generator keyed by the
//! run seed and placed on its own 64-bit stream, so chains never overlap and
//! identical `(seed, stream, call sequence)` reproduce bit for bit.
//!
//! Conventions: `gamma(shape, rate)`, `inverse_gamma(shape, scale)`,
//! `inverse_gaussian(mean, shape)`.

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

use crate::linalg::{cholesky, solve_lower, solve_lower_transpose, spd_inverse};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha20Rng,
    seed: u64,
    stream: u64,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        Open01.sample(&mut self.rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform integer in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        positive("exponential rate", rate)?;
        Ok(-self.uniform().ln() / rate)
    }

    /// Laplace(0, 1/rate) variate, density `rate/2 · exp(-rate|x|)`.
    pub fn laplace(&mut self, rate: f64) -> Result<f64> {
        let e = self.exponential(rate)?;
        Ok(if self.uniform() < 0.5 { -e } else { e })
    }

    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        positive("gamma shape", shape)?;
        positive("gamma rate", rate)?;
        let g = Gamma::new(shape, 1.0).map_err(|_| Error::InvalidParameter {
            name: "gamma shape",
            value: shape,
        })?;
        Ok(g.sample(&mut self.rng) / rate)
    }

    pub fn inverse_gamma(&mut self, shape: f64, scale: f64) -> Result<f64> {
        positive("inverse-gamma shape", shape)?;
        positive("inverse-gamma scale", scale)?;
        Ok(1.0 / self.gamma(shape, scale)?)
    }

    pub fn chi_squared(&mut self, df: f64) -> Result<f64> {
        self.gamma(0.5 * df, 0.5)
    }

    /// Beta(a, b) as a ratio of gammas. For vanishing `b` the `b`-gamma
    /// underflows to zero and the draw is exactly 1.
    pub fn beta(&mut self, a: f64, b: f64) -> Result<f64> {
        positive("beta a", a)?;
        positive("beta b", b)?;
        let x = self.gamma(a, 1.0)?;
        let y = self.gamma(b, 1.0)?;
        let s = x + y;
        if s > 0.0 {
            Ok(x / s)
        } else {
            // Both underflowed; fall back on the mean.
            Ok(a / (a + b))
        }
    }

    /// Inverse Gaussian variate by the chi-square transformation with a
    /// uniform choice between the two roots.
    ///
    /// The smaller root is computed in the cancellation-free form
    /// `μ / (1 + t + sqrt(t(2 + t)))`, `t = μ v² / (2 shape)`, which stays
    /// accurate when the mean is many orders of magnitude above the shape.
    pub fn inverse_gaussian(&mut self, mean: f64, shape: f64) -> Result<f64> {
        positive("inverse-Gaussian mean", mean)?;
        positive("inverse-Gaussian shape", shape)?;
        let v = self.standard_normal();
        let t = mean * v * v / (2.0 * shape);
        let x = mean / (1.0 + t + (t * (2.0 + t)).sqrt());
        // The small root can only underflow when t overflows; it is then
        // chosen with probability one.
        if !(x > 0.0) {
            let _ = self.uniform();
            return Ok(f64::MIN_POSITIVE);
        }
        if self.uniform() <= mean / (mean + x) {
            Ok(x)
        } else {
            Ok(mean * (mean / x))
        }
    }

    /// Draws from `N(A⁻¹h, A⁻¹)` for SPD precision `A`, via `A = L Lᵀ`:
    /// mean from two triangular solves, noise from `Lᵀ x = ε`.
    pub fn mvn_precision(&mut self, h: &Vector, a: &Matrix) -> Result<Vector> {
        if h.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                what: "precision-form normal mean vector",
                expected: a.nrows(),
                found: h.len(),
            });
        }
        let l = cholesky(a)?;
        let eps = Vector::from_iterator(h.len(), (0..h.len()).map(|_| self.standard_normal()));
        let mean = solve_lower_transpose(&l, &solve_lower(&l, h));
        Ok(mean + solve_lower_transpose(&l, &eps))
    }

    /// Wishart(df, scale) by the Bartlett decomposition; needs `df > dim - 1`.
    pub fn wishart(&mut self, df: f64, scale: &Matrix) -> Result<Matrix> {
        let p = scale.nrows();
        if !(df > p as f64 - 1.0) || !df.is_finite() {
            return Err(Error::InvalidParameter {
                name: "wishart degrees of freedom",
                value: df,
            });
        }
        let l = cholesky(scale)?;
        let mut a = Matrix::zeros(p, p);
        for i in 0..p {
            a[(i, i)] = self.chi_squared(df - i as f64)?.sqrt();
            for j in 0..i {
                a[(i, j)] = self.standard_normal();
            }
        }
        let la = l * a;
        let mut w = &la * la.transpose();
        crate::linalg::symmetrize(&mut w);
        Ok(w)
    }

    /// Inverse-Wishart(df, scale): the inverse of a Wishart(df, scale⁻¹) draw.
    /// Requires `df ≥ dim`.
    pub fn inverse_wishart(&mut self, df: f64, scale: &Matrix) -> Result<Matrix> {
        let p = scale.nrows();
        if !(df >= p as f64) {
            return Err(Error::InvalidParameter {
                name: "inverse-wishart degrees of freedom",
                value: df,
            });
        }
        let scale_inv = spd_inverse(scale)?;
        let w = self.wishart(df, &scale_inv)?;
        spd_inverse(&w)
    }

    /// Index drawn proportionally to `exp(log_weights)`.
    pub fn categorical_log(&mut self, log_weights: &[f64]) -> usize {
        let max = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
        let mut target = self.uniform() * total;
        for (k, w) in log_weights.iter().enumerate() {
            target -= (w - max).exp();
            if target <= 0.0 {
                return k;
            }
        }
        log_weights.len() - 1
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
