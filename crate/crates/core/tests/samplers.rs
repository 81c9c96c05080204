mod common;

use common::{ks_one_sample, mean, variance};
use dplsvm_core::rngkit::RandomStream;
use dplsvm_core::{Matrix, Vector};
use statrs::distribution::{Beta, ContinuousCDF, Exp, Gamma, InverseGamma, Laplace, Normal};

const KS_N: usize = 100_000;
const KS_ALPHA: f64 = 0.001;

fn draws(n: usize, seed: u64, mut f: impl FnMut(&mut RandomStream) -> f64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed, 3);
    (0..n).map(|_| f(&mut rng)).collect()
}

fn within_3se(xs: &[f64], target: f64) -> bool {
    let se = (variance(xs) / xs.len() as f64).sqrt();
    (mean(xs) - target).abs() < 3.0 * se
}

fn inverse_gaussian_cdf(x: f64, mu: f64, shape: f64) -> f64 {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let s = (shape / x).sqrt();
    phi.cdf(s * (x / mu - 1.0)) + (2.0 * shape / mu).exp() * phi.cdf(-s * (x / mu + 1.0))
}

#[test]
fn gamma_ks() {
    for (i, (shape, rate)) in [(0.3, 1.0), (1.0, 2.5), (7.5, 0.4)].into_iter().enumerate() {
        let xs = draws(KS_N, 10 + i as u64, |r| r.gamma(shape, rate).unwrap());
        let d = Gamma::new(shape, rate).unwrap();
        let p = ks_one_sample(&xs, |x| d.cdf(x));
        assert!(p > KS_ALPHA, "gamma({shape}, {rate}): p = {p}");
    }
}

#[test]
fn inverse_gamma_ks() {
    for (i, (shape, scale)) in [(1.5, 1.0), (3.0, 4.0), (20.0, 0.5)].into_iter().enumerate() {
        let xs = draws(KS_N, 20 + i as u64, |r| r.inverse_gamma(shape, scale).unwrap());
        let d = InverseGamma::new(shape, scale).unwrap();
        let p = ks_one_sample(&xs, |x| d.cdf(x));
        assert!(p > KS_ALPHA, "inverse gamma({shape}, {scale}): p = {p}");
    }
}

#[test]
fn beta_ks() {
    for (i, (a, b)) in [(1.0, 1.0), (1.0, 5.0), (3.0, 0.7)].into_iter().enumerate() {
        let xs = draws(KS_N, 30 + i as u64, |r| r.beta(a, b).unwrap());
        let d = Beta::new(a, b).unwrap();
        let p = ks_one_sample(&xs, |x| d.cdf(x));
        assert!(p > KS_ALPHA, "beta({a}, {b}): p = {p}");
    }
}

#[test]
fn inverse_gaussian_ks() {
    for (i, (mu, shape)) in [(2.0, 1.0), (0.5, 3.0), (1.0, 20.0)].into_iter().enumerate() {
        let xs = draws(KS_N, 40 + i as u64, |r| r.inverse_gaussian(mu, shape).unwrap());
        let p = ks_one_sample(&xs, |x| inverse_gaussian_cdf(x, mu, shape));
        assert!(p > KS_ALPHA, "inverse gaussian({mu}, {shape}): p = {p}");
    }
}

#[test]
fn normal_exponential_laplace_ks() {
    for (i, (m, s)) in [(0.0, 1.0), (-3.0, 0.2), (10.0, 4.0)].into_iter().enumerate() {
        let xs = draws(KS_N, 50 + i as u64, |r| r.normal(m, s));
        let d = Normal::new(m, s).unwrap();
        assert!(ks_one_sample(&xs, |x| d.cdf(x)) > KS_ALPHA);
    }
    for (i, rate) in [0.1, 1.0, 30.0].into_iter().enumerate() {
        let xs = draws(KS_N, 60 + i as u64, |r| r.exponential(rate).unwrap());
        let d = Exp::new(rate).unwrap();
        assert!(ks_one_sample(&xs, |x| d.cdf(x)) > KS_ALPHA);
        let xs = draws(KS_N, 70 + i as u64, |r| r.laplace(rate).unwrap());
        let d = Laplace::new(0.0, 1.0 / rate).unwrap();
        assert!(ks_one_sample(&xs, |x| d.cdf(x)) > KS_ALPHA);
    }
}

#[test]
fn inverse_gaussian_mean_and_variance() {
    let xs = draws(1_000_000, 80, |r| r.inverse_gaussian(2.0, 1.0).unwrap());
    assert!(within_3se(&xs, 2.0), "mean {}", mean(&xs));
    // Squared deviations from the known mean have expectation μ³/λ.
    let sq: Vec<f64> = xs.iter().map(|x| (x - 2.0).powi(2)).collect();
    assert!(within_3se(&sq, 8.0), "variance {}", mean(&sq));
}

#[test]
fn gamma_and_inverse_gamma_moments() {
    let xs = draws(200_000, 81, |r| r.gamma(1.0, 4.0).unwrap());
    assert!(within_3se(&xs, 0.25));
    let xs = draws(200_000, 82, |r| r.inverse_gamma(3.0, 4.0).unwrap());
    assert!(within_3se(&xs, 2.0));
}

#[test]
fn mvn_precision_recovers_moments() {
    let a = Matrix::from_element(1, 1, 4.0);
    let h = Vector::from_vec(vec![8.0]);
    let xs = draws(1_000_000, 90, |r| r.mvn_precision(&h, &a).unwrap()[0]);
    assert!(within_3se(&xs, 2.0));
    let sq: Vec<f64> = xs.iter().map(|x| (x - 2.0).powi(2)).collect();
    assert!(within_3se(&sq, 0.25));

    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let cov = [[4.0 / 3.0, -2.0 / 3.0], [-2.0 / 3.0, 4.0 / 3.0]];
    let mut rng = RandomStream::new(91, 0);
    let zero = Vector::zeros(2);
    let samples: Vec<Vector> = (0..400_000).map(|_| rng.mvn_precision(&zero, &a).unwrap()).collect();
    for j in 0..2 {
        for k in 0..2 {
            let prods: Vec<f64> = samples.iter().map(|x| x[j] * x[k]).collect();
            assert!(within_3se(&prods, cov[j][k]), "cov[{j}][{k}] = {}", mean(&prods));
        }
    }
}

#[test]
fn inverse_wishart_mean_and_marginal() {
    let r = 3;
    let df = r as f64 + 2.0;
    let mut rng = RandomStream::new(92, 0);
    let samples: Vec<Matrix> = (0..200_000)
        .map(|_| rng.inverse_wishart(df, &Matrix::identity(r, r)).unwrap())
        .collect();
    // Entries have infinite variance at df = R + 2, so the mean gets a fixed
    // tolerance and the diagonal marginal, IG((df - R + 1)/2, 1/2), a KS test.
    for j in 0..r {
        for k in 0..r {
            let xs: Vec<f64> = samples.iter().map(|m| m[(j, k)]).collect();
            let expected = if j == k { 1.0 } else { 0.0 };
            assert!((mean(&xs) - expected).abs() < 0.05, "entry ({j},{k}) mean {}", mean(&xs));
        }
    }
    let diag: Vec<f64> = samples.iter().map(|m| m[(1, 1)]).collect();
    let d = InverseGamma::new((df - r as f64 + 1.0) / 2.0, 0.5).unwrap();
    assert!(ks_one_sample(&diag, |x| d.cdf(x)) > KS_ALPHA);

    let big = draws(200_000, 93, |rng| rng.inverse_wishart(r as f64 + 6.0, &Matrix::identity(r, r)).unwrap()[(0, 0)]);
    assert!(within_3se(&big, 1.0 / (r as f64 + 6.0 - r as f64 - 1.0)));
}

#[test]
fn streams_repeat_bit_for_bit() {
    let a = draws(1000, 7, |r| r.gamma(2.0, 1.0).unwrap() + r.standard_normal());
    let b = draws(1000, 7, |r| r.gamma(2.0, 1.0).unwrap() + r.standard_normal());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let mut other = RandomStream::new(7, 4);
    assert_ne!(a[0], other.gamma(2.0, 1.0).unwrap() + other.standard_normal());
}
