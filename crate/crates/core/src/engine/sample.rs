//! Inverse-CDF sampling from a tabulated numeric CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gk::{NODES, RULE};
use super::{Integrator, QuadratureSpec};
use crate::error::{Error, Result};
use crate::model::ContinuousModel;
use crate::numeric::NeumaierSum;

/// Sub-cells per quadrature cell in the CDF table.
const SUB: usize = 256;

/// Piecewise-linear CDF through quadrature-exact knots on the energy window.
#[derive(Clone, Debug)]
pub struct NumericCdf {
    xs: Vec<f64>,
    cs: Vec<f64>,
}

impl NumericCdf {
    pub fn new(model: &ContinuousModel, spec: &QuadratureSpec) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: model.dim() });
        }
        let it = Integrator::new(model, spec)?;
        let phi_min = model.minimum().1;
        let mut xs = Vec::new();
        for (a, b) in it.cell_bounds_1d() {
            for j in 0..SUB {
                xs.push(a + (b - a) * j as f64 / SUB as f64);
            }
        }
        xs.push(it.window().hi[0]);
        let masses: Vec<f64> = xs
            .windows(2)
            .map(|w| {
                let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                (0..NODES).map(|j| RULE.wk[j] * half * (-(model.phi(&[mid + half * RULE.x[j]]) - phi_min)).exp()).sum()
            })
            .collect();
        let mut acc = NeumaierSum::default();
        let mut cs = vec![0.0];
        for m in &masses {
            acc.add(*m);
            cs.push(acc.value());
        }
        let total = acc.value();
        for c in cs.iter_mut() {
            *c /= total;
        }
        *cs.last_mut().expect("non-empty") = 1.0;
        Ok(Self { xs, cs })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().expect("non-empty") {
            return 1.0;
        }
        let j = self.xs.partition_point(|&v| v <= x) - 1;
        let t = (x - self.xs[j]) / (self.xs[j + 1] - self.xs[j]);
        self.cs[j] + t * (self.cs[j + 1] - self.cs[j])
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cs.partition_point(|&c| c <= u).clamp(1, self.cs.len() - 1) - 1;
        let dc = self.cs[j + 1] - self.cs[j];
        let t = if dc > 0.0 { ((u - self.cs[j]) / dc).clamp(0.0, 1.0) } else { 0.5 };
        self.xs[j] + t * (self.xs[j + 1] - self.xs[j])
    }
}

/// n draws from a 1D model; identical for identical (model, n, seed, spec).
pub fn sample(model: &ContinuousModel, n: usize, seed: u64, spec: &QuadratureSpec) -> Result<Vec<f64>> {
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: model.dim() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let cdf = NumericCdf::new(model, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| cdf.quantile(rng.random::<f64>())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat;
    use crate::model::{builtin_gaussian, builtin_poly_potential};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn gaussian_sample_mean_and_ks() {
        let m = builtin_gaussian(&[0.0], &SymMat::scalar(1.0)).unwrap();
        let spec = QuadratureSpec::default();
        let n = 100_000;
        let mut xs = sample(&m, n, 7, &spec).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        xs.sort_by(f64::total_cmp);
        let cdf = NumericCdf::new(&m, &spec).unwrap();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut ks: f64 = 0.0;
        let mut table: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let c = cdf.cdf(x);
            ks = ks.max((c - i as f64 / n as f64).abs()).max((c - (i + 1) as f64 / n as f64).abs());
            table = table.max((c - normal.cdf(x)).abs());
        }
        assert!(ks < 0.01, "{ks}");
        assert!(table < 1e-5, "{table}");
    }

    #[test]
    fn deterministic_and_empty() {
        let m = builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap();
        let spec = QuadratureSpec::default();
        assert!(sample(&m, 0, 1, &spec).unwrap().is_empty());
        let a = sample(&m, 1000, 3, &spec).unwrap();
        let b = sample(&m, 1000, 3, &spec).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c = sample(&m, 1000, 4, &spec).unwrap();
        assert_ne!(a, c);
        let two = builtin_gaussian(&[0.0, 0.0], &SymMat::identity(2)).unwrap();
        assert!(sample(&two, 10, 1, &spec).is_err());
    }
}
