//! Differential operators: central finite differences for potentials, the
//! score function, and the discrete differences ∇, ∇*, ∇_N, ∇*_N.

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::model::{ContinuousModel, DiscretePmf, Domain};

fn check_margin(domain: &Domain, x: &[f64], h: &[f64]) -> Result<()> {
    if x.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: x.len() });
    }
    for i in 0..x.len() {
        if x[i] - h[i] < domain.lo[i] || x[i] + h[i] > domain.hi[i] {
            return Err(Error::BoundaryMargin { point: x.to_vec(), margin: h[i] });
        }
    }
    Ok(())
}

fn steps(x: &[f64], h: Option<f64>, root: f64) -> Vec<f64> {
    x.iter().map(|&xi| h.unwrap_or_else(|| f64::EPSILON.powf(root) * xi.abs().max(1.0))).collect()
}

/// Central-difference gradient. Default step per axis is ε^{1/3}·max(1, |xᵢ|).
pub fn fd_gradient(phi: &dyn Fn(&[f64]) -> f64, domain: &Domain, x: &[f64], h: Option<f64>) -> Result<Vec<f64>> {
    let h = steps(x, h, 1.0 / 3.0);
    check_margin(domain, x, &h)?;
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h[i];
        let fp = phi(&y);
        y[i] = x[i] - h[i];
        let fm = phi(&y);
        y[i] = x[i];
        g.push((fp - fm) / (2.0 * h[i]));
    }
    Ok(g)
}

/// Central-difference Hessian, symmetric by construction. Default step per
/// axis is ε^{1/4}·max(1, |xᵢ|).
pub fn fd_hessian(phi: &dyn Fn(&[f64]) -> f64, domain: &Domain, x: &[f64], h: Option<f64>) -> Result<SymMat> {
    let h = steps(x, h, 0.25);
    check_margin(domain, x, &h)?;
    let d = x.len();
    let f0 = phi(x);
    let mut y = x.to_vec();
    let mut hess = SymMat::zeros(d);
    for i in 0..d {
        y[i] = x[i] + h[i];
        let fp = phi(&y);
        y[i] = x[i] - h[i];
        let fm = phi(&y);
        y[i] = x[i];
        hess.set(i, i, (fp - 2.0 * f0 + fm) / (h[i] * h[i]));
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * h[i];
                y[j] = x[j] + sj * h[j];
                let v = phi(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v =
                (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            hess.set(i, j, v);
        }
    }
    Ok(hess)
}

/// u(x) = f′(x)/f(x) + (x − μ)/α = −φ′(x) + (x − μ)/α for a 1D model.
#[derive(Clone, Copy, Debug)]
pub struct ContinuousScore<'a> {
    model: &'a ContinuousModel,
    alpha: f64,
    mu: f64,
}

impl ContinuousScore<'_> {
    pub fn eval(&self, x: f64) -> Result<f64> {
        let g = self.model.gradient(&[x])?;
        Ok(-g[0] + (x - self.mu) / self.alpha)
    }
}

pub fn score_u_continuous(model: &ContinuousModel, alpha: f64, mu: f64) -> Result<ContinuousScore<'_>> {
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: model.dim() });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    Ok(ContinuousScore { model, alpha, mu })
}

/// ∇u(0) = u(0), ∇u(n) = u(n) − u(n−1).
pub fn nabla<T: Num + Copy>(u: &[T]) -> Result<Vec<T>> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("nabla of an empty sequence".into()));
    }
    let mut out = Vec::with_capacity(u.len());
    out.push(u[0]);
    out.extend(u.windows(2).map(|w| w[1] - w[0]));
    Ok(out)
}

/// How ∇*v is closed at the last index K of a finite sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailConvention {
    /// v(K+1) := v(K), so ∇*v(K) = 0. Dual to ∇ of the zero-extended u,
    /// which carries one extra entry −u(K) at K+1.
    ConstantExtension,
    /// v(K+1) := 0, so ∇*v(K) = −v(K). Dual to ∇ on {0..K} as is.
    ZeroExtension,
}

/// Forward difference ∇*v(n) = v(n+1) − v(n), closed at K by `tail`.
pub fn nabla_star<T: Num + Copy>(v: &[T], tail: TailConvention) -> Result<Vec<T>> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("nabla_star needs at least two entries".into()));
    }
    let mut out: Vec<T> = v.windows(2).map(|w| w[1] - w[0]).collect();
    out.push(match tail {
        TailConvention::ConstantExtension => T::zero(),
        TailConvention::ZeroExtension => T::zero() - v[v.len() - 1],
    });
    Ok(out)
}

/// ∇ applied to u extended by zero past its last index: K+2 entries, the
/// last being −u(K).
pub fn nabla_zero_extended<T: Num + Copy>(u: &[T]) -> Result<Vec<T>> {
    let mut out = nabla(u)?;
    out.push(T::zero() - u[u.len() - 1]);
    Ok(out)
}

fn frac<T: FromPrimitive + Num>(num: usize, den: usize) -> T {
    T::from_usize(num).expect("representable") / T::from_usize(den).expect("representable")
}

/// ∇_N h(0) = h(0); ∇_N h(n) = (N−n)/N h(n) − (N−n+1)/N h(n−1) for 1 ≤ n ≤ N.
pub fn nabla_n<T: Num + Copy + FromPrimitive>(h: &[T], n: usize) -> Result<Vec<T>> {
    if n == 0 || h.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: h.len() });
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(h[0]);
    for k in 1..=n {
        out.push(frac::<T>(n - k, n) * h[k] - frac::<T>(n - k + 1, n) * h[k - 1]);
    }
    Ok(out)
}

/// ∇*_N h(n) = (N−n)/N (h(n+1) − h(n)) for n < N; ∇*_N h(N) = 0.
pub fn nabla_n_star<T: Num + Copy + FromPrimitive>(h: &[T], n: usize) -> Result<Vec<T>> {
    if n == 0 || h.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: h.len() });
    }
    let mut out: Vec<T> = (0..n).map(|k| frac::<T>(n - k, n) * (h[k + 1] - h[k])).collect();
    out.push(T::zero());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteOperator {
    Nabla,
    NablaN,
}

/// r(k) = Df(k)/f(k) with D = ∇ or ∇_N.
///
/// With ∇ the pmf is treated as vanishing past its last index K, and the
/// drop f(K+1) − f(K) = −f(K) is folded into r(K). That keeps Σ f r = 0 and
/// makes the Stein gap equal −α Cov(u, v) exactly under the
/// [`TailConvention::ConstantExtension`] closure of ∇*.
pub fn score_ratio(pmf: &DiscretePmf, op: DiscreteOperator) -> Result<Vec<f64>> {
    pmf.require_positive()?;
    let f = pmf.probs();
    let k_max = f.len() - 1;
    match op {
        DiscreteOperator::Nabla => Ok((0..=k_max)
            .map(|k| {
                let r = if k == 0 { 1.0 } else { 1.0 - f[k - 1] / f[k] };
                if k == k_max {
                    r - 1.0
                } else {
                    r
                }
            })
            .collect()),
        DiscreteOperator::NablaN => {
            let n =
                pmf.finite_n().ok_or_else(|| Error::InvalidArgument("nabla_N needs a finite support {0..N}".into()))?;
            Ok((0..=n)
                .map(|k| {
                    if k == 0 {
                        1.0
                    } else {
                        (n - k) as f64 / n as f64 - (n - k + 1) as f64 / n as f64 * f[k - 1] / f[k]
                    }
                })
                .collect())
        }
    }
}

/// Score sequence u(k) = Df(k)/f(k) + (k − μ)/α, see [`score_ratio`].
pub fn score_u_discrete(pmf: &DiscretePmf, alpha: f64, mu: f64, op: DiscreteOperator) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let r = score_ratio(pmf, op)?;
    Ok(r.iter().enumerate().map(|(k, rk)| rk + (k as f64 - mu) / alpha).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMat;
    use crate::model::{builtin_binomial, builtin_gaussian, builtin_poisson, builtin_poly_potential};
    use num_rational::Rational64;
    use proptest::prelude::*;

    #[test]
    fn fd_gradient_examples() {
        let whole = Domain::whole(1);
        let g = fd_gradient(&|x: &[f64]| x[0] * x[0] / 2.0, &whole, &[1.0], None).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10);
        let g = fd_gradient(&|x: &[f64]| x[0].powi(4), &whole, &[2.0], None).unwrap();
        assert!((g[0] - 32.0).abs() < 1e-6);
    }

    #[test]
    fn fd_rejects_points_near_boundary() {
        let unit = Domain::interval(0.0, 1.0);
        let h = 1e-3;
        let err = fd_gradient(&|x: &[f64]| x[0], &unit, &[1.0 - h / 2.0], Some(h)).unwrap_err();
        assert!(matches!(err, Error::BoundaryMargin { .. }));
        let err = fd_hessian(&|x: &[f64]| x[0], &unit, &[1.0 - h / 2.0], Some(h)).unwrap_err();
        assert!(matches!(err, Error::BoundaryMargin { .. }));
    }

    #[test]
    fn fd_hessian_examples() {
        let g = builtin_gaussian(&[0.0, 0.0], &SymMat::from_diag(&[2.0, 3.0])).unwrap();
        let h = fd_hessian(&|x: &[f64]| g.phi(x), g.domain(), &[0.7, -0.4], None).unwrap();
        assert!((h.get(0, 0) - 0.5).abs() < 1e-6);
        assert!((h.get(1, 1) - 1.0 / 3.0).abs() < 1e-6);
        assert!(h.get(0, 1).abs() < 1e-6);

        let q = |x: &[f64]| x[0] * x[0] / 2.0 + x[0].powi(4);
        let h = fd_hessian(&q, &Domain::whole(1), &[1.0], None).unwrap();
        assert!((h.get(0, 0) - 13.0).abs() < 1e-5);
        let h = fd_hessian(&|x: &[f64]| x[0] * x[0] / 2.0, &Domain::whole(1), &[0.0], None).unwrap();
        assert!((h.get(0, 0) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fd_hessian_matches_gaussian_precision_at_random_points() {
        let sigma = SymMat::from_rows(&[vec![1.5, 0.4, 0.1], vec![0.4, 0.8, -0.2], vec![0.1, -0.2, 2.0]]).unwrap();
        let g = builtin_gaussian(&[0.5, -1.0, 2.0], &sigma).unwrap();
        let prec = sigma.inverse().unwrap();
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
        };
        for _ in 0..100 {
            // within a few standard deviations of the mean
            let x = [0.5 + next(), -1.0 + next(), 2.0 + next()];
            let h = fd_hessian(&|y: &[f64]| g.phi(y), g.domain(), &x, None).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((h.get(i, j) - prec.get(i, j)).abs() < 1e-6, "{x:?}");
                }
            }
        }
    }

    #[test]
    fn continuous_score_examples() {
        let g = builtin_gaussian(&[1.5], &SymMat::scalar(2.0)).unwrap();
        let u = score_u_continuous(&g, 2.0, 1.5).unwrap();
        for i in -50..=50 {
            let x = 1.5 + i as f64 * 0.2;
            assert!(u.eval(x).unwrap().abs() < 1e-12);
        }
        let n = builtin_gaussian(&[0.0], &SymMat::scalar(1.0)).unwrap();
        let u = score_u_continuous(&n, 2.0, 0.0).unwrap();
        assert!((u.eval(3.0).unwrap() + 1.5).abs() < 1e-14);
        let q = builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap();
        let u = score_u_continuous(&q, 1.0, 0.0).unwrap();
        for x in [-1.0, 0.3, 2.0] {
            assert!((u.eval(x).unwrap() + 4.0 * x * x * x).abs() < 1e-12);
        }
        assert!(score_u_continuous(&q, 0.0, 0.0).is_err());
    }

    #[test]
    fn nabla_examples() {
        assert_eq!(nabla(&[1, 3, 6]).unwrap(), vec![1, 2, 3]);
        assert_eq!(nabla(&[4.0, 4.0, 4.0]).unwrap(), vec![4.0, 0.0, 0.0]);
        assert!(nabla::<f64>(&[]).is_err());
        // Poisson(3): ∇f/f = 1 − f(k−1)/f(k) = 1 − k/3
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let d = nabla(p.probs()).unwrap();
        for k in 0..p.probs().len() {
            let oracle = if k == 0 { 1.0 } else { 1.0 - p.probs()[k - 1] / p.probs()[k] };
            assert!((d[k] / p.probs()[k] - oracle).abs() < 1e-12);
            assert!((oracle - (1.0 - k as f64 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn nabla_star_examples() {
        let v: Vec<i64> = (0..6).collect();
        let d = nabla_star(&v, TailConvention::ConstantExtension).unwrap();
        assert!(d[..5].iter().all(|&x| x == 1));
        assert_eq!(nabla_star(&[7, 7, 7], TailConvention::ConstantExtension).unwrap(), vec![0, 0, 0]);
        assert!(nabla_star(&[1.0], TailConvention::ConstantExtension).is_err());

        // duality with v(K+1) = 0: Σ(∇u)v = 8 = −Σ u ∇*v
        let (u, v) = ([1i64, 2], [3i64, 5]);
        let du = nabla(&u).unwrap();
        let dv = nabla_star(&v, TailConvention::ZeroExtension).unwrap();
        assert_eq!(dv, vec![2, -5]);
        let lhs: i64 = du.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: i64 = -u.iter().zip(&dv).map(|(a, b)| a * b).sum::<i64>();
        assert_eq!((lhs, rhs), (8, 8));
    }

    #[test]
    fn nabla_n_examples() {
        // N = 1: ∇_1 h(1) = 0·b − 1·a
        assert_eq!(nabla_n(&[2.0, 5.0], 1).unwrap(), vec![2.0, -2.0]);
        let c = 3.0;
        let d = nabla_n(&[c, c, c], 2).unwrap();
        assert_eq!(d[1], -c / 2.0);
        assert!(nabla_n(&[1.0, 2.0], 2).is_err());

        let v: Vec<f64> = (0..=10).map(f64::from).collect();
        let d = nabla_n_star(&v, 10).unwrap();
        for n in 0..=10 {
            assert!((d[n] - (10 - n) as f64 / 10.0).abs() < 1e-15);
        }
        assert_eq!(nabla_n_star(&[1.0, 4.0, -2.0], 2).unwrap()[2], 0.0);
        assert!(nabla_n_star(&[2.0; 5], 4).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn binomial_score_is_constant_at_np() {
        let b = builtin_binomial(10, 0.3).unwrap();
        let u = score_u_discrete(&b, 3.0, b.mean(), DiscreteOperator::NablaN).unwrap();
        // oracle: direct evaluation of ∇_N f / f from the pmf
        let f = b.probs();
        let d = nabla_n(f, 10).unwrap();
        for n in 0..=10 {
            let oracle = d[n] / f[n] + (n as f64 - b.mean()) / 3.0;
            assert!((u[n] - oracle).abs() < 1e-12);
            assert!((u[n] - u[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_score_vanishes_at_matching_parameters() {
        for lambda in [0.5, 3.0, 10.0] {
            let p = builtin_poisson(lambda, 1e-12).unwrap();
            let u = score_u_discrete(&p, lambda, lambda, DiscreteOperator::Nabla).unwrap();
            let k_max = p.truncation_index();
            for k in 0..k_max {
                // 1 − k/λ + (k − λ)/λ = 0
                assert!(u[k].abs() < 1e-12, "lambda {lambda} k {k}: {}", u[k]);
            }
            // the folded boundary entry
            assert!((u[k_max] + 1.0).abs() < 1e-12);
            let u = score_u_discrete(&p, lambda, p.mean(), DiscreteOperator::Nabla).unwrap();
            let s: f64 = u.iter().zip(p.probs()).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-12);
        }
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let u = score_u_discrete(&p, 6.0, p.mean(), DiscreteOperator::Nabla).unwrap();
        for k in 0..p.truncation_index() {
            let expect = 1.0 - k as f64 / 3.0 + (k as f64 - p.mean()) / 6.0;
            assert!((u[k] - expect).abs() < 1e-12);
            if k > 0 {
                assert!(u[k] < u[k - 1]);
            }
        }
    }

    #[test]
    fn score_needs_positive_mass() {
        let p = DiscretePmf::from_probs(vec![0.5, 0.0, 0.5], crate::model::Support::Naturals, 0.0).unwrap();
        assert!(matches!(score_u_discrete(&p, 1.0, 1.0, DiscreteOperator::Nabla), Err(Error::ZeroMass(1))));
    }

    fn dot<T: Num + Copy>(a: &[T], b: &[T]) -> T {
        a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
    }

    proptest! {
        #[test]
        fn summation_by_parts_is_exact(
            pairs in proptest::collection::vec((-50i64..50, -50i64..50), 2..30)
        ) {
            let u: Vec<Rational64> = pairs.iter().map(|p| Rational64::from_integer(p.0)).collect();
            let v: Vec<Rational64> = pairs.iter().map(|p| Rational64::from_integer(p.1)).collect();
            // zero-extended v, plain ∇
            let lhs = dot(&nabla(&u).unwrap(), &v);
            let rhs = dot(&u, &nabla_star(&v, TailConvention::ZeroExtension).unwrap());
            prop_assert_eq!(lhs + rhs, Rational64::from_integer(0));
            // constant-extended v, zero-extended u
            let mut v_ext = v.clone();
            v_ext.push(*v.last().unwrap());
            let lhs = dot(&nabla_zero_extended(&u).unwrap(), &v_ext);
            let rhs = dot(&u, &nabla_star(&v, TailConvention::ConstantExtension).unwrap());
            prop_assert_eq!(lhs + rhs, Rational64::from_integer(0));
        }

        #[test]
        fn binomial_operators_are_dual_and_rescaled(
            pairs in proptest::collection::vec((-50i64..50, -50i64..50), 2..25)
        ) {
            let n = pairs.len() - 1;
            let u: Vec<Rational64> = pairs.iter().map(|p| Rational64::from_integer(p.0)).collect();
            let v: Vec<Rational64> = pairs.iter().map(|p| Rational64::from_integer(p.1)).collect();
            let lhs = dot(&nabla_n(&u, n).unwrap(), &v);
            let rhs = dot(&u, &nabla_n_star(&v, n).unwrap());
            prop_assert_eq!(lhs + rhs, Rational64::from_integer(0));
            let plain = nabla_star(&v, TailConvention::ConstantExtension).unwrap();
            let scaled = nabla_n_star(&v, n).unwrap();
            for k in 0..n {
                prop_assert_eq!(scaled[k], Rational64::new((n - k) as i64, n as i64) * plain[k]);
            }
        }
    }
}
