//! Strong log-concavity certificates: α* in 1D and on discrete supports,
//! Loewner verification of a candidate Σ, and covariance dominance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{score_ratio, score_u_discrete, DiscreteOperator};
use crate::engine::{find_window, golden_min, QuadratureSpec, Summary};
use crate::error::{Error, Result};
use crate::linalg::{loewner_margin, require_spd, SymMat};
use crate::model::{ContinuousModel, DiscretePmf, Support};

/// Absolute tolerance on curvature margins.
pub const MARGIN_TOL: f64 = 1e-7;
/// Relative tolerance when comparing a candidate α against α*.
pub const ALPHA_RTOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    RefutedOnWindow,
    UndeterminedTail,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Certified => 0,
            Verdict::RefutedOnWindow => 2,
            Verdict::UndeterminedTail => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    Continuous1d,
    ContinuousNd,
    Discrete,
    Binomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlcCertificate {
    pub kind: CertKind,
    pub verdict: Verdict,
    /// α* (1D and discrete); None when no finite α exists on the window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_star: Option<f64>,
    /// the α that was checked, when one was supplied
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_inv: Option<Vec<Vec<f64>>>,
    /// 1D: inf φ″; d > 1: min λ_min(φ″ − Σ⁻¹); discrete: min ratio
    /// difference; binomial: −(largest increase of u)
    pub margin: f64,
    pub argmin: Vec<f64>,
    /// examined box, one [lo, hi] per axis (index range for discrete)
    pub window: Vec<[f64; 2]>,
    pub grid_points: usize,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SlcCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    /// The SLC parameter backing the certificate, if one is known.
    pub fn alpha(&self) -> Option<f64> {
        self.candidate_alpha.or(self.alpha_star)
    }

    pub fn sigma_matrix(&self) -> Option<SymMat> {
        self.sigma.as_ref().and_then(|s| SymMat::from_rows(s).ok())
    }
}

/// Interior of the window, kept clear of the boundary for finite differences.
fn scan_box(model: &ContinuousModel, spec: &QuadratureSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = find_window(model, spec.energy_budget)?;
    let m = model.derivative_margin();
    let mut lo = w.lo.clone();
    let mut hi = w.hi.clone();
    for i in 0..lo.len() {
        let dom = model.domain();
        if lo[i] - m < dom.lo[i] {
            lo[i] = dom.lo[i] + m;
        }
        if hi[i] + m > dom.hi[i] {
            hi[i] = dom.hi[i] - m;
        }
        if !(lo[i] < hi[i]) {
            return Err(Error::BoundaryMargin { point: vec![w.lo[i], w.hi[i]], margin: m });
        }
    }
    Ok((lo, hi))
}

fn curvature(model: &ContinuousModel, x: f64) -> f64 {
    model.hessian(&[x]).map(|h| h.get(0, 0)).unwrap_or(f64::NAN)
}

/// α* = 1 / inf φ″ over the energy window (dense grid, then golden section
/// around the best grid point).
pub fn certify_slc_1d(model: &ContinuousModel, grid_points: usize, spec: &QuadratureSpec) -> Result<SlcCertificate> {
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: model.dim() });
    }
    let grid_points = grid_points.max(3);
    let (lo, hi) = scan_box(model, spec)?;
    let (a, b) = (lo[0], hi[0]);
    let xs: Vec<f64> = (0..grid_points).map(|i| a + (b - a) * i as f64 / (grid_points - 1) as f64).collect();
    let hs: Vec<f64> = xs.par_iter().map(|&x| curvature(model, x)).collect();
    if let Some(i) = hs.iter().position(|h| !h.is_finite()) {
        return Err(Error::NonFinite(vec![xs[i]]));
    }
    let (imin, _) = hs.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &h)| if h < acc.1 { (i, h) } else { acc });
    let f = |x: f64| curvature(model, x);
    let (xr, hr) = golden_min(&f, xs[imin.saturating_sub(1)], xs[(imin + 1).min(grid_points - 1)]);
    let (x_star, m) = if hr.is_finite() && hr < hs[imin] { (xr, hr) } else { (xs[imin], hs[imin]) };
    let (verdict, alpha_star) = if m > MARGIN_TOL {
        (Verdict::Certified, Some(1.0 / m))
    } else if m < -MARGIN_TOL {
        (Verdict::RefutedOnWindow, None)
    } else {
        (Verdict::UndeterminedTail, None)
    };
    let mut notes = Vec::new();
    if verdict == Verdict::UndeterminedTail {
        notes.push(format!("inf of the second derivative on the window is {m:.3e}, within tolerance of 0"));
    }
    if !model.has_closed_form_derivatives() {
        notes.push("second derivatives from central finite differences".into());
    }
    Ok(SlcCertificate {
        kind: CertKind::Continuous1d,
        verdict,
        alpha_star,
        candidate_alpha: None,
        sigma: None,
        sigma_inv: None,
        margin: m,
        argmin: vec![x_star],
        window: vec![[a, b]],
        grid_points,
        tolerance: MARGIN_TOL,
        notes,
    })
}

/// Checks SLC(α) for a given α against a 1D certificate.
pub fn check_alpha_1d(cert: &SlcCertificate, alpha: f64) -> SlcCertificate {
    let mut c = cert.clone();
    c.candidate_alpha = Some(alpha);
    c.verdict = match cert.alpha_star {
        Some(a) if alpha >= a * (1.0 - ALPHA_RTOL) => Verdict::Certified,
        Some(_) => Verdict::RefutedOnWindow,
        None if cert.verdict == Verdict::RefutedOnWindow => Verdict::RefutedOnWindow,
        None => {
            // α works on the window iff inf φ″ ≥ 1/α
            if cert.margin * alpha >= 1.0 - ALPHA_RTOL {
                Verdict::Certified
            } else {
                cert.verdict
            }
        }
    };
    c
}

fn margin_nd(model: &ContinuousModel, sigma_inv: &SymMat, x: &[f64]) -> f64 {
    match model.hessian(x) {
        Ok(h) => loewner_margin(&h, sigma_inv),
        Err(_) => f64::NAN,
    }
}

/// min over a grid (then compass search) of λ_min(φ″(x) − Σ⁻¹).
pub fn certify_slc_nd(
    model: &ContinuousModel,
    sigma: &SymMat,
    grid_per_axis: usize,
    spec: &QuadratureSpec,
) -> Result<SlcCertificate> {
    let d = model.dim();
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.dim() });
    }
    require_spd(sigma)?;
    let sigma_inv = sigma.inverse()?;
    let g = grid_per_axis.max(3);
    let (lo, hi) = scan_box(model, spec)?;
    let total = g.pow(d as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let j = idx % g;
                idx /= g;
                lo[i] + (hi[i] - lo[i]) * j as f64 / (g - 1) as f64
            })
            .collect()
    };
    let margins: Vec<f64> = (0..total).into_par_iter().map(|i| margin_nd(model, &sigma_inv, &point(i))).collect();
    if let Some(i) = margins.iter().position(|m| !m.is_finite()) {
        return Err(Error::NonFinite(point(i)));
    }
    let (imin, mut best) =
        margins.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc });
    let mut x = point(imin);
    // compass search
    let mut step: Vec<f64> = (0..d).map(|i| (hi[i] - lo[i]) / (g - 1) as f64).collect();
    let min_step: Vec<f64> = (0..d).map(|i| 1e-10 * (hi[i] - lo[i])).collect();
    while (0..d).any(|i| step[i] > min_step[i]) {
        let mut moved = false;
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + s * step[i]).clamp(lo[i], hi[i]);
                let m = margin_nd(model, &sigma_inv, &y);
                if m < best {
                    best = m;
                    x = y;
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    let verdict = if best >= -MARGIN_TOL { Verdict::Certified } else { Verdict::RefutedOnWindow };
    Ok(SlcCertificate {
        kind: CertKind::ContinuousNd,
        verdict,
        alpha_star: None,
        candidate_alpha: None,
        sigma: Some(sigma.to_rows()),
        sigma_inv: Some(sigma_inv.to_rows()),
        margin: best,
        argmin: x,
        window: (0..d).map(|i| [lo[i], hi[i]]).collect(),
        grid_points: total,
        tolerance: MARGIN_TOL,
        notes: Vec::new(),
    })
}

/// Ratio differences f(n+1)/f(n+2) − f(n)/f(n+1), n = 0..K−2.
pub fn ratio_differences(f: &[f64]) -> Vec<f64> {
    (0..f.len().saturating_sub(2)).map(|n| f[n + 1] / f[n + 2] - f[n] / f[n + 1]).collect()
}

/// α* = max(f(1)/f(0), 1 / min_n [f(n+1)/f(n+2) − f(n)/f(n+1)]).
pub fn certify_slc_discrete(pmf: &DiscretePmf, candidate_alpha: Option<f64>) -> Result<SlcCertificate> {
    pmf.require_positive()?;
    let f = pmf.probs();
    let k_max = pmf.truncation_index();
    if k_max < 1 {
        return Err(Error::InvalidArgument("SLC needs at least two support points".into()));
    }
    if let Some(a) = candidate_alpha {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}")));
        }
    }
    let r0 = f[1] / f[0];
    let d = ratio_differences(f);
    let mut notes = Vec::new();
    let (margin, argmin, refuted) = if d.is_empty() {
        notes.push("two-point support: only f(1) ≤ α f(0) applies".into());
        (f64::INFINITY, 0usize, false)
    } else {
        let (n, &m) = d.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        // indistinguishable from 0 at the rounding level of the ratios
        let floor = 1e-10 * (f[n + 1] / f[n + 2]).abs();
        (m, n, m <= floor)
    };
    let alpha_star = if refuted { None } else { Some(r0.max(1.0 / margin)) };
    let mut verdict = match (alpha_star, candidate_alpha) {
        (None, _) => Verdict::RefutedOnWindow,
        (Some(_), None) => Verdict::Certified,
        (Some(a), Some(c)) => {
            if c >= a * (1.0 - ALPHA_RTOL) {
                Verdict::Certified
            } else {
                Verdict::RefutedOnWindow
            }
        }
    };
    if refuted {
        notes.push(format!("ratio difference {margin:.3e} at n = {argmin}: no finite α"));
    }
    if pmf.support() == Support::Naturals && d.len() >= 2 && argmin == d.len() - 1 && verdict == Verdict::Certified {
        let prev = d[d.len() - 2];
        if margin < prev - 1e-9 * prev.abs() {
            verdict = Verdict::UndeterminedTail;
            notes.push("minimizing n sits at the truncation edge".into());
        }
    }
    Ok(SlcCertificate {
        kind: CertKind::Discrete,
        verdict,
        alpha_star,
        candidate_alpha,
        sigma: None,
        sigma_inv: None,
        margin,
        argmin: vec![argmin as f64],
        window: vec![[0.0, k_max as f64]],
        grid_points: k_max + 1,
        tolerance: ALPHA_RTOL,
        notes,
    })
}

/// SLC_N(α): u(n) = ∇_N f(n)/f(n) + (n − μ)/α non-increasing on {0..N}.
/// Also reports the least such α.
pub fn certify_slc_binomial(pmf: &DiscretePmf, alpha: f64) -> Result<SlcCertificate> {
    let n =
        pmf.finite_n().ok_or_else(|| Error::InvalidArgument("binomial-type SLC needs finite support {0..N}".into()))?;
    pmf.require_positive()?;
    let u = score_u_discrete(pmf, alpha, pmf.mean(), DiscreteOperator::NablaN)?;
    let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let (worst_n, worst) = u
        .windows(2)
        .enumerate()
        .map(|(k, w)| (k, w[1] - w[0]))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let verdict = if worst <= tol { Verdict::Certified } else { Verdict::RefutedOnWindow };
    // u = r + (n − μ)/α with r = ∇_N f / f, so u is non-increasing iff
    // r(n) − r(n+1) ≥ 1/α for all n
    let r = score_ratio(pmf, DiscreteOperator::NablaN)?;
    let min_drop = r.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let alpha_star = if n >= 1 && min_drop > 0.0 && min_drop.is_finite() { Some(1.0 / min_drop) } else { None };
    Ok(SlcCertificate {
        kind: CertKind::Binomial,
        verdict,
        alpha_star,
        candidate_alpha: Some(alpha),
        sigma: None,
        sigma_inv: None,
        margin: -worst,
        argmin: vec![worst_n as f64],
        window: vec![[0.0, n as f64]],
        grid_points: n + 1,
        tolerance: tol,
        notes: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// λ_min(Σ − Cov)
    pub margin: f64,
    /// ‖Σ − Cov‖_F
    pub frobenius: f64,
    pub equality: bool,
    pub tolerance: f64,
    /// Σⱼⱼ − Var(Xⱼ)
    pub per_coordinate: Vec<f64>,
    /// largest entrywise covariance error
    pub cov_error: f64,
}

/// Theorem-style check Cov(X, X) ⪯ Σ with a near-equality flag.
pub fn covariance_dominance(summary: &Summary, sigma: &SymMat) -> Result<DominanceReport> {
    let d = summary.dim();
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.dim() });
    }
    require_spd(sigma)?;
    let cov = summary.cov_matrix();
    let diff = sigma.sub(&cov);
    let margin = loewner_margin(sigma, &cov);
    let frobenius = diff.norm();
    let scale = sigma.diag().iter().fold(0.0f64, |m, &v| m.max(v));
    let cov_error = summary.cov_error_max();
    let tolerance = 1e-6 * scale + cov_error;
    Ok(DominanceReport {
        margin,
        frobenius,
        equality: margin.abs() <= tolerance && frobenius <= tolerance,
        tolerance,
        per_coordinate: (0..d).map(|j| diff.get(j, j)).collect(),
        cov_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{summarize, summarize_pmf};
    use crate::model::{
        builtin_binomial, builtin_gaussian, builtin_poisson, builtin_poly_potential, ContinuousModel, Domain, Potential,
    };

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn logistic() -> ContinuousModel {
        ContinuousModel::new(Potential::Logistic { location: 0.0 }, Domain::interval(-20.0, 20.0)).unwrap()
    }

    #[test]
    fn gaussian_alpha_is_variance() {
        for s2 in [0.5, 1.0, 2.0, 5.0] {
            let m = builtin_gaussian(&[0.0], &SymMat::scalar(s2)).unwrap();
            let c = certify_slc_1d(&m, 2001, &spec()).unwrap();
            assert_eq!(c.verdict, Verdict::Certified);
            assert!((c.alpha_star.unwrap() - s2).abs() < 1e-9);
        }
    }

    #[test]
    fn quartic_alpha_one_at_origin() {
        let m = builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap();
        let c = certify_slc_1d(&m, 2001, &spec()).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!((c.alpha_star.unwrap() - 1.0).abs() < 1e-9);
        assert!(c.argmin[0].abs() < 1e-4);
        let c2 = certify_slc_1d(&m, 4002, &spec()).unwrap();
        assert!((c.alpha_star.unwrap() - c2.alpha_star.unwrap()).abs() < 1e-6);
        assert!(check_alpha_1d(&c, 1.0).is_certified());
        assert!(check_alpha_1d(&c, 1.5).is_certified());
        assert!(!check_alpha_1d(&c, 1.0 - 2e-6).is_certified());
    }

    #[test]
    fn logistic_is_undetermined() {
        let c = certify_slc_1d(&logistic(), 2001, &spec()).unwrap();
        assert_eq!(c.verdict, Verdict::UndeterminedTail);
        // oracle: 2eˣ/(1+eˣ)² at the window edge
        let x: f64 = 20.0;
        let closed = 2.0 * x.exp() / (1.0 + x.exp()).powi(2);
        assert!(c.margin < 1e-3 && c.margin > 0.0);
        assert!((c.margin - closed).abs() < 1e-3 * closed.max(1e-12) + 1e-15);
    }

    #[test]
    fn nd_examples() {
        let g = builtin_gaussian(&[0.0, 0.0], &SymMat::identity(2)).unwrap();
        let c = certify_slc_nd(&g, &SymMat::identity(2), 41, &spec()).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!(c.margin.abs() < 1e-12);
        let c = certify_slc_nd(&g, &SymMat::scalar(0.5), 41, &spec());
        assert!(matches!(c, Err(Error::DimensionMismatch { .. })));
        let c = certify_slc_nd(&g, &SymMat::from_diag(&[0.5, 0.5]), 41, &spec()).unwrap();
        assert_eq!(c.verdict, Verdict::RefutedOnWindow);
        assert!((c.margin + 1.0).abs() < 1e-12);

        let q = crate::model::parse_config(
            r#"{family: "poly_potential", mu: [0, 0], Sigma: [[1, 0], [0, 1]], coeffs: [[0, 0, 0, 0, 1], [0, 0, 0, 0, 1]]}"#,
        )
        .unwrap();
        let crate::model::Model::Continuous(q) = q else { panic!() };
        let c = certify_slc_nd(&q, &SymMat::identity(2), 41, &spec()).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        // oracle: λ_min(diag(12x², 12y²)) = 12 min(x², y²)
        let expect = 12.0 * c.argmin[0].powi(2).min(c.argmin[1].powi(2));
        assert!((c.margin - expect).abs() < 1e-12);
        assert!(c.margin < 1e-9);
    }

    #[test]
    fn discrete_examples() {
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let c = certify_slc_discrete(&p, None).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!((c.alpha_star.unwrap() - 3.0).abs() < 1e-10);

        // f(n) ∝ 1/(n!)²: ratio difference (2n+3), f(1)/f(0) = 1
        let mut w: Vec<f64> = (0..60).map(|n| 1.0 / crate::numeric::factorial(n).powi(2)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let pmf = DiscretePmf::from_probs(w.clone(), Support::Naturals, 1e-12).unwrap();
        let c = certify_slc_discrete(&pmf, None).unwrap();
        assert!((c.alpha_star.unwrap() - 1.0).abs() < 1e-12);
        for (n, dn) in ratio_differences(&w).iter().enumerate().take(50) {
            assert!((dn - (2 * n + 3) as f64).abs() < 1e-9 * dn);
        }

        let q: f64 = 0.6;
        let geo: Vec<f64> = (0..80).map(|n| (1.0 - q) * q.powi(n)).collect();
        let tail = q.powi(80);
        let pmf = DiscretePmf::from_probs(geo, Support::Naturals, tail * 1.01).unwrap();
        let c = certify_slc_discrete(&pmf, None).unwrap();
        assert_eq!(c.verdict, Verdict::RefutedOnWindow);
        assert!(c.alpha_star.is_none());

        assert!(certify_slc_discrete(&p, Some(3.0)).unwrap().is_certified());
        assert!(!certify_slc_discrete(&p, Some(2.9)).unwrap().is_certified());
    }

    #[test]
    fn truncation_edge_minimum_is_undetermined() {
        // f(n)/f(n+1) = 1 + √(n+1): ratio differences √(n+2) − √(n+1) shrink toward the edge
        let mut w = vec![1.0f64];
        for n in 0..29 {
            let next = w[n] / (1.0 + ((n + 1) as f64).sqrt());
            w.push(next);
        }
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / s).collect();
        let pmf = DiscretePmf::from_probs(w, Support::Naturals, 1e-6).unwrap();
        let c = certify_slc_discrete(&pmf, None).unwrap();
        assert_eq!(c.verdict, Verdict::UndeterminedTail);
    }

    #[test]
    fn binomial_examples() {
        let b = builtin_binomial(10, 0.3).unwrap();
        let c = certify_slc_binomial(&b, 3.0).unwrap();
        assert_eq!(c.verdict, Verdict::Certified);
        assert!((c.alpha_star.unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(certify_slc_binomial(&b, 2.0).unwrap().verdict, Verdict::RefutedOnWindow);
        // oracle for α = 2: u(n+1) − u(n) = 1/2 − 1/3 > 0 everywhere
        let c = certify_slc_binomial(&b, 2.0).unwrap();
        assert!((c.margin + (0.5 - 1.0 / 3.0)).abs() < 1e-9);
        let two = builtin_binomial(1, 0.5).unwrap();
        assert!(certify_slc_binomial(&two, 1.0).unwrap().is_certified());
        let p = builtin_poisson(2.0, 1e-12).unwrap();
        assert!(certify_slc_binomial(&p, 2.0).is_err());
    }

    #[test]
    fn dominance_examples() {
        let sigma = SymMat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let g = builtin_gaussian(&[0.0, 0.0], &sigma).unwrap();
        let s = summarize(&g, 2, &spec()).unwrap();
        let r = covariance_dominance(&s, &sigma).unwrap();
        assert!(r.equality && r.margin.abs() < 1e-8);

        let q = builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap();
        let s = summarize(&q, 2, &spec()).unwrap();
        let r = covariance_dominance(&s, &SymMat::scalar(1.0)).unwrap();
        assert!(!r.equality);
        assert!((r.margin - (1.0 - 0.278_843_988_417_740_409)).abs() < 1e-9);

        let n = builtin_gaussian(&[0.0], &SymMat::scalar(1.0)).unwrap();
        let s = summarize(&n, 2, &spec()).unwrap();
        let r = covariance_dominance(&s, &SymMat::scalar(0.5)).unwrap();
        assert!((r.margin + 0.5).abs() < 1e-8);
        assert!(covariance_dominance(&s, &SymMat::identity(2)).is_err());

        let b = builtin_binomial(10, 0.3).unwrap();
        let s = summarize_pmf(&b, 2).unwrap();
        assert!(covariance_dominance(&s, &SymMat::scalar(2.1)).unwrap().equality);
    }
}
