//! Signed gaps of the variance and Stein-type inequalities, the U-ratio over a
//! finite dictionary, the moment chain and the characterization diagnostic.
//!
//! Every gap is oriented so that the inequality reads `gap ≥ 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calculus::{nabla_n_star, nabla_star, score_u_discrete, DiscreteOperator, TailConvention};
use crate::certify::{certify_slc_binomial, CertKind, SlcCertificate};
use crate::engine::{sample, summarize_pmf, Estimate, Integrator, QuadratureSpec};
use crate::error::{Error, Result};
use crate::linalg::{max_generalized_eigen, require_spd, SymMat, MAX_DIM};
use crate::model::{ContinuousModel, DiscretePmf, Model, Support};
use crate::numeric::{factorial, NeumaierSum};
use crate::testfn::{check_sequence, Monotone, TestFunction};

/// Default relative equality threshold.
pub const DEFAULT_EQUALITY_TOL: f64 = 1e-6;

/// Default number of sample pairs for the continuous Chebyshev cross-check.
pub const DEFAULT_PAIRS: usize = 20_000;

const MAX_CHAIN_R: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    BrascampLieb,
    WeightedPoincare,
    Chebyshev,
    SteinGaussian,
    SteinPoisson,
    SteinBinomial,
    MomentChain,
    URatio,
}

impl InequalityId {
    pub const ALL: [InequalityId; 8] = [
        InequalityId::BrascampLieb,
        InequalityId::WeightedPoincare,
        InequalityId::Chebyshev,
        InequalityId::SteinGaussian,
        InequalityId::SteinPoisson,
        InequalityId::SteinBinomial,
        InequalityId::MomentChain,
        InequalityId::URatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::BrascampLieb => "brascamp_lieb",
            InequalityId::WeightedPoincare => "weighted_poincare",
            InequalityId::Chebyshev => "chebyshev",
            InequalityId::SteinGaussian => "stein_gaussian",
            InequalityId::SteinPoisson => "stein_poisson",
            InequalityId::SteinBinomial => "stein_binomial",
            InequalityId::MomentChain => "moment_chain",
            InequalityId::URatio => "u_ratio",
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown inequality '{s}'")))
    }
}

/// One line of a vector-valued report (the moment chain).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub error_bound: f64,
    pub equality_tol: f64,
    pub equality: bool,
}

/// A second, algebraically equivalent evaluation of the gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub method: String,
    pub value: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub agrees: bool,
}

impl CrossCheck {
    fn new(method: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        let difference = value - reference;
        CrossCheck { method: method.into(), value, difference, tolerance, agrees: difference.abs() <= tolerance }
    }
}

/// Echo of what a gap was evaluated at.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapInputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_functions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub inequality: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    /// lhs − rhs; for vector reports the smallest entry gap
    pub gap: f64,
    pub error_bound: f64,
    pub equality: bool,
    pub equality_tol: f64,
    /// relative threshold that `equality_tol` was scaled from
    pub equality_rel: f64,
    /// false when the inequality is evaluated outside the setting it is proven in
    pub theorem: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<GapEntry>,
    /// Û for the U-ratio
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    /// dictionary coefficients of the maximizing g
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximizer: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheck>,
    pub inputs: GapInputs,
    pub diagnostic: String,
}

fn describe(gap: f64, error: f64, equality: bool) -> String {
    if equality {
        "equality within tolerance".into()
    } else if gap > error {
        "strict inequality".into()
    } else if gap >= -error {
        "gap within error bound of zero".into()
    } else {
        "violated beyond error bound".into()
    }
}

impl GapReport {
    fn scalar(inequality: InequalityId, lhs: f64, rhs: f64, gap: Estimate, scale: f64, rel: f64) -> Self {
        let equality_tol = rel * scale;
        let equality = gap.value.abs() <= equality_tol;
        GapReport {
            inequality,
            lhs,
            rhs,
            gap: gap.value,
            error_bound: gap.error,
            equality,
            equality_tol,
            equality_rel: rel,
            theorem: true,
            entries: Vec::new(),
            estimate: None,
            maximizer: None,
            cross_check: None,
            inputs: GapInputs::default(),
            diagnostic: describe(gap.value, gap.error, equality),
        }
    }

    /// Some entry (or the scalar gap) lies below −error_bound.
    pub fn violated(&self) -> bool {
        if self.entries.is_empty() {
            self.gap < -self.error_bound
        } else {
            self.entries.iter().any(|e| e.gap < -e.error_bound)
        }
    }

    /// Every gap exceeds `factor` times its error bound.
    pub fn strictly_positive(&self, factor: f64) -> bool {
        if self.entries.is_empty() {
            self.gap > factor * self.error_bound
        } else {
            self.entries.iter().all(|e| e.gap > factor * e.error_bound)
        }
    }

    /// Re-scales the equality threshold to a new relative tolerance.
    pub fn with_equality_tol(mut self, rel: f64) -> Self {
        let factor = if self.equality_rel > 0.0 { rel / self.equality_rel } else { 0.0 };
        self.equality_rel = rel;
        for e in &mut self.entries {
            e.equality_tol *= factor;
            e.equality = e.gap.abs() <= e.equality_tol;
        }
        if self.entries.is_empty() {
            self.equality_tol *= factor;
            self.equality = self.gap.abs() <= self.equality_tol;
        } else {
            self.equality_tol = self.entries.iter().map(|e| e.equality_tol).fold(0.0, f64::max);
            self.equality = self.entries.iter().all(|e| e.equality);
        }
        self.diagnostic = describe(self.gap, self.error_bound, self.equality);
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be positive and finite, got {alpha}")))
    }
}

fn need_1d(model: &ContinuousModel) -> Result<()> {
    if model.dim() == 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: 1, got: model.dim() })
    }
}

fn model_mean(it: &Integrator) -> Result<Vec<Estimate>> {
    it.expect_many(it.model().dim(), |x: &[f64], out: &mut [f64]| {
        out.copy_from_slice(x);
        Ok(())
    })
}

fn needs_mean(fs: &[&TestFunction]) -> bool {
    fs.iter().any(|f| matches!(f, TestFunction::CenteredMonomial { center: None, .. }))
}

fn require_differentiable(g: &TestFunction, dim: usize) -> Result<()> {
    g.check_dim(dim)?;
    if !g.is_differentiable() {
        return Err(Error::InvalidArgument(format!("{} has no gradient", g.id())));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Weight<'s> {
    InverseHessian,
    Matrix(&'s SymMat),
}

/// E[∇gᵀ W ∇g] and Var g with W = (φ″)⁻¹ or a fixed Σ.
fn variance_gap(it: &Integrator, g: &TestFunction, weight: Weight) -> Result<(Estimate, Estimate, Estimate, Vec<f64>)> {
    let model = it.model();
    let d = model.dim();
    require_differentiable(g, d)?;
    let mean: Vec<f64> = if needs_mean(&[g]) { model_mean(it)?.iter().map(|e| e.value).collect() } else { Vec::new() };
    let g = g.resolved(&mean);
    let eg = it.expect(|x| g.value(x))?;
    let c = eg.value;
    let est = it.expect_many(3, |x: &[f64], out: &mut [f64]| {
        let mut grad = [0.0; MAX_DIM];
        g.gradient(x, &mut grad[..d]);
        let q = match weight {
            Weight::Matrix(s) => s.quad_form(&grad[..d]),
            Weight::InverseHessian => {
                let h = model.hessian(x)?;
                let chol = h.cholesky().ok_or_else(|| Error::SingularHessian(x.to_vec()))?;
                chol.inv_quad_form(&grad[..d])
            }
        };
        let dev = g.value(x) - c;
        out[0] = q;
        out[1] = dev * dev;
        out[2] = q - dev * dev;
        Ok(())
    })?;
    // a centering error δ inflates the variance estimate by δ² only
    let shift = eg.error * eg.error;
    let var = Estimate { value: est[1].value, error: est[1].error + shift };
    let gap = Estimate { value: est[2].value, error: est[2].error + shift };
    Ok((est[0], var, gap, mean))
}

pub fn brascamp_lieb_gap(model: &ContinuousModel, g: &TestFunction, spec: &QuadratureSpec) -> Result<GapReport> {
    brascamp_lieb_gap_with(&Integrator::new(model, spec)?, g)
}

/// gap = E[∇gᵀ (φ″)⁻¹ ∇g] − Var g(X), on a prepared integrator.
pub fn brascamp_lieb_gap_with(it: &Integrator, g: &TestFunction) -> Result<GapReport> {
    let (lhs, rhs, gap, mean) = variance_gap(it, g, Weight::InverseHessian)?;
    let scale = lhs.value.abs().max(rhs.value.abs());
    let mut r = GapReport::scalar(InequalityId::BrascampLieb, lhs.value, rhs.value, gap, scale, DEFAULT_EQUALITY_TOL);
    r.inputs = GapInputs { mean, test_functions: vec![g.id()], ..Default::default() };
    Ok(r)
}

pub fn weighted_poincare_gap(
    model: &ContinuousModel,
    sigma: &SymMat,
    g: &TestFunction,
    spec: &QuadratureSpec,
) -> Result<GapReport> {
    weighted_poincare_gap_with(&Integrator::new(model, spec)?, sigma, g)
}

/// gap = E[∇gᵀ Σ ∇g] − Var g(X).
pub fn weighted_poincare_gap_with(it: &Integrator, sigma: &SymMat, g: &TestFunction) -> Result<GapReport> {
    let d = it.model().dim();
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.dim() });
    }
    require_spd(sigma)?;
    let (lhs, rhs, gap, mean) = variance_gap(it, g, Weight::Matrix(sigma))?;
    let scale = lhs.value.abs().max(rhs.value.abs());
    let mut r =
        GapReport::scalar(InequalityId::WeightedPoincare, lhs.value, rhs.value, gap, scale, DEFAULT_EQUALITY_TOL);
    r.inputs = GapInputs { sigma: Some(sigma.to_rows()), mean, test_functions: vec![g.id()], ..Default::default() };
    Ok(r)
}

/// Common direction of two monotonicity declarations.
fn comonotone(u: &TestFunction, v: &TestFunction) -> Result<Monotone> {
    let up = |m: Monotone| matches!(m, Monotone::Strict | Monotone::Nondecreasing);
    let (mu, mv) = (u.monotone(), v.monotone());
    if up(mu) && up(mv) {
        Ok(Monotone::Nondecreasing)
    } else if mu == Monotone::Nonincreasing && mv == Monotone::Nonincreasing {
        Ok(Monotone::Nonincreasing)
    } else {
        Err(Error::NotComonotone(format!("{} is {mu:?}, {} is {mv:?}", u.id(), v.id())))
    }
}

/// Σ_{i<j} wᵢwⱼ (aᵢ − aⱼ)(bᵢ − bⱼ), which is Cov(a, b) for a probability vector w.
pub fn two_copy_covariance(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            acc.add(w[i] * w[j] * (a[i] - a[j]) * (b[i] - b[j]));
        }
    }
    acc.value()
}

struct DiscreteCov {
    cov: f64,
    var_u: f64,
    var_v: f64,
    rounding: f64,
}

fn discrete_cov(f: &[f64], u: &[f64], v: &[f64]) -> DiscreteCov {
    let eu = NeumaierSum::sum(f.iter().zip(u).map(|(p, x)| p * x));
    let ev = NeumaierSum::sum(f.iter().zip(v).map(|(p, x)| p * x));
    let cov = NeumaierSum::sum((0..f.len()).map(|k| f[k] * (u[k] - eu) * (v[k] - ev)));
    let var_u = NeumaierSum::sum((0..f.len()).map(|k| f[k] * (u[k] - eu).powi(2)));
    let var_v = NeumaierSum::sum((0..f.len()).map(|k| f[k] * (v[k] - ev).powi(2)));
    let mag: f64 = (0..f.len()).map(|k| f[k] * (u[k].abs() + eu.abs()) * (v[k].abs() + ev.abs())).sum();
    DiscreteCov { cov, var_u, var_v, rounding: 16.0 * f64::EPSILON * mag }
}

/// Cov(u(X), v(X)) ≥ 0 for comonotone u, v on a pmf, cross-checked by the
/// exact two-copy double sum.
pub fn chebyshev_cov_discrete(pmf: &DiscretePmf, u: &TestFunction, v: &TestFunction) -> Result<GapReport> {
    let want = comonotone(u, v)?;
    let len = pmf.probs().len();
    let mean = [pmf.mean()];
    let (u, v) = (u.resolved(&mean), v.resolved(&mean));
    u.check_monotone_seq(want, len)?;
    v.check_monotone_seq(want, len)?;
    let (us, vs) = (u.sequence(len)?, v.sequence(len)?);
    let f = pmf.probs();
    let c = discrete_cov(f, &us, &vs);
    let umax = us.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let vmax = vs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let error = c.rounding + 4.0 * pmf.tail_bound() * umax * vmax;
    let scale = (c.var_u * c.var_v).sqrt();
    let gap = Estimate { value: c.cov, error };
    let mut r = GapReport::scalar(InequalityId::Chebyshev, c.cov, 0.0, gap, scale, DEFAULT_EQUALITY_TOL);
    r.equality_tol += c.rounding;
    r.equality = r.gap.abs() <= r.equality_tol;
    r.diagnostic = describe(r.gap, r.error_bound, r.equality);
    let two = two_copy_covariance(f, &us, &vs);
    r.cross_check = Some(CrossCheck::new("two_copy_double_sum", two, c.cov, 1e-12_f64.max(4.0 * c.rounding)));
    r.inputs = GapInputs { mean: mean.to_vec(), test_functions: vec![u.id(), v.id()], ..Default::default() };
    Ok(r)
}

pub fn chebyshev_cov_continuous(
    model: &ContinuousModel,
    u: &TestFunction,
    v: &TestFunction,
    pairs: usize,
    seed: u64,
    spec: &QuadratureSpec,
) -> Result<GapReport> {
    chebyshev_cov_continuous_with(&Integrator::new(model, spec)?, u, v, pairs, seed)
}

/// Cov(u(X), v(X)) by quadrature, cross-checked by the paired-sample
/// estimate ½ E[(u(X₁) − u(X₂))(v(X₁) − v(X₂))] over `pairs` seeded pairs.
pub fn chebyshev_cov_continuous_with(
    it: &Integrator,
    u: &TestFunction,
    v: &TestFunction,
    pairs: usize,
    seed: u64,
) -> Result<GapReport> {
    let model = it.model();
    need_1d(model)?;
    let want = comonotone(u, v)?;
    let mean: Vec<f64> = if needs_mean(&[u, v]) { vec![model_mean(it)?[0].value] } else { Vec::new() };
    let (u, v) = (u.resolved(&mean), v.resolved(&mean));
    let w = it.window();
    u.check_monotone_on(want, w.lo[0], w.hi[0])?;
    v.check_monotone_on(want, w.lo[0], w.hi[0])?;
    let first = it.expect_many(2, |x: &[f64], out: &mut [f64]| {
        out[0] = u.value(x);
        out[1] = v.value(x);
        Ok(())
    })?;
    let (eu, ev) = (first[0].value, first[1].value);
    let est = it.expect_many(3, |x: &[f64], out: &mut [f64]| {
        let (a, b) = (u.value(x) - eu, v.value(x) - ev);
        out[0] = a * b;
        out[1] = a * a;
        out[2] = b * b;
        Ok(())
    })?;
    // centering errors enter the covariance only through their product
    let error = est[0].error + first[0].error * first[1].error;
    let gap = Estimate { value: est[0].value, error };
    let scale = (est[1].value * est[2].value).sqrt();
    let mut r = GapReport::scalar(InequalityId::Chebyshev, est[0].value, 0.0, gap, scale, DEFAULT_EQUALITY_TOL);
    if pairs > 0 {
        let xs = sample(model, 2 * pairs, seed, it.spec())?;
        let terms: Vec<f64> = xs
            .chunks_exact(2)
            .map(|p| 0.5 * (u.value(&[p[0]]) - u.value(&[p[1]])) * (v.value(&[p[0]]) - v.value(&[p[1]])))
            .collect();
        let n = terms.len() as f64;
        let m = NeumaierSum::sum(terms.iter().copied()) / n;
        let sd = (terms.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        r.cross_check = Some(CrossCheck::new("paired_samples", m, est[0].value, 4.0 * sd / n.sqrt() + error));
    }
    r.inputs = GapInputs {
        mean,
        test_functions: vec![u.id(), v.id()],
        pairs: Some(pairs),
        seed: Some(seed),
        ..Default::default()
    };
    Ok(r)
}

pub fn stein_gap_gaussian(
    model: &ContinuousModel,
    alpha: f64,
    v: &TestFunction,
    spec: &QuadratureSpec,
) -> Result<GapReport> {
    stein_gap_gaussian_with(&Integrator::new(model, spec)?, alpha, v)
}

/// gap = α E[v′(X)] − E[(X − μ) v(X)] for strictly increasing v, with the
/// score form −α E[u v] (plus boundary terms on a bounded domain) as cross-check.
pub fn stein_gap_gaussian_with(it: &Integrator, alpha: f64, v: &TestFunction) -> Result<GapReport> {
    let model = it.model();
    need_1d(model)?;
    check_alpha(alpha)?;
    require_differentiable(v, 1)?;
    let mu_est = model_mean(it)?[0];
    let mu = mu_est.value;
    let v = v.resolved(&[mu]);
    let w = it.window();
    v.check_monotone_on(Monotone::Strict, w.lo[0], w.hi[0])?;
    let est = it.expect_many(5, |x: &[f64], out: &mut [f64]| {
        let mut dv = [0.0];
        v.gradient(x, &mut dv);
        let vx = v.value(x);
        let u = -model.gradient(x)?[0] + (x[0] - mu) / alpha;
        out[0] = alpha * dv[0];
        out[1] = (x[0] - mu) * vx;
        out[2] = alpha * dv[0] - (x[0] - mu) * vx;
        out[3] = u * vx;
        out[4] = vx;
        Ok(())
    })?;
    let error = est[2].error + mu_est.error * est[4].value.abs();
    let gap = Estimate { value: est[2].value, error };
    let scale = alpha.max(est[0].value.abs()).max(est[1].value.abs());
    let mut r =
        GapReport::scalar(InequalityId::SteinGaussian, est[0].value, est[1].value, gap, scale, DEFAULT_EQUALITY_TOL);
    // α E[v′] = α [v f]_a^b − α E[(f′/f) v]
    let dom = model.domain();
    let edge = |t: f64| if t.is_finite() { v.value(&[t]) * model.density(&[t]) } else { 0.0 };
    let boundary = alpha * (edge(dom.hi[0]) - edge(dom.lo[0]));
    let score_form = -alpha * est[3].value + boundary;
    let tol = alpha * est[3].error + error + 1e-12 * scale;
    r.cross_check = Some(CrossCheck::new("score_covariance", score_form, r.gap, tol));
    r.inputs = GapInputs { alpha: Some(alpha), mean: vec![mu], test_functions: vec![v.id()], ..Default::default() };
    Ok(r)
}

struct DiscreteStein {
    lhs: f64,
    rhs: f64,
    gap: f64,
    rounding: f64,
    values: Vec<f64>,
}

fn discrete_stein(f: &[f64], mu: f64, alpha: f64, vs: &[f64], dv: &[f64]) -> DiscreteStein {
    // Σ f (k − μ) = 0, so centering v leaves the sum unchanged while removing
    // its sensitivity to the rounding of μ (which would enter as δμ·E[v])
    let vbar = NeumaierSum::sum(f.iter().zip(vs).map(|(p, x)| p * x));
    let lhs_t: Vec<f64> = (0..f.len()).map(|k| alpha * f[k] * dv[k]).collect();
    let rhs_t: Vec<f64> = (0..f.len()).map(|k| f[k] * (k as f64 - mu) * (vs[k] - vbar)).collect();
    let lhs = NeumaierSum::sum(lhs_t.iter().copied());
    let rhs = NeumaierSum::sum(rhs_t.iter().copied());
    let gap = NeumaierSum::sum(lhs_t.iter().zip(&rhs_t).map(|(a, b)| a - b));
    let mag: f64 = lhs_t.iter().chain(&rhs_t).map(|t| t.abs()).sum::<f64>()
        + f.iter().zip(vs).map(|(p, x)| p * x.abs()).sum::<f64>() * mu.abs();
    DiscreteStein { lhs, rhs, gap, rounding: 16.0 * f64::EPSILON * mag, values: vs.to_vec() }
}

fn strict_values(v: &TestFunction, mu: f64, len: usize) -> Result<(TestFunction, Vec<f64>)> {
    let v = v.resolved(&[mu]);
    let vs = v.sequence(len)?;
    check_sequence(&vs, Monotone::Strict).map_err(|k| {
        Error::NotIncreasing(format!("{}: not strictly increasing between k = {k} and k = {}", v.id(), k + 1))
    })?;
    Ok((v, vs))
}

/// gap = α Σ f ∇*v − Σ f (k − μ) v with ∇*v(K) = 0.
///
/// The error bound covers rounding and, for truncations of a pmf on ℕ, the
/// neglected tail together with the boundary term α f(K) v(K) that the
/// closure ∇*v(K) = 0 drops.
pub fn stein_gap_poisson(pmf: &DiscretePmf, alpha: f64, v: &TestFunction) -> Result<GapReport> {
    check_alpha(alpha)?;
    pmf.require_positive()?;
    let f = pmf.probs();
    let mu = pmf.mean();
    let (v, vs) = strict_values(v, mu, f.len())?;
    let dv = nabla_star(&vs, TailConvention::ConstantExtension)?;
    let s = discrete_stein(f, mu, alpha, &vs, &dv);
    let k = f.len() - 1;
    let truncation = match pmf.support() {
        Support::Naturals => {
            let dmax = dv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let wmax = (0..f.len()).map(|j| ((j as f64 - mu) * vs[j]).abs()).fold(0.0, f64::max);
            let step = if k > 0 { (vs[k] - vs[k - 1]).abs() } else { 0.0 };
            pmf.tail_bound() * (alpha * dmax + wmax) + alpha * f[k] * vs[k].abs().max(step)
        }
        Support::Finite(_) => 0.0,
    };
    let error = s.rounding + truncation;
    let scale = alpha.max(s.lhs.abs()).max(s.rhs.abs());
    let mut r = GapReport::scalar(
        InequalityId::SteinPoisson,
        s.lhs,
        s.rhs,
        Estimate { value: s.gap, error },
        scale,
        DEFAULT_EQUALITY_TOL,
    );
    let u = score_u_discrete(pmf, alpha, mu, DiscreteOperator::Nabla)?;
    let cross = -alpha * two_copy_covariance(f, &u, &s.values);
    r.cross_check = Some(CrossCheck::new("score_two_copy", cross, s.gap, 1e-10 * scale));
    r.inputs = GapInputs { alpha: Some(alpha), mean: vec![mu], test_functions: vec![v.id()], ..Default::default() };
    Ok(r)
}

/// gap = α Σ f ∇*_N v − Σ f (n − μ) v on {0..N}; exact finite sums.
pub fn stein_gap_binomial(pmf: &DiscretePmf, alpha: f64, v: &TestFunction) -> Result<GapReport> {
    check_alpha(alpha)?;
    let n = pmf
        .finite_n()
        .ok_or_else(|| Error::InvalidArgument("binomial Stein gap needs finite support {0..N}".into()))?;
    pmf.require_positive()?;
    let f = pmf.probs();
    let mu = pmf.mean();
    let (v, vs) = strict_values(v, mu, f.len())?;
    let dv = nabla_n_star(&vs, n)?;
    let s = discrete_stein(f, mu, alpha, &vs, &dv);
    let scale = alpha.max(s.lhs.abs()).max(s.rhs.abs());
    let mut r = GapReport::scalar(
        InequalityId::SteinBinomial,
        s.lhs,
        s.rhs,
        Estimate { value: s.gap, error: s.rounding },
        scale,
        DEFAULT_EQUALITY_TOL,
    );
    let u = score_u_discrete(pmf, alpha, mu, DiscreteOperator::NablaN)?;
    let cross = -alpha * two_copy_covariance(f, &u, &s.values);
    r.cross_check = Some(CrossCheck::new("score_two_copy", cross, s.gap, 1e-10 * scale));
    r.inputs = GapInputs {
        alpha: Some(alpha),
        mean: vec![mu],
        test_functions: vec![v.id()],
        support_n: Some(n),
        ..Default::default()
    };
    Ok(r)
}

/// (2r)!/r! · (α/2)^r
pub fn closed_moment_bound(alpha: f64, r: usize) -> f64 {
    factorial(2 * r as u32) / factorial(r as u32) * (alpha / 2.0).powi(r as i32)
}

fn chain_report(alpha: f64, r_max: usize, moments: &[Estimate], theorem: bool) -> Result<GapReport> {
    let mut entries = Vec::with_capacity(2 * r_max);
    for r in 1..=r_max {
        let (prev, cur) = (moments[2 * r - 2], moments[2 * r]);
        if cur.error > 1e-3 * cur.value.abs() {
            return Err(Error::InvalidArgument(format!(
                "r_max = {r_max} too large for truncation accuracy: M{} = {:.3e} ± {:.3e}",
                2 * r,
                cur.value,
                cur.error
            )));
        }
        let floor = alpha.powi(r as i32);
        let mut push = |label: String, lhs: f64, lhs_err: f64| {
            let gap = lhs - cur.value;
            let error_bound = lhs_err + cur.error;
            let equality_tol = DEFAULT_EQUALITY_TOL * floor.max(lhs.abs());
            entries.push(GapEntry {
                label,
                lhs,
                rhs: cur.value,
                gap,
                error_bound,
                equality_tol,
                equality: gap.abs() <= equality_tol,
            });
        };
        let k = (2 * r - 1) as f64;
        push(format!("chain r={r}"), alpha * k * prev.value, alpha * k * prev.error);
        push(format!("closed r={r}"), closed_moment_bound(alpha, r), 0.0);
    }
    let worst = entries.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).expect("r_max ≥ 1").clone();
    let equality = entries.iter().all(|e| e.equality);
    let error_bound = entries.iter().map(|e| e.error_bound).fold(0.0, f64::max);
    let equality_tol = entries.iter().map(|e| e.equality_tol).fold(0.0, f64::max);
    let diagnostic = if theorem {
        describe(worst.gap, worst.error_bound, equality)
    } else {
        format!("{} (exploratory: not a theorem for discrete models)", describe(worst.gap, worst.error_bound, equality))
    };
    Ok(GapReport {
        inequality: InequalityId::MomentChain,
        lhs: worst.lhs,
        rhs: worst.rhs,
        gap: worst.gap,
        error_bound,
        equality,
        equality_tol,
        equality_rel: DEFAULT_EQUALITY_TOL,
        theorem,
        entries,
        estimate: None,
        maximizer: None,
        cross_check: None,
        inputs: GapInputs { alpha: Some(alpha), r_max: Some(r_max), ..Default::default() },
        diagnostic,
    })
}

fn check_r_max(r_max: usize) -> Result<()> {
    if (1..=MAX_CHAIN_R).contains(&r_max) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("r_max must lie in 1..={MAX_CHAIN_R}, got {r_max}")))
    }
}

pub fn moment_chain(model: &ContinuousModel, alpha: f64, r_max: usize, spec: &QuadratureSpec) -> Result<GapReport> {
    moment_chain_with(&Integrator::new(model, spec)?, alpha, r_max)
}

/// Chain gaps α(2r−1)M₂ᵣ₋₂ − M₂ᵣ and closed gaps (2r)!/r!(α/2)^r − M₂ᵣ for
/// centered moments, r = 1..=r_max.
pub fn moment_chain_with(it: &Integrator, alpha: f64, r_max: usize) -> Result<GapReport> {
    need_1d(it.model())?;
    check_alpha(alpha)?;
    check_r_max(r_max)?;
    let s = it.summarize(2 * r_max)?;
    let moments: Vec<Estimate> = (0..=2 * r_max).map(|k| s.moment(k)).collect();
    let mut r = chain_report(alpha, r_max, &moments, true)?;
    r.inputs.mean = s.mean;
    Ok(r)
}

/// Discrete counterpart of [`moment_chain`]; flagged as a non-theorem.
pub fn moment_chain_pmf(pmf: &DiscretePmf, alpha: f64, r_max: usize) -> Result<GapReport> {
    check_alpha(alpha)?;
    check_r_max(r_max)?;
    let s = summarize_pmf(pmf, 2 * r_max)?;
    let moments: Vec<Estimate> = (0..=2 * r_max).map(|k| s.moment(k)).collect();
    let mut r = chain_report(alpha, r_max, &moments, false)?;
    r.inputs.mean = s.mean;
    Ok(r)
}

/// Powers xᵢ^p, p = 1..=k, for every coordinate i.
pub fn poly_dictionary(dim: usize, k: usize) -> Vec<TestFunction> {
    let mut out = Vec::with_capacity(dim * k);
    for axis in 0..dim {
        for p in 1..=k {
            let mut coeffs = vec![0.0; p + 1];
            coeffs[p] = 1.0;
            out.push(TestFunction::Poly { coeffs, axis, monotone: None });
        }
    }
    out
}

/// Parses a dictionary spec; currently only `poly:K`.
pub fn parse_dictionary(spec: &str, dim: usize) -> Result<Vec<TestFunction>> {
    let k = spec
        .strip_prefix("poly:")
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| (1..=8).contains(&k))
        .ok_or_else(|| Error::InvalidArgument(format!("dictionary must be poly:K with 1 ≤ K ≤ 8, got '{spec}'")))?;
    Ok(poly_dictionary(dim, k))
}

pub fn u_ratio_estimate(
    model: &ContinuousModel,
    sigma: &SymMat,
    dictionary: &[TestFunction],
    spec: &QuadratureSpec,
) -> Result<GapReport> {
    u_ratio_estimate_with(&Integrator::new(model, spec)?, sigma, dictionary)
}

/// Û = max_c (cᵀAc)/(cᵀBc) with A the covariance of the dictionary values and
/// B the Gram matrix E[∇gᵢᵀ Σ ∇gⱼ]. Reported gap is 1 − Û.
pub fn u_ratio_estimate_with(it: &Integrator, sigma: &SymMat, dictionary: &[TestFunction]) -> Result<GapReport> {
    let d = it.model().dim();
    let n = dictionary.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.dim() });
    }
    require_spd(sigma)?;
    for g in dictionary {
        require_differentiable(g, d)?;
    }
    let mean: Vec<f64> = if needs_mean(&dictionary.iter().collect::<Vec<_>>()) {
        model_mean(it)?.iter().map(|e| e.value).collect()
    } else {
        Vec::new()
    };
    let dict: Vec<TestFunction> = dictionary.iter().map(|g| g.resolved(&mean)).collect();
    let means = it.expect_many(n, |x: &[f64], out: &mut [f64]| {
        for (o, g) in out.iter_mut().zip(&dict) {
            *o = g.value(x);
        }
        Ok(())
    })?;
    let c: Vec<f64> = means.iter().map(|e| e.value).collect();
    let npair = n * (n + 1) / 2;
    let est = it.expect_many(2 * npair, |x: &[f64], out: &mut [f64]| {
        let mut dev = vec![0.0; n];
        let mut grads = vec![[0.0; MAX_DIM]; n];
        for i in 0..n {
            dev[i] = dict[i].value(x) - c[i];
            dict[i].gradient(x, &mut grads[i][..d]);
        }
        let mut p = 0;
        for i in 0..n {
            for j in 0..=i {
                out[p] = dev[i] * dev[j];
                out[npair + p] = sigma.bilinear(&grads[i][..d], &grads[j][..d]);
                p += 1;
            }
        }
        Ok(())
    })?;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut ea = DMatrix::zeros(n, n);
    let mut eb = DMatrix::zeros(n, n);
    let mut p = 0;
    for i in 0..n {
        for j in 0..=i {
            let (va, vb) = (est[p].value, est[npair + p].value);
            let (xa, xb) = (est[p].error + means[i].error * means[j].error, est[npair + p].error);
            a[(i, j)] = va;
            a[(j, i)] = va;
            b[(i, j)] = vb;
            b[(j, i)] = vb;
            ea[(i, j)] = xa;
            ea[(j, i)] = xa;
            eb[(i, j)] = xb;
            eb[(j, i)] = xb;
            p += 1;
        }
    }
    let trace = b.trace();
    if !(trace > 0.0) {
        return Err(Error::InvalidArgument("Gram matrix B vanishes: every dictionary gradient is zero".into()));
    }
    let tau = 1e-12 * trace / n as f64;
    let (u_hat, coeffs) = max_generalized_eigen(&a, &b, tau)?;
    // first-order perturbation of the Rayleigh quotient at the maximizer
    let c2 = coeffs.norm_squared();
    let error = c2 * (ea.norm() + u_hat.abs() * eb.norm());
    let mut r = GapReport::scalar(
        InequalityId::URatio,
        1.0,
        u_hat,
        Estimate { value: 1.0 - u_hat, error },
        1.0,
        DEFAULT_EQUALITY_TOL,
    );
    let big = coeffs.iter().copied().max_by(|x, y| x.abs().total_cmp(&y.abs())).unwrap_or(1.0);
    r.estimate = Some(u_hat);
    r.maximizer = Some(coeffs.iter().map(|v| v / big).collect());
    r.inputs = GapInputs {
        sigma: Some(sigma.to_rows()),
        mean,
        test_functions: dict.iter().map(TestFunction::id).collect(),
        ..Default::default()
    };
    r.diagnostic = format!("U >= {u_hat:.12} over the dictionary span; {}", r.diagnostic);
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticVerdict {
    ConsistentWithGaussian { mean: Vec<f64>, sigma: Vec<Vec<f64>> },
    ConsistentWithPoisson { alpha: f64 },
    ConsistentWithBinomial { n: usize, q: f64 },
    NoEqualityDetected,
    NotCertified,
}

/// Rounds to 9 decimals so quadrature noise does not leak into the label.
fn short(x: f64) -> f64 {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl fmt::Display for DiagnosticVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticVerdict::ConsistentWithGaussian { mean, sigma } => {
                let m: Vec<f64> = mean.iter().map(|&x| short(x)).collect();
                let s: Vec<Vec<f64>> = sigma.iter().map(|r| r.iter().map(|&x| short(x)).collect()).collect();
                if m.len() == 1 {
                    write!(f, "consistent_with_gaussian({}, {})", m[0], s[0][0])
                } else {
                    write!(f, "consistent_with_gaussian({m:?}, {s:?})")
                }
            }
            DiagnosticVerdict::ConsistentWithPoisson { alpha } => {
                write!(f, "consistent_with_poisson({})", short(*alpha))
            }
            DiagnosticVerdict::ConsistentWithBinomial { n, q } => {
                write!(f, "consistent_with_binomial({n}, {})", short(*q))
            }
            DiagnosticVerdict::NoEqualityDetected => f.write_str("no_equality_detected"),
            DiagnosticVerdict::NotCertified => f.write_str("not_certified"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub verdict: DiagnosticVerdict,
    /// display form of the verdict
    pub summary: String,
    /// reports whose equality flag supports the verdict
    pub evidence: Vec<String>,
    pub caveat: String,
}

const CAVEAT: &str = "numerical equality within tolerance is evidence, not proof";

fn is_linear(g: &str) -> bool {
    TestFunction::parse(g).is_ok_and(|g| match g {
        TestFunction::Linear { .. } => true,
        TestFunction::Poly { coeffs, .. } => coeffs.len() == 2 && coeffs[1] != 0.0,
        TestFunction::CenteredMonomial { degree, .. } => degree == 1,
        _ => false,
    })
}

/// Equality case of the first Stein-type report with equality set; needs a
/// certified certificate.
pub fn characterization_diagnostic(cert: &SlcCertificate, reports: &[GapReport]) -> Diagnostic {
    let make = |verdict: DiagnosticVerdict, evidence: Vec<String>| Diagnostic {
        summary: verdict.to_string(),
        verdict,
        evidence,
        caveat: CAVEAT.into(),
    };
    if !cert.is_certified() {
        return make(DiagnosticVerdict::NotCertified, Vec::new());
    }
    for r in reports.iter().filter(|r| r.equality && !r.violated()) {
        let alpha = r.inputs.alpha;
        let verdict = match (r.inequality, alpha) {
            (InequalityId::SteinGaussian, Some(a)) => {
                Some(DiagnosticVerdict::ConsistentWithGaussian { mean: r.inputs.mean.clone(), sigma: vec![vec![a]] })
            }
            (InequalityId::SteinPoisson, Some(a)) => Some(DiagnosticVerdict::ConsistentWithPoisson { alpha: a }),
            (InequalityId::SteinBinomial, Some(a)) => {
                r.inputs.support_n.map(|n| DiagnosticVerdict::ConsistentWithBinomial { n, q: a / n as f64 })
            }
            // in d > 1, equality along a coordinate direction in the weighted
            // Poincaré step is the diagonal form of Cov = Σ
            (InequalityId::WeightedPoincare, _)
                if cert.kind == CertKind::ContinuousNd && r.inputs.test_functions.iter().all(|g| is_linear(g)) =>
            {
                r.inputs
                    .sigma
                    .clone()
                    .map(|sigma| DiagnosticVerdict::ConsistentWithGaussian { mean: r.inputs.mean.clone(), sigma })
            }
            _ => None,
        };
        if let Some(v) = verdict {
            let evidence = reports
                .iter()
                .filter(|o| o.equality && o.inequality == r.inequality)
                .map(|o| format!("{}: {}", o.inequality, o.inputs.test_functions.join(", ")))
                .collect();
            return make(v, evidence);
        }
    }
    make(DiagnosticVerdict::NoEqualityDetected, Vec::new())
}

/// The default battery run by `diagnose`: Stein gaps for a few strictly
/// increasing v at the certified parameter, plus the variance inequalities and
/// the moment chain where they apply.
pub fn gap_battery(
    model: &Model,
    cert: &SlcCertificate,
    spec: &QuadratureSpec,
    equality_rel: f64,
) -> Result<Vec<GapReport>> {
    let mut out = Vec::new();
    match model {
        Model::Continuous(m) if m.dim() == 1 => {
            let Some(alpha) = cert.alpha() else { return Ok(out) };
            let it = Integrator::new(m, spec)?;
            for v in [
                TestFunction::centered(1, None),
                TestFunction::centered(3, None),
                TestFunction::poly(&[0.0, 1.0, 0.0, 0.1]),
                TestFunction::Sigmoid { scale: alpha.sqrt(), axis: 0, monotone: None },
            ] {
                out.push(stein_gap_gaussian_with(&it, alpha, &v)?);
            }
            let x = TestFunction::power(1);
            out.push(weighted_poincare_gap_with(&it, &SymMat::scalar(alpha), &x)?);
            match brascamp_lieb_gap_with(&it, &x) {
                Ok(r) => out.push(r),
                Err(Error::SingularHessian(_)) => {}
                Err(e) => return Err(e),
            }
            // the chain is only reported up to the order the window resolves
            for r_max in (1..=4).rev() {
                if let Ok(r) = moment_chain_with(&it, alpha, r_max) {
                    out.push(r);
                    break;
                }
            }
        }
        Model::Continuous(m) => {
            let Some(sigma) = cert.sigma_matrix() else { return Ok(out) };
            let it = Integrator::new(m, spec)?;
            // linear g needs no centering; the mean is recorded for the diagnostic
            let mean: Vec<f64> = model_mean(&it)?.iter().map(|e| e.value).collect();
            for i in 0..m.dim() {
                let mut direction = vec![0.0; m.dim()];
                direction[i] = 1.0;
                let mut r = weighted_poincare_gap_with(&it, &sigma, &TestFunction::Linear { direction })?;
                r.inputs.mean = mean.clone();
                out.push(r);
            }
            out.push(u_ratio_estimate_with(&it, &sigma, &poly_dictionary(m.dim(), 1))?);
        }
        Model::Discrete(p) => match p.support() {
            Support::Naturals => {
                let Some(alpha) = cert.alpha() else { return Ok(out) };
                for v in [
                    TestFunction::power(1),
                    TestFunction::power(2),
                    TestFunction::Sigmoid { scale: 1.0, axis: 0, monotone: None },
                ] {
                    out.push(stein_gap_poisson(p, alpha, &v)?);
                }
            }
            Support::Finite(_) => {
                let alpha = match cert.kind {
                    CertKind::Binomial => cert.alpha(),
                    _ => certify_slc_binomial(p, 1.0)?.alpha_star,
                };
                let Some(alpha) = alpha else { return Ok(out) };
                for v in [TestFunction::power(1), TestFunction::power(2)] {
                    out.push(stein_gap_binomial(p, alpha, &v)?);
                }
            }
        },
    }
    Ok(out.into_iter().map(|r| r.with_equality_tol(equality_rel)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_slc_1d, certify_slc_discrete, Verdict};
    use crate::model::{builtin_binomial, builtin_gaussian, builtin_poisson, builtin_poly_potential, parse_config};
    use proptest::prelude::*;

    // Quartic φ = x²/2 + x⁴, reference values from 50-digit quadrature.
    const Q_M2: f64 = 0.278843988417740409;
    const Q_M4: f64 = 0.180289002895564898;
    const Q_M6: f64 = 0.164060740589414082;
    const Q_INV_CURV: f64 = 0.433017383907395185;
    const Q_CHAIN: [f64; 3] = [0.72115601158, 0.65624296236, 0.73738427389];
    const Q_CLOSED: [f64; 3] = [0.72115601158, 2.81971099710, 14.8359392594];

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn quartic() -> ContinuousModel {
        builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap()
    }

    fn gauss1(mu: f64, s2: f64) -> ContinuousModel {
        builtin_gaussian(&[mu], &SymMat::scalar(s2)).unwrap()
    }

    /// f(n) ∝ 1/(n!)², n ≤ 50
    fn inv_factorial_sq() -> DiscretePmf {
        let w: Vec<f64> = (0..=50).map(|n| 1.0 / factorial(n).powi(2)).collect();
        let z: f64 = w.iter().sum();
        DiscretePmf::from_probs(w.iter().map(|x| x / z).collect(), Support::Naturals, 1e-12).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for id in InequalityId::ALL {
            assert_eq!(id.as_str().parse::<InequalityId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("stein".parse::<InequalityId>().is_err());
    }

    #[test]
    fn brascamp_lieb_examples() {
        for s2 in [0.5, 2.0] {
            let r = brascamp_lieb_gap(&gauss1(0.0, s2), &TestFunction::power(1), &spec()).unwrap();
            assert!(r.gap.abs() < 1e-9, "{}", r.gap);
            assert!(r.equality);
        }
        // E[(2x)²] − Var(x²) = 4 − 2
        let r = brascamp_lieb_gap(&gauss1(0.0, 1.0), &TestFunction::power(2), &spec()).unwrap();
        assert!((r.gap - 2.0).abs() < 1e-8, "{}", r.gap);
        assert!(!r.equality);
        let r = brascamp_lieb_gap(&quartic(), &TestFunction::power(1), &spec()).unwrap();
        assert!((r.lhs - Q_INV_CURV).abs() < 1e-9);
        assert!((r.gap - (Q_INV_CURV - Q_M2)).abs() < 1e-9, "{}", r.gap);
        assert!(r.error_bound >= 0.0 && r.error_bound < 1e-6);
    }

    #[test]
    fn brascamp_lieb_rejects_flat_curvature() {
        // a double well has φ″ < 0 at the origin
        let m = builtin_poly_potential(&[0.0, 0.0, -1.0, 0.0, 1.0]).unwrap();
        let err = brascamp_lieb_gap(&m, &TestFunction::power(1), &spec()).unwrap_err();
        assert!(matches!(err, Error::SingularHessian(_)), "{err}");
    }

    #[test]
    fn weighted_poincare_examples() {
        let sigma = SymMat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = builtin_gaussian(&[1.0, -1.0], &sigma).unwrap();
        let g = TestFunction::Linear { direction: vec![0.3, -1.2] };
        let r = weighted_poincare_gap(&m, &sigma, &g, &spec()).unwrap();
        assert!(r.gap.abs() < 1e-8, "{}", r.gap);
        assert!(r.equality);
        let r = weighted_poincare_gap(&quartic(), &SymMat::scalar(1.0), &TestFunction::power(1), &spec()).unwrap();
        assert!((r.gap - (1.0 - Q_M2)).abs() < 1e-9);
        let r =
            weighted_poincare_gap(&gauss1(0.0, 1.0), &SymMat::scalar(2.0), &TestFunction::power(1), &spec()).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-9);
        assert!(weighted_poincare_gap(&gauss1(0.0, 1.0), &sigma, &TestFunction::power(1), &spec()).is_err());
    }

    #[test]
    fn chebyshev_discrete_examples() {
        let uniform = DiscretePmf::from_probs(vec![1.0 / 3.0; 3], Support::Finite(2), 0.0).unwrap();
        let id = TestFunction::power(1);
        let r = chebyshev_cov_discrete(&uniform, &id, &id).unwrap();
        assert!((r.gap - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.cross_check.as_ref().unwrap().agrees);

        let constant = TestFunction::Poly { coeffs: vec![2.5], axis: 0, monotone: Some(Monotone::Nondecreasing) };
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let r = chebyshev_cov_discrete(&p, &constant, &id).unwrap();
        assert!(r.gap.abs() <= r.equality_tol && r.equality, "{} {}", r.gap, r.equality_tol);

        // Poisson score at α = λ; the folded last entry is replaced by the
        // unfolded ratio so u is the constant 1 − μ/λ
        let mut u = score_u_discrete(&p, 3.0, p.mean(), DiscreteOperator::Nabla).unwrap();
        let f = p.probs();
        let k = f.len() - 1;
        u[k] = 1.0 - f[k - 1] / f[k] + (k as f64 - p.mean()) / 3.0;
        assert!(u.iter().all(|x| x.abs() < 1e-9));
        let ut = TestFunction::sequence_of(u, Some(Monotone::Nondecreasing));
        let ut = match check_sequence(&ut.sequence(k + 1).unwrap(), Monotone::Nondecreasing) {
            Ok(()) => ut,
            // rounding can make the near-zero sequence jitter; its sign is irrelevant here
            Err(_) => TestFunction::sequence_of(vec![0.0; k + 1], Some(Monotone::Nondecreasing)),
        };
        let r = chebyshev_cov_discrete(&p, &ut, &id).unwrap();
        assert!(r.gap.abs() < 1e-9);
    }

    #[test]
    fn chebyshev_requires_comonotone() {
        let p = builtin_poisson(2.0, 1e-12).unwrap();
        let down = TestFunction::poly(&[0.0, -1.0]);
        let down = match down {
            TestFunction::Poly { coeffs, axis, .. } => {
                TestFunction::Poly { coeffs, axis, monotone: Some(Monotone::Nonincreasing) }
            }
            _ => unreachable!(),
        };
        let err = chebyshev_cov_discrete(&p, &TestFunction::power(1), &down).unwrap_err();
        assert!(matches!(err, Error::NotComonotone(_)));
        // both non-increasing is fine and still non-negative
        let r = chebyshev_cov_discrete(&p, &down, &down).unwrap();
        assert!((r.gap - 2.0).abs() < 1e-9);
        // undeclared even power has no monotonicity
        assert!(chebyshev_cov_discrete(&p, &TestFunction::centered(2, Some(0.0)), &down).is_err());
        // a false declaration is caught
        let liar = TestFunction::Tabulated { values: vec![0.0, 2.0, 1.0], monotone: Some(Monotone::Nondecreasing) };
        let small = DiscretePmf::from_probs(vec![0.2, 0.5, 0.3], Support::Finite(2), 0.0).unwrap();
        assert!(matches!(
            chebyshev_cov_discrete(&small, &liar, &TestFunction::power(1)).unwrap_err(),
            Error::NotIncreasing(_)
        ));
    }

    #[test]
    fn chebyshev_continuous_matches_closed_form() {
        // Cov(X, X³) = 3σ⁴ for a centered Gaussian
        let m = gauss1(0.0, 1.5);
        let r = chebyshev_cov_continuous(&m, &TestFunction::power(1), &TestFunction::power(3), 20_000, 11, &spec())
            .unwrap();
        assert!((r.gap - 3.0 * 2.25).abs() < 1e-8, "{}", r.gap);
        let cc = r.cross_check.unwrap();
        assert!(cc.agrees, "{cc:?}");
    }

    #[test]
    fn stein_gaussian_examples() {
        let m = gauss1(2.0, 5.0);
        for v in [
            TestFunction::centered(1, None),
            TestFunction::centered(3, None),
            TestFunction::poly(&[0.0, 1.0, 0.0, 0.1]),
            TestFunction::Sigmoid { scale: 2.0, axis: 0, monotone: None },
        ] {
            let r = stein_gap_gaussian(&m, 5.0, &v, &spec()).unwrap();
            assert!(r.gap.abs() < 1e-8, "{} {}", v.id(), r.gap);
            assert!(r.equality);
            assert!(r.cross_check.unwrap().agrees);
        }
        // v = x − μ gives α − Var
        let r = stein_gap_gaussian(&m, 7.0, &TestFunction::centered(1, None), &spec()).unwrap();
        assert!((r.gap - 2.0).abs() < 1e-8);
        let r = stein_gap_gaussian(&quartic(), 1.0, &TestFunction::centered(3, None), &spec()).unwrap();
        assert!((r.gap - (3.0 * Q_M2 - Q_M4)).abs() < 1e-9, "{}", r.gap);
        assert!(r.gap > 10.0 * r.error_bound);
        assert!(r.cross_check.unwrap().agrees);
        let err = stein_gap_gaussian(&m, 5.0, &TestFunction::centered(2, None), &spec()).unwrap_err();
        assert!(matches!(err, Error::NotIncreasing(_)));
        assert!(stein_gap_gaussian(&m, 0.0, &TestFunction::power(1), &spec()).is_err());
    }

    #[test]
    fn stein_gaussian_score_form_on_bounded_domain() {
        // truncation leaves density at the edges; the boundary term closes the identity
        let Model::Continuous(m) = parse_config("{family: 'gaussian', mu: 0.3, sigma2: 1, domain: [-1, 2]}").unwrap()
        else {
            panic!()
        };
        let r = stein_gap_gaussian(&m, 1.0, &TestFunction::poly(&[0.0, 1.0, 0.0, 0.2]), &spec()).unwrap();
        let cc = r.cross_check.unwrap();
        assert!(cc.agrees, "{cc:?}");
        assert!(r.gap > 0.0);
    }

    #[test]
    fn stein_poisson_examples() {
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let r = stein_gap_poisson(&p, 3.0, &TestFunction::power(1)).unwrap();
        assert!(r.gap.abs() < 1e-9 && r.equality, "{}", r.gap);
        let r = stein_gap_poisson(&p, 3.0, &TestFunction::power(2)).unwrap();
        assert!(r.gap.abs() < 1e-8 && r.equality, "{}", r.gap);
        assert!(r.gap.abs() <= r.error_bound);
        let cc = r.cross_check.unwrap();
        assert!(cc.difference.abs() < 1e-12, "{cc:?}");

        // 1/(n!)² at α = 1: gap = 1 − Var
        let q = inv_factorial_sq();
        let r = stein_gap_poisson(&q, 1.0, &TestFunction::power(1)).unwrap();
        assert!((r.gap - 0.486889473296788).abs() < 1e-13, "{}", r.gap);
        assert!(r.gap > 10.0 * r.error_bound);
        assert!(matches!(
            stein_gap_poisson(&p, 3.0, &TestFunction::centered(2, None)).unwrap_err(),
            Error::NotIncreasing(_)
        ));
    }

    #[test]
    fn stein_poisson_matches_truncated_oracle() {
        // exact gaps of the truncated, renormalized pmf (50-digit sums);
        // they are the truncation effect the error bound has to cover
        for (lam, k, g1, g2) in [
            (0.5, 11, 3.895169779671837e-11, 4.46089681910051e-10),
            (3.0, 22, 7.92305045104812e-11, 1.9682525331025005e-09),
            (10.0, 39, 6.454581695653904e-10, 3.140487852609604e-08),
        ] {
            let p = builtin_poisson(lam, 1e-12).unwrap();
            assert_eq!(p.truncation_index(), k);
            for (v, want) in [(TestFunction::power(1), g1), (TestFunction::power(2), g2)] {
                let r = stein_gap_poisson(&p, lam, &v).unwrap();
                assert!((r.gap - want).abs() < 1e-11 + 1e-6 * want, "{lam} {}: {} vs {want}", v.id(), r.gap);
                assert!(r.gap.abs() <= r.error_bound, "{lam}: {} > {}", r.gap, r.error_bound);
            }
        }
    }

    #[test]
    fn stein_binomial_examples() {
        let b = builtin_binomial(10, 0.3).unwrap();
        for v in [TestFunction::power(1), TestFunction::power(2), TestFunction::centered(1, None)] {
            let r = stein_gap_binomial(&b, 3.0, &v).unwrap();
            assert!(r.gap.abs() < 1e-12, "{} {}", v.id(), r.gap);
            assert!(r.equality);
            assert!(r.cross_check.unwrap().difference.abs() < 1e-12);
        }
        let r = stein_gap_binomial(&b, 3.0, &TestFunction::power(1)).unwrap();
        assert!((r.lhs - 2.1).abs() < 1e-12);
        let b = builtin_binomial(50, 0.7).unwrap();
        let r = stein_gap_binomial(&b, 35.0, &TestFunction::centered(1, None)).unwrap();
        assert!(r.gap.abs() < 1e-12, "{}", r.gap);

        // Poisson(2) cut to {0..10}: r(n) − r(n+1) = 0.6 − n/10 turns negative
        // at n = 7, so no α makes it SLC_N, and at the Poisson-sense α* = 2 the
        // binomial gap 2(1 − μ/N) − Var is negative
        let w: Vec<f64> = (0..=10).map(|k| 2f64.powi(k) / factorial(k as u32)).collect();
        let z: f64 = w.iter().sum();
        let t = DiscretePmf::from_probs(w.iter().map(|x| x / z).collect(), Support::Finite(10), 0.0).unwrap();
        let c = certify_slc_binomial(&t, 100.0).unwrap();
        assert!(c.alpha_star.is_none() && !c.is_certified());
        let r = stein_gap_binomial(&t, 2.0, &TestFunction::power(1)).unwrap();
        let s = summarize_pmf(&t, 2).unwrap();
        let want = 2.0 * (1.0 - t.mean() / 10.0) - s.variance().value;
        assert!((r.gap - want).abs() < 1e-14 && r.gap < 0.0, "{}", r.gap);
        assert!(stein_gap_binomial(&builtin_poisson(2.0, 1e-12).unwrap(), 2.0, &TestFunction::power(1)).is_err());
    }

    #[test]
    fn moment_chain_examples() {
        for a in [0.5, 2.0] {
            let r = moment_chain(&gauss1(0.0, a), a, 2, &spec()).unwrap();
            for e in &r.entries {
                assert!(e.gap.abs() < 1e-8 * a.powi(2).max(1.0), "{} {}", e.label, e.gap);
            }
            assert!(r.equality);
        }
        let r = moment_chain(&quartic(), 1.0, 3, &spec()).unwrap();
        assert_eq!(r.entries.len(), 6);
        for i in 0..3 {
            assert!((r.entries[2 * i].gap - Q_CHAIN[i]).abs() < 1e-9, "{:?}", r.entries[2 * i]);
            assert!((r.entries[2 * i + 1].gap - Q_CLOSED[i]).abs() < 1e-8, "{:?}", r.entries[2 * i + 1]);
        }
        assert!(r.strictly_positive(10.0));
        assert!(!r.violated());
        // r = 1 coincides with the Stein gap at v = x − μ
        let s = stein_gap_gaussian(&quartic(), 1.0, &TestFunction::centered(1, None), &spec()).unwrap();
        assert!((r.entries[0].gap - s.gap).abs() < 1e-9);
        assert!(moment_chain(&quartic(), 1.0, 7, &spec()).is_err());

        let d = moment_chain_pmf(&inv_factorial_sq(), 1.0, 2).unwrap();
        assert!(!d.theorem);
        assert!(d.diagnostic.contains("not a theorem"));
        // Poisson(3) tails are too heavy relative to the 1e-12 cut for M₁₂
        assert!(moment_chain_pmf(&builtin_poisson(3.0, 1e-12).unwrap(), 3.0, 6).is_err());
    }

    /// Largest root of det(A − λB) = 0 for 2×2 symmetric A, B.
    fn pencil_max_2x2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> f64 {
        let qa = b[0][0] * b[1][1] - b[0][1] * b[0][1];
        let qb = -(a[0][0] * b[1][1] + a[1][1] * b[0][0] - 2.0 * a[0][1] * b[0][1]);
        let qc = a[0][0] * a[1][1] - a[0][1] * a[0][1];
        (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
    }

    fn det3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[test]
    fn u_ratio_examples() {
        let sigma = SymMat::from_rows(&[vec![1.5, 0.4], vec![0.4, 0.8]]).unwrap();
        let m = builtin_gaussian(&[0.0, 1.0], &sigma).unwrap();
        let r = u_ratio_estimate(&m, &sigma, &poly_dictionary(2, 1), &spec()).unwrap();
        assert!((r.estimate.unwrap() - 1.0).abs() < 1e-6);

        // {x, x², x³} under N(0,1): A = Cov, B = Gram of derivatives
        let a = [[1.0, 0.0, 3.0], [0.0, 2.0, 0.0], [3.0, 0.0, 15.0]];
        let b = [[1.0, 0.0, 3.0], [0.0, 4.0, 0.0], [3.0, 0.0, 27.0]];
        // the pencil's largest root, by bisection on det(A − λB) from above
        let p = |l: f64| {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] = a[i][j] - l * b[i][j];
                }
            }
            det3(m)
        };
        let (mut lo, mut hi) = (0.9, 10.0);
        let s_hi = p(hi).signum();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid).signum() == s_hi {
                hi = mid
            } else {
                lo = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        let r =
            u_ratio_estimate(&gauss1(0.0, 1.0), &SymMat::scalar(1.0), &parse_dictionary("poly:3", 1).unwrap(), &spec())
                .unwrap();
        assert!((r.estimate.unwrap() - oracle).abs() < 1e-6, "{:?} vs {oracle}", r.estimate);
        assert!((oracle - 1.0).abs() < 1e-9);
        let c = r.maximizer.unwrap();
        assert!((c[0] - 1.0).abs() < 1e-4 && c[1].abs() < 1e-4 && c[2].abs() < 1e-4, "{c:?}");

        // quartic, Σ = 1, {x, x³}; mean zero so Cov(x, x³) = M4, Var(x³) = M6
        let oracle = pencil_max_2x2([[Q_M2, Q_M4], [Q_M4, Q_M6]], [[1.0, 3.0 * Q_M2], [3.0 * Q_M2, 9.0 * Q_M4]]);
        let dict = [TestFunction::power(1), TestFunction::power(3)];
        let r = u_ratio_estimate(&quartic(), &SymMat::scalar(1.0), &dict, &spec()).unwrap();
        assert!((r.estimate.unwrap() - oracle).abs() < 1e-7, "{:?} vs {oracle}", r.estimate);
        assert!(oracle < 1.0 && r.gap > 0.0);

        assert!(u_ratio_estimate(&quartic(), &SymMat::scalar(1.0), &[], &spec()).is_err());
        assert!(parse_dictionary("poly:0", 1).is_err());
        assert!(parse_dictionary("trig:2", 1).is_err());
        let constant = [TestFunction::poly(&[1.0])];
        assert!(u_ratio_estimate(&quartic(), &SymMat::scalar(1.0), &constant, &spec()).is_err());
    }

    #[test]
    fn diagnostic_examples() {
        let m = gauss1(2.0, 5.0);
        let cert = certify_slc_1d(&m, 2001, &spec()).unwrap();
        let rep = stein_gap_gaussian(&m, 5.0, &TestFunction::centered(1, None), &spec()).unwrap();
        let d = characterization_diagnostic(&cert, &[rep]);
        assert_eq!(d.summary, "consistent_with_gaussian(2, 5)");
        assert!(d.caveat.contains("evidence"));

        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let cert = certify_slc_discrete(&p, None).unwrap();
        let reps = gap_battery(&Model::Discrete(p.clone()), &cert, &spec(), DEFAULT_EQUALITY_TOL).unwrap();
        let d = characterization_diagnostic(&cert, &reps);
        assert_eq!(d.summary, "consistent_with_poisson(3)");

        let q = Model::Continuous(quartic());
        let Model::Continuous(qm) = &q else { unreachable!() };
        let cert = certify_slc_1d(qm, 2001, &spec()).unwrap();
        let reps = gap_battery(&q, &cert, &spec(), DEFAULT_EQUALITY_TOL).unwrap();
        assert!(reps.len() >= 6);
        assert!(reps.iter().all(|r| !r.equality && !r.violated()));
        assert_eq!(characterization_diagnostic(&cert, &reps).verdict, DiagnosticVerdict::NoEqualityDetected);

        let b = builtin_binomial(10, 0.3).unwrap();
        let cert = certify_slc_binomial(&b, 3.0).unwrap();
        let reps = gap_battery(&Model::Discrete(b), &cert, &spec(), DEFAULT_EQUALITY_TOL).unwrap();
        assert_eq!(characterization_diagnostic(&cert, &reps).summary, "consistent_with_binomial(10, 0.3)");

        let mut refuted = cert.clone();
        refuted.verdict = Verdict::RefutedOnWindow;
        assert_eq!(characterization_diagnostic(&refuted, &reps).verdict, DiagnosticVerdict::NotCertified);
    }

    fn log_concave_pmf() -> impl Strategy<Value = DiscretePmf> {
        // log f = −Σ convex increments: non-decreasing slopes keep it log-concave
        (2usize..60, prop::collection::vec(0.0f64..0.6, 60), -2.0f64..1.0).prop_map(|(len, incs, s0)| {
            let mut slope = s0;
            let mut logf = vec![0.0];
            for k in 1..len {
                slope += incs[k];
                logf.push(logf[k - 1] - slope);
            }
            let mx = logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logf.iter().map(|l| (l - mx).exp().max(1e-300)).collect();
            let z: f64 = w.iter().sum();
            DiscretePmf::from_probs(w.iter().map(|x| x / z).collect(), Support::Finite(len - 1), 0.0).unwrap()
        })
    }

    fn increasing(len: usize) -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(0.01f64..3.0, len), -5.0f64..5.0).prop_map(|(d, v0)| {
            let mut v = vec![v0];
            for x in d.iter().skip(1) {
                v.push(v.last().unwrap() + x);
            }
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn discrete_stein_equals_score_covariance(p in log_concave_pmf(), v in increasing(60), alpha in 0.1f64..20.0) {
            let len = p.probs().len();
            let vt = TestFunction::sequence_of(v[..len].to_vec(), None);
            let r = stein_gap_poisson(&p, alpha, &vt).unwrap();
            let cc = r.cross_check.unwrap();
            prop_assert!(cc.difference.abs() <= 1e-10 * alpha.max(r.lhs.abs()).max(r.rhs.abs()), "{:?}", cc);
            let r = stein_gap_binomial(&p, alpha, &vt).unwrap();
            let cc = r.cross_check.unwrap();
            prop_assert!(cc.difference.abs() <= 1e-10 * alpha.max(r.lhs.abs()).max(r.rhs.abs()), "{:?}", cc);
        }

        #[test]
        fn chebyshev_two_copy_agrees_and_is_nonnegative(p in log_concave_pmf(), u in increasing(60), v in increasing(60)) {
            let len = p.probs().len();
            let ut = TestFunction::sequence_of(u[..len].to_vec(), Some(Monotone::Strict));
            let vt = TestFunction::sequence_of(v[..len].to_vec(), Some(Monotone::Nondecreasing));
            let r = chebyshev_cov_discrete(&p, &ut, &vt).unwrap();
            let cc = r.cross_check.unwrap();
            prop_assert!(cc.difference.abs() <= 1e-12_f64.max(1e-13 * r.gap.abs()), "{:?}", cc);
            prop_assert!(r.gap >= -r.error_bound);
        }

        #[test]
        fn equality_flag_respects_tolerance(p in log_concave_pmf(), v in increasing(60), rel in 1e-12f64..1e-1) {
            let len = p.probs().len();
            let vt = TestFunction::sequence_of(v[..len].to_vec(), None);
            let r = stein_gap_binomial(&p, 1.0, &vt).unwrap().with_equality_tol(rel);
            prop_assert!(r.error_bound >= 0.0);
            prop_assert!(!r.equality || r.gap.abs() <= r.equality_tol);
            prop_assert_eq!(r.equality_rel, rel);
        }

        #[test]
        fn chain_telescopes_to_closed_bound(alpha in 0.01f64..50.0, r in 1usize..7) {
            let prod: f64 = (1..=r).map(|k| alpha * (2 * k - 1) as f64).product();
            prop_assert!((prod - closed_moment_bound(alpha, r)).abs() <= 1e-12 * prod);
        }
    }
}
