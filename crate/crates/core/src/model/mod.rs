//! Distributions: continuous models carried by their potential φ = −log f,
//! and probability mass functions on ℕ or {0, …, N}.

mod config;
mod spline;

pub use config::{parse_config, AxisCoeffs, DomainSpec, ModelConfig, OneOrMany};
pub use spline::NaturalSpline;

use serde::{Deserialize, Serialize};

use crate::calculus::{fd_gradient, fd_hessian};
use crate::engine::{self, QuadratureSpec};
use crate::error::{Error, Result};
use crate::linalg::{require_spd, SymMat, MAX_DIM};
use crate::numeric::NeumaierSum;

/// Axis-aligned box; infinite bounds mean the axis is unrestricted.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn whole(dim: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; dim], hi: vec![f64::INFINITY; dim] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| v >= l && v <= h)
    }

    pub fn is_whole(&self) -> bool {
        self.lo.iter().all(|v| *v == f64::NEG_INFINITY) && self.hi.iter().all(|v| *v == f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if l.is_nan() || h.is_nan() || !(l < h) {
                return Err(Error::Config(format!("empty or invalid domain interval [{l}, {h}]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Gaussian,
    PolyPotential,
    TabulatedLogdensity,
    Logistic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    /// ½ (x−μ)ᵀ Σ⁻¹ (x−μ)
    Gaussian { mean: Vec<f64>, cov: SymMat, precision: SymMat },
    /// Optional Gaussian part plus one polynomial per axis:
    /// ½ (x−μ)ᵀ Σ⁻¹ (x−μ) + Σᵢ pᵢ(xᵢ), with pᵢ(t) = Σₖ cᵢₖ tᵏ.
    Polynomial { mean: Vec<f64>, cov: Option<SymMat>, precision: Option<SymMat>, axes: Vec<Vec<f64>> },
    /// Standard logistic shifted to `location`: t + 2 log(1 + e^{−t}), t = x − location.
    Logistic { location: f64 },
    /// −s(x) for a natural cubic spline s through tabulated log f values.
    Tabulated(NaturalSpline),
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

fn poly_d1(c: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..c.len()).rev() {
        acc = acc * t + k as f64 * c[k];
    }
    acc
}

fn poly_d2(c: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for k in (2..c.len()).rev() {
        acc = acc * t + (k * (k - 1)) as f64 * c[k];
    }
    acc
}

/// Drops trailing zero coefficients.
pub(crate) fn trim_poly(c: &[f64]) -> Vec<f64> {
    let mut v = c.to_vec();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    v
}

impl Potential {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Gaussian { mean, .. } | Potential::Polynomial { mean, .. } => mean.len(),
            Potential::Logistic { .. } | Potential::Tabulated(_) => 1,
        }
    }

    pub fn family(&self) -> FamilyTag {
        match self {
            Potential::Gaussian { .. } => FamilyTag::Gaussian,
            Potential::Polynomial { .. } => FamilyTag::PolyPotential,
            Potential::Logistic { .. } => FamilyTag::Logistic,
            Potential::Tabulated(_) => FamilyTag::TabulatedLogdensity,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Gaussian { mean, precision, .. } => {
                let d = centered(x, mean);
                0.5 * precision.quad_form(&d[..x.len()])
            }
            Potential::Polynomial { mean, precision, axes, .. } => {
                let mut v = 0.0;
                if let Some(p) = precision {
                    let d = centered(x, mean);
                    v += 0.5 * p.quad_form(&d[..x.len()]);
                }
                for (c, &xi) in axes.iter().zip(x) {
                    v += poly_eval(c, xi);
                }
                v
            }
            Potential::Logistic { location } => {
                let t = x[0] - location;
                if t >= 0.0 {
                    t + 2.0 * (-t).exp().ln_1p()
                } else {
                    -t + 2.0 * t.exp().ln_1p()
                }
            }
            Potential::Tabulated(s) => s.eval(x[0]).map_or(f64::INFINITY, |v| -v),
        }
    }

    /// Closed-form gradient; `None` for tabulated potentials.
    fn gradient(&self, x: &[f64]) -> Option<[f64; MAX_DIM]> {
        match self {
            Potential::Gaussian { mean, precision, .. } => {
                let d = centered(x, mean);
                Some(precision.mul_vec(&d))
            }
            Potential::Polynomial { mean, precision, axes, .. } => {
                let mut g = [0.0; MAX_DIM];
                if let Some(p) = precision {
                    g = p.mul_vec(&centered(x, mean));
                }
                for (i, c) in axes.iter().enumerate() {
                    g[i] += poly_d1(c, x[i]);
                }
                Some(g)
            }
            Potential::Logistic { location } => {
                let mut g = [0.0; MAX_DIM];
                g[0] = (0.5 * (x[0] - location)).tanh();
                Some(g)
            }
            Potential::Tabulated(_) => None,
        }
    }

    fn hessian(&self, x: &[f64]) -> Option<SymMat> {
        match self {
            Potential::Gaussian { precision, .. } => Some(*precision),
            Potential::Polynomial { precision, axes, .. } => {
                let mut h = precision.unwrap_or_else(|| SymMat::zeros(axes.len()));
                for (i, c) in axes.iter().enumerate() {
                    h.set(i, i, h.get(i, i) + poly_d2(c, x[i]));
                }
                Some(h)
            }
            Potential::Logistic { location } => {
                let c = (0.5 * (x[0] - location)).cosh();
                Some(SymMat::scalar(0.5 / (c * c)))
            }
            Potential::Tabulated(_) => None,
        }
    }

    /// A point near the minimizer, used to seed searches.
    pub(crate) fn min_hint(&self) -> Vec<f64> {
        match self {
            Potential::Gaussian { mean, .. } => mean.clone(),
            Potential::Polynomial { mean, precision, axes, .. } => {
                if precision.is_some() {
                    mean.clone()
                } else {
                    vec![0.0; axes.len()]
                }
            }
            Potential::Logistic { location } => vec![*location],
            Potential::Tabulated(s) => {
                let (xs, ys) = s.knots();
                let i = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
                vec![xs[i]]
            }
        }
    }
}

fn centered(x: &[f64], mean: &[f64]) -> [f64; MAX_DIM] {
    let mut d = [0.0; MAX_DIM];
    for i in 0..x.len() {
        d[i] = x[i] - mean[i];
    }
    d
}

/// Normalizing constant Z = ∫ e^{−φ} with its numerical uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub log_z: f64,
    /// relative error of Z (quadrature estimate)
    pub rel_error: f64,
    /// relative mass neglected outside the energy window
    pub tail_bound: f64,
    /// Z is known in closed form
    pub exact: bool,
}

impl Normalization {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

/// A density on a box in ℝ^d (d ≤ 3), represented through its potential.
#[derive(Clone, Debug)]
pub struct ContinuousModel {
    potential: Potential,
    domain: Domain,
    minimizer: Vec<f64>,
    phi_min: f64,
    norm: Normalization,
}

impl ContinuousModel {
    pub fn new(potential: Potential, domain: Domain) -> Result<Self> {
        Self::with_spec(potential, domain, &QuadratureSpec::default())
    }

    pub fn with_spec(potential: Potential, domain: Domain, spec: &QuadratureSpec) -> Result<Self> {
        let dim = potential.dim();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("dimension {dim} not in 1..=3")));
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: domain.dim() });
        }
        domain.validate()?;
        if let Potential::Tabulated(s) = &potential {
            if s.lo() > domain.lo[0] || s.hi() < domain.hi[0] {
                // tabulated potentials live on the grid range
                let lo = domain.lo[0].max(s.lo());
                let hi = domain.hi[0].min(s.hi());
                return Self::with_spec(potential.clone(), Domain::interval(lo, hi), spec);
            }
        }
        let mut model = Self {
            potential,
            domain,
            minimizer: Vec::new(),
            phi_min: 0.0,
            norm: Normalization { log_z: 0.0, rel_error: 0.0, tail_bound: 0.0, exact: false },
        };
        let (xmin, fmin) = engine::locate_minimum(&model)?;
        model.minimizer = xmin;
        model.phi_min = fmin;
        model.norm = match &model.potential {
            Potential::Gaussian { cov, .. } if model.domain.is_whole() => Normalization {
                log_z: 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * cov.log_det_spd()?,
                rel_error: 0.0,
                tail_bound: 0.0,
                exact: true,
            },
            _ => engine::normalize(&model, spec)?,
        };
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn family(&self) -> FamilyTag {
        self.potential.family()
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    /// Location and value of the minimum of φ (as located at construction).
    pub fn minimum(&self) -> (&[f64], f64) {
        (&self.minimizer, self.phi_min)
    }

    /// φ(x); +∞ outside the domain.
    pub fn phi(&self, x: &[f64]) -> f64 {
        if !self.domain.contains(x) {
            return f64::INFINITY;
        }
        self.potential.value(x)
    }

    /// Normalized density e^{−φ}/Z.
    pub fn density(&self, x: &[f64]) -> f64 {
        (-self.phi(x) - self.norm.log_z).exp()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        -self.phi(x) - self.norm.log_z
    }

    /// Whether derivatives are closed-form (otherwise finite differences).
    pub fn has_closed_form_derivatives(&self) -> bool {
        !matches!(self.potential, Potential::Tabulated(_))
    }

    /// Distance kept from the domain boundary when derivatives come from
    /// finite differences.
    pub fn derivative_margin(&self) -> f64 {
        if self.has_closed_form_derivatives() {
            0.0
        } else {
            let scale = self.domain.lo[0].abs().max(self.domain.hi[0].abs()).max(1.0);
            2.0 * f64::EPSILON.powf(0.25) * scale
        }
    }

    fn fd_point(&self, x: &[f64]) -> Vec<f64> {
        let m = self.derivative_margin();
        x.iter().enumerate().map(|(i, &v)| v.clamp(self.domain.lo[i] + m, self.domain.hi[i] - m)).collect()
    }

    /// φ′(x). Tabulated potentials use central differences, with the stencil
    /// moved inward near the boundary.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.potential.gradient(x) {
            Some(g) => Ok(g[..self.dim()].to_vec()),
            None => {
                let p = self.fd_point(x);
                fd_gradient(&|y: &[f64]| self.phi(y), &self.domain, &p, None)
            }
        }
    }

    /// φ″(x), same conventions as [`gradient`](Self::gradient).
    pub fn hessian(&self, x: &[f64]) -> Result<SymMat> {
        match self.potential.hessian(x) {
            Some(h) => Ok(h),
            None => {
                let p = self.fd_point(x);
                fd_hessian(&|y: &[f64]| self.phi(y), &self.domain, &p, None)
            }
        }
    }

    /// Candidate SLC matrix implied by the model definition, when there is one.
    pub fn natural_sigma(&self) -> Option<SymMat> {
        match &self.potential {
            Potential::Gaussian { cov, .. } => Some(*cov),
            Potential::Polynomial { cov, .. } => *cov,
            _ => None,
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        config::emit_continuous(self)
    }
}

/// Builds N_d(μ, Σ); Σ must be symmetric positive definite.
pub fn builtin_gaussian(mean: &[f64], sigma: &SymMat) -> Result<ContinuousModel> {
    if mean.len() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), got: mean.len() });
    }
    require_spd(sigma)?;
    let precision = sigma.inverse()?;
    ContinuousModel::new(Potential::Gaussian { mean: mean.to_vec(), cov: *sigma, precision }, Domain::whole(mean.len()))
}

/// One-dimensional polynomial potential φ(x) = Σ cₖ xᵏ.
pub fn builtin_poly_potential(coeffs: &[f64]) -> Result<ContinuousModel> {
    let axes = vec![trim_poly(coeffs)];
    check_poly_integrable(&axes, false)?;
    ContinuousModel::new(Potential::Polynomial { mean: vec![0.0], cov: None, precision: None, axes }, Domain::whole(1))
}

pub(crate) fn check_poly_integrable(axes: &[Vec<f64>], has_quadratic: bool) -> Result<()> {
    for (i, c) in axes.iter().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite coefficient on axis {i}")));
        }
        let deg = c.len() - 1;
        let lead = c[deg];
        if has_quadratic && deg <= 1 {
            continue;
        }
        if deg % 2 == 1 {
            return Err(Error::NonIntegrable(format!("axis {i}: leading term of odd degree {deg}")));
        }
        if deg == 0 {
            return Err(Error::NonIntegrable(format!("axis {i}: constant potential")));
        }
        if lead <= 0.0 {
            return Err(Error::NonIntegrable(format!(
                "axis {i}: leading coefficient {lead} of degree {deg} is not positive"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Naturals,
    Finite(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiscreteFamily {
    Poisson { lambda: f64, tail_eps: f64 },
    Binomial { n: usize, p: f64 },
    Tabulated { tail_eps: f64 },
}

/// Probability mass function on {0, …, K}; either a truncation of a pmf on ℕ
/// or a pmf on the finite set {0, …, N} (K = N).
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePmf {
    support: Support,
    probs: Vec<f64>,
    tail_bound: f64,
    mean: f64,
    family: DiscreteFamily,
}

impl DiscretePmf {
    /// Validates and renormalizes `probs`. The raw sum must lie in
    /// `[1 − tail_eps, 1]` up to rounding.
    pub fn from_probs(probs: Vec<f64>, support: Support, tail_eps: f64) -> Result<Self> {
        Self::build(probs, support, tail_eps, DiscreteFamily::Tabulated { tail_eps })
    }

    fn build(mut probs: Vec<f64>, support: Support, tail_eps: f64, family: DiscreteFamily) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySupport);
        }
        if !(0.0..1.0).contains(&tail_eps) {
            return Err(Error::Config(format!("tail_eps {tail_eps} not in [0, 1)")));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NegativeProbability { index: i, value: p });
            }
        }
        if let Support::Finite(n) = support {
            if probs.len() != n + 1 {
                return Err(Error::DimensionMismatch { expected: n + 1, got: probs.len() });
            }
        }
        let total = NeumaierSum::sum(probs.iter().copied());
        if total <= 0.0 {
            return Err(Error::EmptySupport);
        }
        let slack = 1e-9;
        if total > 1.0 + slack || total < 1.0 - tail_eps - slack {
            return Err(Error::Config(format!(
                "probabilities sum to {total}, outside [1 - tail_eps, 1] with tail_eps = {tail_eps}"
            )));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        let mean = NeumaierSum::sum(probs.iter().enumerate().map(|(k, &p)| k as f64 * p));
        let tail_bound = match support {
            Support::Naturals => tail_eps.max(1.0 - total).max(0.0),
            Support::Finite(_) => 0.0,
        };
        Ok(Self { support, probs, tail_bound, mean, family })
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest index K carried.
    pub fn truncation_index(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn family(&self) -> &DiscreteFamily {
        &self.family
    }

    pub fn finite_n(&self) -> Option<usize> {
        match self.support {
            Support::Finite(n) => Some(n),
            Support::Naturals => None,
        }
    }

    /// Fails with [`Error::ZeroMass`] at the first zero entry.
    pub fn require_positive(&self) -> Result<()> {
        match self.probs.iter().position(|&p| p <= 0.0) {
            Some(k) => Err(Error::ZeroMass(k)),
            None => Ok(()),
        }
    }

    pub fn to_config(&self) -> ModelConfig {
        config::emit_discrete(self)
    }
}

/// Poisson(λ) truncated at the smallest K with P(X > K) < tail_eps, then renormalized.
pub fn builtin_poisson(lambda: f64, tail_eps: f64) -> Result<DiscretePmf> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("poisson lambda must be positive, got {lambda}")));
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::Config(format!("tail_eps must lie in (0, 1), got {tail_eps}")));
    }
    // Unnormalized weights by recurrence from the mode, so ratios f(k)/f(k+1) = (k+1)/λ
    // are reproduced to rounding and nothing underflows for large λ.
    let mode = lambda.floor() as usize;
    let upper = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as usize;
    let mut w = vec![0.0; upper + 1];
    w[mode] = 1.0;
    for k in (0..mode).rev() {
        w[k] = w[k + 1] * (k + 1) as f64 / lambda;
    }
    for k in (mode + 1)..=upper {
        w[k] = w[k - 1] * lambda / k as f64;
    }
    let total = NeumaierSum::sum(w.iter().copied());
    // suffix sums of the normalized tail
    let mut tail_after = vec![0.0; upper + 1];
    let mut acc = NeumaierSum::default();
    for k in (0..upper).rev() {
        acc.add(w[k + 1] / total);
        tail_after[k] = acc.value();
    }
    let k_max = (0..=upper).find(|&k| tail_after[k] < tail_eps).unwrap_or(upper);
    let probs: Vec<f64> = w[..=k_max].iter().map(|v| v / total).collect();
    DiscretePmf::build(probs, Support::Naturals, tail_eps, DiscreteFamily::Poisson { lambda, tail_eps })
}

/// Binomial(N, p) on {0, …, N}.
pub fn builtin_binomial(n: usize, p: f64) -> Result<DiscretePmf> {
    if n == 0 {
        return Err(Error::Config("binomial N must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("binomial p must lie in (0, 1), got {p}")));
    }
    let mode = ((n as f64 + 1.0) * p).floor().min(n as f64) as usize;
    let odds = p / (1.0 - p);
    let mut w = vec![0.0; n + 1];
    w[mode] = 1.0;
    for k in (0..mode).rev() {
        // f(k) = f(k+1) · (k+1) / ((N−k) · odds)
        w[k] = w[k + 1] * (k + 1) as f64 / ((n - k) as f64 * odds);
    }
    for k in (mode + 1)..=n {
        w[k] = w[k - 1] * (n - k + 1) as f64 / k as f64 * odds;
    }
    let total = NeumaierSum::sum(w.iter().copied());
    let probs = w.into_iter().map(|v| v / total).collect();
    DiscretePmf::build(probs, Support::Finite(n), 0.0, DiscreteFamily::Binomial { n, p })
}

/// Either kind of model, as produced by [`parse_config`].
#[derive(Clone, Debug)]
// built once per run, so the size gap between variants does not matter
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Continuous(ContinuousModel),
    Discrete(DiscretePmf),
}

impl Model {
    pub fn to_config(&self) -> ModelConfig {
        match self {
            Model::Continuous(m) => m.to_config(),
            Model::Discrete(p) => p.to_config(),
        }
    }
}
