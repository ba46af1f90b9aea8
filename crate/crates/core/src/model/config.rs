//! Configuration documents naming a family and its parameters.
//!
//! Documents are JSON (JSON5 syntax is accepted, so unquoted keys work on the
//! command line). Unknown keys are rejected, and so are known keys that the
//! named family does not use.

use serde::{Deserialize, Serialize};

use super::{
    builtin_binomial, builtin_poisson, check_poly_integrable, trim_poly, ContinuousModel, DiscreteFamily, DiscretePmf,
    Domain, Model, NaturalSpline, Potential, Support,
};
use crate::error::{Error, Result};
use crate::linalg::{require_spd, SymMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Polynomial coefficients: one list (d = 1) or one list per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisCoeffs {
    Single(Vec<f64>),
    PerAxis(Vec<Vec<f64>>),
}

/// `[lo, hi]` or `[[lo, hi], ...]`; `null` marks an unbounded side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Interval([Option<f64>; 2]),
    Boxed(Vec<[Option<f64>; 2]>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, rename = "Sigma", skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<AxisCoeffs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logdensity_grid: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
}

pub const DEFAULT_TAIL_EPS: f64 = 1e-12;

/// Parses a document and builds the model it describes.
pub fn parse_config(doc: &str) -> Result<Model> {
    ModelConfig::parse(doc)?.build()
}

impl ModelConfig {
    /// Reads a document without building the model.
    pub fn parse(doc: &str) -> Result<Self> {
        json5::from_str(doc).map_err(|e| Error::Config(e.to_string()))
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.mu.is_some() {
            v.push("mu");
        }
        if self.sigma2.is_some() {
            v.push("sigma2");
        }
        if self.sigma.is_some() {
            v.push("Sigma");
        }
        if self.coeffs.is_some() {
            v.push("coeffs");
        }
        if self.lambda.is_some() {
            v.push("lambda");
        }
        if self.n.is_some() {
            v.push("N");
        }
        if self.p.is_some() {
            v.push("p");
        }
        if self.probs.is_some() {
            v.push("probs");
        }
        if self.logdensity_grid.is_some() {
            v.push("logdensity_grid");
        }
        if self.tail_eps.is_some() {
            v.push("tail_eps");
        }
        if self.domain.is_some() {
            v.push("domain");
        }
        v
    }

    fn allow_only(&self, allowed: &[&str]) -> Result<()> {
        for key in self.present() {
            if !allowed.contains(&key) {
                return Err(Error::Config(format!("field `{key}` is not used by family `{}`", self.family)));
            }
        }
        Ok(())
    }

    fn domain_for(&self, dim: usize) -> Result<Domain> {
        let Some(spec) = &self.domain else {
            return Ok(Domain::whole(dim));
        };
        let pairs: Vec<[Option<f64>; 2]> = match spec {
            DomainSpec::Interval(p) => vec![*p],
            DomainSpec::Boxed(v) => v.clone(),
        };
        if pairs.len() != dim {
            return Err(Error::Config(format!("domain has {} axes, model has {dim}", pairs.len())));
        }
        Ok(Domain {
            lo: pairs.iter().map(|p| p[0].unwrap_or(f64::NEG_INFINITY)).collect(),
            hi: pairs.iter().map(|p| p[1].unwrap_or(f64::INFINITY)).collect(),
        })
    }

    pub fn build(&self) -> Result<Model> {
        match self.family.as_str() {
            "gaussian" => {
                self.allow_only(&["mu", "sigma2", "Sigma", "domain"])?;
                let cov = match (&self.sigma2, &self.sigma) {
                    (Some(s2), None) => SymMat::scalar(*s2),
                    (None, Some(rows)) => SymMat::from_rows(rows).map_err(|e| Error::Config(e.to_string()))?,
                    _ => return Err(Error::Config("gaussian needs exactly one of `sigma2` or `Sigma`".into())),
                };
                let dim = cov.dim();
                let mean = self.mu.as_ref().map_or(vec![0.0; dim], OneOrMany::to_vec);
                if mean.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: mean.len() });
                }
                require_spd(&cov)?;
                let precision = cov.inverse()?;
                let domain = self.domain_for(dim)?;
                Ok(Model::Continuous(ContinuousModel::new(Potential::Gaussian { mean, cov, precision }, domain)?))
            }
            "poly_potential" => {
                self.allow_only(&["coeffs", "mu", "Sigma", "domain"])?;
                let axes: Vec<Vec<f64>> = match &self.coeffs {
                    Some(AxisCoeffs::Single(c)) => vec![c.clone()],
                    Some(AxisCoeffs::PerAxis(c)) => c.clone(),
                    None => return Err(Error::Config("poly_potential needs `coeffs`".into())),
                };
                if axes.is_empty() || axes.iter().any(|c| c.is_empty()) {
                    return Err(Error::Config("empty coefficient list".into()));
                }
                let axes: Vec<Vec<f64>> = axes.iter().map(|c| trim_poly(c)).collect();
                let dim = axes.len();
                let cov = match &self.sigma {
                    Some(rows) => {
                        let s = SymMat::from_rows(rows).map_err(|e| Error::Config(e.to_string()))?;
                        if s.dim() != dim {
                            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
                        }
                        require_spd(&s)?;
                        Some(s)
                    }
                    None => None,
                };
                if self.mu.is_some() && cov.is_none() {
                    return Err(Error::Config("`mu` on poly_potential requires `Sigma`".into()));
                }
                check_poly_integrable(&axes, cov.is_some())?;
                let mean = self.mu.as_ref().map_or(vec![0.0; dim], OneOrMany::to_vec);
                if mean.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: mean.len() });
                }
                let precision = cov.as_ref().map(|c| c.inverse()).transpose()?;
                let domain = self.domain_for(dim)?;
                Ok(Model::Continuous(ContinuousModel::new(
                    Potential::Polynomial { mean, cov, precision, axes },
                    domain,
                )?))
            }
            "logistic" => {
                self.allow_only(&["mu", "domain"])?;
                let location = match &self.mu {
                    None => 0.0,
                    Some(OneOrMany::One(v)) => *v,
                    Some(OneOrMany::Many(_)) => return Err(Error::Config("logistic is one-dimensional".into())),
                };
                let domain = self.domain_for(1)?;
                Ok(Model::Continuous(ContinuousModel::new(Potential::Logistic { location }, domain)?))
            }
            "tabulated_logdensity" => {
                self.allow_only(&["logdensity_grid", "domain"])?;
                let grid = self
                    .logdensity_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabulated_logdensity needs `logdensity_grid`".into()))?;
                let spline =
                    NaturalSpline::new(grid.iter().map(|p| p[0]).collect(), grid.iter().map(|p| p[1]).collect())?;
                let domain = self.domain_for(1)?;
                Ok(Model::Continuous(ContinuousModel::new(Potential::Tabulated(spline), domain)?))
            }
            "poisson" => {
                self.allow_only(&["lambda", "tail_eps"])?;
                let lambda = self.lambda.ok_or_else(|| Error::Config("poisson needs `lambda`".into()))?;
                Ok(Model::Discrete(builtin_poisson(lambda, self.tail_eps.unwrap_or(DEFAULT_TAIL_EPS))?))
            }
            "binomial" => {
                self.allow_only(&["N", "p"])?;
                let n = self.n.ok_or_else(|| Error::Config("binomial needs `N`".into()))?;
                let p = self.p.ok_or_else(|| Error::Config("binomial needs `p`".into()))?;
                Ok(Model::Discrete(builtin_binomial(n, p)?))
            }
            "tabulated_pmf" => {
                self.allow_only(&["probs", "N", "tail_eps"])?;
                let probs = self.probs.clone().ok_or_else(|| Error::Config("tabulated_pmf needs `probs`".into()))?;
                let support = match self.n {
                    Some(n) => Support::Finite(n),
                    None => Support::Naturals,
                };
                let tail_eps = match support {
                    Support::Finite(_) if self.tail_eps.is_some() => {
                        return Err(Error::Config("`tail_eps` does not apply to a finite support".into()))
                    }
                    Support::Finite(_) => 0.0,
                    Support::Naturals => self.tail_eps.unwrap_or(0.0),
                };
                Ok(Model::Discrete(DiscretePmf::from_probs(probs, support, tail_eps)?))
            }
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

fn emit_domain(d: &Domain) -> Option<DomainSpec> {
    if d.is_whole() {
        return None;
    }
    let fin = |v: f64| if v.is_finite() { Some(v) } else { None };
    let pairs: Vec<[Option<f64>; 2]> = d.lo.iter().zip(&d.hi).map(|(&l, &h)| [fin(l), fin(h)]).collect();
    Some(if pairs.len() == 1 { DomainSpec::Interval(pairs[0]) } else { DomainSpec::Boxed(pairs) })
}

pub(super) fn emit_continuous(m: &ContinuousModel) -> ModelConfig {
    let mut cfg = ModelConfig { domain: emit_domain(m.domain()), ..Default::default() };
    match m.potential() {
        Potential::Gaussian { mean, cov, .. } => {
            cfg.family = "gaussian".into();
            if mean.len() == 1 {
                cfg.mu = Some(OneOrMany::One(mean[0]));
                cfg.sigma2 = Some(cov.get(0, 0));
            } else {
                cfg.mu = Some(OneOrMany::Many(mean.clone()));
                cfg.sigma = Some(cov.to_rows());
            }
        }
        Potential::Polynomial { mean, cov, axes, .. } => {
            cfg.family = "poly_potential".into();
            cfg.coeffs = Some(if axes.len() == 1 && cov.is_none() {
                AxisCoeffs::Single(axes[0].clone())
            } else {
                AxisCoeffs::PerAxis(axes.clone())
            });
            if let Some(c) = cov {
                cfg.sigma = Some(c.to_rows());
                cfg.mu = Some(OneOrMany::Many(mean.clone()));
            }
        }
        Potential::Logistic { location } => {
            cfg.family = "logistic".into();
            if *location != 0.0 {
                cfg.mu = Some(OneOrMany::One(*location));
            }
        }
        Potential::Tabulated(s) => {
            cfg.family = "tabulated_logdensity".into();
            let (xs, ys) = s.knots();
            cfg.logdensity_grid = Some(xs.iter().zip(ys).map(|(&x, &y)| [x, y]).collect());
            // the domain is implied by the grid unless narrower
            if m.domain().lo[0] == s.lo() && m.domain().hi[0] == s.hi() {
                cfg.domain = None;
            }
        }
    }
    cfg
}

pub(super) fn emit_discrete(p: &DiscretePmf) -> ModelConfig {
    let mut cfg = ModelConfig::default();
    match p.family() {
        DiscreteFamily::Poisson { lambda, tail_eps } => {
            cfg.family = "poisson".into();
            cfg.lambda = Some(*lambda);
            cfg.tail_eps = Some(*tail_eps);
        }
        DiscreteFamily::Binomial { n, p } => {
            cfg.family = "binomial".into();
            cfg.n = Some(*n);
            cfg.p = Some(*p);
        }
        DiscreteFamily::Tabulated { tail_eps } => {
            cfg.family = "tabulated_pmf".into();
            cfg.probs = Some(p.probs().to_vec());
            match p.support() {
                Support::Finite(n) => cfg.n = Some(n),
                Support::Naturals => {
                    if *tail_eps > 0.0 {
                        cfg.tail_eps = Some(*tail_eps);
                    }
                }
            }
        }
    }
    cfg
}
