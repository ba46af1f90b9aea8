//! Quadrature backbone: energy-window truncation, adaptive Gauss–Kronrod
//! integration (tensor rule on cells, bisected along their worst axis), moment summaries,
//! exact discrete sums and an inverse-CDF sampler.

mod gk;
mod sample;

pub use sample::{sample, NumericCdf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymMat, MAX_DIM};
use crate::model::{ContinuousModel, DiscretePmf, Normalization, Potential};
use crate::numeric::NeumaierSum;
use gk::{NODES, RULE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rtol: f64,
    pub atol: f64,
    pub max_subdiv: usize,
    /// Integrate where φ(x) − min φ ≤ energy_budget (nats).
    pub energy_budget: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_subdiv: 1 << 15, energy_budget: 46.0 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.energy_budget > 0.0) {
            return Err(Error::Config("quadrature tolerances and energy budget must be positive".into()));
        }
        if self.max_subdiv < 1 {
            return Err(Error::Config("max_subdiv must be at least 1".into()));
        }
        Ok(())
    }
}

/// A value with a non-negative error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Integrand for [`Integrator::expect_many`]: writes m values at x.
pub trait Integrand: Fn(&[f64], &mut [f64]) -> Result<()> + Sync {}
impl<T: Fn(&[f64], &mut [f64]) -> Result<()> + Sync> Integrand for T {}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Cell {
    lo: [f64; MAX_DIM],
    hi: [f64; MAX_DIM],
}

/// Kronrod sum, error estimate and Kronrod sum of |f| per component.
///
/// `axis_err[c * d + i]` is |K − K⊗…⊗G(axis i)⊗…⊗K| for component c, the
/// part of the error attributable to axis i; `err` is their sum.
#[derive(Clone, Debug)]
struct CellSums {
    k: Vec<f64>,
    err: Vec<f64>,
    axis_err: Vec<f64>,
    abs: Vec<f64>,
}

/// Integrals over the whole window.
#[derive(Clone, Debug)]
struct Totals {
    value: Vec<f64>,
    error: Vec<f64>,
}

/// Truncation box where φ − min φ ≤ B, with the relative mass left outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// estimate of (mass outside the box) / (mass inside), unnormalized by Z
    /// until the integrator divides it out
    pub tail_mass: f64,
}

/// Adaptive integration against e^{−φ} on the energy window of a model.
///
/// Construction locates the window and refines a base partition until the
/// normalizer and low moments meet the tolerance. Every expectation then
/// refines that partition further for its own integrand, always carrying the
/// constant 1 along so numerator and normalizer share one partition.
#[derive(Clone, Debug)]
pub struct Integrator<'a> {
    model: &'a ContinuousModel,
    spec: QuadratureSpec,
    window: Window,
    phi_min: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
    cells: Vec<Cell>,
    zw: Estimate,
    tail_rel: f64,
}

const BASE_MOMENTS: usize = 4;

impl<'a> Integrator<'a> {
    pub fn new(model: &'a ContinuousModel, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let (xmin, phi_min) = model.minimum();
        let window = find_window(model, spec.energy_budget)?;
        let d = model.dim();
        let center = xmin.to_vec();
        let scale: Vec<f64> =
            (0..d).map(|i| ((window.hi[i] - center[i]).max(center[i] - window.lo[i])).max(f64::MIN_POSITIVE)).collect();
        let mut it = Self {
            model,
            spec: *spec,
            window,
            phi_min,
            center,
            scale,
            cells: Vec::new(),
            zw: Estimate { value: 0.0, error: 0.0 },
            tail_rel: 0.0,
        };
        it.cells = it.initial_cells();
        // base refinement: 1 and scaled powers tᵏ per axis
        let m = 1 + d * BASE_MOMENTS;
        let (c, s) = (it.center.clone(), it.scale.clone());
        let base = move |x: &[f64], out: &mut [f64]| -> Result<()> {
            out[0] = 1.0;
            for i in 0..x.len() {
                let t = (x[i] - c[i]) / s[i];
                let mut p = 1.0;
                for k in 0..BASE_MOMENTS {
                    p *= t;
                    out[1 + i * BASE_MOMENTS + k] = p;
                }
            }
            Ok(())
        };
        let (cells, totals) = it.refine(m, &base)?;
        it.cells = cells;
        it.zw = Estimate { value: totals.value[0], error: totals.error[0] };
        if !(it.zw.value > 0.0) || !it.zw.value.is_finite() {
            return Err(Error::NonIntegrable("zero or non-finite mass on the energy window".into()));
        }
        it.tail_rel = it.window.tail_mass / it.zw.value;
        Ok(it)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn model(&self) -> &ContinuousModel {
        self.model
    }

    /// log Z with its relative error and tail bound.
    pub fn normalization(&self) -> Normalization {
        Normalization {
            log_z: self.phi_min + self.zw.value.ln(),
            rel_error: self.zw.error / self.zw.value,
            tail_bound: self.tail_rel,
            exact: false,
        }
    }

    /// Relative mass outside the window.
    pub fn tail_rel(&self) -> f64 {
        self.tail_rel
    }

    pub(crate) fn cell_bounds_1d(&self) -> Vec<(f64, f64)> {
        self.cells.iter().map(|c| (c.lo[0], c.hi[0])).collect()
    }

    fn initial_cells(&self) -> Vec<Cell> {
        let d = self.model.dim();
        if d == 1 {
            let (lo, hi) = (self.window.lo[0], self.window.hi[0]);
            let mut cuts: Vec<f64> = (0..=8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect();
            cuts.push(self.center[0].clamp(lo, hi));
            if let Potential::Tabulated(s) = self.model.potential() {
                // the spline is a different cubic on each knot interval
                cuts.extend(s.knots().0.iter().copied().filter(|&x| x > lo && x < hi));
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1.0));
            cuts.windows(2)
                .map(|w| {
                    let mut c = Cell { lo: [0.0; MAX_DIM], hi: [0.0; MAX_DIM] };
                    c.lo[0] = w[0];
                    c.hi[0] = w[1];
                    c
                })
                .collect()
        } else {
            self.panel_cells(2)
        }
    }

    fn panel_cells(&self, n: usize) -> Vec<Cell> {
        let d = self.model.dim();
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut c = Cell { lo: [0.0; MAX_DIM], hi: [0.0; MAX_DIM] };
                for i in 0..d {
                    let j = idx % n;
                    idx /= n;
                    let (lo, hi) = (self.window.lo[i], self.window.hi[i]);
                    c.lo[i] = lo + (hi - lo) * j as f64 / n as f64;
                    c.hi[i] = if j + 1 == n { hi } else { lo + (hi - lo) * (j + 1) as f64 / n as f64 };
                }
                c
            })
            .collect()
    }

    /// Tensor GK21 on one cell for the weighted integrand e^{−(φ−φmin)} f.
    fn cell_sums(&self, cell: &Cell, m: usize, f: &dyn Integrand) -> Result<CellSums> {
        let d = self.model.dim();
        let mut half = [0.0; MAX_DIM];
        let mut mid = [0.0; MAX_DIM];
        for i in 0..d {
            half[i] = 0.5 * (cell.hi[i] - cell.lo[i]);
            mid[i] = 0.5 * (cell.hi[i] + cell.lo[i]);
        }
        let mut k = vec![0.0; m];
        // Σ (K weight with axis i's factor replaced by Kronrod − Gauss) · f
        let mut diff = vec![0.0; m * d];
        let mut abs = vec![0.0; m];
        let mut buf = vec![0.0; m];
        let mut x = [0.0; MAX_DIM];
        let mut node = [0usize; MAX_DIM];
        let count = NODES.pow(d as u32);
        for mut idx in 0..count {
            let mut wk = 1.0;
            for i in 0..d {
                let j = idx % NODES;
                idx /= NODES;
                node[i] = j;
                x[i] = mid[i] + half[i] * RULE.x[j];
                wk *= RULE.wk[j] * half[i];
            }
            let xs = &x[..d];
            let phi = self.model.phi(xs);
            let w = (-(phi - self.phi_min)).exp();
            if !(w > 0.0) {
                continue;
            }
            f(xs, &mut buf)?;
            for c in 0..m {
                let v = w * buf[c];
                if !v.is_finite() {
                    return Err(Error::NonFinite(xs.to_vec()));
                }
                k[c] += wk * v;
                abs[c] += wk * v.abs();
                for i in 0..d {
                    let j = node[i];
                    diff[c * d + i] += wk * (1.0 - RULE.wg[j] / RULE.wk[j]) * v;
                }
            }
        }
        let axis_err: Vec<f64> = diff.iter().map(|e| e.abs()).collect();
        let err = (0..m).map(|c| axis_err[c * d..(c + 1) * d].iter().sum()).collect();
        Ok(CellSums { k, err, axis_err, abs })
    }

    fn all_sums(&self, cells: &[Cell], m: usize, f: &dyn Integrand) -> Result<Vec<CellSums>> {
        cells.par_iter().map(|c| self.cell_sums(c, m, f)).collect()
    }

    fn totals(sums: &[CellSums], m: usize) -> (Totals, Vec<f64>) {
        let mut value = vec![NeumaierSum::default(); m];
        let mut error = vec![0.0; m];
        let mut abs = vec![0.0; m];
        for s in sums {
            for c in 0..m {
                value[c].add(s.k[c]);
                error[c] += s.err[c];
                abs[c] += s.abs[c];
            }
        }
        (Totals { value: value.iter().map(|v| v.value()).collect(), error }, abs)
    }

    /// Per-component tolerance; the last factor is a round-off floor.
    fn tolerances(&self, abs: &[f64], z_abs: f64) -> Vec<f64> {
        abs.iter().map(|&a| (self.spec.rtol * a + self.spec.atol * z_abs).max(64.0 * f64::EPSILON * a)).collect()
    }

    /// Refines from the current partition until every component of `f`
    /// (component 0 must be the constant 1) meets the tolerance. Each round
    /// bisects every cell whose error share is at or above the worst share
    /// (capped at its fair share tol/n), along the axis carrying most of it.
    fn refine(&self, m: usize, f: &dyn Integrand) -> Result<(Vec<Cell>, Totals)> {
        let d = self.model.dim();
        let mut cells = self.cells.clone();
        let mut sums = self.all_sums(&cells, m, f)?;
        loop {
            let (totals, abs) = Self::totals(&sums, m);
            let tol = self.tolerances(&abs, abs[0]);
            if totals.error.iter().zip(&tol).all(|(e, t)| e <= t) {
                return Ok((cells, totals));
            }
            let n = cells.len() as f64;
            let share: Vec<f64> = tol.iter().map(|t| (t / n).max(f64::MIN_POSITIVE)).collect();
            let splittable = |c: &Cell, i: usize| c.hi[i] - c.lo[i] > 1e-13 * c.lo[i].abs().max(c.hi[i].abs()).max(1.0);
            // (score, axis) per cell; score is the worst component's error in units of its share
            let plan: Vec<Option<(f64, usize)>> = sums
                .iter()
                .zip(&cells)
                .map(|(s, c)| {
                    let score = s.err.iter().zip(&share).map(|(e, t)| e / t).fold(0.0, f64::max);
                    let axis = (0..d)
                        .filter(|&i| splittable(c, i))
                        .map(|i| (i, (0..m).map(|k| s.axis_err[k * d + i] / share[k]).fold(0.0, f64::max)))
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?
                        .0;
                    Some((score, axis))
                })
                .collect();
            let Some(worst) = plan.iter().flatten().map(|p| p.0).max_by(f64::total_cmp) else {
                return Ok((cells, totals));
            };
            let threshold = worst.min(1.0);
            let split: Vec<Option<usize>> =
                plan.iter().map(|p| p.and_then(|(sc, ax)| (sc >= threshold).then_some(ax))).collect();
            let extra = split.iter().flatten().count();
            if cells.len() + extra > self.spec.max_subdiv {
                let worst_rel =
                    totals.error.iter().zip(&tol).map(|(e, t)| e / t.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
                return Err(Error::BudgetExhausted {
                    max_subdiv: self.spec.max_subdiv,
                    error: worst_rel * self.spec.rtol,
                });
            }
            let mut new_cells = Vec::with_capacity(cells.len() + extra);
            let mut fresh = Vec::new();
            for (c, sp) in cells.iter().zip(&split) {
                if let Some(i) = *sp {
                    let mid = 0.5 * (c.lo[i] + c.hi[i]);
                    let mut a = *c;
                    let mut b = *c;
                    a.hi[i] = mid;
                    b.lo[i] = mid;
                    fresh.push(a);
                    fresh.push(b);
                    new_cells.push(a);
                    new_cells.push(b);
                } else {
                    new_cells.push(*c);
                }
            }
            let mut fresh_sums = self.all_sums(&fresh, m, f)?.into_iter();
            let mut new_sums = Vec::with_capacity(new_cells.len());
            for (old, sp) in sums.into_iter().zip(&split) {
                if sp.is_some() {
                    new_sums.push(fresh_sums.next().expect("aligned"));
                    new_sums.push(fresh_sums.next().expect("aligned"));
                } else {
                    new_sums.push(old);
                }
            }
            cells = new_cells;
            sums = new_sums;
        }
    }

    /// E[fⱼ(X)] for j < m with error bounds (quadrature, normalizer and tail).
    pub fn expect_many<F: Integrand>(&self, m: usize, f: F) -> Result<Vec<Estimate>> {
        let g = |x: &[f64], out: &mut [f64]| -> Result<()> {
            out[0] = 1.0;
            f(x, &mut out[1..])
        };
        let (_, totals) = self.refine(m + 1, &g)?;
        let z = totals.value[0];
        let z_err = totals.error[0];
        Ok((1..=m)
            .map(|j| {
                let value = totals.value[j] / z;
                let error = totals.error[j] / z + value.abs() * z_err / z + self.tail_rel * value.abs().max(1.0);
                Estimate { value, error }
            })
            .collect())
    }

    pub fn expect<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Result<Estimate> {
        Ok(self.expect_many(1, |x: &[f64], out: &mut [f64]| {
            out[0] = f(x);
            Ok(())
        })?[0])
    }

    /// Mean, covariance and per-axis centered moments up to `max_moment`.
    pub fn summarize(&self, max_moment: usize) -> Result<Summary> {
        check_max_moment(max_moment)?;
        let d = self.model.dim();
        let means = self.expect_many(d, |x: &[f64], out: &mut [f64]| {
            out.copy_from_slice(x);
            Ok(())
        })?;
        let mu: Vec<f64> = means.iter().map(|e| e.value).collect();
        let npair = d * (d + 1) / 2;
        let nmom = max_moment.saturating_sub(2);
        let m = npair + d * nmom;
        let mu2 = mu.clone();
        let est = self.expect_many(m, move |x: &[f64], out: &mut [f64]| {
            let mut c = [0.0; MAX_DIM];
            for i in 0..x.len() {
                c[i] = x[i] - mu2[i];
            }
            let mut p = 0;
            for i in 0..x.len() {
                for j in 0..=i {
                    out[p] = c[i] * c[j];
                    p += 1;
                }
            }
            for i in 0..x.len() {
                let mut v = c[i] * c[i];
                for r in 0..nmom {
                    v *= c[i];
                    out[npair + i * nmom + r] = v;
                }
            }
            Ok(())
        })?;
        let mut cov = vec![vec![0.0; d]; d];
        let mut cov_error = vec![vec![0.0; d]; d];
        let mut p = 0;
        for i in 0..d {
            for j in 0..=i {
                // a mean error δ shifts second moments by δ² only
                let e = est[p].error + means[i].error * means[j].error;
                cov[i][j] = est[p].value;
                cov[j][i] = est[p].value;
                cov_error[i][j] = e;
                cov_error[j][i] = e;
                p += 1;
            }
        }
        let mut moments = vec![vec![0.0; max_moment + 1]; d];
        let mut moment_errors = vec![vec![0.0; max_moment + 1]; d];
        for i in 0..d {
            moments[i][0] = 1.0;
            if max_moment >= 2 {
                moments[i][2] = cov[i][i];
                moment_errors[i][2] = cov_error[i][i];
            }
            for r in 0..nmom {
                let e = est[npair + i * nmom + r];
                moments[i][r + 3] = e.value;
                moment_errors[i][r + 3] = e.error;
            }
        }
        Ok(Summary {
            mean: mu,
            mean_error: means.iter().map(|e| e.error).collect(),
            cov,
            cov_error,
            moments,
            moment_errors,
        })
    }
}

fn check_max_moment(max_moment: usize) -> Result<()> {
    if max_moment % 2 == 1 || max_moment > 12 {
        return Err(Error::InvalidArgument(format!("max_moment must be even and at most 12, got {max_moment}")));
    }
    Ok(())
}

/// Mean, covariance and centered moments with error bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub cov_error: Vec<Vec<f64>>,
    /// moments[i][r] = E[(Xᵢ − μᵢ)^r], r = 0..=max_moment
    pub moments: Vec<Vec<f64>>,
    pub moment_errors: Vec<Vec<f64>>,
}

impl Summary {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> SymMat {
        SymMat::from_rows(&self.cov).expect("covariance is square and symmetric")
    }

    /// Largest entrywise covariance error.
    pub fn cov_error_max(&self) -> f64 {
        self.cov_error.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    pub fn variance(&self) -> Estimate {
        Estimate { value: self.cov[0][0], error: self.cov_error[0][0] }
    }

    pub fn moment(&self, r: usize) -> Estimate {
        Estimate { value: self.moments[0][r], error: self.moment_errors[0][r] }
    }
}

pub fn normalize(model: &ContinuousModel, spec: &QuadratureSpec) -> Result<Normalization> {
    Ok(Integrator::new(model, spec)?.normalization())
}

/// E[g(X)] for a callable g.
pub fn expectation<F: Fn(&[f64]) -> f64 + Sync>(
    model: &ContinuousModel,
    g: F,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    Integrator::new(model, spec)?.expect(g)
}

pub fn summarize(model: &ContinuousModel, max_moment: usize, spec: &QuadratureSpec) -> Result<Summary> {
    Integrator::new(model, spec)?.summarize(max_moment)
}

/// Exact finite sums over the carried support. Error bounds cover rounding
/// and, for truncated pmfs, the neglected tail.
pub fn summarize_pmf(pmf: &DiscretePmf, max_moment: usize) -> Result<Summary> {
    check_max_moment(max_moment)?;
    let f = pmf.probs();
    let mu = pmf.mean();
    let k_max = pmf.truncation_index() as f64;
    let tail = pmf.tail_bound();
    let mut moments = vec![0.0; max_moment + 1];
    let mut errors = vec![0.0; max_moment + 1];
    moments[0] = 1.0;
    for r in 2..=max_moment {
        let terms = f.iter().enumerate().map(|(k, &p)| p * (k as f64 - mu).powi(r as i32));
        moments[r] = NeumaierSum::sum(terms.clone());
        let mag: f64 = terms.map(f64::abs).sum();
        // a tail beyond K weighs at least (K − μ)^r; use 2K as a generous lever
        errors[r] = 4.0 * f64::EPSILON * mag * r as f64 + tail * (2.0 * k_max + 2.0).powi(r as i32);
    }
    let mean_error = 4.0 * f64::EPSILON * mu.abs() + tail * (2.0 * k_max + 2.0);
    let var = if max_moment >= 2 {
        moments[2]
    } else {
        NeumaierSum::sum(f.iter().enumerate().map(|(k, &p)| p * (k as f64 - mu).powi(2)))
    };
    let var_err = if max_moment >= 2 { errors[2] } else { tail * (2.0 * k_max + 2.0).powi(2) };
    Ok(Summary {
        mean: vec![mu],
        mean_error: vec![mean_error],
        cov: vec![vec![var]],
        cov_error: vec![vec![var_err]],
        moments: vec![moments],
        moment_errors: vec![errors],
    })
}

/// Energy window: the box where φ − min φ ≤ B, clipped to the domain.
pub fn find_window(model: &ContinuousModel, budget: f64) -> Result<Window> {
    if model.dim() == 1 {
        window_1d(model, budget)
    } else {
        window_nd(model, budget)
    }
}

fn excess_at(model: &ContinuousModel, x: &[f64]) -> f64 {
    model.phi(x) - model.minimum().1
}

fn window_1d(model: &ContinuousModel, budget: f64) -> Result<Window> {
    let xm = model.minimum().0[0];
    let dom = model.domain();
    let h = model.hessian(&[xm]).map(|h| h.get(0, 0)).unwrap_or(0.0);
    let step0 = if h > 0.0 && h.is_finite() { (2.0 / h).sqrt().min(1e6) } else { 1.0 };
    let ex = |x: f64| excess_at(model, &[x]);
    let mut edges = [0.0; 2];
    let mut tail = 0.0;
    for (slot, dir) in [(0usize, -1.0f64), (1, 1.0)] {
        let bound = if dir < 0.0 { dom.lo[0] } else { dom.hi[0] };
        let mut inside = xm;
        let mut d = step0;
        let mut outside = None;
        for _ in 0..1100 {
            let x = xm + dir * d;
            if (x - bound) * dir >= 0.0 {
                // reached the domain edge
                if ex(bound) <= budget {
                    inside = bound;
                } else {
                    outside = Some(bound);
                }
                break;
            }
            if ex(x) > budget {
                // a second well further out keeps the search going
                let further = (1..=3)
                    .map(|j| xm + dir * d * f64::from(1 << j))
                    .find(|&y| (y - bound) * dir < 0.0 && ex(y) <= budget);
                match further {
                    Some(y) => {
                        inside = y;
                        d = (y - xm).abs() * 2.0;
                        continue;
                    }
                    None => {
                        outside = Some(x);
                        break;
                    }
                }
            }
            inside = x;
            d *= 2.0;
            if !d.is_finite() {
                return Err(Error::NonIntegrable("energy window does not close".into()));
            }
        }
        let edge = match outside {
            None => {
                if inside != bound {
                    return Err(Error::NonIntegrable("energy window does not close".into()));
                }
                bound
            }
            Some(mut out) => {
                for _ in 0..200 {
                    let mid = 0.5 * (inside + out);
                    if mid == inside || mid == out {
                        break;
                    }
                    if ex(mid) > budget {
                        out = mid;
                    } else {
                        inside = mid;
                    }
                }
                if out != bound {
                    let e = ex(out);
                    let slope = model.gradient(&[out]).map(|g| g[0] * dir).unwrap_or(0.0);
                    // convex tail: ∫_w^∞ e^{−φ} ≤ e^{−φ(w)} / φ′(w)
                    let lever = if slope > 0.0 { 1.0 / slope } else { 1.0 + (out - xm).abs() };
                    tail += (-e).exp() * lever;
                }
                out
            }
        };
        edges[slot] = edge;
    }
    if !(edges[0] < edges[1]) {
        return Err(Error::NonIntegrable("degenerate energy window".into()));
    }
    Ok(Window { lo: vec![edges[0]], hi: vec![edges[1]], tail_mass: tail })
}

fn window_nd(model: &ContinuousModel, budget: f64) -> Result<Window> {
    let d = model.dim();
    let xm = model.minimum().0.to_vec();
    let dom = model.domain();
    let mut radius = vec![0.0; d];
    if let Ok(h) = model.hessian(&xm) {
        if let Ok(hinv) = h.inverse() {
            if h.min_eigenvalue() > 0.0 {
                for i in 0..d {
                    radius[i] = (2.0 * budget * hinv.get(i, i)).sqrt();
                }
            }
        }
    }
    // line searches along each axis through the minimizer
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for i in 0..d {
        for dir in [-1.0f64, 1.0] {
            let bound = if dir < 0.0 { dom.lo[i] } else { dom.hi[i] };
            let mut t = radius[i].max(0.5);
            let mut y = xm.clone();
            let mut edge = bound;
            for _ in 0..1100 {
                let x = xm[i] + dir * t;
                if (x - bound) * dir >= 0.0 {
                    break;
                }
                y[i] = x;
                if excess_at(model, &y) > budget {
                    edge = x;
                    break;
                }
                t *= 1.5;
            }
            if !edge.is_finite() {
                return Err(Error::NonIntegrable("energy window does not close".into()));
            }
            if dir < 0.0 {
                lo[i] = edge;
            } else {
                hi[i] = edge;
            }
        }
    }
    // grow faces until min over each cut face exceeds the budget
    const FACE: usize = 17;
    let mut face_min = f64::INFINITY;
    for _ in 0..200 {
        let mut grew = false;
        face_min = f64::INFINITY;
        for i in 0..d {
            for side in 0..2 {
                let at = if side == 0 { lo[i] } else { hi[i] };
                if at == if side == 0 { dom.lo[i] } else { dom.hi[i] } {
                    continue;
                }
                let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();
                let count = FACE.pow(others.len() as u32);
                let mut fmin = f64::INFINITY;
                let mut y = vec![0.0; d];
                for mut idx in 0..count {
                    y[i] = at;
                    for &j in &others {
                        let k = idx % FACE;
                        idx /= FACE;
                        y[j] = lo[j] + (hi[j] - lo[j]) * k as f64 / (FACE - 1) as f64;
                    }
                    fmin = fmin.min(excess_at(model, &y));
                }
                face_min = face_min.min(fmin);
                if fmin <= budget {
                    let bound = if side == 0 { dom.lo[i] } else { dom.hi[i] };
                    let grown = xm[i] + 1.3 * (at - xm[i]);
                    let new = if side == 0 { grown.max(bound) } else { grown.min(bound) };
                    if side == 0 {
                        lo[i] = new;
                    } else {
                        hi[i] = new;
                    }
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    let cut = (0..d).any(|i| lo[i] > dom.lo[i] || hi[i] < dom.hi[i]);
    let tail = if cut && face_min.is_finite() {
        let area: f64 = (0..d).map(|i| (hi[i] - lo[i]).max(1.0)).product();
        2.0 * d as f64 * (-face_min).exp() * area
    } else {
        0.0
    };
    Ok(Window { lo, hi, tail_mass: tail })
}

/// Minimizer and minimum of φ over the domain.
///
/// 1D: bracket by expansion, dense scan, golden-section refinement.
/// d > 1: damped Newton from the natural center, projected onto the domain.
pub fn locate_minimum(model: &ContinuousModel) -> Result<(Vec<f64>, f64)> {
    let hint = model.potential().min_hint();
    let dom = model.domain();
    let clamp = |x: &mut [f64]| {
        for i in 0..x.len() {
            x[i] = x[i].clamp(dom.lo[i], dom.hi[i]);
        }
    };
    let phi = |x: &[f64]| model.phi(x);
    if model.dim() == 1 {
        let mut c = hint.clone();
        clamp(&mut c);
        let c = c[0];
        let f = |x: f64| phi(&[x]);
        let mut best = f(c);
        // expand a search interval on each side
        let mut ends = [dom.lo[0], dom.hi[0]];
        for (slot, dir) in [(0usize, -1.0f64), (1, 1.0)] {
            if ends[slot].is_finite() {
                continue;
            }
            let mut s = 1.0;
            loop {
                let x = c + dir * s;
                let v = f(x);
                best = best.min(v);
                if v > best + 200.0 || !v.is_finite() || s > 1e12 {
                    ends[slot] = x;
                    break;
                }
                s *= 2.0;
            }
        }
        let (a, b) = (ends[0], ends[1]);
        const SCAN: usize = 4001;
        let xs: Vec<f64> = (0..SCAN).map(|i| a + (b - a) * i as f64 / (SCAN - 1) as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let (imin, _) =
            vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let lo = xs[imin.saturating_sub(1)];
        let hi = xs[(imin + 1).min(SCAN - 1)];
        let (x, v) = golden(&f, lo, hi);
        let (x, v) = if vals[imin] < v { (xs[imin], vals[imin]) } else { (x, v) };
        if !v.is_finite() {
            return Err(Error::NonIntegrable("potential is infinite on the whole search range".into()));
        }
        return Ok((vec![x], v));
    }
    let mut x = hint;
    clamp(&mut x);
    let mut fx = phi(&x);
    for _ in 0..200 {
        let g = model.gradient(&x)?;
        let h = model.hessian(&x)?;
        let step: Vec<f64> = match h.cholesky() {
            Some(ch) => ch.solve(&g)[..x.len()].to_vec(),
            None => g.clone(),
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            clamp(&mut y);
            let fy = phi(&y);
            if fy < fx {
                let moved = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = y;
                fx = fy;
                improved = moved > 1e-15;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !fx.is_finite() {
        return Err(Error::NonIntegrable("potential is infinite at the search start".into()));
    }
    Ok((x, fx))
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Golden-section minimization on [a, b]; used by certification too.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    golden(f, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_binomial, builtin_gaussian, builtin_poisson, builtin_poly_potential};

    // Z, M2, M4 of φ = x²/2 + x⁴, from 40-digit mpmath quadrature
    const QUARTIC_Z: f64 = 1.554_817_802_141_979_71;
    const QUARTIC_M2: f64 = 0.278_843_988_417_740_409;
    const QUARTIC_M4: f64 = 0.180_289_002_895_564_898;

    fn quartic() -> ContinuousModel {
        builtin_poly_potential(&[0.0, 0.0, 0.5, 0.0, 1.0]).unwrap()
    }

    /// Composite Simpson on [−8, 8], independent of the engine.
    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let (a, b) = (-8.0, 8.0);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_normalizer() {
        let m = builtin_gaussian(&[0.0], &SymMat::scalar(1.0)).unwrap();
        let n = normalize(&m, &QuadratureSpec::default()).unwrap();
        assert!((n.z() / (2.0 * std::f64::consts::PI).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quartic_normalizer_matches_simpson_and_reference() {
        let m = quartic();
        let z = m.normalization().z();
        let phi = |x: f64| 0.5 * x * x + x.powi(4);
        let zs = simpson(|x| (-phi(x)).exp(), 1_000_000);
        assert!((z - zs).abs() / zs < 1e-9, "{z} vs {zs}");
        assert!((z - QUARTIC_Z).abs() / QUARTIC_Z < 1e-9);
        let e = m.normalization();
        assert!(e.rel_error < 1e-9 && e.tail_bound < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        let m = builtin_gaussian(&[0.0], &SymMat::scalar(1.0)).unwrap();
        let spec = QuadratureSpec::default();
        let e2 = expectation(&m, |x| x[0] * x[0], &spec).unwrap();
        assert!((e2.value - 1.0).abs() < 1e-9 && e2.error < 1e-8);
        let e4 = expectation(&m, |x| x[0].powi(4), &spec).unwrap();
        assert!((e4.value - 3.0).abs() < 1e-8);
        let s = summarize(&builtin_gaussian(&[5.0], &SymMat::scalar(2.0)).unwrap(), 4, &spec).unwrap();
        assert!((s.mean[0] - 5.0).abs() < 1e-9);
        assert!((s.cov[0][0] - 2.0).abs() < 1e-9);
        assert!((s.moments[0][4] - 12.0).abs() < 1e-8);
        assert!(s.moments[0][3].abs() < 1e-9);
    }

    #[test]
    fn quartic_second_moment_below_one() {
        let m = quartic();
        let spec = QuadratureSpec::default();
        let v = expectation(&m, |x| x[0] * x[0], &spec).unwrap();
        let phi = |x: f64| 0.5 * x * x + x.powi(4);
        let zs = simpson(|x| (-phi(x)).exp(), 1_000_000);
        let m2 = simpson(|x| x * x * (-phi(x)).exp(), 1_000_000) / zs;
        assert!((v.value - m2).abs() < 1e-9);
        assert!((v.value - QUARTIC_M2).abs() < 1e-10);
        assert!(v.value < 1.0);
        let s = summarize(&m, 12, &spec).unwrap();
        assert!((s.moments[0][4] - QUARTIC_M4).abs() < 1e-10);
    }

    #[test]
    fn halving_tolerance_stays_within_reported_error() {
        let loose = QuadratureSpec { rtol: 1e-7, ..Default::default() };
        let tight = QuadratureSpec { rtol: 5e-8, ..Default::default() };
        for model in [quartic(), builtin_gaussian(&[0.3], &SymMat::scalar(2.0)).unwrap()] {
            for g in [|x: &[f64]| x[0] * x[0], |x: &[f64]| x[0].powi(3) + x[0], |x: &[f64]| (x[0]).sin()] {
                let a = expectation(&model, g, &loose).unwrap();
                let b = expectation(&model, g, &tight).unwrap();
                assert!((a.value - b.value).abs() <= a.error, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn multivariate_gaussian_covariance() {
        let sigma = SymMat::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = builtin_gaussian(&[1.0, -1.0], &sigma).unwrap();
        let s = summarize(&m, 2, &QuadratureSpec::default()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.cov[i][j] - sigma.get(i, j)).abs() < 1e-8);
            }
        }
        let sigma3 = SymMat::from_rows(&[vec![1.0, 0.3, 0.0], vec![0.3, 0.5, 0.1], vec![0.0, 0.1, 2.0]]).unwrap();
        let m = builtin_gaussian(&[0.0, 0.5, 0.0], &sigma3).unwrap();
        let s = summarize(&m, 2, &QuadratureSpec::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.cov[i][j] - sigma3.get(i, j)).abs() < 1e-8, "{i}{j}: {}", s.cov[i][j]);
            }
            assert!((s.mean[i] - [0.0, 0.5, 0.0][i]).abs() < 1e-9);
        }
    }

    #[test]
    fn discrete_summaries_are_exact() {
        let b = builtin_binomial(10, 0.3).unwrap();
        let s = summarize_pmf(&b, 4).unwrap();
        assert!((s.mean[0] - 3.0).abs() < 1e-14);
        assert!((s.cov[0][0] - 2.1).abs() < 1e-14);
        let p = builtin_poisson(3.0, 1e-12).unwrap();
        let s = summarize_pmf(&p, 2).unwrap();
        assert!((s.mean[0] - 3.0).abs() < 1e-10);
        assert!((s.cov[0][0] - 3.0).abs() < 1e-9);
        assert!(summarize_pmf(&p, 3).is_err());
        assert!(summarize_pmf(&p, 14).is_err());
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let m = quartic();
        let spec = QuadratureSpec { max_subdiv: 2, rtol: 1e-14, atol: 1e-300, ..Default::default() };
        assert!(matches!(expectation(&m, |x| x[0].abs().sqrt(), &spec), Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn window_respects_budget() {
        let m = builtin_gaussian(&[2.0], &SymMat::scalar(4.0)).unwrap();
        let w = find_window(&m, 46.0).unwrap();
        // (x−2)²/8 = 46 at |x−2| = √368
        let r = 368f64.sqrt();
        assert!((w.lo[0] - (2.0 - r)).abs() < 1e-9 && (w.hi[0] - (2.0 + r)).abs() < 1e-9);
        assert!(w.tail_mass < 1e-19);
    }
}
