//! Seeded generator of models that are SLC by construction.
//!
//! Continuous members have φ = ½ (x−μ)ᵀ S⁻¹ (x−μ) plus nonnegative multiples
//! of convex even powers (t − m)⁴ and t⁶, so φ″ ⪰ S⁻¹ and the model is SLC(S).
//! Discrete members are Poisson(λ) weights times e^{bk − ck²} with c ≥ 0, whose
//! ratio differences are at least e^{−b}/λ, giving α* ≤ λe^b.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{AxisCoeffs, ModelConfig, OneOrMany};
use crate::numeric::NeumaierSum;

/// Tail mass cut from discrete members.
pub const CORPUS_TAIL_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Continuous1d,
    Continuous2d,
    Continuous3d,
    Discrete,
}

const CYCLE: [CorpusKind; 5] = [
    CorpusKind::Continuous1d,
    CorpusKind::Continuous1d,
    CorpusKind::Continuous2d,
    CorpusKind::Continuous3d,
    CorpusKind::Discrete,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub kind: CorpusKind,
    /// α the construction guarantees (1D and discrete)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_bound: Option<f64>,
    /// Σ the construction guarantees (d > 1)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_bound: Option<Vec<Vec<f64>>>,
    pub config: ModelConfig,
}

/// Coefficients of a (t − m)⁴, constant dropped.
fn shifted_quartic(a: f64, m: f64) -> [f64; 5] {
    [0.0, -4.0 * a * m.powi(3), 6.0 * a * m * m, -4.0 * a * m, a]
}

fn gen_1d(rng: &mut ChaCha8Rng) -> (ModelConfig, f64) {
    let s = (rng.random_range(-1.4f64..1.4)).exp();
    let a4 = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.0..1.5) };
    let a6 = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) };
    let m = rng.random_range(-1.5..1.5);
    let b = rng.random_range(-1.0..1.0);
    let q = shifted_quartic(a4, m);
    let mut c = vec![0.0; 7];
    c[1] = b + q[1];
    c[2] = 0.5 / s + q[2];
    c[3] = q[3];
    c[4] = q[4];
    c[6] = a6;
    while c.len() > 3 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let cfg =
        ModelConfig { family: "poly_potential".into(), coeffs: Some(AxisCoeffs::Single(c)), ..Default::default() };
    (cfg, s)
}

/// S = L Lᵀ with a random lower-triangular L.
fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..i {
            l[i][j] = rng.random_range(-0.6..0.6);
        }
        l[i][i] = rng.random_range(0.5..1.6);
    }
    (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| l[i][k] * l[j][k]).sum()).collect()).collect()
}

fn gen_nd(rng: &mut ChaCha8Rng, d: usize) -> (ModelConfig, Vec<Vec<f64>>) {
    let sigma = random_spd(rng, d);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let a = rng.random_range(0.05..1.0);
            let m = rng.random_range(-1.0..1.0);
            shifted_quartic(a, m).to_vec()
        })
        .collect();
    let cfg = ModelConfig {
        family: "poly_potential".into(),
        coeffs: Some(AxisCoeffs::PerAxis(axes)),
        mu: Some(OneOrMany::Many(mu)),
        sigma: Some(sigma.clone()),
        ..Default::default()
    };
    (cfg, sigma)
}

fn gen_discrete(rng: &mut ChaCha8Rng) -> (ModelConfig, f64) {
    let lambda = rng.random_range(0.3..12.0);
    let b = rng.random_range(-0.5..0.5);
    let c = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..0.15) };
    let lam = lambda * f64::exp(b);
    let upper = (lam + 40.0 * lam.sqrt() + 60.0).ceil() as usize;
    let mut logw = Vec::with_capacity(upper + 1);
    let mut lf = 0.0;
    for k in 0..=upper {
        if k > 0 {
            lf += (k as f64).ln();
        }
        logw.push(k as f64 * lam.ln() - lf - c * (k * k) as f64);
    }
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total = NeumaierSum::sum(w.iter().copied());
    let mut tail = NeumaierSum::default();
    let mut k_max = upper;
    for k in (0..upper).rev() {
        tail.add(w[k + 1] / total);
        if tail.value() >= CORPUS_TAIL_EPS {
            k_max = k + 1;
            break;
        }
    }
    let probs: Vec<f64> = w[..=k_max].iter().map(|x| x / total).collect();
    let cfg = ModelConfig {
        family: "tabulated_pmf".into(),
        probs: Some(probs),
        tail_eps: Some(CORPUS_TAIL_EPS),
        ..Default::default()
    };
    (cfg, lam)
}

/// `count` members cycling through 1D, 1D, 2D, 3D and discrete; identical for
/// identical seeds.
pub fn gen_corpus(seed: u64, count: usize) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let kind = CYCLE[i % CYCLE.len()];
            let name = format!("corpus-{seed}-{i:04}");
            match kind {
                CorpusKind::Continuous1d => {
                    let (config, s) = gen_1d(&mut rng);
                    CorpusEntry { name, kind, alpha_bound: Some(s), sigma_bound: None, config }
                }
                CorpusKind::Continuous2d | CorpusKind::Continuous3d => {
                    let d = if kind == CorpusKind::Continuous2d { 2 } else { 3 };
                    let (config, sigma) = gen_nd(&mut rng, d);
                    CorpusEntry { name, kind, alpha_bound: None, sigma_bound: Some(sigma), config }
                }
                CorpusKind::Discrete => {
                    let (config, lam) = gen_discrete(&mut rng);
                    CorpusEntry { name, kind, alpha_bound: Some(lam), sigma_bound: None, config }
                }
            }
        })
        .collect()
}
