//! Test functions g, u, v fed to the inequalities, with closed-form
//! derivatives and checked monotonicity declarations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    #[serde(alias = "strictly_increasing")]
    Strict,
    Nondecreasing,
    Nonincreasing,
    None,
}

fn one() -> f64 {
    1.0
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

/// A scalar function on ℝ^d (or on the integers, for `Tabulated`).
///
/// One-variable kinds act on coordinate `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// Σ cₖ tᵏ
    Poly {
        coeffs: Vec<f64>,
        #[serde(default, skip_serializing_if = "is_zero")]
        axis: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monotone: Option<Monotone>,
    },
    /// (t − c)^degree; the center defaults to the model mean.
    CenteredMonomial {
        degree: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
        #[serde(default, skip_serializing_if = "is_zero")]
        axis: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monotone: Option<Monotone>,
    },
    /// 1 / (1 + 2^{−t/scale}), i.e. 2^{t/s} / (2^{t/s} + 1).
    Sigmoid {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        axis: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monotone: Option<Monotone>,
    },
    /// aᵀx
    Linear { direction: Vec<f64> },
    /// coef · Πᵢ xᵢ^{powersᵢ}
    Monomial {
        powers: Vec<u32>,
        #[serde(default = "one")]
        coef: f64,
    },
    /// Values at k = 0, 1, …; discrete use only.
    Tabulated {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        monotone: Option<Monotone>,
    },
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect()
}

const CHECK_GRID: usize = 4097;
const CHECK_MARGIN: f64 = 1e-12;

impl TestFunction {
    pub fn poly(coeffs: &[f64]) -> Self {
        TestFunction::Poly { coeffs: coeffs.to_vec(), axis: 0, monotone: None }
    }

    /// t ↦ tᵏ
    pub fn power(k: u32) -> Self {
        let mut c = vec![0.0; k as usize + 1];
        c[k as usize] = 1.0;
        Self::poly(&c)
    }

    pub fn centered(degree: u32, center: Option<f64>) -> Self {
        TestFunction::CenteredMonomial { degree, center, axis: 0, monotone: None }
    }

    pub fn sequence_of(values: Vec<f64>, monotone: Option<Monotone>) -> Self {
        TestFunction::Tabulated { values, monotone }
    }

    pub fn parse(doc: &str) -> Result<Self> {
        json5::from_str(doc).map_err(|e| Error::Config(format!("test function: {e}")))
    }

    /// Compact JSON identifier echoed in reports.
    pub fn id(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    /// Fills an unset center from the model mean.
    pub fn resolved(&self, mean: &[f64]) -> Self {
        match self {
            TestFunction::CenteredMonomial { degree, center: None, axis, monotone } => TestFunction::CenteredMonomial {
                degree: *degree,
                center: Some(mean.get(*axis).copied().unwrap_or(0.0)),
                axis: *axis,
                monotone: *monotone,
            },
            other => other.clone(),
        }
    }

    /// Smallest dimension the function can act on.
    pub fn min_dim(&self) -> usize {
        match self {
            TestFunction::Poly { axis, .. }
            | TestFunction::CenteredMonomial { axis, .. }
            | TestFunction::Sigmoid { axis, .. } => axis + 1,
            TestFunction::Linear { direction } => direction.len(),
            TestFunction::Monomial { powers, .. } => powers.len(),
            TestFunction::Tabulated { .. } => 1,
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.min_dim() > dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.min_dim() });
        }
        Ok(())
    }

    fn axis(&self) -> Option<usize> {
        match self {
            TestFunction::Poly { axis, .. }
            | TestFunction::CenteredMonomial { axis, .. }
            | TestFunction::Sigmoid { axis, .. } => Some(*axis),
            _ => None,
        }
    }

    fn value1(&self, t: f64) -> f64 {
        match self {
            TestFunction::Poly { coeffs, .. } => poly_eval(coeffs, t),
            TestFunction::CenteredMonomial { degree, center, .. } => (t - center.unwrap_or(0.0)).powi(*degree as i32),
            TestFunction::Sigmoid { scale, .. } => 1.0 / (1.0 + (-t / scale).exp2()),
            _ => unreachable!("not a one-variable kind"),
        }
    }

    fn deriv1(&self, t: f64) -> f64 {
        match self {
            TestFunction::Poly { coeffs, .. } => poly_eval(&poly_deriv(coeffs), t),
            TestFunction::CenteredMonomial { degree, center, .. } => {
                if *degree == 0 {
                    0.0
                } else {
                    *degree as f64 * (t - center.unwrap_or(0.0)).powi(*degree as i32 - 1)
                }
            }
            TestFunction::Sigmoid { scale, .. } => {
                let s = 1.0 / (1.0 + (-t / scale).exp2());
                std::f64::consts::LN_2 / scale * s * (1.0 - s)
            }
            _ => unreachable!("not a one-variable kind"),
        }
    }

    /// g(x); for `Tabulated`, x[0] is rounded to the nearest index.
    pub fn value(&self, x: &[f64]) -> f64 {
        if let Some(a) = self.axis() {
            return self.value1(x[a]);
        }
        match self {
            TestFunction::Linear { direction } => direction.iter().zip(x).map(|(a, b)| a * b).sum(),
            TestFunction::Monomial { powers, coef } => {
                coef * powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>()
            }
            TestFunction::Tabulated { values, .. } => {
                let k = x[0].round();
                if k < 0.0 || k as usize >= values.len() {
                    f64::NAN
                } else {
                    values[k as usize]
                }
            }
            _ => unreachable!(),
        }
    }

    /// ∇g(x) written into `out` (length = dimension of x).
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(a) = self.axis() {
            out[a] = self.deriv1(x[a]);
            return;
        }
        match self {
            TestFunction::Linear { direction } => {
                for (o, &a) in out.iter_mut().zip(direction) {
                    *o = a;
                }
            }
            TestFunction::Monomial { powers, coef } => {
                for i in 0..powers.len() {
                    if powers[i] == 0 {
                        continue;
                    }
                    let mut p = coef * powers[i] as f64 * x[i].powi(powers[i] as i32 - 1);
                    for (j, (&pj, &xj)) in powers.iter().zip(x).enumerate() {
                        if j != i {
                            p *= xj.powi(pj as i32);
                        }
                    }
                    out[i] = p;
                }
            }
            TestFunction::Tabulated { .. } => out.iter_mut().for_each(|o| *o = f64::NAN),
            _ => unreachable!(),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, TestFunction::Tabulated { .. })
    }

    /// Values at k = 0..len.
    pub fn sequence(&self, len: usize) -> Result<Vec<f64>> {
        if self.axis().is_some_and(|a| a != 0) || self.min_dim() > 1 {
            return Err(Error::InvalidArgument("discrete test functions act on one variable".into()));
        }
        match self {
            TestFunction::Tabulated { values, .. } => {
                if values.len() < len {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated test function has {} values, support needs {len}",
                        values.len()
                    )));
                }
                Ok(values[..len].to_vec())
            }
            _ => Ok((0..len).map(|k| self.value(&[k as f64])).collect()),
        }
    }

    /// Declared monotonicity, or what the kind guarantees when undeclared.
    pub fn monotone(&self) -> Monotone {
        let declared = match self {
            TestFunction::Poly { monotone, .. }
            | TestFunction::CenteredMonomial { monotone, .. }
            | TestFunction::Sigmoid { monotone, .. }
            | TestFunction::Tabulated { monotone, .. } => *monotone,
            _ => None,
        };
        if let Some(m) = declared {
            return m;
        }
        let orient = |c: f64| {
            if c > 0.0 {
                Monotone::Strict
            } else if c < 0.0 {
                Monotone::Nonincreasing
            } else {
                Monotone::None
            }
        };
        match self {
            TestFunction::CenteredMonomial { degree, .. } if degree % 2 == 1 => Monotone::Strict,
            TestFunction::Sigmoid { scale, .. } if *scale > 0.0 => Monotone::Strict,
            TestFunction::Poly { coeffs, .. } => {
                // only c₀ + c tᵖ with odd p (or a constant) is monotone for sure
                let top = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
                let pure = coeffs[1..top.max(1)].iter().all(|&c| c == 0.0);
                if top == 0 {
                    Monotone::Nondecreasing
                } else if pure && top % 2 == 1 {
                    orient(coeffs[top])
                } else {
                    Monotone::None
                }
            }
            TestFunction::Linear { direction } if direction.len() == 1 => orient(direction[0]),
            TestFunction::Monomial { powers, coef } if powers.len() == 1 && powers[0] % 2 == 1 => orient(*coef),
            _ => Monotone::None,
        }
    }

    /// Checks that t ↦ g(t) has the stated monotonicity on [lo, hi].
    /// Odd centered monomials and sigmoids are decided symbolically,
    /// polynomials by the sign of g′ on a dense grid.
    pub fn check_monotone_on(&self, want: Monotone, lo: f64, hi: f64) -> Result<()> {
        let fail = |why: &str| Err(Error::NotIncreasing(format!("{}: {why}", self.id())));
        if want == Monotone::None {
            return Ok(());
        }
        match self {
            TestFunction::CenteredMonomial { degree, .. } => {
                let ok = match want {
                    Monotone::Strict | Monotone::Nondecreasing => {
                        degree % 2 == 1 || (*degree == 0 && want != Monotone::Strict)
                    }
                    Monotone::Nonincreasing => *degree == 0,
                    Monotone::None => true,
                };
                if ok {
                    Ok(())
                } else {
                    fail("centered monomial of even degree is not monotone")
                }
            }
            TestFunction::Sigmoid { scale, .. } => {
                let ok = match want {
                    Monotone::Strict | Monotone::Nondecreasing => *scale > 0.0,
                    Monotone::Nonincreasing => *scale < 0.0,
                    Monotone::None => true,
                };
                if ok {
                    Ok(())
                } else {
                    fail("sigmoid has the wrong orientation")
                }
            }
            TestFunction::Poly { coeffs, .. } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return fail("monotonicity check needs a finite window");
                }
                let d = poly_deriv(coeffs);
                let sign = if want == Monotone::Nonincreasing { -1.0 } else { 1.0 };
                let vals: Vec<f64> = (0..CHECK_GRID)
                    .map(|i| sign * poly_eval(&d, lo + (hi - lo) * i as f64 / (CHECK_GRID - 1) as f64))
                    .collect();
                let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let tol = CHECK_MARGIN * scale;
                if let Some(i) = vals.iter().position(|&v| v < -tol) {
                    let t = lo + (hi - lo) * i as f64 / (CHECK_GRID - 1) as f64;
                    return fail(&format!("derivative has the wrong sign at {t}"));
                }
                if want == Monotone::Strict && vals.windows(2).any(|w| w[0] <= tol && w[1] <= tol) {
                    return fail("derivative vanishes on an interval");
                }
                Ok(())
            }
            TestFunction::Linear { direction } if direction.len() == 1 => {
                let a = direction[0];
                let ok = match want {
                    Monotone::Strict => a > 0.0,
                    Monotone::Nondecreasing => a >= 0.0,
                    Monotone::Nonincreasing => a <= 0.0,
                    Monotone::None => true,
                };
                if ok {
                    Ok(())
                } else {
                    fail("linear function has the wrong orientation")
                }
            }
            TestFunction::Monomial { powers, coef } if powers.len() == 1 => {
                let p = powers[0];
                let ok = match want {
                    Monotone::Strict => p % 2 == 1 && *coef > 0.0,
                    Monotone::Nondecreasing => (p % 2 == 1 && *coef >= 0.0) || p == 0,
                    Monotone::Nonincreasing => (p % 2 == 1 && *coef <= 0.0) || p == 0,
                    Monotone::None => true,
                };
                if ok {
                    Ok(())
                } else {
                    fail("monomial is not monotone in the stated direction")
                }
            }
            TestFunction::Tabulated { .. } => fail("tabulated test functions are discrete only"),
            _ => fail("monotonicity of a multivariate function is undefined"),
        }
    }

    /// Checks the stated monotonicity on the sequence g(0), …, g(len − 1).
    pub fn check_monotone_seq(&self, want: Monotone, len: usize) -> Result<()> {
        let v = self.sequence(len)?;
        check_sequence(&v, want).map_err(|k| {
            Error::NotIncreasing(format!("{}: monotonicity fails between k = {k} and k = {}", self.id(), k + 1))
        })
    }
}

/// Returns the first index k where v(k) → v(k+1) breaks `want`.
pub fn check_sequence(v: &[f64], want: Monotone) -> std::result::Result<(), usize> {
    for (k, w) in v.windows(2).enumerate() {
        let ok = match want {
            Monotone::Strict => w[1] > w[0],
            Monotone::Nondecreasing => w[1] >= w[0],
            Monotone::Nonincreasing => w[1] <= w[0],
            Monotone::None => true,
        };
        if !ok || w[0].is_nan() || w[1].is_nan() {
            return Err(k);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_forms() {
        let p = TestFunction::parse(r#"{kind: "poly", coeffs: [0, 1, 0, 0.1]}"#).unwrap();
        assert_eq!(p, TestFunction::poly(&[0.0, 1.0, 0.0, 0.1]));
        let c = TestFunction::parse(r#"{kind:"centered_monomial",degree:3}"#).unwrap();
        assert_eq!(c, TestFunction::centered(3, None));
        let s = TestFunction::parse(r#"{kind:"poly",coeffs:[0,1],monotone:"strict"}"#).unwrap();
        assert_eq!(s.monotone(), Monotone::Strict);
        let s = TestFunction::parse(r#"{kind:"poly",coeffs:[0,1],monotone:"strictly_increasing"}"#).unwrap();
        assert_eq!(s.monotone(), Monotone::Strict);
        assert!(TestFunction::parse(r#"{kind:"poly",coeffs:[0,1],bogus:1}"#).is_err());
        assert!(TestFunction::parse(r#"{kind:"spline"}"#).is_err());
    }

    #[test]
    fn id_round_trips() {
        for f in [
            TestFunction::poly(&[1.0, -2.0]),
            TestFunction::centered(3, Some(0.5)),
            TestFunction::Sigmoid { scale: 2.0, axis: 1, monotone: None },
            TestFunction::Monomial { powers: vec![1, 2], coef: 3.0 },
            TestFunction::sequence_of(vec![1.0, 2.0], Some(Monotone::Strict)),
        ] {
            assert_eq!(TestFunction::parse(&f.id()).unwrap(), f);
        }
    }

    #[test]
    fn values_and_derivatives() {
        let c = TestFunction::centered(3, None).resolved(&[2.0]);
        assert_eq!(c.value(&[4.0]), 8.0);
        let mut g = [0.0];
        c.gradient(&[4.0], &mut g);
        assert_eq!(g[0], 12.0);

        let m = TestFunction::Monomial { powers: vec![2, 1], coef: 2.0 };
        let mut g = [0.0; 2];
        m.gradient(&[3.0, 5.0], &mut g);
        assert_eq!(m.value(&[3.0, 5.0]), 90.0);
        assert_eq!(g, [60.0, 18.0]);

        let s = TestFunction::Sigmoid { scale: 1.0, axis: 0, monotone: None };
        assert_eq!(s.sequence(3).unwrap(), vec![0.5, 2.0 / 3.0, 0.8]);
        // derivative against a central difference
        let h = 1e-5;
        let mut g = [0.0];
        s.gradient(&[0.3], &mut g);
        let fd = (s.value(&[0.3 + h]) - s.value(&[0.3 - h])) / (2.0 * h);
        assert!((g[0] - fd).abs() < 1e-9);
    }

    #[test]
    fn monotonicity_validation() {
        assert!(TestFunction::centered(3, None).check_monotone_on(Monotone::Strict, -1.0, 1.0).is_ok());
        assert!(TestFunction::centered(2, None).check_monotone_on(Monotone::Strict, -1.0, 1.0).is_err());
        assert!(TestFunction::poly(&[0.0, 0.0, 0.0, 1.0]).check_monotone_on(Monotone::Strict, -3.0, 3.0).is_ok());
        assert!(TestFunction::poly(&[0.0, 1.0, 0.0, 0.1]).check_monotone_on(Monotone::Strict, -9.0, 9.0).is_ok());
        assert!(TestFunction::poly(&[0.0, -1.0, 0.0, 1.0]).check_monotone_on(Monotone::Strict, -2.0, 2.0).is_err());
        assert!(TestFunction::poly(&[4.0]).check_monotone_on(Monotone::Strict, -2.0, 2.0).is_err());
        assert!(TestFunction::poly(&[4.0]).check_monotone_on(Monotone::Nondecreasing, -2.0, 2.0).is_ok());
        assert!(TestFunction::power(2).check_monotone_seq(Monotone::Strict, 10).is_ok());
        assert!(TestFunction::sequence_of(vec![0.0, 1.0, 1.0], None).check_monotone_seq(Monotone::Strict, 3).is_err());
        assert!(TestFunction::sequence_of(vec![0.0, 1.0], None).sequence(3).is_err());
    }
}
