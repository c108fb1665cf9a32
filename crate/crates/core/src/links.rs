//! Binary-response link functions and the per-point GLM weights they induce.
//!
//! For a design point with linear predictor η the weight is
//!
//! ```text
//! w = (dμ/dη)² / (μ (1 − μ)),   μ = g⁻¹(η)
//! ```
//!
//! Supported inverse links:
//!
//! - logit:   μ = 1 / (1 + e^(−η))
//! - probit:  μ = Φ(η)
//! - loglog:  μ = exp(−exp(−η))
//! - cloglog: μ = 1 − exp(−exp(η))
//!
//! loglog and cloglog are mirror images, so `w_loglog(η) = w_cloglog(−η)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Below this value of μ(1−μ) the point carries no information.
const DEGENERATE_VARIANCE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logit,
    Probit,
    Loglog,
    Cloglog,
}

impl LinkKind {
    pub const ALL: [LinkKind; 4] = [
        LinkKind::Logit,
        LinkKind::Probit,
        LinkKind::Loglog,
        LinkKind::Cloglog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Logit => "logit",
            LinkKind::Probit => "probit",
            LinkKind::Loglog => "loglog",
            LinkKind::Cloglog => "cloglog",
        }
    }

    /// Inverse link μ = g⁻¹(η).
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            LinkKind::Logit => logistic(eta),
            LinkKind::Probit => normal_cdf(eta),
            LinkKind::Loglog => (-(-eta).exp()).exp(),
            LinkKind::Cloglog => -(-eta.exp()).exp_m1(),
        }
    }

    /// GLM weight (dμ/dη)² / (μ(1−μ)); zero at numerically degenerate points.
    pub fn weight(self, eta: f64) -> f64 {
        match self {
            LinkKind::Logit => {
                // μ(1−μ) = e^(−|η|) / (1 + e^(−|η|))², which is also the weight.
                let t = (-eta.abs()).exp();
                let var = t / ((1.0 + t) * (1.0 + t));
                if var < DEGENERATE_VARIANCE {
                    0.0
                } else {
                    var
                }
            }
            LinkKind::Probit => {
                let upper = normal_cdf(eta);
                let lower = normal_sf(eta);
                let var = upper * lower;
                if var < DEGENERATE_VARIANCE {
                    return 0.0;
                }
                let density = normal_pdf(eta);
                density * (density / var)
            }
            LinkKind::Cloglog => cloglog_weight(eta),
            LinkKind::Loglog => cloglog_weight(-eta),
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(LinkKind::Logit),
            "probit" => Ok(LinkKind::Probit),
            "loglog" | "log-log" => Ok(LinkKind::Loglog),
            "cloglog" | "complementary-log-log" => Ok(LinkKind::Cloglog),
            other => Err(Error::InvalidConfig(format!("unknown link `{other}`"))),
        }
    }
}

/// w = e^(2η) / (exp(e^η) − 1) for μ = 1 − exp(−e^η).
fn cloglog_weight(eta: f64) -> f64 {
    let s = eta.exp();
    let survive = (-s).exp();
    let event = -(-s).exp_m1();
    if survive * event < DEGENERATE_VARIANCE || !s.is_finite() {
        return 0.0;
    }
    // (s·e^(−s))² / ((1 − e^(−s))·e^(−s)) = s²·e^(−s) / (1 − e^(−s))
    s * s * survive / event
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let t = eta.exp();
        t / (1.0 + t)
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Free-function form of [`LinkKind::mean`].
pub fn mean(link: LinkKind, eta: f64) -> f64 {
    link.mean(eta)
}

/// Free-function form of [`LinkKind::weight`].
pub fn weight_at(link: LinkKind, eta: f64) -> f64 {
    link.weight(eta)
}

/// Regression coefficients on the linear-predictor scale, ordered like the
/// effects of the model they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Beta(Vec<f64>);

impl Beta {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidConfig("beta must not be empty".into()));
        }
        if let Some(bad) = coefficients.iter().find(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta entries must be finite, got {bad}"
            )));
        }
        Ok(Beta(coefficients))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-design-point GLM weights, one per point of a full 2^k factorial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || !w.len().is_power_of_two() || w.len() < 2 {
            return Err(Error::InvalidWeights(format!(
                "length must be a power of two (>= 2), got {}",
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weights must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(WeightVector(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of factors k for 2^k points.
    pub fn factors(&self) -> usize {
        self.0.len().trailing_zeros() as usize
    }

    pub fn zero_count(&self) -> usize {
        self.0.iter().filter(|w| **w == 0.0).count()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|w| w * c).collect())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Linear predictor at every design point: η = Xβ.
pub fn linear_predictor(beta: &Beta, model: &ModelSpec) -> Result<Vec<f64>> {
    if beta.len() != model.q() {
        return Err(Error::DimensionMismatch {
            what: "beta length vs model terms",
            expected: model.q(),
            got: beta.len(),
        });
    }
    let x = model.design_matrix();
    Ok(x.row_iter()
        .map(|row| row.iter().zip(beta.as_slice()).map(|(x, b)| x * b).sum())
        .collect())
}

/// Weights at the 2^k points of `model` under assumed coefficients `beta`.
pub fn weights_for_design(link: LinkKind, beta: &Beta, model: &ModelSpec) -> Result<WeightVector> {
    let eta = linear_predictor(beta, model)?;
    WeightVector::new(eta.into_iter().map(|e| link.weight(e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn means_at_zero() {
        assert_eq!(LinkKind::Logit.mean(0.0), 0.5);
        assert_relative_eq!(LinkKind::Probit.mean(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(
            LinkKind::Cloglog.mean(0.0),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(LinkKind::Loglog.mean(0.0), (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn weights_at_zero() {
        assert_eq!(LinkKind::Logit.weight(0.0), 0.25);
        assert_relative_eq!(LinkKind::Probit.weight(0.0), 2.0 / PI, max_relative = 1e-14);
    }

    #[test]
    fn extreme_predictors_give_zero_weight() {
        for link in LinkKind::ALL {
            for eta in [-1e4, 1e4, f64::MAX.ln() * 2.0, -800.0, 800.0] {
                let w = link.weight(eta);
                assert!(w >= 0.0 && w.is_finite(), "{link} {eta} {w}");
            }
            assert_eq!(link.weight(1e4), 0.0, "{link}");
            assert_eq!(link.weight(-1e4), 0.0, "{link}");
        }
        assert_eq!(LinkKind::Cloglog.weight(50.0), 0.0);
        assert_eq!(LinkKind::Loglog.weight(-50.0), 0.0);
    }

    #[test]
    fn loglog_mirrors_cloglog() {
        for i in -40..=40 {
            let eta = i as f64 * 0.2;
            assert_eq!(LinkKind::Loglog.weight(eta), LinkKind::Cloglog.weight(-eta));
            assert_relative_eq!(
                LinkKind::Loglog.mean(eta),
                1.0 - LinkKind::Cloglog.mean(-eta),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn probit_tail_stays_finite() {
        // Mills-ratio regime: w ≈ φ(η)/Φ(−η) · φ(η)/Φ(η) ~ |η|·φ(η) for large η.
        let w = LinkKind::Probit.weight(30.0);
        assert!(w > 0.0 && w < 1e-190);
    }

    #[test]
    fn parse_names() {
        assert_eq!("log-log".parse::<LinkKind>().unwrap(), LinkKind::Loglog);
        assert_eq!("CLOGLOG".parse::<LinkKind>().unwrap(), LinkKind::Cloglog);
        assert!("identity".parse::<LinkKind>().is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.1, 0.2, 0.3]).is_err());
        assert!(WeightVector::new(vec![0.1, -0.2]).is_err());
        assert!(WeightVector::new(vec![0.1, f64::NAN]).is_err());
        let w = WeightVector::new(vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        assert_eq!(w.factors(), 2);
        assert_eq!(w.zero_count(), 1);
    }

    #[test]
    fn beta_dimension_mismatch() {
        let model = ModelSpec::main_effects(2).unwrap();
        let beta = Beta::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            weights_for_design(LinkKind::Logit, &beta, &model),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Beta::new(vec![1.0, f64::INFINITY]).is_err());
    }
}
