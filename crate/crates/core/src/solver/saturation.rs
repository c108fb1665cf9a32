//! When is the D-optimal 2² design supported on only three points?
//!
//! In variance terms the design is saturated exactly when
//! 2·max vᵢ ≥ Σvᵢ, i.e. 2/min wᵢ ≥ Σ 1/wᵢ. For the logit link the same region
//! has an explicit description in terms of the coefficients:
//!
//! ```text
//! β₀ ≠ 0,
//! |β₁| > ½·log((e^{2|β₀|} + 1) / (e^{2|β₀|} − 1)),
//! |β₂| ≥ log((2e^{|β₀|+|β₁|} + √((e^{4|β₀|} − 1)(e^{4|β₁|} − 1)))
//!            / ((e^{2|β₀|} − 1)(e^{2|β₁|} − 1) − 2))
//! ```
//!
//! Note the mixed strict / non-strict inequalities. Both thresholds are
//! evaluated in a form scaled by e^{−2(|β₀|+|β₁|)} so that large
//! coefficients do not overflow.

use serde::{Deserialize, Serialize};

use super::descending_order;
use crate::error::{Error, Result};
use crate::links::{weights_for_design, Beta, LinkKind, WeightVector};
use crate::model::{objective_l4, ModelSpec};

/// Thresholds on |β₁| and |β₂|; `None` where the threshold does not exist
/// (β₀ = 0, or |β₁| not above its threshold).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaThresholds {
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub holds: bool,
    /// 2·max vᵢ − Σvᵢ (infinite when a weight vanishes).
    pub margin: f64,
    pub beta_thresholds: Option<BetaThresholds>,
}

fn margin_of(w: &[f64]) -> f64 {
    if w.contains(&0.0) {
        return f64::INFINITY;
    }
    let v: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    2.0 * max - v.iter().sum::<f64>()
}

/// Saturation condition on four positive weights.
pub fn saturation_condition_w(w: &WeightVector) -> Result<SaturationReport> {
    if w.len() != 4 {
        return Err(Error::DimensionMismatch {
            what: "weights for the 2x2 model",
            expected: 4,
            got: w.len(),
        });
    }
    if let Some(bad) = w.as_slice().iter().find(|x| **x <= 0.0) {
        return Err(Error::InvalidWeights(format!(
            "weights must be positive, got {bad}"
        )));
    }
    let margin = margin_of(w.as_slice());
    Ok(SaturationReport {
        holds: margin >= 0.0,
        margin,
        beta_thresholds: None,
    })
}

/// ½·log((e^{2b₀}+1)/(e^{2b₀}−1)) for b₀ = |β₀| > 0.
fn beta1_threshold(b0: f64) -> Option<f64> {
    if b0 == 0.0 {
        return None;
    }
    let t = (-2.0 * b0).exp();
    Some(0.5 * (t.ln_1p() - (-(-2.0 * b0).exp_m1()).ln()))
}

/// |β₂| threshold for b₀, b₁ > 0, or `None` when the denominator of the
/// unscaled expression is not positive (equivalently b₁ ≤ the β₁ threshold).
fn beta2_threshold(b0: f64, b1: f64) -> Option<f64> {
    let one_minus = |x: f64| -(-x).exp_m1();
    let s = b0 + b1;
    let den = one_minus(2.0 * b0) * one_minus(2.0 * b1) - 2.0 * (-2.0 * s).exp();
    if !(den > 0.0) {
        return None;
    }
    let num = 2.0 * (-s).exp() + (one_minus(4.0 * b0) * one_minus(4.0 * b1)).sqrt();
    Some((num / den).ln())
}

fn thresholds(b0: f64, b1: f64) -> BetaThresholds {
    let beta1 = beta1_threshold(b0);
    let beta2 = match beta1 {
        Some(t1) if b1 > t1 => beta2_threshold(b0, b1),
        _ => None,
    };
    BetaThresholds { beta1, beta2 }
}

/// Saturation condition in coefficient space (logit link, 2² main effects).
///
/// `margin` is evaluated on the implied logit weights.
pub fn saturation_condition_beta(link: LinkKind, beta: &Beta) -> Result<SaturationReport> {
    if link != LinkKind::Logit {
        return Err(Error::UnsupportedLink(link.name()));
    }
    if beta.len() != 3 {
        return Err(Error::DimensionMismatch {
            what: "beta for the 2x2 main-effects model",
            expected: 3,
            got: beta.len(),
        });
    }
    let b = beta.as_slice();
    let (b0, b1, b2) = (b[0].abs(), b[1].abs(), b[2].abs());
    let th = thresholds(b0, b1);
    let holds = match (th.beta1, th.beta2) {
        (Some(t1), Some(t2)) => b1 > t1 && b2 >= t2,
        _ => false,
    };
    let w = weights_for_design(LinkKind::Logit, beta, &ModelSpec::main_effects(2)?)?;
    Ok(SaturationReport {
        holds,
        margin: margin_of(w.as_slice()),
        beta_thresholds: Some(th),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub beta1: f64,
    /// Lower boundary for |β₂|; `None` when no |β₂| saturates at this |β₁|.
    pub beta2_threshold: Option<f64>,
}

impl BoundaryPoint {
    pub fn feasible(&self) -> bool {
        self.beta2_threshold.is_some()
    }
}

/// Lower boundary |β₂|(|β₁|) of the saturated region for fixed β₀ > 0.
pub fn saturation_boundary(beta0: f64, beta1_grid: &[f64]) -> Result<Vec<BoundaryPoint>> {
    if !(beta0.is_finite() && beta0 > 0.0) {
        return Err(Error::Precondition(format!(
            "beta0 must be positive, got {beta0}"
        )));
    }
    if let Some(bad) = beta1_grid.iter().find(|b| !b.is_finite()) {
        return Err(Error::Precondition(format!(
            "beta1 grid entries must be finite, got {bad}"
        )));
    }
    Ok(beta1_grid
        .iter()
        .map(|&b1| {
            let b1 = b1.abs();
            BoundaryPoint {
                beta1: b1,
                beta2_threshold: thresholds(beta0, b1).beta2,
            }
        })
        .collect())
}

/// L(p_ε) − L(p₀) with p₀ = (0, ⅓, ⅓, ⅓) and p_ε = (ε, (1−ε)/3, (1−ε)/3, (1−ε)/3),
/// where the first coordinate is the largest-variance point.
///
/// Positive exactly when 3d₁ > ε(3 + 6d₁ − 2ε − 3d₁ε) with
/// d₁ = (v₂ + v₃ + v₄ − v₁)/v₁.
pub fn perturbation_gain(v: &crate::model::VarianceVector, epsilon: f64) -> f64 {
    let order = descending_order(v.as_array());
    let ranked = order.map(|i| v.as_array()[i]);
    let rest = (1.0 - epsilon) / 3.0;
    let base = objective_l4(&ranked, &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    objective_l4(&ranked, &[epsilon, rest, rest, rest]) - base
}
