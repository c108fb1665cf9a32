//! How much is lost by running the uniform design instead of the locally
//! optimal one, and the maximin lower bound for general 2^k models.
//!
//! The relative loss of the uniform design p_u against the optimum p_t is
//!
//! ```text
//! R_u(w) = 1 − (|X′W(p_u)X| / |X′W(p_t)X|)^{1/q}
//! ```
//!
//! with q = 3 for the 2² main-effects model, where it also equals
//! 1 − ¼·(Σvᵢ / L(p_t))^{1/3}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::WeightVector;
use crate::model::{det_criterion, Design, ModelSpec, VarianceVector};
use crate::solver::{solve, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    /// Smallest and largest variance, a ≤ vᵢ ≤ b.
    pub a: f64,
    pub b: f64,
    /// Smallest and largest weight.
    pub w_m: f64,
    #[serde(rename = "w_M")]
    pub w_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub r_u: f64,
    pub d_uniform: f64,
    pub d_optimal: f64,
    /// 1 − ¼(Σv/L)^{1/3}; absent when a weight is zero.
    pub r_u_from_l: Option<f64>,
    /// Model-independent upper bound 1 − w_m/w_M.
    pub efficiency_bound: f64,
    pub bound_components: BoundComponents,
}

/// Exact relative loss of the uniform design for the 2² main-effects model.
pub fn uniform_loss_22(w: &WeightVector) -> Result<EfficiencyReport> {
    let optimum = solve(w, &SolveOptions::default())?;
    let model = ModelSpec::main_effects(2)?;
    let d_uniform = det_criterion(&model, w, &Design::uniform(4))?;
    let d_optimal = optimum.det_value.max(d_uniform);
    let r_u = (1.0 - (d_uniform / d_optimal).cbrt()).max(0.0);

    let r_u_from_l = match (optimum.l_value, VarianceVector::from_weights(w)) {
        (Some(l), Ok(v)) => Some(1.0 - 0.25 * (v.sum() / l).cbrt()),
        _ => None,
    };
    let (w_m, w_max) = (w.min(), w.max());
    Ok(EfficiencyReport {
        r_u,
        d_uniform,
        d_optimal,
        r_u_from_l,
        efficiency_bound: 1.0 - w_m / w_max,
        bound_components: BoundComponents {
            a: 1.0 / w_max,
            b: 1.0 / w_m,
            w_m,
            w_max,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// v₁ ≥ v₂ + v₃ + v₄ for the largest variance v₁.
    Saturated,
    Unsaturated,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "saturated" => Ok(Regime::Saturated),
            "unsaturated" => Ok(Regime::Unsaturated),
            other => Err(Error::InvalidConfig(format!("unknown regime `{other}`"))),
        }
    }
}

/// Worst-case loss of the uniform 2² design when every vᵢ lies in [a, b].
///
/// Saturated: 1 − ¾(1 + 3a/b)^{1/3}, attained at v = (b, a, a, a).
/// Unsaturated: the supremum 1 − ¾·2^{1/3}, approached at the boundary
/// v₁ = v₂ + v₃ + v₄ and independent of (a, b).
pub fn max_uniform_loss(a: f64, b: f64, regime: Regime) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && a <= b) {
        return Err(Error::Precondition(format!(
            "need 0 < a <= b, got a = {a}, b = {b}"
        )));
    }
    match regime {
        Regime::Saturated => {
            if b < 3.0 * a {
                return Err(Error::Precondition(format!(
                    "saturated regime needs b >= 3a, got a = {a}, b = {b}"
                )));
            }
            Ok(1.0 - 0.75 * (1.0 + 3.0 * a / b).cbrt())
        }
        Regime::Unsaturated => Ok(1.0 - 0.75 * 2f64.cbrt()),
    }
}

/// Lower bound on |X′WX| that the uniform design maximizes:
/// 2^{k·2^k} Πwᵢ Πpᵢ / w_M^{2^k − q}.
pub fn maximin_lower_bound(model: &ModelSpec, w: &WeightVector, p: &Design) -> Result<f64> {
    let n = model.points();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            what: "weights vs design points",
            expected: n,
            got: w.len(),
        });
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "design vs design points",
            expected: n,
            got: p.len(),
        });
    }
    let w_max = w.max();
    if !(w_max > 0.0) {
        return Err(Error::InvalidWeights(
            "the largest weight must be positive".into(),
        ));
    }
    if w.as_slice().iter().chain(p.as_slice()).any(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let log_bound = (model.k() * n) as f64 * std::f64::consts::LN_2
        + w.as_slice().iter().map(|x| x.ln()).sum::<f64>()
        + p.as_slice().iter().map(|x| x.ln()).sum::<f64>()
        - (n - model.q()) as f64 * w_max.ln();
    Ok(log_bound.exp())
}

/// 1 − w_m/w_M: bound on the uniform design's loss for any 2^k model.
pub fn uniform_efficiency_bound(w: &WeightVector) -> Result<f64> {
    let w_m = w.min();
    if !(w_m > 0.0) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    Ok(1.0 - w_m / w.max())
}

/// Bounds on the uniform design's loss for a general model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBounds {
    /// 1 − |X′W₀X|^{1/q} / (2^k w_M), W₀ = diag(w).
    pub model_bound: f64,
    /// 1 − w_m / w_M.
    pub weight_bound: f64,
    /// Exact loss, available for the 2² main-effects model only.
    pub exact: Option<f64>,
}

pub fn uniform_loss_bounds(model: &ModelSpec, w: &WeightVector) -> Result<UniformBounds> {
    let weight_bound = uniform_efficiency_bound(w)?;
    let n = model.points();
    // |X′ diag(w/2^k) X| = |X′W₀X| / 2^{kq}
    let d_uniform = det_criterion(model, w, &Design::uniform(n))?;
    let q = model.q() as f64;
    let model_bound = 1.0 - d_uniform.powf(1.0 / q) / w.max();
    let exact = if model.is_main_effects_22() {
        Some(uniform_loss_22(w)?.r_u)
    } else {
        None
    };
    Ok(UniformBounds {
        model_bound,
        weight_bound,
        exact,
    })
}
