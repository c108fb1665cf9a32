//! D-optimal allocations for the 2² main-effects model.
//!
//! Maximizing |X′WX| over the simplex is equivalent (for positive weights) to
//! maximizing
//!
//! ```text
//! L(p) = v₄p₁p₂p₃ + v₃p₁p₂p₄ + v₂p₁p₃p₄ + v₁p₂p₃p₄,   vᵢ = 1/wᵢ.
//! ```
//!
//! [`solve`] dispatches over the cases with known answers (equal weights,
//! a zero weight, the saturated regime, tie patterns among the vᵢ) and falls
//! back to a certified numerical search warm-started from the pair-averaging
//! approximation. All results are reported in the caller's point order.

mod approx;
mod closed_form;
mod numeric;
mod saturation;

pub use approx::{
    approximate_by_pair_averaging, pair_averaged_optimum, PairAveraging, PairCandidate,
};
pub use closed_form::{
    exact_solution, solve_pair_tie, solve_saturated, solve_three_tie, solve_two_pair_tie,
};
pub use numeric::{grid_scan, grid_scan_chunked, solve_numeric, GridBest, NumericOptions};
pub use saturation::{
    perturbation_gain, saturation_boundary, saturation_condition_beta, saturation_condition_w,
    BetaThresholds, BoundaryPoint, SaturationReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::WeightVector;
use crate::model::{det_from_l, objective_l4, Design, ModelSpec, VarianceVector};

/// Relative difference under which two variances count as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Slack allowed in the ordering checks on returned designs.
pub const ORDERING_TOL: f64 = 1e-9;

/// How a [`SolveResult`] was obtained. Serialized tags are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// All weights equal.
    #[serde(rename = "kiefer_uniform")]
    Uniform,
    /// Exactly one zero weight: uniform on the other three points.
    #[serde(rename = "zero_weight_reduction")]
    ZeroWeightReduction,
    /// 2·max vᵢ ≥ Σvᵢ: zero mass at the largest-variance point.
    #[serde(rename = "saturated")]
    Saturated,
    /// One pair of variances tied.
    #[serde(rename = "theorem2_closed_form")]
    PairTie,
    /// Three variances tied.
    #[serde(rename = "corollary1")]
    ThreeTie,
    /// Two disjoint pairs tied.
    #[serde(rename = "corollary2")]
    TwoPairTie,
    /// Best of the three adjacent pair-averaged problems.
    #[serde(rename = "approx_theorem4")]
    PairAveraging,
    #[serde(rename = "numeric")]
    Numeric,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Uniform => "kiefer_uniform",
            Method::ZeroWeightReduction => "zero_weight_reduction",
            Method::Saturated => "saturated",
            Method::PairTie => "theorem2_closed_form",
            Method::ThreeTie => "corollary1",
            Method::TwoPairTie => "corollary2",
            Method::PairAveraging => "approx_theorem4",
            Method::Numeric => "numeric",
        }
    }

    /// Methods whose design is the exact optimum by construction.
    pub fn is_exact(self) -> bool {
        !matches!(self, Method::PairAveraging | Method::Numeric)
    }
}

/// Evidence attached to numerically obtained designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Largest KKT violation of ∇L on the simplex, relative to 3L.
    pub stationarity_residual: f64,
    pub stationarity_tol: f64,
    pub grid_step: Option<f64>,
    /// Best L found on the grid.
    pub grid_best: Option<f64>,
    /// grid_best − L_value; nonpositive when the grid found nothing better.
    pub oracle_gap: Option<f64>,
    pub ordering_ok: bool,
    pub starts: usize,
    pub iterations: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub design: Design,
    /// L at the design; absent when a weight is zero and L is undefined.
    #[serde(rename = "L_value")]
    pub l_value: Option<f64>,
    /// |X′WX| at the design.
    pub det_value: f64,
    pub method: Method,
    pub certificate: Option<Certificate>,
}

impl SolveResult {
    pub(crate) fn from_design(v: &VarianceVector, p: [f64; 4], method: Method) -> Self {
        let l = objective_l4(v.as_array(), &p);
        SolveResult {
            design: Design::new(p.to_vec()).expect("solver designs lie on the simplex"),
            l_value: Some(l),
            det_value: det_from_l(v, l),
            method,
            certificate: None,
        }
    }

    pub fn p(&self) -> [f64; 4] {
        self.design
            .to_array4()
            .expect("2x2 designs have four points")
    }

    /// Whether the design respects the ordering forced by the variances:
    /// vᵢ > vⱼ ⇒ pᵢ ≤ pⱼ and vᵢ = vⱼ ⇒ pᵢ = pⱼ, up to [`ORDERING_TOL`].
    pub fn respects_ordering(&self, v: &VarianceVector) -> bool {
        ordering_holds(v.as_array(), &self.p())
    }
}

pub(crate) fn ordering_holds(v: &[f64; 4], p: &[f64; 4]) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            if v[i] == v[j] {
                if (p[i] - p[j]).abs() > ORDERING_TOL {
                    return false;
                }
            } else if v[i] > v[j] && p[i] > p[j] + ORDERING_TOL {
                return false;
            }
        }
    }
    true
}

pub(crate) fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

/// Indices of `v` sorted by descending value, ties by original index.
pub(crate) fn descending_order(v: &[f64; 4]) -> [usize; 4] {
    let mut idx = [0, 1, 2, 3];
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Scatter a design computed for `v[order[r]]` at rank r back to original positions.
pub(crate) fn unpermute(order: &[usize; 4], ranked: [f64; 4]) -> [f64; 4] {
    let mut p = [0.0; 4];
    for (r, &i) in order.iter().enumerate() {
        p[i] = ranked[r];
    }
    p
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveOptions {
    pub numeric: NumericOptions,
}

/// D-optimal allocation for the 2² main-effects model under weights `w`.
pub fn solve(w: &WeightVector, opts: &SolveOptions) -> Result<SolveResult> {
    if w.len() != 4 {
        return Err(Error::DimensionMismatch {
            what: "weights for the 2x2 model",
            expected: 4,
            got: w.len(),
        });
    }
    let ws: [f64; 4] = w.as_slice().try_into().expect("length checked");
    let zeros = w.zero_count();
    if zeros >= 2 {
        return Err(Error::DegenerateCriterion { zeros });
    }
    if zeros == 1 {
        let p = ws.map(|x| if x == 0.0 { 0.0 } else { 1.0 / 3.0 });
        let model = ModelSpec::main_effects(2)?;
        let design = Design::new(p.to_vec())?;
        let det_value = crate::model::det_criterion(&model, w, &design)?;
        return Ok(SolveResult {
            design,
            l_value: None,
            det_value,
            method: Method::ZeroWeightReduction,
            certificate: None,
        });
    }
    let v = VarianceVector::from_weights(w)?;
    if let Some(result) = exact_solution(&v) {
        return Ok(result);
    }
    solve_numeric(&v, &opts.numeric)
}

/// [`solve`] taking variances directly.
pub fn solve_variances(v: &VarianceVector, opts: &SolveOptions) -> Result<SolveResult> {
    match exact_solution(v) {
        Some(result) => Ok(result),
        None => solve_numeric(v, &opts.numeric),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ::approx::assert_relative_eq;

    fn w4(w: [f64; 4]) -> WeightVector {
        WeightVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn equal_weights_give_uniform() {
        let r = solve(&w4([0.25; 4]), &SolveOptions::default()).unwrap();
        assert_eq!(r.method, Method::Uniform);
        assert_eq!(r.p(), [0.25; 4]);
        assert_relative_eq!(r.det_value, 1.0 / 64.0, max_relative = 1e-14);
    }

    #[test]
    fn one_zero_weight_reduces_to_three_points() {
        let r = solve(&w4([0.0, 0.2, 0.2, 0.2]), &SolveOptions::default()).unwrap();
        assert_eq!(r.method, Method::ZeroWeightReduction);
        assert_eq!(r.p(), [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!(r.l_value.is_none());
        // 16 · 0.2³ · (1/3)³
        assert_relative_eq!(r.det_value, 16.0 * 0.008 / 27.0, max_relative = 1e-12);

        let r = solve(&w4([0.1, 0.3, 0.0, 0.2]), &SolveOptions::default()).unwrap();
        assert_eq!(r.p()[2], 0.0);
    }

    #[test]
    fn two_zero_weights_are_degenerate() {
        assert_eq!(
            solve(&w4([0.0, 0.2, 0.0, 0.2]), &SolveOptions::default()),
            Err(Error::DegenerateCriterion { zeros: 2 })
        );
    }

    #[test]
    fn saturated_dispatch() {
        let r = solve(&w4([0.05, 0.25, 0.25, 0.25]), &SolveOptions::default()).unwrap();
        assert_eq!(r.method, Method::Saturated);
        assert_eq!(r.p(), [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_relative_eq!(r.l_value.unwrap(), 20.0 / 27.0, max_relative = 1e-14);
    }

    #[test]
    fn tie_patterns_dispatch_in_original_order() {
        let opts = SolveOptions::default();
        let v = |v: [f64; 4]| VarianceVector::new(v).unwrap();
        let r = solve_variances(&v([1.0, 3.0, 1.0, 2.0]), &opts).unwrap();
        assert_eq!(r.method, Method::PairTie);
        let p = r.p();
        assert_relative_eq!(p[1], 0.117_970_88, epsilon = 1e-6);
        assert_relative_eq!(p[3], 0.270_782_5, epsilon = 1e-6);
        assert_eq!(p[0], p[2]);

        let r = solve_variances(&v([1.0, 1.0, 2.0, 1.0]), &opts).unwrap();
        assert_eq!(r.method, Method::ThreeTie);
        assert_relative_eq!(r.p()[2], 1.0 / 7.0, max_relative = 1e-14);

        let r = solve_variances(&v([1.0, 2.0, 2.0, 1.0]), &opts).unwrap();
        assert_eq!(r.method, Method::TwoPairTie);
        assert!(r.p()[1] < r.p()[0]);

        let r = solve_variances(&v([1.0, 2.0, 3.0, 3.5]), &opts).unwrap();
        assert_eq!(r.method, Method::Numeric);
        assert!(r.certificate.as_ref().unwrap().certified);
    }

    #[test]
    fn near_ties_route_to_closed_forms() {
        let r = solve_variances(
            &VarianceVector::new([3.0, 2.0, 1.0, 1.0 + 1e-12]).unwrap(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(r.method, Method::PairTie);
    }

    #[test]
    fn descending_order_breaks_ties_by_index() {
        assert_eq!(descending_order(&[1.0, 3.0, 3.0, 2.0]), [1, 2, 3, 0]);
        assert_eq!(
            unpermute(&[1, 2, 3, 0], [0.1, 0.2, 0.3, 0.4]),
            [0.4, 0.1, 0.2, 0.3]
        );
    }

    #[test]
    fn ordering_check() {
        assert!(ordering_holds(
            &[3.0, 1.0, 1.0, 1.0],
            &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]
        ));
        assert!(!ordering_holds(
            &[3.0, 1.0, 1.0, 1.0],
            &[0.4, 0.2, 0.2, 0.2]
        ));
        assert!(!ordering_holds(
            &[1.0, 1.0, 2.0, 3.0],
            &[0.3, 0.4, 0.2, 0.1]
        ));
    }

    #[test]
    fn method_tags_are_stable() {
        for m in [
            Method::Uniform,
            Method::ZeroWeightReduction,
            Method::Saturated,
            Method::PairTie,
            Method::ThreeTie,
            Method::TwoPairTie,
            Method::PairAveraging,
            Method::Numeric,
        ] {
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.tag())
            );
        }
    }
}
