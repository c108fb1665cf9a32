use super::{descending_order, tied, unpermute, Method, SolveResult};
use crate::error::{Error, Result};
use crate::model::VarianceVector;

const THIRD: f64 = 1.0 / 3.0;

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{name} must be positive, got {x}"
        )))
    }
}

/// Zero mass at the largest-variance point and 1/3 elsewhere.
///
/// Optimal exactly when 2·max vᵢ ≥ Σvᵢ; the maximum is then max vᵢ / 27.
pub fn solve_saturated(v: &VarianceVector) -> Result<SolveResult> {
    let margin = 2.0 * v.max() - v.sum();
    if margin < 0.0 {
        return Err(Error::Precondition(format!(
            "saturation condition fails (2·max v − Σv = {margin})"
        )));
    }
    let order = descending_order(v.as_array());
    let p = unpermute(&order, [0.0, THIRD, THIRD, THIRD]);
    Ok(SolveResult::from_design(v, p, Method::Saturated))
}

/// Optimum when v₃ = v₄ = v, for v₁ ≥ v₂ and v₁ < v₂ + 2v.
///
/// With δ = v₁ + v₂ − 4v and D = √(δ² + 12v₁v₂):
///
/// ```text
/// p₁ = ½ − (v₁ − v₂ + 4v) / (2(D − 2δ))
/// p₂ = ½ + (v₁ − v₂ − 4v) / (2(D − 2δ))
/// p₃ = p₄ = 2v / (D − 2δ)
/// ```
///
/// The design is returned in the order (v₁, v₂, v, v).
pub fn solve_pair_tie(v1: f64, v2: f64, v: f64) -> Result<SolveResult> {
    positive("v1", v1)?;
    positive("v2", v2)?;
    positive("v", v)?;
    if v1 < v2 {
        return Err(Error::Precondition(format!(
            "need v1 >= v2, got {v1} < {v2}"
        )));
    }
    if v1 >= v2 + 2.0 * v {
        return Err(Error::Precondition(format!(
            "need v1 < v2 + 2v (otherwise saturated), got {v1} >= {}",
            v2 + 2.0 * v
        )));
    }
    let delta = v1 + v2 - 4.0 * v;
    let d = (delta * delta + 12.0 * v1 * v2).sqrt();
    let denom = d - 2.0 * delta;
    let p1 = 0.5 - (v1 - v2 + 4.0 * v) / (2.0 * denom);
    let p2 = 0.5 + (v1 - v2 - 4.0 * v) / (2.0 * denom);
    let p3 = 2.0 * v / denom;
    let vv = VarianceVector::new([v1, v2, v, v])?;
    Ok(SolveResult::from_design(
        &vv,
        [p1.max(0.0), p2, p3, p3],
        Method::PairTie,
    ))
}

/// Optimum when v₂ = v₃ = v₄ = v and v₁ < 3v:
/// p₁ = (3v − v₁)/(9v − v₁), the rest 2v/(9v − v₁), L = 4v³/(9v − v₁)².
pub fn solve_three_tie(v1: f64, v: f64) -> Result<SolveResult> {
    positive("v1", v1)?;
    positive("v", v)?;
    if v1 >= 3.0 * v {
        return Err(Error::Precondition(format!(
            "need v1 < 3v (otherwise saturated), got {v1} >= {}",
            3.0 * v
        )));
    }
    let denom = 9.0 * v - v1;
    let p1 = (3.0 * v - v1) / denom;
    let rest = 2.0 * v / denom;
    let vv = VarianceVector::new([v1, v, v, v])?;
    Ok(SolveResult::from_design(
        &vv,
        [p1, rest, rest, rest],
        Method::ThreeTie,
    ))
}

/// Optimum when v₁ = v₂ = u and v₃ = v₄ = v, returned in the order (u, u, v, v).
///
/// With d = √(u² − uv + v²) the textbook form is
/// p₁ = (2u − v − d)/(6(u − v)), p₃ = (u − 2v + d)/(6(u − v)). Rationalizing
/// the numerators cancels the u − v factor:
///
/// ```text
/// p₁ = p₂ = u / (2(2u − v + d))
/// p₃ = p₄ = v / (2(2v − u + d))
/// ```
///
/// which is finite at u = v (the uniform design) and symmetric under swapping
/// the two pairs, so no case split on u > v is needed.
pub fn solve_two_pair_tie(u: f64, v: f64) -> Result<SolveResult> {
    positive("u", u)?;
    positive("v", v)?;
    let d = (u * u - u * v + v * v).sqrt();
    let pu = u / (2.0 * (2.0 * u - v + d));
    let pv = v / (2.0 * (2.0 * v - u + d));
    let vv = VarianceVector::new([u, u, v, v])?;
    Ok(SolveResult::from_design(
        &vv,
        [pu, pu, pv, pv],
        Method::TwoPairTie,
    ))
}

/// The exact optimum when `v` falls in a case with a known solution:
/// all equal, saturated, or any tie pattern. `None` for four distinct,
/// unsaturated variances.
pub fn exact_solution(v: &VarianceVector) -> Option<SolveResult> {
    let order = descending_order(v.as_array());
    let s = order.map(|i| v.as_array()[i]);
    let (e01, e12, e23) = (tied(s[0], s[1]), tied(s[1], s[2]), tied(s[2], s[3]));

    if e01 && e12 && e23 {
        return Some(SolveResult::from_design(v, [0.25; 4], Method::Uniform));
    }
    if 2.0 * v.max() >= v.sum() {
        return solve_saturated(v).ok();
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (ranked, method) = match (e01, e12, e23) {
        (true, true, false) => {
            let p = solve_three_tie(s[3], mean(&s[..3])).ok()?.p();
            ([p[1], p[1], p[1], p[0]], Method::ThreeTie)
        }
        (false, true, true) => {
            let p = solve_three_tie(s[0], mean(&s[1..])).ok()?.p();
            (p, Method::ThreeTie)
        }
        (true, false, true) => {
            let p = solve_two_pair_tie(mean(&s[..2]), mean(&s[2..])).ok()?.p();
            (p, Method::TwoPairTie)
        }
        (true, false, false) => {
            let p = solve_pair_tie(s[2], s[3], mean(&s[..2])).ok()?.p();
            ([p[2], p[2], p[0], p[1]], Method::PairTie)
        }
        (false, true, false) => {
            let p = solve_pair_tie(s[0], s[3], mean(&s[1..3])).ok()?.p();
            ([p[0], p[2], p[2], p[1]], Method::PairTie)
        }
        (false, false, true) => {
            let p = solve_pair_tie(s[0], s[1], mean(&s[2..])).ok()?.p();
            (p, Method::PairTie)
        }
        _ => return None,
    };
    Some(SolveResult::from_design(
        v,
        unpermute(&order, ranked),
        method,
    ))
}
