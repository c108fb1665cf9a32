use serde::{Deserialize, Serialize};

use super::{exact_solution, tied, Method, SolveResult};
use crate::error::{Error, Result};
use crate::model::VarianceVector;

/// One pair-averaged subproblem: `pair` holds original point indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    pub pair: (usize, usize),
    /// Maximum of L after replacing both variances of the pair by their mean.
    pub value: f64,
    pub design: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAveraging {
    pub result: SolveResult,
    /// Upper bound on max L − L(result.design).
    pub bound: f64,
    /// Candidates for the adjacent pairs in ascending variance order:
    /// (smallest, 2nd), (2nd, 3rd), (3rd, largest).
    pub candidates: Vec<PairCandidate>,
    pub chosen: usize,
}

/// Exact optimum of L after averaging vᵢ and vⱼ (original indices).
///
/// The averaged problem has a tie, so one of the closed forms applies. When
/// the solution puts equal mass on i and j, its L under the original
/// variances equals the averaged maximum.
pub fn pair_averaged_optimum(v: &VarianceVector, i: usize, j: usize) -> Result<PairCandidate> {
    if i >= 4 || j >= 4 || i == j {
        return Err(Error::Precondition(format!(
            "pair indices must be distinct points of 0..4, got ({i}, {j})"
        )));
    }
    let mut averaged = *v.as_array();
    let m = 0.5 * (averaged[i] + averaged[j]);
    averaged[i] = m;
    averaged[j] = m;
    let averaged = VarianceVector::new(averaged)?;
    let exact = exact_solution(&averaged)
        .ok_or_else(|| Error::Precondition("averaged problem has no closed form".into()))?;
    Ok(PairCandidate {
        pair: (i, j),
        value: exact.l_value.expect("positive variances"),
        design: exact.p(),
    })
}

/// Analytic approximation for four distinct, unsaturated variances: the best
/// of the three adjacent pair-averaged optima, with the a-priori error bound
///
/// ```text
/// min{(v₂ − v₁)/216, (v₃ − v₂)/(96√3), (v₄ − v₃)/54}
/// ```
///
/// in ascending order v₁ < v₂ < v₃ < v₄. Ties and the saturated regime have
/// exact solutions and are rejected here.
pub fn approximate_by_pair_averaging(v: &VarianceVector) -> Result<PairAveraging> {
    let vs = v.as_array();
    let mut asc = [0usize, 1, 2, 3];
    asc.sort_by(|&a, &b| vs[a].total_cmp(&vs[b]).then(a.cmp(&b)));
    let s = asc.map(|i| vs[i]);

    if tied(s[0], s[1]) || tied(s[1], s[2]) || tied(s[2], s[3]) {
        return Err(Error::Precondition(
            "variances must be distinct; tied cases have closed forms".into(),
        ));
    }
    if s[3] >= s[0] + s[1] + s[2] {
        return Err(Error::Precondition(format!(
            "largest variance {} is at least the sum of the others; the design is saturated",
            s[3]
        )));
    }

    let candidates = [(0, 1), (1, 2), (2, 3)]
        .iter()
        .map(|&(a, b)| pair_averaged_optimum(v, asc[a], asc[b]))
        .collect::<Result<Vec<_>>>()?;

    // First maximum wins, i.e. the lowest pair on ties.
    let mut chosen = 0;
    for (c, cand) in candidates.iter().enumerate().skip(1) {
        if cand.value > candidates[chosen].value {
            chosen = c;
        }
    }

    let bound = ((s[1] - s[0]) / 216.0)
        .min((s[2] - s[1]) / (96.0 * 3f64.sqrt()))
        .min((s[3] - s[2]) / 54.0);

    let result = SolveResult::from_design(v, candidates[chosen].design, Method::PairAveraging);
    Ok(PairAveraging {
        result,
        bound,
        candidates,
        chosen,
    })
}
