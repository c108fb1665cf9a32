//! Two-level factorial models, designs on the simplex and the D-criterion.
//!
//! Design points of a 2^k factorial are enumerated in a fixed order: point
//! `i` (0-based) takes the binary expansion of `i`, most significant bit for
//! factor 1, and maps bit 0 to level +1 and bit 1 to level −1. For k = 2 the
//! points are (+,+), (+,−), (−,+), (−,−).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::links::WeightVector;

/// Largest supported number of factors.
pub const MAX_FACTORS: usize = 12;

/// Tolerance on |Σp − 1| for a design to be accepted.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;
/// Negative entries above this are treated as numerical dust and clamped.
pub const SIMPLEX_DUST_TOL: f64 = 1e-12;

/// A model term: the set of factors whose levels are multiplied together.
/// The empty set is the intercept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Effect(u32);

impl Effect {
    pub const INTERCEPT: Effect = Effect(0);

    /// Main effect of a 1-based factor.
    pub fn main(factor: usize) -> Effect {
        Effect(1 << (factor - 1))
    }

    pub fn interaction(factors: &[usize]) -> Effect {
        Effect(factors.iter().fold(0, |m, f| m | (1 << (f - 1))))
    }

    /// 1-based factors in the term, ascending.
    pub fn factors(self) -> Vec<usize> {
        (0..32)
            .filter(|b| self.0 & (1 << b) != 0)
            .map(|b| b + 1)
            .collect()
    }

    pub fn order(self) -> u32 {
        self.0.count_ones()
    }

    fn highest_factor(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("I");
        }
        let names: Vec<String> = self.factors().iter().map(|x| x.to_string()).collect();
        f.write_str(&names.join(":"))
    }
}

impl FromStr for Effect {
    type Err = Error;

    /// `I` (or `0`) for the intercept, `2` for a main effect, `1:3` for an
    /// interaction.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("i") || s == "0" {
            return Ok(Effect::INTERCEPT);
        }
        let mut factors = Vec::new();
        for part in s.split(':') {
            let f: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::InvalidModel(format!("bad effect `{s}`")))?;
            if f == 0 || f > MAX_FACTORS {
                return Err(Error::InvalidModel(format!(
                    "factor index {f} out of range in `{s}`"
                )));
            }
            factors.push(f);
        }
        Ok(Effect::interaction(&factors))
    }
}

/// A 2^k factorial model: the number of factors and the effect columns of X.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    k: usize,
    effects: Vec<Effect>,
}

impl ModelSpec {
    pub fn new(k: usize, effects: Vec<Effect>) -> Result<Self> {
        if k == 0 || k > MAX_FACTORS {
            return Err(Error::InvalidModel(format!(
                "number of factors must be in 1..={MAX_FACTORS}, got {k}"
            )));
        }
        if effects.is_empty() {
            return Err(Error::InvalidModel("model has no effects".into()));
        }
        for (i, e) in effects.iter().enumerate() {
            if e.highest_factor() > k {
                return Err(Error::InvalidModel(format!(
                    "effect {e} uses a factor beyond k = {k}"
                )));
            }
            if effects[..i].contains(e) {
                return Err(Error::InvalidModel(format!("duplicate effect {e}")));
            }
        }
        Ok(ModelSpec { k, effects })
    }

    /// Intercept plus the k main effects.
    pub fn main_effects(k: usize) -> Result<Self> {
        let mut effects = vec![Effect::INTERCEPT];
        effects.extend((1..=k).map(Effect::main));
        ModelSpec::new(k, effects)
    }

    /// All 2^k effects, ordered by interaction order and then factor set.
    pub fn full(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_FACTORS {
            return ModelSpec::new(k, vec![Effect::INTERCEPT]);
        }
        let mut effects: Vec<Effect> = (0..(1u32 << k)).map(Effect).collect();
        effects.sort_by_key(|e| (e.order(), e.factors()));
        ModelSpec::new(k, effects)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of design points, 2^k.
    pub fn points(&self) -> usize {
        1 << self.k
    }

    /// Number of model terms.
    pub fn q(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    /// Level (±1) of a 1-based factor at a 0-based design point.
    pub fn level(&self, point: usize, factor: usize) -> f64 {
        if (point >> (self.k - factor)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// The 2^k × q matrix of ±1 entries.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.points(), self.q(), |i, j| {
            self.effects[j]
                .factors()
                .iter()
                .map(|&f| self.level(i, f))
                .product()
        })
    }

    /// Intercept, factor 1, factor 2 in that order: the model of the 2² solvers.
    pub fn is_main_effects_22(&self) -> bool {
        self.k == 2 && *self == ModelSpec::main_effects(2).expect("valid")
    }

    fn check_lengths(&self, w: &WeightVector, p: &Design) -> Result<()> {
        if w.len() != self.points() {
            return Err(Error::DimensionMismatch {
                what: "weights vs design points",
                expected: self.points(),
                got: w.len(),
            });
        }
        if p.len() != self.points() {
            return Err(Error::DimensionMismatch {
                what: "design vs design points",
                expected: self.points(),
                got: p.len(),
            });
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// `main:K`, `full:K`, or `K:` followed by a comma-separated effect list,
    /// e.g. `3:I,1,2,3,1:2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidModel(format!("bad model `{s}`")))?;
        let parse_k = |t: &str| -> Result<usize> {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidModel(format!("bad factor count in `{s}`")))
        };
        match head.trim() {
            "main" => ModelSpec::main_effects(parse_k(tail)?),
            "full" => ModelSpec::full(parse_k(tail)?),
            k => {
                let k = parse_k(k)?;
                let effects = tail
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<Effect>>>()?;
                ModelSpec::new(k, effects)
            }
        }
    }
}

/// Allocation proportions over the design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Design(Vec<f64>);

impl Design {
    /// Validates against the simplex; negative dust is clamped to zero.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDesign("empty design".into()));
        }
        let mut p = p;
        for x in p.iter_mut() {
            if !x.is_finite() || *x < -SIMPLEX_DUST_TOL {
                return Err(Error::InvalidDesign(format!(
                    "proportions must be nonnegative, got {x}"
                )));
            }
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidDesign(format!(
                "proportions must sum to 1, got {sum}"
            )));
        }
        Ok(Design(p))
    }

    pub fn uniform(n: usize) -> Self {
        Design(vec![1.0 / n as f64; n])
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

    /// Copy into a fixed array for the 2² routines.
    pub fn to_array4(&self) -> Result<[f64; 4]> {
        self.0
            .as_slice()
            .try_into()
            .map_err(|_| Error::DimensionMismatch {
                what: "design length for the 2x2 model",
                expected: 4,
                got: self.0.len(),
            })
    }
}

impl TryFrom<Vec<f64>> for Design {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Design::new(p)
    }
}

impl From<Design> for Vec<f64> {
    fn from(p: Design) -> Self {
        p.0
    }
}

/// vᵢ = 1/wᵢ for the four points of the 2² experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VarianceVector([f64; 4]);

impl VarianceVector {
    pub fn new(v: [f64; 4]) -> Result<Self> {
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "variances must be positive and finite, got {bad}"
            )));
        }
        Ok(VarianceVector(v))
    }

    pub fn from_weights(w: &WeightVector) -> Result<Self> {
        let w: [f64; 4] = w
            .as_slice()
            .try_into()
            .map_err(|_| Error::DimensionMismatch {
                what: "weights for the 2x2 model",
                expected: 4,
                got: w.len(),
            })?;
        VarianceVector::new(w.map(|x| 1.0 / x))
    }

    pub fn to_weights(&self) -> WeightVector {
        WeightVector::new(self.0.map(|v| 1.0 / v).to_vec()).expect("positive variances")
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Vec<f64>> for VarianceVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let arr: [f64; 4] = v
            .as_slice()
            .try_into()
            .map_err(|_| Error::DimensionMismatch {
                what: "variance vector length",
                expected: 4,
                got: v.len(),
            })?;
        VarianceVector::new(arr)
    }
}

impl From<VarianceVector> for Vec<f64> {
    fn from(v: VarianceVector) -> Self {
        v.0.to_vec()
    }
}

/// Per-observation information matrix X′WX.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix(DMatrix<f64>);

impl InfoMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Determinant via LU with partial pivoting.
    pub fn determinant(&self) -> f64 {
        self.0.clone().lu().determinant()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.0
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }
}

/// X′ diag(w₁p₁, …, w_Np_N) X.
pub fn info_matrix(model: &ModelSpec, w: &WeightVector, p: &Design) -> Result<InfoMatrix> {
    model.check_lengths(w, p)?;
    let x = model.design_matrix();
    let q = model.q();
    let mut m = DMatrix::<f64>::zeros(q, q);
    for (i, row) in x.row_iter().enumerate() {
        let s = w.as_slice()[i] * p.as_slice()[i];
        if s == 0.0 {
            continue;
        }
        for a in 0..q {
            for b in a..q {
                m[(a, b)] += s * row[a] * row[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
    Ok(InfoMatrix(m))
}

/// D-criterion |X′WX|, clamped at zero against rounding.
pub fn det_criterion(model: &ModelSpec, w: &WeightVector, p: &Design) -> Result<f64> {
    Ok(info_matrix(model, w, p)?.determinant().max(0.0))
}

/// L(p) = v₄p₁p₂p₃ + v₃p₁p₂p₄ + v₂p₁p₃p₄ + v₁p₂p₃p₄.
pub fn objective_l(v: &VarianceVector, p: &Design) -> Result<f64> {
    Ok(objective_l4(v.as_array(), &p.to_array4()?))
}

/// Unchecked array form of [`objective_l`].
#[inline]
pub fn objective_l4(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    let [p1, p2, p3, p4] = *p;
    v[3] * p1 * p2 * p3 + v[2] * p1 * p2 * p4 + v[1] * p1 * p3 * p4 + v[0] * p2 * p3 * p4
}

/// |X′WX| for the 2² main-effects model from L: 16·(Πwᵢ)·L.
pub fn det_from_l(v: &VarianceVector, l: f64) -> f64 {
    16.0 * l / v.as_array().iter().product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Cofactor expansion up to 4×4, independent of the LU path.
    fn det_cofactor(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        match n {
            1 => m[(0, 0)],
            2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
            _ => (0..n)
                .map(|j| {
                    let minor = m.clone().remove_row(0).remove_column(j);
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * m[(0, j)] * det_cofactor(&minor)
                })
                .sum(),
        }
    }

    fn w4(w: [f64; 4]) -> WeightVector {
        WeightVector::new(w.to_vec()).unwrap()
    }

    fn p4(p: [f64; 4]) -> Design {
        Design::new(p.to_vec()).unwrap()
    }

    #[test]
    fn main_effects_22_matrix() {
        let x = ModelSpec::main_effects(2).unwrap().design_matrix();
        let expected = DMatrix::from_column_slice(
            4,
            3,
            &[
                1.0, 1.0, 1.0, 1.0, //
                1.0, 1.0, -1.0, -1.0, //
                1.0, -1.0, 1.0, -1.0,
            ],
        );
        assert_eq!(x, expected);
    }

    #[test]
    fn intercept_only_is_ones() {
        let m = ModelSpec::new(1, vec![Effect::INTERCEPT]).unwrap();
        assert_eq!(m.design_matrix(), DMatrix::from_element(2, 1, 1.0));
    }

    #[test]
    fn full_model_is_hadamard() {
        for k in 1..=4 {
            let f = ModelSpec::full(k).unwrap().design_matrix();
            let n = 1 << k;
            let ftf = f.transpose() * &f;
            assert_eq!(ftf, DMatrix::identity(n, n) * n as f64, "k = {k}");
        }
    }

    #[test]
    fn model_validation() {
        assert!(ModelSpec::new(2, vec![Effect::INTERCEPT, Effect::INTERCEPT]).is_err());
        assert!(ModelSpec::new(2, vec![Effect::main(3)]).is_err());
        assert!(ModelSpec::new(0, vec![Effect::INTERCEPT]).is_err());
        let m: ModelSpec = "3:I,1,2,1:2".parse().unwrap();
        assert_eq!(m.q(), 4);
        assert_eq!(m.effects()[3], Effect::interaction(&[1, 2]));
        assert_eq!(
            "main:2".parse::<ModelSpec>().unwrap(),
            ModelSpec::main_effects(2).unwrap()
        );
        assert_eq!("full:3".parse::<ModelSpec>().unwrap().q(), 8);
        assert!("3:I,4".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn design_validation_and_dust() {
        let d = Design::new(vec![-1e-13, 0.5, 0.5]).unwrap();
        assert_eq!(d.as_slice()[0], 0.0);
        assert!(Design::new(vec![-1e-6, 0.5, 0.500001]).is_err());
        assert!(Design::new(vec![0.3, 0.3]).is_err());
        assert!(Design::new(vec![0.5, 0.5 + 5e-10]).is_ok());
    }

    #[test]
    fn info_matrix_uniform_quarter_weights() {
        let m = ModelSpec::main_effects(2).unwrap();
        let info = info_matrix(&m, &w4([0.25; 4]), &Design::uniform(4)).unwrap();
        // X′X = 4I scaled by wᵢpᵢ = 1/16.
        assert_relative_eq!(
            *info.matrix(),
            DMatrix::identity(3, 3) * 0.25,
            epsilon = 1e-15
        );
        assert_relative_eq!(info.determinant(), 1.0 / 64.0, max_relative = 1e-14);

        let unit = info_matrix(&m, &w4([1.0; 4]), &Design::uniform(4)).unwrap();
        assert_relative_eq!(*unit.matrix(), DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn single_point_design_is_singular() {
        let m = ModelSpec::main_effects(2).unwrap();
        let w = w4([0.1, 0.2, 0.15, 0.05]);
        for i in 0..4 {
            let mut p = [0.0; 4];
            p[i] = 1.0;
            let info = info_matrix(&m, &w, &p4(p)).unwrap();
            assert_eq!(info.matrix().rank(1e-12), 1);
            assert!(det_criterion(&m, &w, &p4(p)).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn det_three_point_equal_weights() {
        let m = ModelSpec::main_effects(2).unwrap();
        let p = p4([0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let d = det_criterion(&m, &w4([1.0; 4]), &p).unwrap();
        assert_relative_eq!(d, 16.0 / 27.0, max_relative = 1e-13);
        let info = info_matrix(&m, &w4([1.0; 4]), &p).unwrap();
        assert_relative_eq!(
            det_cofactor(info.matrix()),
            16.0 / 27.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn lu_matches_cofactor_expansion() {
        let m: ModelSpec = "3:I,1,2,3".parse().unwrap();
        let w = WeightVector::new(vec![0.1, 0.2, 0.05, 0.25, 0.13, 0.07, 0.22, 0.18]).unwrap();
        let p = Design::new(vec![0.05, 0.2, 0.1, 0.15, 0.12, 0.08, 0.2, 0.1]).unwrap();
        let info = info_matrix(&m, &w, &p).unwrap();
        assert_relative_eq!(
            info.determinant(),
            det_cofactor(info.matrix()),
            max_relative = 1e-12
        );
        assert!(info.eigenvalues().iter().all(|e| *e > -1e-10));
    }

    #[test]
    fn objective_examples() {
        let ones = VarianceVector::new([1.0; 4]).unwrap();
        assert_relative_eq!(
            objective_l(&ones, &Design::uniform(4)).unwrap(),
            1.0 / 16.0,
            max_relative = 1e-15
        );
        let v = VarianceVector::new([3.0, 1.0, 1.0, 1.0]).unwrap();
        let sat = p4([0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_relative_eq!(
            objective_l(&v, &sat).unwrap(),
            1.0 / 9.0,
            max_relative = 1e-15
        );
        assert_eq!(objective_l(&v, &p4([0.5, 0.5, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_reduction() {
        let m = ModelSpec::main_effects(2).unwrap();
        let w = w4([0.0, 0.2, 0.1, 0.15]);
        let d = det_criterion(&m, &w, &p4([0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])).unwrap();
        assert!(d > 0.0);
        let w2 = w4([0.0, 0.2, 0.0, 0.15]);
        for p in [[0.25; 4], [0.1, 0.2, 0.3, 0.4], [0.0, 0.5, 0.0, 0.5]] {
            assert!(det_criterion(&m, &w2, &p4(p)).unwrap() < 1e-16);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = ModelSpec::main_effects(2).unwrap();
        let w = WeightVector::new(vec![0.1; 8]).unwrap();
        assert!(matches!(
            info_matrix(&m, &w, &Design::uniform(4)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            info_matrix(&m, &w4([0.1; 4]), &Design::uniform(8)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn simplex4() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(0.001f64..1.0).prop_map(|x| {
            let s: f64 = x.iter().sum();
            x.map(|t| t / s)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn determinant_matches_expanded_objective(
            w in prop::array::uniform4(0.05f64..=0.25),
            p in simplex4(),
        ) {
            let m = ModelSpec::main_effects(2).unwrap();
            let det = det_criterion(&m, &w4(w), &p4(p)).unwrap();
            let v = VarianceVector::from_weights(&w4(w)).unwrap();
            let l = objective_l(&v, &p4(p)).unwrap();
            let prod: f64 = w.iter().product();
            prop_assert!((det - 16.0 * prod * l).abs() / det <= 1e-10);
        }

        #[test]
        fn objective_is_permutation_equivariant(
            v in prop::array::uniform4(0.1f64..20.0),
            p in simplex4(),
            perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let base = objective_l4(&v, &p);
            let vp = [v[perm[0]], v[perm[1]], v[perm[2]], v[perm[3]]];
            let pp = [p[perm[0]], p[perm[1]], p[perm[2]], p[perm[3]]];
            prop_assert!((objective_l4(&vp, &pp) - base).abs() <= 1e-14 * base.max(1.0));
        }

        #[test]
        fn info_matrix_symmetric_nnd(
            w in prop::array::uniform4(0.0f64..1.0),
            p in simplex4(),
        ) {
            let m = ModelSpec::main_effects(2).unwrap();
            let info = info_matrix(&m, &w4(w), &p4(p)).unwrap();
            let mm = info.matrix();
            prop_assert!((mm - mm.transpose()).amax() <= 1e-12);
            prop_assert!(info.eigenvalues().iter().all(|e| *e >= -1e-10));
        }
    }
}
