//! Certified numerical maximization of L over the simplex.
//!
//! log L is concave on the simplex (it is log|X′WX| up to a constant), so a
//! local ascent from any interior start converges to the global maximum when
//! that maximum is interior. The four saturated designs cover the boundary.
//! Each start runs an equality-constrained Newton method on log L with a
//! fraction-to-boundary rule and Armijo backtracking.

use nalgebra::{Matrix5, Vector5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{approximate_by_pair_averaging, ordering_holds, Certificate, Method, SolveResult};
use crate::error::{Error, Result};
use crate::model::{det_from_l, objective_l4, Design, VarianceVector};

const THIRD: f64 = 1.0 / 3.0;
const SELECTION_BAND: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericOptions {
    /// Largest acceptable relative KKT residual.
    pub stationarity_tol: f64,
    /// Newton iterations per start.
    pub max_iter: usize,
    /// When set, also scan a simplex grid with this spacing and report the gap.
    pub grid_step: Option<f64>,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            stationarity_tol: 1e-10,
            max_iter: 200,
            grid_step: None,
        }
    }
}

/// ∂L/∂pₖ = Σ_{i≠k} vᵢ Π_{j∉{i,k}} pⱼ
pub(crate) fn gradient(v: &[f64; 4], p: &[f64; 4]) -> [f64; 4] {
    let mut g = [0.0; 4];
    for (k, gk) in g.iter_mut().enumerate() {
        for i in (0..4).filter(|&i| i != k) {
            let prod: f64 = (0..4).filter(|&j| j != i && j != k).map(|j| p[j]).product();
            *gk += v[i] * prod;
        }
    }
    g
}

/// ∂²L/∂pₖ∂pₗ = Σ_{i∉{k,l}} vᵢ p_m with m the remaining index; zero diagonal.
fn hessian(v: &[f64; 4], p: &[f64; 4]) -> [[f64; 4]; 4] {
    let mut h = [[0.0; 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            if k == l {
                continue;
            }
            let rest: Vec<usize> = (0..4).filter(|&i| i != k && i != l).collect();
            h[k][l] = v[rest[0]] * p[rest[1]] + v[rest[1]] * p[rest[0]];
        }
    }
    h
}

/// Largest KKT violation relative to the multiplier λ = 3L (Euler's identity
/// for the cubic form): |∂L/∂pᵢ − λ| on the support, (∂L/∂pᵢ − λ)⁺ off it.
pub(crate) fn kkt_residual(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    let lambda = 3.0 * objective_l4(v, p);
    if !(lambda > 0.0) {
        return f64::INFINITY;
    }
    let g = gradient(v, p);
    let worst = (0..4)
        .map(|i| {
            if p[i] > 0.0 {
                (g[i] - lambda).abs()
            } else {
                (g[i] - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    worst / lambda
}

fn log_objective(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    let l = objective_l4(v, p);
    if l > 0.0 {
        l.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn renormalize(p: &mut [f64; 4]) {
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
}

struct Ascent {
    p: [f64; 4],
    iterations: usize,
}

fn newton_ascent(v: &[f64; 4], start: [f64; 4], max_iter: usize) -> Ascent {
    let mut p = start;
    renormalize(&mut p);
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let l = objective_l4(v, &p);
        let g = gradient(v, &p);
        let h = hessian(v, &p);
        let grad_f = g.map(|x| x / l);

        // KKT system of the equality-constrained Newton step on log L.
        let mut kkt = Matrix5::<f64>::zeros();
        let mut rhs = Vector5::<f64>::zeros();
        for a in 0..4 {
            for b in 0..4 {
                kkt[(a, b)] = h[a][b] / l - grad_f[a] * grad_f[b];
            }
            kkt[(a, 4)] = 1.0;
            kkt[(4, a)] = 1.0;
            rhs[a] = -grad_f[a];
        }
        let newton = kkt.lu().solve(&rhs).map(|s| [s[0], s[1], s[2], s[3]]);
        let mut dir = match newton {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => [0.0; 4],
        };
        let mut slope: f64 = (0..4).map(|i| grad_f[i] * dir[i]).sum();
        if !(slope > 0.0) {
            let mean = grad_f.iter().sum::<f64>() / 4.0;
            dir = grad_f.map(|x| x - mean);
            slope = (0..4).map(|i| grad_f[i] * dir[i]).sum();
        }
        if !(slope > 1e-30) {
            break;
        }

        let mut t: f64 = 1.0;
        for i in 0..4 {
            if dir[i] < 0.0 {
                t = t.min(-0.99 * p[i] / dir[i]);
            }
        }
        let t_full = t;
        let f0 = l.ln();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = [0.0; 4];
            for i in 0..4 {
                trial[i] = p[i] + t * dir[i];
            }
            if trial.iter().all(|x| *x > 0.0) && log_objective(v, &trial) >= f0 + 1e-4 * t * slope {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        if accepted.is_none() {
            // Near the optimum log L changes below rounding; judge by the residual.
            let trial: [f64; 4] = std::array::from_fn(|i| p[i] + t_full * dir[i]);
            if trial.iter().all(|x| *x > 0.0) && kkt_residual(v, &trial) < kkt_residual(v, &p) {
                accepted = Some(trial);
            }
        }
        match accepted {
            Some(mut next) => {
                renormalize(&mut next);
                let moved = (0..4).map(|i| (next[i] - p[i]).abs()).fold(0.0, f64::max);
                p = next;
                if moved < 1e-17 || slope < 1e-32 {
                    break;
                }
            }
            None => break,
        }
        if p.iter().any(|x| *x < 1e-15) {
            break;
        }
    }
    Ascent { p, iterations }
}

/// Best point of the simplex grid {p : pᵢ = nᵢ/n, Σnᵢ = n}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBest {
    pub design: [f64; 4],
    pub value: f64,
    /// Integer coordinates (n₁, n₂, n₃) of the maximizer; n₄ = n − n₁ − n₂ − n₃.
    pub index: (u32, u32, u32),
}

fn better(a: GridBest, b: GridBest) -> GridBest {
    if a.value > b.value || (a.value == b.value && a.index < b.index) {
        a
    } else {
        b
    }
}

fn scan_slab(v: &[f64; 4], n: u32, i: u32) -> GridBest {
    let inv = 1.0 / n as f64;
    let mut best = GridBest {
        design: [0.0; 4],
        value: f64::NEG_INFINITY,
        index: (u32::MAX, u32::MAX, u32::MAX),
    };
    for j in 0..=(n - i) {
        for k in 0..=(n - i - j) {
            let l = n - i - j - k;
            let p = [
                i as f64 * inv,
                j as f64 * inv,
                k as f64 * inv,
                l as f64 * inv,
            ];
            let value = objective_l4(v, &p);
            if value > best.value {
                best = GridBest {
                    design: p,
                    value,
                    index: (i, j, k),
                };
            }
        }
    }
    best
}

fn grid_points(step: f64) -> Result<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Precondition(format!(
            "grid step must be in (0, 1], got {step}"
        )));
    }
    let n = (1.0 / step).round();
    if n > 5000.0 {
        return Err(Error::Precondition(format!("grid step {step} is too fine")));
    }
    Ok(n as u32)
}

/// Exhaustive scan of the simplex grid with spacing `step`.
pub fn grid_scan(v: &VarianceVector, step: f64) -> Result<GridBest> {
    grid_scan_chunked(v, step, 8)
}

/// [`grid_scan`] with an explicit number of p₁-slabs per parallel task. The
/// result does not depend on `chunk`.
pub fn grid_scan_chunked(v: &VarianceVector, step: f64, chunk: usize) -> Result<GridBest> {
    let n = grid_points(step)?;
    let vs = *v.as_array();
    let slabs: Vec<u32> = (0..=n).collect();
    let best = slabs
        .par_chunks(chunk.max(1))
        .map(|c| {
            c.iter()
                .map(|&i| scan_slab(&vs, n, i))
                .reduce(better)
                .expect("non-empty chunk")
        })
        .reduce_with(better)
        .expect("non-empty grid");
    Ok(best)
}

/// Maximize L numerically and certify the result.
///
/// Starts: the pair-averaging approximation (when it applies), the uniform
/// design, and the four saturated designs pulled slightly inward. The four
/// exact saturated designs are also candidates. The certificate records the
/// KKT residual at the winner, the ordering check and, optionally, the gap
/// to a grid scan. A result that fails certification is still returned with
/// `certified = false`.
pub fn solve_numeric(v: &VarianceVector, opts: &NumericOptions) -> Result<SolveResult> {
    let vs = v.as_array();
    let mut starts: Vec<[f64; 4]> = Vec::with_capacity(6);
    if let Ok(approx) = approximate_by_pair_averaging(v) {
        starts.push(approx.result.p());
    }
    starts.push([0.25; 4]);
    let saturated: Vec<[f64; 4]> = (0..4)
        .map(|z| {
            let mut p = [THIRD; 4];
            p[z] = 0.0;
            p
        })
        .collect();
    for s in &saturated {
        starts.push(s.map(|x| 0.9 * x + 0.025));
    }

    let mut best = saturated[0];
    let mut best_l = objective_l4(vs, &best);
    for s in &saturated[1..] {
        let l = objective_l4(vs, s);
        if l > best_l {
            best = *s;
            best_l = l;
        }
    }
    let mut best_res = kkt_residual(vs, &best);
    let mut iterations = 0;
    for start in &starts {
        let run = newton_ascent(vs, *start, opts.max_iter);
        iterations += run.iterations;
        let l = objective_l4(vs, &run.p);
        let res = kkt_residual(vs, &run.p);
        // Values within rounding of each other are ranked by the residual.
        let band = SELECTION_BAND * best_l.abs();
        if l > best_l + band || (l >= best_l - band && res < best_res) {
            best = run.p;
            best_l = l;
            best_res = res;
        }
    }

    let residual = best_res;
    let ordering_ok = ordering_holds(vs, &best);
    let grid = opts.grid_step.map(|h| grid_scan(v, h)).transpose()?;
    let oracle_gap = grid.map(|g| g.value - best_l);
    let gap_ok = oracle_gap.is_none_or(|gap| gap <= 1e-12 * best_l);
    let certificate = Certificate {
        stationarity_residual: residual,
        stationarity_tol: opts.stationarity_tol,
        grid_step: opts.grid_step,
        grid_best: grid.map(|g| g.value),
        oracle_gap,
        ordering_ok,
        starts: starts.len(),
        iterations,
        certified: residual <= opts.stationarity_tol && ordering_ok && gap_ok,
    };
    Ok(SolveResult {
        design: Design::new(best.to_vec())?,
        l_value: Some(best_l),
        det_value: det_from_l(v, best_l),
        method: Method::Numeric,
        certificate: Some(certificate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_pair_tie, solve_saturated};
    use ::approx::assert_relative_eq;

    fn vv(v: [f64; 4]) -> VarianceVector {
        VarianceVector::new(v).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let v = [1.3, 0.7, 2.2, 1.9];
        let p = [0.2, 0.3, 0.1, 0.4];
        let g = gradient(&v, &p);
        let h = hessian(&v, &p);
        let eps = 1e-6;
        for k in 0..4 {
            let mut up = p;
            let mut dn = p;
            up[k] += eps;
            dn[k] -= eps;
            let fd = (objective_l4(&v, &up) - objective_l4(&v, &dn)) / (2.0 * eps);
            assert_relative_eq!(g[k], fd, max_relative = 1e-8);
            let (gu, gd) = (gradient(&v, &up), gradient(&v, &dn));
            for l in 0..4 {
                assert_relative_eq!(h[l][k], (gu[l] - gd[l]) / (2.0 * eps), epsilon = 1e-8);
            }
        }
        // Euler: Σ pᵢ ∂L/∂pᵢ = 3L.
        let euler: f64 = (0..4).map(|i| p[i] * g[i]).sum();
        assert_relative_eq!(euler, 3.0 * objective_l4(&v, &p), max_relative = 1e-14);
    }

    #[test]
    fn matches_saturated_solution() {
        let v = vv([3.0, 1.0, 1.0, 1.0]);
        let r = solve_numeric(&v, &NumericOptions::default()).unwrap();
        let exact = solve_saturated(&v).unwrap();
        assert!((r.l_value.unwrap() - exact.l_value.unwrap()).abs() <= 1e-9);
        assert!(r.certificate.unwrap().certified);
    }

    #[test]
    fn matches_pair_tie_solution() {
        let v = vv([3.0, 2.0, 1.0, 1.0]);
        let r = solve_numeric(&v, &NumericOptions::default()).unwrap();
        let exact = solve_pair_tie(3.0, 2.0, 1.0).unwrap();
        assert!((r.l_value.unwrap() - exact.l_value.unwrap()).abs() <= 1e-9);
        for (a, b) in r.p().iter().zip(exact.p()) {
            assert!((a - b).abs() < 1e-8);
        }
        let cert = r.certificate.unwrap();
        assert!(cert.certified, "{cert:?}");
        assert!(cert.stationarity_residual <= 1e-10);
    }

    #[test]
    fn improves_on_approximation_within_bound() {
        let v = vv([1.0, 1.7, 2.3, 2.9]);
        let approx = approximate_by_pair_averaging(&v).unwrap();
        let r = solve_numeric(&v, &NumericOptions::default()).unwrap();
        let la = approx.result.l_value.unwrap();
        let lo = r.l_value.unwrap();
        assert!(lo >= la);
        assert!(lo - la <= approx.bound);
    }

    #[test]
    fn grid_certificate_reports_gap() {
        let opts = NumericOptions {
            grid_step: Some(0.01),
            ..NumericOptions::default()
        };
        let r = solve_numeric(&vv([1.0, 1.7, 2.3, 2.9]), &opts).unwrap();
        let cert = r.certificate.unwrap();
        assert!(cert.oracle_gap.unwrap() <= 0.0);
        assert!(cert.certified);
    }

    #[test]
    fn grid_scan_is_chunk_independent() {
        let v = vv([1.0, 1.7, 2.3, 2.9]);
        let reference = grid_scan_chunked(&v, 0.01, 1).unwrap();
        for chunk in [2, 7, 33, 101, 1000] {
            assert_eq!(grid_scan_chunked(&v, 0.01, chunk).unwrap(), reference);
        }
        // Ties resolve to the smallest index: equal variances have 24 symmetric
        // maximizers on a grid that misses 1/4.
        let flat = grid_scan(&vv([1.0; 4]), 1.0 / 6.0).unwrap();
        assert_eq!(
            flat,
            grid_scan_chunked(&vv([1.0; 4]), 1.0 / 6.0, 1).unwrap()
        );
        assert!(grid_scan(&v, 0.0).is_err());
    }

    #[test]
    fn kkt_residual_at_known_points() {
        let third = [0.0, THIRD, THIRD, THIRD];
        assert_eq!(kkt_residual(&[3.0, 1.0, 1.0, 1.0], &third), 0.0);
        assert!(kkt_residual(&[2.0, 1.0, 1.0, 1.0], &third) > 0.1);
        assert!(kkt_residual(&[1.0; 4], &[0.25; 4]) < 1e-15);
        assert_eq!(
            kkt_residual(&[1.0; 4], &[0.5, 0.5, 0.0, 0.0]),
            f64::INFINITY
        );
    }

    #[test]
    fn wide_variance_range_still_certifies() {
        for v in [
            [1.0, 50.0, 60.0, 70.0],
            [1e-3, 2e-3, 2.5e-3, 3e-3],
            [4.0, 5.0, 6.0, 14.9],
        ] {
            let r = solve_numeric(&vv(v), &NumericOptions::default()).unwrap();
            let cert = r.certificate.unwrap();
            assert!(cert.certified, "{v:?} {cert:?}");
        }
    }
}
