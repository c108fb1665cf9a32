//! Brute-force reference optimum of L over the simplex, sharing no code
//! with the library solvers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// L(p) = Σᵢ vᵢ Π_{j≠i} pⱼ.
pub fn l_direct(v: &[f64; 4], p: &[f64; 4]) -> f64 {
    (0..4)
        .map(|i| v[i] * (0..4).filter(|&j| j != i).map(|j| p[j]).product::<f64>())
        .sum()
}

fn l_fast(v: &[f64; 4], p1: f64, p2: f64, p3: f64, p4: f64) -> f64 {
    p1 * p2 * (v[3] * p3 + v[2] * p4) + p3 * p4 * (v[1] * p1 + v[0] * p2)
}

/// Best point of the grid {nᵢ/n}, then local zoom until the step is tiny.
pub fn oracle(v: &[f64; 4], n: u32) -> (f64, [f64; 4]) {
    let inv = 1.0 / n as f64;
    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for i in 0..=n {
        let p1 = i as f64 * inv;
        for j in 0..=(n - i) {
            let p2 = j as f64 * inv;
            let a = v[3] * p1 * p2;
            let b = v[2] * p1 * p2;
            let c = v[1] * p1 + v[0] * p2;
            for k in 0..=(n - i - j) {
                let p3 = k as f64 * inv;
                let p4 = (n - i - j - k) as f64 * inv;
                let l = a * p3 + b * p4 + p3 * p4 * c;
                if l > best.0 {
                    best = (l, [p1, p2, p3, p4]);
                }
            }
        }
    }
    zoom(v, best.1, inv)
}

const HALF: i32 = 10;

fn zoom(v: &[f64; 4], start: [f64; 4], h: f64) -> (f64, [f64; 4]) {
    let mut center = [start[0], start[1], start[2]];
    let mut best_l = l_direct(v, &start);
    let mut best_p = start;
    let mut step = h / 5.0;
    for _ in 0..400 {
        if step < 1e-13 {
            break;
        }
        let mut edge = false;
        let mut moved_to = None;
        for a in -HALF..=HALF {
            let p1 = center[0] + a as f64 * step;
            if p1 < 0.0 {
                continue;
            }
            for b in -HALF..=HALF {
                let p2 = center[1] + b as f64 * step;
                if p2 < 0.0 {
                    continue;
                }
                for c in -HALF..=HALF {
                    let p3 = center[2] + c as f64 * step;
                    let p4 = 1.0 - p1 - p2 - p3;
                    // Rounding can leave −1e-17 on the p₄ = 0 face.
                    if p3 < 0.0 || p4 < -1e-14 {
                        continue;
                    }
                    let p4 = p4.max(0.0);
                    let l = l_fast(v, p1, p2, p3, p4);
                    if l > best_l {
                        best_l = l;
                        best_p = [p1, p2, p3, p4];
                        moved_to = Some([a, b, c]);
                    }
                }
            }
        }
        if let Some(idx) = moved_to {
            edge = idx.iter().any(|x| x.abs() == HALF);
            center = [best_p[0], best_p[1], best_p[2]];
        }
        if !edge {
            step /= 5.0;
        }
    }
    (l_direct(v, &best_p), best_p)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_w(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 4] {
    std::array::from_fn(|_| rng.random_range(lo..hi))
}

/// Lemma ordering: vᵢ > vⱼ ⇒ pᵢ ≤ pⱼ, vᵢ = vⱼ ⇒ pᵢ = pⱼ.
pub fn ordering_ok(v: &[f64; 4], p: &[f64; 4], tol: f64) -> bool {
    (0..4).all(|i| {
        (0..4).all(|j| {
            if v[i] == v[j] {
                (p[i] - p[j]).abs() <= tol
            } else if v[i] > v[j] {
                p[i] <= p[j] + tol
            } else {
                true
            }
        })
    })
}
