//! Circulant initialisation, sensitivity scoring and latency-bounded
//! block-size assignment.
//!
//! Initialisation works on real-valued weights before any quantisation. For
//! each b x b block, every circulant diagonal is collapsed to one value:
//! either the plain mean (Frobenius-optimal) or the squared-gradient-weighted
//! mean, which minimises the Fisher-diagonal estimate of the loss change.
//! The per-layer sensitivity of a transformation is
//!
//! ```text
//! omega = sum_j grad_j^2 * (W'_j - W_j)^2
//! ```
//!
//! The assignment solver is an exact multiple-choice knapsack over the
//! layers: minimise total sensitivity subject to a latency budget, via
//! dynamic programming on integer-scaled latencies with a branch-and-bound
//! fallback when the scaled budget would be too large.

use serde::Serialize;
use thiserror::Error;

use crate::tensor::{Mat, Ten4};

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("block size {b} does not divide the weight dimensions {rows}x{cols}")]
    BadBlock { b: usize, rows: usize, cols: usize },
    #[error("weight and gradient shapes differ")]
    ShapeMismatch,
    #[error("no feasible assignment: minimum achievable latency {min_latency} exceeds the limit {limit}")]
    Infeasible { min_latency: f64, limit: f64 },
    #[error("empty problem")]
    Empty,
}

fn check_shapes_mat(w: &Mat<f64>, g: &Mat<f64>, b: usize) -> Result<(), AssignError> {
    if w.rows != g.rows || w.cols != g.cols {
        return Err(AssignError::ShapeMismatch);
    }
    if b == 0 || w.rows % b != 0 || w.cols % b != 0 {
        return Err(AssignError::BadBlock { b, rows: w.rows, cols: w.cols });
    }
    Ok(())
}

/// Collapse each block diagonal of `w` to the gradient-squared-weighted mean.
/// Diagonals whose squared gradients sum to zero fall back to the plain mean.
pub fn init_circulant_lossaware(
    w: &Mat<f64>,
    g: &Mat<f64>,
    b: usize,
) -> Result<Mat<f64>, AssignError> {
    check_shapes_mat(w, g, b)?;
    let mut out = Mat::zeros(w.rows, w.cols);
    for br in 0..w.rows / b {
        for bc in 0..w.cols / b {
            for diag in 0..b {
                // entries with (i - j) mod b == diag
                let mut num = 0.0;
                let mut den = 0.0;
                let mut plain = 0.0;
                for i in 0..b {
                    let j = (i + b - diag) % b;
                    let wv = *w.at(br * b + i, bc * b + j);
                    let gv = *g.at(br * b + i, bc * b + j);
                    num += wv * gv * gv;
                    den += gv * gv;
                    plain += wv;
                }
                let value = if den > 0.0 { num / den } else { plain / b as f64 };
                for i in 0..b {
                    let j = (i + b - diag) % b;
                    *out.at_mut(br * b + i, bc * b + j) = value;
                }
            }
        }
    }
    Ok(out)
}

/// Collapse each block diagonal to its arithmetic mean (minimises the
/// Frobenius distance to a block-circulant matrix).
pub fn init_circulant_frobenius(w: &Mat<f64>, b: usize) -> Result<Mat<f64>, AssignError> {
    let ones = Mat::from_vec(w.rows, w.cols, vec![1.0; w.rows * w.cols]);
    init_circulant_lossaware(w, &ones, b)
}

/// Per-spatial-tap circulant initialisation of a conv kernel: the (K, C)
/// channel matrix at every (r, s) is collapsed independently.
pub fn init_conv_lossaware(
    w: &Ten4<f64>,
    g: &Ten4<f64>,
    b: usize,
) -> Result<Ten4<f64>, AssignError> {
    if w.k != g.k || w.c != g.c || w.r != g.r || w.s != g.s {
        return Err(AssignError::ShapeMismatch);
    }
    let mut out = Ten4::zeros(w.k, w.c, w.r, w.s);
    for ry in 0..w.r {
        for rx in 0..w.s {
            let slice_w = Mat::from_vec(
                w.k,
                w.c,
                (0..w.k * w.c).map(|i| *w.at(i / w.c, i % w.c, ry, rx)).collect(),
            );
            let slice_g = Mat::from_vec(
                w.k,
                w.c,
                (0..w.k * w.c).map(|i| *g.at(i / w.c, i % w.c, ry, rx)).collect(),
            );
            let folded = init_circulant_lossaware(&slice_w, &slice_g, b)?;
            for k in 0..w.k {
                for c in 0..w.c {
                    *out.at_mut(k, c, ry, rx) = *folded.at(k, c);
                }
            }
        }
    }
    Ok(out)
}

pub fn init_conv_frobenius(w: &Ten4<f64>, b: usize) -> Result<Ten4<f64>, AssignError> {
    let ones = Ten4::from_vec(w.k, w.c, w.r, w.s, vec![1.0; w.data.len()]);
    init_conv_lossaware(w, &ones, b)
}

/// Fisher-diagonal sensitivity of transforming `w` to block size `b`.
pub fn sensitivity(w: &Mat<f64>, g: &Mat<f64>, b: usize) -> Result<f64, AssignError> {
    let folded = init_circulant_lossaware(w, g, b)?;
    Ok(w.data
        .iter()
        .zip(&folded.data)
        .zip(&g.data)
        .map(|((&orig, &new), &grad)| {
            let dw = new - orig;
            grad * grad * dw * dw
        })
        .sum())
}

pub fn sensitivity_conv(w: &Ten4<f64>, g: &Ten4<f64>, b: usize) -> Result<f64, AssignError> {
    let folded = init_conv_lossaware(w, g, b)?;
    Ok(w.data
        .iter()
        .zip(&folded.data)
        .zip(&g.data)
        .map(|((&orig, &new), &grad)| {
            let dw = new - orig;
            grad * grad * dw * dw
        })
        .sum())
}

/// One layer's chosen block size in a solved assignment.
#[derive(Debug, Clone, Serialize)]
pub struct AssignmentSolution {
    /// Index into the per-layer option list, one per layer.
    pub choices: Vec<usize>,
    pub total_sensitivity: f64,
    pub total_latency: f64,
}

/// Default latency resolution for the dynamic program (microseconds when
/// latencies are in seconds).
pub const DEFAULT_RESOLUTION: f64 = 1e-6;
/// Budget cap (in scaled latency units x layers) above which the solver
/// switches to branch and bound.
pub const DP_CELL_BUDGET: u64 = 5_000_000;

/// Exact multiple-choice knapsack: minimise total sensitivity subject to
/// `sum(lat) <= limit`. Ties prefer lower total latency (larger blocks).
pub fn assign_blocks(
    omega: &[Vec<f64>],
    lat: &[Vec<f64>],
    limit: f64,
    resolution: f64,
) -> Result<AssignmentSolution, AssignError> {
    if omega.is_empty() || omega.len() != lat.len() {
        return Err(AssignError::Empty);
    }
    for (o, l) in omega.iter().zip(lat) {
        if o.is_empty() || o.len() != l.len() {
            return Err(AssignError::Empty);
        }
    }
    let min_latency: f64 = lat.iter().map(|row| row.iter().cloned().fold(f64::MAX, f64::min)).sum();
    if min_latency > limit {
        return Err(AssignError::Infeasible { min_latency, limit });
    }

    let scale = |v: f64| -> u64 { (v / resolution).round() as u64 };
    let budget = scale(limit);
    let cells = budget.saturating_add(1).saturating_mul(omega.len() as u64);
    if cells <= DP_CELL_BUDGET {
        solve_dp(omega, lat, budget, resolution)
    } else {
        solve_branch_bound(omega, lat, limit)
    }
}

fn solve_dp(
    omega: &[Vec<f64>],
    lat: &[Vec<f64>],
    budget: u64,
    resolution: f64,
) -> Result<AssignmentSolution, AssignError> {
    let layers = omega.len();
    let width = budget as usize + 1;
    const UNSET: f64 = f64::INFINITY;
    // best[u] = (sensitivity, latency units) using exactly the layers so far
    let mut best = vec![(UNSET, 0u64); width];
    best[0] = (0.0, 0);
    let mut choice = vec![vec![usize::MAX; width]; layers];
    let scale = |v: f64| -> u64 { (v / resolution).round() as u64 };

    for (i, (orow, lrow)) in omega.iter().zip(lat).enumerate() {
        let mut next = vec![(UNSET, 0u64); width];
        let mut next_choice = vec![usize::MAX; width];
        for u in 0..width {
            let (acc, used) = best[u];
            if acc == UNSET {
                continue;
            }
            for (j, (&o, &l)) in orow.iter().zip(lrow).enumerate() {
                let lu = scale(l);
                let nu = u as u64 + lu;
                if nu > budget {
                    continue;
                }
                let cand = (acc + o, used + lu);
                let cur = next[nu as usize];
                if cur.0 == UNSET || cand < cur {
                    next[nu as usize] = cand;
                    next_choice[nu as usize] = j;
                }
            }
        }
        best = next;
        choice[i] = next_choice;
    }

    // Best reachable cell; ties prefer lower latency.
    let mut goal: Option<(f64, u64, usize)> = None;
    for (u, &(acc, used)) in best.iter().enumerate() {
        if acc == UNSET {
            continue;
        }
        if goal.is_none() || (acc, used) < (goal.unwrap().0, goal.unwrap().1) {
            goal = Some((acc, used, u));
        }
    }
    let (_, _, mut u) = goal.expect("feasibility checked before the DP");

    // Walk the choices back; reconstruct per-layer decisions.
    let mut choices = vec![0usize; layers];
    for i in (0..layers).rev() {
        let j = choice[i][u];
        debug_assert_ne!(j, usize::MAX);
        choices[i] = j;
        u -= scale(lat[i][j]) as usize;
    }
    let total_sensitivity = choices.iter().enumerate().map(|(i, &j)| omega[i][j]).sum();
    let total_latency = choices.iter().enumerate().map(|(i, &j)| lat[i][j]).sum();
    Ok(AssignmentSolution { choices, total_sensitivity, total_latency })
}

fn solve_branch_bound(
    omega: &[Vec<f64>],
    lat: &[Vec<f64>],
    limit: f64,
) -> Result<AssignmentSolution, AssignError> {
    let layers = omega.len();
    // Suffix lower bounds: minimal sensitivity / latency over remaining layers.
    let mut min_omega_suffix = vec![0.0; layers + 1];
    let mut min_lat_suffix = vec![0.0; layers + 1];
    for i in (0..layers).rev() {
        min_omega_suffix[i] =
            min_omega_suffix[i + 1] + omega[i].iter().cloned().fold(f64::MAX, f64::min);
        min_lat_suffix[i] = min_lat_suffix[i + 1] + lat[i].iter().cloned().fold(f64::MAX, f64::min);
    }

    struct Search<'a> {
        omega: &'a [Vec<f64>],
        lat: &'a [Vec<f64>],
        limit: f64,
        min_omega_suffix: &'a [f64],
        min_lat_suffix: &'a [f64],
        best: Option<(f64, f64, Vec<usize>)>,
        stack: Vec<usize>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, acc: f64, used: f64) {
            if let Some((bo, bl, _)) = &self.best {
                let bound = acc + self.min_omega_suffix[i];
                if bound > *bo || (bound == *bo && used + self.min_lat_suffix[i] >= *bl) {
                    return;
                }
            }
            if i == self.omega.len() {
                let better = match &self.best {
                    None => true,
                    Some((bo, bl, _)) => (acc, used) < (*bo, *bl),
                };
                if better {
                    self.best = Some((acc, used, self.stack.clone()));
                }
                return;
            }
            // explore options in sensitivity order for tighter pruning
            let mut order: Vec<usize> = (0..self.omega[i].len()).collect();
            order.sort_by(|&a, &b| {
                (self.omega[i][a], self.lat[i][a])
                    .partial_cmp(&(self.omega[i][b], self.lat[i][b]))
                    .unwrap()
            });
            for j in order {
                let u = used + self.lat[i][j];
                if u + self.min_lat_suffix[i + 1] > self.limit {
                    continue;
                }
                self.stack.push(j);
                self.go(i + 1, acc + self.omega[i][j], u);
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        omega,
        lat,
        limit,
        min_omega_suffix: &min_omega_suffix,
        min_lat_suffix: &min_lat_suffix,
        best: None,
        stack: Vec::new(),
    };
    search.go(0, 0.0, 0.0);
    let (total_sensitivity, total_latency, choices) =
        search.best.expect("feasibility checked before the search");
    Ok(AssignmentSolution { choices, total_sensitivity, total_latency })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_knapsack;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn worked_example() -> (Mat<f64>, Mat<f64>) {
        (
            Mat::from_vec(2, 2, vec![1.0, 2.0, 4.0, 3.0]),
            Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 5.0]),
        )
    }

    #[test]
    fn lossaware_worked_example() {
        let (w, g) = worked_example();
        let out = init_circulant_lossaware(&w, &g, 2).unwrap();
        let d0 = 76.0 / 26.0;
        let d1 = 44.0 / 13.0;
        let expect = [d0, d1, d1, d0];
        for (a, e) in out.data.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn frobenius_worked_example() {
        let (w, _) = worked_example();
        let out = init_circulant_frobenius(&w, 2).unwrap();
        assert_eq!(out.data, vec![2.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn uniform_gradients_reduce_to_frobenius() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w = Mat::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect());
            let ones = Mat::from_vec(4, 4, vec![1.0; 16]);
            let a = init_circulant_lossaware(&w, &ones, 2).unwrap();
            let b = init_circulant_frobenius(&w, 2).unwrap();
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn circulant_input_is_fixed_point() {
        // already circulant: any gradients leave it unchanged
        let w = Mat::from_vec(2, 2, vec![7.0, 9.0, 9.0, 7.0]);
        let g = Mat::from_vec(2, 2, vec![0.3, 2.0, 5.0, 1.0]);
        let out = init_circulant_lossaware(&w, &g, 2).unwrap();
        for (a, e) in out.data.iter().zip(&w.data) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!(sensitivity(&w, &g, 2).unwrap() < 1e-24);
    }

    #[test]
    fn zero_gradient_diagonal_falls_back_to_mean() {
        let w = Mat::from_vec(2, 2, vec![1.0, 2.0, 4.0, 3.0]);
        let g = Mat::from_vec(2, 2, vec![0.0, 2.0, 3.0, 0.0]);
        let out = init_circulant_lossaware(&w, &g, 2).unwrap();
        // main diagonal has zero gradients -> plain mean (1+3)/2
        assert!((out.data[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frobenius_minimality_against_perturbations() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w = Mat::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect());
            let folded = init_circulant_frobenius(&w, 4).unwrap();
            let dist =
                |a: &Mat<f64>| -> f64 { a.data.iter().zip(&w.data).map(|(x, y)| (x - y) * (x - y)).sum() };
            let base = dist(&folded);
            // perturb the generator by a random circulant delta
            let delta: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut pert = folded.clone();
            for i in 0..4 {
                for j in 0..4 {
                    *pert.at_mut(i, j) += delta[(i + 4 - j) % 4];
                }
            }
            assert!(dist(&pert) >= base - 1e-9);
        }
    }

    #[test]
    fn sensitivity_dense_block_is_zero() {
        let (w, g) = worked_example();
        assert_eq!(sensitivity(&w, &g, 1).unwrap(), 0.0);
    }

    #[test]
    fn sensitivity_matches_termwise_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = Mat::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let g = Mat::from_vec(4, 4, (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let fast = sensitivity(&w, &g, 2).unwrap();
            // independent route: build the folded matrix entry by entry
            let folded = init_circulant_lossaware(&w, &g, 2).unwrap();
            let mut slow = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    let dw = folded.at(r, c) - w.at(r, c);
                    slow += g.at(r, c) * g.at(r, c) * dw * dw;
                }
            }
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_init_independent_per_tap() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let w = Ten4::from_vec(2, 2, 3, 3, (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let g = Ten4::from_vec(2, 2, 3, 3, (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let folded = init_conv_lossaware(&w, &g, 2).unwrap();
        for ry in 0..3 {
            for rx in 0..3 {
                let slice_w =
                    Mat::from_vec(2, 2, vec![*w.at(0, 0, ry, rx), *w.at(0, 1, ry, rx), *w.at(1, 0, ry, rx), *w.at(1, 1, ry, rx)]);
                let slice_g =
                    Mat::from_vec(2, 2, vec![*g.at(0, 0, ry, rx), *g.at(0, 1, ry, rx), *g.at(1, 0, ry, rx), *g.at(1, 1, ry, rx)]);
                let expect = init_circulant_lossaware(&slice_w, &slice_g, 2).unwrap();
                assert!((folded.at(0, 0, ry, rx) - expect.at(0, 0)).abs() < 1e-12);
                assert!((folded.at(1, 0, ry, rx) - expect.at(1, 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_layer_forced_choice() {
        let omega = vec![vec![5.0, 1.0, 0.2]];
        let lat = vec![vec![1.0, 2.0, 4.0]];
        // budget admits only the first two options; picks the better omega
        let sol = assign_blocks(&omega, &lat, 2.5, 1e-3).unwrap();
        assert_eq!(sol.choices, vec![1]);
        // unconstrained budget picks the smallest omega
        let sol = assign_blocks(&omega, &lat, 10.0, 1e-3).unwrap();
        assert_eq!(sol.choices, vec![2]);
    }

    #[test]
    fn tight_limit_forces_cheapest_assignment() {
        let omega = vec![vec![0.0, 3.0], vec![0.0, 7.0]];
        let lat = vec![vec![4.0, 1.0], vec![4.0, 1.0]];
        let sol = assign_blocks(&omega, &lat, 2.0, 1e-3).unwrap();
        assert_eq!(sol.choices, vec![1, 1]);
        assert_eq!(sol.total_sensitivity, 10.0);
    }

    #[test]
    fn infeasible_limit_reports_minimum() {
        let omega = vec![vec![0.0, 1.0]];
        let lat = vec![vec![5.0, 3.0]];
        match assign_blocks(&omega, &lat, 2.0, 1e-3) {
            Err(AssignError::Infeasible { min_latency, .. }) => assert_eq!(min_latency, 3.0),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn dp_matches_exhaustive_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for trial in 0..50 {
            let layers = rng.gen_range(2..6);
            let options = rng.gen_range(2..5);
            let omega: Vec<Vec<f64>> = (0..layers)
                .map(|_| (0..options).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let lat: Vec<Vec<f64>> = (0..layers)
                .map(|_| (0..options).map(|_| rng.gen_range(0.5..5.0)).collect())
                .collect();
            let min: f64 =
                lat.iter().map(|r| r.iter().cloned().fold(f64::MAX, f64::min)).sum();
            let limit = min * rng.gen_range(1.0..2.0);
            let sol = assign_blocks(&omega, &lat, limit, 1e-4).unwrap();
            let oracle = exhaustive_knapsack(&omega, &lat, limit).unwrap();
            assert!(
                (sol.total_sensitivity - oracle).abs() < 1e-6,
                "trial {trial}: {} vs {}",
                sol.total_sensitivity,
                oracle
            );
            assert!(sol.total_latency <= limit + 1e-9);
        }
    }

    #[test]
    fn branch_bound_matches_dp() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let omega: Vec<Vec<f64>> =
                (0..6).map(|_| (0..4).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
            let lat: Vec<Vec<f64>> =
                (0..6).map(|_| (0..4).map(|_| rng.gen_range(0.5..4.0)).collect()).collect();
            let limit = 12.0;
            if assign_blocks(&omega, &lat, limit, 1e-3).is_err() {
                continue;
            }
            let dp = assign_blocks(&omega, &lat, limit, 1e-3).unwrap();
            let bb = solve_branch_bound(&omega, &lat, limit).unwrap();
            assert!((dp.total_sensitivity - bb.total_sensitivity).abs() < 1e-6);
        }
    }

    #[test]
    fn argmin_invariant_under_cost_scaling() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let omega: Vec<Vec<f64>> =
            (0..5).map(|_| (0..4).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
        let lat: Vec<Vec<f64>> =
            (0..5).map(|_| (0..4).map(|_| rng.gen_range(0.5..4.0)).collect()).collect();
        let limit = 9.0;
        let base = assign_blocks(&omega, &lat, limit, 1e-4).unwrap();
        for scale in [3.0, 0.25, 17.0] {
            let scaled: Vec<Vec<f64>> =
                lat.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let sol = assign_blocks(&omega, &scaled, limit * scale, 1e-4).unwrap();
            assert_eq!(sol.choices, base.choices, "scale {scale}");
        }
    }
}
