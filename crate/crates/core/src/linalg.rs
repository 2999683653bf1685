//! Small dense helpers shared by the solvers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest eigenvalue of a symmetric matrix given row-major.
pub(crate) fn min_symmetric_eigenvalue(n: usize, data: &[f64]) -> f64 {
    let m = DMatrix::from_row_slice(n, n, data);
    m.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Solves `a x = b` for a small square system; `None` when singular.
pub(crate) fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Minimum-norm element of the convex hull of `points`, by Wolfe's
/// active-set algorithm.
pub(crate) fn min_norm_convex_combination(points: &[Vec<f64>]) -> Vec<f64> {
    assert!(!points.is_empty());
    let dim = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![0.0; dim];
    }
    let combine = |set: &[usize], w: &[f64]| {
        let mut out = vec![0.0; dim];
        for (i, wi) in set.iter().zip(w) {
            for (o, p) in out.iter_mut().zip(&points[*i]) {
                *o += wi * p;
            }
        }
        out
    };
    let first = (0..points.len())
        .min_by(|a, b| dot(&points[*a], &points[*a]).total_cmp(&dot(&points[*b], &points[*b])))
        .unwrap_or(0);
    let mut set = vec![first];
    let mut weights = vec![1.0];
    let mut x = points[first].clone();
    for _ in 0..100 * (points.len() + 1) {
        let xx = dot(&x, &x);
        let (j, best) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if best >= xx - 1e-14 * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        weights.push(0.0);
        loop {
            let alpha = affine_min_norm(points, &set);
            if alpha.iter().all(|a| *a > 1e-15) {
                weights = alpha;
                x = combine(&set, &weights);
                break;
            }
            // Step from the current weights towards alpha until one hits zero.
            let mut theta: f64 = 1.0;
            for (l, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-15 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in weights.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut i = 0;
            while i < set.len() {
                if weights[i] <= 1e-15 {
                    set.remove(i);
                    weights.remove(i);
                } else {
                    i += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(&set, &weights);
            if set.len() == 1 {
                break;
            }
        }
    }
    x
}

/// Weights (summing to one) of the min-norm point of the affine hull of the
/// selected points.
fn affine_min_norm(points: &[Vec<f64>], set: &[usize]) -> Vec<f64> {
    let n = set.len();
    let size = n + 1;
    let mut a = vec![0.0; size * size];
    let trace: f64 = set.iter().map(|i| dot(&points[*i], &points[*i])).sum();
    for r in 0..n {
        for c in 0..n {
            a[r * size + c] = dot(&points[set[r]], &points[set[c]]);
        }
        a[r * size + r] += 1e-14 * trace;
        a[r * size + n] = 1.0;
        a[n * size + r] = 1.0;
    }
    let mut rhs = vec![0.0; size];
    rhs[n] = 1.0;
    match solve_dense(size, &a, &rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => sol[..n].to_vec(),
        _ => vec![1.0 / n as f64; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_of_segment_crossing_origin_is_zero() {
        let pts = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        assert!(norm(&min_norm_convex_combination(&pts)) < 1e-12);
    }

    #[test]
    fn min_norm_projects_origin_onto_edge() {
        let pts = vec![vec![1.0, -1.0], vec![1.0, 1.0], vec![3.0, 0.0]];
        let m = min_norm_convex_combination(&pts);
        assert!((m[0] - 1.0).abs() < 1e-9 && m[1].abs() < 1e-9);
    }

    #[test]
    fn min_norm_of_single_point_is_the_point() {
        let pts = vec![vec![0.5, -2.0]];
        assert_eq!(min_norm_convex_combination(&pts), pts[0]);
    }

    #[test]
    fn min_norm_with_interior_origin_in_triangle() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![0.5, 0.5]];
        assert!(norm(&min_norm_convex_combination(&pts)) < 1e-12);
    }
}
