//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// 2-norm condition number via SVD; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Cheap 2-norm condition estimate of an upper-triangular matrix using a few
/// rounds of power iteration on `R^T R` and on its inverse.
pub fn triangular_condition_estimate(r: &DMatrix<f64>) -> f64 {
    let n = r.ncols();
    if n == 0 {
        return 1.0;
    }
    if r.diagonal().iter().any(|d| *d == 0.0 || !d.is_finite()) {
        return f64::INFINITY;
    }
    let start = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i * 7919) % 13) as f64);
    let mut v = start.normalize();
    let mut smax = 0.0;
    for _ in 0..30 {
        let w = r.tr_mul(&(r * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return f64::INFINITY;
        }
        smax = nw.sqrt();
        v = w / nw;
    }
    let mut u = start.normalize();
    let mut inv_max = 0.0;
    for _ in 0..30 {
        // (R^T R)^{-1} u = R^{-1} R^{-T} u
        let Some(a) = r.tr_solve_upper_triangular(&u) else {
            return f64::INFINITY;
        };
        let Some(b) = r.solve_upper_triangular(&a) else {
            return f64::INFINITY;
        };
        let nb = b.norm();
        if !nb.is_finite() {
            return f64::INFINITY;
        }
        inv_max = nb.sqrt();
        u = b / nb;
    }
    smax * inv_max
}

/// Linear-interpolation percentile of an ascending slice, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile of an unsorted sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_duplicated_rows() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 1.0]);
        assert_eq!(numeric_rank(&m, 1e-8), 2);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numeric_rank(&m, 1e-8), 1);
    }

    #[test]
    fn triangular_estimate_matches_svd() {
        let r = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 0.0, 0.5, 3.0, 0.0, 0.0, 1e-3]);
        let est = triangular_condition_estimate(&r);
        let exact = condition_number(&r);
        assert!((est / exact - 1.0).abs() < 1e-3, "{est} vs {exact}");
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 1.0), 5.0);
        assert!((percentile(&v, 0.9) - 4.6).abs() < 1e-12);
    }
}
