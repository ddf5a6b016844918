//! Subspace utilities on top of the SVD.

use nalgebra::DMatrix;

/// Orthonormal basis (as columns) of the column space of `m`, dropping
/// singular values below `tol` relative to the largest.
pub fn column_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > tol * top.max(1.0))
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Numerical rank of `m`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    column_basis(m, tol).ncols()
}

/// Orthonormal basis (as columns) of `{c : m c = 0}`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    let rows = m.nrows().max(cols);
    let mut square = DMatrix::zeros(rows, cols);
    square.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = square.svd(false, true);
    let vt = svd.v_t.expect("right vectors requested");
    let top = svd.singular_values.max().max(1.0);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol * top)
        .collect();
    DMatrix::from_fn(cols, keep.len(), |r, c| vt[(keep[c], r)])
}

/// Sines of the principal angles between the column spaces of the
/// orthonormal bases `a` and `b`, one per column of `a`, ascending.
pub fn principal_sines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 {
        return Vec::new();
    }
    let residual = a - b * (b.transpose() * a);
    let mut s: Vec<f64> = residual.svd(false, false).singular_values.iter().copied().collect();
    s.resize(a.ncols(), 0.0);
    s.sort_by(f64::total_cmp);
    s
}

/// Distance from `v` to the span of the columns of `m`.
pub fn projection_residual(m: &DMatrix<f64>, v: &[f64], tol: f64) -> f64 {
    let q = column_basis(m, tol);
    let v = nalgebra::DVector::from_column_slice(v);
    (&v - &q * (q.transpose() * &v)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, 1e-12);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-14);
    }

    #[test]
    fn angles_between_lines() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b = DMatrix::from_column_slice(2, 1, &[s, s]);
        assert!((principal_sines(&a, &b)[0] - s).abs() < 1e-14);
        assert!(principal_sines(&a, &a)[0] < 1e-15);
    }

    #[test]
    fn residual_to_plane() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!((projection_residual(&m, &[1.0, 2.0, 3.0], 1e-12) - 3.0).abs() < 1e-14);
    }
}
