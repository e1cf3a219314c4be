//! Small shared linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues sorted descending and the
/// eigenvector columns permuted to match.
pub fn sym_eigen_desc(mat: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = mat.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(eig.eigenvectors.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Center the rows of `x` by the column means; returns (mean, centered).
pub fn center_columns(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let t = x.nrows();
    let mean = DVector::from_iterator(
        x.ncols(),
        x.column_iter().map(|c| c.sum() / t as f64),
    );
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= mean[j];
        }
    }
    (mean, xc)
}

/// Cosine of the angle between two vectors.
pub fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rebuilt - &m).norm() < 1e-12);
    }

    #[test]
    fn centering_removes_column_means() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 9.0]);
        let (mean, xc) = center_columns(&x);
        assert!((mean[0] - 3.0).abs() < 1e-15 && (mean[1] - 5.0).abs() < 1e-15);
        for c in xc.column_iter() {
            assert!(c.sum().abs() < 1e-12);
        }
    }
}
