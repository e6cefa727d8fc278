//! Closed-form solvers for the tiny symmetric systems used by the fits.

use crate::Scalar;

pub(crate) fn det3<T: Scalar>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves `m x = b` via the adjugate. Returns the determinant alongside so the
/// caller can apply its own degeneracy test; `None` only when it is exactly 0.
pub(crate) fn solve3<T: Scalar>(m: &[[T; 3]; 3], b: &[T; 3]) -> Option<([T; 3], T)> {
    let det = det3(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    // Cofactor matrix, transposed.
    let adj = [
        [
            m[1][1] * m[2][2] - m[1][2] * m[2][1],
            m[0][2] * m[2][1] - m[0][1] * m[2][2],
            m[0][1] * m[1][2] - m[0][2] * m[1][1],
        ],
        [
            m[1][2] * m[2][0] - m[1][0] * m[2][2],
            m[0][0] * m[2][2] - m[0][2] * m[2][0],
            m[0][2] * m[1][0] - m[0][0] * m[1][2],
        ],
        [
            m[1][0] * m[2][1] - m[1][1] * m[2][0],
            m[0][1] * m[2][0] - m[0][0] * m[2][1],
            m[0][0] * m[1][1] - m[0][1] * m[1][0],
        ],
    ];
    let mut x = [T::zero(); 3];
    for (xi, row) in x.iter_mut().zip(adj.iter()) {
        *xi = (row[0] * b[0] + row[1] * b[1] + row[2] * b[2]) / det;
    }
    Some((x, det))
}

/// Solves the 2×2 system `m x = b`; `None` when |det| <= `tol`.
pub(crate) fn solve2<T: Scalar>(m: &[[T; 2]; 2], b: &[T; 2], tol: T) -> Option<[T; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= tol || !det.is_finite() {
        return None;
    }
    Some([
        (m[1][1] * b[0] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}
