//! Small dense symmetric helpers shared by the oracle and verification code.

use nalgebra::{DMatrix, DVector};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order with the matching eigenvectors as
/// columns. Sweeps stop once the off-diagonal Frobenius norm drops to
/// `1e-12` times the matrix Frobenius norm.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    assert!(a.is_square(), "jacobi_eigen needs a square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    // symmetrize against caller roundoff
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    let target = 1e-12 * scale;

    for _sweep in 0..100 {
        if off_norm(&m) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

fn off_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Smallest eigenvalue of a symmetric matrix (Jacobi).
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    jacobi_eigen(a).0[0]
}

/// Spectral norm of a symmetric matrix: largest eigenvalue magnitude.
pub fn sym_operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    jacobi_eigen(a).0.iter().fold(0.0, |m, v| m.max(v.abs()))
}
