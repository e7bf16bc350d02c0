//! Small dense helpers for the low-dimensional matrices that show up in
//! task space (L x L with L typically 2 or 3). Nothing here is tuned for
//! large systems; the state-action chains use `ndarray` directly.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// `log(sum_i exp(x_i))` with max-subtraction.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns (eigenvalues, eigenvectors) with eigenvectors in columns, so
/// `a = v * diag(w) * v^T`. Ascending eigenvalue order.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = Array2::eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if off <= 1e-30 * (1.0 + frob_sq(&m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let w = Array1::from_iter(idx.iter().map(|&i| m[[i, i]]));
    let mut vs = Array2::zeros((n, n));
    for (col, &i) in idx.iter().enumerate() {
        for row in 0..n {
            vs[[row, col]] = v[[row, i]];
        }
    }
    (w, vs)
}

fn frob_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Solve `a x = b` by Gauss elimination with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve: matrix {}x{}, rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if m[[row, col]].abs() > m[[piv, col]].abs() {
                piv = row;
            }
        }
        if m[[piv, col]].abs() < 1e-300 {
            return Err(Error::Domain("singular matrix in solve".into()));
        }
        if piv != col {
            for k in 0..n {
                let tmp = m[[col, k]];
                m[[col, k]] = m[[piv, k]];
                m[[piv, k]] = tmp;
            }
            x.swap(col, piv);
        }
        let d = m[[col, col]];
        for row in (col + 1)..n {
            let f = m[[row, col]] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= m[[col, k]] * x[k];
        }
        x[col] = s / m[[col, col]];
    }
    Ok(x)
}

/// Inverse of a small square matrix, column by column through `solve`.
pub fn inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::zeros((n, n));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, &e)?;
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn logsumexp_matches_direct() {
        let xs = [0.3, -1.2, 2.5];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&xs), direct, epsilon = 1e-14);
    }

    #[test]
    fn logsumexp_survives_large_inputs() {
        let xs = [1000.0, 1000.0];
        assert_relative_eq!(logsumexp(&xs), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (w, v) = sym_eigen(&a);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 3.0, epsilon = 1e-12);
        // reconstruct
        let mut rec = Array2::zeros((2, 2));
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    rec[[i, j]] += w[k] * v[[i, k]] * v[[j, k]];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(rec[[i, j]], a[[i, j]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_handles_3x3_with_repeated_eigenvalue() {
        let a = array![[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (w, _) = sym_eigen(&a);
        assert_relative_eq!(w[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(w[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(w[2], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_and_inverse_agree() {
        let a = array![[4.0, 1.0, 0.2], [1.0, 3.0, -0.5], [0.2, -0.5, 2.0]];
        let b = [1.0, -2.0, 0.5];
        let x = solve(&a, &b).unwrap();
        let inv = inverse(&a).unwrap();
        for i in 0..3 {
            let xi: f64 = (0..3).map(|j| inv[[i, j]] * b[j]).sum();
            assert_relative_eq!(xi, x[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn solve_rejects_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(solve(&a, &[1.0, 1.0]).is_err());
    }
}
