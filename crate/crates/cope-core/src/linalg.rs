//! Dense helpers for the small (p x p, p <= ~10) symmetric problems that the
//! per-cell regression needs. Matrices are row-major `Vec<f64>`.

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (ascending) and the matching eigenvectors as columns
/// of a row-major p x p matrix.
pub(crate) fn sym_eigen(a: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), p * p);
    let mut m = a.to_vec();
    let mut q = vec![0.0; p * p];
    for i in 0..p {
        q[i * p + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += m[i * p + j] * m[i * p + j];
            }
        }
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = m[i * p + j];
                if apq == 0.0 {
                    continue;
                }
                let app = m[i * p + i];
                let aqq = m[j * p + j];
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                    s / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mik = m[i * p + k];
                    let mjk = m[j * p + k];
                    m[i * p + k] = c * mik - s * mjk;
                    m[j * p + k] = s * mik + c * mjk;
                }
                for k in 0..p {
                    let mki = m[k * p + i];
                    let mkj = m[k * p + j];
                    m[k * p + i] = c * mki - s * mkj;
                    m[k * p + j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let qki = q[k * p + i];
                    let qkj = q[k * p + j];
                    q[k * p + i] = c * qki - s * qkj;
                    q[k * p + j] = s * qki + c * qkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| m[i * p + i].total_cmp(&m[j * p + j]));
    let values: Vec<f64> = order.iter().map(|&i| m[i * p + i]).collect();
    let mut vectors = vec![0.0; p * p];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..p {
            vectors[k * p + new] = q[k * p + old];
        }
    }
    (values, vectors)
}

/// Builds f(D) as Q f(lambda) Q^T from an eigendecomposition.
pub(crate) fn sym_function(values: &[f64], vectors: &[f64], p: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for k in 0..p {
                s += vectors[i * p + k] * f(values[k]) * vectors[j * p + k];
            }
            out[i * p + j] = s;
        }
    }
    out
}

/// C = A (r x k, row-major) * B (k x c, row-major).
#[cfg(test)]
pub(crate) fn mat_mul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for t in 0..k {
            let av = a[i * k + t];
            let brow = &b[t * c..t * c + c];
            let orow = &mut out[i * c..i * c + c];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn eigen_2x2_hand_case() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (vals, vecs) = sym_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        assert_close(vals[0], 1.0, 1e-12);
        assert_close(vals[1], 3.0, 1e-12);
        // reconstruct
        let rec = sym_function(&vals, &vecs, 2, |x| x);
        for (r, e) in rec.iter().zip([2.0, 1.0, 1.0, 2.0]) {
            assert_close(*r, e, 1e-12);
        }
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        // two-period style block matrix, n = 6
        let a = [3.0, 3.0, 0.0, 3.0, 6.0, 0.0, 0.0, 0.0, 2.5];
        let (vals, vecs) = sym_eigen(&a, 3);
        let inv_sqrt = sym_function(&vals, &vecs, 3, |x| 1.0 / x.sqrt());
        let prod = mat_mul(&inv_sqrt, &inv_sqrt, 3, 3, 3);
        let inv = sym_function(&vals, &vecs, 3, |x| 1.0 / x);
        for (p, i) in prod.iter().zip(inv.iter()) {
            assert_close(*p, *i, 1e-12);
        }
    }

    #[test]
    fn mat_mul_hand_case() {
        let a = [1.0, 2.0, 3.0, 4.0]; // 2x2
        let b = [5.0, 6.0, 7.0, 8.0];
        let c = mat_mul(&a, &b, 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }
}
