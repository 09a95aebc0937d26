//! Small dense helpers shared by the channel, precoding and IRS modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Hermitian asymmetry `||A - A^H||_F / ||A||_F` (0 for the zero matrix).
pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    let norm = a.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (a - a.adjoint()).norm() / norm
}

/// Column-wise Kronecker product: column `l` is `a[:, l] ⊗ b[:, l]`.
///
/// Panics if the column counts differ.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.ncols(), "khatri-rao operands need equal column counts");
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(ra * rb, a.ncols());
    for l in 0..a.ncols() {
        for i in 0..ra {
            let ail = a[(i, l)];
            for j in 0..rb {
                out[(i * rb + j, l)] = ail * b[(j, l)];
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// `diag(theta) * m`, scaling row `l` of `m` by `theta[l]`.
pub fn scale_rows(theta: &CVector, m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for (l, mut row) in out.row_iter_mut().enumerate() {
        row *= theta[l];
    }
    out
}

/// `I_2 ⊗ a`.
pub fn kron_identity2(a: &CMatrix) -> CMatrix {
    let (r, c) = a.shape();
    let mut out = CMatrix::zeros(2 * r, 2 * c);
    out.view_mut((0, 0), (r, c)).copy_from(a);
    out.view_mut((r, c), (r, c)).copy_from(a);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn khatri_rao_vectorizes_diagonal_products() {
        // (C^T ⊙ A) vecd(B) = vec(A B C), brute force on a 2x2x2 instance.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 2, 2);
        let c = random(&mut rng, 2, 2);
        let theta = CVector::from_fn(2, |_, _| C64::new(rng.random(), rng.random()));
        let b = CMatrix::from_diagonal(&theta);
        let lhs = khatri_rao(&c.transpose(), &a) * &theta;
        let rhs = vec(&(&a * &b * &c));
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn asymmetry_of_hermitian_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 4, 4);
        let h = &a + a.adjoint();
        assert!(hermitian_asymmetry(&h) < 1e-16);
        assert!(hermitian_asymmetry(&a) > 0.1);
    }
}
