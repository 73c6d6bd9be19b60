//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// `v^H A v` for Hermitian `A`; the imaginary round-off is dropped.
pub fn quad_form(a: &CMat, v: &CVec) -> f64 {
    let av = a * v;
    v.iter()
        .zip(av.iter())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

/// Rank-one outer product `h h^H`.
pub fn outer(h: &CVec) -> CMat {
    h * h.adjoint()
}

/// `Re Tr(A B)` for Hermitian `A`, `B`.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    // Tr(AB) = Σ A_ij B_ji = Σ A_ij conj(B_ij) when B is Hermitian
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum::<f64>()
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Hermitian eigendecomposition; eigenvalues are unsorted.
pub fn eigh(a: &CMat) -> (DVector<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    (eig.eigenvalues, eig.eigenvectors)
}

/// Euclidean projection onto the PSD cone by eigenvalue clipping.
pub fn project_psd(a: &CMat) -> CMat {
    let (vals, vecs) = eigh(a);
    let n = a.nrows();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let s = Complex64::new(lam.max(0.0), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    hermitian_part(&(scaled * vecs.adjoint()))
}

/// Largest eigenpair of a Hermitian matrix.
pub fn principal_eigen(a: &CMat) -> (f64, CVec) {
    let (vals, vecs) = eigh(a);
    let (idx, &lam) = vals
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty matrix");
    (lam, vecs.column(idx).into_owned())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
