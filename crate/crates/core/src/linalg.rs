//! Dense complex matrices and Hermitian eigen-primitives.
//!
//! Everything downstream works with small (≤ ~100) dense matrices, so these
//! are thin wrappers around `nalgebra` with the validation rules the rest of
//! the crate relies on: Hermitian inputs are checked once at the boundary and
//! every tolerance is relative to the spectral norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Complex dense matrix, row/column access through `nalgebra`.
pub type CMat = DMatrix<C64>;
/// Complex column vector.
pub type CVec = DVector<C64>;
/// Real dense matrix.
pub type RMat = DMatrix<f64>;

/// Relative tolerance for the Hermitian check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues above `-PSD_CLAMP_TOL * ‖A‖` are treated as numerical noise.
pub const PSD_CLAMP_TOL: f64 = 1e-10;
/// Below `-PSD_REJECT_TOL * ‖A‖` a matrix is rejected as not PSD.
pub const PSD_REJECT_TOL: f64 = 1e-8;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Entrywise deviation `max |A − Aᴴ|`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `Tr(A B)` without forming the product.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Column-stacking `vec(A)`.
pub fn vec_cols(a: &CMat) -> CVec {
    CVec::from_iterator(a.len(), a.iter().copied())
}

/// Hermitian matrix, checked at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HMat(CMat);

impl HMat {
    pub fn new(a: CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !is_finite(&a) {
            return Err(Error::NonFinite("matrix has NaN/Inf entries".into()));
        }
        let defect = hermitian_defect(&a);
        let scale = 1.0 + max_abs(&a);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(format!(
                "max |A - A^H| = {defect:.3e} exceeds {:.3e}",
                HERMITIAN_TOL * scale
            )));
        }
        Ok(HMat(a))
    }

    /// Takes the Hermitian part `(A + Aᴴ)/2` of a square matrix.
    pub fn from_hermitian_part(a: &CMat) -> Self {
        HMat((a + a.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn from_real(a: &RMat) -> Result<Self> {
        Self::new(a.map(|x| C64::new(x, 0.0)))
    }

    pub fn identity(n: usize) -> Self {
        HMat(identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        HMat(CMat::zeros(n, n))
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut a = CMat::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            a[(i, i)] = C64::new(x, 0.0);
        }
        HMat(a)
    }

    /// `v vᴴ`.
    pub fn outer(v: &CVec) -> Self {
        HMat::from_hermitian_part(&outer(v, v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        HMat(&self.0 * C64::new(s, 0.0))
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn spectral_norm(&self) -> f64 {
        let e = herm_eig(self);
        e.eigenvalues
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *herm_eig(self).eigenvalues.last().unwrap_or(&0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *herm_eig(self).eigenvalues.first().unwrap_or(&0.0)
    }

    /// Congruence `B A Bᴴ`, which stays Hermitian.
    pub fn congruence(&self, b: &CMat) -> HMat {
        HMat::from_hermitian_part(&(b * &self.0 * b.adjoint()))
    }
}

impl std::ops::Add for &HMat {
    type Output = HMat;
    fn add(self, rhs: &HMat) -> HMat {
        HMat(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &HMat {
    type Output = HMat;
    fn sub(self, rhs: &HMat) -> HMat {
        HMat(&self.0 - &rhs.0)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub eigenvalues: Vec<f64>,
    /// Column `d` is the eigenvector for `eigenvalues[d]`.
    pub eigenvectors: CMat,
}

impl EigDecomp {
    /// `V Λ Vᴴ`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.eigenvalues.len();
        let mut out = CMat::zeros(n, n);
        for (d, &lam) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(d);
            out += (v * v.adjoint()) * C64::new(lam, 0.0);
        }
        out
    }
}

pub fn herm_eig(a: &HMat) -> EigDecomp {
    let n = a.dim();
    if n == 0 {
        return EigDecomp {
            eigenvalues: Vec::new(),
            eigenvectors: CMat::zeros(0, 0),
        };
    }
    let se = SymmetricEigen::new(a.as_mat().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    EigDecomp {
        eigenvalues,
        eigenvectors,
    }
}

/// Checked variant of [`herm_eig`] for raw complex input.
pub fn herm_eig_checked(a: &CMat) -> Result<EigDecomp> {
    Ok(herm_eig(&HMat::new(a.clone())?))
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(a: &HMat) -> Result<HMat> {
    let e = herm_eig(a);
    let norm = e.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let min = e.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -PSD_REJECT_TOL * norm {
        return Err(Error::NotPsd(format!(
            "min eigenvalue {min:.3e} below -{PSD_REJECT_TOL:e} x {norm:.3e}"
        )));
    }
    let sqrt: Vec<f64> = e.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let rebuilt = EigDecomp {
        eigenvalues: sqrt,
        eigenvectors: e.eigenvectors,
    }
    .reconstruct();
    Ok(HMat::from_hermitian_part(&rebuilt))
}

/// Real symmetric embedding `[[Re A, −Im A], [Im A, Re A]]`.
pub fn real_embed(a: &HMat) -> RMat {
    embed_complex(a.as_mat())
}

/// Embedding for arbitrary square complex matrices; linear in `a`.
pub fn embed_complex(a: &CMat) -> RMat {
    let n = a.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
            out[(i + n, j + n)] = z.re;
        }
    }
    out
}

/// Adjoint of [`embed_complex`] restricted to symmetric input: returns the
/// Hermitian `Q` with `Tr(Z · embed(K)) = Re Tr(Q K)` for every Hermitian `K`.
pub fn compress_real(z: &RMat) -> CMat {
    let n = z.nrows() / 2;
    let mut q = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = z[(i, j)] + z[(i + n, j + n)];
            let im = z[(i + n, j)] - z[(i, j + n)];
            q[(i, j)] = C64::new(re, im);
        }
    }
    (&q + q.adjoint()) * C64::new(0.5, 0.0)
}

/// `max(λ_max(A), 0)`.
pub fn s_plus(a: &HMat) -> f64 {
    a.max_eigenvalue().max(0.0)
}

/// Symmetric eigenvalues of a real matrix, ascending.
pub fn sym_eigenvalues(a: &RMat) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_herm(n: usize, rng: &mut ChaCha8Rng) -> HMat {
        let a = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        HMat::from_hermitian_part(&a)
    }

    fn rand_cmat(r: usize, cc: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(r, cc, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn diff(a: &CMat, b: &CMat) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn identity_eigenvalues() {
        let e = herm_eig(&HMat::identity(3));
        assert_eq!(e.eigenvalues.len(), 3);
        for l in e.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigen_basis() {
        let e = herm_eig(&HMat::diag(&[1.0, 2.0]));
        assert!((e.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        // first eigenvector is e2 up to phase
        assert!((e.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(e.eigenvectors[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = rand_herm(5, &mut rng);
            let e = herm_eig(&a);
            let norm = a.spectral_norm();
            assert!(diff(&e.reconstruct(), a.as_mat()) <= 1e-10 * norm.max(1.0));
            let vhv = e.eigenvectors.adjoint() * &e.eigenvectors;
            assert!(diff(&vhv, &identity(5)) <= 1e-10);
            for w in e.eigenvalues.windows(2) {
                assert!(w[0] >= w[1]);
            }
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((sum - a.trace()).abs() <= 1e-10 * (1.0 + a.trace().abs()));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        let err = HMat::new(a).unwrap_err();
        assert!(matches!(err, Error::NotHermitian(_)));
    }

    #[test]
    fn psd_sqrt_examples() {
        let r = psd_sqrt(&HMat::identity(3)).unwrap();
        assert!(diff(r.as_mat(), &identity(3)) < 1e-14);
        let r = psd_sqrt(&HMat::diag(&[4.0, 9.0])).unwrap();
        assert!(diff(r.as_mat(), HMat::diag(&[2.0, 3.0]).as_mat()) < 1e-13);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let b = rand_cmat(4, 4, &mut rng);
            let a = HMat::from_hermitian_part(&(b.adjoint() * &b));
            let r = psd_sqrt(&a).unwrap();
            let sq = r.as_mat() * r.as_mat();
            assert!(diff(&sq, a.as_mat()) <= 1e-9 * a.spectral_norm());
            assert!(r.min_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        assert!(matches!(
            psd_sqrt(&HMat::diag(&[1.0, -0.5])),
            Err(Error::NotPsd(_))
        ));
        // tiny negative noise is clamped
        assert!(psd_sqrt(&HMat::diag(&[1.0, -1e-12])).is_ok());
    }

    #[test]
    fn psd_sqrt_unitary_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = rand_cmat(3, 3, &mut rng);
        let a = HMat::from_hermitian_part(&(b.adjoint() * &b));
        let q = herm_eig(&rand_herm(3, &mut rng)).eigenvectors;
        let lhs = psd_sqrt(&a.congruence(&q)).unwrap();
        let rhs = psd_sqrt(&a).unwrap().congruence(&q);
        assert!(diff(lhs.as_mat(), rhs.as_mat()) <= 1e-9);
    }

    #[test]
    fn real_embed_real_input_is_block_diagonal() {
        let a = HMat::from_real(&RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])).unwrap();
        let e = real_embed(&a);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(e[(i, j)], e[(i + 2, j + 2)]);
                assert_eq!(e[(i, j + 2)], 0.0);
            }
        }
        let ev = sym_eigenvalues(&e);
        let base = herm_eig(&a).eigenvalues;
        assert!((ev[0] - base[1]).abs() < 1e-12 && (ev[1] - base[1]).abs() < 1e-12);
        assert!((ev[2] - base[0]).abs() < 1e-12 && (ev[3] - base[0]).abs() < 1e-12);
    }

    #[test]
    fn real_embed_pauli_y() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = c(0.0, -1.0);
        a[(1, 0)] = c(0.0, 1.0);
        let e = real_embed(&HMat::new(a).unwrap());
        let ev = sym_eigenvalues(&e);
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (x, y) in ev.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn real_embed_trace_and_psd_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = rand_herm(3, &mut rng);
            let e = real_embed(&a);
            assert!((e.trace() - 2.0 * a.trace()).abs() < 1e-12);
            let lo_c = a.min_eigenvalue();
            let lo_r = sym_eigenvalues(&e)[0];
            assert_eq!(lo_c >= 0.0, lo_r >= -1e-14 && lo_c >= -1e-14);
            assert!((lo_c - lo_r).abs() < 1e-10);
        }
    }

    #[test]
    fn compress_is_adjoint_of_embed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let k = rand_herm(3, &mut rng);
            let z0 = RMat::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
            let z = (&z0 + z0.transpose()) * 0.5;
            let lhs = z.component_mul(&real_embed(&k)).sum();
            let rhs = trace_prod(&compress_real(&z), k.as_mat()).re;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn s_plus_examples() {
        assert_eq!(s_plus(&HMat::diag(&[3.0, -1.0])), 3.0);
        assert_eq!(s_plus(&HMat::identity(3).scale(-1.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a = rand_herm(4, &mut rng);
            assert_eq!(s_plus(&a), herm_eig(&a).eigenvalues[0].max(0.0));
        }
    }
}
