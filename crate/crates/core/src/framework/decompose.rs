//! Direct block assembly for C3 and C4(a), and their factorizations into
//! terms that are linear in the affine matrix argument.

use super::{C3Rec, C4Rec};
use crate::linalg::{c, CMat, CVec};

/// `[[Y B Y + αI, Y B y], [yᴴ B Y, yᴴ B y + d]]` with `d = d₀ + d_α α`.
pub fn c3_block(rec: &C3Rec, b: &CMat, alpha: f64) -> CMat {
    let m = rec.y.len();
    let y = rec.y_mat.as_mat();
    let ybv = y * b * &rec.y;
    let mut out = CMat::zeros(m + 1, m + 1);
    let top = y * b * y + CMat::identity(m, m) * c(alpha, 0.0);
    out.view_mut((0, 0), (m, m)).copy_from(&top);
    out.view_mut((0, m), (m, 1)).copy_from(&ybv);
    out.view_mut((m, 0), (1, m)).copy_from(&ybv.adjoint());
    let corner = (rec.y.adjoint() * b * &rec.y)[(0, 0)];
    out[(m, m)] = corner + c(rec.d_const + rec.d_alpha_coef * alpha, 0.0);
    out
}

#[derive(Debug, Clone)]
pub struct C3Decomposition {
    /// `diag(αI_M, d)`.
    pub f: CMat,
    /// `[Y y]`, `M×(M+1)`.
    pub g: CMat,
}

impl C3Decomposition {
    /// `F(α) + Gᴴ B G`.
    pub fn assemble(&self, b: &CMat) -> CMat {
        &self.f + self.g.adjoint() * b * &self.g
    }
}

pub fn decompose_c3(rec: &C3Rec, alpha: f64) -> C3Decomposition {
    let m = rec.y.len();
    let mut f = CMat::identity(m + 1, m + 1) * c(alpha, 0.0);
    f[(m, m)] = c(rec.d_const + rec.d_alpha_coef * alpha, 0.0);
    let mut g = CMat::zeros(m, m + 1);
    g.view_mut((0, 0), (m, m)).copy_from(rec.y_mat.as_mat());
    g.view_mut((0, m), (m, 1)).copy_from(&rec.y);
    C3Decomposition { f, g }
}

/// Column-stacked `(e Z C z ; vec(Z C Z))`, length `M² + M`.
pub fn schur_vector(rec: &C4Rec, cm: &CMat) -> CVec {
    let m = rec.z.len();
    let z = rec.z_mat.as_mat();
    let head = z * cm * &rec.z * c(rec.e, 0.0);
    let zcz = z * cm * z;
    let mut s = CVec::zeros(m * m + m);
    s.rows_mut(0, m).copy_from(&head);
    for l in 0..m {
        for k in 0..m {
            s[m + k + m * l] = zcz[(k, l)];
        }
    }
    s
}

/// `[[ϱ I, s], [sᴴ, ϱ]]`, PSD iff `‖s‖ ≤ ϱ`.
pub fn schur_c4_to_lmi(rec: &C4Rec, cm: &CMat, rho: f64) -> CMat {
    let s = schur_vector(rec, cm);
    let n = s.len();
    let mut out = CMat::identity(n + 1, n + 1) * c(rho, 0.0);
    out.view_mut((0, n), (n, 1)).copy_from(&s);
    out.view_mut((n, 0), (1, n)).copy_from(&s.adjoint());
    out
}

/// The second-order-cone form of C4.
pub fn c4_soc_holds(rec: &C4Rec, cm: &CMat, rho: f64, tol: f64) -> bool {
    schur_vector(rec, cm).norm() <= rho + tol
}

#[derive(Debug, Clone)]
pub struct C4Decomposition {
    pub k: CMat,
    pub l: CMat,
    pub j: CMat,
    /// `(M²+M+1)×M`.
    pub t: CMat,
    /// `M×(M²+M+1)`.
    pub p: CMat,
    /// `U_p = e_last u_pᵀ`, `(M²+M+1)×M`.
    pub u_list: Vec<CMat>,
    /// `V_p`: `I_M` at column offset `M + M p`, `M×(M²+M+1)`.
    pub v_list: Vec<CMat>,
}

impl C4Decomposition {
    /// `K + L + Lᴴ + J + Jᴴ`.
    pub fn assemble(&self) -> CMat {
        &self.k + &self.l + self.l.adjoint() + &self.j + self.j.adjoint()
    }
}

pub fn decompose_c4a(rec: &C4Rec, cm: &CMat, rho: f64) -> C4Decomposition {
    let m = rec.z.len();
    let n = m * m + m + 1;
    let z = rec.z_mat.as_mat();
    let k = CMat::identity(n, n) * c(rho, 0.0);
    let mut t = CMat::zeros(n, m);
    t.row_mut(n - 1).copy_from(&(rec.z.adjoint() * c(rec.e, 0.0)));
    let mut sel = CMat::zeros(m, n);
    sel.view_mut((0, 0), (m, m)).fill_with_identity();
    let p = z * sel;
    let l = &t * cm * &p;
    let zcz = z * cm * z;
    let mut u_list = Vec::with_capacity(m);
    let mut v_list = Vec::with_capacity(m);
    let mut j = CMat::zeros(n, n);
    for q in 0..m {
        let mut uq = CMat::zeros(n, m);
        uq[(n - 1, q)] = c(1.0, 0.0);
        let mut vq = CMat::zeros(m, n);
        vq.view_mut((0, m + m * q), (m, m)).fill_with_identity();
        j += &uq * &zcz * &vq;
        u_list.push(uq);
        v_list.push(vq);
    }
    C4Decomposition { k, l, j, t, p, u_list, v_list }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::AffineW;
    use crate::linalg::{max_abs, HMat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rh(m: usize, rng: &mut ChaCha8Rng) -> HMat {
        let a = CMat::from_fn(m, m, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        HMat::from_hermitian_part(&a)
    }

    fn rv(m: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(m, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn c3rec(m: usize, rng: &mut ChaCha8Rng) -> C3Rec {
        C3Rec {
            y_mat: rh(m, rng),
            y: rv(m, rng),
            d_const: -0.3,
            d_alpha_coef: -2.0,
            b: AffineW::new(1.0, vec![0.0]),
        }
    }

    fn c4rec(m: usize, rng: &mut ChaCha8Rng) -> C4Rec {
        C4Rec { z_mat: rh(m, rng), z: rv(m, rng), e: 2f64.sqrt(), c: AffineW::new(1.0, vec![0.0]) }
    }

    #[test]
    fn c3_zero_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = c3rec(3, &mut rng);
        let blk = decompose_c3(&rec, 0.0).assemble(&CMat::zeros(3, 3));
        let mut want = CMat::zeros(4, 4);
        want[(3, 3)] = c(rec.d_const, 0.0);
        assert!(max_abs(&(blk - want)) < 1e-15);
    }

    #[test]
    fn c3_decomposition_matches_direct_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 1..5 {
            let rec = c3rec(m, &mut rng);
            let b = rh(m, &mut rng).into_mat();
            let dec = decompose_c3(&rec, 0.7);
            assert_eq!((dec.g.nrows(), dec.g.ncols()), (m, m + 1));
            let diff = dec.assemble(&b) - c3_block(&rec, &b, 0.7);
            assert!(max_abs(&diff) < 1e-12);
        }
    }

    #[test]
    fn c4_zero_c_is_rho_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = c4rec(2, &mut rng);
        let blk = decompose_c4a(&rec, &CMat::zeros(2, 2), 1.5).assemble();
        assert!(max_abs(&(blk - CMat::identity(7, 7) * c(1.5, 0.0))) < 1e-15);
        let lmi = schur_c4_to_lmi(&rec, &CMat::zeros(2, 2), 0.0);
        assert!(HMat::new(lmi).unwrap().min_eigenvalue() >= -1e-15);
    }

    #[test]
    fn c4_decomposition_matches_schur_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in 1..4 {
            let rec = c4rec(m, &mut rng);
            let cm = rh(m, &mut rng).into_mat();
            let dec = decompose_c4a(&rec, &cm, 0.9);
            let n = m * m + m + 1;
            assert_eq!((dec.t.nrows(), dec.t.ncols()), (n, m));
            assert!(dec.v_list.iter().all(|v| v.nrows() == m && v.ncols() == n));
            let diff = dec.assemble() - schur_c4_to_lmi(&rec, &cm, 0.9);
            assert!(max_abs(&diff) < 1e-12);
            let l2 = &dec.t * &cm * &dec.p;
            assert!(max_abs(&(l2 - &dec.l)) < 1e-15);
        }
    }

    #[test]
    fn schur_block_psd_iff_norm_bounded() {
        // M=1, Z=z=1, C=4, e=0.75 gives s = (3, 4)
        let rec = C4Rec {
            z_mat: HMat::identity(1),
            z: CVec::from_element(1, c(1.0, 0.0)),
            e: 0.75,
            c: AffineW::new(1.0, vec![0.0]),
        };
        let cm = CMat::from_element(1, 1, c(4.0, 0.0));
        let s = schur_vector(&rec, &cm);
        assert!((s[0].re - 3.0).abs() < 1e-15 && (s[1].re - 4.0).abs() < 1e-15);
        let at5 = HMat::new(schur_c4_to_lmi(&rec, &cm, 5.0)).unwrap().min_eigenvalue();
        assert!(at5.abs() < 1e-12);
        let at49 = HMat::new(schur_c4_to_lmi(&rec, &cm, 4.9)).unwrap().min_eigenvalue();
        assert!(at49 < 0.0);
        assert!(c4_soc_holds(&rec, &cm, 5.0, 1e-12) && !c4_soc_holds(&rec, &cm, 4.9, 0.0));
    }
}
