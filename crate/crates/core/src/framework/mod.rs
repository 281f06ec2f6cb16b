//! The general rank-one framework: Hermitian matrix variables `W₁…W_U`,
//! scalar variables `α`, `ϱ`, `f`, and five constraint families plus `Wᵢ ⪰ 0`.
//!
//! Constraint families (index `i` runs over the records of each family):
//!
//! ```text
//! C1  a Tr(Xᵢᵢ Wᵢ) + Σⱼ bⱼ Tr(Xᵢⱼ Wⱼ) + c ≥ 0,   c = c₀ + c_ϱ ϱᵢ + c_f fᵢ
//! C2  m Tr(M Wᵢ) + p ≥ 0
//! C3  [[Y B Y + αᵢ I, Y B y], [yᴴ B Y, yᴴ B y + d]] ⪰ 0,   d = d₀ + d_α αᵢ
//! C4  ‖(e Z C z ; vec(Z C Z))‖ ≤ ϱᵢ, compiled as the Schur block
//! C5  f I + v D (Σₖ Λₖ E Ψₖ) D̃ ⪰ 0
//! ```
//!
//! with `B, C, E` each of the form `g Wᵢ + Σⱼ hⱼ Wⱼ`.

mod compile;
mod decompose;

pub use compile::{
    compile, constraint_margins, recover, solve, BlockKind, FrameworkPoint, FrameworkSolution, VariableMap,
};
pub use decompose::{
    c3_block, c4_soc_holds, decompose_c3, decompose_c4a, schur_c4_to_lmi, schur_vector, C3Decomposition,
    C4Decomposition,
};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, CMat, CVec, HMat, HERMITIAN_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct C1Rec {
    pub a: f64,
    pub b: Vec<f64>,
    pub x_self: HMat,
    pub x_cross: Vec<HMat>,
    pub c_const: f64,
    /// Coefficient on `ϱᵢ` (C4 variable with the same index).
    pub c_rho_coef: f64,
    /// Coefficient on `fᵢ` (C5 variable with the same index).
    pub c_f_coef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C2Rec {
    pub m: f64,
    pub mmat: HMat,
    pub p: f64,
}

/// Affine map `g Wᵢ + Σⱼ hⱼ Wⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineW {
    pub g: f64,
    pub h: Vec<f64>,
}

impl AffineW {
    pub fn new(g: f64, h: Vec<f64>) -> Self {
        AffineW { g, h }
    }

    /// Coefficient of `Wⱼ` when the owning record has index `i`.
    pub fn coef(&self, i: usize, j: usize) -> f64 {
        let own = if i == j { self.g } else { 0.0 };
        own + self.h[j]
    }

    pub fn apply(&self, i: usize, w: &[CMat]) -> CMat {
        let m = w[0].nrows();
        let mut out = CMat::zeros(m, m);
        for (j, wj) in w.iter().enumerate() {
            let k = self.coef(i, j);
            if k != 0.0 {
                out += wj * crate::linalg::c(k, 0.0);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct C3Rec {
    pub y_mat: HMat,
    pub y: CVec,
    pub d_const: f64,
    pub d_alpha_coef: f64,
    pub b: AffineW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C4Rec {
    pub z_mat: HMat,
    pub z: CVec,
    pub e: f64,
    pub c: AffineW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct C5Rec {
    pub v: f64,
    pub d: HMat,
    pub d_tilde: HMat,
    pub lambdas: Vec<CMat>,
    pub psis: Vec<CMat>,
    pub e: AffineW,
    /// `Some(f)` pins the scalar to a constant instead of a decision variable.
    pub f_fixed: Option<f64>,
}

impl C5Rec {
    /// `v D (Σₖ Λₖ E Ψₖ) D̃` for a given `E`.
    pub fn apply(&self, e: &CMat) -> CMat {
        let mut sum = CMat::zeros(e.nrows(), e.ncols());
        for (l, p) in self.lambdas.iter().zip(&self.psis) {
            sum += l * e * p;
        }
        self.d.as_mat() * sum * self.d_tilde.as_mat() * crate::linalg::c(self.v, 0.0)
    }
}

/// Validated framework instance. Construct with [`FrameworkProblem::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkProblem {
    u: usize,
    m: usize,
    a: Vec<HMat>,
    c1: Vec<C1Rec>,
    c2: Vec<C2Rec>,
    c3: Vec<C3Rec>,
    c4: Vec<C4Rec>,
    c5: Vec<C5Rec>,
}

/// Constraint records passed to [`FrameworkProblem::new`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub c1: Vec<C1Rec>,
    pub c2: Vec<C2Rec>,
    pub c3: Vec<C3Rec>,
    pub c4: Vec<C4Rec>,
    pub c5: Vec<C5Rec>,
}

fn dim_err(what: String) -> Error {
    Error::Dimension(what)
}

fn check_h(x: &HMat, m: usize, what: &str) -> Result<()> {
    if x.dim() != m {
        return Err(dim_err(format!("{what} is {0}x{0}, expected {m}x{m}", x.dim())));
    }
    Ok(())
}

fn check_len(v: usize, want: usize, what: &str) -> Result<()> {
    if v != want {
        return Err(dim_err(format!("{what} has length {v}, expected {want}")));
    }
    Ok(())
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

fn check_self_zero(v: f64, i: usize, u: usize, what: &str) -> Result<()> {
    if i >= u && v != 0.0 {
        return Err(Error::Invalid(format!(
            "{what} record {i} has nonzero self coefficient but only {u} matrix variables exist"
        )));
    }
    Ok(())
}

fn check_affine(a: &AffineW, i: usize, u: usize, what: &str) -> Result<()> {
    check_len(a.h.len(), u, &format!("{what}[{i}] cross coefficients"))?;
    check_finite(a.g, what)?;
    for &h in &a.h {
        check_finite(h, what)?;
    }
    check_self_zero(a.g, i, u, what)
}

impl FrameworkProblem {
    pub fn new(u: usize, m: usize, a: Vec<HMat>, cons: Constraints) -> Result<Self> {
        if u == 0 || m == 0 {
            return Err(Error::Invalid("U and M must be positive".into()));
        }
        check_len(a.len(), u, "objective matrix list")?;
        for ai in &a {
            check_h(ai, m, "A_i")?;
        }
        let Constraints { c1, c2, c3, c4, c5 } = cons;
        for (i, r) in c1.iter().enumerate() {
            check_len(r.b.len(), u, "C1 b")?;
            check_len(r.x_cross.len(), u, "C1 X_cross")?;
            check_h(&r.x_self, m, "C1 X_self")?;
            for x in &r.x_cross {
                check_h(x, m, "C1 X_cross")?;
            }
            for v in [r.a, r.c_const, r.c_rho_coef, r.c_f_coef].into_iter().chain(r.b.iter().copied()) {
                check_finite(v, "C1 coefficient")?;
            }
            check_self_zero(r.a, i, u, "C1")?;
            if r.c_rho_coef != 0.0 && i >= c4.len() {
                return Err(Error::Invalid(format!("C1 record {i} couples to missing ϱ_{i}")));
            }
            if r.c_f_coef != 0.0 && (i >= c5.len() || c5[i].f_fixed.is_some()) {
                return Err(Error::Invalid(format!("C1 record {i} couples to missing f_{i}")));
            }
        }
        if c2.len() > u {
            return Err(Error::Invalid(format!("{} C2 records for {u} matrix variables", c2.len())));
        }
        for r in &c2 {
            check_h(&r.mmat, m, "C2 M")?;
            check_finite(r.m, "C2 m")?;
            check_finite(r.p, "C2 p")?;
        }
        for (i, r) in c3.iter().enumerate() {
            check_h(&r.y_mat, m, "C3 Y")?;
            check_len(r.y.len(), m, "C3 y")?;
            check_finite(r.d_const, "C3 d")?;
            check_finite(r.d_alpha_coef, "C3 d_alpha")?;
            check_affine(&r.b, i, u, "C3")?;
            if r.y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite("C3 y".into()));
            }
        }
        for (i, r) in c4.iter().enumerate() {
            check_h(&r.z_mat, m, "C4 Z")?;
            check_len(r.z.len(), m, "C4 z")?;
            check_finite(r.e, "C4 e")?;
            check_affine(&r.c, i, u, "C4")?;
            if r.z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite("C4 z".into()));
            }
        }
        for (i, r) in c5.iter().enumerate() {
            check_h(&r.d, m, "C5 D")?;
            check_h(&r.d_tilde, m, "C5 D~")?;
            check_finite(r.v, "C5 v")?;
            if r.lambdas.is_empty() || r.lambdas.len() != r.psis.len() {
                return Err(dim_err(format!(
                    "C5[{i}] has {} Λ and {} Ψ matrices",
                    r.lambdas.len(),
                    r.psis.len()
                )));
            }
            for x in r.lambdas.iter().chain(&r.psis) {
                if x.nrows() != m || x.ncols() != m {
                    return Err(dim_err(format!("C5[{i}] Λ/Ψ must be {m}x{m}")));
                }
                if !crate::linalg::is_finite(x) {
                    return Err(Error::NonFinite(format!("C5[{i}] Λ/Ψ")));
                }
            }
            if let Some(f) = r.f_fixed {
                check_finite(f, "C5 fixed f")?;
            }
            check_affine(&r.e, i, u, "C5")?;
            check_hermitian_preserving(r, m, i)?;
        }
        Ok(FrameworkProblem { u, m, a, c1, c2, c3, c4, c5 })
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[HMat] {
        &self.a
    }

    pub fn c1(&self) -> &[C1Rec] {
        &self.c1
    }

    pub fn c2(&self) -> &[C2Rec] {
        &self.c2
    }

    pub fn c3(&self) -> &[C3Rec] {
        &self.c3
    }

    pub fn c4(&self) -> &[C4Rec] {
        &self.c4
    }

    pub fn c5(&self) -> &[C5Rec] {
        &self.c5
    }

    /// `(L₁, L₃, L₄, L₅)`.
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.c1.len(), self.c3.len(), self.c4.len(), self.c5.len())
    }

    /// `Σ Tr(Aᵢ Wᵢ)`.
    pub fn objective(&self, w: &[HMat]) -> f64 {
        self.a.iter().zip(w).map(|(a, w)| crate::linalg::trace_prod(a.as_mat(), w.as_mat()).re).sum()
    }
}

/// The C5 map must send Hermitian `E` to Hermitian matrices, otherwise the
/// block is not a valid LMI. Checked on a Hermitian basis.
fn check_hermitian_preserving(r: &C5Rec, m: usize, i: usize) -> Result<()> {
    let scale = {
        let one = CMat::identity(m, m);
        1.0 + crate::linalg::max_abs(&r.apply(&one))
    };
    for e in hermitian_basis(m) {
        let out = r.apply(&e);
        if hermitian_defect(&out) > 1e3 * HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(format!("C5[{i}] map does not preserve Hermitian matrices")));
        }
    }
    Ok(())
}

/// Real basis of `M×M` Hermitian matrices in packing order: diagonal entries,
/// then `(Re, Im)` for each pair `k < l` in row-major order.
pub fn hermitian_basis(m: usize) -> Vec<CMat> {
    use crate::linalg::c;
    let mut out = Vec::with_capacity(m * m);
    for k in 0..m {
        let mut e = CMat::zeros(m, m);
        e[(k, k)] = c(1.0, 0.0);
        out.push(e);
    }
    for k in 0..m {
        for l in k + 1..m {
            let mut re = CMat::zeros(m, m);
            re[(k, l)] = c(1.0, 0.0);
            re[(l, k)] = c(1.0, 0.0);
            out.push(re);
            let mut im = CMat::zeros(m, m);
            im[(k, l)] = c(0.0, 1.0);
            im[(l, k)] = c(0.0, -1.0);
            out.push(im);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    pub(crate) fn simple_c1(u: usize, m: usize) -> C1Rec {
        C1Rec {
            a: 1.0,
            b: vec![0.0; u],
            x_self: HMat::identity(m),
            x_cross: vec![HMat::zeros(m); u],
            c_const: -1.0,
            c_rho_coef: 0.0,
            c_f_coef: 0.0,
        }
    }

    #[test]
    fn minimal_instance_counts() {
        let fp = FrameworkProblem::new(
            1,
            2,
            vec![HMat::identity(2)],
            Constraints { c1: vec![simple_c1(1, 2)], ..Default::default() },
        )
        .unwrap();
        assert_eq!(fp.counts(), (1, 0, 0, 0));
    }

    #[test]
    fn nonzero_self_coefficient_beyond_u_rejected() {
        let c3 = |g: f64| C3Rec {
            y_mat: HMat::identity(2),
            y: CVec::zeros(2),
            d_const: 0.0,
            d_alpha_coef: 0.0,
            b: AffineW::new(g, vec![1.0]),
        };
        let r = FrameworkProblem::new(
            1,
            2,
            vec![HMat::identity(2)],
            Constraints { c3: vec![c3(1.0), c3(1.0)], ..Default::default() },
        );
        assert!(matches!(r, Err(Error::Invalid(_))));
        assert!(FrameworkProblem::new(
            1,
            2,
            vec![HMat::identity(2)],
            Constraints { c3: vec![c3(1.0), c3(0.0)], ..Default::default() },
        )
        .is_ok());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = FrameworkProblem::new(
            1,
            3,
            vec![HMat::identity(3)],
            Constraints { c1: vec![simple_c1(1, 2)], ..Default::default() },
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn non_hermitian_c5_map_rejected() {
        let mut lam = CMat::zeros(2, 2);
        lam[(0, 1)] = c(1.0, 0.0);
        let rec = C5Rec {
            v: 1.0,
            d: HMat::identity(2),
            d_tilde: HMat::identity(2),
            lambdas: vec![lam],
            psis: vec![CMat::identity(2, 2)],
            e: AffineW::new(1.0, vec![0.0]),
            f_fixed: None,
        };
        let r = FrameworkProblem::new(
            1,
            2,
            vec![HMat::identity(2)],
            Constraints { c5: vec![rec], ..Default::default() },
        );
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    #[test]
    fn affine_map_is_linear() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_h = || {
            let a = CMat::from_fn(3, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            HMat::from_hermitian_part(&a).into_mat()
        };
        let w: Vec<CMat> = (0..2).map(|_| rand_h()).collect();
        let w2: Vec<CMat> = (0..2).map(|_| rand_h()).collect();
        let sum: Vec<CMat> = w.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let map = AffineW::new(1.3, vec![-1.0, 0.5]);
        let lhs = map.apply(0, &sum);
        let rhs = map.apply(0, &w) + map.apply(0, &w2);
        assert!(crate::linalg::max_abs(&(lhs - rhs)) < 1e-14);
    }
}
