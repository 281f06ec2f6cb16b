//! Block-diagonal LMI programs.
//!
//! ```text
//! minimize    cᵀx
//! subject to  F₀ᵇ + Σⱼ xⱼ Fⱼᵇ ⪰ 0      for every block b
//! ```
//!
//! The dual is `maximize −Σ_b Tr(F₀ᵇ Zᵇ)` subject to `Σ_b Tr(Fⱼᵇ Zᵇ) = cⱼ`,
//! `Zᵇ ⪰ 0`. Blocks are real symmetric; complex Hermitian constraints are
//! brought here through [`crate::linalg::real_embed`].

mod ipm;
mod kkt;
mod sdpa;

pub use ipm::solve;
pub use kkt::{check_kkt, kkt_residuals, KktReport};
pub use sdpa::{export_sdpa, format_g17, parse_sdpa};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;

/// Symmetry tolerance for block data.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// One LMI block `F₀ + Σ xⱼ Fⱼ ⪰ 0`; only non-zero `Fⱼ` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    dim: usize,
    base: RMat,
    coeffs: Vec<(usize, RMat)>,
}

impl LmiBlock {
    pub fn new(base: RMat) -> Self {
        let dim = base.nrows();
        LmiBlock {
            dim,
            base,
            coeffs: Vec::new(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(RMat::zeros(dim, dim))
    }

    /// 1×1 block `base + Σ coefᵢ x_{varᵢ} ≥ 0`.
    pub fn scalar(base: f64, terms: &[(usize, f64)]) -> Self {
        let mut b = Self::new(RMat::from_element(1, 1, base));
        for &(j, v) in terms {
            if v != 0.0 {
                b.add_coeff(j, RMat::from_element(1, 1, v));
            }
        }
        b
    }

    /// Adds `mat` to the coefficient of variable `var`. All-zero matrices are dropped.
    pub fn add_coeff(&mut self, var: usize, mat: RMat) {
        if mat.iter().all(|&v| v == 0.0) {
            return;
        }
        match self.coeffs.binary_search_by_key(&var, |(j, _)| *j) {
            Ok(pos) => self.coeffs[pos].1 += mat,
            Err(pos) => self.coeffs.insert(pos, (var, mat)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &RMat {
        &self.base
    }

    /// Non-zero coefficient matrices sorted by variable index.
    pub fn coeffs(&self) -> &[(usize, RMat)] {
        &self.coeffs
    }

    pub fn coeff(&self, var: usize) -> Option<&RMat> {
        self.coeffs
            .binary_search_by_key(&var, |(j, _)| *j)
            .ok()
            .map(|p| &self.coeffs[p].1)
    }

    /// The same block multiplied by `d > 0`.
    pub fn scaled(&self, d: f64) -> LmiBlock {
        LmiBlock {
            dim: self.dim,
            base: &self.base * d,
            coeffs: self.coeffs.iter().map(|(j, f)| (*j, f * d)).collect(),
        }
    }

    /// `F₀ + Σ xⱼ Fⱼ`.
    pub fn slack(&self, x: &[f64]) -> RMat {
        let mut s = self.base.clone();
        for (j, f) in &self.coeffs {
            s += f * x[*j];
        }
        s
    }
}

/// Validated LMI-form SDP.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    n: usize,
    c: Vec<f64>,
    blocks: Vec<LmiBlock>,
}

impl SdpProblem {
    pub fn new(c: Vec<f64>, blocks: Vec<LmiBlock>) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return Err(Error::Invalid("SDP needs at least one variable".into()));
        }
        if blocks.is_empty() {
            return Err(Error::Invalid("SDP needs at least one block".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective".into()));
        }
        let mut used = vec![false; n];
        for (b, blk) in blocks.iter().enumerate() {
            check_symmetric(&blk.base, blk.dim, b, "F0")?;
            for (j, f) in &blk.coeffs {
                if *j >= n {
                    return Err(Error::Dimension(format!(
                        "block {b} references variable {j} but n = {n}"
                    )));
                }
                check_symmetric(f, blk.dim, b, "Fj")?;
                used[*j] = true;
            }
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(Error::Invalid(format!(
                "variable {j} appears in no block"
            )));
        }
        Ok(SdpProblem { n, c, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(LmiBlock::dim).collect()
    }

    /// Same constraints, objective `c` replaced.
    pub fn with_objective(&self, c: Vec<f64>) -> Result<Self> {
        Self::new(c, self.blocks.clone())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `−Σ Tr(F₀ Z)`.
    pub fn dual_objective(&self, duals: &[RMat]) -> f64 {
        -self
            .blocks
            .iter()
            .zip(duals)
            .map(|(b, z)| b.base.dot(z))
            .sum::<f64>()
    }
}

fn check_symmetric(m: &RMat, dim: usize, block: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Dimension(format!(
            "block {block}: {what} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("block {block}: {what}")));
    }
    let scale = 1.0 + m.amax();
    for i in 0..dim {
        for j in i + 1..dim {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::Invalid(format!(
                    "block {block}: {what} not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Optimal => "Optimal",
            SolverStatus::Infeasible => "Infeasible",
            SolverStatus::Unbounded => "Unbounded",
            SolverStatus::NumericalFailure => "NumericalFailure",
            SolverStatus::IterationLimit => "IterationLimit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Primal/dual residual tolerance.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Tolerance on the normalized Farkas residual used to declare infeasibility.
    pub infeas_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            infeas_threshold: 1e-8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.gap_tol) && ok(self.feas_tol) && ok(self.infeas_threshold)) || self.max_iter == 0 {
            return Err(Error::Invalid(format!("solver settings {self:?}")));
        }
        Ok(())
    }
}

/// Outcome of [`solve`].
///
/// For `Infeasible`, `duals` hold the normalized Farkas certificate
/// (`Z ⪰ 0`, `Σ Tr(Fⱼ Z) ≈ 0`, `Σ Tr(F₀ Z) = −1`) and `x` is meaningless;
/// for `Unbounded`, `x` is the improving ray.
#[derive(Debug, Clone)]
pub struct SdpResult {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub duals: Vec<RMat>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `primal_obj − dual_obj`.
    pub gap: f64,
    pub iterations: usize,
    /// Relative primal residual of the returned point.
    pub primal_residual: f64,
    /// Relative dual residual of the returned point.
    pub dual_residual: f64,
}

impl SdpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// `gap / max(|p|, |d|, 1e-6)`, the quantity bounded by `gap_tol` at optimality.
    pub fn relative_gap(&self) -> f64 {
        relative_gap(self.gap.abs(), self.primal_obj, self.dual_obj)
    }
}

pub(crate) const GAP_FLOOR: f64 = 1e-6;

pub(crate) fn relative_gap(gap: f64, p: f64, d: f64) -> f64 {
    gap / p.abs().max(d.abs()).max(GAP_FLOOR)
}
