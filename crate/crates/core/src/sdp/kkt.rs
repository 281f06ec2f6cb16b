use super::{SdpProblem, SdpResult, SolverStatus};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, RMat};

/// Optimality residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// Largest negative eigenvalue magnitude of any slack block.
    pub primal_violation: f64,
    /// Max of the equality residual `|Σ Tr(Fⱼ Z) − cⱼ|` and the largest
    /// negative eigenvalue magnitude of any dual block.
    pub dual_violation: f64,
    /// `|p − d| / (1 + |p|)`.
    pub gap: f64,
    /// `max_b |Tr(Zᵇ Sᵇ)| / (1 + |p|)`.
    pub complementarity: f64,
}

/// Residuals of an optimal result; other statuses are rejected.
pub fn check_kkt(prob: &SdpProblem, result: &SdpResult) -> Result<KktReport> {
    if result.status != SolverStatus::Optimal {
        return Err(Error::NotOptimal(result.status));
    }
    Ok(kkt_residuals(prob, &result.x, &result.duals))
}

/// Residuals of an arbitrary primal/dual pair.
pub fn kkt_residuals(prob: &SdpProblem, x: &[f64], duals: &[RMat]) -> KktReport {
    let mut primal_violation: f64 = 0.0;
    let mut dual_violation: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut grad = vec![0.0; prob.n()];
    for (b, z) in prob.blocks().iter().zip(duals) {
        let s = b.slack(x);
        let smin = sym_eigenvalues(&s)[0];
        primal_violation = primal_violation.max(-smin);
        let zmin = sym_eigenvalues(z)[0];
        dual_violation = dual_violation.max(-zmin);
        comp = comp.max(s.dot(z).abs());
        for (j, f) in b.coeffs() {
            grad[*j] += f.dot(z);
        }
    }
    for (g, c) in grad.iter().zip(prob.c()) {
        dual_violation = dual_violation.max((g - c).abs());
    }
    let p = prob.objective(x);
    let d = prob.dual_objective(duals);
    KktReport {
        primal_violation,
        dual_violation,
        gap: (p - d).abs() / (1.0 + p.abs()),
        complementarity: comp / (1.0 + p.abs()),
    }
}
