//! Rank-one diagnostics, beamvector extraction, and the Lagrangian dual
//! certificate `Φᵢ ⪰ 0`, `Tr(Φᵢ Wᵢ) = 0` that forces rank one.

use crate::error::{Error, Result};
use crate::framework::{
    decompose_c3, decompose_c4a, BlockKind, FrameworkProblem, FrameworkSolution, VariableMap,
};
use crate::linalg::{c, compress_real, herm_eig, trace_prod, CMat, CVec, HMat, RMat};
use crate::sdp::{SdpProblem, SdpResult, SolverStatus};

/// Relative tolerance under which negative eigenvalues count as zero.
pub const ROT_CLAMP_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RotReport {
    pub per_matrix: Vec<f64>,
    pub max_ratio: f64,
}

/// `Σ_{k≥2} λₖ / λ₁` for one matrix.
pub fn rot_ratio(w: &HMat) -> Result<f64> {
    let e = herm_eig(w);
    let l1 = e.eigenvalues[0];
    if !(l1 > 0.0) {
        return Err(Error::UndefinedRatio(format!("largest eigenvalue is {l1:e}")));
    }
    let tail: f64 = e.eigenvalues[1..]
        .iter()
        .map(|&l| if l < 0.0 && l >= -ROT_CLAMP_REL * l1 { 0.0 } else { l.abs() })
        .sum();
    Ok(tail / l1)
}

pub fn rot(ws: &[HMat]) -> Result<RotReport> {
    if ws.is_empty() {
        return Err(Error::UndefinedRatio("no matrices".into()));
    }
    let per_matrix = ws.iter().map(rot_ratio).collect::<Result<Vec<_>>>()?;
    let max_ratio = per_matrix.iter().cloned().fold(0.0, f64::max);
    Ok(RotReport { per_matrix, max_ratio })
}

/// Rank-one test of a phase-shift matrix.
pub fn rot_theta(theta: &HMat) -> Result<f64> {
    rot_ratio(theta)
}

/// `√λ₁ v₁`, with the largest-magnitude entry rotated to the nonnegative real axis.
pub fn extract_rank_one(w: &HMat) -> Result<CVec> {
    let e = herm_eig(w);
    let l1 = e.eigenvalues[0];
    if !(l1 > 0.0) {
        return Err(Error::UndefinedRatio(format!("largest eigenvalue is {l1:e}")));
    }
    let v = e.eigenvectors.column(0).into_owned();
    let mut best = 0;
    for k in 1..v.len() {
        // strict comparison with a relative margin keeps ties on the lowest index
        if v[k].norm() > v[best].norm() * (1.0 + 1e-12) {
            best = k;
        }
    }
    let phase = if v[best].norm() > 0.0 { v[best].conj() / v[best].norm() } else { c(1.0, 0.0) };
    Ok(v * phase * c(l1.sqrt(), 0.0))
}

/// Lagrange multipliers of a solved framework instance and the matrices `Φᵢ`.
///
/// `Φᵢ` is the gradient of the Lagrangian with respect to `Wᵢ` taken over all
/// constraints except `Wᵢ ⪰ 0`; stationarity then gives `Φᵢ = Nᵢ`.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub q: Vec<HMat>,
    pub kappa: Vec<f64>,
    pub r: Vec<HMat>,
    pub s: Vec<HMat>,
    pub nmat: Vec<HMat>,
    /// Multipliers of the `fᵢ ≥ 0` sign constraints (free `f` only).
    pub f_sign: Vec<f64>,
    pub phi: Vec<HMat>,
    pub eta: f64,
    /// `Σ Tr(Φᵢ Wᵢ) + η` at the solver's primal point.
    pub dual_value: f64,
}

pub fn build_dual_certificate(
    fp: &FrameworkProblem,
    prob: &SdpProblem,
    map: &VariableMap,
    result: &SdpResult,
) -> Result<DualCertificate> {
    if result.status != SolverStatus::Optimal {
        return Err(Error::NotOptimal(result.status));
    }
    if prob.blocks().len() != map.blocks().len() || result.duals.len() != map.blocks().len() {
        return Err(Error::Dimension("problem, map and result disagree on block count".into()));
    }
    let (u, m) = (fp.u(), fp.m());
    let (l1, l3, l4, l5) = fp.counts();
    let mut cert = DualCertificate {
        beta: vec![0.0; l1],
        tau: vec![0.0; fp.c2().len()],
        q: vec![HMat::zeros(m + 1); l3],
        kappa: vec![0.0; l3],
        r: vec![HMat::zeros(m * m + m + 1); l4],
        s: vec![HMat::zeros(m); l5],
        nmat: vec![HMat::zeros(m); u],
        f_sign: vec![0.0; l5],
        phi: Vec::new(),
        eta: 0.0,
        dual_value: 0.0,
    };
    let mut grad: Vec<f64> = prob.c().to_vec();
    let mut eta = 0.0;
    for ((kind, blk), z) in map.blocks().iter().zip(prob.blocks()).zip(&result.duals) {
        let scalar = || z[(0, 0)];
        let herm = |z: &RMat| HMat::from_hermitian_part(&compress_real(z));
        match *kind {
            BlockKind::C1(i) => cert.beta[i] = scalar(),
            BlockKind::C2(i) => cert.tau[i] = scalar(),
            BlockKind::C3(i) => cert.q[i] = herm(z),
            BlockKind::C4(i) => cert.r[i] = herm(z),
            BlockKind::C5(i) => cert.s[i] = herm(z),
            BlockKind::C6(i) => {
                cert.nmat[i] = herm(z);
                continue;
            }
            BlockKind::AlphaNonneg(i) => cert.kappa[i] = scalar(),
            BlockKind::FNonneg(i) => cert.f_sign[i] = scalar(),
        }
        eta -= blk.base().dot(z);
        for (j, f) in blk.coeffs() {
            grad[*j] -= f.dot(z);
        }
    }
    for (j, g) in grad.iter().enumerate() {
        if !map.is_w_var(j) {
            eta += g * result.x[j];
        }
    }
    cert.phi = (0..u).map(|i| phi_from_gradient(&grad, map, i)).collect();
    let w: Vec<CMat> = (0..u).map(|i| map.w_from(&result.x, i)).collect();
    cert.dual_value = cert
        .phi
        .iter()
        .zip(&w)
        .map(|(p, w)| trace_prod(p.as_mat(), w).re)
        .sum::<f64>()
        + eta;
    cert.eta = eta;
    Ok(cert)
}

/// Hermitian `Φ` with `Tr(Φ Eⱼ) = grad[j]` on the packing basis of `Wᵢ`.
fn phi_from_gradient(grad: &[f64], map: &VariableMap, i: usize) -> HMat {
    let m = map.m();
    let o = map.w_offset(i);
    let mut phi = CMat::zeros(m, m);
    for k in 0..m {
        phi[(k, k)] = c(grad[o + k], 0.0);
    }
    let mut t = m;
    for k in 0..m {
        for l in k + 1..m {
            let v = c(grad[o + t] / 2.0, grad[o + t + 1] / 2.0);
            phi[(k, l)] = v;
            phi[(l, k)] = v.conj();
            t += 2;
        }
    }
    HMat::from_hermitian_part(&phi)
}

/// `Φᵢ` assembled term by term from the multipliers using the decomposed
/// constraint forms (`Gᴴ B G` for C3, `T C P` and `Σ U Z C Z V` for C4).
/// Agrees with the gradient form up to rounding; the `−Nᵢ` term is omitted.
pub fn phi_from_multipliers(fp: &FrameworkProblem, cert: &DualCertificate) -> Vec<HMat> {
    let (u, m) = (fp.u(), fp.m());
    let zero_c = CMat::zeros(m, m);
    (0..u)
        .map(|i| {
            let mut phi = fp.a()[i].as_mat().clone();
            for (l, r) in fp.c1().iter().enumerate() {
                if l == i && r.a != 0.0 {
                    phi -= r.x_self.as_mat() * c(cert.beta[l] * r.a, 0.0);
                }
                phi -= r.x_cross[i].as_mat() * c(cert.beta[l] * r.b[i], 0.0);
            }
            if let Some(r) = fp.c2().get(i) {
                phi -= r.mmat.as_mat() * c(cert.tau[i] * r.m, 0.0);
            }
            for (l, r) in fp.c3().iter().enumerate() {
                let k = r.b.coef(l, i);
                if k != 0.0 {
                    let g = decompose_c3(r, 0.0).g;
                    phi -= &g * cert.q[l].as_mat() * g.adjoint() * c(k, 0.0);
                }
            }
            for (l, r) in fp.c4().iter().enumerate() {
                let k = r.c.coef(l, i);
                if k == 0.0 {
                    continue;
                }
                let d = decompose_c4a(r, &zero_c, 0.0);
                let rr = cert.r[l].as_mat();
                let z = r.z_mat.as_mat();
                let mut term = &d.p * rr * &d.t;
                term += d.t.adjoint() * rr * d.p.adjoint();
                for (up, vp) in d.u_list.iter().zip(&d.v_list) {
                    term += z * vp * rr * up * z;
                    term += z * up.adjoint() * rr * vp.adjoint() * z;
                }
                phi -= term * c(k, 0.0);
            }
            for (l, r) in fp.c5().iter().enumerate() {
                let k = r.e.coef(l, i);
                if k == 0.0 {
                    continue;
                }
                let mut term = CMat::zeros(m, m);
                for (lam, psi) in r.lambdas.iter().zip(&r.psis) {
                    term += psi * r.d_tilde.as_mat() * cert.s[l].as_mat() * r.d.as_mat() * lam;
                }
                phi -= term * c(k * r.v, 0.0);
            }
            HMat::from_hermitian_part(&phi)
        })
        .collect()
}

/// Thresholds of [`verify_certificate`].
pub const PHI_PSD_TOL: f64 = 1e-6;
pub const COMPLEMENTARITY_TOL: f64 = 1e-5;
pub const CERT_ROT_TOL: f64 = 1e-4;
pub const DUAL_VALUE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `min eig Φᵢ` per user.
    pub phi_min_eig: Vec<f64>,
    pub phi_psd: bool,
    /// `|Tr(Φᵢ Wᵢ)|` per user.
    pub complementarity: Vec<f64>,
    pub complementarity_ok: bool,
    /// ROT per user; `None` for matrices treated as zero.
    pub rot: Vec<Option<f64>>,
    pub rank_one: bool,
    /// `|g(Υ) − objective| / max(1, |objective|)`.
    pub dual_value_residual: f64,
    pub dual_value_ok: bool,
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.phi_psd && self.complementarity_ok && self.rank_one && self.dual_value_ok
    }
}

/// Checks `Φᵢ ⪰ 0`, `Tr(Φᵢ Wᵢ) ≈ 0`, rank one of nonzero `Wᵢ`, and strong duality.
pub fn verify_certificate(cert: &DualCertificate, sol: &FrameworkSolution) -> CertificateReport {
    let obj = sol.objective;
    let total: f64 = sol.w.iter().map(HMat::trace).sum();
    let zero_thresh = 1e-9 * total.abs().max(1.0);
    let mut phi_min_eig = Vec::new();
    let mut phi_psd = true;
    for p in &cert.phi {
        let mn = p.min_eigenvalue();
        phi_psd &= mn >= -PHI_PSD_TOL * (1.0 + p.spectral_norm());
        phi_min_eig.push(mn);
    }
    let complementarity: Vec<f64> = cert
        .phi
        .iter()
        .zip(&sol.w)
        .map(|(p, w)| trace_prod(p.as_mat(), w.as_mat()).re.abs())
        .collect();
    let complementarity_ok = complementarity.iter().all(|v| *v <= COMPLEMENTARITY_TOL * (1.0 + obj.abs()));
    let rot: Vec<Option<f64>> = sol
        .w
        .iter()
        .map(|w| if w.trace() <= zero_thresh { None } else { rot_ratio(w).ok() })
        .collect();
    let rank_one = rot.iter().all(|r| r.is_none_or(|v| v <= CERT_ROT_TOL));
    let dual_value_residual = (cert.dual_value - obj).abs() / obj.abs().max(1.0);
    CertificateReport {
        phi_min_eig,
        phi_psd,
        complementarity,
        complementarity_ok,
        rot,
        rank_one,
        dual_value_residual,
        dual_value_ok: dual_value_residual <= DUAL_VALUE_TOL,
    }
}
