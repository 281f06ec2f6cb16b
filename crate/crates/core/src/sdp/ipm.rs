//! Primal-dual interior-point method on the homogeneous self-dual embedding,
//! Nesterov-Todd scaling, Mehrotra predictor-corrector.
//!
//! Internally the problem is written in cone form
//! `min cᵀx  s.t.  Gx + s = h, s ⪰ 0` with `Gx = −Σ xⱼ Fⱼ`, `h = F₀`.

use nalgebra::{Cholesky, DVector, Dyn, SymmetricEigen};

use super::{relative_gap, LmiBlock, SdpProblem, SdpResult, SolverSettings, SolverStatus};
use crate::error::Result;
use crate::linalg::RMat;

const STEP: f64 = 0.99;
const SIGMA_EXP: f64 = 3.0;
const REFINE_STEPS: usize = 3;

type Blocks = Vec<RMat>;

fn blocks_dot(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_norm(a: &[RMat]) -> f64 {
    blocks_dot(a, a).sqrt()
}

fn sym(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

/// `Gx = −Σ xⱼ Fⱼ` for every block.
fn g_apply(blocks: &[LmiBlock], x: &DVector<f64>) -> Blocks {
    blocks
        .iter()
        .map(|b| {
            let mut out = RMat::zeros(b.dim(), b.dim());
            for (j, f) in b.coeffs() {
                out -= f * x[*j];
            }
            out
        })
        .collect()
}

/// `(Gᵀz)ⱼ = −Σ_b Tr(Fⱼᵇ zᵇ)`.
fn gt_apply(blocks: &[LmiBlock], n: usize, z: &[RMat]) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (b, zb) in blocks.iter().zip(z) {
        for (j, f) in b.coeffs() {
            out[*j] -= f.dot(zb);
        }
    }
    out
}

/// Solves the dense SPD system, regularizing the diagonal if Cholesky fails.
fn spd_factor(h: &RMat) -> Option<Cholesky<f64, Dyn>> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Some(ch);
    }
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14;
    while reg < 1e-6 {
        let mut hh = h.clone();
        for i in 0..h.nrows() {
            hh[(i, i)] += reg * scale;
        }
        if let Some(ch) = Cholesky::new(hh) {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

/// Nesterov-Todd scaling of one block: `Rᵀ z R = R⁻¹ s R⁻ᵀ = diag(λ)`.
struct Scaling {
    r: RMat,
    rinv: RMat,
    lambda: DVector<f64>,
}

impl Scaling {
    fn new(s: &RMat, z: &RMat) -> Option<Self> {
        let ls = Cholesky::new(s.clone())?.l();
        let lz = Cholesky::new(z.clone())?.l();
        let svd = (lz.transpose() * &ls).svd(true, true);
        let u = svd.u?;
        let v = svd.v_t?.transpose();
        let lambda = svd.singular_values;
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let isq = lambda.map(|l| 1.0 / l.sqrt());
        // R = Ls V Λ^{-1/2}, R⁻¹ = Λ^{-1/2} Uᵀ Lzᵀ
        let mut r = ls * v;
        for (k, mut col) in r.column_iter_mut().enumerate() {
            col *= isq[k];
        }
        let mut rinv = u.transpose() * lz.transpose();
        for (k, mut row) in rinv.row_iter_mut().enumerate() {
            row *= isq[k];
        }
        Some(Scaling { r, rinv, lambda })
    }

    /// `R⁻¹ M R⁻ᵀ`.
    fn scale_primal(&self, m: &RMat) -> RMat {
        sym(&(&self.rinv * m * self.rinv.transpose()))
    }

    /// `R M Rᵀ`.
    fn unscale_primal(&self, m: &RMat) -> RMat {
        sym(&(&self.r * m * self.r.transpose()))
    }

    /// `R⁻ᵀ M R⁻¹`.
    fn unscale_dual(&self, m: &RMat) -> RMat {
        sym(&(self.rinv.transpose() * m * &self.rinv))
    }

    /// `λ ⋄ D`: solves `(ΛX + XΛ)/2 = D`.
    fn lambda_div(&self, d: &RMat) -> RMat {
        let l = &self.lambda;
        RMat::from_fn(d.nrows(), d.ncols(), |i, j| 2.0 * d[(i, j)] / (l[i] + l[j]))
    }

    fn lambda_sq(&self) -> RMat {
        RMat::from_diagonal(&self.lambda.map(|l| l * l))
    }
}

/// Largest `α ≤ αmax` with `diag(λ) + αD ⪰ 0`.
fn max_step(lambda: &DVector<f64>, d: &RMat) -> f64 {
    let isq = lambda.map(|l| 1.0 / l.sqrt());
    let m = RMat::from_fn(d.nrows(), d.ncols(), |i, j| d[(i, j)] * isq[i] * isq[j]);
    let ev = SymmetricEigen::new(sym(&m)).eigenvalues;
    let mn = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    if mn >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / mn
    }
}

fn circ(a: &RMat, b: &RMat) -> RMat {
    (a * b + b * a) * 0.5
}

/// Factorization of the scaled coefficient matrix `A = [vec Ŝ₁ … vec Ŝₙ]`.
///
/// QR is used when `A` has numerically full column rank; it squares the
/// conditioning less than the normal equations do. Otherwise `AᵀA` is
/// factored with diagonal regularization.
enum Factor {
    Qr { q: RMat, r: RMat },
    Normal(Cholesky<f64, Dyn>),
}

/// Reduced KKT system for one scaling point, factored once per iteration.
struct Kkt<'a> {
    prob: &'a SdpProblem,
    scal: Vec<Scaling>,
    /// `R⁻¹ Fⱼ R⁻ᵀ` per block, aligned with `coeffs()`.
    shat: Vec<Vec<RMat>>,
    factor: Factor,
}

impl<'a> Kkt<'a> {
    fn new(prob: &'a SdpProblem, scal: Vec<Scaling>) -> Option<Self> {
        let n = prob.n();
        let shat: Vec<Vec<RMat>> = prob
            .blocks()
            .iter()
            .zip(&scal)
            .map(|(b, w)| b.coeffs().iter().map(|(_, f)| w.scale_primal(f)).collect())
            .collect();
        let rows: usize = prob.blocks().iter().map(|b| b.dim() * b.dim()).sum();
        let mut a = RMat::zeros(rows, n);
        let mut off = 0;
        for (b, sh) in prob.blocks().iter().zip(&shat) {
            let dd = b.dim() * b.dim();
            for ((j, _), sm) in b.coeffs().iter().zip(sh) {
                let mut col = a.view_mut((off, *j), (dd, 1));
                col += RMat::from_column_slice(dd, 1, sm.as_slice());
            }
            off += dd;
        }
        let factor = if rows >= n {
            let qr = a.clone().qr();
            let r = qr.r();
            let dmax = r.diagonal().amax();
            let dmin = r.diagonal().iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            if dmin > 1e-13 * dmax && dmin.is_finite() {
                Some(Factor::Qr { q: qr.q(), r })
            } else {
                None
            }
        } else {
            None
        };
        let factor = match factor {
            Some(f) => f,
            None => Factor::Normal(spd_factor(&(a.transpose() * &a))?),
        };
        Some(Kkt { prob, scal, shat, factor })
    }

    /// `(AᵀA)⁻¹ v`.
    fn normal_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Qr { r, .. } => {
                let y = r.tr_solve_upper_triangular(v).unwrap_or_else(|| DVector::zeros(v.len()));
                r.solve_upper_triangular(&y).unwrap_or_else(|| DVector::zeros(v.len()))
            }
            Factor::Normal(ch) => ch.solve(v),
        }
    }

    fn stack(&self, m: &[RMat]) -> DVector<f64> {
        DVector::from_iterator(
            m.iter().map(|b| b.len()).sum(),
            m.iter().flat_map(|b| b.as_slice().iter().copied()),
        )
    }

    fn unstack(&self, v: &DVector<f64>) -> Blocks {
        let mut off = 0;
        self.prob
            .blocks()
            .iter()
            .map(|b| {
                let d = b.dim();
                let m = RMat::from_column_slice(d, d, &v.as_slice()[off..off + d * d]);
                off += d * d;
                sym(&m)
            })
            .collect()
    }

    /// One solve of `Aᵀ ẑ = −p`, `ẑ = −A Δx − q̂` (so `Gᵀ Δz = p` after unscaling).
    fn solve_once(&self, p: &DVector<f64>, qhat: &[RMat]) -> (DVector<f64>, Blocks) {
        match &self.factor {
            Factor::Qr { q, r } => {
                let qv = self.stack(qhat);
                let y = r.tr_solve_upper_triangular(p).unwrap_or_else(|| DVector::zeros(p.len()));
                let t = q.tr_mul(&qv);
                let dx = r.solve_upper_triangular(&(&y - &t)).unwrap_or_else(|| DVector::zeros(p.len()));
                // ẑ = −Q(y − t) − q̂ = −Q y − (I − QQᵀ) q̂
                let dz = -(q * (&y - &t)) - qv;
                (dx, self.unstack(&dz))
            }
            Factor::Normal(ch) => {
                let mut rhs = p.clone();
                for ((b, sh), qb) in self.prob.blocks().iter().zip(&self.shat).zip(qhat) {
                    for ((j, _), sm) in b.coeffs().iter().zip(sh) {
                        rhs[*j] -= sm.dot(qb);
                    }
                }
                let dx = ch.solve(&rhs);
                let dz = self.dz_of(&dx, qhat);
                (dx, dz)
            }
        }
    }

    /// Solves `Gᵀ Δz = p`, `G Δx − WᵀW Δz = q` with `q̂ = W⁻ᵀq` given;
    /// returns `(Δx, W Δz)`.
    fn solve(&self, p: &DVector<f64>, qhat: &[RMat]) -> (DVector<f64>, Blocks) {
        let (mut dx, mut dz) = self.solve_once(p, qhat);
        let zero: Blocks = qhat.iter().map(|m| RMat::zeros(m.nrows(), m.ncols())).collect();
        // Iterative refinement on Gᵀ Δz = p, measured on the unscaled Δz since
        // that is what enters the dual update; the other equation holds by construction.
        for _ in 0..REFINE_STEPS {
            let zo: Blocks = self.scal.iter().zip(&dz).map(|(w, d)| w.unscale_dual(d)).collect();
            let e = p - gt_apply(self.prob.blocks(), p.len(), &zo);
            if e.amax() <= f64::EPSILON * p.amax().max(1e-300) {
                break;
            }
            let (ex, ez) = self.solve_once(&e, &zero);
            dx += ex;
            for (a, b) in dz.iter_mut().zip(&ez) {
                *a += b;
            }
        }
        (dx, dz)
    }

    /// `−Σ Δxⱼ Ŝⱼ − q̂`.
    fn dz_of(&self, dx: &DVector<f64>, qhat: &[RMat]) -> Blocks {
        self.prob
            .blocks()
            .iter()
            .zip(&self.shat)
            .zip(qhat)
            .map(|((b, sh), q)| {
                let mut out = -q.clone();
                for ((j, _), s) in b.coeffs().iter().zip(sh) {
                    out -= s * dx[*j];
                }
                out
            })
            .collect()
    }
}

struct Direction {
    dx: DVector<f64>,
    ds: Blocks,
    dz: Blocks,
    dtau: f64,
    dkappa: f64,
}

/// Power-of-two factor bringing the largest coefficient matrix of a block to
/// unit Frobenius norm. Constant blocks are left alone.
fn block_scale(b: &LmiBlock) -> f64 {
    let nrm = b.coeffs().iter().map(|(_, f)| f.norm()).fold(0.0, f64::max);
    if nrm > 0.0 && nrm.is_finite() {
        (-nrm.log2().round()).exp2()
    } else {
        1.0
    }
}

/// Solves the SDP to the tolerances in `settings`.
///
/// Each block is rescaled by a positive power of two before solving; the
/// returned duals refer to the original blocks.
///
/// Returns `Err` only for invalid settings; solver trouble is reported through
/// [`SolverStatus`].
pub fn solve(prob: &SdpProblem, settings: &SolverSettings) -> Result<SdpResult> {
    settings.validate()?;
    let d: Vec<f64> = prob.blocks().iter().map(block_scale).collect();
    if d.iter().all(|&v| v == 1.0) {
        return solve_scaled(prob, settings);
    }
    let blocks = prob.blocks().iter().zip(&d).map(|(b, &v)| b.scaled(v)).collect();
    let scaled = SdpProblem::new(prob.c().to_vec(), blocks)?;
    let mut res = solve_scaled(&scaled, settings)?;
    for (z, v) in res.duals.iter_mut().zip(&d) {
        *z *= *v;
    }
    Ok(res)
}

fn solve_scaled(prob: &SdpProblem, settings: &SolverSettings) -> Result<SdpResult> {
    let n = prob.n();
    let blocks = prob.blocks();
    let c = DVector::from_column_slice(prob.c());
    let h: Blocks = blocks.iter().map(|b| b.base().clone()).collect();
    let nu: usize = blocks.iter().map(LmiBlock::dim).sum();
    let resx0 = c.norm().max(1.0);
    let resz0 = blocks_norm(&h).max(1.0);

    let eye: Blocks = blocks.iter().map(|b| RMat::identity(b.dim(), b.dim())).collect();

    // Starting point: least-squares primal, minimum-norm dual, shifted into the cone.
    let init = Kkt::new(
        prob,
        blocks
            .iter()
            .map(|b| Scaling {
                r: RMat::identity(b.dim(), b.dim()),
                rinv: RMat::identity(b.dim(), b.dim()),
                lambda: DVector::from_element(b.dim(), 1.0),
            })
            .collect(),
    );
    let Some(init) = init else {
        return Ok(failure(prob, SolverStatus::NumericalFailure, 0));
    };
    // GᵀG x = Gᵀh and z = G y with GᵀG y = −c
    let mut x = init.normal_solve(&gt_apply(blocks, n, &h));
    let mut s: Blocks = blocks.iter().map(|b| b.slack(x.as_slice())).collect();
    let mut z = g_apply(blocks, &init.normal_solve(&(-&c)));
    shift_into_cone(&mut s, &eye);
    shift_into_cone(&mut z, &eye);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut last = None;
    for iter in 0..=settings.max_iter {
        let gx = g_apply(blocks, &x);
        let gtz = gt_apply(blocks, n, &z);
        let cx = c.dot(&x);
        let hz = blocks_dot(&h, &z);
        let rx = &gtz + &c * tau;
        let rz: Blocks = (0..blocks.len()).map(|b| &s[b] + &gx[b] - &h[b] * tau).collect();
        let rt = kappa + cx + hz;
        let gap = blocks_dot(&s, &z);
        let mu = (gap + tau * kappa) / (nu as f64 + 1.0);

        let pcost = cx / tau;
        let dcost = -hz / tau;
        let pres = blocks_norm(&rz) / tau / resz0;
        let dres = rx.norm() / tau / resx0;
        let gap_n = gap / (tau * tau);
        let rel = relative_gap(gap_n, pcost, dcost).max(relative_gap((pcost - dcost).abs(), pcost, dcost));

        if pres <= settings.feas_tol && dres <= settings.feas_tol && rel <= settings.gap_tol {
            return Ok(finish(prob, SolverStatus::Optimal, iter, &x, &z, tau, pres, dres));
        }
        if hz < 0.0 {
            let pinf = gtz.norm() / resx0 / (-hz);
            if pinf <= settings.infeas_threshold {
                let zc: Blocks = z.iter().map(|m| m / (-hz)).collect();
                return Ok(SdpResult {
                    status: SolverStatus::Infeasible,
                    x: vec![f64::NAN; n],
                    dual_obj: prob.dual_objective(&zc),
                    duals: zc,
                    primal_obj: f64::INFINITY,
                    gap: f64::NAN,
                    iterations: iter,
                    primal_residual: f64::NAN,
                    dual_residual: pinf,
                });
            }
        }
        if cx < 0.0 {
            let sgx: Blocks = s.iter().zip(&gx).map(|(a, b)| a + b).collect();
            let dinf = blocks_norm(&sgx) / resz0 / (-cx);
            if dinf <= settings.infeas_threshold {
                let xr = &x / (-cx);
                return Ok(SdpResult {
                    status: SolverStatus::Unbounded,
                    x: xr.as_slice().to_vec(),
                    duals: vec_zeros(blocks),
                    primal_obj: f64::NEG_INFINITY,
                    dual_obj: f64::NAN,
                    gap: f64::NAN,
                    iterations: iter,
                    primal_residual: dinf,
                    dual_residual: f64::NAN,
                });
            }
        }
        last = Some((pres, dres));
        if iter == settings.max_iter {
            break;
        }

        let scal: Option<Vec<Scaling>> = s.iter().zip(&z).map(|(sb, zb)| Scaling::new(sb, zb)).collect();
        let Some(scal) = scal else {
            return Ok(finish(prob, SolverStatus::NumericalFailure, iter, &x, &z, tau, pres, dres));
        };
        let Some(kkt) = Kkt::new(prob, scal) else {
            return Ok(finish(prob, SolverStatus::NumericalFailure, iter, &x, &z, tau, pres, dres));
        };
        let hhat: Blocks = kkt.scal.iter().zip(&h).map(|(w, hb)| w.scale_primal(hb)).collect();
        let rzhat: Blocks = kkt.scal.iter().zip(&rz).map(|(w, r)| w.scale_primal(r)).collect();
        let (x2, z2) = kkt.solve(&(-&c), &hhat);
        let denom = c.dot(&x2) + blocks_dot(&hhat, &z2) - kappa / tau;

        let newton = |eta: f64, ds: &[RMat], dk: f64| -> Direction {
            let ldiv: Blocks = kkt.scal.iter().zip(ds).map(|(w, d)| w.lambda_div(d)).collect();
            let p1 = &rx * (-eta);
            let q1: Blocks = rzhat.iter().zip(&ldiv).map(|(r, l)| r * (-eta) - l).collect();
            let (x1, z1) = kkt.solve(&p1, &q1);
            let t1 = -eta * rt - dk / tau;
            let dtau = (t1 - c.dot(&x1) - blocks_dot(&hhat, &z1)) / denom;
            let dx = &x1 + &x2 * dtau;
            let dz: Blocks = z1.iter().zip(&z2).map(|(a, b)| a + b * dtau).collect();
            let dsv: Blocks = ldiv.iter().zip(&dz).map(|(l, d)| l - d).collect();
            let dkappa = (dk - kappa * dtau) / tau;
            Direction { dx, ds: dsv, dz, dtau, dkappa }
        };
        let step_len = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for (w, (ds, dz)) in kkt.scal.iter().zip(d.ds.iter().zip(&d.dz)) {
                a = a.min(max_step(&w.lambda, ds)).min(max_step(&w.lambda, dz));
            }
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let ds_aff: Blocks = kkt.scal.iter().map(|w| -w.lambda_sq()).collect();
        let aff = newton(1.0, &ds_aff, -tau * kappa);
        let a_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - a_aff).max(0.0).powf(SIGMA_EXP).min(1.0);

        // Corrector.
        let ds_c: Blocks = kkt
            .scal
            .iter()
            .zip(aff.ds.iter().zip(&aff.dz))
            .map(|(w, (das, daz))| {
                let d = w.lambda.len();
                -w.lambda_sq() - circ(das, daz) + RMat::identity(d, d) * (sigma * mu)
            })
            .collect();
        let dk_c = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = newton(1.0 - sigma, &ds_c, dk_c);
        let alpha = (STEP * step_len(&dir)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            return Ok(finish(prob, SolverStatus::NumericalFailure, iter, &x, &z, tau, pres, dres));
        }

        x += &dir.dx * alpha;
        for (b, w) in kkt.scal.iter().enumerate() {
            s[b] += w.unscale_primal(&dir.ds[b]) * alpha;
            z[b] += w.unscale_dual(&dir.dz[b]) * alpha;
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) || !x.iter().all(|v| v.is_finite()) {
            return Ok(failure(prob, SolverStatus::NumericalFailure, iter + 1));
        }
    }
    let (pres, dres) = last.unwrap_or((f64::NAN, f64::NAN));
    Ok(finish(prob, SolverStatus::IterationLimit, settings.max_iter, &x, &z, tau, pres, dres))
}

fn vec_zeros(blocks: &[LmiBlock]) -> Blocks {
    blocks.iter().map(|b| RMat::zeros(b.dim(), b.dim())).collect()
}

fn shift_into_cone(v: &mut Blocks, eye: &[RMat]) {
    let mut ts = f64::NEG_INFINITY;
    for m in v.iter() {
        let ev = SymmetricEigen::new(sym(m)).eigenvalues;
        ts = ts.max(-ev.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let nrm = blocks_norm(v);
    if ts >= -1e-8 * nrm.max(1.0) {
        for (m, e) in v.iter_mut().zip(eye) {
            *m += e * (1.0 + ts.max(0.0));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &SdpProblem,
    status: SolverStatus,
    iterations: usize,
    x: &DVector<f64>,
    z: &[RMat],
    tau: f64,
    pres: f64,
    dres: f64,
) -> SdpResult {
    let xs: Vec<f64> = (x / tau).as_slice().to_vec();
    let zs: Blocks = z.iter().map(|m| m / tau).collect();
    let primal_obj = prob.objective(&xs);
    let dual_obj = prob.dual_objective(&zs);
    SdpResult {
        status,
        x: xs,
        duals: zs,
        primal_obj,
        dual_obj,
        gap: primal_obj - dual_obj,
        iterations,
        primal_residual: pres,
        dual_residual: dres,
    }
}

fn failure(prob: &SdpProblem, status: SolverStatus, iterations: usize) -> SdpResult {
    SdpResult {
        status,
        x: vec![f64::NAN; prob.n()],
        duals: vec_zeros(prob.blocks()),
        primal_obj: f64::NAN,
        dual_obj: f64::NAN,
        gap: f64::NAN,
        iterations,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
    }
}
