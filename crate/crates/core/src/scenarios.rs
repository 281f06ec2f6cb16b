//! Channel generation, the four beamforming problem builders, and the
//! statistical helpers used to check robust designs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::framework::{self, AffineW, C1Rec, C3Rec, C4Rec, C5Rec, Constraints, FrameworkProblem};
use crate::linalg::{c, psd_sqrt, s_plus, CMat, CVec, HMat};
use crate::rankone::{extract_rank_one, rot, rot_theta};
use crate::sdp::SolverSettings;

pub const DEFAULT_SIGMA2: f64 = 0.001;
pub const DEFAULT_EPS2: f64 = 0.002;
pub const DEFAULT_RHO: f64 = 0.1;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub m: usize,
    pub u: usize,
    /// Per-user noise variance.
    pub sigma2: Vec<f64>,
    /// Per-user SINR target, linear scale.
    pub gamma: Vec<f64>,
    pub eps2: f64,
    pub rho: f64,
    pub delta_offdiag: f64,
    pub seed: u64,
}

impl SystemConfig {
    /// Defaults for everything but the shape, a common SINR target in dB and the seed.
    pub fn new(m: usize, u: usize, sinr_db: f64, seed: u64) -> Self {
        SystemConfig {
            m,
            u,
            sigma2: vec![DEFAULT_SIGMA2; u],
            gamma: vec![db_to_linear(sinr_db); u],
            eps2: DEFAULT_EPS2,
            rho: DEFAULT_RHO,
            delta_offdiag: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.u == 0 {
            return Err(Error::Invalid("M and U must be positive".into()));
        }
        if self.gamma.len() != self.u || self.sigma2.len() != self.u {
            return Err(Error::Dimension(format!(
                "need {} SINR targets and noise variances, got {} and {}",
                self.u,
                self.gamma.len(),
                self.sigma2.len()
            )));
        }
        if !self.gamma.iter().all(|g| g.is_finite() && *g > 0.0) {
            return Err(Error::Invalid("SINR targets must be positive".into()));
        }
        if !self.sigma2.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::Invalid("noise variances must be positive".into()));
        }
        if !(self.eps2.is_finite() && self.eps2 >= 0.0) {
            return Err(Error::Invalid(format!("eps2 = {} must be nonnegative", self.eps2)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Invalid(format!("rho = {} outside (0, 1]", self.rho)));
        }
        if !(self.delta_offdiag >= 0.0 && self.delta_offdiag < 1.0) {
            return Err(Error::Invalid(format!("delta_offdiag = {} outside [0, 1)", self.delta_offdiag)));
        }
        Ok(())
    }

    /// Outage exponent `−ln ρ`.
    pub fn delta(&self) -> f64 {
        -self.rho.ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Channel estimates `ĥᵢ` (the true channels under perfect CSI).
    pub direct: Vec<CVec>,
    /// Error covariances `Hᵢ`.
    pub error_cov: Vec<HMat>,
}

fn cn(rng: &mut impl Rng) -> num_complex::Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    c(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_vec(n: usize, rng: &mut impl Rng) -> CVec {
    CVec::from_fn(n, |_, _| cn(rng))
}

/// `Δ^{1/2}` for unit diagonal and constant off-diagonal `o`.
pub fn correlation_sqrt(n: usize, o: f64) -> Result<HMat> {
    let d = CMat::from_fn(n, n, |i, j| c(if i == j { 1.0 } else { o }, 0.0));
    let d = HMat::new(d)?;
    if d.min_eigenvalue() < -crate::linalg::PSD_REJECT_TOL {
        return Err(Error::NotPsd(format!("channel correlation with off-diagonal {o} and size {n}")));
    }
    psd_sqrt(&d)
}

pub fn gen_channels(cfg: &SystemConfig) -> Result<ChannelSet> {
    cfg.validate()?;
    let sq = correlation_sqrt(cfg.m, cfg.delta_offdiag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let direct = (0..cfg.u).map(|_| sq.as_mat() * cn_vec(cfg.m, &mut rng)).collect();
    let error_cov = vec![HMat::identity(cfg.m).scale(cfg.eps2); cfg.u];
    Ok(ChannelSet { direct, error_cov })
}

/// `|hᵢᴴwᵢ|² / (Σ_{j≠i} |hᵢᴴwⱼ|² + σᵢ²)` for every user.
pub fn sinr_eval(w: &[CVec], h: &[CVec], sigma2: &[f64]) -> Vec<f64> {
    h.iter()
        .zip(sigma2)
        .enumerate()
        .map(|(i, (hi, s2))| sinr_one(w, hi, i, *s2))
        .collect()
}

fn sinr_one(w: &[CVec], h: &CVec, i: usize, sigma2: f64) -> f64 {
    let mut interf = 0.0;
    let mut sig = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let p = h.dotc(wj).norm_sqr();
        if j == i {
            sig = p;
        } else {
            interf += p;
        }
    }
    sig / (interf + sigma2)
}

/// SINR constraint row with one shared data matrix `X` for every user term.
fn sinr_c1(x: HMat, gamma: f64, sigma2: f64, u: usize) -> C1Rec {
    C1Rec {
        a: 1.0 + 1.0 / gamma,
        b: vec![-1.0; u],
        x_self: x.clone(),
        x_cross: vec![x; u],
        c_const: -sigma2,
        c_rho_coef: 0.0,
        c_f_coef: 0.0,
    }
}

/// `B̃ᵢ = (1 + 1/γᵢ) Wᵢ − Σⱼ Wⱼ`.
fn b_tilde(gamma: f64, u: usize) -> AffineW {
    AffineW::new(1.0 + 1.0 / gamma, vec![-1.0; u])
}

fn check_channels(cfg: &SystemConfig, ch: &ChannelSet) -> Result<()> {
    cfg.validate()?;
    if ch.direct.len() != cfg.u || ch.error_cov.len() != cfg.u {
        return Err(Error::Dimension(format!("channel set does not hold {} users", cfg.u)));
    }
    if ch.direct.iter().any(|h| h.len() != cfg.m) || ch.error_cov.iter().any(|e| e.dim() != cfg.m) {
        return Err(Error::Dimension(format!("channels must have length {}", cfg.m)));
    }
    Ok(())
}

pub fn build_perfect(cfg: &SystemConfig, ch: &ChannelSet) -> Result<FrameworkProblem> {
    check_channels(cfg, ch)?;
    let c1 = (0..cfg.u)
        .map(|i| sinr_c1(HMat::outer(&ch.direct[i]), cfg.gamma[i], cfg.sigma2[i], cfg.u))
        .collect();
    FrameworkProblem::new(cfg.u, cfg.m, vec![HMat::identity(cfg.m); cfg.u], Constraints { c1, ..Default::default() })
}

/// Inverse CDF of the chi-square law with `k` degrees of freedom.
pub fn inv_chi2_cdf(k: usize, p: f64) -> Result<f64> {
    if k == 0 || !(0.0..1.0).contains(&p) {
        return Err(Error::Invalid(format!("inverse chi-square needs k ≥ 1 and 0 ≤ p < 1, got k={k}, p={p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let a = k as f64 / 2.0;
    let cdf = |x: f64| statrs::function::gamma::gamma_lr(a, x / 2.0);
    let mut hi = 2.0 * k as f64;
    while cdf(hi) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ball radius covering a `CN(0, I_M)` error with probability `1 − ρ`.
pub fn radius_r(m: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Invalid(format!("rho = {rho} outside (0, 1]")));
    }
    Ok((inv_chi2_cdf(2 * m, 1.0 - rho)? / 2.0).sqrt())
}

pub fn build_sproc(cfg: &SystemConfig, ch: &ChannelSet, r: f64) -> Result<FrameworkProblem> {
    check_channels(cfg, ch)?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::Invalid(format!("radius {r} must be nonnegative")));
    }
    if r == 0.0 {
        // α would be free of cost and unbounded; the ball is the nominal point
        return build_perfect(cfg, ch);
    }
    let c3 = (0..cfg.u)
        .map(|i| {
            Ok(C3Rec {
                y_mat: psd_sqrt(&ch.error_cov[i])?,
                y: ch.direct[i].clone(),
                d_const: -cfg.sigma2[i],
                d_alpha_coef: -r * r,
                b: b_tilde(cfg.gamma[i], cfg.u),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FrameworkProblem::new(cfg.u, cfg.m, vec![HMat::identity(cfg.m); cfg.u], Constraints { c3, ..Default::default() })
}

/// Lower bound on `xᴴYx + 2Re(uᴴx)` for `x ~ CN(0, I)` holding with
/// probability at least `1 − e^{−δ}`.
pub fn bernstein_bound(y: &HMat, u: &CVec, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("delta = {delta} must be positive")));
    }
    if u.len() != y.dim() {
        return Err(Error::Dimension("u and Y disagree".into()));
    }
    let fro2 = y.frobenius().powi(2);
    Ok(y.trace() - (2.0 * delta).sqrt() * (fro2 + 2.0 * u.norm_squared()).sqrt() - delta * s_plus(&y.scale(-1.0)))
}

pub fn build_chance(cfg: &SystemConfig, ch: &ChannelSet) -> Result<FrameworkProblem> {
    check_channels(cfg, ch)?;
    let delta = cfg.delta();
    let mut cons = Constraints::default();
    for i in 0..cfg.u {
        let hs = psd_sqrt(&ch.error_cov[i])?;
        let x = HMat::from_hermitian_part(&(ch.error_cov[i].as_mat() + HMat::outer(&ch.direct[i]).as_mat()));
        let mut rec = sinr_c1(x, cfg.gamma[i], cfg.sigma2[i], cfg.u);
        rec.c_rho_coef = -(2.0 * delta).sqrt();
        rec.c_f_coef = -delta;
        cons.c1.push(rec);
        cons.c4.push(C4Rec {
            z_mat: hs.clone(),
            z: ch.direct[i].clone(),
            e: 2f64.sqrt(),
            c: b_tilde(cfg.gamma[i], cfg.u),
        });
        cons.c5.push(C5Rec {
            v: 1.0,
            d: hs.clone(),
            d_tilde: hs,
            lambdas: vec![CMat::identity(cfg.m, cfg.m)],
            psis: vec![CMat::identity(cfg.m, cfg.m)],
            e: b_tilde(cfg.gamma[i], cfg.u),
            f_fixed: None,
        });
    }
    FrameworkProblem::new(cfg.u, cfg.m, vec![HMat::identity(cfg.m); cfg.u], cons)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub prob: f64,
    pub stderr: f64,
}

/// Relative SINR slack under which a sample still counts as meeting the target.
pub const SINR_SLACK: f64 = 1e-6;

fn check_beams(w: &[CVec], cfg: &SystemConfig) -> Result<()> {
    if w.len() != cfg.u || w.iter().any(|v| v.len() != cfg.m) {
        return Err(Error::Dimension(format!("need {} beamvectors of length {}", cfg.u, cfg.m)));
    }
    Ok(())
}

/// Monte Carlo outage probability per user under `h = ĥ + H^{1/2} e`, `e ~ CN(0, I)`.
pub fn outage_mc(w: &[CVec], ch: &ChannelSet, cfg: &SystemConfig, n_samples: usize, seed: u64) -> Result<Vec<OutageEstimate>> {
    check_channels(cfg, ch)?;
    check_beams(w, cfg)?;
    if n_samples < 1000 {
        return Err(Error::Invalid(format!("n_samples = {n_samples} below 1000")));
    }
    let sq = ch.error_cov.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fails = vec![0usize; cfg.u];
    for _ in 0..n_samples {
        for i in 0..cfg.u {
            let h = &ch.direct[i] + sq[i].as_mat() * cn_vec(cfg.m, &mut rng);
            if sinr_one(w, &h, i, cfg.sigma2[i]) < cfg.gamma[i] * (1.0 - SINR_SLACK) {
                fails[i] += 1;
            }
        }
    }
    let n = n_samples as f64;
    Ok(fails
        .into_iter()
        .map(|f| {
            let p = f as f64 / n;
            OutageEstimate { prob: p, stderr: (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}

/// Minimum sampled SINR per user over `h = ĥ + H^{1/2} e`, `‖e‖ ≤ r`.
/// Half the samples lie on the sphere, half are uniform in the ball.
pub fn worstcase_check(w: &[CVec], ch: &ChannelSet, r: f64, cfg: &SystemConfig, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    check_channels(cfg, ch)?;
    check_beams(w, cfg)?;
    if n_samples < 1000 {
        return Err(Error::Invalid(format!("n_samples = {n_samples} below 1000")));
    }
    let sq = ch.error_cov.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = sinr_eval(w, &ch.direct, &cfg.sigma2);
    let dim = 2.0 * cfg.m as f64;
    for s in 0..n_samples {
        for i in 0..cfg.u {
            let e = cn_vec(cfg.m, &mut rng);
            let nrm = e.norm();
            if nrm == 0.0 {
                continue;
            }
            let rad = if s % 2 == 0 { r } else { r * rng.random::<f64>().powf(1.0 / dim) };
            let h = &ch.direct[i] + sq[i].as_mat() * (e * c(rad / nrm, 0.0));
            worst[i] = worst[i].min(sinr_one(w, &h, i, cfg.sigma2[i]));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RisChannels {
    pub n: usize,
    /// BS-RIS matrix, `M×N`.
    pub h: CMat,
    /// RIS-user vectors, length `N`.
    pub g: Vec<CVec>,
}

impl RisChannels {
    /// `Gᵢ = H diag(gᵢ)`, so the effective channel is `Gᵢ θ`.
    pub fn g_mat(&self, i: usize) -> CMat {
        let mut out = self.h.clone();
        for (k, mut col) in out.column_iter_mut().enumerate() {
            col *= self.g[i][k];
        }
        out
    }

    pub fn effective(&self, theta: &CVec) -> Vec<CVec> {
        (0..self.g.len()).map(|i| self.g_mat(i) * theta).collect()
    }
}

/// Columns of `H` drawn from `CN(0, Δ_M)`, each `gᵢ` from `CN(0, Δ_N)`.
pub fn gen_ris_channels(cfg: &SystemConfig, n: usize) -> Result<RisChannels> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Invalid("RIS needs at least one element".into()));
    }
    let sm = correlation_sqrt(cfg.m, cfg.delta_offdiag)?;
    let sn = correlation_sqrt(n, cfg.delta_offdiag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let raw = CMat::from_fn(cfg.m, n, |_, _| cn(&mut rng));
    let h = sm.as_mat() * raw;
    let g = (0..cfg.u).map(|_| sn.as_mat() * cn_vec(n, &mut rng)).collect();
    Ok(RisChannels { n, h, g })
}

fn check_ris(cfg: &SystemConfig, ris: &RisChannels) -> Result<()> {
    cfg.validate()?;
    if ris.h.nrows() != cfg.m || ris.h.ncols() != ris.n || ris.g.len() != cfg.u || ris.g.iter().any(|g| g.len() != ris.n) {
        return Err(Error::Dimension("RIS channels do not match the configuration".into()));
    }
    Ok(())
}

/// Beamforming subproblem for a fixed phase-shift matrix `Θ`.
pub fn build_ris_w(cfg: &SystemConfig, ris: &RisChannels, theta: &HMat) -> Result<FrameworkProblem> {
    check_ris(cfg, ris)?;
    if theta.dim() != ris.n {
        return Err(Error::Dimension(format!("Θ is {}×{}, expected N = {}", theta.dim(), theta.dim(), ris.n)));
    }
    let c1 = (0..cfg.u)
        .map(|i| sinr_c1(theta.congruence(&ris.g_mat(i)), cfg.gamma[i], cfg.sigma2[i], cfg.u))
        .collect();
    FrameworkProblem::new(cfg.u, cfg.m, vec![HMat::identity(cfg.m); cfg.u], Constraints { c1, ..Default::default() })
}

/// `Ωₖ`: all zeros but a one at `(k, k)`.
pub fn omega(n: usize, k: usize) -> CMat {
    let mut o = CMat::zeros(n, n);
    o[(k, k)] = c(1.0, 0.0);
    o
}

/// Phase-shift subproblem for fixed beamformers: one `N×N` variable `Θ`.
pub fn build_ris_theta(cfg: &SystemConfig, ris: &RisChannels, w: &[HMat]) -> Result<FrameworkProblem> {
    check_ris(cfg, ris)?;
    if w.len() != cfg.u || w.iter().any(|x| x.dim() != cfg.m) {
        return Err(Error::Dimension(format!("need {} beamforming matrices of size {}", cfg.u, cfg.m)));
    }
    let n = ris.n;
    let c1 = (0..cfg.u)
        .map(|i| {
            let gi = ris.g_mat(i);
            let gh = gi.adjoint();
            let mut x = (&gh * w[i].as_mat() * &gi) * c(1.0 + 1.0 / cfg.gamma[i], 0.0);
            for wj in w {
                x -= &gh * wj.as_mat() * &gi;
            }
            C1Rec {
                a: 0.0,
                b: vec![1.0],
                x_self: HMat::zeros(n),
                x_cross: vec![HMat::from_hermitian_part(&x)],
                c_const: -cfg.sigma2[i],
                c_rho_coef: 0.0,
                c_f_coef: 0.0,
            }
        })
        .collect();
    let c5 = vec![C5Rec {
        v: -1.0,
        d: HMat::identity(n),
        d_tilde: HMat::identity(n),
        lambdas: (0..n).map(|k| omega(n, k)).collect(),
        psis: (0..n).map(|k| omega(n, k)).collect(),
        e: AffineW::new(1.0, vec![0.0]),
        f_fixed: Some(1.0),
    }];
    FrameworkProblem::new(1, n, vec![HMat::identity(n)], Constraints { c1, c5, ..Default::default() })
}

/// `√λ₁ v₁` with every entry clipped to the unit disc, phase preserved.
pub fn extract_theta(theta: &HMat) -> Result<CVec> {
    let mut t = extract_rank_one(theta)?;
    for z in t.iter_mut() {
        let a = z.norm();
        if a > 1.0 {
            *z /= a;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisIteration {
    /// Transmit power of the beamforming step.
    pub objective: f64,
    pub rot_w: f64,
    pub rot_theta: f64,
}

#[derive(Debug, Clone)]
pub struct RisTrace {
    pub iterations: Vec<RisIteration>,
    pub w: Vec<HMat>,
    pub theta: HMat,
    pub converged: bool,
}

pub const RIS_TOL: f64 = 1e-5;
pub const RIS_MAX_OUTER: usize = 30;

/// Alternates the beamforming and phase-shift subproblems starting from
/// random unit-modulus phases. The solved `Θ` matrix is fed back as is, so
/// the previous beamformers stay feasible and the power never increases.
pub fn ris_alternate(
    cfg: &SystemConfig,
    ris: &RisChannels,
    init_seed: u64,
    tol: f64,
    max_outer: usize,
    settings: &SolverSettings,
) -> Result<RisTrace> {
    check_ris(cfg, ris)?;
    if max_outer == 0 {
        return Err(Error::Invalid("max_outer must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
    let theta0 = CVec::from_fn(ris.n, |_, _| {
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        c(phi.cos(), phi.sin())
    });
    let mut theta = HMat::outer(&theta0);
    let mut w: Vec<HMat> = Vec::new();
    let mut iterations: Vec<RisIteration> = Vec::new();
    let mut converged = false;
    for k in 0..max_outer {
        let (sol, _, _) = framework::solve(&build_ris_w(cfg, ris, &theta)?, settings)?;
        if !sol.is_optimal() {
            if k == 0 {
                return Err(Error::ScenarioInfeasible(format!("beamforming step returned {:?}", sol.status)));
            }
            break;
        }
        w = sol.w;
        let rot_w = rot(&w)?.max_ratio;
        let prev = iterations.last().map(|it| it.objective);
        if let Some(p) = prev {
            if (p - sol.objective).abs() <= tol * p.abs().max(f64::MIN_POSITIVE) {
                iterations.push(RisIteration { objective: sol.objective, rot_w, rot_theta: rot_theta(&theta)? });
                converged = true;
                break;
            }
        }
        let (tsol, _, _) = framework::solve(&build_ris_theta(cfg, ris, &w)?, settings)?;
        if !tsol.is_optimal() {
            iterations.push(RisIteration { objective: sol.objective, rot_w, rot_theta: rot_theta(&theta)? });
            break;
        }
        theta = tsol.w.into_iter().next().expect("one phase-shift matrix");
        iterations.push(RisIteration { objective: sol.objective, rot_w, rot_theta: rot_theta(&theta)? });
    }
    Ok(RisTrace { iterations, w, theta, converged })
}
