//! Lowering of a [`FrameworkProblem`] to a real block-diagonal SDP.
//!
//! Every constraint is an affine function of the packed variable vector, so
//! its LMI data is obtained by evaluating the block once with all constants
//! (`F₀`) and once per coordinate with constants dropped (`Fⱼ`).

use super::{c3_block, schur_c4_to_lmi, FrameworkProblem};
use crate::error::{Error, Result};
use crate::linalg::{c, embed_complex, trace_prod, CMat, HMat, RMat};
use crate::sdp::{self, LmiBlock, SdpProblem, SdpResult, SolverSettings, SolverStatus};

/// Which framework constraint an SDP block came from (record index inside).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    C1(usize),
    C2(usize),
    C3(usize),
    C4(usize),
    C5(usize),
    C6(usize),
    AlphaNonneg(usize),
    FNonneg(usize),
}

/// Values for every framework variable. Fixed C5 scalars are stored in `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkPoint {
    pub w: Vec<CMat>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
}

/// Packing of framework variables into the SDP vector `x`.
///
/// Layout: for each `Wᵢ` its `M²` real coordinates (diagonal, then
/// `Re, Im` of each `k < l` pair), then `α`, then `ϱ`, then the free `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    u: usize,
    m: usize,
    n_alpha: usize,
    n_rho: usize,
    f_vars: Vec<Option<usize>>,
    f_fixed: Vec<Option<f64>>,
    n: usize,
    blocks: Vec<BlockKind>,
}

impl VariableMap {
    fn new(fp: &FrameworkProblem) -> Self {
        let (u, m) = (fp.u(), fp.m());
        let n_alpha = fp.c3().len();
        let n_rho = fp.c4().len();
        let mut next = u * m * m + n_alpha + n_rho;
        let mut f_vars = Vec::new();
        let mut f_fixed = Vec::new();
        for r in fp.c5() {
            f_fixed.push(r.f_fixed);
            if r.f_fixed.is_some() {
                f_vars.push(None);
            } else {
                f_vars.push(Some(next));
                next += 1;
            }
        }
        let mut blocks = Vec::new();
        blocks.extend((0..fp.c1().len()).map(BlockKind::C1));
        blocks.extend((0..fp.c2().len()).map(BlockKind::C2));
        blocks.extend((0..fp.c3().len()).map(BlockKind::C3));
        blocks.extend((0..fp.c4().len()).map(BlockKind::C4));
        blocks.extend((0..fp.c5().len()).map(BlockKind::C5));
        blocks.extend((0..u).map(BlockKind::C6));
        blocks.extend((0..n_alpha).map(BlockKind::AlphaNonneg));
        blocks.extend(
            f_vars
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_some())
                .map(|(i, _)| BlockKind::FNonneg(i)),
        );
        VariableMap { u, m, n_alpha, n_rho, f_vars, f_fixed, n: next, blocks }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Block kinds in SDP block order.
    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn w_offset(&self, i: usize) -> usize {
        i * self.m * self.m
    }

    pub fn alpha_var(&self, i: usize) -> usize {
        self.u * self.m * self.m + i
    }

    pub fn rho_var(&self, i: usize) -> usize {
        self.u * self.m * self.m + self.n_alpha + i
    }

    pub fn f_var(&self, i: usize) -> Option<usize> {
        self.f_vars[i]
    }

    /// True for coordinates belonging to some `Wᵢ`.
    pub fn is_w_var(&self, j: usize) -> bool {
        j < self.u * self.m * self.m
    }

    pub fn pack(&self, p: &FrameworkPoint) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let m = self.m;
        for (i, w) in p.w.iter().enumerate() {
            let o = self.w_offset(i);
            let mut t = m;
            for k in 0..m {
                x[o + k] = w[(k, k)].re;
            }
            for k in 0..m {
                for l in k + 1..m {
                    x[o + t] = w[(k, l)].re;
                    x[o + t + 1] = w[(k, l)].im;
                    t += 2;
                }
            }
        }
        for (i, a) in p.alpha.iter().enumerate() {
            x[self.alpha_var(i)] = *a;
        }
        for (i, r) in p.rho.iter().enumerate() {
            x[self.rho_var(i)] = *r;
        }
        for (i, f) in p.f.iter().enumerate() {
            if let Some(j) = self.f_vars[i] {
                x[j] = *f;
            }
        }
        x
    }

    pub fn w_from(&self, x: &[f64], i: usize) -> CMat {
        let m = self.m;
        let o = self.w_offset(i);
        let mut w = CMat::zeros(m, m);
        for k in 0..m {
            w[(k, k)] = c(x[o + k], 0.0);
        }
        let mut t = m;
        for k in 0..m {
            for l in k + 1..m {
                w[(k, l)] = c(x[o + t], x[o + t + 1]);
                w[(l, k)] = c(x[o + t], -x[o + t + 1]);
                t += 2;
            }
        }
        w
    }

    pub fn unpack(&self, x: &[f64]) -> FrameworkPoint {
        FrameworkPoint {
            w: (0..self.u).map(|i| self.w_from(x, i)).collect(),
            alpha: (0..self.n_alpha).map(|i| x[self.alpha_var(i)]).collect(),
            rho: (0..self.n_rho).map(|i| x[self.rho_var(i)]).collect(),
            f: self
                .f_vars
                .iter()
                .zip(&self.f_fixed)
                .map(|(v, fx)| match (v, fx) {
                    (Some(j), _) => x[*j],
                    (None, Some(f)) => *f,
                    (None, None) => unreachable!("f is either free or fixed"),
                })
                .collect(),
        }
    }

    fn unit_point(&self, j: usize) -> FrameworkPoint {
        let mut x = vec![0.0; self.n];
        x[j] = 1.0;
        let mut p = self.unpack(&x);
        for (i, fx) in self.f_fixed.iter().enumerate() {
            if fx.is_some() {
                p.f[i] = 0.0;
            }
        }
        p
    }
}

/// Value of block `kind` at `p`. With `constants = false` every constant term
/// (including fixed `f`) is dropped, which yields the linear part.
pub(crate) fn eval_block(fp: &FrameworkProblem, kind: BlockKind, p: &FrameworkPoint, constants: bool) -> CMat {
    let k = if constants { 1.0 } else { 0.0 };
    let one = |v: f64| CMat::from_element(1, 1, c(v, 0.0));
    let re_tr = |a: &HMat, w: &CMat| trace_prod(a.as_mat(), w).re;
    match kind {
        BlockKind::C1(i) => {
            let r = &fp.c1()[i];
            let mut v = k * r.c_const;
            if i < fp.u() && r.a != 0.0 {
                v += r.a * re_tr(&r.x_self, &p.w[i]);
            }
            for (j, (b, x)) in r.b.iter().zip(&r.x_cross).enumerate() {
                if *b != 0.0 {
                    v += b * re_tr(x, &p.w[j]);
                }
            }
            if r.c_rho_coef != 0.0 {
                v += r.c_rho_coef * p.rho[i];
            }
            if r.c_f_coef != 0.0 {
                v += r.c_f_coef * p.f[i];
            }
            one(v)
        }
        BlockKind::C2(i) => {
            let r = &fp.c2()[i];
            one(r.m * re_tr(&r.mmat, &p.w[i]) + k * r.p)
        }
        BlockKind::C3(i) => {
            let r = &fp.c3()[i];
            let b = r.b.apply(i, &p.w);
            let mut blk = c3_block(r, &b, p.alpha[i]);
            if !constants {
                let mm = blk.nrows() - 1;
                blk[(mm, mm)] -= c(r.d_const, 0.0);
            }
            blk
        }
        BlockKind::C4(i) => {
            let r = &fp.c4()[i];
            schur_c4_to_lmi(r, &r.c.apply(i, &p.w), p.rho[i])
        }
        BlockKind::C5(i) => {
            let r = &fp.c5()[i];
            let m = fp.m();
            r.apply(&r.e.apply(i, &p.w)) + CMat::identity(m, m) * c(p.f[i], 0.0)
        }
        BlockKind::C6(i) => p.w[i].clone(),
        BlockKind::AlphaNonneg(i) => one(p.alpha[i]),
        BlockKind::FNonneg(i) => one(p.f[i]),
    }
}

fn to_real(kind: BlockKind, m: &CMat) -> RMat {
    let h = HMat::from_hermitian_part(m);
    match kind {
        BlockKind::C1(_) | BlockKind::C2(_) | BlockKind::AlphaNonneg(_) | BlockKind::FNonneg(_) => {
            RMat::from_element(1, 1, h.as_mat()[(0, 0)].re)
        }
        _ => embed_complex(h.as_mat()),
    }
}

/// Compiles `fp` into an SDP. Complex blocks are real-embedded (doubling
/// their size); scalar constraints and sign constraints are 1×1 blocks.
pub fn compile(fp: &FrameworkProblem) -> Result<(SdpProblem, VariableMap)> {
    let map = VariableMap::new(fp);
    let zero = {
        let mut p = map.unpack(&vec![0.0; map.n]);
        for (i, fx) in map.f_fixed.iter().enumerate() {
            p.f[i] = fx.unwrap_or(0.0);
        }
        p
    };
    let units: Vec<FrameworkPoint> = (0..map.n).map(|j| map.unit_point(j)).collect();
    let mut blocks = Vec::with_capacity(map.blocks.len());
    for &kind in &map.blocks {
        let mut blk = LmiBlock::new(to_real(kind, &eval_block(fp, kind, &zero, true)));
        for (j, up) in units.iter().enumerate() {
            if !touches(fp, &map, kind, j) {
                continue;
            }
            blk.add_coeff(j, to_real(kind, &eval_block(fp, kind, up, false)));
        }
        blocks.push(blk);
    }
    let mut cvec = vec![0.0; map.n];
    for (j, up) in units.iter().enumerate().take(map.u * map.m * map.m) {
        cvec[j] = fp.objective(&up.w.iter().map(HMat::from_hermitian_part).collect::<Vec<_>>());
    }
    Ok((SdpProblem::new(cvec, blocks)?, map))
}

/// Cheap structural filter: can coordinate `j` appear in block `kind`?
fn touches(fp: &FrameworkProblem, map: &VariableMap, kind: BlockKind, j: usize) -> bool {
    let w_owner = if map.is_w_var(j) { Some(j / (map.m * map.m)) } else { None };
    match (kind, w_owner) {
        (BlockKind::C1(i), Some(o)) => {
            let r = &fp.c1()[i];
            (o == i && r.a != 0.0) || r.b[o] != 0.0
        }
        (BlockKind::C1(i), None) => j == map.rho_var(i) || Some(j) == map.f_vars.get(i).copied().flatten(),
        (BlockKind::C2(i), Some(o)) => o == i,
        (BlockKind::C3(i), Some(o)) => fp.c3()[i].b.coef(i, o) != 0.0,
        (BlockKind::C3(i), None) => j == map.alpha_var(i),
        (BlockKind::C4(i), Some(o)) => fp.c4()[i].c.coef(i, o) != 0.0,
        (BlockKind::C4(i), None) => j == map.rho_var(i),
        (BlockKind::C5(i), Some(o)) => fp.c5()[i].e.coef(i, o) != 0.0,
        (BlockKind::C5(i), None) => Some(j) == map.f_vars[i],
        (BlockKind::C6(i), Some(o)) => o == i,
        (BlockKind::AlphaNonneg(i), None) => j == map.alpha_var(i),
        (BlockKind::FNonneg(i), None) => Some(j) == map.f_vars[i],
        _ => false,
    }
}

/// Framework-level view of a solve.
#[derive(Debug, Clone)]
pub struct FrameworkSolution {
    pub status: SolverStatus,
    /// Empty unless `status` is `Optimal`.
    pub w: Vec<HMat>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub f: Vec<f64>,
    pub objective: f64,
    pub raw: SdpResult,
}

impl FrameworkSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

/// Unpacks an SDP result. Non-optimal results come back status-only.
pub fn recover(fp: &FrameworkProblem, map: &VariableMap, result: &SdpResult) -> Result<FrameworkSolution> {
    if result.x.len() != map.n {
        return Err(Error::Dimension(format!(
            "result has {} variables, map expects {}",
            result.x.len(),
            map.n
        )));
    }
    if result.status != SolverStatus::Optimal {
        return Ok(FrameworkSolution {
            status: result.status,
            w: Vec::new(),
            alpha: Vec::new(),
            rho: Vec::new(),
            f: Vec::new(),
            objective: f64::NAN,
            raw: result.clone(),
        });
    }
    let p = map.unpack(&result.x);
    let w: Vec<HMat> = p.w.iter().map(HMat::from_hermitian_part).collect();
    let objective = fp.objective(&w);
    Ok(FrameworkSolution {
        status: result.status,
        w,
        alpha: p.alpha,
        rho: p.rho,
        f: p.f,
        objective,
        raw: result.clone(),
    })
}

/// Compiles, solves and recovers in one call.
pub fn solve(fp: &FrameworkProblem, settings: &SolverSettings) -> Result<(FrameworkSolution, SdpProblem, VariableMap)> {
    let (prob, map) = compile(fp)?;
    let res = sdp::solve(&prob, settings)?;
    let sol = recover(fp, &map, &res)?;
    Ok((sol, prob, map))
}

/// Smallest eigenvalue (or scalar value) of every constraint block at a point,
/// in the original complex form.
pub fn constraint_margins(fp: &FrameworkProblem, map: &VariableMap, p: &FrameworkPoint) -> Vec<(BlockKind, f64)> {
    map.blocks
        .iter()
        .map(|&kind| {
            let v = HMat::from_hermitian_part(&eval_block(fp, kind, p, true));
            (kind, v.min_eigenvalue())
        })
        .collect()
}

impl FrameworkSolution {
    pub fn point(&self) -> FrameworkPoint {
        FrameworkPoint {
            w: self.w.iter().map(|w| w.as_mat().clone()).collect(),
            alpha: self.alpha.clone(),
            rho: self.rho.clone(),
            f: self.f.clone(),
        }
    }
}
