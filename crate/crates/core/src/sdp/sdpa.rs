//! Sparse SDPA (`.dat-s`) text format.
//!
//! SDPA writes the primal as `Σ Fⱼ xⱼ − F₀ ⪰ 0`, so the constant matrix is
//! stored negated relative to [`LmiBlock::base`].

use std::fmt::Write as _;

use super::{LmiBlock, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::RMat;

/// C's `%.17g`.
pub fn format_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let x: i32 = exp.parse().expect("exponent");
    if !(-4..P).contains(&x) {
        let mant = strip_zeros(mant);
        let sign = if x < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", x.abs())
    } else {
        let fixed = format!("{:.*}", (P - 1 - x) as usize, v);
        strip_zeros(&fixed).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn export_sdpa(prob: &SdpProblem) -> String {
    let mut out = String::new();
    writeln!(out, "{}", prob.n()).unwrap();
    writeln!(out, "{}", prob.blocks().len()).unwrap();
    let dims: Vec<String> = prob.blocks().iter().map(|b| b.dim().to_string()).collect();
    writeln!(out, "{}", dims.join(" ")).unwrap();
    let c: Vec<String> = prob.c().iter().map(|&v| format_g17(v)).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();
    for (bi, b) in prob.blocks().iter().enumerate() {
        write_entries(&mut out, 0, bi + 1, &(-b.base()));
        for (j, f) in b.coeffs() {
            write_entries(&mut out, j + 1, bi + 1, f);
        }
    }
    out
}

fn write_entries(out: &mut String, var: usize, block: usize, m: &RMat) {
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                // `-0` can only come from negating a zero, which is skipped above
                writeln!(out, "{} {} {} {} {}", var, block, i + 1, j + 1, format_g17(v)).unwrap();
            }
        }
    }
}

/// Parses sparse SDPA text. Negative block sizes (diagonal blocks) are accepted.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem> {
    let mut toks: Vec<(usize, &str)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        for tok in line.split(|ch: char| ch.is_whitespace() || ",{}()".contains(ch)) {
            if !tok.is_empty() {
                toks.push((ln + 1, tok));
            }
        }
    }
    let mut it = toks.into_iter();
    let mut last_line = 0;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        let t = it.next().ok_or_else(|| Error::SdpaParse {
            line: last_line,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        last_line = t.0;
        Ok(t)
    };
    fn int(t: (usize, &str)) -> Result<i64> {
        t.1.parse().map_err(|_| Error::SdpaParse {
            line: t.0,
            msg: format!("expected integer, got {:?}", t.1),
        })
    }
    fn float(t: (usize, &str)) -> Result<f64> {
        t.1.parse().map_err(|_| Error::SdpaParse {
            line: t.0,
            msg: format!("expected number, got {:?}", t.1),
        })
    }

    let t = next("variable count")?;
    let m = int(t)?;
    if m <= 0 {
        return Err(Error::SdpaParse { line: t.0, msg: "variable count must be positive".into() });
    }
    let t = next("block count")?;
    let nb = int(t)?;
    if nb <= 0 {
        return Err(Error::SdpaParse { line: t.0, msg: "block count must be positive".into() });
    }
    let mut dims = Vec::new();
    for _ in 0..nb {
        let t = next("block size")?;
        let d = int(t)?;
        if d == 0 {
            return Err(Error::SdpaParse { line: t.0, msg: "zero block size".into() });
        }
        dims.push((d.unsigned_abs() as usize, d < 0));
    }
    let mut c = Vec::new();
    for _ in 0..m {
        c.push(float(next("objective coefficient")?)?);
    }
    let m = m as usize;
    let mut mats: Vec<Vec<RMat>> = dims
        .iter()
        .map(|&(d, _)| vec![RMat::zeros(d, d); m + 1])
        .collect();
    while let Some(first) = it.next() {
        let var = int(first)?;
        let line = first.0;
        let mut rest = [0i64; 3];
        for r in rest.iter_mut() {
            let t = it.next().ok_or_else(|| Error::SdpaParse { line, msg: "truncated entry".into() })?;
            *r = int(t)?;
        }
        let t = it.next().ok_or_else(|| Error::SdpaParse { line, msg: "truncated entry".into() })?;
        let v = float(t)?;
        let [blk, i, j] = rest;
        let bad = |msg: &str| Error::SdpaParse { line, msg: msg.into() };
        if var < 0 || var as usize > m {
            return Err(bad("variable index out of range"));
        }
        if blk < 1 || blk as usize > dims.len() {
            return Err(bad("block index out of range"));
        }
        let (d, diag) = dims[blk as usize - 1];
        if i < 1 || j < 1 || i as usize > d || j as usize > d {
            return Err(bad("entry index out of range"));
        }
        if diag && i != j {
            return Err(bad("off-diagonal entry in diagonal block"));
        }
        let (i, j) = (i as usize - 1, j as usize - 1);
        let mat = &mut mats[blk as usize - 1][var as usize];
        mat[(i, j)] = v;
        mat[(j, i)] = v;
    }
    let blocks = mats
        .into_iter()
        .map(|mut ms| {
            let f0 = std::mem::replace(&mut ms[0], RMat::zeros(0, 0));
            let mut b = LmiBlock::new(-f0);
            for (j, f) in ms.into_iter().enumerate().skip(1) {
                b.add_coeff(j - 1, f);
            }
            b
        })
        .collect();
    SdpProblem::new(c, blocks)
}
