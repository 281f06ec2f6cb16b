//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rankone_core::experiments::{complexity_eval, run_sweep, summarize, trial_seed, ComplexityCounts, Scenario, SweepSpec};
use rankone_core::framework::{self, FrameworkProblem};
use rankone_core::linalg::{c, CMat, CVec, HMat, RMat};
use rankone_core::rankone::{build_dual_certificate, extract_rank_one, rot, verify_certificate};
use rankone_core::scenarios::{
    bernstein_bound, build_chance, build_perfect, build_sproc, gen_channels, gen_ris_channels, outage_mc, radius_r,
    ris_alternate, worstcase_check, ChannelSet, SystemConfig, RIS_MAX_OUTER, RIS_TOL,
};
use rankone_core::sdp::{solve, LmiBlock, SdpProblem, SolverSettings, SolverStatus};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

fn cn(rng: &mut ChaCha8Rng) -> num_complex::Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    c(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_vec(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(n, |_, _| cn(rng))
}

fn beams(ws: &[HMat]) -> Vec<CVec> {
    ws.iter().map(|w| extract_rank_one(w).unwrap()).collect()
}

fn e(m: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(m);
    v[k] = c(1.0, 0.0);
    v
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn closed_form() -> Outcome {
    let t = Instant::now();
    let single = SystemConfig::new(2, 1, 10.0, 0);
    let ch1 = ChannelSet { direct: vec![e(2, 0)], error_cov: vec![HMat::zeros(2)] };
    let two = SystemConfig::new(2, 2, 10.0, 0);
    let ch2 = ChannelSet { direct: vec![e(2, 0), e(2, 1)], error_cov: vec![HMat::zeros(2); 2] };
    let o1 = framework::solve(&build_perfect(&single, &ch1).unwrap(), &settings()).unwrap().0.objective;
    let o2 = framework::solve(&build_perfect(&two, &ch2).unwrap(), &settings()).unwrap().0.objective;
    let (r1, r2) = ((o1 - 0.01).abs() / 0.01, (o2 - 0.02).abs() / 0.02);
    let el = t.elapsed();
    outcome(
        r1 <= 1e-6 && r2 <= 1e-6 && within(el, 1.0),
        format!("single {o1:.9} (rel {r1:.1e}), orthogonal {o2:.9} (rel {r2:.1e}), {:.3}s", el.as_secs_f64()),
    )
}

fn solver_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for _ in 0..50 {
        let g = RMat::from_fn(6, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let a = (&g + g.transpose()) * 0.5;
        let mut blk = LmiBlock::new(-a.clone());
        blk.add_coeff(0, RMat::identity(6, 6));
        let r = solve(&SdpProblem::new(vec![1.0], vec![blk]).unwrap(), &settings()).unwrap();
        let lmax = SymmetricEigen::new(a).eigenvalues.max();
        let err = (r.primal_obj - lmax).abs();
        worst = worst.max(err);
        ok &= r.status == SolverStatus::Optimal && err <= 1e-6;
    }
    let el = t.elapsed();
    outcome(ok && within(el, 10.0), format!("50 instances, max |t − λmax| = {worst:.2e}, {:.2}s", el.as_secs_f64()))
}

struct CertStats {
    optimal: usize,
    max_rot: f64,
    cert_fail: usize,
    worst_phi: f64,
    worst_comp: f64,
    worst_dual: f64,
}

fn build(scenario: Scenario, cfg: &SystemConfig) -> FrameworkProblem {
    let ch = gen_channels(cfg).unwrap();
    match scenario {
        Scenario::Perfect => build_perfect(cfg, &ch).unwrap(),
        Scenario::Sproc => build_sproc(cfg, &ch, radius_r(cfg.m, cfg.rho).unwrap()).unwrap(),
        Scenario::Chance => build_chance(cfg, &ch).unwrap(),
        Scenario::Ris => unreachable!(),
    }
}

/// 100 Optimal trials per scenario across M ∈ {3, 4} and γ ∈ {4, 10, 16} dB.
fn rank_one_trials() -> (Vec<(Scenario, CertStats)>, Duration) {
    let t = Instant::now();
    let combos: Vec<(usize, f64)> = [3, 4].iter().flat_map(|&m| [4.0, 10.0, 16.0].map(|g| (m, g))).collect();
    let mut out = Vec::new();
    for sc in [Scenario::Perfect, Scenario::Sproc, Scenario::Chance] {
        let mut st = CertStats { optimal: 0, max_rot: 0.0, cert_fail: 0, worst_phi: 0.0, worst_comp: 0.0, worst_dual: 0.0 };
        let mut k = 0usize;
        while st.optimal < 100 && k < 600 {
            let (m, g) = combos[k % combos.len()];
            let cfg = SystemConfig::new(m, 2, g, trial_seed(31, m, 0, k, 0));
            k += 1;
            let fp = build(sc, &cfg);
            let (sol, prob, map) = framework::solve(&fp, &settings()).unwrap();
            if !sol.is_optimal() {
                continue;
            }
            st.optimal += 1;
            st.max_rot = st.max_rot.max(rot(&sol.w).unwrap().max_ratio);
            let cert = build_dual_certificate(&fp, &prob, &map, &sol.raw).unwrap();
            let rep = verify_certificate(&cert, &sol);
            if !(rep.phi_psd && rep.complementarity_ok && rep.dual_value_ok) {
                st.cert_fail += 1;
            }
            for (mn, p) in rep.phi_min_eig.iter().zip(&cert.phi) {
                st.worst_phi = st.worst_phi.max(-mn / (1.0 + p.spectral_norm()));
            }
            for v in &rep.complementarity {
                st.worst_comp = st.worst_comp.max(v / (1.0 + sol.objective.abs()));
            }
            st.worst_dual = st.worst_dual.max(rep.dual_value_residual);
        }
        out.push((sc, st));
    }
    (out, t.elapsed())
}

fn rank_one(stats: &[(Scenario, CertStats)], el: Duration) -> Outcome {
    let ok = stats.iter().all(|(_, s)| s.optimal == 100 && s.max_rot <= 1e-4);
    let parts: Vec<String> = stats.iter().map(|(sc, s)| format!("{sc}: {} optimal, max ROT {:.1e}", s.optimal, s.max_rot)).collect();
    outcome(ok && within(el, 300.0), format!("{}; {:.1}s", parts.join("; "), el.as_secs_f64()))
}

fn certificate(stats: &[(Scenario, CertStats)]) -> Outcome {
    let ok = stats.iter().all(|(_, s)| s.optimal == 100 && s.cert_fail == 0);
    let parts: Vec<String> = stats
        .iter()
        .map(|(sc, s)| {
            format!(
                "{sc}: {} failing, worst −minEig/(1+‖Φ‖) {:.1e}, |Tr ΦW|/(1+obj) {:.1e}, dual gap {:.1e}",
                s.cert_fail, s.worst_phi, s.worst_comp, s.worst_dual
            )
        })
        .collect();
    outcome(ok, parts.join("; "))
}

/// First `count` seeded M=3, U=2, 10 dB instances for which `sc` is Optimal.
fn feasible_instances(sc: Scenario, count: usize, base: u64) -> Vec<(SystemConfig, ChannelSet, Vec<CVec>)> {
    let mut out = Vec::new();
    let mut k = 0;
    while out.len() < count && k < 200 {
        let cfg = SystemConfig::new(3, 2, 10.0, trial_seed(base, 3, 0, 0, k));
        k += 1;
        let (sol, _, _) = framework::solve(&build(sc, &cfg), &settings()).unwrap();
        if sol.is_optimal() {
            let ch = gen_channels(&cfg).unwrap();
            out.push((cfg, ch, beams(&sol.w)));
        }
    }
    out
}

fn robustness() -> Outcome {
    let inst = feasible_instances(Scenario::Sproc, 20, 55);
    let mut robust_ok = 0;
    let mut perfect_broken = 0;
    let mut worst_ratio = f64::INFINITY;
    for (i, (cfg, ch, w)) in inst.iter().enumerate() {
        let r = radius_r(cfg.m, cfg.rho).unwrap();
        let ws = worstcase_check(w, ch, r, cfg, 10_000, 900 + i as u64).unwrap();
        let ratio = ws.iter().zip(&cfg.gamma).map(|(s, g)| s / g).fold(f64::INFINITY, f64::min);
        worst_ratio = worst_ratio.min(ratio);
        if ratio >= 1.0 - 1e-6 {
            robust_ok += 1;
        }
        let (p, _, _) = framework::solve(&build_perfect(cfg, ch).unwrap(), &settings()).unwrap();
        let wp = worstcase_check(&beams(&p.w), ch, r, cfg, 10_000, 900 + i as u64).unwrap();
        if wp.iter().zip(&cfg.gamma).any(|(s, g)| s < g) {
            perfect_broken += 1;
        }
    }
    outcome(
        inst.len() == 20 && robust_ok == 20 && perfect_broken >= 15,
        format!(
            "{} instances, robust {robust_ok}/20 (worst SINR/γ {worst_ratio:.8}), perfect-CSI violated in {perfect_broken}/20",
            inst.len()
        ),
    )
}

fn chance_oracle() -> Outcome {
    let inst = feasible_instances(Scenario::Chance, 20, 66);
    let mut worst: f64 = 0.0;
    let mut ok = inst.len() == 20;
    for (i, (cfg, ch, w)) in inst.iter().enumerate() {
        let out = outage_mc(w, ch, cfg, 10_000, 700 + i as u64).unwrap();
        for o in out {
            worst = worst.max(o.prob);
            ok &= o.prob <= cfg.rho;
        }
    }
    outcome(ok, format!("{} instances, max outage {worst:.4} (ρ = 0.1)", inst.len()))
}

fn bernstein() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 100_000;
    let mut ok = true;
    let mut min_margin = f64::INFINITY;
    for _ in 0..20 {
        let dim = 3;
        let a = CMat::from_fn(dim, dim, |_, _| cn(&mut rng));
        let y = HMat::from_hermitian_part(&a);
        let u = cn_vec(dim, &mut rng);
        let delta = 0.5 + 2.5 * rng.random::<f64>();
        let b = bernstein_bound(&y, &u, delta).unwrap();
        let hits = (0..n)
            .filter(|_| {
                let x = cn_vec(dim, &mut rng);
                let q = x.dotc(&(y.as_mat() * &x)).re + 2.0 * u.dotc(&x).re;
                q >= b
            })
            .count();
        let p = hits as f64 / n as f64;
        let target = 1.0 - (-delta).exp();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        min_margin = min_margin.min(p - target);
        ok &= p >= target - 3.0 * se;
    }
    outcome(ok, format!("20 triples, min (empirical − (1 − e^−δ)) = {min_margin:.4}"))
}

fn feasibility_trend() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for sc in [Scenario::Sproc, Scenario::Chance] {
        let spec = SweepSpec { sinr_db: vec![10.0, 20.0], trials: 300, base_seed: 8, ..SweepSpec::new(sc) };
        let sum = summarize(&run_sweep(&spec).unwrap());
        let (r10, r20) = (sum[0].feasibility_rate, sum[1].feasibility_rate);
        ok &= (0.55..=0.95).contains(&r20) && r20 < r10;
        let fails: usize = sum.iter().map(|p| p.failures).sum();
        parts.push(format!("{sc} 10 dB {r10:.3}, 20 dB {r20:.3} ({fails} solver failures)"));
    }
    let spec = SweepSpec { trials: 300, base_seed: 8, ..SweepSpec::new(Scenario::Perfect) };
    let sum = summarize(&run_sweep(&spec).unwrap());
    let min_perfect = sum.iter().map(|p| p.feasibility_rate).fold(f64::INFINITY, f64::min);
    ok &= min_perfect == 1.0;
    parts.push(format!("perfect min rate over 0–20 dB {min_perfect:.3}"));
    let el = t.elapsed();
    outcome(ok && within(el, 600.0), format!("{}; {:.1}s", parts.join("; "), el.as_secs_f64()))
}

fn ris_loop() -> Outcome {
    let t = Instant::now();
    let grid: Vec<f64> = (0..=10).map(|k| 2.0 * k as f64).collect();
    let mut feasible = 0;
    let mut monotone = true;
    let (mut max_rw, mut max_rt): (f64, f64) = (0.0, 0.0);
    let mut iters = 0;
    for trial in 0..50 {
        let cfg = SystemConfig::new(3, 2, grid[trial % grid.len()], trial_seed(99, 3, 8, 0, trial));
        let ris = gen_ris_channels(&cfg, 8).unwrap();
        let Ok(tr) = ris_alternate(&cfg, &ris, cfg.seed ^ 0xA5A5, RIS_TOL, RIS_MAX_OUTER, &settings()) else {
            continue;
        };
        feasible += 1;
        iters += tr.iterations.len();
        monotone &= tr.iterations.windows(2).all(|p| p[1].objective <= p[0].objective + 1e-8);
        let last = tr.iterations.last().unwrap();
        max_rw = max_rw.max(last.rot_w);
        max_rt = max_rt.max(rankone_core::rankone::rot_theta(&tr.theta).unwrap());
    }
    let el = t.elapsed();
    outcome(
        feasible == 50 && monotone && max_rw <= 1e-4 && max_rt <= 1e-4 && within(el, 300.0),
        format!(
            "feasible {feasible}/50, monotone {monotone}, max ROT W {max_rw:.1e}, max ROT Θ {max_rt:.1e}, {iters} outer iterations, {:.1}s",
            el.as_secs_f64()
        ),
    )
}

fn complexity() -> Outcome {
    let mut ok = true;
    let mut ris_gap = 0;
    for u in 1u128..=4 {
        for m in 2u128..=8 {
            let big = m * m + m + 1;
            // reference (β, C_form, C_fact) polynomials per scenario
            let reference = [
                (Scenario::Perfect, u * (m + 1), m.pow(2) * (u * (m.pow(3) + 1)) + m.pow(4) * (u * (m.pow(2) + 1)), 2 * m.pow(6)),
                (
                    Scenario::Sproc,
                    u * (2 * m + 1),
                    m.pow(2) * (u * (m + 1).pow(3) + u * m.pow(3)) + m.pow(4) * (u * (m + 1).pow(2) + u * m.pow(2)),
                    2 * m.pow(6),
                ),
                (
                    Scenario::Chance,
                    2 * u * m + u * (m * m + m + 2),
                    m.pow(2) * (u + 2 * u * m.pow(3) + u * big.pow(3)) + m.pow(4) * (u + 2 * u * m.pow(2) + u * big.pow(2)),
                    4 * m.pow(6),
                ),
            ];
            for (sc, beta, form, fact) in reference {
                let got = complexity_eval(&ComplexityCounts::for_scenario(sc, u as u64, m as u64), 1e-6).unwrap();
                ok &= (got.beta, got.c_form, got.c_fact) == (beta, form, fact);
            }
            // phase-shift step: the reference C_form carries a constant 1 where its
            // own β (and the general formula) carry U scalar rows
            let got = complexity_eval(&ComplexityCounts::for_scenario(Scenario::Ris, u as u64, m as u64), 1e-6).unwrap();
            let form4 = m.pow(2) * (1 + 2 * m.pow(3)) + m.pow(4) * (1 + 2 * m.pow(2));
            ok &= got.beta == u + 2 * m && got.c_fact == 3 * m.pow(6);
            ok &= got.c_form == form4 + (u - 1) * (m.pow(2) + m.pow(4));
            if got.c_form != form4 {
                ris_gap += 1;
            }
        }
    }
    outcome(
        ok,
        format!(
            "28 (U, M) pairs × 4 scenarios exact; phase-shift C_form equals the reference polynomial for U = 1 and exceeds it by (U−1)(M²+M⁴) in {ris_gap} cases"
        ),
    )
}

fn coverage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let n = 100_000;
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    for m in [1, 3, 6] {
        for rho in [0.05, 0.1, 0.3] {
            let r = radius_r(m, rho).unwrap();
            let hits = (0..n).filter(|_| cn_vec(m, &mut rng).norm_squared() <= r * r).count();
            let p = hits as f64 / n as f64;
            let se = ((1.0 - rho) * rho / n as f64).sqrt();
            let z = (p - (1.0 - rho)).abs() / se;
            worst_z = worst_z.max(z);
            ok &= z <= 3.0;
        }
    }
    outcome(ok, format!("9 (M, ρ) pairs, worst deviation {worst_z:.2} standard errors"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("[{}] {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "closed-form optimum", closed_form());
    report(2, "solver eigenvalue oracle", solver_oracle());
    let (stats, el) = rank_one_trials();
    report(3, "rank-one solutions", rank_one(&stats, el));
    report(4, "dual certificate", certificate(&stats));
    report(5, "S-procedure robustness", robustness());
    report(6, "chance-constraint outage", chance_oracle());
    report(7, "Bernstein bound validity", bernstein());
    report(8, "feasibility trend", feasibility_trend());
    report(9, "RIS alternating loop", ris_loop());
    report(10, "complexity formulas", complexity());
    report(11, "radius coverage", coverage());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
