//! Seeded Monte Carlo sweeps over the beamforming scenarios, CSV/SVG output,
//! and the interior-point complexity calculator.

use std::fmt;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framework::{self, FrameworkProblem};
use crate::rankone::{build_dual_certificate, rot, rot_theta, verify_certificate};
use crate::scenarios::{self, SystemConfig, RIS_MAX_OUTER, RIS_TOL};
use crate::sdp::{SolverSettings, SolverStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Perfect,
    Sproc,
    Chance,
    Ris,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Perfect, Scenario::Sproc, Scenario::Chance, Scenario::Ris];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Perfect => "perfect",
            Scenario::Sproc => "sproc",
            Scenario::Chance => "chance",
            Scenario::Ris => "ris",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown scenario '{s}' (expected perfect, sproc, chance or ris)")))
    }
}

/// Status label for problems the alternating loop could not start.
pub const SCENARIO_INFEASIBLE: &str = "ScenarioInfeasible";

/// Builds the single-shot problem of a non-RIS scenario.
pub fn build_problem(scenario: Scenario, cfg: &SystemConfig) -> Result<FrameworkProblem> {
    let ch = scenarios::gen_channels(cfg)?;
    match scenario {
        Scenario::Perfect => scenarios::build_perfect(cfg, &ch),
        Scenario::Sproc => scenarios::build_sproc(cfg, &ch, scenarios::radius_r(cfg.m, cfg.rho)?),
        Scenario::Chance => scenarios::build_chance(cfg, &ch),
        Scenario::Ris => Err(Error::Invalid("the RIS scenario is solved by alternation, not a single problem".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub m_values: Vec<usize>,
    /// RIS element counts; ignored by the other scenarios.
    pub n_values: Vec<usize>,
    pub u: usize,
    pub sinr_db: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub delta_offdiag: f64,
    pub sigma2: f64,
    pub eps2: f64,
    pub rho: f64,
    pub settings: SolverSettings,
    pub ris_tol: f64,
    pub ris_max_outer: usize,
    /// Wall-clock times make the CSV non-reproducible; off by default.
    pub record_timing: bool,
}

impl SweepSpec {
    pub fn new(scenario: Scenario) -> Self {
        SweepSpec {
            scenario,
            m_values: vec![3],
            n_values: vec![8],
            u: 2,
            sinr_db: (0..=10).map(|k| 2.0 * k as f64).collect(),
            trials: 100,
            base_seed: 0,
            delta_offdiag: 0.0,
            sigma2: scenarios::DEFAULT_SIGMA2,
            eps2: scenarios::DEFAULT_EPS2,
            rho: scenarios::DEFAULT_RHO,
            settings: SolverSettings::default(),
            ris_tol: RIS_TOL,
            ris_max_outer: RIS_MAX_OUTER,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if self.m_values.is_empty() || self.sinr_db.is_empty() || (self.scenario == Scenario::Ris && self.n_values.is_empty()) {
            return Err(Error::Invalid("sweep grids must be non-empty".into()));
        }
        if self.m_values.contains(&0) || self.n_values.contains(&0) || self.u == 0 {
            return Err(Error::Invalid("M, N and U must be positive".into()));
        }
        if self.sinr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Invalid("SINR grid must be finite".into()));
        }
        if self.ris_max_outer == 0 {
            return Err(Error::Invalid("ris_max_outer must be at least 1".into()));
        }
        self.settings.validate()?;
        self.config(self.m_values[0], self.sinr_db[0], 0).validate()
    }

    fn config(&self, m: usize, sinr_db: f64, seed: u64) -> SystemConfig {
        SystemConfig {
            sigma2: vec![self.sigma2; self.u],
            eps2: self.eps2,
            rho: self.rho,
            delta_offdiag: self.delta_offdiag,
            ..SystemConfig::new(m, self.u, sinr_db, seed)
        }
    }

    /// `(M, N, SINR index)` in output order. `N` is 0 outside the RIS scenario.
    fn points(&self) -> Vec<(usize, usize, usize)> {
        let ns: Vec<usize> = if self.scenario == Scenario::Ris { self.n_values.clone() } else { vec![0] };
        let mut out = Vec::new();
        for &m in &self.m_values {
            for &n in &ns {
                for k in 0..self.sinr_db.len() {
                    out.push((m, n, k));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: Scenario,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "U")]
    pub u: usize,
    pub sinr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub status: String,
    pub objective: Option<f64>,
    pub rot_w: Option<f64>,
    pub rot_theta: Option<f64>,
    pub outer_iters: usize,
    pub solve_ms: f64,
    pub cert_pass: Option<bool>,
}

impl TrialRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal.as_str()
    }

    /// Solver breakdowns, as opposed to feasibility verdicts.
    pub fn is_failure(&self) -> bool {
        self.status == SolverStatus::NumericalFailure.as_str() || self.status == SolverStatus::IterationLimit.as_str()
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial, a function of the point and trial index only.
pub fn trial_seed(base: u64, m: usize, n: usize, sinr_index: usize, trial: usize) -> u64 {
    let mut h = splitmix64(m as u64);
    for v in [n, sinr_index, trial] {
        h = splitmix64(h ^ v as u64);
    }
    base ^ h
}

fn run_single(spec: &SweepSpec, cfg: &SystemConfig, rec: &mut TrialRecord) -> Result<()> {
    let fp = build_problem(spec.scenario, cfg)?;
    let (sol, prob, map) = framework::solve(&fp, &spec.settings)?;
    rec.status = sol.status.as_str().to_string();
    rec.outer_iters = 1;
    if sol.is_optimal() {
        rec.objective = Some(sol.objective);
        rec.rot_w = rot(&sol.w).ok().map(|r| r.max_ratio);
        let cert = build_dual_certificate(&fp, &prob, &map, &sol.raw)?;
        rec.cert_pass = Some(verify_certificate(&cert, &sol).pass());
    }
    Ok(())
}

fn run_ris(spec: &SweepSpec, cfg: &SystemConfig, n: usize, rec: &mut TrialRecord) -> Result<()> {
    let ris = scenarios::gen_ris_channels(cfg, n)?;
    let trace = scenarios::ris_alternate(cfg, &ris, splitmix64(cfg.seed), spec.ris_tol, spec.ris_max_outer, &spec.settings)?;
    let last = trace.iterations.last().expect("at least one beamforming step");
    rec.status = SolverStatus::Optimal.as_str().to_string();
    rec.objective = Some(last.objective);
    rec.rot_w = Some(last.rot_w);
    rec.rot_theta = rot_theta(&trace.theta).ok();
    rec.outer_iters = trace.iterations.len();
    Ok(())
}

pub fn run_trial(spec: &SweepSpec, m: usize, n: usize, sinr_index: usize, trial: usize) -> TrialRecord {
    let seed = trial_seed(spec.base_seed, m, n, sinr_index, trial);
    let sinr_db = spec.sinr_db[sinr_index];
    let mut rec = TrialRecord {
        scenario: spec.scenario,
        m,
        n,
        u: spec.u,
        sinr_db,
        trial,
        seed,
        status: String::new(),
        objective: None,
        rot_w: None,
        rot_theta: None,
        outer_iters: 0,
        solve_ms: 0.0,
        cert_pass: None,
    };
    let cfg = spec.config(m, sinr_db, seed);
    let start = Instant::now();
    let out = match spec.scenario {
        Scenario::Ris => run_ris(spec, &cfg, n, &mut rec),
        _ => run_single(spec, &cfg, &mut rec),
    };
    if let Err(e) = out {
        rec.status = match e {
            Error::ScenarioInfeasible(_) => SCENARIO_INFEASIBLE.to_string(),
            _ => SolverStatus::NumericalFailure.as_str().to_string(),
        };
        rec.objective = None;
        rec.rot_w = None;
        rec.rot_theta = None;
        rec.cert_pass = None;
    }
    if spec.record_timing {
        rec.solve_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    rec
}

/// Runs every `(point, trial)` pair. Trials run in parallel; the output order
/// is by point, then trial.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialRecord>> {
    run_sweep_with_progress(spec, |_, _| {})
}

/// As [`run_sweep`], calling `progress(done_points, total_points)` after each point.
pub fn run_sweep_with_progress(spec: &SweepSpec, progress: impl Fn(usize, usize)) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let points = spec.points();
    let mut out = Vec::with_capacity(points.len() * spec.trials);
    for (done, &(m, n, k)) in points.iter().enumerate() {
        let recs: Vec<TrialRecord> = (0..spec.trials).into_par_iter().map(|t| run_trial(spec, m, n, k, t)).collect();
        out.extend(recs);
        progress(done + 1, points.len());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub m: usize,
    pub n: usize,
    pub sinr_db: f64,
    pub trials: usize,
    pub feasible: usize,
    pub failures: usize,
    /// Feasible fraction among trials that did not fail numerically.
    pub feasibility_rate: f64,
    pub mean_rot_w: Option<f64>,
    pub mean_rot_theta: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(records: &[TrialRecord]) -> Vec<PointSummary> {
    let mut keys: Vec<(usize, usize, f64)> = Vec::new();
    for r in records {
        let k = (r.m, r.n, r.sinr_db);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(m, n, s)| {
            let pts: Vec<&TrialRecord> = records.iter().filter(|r| r.m == m && r.n == n && r.sinr_db == s).collect();
            let feasible = pts.iter().filter(|r| r.is_optimal()).count();
            let failures = pts.iter().filter(|r| r.is_failure()).count();
            let decided = pts.len() - failures;
            PointSummary {
                m,
                n,
                sinr_db: s,
                trials: pts.len(),
                feasible,
                failures,
                feasibility_rate: if decided == 0 { f64::NAN } else { feasible as f64 / decided as f64 },
                mean_rot_w: mean(pts.iter().filter_map(|r| r.rot_w)),
                mean_rot_theta: mean(pts.iter().filter_map(|r| r.rot_theta)),
            }
        })
        .collect()
}

/// Writes `bytes` to a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn records_to_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn records_from_csv(data: &[u8]) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(data);
    Ok(rd.deserialize().collect::<std::result::Result<Vec<TrialRecord>, _>>()?)
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line chart. Every data point carries its exact values in
/// `data-x`/`data-y` attributes; `log_y` only changes the drawing.
fn svg_chart(title: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let (w, h, pad) = (640.0, 400.0, 60.0);
    let tf = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().map(|&(x, y)| (x, tf(y)))).filter(|p| p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, w / 2.0);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
    let _ = writeln!(s, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">SINR target (dB)</text>"#, w / 2.0, h - 20.0);
    let ylab = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" font-size="12">{ylab}</text>"#, h / 2.0, h / 2.0);
    for (v, anchor, xx, yy) in [(x0, "middle", px(x0), h - pad + 16.0), (x1, "middle", px(x1), h - pad + 16.0)] {
        let _ = writeln!(s, r#"<text x="{xx}" y="{yy}" text-anchor="{anchor}" font-size="10">{v}</text>"#);
    }
    for v in [y0, y1] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" font-size="10">{v:.3}</text>"#, pad - 4.0, py(v) + 3.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| tf(p.1).is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(tf(y))))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for &(x, y) in &ser.points {
            if tf(y).is_finite() {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" data-series="{}" data-x="{x}" data-y="{y}"/>"#,
                    px(x),
                    py(tf(y)),
                    ser.label
                );
            }
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#, w - pad - 80.0, pad + 14.0 * i as f64, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

fn series_of(summary: &[PointSummary], scenario: Scenario, value: impl Fn(&PointSummary) -> Option<f64>) -> Vec<Series> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for p in summary {
        if !keys.contains(&(p.m, p.n)) {
            keys.push((p.m, p.n));
        }
    }
    keys.into_iter()
        .map(|(m, n)| Series {
            label: if scenario == Scenario::Ris { format!("M={m} N={n}") } else { format!("M={m}") },
            points: summary
                .iter()
                .filter(|p| p.m == m && p.n == n)
                .filter_map(|p| value(p).map(|v| (p.sinr_db, v)))
                .collect(),
        })
        .collect()
}

/// Writes `<scenario>_sweep.csv`, `<scenario>_feasibility.svg`,
/// `<scenario>_rot.svg` (and `<scenario>_rot_theta.svg` for RIS).
pub fn emit_outputs(records: &[TrialRecord], spec: &SweepSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to write".into()));
    }
    std::fs::create_dir_all(dir)?;
    let sc = spec.scenario;
    let mut paths = Vec::new();
    let csv_path = dir.join(format!("{sc}_sweep.csv"));
    write_atomic(&csv_path, &records_to_csv(records)?)?;
    paths.push(csv_path);
    let summary = summarize(records);
    let mut charts = vec![
        ("feasibility", "feasibility rate", series_of(&summary, sc, |p| Some(p.feasibility_rate)), false),
        ("rot", "mean ROT of W", series_of(&summary, sc, |p| p.mean_rot_w), true),
    ];
    if sc == Scenario::Ris {
        charts.push(("rot_theta", "mean ROT of Θ", series_of(&summary, sc, |p| p.mean_rot_theta), true));
    }
    for (metric, label, series, log_y) in charts {
        let path = dir.join(format!("{sc}_{metric}.svg"));
        write_atomic(&path, svg_chart(&format!("{sc}: {label}"), label, &series, log_y).as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

/// Block counts of a compiled instance, grouped by size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityCounts {
    pub n1: u64,
    pub n_size_m: u64,
    /// Blocks of size `M+1`.
    pub n_size_m1: u64,
    /// Blocks of size `M²+M+1`.
    pub n_size_big: u64,
    /// Number of distinct constraint families present; each costs `M⁶` to factor.
    pub families: u64,
    pub m: u64,
}

impl ComplexityCounts {
    /// All six families with the given record counts, as in the general framework.
    pub fn general(u: u64, m: u64, l1: u64, l3: u64, l4: u64, l5: u64) -> Self {
        ComplexityCounts { n1: l1 + u, n_size_m: l5 + u, n_size_m1: l3, n_size_big: l4, families: 6, m }
    }

    /// Counts for one scenario. Only the blocks that carry the constraint
    /// families are counted; sign constraints on auxiliary scalars are not.
    pub fn for_scenario(scenario: Scenario, u: u64, m: u64) -> Self {
        let z = ComplexityCounts { n1: 0, n_size_m: 0, n_size_m1: 0, n_size_big: 0, families: 0, m };
        match scenario {
            Scenario::Perfect => ComplexityCounts { n1: u, n_size_m: u, families: 2, ..z },
            Scenario::Sproc => ComplexityCounts { n_size_m1: u, n_size_m: u, families: 2, ..z },
            Scenario::Chance => ComplexityCounts { n1: u, n_size_m: 2 * u, n_size_big: u, families: 4, ..z },
            // phase-shift step: U scalar rows, one diagonal block, one PSD block
            Scenario::Ris => ComplexityCounts { n1: u, n_size_m: 2, families: 3, ..z },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complexity {
    pub beta: u128,
    pub c_form: u128,
    pub c_fact: u128,
    pub total_order: f64,
}

pub fn complexity_eval(k: &ComplexityCounts, epsilon: f64) -> Result<Complexity> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Invalid(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    let m = k.m as u128;
    let (n1, nm, nm1, nb) = (k.n1 as u128, k.n_size_m as u128, k.n_size_m1 as u128, k.n_size_big as u128);
    let big = m * m + m + 1;
    let beta = n1 + nm * m + nm1 * (m + 1) + nb * big;
    let c_form = m.pow(2) * (n1 + nm * m.pow(3) + nm1 * (m + 1).pow(3) + nb * big.pow(3))
        + m.pow(4) * (n1 + nm1 * (m + 1).pow(2) + nb * big.pow(2) + nm * m.pow(2));
    let c_fact = k.families as u128 * m.pow(6);
    let total_order = (1.0 / epsilon).ln() * (beta as f64).sqrt() * (c_form as f64 + c_fact as f64);
    Ok(Complexity { beta, c_form, c_fact, total_order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: Scenario) -> SweepSpec {
        SweepSpec { m_values: vec![2], n_values: vec![3], sinr_db: vec![0.0, 6.0], trials: 3, base_seed: 9, ..SweepSpec::new(scenario) }
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert!("robust".parse::<Scenario>().is_err());
    }

    #[test]
    fn default_grid_is_zero_to_twenty() {
        let s = SweepSpec::new(Scenario::Perfect);
        assert_eq!(s.sinr_db.len(), 11);
        assert_eq!((s.sinr_db[0], s.sinr_db[10]), (0.0, 20.0));
        assert!(SweepSpec { trials: 0, ..s.clone() }.validate().is_err());
        assert!(SweepSpec { sinr_db: vec![], ..s }.validate().is_err());
    }

    #[test]
    fn seeds_depend_on_every_key() {
        let a = trial_seed(1, 3, 0, 2, 5);
        assert_eq!(a, trial_seed(1, 3, 0, 2, 5));
        for b in [trial_seed(2, 3, 0, 2, 5), trial_seed(1, 4, 0, 2, 5), trial_seed(1, 3, 1, 2, 5), trial_seed(1, 3, 0, 3, 5), trial_seed(1, 3, 0, 2, 6)] {
            assert_ne!(a, b);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_round_trips() {
        let spec = small(Scenario::Perfect);
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.len(), 6);
        let (ca, cb) = (records_to_csv(&a).unwrap(), records_to_csv(&b).unwrap());
        assert_eq!(ca, cb);
        assert_eq!(records_from_csv(&ca).unwrap(), a);
        let header = String::from_utf8(ca).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "scenario,M,N,U,sinr_db,trial,seed,status,objective,rot_w,rot_theta,outer_iters,solve_ms,cert_pass");
        for r in &a {
            assert!(r.is_optimal() && r.cert_pass == Some(true), "{r:?}");
            assert!(r.rot_w.unwrap() <= 1e-4);
        }
        assert!(summarize(&a).iter().all(|p| p.feasibility_rate == 1.0));
    }

    #[test]
    fn ris_sweep_records_both_ratios() {
        let spec = SweepSpec { trials: 2, sinr_db: vec![4.0], ..small(Scenario::Ris) };
        let recs = run_sweep(&spec).unwrap();
        for r in &recs {
            assert!(r.is_optimal(), "{r:?}");
            assert_eq!(r.n, 3);
            assert!(r.rot_theta.is_some() && r.outer_iters >= 1);
        }
    }

    #[test]
    fn single_record_gives_two_line_csv() {
        let spec = SweepSpec { trials: 1, sinr_db: vec![0.0], ..small(Scenario::Perfect) };
        let recs = run_sweep(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_outputs(&recs, &spec, dir.path()).unwrap();
        let csv = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        let svg = std::fs::read_to_string(dir.path().join("perfect_feasibility.svg")).unwrap();
        assert!(svg.contains(r#"data-x="0" data-y="1""#));
        assert!(dir.path().join("perfect_rot.svg").exists());
        assert!(emit_outputs(&[], &spec, dir.path()).is_err());
    }

    #[test]
    fn perfect_complexity_hand_values() {
        let c = complexity_eval(&ComplexityCounts::for_scenario(Scenario::Perfect, 2, 4), 1e-6).unwrap();
        assert_eq!((c.beta, c.c_form, c.c_fact), (10, 10784, 8192));
        let want = (1e6f64).ln() * 10f64.sqrt() * (10784.0 + 8192.0);
        assert!((c.total_order - want).abs() < 1e-9 * want);
        assert!(complexity_eval(&ComplexityCounts::for_scenario(Scenario::Perfect, 2, 4), 0.0).is_err());
    }

    #[test]
    fn general_counts_match_block_sizes() {
        let (u, m, l1, l3, l4, l5) = (2u64, 3u64, 3u64, 2u64, 1u64, 4u64);
        let c = complexity_eval(&ComplexityCounts::general(u, m, l1, l3, l4, l5), 0.5).unwrap();
        let want = l1 + u + l3 + l4 + (l3 + l4 + l5 + u) * m + l4 * m * m;
        assert_eq!(c.beta, want as u128);
        assert_eq!(c.c_fact, 6 * 3u128.pow(6));
    }
}
