use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rankone_core::experiments::{self, build_problem, emit_outputs, run_sweep_with_progress, write_atomic, Scenario, SweepSpec};
use rankone_core::framework::{self, compile, FrameworkProblem};
use rankone_core::linalg::{CVec, C64};
use rankone_core::rankone::{build_dual_certificate, extract_rank_one, rot, verify_certificate};
use rankone_core::scenarios::{self, ChannelSet, SystemConfig};
use rankone_core::sdp::{export_sdpa, SolverSettings, SolverStatus};
use rankone_core::Error;
use serde::Deserialize;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

const OUTPUT_DIR_ENV: &str = "RANKONE_OUTPUT_DIR";
const RIS_INIT_SALT: u64 = 0xA5A5;

#[derive(Parser, Debug)]
#[command(name = "rankone", version, about = "Rank-one SDR beamforming designs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Configuration file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides the config and $RANKONE_OUTPUT_DIR.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance and write its beamforming vectors.
    Solve(Common),
    /// Monte Carlo sweep over the 0–20 dB SINR grid.
    Sweep(Common),
    /// Solve one instance and check its dual certificate.
    Certify(Common),
    /// Alternating beamforming / phase-shift design.
    Ris(Common),
    /// Evaluate the complexity formulas for the configured scenario.
    Complexity {
        #[command(flatten)]
        common: Common,
        /// Target accuracy ε in (0, 1).
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Write the compiled instance in SDPA sparse format.
    ExportSdpa(Common),
}

#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
enum SinrDb {
    Common(f64),
    PerUser(Vec<f64>),
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct CliConfig {
    scenario: Scenario,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "U")]
    u: usize,
    #[serde(rename = "N")]
    n: Option<usize>,
    sinr_db: SinrDb,
    sigma2: Option<f64>,
    eps2: Option<f64>,
    rho: Option<f64>,
    #[serde(default)]
    delta_offdiag: f64,
    #[serde(default)]
    seed: u64,
    trials: Option<usize>,
    output_dir: Option<PathBuf>,
    gap_tol: Option<f64>,
    max_iter: Option<usize>,
    /// Explicit channel estimates, `[user][antenna] = [re, im]`; replaces the
    /// seeded draw for the non-RIS scenarios.
    channel: Option<Vec<Vec<[f64; 2]>>>,
}

/// Failure with its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::ScenarioInfeasible(_) => EXIT_INFEASIBLE,
            Error::NotOptimal(s) => status_code(*s),
            Error::Io(_) | Error::Csv(_) => EXIT_IO,
            _ => EXIT_USAGE,
        };
        Fail(code, e.to_string())
    }
}

fn status_code(s: SolverStatus) -> u8 {
    match s {
        SolverStatus::Optimal => 0,
        SolverStatus::Infeasible => EXIT_INFEASIBLE,
        _ => EXIT_NUMERICAL,
    }
}

impl CliConfig {
    fn load(path: &Path) -> Result<Self, Fail> {
        let text = std::fs::read_to_string(path).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", path.display())))
    }

    fn system(&self) -> Result<SystemConfig, Fail> {
        let mut cfg = SystemConfig::new(self.m, self.u, 0.0, self.seed);
        cfg.gamma = match &self.sinr_db {
            SinrDb::Common(db) => vec![scenarios::db_to_linear(*db); self.u],
            SinrDb::PerUser(v) if v.len() == self.u => v.iter().map(|&d| scenarios::db_to_linear(d)).collect(),
            SinrDb::PerUser(v) => return Err(Fail(EXIT_USAGE, format!("sinr_db lists {} values for U = {}", v.len(), self.u))),
        };
        if let Some(s) = self.sigma2 {
            cfg.sigma2 = vec![s; self.u];
        }
        cfg.eps2 = self.eps2.unwrap_or(cfg.eps2);
        cfg.rho = self.rho.unwrap_or(cfg.rho);
        cfg.delta_offdiag = self.delta_offdiag;
        cfg.validate()?;
        Ok(cfg)
    }

    fn settings(&self) -> Result<SolverSettings, Fail> {
        let d = SolverSettings::default();
        let s = SolverSettings { gap_tol: self.gap_tol.unwrap_or(d.gap_tol), max_iter: self.max_iter.unwrap_or(d.max_iter), ..d };
        s.validate()?;
        Ok(s)
    }

    fn ris_n(&self) -> usize {
        self.n.unwrap_or(8)
    }

    fn output_dir(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone()
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn problem(&self, cfg: &SystemConfig) -> Result<FrameworkProblem, Fail> {
        if self.scenario == Scenario::Ris {
            return Err(Fail(EXIT_USAGE, "the ris scenario is run with the `ris` subcommand".into()));
        }
        let Some(chan) = &self.channel else {
            return Ok(build_problem(self.scenario, cfg)?);
        };
        if chan.len() != self.u || chan.iter().any(|h| h.len() != self.m) {
            return Err(Fail(EXIT_USAGE, format!("channel must be {} users × {} antennas", self.u, self.m)));
        }
        let seeded = scenarios::gen_channels(cfg)?;
        let ch = ChannelSet {
            direct: chan.iter().map(|h| CVec::from_iterator(h.len(), h.iter().map(|p| C64::new(p[0], p[1])))).collect(),
            error_cov: seeded.error_cov,
        };
        Ok(match self.scenario {
            Scenario::Perfect => scenarios::build_perfect(cfg, &ch)?,
            Scenario::Sproc => scenarios::build_sproc(cfg, &ch, scenarios::radius_r(cfg.m, cfg.rho)?)?,
            Scenario::Chance => scenarios::build_chance(cfg, &ch)?,
            Scenario::Ris => unreachable!(),
        })
    }
}

fn beams_csv(beams: &[CVec]) -> Vec<u8> {
    let mut out = String::from("user,antenna,re,im\n");
    for (i, b) in beams.iter().enumerate() {
        for (k, z) in b.iter().enumerate() {
            out.push_str(&format!("{i},{k},{:e},{:e}\n", z.re, z.im));
        }
    }
    out.into_bytes()
}

fn cmd_solve(common: &Common, certify: bool) -> Result<u8, Fail> {
    let conf = CliConfig::load(&common.config)?;
    let cfg = conf.system()?;
    let fp = conf.problem(&cfg)?;
    let (sol, prob, map) = framework::solve(&fp, &conf.settings()?)?;
    println!("status: {}", sol.status.as_str());
    if !sol.is_optimal() {
        return Ok(status_code(sol.status));
    }
    println!("objective: {}", sol.objective);
    println!("rot_w: {:e}", rot(&sol.w)?.max_ratio);
    let beams = sol.w.iter().map(extract_rank_one).collect::<Result<Vec<_>, _>>()?;
    let dir = conf.output_dir(&common.output_dir);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let path = dir.join(format!("{}_beams.csv", conf.scenario));
    write_atomic(&path, &beams_csv(&beams))?;
    println!("beams: {}", path.display());
    if certify {
        let cert = build_dual_certificate(&fp, &prob, &map, &sol.raw)?;
        let rep = verify_certificate(&cert, &sol);
        println!("certificate: {}", if rep.pass() { "pass" } else { "fail" });
        println!("  Φ ⪰ 0: {}  Tr(ΦW) ≈ 0: {}  rank one: {}", ok(rep.phi_psd), ok(rep.complementarity_ok), ok(rep.rank_one));
        for (i, ((e, cs), r)) in rep.phi_min_eig.iter().zip(&rep.complementarity).zip(&rep.rot).enumerate() {
            let r = r.map_or("zero matrix".to_string(), |r| format!("{r:e}"));
            println!("  user {i}: min eig Φ {e:e}, |Tr(ΦW)| {cs:e}, rot {r}");
        }
        println!("  dual value residual: {:e} ({})", rep.dual_value_residual, ok(rep.dual_value_ok));
    }
    Ok(0)
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn cmd_sweep(common: &Common) -> Result<u8, Fail> {
    let conf = CliConfig::load(&common.config)?;
    let cfg = conf.system()?;
    let spec = SweepSpec {
        m_values: vec![conf.m],
        n_values: vec![conf.ris_n()],
        u: conf.u,
        trials: conf.trials.unwrap_or(100),
        base_seed: conf.seed,
        delta_offdiag: cfg.delta_offdiag,
        sigma2: cfg.sigma2[0],
        eps2: cfg.eps2,
        rho: cfg.rho,
        settings: conf.settings()?,
        ..SweepSpec::new(conf.scenario)
    };
    let recs = run_sweep_with_progress(&spec, |done, total| eprintln!("[{done}/{total}] points done"))?;
    let dir = conf.output_dir(&common.output_dir);
    for p in emit_outputs(&recs, &spec, &dir)? {
        println!("wrote {}", p.display());
    }
    for s in experiments::summarize(&recs) {
        println!(
            "M={} N={} {:>5} dB  feasible {:.3}  failures {}",
            s.m, s.n, s.sinr_db, s.feasibility_rate, s.failures
        );
    }
    Ok(0)
}

fn cmd_ris(common: &Common) -> Result<u8, Fail> {
    let conf = CliConfig::load(&common.config)?;
    let cfg = conf.system()?;
    let ris = scenarios::gen_ris_channels(&cfg, conf.ris_n())?;
    let trace = scenarios::ris_alternate(&cfg, &ris, cfg.seed ^ RIS_INIT_SALT, scenarios::RIS_TOL, scenarios::RIS_MAX_OUTER, &conf.settings()?)?;
    let mut out = String::from("iteration,objective,rot_w,rot_theta\n");
    for (k, it) in trace.iterations.iter().enumerate() {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", k + 1, it.objective, it.rot_w, it.rot_theta));
    }
    let dir = conf.output_dir(&common.output_dir);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let path = dir.join("ris_trace.csv");
    write_atomic(&path, out.as_bytes())?;
    let last = trace.iterations.last().expect("at least one outer iteration");
    println!("outer iterations: {} (converged: {})", trace.iterations.len(), trace.converged);
    println!("objective: {}", last.objective);
    println!("rot_w: {:e}", last.rot_w);
    println!("rot_theta: {:e}", last.rot_theta);
    println!("trace: {}", path.display());
    Ok(0)
}

fn cmd_complexity(common: &Common, epsilon: f64) -> Result<u8, Fail> {
    let conf = CliConfig::load(&common.config)?;
    let counts = experiments::ComplexityCounts::for_scenario(conf.scenario, conf.u as u64, conf.m as u64);
    let c = experiments::complexity_eval(&counts, epsilon)?;
    println!("scenario: {}  M={} U={}", conf.scenario, conf.m, conf.u);
    println!("beta: {}", c.beta);
    println!("C_form: {}", c.c_form);
    println!("C_fact: {}", c.c_fact);
    println!("total (order): {:e}", c.total_order);
    Ok(0)
}

fn cmd_export(common: &Common) -> Result<u8, Fail> {
    let conf = CliConfig::load(&common.config)?;
    let cfg = conf.system()?;
    let (prob, _) = compile(&conf.problem(&cfg)?)?;
    let dir = conf.output_dir(&common.output_dir);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let path = dir.join(format!("{}.dat-s", conf.scenario));
    write_atomic(&path, export_sdpa(&prob).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match &cli.cmd {
        Command::Solve(c) => cmd_solve(c, false),
        Command::Certify(c) => cmd_solve(c, true),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Ris(c) => cmd_ris(c),
        Command::Complexity { common, epsilon } => cmd_complexity(common, *epsilon),
        Command::ExportSdpa(c) => cmd_export(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
