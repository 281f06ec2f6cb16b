//! Python bindings: scenario configs, single solves with certificates,
//! sweeps, the RIS loop and the complexity calculator.

#[pyo3::pymodule]
mod rankone {
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    use rankone_core::experiments::{self, build_problem, Scenario, SweepSpec};
    use rankone_core::framework;
    use rankone_core::linalg::{CMat, HMat, RMat, C64};
    use rankone_core::rankone as r1;
    use rankone_core::scenarios::{self, SystemConfig};
    use rankone_core::sdp::{self, LmiBlock, SdpProblem, SolverSettings};
    use rankone_core::Error;

    type Matrix = Vec<Vec<C64>>;

    fn err(e: Error) -> PyErr {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::NotOptimal(_) => PyRuntimeError::new_err(e.to_string()),
            _ => PyValueError::new_err(e.to_string()),
        }
    }

    fn scenario(name: &str) -> PyResult<Scenario> {
        name.parse().map_err(err)
    }

    fn to_hmat(rows: &Matrix) -> PyResult<HMat> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        HMat::new(CMat::from_fn(n, n, |i, j| rows[i][j])).map_err(err)
    }

    fn from_cmat(m: &CMat) -> Matrix {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    fn settings(gap_tol: Option<f64>, max_iter: Option<usize>) -> PyResult<SolverSettings> {
        let d = SolverSettings::default();
        let s = SolverSettings { gap_tol: gap_tol.unwrap_or(d.gap_tol), max_iter: max_iter.unwrap_or(d.max_iter), ..d };
        s.validate().map_err(err)?;
        Ok(s)
    }

    /// System parameters for one instance.
    #[pyclass(name = "SystemConfig", from_py_object)]
    #[derive(Clone)]
    struct PyConfig {
        inner: SystemConfig,
    }

    #[pymethods]
    impl PyConfig {
        #[new]
        #[pyo3(signature = (m, u, sinr_db, seed = 0, sigma2 = None, eps2 = None, rho = None, delta_offdiag = 0.0))]
        #[allow(clippy::too_many_arguments)]
        fn new(
            m: usize,
            u: usize,
            sinr_db: f64,
            seed: u64,
            sigma2: Option<f64>,
            eps2: Option<f64>,
            rho: Option<f64>,
            delta_offdiag: f64,
        ) -> PyResult<Self> {
            let mut c = SystemConfig::new(m, u, sinr_db, seed);
            if let Some(s) = sigma2 {
                c.sigma2 = vec![s; u];
            }
            c.eps2 = eps2.unwrap_or(c.eps2);
            c.rho = rho.unwrap_or(c.rho);
            c.delta_offdiag = delta_offdiag;
            c.validate().map_err(err)?;
            Ok(PyConfig { inner: c })
        }

        #[getter]
        fn m(&self) -> usize {
            self.inner.m
        }

        #[getter]
        fn u(&self) -> usize {
            self.inner.u
        }

        #[getter]
        fn gamma(&self) -> Vec<f64> {
            self.inner.gamma.clone()
        }

        #[getter]
        fn sigma2(&self) -> Vec<f64> {
            self.inner.sigma2.clone()
        }

        #[getter]
        fn seed(&self) -> u64 {
            self.inner.seed
        }

        fn __repr__(&self) -> String {
            let c = &self.inner;
            format!("SystemConfig(m={}, u={}, gamma={:?}, seed={})", c.m, c.u, c.gamma, c.seed)
        }
    }

    /// Outcome of one framework solve.
    #[pyclass(name = "Solution", get_all)]
    struct PySolution {
        status: String,
        objective: Option<f64>,
        /// Beamforming matrices, one per user.
        w: Vec<Matrix>,
        /// Rank-one beamforming vectors extracted from `w`.
        beams: Vec<Vec<C64>>,
        rot_w: Option<f64>,
        /// `None` unless a certificate was requested on an optimal solve.
        certificate_pass: Option<bool>,
    }

    #[pymethods]
    impl PySolution {
        fn is_optimal(&self) -> bool {
            self.status == "Optimal"
        }

        fn __repr__(&self) -> String {
            let opt = |v: Option<f64>| v.map_or("None".to_string(), |x| format!("{x:?}"));
            format!("Solution(status={}, objective={}, rot_w={})", self.status, opt(self.objective), opt(self.rot_w))
        }
    }

    /// Builds and solves one `perfect`, `sproc` or `chance` instance.
    #[pyfunction]
    #[pyo3(signature = (scenario_name, config, certify = false, gap_tol = None, max_iter = None))]
    fn solve(
        py: Python<'_>,
        scenario_name: &str,
        config: &PyConfig,
        certify: bool,
        gap_tol: Option<f64>,
        max_iter: Option<usize>,
    ) -> PyResult<PySolution> {
        let sc = scenario(scenario_name)?;
        let st = settings(gap_tol, max_iter)?;
        let cfg = config.inner.clone();
        py.detach(move || {
            let fp = build_problem(sc, &cfg)?;
            let (sol, prob, map) = framework::solve(&fp, &st)?;
            if !sol.is_optimal() {
                return Ok(PySolution {
                    status: sol.status.as_str().into(),
                    objective: None,
                    w: Vec::new(),
                    beams: Vec::new(),
                    rot_w: None,
                    certificate_pass: None,
                });
            }
            let beams = sol.w.iter().map(|w| r1::extract_rank_one(w).map(|v| v.iter().copied().collect())).collect::<Result<_, _>>()?;
            let certificate_pass = if certify {
                let cert = r1::build_dual_certificate(&fp, &prob, &map, &sol.raw)?;
                Some(r1::verify_certificate(&cert, &sol).pass())
            } else {
                None
            };
            Ok(PySolution {
                status: sol.status.as_str().into(),
                objective: Some(sol.objective),
                rot_w: Some(r1::rot(&sol.w)?.max_ratio),
                w: sol.w.iter().map(|m| from_cmat(m.as_mat())).collect(),
                beams,
                certificate_pass,
            })
        })
        .map_err(err)
    }

    /// `Σ_{k≥2} λₖ / λ₁` of a Hermitian PSD matrix given as nested lists.
    #[pyfunction]
    fn rot_ratio(w: Matrix) -> PyResult<f64> {
        r1::rot_ratio(&to_hmat(&w)?).map_err(err)
    }

    /// `√λ₁ v₁` with the largest entry made real.
    #[pyfunction]
    fn extract_rank_one(w: Matrix) -> PyResult<Vec<C64>> {
        Ok(r1::extract_rank_one(&to_hmat(&w)?).map_err(err)?.iter().copied().collect())
    }

    #[pyfunction]
    fn db_to_linear(db: f64) -> f64 {
        scenarios::db_to_linear(db)
    }

    /// Uncertainty radius covering a `CN(0, I_M)` error with probability `1 − ρ`.
    #[pyfunction]
    fn radius_r(m: usize, rho: f64) -> PyResult<f64> {
        scenarios::radius_r(m, rho).map_err(err)
    }

    /// Solves `min t  s.t.  tI − A ⪰ 0` with the interior-point solver.
    #[pyfunction]
    fn max_eigenvalue_sdp(a: Vec<Vec<f64>>) -> PyResult<f64> {
        let n = a.len();
        if n == 0 || a.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square and non-empty"));
        }
        let am = RMat::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
        let mut b = LmiBlock::new(-am);
        b.add_coeff(0, RMat::identity(n, n));
        let prob = SdpProblem::new(vec![1.0], vec![b]).map_err(err)?;
        let res = sdp::solve(&prob, &SolverSettings::default()).map_err(err)?;
        if !res.is_optimal() {
            return Err(PyRuntimeError::new_err(format!("solver returned {}", res.status.as_str())));
        }
        Ok(res.primal_obj)
    }

    /// Iteration complexity terms for a scenario's block structure.
    #[pyfunction]
    #[pyo3(signature = (scenario_name, u, m, epsilon = 1e-6))]
    fn complexity<'py>(py: Python<'py>, scenario_name: &str, u: u64, m: u64, epsilon: f64) -> PyResult<Bound<'py, PyDict>> {
        let counts = experiments::ComplexityCounts::for_scenario(scenario(scenario_name)?, u, m);
        let c = experiments::complexity_eval(&counts, epsilon).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("beta", c.beta)?;
        d.set_item("c_form", c.c_form)?;
        d.set_item("c_fact", c.c_fact)?;
        d.set_item("total_order", c.total_order)?;
        Ok(d)
    }

    /// Monte Carlo sweep; returns one dict per trial with the CSV column names.
    #[pyfunction]
    #[pyo3(signature = (scenario_name, m = 3, u = 2, trials = 10, seed = 0, sinr_db = None, n = 8))]
    #[allow(clippy::too_many_arguments)]
    fn run_sweep<'py>(
        py: Python<'py>,
        scenario_name: &str,
        m: usize,
        u: usize,
        trials: usize,
        seed: u64,
        sinr_db: Option<Vec<f64>>,
        n: usize,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut spec = SweepSpec { m_values: vec![m], n_values: vec![n], u, trials, base_seed: seed, ..SweepSpec::new(scenario(scenario_name)?) };
        if let Some(g) = sinr_db {
            spec.sinr_db = g;
        }
        let recs = py.detach(|| experiments::run_sweep(&spec)).map_err(err)?;
        recs.iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("scenario", r.scenario.as_str())?;
                d.set_item("M", r.m)?;
                d.set_item("N", r.n)?;
                d.set_item("U", r.u)?;
                d.set_item("sinr_db", r.sinr_db)?;
                d.set_item("trial", r.trial)?;
                d.set_item("seed", r.seed)?;
                d.set_item("status", &r.status)?;
                d.set_item("objective", r.objective)?;
                d.set_item("rot_w", r.rot_w)?;
                d.set_item("rot_theta", r.rot_theta)?;
                d.set_item("outer_iters", r.outer_iters)?;
                d.set_item("cert_pass", r.cert_pass)?;
                Ok(d)
            })
            .collect()
    }

    /// Alternating beamforming / phase-shift design with `n` RIS elements.
    #[pyfunction]
    #[pyo3(signature = (config, n = 8, init_seed = None))]
    fn ris_alternate<'py>(py: Python<'py>, config: &PyConfig, n: usize, init_seed: Option<u64>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config.inner.clone();
        let trace = py
            .detach(move || {
                let ris = scenarios::gen_ris_channels(&cfg, n)?;
                let seed = init_seed.unwrap_or(cfg.seed ^ 0xA5A5);
                scenarios::ris_alternate(&cfg, &ris, seed, scenarios::RIS_TOL, scenarios::RIS_MAX_OUTER, &SolverSettings::default())
            })
            .map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("objective", trace.iterations.iter().map(|i| i.objective).collect::<Vec<_>>())?;
        d.set_item("rot_w", trace.iterations.iter().map(|i| i.rot_w).collect::<Vec<_>>())?;
        d.set_item("rot_theta", trace.iterations.iter().map(|i| i.rot_theta).collect::<Vec<_>>())?;
        d.set_item("converged", trace.converged)?;
        let theta: Vec<C64> = scenarios::extract_theta(&trace.theta).map_err(err)?.iter().copied().collect();
        d.set_item("theta", theta)?;
        Ok(d)
    }
}
