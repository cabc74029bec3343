//! The subcommands as library functions returning a [`Report`].

use zslq::matcore::{Matrix, SymMatrix};
use zslq::mcsim::{homogeneous_cost, moment_ode_reference, simulate, verify_saddle, Perturbation, Player};
use zslq::riccati::{classify, solve_are, AREClassification, ClassifyOptions, GameSpec, SolveOptions};
use zslq::saddle::{synthesize, value_at, Diagnosis, SaddleOptions, SaddleSolution};
use zslq::stability::{is_l2_stable, scalar_stabilizer_interval, synthesize_stabilizer};
use zslq::{Error, SimConfig64};

use crate::problem::{ParseError, ProblemFile};
use crate::report::{
    matrix, rows, terms, AreEntry, Report, ResolvedConfig, SaddleSection, StabilitySection, StatusSection,
    ToolInfo, UncontrolledSection, ValueSection, VerificationSection, VerifyRow,
};

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    Parse = 2,
    NoStabilizingSolution = 3,
    RangeViolation = 4,
    StabilizerSearchInconclusive = 5,
    EtaNotSolvable = 6,
    SaddleViolation = 7,
    ValueMismatch = 8,
    StabilizerNotFound = 9,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Failure => "failure",
            Status::Parse => "parse-error",
            Status::NoStabilizingSolution => "no-stabilizing-solution",
            Status::RangeViolation => "range-violation",
            Status::StabilizerSearchInconclusive => "stabilizer-search-inconclusive",
            Status::EtaNotSolvable => "eta-not-solvable",
            Status::SaddleViolation => "saddle-violation",
            Status::ValueMismatch => "value-mismatch",
            Status::StabilizerNotFound => "stabilizer-not-found",
        }
    }

    pub fn of_diagnosis<T>(d: &Diagnosis<T>) -> Self {
        match d {
            Diagnosis::NoStabilizingSolution { .. } => Status::NoStabilizingSolution,
            Diagnosis::StabilizerSearchInconclusive { .. } => Status::StabilizerSearchInconclusive,
            Diagnosis::RangeViolation { .. } => Status::RangeViolation,
            Diagnosis::EtaNotSolvable { .. } => Status::EtaNotSolvable,
            Diagnosis::Numerical(_) => Status::Failure,
        }
    }

    fn section(self) -> StatusSection {
        StatusSection {
            code: self.code(),
            label: self.label().into(),
        }
    }
}

/// Failure before a report could be produced.
#[derive(Debug)]
pub enum CliError {
    Parse(ParseError),
    Usage(String),
    Numerical(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn status(&self) -> Status {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => Status::Parse,
            CliError::Numerical(Error::NotFound { .. }) => Status::StabilizerNotFound,
            CliError::Numerical(_) => Status::Failure,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numerical(e)
    }
}

/// Command-line overrides; `None` keeps the problem file or library default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
    pub stab_budget: Option<usize>,
    pub record_points: Option<usize>,
    pub perturbation: Option<f64>,
}

/// Default size of the unilateral gain deviations in `verify`.
pub const DEFAULT_PERTURBATION: f64 = 0.3;
/// Default number of recorded time points (the CSV series length).
pub const DEFAULT_RECORD_POINTS: usize = 401;

impl Overrides {
    pub fn resolve(&self, problem: &ProblemFile) -> ResolvedConfig {
        let so = SolveOptions::<f64>::default();
        let co = ClassifyOptions::<f64>::default();
        let sa = SaddleOptions::<f64>::default();
        ResolvedConfig {
            are_tol: self.tol.unwrap_or(so.tol),
            residual_tol: co.residual_tol,
            range_tol: sa.range_tol,
            sign_tol: co.sign_tol,
            stab_budget: self.stab_budget.unwrap_or(co.stab_budget),
            search_seed: co.seed,
            random_seeds: so.random_seeds,
            max_iter: so.max_iter,
            range_points: sa.range_points,
            dt: self.dt.unwrap_or(problem.sim.dt),
            horizon: self.horizon.unwrap_or(problem.sim.horizon),
            paths: self.paths.unwrap_or(problem.sim.paths),
            seed: self.seed.unwrap_or(problem.sim.seed),
            record_points: self.record_points.unwrap_or(DEFAULT_RECORD_POINTS),
            perturbation: self.perturbation.unwrap_or(DEFAULT_PERTURBATION),
        }
    }
}

impl ResolvedConfig {
    pub fn saddle_options(&self) -> SaddleOptions<f64> {
        let mut o = SaddleOptions::default();
        o.solve.tol = self.are_tol;
        o.solve.random_seeds = self.random_seeds;
        o.solve.max_iter = self.max_iter;
        o.classify = self.classify_options();
        o.range_tol = self.range_tol;
        o.range_points = self.range_points;
        o
    }

    pub fn classify_options(&self) -> ClassifyOptions<f64> {
        ClassifyOptions {
            stab_budget: self.stab_budget,
            seed: self.search_seed,
            residual_tol: self.residual_tol,
            range_tol: self.range_tol,
            sign_tol: self.sign_tol,
        }
    }

    pub fn sim(&self) -> SimConfig64 {
        SimConfig64 {
            dt: self.dt,
            horizon: self.horizon,
            paths: self.paths,
            seed: self.seed,
            antithetic: false,
            record_points: self.record_points,
        }
    }
}

fn blank(command: &str, problem: &ProblemFile, config: ResolvedConfig) -> Report {
    Report {
        tool: ToolInfo::default(),
        command: command.into(),
        config,
        problem: problem.clone(),
        stability: None,
        are_solutions: Vec::new(),
        saddle: None,
        verification: None,
        diagnostics: Vec::new(),
        status: Status::Ok.section(),
    }
}

fn stability_section(spec: &GameSpec<f64>) -> Result<StabilitySection, CliError> {
    let rep = is_l2_stable(&spec.uncontrolled())?;
    let finite = |x: f64| x.is_finite().then_some(x);
    Ok(StabilitySection {
        uncontrolled: UncontrolledSection {
            stable: rep.stable,
            spectral_abscissa: rep.spectral_abscissa,
            lyapunov_residual: rep.residual_norm,
            boundary: rep.boundary,
        },
        stabilizer_interval: scalar_stabilizer_interval(&spec.controlled()).map(|(lo, hi)| (finite(lo), finite(hi))),
        theta: None,
        stabilizer: None,
        closed_loop_abscissa: None,
        synthesized: None,
    })
}

fn are_entry(p: &SymMatrix<f64>, c: &AREClassification<f64>) -> AreEntry {
    AreEntry {
        p: rows(p.as_matrix()),
        residual_norm: c.residual_norm,
        range_ok: c.range_ok,
        sign_ok: c.sign_ok,
        stabilizing: c.stabilizing,
        inconclusive: c.inconclusive,
        projector_rank: c.projector_rank,
        base_gain: rows(&c.base_gain),
        gain: c.gain.as_ref().map(rows),
        pi: c.pi.as_ref().map(rows),
        closed_loop_abscissa: c.closed_loop_abscissa,
    }
}

fn saddle_section(sol: &SaddleSolution<f64>, x0: &[f64]) -> SaddleSection {
    SaddleSection {
        p: rows(sol.p.as_matrix()),
        theta1: rows(&sol.theta1()),
        theta2: rows(&sol.theta2()),
        pi: rows(&sol.pi),
        eta: terms(&sol.eta),
        u_star: terms(&sol.u_star),
        value: ValueSection {
            p: rows(sol.value.p.as_matrix()),
            linear: sol.value.linear.clone(),
            constant: sol.value.constant,
            at_x0: value_at(sol, x0),
        },
        a_hat_abscissa: sol.a_hat_abscissa,
    }
}

/// `check-stability`: L²-stability of `[A, C]`, and either the verdict for
/// `theta` or a synthesized stabilizer.
pub fn cmd_check_stability(
    problem: &ProblemFile,
    theta: Option<&Matrix<f64>>,
    ov: &Overrides,
) -> Result<Report, CliError> {
    let spec = problem.to_spec()?;
    let cfg = ov.resolve(problem);
    let mut report = blank("check-stability", problem, cfg);
    let mut st = stability_section(&spec)?;
    let sys = spec.controlled();
    match theta {
        Some(th) => {
            if th.shape() != (spec.control_dim(), spec.state_dim()) {
                return Err(CliError::Usage(format!(
                    "theta is {}x{}, expected {}x{}",
                    th.rows(),
                    th.cols(),
                    spec.control_dim(),
                    spec.state_dim()
                )));
            }
            let rep = is_l2_stable(&sys.closed_loop(th))?;
            st.theta = Some(rows(th));
            st.stabilizer = Some(rep.stable);
            st.closed_loop_abscissa = Some(rep.spectral_abscissa);
        }
        None => {
            let th = synthesize_stabilizer(&sys, cfg.stab_budget, cfg.search_seed)?;
            st.closed_loop_abscissa = Some(sys.closed_loop(&th).abscissa());
            st.synthesized = Some(rows(&th));
        }
    }
    report.stability = Some(st);
    Ok(report)
}

fn solve_into(
    report: &mut Report,
    spec: &GameSpec<f64>,
    cfg: &ResolvedConfig,
) -> Result<Option<SaddleSolution<f64>>, CliError> {
    report.stability = Some(stability_section(spec)?);
    let opts = cfg.saddle_options();
    let sols = solve_are(spec, &opts.solve)?;
    for p in &sols {
        report.are_solutions.push(are_entry(p, &classify(spec, p, &opts.classify)));
    }
    match synthesize(spec, &opts) {
        Ok(sol) => {
            report.saddle = Some(saddle_section(&sol, &report.problem.x0));
            Ok(Some(sol))
        }
        Err(d) => {
            report.diagnostics.push(d.to_string());
            report.status = Status::of_diagnosis(&d).section();
            Ok(None)
        }
    }
}

/// `solve`: every ARE solution with its classification and, when one is
/// stabilizing, the saddle point.
pub fn cmd_solve(problem: &ProblemFile, ov: &Overrides) -> Result<Report, CliError> {
    let spec = problem.to_spec()?;
    let cfg = ov.resolve(problem);
    let mut report = blank("solve", problem, cfg);
    solve_into(&mut report, &spec, &cfg)?;
    Ok(report)
}

fn same_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(r, s)| {
            r.len() == s.len() && r.iter().zip(s).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
        })
}

/// The saddle point recorded in `prior`, recomputed from `problem`.
fn saddle_from_prior(problem: &ProblemFile, prior: &Report) -> Result<SaddleSolution<f64>, CliError> {
    if prior.problem != *problem {
        return Err(CliError::Usage("report was produced for a different problem".into()));
    }
    let Some(sd) = &prior.saddle else {
        return Err(CliError::Usage(format!(
            "report has no saddle point (status {})",
            prior.status.label
        )));
    };
    let spec = problem.to_spec()?;
    let sol = synthesize(&spec, &prior.config.saddle_options()).map_err(|d| CliError::Usage(format!("re-solve failed: {d}")))?;
    if !same_rows(&rows(sol.p.as_matrix()), &sd.p) {
        return Err(CliError::Usage("report P does not match the problem".into()));
    }
    let pi = matrix(&sd.pi, sol.pi.rows(), sol.pi.cols());
    if pi == sol.pi {
        return Ok(sol);
    }
    Ok(sol.with_pi(&spec, pi)?)
}

fn default_perturbations(spec: &GameSpec<f64>, sol: &SaddleSolution<f64>, delta: f64) -> Vec<(String, Perturbation<f64>)> {
    let n = spec.state_dim();
    let mut out = Vec::new();
    for (player, m, name) in [(Player::One, spec.m1(), "1"), (Player::Two, spec.m2(), "2")] {
        if m == 0 {
            continue;
        }
        for sign in [-1.0, 1.0] {
            let d = Matrix::from_fn(m, n, |_, _| sign * delta);
            let th = match player {
                Player::One => sol.theta1(),
                Player::Two => sol.theta2(),
            };
            let label = format!("theta{name} = {}", serde_json::to_string(&(&th + &d).to_rows()).unwrap());
            out.push((label, Perturbation::gain(player, d)));
        }
    }
    out
}

fn verify_into(
    report: &mut Report,
    spec: &GameSpec<f64>,
    sol: &SaddleSolution<f64>,
    cfg: &ResolvedConfig,
) -> Result<(), CliError> {
    let x0 = report.problem.x0.clone();
    let sim = cfg.sim();
    let homogeneous = spec.forcing().is_zero();
    let ctl = spec.controlled();
    let mut arms = Vec::new();
    let mut labels = Vec::new();
    for (label, p) in default_perturbations(spec, sol, cfg.perturbation) {
        let zslq::mcsim::Deviation::Gain(d) = &p.deviation else { unreachable!() };
        let mut th = sol.theta.clone();
        let off = if p.player == Player::One { 0 } else { spec.m1() };
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                th[(off + i, j)] += d[(i, j)];
            }
        }
        if is_l2_stable(&ctl.closed_loop(&th))?.stable {
            labels.push((label, th));
            arms.push(p);
        } else {
            report.diagnostics.push(format!("skipped {label}: not a stabilizer"));
        }
    }
    let saddle = verify_saddle(spec, sol, &arms, &x0, &sim)?;
    let v = value_at(sol, &x0);
    let j = saddle.j_star;
    let slack = 3.0 * j.std_error + saddle.j_star_tail_bound + 10.0 * cfg.dt;
    let value_confirmed = (j.mean - v).abs() <= slack;
    let mut table = vec![VerifyRow {
        label: "saddle (theta*, u*)".into(),
        estimate: j.mean,
        std_error: j.std_error,
        paired_diff: None,
        paired_se: None,
        independent_se: None,
        tail_bound: saddle.j_star_tail_bound,
        oracle: Some(v),
        verdict: if value_confirmed { "pass" } else { "FAIL" }.into(),
    }];
    for (arm, (label, th)) in saddle.arms.iter().zip(&labels) {
        let oracle = if homogeneous { homogeneous_cost(spec, th, &x0).ok() } else { None };
        table.push(VerifyRow {
            label: label.clone(),
            estimate: arm.cost.mean,
            std_error: arm.cost.std_error,
            paired_diff: Some(arm.paired_diff.mean),
            paired_se: Some(arm.paired_diff.std_error),
            independent_se: Some(arm.independent_se),
            tail_bound: arm.tail_bound,
            oracle,
            verdict: if arm.holds { "pass" } else { "FAIL" }.into(),
        });
    }
    let ens = simulate(spec, &sol.theta, &sol.u_star, &x0, &sim)?;
    let reference = homogeneous.then(|| {
        let cl = ctl.closed_loop(&sol.theta);
        moment_ode_reference(&cl.a, &cl.c, &x0, &ens.times)
    });
    let mut csv = String::from("t,second_moment,std_error,moment_ode\n");
    for (k, &t) in ens.times.iter().enumerate() {
        let e = ens.second_moment_estimate(k);
        let oracle = reference
            .as_ref()
            .map_or(String::new(), |r| format!("{}", r[k].as_matrix().trace()));
        csv.push_str(&format!("{t},{},{},{oracle}\n", e.mean, e.std_error));
    }
    let saddle_holds = saddle.all_hold();
    if let Err(e) = saddle.check() {
        report.diagnostics.push(e.to_string());
        report.status = Status::SaddleViolation.section();
    } else if !value_confirmed {
        report.diagnostics.push(format!(
            "Monte-Carlo cost {} differs from V(x0) = {v} by more than {slack:e}",
            j.mean
        ));
        report.status = Status::ValueMismatch.section();
    }
    report.verification = Some(VerificationSection {
        rows: table,
        value_confirmed,
        saddle_holds,
        csv,
    });
    Ok(())
}

/// `verify`: Monte-Carlo check of the saddle point recorded in `prior`.
pub fn cmd_verify(problem: &ProblemFile, prior: &Report, ov: &Overrides) -> Result<Report, CliError> {
    let spec = problem.to_spec()?;
    let sol = saddle_from_prior(problem, prior)?;
    let cfg = ov.resolve(problem);
    let mut report = prior.clone();
    report.command = "verify".into();
    report.tool = ToolInfo::default();
    report.config = ResolvedConfig {
        are_tol: prior.config.are_tol,
        residual_tol: prior.config.residual_tol,
        range_tol: prior.config.range_tol,
        sign_tol: prior.config.sign_tol,
        stab_budget: prior.config.stab_budget,
        search_seed: prior.config.search_seed,
        random_seeds: prior.config.random_seeds,
        max_iter: prior.config.max_iter,
        range_points: prior.config.range_points,
        ..cfg
    };
    report.verification = None;
    let cfg = report.config;
    verify_into(&mut report, &spec, &sol, &cfg)?;
    Ok(report)
}

/// `report`: `solve` followed by `verify` when a saddle point exists.
pub fn cmd_report(problem: &ProblemFile, ov: &Overrides) -> Result<Report, CliError> {
    let spec = problem.to_spec()?;
    let cfg = ov.resolve(problem);
    let mut report = blank("report", problem, cfg);
    if let Some(sol) = solve_into(&mut report, &spec, &cfg)? {
        verify_into(&mut report, &spec, &sol, &cfg)?;
    }
    Ok(report)
}
