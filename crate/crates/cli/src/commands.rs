//! One pipeline per subcommand. Every JSON report is wrapped in an envelope
//! carrying the command name and the effective configuration; no timings
//! are recorded, so identical inputs give identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use switchreg::closedform::{counterexample_pair, counterexample_spec, verify_counterexample, CounterexampleReport};
use switchreg::io::write_fields_csv;
use switchreg::regularity::{classify_point, fit_line, LineFit, RegularityReport};
use switchreg::switching::{
    construct_nonminimal, continuation_path, continuation_solve, example2_spec, partition_sets, residual_report,
    solve_minimal, validate_spec, LabelCounts, Method, PartitionConfig, ProblemSpec, ResidualSummary, SolutionPair,
    SolverConfig, ValidationReport,
};
use switchreg::{Expression, GridSpec};

use crate::config::{load_config, RunConfig, SolveMethod};
use crate::{json, CliError, Cli, Command};

/// Exclusion radius around the origin for the counterexample checks.
pub const COUNTEREXAMPLE_RHO: f64 = 0.05;
/// Default nodes per axis of the counterexample grid.
pub const COUNTEREXAMPLE_N: usize = 257;
/// Default nodes per axis for closed-form regularity runs.
pub const REGULARITY_N: usize = 1025;
/// Accepted slope interval and fit quality of the violation rate.
pub const RATE_SLOPE: (f64, f64) = (0.8, 1.2);
pub const RATE_R_SQUARED: f64 = 0.95;

/// `100 h² (1 + |ln h|)`
pub fn counterexample_tol(h: f64) -> f64 {
    100.0 * h * h * (1.0 + h.ln().abs())
}

struct Context {
    command: Command,
    config: RunConfig,
    n: Option<usize>,
    out: PathBuf,
    quiet: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    n_override: Option<usize>,
    report: &'a T,
}

impl Context {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, report: &T) -> Result<(), CliError> {
        if !self.config.output.json() {
            return Ok(());
        }
        let env = Envelope {
            command: self.command.name(),
            config: &self.config,
            n_override: self.n,
            report,
        };
        let text = json::to_string(&env).map_err(|e| CliError::Io {
            path: self.path(name),
            source: e.into(),
        })?;
        let path = self.path(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })
    }

    fn write_csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        if !self.config.output.csv() {
            return Ok(());
        }
        let path = self.path(name);
        let io_err = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    fn solver(&self) -> SolverConfig {
        self.config.solver.solver_config()
    }

    /// Builds the configured problem and checks its data, writing
    /// `validation.json` either way.
    fn validated_spec(&self) -> Result<ProblemSpec, CliError> {
        let spec = self.config.problem_spec()?;
        let report = validate_spec(&spec);
        self.write_json("validation.json", &report)?;
        if !report.passed {
            return Err(CliError::Check(validation_message(&report)));
        }
        Ok(spec)
    }
}

fn validation_message(r: &ValidationReport) -> String {
    if !r.loop_ok {
        let n = &r.worst_loop;
        format!(
            "loop condition violated: psi1 + psi2 = {} at ({}, {})",
            n.value, n.x, n.y
        )
    } else {
        let n = &r.worst_compatibility;
        format!(
            "boundary compatibility violated: gap {} at ({}, {})",
            n.value, n.x, n.y
        )
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.n {
        if n < 3 {
            return Err(CliError::Config(format!("--n: need at least 3 nodes, got {n}")));
        }
        config.override_n(n);
        config.validate()?;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    let out = config.output.dir.clone();
    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let ctx = Context {
        command: cli.command,
        config,
        n: cli.n,
        out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Solve => solve(&ctx),
        Command::Residuals => residuals(&ctx),
        Command::Regularity => regularity(&ctx),
        Command::Counterexample => counterexample(&ctx),
        Command::SweepEps => sweep_eps(&ctx),
        Command::Nonminimal => nonminimal(&ctx),
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Penalized => "penalized",
        Method::Minimal => "minimal",
        Method::ClosedForm => "closed-form",
        Method::NonMinimal => "non-minimal",
    }
}

/// Runs the configured method(s); `both` solves the minimal pipeline first.
fn run_methods(ctx: &Context, spec: &ProblemSpec) -> Result<Vec<SolutionPair>, CliError> {
    let cfg = ctx.solver();
    let schedule = &ctx.config.solver.eps_schedule;
    let mut pairs = Vec::new();
    if matches!(ctx.config.solver.method, SolveMethod::Minimal | SolveMethod::Both) {
        pairs.push(solve_minimal(spec, &cfg)?);
    }
    if matches!(ctx.config.solver.method, SolveMethod::Penalized | SolveMethod::Both) {
        pairs.push(continuation_solve(spec, schedule, &cfg)?);
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct SolveRecord {
    method: Method,
    eps_schedule: Vec<f64>,
    iterations: Vec<usize>,
    stopping_residual: f64,
    summary: ResidualSummary,
}

#[derive(Serialize)]
struct SolveReport {
    grid: GridSpec,
    scale: f64,
    passed: bool,
    results: Vec<SolveRecord>,
    /// Max-norm difference of the two solutions when both methods ran.
    max_diff: Option<f64>,
}

fn solve_records(ctx: &Context, spec: &ProblemSpec, pairs: &[SolutionPair]) -> Result<SolveReport, CliError> {
    let mut results = Vec::new();
    for p in pairs {
        let summary = residual_report(spec, p)?.summary;
        ctx.say(format!(
            "{}: eq1 {:.3e}  eq2 {:.3e}  eq3 {:.3e}  tol {:.3e}  {}",
            method_name(p.method),
            summary.eq1_max,
            summary.eq2_max,
            summary.eq3_max,
            summary.tol_sys,
            if summary.system_ok { "ok" } else { "FAILED" }
        ));
        results.push(SolveRecord {
            method: p.method,
            eps_schedule: p.eps_schedule.clone(),
            iterations: p.iterations.clone(),
            stopping_residual: p.residual,
            summary,
        });
    }
    let max_diff = match pairs {
        [a, b] => Some(a.max_diff(b)?),
        _ => None,
    };
    if let Some(d) = max_diff {
        ctx.say(format!("max difference between methods: {d:.3e}"));
    }
    Ok(SolveReport {
        grid: *spec.grid(),
        scale: spec.scale(),
        passed: results.iter().all(|r| r.summary.system_ok),
        results,
        max_diff,
    })
}

fn residual_failure(report: &SolveReport) -> Result<(), CliError> {
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Check("system residual exceeds tolerance".into()))
    }
}

fn solve(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.validated_spec()?;
    let pairs = run_methods(ctx, &spec)?;
    for p in &pairs {
        ctx.write_csv(&format!("solution_{}.csv", method_name(p.method)), |w| p.write_csv(&spec, w))?;
    }
    let report = solve_records(ctx, &spec, &pairs)?;
    ctx.write_json("residuals.json", &report)?;
    residual_failure(&report)
}

#[derive(Serialize)]
struct PartitionSummary {
    method: Method,
    tau: f64,
    tau_loop: f64,
    counts: LabelCounts,
    /// `[x, y]` of each meeting point.
    meeting_points: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct ResidualsReport {
    residuals: SolveReport,
    partitions: Vec<PartitionSummary>,
}

fn residuals(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.validated_spec()?;
    let pairs = run_methods(ctx, &spec)?;
    let residuals = solve_records(ctx, &spec, &pairs)?;
    let grid = *spec.grid();
    let mut partitions = Vec::new();
    for p in &pairs {
        let rep = residual_report(&spec, p)?;
        let f = &rep.fields;
        ctx.write_csv(&format!("residuals_{}.csv", method_name(p.method)), |w| {
            write_fields_csv(
                w,
                &["theta1", "theta2", "op1", "op2", "eq1", "eq2", "eq3"],
                &[&f.theta1, &f.theta2, &f.op1, &f.op2, &f.eq1, &f.eq2, &f.eq3],
            )
        })?;
        let part = partition_sets(&spec, p, &PartitionConfig::default())?;
        let c = &part.counts;
        ctx.say(format!(
            "{}: omega1 {}  omega2 {}  omega12 {}  L0 {}  boundary-L {}  meeting points {}",
            method_name(p.method),
            c.omega1,
            c.omega2,
            c.omega12,
            c.l0,
            c.boundary_l,
            part.meeting_points.len()
        ));
        partitions.push(PartitionSummary {
            method: p.method,
            tau: part.tau,
            tau_loop: part.tau_loop,
            counts: part.counts.clone(),
            meeting_points: part
                .meeting_points
                .iter()
                .map(|&(i, j)| [grid.x(i), grid.y(j)])
                .collect(),
        });
    }
    let passed = residuals.passed;
    ctx.write_json("residuals.json", &ResidualsReport { residuals, partitions })?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("system residual exceeds tolerance".into()))
    }
}

/// Worker count for independent probe analyses: `SWITCHREG_THREADS`, or
/// the available parallelism.
fn thread_cap() -> Result<usize, CliError> {
    match std::env::var("SWITCHREG_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("SWITCHREG_THREADS: expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Maps `f` over `items` on up to `threads` scoped workers; results keep the
/// input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.min(items.len()).max(1);
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                s.spawn(move || {
                    items
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(threads)
                        .map(|(k, item)| (k, f(item)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("probe worker panicked") {
                slots[k] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[derive(Serialize)]
struct RegularityOutput {
    /// `closed-form` for the counterexample pair, otherwise the solver used.
    source: Method,
    grid: GridSpec,
    passed: bool,
    reports: Vec<RegularityReport>,
}

fn regularity(ctx: &Context) -> Result<(), CliError> {
    let (spec, pair) = if ctx.config.problem.is_some() {
        let spec = ctx.validated_spec()?;
        let pair = match ctx.config.solver.method {
            SolveMethod::Penalized => continuation_solve(&spec, &ctx.config.solver.eps_schedule, &ctx.solver())?,
            _ => solve_minimal(&spec, &ctx.solver())?,
        };
        (spec, pair)
    } else {
        let grid = GridSpec::square(1.0, ctx.n.unwrap_or(REGULARITY_N))?;
        (counterexample_spec(grid)?, counterexample_pair(grid))
    };
    let rc = ctx.config.regularity.regularity_config();
    let probes = &ctx.config.regularity.probes;
    let results = par_map(probes, thread_cap()?, |&[x, y]| classify_point(&spec, &pair, (x, y), &rc));
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        ctx.say(format!(
            "({}, {}): {}  S exponent {:.3} (R² {:.3})  |A_r| log slope {:.3e} (R² {:.3})  bound {}",
            r.center.0,
            r.center.1,
            serde_json::to_value(r.classification).map_or_else(|_| String::new(), |v| v.as_str().unwrap_or("").to_string()),
            r.s_fit.exponent,
            r.s_fit.r_squared,
            r.log_fit.slope,
            r.log_fit.r_squared,
            if r.bmo.holds { "holds" } else { "VIOLATED" }
        ));
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.bmo.holds);
    ctx.write_json(
        "regularity.json",
        &RegularityOutput {
            source: pair.method,
            grid: *spec.grid(),
            passed,
            reports,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("S(r)/r² bound violated".into()))
    }
}

#[derive(Serialize)]
struct CounterexampleOutput {
    passed: bool,
    checks: CounterexampleReport,
    solver: SolverComparison,
}

#[derive(Serialize)]
struct SolverComparison {
    /// `max_i ‖u^i_h - u^i‖∞` for the minimal solver against the closed form.
    max_error: f64,
    tol: f64,
    passed: bool,
    iterations: Vec<usize>,
    summary: ResidualSummary,
}

fn counterexample(ctx: &Context) -> Result<(), CliError> {
    let grid = GridSpec::square(1.0, ctx.n.unwrap_or(COUNTEREXAMPLE_N))?;
    let tol = counterexample_tol(grid.h());
    let checks = verify_counterexample(grid, COUNTEREXAMPLE_RHO, tol)?;
    ctx.say(format!(
        "closed form: eq1 {:.3e}  eq2 {:.3e}  lap {:.3e}  tol {:.3e}  identities {:.1e}/{:.1e}/{:.1e}  {}",
        checks.eq1_max,
        checks.eq2_max,
        checks.lap_max,
        tol,
        checks.w_identity_max,
        checks.q1_identity_max,
        checks.q3_identity_max,
        if checks.passed { "ok" } else { "FAILED" }
    ));

    let spec = counterexample_spec(grid)?;
    let exact = counterexample_pair(grid);
    let pair = solve_minimal(&spec, &ctx.solver())?;
    let max_error = pair.max_diff(&exact)?;
    let summary = residual_report(&spec, &pair)?.summary;
    let solver = SolverComparison {
        max_error,
        tol,
        passed: max_error <= tol,
        iterations: pair.iterations.clone(),
        summary,
    };
    ctx.say(format!(
        "minimal solver: max error {:.3e}  {}",
        max_error,
        if solver.passed { "ok" } else { "FAILED" }
    ));

    ctx.write_csv("counterexample.csv", |w| exact.write_csv(&spec, w))?;
    ctx.write_csv("counterexample_minimal.csv", |w| pair.write_csv(&spec, w))?;
    let passed = checks.passed && solver.passed;
    ctx.write_json(
        "counterexample.json",
        &CounterexampleOutput {
            passed,
            checks,
            solver,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("counterexample checks failed".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    /// `max_i max(0, -θ^i)`
    pub violation: f64,
    pub newton_iterations: usize,
    pub eq1_max: f64,
    pub eq2_max: f64,
}

#[derive(Serialize)]
struct SweepReport {
    rows: Vec<SweepRow>,
    /// Fit of `ln violation` against `ln eps`; absent when a violation is zero.
    fit: Option<LineFit>,
    slope_range: (f64, f64),
    min_r_squared: f64,
    passed: bool,
}

/// Constraint violation of each stage of a continuation path.
pub fn sweep_rows(spec: &ProblemSpec, path: &[SolutionPair]) -> Result<Vec<SweepRow>, CliError> {
    path.iter()
        .map(|p| {
            let s = residual_report(spec, p)?.summary;
            Ok(SweepRow {
                eps: p.eps_schedule[0],
                violation: (-s.theta_min).max(0.0),
                newton_iterations: p.iterations[0],
                eq1_max: s.eq1_max,
                eq2_max: s.eq2_max,
            })
        })
        .collect()
}

/// Log-log fit of violation against ε.
pub fn rate_fit(rows: &[SweepRow]) -> Result<Option<LineFit>, CliError> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.violation > 0.0)) {
        return Ok(None);
    }
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.violation.ln()).collect();
    Ok(Some(fit_line(&x, &y)?))
}

fn sweep_eps(ctx: &Context) -> Result<(), CliError> {
    let spec = ctx.validated_spec()?;
    let path = continuation_path(&spec, &ctx.config.solver.eps_schedule, &ctx.solver())?;
    let rows = sweep_rows(&spec, &path)?;
    for r in &rows {
        ctx.say(format!(
            "eps {:.6e}  violation {:.6e}  newton {}",
            r.eps, r.violation, r.newton_iterations
        ));
    }
    let fit = rate_fit(&rows)?;
    let passed = fit.as_ref().is_some_and(|f| {
        (RATE_SLOPE.0..=RATE_SLOPE.1).contains(&f.slope) && f.r_squared >= RATE_R_SQUARED
    });
    match &fit {
        Some(f) => ctx.say(format!("slope {:.4}  R² {:.4}", f.slope, f.r_squared)),
        None => ctx.say("no rate: violation vanishes at some eps"),
    }
    ctx.write_csv("sweep_eps.csv", |w| {
        writeln!(w, "eps,violation,newton_iterations")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{}",
                switchreg::io::fmt17(r.eps),
                switchreg::io::fmt17(r.violation),
                r.newton_iterations
            )?;
        }
        Ok(())
    })?;
    ctx.write_json(
        "sweep_eps.json",
        &SweepReport {
            rows,
            fit,
            slope_range: RATE_SLOPE,
            min_r_squared: RATE_R_SQUARED,
            passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("violation rate outside the accepted range".into()))
    }
}

#[derive(Serialize)]
struct FamilyMember {
    q: String,
    summary: ResidualSummary,
    /// `max_i max(u^i_min - v^i)`; nonpositive when the minimal solution lies below.
    minimal_excess: f64,
    minimal_below: bool,
}

#[derive(Serialize)]
struct NonminimalReport {
    grid: GridSpec,
    scale: f64,
    m: f64,
    minimal: ResidualSummary,
    below_tol: f64,
    members: Vec<FamilyMember>,
    /// Largest third-equation residual over the family.
    third_equation_max: f64,
    passed: bool,
}

fn nonminimal(ctx: &Context) -> Result<(), CliError> {
    let nm = &ctx.config.nonminimal;
    let grid = match &ctx.config.problem {
        Some(_) => ctx.config.grid()?,
        None => GridSpec::square(1.0, ctx.n.unwrap_or(65))?,
    };
    let psi = Expression::parse(&nm.psi)?;
    let g1 = Expression::parse(&nm.g1)?;
    let spec = example2_spec(&psi, nm.m, &g1, grid)?;
    let report = validate_spec(&spec);
    if !report.passed {
        return Err(CliError::Check(validation_message(&report)));
    }
    let cfg = ctx.solver();
    let minimal = solve_minimal(&spec, &cfg)?;
    let min_summary = residual_report(&spec, &minimal)?.summary;
    let below_tol = 1e-6 * spec.scale();
    let mut members = Vec::new();
    for q in &nm.q {
        let qe = Expression::parse(q)?;
        let v = construct_nonminimal(&psi, nm.m, &qe, &g1, grid, &cfg.elliptic)?;
        let summary = residual_report(&spec, &v)?.summary;
        let d1 = minimal.u1.sub(&v.u1)?;
        let d2 = minimal.u2.sub(&v.u2)?;
        let minimal_excess = d1
            .values()
            .iter()
            .chain(d2.values())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        ctx.say(format!(
            "q = {q}: eq1 {:.3e}  eq2 {:.3e}  third equation {:.3e}  minimal excess {:.3e}",
            summary.eq1_max, summary.eq2_max, summary.eq3_max, minimal_excess
        ));
        members.push(FamilyMember {
            q: q.clone(),
            summary,
            minimal_excess,
            minimal_below: minimal_excess <= below_tol,
        });
    }
    let third_equation_max = members.iter().map(|m| m.summary.eq3_max).fold(0.0, f64::max);
    let passed = min_summary.system_ok
        && min_summary.minimal_ok
        && members.iter().all(|m| m.summary.system_ok && m.minimal_below)
        && third_equation_max >= 0.5 * nm.m;
    ctx.say(format!(
        "minimal: eq1 {:.3e}  eq2 {:.3e}  eq3 {:.3e}  {}",
        min_summary.eq1_max,
        min_summary.eq2_max,
        min_summary.eq3_max,
        if passed { "ok" } else { "FAILED" }
    ));
    ctx.write_csv("nonminimal_minimal.csv", |w| minimal.write_csv(&spec, w))?;
    ctx.write_json(
        "nonminimal.json",
        &NonminimalReport {
            grid,
            scale: spec.scale(),
            m: nm.m,
            minimal: min_summary,
            below_tol,
            members,
            third_equation_max,
            passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("non-uniqueness family checks failed".into()))
    }
}

/// Reads a file written by a command, for callers comparing runs.
pub fn read_output(dir: &Path, name: &str) -> std::io::Result<Vec<u8>> {
    fs::read(dir.join(name))
}
