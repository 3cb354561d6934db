//! Batch driver: JSON run configurations, continuation sweeps with field and
//! report output, the property-check suite and report re-tabulation.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a solve
//! fails (or a check does not pass).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{diameter_scaling, energy_report, AsymptoticsReport, ReportRow};
use crate::energy::{hardy_check, Problem};
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, sample_profile, write_csv, Field, Grid, Profile};
use crate::model::{
    make_cylinder_ring, make_far_field_ring, make_lake, make_outside_ball_ring, make_whole_space_ring,
    predicted_target, DomainGeometry, LakeForcing, NodalValues, Obstacle, ProblemSpec,
    WeightProfile,
};
use crate::solver::{cold_start, minimize, SolveResult, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVE: i32 = 2;

/// File names inside an output directory.
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TRACE_JSONL: &str = "trace.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioConfig {
    WholeSpaceRing { w: f64, kappa: f64 },
    /// Inside the unit cylinder; the rectangle's `x2` range sets the height.
    CylinderRing { w: f64, kappa: f64 },
    /// Outside the unit ball, which is cut out of the rectangle.
    OutsideBallRing { w: f64, kappa: f64 },
    FarFieldRing { w: f64, offset: f64 },
    /// Lake of depth `depth` with prescribed circulation; `sup_b` defaults to
    /// the largest sampled depth.
    Lake {
        depth: WeightProfile,
        kappa: f64,
        #[serde(default)]
        sup_b: Option<f64>,
    },
    /// Lake driven by a negative background stream function on the grid nodes.
    LakeBackground { depth: WeightProfile, psi0: NodalValues },
}

impl ScenarioConfig {
    fn is_ring(&self) -> bool {
        !matches!(self, ScenarioConfig::Lake { .. } | ScenarioConfig::LakeBackground { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::WholeSpaceRing { .. } => "whole_space_ring",
            ScenarioConfig::CylinderRing { .. } => "cylinder_ring",
            ScenarioConfig::OutsideBallRing { .. } => "outside_ball_ring",
            ScenarioConfig::FarFieldRing { .. } => "far_field_ring",
            ScenarioConfig::Lake { .. } => "lake",
            ScenarioConfig::LakeBackground { .. } => "lake_background",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckToggles {
    pub gradient: bool,
    pub nehari: bool,
    pub lower_bound: bool,
    pub hardy: bool,
    pub identities: bool,
}

impl Default for CheckToggles {
    fn default() -> Self {
        Self { gradient: true, nehari: true, lower_bound: true, hardy: true, identities: true }
    }
}

/// Fault injection for exercising the check suite.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestHooks {
    /// Scale the analytic gradient by `1 + 1e-3` inside the gradient check.
    pub corrupt_gradient: bool,
}

fn default_exponent() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Strictly decreasing, each in `(0, 1)`.
    pub epsilons: Vec<f64>,
    /// Cells along `x1` and `x2`.
    pub resolution: [usize; 2],
    /// Defaults to `(0, 6) x (-6, 6)` for rings, `(0, 1) x (-3, 3)` for the
    /// cylinder and `(-1, 1)^2` for lakes.
    #[serde(default)]
    pub rectangle: Option<Rectangle>,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub checks: CheckToggles,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "is_default_hooks")]
    pub test_hooks: TestHooks,
}

fn is_default_hooks(h: &TestHooks) -> bool {
    *h == TestHooks::default()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParameter { name, reason: reason.into() });
        if self.epsilons.is_empty() {
            return bad("epsilons", "must not be empty");
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("epsilons", "every value must lie in (0, 1)");
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("epsilons", "must be strictly decreasing");
        }
        if self.resolution.iter().any(|&c| c < 8) {
            return bad("resolution", "need at least 8 cells per axis");
        }
        self.solver.validate()
    }

    pub fn rectangle(&self) -> Rectangle {
        self.rectangle.unwrap_or(match self.scenario {
            ScenarioConfig::CylinderRing { .. } => Rectangle { x1: [0.0, 1.0], x2: [-3.0, 3.0] },
            _ if self.scenario.is_ring() => Rectangle { x1: [0.0, 6.0], x2: [-6.0, 6.0] },
            _ => Rectangle { x1: [-1.0, 1.0], x2: [-1.0, 1.0] },
        })
    }

    /// Problem specification at the first `epsilon`.
    pub fn spec(&self) -> Result<ProblemSpec> {
        let rect = self.rectangle();
        let meridian = || DomainGeometry { axis: true, truncated: true, ..DomainGeometry::rectangle(rect.x1, rect.x2) };
        let spec = match &self.scenario {
            ScenarioConfig::WholeSpaceRing { w, kappa } => make_whole_space_ring(*w, *kappa, meridian())?,
            ScenarioConfig::CylinderRing { w, kappa } => {
                if rect.x1 != [0.0, 1.0] || rect.x2[0] != -rect.x2[1] {
                    return Err(Error::InvalidGeometry("cylinder ring needs the rectangle (0, 1) x (-z, z)".into()));
                }
                make_cylinder_ring(*w, *kappa, rect.x2[1])?
            }
            ScenarioConfig::OutsideBallRing { w, kappa } => make_outside_ball_ring(
                *w,
                *kappa,
                meridian().with_obstacle(Obstacle::Disc { center: [0.0, 0.0], radius: 1.0 }),
            )?,
            ScenarioConfig::FarFieldRing { w, offset } => make_far_field_ring(*w, *offset, meridian())?,
            ScenarioConfig::Lake { depth, kappa, sup_b } => {
                let geometry = DomainGeometry::rectangle(rect.x1, rect.x2);
                let sup_b = match sup_b {
                    Some(s) => *s,
                    None => {
                        let grid = Grid::new(&geometry, self.resolution[0], self.resolution[1])?;
                        let b = sample_profile(&grid, Profile::Weight(depth))?;
                        b.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    }
                };
                make_lake(geometry, depth.clone(), sup_b, LakeForcing::Circulation(*kappa))?
            }
            ScenarioConfig::LakeBackground { depth, psi0 } => make_lake(
                DomainGeometry::rectangle(rect.x1, rect.x2),
                depth.clone(),
                1.0,
                LakeForcing::Background(psi0.clone()),
            )?,
        };
        spec.with_epsilon(self.epsilons[0])?.with_exponent(self.exponent)
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::from_spec(&self.spec()?, self.resolution[0], self.resolution[1])
    }
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub scenario: String,
    pub resolution: [usize; 2],
    pub report: AsymptoticsReport,
    /// `(epsilon, message)` for every solve that failed; the sweep stops at
    /// the first one.
    pub failures: Vec<(f64, String)>,
}

#[derive(Serialize)]
struct TraceLine {
    epsilon: f64,
    iteration: usize,
    energy: f64,
    gradient: f64,
    step: f64,
    cg_iterations: usize,
}

/// Outcome of a completed sweep.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ReportFile,
    pub results: Vec<SolveResult>,
    pub exit_code: i32,
}

/// Run the continuation sweep of `cfg` in memory.
pub fn sweep(cfg: &RunConfig) -> Result<(Problem, Vec<SolveResult>, ReportFile)> {
    cfg.validate()?;
    let base = cfg.problem()?;
    let target = predicted_target(&base.disc.spec, base.grid())?;
    let mut results: Vec<SolveResult> = Vec::new();
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut failures = Vec::new();
    for &eps in &cfg.epsilons {
        let problem = base.at_epsilon(eps)?;
        let attempt = match results.last() {
            Some(prev) if cfg.solver.warm_start => Ok(prev.u.clone()),
            _ => cold_start(&problem),
        }
        .and_then(|u0| minimize(&problem, &u0, &cfg.solver))
        .and_then(|res| energy_report(&problem, &res, &target).map(|row| (res, row)));
        match attempt {
            Ok((res, row)) => {
                results.push(res);
                rows.push(row);
            }
            Err(e) => {
                failures.push((eps, e.to_string()));
                break;
            }
        }
    }
    let report = ReportFile {
        scenario: cfg.scenario.name().into(),
        resolution: cfg.resolution,
        report: AsymptoticsReport::new(target, rows),
        failures,
    };
    Ok((base, results, report))
}

/// Solve the sweep and write fields, traces and the report into `out`
/// (falling back to the configured directory, then `vortex-out`). Files are
/// staged in a temporary directory next to `out` and moved into place at the
/// end, so a failed run leaves nothing behind.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let out = out.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "vortex-out".into());
    if out.exists() && fs::read_dir(&out)?.next().is_some() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("output directory {} is not empty", out.display()),
        )));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new().prefix(".vortex-").tempdir_in(&parent)?;

    let (base, results, report) = sweep(cfg)?;
    let grid = base.grid();
    let mut trace = BufWriter::new(fs::File::create(staging.path().join(TRACE_JSONL))?);
    for (res, &eps) in results.iter().zip(&cfg.epsilons) {
        let problem = base.at_epsilon(eps)?;
        let u = Field::from_unknowns(grid, &res.u);
        let psi = problem.psi_nodes(&res.u);
        let vorticity = vorticity_nodes(&problem, &psi);
        let mut f = BufWriter::new(fs::File::create(staging.path().join(field_file_name(eps)))?);
        write_csv(grid, &[("u", &u), ("psi", &psi), ("vorticity", &vorticity)], &mut f)?;
        f.flush()?;
        for t in &res.trace {
            let line = TraceLine {
                epsilon: eps,
                iteration: t.iteration,
                energy: t.energy,
                gradient: t.gradient,
                step: t.step,
                cg_iterations: t.cg_iterations,
            };
            writeln!(trace, "{}", serde_json::to_string(&line)?)?;
        }
    }
    trace.flush()?;
    fs::write(staging.path().join(REPORT_JSON), report_json(&report)?)?;
    fs::write(staging.path().join(REPORT_CSV), report_csv(&report.report.rows))?;

    if out.exists() {
        fs::remove_dir(&out)?;
    }
    let staged = staging.keep();
    if let Err(e) = fs::rename(&staged, &out) {
        let _ = fs::remove_dir_all(&staged);
        return Err(e.into());
    }
    let exit_code = if report.failures.is_empty() && results.iter().all(|r| r.converged) { EXIT_OK } else { EXIT_SOLVE };
    Ok(RunOutcome { report, results, exit_code })
}

pub fn field_file_name(eps: f64) -> String {
    format!("field_eps_{eps}.csv")
}

/// `(b/eps^2) psi_+^p` at every node; zero on Dirichlet nodes.
fn vorticity_nodes(problem: &Problem, psi: &Field) -> Field {
    let grid = problem.grid();
    let s = 1.0 / (problem.epsilon * problem.epsilon);
    let b = &problem.disc.b_nodes.values;
    let values = (0..grid.node_count())
        .map(|k| if grid.is_dirichlet(k) || psi.values[k] <= 0.0 { 0.0 } else { s * b[k] * psi.values[k].powf(problem.p) })
        .collect();
    Field { values }
}

pub fn report_json(report: &ReportFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

const CSV_COLUMNS: &str = "epsilon,energy,kappa,kappa_ratio,energy_density,q2_over_b_peak,upper_bound_ratio,b_peak,\
peak_x1,peak_x2,centroid_x1,centroid_x2,diameter,diameter_over_eps,core_area,components,distance_to_boundary,\
iterations,gradient,nehari_residual,negative_nodes,converged";

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_COLUMNS);
    s.push('\n');
    for r in rows {
        let floats = [
            r.epsilon,
            r.energy,
            r.kappa,
            r.kappa_ratio,
            r.energy_density,
            r.q2_over_b_peak,
            r.upper_bound_ratio,
            r.b_peak,
            r.peak[0],
            r.peak[1],
            r.centroid[0],
            r.centroid[1],
            r.diameter,
            r.diameter_over_eps,
            r.core_area,
        ];
        let mut cells: Vec<String> = floats.iter().map(|v| fmt_f64(*v)).collect();
        cells.push(r.components.to_string());
        cells.push(fmt_f64(r.distance_to_boundary));
        cells.push(r.iterations.to_string());
        cells.push(fmt_f64(r.gradient));
        cells.push(fmt_f64(r.nehari_residual));
        cells.push(r.negative_nodes.to_string());
        cells.push(r.converged.to_string());
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Read `report.json` from a sweep directory.
pub fn load_report(dir: &Path) -> Result<ReportFile> {
    let path = dir.join(REPORT_JSON);
    let text = fs::read_to_string(&path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Comparison of the stored rows with their limits; the diameter fit is
/// recomputed from the rows.
pub fn report_table(file: &ReportFile) -> String {
    let rep = AsymptoticsReport::new(file.report.target, file.report.rows.clone());
    let mut s = format!(
        "scenario {} ({} x {} cells); target point ({:.6}, {:.6}), inf q^2/b = {:.6}\n",
        file.scenario,
        file.resolution[0],
        file.resolution[1],
        rep.target.point[0],
        rep.target.point[1],
        rep.target.limit_energy_density
    );
    s.push_str(&format!(
        "{:>10} {:>14} {:>12} {:>14} {:>12} {:>12} {:>10}\n",
        "epsilon", "energy", "kappa b/q", "gap to 2pi", "E/bound", "b(peak)", "diam/eps"
    ));
    for r in &rep.rows {
        s.push_str(&format!(
            "{:>10.4} {:>14.6} {:>12.6} {:>14.6} {:>12.6} {:>12.6} {:>10.4}\n",
            r.epsilon,
            r.energy,
            r.kappa_ratio,
            (r.kappa_ratio - rep.limit_kappa_ratio).abs() / rep.limit_kappa_ratio,
            r.upper_bound_ratio,
            r.b_peak,
            r.diameter_over_eps
        ));
    }
    match diameter_scaling(&rep.rows) {
        Ok(fit) => s.push_str(&format!(
            "diameter slope {:.6} (target 1); diam/eps in [{:.4}, {:.4}]\n",
            fit.slope, fit.min_ratio, fit.max_ratio
        )),
        Err(Error::InsufficientPoints { .. }) => s.push_str("diameter slope: insufficient points\n"),
        Err(e) => s.push_str(&format!("diameter slope: unavailable ({e})\n")),
    }
    for (eps, msg) in &file.failures {
        s.push_str(&format!("failed at epsilon {eps}: {msg}\n"));
    }
    s
}

/// One line of the check table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Cells per axis of the small grids used by the check suite.
const CHECK_CELLS: usize = 16;

/// Property checks on a small copy of the configured problem: finite
/// differences of the energy, Nehari projection, the energy lower bound, the
/// weighted Hardy inequality and the integral identities of a fresh solve.
pub fn property_checks(cfg: &RunConfig, seed: u64) -> Result<Vec<CheckOutcome>> {
    cfg.validate()?;
    // nodal data is tied to the configured grid
    let spec = cfg.spec()?;
    let nodal = spec.profile.nodal().is_some() || matches!(spec.weight, WeightProfile::Tabulated(_));
    let cells = if nodal { cfg.resolution } else { [CHECK_CELLS, CHECK_CELLS] };
    let problem = Problem::from_spec(&spec, cells[0], cells[1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if cfg.checks.gradient {
        out.push(gradient_check(&problem, &mut rng, cfg.test_hooks.corrupt_gradient));
    }
    if cfg.checks.nehari {
        out.push(nehari_check(&problem, &mut rng));
    }
    if cfg.checks.lower_bound {
        out.push(lower_bound_check(&problem, &mut rng));
    }
    if cfg.checks.hardy {
        out.push(hardy_suite(&mut rng)?);
    }
    if cfg.checks.identities {
        out.push(identity_check(&problem, &cfg.solver));
    }
    Ok(out)
}

/// Random field whose truncation is active on part of the grid.
fn random_field(problem: &Problem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    problem.qe.iter().map(|q| q * rng.gen_range(0.0..2.0) + rng.gen_range(0.0..0.1)).collect()
}

fn gradient_check(problem: &Problem, rng: &mut ChaCha8Rng, corrupt: bool) -> CheckOutcome {
    const TRIALS: usize = 20;
    let mut worst = 0.0_f64;
    for _ in 0..TRIALS {
        let x = random_field(problem, rng);
        let v: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = problem.disc.norm(&x) / problem.disc.norm(&v).max(f64::MIN_POSITIVE);
        let h = 1e-5 * scale;
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = problem.energy_change(&minus, &plus) / (2.0 * h);
        let mut g = problem.gradient(&x);
        if corrupt {
            g.iter_mut().for_each(|gi| *gi *= 1.0 + 1e-3);
        }
        let an: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(fd.abs()).max(f64::MIN_POSITIVE));
    }
    CheckOutcome { name: "gradient", passed: worst <= 1e-6, detail: format!("max relative error {worst:.3e}") }
}

fn nehari_check(problem: &Problem, rng: &mut ChaCha8Rng) -> CheckOutcome {
    const TRIALS: usize = 50;
    let mut worst = 0.0_f64;
    let mut ray_ok = true;
    for _ in 0..TRIALS {
        let x = random_field(problem, rng);
        let (_, w) = match problem.nehari_project(&x) {
            Ok(p) => p,
            Err(e) => return CheckOutcome { name: "nehari", passed: false, detail: e.to_string() },
        };
        worst = worst.max(problem.nehari_residual(&w));
        let e1 = problem.energy(&w).total;
        for t in [0.5, 0.9, 1.1, 2.0] {
            let tw: Vec<f64> = w.iter().map(|v| t * v).collect();
            ray_ok &= problem.energy(&tw).total <= e1;
        }
    }
    CheckOutcome {
        name: "nehari",
        passed: worst <= 1e-10 && ray_ok,
        detail: format!("max residual {worst:.3e}, ray maximum {}", if ray_ok { "holds" } else { "violated" }),
    }
}

fn lower_bound_check(problem: &Problem, rng: &mut ChaCha8Rng) -> CheckOutcome {
    const TRIALS: usize = 200;
    let mut worst = f64::INFINITY;
    for _ in 0..TRIALS {
        let x = random_field(problem, rng);
        let (res, scale) = problem.energy_lower_bound_residual(&x);
        worst = worst.min(res / scale.max(f64::MIN_POSITIVE));
    }
    CheckOutcome { name: "lower bound", passed: worst >= -1e-12, detail: format!("min scaled residual {worst:.3e}") }
}

fn hardy_suite(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    const TRIALS: usize = 40;
    let grid = Grid::new(&DomainGeometry::meridian(3.0, 1.5), 48, 48)?;
    let mut worst = 0.0_f64;
    let mut ok = true;
    for trial in 0..TRIALS {
        let alpha = if trial % 2 == 0 { 0.0 } else { 1.0 };
        let c = [rng.gen_range(0.5..2.5), rng.gen_range(-1.0..1.0)];
        let w = rng.gen_range(0.2..0.5);
        let u = Field::from_fn(&grid, |x| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (w * w)).exp());
        let h = hardy_check(&grid, alpha, &u)?;
        worst = worst.max(h.lhs / h.rhs);
        ok &= h.ok;
    }
    Ok(CheckOutcome { name: "hardy", passed: ok, detail: format!("max lhs/rhs {worst:.4}") })
}

fn identity_check(problem: &Problem, opts: &SolverOptions) -> CheckOutcome {
    let solved = cold_start(problem).and_then(|u0| minimize(problem, &u0, opts));
    match solved {
        Ok(res) => {
            let ids = problem.integral_identities(&res.u);
            let worst = ids.res_a.abs().max(ids.res_b.abs());
            CheckOutcome {
                name: "identities",
                passed: res.converged && !ids.empty_core && worst <= 1e-4,
                detail: format!("residuals {:.3e}, {:.3e}", ids.res_a, ids.res_b),
            }
        }
        Err(e) => CheckOutcome { name: "identities", passed: false, detail: e.to_string() },
    }
}

pub fn check_table(outcomes: &[CheckOutcome]) -> String {
    let mut s = String::new();
    for c in outcomes {
        s.push_str(&format!("{:<12} {:<4} {}\n", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail));
    }
    s
}

/// `run` subcommand.
pub fn cmd_run(config: &Path, out: Option<&Path>, seed: Option<u64>, quiet: bool) -> i32 {
    let mut cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    match run(&cfg, out) {
        Ok(outcome) => {
            if !quiet {
                print!("{}", report_table(&outcome.report));
            }
            outcome.exit_code
        }
        Err(e) => fail(EXIT_CONFIG, &e),
    }
}

/// `check` subcommand.
pub fn cmd_check(config: &Path, seed: Option<u64>, quiet: bool) -> i32 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, &e),
    };
    match property_checks(&cfg, seed.unwrap_or(cfg.seed)) {
        Ok(outcomes) => {
            if !quiet {
                print!("{}", check_table(&outcomes));
            }
            if outcomes.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_SOLVE
            }
        }
        Err(e) => fail(EXIT_CONFIG, &e),
    }
}

/// `report` subcommand.
pub fn cmd_report(dir: &Path, quiet: bool) -> i32 {
    match load_report(dir) {
        Ok(file) => {
            if !quiet {
                print!("{}", report_table(&file));
            }
            EXIT_OK
        }
        Err(e) => fail(EXIT_CONFIG, &e),
    }
}

fn fail(code: i32, e: &Error) -> i32 {
    eprintln!("error: {e}");
    code
}
