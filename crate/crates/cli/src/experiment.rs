//! Full pipeline: kernel, critical value, atlas, sign condition, Mather
//! measures, selection constant and the discount sweep, with CSV and text
//! artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;
use weakkam_core::discount::{calibrated_orbit, lambda_sweep, SweepRow};
use weakkam_core::mather::{
    default_level, enumerate_cycle_measures, selection_constant, tight_subgraph, verify_condition_a, ConditionReport,
    MatherMeasure,
};
use weakkam_core::{
    build_action_kernel, AtlasTolerances, DiscountProblem, Error as CoreError, HamiltonianSpec, PeriodicGrid,
    Potential, Preset, SolveOptions, WeakKamAtlas,
};

use crate::config::{
    read_samples, Auto, ClassChoice, CoefficientChoice, ConfigError, ExperimentConfig, PotentialChoice, PresetChoice,
};

/// Acceptance thresholds applied to every run.
pub const C0_TOL: f64 = 0.05;
pub const SELECTION_TOL: f64 = 0.1;
pub const TREND_SLACK: f64 = 0.02;
pub const MEASURE_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("condition (a) violated for class {class}: offending nodes {offending:?}")]
    ConditionA { class: usize, offending: Vec<usize> },
    #[error("solver failed: {0}")]
    Solver(CoreError),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("{0}")]
    Core(CoreError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("acceptance checks failed: {}", .0.join(", "))]
    ChecksFailed(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::ConditionA { .. } => 3,
            RunError::Solver(_) => 4,
            RunError::Assumption(_) | RunError::Core(_) | RunError::Io(_) | RunError::ChecksFailed(_) => 1,
        }
    }
}

fn config_err(e: impl ToString) -> RunError {
    RunError::Config(ConfigError { line: None, message: e.to_string() })
}

fn solver_err(e: CoreError) -> RunError {
    match e {
        CoreError::NonConvergence { .. } | CoreError::MonotonicityViolated { .. } => RunError::Solver(e),
        CoreError::InvalidDiscount(_)
        | CoreError::InvalidSchedule(_)
        | CoreError::LevelTooSmall { .. }
        | CoreError::NotSubsolution { .. } => config_err(e),
        CoreError::ConditionViolatedOnSupport { .. } => RunError::Core(e),
        other => RunError::Core(other),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub c0: f64,
    pub selection_constant: f64,
    pub level: f64,
    pub basepoint: usize,
    pub rows: Vec<SweepRow>,
    pub checks: Vec<Check>,
    pub positions: Vec<f64>,
    pub target: Vec<f64>,
    pub elapsed_secs: f64,
}

impl RunOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn build_potential(cfg: &ExperimentConfig) -> Result<Potential, RunError> {
    let c = cfg.circumference;
    Ok(match &cfg.potential {
        PotentialChoice::Preset => match cfg.preset {
            PresetChoice::Example1 => Potential::cosine_well(c),
            PresetChoice::Example2 | PresetChoice::Custom => Potential::sin_squared(c),
        },
        PotentialChoice::CosineWell => Potential::cosine_well(c),
        PotentialChoice::SinSquared => Potential::sin_squared(c),
        PotentialChoice::Zero => Potential::zero(),
        PotentialChoice::Samples(path) => Potential::sampled(c, read_samples(path)?).map_err(config_err)?,
    })
}

fn build_spec(cfg: &ExperimentConfig, potential: Potential) -> Result<HamiltonianSpec, RunError> {
    let c = cfg.circumference;
    let spec = match cfg.preset {
        PresetChoice::Example1 => HamiltonianSpec::example1(potential, c),
        PresetChoice::Example2 => HamiltonianSpec::example2(potential, c),
        PresetChoice::Custom => {
            let omega = cfg.omega;
            let v_max = 4.0 * (1.0 + omega.abs() + potential.max_sqrt(c));
            let u = potential.clone();
            HamiltonianSpec::custom(move |x, v| 0.25 * (v - omega).powi(2) + u.value(x), potential, c, v_max)
        }
    }
    .map_err(config_err)?;
    let spec = match cfg.v_max {
        Auto::Value(v) => spec.with_v_max(v).map_err(config_err)?,
        Auto::Auto => spec,
    };
    match cfg.p_max {
        Auto::Value(p) => spec.with_p_max(p).map_err(config_err),
        Auto::Auto => Ok(spec),
    }
}

fn build_coefficient(cfg: &ExperimentConfig, grid: &PeriodicGrid) -> Result<Vec<f64>, RunError> {
    let k = 2.0 * PI / cfg.circumference;
    Ok(match &cfg.coefficient {
        CoefficientChoice::Cos2Pix => grid.sample(|x| (k * x).cos()),
        CoefficientChoice::NegCos2Pix => grid.sample(|x| -(k * x).cos()),
        CoefficientChoice::Const(c) => vec![*c; grid.len()],
        CoefficientChoice::Samples(path) => {
            let a = read_samples(path)?;
            if a.len() != grid.len() {
                return Err(config_err(format!(
                    "{} has {} samples, grid has {} nodes",
                    path.display(),
                    a.len(),
                    grid.len()
                )));
            }
            a
        }
    })
}

fn closed_form_preset(cfg: &ExperimentConfig) -> Option<Preset> {
    if cfg.potential != PotentialChoice::Preset || cfg.circumference != 1.0 {
        return None;
    }
    match cfg.preset {
        PresetChoice::Example1 => Some(Preset::Example1),
        PresetChoice::Example2 => Some(Preset::Example2),
        PresetChoice::Custom => None,
    }
}

fn sup_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Report {
    text: String,
}

impl Report {
    fn new() -> Self {
        Self { text: String::new() }
    }

    fn section(&mut self, name: &str) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

fn echo_config(
    r: &mut Report,
    cfg: &ExperimentConfig,
    grid: &PeriodicGrid,
    spec: &HamiltonianSpec,
    dt: f64,
    tol: &AtlasTolerances,
) {
    r.section("config");
    r.kv("preset", cfg.preset);
    r.kv("grid.n", cfg.n);
    r.kv("grid.circumference", num(cfg.circumference));
    r.kv("grid.dx", num(grid.dx()));
    r.kv("grid.dt", format!("{} ({})", num(dt), if cfg.dt == Auto::Auto { "auto" } else { "given" }));
    r.kv("potential", &cfg.potential);
    r.kv("hamiltonian.kind", spec.kind());
    r.kv("hamiltonian.v_max", num(spec.v_max()));
    r.kv("hamiltonian.p_max", num(spec.p_max()));
    if cfg.preset == PresetChoice::Custom {
        r.kv("custom.lagrangian", "tilted");
        r.kv("custom.omega", num(cfg.omega));
    }
    r.kv("discount.a", &cfg.coefficient);
    r.kv("discount.class", cfg.class);
    r.kv("discount.A", cfg.level);
    r.kv("discount.lambda_schedule", cfg.schedule.iter().map(|l| format!("{l:e}")).collect::<Vec<_>>().join(","));
    r.kv("discount.consistency_lambda", cfg.consistency_lambda.map_or("none".to_string(), |l| format!("{l:e}")));
    r.kv(
        "discount.solver",
        match cfg.solver {
            weakkam_core::Strategy::PolicyIteration => "policy",
            weakkam_core::Strategy::ValueIteration => "value",
        },
    );
    r.kv("discount.max_iters", cfg.max_iters);
    r.kv("discount.tol_fix", format!("{:e}", cfg.tol_fix));
    r.kv("tol.aubry", format!("{:e}", tol.aubry));
    r.kv("tol.class", format!("{:e}", tol.class));
    r.kv("tol.fixed", format!("{:e}", tol.fixed));
    r.kv("seed", cfg.seed);
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    fs::write(dir.join(name), contents).map_err(|e| RunError::Io(format!("{}: {e}", dir.join(name).display())))
}

/// Runs the configured experiment and writes `profiles.csv`,
/// `convergence.csv` and `report.txt` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;

    let grid = PeriodicGrid::with_circumference(cfg.n, cfg.circumference).map_err(config_err)?;
    let potential = build_potential(cfg)?;
    let spec = build_spec(cfg, potential)?;
    let dt = match cfg.dt {
        Auto::Auto => grid.dx(),
        Auto::Value(v) => v,
    };
    let kernel = build_action_kernel(&grid, &spec, dt).map_err(config_err)?;
    let defaults = AtlasTolerances::for_grid(grid.dx(), dt);
    let pick = |v: Auto<f64>, d: f64| if let Auto::Value(x) = v { x } else { d };
    let tol = AtlasTolerances {
        aubry: pick(cfg.tol_aubry, defaults.aubry),
        class: pick(cfg.tol_class, defaults.class),
        fixed: pick(cfg.tol_fixed, defaults.fixed),
    };

    let mut report = Report::new();
    echo_config(&mut report, cfg, &grid, &spec, dt, &tol);

    let atlas = WeakKamAtlas::build(&grid, &kernel, tol).map_err(RunError::Core)?;
    let a = build_coefficient(cfg, &grid)?;

    report.section("critical");
    report.kv("c0", num(atlas.c0()));
    report.kv("aubry_nodes", format!("{:?}", atlas.aubry()));
    report.kv("lipschitz_kappa", num(atlas.lipschitz_kappa()));
    report.section("classes");
    report.line("index basepoint position nodes");
    for (i, c) in atlas.classes().iter().enumerate() {
        report.line(format!("{i} {} {} {:?}", c.basepoint, num(grid.position(c.basepoint)), c.nodes));
    }

    let mut checks = Vec::new();
    let preset = closed_form_preset(cfg);
    if preset.is_some() {
        checks.push(Check {
            name: "critical value",
            passed: atlas.c0().abs() <= C0_TOL,
            detail: format!("|c0| = {:e} <= {C0_TOL}", atlas.c0().abs()),
        });
    }

    let class_count = atlas.classes().len();
    let emit = |report: &Report, checks: &[Check]| -> Result<(), RunError> {
        let mut text = report.text.clone();
        text.push_str("\n[checks]\n");
        for c in checks {
            let _ = writeln!(text, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        write_file(&dir, "report.txt", &text)
    };

    if class_count < 2 {
        checks.push(Check {
            name: "class count",
            passed: false,
            detail: format!("{class_count} static class(es); at least 2 needed"),
        });
        emit(&report, &checks)?;
        return Err(RunError::Assumption(format!("{class_count} static class(es); selection needs at least two")));
    }
    checks.push(Check { name: "class count", passed: true, detail: format!("{class_count} static classes") });

    let i0 = match cfg.class {
        ClassChoice::Index(i) => {
            if i >= class_count {
                return Err(config_err(format!("discount.class = {i} but only {class_count} classes were found")));
            }
            i
        }
        ClassChoice::Near(x) => atlas
            .class_nearest(&grid, grid.nearest_node(x))
            .ok_or_else(|| config_err("no class found near the requested position"))?,
    };
    let x0 = atlas.classes()[i0].basepoint;

    let cond: ConditionReport = verify_condition_a(&a, atlas.classes(), i0).map_err(RunError::Core)?;
    report.section("selection");
    report.kv("class", i0);
    report.kv("x0", format!("{x0} (position {})", num(grid.position(x0))));
    report.kv("epsilon", num(cond.epsilon));
    checks.push(Check {
        name: "condition (a)",
        passed: cond.passed,
        detail: if cond.passed {
            format!("epsilon = {:e}", cond.epsilon)
        } else {
            format!("offending nodes {:?}", cond.offending)
        },
    });
    if !cond.passed {
        emit(&report, &checks)?;
        return Err(RunError::ConditionA { class: i0, offending: cond.offending });
    }

    let graph = tight_subgraph(&atlas);
    let measures = enumerate_cycle_measures(&atlas, &graph, i0).map_err(RunError::Core)?;
    let v0 = atlas.reference_subsolution();
    let level = match cfg.level {
        Auto::Auto => default_level(&a, &v0, 1.0),
        Auto::Value(v) => v,
    };
    let selection = match selection_constant(&measures, &a, level, atlas.barrier(), x0) {
        Ok(s) => s,
        Err(e @ CoreError::ConditionViolatedOnSupport { .. }) => {
            checks.push(Check { name: "measure support", passed: false, detail: e.to_string() });
            emit(&report, &checks)?;
            return Err(RunError::ConditionA {
                class: i0,
                offending: measures.iter().flat_map(|m| m.cycle.clone()).collect(),
            });
        }
        Err(e) => return Err(RunError::Core(e)),
    };
    report.kv("A", format!("{} ({})", num(level), if cfg.level == Auto::Auto { "auto" } else { "given" }));
    report.kv("mather_measures", measures.len());
    report.kv("minimizing_cycle", format!("{:?}", measures[selection.measure].cycle));
    report.kv("C", num(selection.value));

    let target: Vec<f64> = (0..grid.len()).map(|x| atlas.barrier().get(x0, x) + selection.value).collect();
    let mut schedule = cfg.schedule.clone();
    if let Some(extra) = cfg.consistency_lambda {
        schedule.push(extra);
    }
    let base = DiscountProblem::new(atlas.reduced(), dt, schedule[0], a.clone(), level).map_err(solver_err)?;
    let opts = SolveOptions {
        tol_fix: cfg.tol_fix,
        max_iters: cfg.max_iters,
        strategy: cfg.solver,
        subsolution_tol: tol.fixed,
    };
    let rows = lambda_sweep(&base, &schedule, &v0, &target, &opts).map_err(solver_err)?;

    report.section("sweep");
    report.line("lambda sup_error residual iterations");
    for r in &rows {
        report.line(format!("{} {} {} {}", num(r.lambda), num(r.sup_error), num(r.residual), r.iterations));
    }

    let main_last = cfg.schedule.len() - 1;
    let main_row = &rows[main_last];
    checks.push(Check {
        name: "solver residual",
        passed: rows.iter().all(|r| r.residual <= cfg.tol_fix),
        detail: format!("max residual {:e}", rows.iter().map(|r| r.residual).fold(0.0, f64::max)),
    });
    checks.push(Check {
        name: "selection",
        passed: main_row.sup_error <= SELECTION_TOL,
        detail: format!("sup |u - (h(x0,.) + C)| = {:e} at lambda = {:e}", main_row.sup_error, main_row.lambda),
    });
    if let Some(p) = preset {
        let from_half = grid.distance(x0, grid.nearest_node(0.5)) < grid.distance(x0, 0);
        let closed: Vec<f64> =
            grid.positions().iter().map(|&x| p.elementary_target(from_half, x) + selection.value).collect();
        let err = sup_diff(&main_row.solution.u, &closed);
        checks.push(Check {
            name: "closed form",
            passed: err <= SELECTION_TOL,
            detail: format!("sup |u - (closed form + C)| = {err:e}"),
        });
    }
    checks.push(Check {
        name: "trend",
        passed: rows[0].sup_error >= main_row.sup_error - TREND_SLACK,
        detail: format!("first {:e}, last {:e}", rows[0].sup_error, main_row.sup_error),
    });
    if cfg.consistency_lambda.is_some() {
        let tail = rows.last().expect("non-empty sweep");
        checks.push(Check {
            name: "small-rate consistency",
            passed: tail.sup_error <= main_row.sup_error,
            detail: format!(
                "{:e} at {:e} vs {:e} at {:e}",
                tail.sup_error, tail.lambda, main_row.sup_error, main_row.lambda
            ),
        });
    }

    let probe = base.with_lambda(main_row.lambda).map_err(solver_err)?;
    let steps = match cfg.orbit_steps {
        Auto::Auto => 8 * grid.len(),
        Auto::Value(s) => s,
    };
    let occupation_min = (0..grid.len())
        .map(|z| calibrated_orbit(&main_row.solution, &probe, z, steps).window_measure.integrate(&a))
        .fold(f64::INFINITY, f64::min);
    if main_row.lambda <= 1e-3 {
        checks.push(Check {
            name: "orbit occupation",
            passed: occupation_min >= -MEASURE_SLACK,
            detail: format!("min over starts of sum mu a = {occupation_min:e}"),
        });
    }
    let all_measures: Vec<MatherMeasure> = (0..class_count)
        .map(|i| enumerate_cycle_measures(&atlas, &graph, i))
        .collect::<Result<Vec<_>, _>>()
        .map_err(RunError::Core)?
        .into_iter()
        .flatten()
        .collect();
    let mather_max = all_measures
        .iter()
        .map(|m| m.weights.integrate_product(&a, &main_row.solution.u))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check {
        name: "mather bound",
        passed: mather_max <= level + MEASURE_SLACK,
        detail: format!("max sum mu a u = {mather_max:e}, A = {level:e}"),
    });

    let smallest = rows.last().expect("non-empty sweep");
    let mut profiles = String::from("x,U,a,v0,h_inf_target,u_lambda_min_lambda\n");
    for x in 0..grid.len() {
        let pos = grid.position(x);
        let _ = writeln!(
            profiles,
            "{},{},{},{},{},{}",
            num(pos),
            num(spec.potential().value(pos)),
            num(a[x]),
            num(v0[x]),
            num(target[x]),
            num(smallest.solution.u[x])
        );
    }
    let mut convergence = String::from("lambda,sup_error,residual,iterations\n");
    for r in &rows {
        let _ = writeln!(convergence, "{},{},{},{}", num(r.lambda), num(r.sup_error), num(r.residual), r.iterations);
    }
    write_file(&dir, "profiles.csv", &profiles)?;
    write_file(&dir, "convergence.csv", &convergence)?;
    emit(&report, &checks)?;

    let outcome = RunOutcome {
        output_dir: dir,
        c0: atlas.c0(),
        selection_constant: selection.value,
        level,
        basepoint: x0,
        rows,
        checks,
        positions: grid.positions(),
        target,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    if !outcome.all_passed() {
        let failed = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
        return Err(RunError::ChecksFailed(failed));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run(text: &str) -> (tempfile::TempDir, Result<RunOutcome, RunError>) {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(text).unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        let res = run_experiment(&cfg);
        (dir, res)
    }

    #[test]
    fn constant_coefficient_exits_with_condition_code() {
        let (dir, res) = run("preset = example1\ngrid.n = 64\ndiscount.a = const(1)");
        let err = res.unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("FAIL condition (a)"));
    }

    #[test]
    fn flat_potential_is_refused() {
        let (_dir, res) = run("preset = example2\npotential = zero\ngrid.n = 32");
        assert_eq!(res.unwrap_err().exit_code(), 1);
    }

    #[test]
    fn class_index_is_validated_after_atlas() {
        let (_dir, res) = run("grid.n = 64\ndiscount.class = 5");
        assert_eq!(res.unwrap_err().exit_code(), 2);
    }

    #[test]
    fn tiny_iteration_budget_is_a_solver_failure() {
        let (_dir, res) =
            run("grid.n = 64\ndiscount.solver = value\ndiscount.max_iters = 3\ndiscount.consistency_lambda = none");
        assert_eq!(res.unwrap_err().exit_code(), 4);
    }

    #[test]
    fn coarse_example1_run_writes_artifacts() {
        let (dir, res) = run("grid.n = 128\ndiscount.A = 1");
        let out = res.unwrap();
        assert!((out.selection_constant - 1.0).abs() <= 1e-6);
        let profiles = fs::read_to_string(dir.path().join("profiles.csv")).unwrap();
        assert_eq!(profiles.lines().count(), 129);
        assert!(profiles.starts_with("x,U,a,v0,h_inf_target,u_lambda_min_lambda\n"));
        let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert_eq!(conv.lines().count(), 1 + 8);
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        for key in ["grid.dt", "tol.aubry", "discount.A", "c0 =", "C =", "epsilon ="] {
            assert!(report.contains(key), "{key} missing");
        }
    }

    #[test]
    fn csv_output_is_deterministic() {
        let text =
            "preset = example2\ngrid.n = 64\ndiscount.a = neg_cos2pix\ndiscount.class = near(0.5)\ndiscount.A = 1";
        let (d1, r1) = run(text);
        let (d2, r2) = run(text);
        r1.unwrap();
        r2.unwrap();
        for f in ["profiles.csv", "convergence.csv", "report.txt"] {
            assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap());
        }
    }
}
