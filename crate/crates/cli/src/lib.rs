//! Command line front end: `validate`, `solve`, `boolify` and `report` on a
//! TOML problem file.
//!
//! Exit codes: 0 success, 1 validation or scheme failure (or a failed
//! `--verify`), 2 unreadable or malformed input, 3 solver budget exhausted
//! (the partial report is still written).

pub mod problem;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sheafrelax::boolrelax::{
    build_thresholded_sheaves, error_budget, theorem_bound, thresholding_error_bound,
    EvaluationMode,
};
use sheafrelax::encode::{build_s, EncodedProblem};
use sheafrelax::netmodel::validate;
use sheafrelax::optimize::{relaxation_gap, solve_constrained, solve_relaxed, Mode, SolveRequest, SolveResult};
use sheafrelax::sheaf::{consistency_radius, is_global_section, morphism_defect, SECTION_TOL};
use sheafrelax::space::Provenance;
use sheafrelax::affine::build_boolean_scheme;

use problem::{Loaded, ParseError};
use report::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sheafrelax", about = "Sheaf encodings of network optimal control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions of a problem.
    Validate(Common),
    /// Minimize consistency radius.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Build the Boolean scheme, its error budget and the bound chains.
    Boolify(Common),
    /// Validation, both solves and (with nominal states) the Boolean scheme.
    Report(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    pub path: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Objective evaluations allowed per start.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Also write the report as TOML.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Recompute the report from scratch and require every pass flag.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Constrained,
    Relaxed,
    Both,
}

struct Settings {
    seed: u64,
    budget: Option<usize>,
    tolerance: Option<f64>,
    threads: usize,
}

impl Settings {
    fn new(common: &Common, loaded: &Loaded) -> Self {
        Settings {
            seed: common.seed.or(loaded.solver.seed).unwrap_or(0),
            budget: common.budget.or(loaded.solver.budget),
            tolerance: common.tolerance.or(loaded.solver.tolerance),
            threads: common.threads.max(1),
        }
    }

    fn request(&self, mode: Mode) -> SolveRequest<f64> {
        let mut req = SolveRequest::new(mode);
        req.seed = self.seed;
        if let Some(b) = self.budget {
            req.budget = b;
        }
        if let Some(t) = self.tolerance {
            req.tolerance = t;
        }
        req.threads = self.threads;
        req
    }
}

/// Why a command stopped before producing a report.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Failed(String),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Parse(e.0)
    }
}

impl From<sheafrelax::Error> for Failure {
    fn from(e: sheafrelax::Error) -> Self {
        Failure::Failed(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let common = match &cli.command {
        Command::Validate(c) | Command::Boolify(c) | Command::Report(c) => c,
        Command::Solve { common, .. } => common,
    };
    let build = || build_report(&cli.command);
    let report = match build() {
        Ok(r) => r,
        Err(Failure::Parse(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_PARSE;
        }
        Err(Failure::Failed(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_FAILED;
        }
    };
    let _ = write!(out, "{}", report.to_text());
    if let Some(path) = &common.output {
        if let Err(e) = std::fs::write(path, report.to_toml()) {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_FAILED;
        }
    }
    if common.verify {
        match build() {
            Ok(again) if again == report => {}
            Ok(_) => {
                let _ = writeln!(err, "verify: recomputed report differs");
                return EXIT_FAILED;
            }
            Err(Failure::Parse(msg)) | Err(Failure::Failed(msg)) => {
                let _ = writeln!(err, "verify: {msg}");
                return EXIT_FAILED;
            }
        }
        let failures = report.failures();
        if !failures.is_empty() {
            for f in failures {
                let _ = writeln!(err, "verify: {f} failed");
            }
            return EXIT_FAILED;
        }
        let _ = writeln!(out, "\nverify: all checks pass");
    }
    if report.validation.as_ref().is_some_and(|v| !v.valid) {
        return EXIT_FAILED;
    }
    if report.budget_exhausted() {
        let _ = writeln!(err, "warning: solver budget exhausted; best result so far reported");
        return EXIT_BUDGET;
    }
    EXIT_OK
}

fn build_report(command: &Command) -> Result<Report, Failure> {
    match command {
        Command::Validate(c) => cmd_validate(c),
        Command::Solve { common, mode } => cmd_solve(common, *mode),
        Command::Boolify(c) => cmd_boolify(c),
        Command::Report(c) => cmd_report(c),
    }
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn base_report(command: &str, common: &Common, settings: &Settings) -> Report {
    Report {
        command: command.into(),
        problem: display_name(&common.path),
        seed: settings.seed,
        ..Report::default()
    }
}

fn validation_section(loaded: &Loaded, seed: u64) -> ValidationSection {
    let v = validate(&loaded.problem, seed);
    ValidationSection {
        valid: v.is_valid(),
        issues: v.issues.iter().map(|i| i.to_string()).collect(),
        exhaustive: v.exhaustive.clone(),
    }
}

pub fn cmd_validate(common: &Common) -> Result<Report, Failure> {
    let loaded = problem::load(&common.path)?;
    let settings = Settings::new(common, &loaded);
    let mut r = base_report("validate", common, &settings);
    r.validation = Some(validation_section(&loaded, settings.seed));
    Ok(r)
}

fn mode_section(enc: &EncodedProblem<f64>, res: &SolveResult<f64>) -> Result<ModeSection, Failure> {
    let recomputed = consistency_radius(&enc.s.sheaf, &res.assignment)?;
    let sections_pass = match res.mode {
        Mode::Constrained => (0..enc.horizon())
            .all(|k| is_global_section(&enc.n, &enc.n_part(&res.assignment, k), SECTION_TOL)),
        Mode::Relaxed => true,
    };
    let mut steps = Vec::new();
    for k in 0..enc.horizon() {
        let part = enc.n_part(&res.assignment, k);
        let values: Vec<_> = part.values().iter().map(|v| v.clone().expect("global")).collect();
        let lab = enc.labeling_of(&values)?;
        steps.push(StepLabel {
            step: k,
            controls: lab.controls.iter().map(|(v, p)| (v.clone(), p.to_f64())).collect(),
            states: lab.states.iter().map(|(v, p)| (v.clone(), p.to_f64())).collect(),
        });
    }
    Ok(ModeSection {
        objective: res.objective,
        objective_pass: (recomputed - res.objective).abs() <= SECTION_TOL,
        local_cr_n: res.local_cr_n.clone(),
        sections_pass,
        exhaustive: res.exhaustive,
        budget_exhausted: res.budget_exhausted,
        evaluations: res.evaluations,
        best_start: res.best_start,
        steps,
    })
}

fn solve_section(
    enc: &EncodedProblem<f64>,
    settings: &Settings,
    mode: ModeArg,
) -> Result<SolveSection, Failure> {
    let mut section = SolveSection::default();
    let constrained = match mode {
        ModeArg::Relaxed => None,
        _ => Some(solve_constrained(enc, &settings.request(Mode::Constrained))?),
    };
    let relaxed = match mode {
        ModeArg::Constrained => None,
        _ => {
            let mut req = settings.request(Mode::Relaxed);
            req.warm_start = constrained.as_ref().map(|c| c.assignment.clone());
            Some(solve_relaxed(enc, &req)?)
        }
    };
    if let Some(c) = &constrained {
        section.constrained = Some(mode_section(enc, c)?);
    }
    if let Some(r) = &relaxed {
        section.relaxed = Some(mode_section(enc, r)?);
    }
    if let (Some(c), Some(r)) = (&constrained, &relaxed) {
        let g = relaxation_gap(enc, c, r)?;
        section.gap = Some(GapSection {
            c_constrained: g.c_constrained,
            c_relaxed: g.c_relaxed,
            d_s: g.d_s,
            relaxation_pass: g.relaxation_bound,
            rows: g
                .rows
                .iter()
                .map(|row| GapRowOut {
                    step: row.step,
                    c_n_relaxed: row.c_relaxed,
                    d_n: row.d_n,
                    section_pass: row.section_bound,
                    restriction_pass: row.restriction_bound,
                })
                .collect(),
        });
    }
    Ok(section)
}

pub fn cmd_solve(common: &Common, mode: Option<ModeArg>) -> Result<Report, Failure> {
    let loaded = problem::load(&common.path)?;
    let settings = Settings::new(common, &loaded);
    let mode = match mode {
        Some(m) => m,
        None => match loaded.solver.mode.as_deref() {
            None | Some("constrained") => ModeArg::Constrained,
            Some("relaxed") => ModeArg::Relaxed,
            Some("both") => ModeArg::Both,
            Some(other) => return Err(Failure::Parse(format!("unknown solver mode `{other}`"))),
        },
    };
    let mut r = base_report("solve", common, &settings);
    let validation = validation_section(&loaded, settings.seed);
    let valid = validation.valid;
    r.validation = Some(validation);
    if valid {
        let enc = build_s(&loaded.problem)?;
        r.solve = Some(solve_section(&enc, &settings, mode)?);
    }
    Ok(r)
}

fn provenance(p: &Provenance) -> String {
    match p {
        Provenance::Declared => "declared".into(),
        Provenance::Exhaustive { pairs } => format!("exhaustive ({pairs} pairs)"),
        Provenance::Sampled { pairs, seed } => format!("sampled ({pairs} pairs, seed {seed})"),
    }
}

fn boolify_section(loaded: &Loaded, settings: &Settings) -> Result<BoolifySection, Failure> {
    let nominal = loaded.nominal.as_ref().ok_or_else(|| {
        Failure::Failed("invalid thresholding scheme: every vertex needs a nominal block".into())
    })?;
    let p = &loaded.problem;
    let scheme = build_boolean_scheme(p, nominal, &loaded.dynamics)?;
    let enc = build_s(p)?;
    let th = build_thresholded_sheaves(&enc, &scheme, settings.seed)?;
    let budget = error_budget(p, &scheme, settings.seed)?;

    let mut vertices = std::collections::BTreeMap::new();
    for (v, b) in &budget.vertices {
        let (lhs, rhs) = thresholding_error_bound(p, &scheme, v, settings.seed)?;
        vertices.insert(
            v.clone(),
            VertexBudgetOut {
                omega1: b.omega1,
                omega2: b.omega2,
                norm_sigma: b.norm_sigma,
                norm_tau_f: b.norm_tau_f,
                eps_v: b.eps_v,
                lhs,
                lhs_pass: lhs <= rhs + SECTION_TOL,
            },
        );
    }
    let mut morphisms = std::collections::BTreeMap::new();
    for (name, m) in [
        ("Sigma", &th.sigma),
        ("Gamma", &th.gamma),
        ("T", &th.t),
        ("f_tilde", &th.f_tilde),
        ("step", &th.step),
    ] {
        morphisms.insert(name.to_owned(), morphism_defect(m, 256, settings.seed)?);
    }

    let s = solve_constrained(&enc, &settings.request(Mode::Constrained))?;
    let r_sec = solve_constrained(&th.encoded, &settings.request(Mode::Constrained))?;
    let mut req = settings.request(Mode::Relaxed);
    req.warm_start = Some(r_sec.assignment.clone());
    let r_rel = solve_relaxed(&th.encoded, &req)?;
    let mut triples = Vec::new();
    for (pair, r) in [("boolean-optimum", &r_sec), ("boolean-relaxed", &r_rel)] {
        for t in theorem_bound(&r.assignment, &s.assignment, &enc, &th, &budget)? {
            triples.push(TripleOut {
                pair: pair.into(),
                step: t.step,
                lhs: t.lhs,
                mid: t.mid,
                rhs: t.rhs,
                pass: t.holds(SECTION_TOL),
            });
        }
    }
    Ok(BoolifySection {
        evaluation: match budget.mode {
            EvaluationMode::Exhaustive { points } => format!("exhaustive ({points} points)"),
            EvaluationMode::Sampled { count, seed } => {
                format!("estimated: sampled ({count} points, seed {seed})")
            }
        },
        eps: budget.eps,
        c: budget.c,
        k: budget.k,
        eps_recomputation_pass: budget.recomputation_gap() <= 1e-12,
        zero_error: budget.eps.abs() <= 1e-12,
        vertices,
        k_entries: budget
            .k_entries
            .iter()
            .map(|e| KEntryOut {
                map: e.map.clone(),
                value: e.value,
                provenance: provenance(&e.provenance),
            })
            .collect(),
        morphisms,
        triples,
    })
}

pub fn cmd_boolify(common: &Common) -> Result<Report, Failure> {
    let loaded = problem::load(&common.path)?;
    let settings = Settings::new(common, &loaded);
    let mut r = base_report("boolify", common, &settings);
    r.boolify = Some(boolify_section(&loaded, &settings)?);
    Ok(r)
}

pub fn cmd_report(common: &Common) -> Result<Report, Failure> {
    let loaded = problem::load(&common.path)?;
    let settings = Settings::new(common, &loaded);
    let mut r = base_report("report", common, &settings);
    let validation = validation_section(&loaded, settings.seed);
    let valid = validation.valid;
    r.validation = Some(validation);
    if valid {
        let enc = build_s(&loaded.problem)?;
        r.solve = Some(solve_section(&enc, &settings, ModeArg::Both)?);
        if loaded.nominal.is_some() {
            r.boolify = Some(boolify_section(&loaded, &settings)?);
        }
    }
    Ok(r)
}
