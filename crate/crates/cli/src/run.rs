//! Experiment execution.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use jumpreach::levy::{NoiseError, NoiseSampler};
use jumpreach::mc::{self, MCEstimate, McError, McOptions};
use jumpreach::measures::{check_support_conditions_1d, H0Search};
use jumpreach::planner::{
    self, CoordinateAtoms, GreedyOptions, JumpChainCertificate, PlanError, Target, VerificationReport,
};
use jumpreach::rng::{derive_seed, trial_rng};
use jumpreach::sde::zoo::{self, ZooError};
use jumpreach::sde::{Integrator, JumpCoefficient, SdeError, Truncation};
use jumpreach::{IntensityMeasure, MeasureError, ModelSpec};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, PlannerChoice};
use crate::report::{write_csv, CsvRow, Report, Status, Timing};

const VERIFY_PURPOSE: u64 = 0x7665_7269;
const SIMULATE_PURPOSE: u64 = 0x7369_6d75;
const ORACLE_TRUNCATION: u32 = 40;
const ORACLE_ACCURACY: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Model { context: String, source: ZooError },
    #[error("{context}: {source}")]
    Measure { context: String, source: MeasureError },
    #[error("{context}: {source}")]
    Plan { context: String, source: PlanError },
    #[error("{context}: {source}")]
    Mc { context: String, source: McError },
    #[error("{context}: {source}")]
    Sde { context: String, source: SdeError },
    #[error("{context}: {source}")]
    Noise { context: String, source: NoiseError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Result of a run: the report (already written to `out_dir`) and its status.
#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub out_dir: PathBuf,
    /// Human-readable text for stdout (step tables, summaries).
    pub stdout: String,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.status.exit_code()
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    files: Vec<String>,
    rows: Vec<CsvRow>,
    stdout: String,
}

impl Ctx<'_> {
    fn label(&self) -> String {
        format!("{} experiment on model '{}'", kind_name(self.cfg.kind), self.cfg.model.name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.out.join(name);
        std::fs::write(&path, text).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value).map_err(|source| RunError::Json {
            context: self.label(),
            source,
        })?;
        self.write(name, &text)
    }

    fn mc_err(&self, source: McError) -> RunError {
        RunError::Mc {
            context: self.label(),
            source,
        }
    }

    fn row(&mut self, experiment: String, e: &MCEstimate) {
        self.rows.push(CsvRow {
            experiment,
            n: e.trials,
            k: e.successes,
            point: e.estimate,
            lo: e.lower,
            hi: e.upper,
            seed: e.seed,
            wall_time: e.runtime_secs,
        });
    }
}

pub fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Simulate => "simulate",
        ExperimentKind::Plan => "plan",
        ExperimentKind::VerifyCert => "verify-cert",
        ExperimentKind::EstimateHitting => "estimate-hitting",
        ExperimentKind::EstimateSupport => "estimate-support",
        ExperimentKind::CheckSupport => "check-support",
        ExperimentKind::CheckEProperty => "check-e-property",
    }
}

/// Builds the named zoo model with the configured measure.
pub fn build_model(cfg: &ExperimentConfig) -> Result<ModelSpec, RunError> {
    let context = format!("model '{}'", cfg.model.name);
    let measure = match &cfg.measure {
        Some(kind) => Some(IntensityMeasure::new(kind.clone()).map_err(|source| RunError::Measure {
            context: context.clone(),
            source,
        })?),
        None => None,
    };
    zoo::build(&cfg.model.name, &cfg.model.params, measure).map_err(|source| RunError::Model { context, source })
}

fn mc_options(cfg: &ExperimentConfig) -> McOptions {
    let n = &cfg.numerics;
    McOptions {
        trials: n.trials,
        dt: n.dt,
        cutoff: n.cutoff,
        small_jump_mode: n.small_jump_mode,
        confidence: n.confidence,
        seed: cfg.seed,
    }
}

/// Runtime is moved out of estimates into the timing section so that the
/// result payload depends only on the config.
fn strip_runtime(e: &MCEstimate) -> MCEstimate {
    MCEstimate {
        runtime_secs: 0.0,
        ..e.clone()
    }
}

fn start_state(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<Vec<f64>, RunError> {
    let x0 = cfg.start.clone().unwrap_or_else(|| vec![0.0; model.dim]);
    if x0.len() != model.dim {
        return Err(RunError::Invalid(format!(
            "start has {} components but model '{}' has dimension {}",
            x0.len(),
            model.name,
            model.dim
        )));
    }
    Ok(x0)
}

/// Runs the experiment and writes `report.json` plus any exports into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut ctx = Ctx {
        cfg,
        out: out_dir,
        files: Vec::new(),
        rows: Vec::new(),
        stdout: String::new(),
    };
    let (status, result) = match cfg.kind {
        ExperimentKind::Simulate => simulate(&mut ctx)?,
        ExperimentKind::Plan => plan(&mut ctx)?,
        ExperimentKind::VerifyCert => verify_cert(&mut ctx)?,
        ExperimentKind::EstimateHitting => estimate_hitting(&mut ctx)?,
        ExperimentKind::EstimateSupport => estimate_support(&mut ctx)?,
        ExperimentKind::CheckSupport => check_support(&mut ctx)?,
        ExperimentKind::CheckEProperty => check_e_property(&mut ctx)?,
    };
    if !ctx.rows.is_empty() {
        let path = out_dir.join("results.csv");
        write_csv(&path, &ctx.rows).map_err(|source| RunError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        ctx.files.push("results.csv".into());
    }
    let items = ctx.rows.iter().map(|r| (r.experiment.clone(), r.wall_time)).collect();
    let mut report = Report {
        tool: "jumpreach".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind,
        status,
        config: cfg.clone(),
        result,
        files: ctx.files.clone(),
        timing: Timing {
            started_unix_secs: started,
            wall_secs: 0.0,
            items,
        },
    };
    report.files.push("report.json".into());
    report.timing.wall_secs = clock.elapsed().as_secs_f64();
    let text = report.to_json();
    let path = out_dir.join("report.json");
    std::fs::write(&path, text).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(RunOutput {
        report,
        out_dir: out_dir.to_path_buf(),
        stdout: ctx.stdout,
    })
}

fn simulate(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let x0 = start_state(cfg, &model)?;
    let n = &cfg.numerics;
    let sampler = NoiseSampler::new(&model.measure, n.cutoff, n.small_jump_mode).map_err(|source| RunError::Noise {
        context: ctx.label(),
        source,
    })?;
    let mut rng = trial_rng(derive_seed(cfg.seed, SIMULATE_PURPOSE), 0);
    let noise = sampler.sample(n.horizon, &mut rng).map_err(|source| RunError::Noise {
        context: ctx.label(),
        source,
    })?;
    let sde_err = |source| RunError::Sde {
        context: format!("simulate experiment on model '{}'", cfg.model.name),
        source,
    };
    let path = Integrator::new(&model, n.dt, n.cutoff, Truncation::Full)
        .map_err(sde_err)?
        .record(&x0, &noise)
        .map_err(sde_err)?;
    let mut buf = Vec::new();
    path.write_csv(&mut buf).map_err(|source| RunError::Csv {
        path: "path.csv".into(),
        source,
    })?;
    ctx.write("path.csv", &String::from_utf8_lossy(&buf))?;
    ctx.json("noise.json", &noise)?;
    let fin = path.final_state().to_vec();
    ctx.stdout = format!("simulated {} jumps; X(T) = {fin:?}\n", noise.big_jumps.len());
    Ok((
        Status::Ok,
        json!({
            "start": x0,
            "final_state": fin,
            "jumps": noise.big_jumps.len(),
            "grid_points": path.times.len(),
        }),
    ))
}

fn choose_planner(cfg: &ExperimentConfig, model: &ModelSpec) -> PlannerChoice {
    match cfg.plan.planner {
        PlannerChoice::Auto if model.tags.frame.is_some() => PlannerChoice::GreedyFrame,
        PlannerChoice::Auto if model.tags.additive => PlannerChoice::Additive,
        PlannerChoice::Auto if matches!(model.jump, JumpCoefficient::Coordinatewise(_)) => PlannerChoice::Coordinatewise,
        PlannerChoice::Auto => PlannerChoice::OneStepInverse,
        p => p,
    }
}

fn planner_name(p: PlannerChoice) -> &'static str {
    match p {
        PlannerChoice::Auto => "auto",
        PlannerChoice::Additive => "additive",
        PlannerChoice::OneStepInverse => "one_step_inverse",
        PlannerChoice::GreedyFrame => "greedy_frame",
        PlannerChoice::Coordinatewise => "coordinatewise",
    }
}

fn verify(ctx: &Ctx, cert: &JumpChainCertificate, model: &ModelSpec, index: u64) -> VerificationReport {
    let mut rng = trial_rng(derive_seed(ctx.cfg.seed, VERIFY_PURPOSE), index);
    planner::verify_certificate(cert, model, ctx.cfg.plan.samples, &mut rng)
}

fn plan(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let x0 = start_state(cfg, &model)?;
    let choice = choose_planner(cfg, &model);
    let mut status = Status::Feasible;
    let mut entries = Vec::new();
    for (i, ball) in cfg.targets.iter().enumerate() {
        let target = Target::ball(ball.center.clone(), ball.radius);
        let mut extra = json!({});
        let planned = match choice {
            PlannerChoice::GreedyFrame => {
                let frame = model.tags.frame.clone().ok_or_else(|| {
                    RunError::Invalid(format!("model '{}' declares no frame", model.name))
                })?;
                let opts = GreedyOptions {
                    max_steps: cfg.plan.max_steps,
                    seed: cfg.seed,
                    ..GreedyOptions::default()
                };
                planner::plan_greedy_frame(&model, &frame, &x0, &target, &opts).map(|g| {
                    extra = json!({
                        "steps": g.steps,
                        "length_bound": g.length_bound,
                        "probes": g.probes,
                    });
                    g.certificate
                })
            }
            PlannerChoice::Additive => {
                let search = H0Search {
                    budget: cfg.plan.budget,
                    ..H0Search::default()
                };
                planner::plan_additive(&model.measure, &x0, &target, &search)
            }
            PlannerChoice::Coordinatewise => {
                let scales = if cfg.plan.scales.is_empty() {
                    vec![1.0; model.dim]
                } else {
                    cfg.plan.scales.clone()
                };
                let atoms = CoordinateAtoms::dyadic(scales, cfg.plan.levels, cfg.plan.kappa_lo, cfg.plan.kappa_hi);
                planner::plan_coordinatewise(&model, &atoms, &x0, &target, cfg.plan.max_steps)
            }
            PlannerChoice::OneStepInverse | PlannerChoice::Auto => planner::plan_one_step_inverse(&model, &x0, &target),
        };
        let name = if cfg.targets.len() == 1 {
            "certificate.json".to_string()
        } else {
            format!("certificate-{i}.json")
        };
        match planned {
            Ok(cert) => {
                let report = verify(ctx, &cert, &model, i as u64);
                if !report.passed {
                    status = Status::VerificationFailed;
                }
                ctx.json(&name, &cert)?;
                ctx.stdout.push_str(&format!(
                    "target {i}: feasible, {} step(s), verification {}\n{}",
                    cert.len(),
                    if report.passed { "passed" } else { "FAILED" },
                    cert.table()
                ));
                entries.push(json!({
                    "target": ball,
                    "feasible": true,
                    "steps": cert.len(),
                    "certificate_file": name,
                    "certificate": cert,
                    "verification": report,
                    "planner_detail": extra,
                }));
            }
            Err(e) if e.is_infeasible() => {
                if status == Status::Feasible {
                    status = Status::Infeasible;
                }
                let reason = match &e {
                    PlanError::ConditionI { .. } => "condition (I) fails".to_string(),
                    PlanError::Infeasible { kind, .. } => format!("{kind} infeasibility"),
                    _ => "infeasible".to_string(),
                };
                ctx.stdout.push_str(&format!("target {i}: infeasible: {e}\n"));
                entries.push(json!({
                    "target": ball,
                    "feasible": false,
                    "reason": reason,
                    "error": e.to_string(),
                }));
            }
            Err(source) => {
                return Err(RunError::Plan {
                    context: format!("{} (target {i}, planner {})", ctx.label(), planner_name(choice)),
                    source,
                })
            }
        }
    }
    Ok((
        status,
        json!({
            "planner": planner_name(choice),
            "start": x0,
            "targets": entries,
        }),
    ))
}

fn verify_cert(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let path = cfg.plan.certificate.clone().expect("validated");
    let text = std::fs::read_to_string(&path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cert: JumpChainCertificate = serde_json::from_str(&text).map_err(|source| RunError::Json {
        context: format!("reading certificate {}", path.display()),
        source,
    })?;
    let report = verify(ctx, &cert, &model, 0);
    let status = if report.passed {
        Status::Feasible
    } else {
        Status::VerificationFailed
    };
    ctx.stdout = format!(
        "certificate {}: {} step(s), verification {}\n{}",
        path.display(),
        cert.len(),
        if report.passed { "passed" } else { "FAILED" },
        cert.table()
    );
    Ok((status, json!({ "certificate": cert, "verification": report })))
}

fn estimate_hitting(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let x0 = start_state(cfg, &model)?;
    let opts = mc_options(cfg);
    let mut out = Vec::new();
    for (i, ball) in cfg.targets.iter().enumerate() {
        let e = mc::estimate_hitting(&model, &x0, cfg.numerics.horizon, &ball.center, ball.radius, &opts)
            .map_err(|e| ctx.mc_err(e))?;
        ctx.row(format!("estimate-hitting[{i}]"), &e);
        ctx.stdout.push_str(&format!(
            "target {i}: {}/{} hits, p = {:.6} in [{:.6}, {:.6}]\n",
            e.successes, e.trials, e.estimate, e.lower, e.upper
        ));
        out.push(json!({ "target": ball, "estimate": strip_runtime(&e) }));
    }
    Ok((Status::Ok, json!({ "start": x0, "horizon": cfg.numerics.horizon, "targets": out })))
}

fn config_measure(ctx: &Ctx) -> Result<IntensityMeasure, RunError> {
    match &ctx.cfg.measure {
        Some(kind) => IntensityMeasure::new(kind.clone()).map_err(|source| RunError::Measure {
            context: ctx.label(),
            source,
        }),
        None => Ok(build_model(ctx.cfg)?.measure),
    }
}

fn estimate_support(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let measure = config_measure(ctx)?;
    let opts = mc_options(cfg);
    let s = cfg.numerics.horizon;
    let mut out = Vec::new();
    for (i, ball) in cfg.targets.iter().enumerate() {
        let e = mc::estimate_levy_support(&measure, s, &ball.center, ball.radius, &opts).map_err(|e| ctx.mc_err(e))?;
        ctx.row(format!("estimate-support[{i}]"), &e);
        let oracle = if measure.is_atomic() {
            match mc::exact_cp_hitting_oracle(&measure, s, &ball.center, ball.radius, ORACLE_TRUNCATION, ORACLE_ACCURACY) {
                Ok(v) => json!({
                    "value": v,
                    "suggested_trials": mc::suggest_trials(v.probability, cfg.numerics.confidence),
                }),
                Err(e) => json!({ "error": e.to_string() }),
            }
        } else {
            json!({ "error": "oracle needs an atomic measure", "suggested_trials": cfg.numerics.trials })
        };
        ctx.stdout.push_str(&format!(
            "target {i}: {}/{} hits, p = {:.6} in [{:.6}, {:.6}]\n",
            e.successes, e.trials, e.estimate, e.lower, e.upper
        ));
        out.push(json!({ "target": ball, "estimate": strip_runtime(&e), "oracle": oracle }));
    }
    Ok((Status::Ok, json!({ "time": s, "targets": out })))
}

fn check_support(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let measure = config_measure(ctx)?;
    let report = check_support_conditions_1d(&measure);
    ctx.stdout = format!("H0 dense: {:?}\n", report.h0_dense);
    let value = serde_json::to_value(&report).map_err(|source| RunError::Json {
        context: ctx.label(),
        source,
    })?;
    Ok((Status::Ok, value))
}

fn check_e_property(ctx: &mut Ctx) -> Result<(Status, Value), RunError> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let x = start_state(cfg, &model)?;
    let y = cfg.other.clone().expect("validated");
    let r = mc::check_e_property(&model, &x, &y, cfg.numerics.horizon, &mc_options(cfg)).map_err(|e| ctx.mc_err(e))?;
    ctx.stdout = format!(
        "E|X^x - X^y|^2 = {:.6e} vs |x - y|^2 = {:.6e}: {}\n",
        r.mean,
        r.bound,
        if r.passed { "holds" } else { "violated" }
    );
    Ok((Status::Ok, json!({ "x": x, "y": y, "report": r })))
}
