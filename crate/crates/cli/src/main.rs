//! `socroute`: battery model fitting, simulation, log ingestion, instance
//! generation, solving and benchmarking from the command line.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 infeasible where a
//! feasible answer was required, 3 internal error.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use socroute_core::bench::{format_summary, sig4, write_records, write_summary};
use socroute_core::models::{default_soc_grid, power_grid};
use socroute_core::rcspp::DEFAULT_BRUTEFORCE_MAX_NODES;
use socroute_core::simulator::{
    coulomb_count, compare_models, default_threshold, integrate, predict_single_step,
    segment_pulses, synthesize_log, Comparison, IntegratedModel, MeasuredLog, PulseProfile,
    SingleStepModel, Trajectory, DEFAULT_MIN_PULSE_S, DEFAULT_STEPS_PER_LEG,
};
use socroute_core::{
    aggregate, check_solution, export_milp, fit_linear, generate_instance, load_battery_config,
    run_bench, solve, BatteryParams, BenchPlan, GenConfig, Instance, LinearFit, ModelKind, OcvCurve,
    ResourceModel, SolveError, SolveOptions, SolverKind,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "socroute", version, about = "Battery SOC models and battery-constrained shortest paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the linear inverse-voltage model of a battery over a power band.
    Fit(FitArgs),
    /// Run SOC models over a pulse profile and compare them.
    Simulate(SimulateArgs),
    /// Segment a measured log into constant-power legs and coulomb-count it.
    Ingest(IngestArgs),
    /// Produce a synthetic measured log by driving the RC model.
    SynthLog(SynthLogArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve an instance.
    Solve(SolveArgs),
    /// Write an instance's MILP in LP file format.
    ExportMilp(ExportArgs),
    /// Run a benchmark plan and summarise it.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Battery config JSON.
    #[arg(long)]
    battery: PathBuf,
    /// Lower end of the power band, W.
    #[arg(long)]
    pmin: f64,
    /// Upper end of the power band, W.
    #[arg(long)]
    pmax: f64,
    /// Power grid intervals.
    #[arg(long, default_value_t = 10)]
    power_steps: usize,
    #[arg(long, default_value_t = 0.2)]
    soc_min: f64,
    #[arg(long, default_value_t = 1.0)]
    soc_max: f64,
    /// SOC grid intervals.
    #[arg(long, default_value_t = 16)]
    soc_steps: usize,
    /// Fit against R0 + R1, the resistance seen on legs much longer than tau.
    #[arg(long)]
    steady_state: bool,
    /// Output fit JSON.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimModel {
    Ohmic,
    Rc,
    Linear,
    Nominal,
}

impl SimModel {
    fn name(self) -> &'static str {
        match self {
            Self::Ohmic => "ohmic",
            Self::Rc => "rc",
            Self::Linear => "linear",
            Self::Nominal => "nominal",
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    battery: PathBuf,
    /// Pulse profile JSON.
    #[arg(long)]
    profile: PathBuf,
    /// Comma-separated models to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ohmic,rc,linear,nominal")]
    models: Vec<SimModel>,
    /// Fit JSON for the linear model; fitted over the profile's power range
    /// when omitted.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Model the others are compared against; defaults to ohmic, else rc,
    /// else the first model listed.
    #[arg(long, value_enum)]
    reference: Option<SimModel>,
    #[arg(long, default_value_t = 1.0)]
    soc0: f64,
    /// RK4 steps per leg for the integrated models.
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_LEG)]
    steps: usize,
    /// Output directory for `<model>.csv` and `comparison.json`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Measured log CSV (`t_s,power_w,voltage_v,current_a`).
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    battery: PathBuf,
    /// Pulse threshold in W; 5% of the log's peak power when omitted.
    #[arg(long)]
    threshold: Option<f64>,
    /// Shortest run kept as its own leg, s.
    #[arg(long, default_value_t = DEFAULT_MIN_PULSE_S)]
    min_duration: f64,
    /// SOC at the first log row.
    #[arg(long, default_value_t = 1.0)]
    soc0: f64,
    /// Coulomb-counted trajectory CSV; `<output stem>.truth.csv` when omitted.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output profile JSON.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SynthLogArgs {
    #[arg(long)]
    battery: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    soc0: f64,
    /// Sample interval, s.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Relative power noise amplitude.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Node count.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator config JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's starting SOC.
    #[arg(long)]
    soc0: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "labeling")]
    solver: SolverKind,
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    /// Wall-clock limit, s.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Node limit for the brute-force solver.
    #[arg(long, default_value_t = DEFAULT_BRUTEFORCE_MAX_NODES)]
    max_brute_nodes: usize,
    /// Exit with status 2 when no feasible path exists.
    #[arg(long)]
    require_feasible: bool,
    /// Output solution JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "linear")]
    model: ModelKind,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Bench plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Generator config JSON; defaults when omitted.
    #[arg(long)]
    gen_config: Option<PathBuf>,
    /// Worker threads; 1 runs cells sequentially.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Summary CSV; `<output stem>_summary.csv` when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-cell records CSV.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn internal(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        error: error.into(),
    }
}

trait OrExit<T> {
    fn or_usage(self, what: impl Display) -> Result<T, Failure>;
    fn or_internal(self, what: impl Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_usage(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| usage(e.into().context(what.to_string())))
    }

    fn or_internal(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| internal(e.into().context(what.to_string())))
    }
}

fn check_inputs(paths: &[&Path]) -> CmdResult {
    for p in paths {
        if !p.is_file() {
            return Err(usage(anyhow!("input file {} does not exist", p.display())));
        }
    }
    Ok(())
}

fn check_outputs(paths: &[&Path]) -> CmdResult {
    for p in paths {
        if p.is_dir() {
            return Err(usage(anyhow!("output {} is a directory", p.display())));
        }
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(usage(anyhow!("output directory {} does not exist", parent.display())));
            }
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).or_usage(format!("reading {}", path.display()))
}

fn load_battery(path: &Path) -> Result<(OcvCurve, BatteryParams), Failure> {
    load_battery_config(&read_text(path)?).or_usage(format!("battery config {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).or_usage(format!("{what} {}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> CmdResult {
    let file = File::create(path).or_internal(format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    f(&mut out)
        .and_then(|()| out.flush().map_err(Into::into))
        .or_internal(format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn pct(soc: f64) -> String {
    format!("{}%", sig4(100.0 * soc))
}

/// `dir/stem<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_fit(a: FitArgs) -> CmdResult {
    check_inputs(&[&a.battery])?;
    check_outputs(&[&a.output])?;
    if !(a.pmin >= 0.0 && a.pmax > a.pmin) {
        return Err(usage(anyhow!("need 0 <= pmin < pmax, got {} and {}", a.pmin, a.pmax)));
    }
    if !(a.soc_min < a.soc_max) || a.soc_steps == 0 || a.power_steps == 0 {
        return Err(usage(anyhow!("SOC range must be increasing and grid steps positive")));
    }
    let (curve, mut params) = load_battery(&a.battery)?;
    if a.steady_state {
        params = params.steady_state();
    }
    let socs = power_grid(a.soc_min, a.soc_max, a.soc_steps);
    let fit = fit_linear(&curve, &params, &socs, &power_grid(a.pmin, a.pmax, a.power_steps))
        .or_usage("fitting")?;
    write_json(&a.output, &fit)?;
    println!("1/V = {:e}*soc + {:e}*P + {:e}", fit.a, fit.b, fit.c);
    println!(
        "domain soc {}..{}, P {}..{} W; max relative residual {}",
        a.soc_min,
        a.soc_max,
        sig4(a.pmin),
        sig4(a.pmax),
        pct(fit.max_rel_residual)
    );
    Ok(())
}

/// Report written next to the simulated trajectories.
#[derive(Debug, Serialize)]
struct SimReport {
    reference: String,
    soc0: f64,
    final_soc: Vec<(String, f64)>,
    comparisons: Vec<Comparison>,
}

fn profile_fit(curve: &OcvCurve, params: &BatteryParams, profile: &PulseProfile) -> Result<LinearFit, Failure> {
    let (lo, hi) = profile.power_range();
    let powers = if hi > lo { power_grid(lo, hi, 10) } else { power_grid(0.0, hi.max(1.0), 10) };
    fit_linear(curve, params, &default_soc_grid(), &powers).or_usage("fitting over the profile's power range")
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut inputs = vec![a.battery.as_path(), a.profile.as_path()];
    if let Some(f) = &a.fit {
        inputs.push(f);
    }
    check_inputs(&inputs)?;
    if a.output.exists() && !a.output.is_dir() {
        return Err(usage(anyhow!("output {} exists and is not a directory", a.output.display())));
    }
    if a.models.is_empty() {
        return Err(usage(anyhow!("no models selected")));
    }
    if a.steps == 0 {
        return Err(usage(anyhow!("steps must be positive")));
    }
    let (curve, params) = load_battery(&a.battery)?;
    let profile: PulseProfile = load_json(&a.profile, "profile")?;
    profile.validate().or_usage(format!("profile {}", a.profile.display()))?;
    let reference = a.reference.unwrap_or_else(|| {
        [SimModel::Ohmic, SimModel::Rc]
            .into_iter()
            .find(|m| a.models.contains(m))
            .unwrap_or(a.models[0])
    });
    let mut models = a.models.clone();
    if !models.contains(&reference) {
        models.push(reference);
    }
    let fit = match (&a.fit, models.contains(&SimModel::Linear)) {
        (Some(path), _) => {
            let fit: LinearFit = load_json(path, "fit")?;
            fit.validate().or_usage(format!("fit {}", path.display()))?;
            Some(fit)
        }
        (None, true) => Some(profile_fit(&curve, &params, &profile)?),
        (None, false) => None,
    };

    let mut trajectories: Vec<Trajectory> = Vec::new();
    for &m in &models {
        let run = match m {
            SimModel::Ohmic => integrate(IntegratedModel::Ohmic, a.soc0, &profile, a.steps, &curve, &params),
            SimModel::Rc => integrate(IntegratedModel::Rc, a.soc0, &profile, a.steps, &curve, &params),
            SimModel::Linear => {
                let fit = fit.as_ref().expect("fit resolved above");
                predict_single_step(SingleStepModel::Linear, a.soc0, &profile, fit, &params)
            }
            SimModel::Nominal => {
                let fit = LinearFit::nominal(params.v_nom);
                predict_single_step(SingleStepModel::Nominal, a.soc0, &profile, &fit, &params)
            }
        };
        trajectories.push(run.or_usage(format!("model {}", m.name()))?);
    }

    fs::create_dir_all(&a.output).or_internal(format!("creating {}", a.output.display()))?;
    for t in &trajectories {
        let path = a.output.join(format!("{}.csv", t.model_name));
        write_file(&path, |w| Ok(t.write_csv(w)?))?;
    }
    let ref_idx = models.iter().position(|&m| m == reference).expect("reference is in the list");
    let comparisons = compare_models(&trajectories[ref_idx], &trajectories).or_internal("comparing")?;
    let report = SimReport {
        reference: reference.name().into(),
        soc0: a.soc0,
        final_soc: trajectories
            .iter()
            .map(|t| (t.model_name.clone(), t.final_soc().unwrap_or(f64::NAN)))
            .collect(),
        comparisons,
    };
    write_json(&a.output.join("comparison.json"), &report)?;

    println!("reference: {}", reference.name());
    println!("{:<8} {:>10} {:>12} {:>10} {:>10}", "model", "final SOC", "final diff", "max diff", "rms diff");
    for ((name, soc), c) in report.final_soc.iter().zip(&report.comparisons) {
        println!(
            "{:<8} {:>10} {:>10} pp {:>7} pp {:>7} pp",
            name,
            pct(*soc),
            sig4(c.final_diff_pp),
            sig4(c.max_diff_pp),
            sig4(c.rms_diff_pp)
        );
    }
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> CmdResult {
    check_inputs(&[&a.log, &a.battery])?;
    let truth_path = a.truth.clone().unwrap_or_else(|| sibling(&a.output, ".truth.csv"));
    check_outputs(&[&a.output, &truth_path])?;
    let (_, params) = load_battery(&a.battery)?;
    let file = File::open(&a.log).or_usage(format!("opening {}", a.log.display()))?;
    let log = MeasuredLog::read_csv(file).or_usage(format!("log {}", a.log.display()))?;
    let threshold = a.threshold.unwrap_or_else(|| default_threshold(&log));
    let profile = segment_pulses(&log, threshold, a.min_duration).or_usage("segmenting pulses")?;
    let truth = coulomb_count(&log, params.capacity_coulombs, a.soc0).or_usage("coulomb counting")?;
    write_json(&a.output, &profile)?;
    write_file(&truth_path, |w| Ok(truth.write_csv(w)?))?;

    println!("{} legs above {} W", profile.legs.len(), sig4(threshold));
    for (i, leg) in profile.legs.iter().enumerate() {
        println!("  leg {i:>3}: {:>10} W for {:>8} s", sig4(leg.power), sig4(leg.duration));
    }
    println!("coulomb-counted final SOC {}", pct(truth.final_soc().unwrap_or(f64::NAN)));
    Ok(())
}

fn cmd_synth_log(a: SynthLogArgs) -> CmdResult {
    check_inputs(&[&a.battery, &a.profile])?;
    check_outputs(&[&a.output])?;
    let (curve, params) = load_battery(&a.battery)?;
    let profile: PulseProfile = load_json(&a.profile, "profile")?;
    let synth = synthesize_log(&profile, a.soc0, &curve, &params, a.dt, a.noise, a.seed)
        .or_usage("synthesising log")?;
    write_file(&a.output, |w| Ok(synth.log.write_csv(w)?))?;
    println!("{} rows, final SOC {}", synth.log.rows.len(), pct(synth.final_state.soc));
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    if let Some(c) = &a.config {
        check_inputs(&[c])?;
    }
    check_outputs(&[&a.output])?;
    let mut config: GenConfig = match &a.config {
        Some(path) => load_json(path, "generator config")?,
        None => GenConfig::default(),
    };
    if let Some(soc0) = a.soc0 {
        config.soc0 = soc0;
    }
    let inst = generate_instance(a.n, a.seed, &config).or_usage("generating instance")?;
    let text = inst.to_json().or_internal("serialising instance")?;
    write_file(&a.output, |w| Ok(writeln!(w, "{text}")?))?;
    println!(
        "{} nodes, {} edges, start {} goal {}, start SOC {}",
        inst.node_count(),
        inst.edges.len(),
        inst.start,
        inst.goal,
        pct(inst.soc0)
    );
    Ok(())
}

fn load_instance_checked(path: &Path) -> Result<Instance, Failure> {
    let inst = Instance::from_json(&read_text(path)?).or_usage(format!("instance {}", path.display()))?;
    inst.validate().or_usage(format!("instance {}", path.display()))?;
    Ok(inst)
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    check_inputs(&[&a.instance])?;
    if let Some(o) = &a.output {
        check_outputs(&[o])?;
    }
    let time_limit = match a.time_limit {
        Some(s) if !(s.is_finite() && s >= 0.0) => {
            return Err(usage(anyhow!("time limit must be a non-negative number of seconds")))
        }
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let inst = load_instance_checked(&a.instance)?;
    let model = ResourceModel::for_instance(a.model, &inst);
    let options = SolveOptions {
        time_limit,
        bruteforce_max_nodes: a.max_brute_nodes,
    };
    let sol = match solve(a.solver, &inst, &model, &options) {
        Ok(sol) => sol,
        Err(e @ SolveError::Timeout { .. }) => return Err(internal(e)),
        Err(e) => return Err(usage(e)),
    };
    let report = check_solution(&inst, &model, &sol);
    if !report.ok {
        let listed: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(internal(anyhow!("solution failed verification: {}", listed.join("; "))));
    }
    if let Some(o) = &a.output {
        write_json(o, &sol)?;
    }
    match sol.cost {
        Some(cost) => {
            let path: Vec<String> = sol.nodes.iter().map(ToString::to_string).collect();
            println!("{} / {}: optimal, cost {}", a.solver.name(), a.model.name(), sig4(cost));
            println!("path {}", path.join(" -> "));
            println!(
                "SOC {} -> {}",
                pct(sol.soc_profile[0]),
                pct(*sol.soc_profile.last().expect("optimal path is non-empty"))
            );
        }
        None => println!("{} / {}: infeasible", a.solver.name(), a.model.name()),
    }
    println!("{} expanded in {} s", sol.expanded, sig4(sol.wall_time_s));
    if a.require_feasible && !sol.is_optimal() {
        return Err(Failure {
            code: EXIT_INFEASIBLE,
            error: anyhow!("no feasible path from {} to {}", inst.start, inst.goal),
        });
    }
    Ok(())
}

fn cmd_export(a: ExportArgs) -> CmdResult {
    check_inputs(&[&a.instance])?;
    check_outputs(&[&a.output])?;
    let inst = load_instance_checked(&a.instance)?;
    let text = export_milp(&inst, &ResourceModel::for_instance(a.model, &inst));
    write_file(&a.output, |w| Ok(w.write_all(text.as_bytes())?))?;
    println!(
        "{} binaries, {} continuous variables written to {}",
        inst.edges.len(),
        inst.node_count(),
        a.output.display()
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let mut inputs = vec![a.plan.as_path()];
    if let Some(g) = &a.gen_config {
        inputs.push(g);
    }
    check_inputs(&inputs)?;
    let summary_path = a.summary.clone().unwrap_or_else(|| sibling(&a.output, "_summary.csv"));
    check_outputs(&[&a.output, &summary_path])?;
    if a.jobs == 0 {
        return Err(usage(anyhow!("--jobs must be at least 1")));
    }
    let plan = BenchPlan::from_json(&read_text(&a.plan)?).or_usage(format!("plan {}", a.plan.display()))?;
    let gen: GenConfig = match &a.gen_config {
        Some(path) => load_json(path, "generator config")?,
        None => GenConfig::default(),
    };
    gen.validate().or_usage("generator config")?;
    eprintln!("running {} cells", plan.cell_count());
    let records = run_bench(&plan, &gen, a.jobs).or_internal("benchmark")?;
    write_file(&a.output, |w| Ok(write_records(&records, w)?))?;
    let rows = aggregate(&records).or_internal("aggregating")?;
    write_file(&summary_path, |w| Ok(write_summary(&rows, w)?))?;
    print!("{}", format_summary(&rows));
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::SynthLog(a) => cmd_synth_log(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::ExportMilp(a) => cmd_export(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
