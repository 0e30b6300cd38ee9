//! Command implementations behind the `rydgate` binary.
//!
//! Every command reads one block of a [`RunConfig`], writes its data files
//! into the output directory and finishes with `manifest.json`, which lists
//! the files and echoes the resolved configuration. Identical configuration
//! and seed give byte-identical files.

pub mod config;
pub mod sink;

use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use rydgate::check::{run_all, CheckOptions, CheckOutcome};
use rydgate::design::{
    analytic_optimum, curve_csv, optimize, sweep_fidelity_vs_v_omega, sweep_gate_metrics, sweep_phase_maps,
    DesignPoint, SolveOptions, SweepOptions,
};
use rydgate::gate::gate_from_dynamics;
use rydgate::noise::{
    fidelity_vs_detuning, fidelity_vs_relative_error, monte_carlo_fidelity, quadratic_fit, sensitivity_coeffs,
    NoiseSpec, SensitivityCoeffs,
};
use rydgate::output;
use rydgate::propagator::{phase_of, PhaseOptions, TraceSample};
use rydgate::{HamiltonianKind, SystemParams};
use serde::Serialize;

use config::{CheckConfig, DesignSpec, OptimizeConfig, RunConfig, SolverConfig};
pub use sink::Format;
use sink::{OutputRecord, Sink};

/// Monte-Carlo seed when neither the config nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 1;

pub const GIT_DESCRIBE: &str = env!("RYDGATE_GIT_DESCRIBE");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Dynamics,
    Sweep,
    Optimize,
    Noise,
    Check,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Dynamics => "dynamics",
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Noise => "noise",
            Command::Check => "check",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub out: PathBuf,
    pub format: Format,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Invocation {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        Invocation { command, config: None, preset: None, out: out.into(), format: Format::Csv, seed: None, threads: None }
    }
}

/// What a finished command produced.
#[derive(Debug)]
pub struct Report {
    pub files: Vec<OutputRecord>,
    /// Requested computations that did not succeed (failed cells, failed
    /// checks). Non-empty means a nonzero exit status.
    pub failures: Vec<String>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    git_describe: &'static str,
    command: Command,
    preset: Option<&'a str>,
    format: Format,
    config: &'a RunConfig,
    status: &'a str,
    failures: &'a [String],
    files: &'a [OutputRecord],
}

/// Reads the configuration named by `--config` or `--preset`.
pub fn load_config(inv: &Invocation) -> Result<RunConfig> {
    match (&inv.config, &inv.preset) {
        (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))
        }
        (None, Some(name)) => RunConfig::parse(config::preset(name)?).with_context(|| format!("in preset `{name}`")),
        (None, None) => Ok(RunConfig::default()),
    }
}

/// Applies `--seed` and fills defaults that depend on other flags.
fn resolve(inv: &Invocation, mut cfg: RunConfig) -> RunConfig {
    if let Some(noise) = cfg.noise.as_mut() {
        for mc in &mut noise.monte_carlo {
            mc.seed = Some(inv.seed.or(mc.seed).unwrap_or(DEFAULT_SEED));
        }
    }
    if inv.command == Command::Check && cfg.check.is_none() {
        cfg.check = Some(CheckConfig::default());
    }
    if let (Some(check), Some(seed)) = (cfg.check.as_mut(), inv.seed) {
        check.seed = seed;
    }
    cfg
}

/// Runs one command and writes its outputs plus the manifest.
pub fn execute(inv: &Invocation) -> Result<Report> {
    let cfg = resolve(inv, load_config(inv)?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.threads.unwrap_or(0))
        .build()
        .context("cannot build the worker pool")?;
    let mut sink = Sink::create(&inv.out, inv.format)?;
    let mut report = Report { files: vec![], failures: vec![], lines: vec![] };

    let result = pool.install(|| match inv.command {
        Command::Dynamics => dynamics(&cfg, &mut sink, &mut report),
        Command::Sweep => sweep(&cfg, &mut sink, &mut report),
        Command::Optimize => cmd_optimize(&cfg, &mut sink, &mut report),
        Command::Noise => noise(&cfg, &mut sink, &mut report),
        Command::Check => check(&cfg, &mut sink, &mut report),
    });

    let error = result.as_ref().err().map(|e| format!("{e:#}"));
    let status = match (&error, report.failures.is_empty()) {
        (Some(e), _) => e.as_str(),
        (None, true) => "ok",
        (None, false) => "failed",
    };
    let manifest = Manifest {
        tool: "rydgate",
        version: env!("CARGO_PKG_VERSION"),
        git_describe: GIT_DESCRIBE,
        command: inv.command,
        preset: inv.preset.as_deref(),
        format: inv.format,
        config: &cfg,
        status,
        failures: &report.failures,
        files: &sink.records,
    };
    let path = sink.path("manifest.json");
    std::fs::write(&path, sink::to_json(&manifest)?).with_context(|| format!("cannot write {}", path.display()))?;
    result?;
    report.files = sink.records;
    Ok(report)
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T> {
    b.as_ref().ok_or_else(|| anyhow!("configuration has no `{name}` block"))
}

fn validated(s: &SystemParams, key: &str) -> Result<SystemParams> {
    s.validate().with_context(|| format!("`{key}`"))?;
    Ok(*s)
}

#[derive(Serialize)]
struct TraceFile<'a> {
    state: &'a str,
    kind: HamiltonianKind,
    labels: &'a [&'a str],
    samples: &'a [TraceSample],
}

fn dynamics(cfg: &RunConfig, sink: &mut Sink, report: &mut Report) -> Result<()> {
    let d = block(&cfg.dynamics, "dynamics")?;
    let s = validated(&d.system, "dynamics.system")?;
    let opts = PhaseOptions { tol: d.tol, record_trace: true };
    for (state, kind) in [("01", HamiltonianKind::SingleRotating), ("11", HamiltonianKind::TripleRotating)] {
        let r = phase_of(&s, kind, 0, opts)?;
        let trace = r.trace.as_deref().unwrap_or_default();
        let file = TraceFile { state, kind, labels: kind.basis_labels(), samples: trace };
        sink.table(&format!("trace_{state}"), &format!("|{state}> amplitudes, populations and unwrapped phase"), || output::trace_csv(kind, trace), &file)?;
        report.lines.push(format!(
            "|{state}>: phase = {:.6} rad ({:.6} pi), return population = {:.3e}{}",
            r.phase,
            r.phase / std::f64::consts::PI,
            r.return_population,
            if r.unwrap_reliable { "" } else { " (unwrap unreliable)" }
        ));
    }
    let gate = gate_from_dynamics(&s, d.tol)?;
    report.lines.push(format!("fidelity_cz = {:.10}, leakage = {:.3e}", gate.fidelity_cz, gate.leakage));
    sink.json("gate", "gate phases and figures of merit", &gate)
}

fn solve_options(solver: &SolverConfig, tol: f64, window: f64) -> SolveOptions {
    SolveOptions { method: solver.method, tol, ladder_nodes: solver.ladder_nodes, window_halfwidth: window, ..Default::default() }
}

fn note_failures(report: &mut Report, file: &str, grid: &rydgate::design::SweepGrid) {
    if let Some(first) = grid.failures.first() {
        report.failures.push(format!("{file}: {} failed cells (first: {})", grid.failures.len(), first.reason));
    }
}

fn sweep(cfg: &RunConfig, sink: &mut Sink, report: &mut Report) -> Result<()> {
    let sw = block(&cfg.sweep, "sweep")?;
    let opts = SweepOptions { tol: sw.tol, window_halfwidth: sw.window_halfwidth };
    if sw.phase_maps.is_none() && sw.gate_metrics.is_none() && sw.landscapes.is_empty() {
        bail!("`sweep` requests nothing: set `phase_maps`, `gate_metrics` or `landscapes`");
    }
    if let Some(pm) = &sw.phase_maps {
        let maps = sweep_phase_maps(&pm.omega_e.axis("omega_e")?, &pm.omega0.axis("omega0")?, pm.v, &opts)
            .context("`sweep.phase_maps`")?;
        for g in [&maps.alpha, &maps.beta, &maps.population_01, &maps.population_11] {
            sink.grid(&g.metric, g)?;
            note_failures(report, &g.metric, g);
        }
        report.lines.push(format!("phase maps: {} x {} cells", maps.alpha.x.len(), maps.alpha.y.len()));
    }
    if let Some(gm) = &sw.gate_metrics {
        let maps = sweep_gate_metrics(&gm.omega_e.axis("omega_e")?, &gm.ratio.axis("omega0_over_v")?, gm.v, &opts)
            .context("`sweep.gate_metrics`")?;
        for g in [&maps.fidelity_cz, &maps.entangling_power, &maps.entangling_phase] {
            sink.grid(&g.metric, g)?;
            note_failures(report, &g.metric, g);
        }
        let best = maps.entangling_power.values.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        report.lines.push(format!("gate metrics: max entangling power = {best:.12}"));
    }
    for l in &sw.landscapes {
        let solve = solve_options(&sw.solver, sw.tol, sw.window_halfwidth);
        let land = sweep_fidelity_vs_v_omega(
            &l.omega_e.axis("omega_e")?,
            &l.v.axis("v")?,
            l.targets.alpha(),
            l.targets.beta(),
            &solve,
            &opts,
        )
        .with_context(|| format!("`sweep.landscapes` entry `{}`", l.name))?;
        // columns without a solution are undefined, not failed
        let solvable = |ix: usize| land.omega0_opt[ix].reason.is_none();
        for g in [&land.fidelity_cz, &land.population_11] {
            let stem = format!("{}_{}", l.name, g.metric);
            sink.grid(&stem, g)?;
            if let Some(f) = g.failures.iter().find(|f| solvable(f.ix)) {
                let n = g.failures.iter().filter(|f| solvable(f.ix)).count();
                report.failures.push(format!("{stem}: {n} failed cells (first: {})", f.reason));
            }
        }
        for (what, y, pts) in [
            ("omega0_opt", "omega0", &land.omega0_opt),
            ("beta_locus", "v", &land.beta_locus),
            ("analytic_locus", "v", &land.analytic_locus),
        ] {
            let stem = format!("{}_{what}", l.name);
            sink.table(&stem, "curve over omega_e; NaN where undefined", || curve_csv("omega_e", y, pts), pts)?;
        }
        let solved = land.omega0_opt.iter().filter(|p| p.reason.is_none()).count();
        report.lines.push(format!("landscape {}: Omega_0 solved in {solved}/{} columns", l.name, land.omega0_opt.len()));
    }
    Ok(())
}

#[derive(Serialize)]
struct AeComparison {
    omega0: f64,
    v: f64,
    omega0_relative_deviation: f64,
    v_relative_deviation: f64,
}

#[derive(Serialize)]
struct DesignSummary {
    omega_e: f64,
    omega0: f64,
    v: f64,
    alpha: f64,
    beta: f64,
    alpha_residual: f64,
    beta_residual: f64,
    fidelity_cz: f64,
    entangling_power: f64,
    leakage: f64,
    /// Far-detuned closed-form optimum; absent where undefined.
    analytic: Option<AeComparison>,
}

impl DesignSummary {
    fn of(d: &DesignPoint) -> Self {
        let analytic = analytic_optimum(d.omega_e).ok().map(|(o, v)| AeComparison {
            omega0: o,
            v,
            omega0_relative_deviation: (o - d.omega0) / d.omega0,
            v_relative_deviation: (v - d.v) / d.v,
        });
        DesignSummary {
            omega_e: d.omega_e,
            omega0: d.omega0,
            v: d.v,
            alpha: d.gate.alpha,
            beta: d.gate.beta,
            alpha_residual: d.alpha_residual,
            beta_residual: d.beta_residual,
            fidelity_cz: d.gate.fidelity_cz,
            entangling_power: d.gate.entangling_power,
            leakage: d.gate.leakage,
            analytic,
        }
    }
}

fn solve_design(o: &OptimizeConfig) -> Result<DesignPoint> {
    let pair = |b: Option<[f64; 2]>| b.map(|[lo, hi]| (lo, hi));
    let opts = solve_options(&o.solver, o.tol, o.window_halfwidth);
    optimize(o.omega_e, o.targets.alpha(), o.targets.beta(), pair(o.omega0_bracket), pair(o.v_bracket), &opts)
        .context("design solve failed")
}

fn cmd_optimize(cfg: &RunConfig, sink: &mut Sink, report: &mut Report) -> Result<()> {
    let o = block(&cfg.optimize, "optimize")?;
    let d = solve_design(o)?;
    let summary = DesignSummary::of(&d);
    report.lines.push(format!(
        "omega_e = {}: Omega_0 = {:.8}, V = {:.8}, fidelity_cz = {:.10}, leakage = {:.3e}",
        d.omega_e, d.omega0, d.v, d.gate.fidelity_cz, d.gate.leakage
    ));
    if let Some(a) = &summary.analytic {
        report.lines.push(format!("far-detuned estimate: Omega_0 = {:.4}, V = {:.4}", a.omega0, a.v));
    }
    sink.json("design", "solved design point", &summary)
}

#[derive(Serialize)]
struct CurvatureRow {
    parameter: &'static str,
    fitted: f64,
    r_squared: f64,
    analytic: Option<f64>,
}

#[derive(Serialize)]
struct MonteCarloFile<'a> {
    name: &'a str,
    mean: f64,
    std: f64,
    standard_error: f64,
    n: usize,
    failures: usize,
    seed: u64,
    design_fidelity: f64,
    /// `F_0 - sum_chi beta_chi sigma_chi^2` with the far-detuned coefficients.
    predicted_mean_analytic: Option<f64>,
}

fn noise(cfg: &RunConfig, sink: &mut Sink, report: &mut Report) -> Result<()> {
    let n = block(&cfg.noise, "noise")?;
    let design = match &n.design {
        DesignSpec::Explicit { system } => validated(system, "noise.design.explicit.system")?,
        DesignSpec::Solve(o) => {
            let d = solve_design(o)?;
            sink.json("design", "solved design point", &DesignSummary::of(&d))?;
            d.system(o.window_halfwidth)
        }
    };
    let f0 = gate_from_dynamics(&design, n.tol)?.fidelity_cz;
    let analytic = sensitivity_coeffs(design.omega_e() * design.pulse.t_p).ok();
    report.lines.push(format!("design fidelity_cz = {f0:.10}"));

    if let Some(re) = &n.relative_error {
        let m = re.points.max(3);
        let eps: Vec<f64> = (0..m).map(|i| -re.eps_max + 2.0 * re.eps_max * i as f64 / (m - 1) as f64).collect();
        let mut rows = Vec::new();
        for &chi in &re.parameters {
            let curve = fidelity_vs_relative_error(&design, chi, &eps, n.tol)?;
            sink.table(&format!("relative_error_{}", chi.name()), "fidelity vs relative error", || curve.to_csv(), &curve)?;
            for s in curve.samples.iter().filter(|s| s.error.is_some()) {
                report.failures.push(format!("relative error {} = {}: {}", chi.name(), s.x, s.error.as_deref().unwrap()));
            }
            let fit = quadratic_fit(&curve.samples);
            let row = CurvatureRow { parameter: chi.name(), fitted: fit.beta, r_squared: fit.r_squared, analytic: analytic.map(|c| c.get(chi)) };
            report.lines.push(format!(
                "beta_{}: fitted {:.4} (R^2 = {:.6}), far-detuned {}",
                row.parameter,
                row.fitted,
                row.r_squared,
                row.analytic.map_or("n/a".into(), |a| format!("{a:.4}"))
            ));
            rows.push(row);
        }
        sink.json("curvature", "fitted and far-detuned quadratic sensitivities", &rows)?;
    }

    if let Some(dt) = &n.detuning {
        let m = dt.points.max(2);
        let ratios: Vec<f64> = (0..m).map(|i| -dt.max_ratio + 2.0 * dt.max_ratio * i as f64 / (m - 1) as f64).collect();
        let curve = fidelity_vs_detuning(&design, &ratios, n.tol)?;
        sink.table("detuning", "fidelity vs one-photon detuning Delta / V", || curve.to_csv(), &curve)?;
        for s in curve.samples.iter().filter(|s| s.error.is_some()) {
            report.failures.push(format!("detuning {}: {}", s.x, s.error.as_deref().unwrap()));
        }
        if let Some(best) = curve.argmax() {
            report.lines.push(format!("detuning: best fidelity {:.10} at Delta/V = {:.3e}", best.fidelity, best.x));
        }
    }

    for mc in &n.monte_carlo {
        let spec = NoiseSpec {
            sigma_omega0: mc.sigma_omega0,
            sigma_v: mc.sigma_v,
            sigma_omega_e: mc.sigma_omega_e,
            samples: mc.samples,
            seed: mc.seed.unwrap_or(DEFAULT_SEED),
        };
        spec.validate().with_context(|| format!("`noise.monte_carlo` entry `{}`", mc.name))?;
        let r = monte_carlo_fidelity(&design, &spec, n.tol, mc.bins)?;
        if r.failures > 0 {
            report.failures.push(format!("monte carlo {}: {} samples failed", mc.name, r.failures));
        }
        let stem = format!("{}_histogram", mc.name);
        sink.table(&stem, "Monte-Carlo fidelity histogram", || r.histogram.to_csv(), &r.histogram)?;
        let samples: Vec<[f64; 2]> = r.fidelities.iter().enumerate().map(|(i, &f)| [i as f64, f]).collect();
        sink.table(&format!("{}_samples", mc.name), "Monte-Carlo fidelity per sample", || output::table(&["sample", "fidelity_cz"], &samples), &r.fidelities)?;
        let file = MonteCarloFile {
            name: &mc.name,
            mean: r.summary.mean,
            std: r.summary.std,
            standard_error: r.standard_error(),
            n: r.summary.n,
            failures: r.failures,
            seed: r.summary.seed,
            design_fidelity: f0,
            predicted_mean_analytic: analytic.map(|c: SensitivityCoeffs| c.predicted_mean(f0, &spec)),
        };
        report.lines.push(format!(
            "monte carlo {}: mean = {:.6} +- {:.1e}, std = {:.2e} (n = {}, seed = {})",
            mc.name, file.mean, file.standard_error, file.std, file.n, file.seed
        ));
        sink.json(&format!("{}_summary", mc.name), "Monte-Carlo summary", &file)?;
    }
    Ok(())
}

fn check(cfg: &RunConfig, sink: &mut Sink, report: &mut Report) -> Result<()> {
    let c = block(&cfg.check, "check")?;
    let opts = CheckOptions {
        tol: c.tol,
        seed: c.seed,
        cubic_samples: c.cubic_samples,
        subspace_samples: c.subspace_samples,
        inject_branch: c.inject_branch,
    };
    let outcomes = run_all(&opts);
    for o in &outcomes {
        let mark = if o.passed { "PASS" } else { "FAIL" };
        report.lines.push(format!("{mark} {:<24} residual = {:.3e} (threshold {:.0e})  {}", o.name, o.residual, o.threshold, o.detail));
        if !o.passed {
            report.failures.push(format!("check {} failed: residual {:e} > {:e}", o.name, o.residual, o.threshold));
        }
    }
    sink.table("check", "cross-validation battery", || check_csv(&outcomes), &outcomes)
}

fn check_csv(outcomes: &[CheckOutcome]) -> String {
    let mut out = String::from("name,passed,residual,threshold\n");
    for o in outcomes {
        out.push_str(&format!("{},{},{},{}\n", o.name, o.passed, output::number(o.residual), output::number(o.threshold)));
    }
    out
}

