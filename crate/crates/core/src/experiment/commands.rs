use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::checks::{conformal_suite, verify_suite, CheckReport};
use super::config::RunConfig;
use crate::conformal::{pipeline_refinement, PipelineReport};
use crate::error::{Error, Result};
use crate::solver::{evolve, initial_state, State, Termination};
use crate::symmetry::{bootstrap_norms, fit_decay_exponent, read_norm_csv, write_norm_csv, DecayFit, NormRecord};

/// Process exit status of a command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Success,
    Failure,
    Breakdown,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Failure => 1,
            Status::Breakdown => 2,
        }
    }
}

/// Loss of hyperbolicity, as written next to the norm CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub t: f64,
    pub node: usize,
    pub coords: Vec<f64>,
    pub q: f64,
    pub epsilon: f64,
    pub config_sha256: String,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub records: Vec<NormRecord>,
    pub termination: Termination,
    pub final_state: State,
}

impl Simulation {
    pub fn status(&self) -> Status {
        match self.termination {
            Termination::ReachedEnd => Status::Success,
            Termination::Breakdown { .. } => Status::Breakdown,
            Termination::SupportGuard { .. } => Status::Failure,
        }
    }

    pub fn breakdown_report(&self, cfg: &RunConfig) -> Option<BreakdownReport> {
        match self.termination {
            Termination::Breakdown { t, node, q } => Some(BreakdownReport {
                t,
                node,
                coords: self.final_state.grid().node_coords(node)[..cfg.dimension].to_vec(),
                q,
                epsilon: cfg.initial_data.epsilon,
                config_sha256: cfg.hash(),
            }),
            _ => None,
        }
    }
}

/// Evolves the configured data to `t_end`, sampling the bootstrap norms
/// every `diagnostics.sample_dt`.
pub fn run_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let grid = cfg.grid_spec()?;
    let solver = cfg.solver_config();
    let mut state = initial_state(&cfg.initial_data(), grid, solver.margin_for(&grid))?;
    let mut records = Vec::new();
    let termination = evolve(
        &mut state,
        cfg.time.t_end,
        &solver,
        Some(cfg.diagnostics.sample_dt),
        |s| {
            records.push(bootstrap_norms(s, &cfg.diagnostics, solver.q_max)?);
            Ok(())
        },
    )?;
    Ok(Simulation {
        records,
        termination,
        final_state: state,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `norms.csv` → `norms.breakdown.json`.
pub fn breakdown_path(out: &Path) -> PathBuf {
    out.with_extension("breakdown.json")
}

fn output_path(cfg: &RunConfig, out: Option<&Path>, fallback: &str) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

pub fn write_simulation(sim: &Simulation, cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut w = create(out)?;
    write_norm_csv(&mut w, &sim.records, Some(&cfg.artifact_comment()))?;
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>, dump_field: Option<&Path>) -> Result<Status> {
    let out = output_path(cfg, out, "norms.csv");
    let sim = run_simulation(cfg)?;
    write_simulation(&sim, cfg, &out)?;
    if let Some(path) = dump_field {
        let mut w = create(path)?;
        sim.final_state.phi().write_csv(&mut w, Some(&cfg.artifact_comment()))?;
        w.flush()?;
    }
    match &sim.termination {
        Termination::ReachedEnd => println!("reached t = {} ({} samples) -> {}", cfg.time.t_end, sim.records.len(), out.display()),
        Termination::Breakdown { .. } => {
            let report = sim.breakdown_report(cfg).expect("breakdown termination");
            let path = breakdown_path(&out);
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            println!(
                "breakdown at t = {} node {} (Q = {}) -> {}",
                report.t,
                report.node,
                report.q,
                path.display()
            );
        }
        Termination::SupportGuard { t, node, value } => {
            eprintln!("solution reached the grid boundary at t = {t} (node {node}, value {value:e}); enlarge grid.extent");
        }
    }
    Ok(sim.status())
}

fn finish_report(report: &CheckReport, cfg: &RunConfig, out: &Path) -> Result<Status> {
    let mut w = create(out)?;
    report.write_csv(&mut w, Some(&cfg.artifact_comment()))?;
    w.flush()?;
    for s in &report.summaries {
        println!(
            "{:<28} worst {:.3e} (threshold {:.1e}) {}",
            s.identity,
            s.worst,
            s.threshold,
            if s.passed() { "pass" } else { "FAIL" }
        );
    }
    for s in report.failures() {
        eprintln!("failed: {} worst case {} at {}", s.identity, s.worst_function, s.worst_point);
    }
    Ok(if report.passed() { Status::Success } else { Status::Failure })
}

pub fn cmd_verify(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let v = &cfg.verify;
    let report = verify_suite(v.bundles, v.commutation_bundles, cfg.seed, v.fixture_dir.as_deref())?;
    finish_report(&report, cfg, &output_path(cfg, out, "verify.csv"))
}

pub fn cmd_verify_conformal(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let v = &cfg.verify;
    let report = conformal_suite(v.conformal_points, cfg.seed, v.fixture_dir.as_deref())?;
    finish_report(&report, cfg, &output_path(cfg, out, "verify_conformal.csv"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnFit {
    pub column: String,
    pub fit: DecayFit,
}

/// Power-law fits of `sup_dphi` and `sup_q00` over `[fit_start, ∞)`.
pub fn fit_columns(records: &[NormRecord], fit_start: f64) -> Result<Vec<ColumnFit>> {
    ["sup_dphi", "sup_q00"]
        .iter()
        .map(|name| {
            let series: Vec<(f64, f64)> = records
                .iter()
                .map(|r| (r.t, r.column(name).expect("known column")))
                .collect();
            Ok(ColumnFit {
                column: name.to_string(),
                fit: fit_decay_exponent(&series, fit_start)?,
            })
        })
        .collect()
}

/// Fits the norm CSV named by the config's `output` and writes
/// `column,exponent,constant,residual,samples`.
pub fn cmd_decay_fit(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let input = cfg
        .output
        .clone()
        .ok_or_else(|| Error::config("output", "decay-fit reads the norm CSV named here"))?;
    let records = read_norm_csv(BufReader::new(File::open(&input)?))?;
    let fits = fit_columns(&records, cfg.diagnostics.fit_start(cfg.time.t_end))?;
    let out = out.map_or_else(|| input.with_extension("fit.csv"), Path::to_path_buf);
    let mut w = create(&out)?;
    writeln!(w, "# {}", cfg.artifact_comment())?;
    writeln!(w, "column,exponent,constant,residual,samples")?;
    for f in &fits {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{}",
            f.column, f.fit.exponent, f.fit.constant, f.fit.residual, f.fit.samples
        )?;
        println!("{:<9} p = {:.4} C = {:.4e} residual = {:.2e}", f.column, f.fit.exponent, f.fit.constant, f.fit.residual);
    }
    w.flush()?;
    Ok(Status::Success)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum SweepOutcome {
    Global,
    Breakdown { t: f64, node: usize, q: f64 },
    /// Support guard or another run failure; not a physical outcome.
    Invalid { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    #[serde(flatten)]
    pub outcome: SweepOutcome,
    /// `sup_dphi` decay exponent of a global run, when the window holds
    /// enough samples.
    pub exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub config_sha256: String,
    pub entries: Vec<SweepEntry>,
    /// Some Global outcome lies above a Breakdown one.
    pub non_monotone: bool,
}

impl SweepResult {
    pub fn status(&self) -> Status {
        if self.entries.iter().any(|e| matches!(e.outcome, SweepOutcome::Invalid { .. })) {
            Status::Failure
        } else if self.entries.iter().any(|e| matches!(e.outcome, SweepOutcome::Breakdown { .. })) {
            Status::Breakdown
        } else {
            Status::Success
        }
    }
}

/// One simulation per `sweep.epsilons` entry, otherwise as configured.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let mut entries = Vec::new();
    for &epsilon in &cfg.sweep.epsilons {
        let mut run = cfg.clone();
        run.initial_data.epsilon = epsilon;
        let (outcome, exponent) = match run_simulation(&run) {
            Ok(sim) => match sim.termination {
                Termination::ReachedEnd => {
                    let fit = fit_columns(&sim.records, run.diagnostics.fit_start(run.time.t_end))
                        .ok()
                        .map(|f| f[0].fit.exponent);
                    (SweepOutcome::Global, fit)
                }
                Termination::Breakdown { t, node, q } => (SweepOutcome::Breakdown { t, node, q }, None),
                Termination::SupportGuard { t, node, .. } => (
                    SweepOutcome::Invalid {
                        reason: format!("support guard at t = {t}, node {node}"),
                    },
                    None,
                ),
            },
            Err(e) => (SweepOutcome::Invalid { reason: e.to_string() }, None),
        };
        entries.push(SweepEntry {
            epsilon,
            outcome,
            exponent,
        });
    }
    let first_break = entries
        .iter()
        .position(|e| matches!(e.outcome, SweepOutcome::Breakdown { .. }));
    let non_monotone = first_break.is_some_and(|k| {
        entries[k..]
            .iter()
            .any(|e| matches!(e.outcome, SweepOutcome::Global))
    });
    Ok(SweepResult {
        config_sha256: cfg.hash(),
        entries,
        non_monotone,
    })
}

pub fn write_sweep_csv<W: Write>(out: &mut W, result: &SweepResult, comment: &str) -> Result<()> {
    writeln!(out, "# {comment}")?;
    writeln!(out, "epsilon,outcome,breakdown_t,exponent")?;
    for e in &result.entries {
        let (name, t) = match &e.outcome {
            SweepOutcome::Global => ("global", String::new()),
            SweepOutcome::Breakdown { t, .. } => ("breakdown", format!("{t:e}")),
            SweepOutcome::Invalid { .. } => ("invalid", String::new()),
        };
        let p = e.exponent.map_or(String::new(), |p| format!("{p:e}"));
        writeln!(out, "{:e},{name},{t},{p}", e.epsilon)?;
    }
    Ok(())
}

pub fn cmd_sweep_epsilon(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let result = run_sweep(cfg)?;
    let out = output_path(cfg, out, "sweep.csv");
    let mut w = create(&out)?;
    write_sweep_csv(&mut w, &result, &cfg.artifact_comment())?;
    w.flush()?;
    std::fs::write(out.with_extension("json"), serde_json::to_string_pretty(&result)?)?;
    for e in &result.entries {
        match &e.outcome {
            SweepOutcome::Global => println!("eps = {:<8} global", e.epsilon),
            SweepOutcome::Breakdown { t, .. } => println!("eps = {:<8} breakdown at t = {t:.4}", e.epsilon),
            SweepOutcome::Invalid { reason } => println!("eps = {:<8} invalid: {reason}", e.epsilon),
        }
    }
    if result.non_monotone {
        println!("note: outcomes are not monotone in epsilon");
    }
    Ok(result.status())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub levels: Vec<PipelineReport>,
    /// `rel[k] / rel[k+1]`.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

pub fn run_comparison(cfg: &RunConfig) -> Result<ComparisonTable> {
    let levels = pipeline_refinement(&cfg.pipeline_config()?, cfg.conformal.levels)?;
    let ratios: Vec<f64> = levels
        .windows(2)
        .map(|w| w[0].max_rel_diff / w[1].max_rel_diff)
        .collect();
    let converged = levels.first().is_some_and(|l| l.max_rel_diff <= cfg.conformal.max_coarse)
        && ratios.iter().all(|r| *r >= cfg.conformal.min_ratio);
    Ok(ComparisonTable {
        levels,
        ratios,
        converged,
    })
}

pub fn cmd_compactified_compare(cfg: &RunConfig, out: Option<&Path>) -> Result<Status> {
    let table = run_comparison(cfg)?;
    let out = output_path(cfg, out, "compare.csv");
    let mut w = create(&out)?;
    writeln!(w, "# {}", cfg.artifact_comment())?;
    writeln!(w, "level,h,dy,samples,skipped,max_abs_diff,direct_sup,max_rel_diff,ratio")?;
    for (k, l) in table.levels.iter().enumerate() {
        let ratio = if k == 0 {
            String::new()
        } else {
            format!("{:e}", table.ratios[k - 1])
        };
        writeln!(
            w,
            "{k},{:e},{:e},{},{},{:e},{:e},{:e},{ratio}",
            l.h, l.dy, l.samples, l.skipped, l.max_abs_diff, l.direct_sup, l.max_rel_diff
        )?;
        println!("level {k}: h = {:.4} rel diff = {:.3e} {ratio}", l.h, l.max_rel_diff);
    }
    w.flush()?;
    Ok(if table.converged { Status::Success } else { Status::Failure })
}
