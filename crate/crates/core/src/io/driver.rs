//! Runs configured problems and writes their outputs.

use std::path::{Path, PathBuf};

use crate::diagnostics::{convergence_orders, l2_error, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::output::{write_convergence_report, write_diagnostics_csv, write_field_snapshot, ConvergenceRow};
use crate::solver::{run, RunOutcome, StateVector, Stepper};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CHDG_OUTPUT_DIR";

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const FINAL_SNAPSHOT_FILE: &str = "final.vtk";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const ERROR_FILE: &str = "error.txt";

/// Explicit directory, then the config's, then the environment, then
/// `chdg_output`.
pub fn resolve_output_dir(explicit: Option<&Path>, config: &RunConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("chdg_output"))
}

pub fn snapshot_file_name(index: usize) -> String {
    format!("snapshot_{index:03}.vtk")
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub state: StateVector,
    pub series: DiagnosticsSeries,
    pub steps: usize,
    pub dofs: usize,
    /// `‖u_h − u‖_{L²}` at the final time, for problems with an exact solution.
    pub l2_error: Option<f64>,
}

fn prepare(config: &RunConfig) -> Result<(Stepper, StateVector)> {
    config.validate()?;
    let space = config.space()?;
    let xi0 = config.initial.coefficients(&space);
    let stepper = Stepper::new(space, config.model(), config.newton)?;
    let initial = stepper.initialize(xi0, 0.0)?;
    Ok((stepper, initial))
}

fn summarize(stepper: &Stepper, outcome: RunOutcome) -> Result<RunSummary> {
    let steps = outcome.steps;
    let (state, series) = outcome.into_result()?;
    let l2 = match stepper.model().exact {
        Some(e) => Some(l2_error(stepper.space(), &state.xi, |x, y| e.value(x, y, state.t))?),
        None => None,
    };
    Ok(RunSummary {
        state,
        series,
        steps,
        dofs: stepper.space().n_dofs(),
        l2_error: l2,
    })
}

/// Integrates without writing anything.
pub fn simulate(config: &RunConfig) -> Result<RunSummary> {
    let (mut stepper, initial) = prepare(config)?;
    let outcome = run(&mut stepper, initial, config.t_final, config.time_step(), config.output_stride, |_, _| Ok(()))?;
    summarize(&stepper, outcome)
}

/// Integrates and writes the resolved config, the diagnostics CSV, the
/// requested snapshots and the final field into `out_dir`. After a failed
/// step the diagnostics recorded so far are still written, together with
/// an error record, and the step error is returned.
pub fn run_config(config: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let (mut stepper, initial) = prepare(config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_path = out_dir.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_config_string()).map_err(|e| Error::io(&config_path, e))?;

    let space = stepper.space().clone();
    let dt = config.time_step();
    let mut pending = config.snapshot_times.iter().copied().enumerate().peekable();
    let outcome = run(&mut stepper, initial, config.t_final, dt, config.output_stride, |state, _| {
        while let Some(&(i, t)) = pending.peek() {
            if state.t < t - 1e-9 * dt {
                break;
            }
            write_field_snapshot(&space, &state.xi, state.t, &out_dir.join(snapshot_file_name(i)))?;
            pending.next();
        }
        Ok(())
    })?;

    if !outcome.series.is_empty() {
        write_diagnostics_csv(&outcome.series, &out_dir.join(DIAGNOSTICS_FILE))?;
    }
    write_field_snapshot(&space, &outcome.state.xi, outcome.state.t, &out_dir.join(FINAL_SNAPSHOT_FILE))?;
    if let Some(err) = &outcome.failure {
        let path = out_dir.join(ERROR_FILE);
        let record = format!("steps_completed={}\nt={:e}\nerror={err}\n", outcome.steps, outcome.state.t);
        std::fs::write(&path, record).map_err(|e| Error::io(&path, e))?;
    }
    summarize(&stepper, outcome)
}

/// Runs the problem on `levels` meshes, each refined once more in both
/// directions, and reports the final-time `L²` errors and observed orders.
pub fn converge(config: &RunConfig, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("converge needs at least one level".into()));
    }
    if config.model().exact.is_none() {
        let name = config.preset.map_or("custom", |p| p.name());
        return Err(Error::NoExactSolution(name.into()));
    }
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let cfg = config.refined(level as u32);
        let summary = simulate(&cfg)?;
        let err = summary.l2_error.expect("exact solution checked above");
        let order = match rows.last() {
            Some(prev @ ConvergenceRow { .. }) => Some(convergence_orders(&[prev.l2_error, err])?[0]),
            None => None,
        };
        rows.push(ConvergenceRow {
            h_label: cfg.h_label(),
            dofs: summary.dofs,
            l2_error: err,
            order,
        });
    }
    Ok(rows)
}

/// [`converge`], then writes the report into `out_dir`.
pub fn converge_to(config: &RunConfig, levels: usize, out_dir: &Path) -> Result<Vec<ConvergenceRow>> {
    let rows = converge(config, levels)?;
    write_convergence_report(&rows, &out_dir.join(CONVERGENCE_FILE))?;
    Ok(rows)
}
