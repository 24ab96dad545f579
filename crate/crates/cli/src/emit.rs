//! Report and figure-data writers. All emitted files are byte-deterministic
//! for a fixed config and seed; wall-clock metadata is confined to the
//! `run_meta.txt` sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rootcma::{ArrayGeometry, BeamResponseGrid, DEFAULT_GRID_POINTS};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::pipeline::{RunReport, TrialRecord};
use crate::CliError;

/// Figure-reproduction data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Beam-response grid of the stage's weight vector.
    Beam,
    /// Root scatter (re, im, distance, score, selected).
    Roots,
    /// Learning curves: preprocessor MSE or equalizer modulus/cost.
    Learning,
    /// Per-root deviation from the unit circle.
    Deviation,
}

impl std::str::FromStr for FigureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "beam" => Ok(Self::Beam),
            "roots" => Ok(Self::Roots),
            "learning" => Ok(Self::Learning),
            "deviation" => Ok(Self::Deviation),
            other => Err(format!("unknown figure kind `{other}`")),
        }
    }
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn join_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes `report.csv` or `report.json` plus the aggregate block.
pub fn write_report(
    report: &RunReport,
    dir: &Path,
    format: OutputFormat,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    match format {
        OutputFormat::Json => {
            let path = dir.join("report.json");
            let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Encode {
                message: e.to_string(),
            })?;
            std::fs::write(&path, json + "\n")?;
            Ok(path)
        }
        OutputFormat::Csv => {
            let path = dir.join("report.csv");
            let mut out = String::from(
                "trial,seed,error,model_order,order_correct,doa_deg,doa_abs_err_deg,\
                 mean_abs_doa_err_deg,precond_converged_iteration,avg_output_modulus,\
                 tail_mean_cost,ascent_mode_response\n",
            );
            for t in &report.trials {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    t.trial,
                    t.seed,
                    t.error.clone().unwrap_or_default().replace(',', ";"),
                    fmt_opt(&t.model_order),
                    fmt_opt(&t.order_correct),
                    join_list(&t.doa_deg),
                    join_list(&t.doa_abs_err_deg),
                    fmt_opt(&t.mean_abs_doa_err_deg),
                    fmt_opt(&t.precond_converged_iteration),
                    fmt_opt(&t.avg_output_modulus),
                    fmt_opt(&t.tail_mean_cost),
                    join_list(&t.ascent_mode_response),
                )
                .expect("writing to a String cannot fail");
            }
            let a = &report.aggregate;
            writeln!(
                out,
                "# aggregate trials={} failed={} order_accuracy={} mean_abs_doa_error_deg={} \
                 p50={} p90={} mean_avg_output_modulus={} mean_tail_cost={} \
                 mean_converged_iteration={}",
                a.trials,
                a.failed_trials,
                fmt_opt(&a.model_order_accuracy),
                fmt_opt(&a.mean_abs_doa_error_deg),
                fmt_opt(&a.doa_error_p50_deg),
                fmt_opt(&a.doa_error_p90_deg),
                fmt_opt(&a.mean_avg_output_modulus),
                fmt_opt(&a.mean_tail_cost),
                fmt_opt(&a.mean_precond_converged_iteration),
            )
            .expect("writing to a String cannot fail");
            std::fs::write(&path, out)?;
            Ok(path)
        }
    }
}

fn trial_has_curve(t: &TrialRecord) -> bool {
    !t.mse_curve.is_empty() || !t.cma_cost_curve.is_empty()
}

/// Emits the requested figure data for every trial that ran the stage;
/// errors when no trial did.
pub fn emit_figure_data(
    report: &RunReport,
    kind: FigureKind,
    geometry: &ArrayGeometry,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match kind {
        FigureKind::Beam => {
            for t in &report.trials {
                let Some(weights) = &t.beam_weights else {
                    continue;
                };
                let grid = BeamResponseGrid::compute(weights, DEFAULT_GRID_POINTS);
                let path = dir.join(format!("beam_trial{}.csv", t.trial));
                std::fs::write(&path, grid.to_csv(geometry))?;
                written.push(path);
                // The stage's weight vector as complex pairs.
                let mut out = String::from("index,re,im\n");
                for (i, w) in weights.iter().enumerate() {
                    writeln!(out, "{i},{},{}", w.re, w.im)
                        .expect("writing to a String cannot fail");
                }
                let path = dir.join(format!("weights_trial{}.csv", t.trial));
                std::fs::write(&path, out)?;
                written.push(path);
            }
        }
        FigureKind::Roots => {
            for t in &report.trials {
                if t.roots.is_empty() {
                    continue;
                }
                let mut out = String::from("re,im,abs_minus_1,beam_score,selected\n");
                for r in &t.roots {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        r.re, r.im, r.abs_minus_1, r.beam_score, r.selected as u8
                    )
                    .expect("writing to a String cannot fail");
                }
                let path = dir.join(format!("roots_trial{}.csv", t.trial));
                std::fs::write(&path, out)?;
                written.push(path);
            }
        }
        FigureKind::Learning => {
            for t in &report.trials {
                if !t.mse_curve.is_empty() {
                    let mut out = String::from("iteration,mse\n");
                    for (i, mse) in t.mse_curve.iter().enumerate() {
                        writeln!(out, "{i},{mse}").expect("writing to a String cannot fail");
                    }
                    let path = dir.join(format!("learning_precond_trial{}.csv", t.trial));
                    std::fs::write(&path, out)?;
                    written.push(path);
                }
                if !t.cma_cost_curve.is_empty() {
                    let mut out = String::from("iteration,abs_y,cost\n");
                    for (i, (y, c)) in t
                        .cma_modulus_curve
                        .iter()
                        .zip(&t.cma_cost_curve)
                        .enumerate()
                    {
                        writeln!(out, "{i},{y},{c}").expect("writing to a String cannot fail");
                    }
                    let path = dir.join(format!("learning_cma_trial{}.csv", t.trial));
                    std::fs::write(&path, out)?;
                    written.push(path);
                }
            }
        }
        FigureKind::Deviation => {
            for t in &report.trials {
                if t.roots.is_empty() {
                    continue;
                }
                let mut out = String::from("root_index,re,im,abs_minus_1,selected\n");
                for (i, r) in t.roots.iter().enumerate() {
                    writeln!(
                        out,
                        "{i},{},{},{},{}",
                        r.re, r.im, r.abs_minus_1, r.selected as u8
                    )
                    .expect("writing to a String cannot fail");
                }
                let path = dir.join(format!("deviation_trial{}.csv", t.trial));
                std::fs::write(&path, out)?;
                written.push(path);
            }
        }
    }
    if written.is_empty() {
        let stage = match kind {
            FigureKind::Beam => "no trial produced beam weights",
            FigureKind::Roots | FigureKind::Deviation => "no trial produced a root set",
            FigureKind::Learning => {
                if report.trials.iter().any(trial_has_curve) {
                    unreachable!("curves present but nothing written")
                } else {
                    "no trial produced a learning curve"
                }
            }
        };
        return Err(CliError::StageNotRun(stage.to_string()));
    }
    Ok(written)
}

/// Writes the metadata sidecar; the one place a timestamp may appear.
pub fn write_sidecar(
    config: &ExperimentConfig,
    verb: &str,
    dir: &Path,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let scenario = &config.scenario;
    let content = format!(
        "verb={verb}\nunix_time={now}\nm={}\nspacing_ratio={}\nangles_deg={}\namplitudes={}\n\
         snr_db={}\nnum_snapshots={}\nseed={}\ntrials={}\nworkers={}\n",
        scenario.geometry.num_elements(),
        scenario.geometry.spacing_ratio(),
        join_list(&scenario.angles_deg()),
        join_list(&scenario.amplitudes()),
        fmt_opt(&scenario.snr_db),
        scenario.num_snapshots,
        scenario.seed,
        config.trials,
        config.workers,
    );
    let path = dir.join("run_meta.txt");
    std::fs::write(&path, content)?;
    Ok(path)
}
