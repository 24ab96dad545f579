//! Per-trial execution of the experiment pipeline and report aggregation.
//!
//! One trial runs synthesize -> preprocess -> roots -> model order -> DOA ->
//! precondition (the nine-step summary), with the equalizer and the ascent
//! estimator as optional extra stages; the verb selects which subset runs.
//! Trials are independent and execute concurrently up to the configured
//! worker count, keyed by trial index so aggregation is order-independent.

use num_complex::Complex64;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rootcma::{
    build_polynomial, derive_trial_seed, doa_from_roots, dsft_eval, find_roots,
    reconstruct_and_precondition, run_ascent_normalized, run_descent_equalizer, run_preprocessor,
    select_roots, spatial_frequency, steering_matrix, synthesize, CmaState, RootSet, Scenario,
    SnapshotMatrix,
};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Pipeline subset selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    /// Synthesize only; reference beam pattern of the true steering sum.
    Simulate,
    /// Preprocessor chain: LMS -> polynomial (C = 1) -> roots -> DOA -> weights.
    Precondition,
    /// Ascent chain: normalized ascent -> polynomial (C = M+D-1) -> roots -> DOA.
    Roots,
    /// Plain constant-modulus descent (soft equalizer).
    Cma,
    /// Flag-driven full pipeline over many trials.
    Sweep,
}

/// Convergence tolerance and window used when reporting the preprocessor's
/// converged iteration.
const MSE_TOL: f64 = 1e-6;
const MSE_WINDOW: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct RootRecord {
    pub re: f64,
    pub im: f64,
    pub abs_minus_1: f64,
    pub beam_score: f64,
    pub selected: bool,
}

impl RootRecord {
    fn from_root_set(rs: &RootSet) -> Vec<Self> {
        (0..rs.len())
            .map(|i| Self {
                re: rs.roots()[i].re,
                im: rs.roots()[i].im,
                abs_minus_1: rs.unit_distance()[i],
                beam_score: rs.beam_score()[i],
                selected: rs.selected()[i],
            })
            .collect()
    }
}

/// Everything recorded for one trial. Learning curves and beam weights are
/// kept out of the serialized report; they feed the figure-data emitters.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub error: Option<String>,
    pub model_order: Option<usize>,
    pub order_correct: Option<bool>,
    pub doa_deg: Vec<f64>,
    /// Distance from each true source angle to its nearest estimate.
    pub doa_abs_err_deg: Vec<f64>,
    pub mean_abs_doa_err_deg: Option<f64>,
    pub precond_converged_iteration: Option<usize>,
    pub avg_output_modulus: Option<f64>,
    pub tail_mean_cost: Option<f64>,
    /// |V(e^{i mu_d})| of the rescaled ascent estimate at each true mode.
    pub ascent_mode_response: Vec<f64>,
    /// Analytic two-source roots as (re, im) pairs, when requested.
    pub analytic_roots: Option<Vec<(f64, f64)>>,
    /// Pseudoinverse preconditioning weights, one (re, im) column per
    /// estimated source.
    pub steering_weights: Option<Vec<Vec<(f64, f64)>>>,
    pub roots: Vec<RootRecord>,
    #[serde(skip)]
    pub mse_curve: Vec<f64>,
    #[serde(skip)]
    pub cma_modulus_curve: Vec<f64>,
    #[serde(skip)]
    pub cma_cost_curve: Vec<f64>,
    #[serde(skip)]
    pub beam_weights: Option<Vec<Complex64>>,
}

impl TrialRecord {
    fn empty(trial: usize, seed: u64) -> Self {
        Self {
            trial,
            seed,
            error: None,
            model_order: None,
            order_correct: None,
            doa_deg: Vec::new(),
            doa_abs_err_deg: Vec::new(),
            mean_abs_doa_err_deg: None,
            precond_converged_iteration: None,
            avg_output_modulus: None,
            tail_mean_cost: None,
            ascent_mode_response: Vec::new(),
            analytic_roots: None,
            steering_weights: None,
            roots: Vec::new(),
            mse_curve: Vec::new(),
            cma_modulus_curve: Vec::new(),
            cma_cost_curve: Vec::new(),
            beam_weights: None,
        }
    }
}

/// Mean/percentile statistics over the per-trial records; everything here is
/// recomputable from them.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub failed_trials: usize,
    pub model_order_accuracy: Option<f64>,
    pub mean_abs_doa_error_deg: Option<f64>,
    pub doa_error_p50_deg: Option<f64>,
    pub doa_error_p90_deg: Option<f64>,
    pub mean_avg_output_modulus: Option<f64>,
    pub mean_tail_cost: Option<f64>,
    pub mean_precond_converged_iteration: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

fn mode_frequencies(scenario: &Scenario) -> Vec<f64> {
    scenario
        .angles_deg()
        .iter()
        .map(|&a| {
            2.0 * std::f64::consts::PI * spatial_frequency(&scenario.geometry, a).unwrap()
        })
        .collect()
}

fn doa_errors(truth: &[f64], estimates: &[f64]) -> Vec<f64> {
    truth
        .iter()
        .map(|want| {
            estimates
                .iter()
                .map(|got| (got - want).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn tail_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let tail = values.len().div_ceil(4);
    Some(values[values.len() - tail..].iter().sum::<f64>() / tail as f64)
}

/// Root analysis shared by the preprocessor and ascent chains.
fn root_stage(
    record: &mut TrialRecord,
    weights: &[Complex64],
    c_constant: f64,
    x: &SnapshotMatrix,
    config: &ExperimentConfig,
) -> Result<(), rootcma::Error> {
    let polynomial = build_polynomial(weights, c_constant)?;
    let mut rs = find_roots(&polynomial)?;
    let order = select_roots(&mut rs, weights, config.selection_mode, config.selection_threshold)?;
    record.roots = RootRecord::from_root_set(&rs);
    record.model_order = Some(order);
    record.order_correct = Some(order == x.scenario().num_sources());
    let angles = doa_from_roots(&rs, &x.scenario().geometry)?;
    record.doa_deg = angles.clone();
    let errors = doa_errors(&x.scenario().angles_deg(), &angles);
    record.mean_abs_doa_err_deg = Some(errors.iter().sum::<f64>() / errors.len() as f64);
    record.doa_abs_err_deg = errors;
    let estimate = reconstruct_and_precondition(&angles, &x.scenario().geometry)?;
    let w = &estimate.steering_weights;
    record.steering_weights = Some(
        (0..w.cols())
            .map(|col| w.column(col).iter().map(|z| (z.re, z.im)).collect())
            .collect(),
    );
    Ok(())
}

fn run_trial(config: &ExperimentConfig, verb: Verb, trial: usize) -> TrialRecord {
    let seed = derive_trial_seed(config.scenario.seed, trial as u64);
    let mut record = TrialRecord::empty(trial, seed);
    let mut scenario = config.scenario.clone();
    scenario.seed = seed;

    let outcome = (|| -> Result<(), rootcma::Error> {
        let x = synthesize(&scenario)?;
        let m = scenario.geometry.num_elements();
        let d = scenario.num_sources();

        match verb {
            Verb::Simulate => {
                // Reference pattern: the true steering-vector sum.
                let a = steering_matrix(&scenario.geometry, &scenario.angles_deg())?;
                let summed: Vec<Complex64> =
                    (0..m).map(|row| (0..d).map(|col| a[(row, col)]).sum()).collect();
                record.beam_weights = Some(summed);
            }
            Verb::Precondition => {
                let state = run_preprocessor(&x, config.precond_policy, config.precond_iterations)?;
                record.precond_converged_iteration = state.converged_iteration(MSE_TOL, MSE_WINDOW);
                record.mse_curve = state.mse_history().to_vec();
                record.beam_weights = Some(state.weights().to_vec());
                root_stage(&mut record, state.weights(), 1.0, &x, config)?;
            }
            Verb::Roots => {
                let run = run_ascent_normalized(&x, d, config.gamma_ascent, config.cma_iterations)?;
                record.ascent_mode_response = mode_frequencies(&scenario)
                    .iter()
                    .map(|&mu| dsft_eval(&run.v, mu).norm())
                    .collect();
                record.beam_weights = Some(run.v.clone());
                root_stage(&mut record, &run.v, (m + d - 1) as f64, &x, config)?;
                if config.analytic_two_source {
                    let (z1, z2) = rootcma::analytic_roots_two_sources(run.v[1])?;
                    record.analytic_roots = Some(vec![(z1.re, z1.im), (z2.re, z2.im)]);
                }
            }
            Verb::Cma => {
                let init = CmaState::all_pass(m, 0.0)?.weights().to_vec();
                let run =
                    run_descent_equalizer(&x, config.gamma_descent, config.cma_iterations, &init)?;
                record.avg_output_modulus = Some(run.avg_output_modulus);
                record.tail_mean_cost = tail_mean(&run.cost_history);
                record.beam_weights = Some(run.weights.clone());
                record.cma_modulus_curve = run.modulus_history;
                record.cma_cost_curve = run.cost_history;
            }
            Verb::Sweep => {
                if config.run_preprocessor {
                    let state =
                        run_preprocessor(&x, config.precond_policy, config.precond_iterations)?;
                    record.precond_converged_iteration =
                        state.converged_iteration(MSE_TOL, MSE_WINDOW);
                    record.mse_curve = state.mse_history().to_vec();
                    record.beam_weights = Some(state.weights().to_vec());
                    root_stage(&mut record, state.weights(), 1.0, &x, config)?;
                }
                if config.run_ascent {
                    let run =
                        run_ascent_normalized(&x, d, config.gamma_ascent, config.cma_iterations)?;
                    record.ascent_mode_response = mode_frequencies(&scenario)
                        .iter()
                        .map(|&mu| dsft_eval(&run.v, mu).norm())
                        .collect();
                }
                if config.run_cma_equalizer {
                    let init = CmaState::all_pass(m, 0.0)?.weights().to_vec();
                    let run = run_descent_equalizer(
                        &x,
                        config.gamma_descent,
                        config.cma_iterations,
                        &init,
                    )?;
                    record.avg_output_modulus = Some(run.avg_output_modulus);
                    record.tail_mean_cost = tail_mean(&run.cost_history);
                    record.cma_modulus_curve = run.modulus_history;
                    record.cma_cost_curve = run.cost_history;
                }
            }
        }
        Ok(())
    })();

    if let Err(e) = outcome {
        record.error = Some(e.to_string());
    }
    record
}

fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    Some(sorted[idx])
}

fn aggregate(trials: &[TrialRecord]) -> Aggregate {
    let failed = trials.iter().filter(|t| t.error.is_some()).count();
    let orders: Vec<bool> = trials.iter().filter_map(|t| t.order_correct).collect();
    let mut errors: Vec<f64> = trials
        .iter()
        .flat_map(|t| t.doa_abs_err_deg.iter().copied())
        .filter(|e| e.is_finite())
        .collect();
    errors.sort_by(f64::total_cmp);
    let moduli: Vec<f64> = trials.iter().filter_map(|t| t.avg_output_modulus).collect();
    let costs: Vec<f64> = trials.iter().filter_map(|t| t.tail_mean_cost).collect();
    let converged: Vec<usize> = trials
        .iter()
        .filter_map(|t| t.precond_converged_iteration)
        .collect();
    let mean = |v: &[f64]| -> Option<f64> {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    Aggregate {
        trials: trials.len(),
        failed_trials: failed,
        model_order_accuracy: if orders.is_empty() {
            None
        } else {
            Some(orders.iter().filter(|&&ok| ok).count() as f64 / orders.len() as f64)
        },
        mean_abs_doa_error_deg: mean(&errors),
        doa_error_p50_deg: percentile(&errors, 0.5),
        doa_error_p90_deg: percentile(&errors, 0.9),
        mean_avg_output_modulus: mean(&moduli),
        mean_tail_cost: mean(&costs),
        mean_precond_converged_iteration: if converged.is_empty() {
            None
        } else {
            Some(converged.iter().sum::<usize>() as f64 / converged.len() as f64)
        },
    }
}

/// Runs all trials of the selected pipeline subset; failures are recorded
/// per trial without aborting the remaining trials.
pub fn run_pipeline(config: &ExperimentConfig, verb: Verb) -> Result<RunReport, CliError> {
    if verb == Verb::Sweep
        && !(config.run_preprocessor || config.run_ascent || config.run_cma_equalizer)
    {
        return Err(CliError::Validation {
            field: "pipeline".into(),
            message: "sweep needs at least one stage flag enabled".into(),
        });
    }
    let trials = config.trials;
    let workers = config.workers.min(trials).max(1);
    let mut records: Vec<Option<TrialRecord>> = Vec::new();
    records.resize_with(trials, || None);

    if workers == 1 {
        for (t, slot) in records.iter_mut().enumerate() {
            *slot = Some(run_trial(config, verb, t));
        }
    } else {
        let next = AtomicUsize::new(0);
        let results = Mutex::new(&mut records);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let t = next.fetch_add(1, Ordering::Relaxed);
                    if t >= trials {
                        break;
                    }
                    let record = run_trial(config, verb, t);
                    results.lock().unwrap()[t] = Some(record);
                });
            }
        });
    }

    let trials: Vec<TrialRecord> = records
        .into_iter()
        .map(|r| r.expect("every trial produced a record"))
        .collect();
    let aggregate = aggregate(&trials);
    Ok(RunReport { trials, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rootcma::{ArrayGeometry, GammaPolicy, SelectionMode, SourceConfig};
    use std::path::PathBuf;

    fn three_source_config(trials: usize, workers: usize) -> ExperimentConfig {
        ExperimentConfig {
            scenario: Scenario::new(
                ArrayGeometry::new(8, 0.5).unwrap(),
                vec![
                    SourceConfig::new(-53.2, 1.0).unwrap(),
                    SourceConfig::new(3.23, 1.0).unwrap(),
                    SourceConfig::new(20.0, 1.0).unwrap(),
                ],
                None,
                1000,
                1,
            )
            .unwrap(),
            run_cma_equalizer: false,
            run_ascent: false,
            run_preprocessor: true,
            analytic_two_source: false,
            gamma_descent: 1e-3,
            gamma_ascent: 1e-4,
            cma_iterations: 1000,
            precond_policy: GammaPolicy::Adaptive,
            precond_iterations: 1000,
            selection_mode: SelectionMode::BeamResponse,
            selection_threshold: 0.5,
            trials,
            workers,
            out_dir: PathBuf::from("out"),
            format: crate::config::OutputFormat::Csv,
        }
    }

    #[test]
    fn noise_free_preconditioner_trial_recovers_the_angles() {
        let report = run_pipeline(&three_source_config(1, 1), Verb::Precondition).unwrap();
        let trial = &report.trials[0];
        assert!(trial.error.is_none(), "{:?}", trial.error);
        assert_eq!(trial.model_order, Some(3));
        assert_eq!(trial.doa_deg.len(), 3);
        for err in &trial.doa_abs_err_deg {
            assert!(*err < 0.05, "DOA error {err}");
        }
        assert_eq!(report.aggregate.failed_trials, 0);
        assert_eq!(report.aggregate.model_order_accuracy, Some(1.0));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let serial = run_pipeline(&three_source_config(4, 1), Verb::Precondition).unwrap();
        let parallel = run_pipeline(&three_source_config(4, 4), Verb::Precondition).unwrap();
        for (a, b) in serial.trials.iter().zip(&parallel.trials) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.doa_deg, b.doa_deg);
            assert_eq!(a.model_order, b.model_order);
        }
    }

    #[test]
    fn aggregates_match_recomputation_from_records() {
        let report = run_pipeline(&three_source_config(3, 2), Verb::Precondition).unwrap();
        let mean: f64 = report
            .trials
            .iter()
            .flat_map(|t| t.doa_abs_err_deg.iter())
            .sum::<f64>()
            / report
                .trials
                .iter()
                .map(|t| t.doa_abs_err_deg.len())
                .sum::<usize>() as f64;
        assert!((report.aggregate.mean_abs_doa_error_deg.unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn simulate_produces_reference_beam_weights() {
        let report = run_pipeline(&three_source_config(1, 1), Verb::Simulate).unwrap();
        let w = report.trials[0].beam_weights.as_ref().unwrap();
        assert_eq!(w.len(), 8);
        // First element of a steering-vector sum is D.
        assert!((w[0] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn figure_emission_requires_the_stage() {
        let report = run_pipeline(&three_source_config(1, 1), Verb::Simulate).unwrap();
        let dir = std::env::temp_dir().join(format!("rootcma-emit-{}", std::process::id()));
        let geometry = ArrayGeometry::new(8, 0.5).unwrap();
        let err = crate::emit::emit_figure_data(
            &report,
            crate::emit::FigureKind::Roots,
            &geometry,
            &dir,
        )
        .unwrap_err();
        assert!(matches!(err, crate::CliError::StageNotRun(_)));
        let err = crate::emit::emit_figure_data(
            &report,
            crate::emit::FigureKind::Learning,
            &geometry,
            &dir,
        )
        .unwrap_err();
        assert!(matches!(err, crate::CliError::StageNotRun(_)));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn sweep_without_stages_is_a_config_error() {
        let mut config = three_source_config(1, 1);
        config.run_preprocessor = false;
        assert!(matches!(
            run_pipeline(&config, Verb::Sweep),
            Err(crate::CliError::Validation { .. })
        ));
    }

    #[test]
    fn preconditioning_weights_are_reported() {
        let report = run_pipeline(&three_source_config(1, 1), Verb::Precondition).unwrap();
        let w = report.trials[0].steering_weights.as_ref().unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|col| col.len() == 8));
    }

    #[test]
    fn errors_are_recorded_without_aborting() {
        let mut config = three_source_config(2, 1);
        // An absurd descent step guarantees divergence.
        config.gamma_descent = 1e9;
        let report = run_pipeline(&config, Verb::Cma).unwrap();
        assert_eq!(report.aggregate.failed_trials, 2);
        for trial in &report.trials {
            assert!(trial.error.as_deref().unwrap().contains("diverged"));
        }
    }
}
