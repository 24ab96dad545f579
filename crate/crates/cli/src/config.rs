//! Flat key-value experiment configuration with dotted sections.
//!
//! Every recognized key is listed in `FORMATS.md`; unknown keys and duplicate
//! keys are rejected with their line number, and validation failures carry
//! the offending field name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rootcma::{ArrayGeometry, GammaPolicy, Scenario, SelectionMode, SourceConfig};

use crate::CliError;

/// Output encoding for report files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("expected csv or json, got {other}")),
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub run_cma_equalizer: bool,
    pub run_ascent: bool,
    pub run_preprocessor: bool,
    pub analytic_two_source: bool,
    pub gamma_descent: f64,
    pub gamma_ascent: f64,
    pub cma_iterations: usize,
    pub precond_policy: GammaPolicy,
    pub precond_iterations: usize,
    pub selection_mode: SelectionMode,
    pub selection_threshold: f64,
    pub trials: usize,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario.geometry.m",
    "scenario.geometry.spacing_ratio",
    "scenario.angles_deg",
    "scenario.amplitudes",
    "scenario.noise_free",
    "scenario.snr_db",
    "scenario.num_snapshots",
    "scenario.seed",
    "pipeline.run_cma_equalizer",
    "pipeline.run_ascent",
    "pipeline.run_preprocessor",
    "pipeline.analytic_two_source",
    "cma.gamma_descent",
    "cma.gamma_ascent",
    "cma.iterations",
    "precond.gamma_mode",
    "precond.gamma",
    "precond.iterations",
    "roots.selection",
    "roots.threshold",
    "run.trials",
    "run.workers",
    "run.format",
    "run.out",
];

struct RawConfig {
    values: BTreeMap<&'static str, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let Some(&known) = KNOWN_KEYS.iter().find(|&&k| k == key) else {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("unknown key `{key}`"),
                });
            };
            if let Some((first_line, _)) = values.get(known) {
                return Err(CliError::Parse {
                    line: line_no,
                    message: format!("duplicate key `{key}` (first set at line {first_line})"),
                });
            }
            values.insert(known, (line_no, value.to_string()));
        }
        Ok(Self { values })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key).map(|(_, v)| v)
    }
}

fn validation(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_scalar<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| validation(field, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(field: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(validation(field, format!("expected true/false, got `{other}`"))),
    }
}

fn parse_list(field: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|item| parse_scalar::<f64>(field, item.trim()))
        .collect()
}

/// Loads, fills defaults, and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut raw = RawConfig::parse(&text)?;

    let m: usize = match raw.take("scenario.geometry.m") {
        Some(v) => parse_scalar("scenario.geometry.m", &v)?,
        None => return Err(validation("scenario.geometry.m", "missing required key")),
    };
    let spacing: f64 = match raw.take("scenario.geometry.spacing_ratio") {
        Some(v) => parse_scalar("scenario.geometry.spacing_ratio", &v)?,
        None => 0.5,
    };
    let geometry = ArrayGeometry::new(m, spacing)
        .map_err(|e| validation("scenario.geometry", e.to_string()))?;

    let angles = match raw.take("scenario.angles_deg") {
        Some(v) => parse_list("scenario.angles_deg", &v)?,
        None => return Err(validation("scenario.angles_deg", "missing required key")),
    };
    let amplitudes = match raw.take("scenario.amplitudes") {
        Some(v) => parse_list("scenario.amplitudes", &v)?,
        None => vec![1.0; angles.len()],
    };
    if amplitudes.len() != angles.len() {
        return Err(validation(
            "scenario.amplitudes",
            format!(
                "{} amplitudes for {} angles",
                amplitudes.len(),
                angles.len()
            ),
        ));
    }
    let sources: Vec<SourceConfig> = angles
        .iter()
        .zip(&amplitudes)
        .map(|(&a, &c)| SourceConfig::new(a, c))
        .collect::<Result<_, _>>()
        .map_err(|e| validation("scenario.angles_deg", e.to_string()))?;

    let noise_free = match raw.take("scenario.noise_free") {
        Some(v) => Some(parse_bool("scenario.noise_free", &v)?),
        None => None,
    };
    let snr_db = match raw.take("scenario.snr_db") {
        Some(v) => Some(parse_scalar::<f64>("scenario.snr_db", &v)?),
        None => None,
    };
    // Noise-free is an explicit marker; a missing SNR also means noise-free.
    let snr = match (noise_free, snr_db) {
        (Some(true), Some(_)) => {
            return Err(validation(
                "scenario.noise_free",
                "conflicts with scenario.snr_db; pick one",
            ))
        }
        (Some(true), None) | (None, None) => None,
        (Some(false), None) => {
            return Err(validation(
                "scenario.snr_db",
                "required when scenario.noise_free = false",
            ))
        }
        (_, Some(snr)) => Some(snr),
    };

    let num_snapshots = match raw.take("scenario.num_snapshots") {
        Some(v) => parse_scalar("scenario.num_snapshots", &v)?,
        None => 8000,
    };
    let seed = match raw.take("scenario.seed") {
        Some(v) => parse_scalar("scenario.seed", &v)?,
        None => 1,
    };
    let scenario = Scenario::new(geometry, sources, snr, num_snapshots, seed)
        .map_err(|e| validation("scenario", e.to_string()))?;

    let run_cma_equalizer = match raw.take("pipeline.run_cma_equalizer") {
        Some(v) => parse_bool("pipeline.run_cma_equalizer", &v)?,
        None => false,
    };
    let run_ascent = match raw.take("pipeline.run_ascent") {
        Some(v) => parse_bool("pipeline.run_ascent", &v)?,
        None => false,
    };
    let run_preprocessor = match raw.take("pipeline.run_preprocessor") {
        Some(v) => parse_bool("pipeline.run_preprocessor", &v)?,
        None => true,
    };
    let analytic_two_source = match raw.take("pipeline.analytic_two_source") {
        Some(v) => parse_bool("pipeline.analytic_two_source", &v)?,
        None => false,
    };
    if analytic_two_source && scenario.num_sources() != 2 {
        return Err(validation(
            "pipeline.analytic_two_source",
            format!("requires exactly 2 sources, scenario has {}", scenario.num_sources()),
        ));
    }

    let gamma_descent: f64 = match raw.take("cma.gamma_descent") {
        Some(v) => parse_scalar("cma.gamma_descent", &v)?,
        None => 1e-3,
    };
    let gamma_ascent: f64 = match raw.take("cma.gamma_ascent") {
        Some(v) => parse_scalar("cma.gamma_ascent", &v)?,
        None => 1e-4,
    };
    let cma_iterations = match raw.take("cma.iterations") {
        Some(v) => parse_scalar("cma.iterations", &v)?,
        None => 8000,
    };
    for (field, gamma) in [("cma.gamma_descent", gamma_descent), ("cma.gamma_ascent", gamma_ascent)] {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(validation(field, format!("must be non-negative, got {gamma}")));
        }
    }

    let precond_gamma = match raw.take("precond.gamma") {
        Some(v) => parse_scalar::<f64>("precond.gamma", &v)?,
        None => 5e-3,
    };
    if !(precond_gamma.is_finite() && precond_gamma > 0.0) {
        return Err(validation("precond.gamma", format!("must be positive, got {precond_gamma}")));
    }
    let precond_policy = match raw.take("precond.gamma_mode").as_deref() {
        None | Some("adaptive") => GammaPolicy::Adaptive,
        Some("fixed") => GammaPolicy::Fixed(precond_gamma),
        Some(other) => {
            return Err(validation(
                "precond.gamma_mode",
                format!("expected fixed or adaptive, got `{other}`"),
            ))
        }
    };
    let precond_iterations = match raw.take("precond.iterations") {
        Some(v) => parse_scalar("precond.iterations", &v)?,
        None => 1000,
    };
    if run_preprocessor && precond_iterations == 0 {
        return Err(validation(
            "precond.iterations",
            "must be at least 1 when the preprocessor runs",
        ));
    }

    let selection_mode = match raw.take("roots.selection").as_deref() {
        None | Some("beam_response") => SelectionMode::BeamResponse,
        Some("unit_distance") => SelectionMode::UnitDistance,
        Some(other) => {
            return Err(validation(
                "roots.selection",
                format!("expected beam_response or unit_distance, got `{other}`"),
            ))
        }
    };
    let selection_threshold: f64 = match raw.take("roots.threshold") {
        Some(v) => parse_scalar("roots.threshold", &v)?,
        None => match selection_mode {
            SelectionMode::BeamResponse => 0.5,
            SelectionMode::UnitDistance => 1e-3,
        },
    };
    if !(selection_threshold.is_finite() && selection_threshold > 0.0) {
        return Err(validation(
            "roots.threshold",
            format!("must be positive, got {selection_threshold}"),
        ));
    }

    let trials = match raw.take("run.trials") {
        Some(v) => parse_scalar("run.trials", &v)?,
        None => 1,
    };
    if trials == 0 {
        return Err(validation("run.trials", "must be at least 1"));
    }
    let workers = match raw.take("run.workers") {
        Some(v) => parse_scalar("run.workers", &v)?,
        None => 1,
    };
    if workers == 0 {
        return Err(validation("run.workers", "must be at least 1"));
    }
    let format = match raw.take("run.format") {
        Some(v) => v
            .parse::<OutputFormat>()
            .map_err(|e| validation("run.format", e))?,
        None => OutputFormat::Csv,
    };
    let out_dir = PathBuf::from(raw.take("run.out").unwrap_or_else(|| "out".to_string()));

    debug_assert!(raw.values.is_empty(), "all keys consumed");

    Ok(ExperimentConfig {
        scenario,
        run_cma_equalizer,
        run_ascent,
        run_preprocessor,
        analytic_two_source,
        gamma_descent,
        gamma_ascent,
        cma_iterations,
        precond_policy,
        precond_iterations,
        selection_mode,
        selection_threshold,
        trials,
        workers,
        out_dir,
        format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write;

    fn write_config(content: &str) -> temppath::TempConfig {
        temppath::TempConfig::new(content)
    }

    mod temppath {
        use std::path::{Path, PathBuf};

        pub struct TempConfig {
            path: PathBuf,
        }

        impl TempConfig {
            pub fn new(content: &str) -> Self {
                let mut path = std::env::temp_dir();
                let unique = format!(
                    "rootcma-config-{}-{:?}.conf",
                    std::process::id(),
                    std::thread::current().id()
                );
                path.push(unique);
                std::fs::write(&path, content).unwrap();
                Self { path }
            }

            pub fn path(&self) -> &Path {
                &self.path
            }
        }

        impl Drop for TempConfig {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let f = write_config("scenario.geometry.m = 8\nscenario.angles_deg = 20.0\n");
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg.scenario.geometry.num_elements(), 8);
        assert_eq!(cfg.scenario.snr_db, None);
        assert_eq!(cfg.scenario.num_snapshots, 8000);
        assert_eq!(cfg.trials, 1);
        assert!(cfg.run_preprocessor);
        assert_eq!(cfg.format, OutputFormat::Csv);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let f = write_config("scenario.geometry.m = 8\nbogus.key = 1\n");
        match load_config(f.path()) {
            Err(CliError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus.key"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let f = write_config("scenario.geometry.m = 8\nscenario.geometry.m = 9\n");
        assert!(matches!(
            load_config(f.path()),
            Err(CliError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_angles_fail_validation() {
        let f = write_config("scenario.geometry.m = 8\nscenario.angles_deg = 10.0, 10.0\n");
        match load_config(f.path()) {
            Err(CliError::Validation { field, .. }) => assert_eq!(field, "scenario"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn noise_flags_conflict() {
        let f = write_config(
            "scenario.geometry.m = 8\nscenario.angles_deg = 5\nscenario.noise_free = true\nscenario.snr_db = 20\n",
        );
        assert!(matches!(
            load_config(f.path()),
            Err(CliError::Validation { .. })
        ));
    }

    #[test]
    fn analytic_flag_needs_two_sources() {
        let f = write_config(
            "scenario.geometry.m = 8\nscenario.angles_deg = 5\npipeline.analytic_two_source = true\n",
        );
        match load_config(f.path()) {
            Err(CliError::Validation { field, .. }) => {
                assert_eq!(field, "pipeline.analytic_two_source")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let f = write_config(
            "# header\n\nscenario.geometry.m = 8  # trailing\nscenario.angles_deg = 1, 2, 3\n",
        );
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg.scenario.num_sources(), 3);
    }

    #[test]
    fn shipped_three_source_config_parses() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/three_source_noise_free.conf");
        let cfg = load_config(Path::new(path)).unwrap();
        assert_eq!(cfg.scenario.geometry.num_elements(), 8);
        assert!((cfg.scenario.geometry.spacing_ratio() - 0.5).abs() < 1e-15);
        assert_eq!(cfg.scenario.num_sources(), 3);
        assert_eq!(cfg.scenario.snr_db, None);
    }

    #[test]
    fn keys_cover_a_full_file() {
        let mut content = String::new();
        writeln!(content, "scenario.geometry.m = 8").unwrap();
        writeln!(content, "scenario.geometry.spacing_ratio = 0.5").unwrap();
        writeln!(content, "scenario.angles_deg = -53.2, 3.23, 20.0").unwrap();
        writeln!(content, "scenario.amplitudes = 1, 1, 1").unwrap();
        writeln!(content, "scenario.snr_db = 20").unwrap();
        writeln!(content, "scenario.num_snapshots = 1000").unwrap();
        writeln!(content, "scenario.seed = 7").unwrap();
        writeln!(content, "pipeline.run_cma_equalizer = true").unwrap();
        writeln!(content, "pipeline.run_ascent = true").unwrap();
        writeln!(content, "pipeline.run_preprocessor = true").unwrap();
        writeln!(content, "pipeline.analytic_two_source = false").unwrap();
        writeln!(content, "cma.gamma_descent = 4e-6").unwrap();
        writeln!(content, "cma.gamma_ascent = 1e-4").unwrap();
        writeln!(content, "cma.iterations = 4000").unwrap();
        writeln!(content, "precond.gamma_mode = fixed").unwrap();
        writeln!(content, "precond.gamma = 5e-3").unwrap();
        writeln!(content, "precond.iterations = 2000").unwrap();
        writeln!(content, "roots.selection = unit_distance").unwrap();
        writeln!(content, "roots.threshold = 1e-3").unwrap();
        writeln!(content, "run.trials = 3").unwrap();
        writeln!(content, "run.workers = 2").unwrap();
        writeln!(content, "run.format = json").unwrap();
        writeln!(content, "run.out = /tmp/somewhere").unwrap();
        let f = write_config(&content);
        let cfg = load_config(f.path()).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert!(matches!(cfg.precond_policy, GammaPolicy::Fixed(g) if (g - 5e-3).abs() < 1e-18));
        assert_eq!(cfg.selection_mode, SelectionMode::UnitDistance);
        assert_eq!(cfg.cma_iterations, 4000);
    }
}
