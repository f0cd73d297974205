use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use bhlab_estimates::ExperimentReport;
use serde_json::json;

use crate::{CliError, Config, RunOutcome};

/// Length of the config-hash prefix naming a run directory.
pub const HASH_PREFIX: usize = 12;

#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub reports: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

pub(crate) fn reports_json(reports: &[ExperimentReport]) -> Result<String, CliError> {
    serde_json::to_string_pretty(reports).map_err(|e| CliError::Internal(e.to_string()))
}

pub(crate) fn summary_csv(reports: &[ExperimentReport]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in reports.iter().flat_map(|r| r.summary_rows()) {
        w.serialize(row).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

/// Writes `<out>/<command>-<hash prefix>/` with the resolved config, reports,
/// summary, manifest and any trajectory or control.
pub fn write_outputs(
    out: &Path,
    command: &str,
    cfg: &Config,
    workers: usize,
    outcome: &RunOutcome,
    exit_status: i32,
) -> Result<OutputPaths, CliError> {
    let hash = cfg.hash();
    let dir = out.join(format!("{command}-{}", &hash[..HASH_PREFIX]));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
    let paths = OutputPaths {
        reports: dir.join("reports.json"),
        summary: dir.join("summary.csv"),
        manifest: dir.join("manifest.json"),
        dir,
    };
    fs::write(&paths.reports, reports_json(&outcome.reports)? + "\n")?;
    fs::write(&paths.summary, summary_csv(&outcome.reports)?)?;
    if let Some(t) = &outcome.trajectory {
        let mut buf = Vec::new();
        t.write_csv(&mut buf, cfg.simulate.experiment.with_coeffs)?;
        fs::write(paths.dir.join("trajectory.csv"), buf)?;
    }
    if let Some(c) = &outcome.control {
        let text = serde_json::to_string_pretty(c).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(paths.dir.join("control.json"), text + "\n")?;
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let manifest = json!({
        "command": command,
        "config_hash": hash,
        "seed": cfg.seed,
        "workers": workers,
        "exit_status": exit_status,
        "verdicts": outcome.reports.iter().map(|r| json!({"name": r.name, "verdict": r.verdict})).collect::<Vec<_>>(),
        "versions": {
            "bhlab": env!("CARGO_PKG_VERSION"),
            "report_schema": 1,
        },
        "created_unix_seconds": created,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    fs::write(&paths.manifest, text + "\n")?;
    Ok(paths)
}
