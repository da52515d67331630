use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentError, ResolvedExperiment, SeedResult};
use crate::metrics::{density_data, DensityData, MetricsReport, SeedMetrics};

/// Outputs of a run, held in memory until written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: MetricsReport,
    /// Per method, from the first seed's test split.
    pub density: Vec<(String, DensityData)>,
    pub resolved: String,
    pub checkpoints: Vec<(String, String)>,
    pub log: Vec<String>,
    pub per_seed: Vec<Vec<SeedMetrics>>,
}

pub(crate) fn file_stem(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    s.trim_matches('_').to_string()
}

fn io(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

impl RunArtifacts {
    pub(crate) fn assemble(cfg: &ResolvedExperiment, results: Vec<SeedResult>) -> Result<Self, ExperimentError> {
        let per_seed: Vec<Vec<SeedMetrics>> = results.iter().map(|r| r.metrics.clone()).collect();
        let report = MetricsReport::aggregate(&per_seed);
        let first = results.first().expect("at least one seed");
        let density = cfg
            .methods
            .iter()
            .zip(&first.predictions)
            .map(|(m, (f, cf))| Ok((m.label.clone(), density_data(f, cf, cfg.density_bins)?)))
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        let mut log = Vec::new();
        let mut checkpoints = Vec::new();
        for r in results {
            log.extend(r.log);
            checkpoints.extend(r.checkpoints);
        }
        Ok(RunArtifacts {
            report,
            density,
            resolved: cfg.to_toml(),
            checkpoints,
            log,
            per_seed,
        })
    }

    /// Writes into a sibling temporary directory and renames it into place,
    /// so `out` either holds a complete run or is left untouched. An
    /// existing non-empty `out` is replaced only with `force`.
    pub fn write(&self, out: &Path, force: bool) -> Result<(), ExperimentError> {
        if out.exists() {
            let empty = fs::read_dir(out).map_err(|e| io(out, e))?.next().is_none();
            if !empty && !force {
                return Err(ExperimentError::Io(format!(
                    "{} exists and is not empty (use --force to replace it)",
                    out.display()
                )));
            }
        }
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| io(&parent, e))?;
        let name = out.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| io(&tmp, e))?;
        }
        let result = self.write_into(&tmp).and_then(|_| {
            if out.exists() {
                fs::remove_dir_all(out).map_err(|e| io(out, e))?;
            }
            fs::rename(&tmp, out).map_err(|e| io(out, e))
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(&tmp);
        }
        result
    }

    fn write_into(&self, dir: &Path) -> Result<(), ExperimentError> {
        let ck = dir.join("checkpoints");
        fs::create_dir_all(&ck).map_err(|e| io(&ck, e))?;
        let put = |p: PathBuf, text: &str| fs::write(&p, text).map_err(|e| io(&p, e));
        put(dir.join("report.csv"), &self.report.to_csv())?;
        put(dir.join("report.md"), &self.report.to_table())?;
        put(dir.join("config.resolved"), &self.resolved)?;
        let mut log = self.log.join("\n");
        log.push('\n');
        put(dir.join("run.log"), &log)?;
        for (label, d) in &self.density {
            put(dir.join(format!("density_{}.csv", file_stem(label))), &d.to_csv())?;
        }
        for (name, text) in &self.checkpoints {
            put(ck.join(name), text)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("CR(0.05)"), "cr_0.05");
        assert_eq!(file_stem("OURS"), "ours");
        assert_eq!(file_stem("OURS(elementwise_max)"), "ours_elementwise_max");
    }
}
