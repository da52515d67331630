use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Metrics of one method on one seed's test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub method: String,
    /// `"mse"` or `"acc"`.
    pub perf_metric: String,
    pub perf: f64,
    pub te: f64,
    /// Keyed by sensitive level name.
    pub te_group: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub metric: String,
    /// Empty for whole-test-set metrics.
    pub group: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    /// `per_seed[k]` holds every method's metrics for seed `k`; method
    /// order follows the first seed.
    pub fn aggregate(per_seed: &[Vec<SeedMetrics>]) -> MetricsReport {
        let mut rows = Vec::new();
        let Some(first) = per_seed.first() else {
            return MetricsReport { rows };
        };
        for m in first {
            let runs: Vec<&SeedMetrics> = per_seed
                .iter()
                .filter_map(|s| s.iter().find(|x| x.method == m.method))
                .collect();
            let mut push = |metric: &str, group: &str, values: Vec<f64>| {
                let s = Summary::of(&values);
                rows.push(ReportRow {
                    method: m.method.clone(),
                    metric: metric.to_string(),
                    group: group.to_string(),
                    mean: s.mean,
                    std: s.std,
                });
            };
            push(&m.perf_metric, "", runs.iter().map(|r| r.perf).collect());
            push("te", "", runs.iter().map(|r| r.te).collect());
            let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in &runs {
                for (g, v) in &r.te_group {
                    groups.entry(g).or_default().push(*v);
                }
            }
            for (g, v) in groups {
                push("te", g, v);
            }
        }
        MetricsReport { rows }
    }

    pub fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    pub fn get(&self, method: &str, metric: &str, group: &str) -> Option<Summary> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.metric == metric && r.group == group)
            .map(|r| Summary { mean: r.mean, std: r.std })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<MetricsReport, MetricsError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<ReportRow>, _>>()
            .map_err(|e| MetricsError::Report(e.to_string()))?;
        Ok(MetricsReport { rows })
    }

    /// Aligned markdown table, one row per method, cells `mean ± std`.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.metric.clone(), r.group.clone());
            if !columns.contains(&key) {
                columns.push(key);
            }
        }
        columns.sort_by_key(|(m, g)| (m == "te", !g.is_empty(), g.clone()));
        let mut header = vec!["Method".to_string()];
        header.extend(columns.iter().map(|(m, g)| {
            let m = m.to_uppercase();
            if g.is_empty() {
                m
            } else {
                format!("{m}_{g}")
            }
        }));
        let mut body = Vec::new();
        for method in self.methods() {
            let mut line = vec![method.to_string()];
            for (metric, group) in &columns {
                line.push(match self.get(method, metric, group) {
                    Some(s) => format!("{:.4} ± {:.4}", s.mean, s.std),
                    None => "-".to_string(),
                });
            }
            body.push(line);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|j| {
                body.iter()
                    .map(|l| l[j].chars().count())
                    .chain([header[j].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = fmt_line(&header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for l in &body {
            out.push_str(&fmt_line(l));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(method: &str, perf: f64, te: f64) -> SeedMetrics {
        SeedMetrics {
            method: method.into(),
            perf_metric: "mse".into(),
            perf,
            te,
            te_group: [("0".to_string(), te), ("1".to_string(), te)].into(),
        }
    }

    #[test]
    fn aggregates_mean_and_population_std() {
        let report = MetricsReport::aggregate(&[vec![seed("UF", 1.0, 2.0)], vec![seed("UF", 3.0, 2.0)]]);
        assert_eq!(report.get("UF", "mse", ""), Some(Summary { mean: 2.0, std: 1.0 }));
        assert_eq!(report.get("UF", "te", "1"), Some(Summary { mean: 2.0, std: 0.0 }));
    }

    #[test]
    fn csv_round_trip() {
        let report = MetricsReport::aggregate(&[vec![seed("UF", 0.1, 1.25), seed("OURS", 0.47, 0.0)]]);
        let back = MetricsReport::from_csv(&report.to_csv()).unwrap();
        assert_eq!(back, report);
        assert!(report.to_csv().starts_with("method,metric,group,mean,std\n"));
        let table = report.to_table();
        assert!(table.contains("| UF "));
        assert!(table.contains("TE_0"));
    }
}
