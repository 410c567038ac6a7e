//! Result emission: trials.csv, summary.csv, per-series plot data, and
//! optional SVG line charts.
//!
//! trials.csv and summary.csv are byte-deterministic for a given config
//! and master seed: floats are written in Rust's shortest round-trip
//! form. Wall-clock timings are inherently nondeterministic and live in a
//! separate timings.csv.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::runner::{RunResult, SummaryRow, TrialRecord};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("no records to emit")]
    NoRecords,

    #[error("write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default)]
pub struct EmitOptions {
    /// Also render an SVG line chart of the l2 error against n.
    pub svg: bool,
}

/// Paths of everything written.
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub timings: PathBuf,
    pub series: Vec<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes every output file for a finished run into `out_dir`.
pub fn emit_results(
    cfg: &ExperimentConfig,
    result: &RunResult,
    out_dir: &Path,
    opts: &EmitOptions,
) -> Result<EmittedFiles, OutputError> {
    if result.records.is_empty() {
        return Err(OutputError::NoRecords);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let trials = out_dir.join("trials.csv");
    write_trials(&trials, &result.records)?;

    let summary = out_dir.join("summary.csv");
    write_summary(&summary, &result.summary)?;

    let timings = out_dir.join("timings.csv");
    write_timings(&timings, &result.records)?;

    let series = write_series(cfg, result, out_dir)?;

    let svg = if opts.svg {
        let path = out_dir.join("errors_l2.svg");
        let rendered = render_svg(cfg, result);
        std::fs::write(&path, rendered).map_err(|source| OutputError::Io {
            path: path.clone(),
            source,
        })?;
        Some(path)
    } else {
        None
    };

    Ok(EmittedFiles {
        trials,
        summary,
        timings,
        series,
        svg,
    })
}

fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sr",
        "p",
        "epsilon",
        "delta",
        "n",
        "trial",
        "seed",
        "rel_err_l1",
        "rel_err_l2",
        "rel_err_linf",
        "min_eigenvalue_of_output",
        "status",
    ])?;
    for r in records {
        w.write_record([
            r.sr.to_string(),
            r.p.to_string(),
            r.epsilon.to_string(),
            r.delta.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_opt(r.rel_err_l1),
            fmt_opt(r.rel_err_l2),
            fmt_opt(r.rel_err_linf),
            fmt_opt(r.min_eigenvalue_of_output),
            if r.failed() { "failed" } else { "ok" }.to_string(),
        ])?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sr",
        "p",
        "epsilon",
        "n",
        "completed",
        "failed",
        "mean_rel_err_l1",
        "std_rel_err_l1",
        "mean_rel_err_l2",
        "std_rel_err_l2",
        "mean_rel_err_linf",
        "std_rel_err_linf",
    ])?;
    for s in rows {
        w.write_record([
            s.sr.to_string(),
            s.p.to_string(),
            s.epsilon.to_string(),
            s.n.to_string(),
            s.completed.to_string(),
            s.failed.to_string(),
            fmt_opt(s.mean_rel_err_l1),
            fmt_opt(s.std_rel_err_l1),
            fmt_opt(s.mean_rel_err_l2),
            fmt_opt(s.std_rel_err_l2),
            fmt_opt(s.mean_rel_err_linf),
            fmt_opt(s.std_rel_err_linf),
        ])?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write_timings(path: &Path, records: &[TrialRecord]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sr", "p", "epsilon", "n", "trial", "wall_time_ms"])?;
    for r in records {
        w.write_record([
            r.sr.to_string(),
            r.p.to_string(),
            r.epsilon.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            format!("{:.3}", r.wall_time_ms),
        ])?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// One series per swept value: the l2 error curve against n, directly
/// plottable. A custom run without a swept parameter emits one series.
struct Series {
    label: String,
    file_stem: String,
    /// (n, mean, std), in n-grid order.
    points: Vec<(usize, Option<f64>, Option<f64>)>,
}

fn collect_series(cfg: &ExperimentConfig, result: &RunResult) -> Vec<Series> {
    let groups: Vec<(String, String)> = match cfg.swept_param() {
        Some((name, values)) => values
            .iter()
            .map(|v| (format!("{name}={v}"), format!("{name}_{v}")))
            .collect(),
        None => vec![("custom".to_string(), "custom".to_string())],
    };
    let per_series = cfg.n_grid.len();
    groups
        .into_iter()
        .enumerate()
        .map(|(g, (label, file_stem))| {
            let points = result.summary[g * per_series..(g + 1) * per_series]
                .iter()
                .map(|s| (s.n, s.mean_rel_err_l2, s.std_rel_err_l2))
                .collect();
            Series {
                label,
                file_stem,
                points,
            }
        })
        .collect()
}

fn write_series(
    cfg: &ExperimentConfig,
    result: &RunResult,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut paths = Vec::new();
    for series in collect_series(cfg, result) {
        let path = out_dir.join(format!("series_{}.csv", series.file_stem));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["n", "series", "mean_rel_err", "std"])?;
        for (n, mean, std) in &series.points {
            w.write_record([
                n.to_string(),
                series.label.clone(),
                fmt_opt(*mean),
                fmt_opt(*std),
            ])?;
        }
        w.flush().map_err(|source| OutputError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

const SVG_PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal line chart: mean l2 relative error against n, one polyline per
/// series.
fn render_svg(cfg: &ExperimentConfig, result: &RunResult) -> String {
    let series = collect_series(cfg, result);
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let ns: Vec<usize> = cfg.n_grid.clone();
    let n_min = *ns.iter().min().unwrap() as f64;
    let n_max = *ns.iter().max().unwrap() as f64;
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().filter_map(|(_, m, _)| *m))
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let x = |n: f64| {
        if n_max > n_min {
            left + (n - n_min) / (n_max - n_min) * plot_w
        } else {
            left + plot_w / 2.0
        }
    };
    let y = |v: f64| top + plot_h - (v / y_max) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    // Axes.
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">n</text>",
        left + plot_w / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">mean l2 relative error</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for &n in &ns {
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{n}</text>",
            x(n as f64),
            top + plot_h + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>",
        left - 6.0,
        top + 6.0,
        y_max
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>",
        left - 6.0,
        top + plot_h + 4.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter_map(|(n, mean, _)| mean.map(|m| format!("{:.2},{:.2}", x(*n as f64), y(m))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                pts.join(" ")
            );
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            left + plot_w - 120.0,
            left + plot_w - 100.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            left + plot_w - 94.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PartialConfig;
    use crate::runner::run_experiment;
    use dpcov::EstimatorRegistry;

    fn run(toml: &str) -> (ExperimentConfig, RunResult) {
        let cfg = PartialConfig::from_toml_str(toml).unwrap().resolve().unwrap();
        let result = run_experiment(&cfg, &EstimatorRegistry::builtin()).unwrap();
        (cfg, result)
    }

    #[test]
    fn empty_records_produce_no_files() {
        let cfg = PartialConfig::default().resolve().unwrap();
        let empty = RunResult {
            records: vec![],
            summary: vec![],
            invariant_violations: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results");
        assert!(matches!(
            emit_results(&cfg, &empty, &out, &EmitOptions::default()),
            Err(OutputError::NoRecords)
        ));
        assert!(!out.exists());
    }

    #[test]
    fn single_grid_point_summary_has_one_row() {
        let (cfg, result) = run("p = 6\nn_grid = [40]\ntrials = 3\n");
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&cfg, &result, dir.path(), &EmitOptions::default()).unwrap();
        let summary = std::fs::read_to_string(&files.summary).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines.len(), 2, "header plus exactly one row: {summary}");
        let trials = std::fs::read_to_string(&files.trials).unwrap();
        assert!(trials.starts_with(
            "sr,p,epsilon,delta,n,trial,seed,rel_err_l1,rel_err_l2,rel_err_linf,\
             min_eigenvalue_of_output,status"
        ));
        assert_eq!(trials.lines().count(), 4);
        assert_eq!(files.series.len(), 1);
        assert!(files.series[0].ends_with("series_custom.csv"));
    }

    #[test]
    fn dimension_sweep_emits_four_series_files() {
        let (cfg, result) = run(
            "setting = \"dimension-sweep\"\np = [5, 8, 10, 12]\nn_grid = [30, 60]\ntrials = 1\n",
        );
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&cfg, &result, dir.path(), &EmitOptions::default()).unwrap();
        assert_eq!(files.series.len(), 4);
        let names: Vec<String> = files
            .series
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "series_p_5.csv",
                "series_p_8.csv",
                "series_p_10.csv",
                "series_p_12.csv"
            ]
        );
        let body = std::fs::read_to_string(&files.series[0]).unwrap();
        assert!(body.starts_with("n,series,mean_rel_err,std\n"));
        assert!(body.contains("p=5"));
    }

    #[test]
    fn svg_is_emitted_on_request() {
        let (cfg, result) = run("p = 5\nn_grid = [30, 60]\ntrials = 1\n");
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&cfg, &result, dir.path(), &EmitOptions { svg: true }).unwrap();
        let svg = std::fs::read_to_string(files.svg.unwrap()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let toml = "p = 10\nn_grid = [40, 80]\ntrials = 3\nmaster_seed = 11\n";
        let (cfg_a, result_a) = run(toml);
        let (cfg_b, result_b) = run(toml);
        let dir = tempfile::tempdir().unwrap();
        let out_a = emit_results(&cfg_a, &result_a, &dir.path().join("a"), &EmitOptions::default())
            .unwrap();
        let out_b = emit_results(&cfg_b, &result_b, &dir.path().join("b"), &EmitOptions::default())
            .unwrap();
        assert_eq!(
            std::fs::read(&out_a.trials).unwrap(),
            std::fs::read(&out_b.trials).unwrap()
        );
        assert_eq!(
            std::fs::read(&out_a.summary).unwrap(),
            std::fs::read(&out_b.summary).unwrap()
        );
    }
}
