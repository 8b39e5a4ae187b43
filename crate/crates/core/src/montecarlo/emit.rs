//! Tab-separated tables and a metadata document for metrics frames.
//!
//! | file | rows | columns |
//! |---|---|---|
//! | `stopping.tsv` | grid point | `{param}, mean_stop_time, mistake_rate, se_mistake` |
//! | `summary.tsv` | grid point | replication counts, stop time, stopped share, mistakes, earnings, payoff, pulls |
//! | `earnings.tsv` | grid point | `{param}, earnings_gap_mean, earnings_gap_se, earnings_gap_q10, earnings_gap_q90` |
//! | `payoff.tsv` | grid point | `{param}, payoff_mean, payoff_se` (only with a payoff section) |
//! | `weights.tsv` | point × stage | `alpha_o{o}_d{d}_{mean,q10,q90}` |
//! | `beliefs.tsv` | point × stage | `zeta_o{o}_d{d}_mean`, `aggregate_d{d}_mean` |
//! | `concentration.tsv` | point × stage | `exceed_d{d}`, `se_d{d}` at the sweep threshold |
//! | `pulls.tsv` | point × stage | `pulls_d{d}_mean` |
//!
//! The stage tables are written only when the frames kept series. When any
//! frame carries a label, every table gains a leading `model` column.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use super::{proportion, MetricsFrame, PointMetrics, StageMetrics};

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("nothing to write: no frames or an empty grid")]
    Empty,
    #[error("frames disagree on the swept parameter ({0} vs {1})")]
    MixedParams(String, String),
    #[error("cannot write to {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn render(&self) -> String {
        let mut s = self.header.join("\t");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join("\t"));
            s.push('\n');
        }
        s
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn leading(labelled: bool, param: &str) -> Vec<String> {
    let mut h = Vec::new();
    if labelled {
        h.push("model".to_string());
    }
    h.push(param.to_string());
    h
}

fn key(labelled: bool, frame: &MetricsFrame, p: &PointMetrics) -> Vec<String> {
    let mut r = Vec::new();
    if labelled {
        r.push(frame.spec.label.clone());
    }
    r.push(num(p.value));
    r
}

fn shape(frames: &[MetricsFrame]) -> (usize, usize) {
    let first = frames[0].points[0].stages.first();
    let arms = frames[0].points[0].pulls_mean.len();
    let sources = first.map_or(0, |s| s.alpha_mean.len());
    (sources, arms)
}

fn stage_rows(
    frames: &[MetricsFrame],
    labelled: bool,
    table: &mut Table,
    cells: impl Fn(&MetricsFrame, &StageMetrics) -> Vec<String>,
) {
    for f in frames {
        for p in &f.points {
            for s in &p.stages {
                let mut row = key(labelled, f, p);
                row.push(s.t.to_string());
                row.push(s.runs.to_string());
                row.extend(cells(f, s));
                table.rows.push(row);
            }
        }
    }
}

fn write(dest: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<(), EmitError> {
    let path = dest.join(name);
    fs::write(&path, body).map_err(|source| EmitError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the tables and `metadata.json` into `dest`, creating it if needed.
/// Output bytes depend only on the frames.
pub fn emit_results(frames: &[MetricsFrame], dest: &Path) -> Result<Vec<PathBuf>, EmitError> {
    if frames.is_empty() || frames.iter().any(|f| f.points.is_empty()) {
        return Err(EmitError::Empty);
    }
    let param = frames[0].spec.param.clone();
    if let Some(f) = frames.iter().find(|f| f.spec.param != param) {
        return Err(EmitError::MixedParams(param, f.spec.param.clone()));
    }
    fs::create_dir_all(dest).map_err(|source| EmitError::Io {
        path: dest.to_path_buf(),
        source,
    })?;
    let labelled = frames.iter().any(|f| !f.spec.label.is_empty());
    let (sources, arms) = shape(frames);
    let mut written = Vec::new();

    let mut stopping = Table::new(leading(labelled, &param));
    stopping
        .header
        .extend(["mean_stop_time", "mistake_rate", "se_mistake"].map(String::from));
    let mut summary = Table::new(leading(labelled, &param));
    summary.header.extend(
        [
            "replications",
            "completed",
            "failed",
            "mean_stop_time",
            "se_stop_time",
            "stopped_share",
            "mistake_rate",
            "se_mistake",
            "earnings_gap_mean",
            "earnings_gap_se",
            "payoff_mean",
            "payoff_se",
        ]
        .map(String::from),
    );
    summary.header.extend((0..arms).map(|d| format!("pulls_d{d}_mean")));
    let mut earnings = Table::new(leading(labelled, &param));
    earnings.header.extend(
        [
            "earnings_gap_mean",
            "earnings_gap_se",
            "earnings_gap_q10",
            "earnings_gap_q90",
        ]
        .map(String::from),
    );
    let mut payoff = Table::new(leading(labelled, &param));
    payoff.header.extend(["payoff_mean", "payoff_se"].map(String::from));
    let mut any_payoff = false;

    for f in frames {
        for p in &f.points {
            let k = key(labelled, f, p);
            let mut row = k.clone();
            row.extend([num(p.stop_time.mean), num(p.mistake.mean), num(p.mistake.se)]);
            stopping.rows.push(row);

            let (pm, ps) = p
                .payoff
                .map_or((String::new(), String::new()), |e| (num(e.mean), num(e.se)));
            let mut row = k.clone();
            row.extend([
                f.spec.replications.to_string(),
                p.completed.to_string(),
                p.failures.len().to_string(),
                num(p.stop_time.mean),
                num(p.stop_time.se),
                num(p.stopped_share),
                num(p.mistake.mean),
                num(p.mistake.se),
                num(p.earnings_gap.mean),
                num(p.earnings_gap.se),
                pm,
                ps,
            ]);
            row.extend(p.pulls_mean.iter().map(|x| num(*x)));
            summary.rows.push(row);

            let mut row = k.clone();
            row.extend([
                num(p.earnings_gap.mean),
                num(p.earnings_gap.se),
                num(p.earnings_gap_q10),
                num(p.earnings_gap_q90),
            ]);
            earnings.rows.push(row);

            if let Some(e) = p.payoff {
                any_payoff = true;
                let mut row = k;
                row.extend([num(e.mean), num(e.se)]);
                payoff.rows.push(row);
            }
        }
    }
    write(dest, "stopping.tsv", &stopping.render(), &mut written)?;
    write(dest, "summary.tsv", &summary.render(), &mut written)?;
    write(dest, "earnings.tsv", &earnings.render(), &mut written)?;
    if any_payoff {
        write(dest, "payoff.tsv", &payoff.render(), &mut written)?;
    }

    let has_series = frames
        .iter()
        .any(|f| f.points.iter().any(|p| !p.stages.is_empty()));
    if has_series {
        let stage_head = |cols: Vec<String>| {
            let mut h = leading(labelled, &param);
            h.push("t".into());
            h.push("runs".into());
            h.extend(cols);
            Table::new(h)
        };
        let pairs: Vec<(usize, usize)> =
            (0..sources).flat_map(|o| (0..arms).map(move |d| (o, d))).collect();

        let mut weights = stage_head(
            pairs
                .iter()
                .flat_map(|(o, d)| {
                    ["mean", "q10", "q90"].map(|s| format!("alpha_o{o}_d{d}_{s}"))
                })
                .collect(),
        );
        stage_rows(frames, labelled, &mut weights, |_, s| {
            pairs
                .iter()
                .flat_map(|&(o, d)| {
                    [s.alpha_mean[o][d], s.alpha_q10[o][d], s.alpha_q90[o][d]].map(num)
                })
                .collect()
        });
        write(dest, "weights.tsv", &weights.render(), &mut written)?;

        let mut cols: Vec<String> = pairs
            .iter()
            .map(|(o, d)| format!("zeta_o{o}_d{d}_mean"))
            .collect();
        cols.extend((0..arms).map(|d| format!("aggregate_d{d}_mean")));
        let mut beliefs = stage_head(cols);
        stage_rows(frames, labelled, &mut beliefs, |_, s| {
            let mut r: Vec<String> = pairs.iter().map(|&(o, d)| num(s.zeta_mean[o][d])).collect();
            r.extend(s.aggregate_mean.iter().map(|x| num(*x)));
            r
        });
        write(dest, "beliefs.tsv", &beliefs.render(), &mut written)?;

        let mut conc = stage_head(
            (0..arms)
                .flat_map(|d| [format!("exceed_d{d}"), format!("se_d{d}")])
                .collect(),
        );
        stage_rows(frames, labelled, &mut conc, |f, s| {
            let tau = f.spec.threshold;
            s.deviations
                .iter()
                .flat_map(|dev| {
                    let within = dev.partition_point(|x| *x <= tau);
                    let e = proportion((dev.len() - within) as u64, dev.len() as u64);
                    [num(e.mean), num(e.se)]
                })
                .collect()
        });
        write(dest, "concentration.tsv", &conc.render(), &mut written)?;

        let mut pulls = stage_head((0..arms).map(|d| format!("pulls_d{d}_mean")).collect());
        stage_rows(frames, labelled, &mut pulls, |_, s| {
            s.pulls_mean.iter().map(|x| num(*x)).collect()
        });
        write(dest, "pulls.tsv", &pulls.render(), &mut written)?;
    }

    let specs: Vec<_> = frames.iter().map(|f| &f.spec).collect();
    let canonical = serde_json::to_vec(&specs).expect("specs serialize");
    let hash = hex::encode(Sha256::digest(&canonical));
    let meta = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": hash,
        "param": param,
        "frames": frames.iter().map(|f| serde_json::json!({
            "label": f.spec.label,
            "values": f.spec.points.iter().map(|p| p.value).collect::<Vec<_>>(),
            "replications": f.spec.replications,
            "seed": f.spec.seed,
            "threshold": f.spec.threshold,
            "series": f.spec.series,
            "failures": f.points.iter().map(|p| serde_json::json!({
                "value": p.value,
                "replications": p.failures,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    });
    let mut body = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    let _ = writeln!(body);
    write(dest, "metadata.json", &body, &mut written)?;
    Ok(written)
}
