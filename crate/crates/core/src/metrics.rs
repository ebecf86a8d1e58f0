//! Perception / reaction / waiting latency per session, and the aggregate
//! and length-stratified reports built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{SessionTrace, Strategy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("session {session}: trace has no {kind} event")]
    MissingEvent { session: String, kind: &'static str },
    #[error("session {session}: trace ended in error: {message}")]
    ErrorTrace { session: String, message: String },
    #[error(
        "session {session}: first audio at {audio_ms} ms precedes response start at {start_ms} ms"
    )]
    Inconsistent {
        session: String,
        audio_ms: u64,
        start_ms: u64,
    },
    #[error("unknown report format {0:?} (expected markdown or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub session: String,
    pub strategy: Strategy,
    pub perception_ms: u64,
    pub reaction_ms: u64,
    pub waiting_ms: u64,
    pub connective_emitted: bool,
    pub input_audio_ms: u64,
}

/// The instant the system starts responding: the commit when a connective
/// was emitted, the large-model invocation otherwise.
fn trigger_ms(trace: &SessionTrace) -> Result<u64, MetricsError> {
    let kind = if trace.connective_emitted() {
        "commit"
    } else {
        "large_invoked"
    };
    trace.first(kind).ok_or_else(|| MetricsError::MissingEvent {
        session: trace.session.clone(),
        kind,
    })
}

pub fn latency_breakdown(trace: &SessionTrace) -> Result<LatencyBreakdown, MetricsError> {
    if let Some(message) = trace.error() {
        return Err(MetricsError::ErrorTrace {
            session: trace.session.clone(),
            message: message.to_string(),
        });
    }
    let missing = |kind| MetricsError::MissingEvent {
        session: trace.session.clone(),
        kind,
    };
    let input_end = trace
        .last("input_chunk_sent")
        .ok_or_else(|| missing("input_chunk_sent"))?;
    let trigger = trigger_ms(trace)?;
    let first_audio = trace
        .first("audio_play_start")
        .ok_or_else(|| missing("audio_play_start"))?;
    // a commit before the user finishes counts as responding at input end
    let start = input_end.max(trigger);
    if first_audio < start {
        return Err(MetricsError::Inconsistent {
            session: trace.session.clone(),
            audio_ms: first_audio,
            start_ms: start,
        });
    }
    let perception_ms = start - input_end;
    let reaction_ms = first_audio - start;
    Ok(LatencyBreakdown {
        session: trace.session.clone(),
        strategy: trace.strategy,
        perception_ms,
        reaction_ms,
        waiting_ms: perception_ms + reaction_ms,
        connective_emitted: trace.connective_emitted(),
        input_audio_ms: trace.input_audio_ms,
    })
}

/// Mean perception, reaction and waiting latency of a group of sessions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyMeans {
    pub perception: f64,
    pub reaction: f64,
    pub waiting: f64,
}

impl LatencyMeans {
    fn of<'a>(items: impl IntoIterator<Item = &'a LatencyBreakdown>) -> Option<Self> {
        let (mut p, mut r, mut w, mut n) = (0u64, 0u64, 0u64, 0u64);
        for b in items {
            p += b.perception_ms;
            r += b.reaction_ms;
            w += b.waiting_ms;
            n += 1;
        }
        (n > 0).then(|| Self {
            perception: p as f64 / n as f64,
            reaction: r as f64 / n as f64,
            waiting: w as f64 / n as f64,
        })
    }

    fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Perception => self.perception,
            Metric::Reaction => self.reaction,
            Metric::Waiting => self.waiting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Metric {
    Perception,
    Reaction,
    Waiting,
}

const METRICS: [(Metric, &str); 3] = [
    (Metric::Perception, "perception"),
    (Metric::Reaction, "reaction"),
    (Metric::Waiting, "waiting"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub model: String,
    pub strategy: Strategy,
    /// Sessions that emitted a connective.
    pub opt: Option<LatencyMeans>,
    /// Sessions that did not.
    pub rem: Option<LatencyMeans>,
    pub avg: Option<LatencyMeans>,
    pub n_opt: usize,
    pub n_rem: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<AggregateRow>,
}

/// One row per strategy present, in SSC, SDC, DDTSR order.
pub fn aggregate(breakdowns: &[LatencyBreakdown], dataset: &str, model: &str) -> AggregateReport {
    let mut by_strategy: BTreeMap<Strategy, Vec<&LatencyBreakdown>> = BTreeMap::new();
    for b in breakdowns {
        by_strategy.entry(b.strategy).or_default().push(b);
    }
    let rows = by_strategy
        .into_iter()
        .map(|(strategy, items)| {
            let opt: Vec<_> = items
                .iter()
                .copied()
                .filter(|b| b.connective_emitted)
                .collect();
            let rem: Vec<_> = items
                .iter()
                .copied()
                .filter(|b| !b.connective_emitted)
                .collect();
            AggregateRow {
                dataset: dataset.to_string(),
                model: model.to_string(),
                strategy,
                opt: LatencyMeans::of(opt.iter().copied()),
                rem: LatencyMeans::of(rem.iter().copied()),
                avg: LatencyMeans::of(items.iter().copied()),
                n_opt: opt.len(),
                n_rem: rem.len(),
            }
        })
        .collect();
    AggregateReport { rows }
}

/// Input-length buckets as half-open millisecond ranges; the last is unbounded.
pub const BUCKETS: [(&str, u64, Option<u64>); 3] = [
    ("0-3s", 0, Some(3000)),
    ("3-6s", 3000, Some(6000)),
    ("6-9+s", 6000, None),
];

pub fn bucket_of(input_audio_ms: u64) -> usize {
    BUCKETS
        .iter()
        .position(|&(_, lo, hi)| input_audio_ms >= lo && hi.is_none_or(|h| input_audio_ms < h))
        .expect("buckets cover all lengths")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub label: String,
    pub lo_ms: u64,
    pub hi_ms: Option<u64>,
    pub per_strategy: BTreeMap<Strategy, (LatencyMeans, usize)>,
    /// `1 - waiting(DDTSR) / waiting(SSC)`, when both are present.
    pub reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStratifiedReport {
    pub buckets: Vec<BucketReport>,
}

pub fn stratify(breakdowns: &[LatencyBreakdown]) -> LengthStratifiedReport {
    let mut groups: Vec<BTreeMap<Strategy, Vec<&LatencyBreakdown>>> =
        vec![BTreeMap::new(); BUCKETS.len()];
    for b in breakdowns {
        groups[bucket_of(b.input_audio_ms)]
            .entry(b.strategy)
            .or_default()
            .push(b);
    }
    let buckets = BUCKETS
        .iter()
        .zip(groups)
        .map(|(&(label, lo, hi), group)| {
            let per_strategy: BTreeMap<Strategy, (LatencyMeans, usize)> = group
                .into_iter()
                .filter_map(|(s, items)| {
                    LatencyMeans::of(items.iter().copied()).map(|m| (s, (m, items.len())))
                })
                .collect();
            let reduction = match (
                per_strategy.get(&Strategy::Ddtsr),
                per_strategy.get(&Strategy::Ssc),
            ) {
                (Some((d, _)), Some((s, _))) if s.waiting > 0.0 => {
                    Some(1.0 - d.waiting / s.waiting)
                }
                _ => None,
            };
            BucketReport {
                label: label.to_string(),
                lo_ms: lo,
                hi_ms: hi,
                per_strategy,
                reduction,
            }
        })
        .collect();
    LengthStratifiedReport { buckets }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(MetricsError::UnknownFormat(s.to_string())),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{}", x.round() as i64))
}

fn row_cells(row: &AggregateRow) -> Vec<String> {
    let mut cells = vec![
        row.dataset.clone(),
        row.model.clone(),
        row.strategy.to_string(),
    ];
    for (metric, _) in METRICS {
        for split in [&row.opt, &row.rem, &row.avg] {
            cells.push(cell(split.map(|m| m.get(metric))));
        }
    }
    cells.push(row.n_opt.to_string());
    cells.push(row.n_rem.to_string());
    cells
}

/// Renders the aggregate report; columns are Perception, Reaction, Waiting,
/// each split Opt, Rem, Avg, followed by the split counts.
pub fn render(report: &AggregateReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let mut header = vec!["Dataset".to_string(), "Model".into(), "Strategy".into()];
            for m in ["Perception", "Reaction", "Waiting"] {
                for s in ["Opt", "Rem", "Avg"] {
                    header.push(format!("{m} {s}"));
                }
            }
            header.push("N Opt".into());
            header.push("N Rem".into());
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for row in &report.rows {
                writeln!(out, "| {} |", row_cells(row).join(" | ")).unwrap();
            }
        }
        ReportFormat::Csv => {
            let mut header = vec!["dataset".to_string(), "model".into(), "strategy".into()];
            for (_, m) in METRICS {
                for s in ["opt", "rem", "avg"] {
                    header.push(format!("{m}_{s}"));
                }
            }
            header.push("n_opt".into());
            header.push("n_rem".into());
            writeln!(out, "{}", header.join(",")).unwrap();
            for row in &report.rows {
                writeln!(out, "{}", row_cells(row).join(",")).unwrap();
            }
        }
    }
    out
}

/// Per-bucket means and the DDTSR-vs-SSC waiting reduction as a markdown table.
pub fn render_stratified(report: &LengthStratifiedReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "| Length | Strategy | N | Perception | Reaction | Waiting | Waiting reduction |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|---|---|---|").unwrap();
    for b in &report.buckets {
        for (s, (m, n)) in &b.per_strategy {
            let reduction = if *s == Strategy::Ddtsr {
                b.reduction
                    .map_or_else(|| "-".to_string(), |r| format!("{:.1}%", r * 100.0))
            } else {
                "-".to_string()
            };
            writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} |",
                b.label,
                s,
                n,
                cell(Some(m.perception)),
                cell(Some(m.reaction)),
                cell(Some(m.waiting)),
                reduction
            )
            .unwrap();
        }
    }
    out
}

/// Long-format series `bucket,strategy,metric,value`, one row per bucket,
/// strategy and metric present in the report.
pub fn plot_data(report: &LengthStratifiedReport) -> String {
    let mut out = String::from("bucket,strategy,metric,value\n");
    for b in &report.buckets {
        for (s, (m, _)) in &b.per_strategy {
            for (metric, name) in METRICS {
                writeln!(out, "{},{},{},{}", b.label, s, name, m.get(metric)).unwrap();
            }
        }
    }
    out
}

/// Per-bucket waiting reduction series `bucket,reduction`; buckets without
/// both strategies are left out.
pub fn plot_reduction(report: &LengthStratifiedReport) -> String {
    let mut out = String::from("bucket,reduction\n");
    for b in &report.buckets {
        if let Some(r) = b.reduction {
            writeln!(out, "{},{}", b.label, r).unwrap();
        }
    }
    out
}
