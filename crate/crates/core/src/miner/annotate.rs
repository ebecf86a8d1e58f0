use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::extract::{extract_connective, TaggedTurn, DEFAULT_MAX_TOKENS};
use super::pos::{lexicon_tag, Lexicons};
use super::prompt::{build_llm_prompt, parse_llm_output};
use super::stats::{ConnectiveRecord, RecordSource};
use super::MinerError;
use crate::components::RemoteLargeModel;

#[derive(Debug, Clone)]
pub struct MineOptions {
    pub lexicons: Lexicons,
    pub max_tokens: usize,
    /// Annotates turns without an extracted connective; those turns keep an
    /// empty connective when absent.
    pub remote: Option<RemoteLargeModel>,
    pub calibration: Option<String>,
    /// Requests in flight at once.
    pub concurrency: usize,
    /// Raw replies are appended here and reused on the next run.
    pub progress: Option<PathBuf>,
}

impl Default for MineOptions {
    fn default() -> Self {
        Self {
            lexicons: Lexicons::builtin(),
            max_tokens: DEFAULT_MAX_TOKENS,
            remote: None,
            calibration: None,
            concurrency: 4,
            progress: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MineReport {
    pub extracted: usize,
    pub generated: usize,
    pub without_connective: usize,
    /// Turns dropped because the model reply could not be used, with the reason.
    pub skipped: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct ProgressLine {
    index: usize,
    reply: String,
}

fn io_err(path: &Path, e: std::io::Error) -> MinerError {
    MinerError::Io(format!("{}: {e}", path.display()))
}

fn load_progress(path: &Path) -> Result<BTreeMap<usize, String>, MinerError> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is re-requested
        match serde_json::from_str::<ProgressLine>(&line) {
            Ok(p) => {
                out.insert(p.index, p.reply);
            }
            Err(e) => log::warn!("{}:{}: ignoring progress line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Sends each `(index, prompt)` to the model, at most `concurrency` at a time,
/// and returns the raw replies by index. Replies already in the progress file
/// are not requested again. Any remote error aborts the run.
pub fn annotate(
    prompts: &[(usize, String)],
    remote: &RemoteLargeModel,
    concurrency: usize,
    progress: Option<&Path>,
) -> Result<BTreeMap<usize, String>, MinerError> {
    let mut replies = match progress {
        Some(p) => load_progress(p)?,
        None => BTreeMap::new(),
    };
    let pending: Vec<&(usize, String)> = prompts
        .iter()
        .filter(|(i, _)| !replies.contains_key(i))
        .collect();
    let mut sink = match progress {
        Some(p) => Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| io_err(p, e))?,
        ),
        None => None,
    };
    for batch in pending.chunks(concurrency.max(1)) {
        let results: Vec<Result<String, MinerError>> = std::thread::scope(|s| {
            let handles: Vec<_> = batch
                .iter()
                .map(|(_, prompt)| {
                    s.spawn(move || remote.complete(prompt).map_err(MinerError::from))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join().unwrap_or_else(|_| {
                        Err(MinerError::Io("annotation worker panicked".into()))
                    })
                })
                .collect()
        });
        for ((index, _), reply) in batch.iter().zip(results) {
            let reply = reply?;
            if let (Some(f), Some(p)) = (sink.as_mut(), progress) {
                let line = serde_json::to_string(&ProgressLine {
                    index: *index,
                    reply: reply.clone(),
                })
                .map_err(|e| MinerError::Io(e.to_string()))?;
                writeln!(f, "{line}").map_err(|e| io_err(p, e))?;
            }
            replies.insert(*index, reply);
        }
    }
    Ok(replies)
}

/// Extracts connectives from every turn and, when a model is configured,
/// annotates the turns left without one. Output follows input order.
pub fn mine(
    turns: &[TaggedTurn],
    opts: &MineOptions,
) -> Result<(Vec<ConnectiveRecord>, MineReport), MinerError> {
    let mut report = MineReport::default();
    let mut slots: Vec<Option<ConnectiveRecord>> = Vec::with_capacity(turns.len());
    let mut prompts = Vec::new();
    let id_of = |i: usize, t: &TaggedTurn| t.id.clone().unwrap_or_else(|| format!("turn-{i:05}"));

    for (i, turn) in turns.iter().enumerate() {
        let tokens = match &turn.s2_tokens {
            Some(t) => t
                .iter()
                .map(|t| t.clone().with_lexicons(&opts.lexicons))
                .collect(),
            None => lexicon_tag(&turn.s2, &opts.lexicons),
        };
        let e = extract_connective(&turn.s2, &tokens, opts.max_tokens)
            .map_err(|e| MinerError::Invalid(format!("{}: {e}", id_of(i, turn))))?;
        if !e.connective.is_empty() {
            report.extracted += 1;
            slots.push(Some(ConnectiveRecord::new(
                id_of(i, turn),
                &turn.s1,
                e.connective,
                e.remainder,
                RecordSource::PosExtraction,
            )));
        } else if opts.remote.is_some() {
            prompts.push((
                i,
                build_llm_prompt(&turn.s1, &turn.s2, opts.calibration.as_deref()),
            ));
            slots.push(None);
        } else {
            report.without_connective += 1;
            slots.push(Some(ConnectiveRecord::new(
                id_of(i, turn),
                &turn.s1,
                "",
                turn.s2.trim(),
                RecordSource::PosExtraction,
            )));
        }
    }

    if let Some(remote) = &opts.remote {
        let replies = annotate(&prompts, remote, opts.concurrency, opts.progress.as_deref())?;
        for (i, _) in &prompts {
            let turn = &turns[*i];
            let id = id_of(*i, turn);
            let reply = &replies[i];
            let a = match parse_llm_output(reply) {
                Ok(a) => a,
                Err(e) => {
                    log::warn!("{id}: {e}");
                    report.skipped.push((id, e.to_string()));
                    continue;
                }
            };
            let s2 = turn.s2.trim();
            let record = if a.present {
                let n = a.connective.len();
                match s2
                    .get(..n)
                    .filter(|p| p.eq_ignore_ascii_case(&a.connective))
                {
                    Some(prefix) => {
                        report.extracted += 1;
                        ConnectiveRecord::new(
                            id,
                            &turn.s1,
                            prefix,
                            s2[n..].trim_start(),
                            RecordSource::LlmGeneration,
                        )
                    }
                    None => {
                        let reason = format!(
                            "reported connective {:?} does not begin the turn",
                            a.connective
                        );
                        log::warn!("{id}: {reason}");
                        report.skipped.push((id, reason));
                        continue;
                    }
                }
            } else {
                if a.connective.is_empty() {
                    report.without_connective += 1;
                } else {
                    report.generated += 1;
                }
                ConnectiveRecord::new(id, &turn.s1, a.connective, s2, RecordSource::LlmGeneration)
            };
            slots[*i] = Some(record);
        }
    }
    Ok((slots.into_iter().flatten().collect(), report))
}
