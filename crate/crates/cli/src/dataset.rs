//! Dataset ingestion: SMILES corpora (one molecule per line, `#` comments)
//! and label CSVs (`smiles,task1[,task2,...]` with 0/1/empty cells).
//!
//! Parsing can fan out over a small worker pool; results are merged in
//! line order so the loaded corpus is identical regardless of worker
//! count. `MOLMAE_THREADS` caps the pool; the deterministic flag forces a
//! single worker.

use std::fs;
use std::path::Path;

use molmae_core::molgraph::parse_smiles;
use molmae_core::train::{LabeledMolecule, PreparedMolecule};

use crate::CliError;

pub struct LoadedCorpus {
    pub molecules: Vec<PreparedMolecule>,
    /// (1-based line number, reason) for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

fn worker_count(deterministic: bool) -> usize {
    if deterministic {
        return 1;
    }
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("MOLMAE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(available);
    available.min(cap).max(1)
}

fn parse_lines(
    lines: &[(usize, String)],
    workers: usize,
) -> Vec<(usize, Result<PreparedMolecule, String>)> {
    if workers <= 1 || lines.len() < 64 {
        return lines
            .iter()
            .map(|(no, text)| (*no, prepare_line(text)))
            .collect();
    }
    let chunk = lines.len().div_ceil(workers);
    let mut out = Vec::with_capacity(lines.len());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for slice in lines.chunks(chunk) {
            handles.push(scope.spawn(move || {
                slice
                    .iter()
                    .map(|(no, text)| (*no, prepare_line(text)))
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            out.extend(h.join().expect("parser worker"));
        }
    });
    out
}

fn prepare_line(text: &str) -> Result<PreparedMolecule, String> {
    let molecule = parse_smiles(text).map_err(|e| e.to_string())?;
    PreparedMolecule::new(molecule).map_err(|e| e.to_string())
}

/// Load a SMILES corpus. In strict mode any unparseable line is fatal;
/// otherwise such lines are collected as skips.
pub fn load_smiles_file(
    path: &Path,
    strict: bool,
    deterministic: bool,
) -> Result<LoadedCorpus, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let lines: Vec<(usize, String)> = text
        .lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| (i + 1, t.to_string()))
        })
        .collect();
    if lines.is_empty() {
        return Err(CliError::Data(format!("{} holds no molecules", path.display())));
    }

    let results = parse_lines(&lines, worker_count(deterministic));
    let mut molecules = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (lineno, res) in results {
        match res {
            Ok(m) => molecules.push(m),
            Err(reason) => {
                if strict {
                    return Err(CliError::Data(format!("line {lineno}: {reason}")));
                }
                skipped.push((lineno, reason));
            }
        }
    }
    if molecules.is_empty() {
        return Err(CliError::Data(format!(
            "{}: every line failed to parse",
            path.display()
        )));
    }
    Ok(LoadedCorpus { molecules, skipped })
}

pub struct LoadedLabels {
    pub data: Vec<LabeledMolecule>,
    pub task_names: Vec<String>,
    pub skipped: Vec<(usize, String)>,
    /// Tasks dropped because every label was missing.
    pub dropped_tasks: Vec<String>,
}

/// Load a label CSV: header `smiles,task1[,task2,...]`, labels 0/1/empty.
/// Tasks whose labels are all missing are dropped with a note.
pub fn load_label_csv(path: &Path, strict: bool) -> Result<LoadedLabels, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{} is empty", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || !columns[0].eq_ignore_ascii_case("smiles") {
        return Err(CliError::Data(
            "label CSV header must be smiles,task1[,task2,...]".into(),
        ));
    }
    let task_names: Vec<String> = columns[1..].iter().map(|s| s.to_string()).collect();
    let n_tasks = task_names.len();

    let mut data = Vec::new();
    let mut skipped = Vec::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let smiles = cells.next().unwrap_or("");
        let labels: Vec<&str> = cells.collect();
        if labels.len() != n_tasks {
            let reason = format!("expected {} label cells, got {}", n_tasks, labels.len());
            if strict {
                return Err(CliError::Data(format!("line {lineno}: {reason}")));
            }
            skipped.push((lineno, reason));
            continue;
        }
        let parsed_labels: Result<Vec<Option<bool>>, String> = labels
            .iter()
            .map(|&c| match c {
                "" => Ok(None),
                "0" => Ok(Some(false)),
                "1" => Ok(Some(true)),
                other => Err(format!("label cell {other} is not 0, 1, or empty")),
            })
            .collect();
        let parsed_labels = match parsed_labels {
            Ok(l) => l,
            Err(reason) => {
                if strict {
                    return Err(CliError::Data(format!("line {lineno}: {reason}")));
                }
                skipped.push((lineno, reason));
                continue;
            }
        };
        match prepare_line(smiles) {
            Ok(prepared) => data.push(LabeledMolecule {
                prepared,
                labels: parsed_labels,
            }),
            Err(reason) => {
                if strict {
                    return Err(CliError::Data(format!("line {lineno}: {reason}")));
                }
                skipped.push((lineno, reason));
            }
        }
    }
    if data.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable labeled molecules",
            path.display()
        )));
    }

    // drop all-missing tasks
    let mut keep = Vec::new();
    let mut dropped_tasks = Vec::new();
    for t in 0..n_tasks {
        if data.iter().any(|m| m.labels[t].is_some()) {
            keep.push(t);
        } else {
            dropped_tasks.push(task_names[t].clone());
        }
    }
    let kept_names: Vec<String> = keep.iter().map(|&t| task_names[t].clone()).collect();
    if keep.len() != n_tasks {
        for m in &mut data {
            m.labels = keep.iter().map(|&t| m.labels[t]).collect();
        }
    }

    Ok(LoadedLabels {
        data,
        task_names: kept_names,
        skipped,
        dropped_tasks,
    })
}
