//! Implementations behind the CLI subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use molmae_core::model::{count_parameters, ModelConfig, ParamStore};
use molmae_core::molgraph::{build_dual_graph, build_node_graph, parse_smiles};
use molmae_core::real::Real;
use molmae_core::train::{
    ablate_mask_ratio, evaluate_auc, finetune_loop, pretrain_loop,
    FinetuneHook, FinetuneRecord, LabeledMolecule, PretrainHook, PretrainRecord, SplitSpec,
};
use molmae_core::verify;

use crate::checkpoint::{self, LoadedParams};
use crate::config::{Precision, RunConfig};
use crate::corpus::generate_corpus;
use crate::dataset::{load_label_csv, load_smiles_file};
use crate::CliError;

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create out dir {}: {e}", out.display())))
}

fn report_skips(skipped: &[(usize, String)]) {
    if !skipped.is_empty() {
        eprintln!("warning: skipped {} unusable lines", skipped.len());
        for (lineno, reason) in skipped.iter().take(5) {
            eprintln!("warning: line {lineno}: {reason}");
        }
    }
}

/// Molecules below the masking minimum (2 atoms, 1 bond) parse fine but
/// cannot feed pre-training; say so instead of dropping them silently.
fn report_unmaskable(molecules: &[molmae_core::train::PreparedMolecule]) {
    let n = molecules.iter().filter(|m| !m.is_maskable()).count();
    if n > 0 {
        eprintln!("warning: {n} molecules are too small to mask and will be ignored");
    }
}

/// Streams trace lines to a file and saves periodic checkpoints.
struct PretrainWriter<'a> {
    trace: fs::File,
    out: &'a Path,
    every: u64,
    config_pairs: Vec<(String, String)>,
}

impl<R: Real> PretrainHook<R> for PretrainWriter<'_> {
    fn on_step(&mut self, record: &PretrainRecord, params: &ParamStore<R>) {
        writeln!(self.trace, "{}", record.tsv_line()).expect("trace write");
        if self.every > 0 && record.step % self.every == 0 {
            let prefix = self.out.join(format!("checkpoint_step_{}", record.step));
            checkpoint::save(
                &prefix,
                params,
                &self.config_pairs,
                &[("stage".into(), "pretrain".into())],
            )
            .expect("periodic checkpoint write");
        }
    }
}

pub fn cmd_pretrain(
    config_path: &Path,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    deterministic: bool,
    strict: bool,
) -> Result<(), CliError> {
    let mut config = RunConfig::from_file(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if deterministic {
        config.deterministic = true;
    }
    ensure_out_dir(out)?;

    let corpus = load_smiles_file(data, strict, config.deterministic)?;
    report_skips(&corpus.skipped);
    report_unmaskable(&corpus.molecules);

    let model_config = config.model_config();
    let settings = config.pretrain_settings();
    let config_pairs = config.to_pairs();
    let trace_path = out.join("pretrain_trace.tsv");
    let mut hook = PretrainWriter {
        trace: fs::File::create(&trace_path)?,
        out,
        every: config.checkpoint_every,
        config_pairs: config_pairs.clone(),
    };

    let final_prefix = out.join("checkpoint_final");
    match config.precision {
        Precision::F32 => {
            let result =
                pretrain_loop::<f32, _>(&corpus.molecules, &model_config, &settings, &mut hook)?;
            checkpoint::save(
                &final_prefix,
                &result.params,
                &config_pairs,
                &[("stage".into(), "pretrain".into())],
            )?;
        }
        Precision::F64 => {
            let result =
                pretrain_loop::<f64, _>(&corpus.molecules, &model_config, &settings, &mut hook)?;
            checkpoint::save(
                &final_prefix,
                &result.params,
                &config_pairs,
                &[("stage".into(), "pretrain".into())],
            )?;
        }
    }
    drop(hook);

    let count = count_parameters(&model_config);
    println!("pretrain done");
    println!("parameters\t{}", count.total);
    println!("trace\t{}", trace_path.display());
    println!("checkpoint\t{}", checkpoint::manifest_path(&final_prefix).display());
    Ok(())
}

struct FinetuneWriter {
    trace: fs::File,
}

impl FinetuneHook for FinetuneWriter {
    fn on_epoch(&mut self, record: &FinetuneRecord) {
        writeln!(self.trace, "{}", record.tsv_line()).expect("trace write");
    }
}

fn load_pretrained_params(
    prefix: &Path,
    run: &RunConfig,
) -> Result<(LoadedParams, RunConfig), CliError> {
    let ck = checkpoint::load(prefix)?;
    let ck_config = RunConfig::from_pairs(&ck.config_pairs)?;
    // the architecture must match the fine-tune config exactly
    let same_shape = ck_config.hidden == run.hidden
        && ck_config.encoder_blocks == run.encoder_blocks
        && ck_config.heads == run.heads
        && ck_config.gnn_steps == run.gnn_steps
        && ck_config.attn_hidden == run.attn_hidden
        && ck_config.attn_out == run.attn_out;
    if !same_shape {
        return Err(CliError::Config(format!(
            "checkpoint architecture (hidden {}, {} encoder blocks, {} heads, {} gnn steps) \
             does not match the configuration",
            ck_config.hidden, ck_config.encoder_blocks, ck_config.heads, ck_config.gnn_steps
        )));
    }
    Ok((ck.params, ck_config))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_finetune(
    config_path: &Path,
    pretrained: &Path,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    deterministic: bool,
    strict: bool,
) -> Result<(), CliError> {
    let mut config = RunConfig::from_file(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if deterministic {
        config.deterministic = true;
    }
    ensure_out_dir(out)?;

    let labels = load_label_csv(data, strict)?;
    report_skips(&labels.skipped);
    for task in &labels.dropped_tasks {
        eprintln!("warning: task {task} has no labels; skipped");
    }
    let n_tasks = labels.task_names.len();
    if n_tasks == 0 {
        return Err(CliError::Data("every task was empty".into()));
    }

    let (params, _) = load_pretrained_params(pretrained, &config)?;
    let model_config = config.model_config();
    let settings = config.finetune_settings();
    let split = SplitSpec::standard(config.seed);
    let trace_path = out.join("finetune_trace.tsv");
    let mut hook = FinetuneWriter {
        trace: fs::File::create(&trace_path)?,
    };

    let config_pairs = config.to_pairs();
    let task_meta = labels.task_names.join(",");

    let best_prefix = out.join("checkpoint_best");
    let (best_epoch, best_valid, test_auc) = match (&config.precision, params) {
        (Precision::F32, LoadedParams::F32(p)) => {
            run_finetune(&labels.data, n_tasks, &p, &model_config, &settings, &split, &mut hook, &best_prefix, &config_pairs, &task_meta)?
        }
        (Precision::F64, LoadedParams::F64(p)) => {
            run_finetune(&labels.data, n_tasks, &p, &model_config, &settings, &split, &mut hook, &best_prefix, &config_pairs, &task_meta)?
        }
        (Precision::F32, LoadedParams::F64(p)) => {
            let p = p.to_precision::<f32>();
            run_finetune(&labels.data, n_tasks, &p, &model_config, &settings, &split, &mut hook, &best_prefix, &config_pairs, &task_meta)?
        }
        (Precision::F64, LoadedParams::F32(p)) => {
            let p = p.to_precision::<f64>();
            run_finetune(&labels.data, n_tasks, &p, &model_config, &settings, &split, &mut hook, &best_prefix, &config_pairs, &task_meta)?
        }
    };

    println!("finetune done");
    println!("best_epoch\t{best_epoch}");
    println!("valid_auc\t{best_valid}");
    println!("test_auc\t{test_auc}");
    println!("trace\t{}", trace_path.display());
    println!("checkpoint\t{}", checkpoint::manifest_path(&best_prefix).display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_finetune<R: Real>(
    data: &[LabeledMolecule],
    n_tasks: usize,
    pretrained: &ParamStore<R>,
    model_config: &ModelConfig,
    settings: &molmae_core::train::FinetuneSettings,
    split: &SplitSpec,
    hook: &mut FinetuneWriter,
    best_prefix: &Path,
    config_pairs: &[(String, String)],
    task_meta: &str,
) -> Result<(u64, f64, f64), CliError> {
    let result = finetune_loop::<R, _>(data, n_tasks, pretrained, model_config, settings, split, hook)?;
    checkpoint::save(
        best_prefix,
        &result.params,
        config_pairs,
        &[
            ("stage".into(), "finetune".into()),
            ("tasks".into(), task_meta.into()),
        ],
    )?;
    Ok((result.best_epoch, result.best_valid_auc, result.test_auc))
}

pub fn cmd_eval(checkpoint_prefix: &Path, data: &Path, strict: bool) -> Result<(), CliError> {
    let ck = checkpoint::load(checkpoint_prefix)?;
    if ck.meta.get("stage").map(String::as_str) != Some("finetune") {
        return Err(CliError::Config(
            "eval needs a fine-tuned checkpoint (meta.stage = finetune)".into(),
        ));
    }
    let run = RunConfig::from_pairs(&ck.config_pairs)?;
    let tasks_echo = ck
        .meta
        .get("tasks")
        .ok_or_else(|| CliError::Config("checkpoint lacks a task list".into()))?;
    let task_names: Vec<String> = tasks_echo.split(',').map(str::to_string).collect();

    let labels = load_label_csv(data, strict)?;
    report_skips(&labels.skipped);
    if labels.task_names != task_names {
        return Err(CliError::Data(format!(
            "CSV tasks {:?} do not match checkpoint tasks {:?}",
            labels.task_names, task_names
        )));
    }

    let model_config = run.model_config();
    let refs: Vec<&LabeledMolecule> = labels.data.iter().collect();
    let (mean, per_task) = match ck.params {
        LoadedParams::F32(p) => evaluate_auc(
            &refs,
            &p,
            &model_config,
            task_names.len(),
            run.use_descriptors,
            run.batch_size,
        )?,
        LoadedParams::F64(p) => evaluate_auc(
            &refs,
            &p,
            &model_config,
            task_names.len(),
            run.use_descriptors,
            run.batch_size,
        )?,
    };

    for (name, auc) in task_names.iter().zip(&per_task) {
        match auc {
            Some(a) => println!("task\t{name}\t{a}"),
            None => {
                eprintln!("warning: task {name} has a single class; skipped");
                println!("task\t{name}\tskipped");
            }
        }
    }
    println!("mean_auc\t{mean}");
    Ok(())
}

pub fn cmd_gradcheck() -> Result<(), CliError> {
    let report = verify::run_gradient_suite().map_err(|e| CliError::Numeric(e.to_string()))?;
    print!("{}", verify::format_report(&report));
    if report.passed() {
        println!("gradient suite: pass");
        Ok(())
    } else {
        Err(CliError::Numeric("gradient suite failed".into()))
    }
}

pub fn cmd_dump_dual(smiles: &str) -> Result<(), CliError> {
    let mol = parse_smiles(smiles).map_err(|e| CliError::Data(e.to_string()))?;
    let g = build_node_graph(&mol).map_err(|e| CliError::Data(e.to_string()))?;
    let dg = build_dual_graph(&g);

    println!("molecule\t{smiles}");
    println!("atoms\t{}", mol.n_atoms());
    println!("bonds\t{}", mol.n_bonds());
    println!("dual_nodes\t{}", dg.n_dual_nodes);
    println!("dual_edges\t{}", dg.dual_edges.len());
    for (e, &(u, v)) in g.directed_edges.iter().enumerate() {
        let in_neighbors: Vec<String> = dg
            .dual_edges
            .iter()
            .filter(|&&(_, dst)| dst == e)
            .map(|&(src, _)| format!("{src}"))
            .collect();
        let feats: Vec<String> = dg
            .dual_node_features
            .row(e)
            .iter()
            .map(|x| format!("{x}"))
            .collect();
        println!(
            "dual_node\t{e}\tedge {u}->{v}\tin [{}]\tfeatures [{}]",
            in_neighbors.join(","),
            feats.join(",")
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_ablate(
    config_path: &Path,
    data: &Path,
    out: &Path,
    ratios_arg: &str,
    seed: Option<u64>,
    strict: bool,
) -> Result<(), CliError> {
    let mut config = RunConfig::from_file(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let ratios: Vec<f64> = ratios_arg
        .split(',')
        .map(|r| {
            r.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad ratio {r}")))
        })
        .collect::<Result<_, _>>()?;
    if ratios.is_empty() || ratios.iter().any(|&r| !(0.0 < r && r < 1.0)) {
        return Err(CliError::Config("ratios must lie in (0, 1)".into()));
    }
    ensure_out_dir(out)?;

    let corpus = load_smiles_file(data, strict, config.deterministic)?;
    report_skips(&corpus.skipped);
    report_unmaskable(&corpus.molecules);

    let model_config = config.model_config();
    let pre = config.pretrain_settings();
    let fine = config.finetune_settings();

    let rows = match config.precision {
        Precision::F32 => {
            ablate_mask_ratio::<f32>(&corpus.molecules, &ratios, &model_config, &pre, &fine)?
        }
        Precision::F64 => {
            ablate_mask_ratio::<f64>(&corpus.molecules, &ratios, &model_config, &pre, &fine)?
        }
    };

    let table_path = out.join("ablation.tsv");
    let mut f = fs::File::create(&table_path)?;
    for row in &rows {
        writeln!(f, "{}", row.tsv_line())?;
        println!("{}", row.tsv_line());
    }
    println!("table\t{}", table_path.display());
    Ok(())
}

pub fn cmd_gen_corpus(count: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Config("count must be positive".into()));
    }
    let lines = generate_corpus(seed, count);
    let mut text = format!("# synthetic corpus: seed {seed}, {count} molecules\n");
    for l in &lines {
        text += l;
        text.push('\n');
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(out, text)?;
    println!("corpus\t{}", out.display());
    Ok(())
}

/// Report parameter accounting for the configured model.
pub fn cmd_params(config_path: Option<&PathBuf>) -> Result<(), CliError> {
    let config = match config_path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let count = count_parameters(&config.model_config());
    println!("total\t{}", count.total);
    println!("encoder\t{}", count.encoder);
    println!("decoder\t{}", count.decoder);
    for (name, n) in &count.components {
        println!("component\t{name}\t{n}");
    }
    Ok(())
}
