//! Mask-ratio ablation: pre-train once per ratio under shared seeds, then
//! probe each run with a small fine-tune on a synthetic oxygen-presence
//! task derived from the corpus itself.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::batch::PreparedMolecule;
use super::finetune::{finetune_loop, FinetuneSettings, LabeledMolecule, NoFinetuneHook};
use super::pretrain::{masked_reconstruction_eval, pretrain_loop, NoHook, PretrainSettings};
use super::split::SplitSpec;
use super::TrainError;
use crate::model::ModelConfig;
use crate::molgraph::Element;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub ratio: f64,
    /// Masked element-group accuracy after pre-training at this ratio.
    pub pretrain_element_acc: f64,
    /// Test AUC of the oxygen-presence probe fine-tuned from this run.
    pub downstream_auc: f64,
}

impl AblationRow {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}",
            self.ratio, self.pretrain_element_acc, self.downstream_auc
        )
    }
}

/// Whether a molecule contains oxygen; the probe task's label.
pub fn contains_oxygen(m: &PreparedMolecule) -> bool {
    m.molecule.atoms.iter().any(|a| a.element == Element::O)
}

pub fn ablate_mask_ratio<R: Real>(
    corpus: &[PreparedMolecule],
    ratios: &[f64],
    config: &ModelConfig,
    pretrain: &PretrainSettings,
    probe: &FinetuneSettings,
) -> Result<Vec<AblationRow>, TrainError> {
    let mut rows = Vec::with_capacity(ratios.len());
    let labeled: Vec<LabeledMolecule> = corpus
        .iter()
        .filter(|m| m.is_maskable())
        .map(|m| LabeledMolecule {
            prepared: m.clone(),
            labels: alloc::vec![Some(contains_oxygen(m))],
        })
        .collect();

    for &ratio in ratios {
        let run_config = ModelConfig {
            mask_ratio: ratio,
            ..config.clone()
        };
        let result = pretrain_loop::<R, _>(corpus, &run_config, pretrain, &mut NoHook)?;
        let eval = masked_reconstruction_eval(
            corpus,
            &result.params,
            &run_config,
            pretrain.seed ^ 0x5eed,
            pretrain.batch_size,
        )?;
        let element_acc = eval
            .node_group("element")
            .map(|g| g.accuracy)
            .unwrap_or(0.0);

        let fine = finetune_loop::<R, _>(
            &labeled,
            1,
            &result.params,
            &run_config,
            probe,
            &SplitSpec::standard(probe.seed),
            &mut NoFinetuneHook,
        )?;

        rows.push(AblationRow {
            ratio,
            pretrain_element_acc: element_acc,
            downstream_auc: fine.test_auc,
        });
    }
    Ok(rows)
}
