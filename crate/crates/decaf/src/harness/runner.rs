//! End-to-end experiment execution: generate → shift → split → train →
//! predict → evaluate, plus multi-seed aggregation.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::GraphData;
use crate::harness::config::{DatasetSpec, ExperimentConfig, Method};
use crate::harness::dataset::{dataset_fingerprint, load_dataset};
use crate::harness::metrics::{accuracy, binary_f1, macro_f1, micro_f1};
use crate::model::{
    erm_predict, predict, save_checkpoint, train_decaf, train_erm, Checkpoint, SavedModel,
    CHECKPOINT_VERSION,
};
use crate::scmgen::{apply_shift, generate_graph, make_recipe, sample_latents, ShiftSpec};
use crate::splits::{soft_label_leaveout, SplitMasks};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub seed: u64,
    pub macro_f1: SplitScores,
    pub micro_f1: SplitScores,
    pub accuracy: SplitScores,
    /// Positive-class F1, only for two-class problems.
    pub binary_f1: Option<SplitScores>,
    /// Kept out of the serialized report so that artifacts from identical
    /// configs compare bit-for-bit.
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub config_fingerprint: String,
    pub dataset_fingerprint: String,
}

struct PreparedData {
    g_train: GraphData,
    masks: SplitMasks,
    /// Present when a shift is active: an independently sampled graph from
    /// the shifted generative parameters; test metrics come from all of its
    /// nodes instead of the held-out mask.
    g_test: Option<GraphData>,
}

fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let seed = config.seed;
    let (g_train, params) = match &config.dataset {
        DatasetSpec::Recipe {
            recipe,
            nodes,
            target_mean_degree,
        } => {
            let params = make_recipe(*recipe, seed, *target_mean_degree)?;
            let z = sample_latents(&params, *nodes, seed.wrapping_add(11))?;
            let syn = generate_graph(&params, &z, seed.wrapping_add(12))?;
            (syn.graph, Some(params))
        }
        DatasetSpec::Path { path } => (load_dataset(path)?, None),
    };

    let g_test = match &config.shift {
        Some(shift) if shift.magnitude != 0.0 => {
            let params = params.as_ref().ok_or_else(|| {
                Error::invalid("shifts require a generated (recipe) dataset")
            })?;
            let shifted = apply_shift(
                params,
                &ShiftSpec {
                    kind: shift.kind,
                    magnitude: shift.magnitude,
                    seed: seed.wrapping_add(13),
                },
            );
            let z = sample_latents(&shifted, g_train.n(), seed.wrapping_add(14))?;
            Some(generate_graph(&shifted, &z, seed.wrapping_add(15))?.graph)
        }
        _ => None,
    };

    let masks = soft_label_leaveout(
        &g_train.labels,
        config.split.num_groups,
        config.split.major_share,
        seed.wrapping_add(16),
    )
    .map_err(Error::in_stage("split"))?;

    Ok(PreparedData {
        g_train,
        masks,
        g_test,
    })
}

fn scores_for(
    y_true: &[usize],
    y_pred: &[usize],
    k: usize,
) -> Result<(f64, f64, f64, Option<f64>)> {
    let mac = macro_f1(y_true, y_pred, k)?;
    let mic = micro_f1(y_true, y_pred, k)?;
    let acc = accuracy(y_true, y_pred)?;
    let bin = if k == 2 {
        Some(binary_f1(y_true, y_pred)?)
    } else {
        None
    };
    Ok((mac, mic, acc, bin))
}

fn select(mask: &[bool], values: &[usize]) -> Vec<usize> {
    mask.iter()
        .zip(values)
        .filter_map(|(&m, &v)| m.then_some(v))
        .collect()
}

/// Run one experiment end to end. When `out` is given, the metrics report
/// and a model checkpoint are written into it.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<MetricsReport> {
    let started = Instant::now();
    let data = prepare(config).map_err(Error::in_stage("generate"))?;
    let g = &data.g_train;
    let k = g.num_classes;
    let mut hyper = config.hyper.clone();
    hyper.seed = config.seed;

    let (saved, train_pred, test_pred): (SavedModel, Vec<usize>, Vec<usize>) = match config.method {
        Method::Decaf => {
            let model = train_decaf(g, &data.masks, &hyper).map_err(Error::in_stage("train"))?;
            let (_, train_pred) = predict(&model, g, &data.masks.train, g, config.seed)
                .map_err(Error::in_stage("predict"))?;
            let test_pred = match &data.g_test {
                Some(g_test) => {
                    predict(&model, g, &data.masks.train, g_test, config.seed)
                        .map_err(Error::in_stage("predict"))?
                        .1
                }
                None => train_pred.clone(),
            };
            (SavedModel::Decaf(model), train_pred, test_pred)
        }
        Method::Erm => {
            let model = train_erm(g, &data.masks, config.backbone, &hyper)
                .map_err(Error::in_stage("train"))?;
            let (_, train_pred) = erm_predict(&model, g).map_err(Error::in_stage("predict"))?;
            let test_pred = match &data.g_test {
                Some(g_test) => erm_predict(&model, g_test).map_err(Error::in_stage("predict"))?.1,
                None => train_pred.clone(),
            };
            (SavedModel::Erm(model), train_pred, test_pred)
        }
    };

    let (train_true, train_hat) = (
        select(&data.masks.train, &g.labels),
        select(&data.masks.train, &train_pred),
    );
    let (val_true, val_hat) = (
        select(&data.masks.val, &g.labels),
        select(&data.masks.val, &train_pred),
    );
    let (test_true, test_hat) = match &data.g_test {
        Some(g_test) => (g_test.labels.clone(), test_pred),
        None => (
            select(&data.masks.test, &g.labels),
            select(&data.masks.test, &test_pred),
        ),
    };

    let (mac_tr, mic_tr, acc_tr, bin_tr) = scores_for(&train_true, &train_hat, k)?;
    let (mac_va, mic_va, acc_va, bin_va) = scores_for(&val_true, &val_hat, k)?;
    let (mac_te, mic_te, acc_te, bin_te) = scores_for(&test_true, &test_hat, k)?;

    let report = MetricsReport {
        method: config.method,
        seed: config.seed,
        macro_f1: SplitScores {
            train: mac_tr,
            val: mac_va,
            test: mac_te,
        },
        micro_f1: SplitScores {
            train: mic_tr,
            val: mic_va,
            test: mic_te,
        },
        accuracy: SplitScores {
            train: acc_tr,
            val: acc_va,
            test: acc_te,
        },
        binary_f1: bin_tr.and(bin_va).and(bin_te).map(|_| SplitScores {
            train: bin_tr.unwrap(),
            val: bin_va.unwrap(),
            test: bin_te.unwrap(),
        }),
        wall_time_secs: started.elapsed().as_secs_f64(),
        config_fingerprint: config.fingerprint(),
        dataset_fingerprint: dataset_fingerprint(g),
    };

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report).expect("report serialization"),
        )?;
        save_checkpoint(
            &dir.join("checkpoint.json"),
            &Checkpoint {
                version: CHECKPOINT_VERSION,
                config_fingerprint: report.config_fingerprint.clone(),
                model: saved,
            },
        )?;
        std::fs::write(
            dir.join("masks.json"),
            serde_json::to_string(&data.masks).expect("mask serialization"),
        )?;
    }
    Ok(report)
}

/// Order statistics over a set of scores (e.g. test Macro-F1 across seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub iqr: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Aggregate {
        count: n,
        mean,
        std,
        median: quantile(&sorted, 0.5),
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
    })
}
