//! Plain empirical-risk-minimization baselines over the graph backbones.

use std::rc::Rc;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{backbone_forward, gcn_forward_on_tape, normalize_adjacency, Backbone, GraphData};
use crate::model::pipeline::{argmax_rows, TrainConfig};
use crate::numerics::{
    adam_step, evaluate_with_gradients, softmax_rows, AdamState, Matrix, SparseConst, Tape,
};
use crate::splits::SplitMasks;
use crate::{harness, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Sgc,
    Gcn,
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgc" => Ok(BackboneKind::Sgc),
            "gcn" => Ok(BackboneKind::Gcn),
            other => Err(Error::invalid(format!("unknown backbone '{other}'"))),
        }
    }
}

fn selector(rows: &[usize], n: usize) -> Rc<SparseConst> {
    Rc::new(SparseConst {
        rows: rows.len(),
        cols: n,
        entries: rows.iter().enumerate().map(|(t, &i)| (t, i, 1.0)).collect(),
    })
}

/// Cross-entropy training of the chosen backbone with validation
/// early stopping on Macro-F1.
pub fn train_erm(
    g: &GraphData,
    masks: &SplitMasks,
    kind: BackboneKind,
    cfg: &TrainConfig,
) -> Result<Backbone> {
    let train_idx = SplitMasks::indices(&masks.train);
    if train_idx.is_empty() {
        return Err(Error::invalid("empty training mask"));
    }
    let val_idx = {
        let v = SplitMasks::indices(&masks.val);
        if v.is_empty() {
            train_idx.clone()
        } else {
            v
        }
    };
    let y_train: Vec<usize> = train_idx.iter().map(|&i| g.labels[i]).collect();
    let y_val: Vec<usize> = val_idx.iter().map(|&i| g.labels[i]).collect();
    let k = g.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);

    match kind {
        BackboneKind::Sgc => {
            // Propagated features are fixed; only Θ trains.
            let s = normalize_adjacency(g, true);
            let mut px = g.features.clone();
            for _ in 0..cfg.hops {
                px = s.apply(&px)?;
            }
            let px_train = px.select_rows(&train_idx);
            let scale = (1.0 / g.d() as f64).sqrt();
            let mut theta = vec![Matrix::from_fn(g.d(), k, |_, _| scale * normal())];
            let mut adam = AdamState::new(&theta, cfg.learning_rate, cfg.weight_decay);
            let mut best: Option<(f64, Matrix)> = None;
            let mut since = 0;
            for epoch in 0..cfg.epochs {
                let mut tape = Tape::new();
                let t = tape.parameter(theta[0].clone());
                let x = tape.constant(px_train.clone());
                let logits = tape.matmul(x, t)?;
                let loss = tape.softmax_cross_entropy(logits, &y_train)?;
                let grads = match evaluate_with_gradients(&tape, loss) {
                    Ok((_, grads)) => grads,
                    Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                    Err(e) => return Err(e),
                };
                adam_step(&mut theta, &grads, &mut adam)?;

                let val_logits = px.select_rows(&val_idx).matmul(&theta[0])?;
                let score = harness::macro_f1(&y_val, &argmax_rows(&val_logits), k)?;
                if best.as_ref().map_or(true, |(b, _)| score > *b) {
                    best = Some((score, theta[0].clone()));
                    since = 0;
                } else {
                    since += 1;
                    if since > cfg.patience {
                        break;
                    }
                }
            }
            let theta = best.map(|(_, t)| t).unwrap_or_else(|| theta[0].clone());
            Ok(Backbone::Sgc {
                hops: cfg.hops,
                theta,
            })
        }
        BackboneKind::Gcn => {
            let scale1 = (2.0 / g.d() as f64).sqrt();
            let mut w1 = Matrix::from_fn(g.d(), cfg.hidden, |_, _| scale1 * normal());
            let scale2 = (1.0 / cfg.hidden as f64).sqrt();
            let mut w2 = Matrix::from_fn(cfg.hidden, k, |_, _| scale2 * normal());
            let sel = selector(&train_idx, g.n());
            let mut adam = AdamState::new(
                &[w1.clone(), w2.clone()],
                cfg.learning_rate,
                cfg.weight_decay,
            );
            let mut best: Option<(f64, Matrix, Matrix)> = None;
            let mut since = 0;
            for epoch in 0..cfg.epochs {
                let mut tape = Tape::new();
                let (logits, _, _) = gcn_forward_on_tape(&mut tape, g, &w1, &w2)?;
                let train_logits = tape.sparse_matmul(Rc::clone(&sel), logits)?;
                let loss = tape.softmax_cross_entropy(train_logits, &y_train)?;
                let grads = match evaluate_with_gradients(&tape, loss) {
                    Ok((_, grads)) => grads,
                    Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                    Err(e) => return Err(e),
                };
                let mut params = vec![w1.clone(), w2.clone()];
                adam_step(&mut params, &grads, &mut adam)?;
                w1 = params.remove(0);
                w2 = params.remove(0);

                let model = Backbone::Gcn {
                    w1: w1.clone(),
                    w2: w2.clone(),
                };
                let val_logits = backbone_forward(&model, g)?.select_rows(&val_idx);
                let score = harness::macro_f1(&y_val, &argmax_rows(&val_logits), k)?;
                if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
                    best = Some((score, w1.clone(), w2.clone()));
                    since = 0;
                } else {
                    since += 1;
                    if since > cfg.patience {
                        break;
                    }
                }
            }
            if let Some((_, bw1, bw2)) = best {
                w1 = bw1;
                w2 = bw2;
            }
            Ok(Backbone::Gcn { w1, w2 })
        }
    }
}

/// Softmax probabilities and argmax classes of a trained backbone.
pub fn erm_predict(model: &Backbone, g: &GraphData) -> Result<(Matrix, Vec<usize>)> {
    let logits = backbone_forward(model, g)?;
    let probs = softmax_rows(&logits);
    let classes = argmax_rows(&probs);
    Ok((probs, classes))
}
