//! Dual causal decomposition: shared neighborhood encoder, the two
//! treatment/confounder branches, background counterfactuals, effect
//! estimation, and the combined prediction.

use rand::seq::index::sample as sample_without_replacement;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{neighborhood_propagate, GraphData};
use crate::model::mlp::Mlp;
use crate::numerics::{
    adam_step, evaluate_with_gradients, softmax_rows, AdamState, Matrix, NodeId, Tape,
};
use crate::splits::SplitMasks;
use crate::{harness, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Width o of every hidden representation, including the shared a_i.
    pub hidden: usize,
    /// Propagation depth L of the neighborhood encoder.
    pub hops: usize,
    /// Mixing weight between the feature branch (γ) and the neighborhood
    /// branch (1 − γ) at prediction time.
    pub gamma: f64,
    /// Background sample size k for the counterfactual terms.
    pub cf_samples: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Treatment-network updates per confounder-regression update in the
    /// alternating stages.
    pub step_ratio: usize,
    /// Mini-batch size; `None` trains full-batch.
    pub batch: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            hops: 2,
            gamma: 0.5,
            cf_samples: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            epochs: 200,
            patience: 20,
            step_ratio: 5,
            batch: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if self.cf_samples == 0 || self.hidden == 0 || self.hops == 0 || self.step_ratio == 0 {
            return Err(Error::invalid("hidden, hops, cf_samples, step_ratio must be >= 1"));
        }
        Ok(())
    }
}

/// Linear neighborhood encoder p: a = (propagated features) · W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub weights: Matrix,
    pub hops: usize,
}

impl Encoder {
    pub fn encode(&self, g: &GraphData) -> Result<Matrix> {
        neighborhood_propagate(g, &g.features, self.hops)?.matmul(&self.weights)
    }
}

/// Linear head p′ on top of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub w: Matrix,
    pub b: Matrix,
}

impl Head {
    pub fn apply(&self, a: &Matrix) -> Result<Matrix> {
        let mut out = a.matmul(&self.w)?;
        for i in 0..out.rows() {
            for (v, bias) in out.row_mut(i).iter_mut().zip(self.b.row(0)) {
                *v += bias;
            }
        }
        Ok(out)
    }
}

/// Frozen per-node quantities shared by both branches: the neighborhood
/// representation a_i and the fixed head output m_i^a. `g^X(a_i)` and
/// `h^A(a_i)` both resolve to rows of `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializedShared {
    pub a: Matrix,
    pub m_fixed: Matrix,
}

/// Neighborhood-treatment branch: m (x→logits), g (x→per-class o-vectors),
/// e (x→o, the confounder regression of a on x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmA {
    pub m: Mlp,
    pub g: Mlp,
    pub e: Mlp,
}

/// Feature-treatment branch: h (x→per-class o-vectors), e (a→same shape,
/// the regression of h(x) on a).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmX {
    pub h: Mlp,
    pub e: Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecafModel {
    pub encoder: Encoder,
    pub head: Head,
    pub scm_a: ScmA,
    pub scm_x: ScmX,
    pub gamma: f64,
    pub cf_samples: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundSample {
    pub indices: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimates {
    pub psi_x: Matrix,
    pub psi_a: Matrix,
}

/// Per-class grouped dot product: `lifted` packs one o-vector per class per
/// row (layout `[r·k + c]`), `vec` is one o-vector per row; output row c is
/// `Σ_r lifted[i, r·k+c] · vec[i, r]`.
pub fn per_class_dot(lifted: &Matrix, vec: &Matrix, k: usize) -> Result<Matrix> {
    let o = vec.cols();
    if lifted.rows() != vec.rows() || lifted.cols() != o * k {
        return Err(Error::shape("per_class_dot operand shapes"));
    }
    let mut out = Matrix::zeros(vec.rows(), k);
    for i in 0..vec.rows() {
        let lr = lifted.row(i);
        let vr = vec.row(i);
        let or = out.row_mut(i);
        for r in 0..o {
            let v = vr[r];
            for c in 0..k {
                or[c] += lr[r * k + c] * v;
            }
        }
    }
    Ok(out)
}

/// Tape version of [`per_class_dot`], composed from existing primitives:
/// tile `vec` across classes with a constant selector, multiply elementwise,
/// then group-sum back down to k columns.
pub fn per_class_dot_on_tape(tape: &mut Tape, lifted: NodeId, vec: NodeId, k: usize) -> Result<NodeId> {
    let o = tape.value(vec).cols();
    let tile = Matrix::from_fn(o, o * k, |r, j| f64::from(j / k == r));
    let group_sum = Matrix::from_fn(o * k, k, |j, c| f64::from(j % k == c));
    let tile = tape.constant(tile);
    let group_sum = tape.constant(group_sum);
    let tiled = tape.matmul(vec, tile)?;
    let prod = tape.mul_elem(lifted, tiled)?;
    tape.matmul(prod, group_sum)
}

pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(c, _)| c)
                .unwrap()
        })
        .collect()
}

fn mask_indices(mask: &[bool]) -> Vec<usize> {
    SplitMasks::indices(mask)
}

fn labels_at(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// One Adam update on a freshly built tape. The closure must register the
/// parameter nodes for `params`, in order, before anything else.
fn optimizer_step(
    params: &mut [Matrix],
    adam: &mut AdamState,
    epoch: usize,
    build: impl FnOnce(&mut Tape, &[NodeId]) -> Result<NodeId>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|p| tape.parameter(p.clone())).collect();
    let loss = build(&mut tape, &ids)?;
    match evaluate_with_gradients(&tape, loss) {
        Ok((value, grads)) => {
            if !value.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam_step(params, &grads, adam)?;
            Ok(value)
        }
        Err(Error::NonFinite { .. }) => Err(Error::Diverged { epoch }),
        Err(e) => Err(e),
    }
}

/// Best-validation-score snapshotting with patience. The best-so-far score
/// is non-decreasing by construction.
struct EarlyStopper {
    patience: usize,
    best: f64,
    since: usize,
    best_params: Option<Vec<Matrix>>,
}

impl EarlyStopper {
    fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: f64::NEG_INFINITY,
            since: 0,
            best_params: None,
        }
    }

    /// Returns false once patience is exhausted. Ties refresh the snapshot
    /// (the latest equally-scoring weights win) without resetting patience,
    /// so later, better-converged auxiliary regressions are kept.
    fn observe(&mut self, score: f64, params: &[Matrix]) -> bool {
        if score > self.best {
            self.best = score;
            self.best_params = Some(params.to_vec());
            self.since = 0;
        } else {
            if score == self.best {
                self.best_params = Some(params.to_vec());
            }
            self.since += 1;
        }
        self.since <= self.patience
    }

    fn into_best(self, fallback: Vec<Matrix>) -> Vec<Matrix> {
        self.best_params.unwrap_or(fallback)
    }
}

/// Mini-batches for one epoch: the whole training set when `batch` is None,
/// otherwise shuffled chunks.
fn epoch_batches(train_idx: &[usize], batch: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    match batch {
        None => vec![train_idx.to_vec()],
        Some(b) => {
            let mut shuffled = train_idx.to_vec();
            use rand::seq::SliceRandom;
            shuffled.shuffle(rng);
            shuffled.chunks(b.max(1)).map(|c| c.to_vec()).collect()
        }
    }
}

fn validation_indices(masks: &SplitMasks) -> Vec<usize> {
    let val = mask_indices(&masks.val);
    if val.is_empty() {
        mask_indices(&masks.train)
    } else {
        val
    }
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    })
}

/// Train the shared linear encoder and head by cross entropy on the training
/// nodes, early-stopped on validation Macro-F1.
pub fn train_encoder(g: &GraphData, masks: &SplitMasks, cfg: &TrainConfig) -> Result<(Encoder, Head)> {
    cfg.validate()?;
    let train_idx = mask_indices(&masks.train);
    if train_idx.is_empty() {
        return Err(Error::invalid("empty training mask"));
    }
    let val_idx = validation_indices(masks);
    let k = g.num_classes;
    let o = cfg.hidden;

    let px = neighborhood_propagate(g, &g.features, cfg.hops)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = vec![
        random_matrix(g.d(), o, (1.0 / g.d() as f64).sqrt(), &mut rng),
        random_matrix(o, k, (1.0 / o as f64).sqrt(), &mut rng),
        Matrix::zeros(1, k),
    ];
    let mut adam = AdamState::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let val_labels = labels_at(&g.labels, &val_idx);

    for epoch in 0..cfg.epochs {
        for batch_idx in epoch_batches(&train_idx, cfg.batch, &mut rng) {
            let px_batch = px.select_rows(&batch_idx);
            let y_batch = labels_at(&g.labels, &batch_idx);
            optimizer_step(&mut params, &mut adam, epoch, |tape, ids| {
                let x = tape.constant(px_batch.clone());
                let a = tape.matmul(x, ids[0])?;
                let logits = tape.matmul(a, ids[1])?;
                let logits = tape.add_row_broadcast(logits, ids[2])?;
                tape.softmax_cross_entropy(logits, &y_batch)
            })?;
        }
        let a = px.matmul(&params[0])?;
        let head = Head {
            w: params[1].clone(),
            b: params[2].clone(),
        };
        let logits = head.apply(&a)?;
        let preds = argmax_rows(&logits.select_rows(&val_idx));
        let score = harness::macro_f1(&val_labels, &preds, k)?;
        if !stopper.observe(score, &params) {
            break;
        }
    }
    let best = stopper.into_best(params);
    Ok((
        Encoder {
            weights: best[0].clone(),
            hops: cfg.hops,
        },
        Head {
            w: best[1].clone(),
            b: best[2].clone(),
        },
    ))
}

/// Freeze the shared entities: a = p(X, A) and m^a = p′(a).
pub fn materialize_shared(encoder: &Encoder, head: &Head, g: &GraphData) -> Result<MaterializedShared> {
    let a = encoder.encode(g)?;
    let m_fixed = head.apply(&a)?;
    Ok(MaterializedShared { a, m_fixed })
}

/// Branch prediction logits for the neighborhood treatment:
/// m(x) + g(x)ᵀ(a − e(x)).
pub fn scm_a_logits(scm: &ScmA, x: &Matrix, a: &Matrix, k: usize) -> Result<Matrix> {
    let m = scm.m.forward(x)?;
    let g_out = scm.g.forward(x)?;
    let resid = a.sub(&scm.e.forward(x)?)?;
    m.add(&per_class_dot(&g_out, &resid, k)?)
}

/// Branch prediction logits for the feature treatment:
/// m^a + aᵀ(h(x) − e(a)).
pub fn scm_x_logits(scm: &ScmX, x: &Matrix, a: &Matrix, m_fixed: &Matrix, k: usize) -> Result<Matrix> {
    let diff = scm.h.forward(x)?.sub(&scm.e.forward(a)?)?;
    m_fixed.add(&per_class_dot(&diff, a, k)?)
}

/// Stage 1 trains m alone; stage 2 alternates `step_ratio` treatment-network
/// updates (m frozen) with one confounder-regression update.
pub fn train_scm_a(
    g: &GraphData,
    shared: &MaterializedShared,
    masks: &SplitMasks,
    cfg: &TrainConfig,
) -> Result<ScmA> {
    cfg.validate()?;
    let train_idx = mask_indices(&masks.train);
    if train_idx.is_empty() {
        return Err(Error::invalid("empty training mask"));
    }
    let val_idx = validation_indices(masks);
    let val_labels = labels_at(&g.labels, &val_idx);
    let k = g.num_classes;
    let o = cfg.hidden;
    let d = g.d();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    // Stage 1: the direct x → y model.
    let mut m = Mlp::init(d, o, k, 1.0, &mut rng);
    {
        let mut params = m.params();
        let mut adam = AdamState::new(&params, cfg.learning_rate, cfg.weight_decay);
        let mut stopper = EarlyStopper::new(cfg.patience);
        let template = m.clone();
        for epoch in 0..cfg.epochs {
            for batch_idx in epoch_batches(&train_idx, cfg.batch, &mut rng) {
                let x_batch = g.features.select_rows(&batch_idx);
                let y_batch = labels_at(&g.labels, &batch_idx);
                let net = {
                    let mut net = template.clone();
                    net.set_params(&params);
                    net
                };
                optimizer_step(&mut params, &mut adam, epoch, |tape, ids| {
                    let x = tape.constant(x_batch.clone());
                    let logits = net.forward_on_tape(tape, x, ids)?;
                    tape.softmax_cross_entropy(logits, &y_batch)
                })?;
            }
            m.set_params(&params);
            let preds = argmax_rows(&m.forward(&g.features.select_rows(&val_idx))?);
            let score = harness::macro_f1(&val_labels, &preds, k)?;
            if !stopper.observe(score, &params) {
                break;
            }
        }
        m.set_params(&stopper.into_best(params));
    }

    // Stage 2: g starts with zero output, so its first objective value
    // equals the stage-1 loss; e regresses a on x.
    let mut g_net = Mlp::init(d, o, o * k, 0.0, &mut rng);
    let mut e_net = Mlp::init(d, o, o, 1.0, &mut rng);
    let m_train = m.forward(&g.features.select_rows(&train_idx))?;
    let x_train = g.features.select_rows(&train_idx);
    let y_train = labels_at(&g.labels, &train_idx);
    let a_train = shared.a.select_rows(&train_idx);

    let mut g_params = g_net.params();
    let mut e_params = e_net.params();
    let mut g_adam = AdamState::new(&g_params, cfg.learning_rate, cfg.weight_decay);
    let mut e_adam = AdamState::new(&e_params, cfg.learning_rate, cfg.weight_decay);
    let mut stopper = EarlyStopper::new(cfg.patience);

    for epoch in 0..cfg.epochs {
        e_net.set_params(&e_params);
        let resid = a_train.sub(&e_net.forward(&x_train)?)?;
        for _ in 0..cfg.step_ratio {
            let net = {
                let mut net = g_net.clone();
                net.set_params(&g_params);
                net
            };
            optimizer_step(&mut g_params, &mut g_adam, epoch, |tape, ids| {
                let x = tape.constant(x_train.clone());
                let g_out = net.forward_on_tape(tape, x, ids)?;
                let resid_node = tape.constant(resid.clone());
                let corr = per_class_dot_on_tape(tape, g_out, resid_node, k)?;
                let m_node = tape.constant(m_train.clone());
                let logits = tape.add(m_node, corr)?;
                tape.softmax_cross_entropy(logits, &y_train)
            })?;
        }
        {
            let net = {
                let mut net = e_net.clone();
                net.set_params(&e_params);
                net
            };
            optimizer_step(&mut e_params, &mut e_adam, epoch, |tape, ids| {
                let x = tape.constant(x_train.clone());
                let e_out = net.forward_on_tape(tape, x, ids)?;
                let target = tape.constant(a_train.clone());
                tape.mse_rows(target, e_out)
            })?;
        }
        g_net.set_params(&g_params);
        e_net.set_params(&e_params);
        let scm = ScmA {
            m: m.clone(),
            g: g_net.clone(),
            e: e_net.clone(),
        };
        let logits = scm_a_logits(&scm, &g.features.select_rows(&val_idx), &shared.a.select_rows(&val_idx), k)?;
        let score = harness::macro_f1(&val_labels, &argmax_rows(&logits), k)?;
        let mut snapshot = g_params.clone();
        snapshot.extend(e_params.clone());
        if !stopper.observe(score, &snapshot) {
            break;
        }
    }
    let mut snapshot = g_params;
    snapshot.extend(e_params);
    let best = stopper.into_best(snapshot);
    g_net.set_params(&best[..4]);
    e_net.set_params(&best[4..]);
    Ok(ScmA { m, g: g_net, e: e_net })
}

/// Feature-treatment branch; the direct model m^a is already fixed, so only
/// the alternating stage runs: `step_ratio` updates of h per update of e.
pub fn train_scm_x(
    g: &GraphData,
    shared: &MaterializedShared,
    masks: &SplitMasks,
    cfg: &TrainConfig,
) -> Result<ScmX> {
    cfg.validate()?;
    let train_idx = mask_indices(&masks.train);
    if train_idx.is_empty() {
        return Err(Error::invalid("empty training mask"));
    }
    let val_idx = validation_indices(masks);
    let val_labels = labels_at(&g.labels, &val_idx);
    let k = g.num_classes;
    let o = cfg.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));

    let mut h_net = Mlp::init(g.d(), o, o * k, 0.0, &mut rng);
    let mut e_net = Mlp::init(o, o, o * k, 0.0, &mut rng);
    let x_train = g.features.select_rows(&train_idx);
    let y_train = labels_at(&g.labels, &train_idx);
    let a_train = shared.a.select_rows(&train_idx);
    let m_train = shared.m_fixed.select_rows(&train_idx);

    let mut h_params = h_net.params();
    let mut e_params = e_net.params();
    let mut h_adam = AdamState::new(&h_params, cfg.learning_rate, cfg.weight_decay);
    let mut e_adam = AdamState::new(&e_params, cfg.learning_rate, cfg.weight_decay);
    let mut stopper = EarlyStopper::new(cfg.patience);

    for epoch in 0..cfg.epochs {
        e_net.set_params(&e_params);
        let e_out = e_net.forward(&a_train)?;
        for _ in 0..cfg.step_ratio {
            let net = {
                let mut net = h_net.clone();
                net.set_params(&h_params);
                net
            };
            optimizer_step(&mut h_params, &mut h_adam, epoch, |tape, ids| {
                let x = tape.constant(x_train.clone());
                let h_out = net.forward_on_tape(tape, x, ids)?;
                let e_node = tape.constant(e_out.clone());
                let diff = tape.sub(h_out, e_node)?;
                let a_node = tape.constant(a_train.clone());
                let corr = per_class_dot_on_tape(tape, diff, a_node, k)?;
                let m_node = tape.constant(m_train.clone());
                let logits = tape.add(m_node, corr)?;
                tape.softmax_cross_entropy(logits, &y_train)
            })?;
        }
        h_net.set_params(&h_params);
        let h_out = h_net.forward(&x_train)?;
        {
            let net = {
                let mut net = e_net.clone();
                net.set_params(&e_params);
                net
            };
            optimizer_step(&mut e_params, &mut e_adam, epoch, |tape, ids| {
                let a = tape.constant(a_train.clone());
                let e_on_tape = net.forward_on_tape(tape, a, ids)?;
                let target = tape.constant(h_out.clone());
                tape.mse_rows(target, e_on_tape)
            })?;
        }
        e_net.set_params(&e_params);
        let scm = ScmX {
            h: h_net.clone(),
            e: e_net.clone(),
        };
        let logits = scm_x_logits(
            &scm,
            &g.features.select_rows(&val_idx),
            &shared.a.select_rows(&val_idx),
            &shared.m_fixed.select_rows(&val_idx),
            k,
        )?;
        let score = harness::macro_f1(&val_labels, &argmax_rows(&logits), k)?;
        let mut snapshot = h_params.clone();
        snapshot.extend(e_params.clone());
        if !stopper.observe(score, &snapshot) {
            break;
        }
    }
    let mut snapshot = h_params;
    snapshot.extend(e_params);
    let best = stopper.into_best(snapshot);
    h_net.set_params(&best[..4]);
    e_net.set_params(&best[4..]);
    Ok(ScmX { h: h_net, e: e_net })
}

/// End-to-end training of all stages.
pub fn train_decaf(g: &GraphData, masks: &SplitMasks, cfg: &TrainConfig) -> Result<DecafModel> {
    let (encoder, head) = train_encoder(g, masks, cfg).map_err(Error::in_stage("encoder"))?;
    let shared = materialize_shared(&encoder, &head, g)?;
    let scm_a = train_scm_a(g, &shared, masks, cfg).map_err(Error::in_stage("scm-a"))?;
    let scm_x = train_scm_x(g, &shared, masks, cfg).map_err(Error::in_stage("scm-x"))?;
    Ok(DecafModel {
        encoder,
        head,
        scm_a,
        scm_x,
        gamma: cfg.gamma,
        cf_samples: cfg.cf_samples,
        num_classes: g.num_classes,
    })
}

/// Draw the shared background set from the training nodes and average the
/// two counterfactual product terms over it. Sampling is without replacement
/// unless k exceeds the training-set size.
pub fn background_counterfactual(
    model: &DecafModel,
    shared: &MaterializedShared,
    g: &GraphData,
    train_mask: &[bool],
    seed: u64,
) -> Result<(BackgroundSample, Matrix, Matrix)> {
    let train_idx = mask_indices(train_mask);
    if train_idx.is_empty() {
        return Err(Error::invalid("background sampling needs training nodes"));
    }
    let k = model.cf_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = if k <= train_idx.len() {
        sample_without_replacement(&mut rng, train_idx.len(), k)
            .iter()
            .map(|i| train_idx[i])
            .collect()
    } else {
        (0..k).map(|_| train_idx[rng.random_range(0..train_idx.len())]).collect()
    };

    let x_bg = g.features.select_rows(&indices);
    let a_bg = shared.a.select_rows(&indices);
    let kc = model.num_classes;
    // Neighborhood branch: mean of g^A(x_s)ᵀ a_s.
    let fa = per_class_dot(&model.scm_a.g.forward(&x_bg)?, &a_bg, kc)?;
    // Feature branch: mean of a_sᵀ h^X(x_s).
    let fx = per_class_dot(&model.scm_x.h.forward(&x_bg)?, &a_bg, kc)?;
    Ok((BackgroundSample { indices, seed }, fa.column_means(), fx.column_means()))
}

/// Factual product terms minus the shared counterfactual offsets.
pub fn estimate_effects(
    model: &DecafModel,
    shared: &MaterializedShared,
    g: &GraphData,
    cf_a: &Matrix,
    cf_x: &Matrix,
) -> Result<EffectEstimates> {
    let kc = model.num_classes;
    let mut psi_a = per_class_dot(&model.scm_a.g.forward(&g.features)?, &shared.a, kc)?;
    let mut psi_x = per_class_dot(&model.scm_x.h.forward(&g.features)?, &shared.a, kc)?;
    for i in 0..psi_a.rows() {
        for (v, c) in psi_a.row_mut(i).iter_mut().zip(cf_a.row(0)) {
            *v -= c;
        }
        for (v, c) in psi_x.row_mut(i).iter_mut().zip(cf_x.row(0)) {
            *v -= c;
        }
    }
    if !psi_a.is_finite() || !psi_x.is_finite() {
        return Err(Error::invalid("non-finite effect estimates"));
    }
    Ok(EffectEstimates { psi_x, psi_a })
}

/// Combine the two branches: softmax(γ·Ψ_x + (1−γ)·Ψ_a).
pub fn predict_from_effects(model: &DecafModel, effects: &EffectEstimates) -> (Matrix, Vec<usize>) {
    let combined = effects
        .psi_x
        .scale(model.gamma)
        .add(&effects.psi_a.scale(1.0 - model.gamma))
        .expect("matching effect shapes");
    let probs = softmax_rows(&combined);
    let classes = argmax_rows(&probs);
    (probs, classes)
}

/// Full inference path: background from the training graph, factual terms
/// from the evaluation graph (which may be the same graph).
pub fn predict(
    model: &DecafModel,
    g_train: &GraphData,
    train_mask: &[bool],
    g_eval: &GraphData,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    let shared_train = materialize_shared(&model.encoder, &model.head, g_train)?;
    let (_, cf_a, cf_x) = background_counterfactual(model, &shared_train, g_train, train_mask, seed)?;
    let shared_eval = if std::ptr::eq(g_train, g_eval) {
        shared_train
    } else {
        materialize_shared(&model.encoder, &model.head, g_eval)?
    };
    let effects = estimate_effects(model, &shared_eval, g_eval, &cf_a, &cf_x)?;
    Ok(predict_from_effects(model, &effects))
}
