//! Distribution-shift measurement: two-sample Hotelling T² statistics and
//! per-class shift reports over feature and neighborhood branches.

use serde::{Deserialize, Serialize};

use crate::graph::GraphData;
use crate::model::Encoder;
use crate::numerics::Matrix;
use crate::{Error, Result};

fn column_mean_and_cov(sample: &Matrix) -> (Vec<f64>, Matrix) {
    let (n, m) = sample.shape();
    let mean: Vec<f64> = sample.column_means().row(0).to_vec();
    let mut cov = Matrix::zeros(m, m);
    for i in 0..n {
        let row = sample.row(i);
        for a in 0..m {
            let da = row[a] - mean[a];
            for b in a..m {
                let v = cov.get(a, b) + da * (row[b] - mean[b]);
                cov.set(a, b, v);
            }
        }
    }
    // Scatter matrix (not yet normalized); mirror the upper triangle.
    for a in 0..m {
        for b in 0..a {
            cov.set(a, b, cov.get(b, a));
        }
    }
    (mean, cov)
}

/// Recommended ridge: 1e-3 × trace(pooledCov)/m.
pub fn default_ridge(pooled_cov: &Matrix) -> f64 {
    let m = pooled_cov.rows();
    let trace: f64 = (0..m).map(|i| pooled_cov.get(i, i)).sum();
    1e-3 * trace / m as f64
}

/// Two-sample Hotelling statistic
/// `T² = (nA·nB/(nA+nB)) · Δᵀ (pooledCov + ridge·I)⁻¹ Δ`,
/// with the pooled covariance normalized by nA + nB − 2.
pub fn hotelling_t2(sample_a: &Matrix, sample_b: &Matrix, ridge: f64) -> Result<f64> {
    let (na, m) = sample_a.shape();
    let (nb, mb) = sample_b.shape();
    if m != mb {
        return Err(Error::shape("samples must share dimensionality"));
    }
    if na < 2 || nb < 2 {
        return Err(Error::invalid("each sample needs at least 2 rows"));
    }
    let (mean_a, scatter_a) = column_mean_and_cov(sample_a);
    let (mean_b, scatter_b) = column_mean_and_cov(sample_b);
    let denom = (na + nb - 2) as f64;
    let mut pooled = scatter_a.add(&scatter_b)?.scale(1.0 / denom);
    for i in 0..m {
        pooled.set(i, i, pooled.get(i, i) + ridge);
    }
    let delta: Vec<f64> = mean_a.iter().zip(&mean_b).map(|(a, b)| a - b).collect();
    let solved = pooled.solve(&delta).map_err(|_| Error::Singular)?;
    let quad: f64 = delta.iter().zip(&solved).map(|(d, s)| d * s).sum();
    let factor = (na * nb) as f64 / (na + nb) as f64;
    Ok(factor * quad)
}

/// Hotelling T² with the default trace-scaled ridge.
pub fn hotelling_t2_ridged(sample_a: &Matrix, sample_b: &Matrix) -> Result<f64> {
    let (na, m) = sample_a.shape();
    let nb = sample_b.rows();
    if na < 2 || nb < 2 || m != sample_b.cols() {
        return hotelling_t2(sample_a, sample_b, 0.0);
    }
    let (_, scatter_a) = column_mean_and_cov(sample_a);
    let (_, scatter_b) = column_mean_and_cov(sample_b);
    let pooled = scatter_a.add(&scatter_b)?.scale(1.0 / (na + nb - 2) as f64);
    hotelling_t2(sample_a, sample_b, default_ridge(&pooled))
}

/// Per-class two-sample T² between rows of `rows_a` / `rows_b` with matching
/// labels. Classes with fewer than 2 samples on either side land in
/// `omitted` with no statistic.
pub fn per_class_t2(
    rows_a: &Matrix,
    labels_a: &[usize],
    rows_b: &Matrix,
    labels_b: &[usize],
    num_classes: usize,
    ridge: Option<f64>,
) -> Result<(Vec<usize>, Vec<f64>, Vec<usize>)> {
    if rows_a.rows() != labels_a.len() || rows_b.rows() != labels_b.len() {
        return Err(Error::shape("row/label count mismatch"));
    }
    let mut class_ids = Vec::new();
    let mut stats = Vec::new();
    let mut omitted = Vec::new();
    for class in 0..num_classes {
        let idx_a: Vec<usize> = (0..labels_a.len()).filter(|&i| labels_a[i] == class).collect();
        let idx_b: Vec<usize> = (0..labels_b.len()).filter(|&i| labels_b[i] == class).collect();
        if idx_a.len() < 2 || idx_b.len() < 2 {
            omitted.push(class);
            continue;
        }
        let a = rows_a.select_rows(&idx_a);
        let b = rows_b.select_rows(&idx_b);
        let t2 = match ridge {
            Some(r) => hotelling_t2(&a, &b, r)?,
            None => hotelling_t2_ridged(&a, &b)?,
        };
        class_ids.push(class);
        stats.push(t2);
    }
    Ok((class_ids, stats, omitted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub class_ids: Vec<usize>,
    pub per_class_feature_t2: Vec<f64>,
    pub per_class_neighbor_t2: Vec<f64>,
    /// Classes skipped because a side had fewer than 2 samples.
    pub omitted_classes: Vec<usize>,
}

impl ShiftReport {
    pub fn mean_feature_t2(&self) -> f64 {
        mean(&self.per_class_feature_t2)
    }

    pub fn mean_neighbor_t2(&self) -> f64 {
        mean(&self.per_class_neighbor_t2)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_id,feature_t2,neighbor_t2\n");
        for (i, &c) in self.class_ids.iter().enumerate() {
            out.push_str(&format!(
                "{c},{},{}\n",
                self.per_class_feature_t2[i], self.per_class_neighbor_t2[i]
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn paired_report(
    feat_a: &Matrix,
    neigh_a: &Matrix,
    labels_a: &[usize],
    feat_b: &Matrix,
    neigh_b: &Matrix,
    labels_b: &[usize],
    num_classes: usize,
    ridge: Option<f64>,
) -> Result<ShiftReport> {
    let (ids_f, feat_t2, omitted_f) =
        per_class_t2(feat_a, labels_a, feat_b, labels_b, num_classes, ridge)?;
    let (ids_n, neigh_t2, _) =
        per_class_t2(neigh_a, labels_a, neigh_b, labels_b, num_classes, ridge)?;
    debug_assert_eq!(ids_f, ids_n);
    Ok(ShiftReport {
        class_ids: ids_f,
        per_class_feature_t2: feat_t2,
        per_class_neighbor_t2: neigh_t2,
        omitted_classes: omitted_f,
    })
}

/// Per-class shift statistics between two graphs: raw feature rows on one
/// branch, frozen-encoder neighborhood embeddings on the other.
pub fn shift_report(
    g_train: &GraphData,
    g_test: &GraphData,
    encoder: &Encoder,
    ridge: Option<f64>,
) -> Result<ShiftReport> {
    if g_train.num_classes != g_test.num_classes {
        return Err(Error::invalid("graphs disagree on class vocabulary"));
    }
    let emb_train = encoder.encode(g_train)?;
    let emb_test = encoder.encode(g_test)?;
    paired_report(
        &g_train.features,
        &emb_train,
        &g_train.labels,
        &g_test.features,
        &emb_test,
        &g_test.labels,
        g_train.num_classes,
        ridge,
    )
}

/// Shift report over generator-side representations: raw features against
/// the true neighborhood rows produced alongside a synthetic graph. Unlike
/// the encoder branch, the neighborhood side is independent of the feature
/// map, so feature-map shifts leave it untouched.
pub fn latent_shift_report(
    g_train: &GraphData,
    neigh_train: &Matrix,
    g_test: &GraphData,
    neigh_test: &Matrix,
    ridge: Option<f64>,
) -> Result<ShiftReport> {
    if g_train.num_classes != g_test.num_classes {
        return Err(Error::invalid("graphs disagree on class vocabulary"));
    }
    paired_report(
        &g_train.features,
        neigh_train,
        &g_train.labels,
        &g_test.features,
        neigh_test,
        &g_test.labels,
        g_train.num_classes,
        ridge,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scmgen::{
        apply_shift, generate_graph, make_recipe, sample_latents, Recipe, ShiftKind, ShiftSpec,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples_give_zero() {
        let a = Matrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 * 0.7);
        let t2 = hotelling_t2(&a, &a.clone(), 0.0).unwrap();
        assert!(t2.abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_hand_case() {
        // A = {0, 2}, B = {4, 6}: pooled var 2, Δ = −4, factor 1 → T² = 8.
        let a = Matrix::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![4.0, 6.0]).unwrap();
        let t2 = hotelling_t2(&a, &b, 0.0).unwrap();
        assert!((t2 - 8.0).abs() < 1e-12, "{t2}");
    }

    #[test]
    fn swap_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Matrix::from_fn(9, 4, |_, _| rng.random::<f64>());
        let b = Matrix::from_fn(12, 4, |_, _| rng.random::<f64>() + 0.4);
        let ab = hotelling_t2(&a, &b, 1e-6).unwrap();
        let ba = hotelling_t2(&b, &a, 1e-6).unwrap();
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn affine_invariance_without_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 3;
        let a = Matrix::from_fn(20, m, |_, _| rng.random::<f64>());
        let b = Matrix::from_fn(25, m, |_, _| rng.random::<f64>() * 1.5 + 0.3);
        // Diagonally dominant random map is invertible.
        let map = Matrix::from_fn(m, m, |i, j| {
            let base: f64 = rng.random::<f64>() - 0.5;
            base + if i == j { 3.0 } else { 0.0 }
        });
        let offset: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 2.0).collect();
        let transform = |s: &Matrix| {
            let mut t = s.matmul(&map).unwrap();
            for i in 0..t.rows() {
                for (v, o) in t.row_mut(i).iter_mut().zip(&offset) {
                    *v += o;
                }
            }
            t
        };
        let t2 = hotelling_t2(&a, &b, 0.0).unwrap();
        let t2_mapped = hotelling_t2(&transform(&a), &transform(&b), 0.0).unwrap();
        assert!((t2 - t2_mapped).abs() < 1e-6, "{t2} vs {t2_mapped}");
    }

    #[test]
    fn degenerate_covariance_needs_ridge() {
        // Constant columns → singular pooled covariance with a nonzero mean
        // difference; ridge rescues it.
        let a = Matrix::from_fn(4, 2, |i, _| i as f64);
        let b = Matrix::from_fn(4, 2, |i, _| i as f64 + 10.0);
        assert!(hotelling_t2(&a, &b, 0.0).is_err());
        assert!(hotelling_t2(&a, &b, 1e-3).unwrap() > 0.0);
    }

    #[test]
    fn per_class_omits_thin_classes() {
        let rows_a = Matrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let rows_b = rows_a.clone();
        let labels_a = vec![0, 0, 1, 1, 2]; // class 2 has 1 sample
        let labels_b = labels_a.clone();
        let (ids, stats, omitted) =
            per_class_t2(&rows_a, &labels_a, &rows_b, &labels_b, 3, Some(1e-3)).unwrap();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(omitted, vec![2]);
        assert!(stats.iter().all(|t| t.abs() < 1e-9));
    }

    fn shifted_pair(recipe: Recipe, kind: ShiftKind, magnitude: f64, seed: u64) -> (crate::scmgen::SyntheticGraph, crate::scmgen::SyntheticGraph) {
        let params = make_recipe(recipe, seed, 10.0).unwrap();
        let z_train = sample_latents(&params, 800, seed + 1).unwrap();
        let train = generate_graph(&params, &z_train, seed + 2).unwrap();
        let shifted = apply_shift(
            &params,
            &ShiftSpec {
                kind,
                magnitude,
                seed: seed + 3,
            },
        );
        let z_test = sample_latents(&shifted, 800, seed + 4).unwrap();
        let test = generate_graph(&shifted, &z_test, seed + 5).unwrap();
        (train, test)
    }

    #[test]
    fn identical_graphs_report_zero_everywhere() {
        let params = make_recipe(Recipe::HFeat, 3, 8.0).unwrap();
        let z = sample_latents(&params, 300, 4).unwrap();
        let syn = generate_graph(&params, &z, 5).unwrap();
        let encoder = Encoder {
            weights: Matrix::identity(syn.graph.d()),
            hops: 1,
        };
        let report = shift_report(&syn.graph, &syn.graph, &encoder, Some(1e-6)).unwrap();
        for t2 in report
            .per_class_feature_t2
            .iter()
            .chain(&report.per_class_neighbor_t2)
        {
            assert!(t2.abs() < 1e-6, "{t2}");
        }
    }

    #[test]
    fn concept_a_shift_dominates_neighborhood_branch() {
        let (train, test) = shifted_pair(Recipe::HFeat, ShiftKind::ConceptA, 0.8, 100);
        let encoder = Encoder {
            weights: Matrix::identity(train.graph.d()),
            hops: 1,
        };
        let report = shift_report(&train.graph, &test.graph, &encoder, None).unwrap();
        assert!(
            report.mean_neighbor_t2() > report.mean_feature_t2(),
            "neighbor {} vs feature {}",
            report.mean_neighbor_t2(),
            report.mean_feature_t2()
        );
    }

    #[test]
    fn concept_x_shift_dominates_feature_branch() {
        let (train, test) = shifted_pair(Recipe::HFeat, ShiftKind::ConceptX, 0.8, 200);
        let report = latent_shift_report(
            &train.graph,
            &train.true_neighborhood,
            &test.graph,
            &test.true_neighborhood,
            None,
        )
        .unwrap();
        assert!(
            report.mean_feature_t2() > report.mean_neighbor_t2(),
            "feature {} vs neighbor {}",
            report.mean_feature_t2(),
            report.mean_neighbor_t2()
        );
    }

    #[test]
    fn report_emission_formats() {
        let report = ShiftReport {
            class_ids: vec![0, 2],
            per_class_feature_t2: vec![1.5, 2.25],
            per_class_neighbor_t2: vec![0.5, 0.75],
            omitted_classes: vec![1],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("class_id,feature_t2,neighbor_t2\n"));
        assert!(csv.contains("0,1.5,0.5\n"));
        assert!(csv.contains("2,2.25,0.75\n"));
        let parsed: ShiftReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }
}
