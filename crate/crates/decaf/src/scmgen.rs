//! Structural-causal-model graph synthesis with controllable shifts.
//!
//! Every node carries an unobserved latent vector z. Features are an affine
//! map of z, the continuous label vector is an affine map of z (optionally
//! mixed with the 1-hop neighbor mean), and each unordered pair is connected
//! independently with probability `c / (‖M_s z_i − M_o z_j‖² + 1)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{CsrAdjacency, GraphData};
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    /// Class = argmax of `M_y z + b_y`.
    Direct,
    /// Class = argmax of `M_y (½z + ½z̄) + b_y`, z̄ the 1-hop neighbor mean.
    NeighborMixed,
}

/// All generative symbols of the graph SCM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmParams {
    pub latent_dim: usize,
    /// d×p feature map and d-offset.
    pub feature_map: Matrix,
    pub feature_offset: Vec<f64>,
    /// k×p label map and k-offset.
    pub label_map: Matrix,
    pub label_offset: Vec<f64>,
    /// q×p edge endpoint maps.
    pub edge_source: Matrix,
    pub edge_target: Matrix,
    /// o×p map behind the true neighborhood representation.
    pub neighbor_map: Matrix,
    /// Edge density constant in [0, 1].
    pub density: f64,
    /// Set when density calibration had to clamp at 1.
    pub density_clamped: bool,
    pub latent_mean: Vec<f64>,
    /// p×p symmetric positive-semidefinite latent covariance.
    pub latent_cov: Matrix,
    pub label_mode: LabelMode,
}

impl ScmParams {
    pub fn num_classes(&self) -> usize {
        self.label_map.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_map.rows()
    }

    fn validate(&self) -> Result<()> {
        let p = self.latent_dim;
        let checks = [
            (self.feature_map.cols() == p, "feature_map cols"),
            (self.feature_offset.len() == self.feature_map.rows(), "feature_offset"),
            (self.label_map.cols() == p, "label_map cols"),
            (self.label_offset.len() == self.label_map.rows(), "label_offset"),
            (self.edge_source.cols() == p, "edge_source cols"),
            (self.edge_target.cols() == p, "edge_target cols"),
            (self.edge_source.rows() == self.edge_target.rows(), "edge map rows"),
            (self.neighbor_map.cols() == p, "neighbor_map cols"),
            (self.latent_mean.len() == p, "latent_mean"),
            (self.latent_cov.shape() == (p, p), "latent_cov"),
            ((0.0..=1.0).contains(&self.density), "density in [0,1]"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::shape(format!("inconsistent ScmParams: {what}")));
            }
        }
        Ok(())
    }
}

/// n×p matrix of latent draws.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub z: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    Covariate,
    ConceptX,
    ConceptA,
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShiftKind::Covariate => "covariate",
            ShiftKind::ConceptX => "concept-x",
            ShiftKind::ConceptA => "concept-a",
        };
        f.write_str(s)
    }
}

impl FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariate" => Ok(ShiftKind::Covariate),
            "concept-x" | "conceptx" => Ok(ShiftKind::ConceptX),
            "concept-a" | "concepta" => Ok(ShiftKind::ConceptA),
            other => Err(Error::invalid(format!("unknown shift kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub kind: ShiftKind,
    pub magnitude: f64,
    pub seed: u64,
}

/// Lower-triangular Cholesky factor of a symmetric PSD matrix. Semidefinite
/// directions get zero columns; an indefinite input is rejected.
fn cholesky_psd(cov: &Matrix) -> Result<Matrix> {
    let p = cov.rows();
    let tol = 1e-10 * (1.0 + cov.values().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut diag = cov.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if diag < -tol {
            return Err(Error::invalid("latent covariance is not PSD"));
        }
        let d = diag.max(0.0).sqrt();
        l.set(j, j, d);
        if d == 0.0 {
            continue;
        }
        for i in j + 1..p {
            let mut s = cov.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// n independent draws from Normal(μ, Σ).
pub fn sample_latents(params: &ScmParams, n: usize, seed: u64) -> Result<LatentSample> {
    params.validate()?;
    if n < 2 {
        return Err(Error::invalid("need n >= 2 latent draws"));
    }
    let p = params.latent_dim;
    let l = cholesky_psd(&params.latent_cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Matrix::zeros(n, p);
    let mut eps = vec![0.0; p];
    for i in 0..n {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        let row = z.row_mut(i);
        for r in 0..p {
            let mut v = params.latent_mean[r];
            for (k, e) in eps.iter().enumerate().take(r + 1) {
                v += l.get(r, k) * e;
            }
            row[r] = v;
        }
    }
    Ok(LatentSample { z })
}

/// Closed-form connection probability of one ordered pair.
pub fn edge_probability(params: &ScmParams, z_i: &[f64], z_j: &[f64]) -> f64 {
    let q = params.edge_source.rows();
    let mut dist2 = 0.0;
    for r in 0..q {
        let mut si = 0.0;
        let mut oj = 0.0;
        for c in 0..params.latent_dim {
            si += params.edge_source.get(r, c) * z_i[c];
            oj += params.edge_target.get(r, c) * z_j[c];
        }
        dist2 += (si - oj) * (si - oj);
    }
    params.density / (dist2 + 1.0)
}

/// A generated graph together with its generative side-channel: the latent
/// draws and the true neighborhood representation rows `mean(M_a z_j)` over
/// 1-hop neighbors (zero for isolated nodes).
#[derive(Debug, Clone)]
pub struct SyntheticGraph {
    pub graph: GraphData,
    pub latents: Matrix,
    pub true_neighborhood: Matrix,
}

/// Realize (X, Y, A) from latents. Edges are sampled independently per
/// unordered pair and symmetrized; with `NeighborMixed` labels the edges are
/// sampled first so the neighbor mean is available.
pub fn generate_graph(params: &ScmParams, latents: &LatentSample, seed: u64) -> Result<SyntheticGraph> {
    params.validate()?;
    let z = &latents.z;
    if z.cols() != params.latent_dim {
        return Err(Error::shape("latent columns vs latent_dim"));
    }
    let n = z.rows();

    // Edges: projected endpoints first, then Bernoulli over i < j.
    let s_proj = z.matmul(&params.edge_source.transpose())?;
    let o_proj = z.matmul(&params.edge_target.transpose())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        let si = s_proj.row(i);
        for j in i + 1..n {
            let oj = o_proj.row(j);
            let dist2: f64 = si.iter().zip(oj).map(|(a, b)| (a - b) * (a - b)).sum();
            let p = params.density / (dist2 + 1.0);
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let adjacency = CsrAdjacency::from_edges(n, &edges)?;

    // Features.
    let mut features = z.matmul(&params.feature_map.transpose())?;
    for i in 0..n {
        for (v, b) in features.row_mut(i).iter_mut().zip(&params.feature_offset) {
            *v += b;
        }
    }

    // Labels.
    let z_for_labels = match params.label_mode {
        LabelMode::Direct => z.clone(),
        LabelMode::NeighborMixed => {
            let mut mixed = z.clone();
            for i in 0..n {
                let neigh = adjacency.neighbors(i);
                if neigh.is_empty() {
                    continue; // z̄ = z_i keeps the row as-is
                }
                let mut mean = vec![0.0; z.cols()];
                for &j in neigh {
                    for (m, v) in mean.iter_mut().zip(z.row(j)) {
                        *m += v;
                    }
                }
                let inv = 1.0 / neigh.len() as f64;
                for (out, m) in mixed.row_mut(i).iter_mut().zip(&mean) {
                    *out = 0.5 * *out + 0.5 * m * inv;
                }
            }
            mixed
        }
    };
    let mut label_scores = z_for_labels.matmul(&params.label_map.transpose())?;
    for i in 0..n {
        for (v, b) in label_scores.row_mut(i).iter_mut().zip(&params.label_offset) {
            *v += b;
        }
    }
    let labels: Vec<usize> = (0..n)
        .map(|i| {
            label_scores
                .row(i)
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(c, _)| c)
                .unwrap()
        })
        .collect();

    let true_neighborhood = true_neighborhood(params, z, &adjacency)?;
    let graph = GraphData::new(features, labels, adjacency, params.num_classes())?;
    Ok(SyntheticGraph {
        graph,
        latents: z.clone(),
        true_neighborhood,
    })
}

/// `a_i = mean over 1-hop neighbors of M_a z_j`; zero row for isolated nodes.
pub fn true_neighborhood(params: &ScmParams, z: &Matrix, adjacency: &CsrAdjacency) -> Result<Matrix> {
    let projected = z.matmul(&params.neighbor_map.transpose())?;
    let n = adjacency.n();
    let mut out = Matrix::zeros(n, projected.cols());
    for i in 0..n {
        let neigh = adjacency.neighbors(i);
        if neigh.is_empty() {
            continue;
        }
        let inv = 1.0 / neigh.len() as f64;
        for &j in neigh {
            let src = projected.row(j);
            for (o, v) in out.row_mut(i).iter_mut().zip(src) {
                *o += v * inv;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    HFeat,
    QtrFeat,
    FullFeat,
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Recipe::HFeat => "h-feat",
            Recipe::QtrFeat => "qtr-feat",
            Recipe::FullFeat => "full-feat",
        };
        f.write_str(s)
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h-feat" => Ok(Recipe::HFeat),
            "qtr-feat" => Ok(Recipe::QtrFeat),
            "full-feat" => Ok(Recipe::FullFeat),
            other => Err(Error::invalid(format!("unknown recipe '{other}'"))),
        }
    }
}

const RECIPE_LATENT_DIM: usize = 16;
const RECIPE_CLASSES: usize = 4;
/// Latent sample size used when calibrating the density constant.
const CALIBRATION_SAMPLE: usize = 400;

/// d×p selector keeping the first d latent coordinates.
fn selector(d: usize, p: usize) -> Matrix {
    Matrix::from_fn(d, p, |i, j| f64::from(i == j))
}

/// One of the three synthetic recipes, with the density constant calibrated
/// to `target_mean_degree`.
pub fn make_recipe(recipe: Recipe, seed: u64, target_mean_degree: f64) -> Result<ScmParams> {
    let p = RECIPE_LATENT_DIM;
    let k = RECIPE_CLASSES;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label_map = Matrix::from_fn(k, p, |_, _| StandardNormal.sample(&mut rng));

    let (d, feature_map, edge_source, label_mode) = match recipe {
        Recipe::HFeat => (8, selector(8, p), label_map.clone(), LabelMode::Direct),
        Recipe::QtrFeat => {
            // Edge maps see only the latent coordinates the features miss.
            let masked = Matrix::from_fn(k, p, |i, j| if j < 4 { 0.0 } else { label_map.get(i, j) });
            (4, selector(4, p), masked, LabelMode::Direct)
        }
        Recipe::FullFeat => (16, Matrix::identity(p), Matrix::zeros(k, p), LabelMode::NeighborMixed),
    };

    let mut params = ScmParams {
        latent_dim: p,
        feature_map,
        feature_offset: vec![0.0; d],
        label_map,
        label_offset: vec![0.0; k],
        edge_target: edge_source.clone(),
        edge_source,
        neighbor_map: Matrix::identity(p),
        density: 1.0,
        density_clamped: false,
        latent_mean: vec![0.0; p],
        latent_cov: Matrix::identity(p),
        label_mode: LabelMode::Direct,
    };
    params.label_mode = label_mode;

    let calib = sample_latents(&params, CALIBRATION_SAMPLE, seed.wrapping_add(0x5eed))?;
    let (c, clamped) = calibrate_density(&params, &calib, target_mean_degree)?;
    params.density = c;
    params.density_clamped = clamped;
    Ok(params)
}

/// Expected mean degree under the pairwise edge model at density `c`, for a
/// fixed latent sample.
fn expected_mean_degree(params: &ScmParams, z: &Matrix, c: f64) -> f64 {
    let n = z.rows();
    let mut probe = params.clone();
    probe.density = c;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += edge_probability(&probe, z.row(i), z.row(j));
        }
    }
    2.0 * total / n as f64
}

/// Density constant whose expected mean degree matches the target within 1%,
/// found by bisection on [0, 1]. Returns `(c, clamped)`; `clamped` is set
/// when even c = 1 cannot reach the target.
pub fn calibrate_density(
    params: &ScmParams,
    latents: &LatentSample,
    target_mean_degree: f64,
) -> Result<(f64, bool)> {
    if target_mean_degree < 0.0 {
        return Err(Error::invalid("target mean degree must be >= 0"));
    }
    if target_mean_degree == 0.0 {
        return Ok((0.0, false));
    }
    let z = &latents.z;
    if expected_mean_degree(params, z, 1.0) < target_mean_degree {
        return Ok((1.0, true));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let tol = 0.01 * target_mean_degree;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let deg = expected_mean_degree(params, z, mid);
        if (deg - target_mean_degree).abs() <= tol {
            return Ok((mid, false));
        }
        if deg < target_mean_degree {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), false))
}

/// Realize a distribution shift on the generative parameters. A zero
/// magnitude is a strict no-op; everything outside the shifted definition's
/// scope is left bitwise unchanged.
pub fn apply_shift(params: &ScmParams, spec: &ShiftSpec) -> ScmParams {
    let mut out = params.clone();
    if spec.magnitude == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        ShiftKind::Covariate => {
            // μ ← μ + magnitude·u for a random unit direction u.
            let mut u: Vec<f64> = (0..params.latent_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut u {
                *v /= norm;
            }
            for (m, v) in out.latent_mean.iter_mut().zip(&u) {
                *m += spec.magnitude * v;
            }
        }
        ShiftKind::ConceptX => {
            out.feature_map = interpolate_toward_random(&params.feature_map, spec.magnitude, &mut rng);
            let fresh: Vec<f64> = (0..params.feature_offset.len())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            for (b, r) in out.feature_offset.iter_mut().zip(&fresh) {
                *b = (1.0 - spec.magnitude) * *b + spec.magnitude * r;
            }
        }
        ShiftKind::ConceptA => {
            out.edge_source = interpolate_toward_random(&params.edge_source, spec.magnitude, &mut rng);
            out.edge_target = interpolate_toward_random(&params.edge_target, spec.magnitude, &mut rng);
        }
    }
    out
}

fn interpolate_toward_random(m: &Matrix, magnitude: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let fresh = Matrix::from_fn(m.rows(), m.cols(), |_, _| StandardNormal.sample(rng));
    m.scale(1.0 - magnitude)
        .add(&fresh.scale(magnitude))
        .expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_params(p: usize, d: usize, k: usize) -> ScmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        ScmParams {
            latent_dim: p,
            feature_map: Matrix::from_fn(d, p, |_, _| StandardNormal.sample(&mut rng)),
            feature_offset: vec![0.1; d],
            label_map: Matrix::from_fn(k, p, |_, _| StandardNormal.sample(&mut rng)),
            label_offset: vec![0.0; k],
            edge_source: Matrix::from_fn(2, p, |_, _| StandardNormal.sample(&mut rng)),
            edge_target: Matrix::from_fn(2, p, |_, _| StandardNormal.sample(&mut rng)),
            neighbor_map: Matrix::identity(p),
            density: 0.5,
            density_clamped: false,
            latent_mean: vec![0.0; p],
            latent_cov: Matrix::identity(p),
            label_mode: LabelMode::Direct,
        }
    }

    #[test]
    fn degenerate_covariance_repeats_mean() {
        let mut params = toy_params(3, 2, 2);
        params.latent_cov = Matrix::zeros(3, 3);
        params.latent_mean = vec![1.0, -2.0, 0.5];
        let z = sample_latents(&params, 5, 1).unwrap().z;
        for i in 0..5 {
            assert_eq!(z.row(i), &[1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn latent_sampling_deterministic_per_seed() {
        let params = toy_params(4, 2, 2);
        let a = sample_latents(&params, 20, 7).unwrap();
        let b = sample_latents(&params, 20, 7).unwrap();
        assert_eq!(a.z, b.z);
        let c = sample_latents(&params, 20, 8).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn latent_mean_law_of_large_numbers() {
        let params = toy_params(3, 2, 2);
        let n = 10_000;
        let z = sample_latents(&params, n, 42).unwrap().z;
        let bound = 4.0 / (n as f64).sqrt();
        let means = z.column_means();
        for j in 0..3 {
            assert!(means.get(0, j).abs() < bound, "dim {j}: {}", means.get(0, j));
        }
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let mut params = toy_params(2, 2, 2);
        params.latent_cov = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(sample_latents(&params, 4, 0).is_err());
    }

    #[test]
    fn zero_density_zero_edges() {
        let mut params = toy_params(3, 2, 2);
        params.density = 0.0;
        let z = sample_latents(&params, 30, 3).unwrap();
        let syn = generate_graph(&params, &z, 4).unwrap();
        assert_eq!(syn.graph.adjacency.num_edges(), 0);
    }

    #[test]
    fn identical_latents_hit_density_endpoint() {
        // All z identical and M_s = M_o → zero distance → p = c exactly.
        let mut params = toy_params(3, 2, 2);
        params.edge_target = params.edge_source.clone();
        params.density = 0.37;
        let z = vec![0.5, -1.0, 2.0];
        let p = edge_probability(&params, &z, &z);
        assert!((p - 0.37).abs() < 1e-15);
    }

    #[test]
    fn recipe_shapes_match_table() {
        for (recipe, d) in [(Recipe::HFeat, 8), (Recipe::QtrFeat, 4), (Recipe::FullFeat, 16)] {
            let params = make_recipe(recipe, 5, 10.0).unwrap();
            assert_eq!(params.feature_dim(), d);
            assert_eq!(params.num_classes(), 4);
            assert_eq!(params.latent_dim, 16);
        }
    }

    #[test]
    fn full_feat_edges_are_uniform() {
        let params = make_recipe(Recipe::FullFeat, 5, 10.0).unwrap();
        let z1 = vec![1.0; 16];
        let z2 = vec![-3.0; 16];
        let p12 = edge_probability(&params, &z1, &z2);
        let p21 = edge_probability(&params, &z2, &z1);
        assert!((p12 - params.density).abs() < 1e-15);
        assert!((p21 - params.density).abs() < 1e-15);
        assert_eq!(params.label_mode, LabelMode::NeighborMixed);
    }

    #[test]
    fn qtr_feat_features_blind_to_high_coords() {
        let params = make_recipe(Recipe::QtrFeat, 5, 10.0).unwrap();
        for j in 4..16 {
            for i in 0..4 {
                assert_eq!(params.feature_map.get(i, j), 0.0);
            }
        }
        // And the edge maps are blind to the first four.
        for j in 0..4 {
            for i in 0..4 {
                assert_eq!(params.edge_source.get(i, j), 0.0);
                assert_eq!(params.edge_target.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn recipe_deterministic_per_seed() {
        let a = make_recipe(Recipe::HFeat, 11, 15.0).unwrap();
        let b = make_recipe(Recipe::HFeat, 11, 15.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibrate_zero_target() {
        let params = toy_params(3, 2, 2);
        let z = sample_latents(&params, 50, 2).unwrap();
        assert_eq!(calibrate_density(&params, &z, 0.0).unwrap(), (0.0, false));
    }

    #[test]
    fn calibrate_unattainable_target_clamps() {
        let params = toy_params(3, 2, 2);
        let z = sample_latents(&params, 50, 2).unwrap();
        let (c, clamped) = calibrate_density(&params, &z, 1e6).unwrap();
        assert_eq!(c, 1.0);
        assert!(clamped);
    }

    #[test]
    fn calibrated_density_reaches_target_degree() {
        let mut params = toy_params(4, 2, 2);
        let z = sample_latents(&params, 50, 6).unwrap();
        let target = 5.0;
        let (c, clamped) = calibrate_density(&params, &z, target).unwrap();
        assert!(!clamped);
        params.density = c;
        // Realized mean degree over 200 resamples should be close to target.
        let mut total_edges = 0usize;
        for s in 0..200 {
            let syn = generate_graph(&params, &z, 1000 + s).unwrap();
            total_edges += syn.graph.adjacency.num_edges();
        }
        let mean_degree = 2.0 * total_edges as f64 / (200.0 * 50.0);
        assert!(
            (mean_degree - target).abs() / target < 0.10,
            "mean degree {mean_degree}"
        );
    }

    #[test]
    fn shift_zero_magnitude_is_noop() {
        let params = make_recipe(Recipe::HFeat, 3, 10.0).unwrap();
        for kind in [ShiftKind::Covariate, ShiftKind::ConceptX, ShiftKind::ConceptA] {
            let shifted = apply_shift(
                &params,
                &ShiftSpec {
                    kind,
                    magnitude: 0.0,
                    seed: 1,
                },
            );
            assert_eq!(shifted, params);
        }
    }

    #[test]
    fn concept_x_touches_only_feature_maps() {
        let params = make_recipe(Recipe::HFeat, 3, 10.0).unwrap();
        let shifted = apply_shift(
            &params,
            &ShiftSpec {
                kind: ShiftKind::ConceptX,
                magnitude: 0.7,
                seed: 2,
            },
        );
        assert_ne!(shifted.feature_map, params.feature_map);
        assert_eq!(shifted.label_map, params.label_map);
        assert_eq!(shifted.label_offset, params.label_offset);
        assert_eq!(shifted.edge_source, params.edge_source);
        assert_eq!(shifted.edge_target, params.edge_target);
        assert_eq!(shifted.latent_mean, params.latent_mean);
    }

    #[test]
    fn covariate_shift_moves_feature_mean_by_pushforward() {
        let params = make_recipe(Recipe::HFeat, 3, 10.0).unwrap();
        let spec = ShiftSpec {
            kind: ShiftKind::Covariate,
            magnitude: 2.0,
            seed: 9,
        };
        let shifted = apply_shift(&params, &spec);
        assert_eq!(shifted.feature_map, params.feature_map);
        let n = 20_000;
        let z0 = sample_latents(&params, n, 31).unwrap().z;
        let z1 = sample_latents(&shifted, n, 32).unwrap().z;
        let x0 = z0.matmul(&params.feature_map.transpose()).unwrap().column_means();
        let x1 = z1.matmul(&params.feature_map.transpose()).unwrap().column_means();
        // Expected move: M_f · (μ' − μ).
        let delta: Vec<f64> = shifted
            .latent_mean
            .iter()
            .zip(&params.latent_mean)
            .map(|(a, b)| a - b)
            .collect();
        let d = params.feature_dim();
        for r in 0..d {
            let expected: f64 = (0..params.latent_dim)
                .map(|c| params.feature_map.get(r, c) * delta[c])
                .sum();
            let observed = x1.get(0, r) - x0.get(0, r);
            assert!(
                (observed - expected).abs() < 0.05,
                "dim {r}: observed {observed}, expected {expected}"
            );
        }
    }

    #[test]
    fn spillover_bound_for_one_hop_mean() {
        // Perturbing a non-neighbor's latent leaves a_i unchanged, which
        // trivially satisfies the (max row norm)·‖δ‖/deg(i) bound.
        let params = toy_params(3, 2, 2);
        let z = sample_latents(&params, 40, 12).unwrap();
        let syn = generate_graph(&params, &z, 13).unwrap();
        let adjacency = &syn.graph.adjacency;
        let target = (0..40)
            .find(|&i| adjacency.degree(i) > 0)
            .expect("some connected node");
        let non_neighbor = (0..40)
            .find(|&j| j != target && !adjacency.neighbors(target).contains(&j))
            .expect("some non-neighbor");
        let mut z2 = z.z.clone();
        for v in z2.row_mut(non_neighbor) {
            *v += 5.0;
        }
        let a1 = true_neighborhood(&params, &z.z, adjacency).unwrap();
        let a2 = true_neighborhood(&params, &z2, adjacency).unwrap();
        let row_diff: f64 = a1
            .row(target)
            .iter()
            .zip(a2.row(target))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert_eq!(row_diff, 0.0);
    }

    #[test]
    fn edge_probabilities_bounded_by_density() {
        let params = toy_params(4, 2, 2);
        let z = sample_latents(&params, 20, 17).unwrap().z;
        for i in 0..20 {
            for j in 0..20 {
                let p = edge_probability(&params, z.row(i), z.row(j));
                assert!(p >= 0.0 && p <= params.density);
            }
        }
    }
}
