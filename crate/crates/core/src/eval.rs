//! Correlation metrics and the train/test regimes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingModel;
use crate::error::{Error, Result};
use crate::features::{build_text_features, FeatureConfig};
use crate::geo::SpatialIndex;
use crate::nn::{
    train_with, Architecture, BatchGradient, Dataset, Example, ImageTensor, MlpRegressor, MultiModalModel, Regressor,
    Sequential, TrainConfig,
};
use crate::survey::SurveyPoint;

/// Label used for the pooled row and column of a result grid.
pub const ALL: &str = "All";
/// Share of an intra-country set's clusters used for training.
pub const INTRA_TRAIN_SHARE: f64 = 0.8;

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: pred.len() });
    }
    Ok(())
}

/// Squared sample Pearson correlation.
pub fn pearson_r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        cov += dp * dt;
        vp += dp * dp;
        vt += dt * dt;
    }
    let tiny = |v: f64, m: f64| v <= 1e-24 * n * (1.0 + m * m);
    if tiny(vp, mp) || tiny(vt, mt) || !(vp * vt).is_finite() {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(((cov / vp) * (cov / vt)).clamp(0.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman_rho2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    pearson_r2(&average_ranks(pred), &average_ranks(truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Bin centres, ascending; the middle one is 0.
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Histogram of `rank(pred) - rank(truth)`. The bin count is made odd so a
/// bin is centred on zero and the layout is mirror-symmetric.
pub fn rank_difference_histogram(pred: &[f64], truth: &[f64], bins: usize) -> Result<Histogram> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    let bins = (bins.max(1)) | 1;
    let n = pred.len();
    let span = (2 * n.max(1) - 1) as f64;
    let width = span / bins as f64;
    let mid = bins / 2;
    let centers = (0..bins).map(|i| (i as f64 - mid as f64) * width).collect();
    let mut counts = alloc::vec![0; bins];
    for (rp, rt) in average_ranks(pred).iter().zip(average_ranks(truth)) {
        let d = rp - rt;
        let step = (libm::floor(d.abs() / width + 0.5) as usize).min(mid);
        let bin = if d >= 0.0 { mid + step } else { mid - step };
        counts[bin] += 1;
    }
    Ok(Histogram { bin_width: width, centers, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Intra,
    Cross,
    LeaveOneOut,
}

/// Nightlight-only, text-only or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "NL")]
    Nightlight,
    #[serde(rename = "WE")]
    Text,
    #[serde(rename = "MM")]
    MultiModal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Nightlight, ModelKind::Text, ModelKind::MultiModal];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Nightlight => "NL",
            ModelKind::Text => "WE",
            ModelKind::MultiModal => "MM",
        }
    }

    pub fn uses_text(self) -> bool {
        self != ModelKind::Nightlight
    }

    pub fn uses_images(self) -> bool {
        self != ModelKind::Text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    #[default]
    Wealth,
    Education,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub regime: Regime,
    pub train_countries: Vec<String>,
    pub test_countries: Vec<String>,
    pub model_kind: ModelKind,
    pub neighbors: usize,
    pub seed: u64,
    #[serde(default)]
    pub outcome: Outcome,
}

impl ExperimentSpec {
    pub fn intra(country: &str, kind: ModelKind, neighbors: usize, seed: u64) -> Self {
        ExperimentSpec {
            regime: Regime::Intra,
            train_countries: alloc::vec![country.into()],
            test_countries: alloc::vec![country.into()],
            model_kind: kind,
            neighbors,
            seed,
            outcome: Outcome::Wealth,
        }
    }

    pub fn cross(train: &[&str], test: &[&str], kind: ModelKind, neighbors: usize, seed: u64) -> Self {
        ExperimentSpec {
            regime: Regime::Cross,
            train_countries: train.iter().map(|s| s.to_string()).collect(),
            test_countries: test.iter().map(|s| s.to_string()).collect(),
            model_kind: kind,
            neighbors,
            seed,
            outcome: Outcome::Wealth,
        }
    }

    pub fn leave_one_out(test: &str, kind: ModelKind, neighbors: usize, seed: u64) -> Self {
        ExperimentSpec {
            regime: Regime::LeaveOneOut,
            train_countries: Vec::new(),
            test_countries: alloc::vec![test.into()],
            model_kind: kind,
            neighbors,
            seed,
            outcome: Outcome::Wealth,
        }
    }
}

/// Where text features come from.
pub enum TextSource<'a> {
    /// Built on demand from the article index and embeddings.
    Live { index: &'a SpatialIndex, embeddings: &'a EmbeddingModel, normalize_distances: bool },
    /// Rows aligned with the bundle's points, built for a fixed neighbour count.
    Precomputed { neighbors: usize, rows: &'a [Vec<f64>] },
}

/// Survey points with whatever inputs the models may need.
pub struct DataBundle<'a> {
    pub points: &'a [SurveyPoint],
    pub text: Option<TextSource<'a>>,
    /// Aligned with `points`; `None` where no image exists.
    pub images: &'a [Option<ImageTensor>],
}

impl DataBundle<'_> {
    pub fn countries(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.points.iter().map(|p| p.country.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    fn text_row(&self, i: usize, neighbors: usize) -> Result<Vec<f64>> {
        match &self.text {
            None => Err(Error::InvalidSpec(String::from("no text features available"))),
            Some(TextSource::Live { index, embeddings, normalize_distances }) => {
                let cfg = FeatureConfig { neighbors, normalize_distances: *normalize_distances };
                Ok(build_text_features(self.points[i].location, index, embeddings, &cfg)?.values)
            }
            Some(TextSource::Precomputed { neighbors: have, rows }) => {
                if *have != neighbors {
                    return Err(Error::InvalidSpec(alloc::format!(
                        "features were built for {have} neighbours, experiment asks for {neighbors}"
                    )));
                }
                Ok(rows[i].clone())
            }
        }
    }

    /// Model inputs for the given points.
    pub fn examples(&self, indices: &[usize], kind: ModelKind, neighbors: usize) -> Result<Vec<Example>> {
        indices
            .iter()
            .map(|&i| {
                let text = if kind.uses_text() { self.text_row(i, neighbors)? } else { Vec::new() };
                let image = if kind.uses_images() {
                    let img = self.images.get(i).and_then(Option::as_ref).ok_or_else(|| {
                        let p = &self.points[i];
                        Error::MissingImage(alloc::format!("{}/{}", p.country, p.cluster_id))
                    })?;
                    Some(img.clone())
                } else {
                    None
                };
                Ok(Example { text, image })
            })
            .collect()
    }
}

/// Anything that can be fitted and then queried.
pub trait Learner {
    /// Returns the per-epoch training loss.
    fn fit(&mut self, data: &Dataset) -> Result<Vec<f64>>;
    fn predict(&self, inputs: &[&Example]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub architecture: Architecture,
    pub train: TrainConfig,
}

/// The neural regressor matching a model kind.
pub struct NeuralLearner<'e> {
    pub model: Regressor,
    pub config: TrainConfig,
    engine: &'e dyn BatchGradient,
}

impl<'e> NeuralLearner<'e> {
    pub fn new(kind: ModelKind, text_dim: usize, settings: &ModelSettings, seed: u64, engine: &'e dyn BatchGradient) -> Self {
        let arch = &settings.architecture;
        let model = match kind {
            ModelKind::Text => Regressor::Mlp(MlpRegressor::new(text_dim, arch, seed)),
            ModelKind::Nightlight => Regressor::MultiModal(MultiModalModel::new(0, arch, seed)),
            ModelKind::MultiModal => Regressor::MultiModal(MultiModalModel::new(text_dim, arch, seed)),
        };
        let config = TrainConfig { seed, ..settings.train.clone() };
        NeuralLearner { model, config, engine }
    }
}

impl Learner for NeuralLearner<'_> {
    fn fit(&mut self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(train_with(&mut self.model, data, &self.config, self.engine)?.loss_trace)
    }

    fn predict(&self, inputs: &[&Example]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(64) {
            out.extend(self.model.predict(chunk)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub country: String,
    pub cluster_id: String,
    pub lat: f64,
    pub lon: f64,
    pub truth: f64,
    pub pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spec: ExperimentSpec,
    pub pearson_r2: f64,
    pub spearman_rho2: f64,
    pub train_size: usize,
    pub predictions: Vec<PredictionRow>,
    pub loss_trace: Vec<f64>,
    /// Filled in by callers that time the run.
    pub wall_time_secs: Option<f64>,
}

type Key<'a> = (&'a str, &'a str);

/// Train and test point indices for a spec, checked for overlap.
pub fn split_indices(spec: &ExperimentSpec, points: &[SurveyPoint]) -> Result<(Vec<usize>, Vec<usize>)> {
    let present: BTreeSet<&str> = points.iter().map(|p| p.country.as_str()).collect();
    for c in spec.train_countries.iter().chain(&spec.test_countries) {
        if !present.contains(c.as_str()) {
            return Err(Error::MissingCountry(c.clone()));
        }
    }
    if spec.test_countries.is_empty() {
        return Err(Error::InvalidSpec(String::from("no test countries")));
    }
    let in_set = |set: &[String], p: &SurveyPoint| set.contains(&p.country);
    let (train, test): (Vec<usize>, Vec<usize>) = match spec.regime {
        Regime::Intra => {
            let mut a = spec.train_countries.clone();
            let mut b = spec.test_countries.clone();
            a.sort();
            b.sort();
            if a != b {
                return Err(Error::InvalidSpec(String::from("intra-country runs train and test on the same countries")));
            }
            let pool: Vec<usize> = (0..points.len()).filter(|&i| in_set(&a, &points[i])).collect();
            intra_split(&pool, points, spec.seed)
        }
        Regime::Cross => {
            if spec.train_countries.iter().any(|c| spec.test_countries.contains(c)) {
                return Err(Error::InvalidSpec(String::from("cross-country runs need disjoint country sets")));
            }
            if spec.train_countries.is_empty() {
                return Err(Error::InvalidSpec(String::from("no training countries")));
            }
            let train = (0..points.len()).filter(|&i| in_set(&spec.train_countries, &points[i])).collect();
            let test = (0..points.len()).filter(|&i| in_set(&spec.test_countries, &points[i])).collect();
            (train, test)
        }
        Regime::LeaveOneOut => {
            if spec.test_countries.len() != 1 {
                return Err(Error::InvalidSpec(String::from("leave-one-out holds out exactly one country")));
            }
            if spec.train_countries.iter().any(|c| spec.test_countries.contains(c)) {
                return Err(Error::InvalidSpec(String::from("held-out country listed for training")));
            }
            let pool = &spec.train_countries;
            let train = (0..points.len())
                .filter(|&i| !in_set(&spec.test_countries, &points[i]) && (pool.is_empty() || in_set(pool, &points[i])))
                .collect();
            let test = (0..points.len()).filter(|&i| in_set(&spec.test_countries, &points[i])).collect();
            (train, test)
        }
    };
    let train_keys: BTreeSet<Key> = train.iter().map(|&i| key(&points[i])).collect();
    if let Some(&i) = test.iter().find(|&&i| train_keys.contains(&key(&points[i]))) {
        return Err(Error::OverlappingSplit(alloc::format!("{}/{}", points[i].country, points[i].cluster_id)));
    }
    if train.is_empty() || test.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: train.len().min(test.len()) });
    }
    Ok((train, test))
}

fn key(p: &SurveyPoint) -> Key<'_> {
    (p.country.as_str(), p.cluster_id.as_str())
}

/// Seeded split at cluster level: every point of a cluster lands on the
/// same side.
fn intra_split(pool: &[usize], points: &[SurveyPoint], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut clusters: Vec<Key> = Vec::new();
    let mut seen = BTreeSet::new();
    for &i in pool {
        if seen.insert(key(&points[i])) {
            clusters.push(key(&points[i]));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    clusters.shuffle(&mut rng);
    let cut = libm::round(clusters.len() as f64 * INTRA_TRAIN_SHARE) as usize;
    let train_keys: BTreeSet<Key> = clusters[..cut].iter().copied().collect();
    pool.iter().partition(|&&i| train_keys.contains(&key(&points[i])))
}

/// Fits `learner` on `train` and scores it on `test`. No overlap check.
pub fn evaluate_split(
    spec: &ExperimentSpec,
    bundle: &DataBundle,
    train: &[usize],
    test: &[usize],
    learner: &mut dyn Learner,
) -> Result<EvalReport> {
    let train_x = bundle.examples(train, spec.model_kind, spec.neighbors)?;
    let train_y = train.iter().map(|&i| bundle.points[i].outcome).collect();
    let data = Dataset::new(train_x, train_y)?;
    let loss_trace = learner.fit(&data)?;
    let test_x = bundle.examples(test, spec.model_kind, spec.neighbors)?;
    let refs: Vec<&Example> = test_x.iter().collect();
    let preds = learner.predict(&refs)?;
    let truth: Vec<f64> = test.iter().map(|&i| bundle.points[i].outcome).collect();
    let pearson = pearson_r2(&preds, &truth)?;
    let spearman = spearman_rho2(&preds, &truth)?;
    let predictions = test
        .iter()
        .zip(&preds)
        .map(|(&i, &pred)| {
            let p = &bundle.points[i];
            PredictionRow {
                country: p.country.clone(),
                cluster_id: p.cluster_id.clone(),
                lat: p.location.lat,
                lon: p.location.lon,
                truth: p.outcome,
                pred,
            }
        })
        .collect();
    Ok(EvalReport {
        spec: spec.clone(),
        pearson_r2: pearson,
        spearman_rho2: spearman,
        train_size: train.len(),
        predictions,
        loss_trace,
        wall_time_secs: None,
    })
}

/// Text feature width for a spec, probed from the first point.
fn text_dim(spec: &ExperimentSpec, bundle: &DataBundle) -> Result<usize> {
    if !spec.model_kind.uses_text() {
        return Ok(0);
    }
    if bundle.points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(bundle.text_row(0, spec.neighbors)?.len())
}

pub fn run_experiment_with(
    spec: &ExperimentSpec,
    bundle: &DataBundle,
    settings: &ModelSettings,
    engine: &dyn BatchGradient,
) -> Result<EvalReport> {
    if spec.neighbors == 0 && spec.model_kind.uses_text() {
        return Err(Error::InvalidSpec(String::from("neighbour count must be at least 1")));
    }
    let (train, test) = split_indices(spec, bundle.points)?;
    let mut learner = NeuralLearner::new(spec.model_kind, text_dim(spec, bundle)?, settings, spec.seed, engine);
    evaluate_split(spec, bundle, &train, &test, &mut learner)
}

pub fn run_experiment(spec: &ExperimentSpec, bundle: &DataBundle, settings: &ModelSettings) -> Result<EvalReport> {
    run_experiment_with(spec, bundle, settings, &Sequential)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub train: String,
    pub test: String,
    pub pearson_r2: Option<f64>,
    pub spearman_rho2: Option<f64>,
    pub error: Option<String>,
}

/// Train × test matrix for one model kind, countries then `All` on both
/// axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub model_kind: ModelKind,
    pub labels: Vec<String>,
    /// `cells[test][train]`.
    pub cells: Vec<Vec<GridCell>>,
}

/// The spec behind a grid cell.
pub fn grid_spec(countries: &[String], train: &str, test: &str, kind: ModelKind, neighbors: usize, seed: u64) -> ExperimentSpec {
    let others = |c: &str| -> Vec<String> { countries.iter().filter(|x| *x != c).cloned().collect() };
    let mk = |regime, train_countries, test_countries| ExperimentSpec {
        regime,
        train_countries,
        test_countries,
        model_kind: kind,
        neighbors,
        seed,
        outcome: Outcome::Wealth,
    };
    match (train == ALL, test == ALL) {
        (true, true) => mk(Regime::Intra, countries.to_vec(), countries.to_vec()),
        (true, false) => mk(Regime::LeaveOneOut, others(test), alloc::vec![test.into()]),
        (false, true) => mk(Regime::Cross, alloc::vec![train.into()], others(train)),
        (false, false) if train == test => mk(Regime::Intra, alloc::vec![train.into()], alloc::vec![test.into()]),
        (false, false) => mk(Regime::Cross, alloc::vec![train.into()], alloc::vec![test.into()]),
    }
}

/// Runs every cell. Cell failures are recorded, not propagated.
pub fn run_grid(
    countries: &[String],
    kind: ModelKind,
    neighbors: usize,
    seed: u64,
    outcome: Outcome,
    mut run: impl FnMut(&ExperimentSpec) -> Result<EvalReport>,
) -> (ResultGrid, Vec<EvalReport>) {
    let mut labels: Vec<String> = countries.to_vec();
    labels.push(ALL.into());
    let mut reports = Vec::new();
    let mut cells = Vec::new();
    for test in &labels {
        let mut row = Vec::new();
        for train in &labels {
            let mut spec = grid_spec(countries, train, test, kind, neighbors, seed);
            spec.outcome = outcome;
            let cell = match run(&spec) {
                Ok(r) => {
                    let c = GridCell {
                        train: train.clone(),
                        test: test.clone(),
                        pearson_r2: Some(r.pearson_r2),
                        spearman_rho2: Some(r.spearman_rho2),
                        error: None,
                    };
                    reports.push(r);
                    c
                }
                Err(e) => GridCell {
                    train: train.clone(),
                    test: test.clone(),
                    pearson_r2: None,
                    spearman_rho2: None,
                    error: Some(alloc::format!("{}: {}", e.code(), e)),
                },
            };
            row.push(cell);
        }
        cells.push(row);
    }
    (ResultGrid { model_kind: kind, labels, cells }, reports)
}

/// Memorises training targets keyed by the exact input bits.
#[derive(Debug, Default)]
pub struct LookupLearner {
    table: BTreeMap<Vec<u64>, f64>,
}

impl LookupLearner {
    fn key(x: &Example) -> Vec<u64> {
        let img = x.image.iter().flat_map(|i| i.pixels.iter());
        x.text.iter().chain(img).map(|v| v.to_bits()).collect()
    }
}

impl Learner for LookupLearner {
    fn fit(&mut self, data: &Dataset) -> Result<Vec<f64>> {
        for (x, y) in data.examples.iter().zip(&data.targets) {
            self.table.insert(Self::key(x), *y);
        }
        Ok(Vec::new())
    }

    fn predict(&self, inputs: &[&Example]) -> Result<Vec<f64>> {
        Ok(inputs.iter().map(|x| self.table.get(&Self::key(x)).copied().unwrap_or(0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn pearson_identities() {
        let t = [1.0, 2.0, 4.0, 3.5];
        assert_eq!(pearson_r2(&t, &t).unwrap(), 1.0);
        let neg: Vec<f64> = t.iter().map(|x| -x).collect();
        assert_eq!(pearson_r2(&neg, &t).unwrap(), 1.0);
        assert_eq!(pearson_r2(&[1.0, 1.0, 1.0, 1.0], &t).unwrap_err(), Error::UndefinedCorrelation);
        assert_eq!(pearson_r2(&t, &[2.0; 4]).unwrap_err(), Error::UndefinedCorrelation);
    }

    #[test]
    fn spearman_identities() {
        let t = [0.1, 5.0, -3.0, 2.0, 2.5];
        let cubed: Vec<f64> = t.iter().map(|x| x * x * x + 1.0).collect();
        assert_eq!(spearman_rho2(&cubed, &t).unwrap(), 1.0);
        let rev: Vec<f64> = t.iter().map(|x| -x).collect();
        assert_eq!(spearman_rho2(&rev, &t).unwrap(), 1.0);
        assert!(spearman_rho2(&[3.0; 5], &t).is_err());
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn histogram_cases() {
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let h = rank_difference_histogram(&t, &t, 9).unwrap();
        assert_eq!(h.counts[4], 20);
        assert_eq!(h.centers[4], 0.0);
        let rev: Vec<f64> = t.iter().rev().copied().collect();
        let h = rank_difference_histogram(&rev, &t, 10).unwrap();
        assert_eq!(h.counts.len(), 11);
        assert_eq!(h.counts.iter().sum::<usize>(), 20);
        let mirrored: Vec<usize> = h.counts.iter().rev().copied().collect();
        assert_eq!(h.counts, mirrored);
    }

    fn pt(country: &str, cluster: &str, y: f64) -> SurveyPoint {
        SurveyPoint {
            cluster_id: cluster.into(),
            country: country.into(),
            location: GeoPoint { lat: y, lon: 0.0 },
            outcome: y,
            urban: false,
        }
    }

    #[test]
    fn splits() {
        let mut pts = Vec::new();
        for c in ["A", "B", "C"] {
            for i in 0..20 {
                pts.push(pt(c, &alloc::format!("{i}"), i as f64));
            }
        }
        pts.push(pt("A", "3", 0.5));
        let (tr, te) = split_indices(&ExperimentSpec::intra("A", ModelKind::Text, 1, 0), &pts).unwrap();
        assert_eq!(tr.len() + te.len(), 21);
        assert_eq!(te.len(), 4 + usize::from(te.iter().any(|&i| pts[i].cluster_id == "3")));
        let (tr, te) = split_indices(&ExperimentSpec::leave_one_out("B", ModelKind::Text, 1, 0), &pts).unwrap();
        assert_eq!((tr.len(), te.len()), (41, 20));
        assert!(tr.iter().all(|&i| pts[i].country != "B"));
        let bad = ExperimentSpec::cross(&["A"], &["A"], ModelKind::Text, 1, 0);
        assert!(split_indices(&bad, &pts).is_err());
        let missing = ExperimentSpec::cross(&["A"], &["Z"], ModelKind::Text, 1, 0);
        assert_eq!(split_indices(&missing, &pts).unwrap_err(), Error::MissingCountry("Z".into()));
    }

    #[test]
    fn duplicate_cluster_ids_across_regimes_are_caught() {
        let pts = vec![pt("A", "1", 0.0), pt("A", "2", 1.0), pt("A", "3", 2.0)];
        let spec = ExperimentSpec {
            regime: Regime::LeaveOneOut,
            train_countries: vec!["A".into()],
            test_countries: vec!["A".into()],
            ..ExperimentSpec::leave_one_out("A", ModelKind::Text, 1, 0)
        };
        assert!(split_indices(&spec, &pts).is_err());
    }

    #[test]
    fn memorising_oracle_scores_one() {
        let pts: Vec<SurveyPoint> = (0..12).map(|i| pt("A", &alloc::format!("{i}"), (i * i) as f64)).collect();
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.location.lat, 1.0]).collect();
        let images = vec![None; pts.len()];
        let bundle = DataBundle { points: &pts, text: Some(TextSource::Precomputed { neighbors: 1, rows: &rows }), images: &images };
        let spec = ExperimentSpec::intra("A", ModelKind::Text, 1, 0);
        let all: Vec<usize> = (0..pts.len()).collect();
        let report = evaluate_split(&spec, &bundle, &all, &all, &mut LookupLearner::default()).unwrap();
        assert_eq!(report.pearson_r2, 1.0);
        assert_eq!(report.predictions.len(), 12);
    }

    #[test]
    fn grid_layout() {
        let countries: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let (grid, _) = run_grid(&countries, ModelKind::Text, 1, 0, Outcome::Wealth, |_| Err(Error::EmptyDataset));
        assert_eq!(grid.labels, vec!["A", "B", "All"]);
        assert_eq!(grid.cells.len(), 3);
        assert!(grid.cells.iter().all(|r| r.len() == 3));
        assert_eq!(grid_spec(&countries, "All", "A", ModelKind::Text, 1, 0).regime, Regime::LeaveOneOut);
        assert_eq!(grid_spec(&countries, "A", "All", ModelKind::Text, 1, 0).test_countries, vec!["B"]);
        assert_eq!(grid_spec(&countries, "B", "B", ModelKind::Text, 1, 0).regime, Regime::Intra);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(seed: u64, a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], b in -100.0f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p: Vec<f64> = t.iter().map(|x| 0.7 * x + rng.random_range(-1.0..1.0)).collect();
            let q: Vec<f64> = p.iter().map(|x| a * x + b).collect();
            prop_assert!((pearson_r2(&q, &t).unwrap() - pearson_r2(&p, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn spearman_is_pearson_of_ranks(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..30).map(|_| rng.random_range(0..10) as f64).collect();
            let p: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let (Ok(s), Ok(r)) = (spearman_rho2(&p, &t), pearson_r2(&average_ranks(&p), &average_ranks(&t))) {
                prop_assert!((s - r).abs() < 1e-12);
            }
        }

        #[test]
        fn histogram_mass(seed: u64, bins in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p: Vec<f64> = t.iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
            let h = rank_difference_histogram(&p, &t, bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), 25);
            prop_assert_eq!(h.counts.len() % 2, 1);
        }
    }
}
