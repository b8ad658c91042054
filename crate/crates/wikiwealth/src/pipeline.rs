//! Command implementations: load inputs named by a [`RunConfig`], run the
//! core algorithms, write outputs and a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use wikiwealth_core::corpus::{GeoArticle, TokenizedDoc};
use wikiwealth_core::embed::{build_vocab, EmbedConfig, EmbeddingModel};
use wikiwealth_core::eval::{
    run_experiment_with, run_grid, DataBundle, EvalReport, ExperimentSpec, Learner, ModelKind, NeuralLearner,
    Outcome, ResultGrid, TextSource,
};
use wikiwealth_core::features::FeatureConfig;
use wikiwealth_core::geo::{GeoPoint, SpatialIndex};
use wikiwealth_core::interpret::{n_sweep, quantile_embedding_analysis, PcaProjection};
use wikiwealth_core::nn::{BatchGradient, Dataset, Example, ImageTensor};
use wikiwealth_core::survey::SurveyPoint;
use wikiwealth_core::synth::{field_grid, gen_region, RegionSpec};

use crate::config::{ExperimentEntry, RunConfig};
use crate::error::{Error, Result};
use crate::formats::checkpoint::{load_model, save_model};
use crate::formats::corpus::{read_corpus, write_corpus};
use crate::formats::features::{load_features, save_features, FeatureTable};
use crate::formats::image::{image_path, load_image, save_image};
use crate::formats::regressor::save_regressor;
use crate::formats::survey::{load_survey_points, read_education, write_outcomes};
use crate::formats::write_file;
use crate::manifest::Manifest;
use crate::parallel::{engine, train_pvdbow_parallel};
use crate::report;

/// Side length of the exported ground-truth field grid.
pub const FIELD_GRID: usize = 64;

/// Tokenises, builds the vocabulary and trains paragraph vectors.
pub fn embed_articles(articles: &[GeoArticle], cfg: &EmbedConfig, threads: usize) -> Result<EmbeddingModel> {
    let docs: Vec<TokenizedDoc> = articles.iter().map(GeoArticle::tokenize).collect();
    let vocab = build_vocab(&docs, cfg)?;
    Ok(train_pvdbow_parallel(&docs, &vocab, cfg, threads)?)
}

pub fn to_tensor(grid: &wikiwealth_core::features::ImageGrid) -> ImageTensor {
    ImageTensor { height: grid.height(), width: grid.width(), pixels: grid.to_f64() }
}

/// What a command needs loaded.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub text: bool,
    pub live_text: bool,
    pub images: bool,
}

impl Needs {
    fn of(kinds: impl IntoIterator<Item = ModelKind>) -> Self {
        kinds.into_iter().fold(Needs::default(), |n, k| Needs {
            text: n.text || k.uses_text(),
            live_text: n.live_text,
            images: n.images || k.uses_images(),
        })
    }
}

/// Everything loaded for a run.
pub struct Inputs {
    pub points: Vec<SurveyPoint>,
    pub articles: Vec<GeoArticle>,
    pub images: Vec<Option<ImageTensor>>,
    pub embeddings: Option<EmbeddingModel>,
    pub index: Option<SpatialIndex>,
    /// Neighbour count and rows aligned with `points`.
    pub features: Option<(usize, Vec<Vec<f64>>)>,
    pub normalize_distances: bool,
}

impl Inputs {
    pub fn load(cfg: &RunConfig, needs: Needs, manifest: &mut Manifest) -> Result<Self> {
        if cfg.surveys.is_empty() {
            return Err(Error::Config("no survey files configured".into()));
        }
        for p in &cfg.surveys {
            manifest.input(p)?;
        }
        let points = match cfg.outcome {
            Outcome::Wealth => load_survey_points(&cfg.surveys.iter().map(PathBuf::as_path).collect::<Vec<_>>())?.points,
            Outcome::Education => {
                let mut pts = Vec::new();
                for p in &cfg.surveys {
                    pts.extend(read_education(p, cfg.education_cap)?.points);
                }
                pts
            }
        };
        let mut inputs = Inputs {
            points,
            articles: Vec::new(),
            images: Vec::new(),
            embeddings: None,
            index: None,
            features: None,
            normalize_distances: cfg.normalize_distances,
        };
        if needs.images {
            let dir = cfg.images.as_ref().ok_or_else(|| Error::Config("no image directory configured".into()))?;
            manifest.input(dir)?;
            inputs.images = inputs
                .points
                .iter()
                .map(|p| {
                    let path = image_path(dir, p);
                    if path.exists() {
                        load_image(&path).map(|g| Some(to_tensor(&g)))
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_>>()?;
        }
        if !needs.text {
            return Ok(inputs);
        }
        if let Some(path) = cfg.features.as_ref().filter(|_| !needs.live_text) {
            manifest.input(path)?;
            let table = load_features(path)?;
            inputs.features = Some((table.neighbors, table.aligned(&inputs.points)?));
            inputs.normalize_distances = table.normalized;
        }
        if inputs.features.as_ref().is_some_and(|(n, _)| *n == cfg.neighbors) {
            return Ok(inputs);
        }
        inputs.load_live_text(cfg, manifest)?;
        Ok(inputs)
    }

    fn load_live_text(&mut self, cfg: &RunConfig, manifest: &mut Manifest) -> Result<()> {
        let corpus = cfg.corpus.as_ref().ok_or_else(|| Error::Config("no corpus configured".into()))?;
        manifest.input(corpus)?;
        self.articles = read_corpus(corpus, None)?.articles;
        let model = match &cfg.embeddings {
            Some(path) => {
                manifest.input(path)?;
                load_model(path)?
            }
            None => embed_articles(&self.articles, &cfg.embed, cfg.worker_threads())?,
        };
        let locs = self.articles.iter().map(|a| (a.id.as_str(), a.location));
        self.index = Some(SpatialIndex::build(locs, cfg.metric)?);
        self.embeddings = Some(model);
        Ok(())
    }

    pub fn countries(&self) -> Vec<String> {
        self.bundle().countries()
    }

    pub fn bundle(&self) -> DataBundle<'_> {
        let text = match (&self.index, &self.embeddings, &self.features) {
            (Some(index), Some(embeddings), _) => {
                Some(TextSource::Live { index, embeddings, normalize_distances: self.normalize_distances })
            }
            (_, _, Some((neighbors, rows))) => Some(TextSource::Precomputed { neighbors: *neighbors, rows }),
            _ => None,
        };
        DataBundle { points: &self.points, text, images: &self.images }
    }
}

fn run_timed(
    spec: &ExperimentSpec,
    bundle: &DataBundle,
    cfg: &RunConfig,
    engine: &dyn BatchGradient,
) -> wikiwealth_core::Result<EvalReport> {
    let t = Instant::now();
    let mut r = run_experiment_with(spec, bundle, &cfg.model, engine)?;
    r.wall_time_secs = Some(t.elapsed().as_secs_f64());
    Ok(r)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn finish_manifest(mut m: Manifest, out: &Path, written: &[PathBuf]) -> Result<PathBuf> {
    m.outputs(written)?;
    let path = out.join("manifest.json");
    m.write(&path)?;
    Ok(path)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push(b'\n');
    write_file(path, &text)
}

/// Generates every region into `out` along with a `run.json` that points
/// the other commands at the generated files.
pub fn synth(specs: &[RegionSpec], out: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut articles = Vec::new();
    let mut points = Vec::new();
    let mut written = Vec::new();
    let images = out.join("images");
    create_dir(&images)?;
    for spec in specs {
        let region = gen_region(spec)?;
        for (p, g) in region.survey.points.iter().zip(&region.images) {
            save_image(&image_path(&images, p), g)?;
        }
        let field = out.join(format!("field_{}.csv", spec.name));
        report::write_field(&field, &field_grid(spec, FIELD_GRID, FIELD_GRID))?;
        written.push(field);
        articles.extend(region.articles);
        points.extend(region.survey.points);
    }
    let corpus = out.join("corpus.jsonl");
    let mut buf = Vec::new();
    write_corpus(&mut buf, &articles).map_err(|e| Error::io(&corpus, e))?;
    write_file(&corpus, &buf)?;
    let surveys = out.join("surveys.csv");
    let mut buf = Vec::new();
    write_outcomes(&mut buf, &points)?;
    write_file(&surveys, &buf)?;
    let regions = out.join("regions.json");
    write_json(&regions, &specs)?;

    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let mut experiments: Vec<ExperimentEntry> = names
        .iter()
        .map(|n| ExperimentEntry { regime: wikiwealth_core::eval::Regime::Intra, model: ModelKind::Text, train: vec![n.clone()], test: vec![] })
        .collect();
    if let [a, b, ..] = names.as_slice() {
        experiments.push(ExperimentEntry {
            regime: wikiwealth_core::eval::Regime::Cross,
            model: ModelKind::Text,
            train: vec![a.clone()],
            test: vec![b.clone()],
        });
    }
    let run = RunConfig {
        corpus: Some("corpus.jsonl".into()),
        surveys: vec!["surveys.csv".into()],
        images: Some("images".into()),
        embeddings: Some("model.pvdb".into()),
        output: "results".into(),
        embed: EmbedConfig { min_count: 1, seed, ..EmbedConfig::default() },
        experiments,
        seed,
        ..RunConfig::default()
    };
    let run_path = out.join("run.json");
    write_json(&run_path, &run)?;
    written.extend([corpus, surveys, regions, run_path, images]);
    let m = Manifest::new("synth", &specs, seed, 1);
    written.push(finish_manifest(m, out, &written)?);
    Ok(written)
}

/// Trains embeddings on the configured corpus and saves the checkpoint.
pub fn embed(cfg: &RunConfig, model_path: &Path) -> Result<EmbeddingModel> {
    cfg.embed.validate()?;
    let corpus = cfg.corpus.as_ref().ok_or_else(|| Error::Config("no corpus configured".into()))?;
    let mut m = Manifest::new("embed", cfg, cfg.embed.seed, cfg.worker_threads());
    m.input(corpus)?;
    let load = read_corpus(corpus, None)?;
    let model = embed_articles(&load.articles, &cfg.embed, cfg.worker_threads())?;
    save_model(model_path, &model)?;
    create_dir(&cfg.output)?;
    let loss = cfg.output.join("embed_loss.csv");
    report::write_loss(&loss, model.per_epoch_loss())?;
    finish_manifest(m, &cfg.output, &[model_path.to_path_buf(), loss])?;
    Ok(model)
}

/// Builds the text feature table for every survey point.
pub fn features(cfg: &RunConfig, out_path: &Path) -> Result<FeatureTable> {
    cfg.validate()?;
    let mut m = Manifest::new("features", cfg, cfg.seed, cfg.worker_threads());
    let inputs = Inputs::load(cfg, Needs { text: true, live_text: true, images: false }, &mut m)?;
    let fc = FeatureConfig { neighbors: cfg.neighbors, normalize_distances: cfg.normalize_distances };
    let (Some(index), Some(model)) = (&inputs.index, &inputs.embeddings) else {
        return Err(Error::Config("text features need a corpus and embeddings".into()));
    };
    let table = FeatureTable::build(&inputs.points, index, model, &fc)?;
    save_features(out_path, &table)?;
    create_dir(&cfg.output)?;
    finish_manifest(m, &cfg.output, &[out_path.to_path_buf()])?;
    Ok(table)
}

/// Trains one regressor on every survey point and saves it.
pub fn train(cfg: &RunConfig, kind: ModelKind, out_path: &Path) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut m = Manifest::new("train", cfg, cfg.seed, cfg.worker_threads());
    let inputs = Inputs::load(cfg, Needs::of([kind]), &mut m)?;
    let bundle = inputs.bundle();
    let all: Vec<usize> = (0..inputs.points.len()).collect();
    let examples: Vec<Example> = bundle.examples(&all, kind, cfg.neighbors)?;
    let text_dim = examples.first().map_or(0, |x| x.text.len());
    let targets = inputs.points.iter().map(|p| p.outcome).collect();
    let data = Dataset::new(examples, targets)?;
    let eng = engine(cfg.worker_threads());
    let mut learner = NeuralLearner::new(kind, text_dim, &cfg.model, cfg.seed, eng.as_ref());
    let trace = learner.fit(&data)?;
    save_regressor(out_path, &learner.model)?;
    create_dir(&cfg.output)?;
    let loss = cfg.output.join("train_loss.csv");
    report::write_loss(&loss, &trace)?;
    finish_manifest(m, &cfg.output, &[out_path.to_path_buf(), loss])?;
    Ok(trace)
}

/// Experiments named in the config, or intra-country text runs for every
/// country when none are named.
pub fn planned_specs(cfg: &RunConfig, countries: &[String]) -> Result<Vec<ExperimentSpec>> {
    if cfg.experiments.is_empty() && cfg.grid.is_empty() {
        return Ok(countries
            .iter()
            .map(|c| ExperimentSpec { outcome: cfg.outcome, ..ExperimentSpec::intra(c, ModelKind::Text, cfg.neighbors, cfg.seed) })
            .collect());
    }
    cfg.experiments.iter().map(|e| e.resolve(countries, cfg.neighbors, cfg.seed, cfg.outcome)).collect()
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub reports: Vec<EvalReport>,
    pub grids: Vec<ResultGrid>,
    pub written: Vec<PathBuf>,
}

/// Runs every configured experiment and grid.
pub fn eval(cfg: &RunConfig) -> Result<EvalRun> {
    cfg.validate()?;
    let mut m = Manifest::new("eval", cfg, cfg.seed, cfg.worker_threads());
    let kinds: Vec<ModelKind> = cfg.experiments.iter().map(|e| e.model).chain(cfg.grid.iter().copied()).collect();
    let needs = if kinds.is_empty() { Needs::of([ModelKind::Text]) } else { Needs::of(kinds) };
    let inputs = Inputs::load(cfg, needs, &mut m)?;
    let bundle = inputs.bundle();
    let countries = bundle.countries();
    let eng = engine(cfg.worker_threads());
    let mut reports = Vec::new();
    for spec in planned_specs(cfg, &countries)? {
        reports.push(run_timed(&spec, &bundle, cfg, eng.as_ref())?);
    }
    let mut grids = Vec::new();
    for &kind in &cfg.grid {
        let (grid, rs) =
            run_grid(&countries, kind, cfg.neighbors, cfg.seed, cfg.outcome, |s| run_timed(s, &bundle, cfg, eng.as_ref()));
        grids.push(grid);
        reports.extend(rs);
    }

    let out = &cfg.output;
    let mut written = Vec::new();
    for r in &reports {
        let name = report::experiment_name(&r.spec);
        let json = out.join("reports").join(format!("{name}.json"));
        report::write_report_json(&json, r)?;
        let preds = out.join("predictions").join(format!("{name}.csv"));
        report::write_predictions(&preds, &r.predictions)?;
        written.extend([json, preds]);
    }
    let metrics = out.join("metrics.csv");
    report::write_metrics(&metrics, &reports)?;
    written.push(metrics);
    if !grids.is_empty() {
        let matrix = out.join("matrix.csv");
        report::write_matrix(&matrix, &grids)?;
        written.push(matrix);
    }
    written.push(finish_manifest(m, out, &written)?);
    Ok(EvalRun { reports, grids, written })
}

/// The text experiment that sweeps and projections are built on: the
/// first configured experiment, run with the text model, else an
/// intra-country run on the first country.
fn base_spec(cfg: &RunConfig, countries: &[String]) -> Result<ExperimentSpec> {
    let first = match cfg.experiments.first() {
        Some(e) => e.resolve(countries, cfg.neighbors, cfg.seed, cfg.outcome)?,
        None => {
            let c = countries.first().ok_or_else(|| Error::Config("no survey points".into()))?;
            ExperimentSpec { outcome: cfg.outcome, ..ExperimentSpec::intra(c, ModelKind::Text, cfg.neighbors, cfg.seed) }
        }
    };
    Ok(ExperimentSpec { model_kind: ModelKind::Text, ..first })
}

/// Text-model r² for each neighbour count.
pub fn sweep(cfg: &RunConfig, counts: &[usize]) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    let mut m = Manifest::new("sweep", cfg, cfg.seed, cfg.worker_threads());
    let inputs = Inputs::load(cfg, Needs { text: true, live_text: true, images: false }, &mut m)?;
    let bundle = inputs.bundle();
    let base = base_spec(cfg, &bundle.countries())?;
    let eng = engine(cfg.worker_threads());
    let curve = n_sweep(&base, counts, |s| run_timed(s, &bundle, cfg, eng.as_ref()))?;
    let path = cfg.output.join("sweep.csv");
    report::write_sweep(&path, &curve)?;
    finish_manifest(m, &cfg.output, &[path])?;
    Ok(curve)
}

/// Projection of rich/poor neighbourhood embeddings and category articles.
pub fn pca(cfg: &RunConfig, categories: &[String]) -> Result<PcaProjection> {
    cfg.validate()?;
    let mut m = Manifest::new("pca", cfg, cfg.seed, cfg.worker_threads());
    let inputs = Inputs::load(cfg, Needs { text: true, live_text: true, images: false }, &mut m)?;
    let bundle = inputs.bundle();
    let base = base_spec(cfg, &bundle.countries())?;
    let eng = engine(cfg.worker_threads());
    let r = run_timed(&base, &bundle, cfg, eng.as_ref())?;
    let (Some(index), Some(model)) = (&inputs.index, &inputs.embeddings) else {
        return Err(Error::Config("projection needs a corpus and embeddings".into()));
    };
    let preds: Vec<f64> = r.predictions.iter().map(|p| p.pred).collect();
    let locations: Vec<GeoPoint> = r.predictions.iter().map(|p| GeoPoint { lat: p.lat, lon: p.lon }).collect();
    let mut members = Vec::new();
    for a in &inputs.articles {
        if let Some(c) = a.category.as_ref().filter(|c| categories.contains(c)) {
            let v = model.embed_doc(&a.id)?.iter().map(|&x| f64::from(x)).collect();
            members.push((c.clone(), v));
        }
    }
    let proj = quantile_embedding_analysis(&preds, &locations, index, model, &members)?;
    let path = cfg.output.join("projection.csv");
    report::write_projection(&path, &proj.points)?;
    finish_manifest(m, &cfg.output, &[path])?;
    Ok(proj)
}
