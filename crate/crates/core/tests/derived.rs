//! Cross-module checks against independently computed expectations.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wikiwealth_core::corpus::TokenizedDoc;
use wikiwealth_core::embed::{build_vocab, train_pvdbow, EmbedConfig};
use wikiwealth_core::eval::{pearson_r2, rank_difference_histogram, spearman_rho2};
use wikiwealth_core::features::{build_text_features, FeatureConfig};
use wikiwealth_core::geo::{GeoPoint, Metric, SpatialIndex};
use wikiwealth_core::interpret::quantile_embedding_analysis;
use wikiwealth_core::survey::{aggregate_clusters, Household};
use wikiwealth_core::synth::{
    gen_corpus, gen_nightlights, gen_region, gen_surveys, two_topic_corpus, RegionSpec, WealthField, POOR_WORDS,
    RICH_WORDS, SHARED_WORDS,
};

fn pearson_r(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * 6371.0088 * h.sqrt().min(1.0).asin()
}

#[test]
fn rich_token_share_follows_field() {
    let spec = RegionSpec::region_a();
    let field = WealthField::new(&spec);
    let rich: BTreeSet<&str> = RICH_WORDS.iter().copied().collect();
    let (share, wealth): (Vec<f64>, Vec<f64>) = gen_corpus(&spec)
        .unwrap()
        .iter()
        .map(|a| {
            let toks = a.tokenize().tokens;
            let n_rich = toks.iter().filter(|t| rich.contains(t.as_str())).count();
            (n_rich as f64 / toks.len() as f64, field.value(a.location))
        })
        .unzip();
    assert!(pearson_r(&share, &wealth) >= 0.6);
}

#[test]
fn survey_outcomes_follow_field() {
    let spec = RegionSpec::region_a();
    assert_eq!(spec.noise_sd, 0.1);
    let field = WealthField::new(&spec);
    let survey = gen_surveys(&spec, 300).unwrap();
    let truth: Vec<f64> = survey.true_locations.iter().map(|&p| field.value(p)).collect();
    let y: Vec<f64> = survey.points.iter().map(|p| p.outcome).collect();
    assert!(pearson_r2(&y, &truth).unwrap() >= 0.95);
}

#[test]
fn radiance_tracks_outcome_on_lit_points() {
    let spec = RegionSpec::region_b();
    let survey = gen_surveys(&spec, 300).unwrap();
    let images = gen_nightlights(&spec, &survey.points).unwrap();
    let (mean, y): (Vec<f64>, Vec<f64>) = images
        .iter()
        .zip(&survey.points)
        .filter(|(g, _)| g.pixels().iter().any(|&p| p > 0.0))
        .map(|(g, p)| (g.mean(), p.outcome))
        .unzip();
    assert_eq!(mean.len(), 300 - 90);
    assert!(pearson_r(&mean, &y) >= 0.7);
}

#[test]
fn two_topic_vocabulary_is_the_pool_union() {
    let (docs, topics) = two_topic_corpus(50, 80, 1);
    assert_eq!(docs.len(), 100);
    assert_eq!(topics.iter().filter(|&&t| t == 0).count(), 50);
    let pools: BTreeSet<&str> = RICH_WORDS.iter().chain(POOR_WORDS).chain(SHARED_WORDS).copied().collect();
    let vocab = build_vocab(&docs, &EmbedConfig { min_count: 1, ..EmbedConfig::default() }).unwrap();
    let seen: BTreeSet<&str> = vocab.iter().map(|(w, _)| w).collect();
    assert_eq!(seen, pools);
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn identical_documents_end_up_close() {
    let (mut docs, _) = two_topic_corpus(20, 60, 2);
    let twin = TokenizedDoc { id: "twin".into(), tokens: docs[0].tokens.clone() };
    docs.push(twin);
    let cfg = EmbedConfig { dim: 50, epochs: 20, min_count: 1, ..EmbedConfig::default() };
    let model = train_pvdbow(&docs, &build_vocab(&docs, &cfg).unwrap(), &cfg).unwrap();
    let last = docs.len() - 1;
    let pair = cosine(model.doc_vector(0), model.doc_vector(last));
    let others: f64 = (1..last).map(|j| cosine(model.doc_vector(0), model.doc_vector(j))).sum::<f64>() / (last - 1) as f64;
    assert!(pair > others, "twin {pair} vs mean {others}");
}

#[test]
fn distance_block_is_haversine() {
    let spec = RegionSpec { articles: 200, ..RegionSpec::region_a() };
    let articles = gen_corpus(&spec).unwrap();
    let docs: Vec<TokenizedDoc> = articles.iter().map(|a| a.tokenize()).collect();
    let cfg = EmbedConfig { dim: 8, epochs: 1, min_count: 1, ..EmbedConfig::default() };
    let model = train_pvdbow(&docs, &build_vocab(&docs, &cfg).unwrap(), &cfg).unwrap();
    let index = SpatialIndex::build(articles.iter().map(|a| (a.id.clone(), a.location)), Metric::GreatCircle).unwrap();
    let query = GeoPoint { lat: 1.0, lon: 31.0 };
    let fv = build_text_features(query, &index, &model, &FeatureConfig { neighbors: 10, normalize_distances: false }).unwrap();
    assert_eq!(fv.len(), 8 * 10 + 10);
    let mut expected: Vec<f64> = articles.iter().map(|a| haversine_km(query, a.location)).collect();
    expected.sort_by(f64::total_cmp);
    for (got, want) in fv.distances().iter().zip(&expected) {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn cluster_means_of_one_hundred_households() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let households: Vec<Household> = (0..100)
        .map(|i| Household {
            country: "X".into(),
            cluster_id: format!("c{}", i % 10),
            location: GeoPoint { lat: (i % 10) as f64, lon: 0.0 },
            urban: i % 2 == 0,
        })
        .collect();
    let scores: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
    let points = aggregate_clusters(&scores, &households).unwrap();
    assert_eq!(points.len(), 10);
    for (c, p) in points.iter().enumerate() {
        assert_eq!(p.cluster_id, format!("c{c}"));
        let members: Vec<f64> = (0..100).filter(|i| i % 10 == c).map(|i| scores[i]).collect();
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        assert!((p.outcome - mean).abs() < 1e-12);
    }
}

#[test]
fn correlations_match_textbook_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth: Vec<f64> = (0..150).map(|_| rng.random_range(-3.0..3.0)).collect();
    let pred: Vec<f64> = truth.iter().map(|t| t.powi(3) + rng.random_range(-2.0..2.0)).collect();
    let r = pearson_r(&pred, &truth);
    assert!((pearson_r2(&pred, &truth).unwrap() - r * r).abs() < 1e-12);

    // values are distinct, so ranks are plain positions
    let rank = |xs: &[f64]| {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut out = vec![0.0; xs.len()];
        for (pos, &i) in order.iter().enumerate() {
            out[i] = (pos + 1) as f64;
        }
        out
    };
    let rho = pearson_r(&rank(&pred), &rank(&truth));
    assert!((spearman_rho2(&pred, &truth).unwrap() - rho * rho).abs() < 1e-12);

    let hist = rank_difference_histogram(&pred, &truth, 9).unwrap();
    let (rp, rt) = (rank(&pred), rank(&truth));
    let diffs: Vec<f64> = rp.iter().zip(&rt).map(|(a, b)| a - b).collect();
    let mut recount = vec![0usize; hist.centers.len()];
    for d in &diffs {
        let nearest = (0..hist.centers.len()).min_by(|&a, &b| (d - hist.centers[a]).abs().total_cmp(&(d - hist.centers[b]).abs())).unwrap();
        recount[nearest] += 1;
    }
    assert_eq!(hist.centers.len(), 9);
    assert_eq!(hist.counts, recount);
}

#[test]
fn rich_neighbourhoods_sit_near_company_articles() {
    let spec = RegionSpec { articles: 800, surveys: 150, ..RegionSpec::region_a() };
    let region = gen_region(&spec).unwrap();
    let docs: Vec<TokenizedDoc> = region.articles.iter().map(|a| a.tokenize()).collect();
    let cfg = EmbedConfig { dim: 50, epochs: 10, min_count: 1, ..EmbedConfig::default() };
    let model = train_pvdbow(&docs, &build_vocab(&docs, &cfg).unwrap(), &cfg).unwrap();
    let index = SpatialIndex::build(region.articles.iter().map(|a| (a.id.clone(), a.location)), Metric::GreatCircle).unwrap();
    let categories: Vec<(String, Vec<f64>)> = region
        .articles
        .iter()
        .filter(|a| a.category.as_deref() == Some("company"))
        .map(|a| ("company".into(), model.embed_doc(&a.id).unwrap().iter().map(|&x| x as f64).collect()))
        .collect();
    assert!(!categories.is_empty());
    let preds: Vec<f64> = region.survey.points.iter().map(|p| p.outcome).collect();
    let locs: Vec<GeoPoint> = region.survey.points.iter().map(|p| p.location).collect();
    let proj = quantile_embedding_analysis(&preds, &locs, &index, &model, &categories).unwrap();
    let company = proj.centroid("category:company").unwrap();
    let dist = |label: &str| {
        let c = proj.centroid(label).unwrap();
        ((c.0 - company.0).powi(2) + (c.1 - company.1).powi(2)).sqrt()
    };
    assert!(dist("rich") < dist("poor"));
}
