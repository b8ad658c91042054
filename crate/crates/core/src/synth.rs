//! Synthetic regions with a planted wealth signal.
//!
//! A region has a smooth latent field built from Gaussian bumps. Article
//! text mixes a "rich" and a "poor" vocabulary with a weight that grows with
//! the local field, survey outcomes are the standardised field plus noise,
//! and nightlight brightness rises with the field.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{GeoArticle, TokenizedDoc};
use crate::error::{Error, Result};
use crate::features::ImageGrid;
use crate::geo::{distance_km, GeoPoint};
use crate::math::{sigmoid, softplus};
use crate::survey::{apply_jitter, SurveyPoint};

const CORPUS_STREAM: u64 = 1;
const SURVEY_STREAM: u64 = 2;
const IMAGE_STREAM: u64 = 3;
const TOPIC_STREAM: u64 = 4;
/// Grid resolution used to standardise the field.
const STATS_GRID: usize = 64;

pub const RICH_WORDS: &[&str] = &[
    "company", "bank", "university", "hospital", "hotel", "airport", "factory", "stadium", "museum", "office",
    "railway", "highway", "industry", "finance", "technology", "headquarters", "investment", "engineering",
    "insurance", "manufacturing", "shopping", "mall", "embassy", "conference", "exchange", "corporate", "software",
    "clinic", "laboratory", "campus", "telecom", "brewery", "resort", "boulevard", "terminal", "export", "logistics",
    "pharmacy", "library", "theatre",
];

pub const POOR_WORDS: &[&str] = &[
    "village", "farm", "cattle", "well", "hut", "rural", "harvest", "maize", "millet", "goat", "borehole",
    "subsistence", "herding", "sorghum", "cassava", "footpath", "drought", "grazing", "homestead", "thatch", "clay",
    "chief", "clan", "fishing", "canoe", "seasonal", "smallholder", "pasture", "livestock", "firewood", "charcoal",
    "hamlet", "parish", "spring", "dirt", "mud", "barter", "tribal", "nomadic", "plot",
];

pub const SHARED_WORDS: &[&str] = &[
    "river", "district", "road", "people", "region", "population", "church", "school", "located", "area", "known",
    "north", "south", "east", "west", "town", "local", "history", "century", "built", "near", "lake", "hill",
    "census", "council", "community", "language", "market", "water", "land", "county", "main", "first", "named",
    "founded", "part", "along", "between", "capital", "province",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.lat) && (self.lon_min..=self.lon_max).contains(&p.lon)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GeoPoint {
        GeoPoint { lat: rng.random_range(self.lat_min..self.lat_max), lon: rng.random_range(self.lon_min..self.lon_max) }
    }

    fn grid(&self, rows: usize, cols: usize) -> impl Iterator<Item = GeoPoint> + '_ {
        let step = |lo: f64, hi: f64, n: usize, i: usize| if n <= 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        (0..rows).flat_map(move |r| {
            (0..cols).map(move |c| GeoPoint {
                lat: step(self.lat_min, self.lat_max, rows, r),
                lon: step(self.lon_min, self.lon_max, cols, c),
            })
        })
    }
}

/// Gaussian bump `amplitude * exp(-d^2 / (2 scale^2))` with `d` in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: GeoPoint,
    pub amplitude: f64,
    pub scale_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageSpec {
    /// Side length in pixels.
    pub size: usize,
    /// Standard deviation of multiplicative pixel noise.
    pub noise: f64,
    /// Share of the poorest points whose image is entirely dark.
    pub dark_fraction: f64,
    /// Brightness is `softplus(gain * field + offset)`.
    pub gain: f64,
    pub offset: f64,
}

impl Default for ImageSpec {
    fn default() -> Self {
        ImageSpec { size: 16, noise: 0.3, dark_fraction: 0.3, gain: 1.5, offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionSpec {
    pub name: String,
    pub bbox: BoundingBox,
    pub bumps: Vec<Bump>,
    pub articles: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub rich_words: Vec<String>,
    pub poor_words: Vec<String>,
    pub shared_words: Vec<String>,
    /// Share of tokens drawn from the shared pool.
    pub shared_fraction: f64,
    /// Rich-pool weight is `logistic(mixing * standardised field)`.
    pub mixing: f64,
    pub surveys: usize,
    pub noise_sd: f64,
    pub image: ImageSpec,
    pub seed: u64,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec::region_a()
    }
}

impl RegionSpec {
    fn base(name: &str, bbox: BoundingBox, bumps: Vec<Bump>, seed: u64) -> Self {
        RegionSpec {
            name: name.into(),
            bbox,
            bumps,
            articles: 2000,
            min_tokens: 60,
            max_tokens: 120,
            rich_words: words(RICH_WORDS),
            poor_words: words(POOR_WORDS),
            shared_words: words(SHARED_WORDS),
            shared_fraction: 0.4,
            mixing: 2.0,
            surveys: 300,
            noise_sd: 0.1,
            image: ImageSpec::default(),
            seed,
        }
    }

    pub fn region_a() -> Self {
        let bump = |lat, lon, amplitude, scale_km| Bump { center: GeoPoint { lat, lon }, amplitude, scale_km };
        Self::base(
            "RegionA",
            BoundingBox { lat_min: 0.0, lat_max: 2.0, lon_min: 30.0, lon_max: 32.0 },
            alloc::vec![
                bump(0.5, 30.5, 2.0, 45.0),
                bump(1.5, 31.4, 1.5, 60.0),
                bump(1.0, 31.0, -1.2, 35.0),
                bump(0.3, 31.7, -1.0, 50.0),
                bump(1.8, 30.3, 1.0, 40.0),
            ],
            11,
        )
    }

    pub fn region_b() -> Self {
        let bump = |lat, lon, amplitude, scale_km| Bump { center: GeoPoint { lat, lon }, amplitude, scale_km };
        Self::base(
            "RegionB",
            BoundingBox { lat_min: -3.0, lat_max: -1.0, lon_min: 35.0, lon_max: 37.0 },
            alloc::vec![
                bump(-2.5, 36.5, 1.8, 55.0),
                bump(-1.4, 35.5, 1.4, 45.0),
                bump(-2.0, 35.3, -1.5, 40.0),
                bump(-1.5, 36.6, -0.8, 60.0),
                bump(-2.8, 35.6, 0.9, 35.0),
            ],
            23,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(alloc::format!("{}: {m}", self.name)));
        if self.articles == 0 {
            return bad("article density is zero");
        }
        let b = &self.bbox;
        let corners = [GeoPoint { lat: b.lat_min, lon: b.lon_min }, GeoPoint { lat: b.lat_max, lon: b.lon_max }];
        if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max) || corners.iter().any(|c| !c.is_valid()) {
            return bad("bounding box is empty or out of range");
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token length range is empty");
        }
        if self.rich_words.is_empty() || self.poor_words.is_empty() {
            return bad("topic pools must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) || (self.shared_fraction > 0.0 && self.shared_words.is_empty()) {
            return bad("shared fraction must lie in [0, 1] with a non-empty pool");
        }
        let mut all: Vec<&String> = self.rich_words.iter().chain(&self.poor_words).chain(&self.shared_words).collect();
        let n = all.len();
        all.sort();
        all.dedup();
        if all.len() != n {
            return bad("word pools overlap");
        }
        if self.bumps.iter().any(|k| !(k.scale_km > 0.0) || !k.amplitude.is_finite()) {
            return bad("bumps need a positive scale");
        }
        if !(self.noise_sd >= 0.0) || !(0.0..=1.0).contains(&self.image.dark_fraction) || self.image.size == 0 {
            return bad("noise, dark fraction or image size out of range");
        }
        Ok(())
    }
}

/// The latent field of a region, standardised over a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthField {
    bumps: Vec<Bump>,
    mean: f64,
    sd: f64,
}

impl WealthField {
    pub fn new(spec: &RegionSpec) -> Self {
        let mut field = WealthField { bumps: spec.bumps.clone(), mean: 0.0, sd: 1.0 };
        let raw: Vec<f64> = spec.bbox.grid(STATS_GRID, STATS_GRID).map(|p| field.raw(p)).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let var = raw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / raw.len() as f64;
        field.mean = mean;
        field.sd = if var > 0.0 { libm::sqrt(var) } else { 1.0 };
        field
    }

    pub fn raw(&self, p: GeoPoint) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let d = distance_km(p, b.center).km();
                b.amplitude * libm::exp(-d * d / (2.0 * b.scale_km * b.scale_km))
            })
            .sum()
    }

    /// Field value scaled to zero mean and unit variance over the region.
    pub fn value(&self, p: GeoPoint) -> f64 {
        (self.raw(p) - self.mean) / self.sd
    }
}

/// Rich-pool weight of an article at standardised field value `w`.
pub fn rich_weight(spec: &RegionSpec, w: f64) -> f64 {
    sigmoid(spec.mixing * w)
}

pub fn category_for(rich_weight: f64) -> Option<&'static str> {
    if rich_weight > 0.7 {
        Some("company")
    } else if rich_weight < 0.3 {
        Some("settlement")
    } else {
        None
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, pool: &'a [String]) -> &'a str {
    &pool[rng.random_range(0..pool.len())]
}

/// Text of one article at standardised field value `w`.
fn article_body<R: Rng + ?Sized>(spec: &RegionSpec, w: f64, rng: &mut R) -> String {
    let q = rich_weight(spec, w);
    let len = rng.random_range(spec.min_tokens..=spec.max_tokens);
    let mut body = String::new();
    for t in 0..len {
        let word = if rng.random::<f64>() < spec.shared_fraction {
            pick(rng, &spec.shared_words)
        } else if rng.random::<f64>() < q {
            pick(rng, &spec.rich_words)
        } else {
            pick(rng, &spec.poor_words)
        };
        if t > 0 {
            body.push(if t % 12 == 0 { '.' } else { ' ' });
            if t % 12 == 0 {
                body.push(' ');
            }
        }
        body.push_str(word);
    }
    body.push('.');
    body
}

pub fn gen_corpus(spec: &RegionSpec) -> Result<Vec<GeoArticle>> {
    spec.validate()?;
    let field = WealthField::new(spec);
    let mut rng = rng_for(spec.seed, CORPUS_STREAM);
    let width = digits(spec.articles);
    let mut out = Vec::with_capacity(spec.articles);
    for i in 0..spec.articles {
        let location = spec.bbox.sample(&mut rng);
        let w = field.value(location);
        let body = article_body(spec, w, &mut rng);
        out.push(GeoArticle {
            id: alloc::format!("{}-{:0width$}", spec.name, i),
            title: alloc::format!("{} article {}", spec.name, i),
            location,
            body,
            category: category_for(rich_weight(spec, w)).map(String::from),
        });
    }
    Ok(out)
}

fn digits(n: usize) -> usize {
    let mut d = 1;
    let mut m = n.max(1) - 1;
    while m >= 10 {
        m /= 10;
        d += 1;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSurvey {
    /// Reported (jittered) points.
    pub points: Vec<SurveyPoint>,
    /// Locations before jitter, aligned with `points`.
    pub true_locations: Vec<GeoPoint>,
}

pub fn gen_surveys(spec: &RegionSpec, count: usize) -> Result<SyntheticSurvey> {
    spec.validate()?;
    let field = WealthField::new(spec);
    let mut rng = rng_for(spec.seed, SURVEY_STREAM);
    let locs: Vec<GeoPoint> = (0..count).map(|_| spec.bbox.sample(&mut rng)).collect();
    let values: Vec<f64> = locs.iter().map(|&p| field.value(p)).collect();
    let median = median(&values);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let width = digits(count);
    let mut points = Vec::with_capacity(count);
    for (i, (&loc, &w)) in locs.iter().zip(&values).enumerate() {
        let y = if spec.noise_sd > 0.0 { w + noise.sample(&mut rng) } else { w };
        let exact = SurveyPoint {
            cluster_id: alloc::format!("{:0width$}", i),
            country: spec.name.clone(),
            location: loc,
            outcome: y,
            urban: w > median,
        };
        points.push(apply_jitter(&exact, &mut rng));
    }
    Ok(SyntheticSurvey { points, true_locations: locs })
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Noise-free brightness at standardised field value `w`.
pub fn radiance_level(spec: &ImageSpec, w: f64) -> f64 {
    softplus(spec.gain * w + spec.offset)
}

/// One image per point, centred on the point's reported location.
pub fn gen_nightlights(spec: &RegionSpec, points: &[SurveyPoint]) -> Result<Vec<ImageGrid>> {
    spec.validate()?;
    let field = WealthField::new(spec);
    let img = &spec.image;
    let values: Vec<f64> = points.iter().map(|p| field.value(p.location)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let dark_count = libm::floor(img.dark_fraction * points.len() as f64 + 1e-9) as usize;
    let mut dark = alloc::vec![false; points.len()];
    for &i in &order[..dark_count] {
        dark[i] = true;
    }
    let mut rng = rng_for(spec.seed, IMAGE_STREAM);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = img.size;
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if dark[i] {
                return Ok(ImageGrid::zeros(n, n, p.location));
            }
            let level = radiance_level(img, values[i]);
            let pixels = (0..n * n)
                .map(|_| {
                    let v = if img.noise > 0.0 { level * (1.0 + img.noise * normal.sample(&mut rng)) } else { level };
                    v.max(0.0) as f32
                })
                .collect();
            ImageGrid::new(n, n, p.location, pixels)
        })
        .collect()
}

/// Standardised field sampled on a `rows × cols` grid over the box.
pub fn field_grid(spec: &RegionSpec, rows: usize, cols: usize) -> Vec<(GeoPoint, f64)> {
    let field = WealthField::new(spec);
    spec.bbox.grid(rows, cols).map(|p| (p, field.value(p))).collect()
}

/// Everything generated for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRegion {
    pub spec: RegionSpec,
    pub articles: Vec<GeoArticle>,
    pub survey: SyntheticSurvey,
    pub images: Vec<ImageGrid>,
}

pub fn gen_region(spec: &RegionSpec) -> Result<SyntheticRegion> {
    let articles = gen_corpus(spec)?;
    let survey = gen_surveys(spec, spec.surveys)?;
    let images = gen_nightlights(spec, &survey.points)?;
    Ok(SyntheticRegion { spec: spec.clone(), articles, survey, images })
}

/// Documents drawn from two disjoint topic vocabularies plus a shared one.
/// Returns the documents and each one's topic (0 or 1).
pub fn two_topic_corpus(docs_per_topic: usize, tokens: usize, seed: u64) -> (Vec<TokenizedDoc>, Vec<usize>) {
    let mut rng = rng_for(seed, TOPIC_STREAM);
    let pools = [RICH_WORDS, POOR_WORDS];
    let mut docs = Vec::new();
    let mut topics = Vec::new();
    for i in 0..2 * docs_per_topic {
        let topic = i % 2;
        let toks = (0..tokens)
            .map(|_| {
                let pool = if rng.random::<f64>() < 0.3 { SHARED_WORDS } else { pools[topic] };
                String::from(pool[rng.random_range(0..pool.len())])
            })
            .collect();
        docs.push(TokenizedDoc { id: alloc::format!("topic{topic}-{i:04}"), tokens: toks });
        topics.push(topic);
    }
    (docs, topics)
}
