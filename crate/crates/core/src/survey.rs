//! Survey ground truth: points, the asset wealth index, cluster means,
//! coordinate jitter and the education loader.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{bearing_from_unit, destination, GeoPoint};
use crate::pca::top_eigenpairs;

pub const URBAN_JITTER_KM: f64 = 2.0;
pub const RURAL_JITTER_KM: f64 = 5.0;
/// Half-width of the rescaled wealth index.
pub const AWI_BOUND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPoint {
    pub cluster_id: String,
    pub country: String,
    pub location: GeoPoint,
    pub outcome: f64,
    pub urban: bool,
}

impl SurveyPoint {
    pub fn validate(&self) -> Result<()> {
        if !self.location.is_valid() {
            return Err(Error::InvalidCoordinate { lat: self.location.lat, lon: self.location.lon });
        }
        if !self.outcome.is_finite() {
            return Err(Error::InvalidMatrix(alloc::format!("non-finite outcome at cluster {}", self.cluster_id)));
        }
        Ok(())
    }
}

/// Household metadata carried alongside each asset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub country: String,
    pub cluster_id: String,
    pub location: GeoPoint,
    pub urban: bool,
}

/// Households × asset responses, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetMatrix {
    households: Vec<Household>,
    values: Vec<f64>,
    cols: usize,
}

impl AssetMatrix {
    pub fn new(households: Vec<Household>, values: Vec<f64>, cols: usize) -> Result<Self> {
        if values.len() != households.len() * cols {
            return Err(Error::LengthMismatch { left: values.len(), right: households.len() * cols });
        }
        if households.len() < 2 {
            return Err(Error::TooFewRows { rows: households.len() });
        }
        if cols < 2 {
            return Err(Error::TooFewColumns { usable: cols });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(String::from("non-finite cell")));
        }
        Ok(Self { households, values, cols })
    }

    pub fn rows(&self) -> usize {
        self.households.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn households(&self) -> &[Household] {
        &self.households
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Stacks matrices from several countries for a pooled index.
    pub fn pool(parts: &[AssetMatrix]) -> Result<Self> {
        let cols = parts.first().map_or(0, |p| p.cols);
        let mut households = Vec::new();
        let mut values = Vec::new();
        for p in parts {
            if p.cols != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: p.cols });
            }
            households.extend_from_slice(&p.households);
            values.extend_from_slice(&p.values);
        }
        Self::new(households, values, cols)
    }
}

/// Asset wealth index of every household, in row order.
///
/// Columns are standardised (population variance) and constant ones dropped;
/// the score is the first principal component, oriented so its largest
/// loading is positive, then min-max mapped onto `[-2, 2]`. When every
/// household projects to the same value all scores are 0.
pub fn compute_awi(pooled: &AssetMatrix) -> Result<Vec<f64>> {
    let n = pooled.rows();
    let mut kept: Vec<(usize, f64, f64)> = Vec::new();
    for c in 0..pooled.cols {
        let mean = (0..n).map(|r| pooled.row(r)[c]).sum::<f64>() / n as f64;
        let var = (0..n).map(|r| (pooled.row(r)[c] - mean) * (pooled.row(r)[c] - mean)).sum::<f64>() / n as f64;
        let sd = libm::sqrt(var);
        if sd > 1e-12 * (1.0 + mean.abs()) {
            kept.push((c, mean, sd));
        }
    }
    if kept.len() < 2 {
        return Err(Error::TooFewColumns { usable: kept.len() });
    }
    let d = kept.len();
    let z: Vec<f64> = (0..n)
        .flat_map(|r| kept.iter().map(move |&(c, m, s)| (pooled.row(r)[c] - m) / s))
        .collect();
    let mut cov = alloc::vec![0.0; d * d];
    for r in 0..n {
        let row = &z[r * d..(r + 1) * d];
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= (n - 1) as f64;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let (mut comps, _) = top_eigenpairs(&cov, d, 1);
    let mut pc = comps.swap_remove(0);
    let lead = pc.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if lead < 0.0 {
        pc.iter_mut().for_each(|x| *x = -*x);
    }
    let raw: Vec<f64> = (0..n).map(|r| z[r * d..(r + 1) * d].iter().zip(&pc).map(|(a, b)| a * b).sum()).collect();
    Ok(rescale(&raw))
}

/// Min-max map onto `[-AWI_BOUND, AWI_BOUND]`.
pub fn rescale(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12 * (1.0 + hi.abs().max(lo.abs()))) {
        return alloc::vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|x| (-AWI_BOUND + 2.0 * AWI_BOUND * (x - lo) / range).clamp(-AWI_BOUND, AWI_BOUND))
        .collect()
}

/// One point per distinct `(country, cluster_id)`, in order of first
/// appearance, carrying the mean household score.
pub fn aggregate_clusters(scores: &[f64], households: &[Household]) -> Result<Vec<SurveyPoint>> {
    if scores.len() != households.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: households.len() });
    }
    let mut order: Vec<(usize, f64, usize)> = Vec::new();
    let mut lookup = alloc::collections::BTreeMap::<(&str, &str), usize>::new();
    for (i, (s, h)) in scores.iter().zip(households).enumerate() {
        let slot = *lookup.entry((h.country.as_str(), h.cluster_id.as_str())).or_insert_with(|| {
            order.push((i, 0.0, 0));
            order.len() - 1
        });
        order[slot].1 += s;
        order[slot].2 += 1;
    }
    Ok(order
        .into_iter()
        .map(|(first, sum, count)| {
            let h = &households[first];
            SurveyPoint {
                cluster_id: h.cluster_id.clone(),
                country: h.country.clone(),
                location: h.location,
                outcome: sum / count as f64,
                urban: h.urban,
            }
        })
        .collect())
}

pub fn jitter_radius_km(urban: bool) -> f64 {
    if urban {
        URBAN_JITTER_KM
    } else {
        RURAL_JITTER_KM
    }
}

/// Displacement with explicit uniform draws in `[0, 1)`: `radius_u` sets the
/// distance `R * sqrt(radius_u)`, `angle_u` the bearing.
pub fn jitter_with(point: &SurveyPoint, radius_u: f64, angle_u: f64) -> SurveyPoint {
    let dist = jitter_radius_km(point.urban) * libm::sqrt(radius_u);
    let mut out = point.clone();
    out.location = destination(point.location, bearing_from_unit(angle_u), dist);
    out
}

/// Moves the point uniformly within the privacy disk. The outcome is kept.
pub fn apply_jitter<R: Rng + ?Sized>(point: &SurveyPoint, rng: &mut R) -> SurveyPoint {
    let radius_u: f64 = rng.random();
    let angle_u: f64 = rng.random();
    jitter_with(point, radius_u, angle_u)
}

/// Raw education record before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EducationRecord {
    pub country: String,
    pub cluster_id: String,
    pub location: GeoPoint,
    pub urban: bool,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EducationLoad {
    pub points: Vec<SurveyPoint>,
    pub rejected: usize,
    /// Valid records dropped because their country was already at the cap.
    pub capped: usize,
}

/// Keeps records whose level lies in `[1, 4]`, at most `cap` per country in
/// input order.
pub fn load_education<I>(records: I, cap: Option<usize>) -> EducationLoad
where
    I: IntoIterator<Item = EducationRecord>,
{
    let mut out = EducationLoad::default();
    let mut per_country = alloc::collections::BTreeMap::<String, usize>::new();
    for r in records {
        if !(1.0..=4.0).contains(&r.level) || !r.location.is_valid() {
            out.rejected += 1;
            continue;
        }
        let seen = per_country.entry(r.country.clone()).or_insert(0);
        if cap.is_some_and(|c| *seen >= c) {
            out.capped += 1;
            continue;
        }
        *seen += 1;
        out.points.push(SurveyPoint {
            cluster_id: r.cluster_id,
            country: r.country,
            location: r.location,
            outcome: r.level,
            urban: r.urban,
        });
    }
    out
}
