//! Great-circle distances and an exact nearest-neighbour index over article
//! locations.
//!
//! Neighbour search runs on a balanced k-d tree. In the default
//! [`Metric::GreatCircle`] mode the tree is built over unit vectors on the
//! sphere, where straight-line (chord) distance orders points exactly like
//! haversine distance, so axis-aligned pruning stays exact. In
//! [`Metric::DegreesEuclidean`] mode the tree is two-dimensional over
//! `(lat, lon)`. Candidates within a small slack of the k-th best tree
//! distance are re-ranked with the reference metric and ties are broken by
//! article id, which makes results identical to a brute-force scan.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }

    fn unit_vector(&self) -> [f64; 3] {
        let phi = self.lat.to_radians();
        let lambda = self.lon.to_radians();
        let c = libm::cos(phi);
        [c * libm::cos(lambda), c * libm::sin(lambda), libm::sin(phi)]
    }
}

/// Non-negative distance in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GeoDistance(f64);

impl GeoDistance {
    pub fn km(self) -> f64 {
        self.0
    }
}

/// Haversine distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn distance_km(a: GeoPoint, b: GeoPoint) -> GeoDistance {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let s_lat = libm::sin((phi2 - phi1) * 0.5);
    let s_lon = libm::sin((b.lon - a.lon).to_radians() * 0.5);
    let h = s_lat * s_lat + libm::cos(phi1) * libm::cos(phi2) * s_lon * s_lon;
    let h = h.clamp(0.0, 1.0);
    GeoDistance(2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(h)))
}

/// Point reached by travelling `dist_km` from `origin` along the initial
/// bearing `bearing` (radians clockwise from north).
pub fn destination(origin: GeoPoint, bearing: f64, dist_km: f64) -> GeoPoint {
    let delta = dist_km / EARTH_RADIUS_KM;
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let sin_phi2 =
        libm::sin(phi1) * libm::cos(delta) + libm::cos(phi1) * libm::sin(delta) * libm::cos(bearing);
    let phi2 = libm::asin(sin_phi2.clamp(-1.0, 1.0));
    let y = libm::sin(bearing) * libm::sin(delta) * libm::cos(phi1);
    let x = libm::cos(delta) - libm::sin(phi1) * sin_phi2;
    let lambda2 = lambda1 + libm::atan2(y, x);
    let mut lon = lambda2.to_degrees();
    if !(-180.0..=180.0).contains(&lon) {
        lon = libm::fmod(libm::fmod(lon + 180.0, 360.0) + 360.0, 360.0) - 180.0;
    }
    GeoPoint { lat: phi2.to_degrees().clamp(-90.0, 90.0), lon }
}

/// How neighbours are selected. Reported distances are always haversine km.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    GreatCircle,
    DegreesEuclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor<'a> {
    /// Position of the point in the slice passed to [`SpatialIndex::build`].
    pub slot: usize,
    pub id: &'a str,
    pub distance: GeoDistance,
}

#[derive(Debug, Clone)]
enum Tree {
    Sphere(KdTree<3>),
    Plane(KdTree<2>),
}

/// Immutable nearest-neighbour index over `(id, location)` pairs.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    ids: Vec<String>,
    points: Vec<GeoPoint>,
    metric: Metric,
    tree: Tree,
}

impl SpatialIndex {
    pub fn build<I, S>(points: I, metric: Metric) -> Result<Self>
    where
        I: IntoIterator<Item = (S, GeoPoint)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut locs = Vec::new();
        for (id, p) in points {
            if !p.is_valid() {
                return Err(Error::InvalidCoordinate { lat: p.lat, lon: p.lon });
            }
            ids.push(id.into());
            locs.push(p);
        }
        if locs.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let tree = match metric {
            Metric::GreatCircle => {
                Tree::Sphere(KdTree::build(locs.iter().map(|p| p.unit_vector()).collect()))
            }
            Metric::DegreesEuclidean => {
                Tree::Plane(KdTree::build(locs.iter().map(|p| [p.lat, p.lon]).collect()))
            }
        };
        Ok(SpatialIndex { ids, points: locs, metric, tree })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn id(&self, slot: usize) -> &str {
        &self.ids[slot]
    }

    pub fn location(&self, slot: usize) -> GeoPoint {
        self.points[slot]
    }

    /// Selection key under the index metric; smaller is closer.
    fn rank_key(&self, query: GeoPoint, slot: usize) -> f64 {
        let p = self.points[slot];
        match self.metric {
            Metric::GreatCircle => distance_km(query, p).km(),
            Metric::DegreesEuclidean => {
                let (dl, dn) = (p.lat - query.lat, p.lon - query.lon);
                dl * dl + dn * dn
            }
        }
    }

    /// The `n` closest points to `query`, nearest first, ties by id.
    pub fn knn(&self, query: GeoPoint, n: usize) -> Result<Vec<Neighbor<'_>>> {
        if n > self.len() {
            return Err(Error::InsufficientArticles { requested: n, available: self.len() });
        }
        if !query.is_valid() {
            return Err(Error::InvalidCoordinate { lat: query.lat, lon: query.lon });
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let candidates = match &self.tree {
            Tree::Sphere(t) => t.candidates(&query.unit_vector(), n),
            Tree::Plane(t) => t.candidates(&[query.lat, query.lon], n),
        };
        let mut keyed: Vec<(f64, usize)> =
            candidates.into_iter().map(|s| (self.rank_key(query, s), s)).collect();
        keyed.sort_by(|a, b| cmp_key(a.0, b.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1])));
        keyed.truncate(n);
        Ok(keyed
            .into_iter()
            .map(|(_, slot)| Neighbor {
                slot,
                id: &self.ids[slot],
                distance: distance_km(query, self.points[slot]),
            })
            .collect())
    }
}

fn cmp_key(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Relative and absolute slack on squared tree distance when collecting
/// candidates; far larger than rounding error, far smaller than any
/// meaningful separation (1e-20 on the unit sphere is under a millimetre).
const SLACK_REL: f64 = 1e-9;
const SLACK_ABS: f64 = 1e-20;

/// Balanced k-d tree stored implicitly: the subtree for `lo..hi` has its
/// root at `(lo + hi) / 2` and its split axis in `axes[mid]`.
#[derive(Debug, Clone)]
struct KdTree<const D: usize> {
    coords: Vec<[f64; D]>,
    slots: Vec<usize>,
    axes: Vec<u8>,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_key(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

fn sq_dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for k in 0..D {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

impl<const D: usize> KdTree<D> {
    fn build(coords: Vec<[f64; D]>) -> Self {
        let n = coords.len();
        let mut items: Vec<([f64; D], usize)> = coords.into_iter().zip(0..n).collect();
        let mut axes = alloc::vec![0u8; n];
        Self::partition(&mut items, 0, &mut axes);
        let (coords, slots) = items.into_iter().unzip();
        KdTree { coords, slots, axes }
    }

    fn partition(items: &mut [([f64; D], usize)], offset: usize, axes: &mut [u8]) {
        if items.len() <= 1 {
            return;
        }
        let mut axis = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..D {
            let (lo, hi) = items.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), it| {
                (lo.min(it.0[k]), hi.max(it.0[k]))
            });
            if hi - lo > best {
                best = hi - lo;
                axis = k;
            }
        }
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| {
            cmp_key(a.0[axis], b.0[axis]).then(a.1.cmp(&b.1))
        });
        axes[offset + mid] = axis as u8;
        let (left, rest) = items.split_at_mut(mid);
        Self::partition(left, offset, axes);
        Self::partition(&mut rest[1..], offset + mid + 1, axes);
    }

    /// Slots whose squared distance is within slack of the n-th smallest.
    fn candidates(&self, q: &[f64; D], n: usize) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(n + 1);
        self.search(q, n, 0, self.coords.len(), &mut heap);
        let kth = heap.peek().map(|h| h.0).unwrap_or(0.0);
        let bound = kth * (1.0 + SLACK_REL) + SLACK_ABS;
        let mut out = Vec::with_capacity(n);
        self.within(q, bound, 0, self.coords.len(), &mut out);
        out
    }

    fn search(&self, q: &[f64; D], n: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<HeapItem>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let d = sq_dist(q, &self.coords[mid]);
        if heap.len() < n {
            heap.push(HeapItem(d, mid));
        } else if let Some(top) = heap.peek() {
            if d < top.0 {
                heap.pop();
                heap.push(HeapItem(d, mid));
            }
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - self.coords[mid][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, n, near.0, near.1, heap);
        let worst = heap.peek().map(|h| h.0).unwrap_or(f64::INFINITY);
        if heap.len() < n || diff * diff <= worst * (1.0 + SLACK_REL) + SLACK_ABS {
            self.search(q, n, far.0, far.1, heap);
        }
    }

    fn within(&self, q: &[f64; D], bound: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        if sq_dist(q, &self.coords[mid]) <= bound {
            out.push(self.slots[mid]);
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - self.coords[mid][axis];
        if diff < 0.0 || diff * diff <= bound {
            self.within(q, bound, lo, mid, out);
        }
        if diff >= 0.0 || diff * diff <= bound {
            self.within(q, bound, mid + 1, hi, out);
        }
    }
}

/// Uniformly distributed bearing helper used by jitter and synthesis.
pub(crate) fn bearing_from_unit(u: f64) -> f64 {
    2.0 * PI * u
}
