//! Principal components by power iteration with deflation on the sample
//! covariance matrix.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub mean: Vec<f64>,
    /// Unit-norm principal directions, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaFit {
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }
}

/// Sample covariance (denominator `n - 1`) of the rows.
pub fn covariance<V: AsRef<[f64]>>(vectors: &[V]) -> (Vec<f64>, Vec<f64>) {
    let n = vectors.len();
    let d = vectors[0].as_ref().len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.as_ref()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    let mut centred = vec![0.0; d];
    for v in vectors {
        for (c, (x, m)) in centred.iter_mut().zip(v.as_ref().iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centred[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * d..(i + 1) * d];
            for j in i..d {
                row[j] += ci * centred[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (mean, cov)
}

/// Top `k` eigenpairs of a symmetric positive semi-definite `d × d` matrix.
pub fn top_eigenpairs(matrix: &[f64], d: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut deflated = matrix.to_vec();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthonormalise(&mut v, &vectors);
        let mut next = vec![0.0; d];
        for _ in 0..POWER_MAX_ITERS {
            for (i, out) in next.iter_mut().enumerate() {
                *out = deflated[i * d..(i + 1) * d].iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            if !orthonormalise(&mut next, &vectors) {
                break;
            }
            let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
            core::mem::swap(&mut v, &mut next);
            if libm::sqrt(change) < POWER_TOLERANCE {
                break;
            }
        }
        let lambda = rayleigh(matrix, d, &v).max(0.0);
        for i in 0..d {
            for j in 0..d {
                deflated[i * d + j] -= lambda * v[i] * v[j];
            }
        }
        vectors.push(v);
        values.push(lambda);
    }
    // near-degenerate spectra can leave estimates slightly out of order
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(core::cmp::Ordering::Equal));
    let vectors = order.iter().map(|&i| vectors[i].clone()).collect();
    let values = order.iter().map(|&i| values[i]).collect();
    (vectors, values)
}

fn rayleigh(matrix: &[f64], d: usize, v: &[f64]) -> f64 {
    (0..d)
        .map(|i| v[i] * matrix[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Gram-Schmidt against `basis` then normalise. Returns `false` if nothing
/// is left, in which case `v` is replaced by some unit vector orthogonal to
/// the basis.
fn orthonormalise(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    for _ in 0..2 {
        for b in basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
    }
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if n > 1e-300 && n.is_finite() {
        for x in v.iter_mut() {
            *x /= n;
        }
        return true;
    }
    for axis in 0..v.len() {
        for (i, x) in v.iter_mut().enumerate() {
            *x = if i == axis { 1.0 } else { 0.0 };
        }
        for b in basis {
            let p = b[axis];
            for (x, y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-6 {
            for x in v.iter_mut() {
                *x /= n;
            }
            return false;
        }
    }
    false
}

/// Fits the top `k` principal components of `vectors`.
pub fn pca_fit<V: AsRef<[f64]>>(vectors: &[V], k: usize) -> Result<PcaFit> {
    if vectors.len() < k + 1 || vectors.len() < 2 {
        return Err(Error::TooFewPoints { needed: (k + 1).max(2), got: vectors.len() });
    }
    let d = vectors[0].as_ref().len();
    if k > d {
        return Err(Error::InvalidConfig(alloc::format!("k = {k} exceeds dimension {d}")));
    }
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.as_ref().len() });
    }
    let (mean, cov) = covariance(vectors);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if !(trace > 0.0) {
        return Err(Error::DegeneratePca);
    }
    let (components, explained_variance) = top_eigenpairs(&cov, d, k);
    Ok(PcaFit { mean, components, explained_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::cosine;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn line_in_three_dimensions() {
        let dir = [1.0, -2.0, 0.5];
        let pts: Vec<Vec<f64>> = (0..20).map(|t| dir.iter().map(|d| d * t as f64 + 3.0).collect()).collect();
        let fit = pca_fit(&pts, 1).unwrap();
        assert!(cosine(&fit.components[0], &dir).abs() > 0.999);
    }

    #[test]
    fn isotropic_sample_has_similar_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<Vec<f64>> =
            (0..4000).map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let fit = pca_fit(&pts, 3).unwrap();
        let (hi, lo) = (fit.explained_variance[0], fit.explained_variance[2]);
        assert!(hi / lo < 1.2, "{:?}", fit.explained_variance);
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..7).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect();
        let fit = pca_fit(&pts, 5).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                let d: f64 = fit.components[a].iter().zip(&fit.components[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8);
            }
        }
        assert!(fit.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_deficient_input_still_orthonormal() {
        let pts: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64, 2.0 * t as f64, 0.0]).collect();
        let fit = pca_fit(&pts, 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = fit.components[a].iter().zip(&fit.components[b]).map(|(x, y)| x * y).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
        assert!(fit.explained_variance[1].abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let same = vec![vec![1.0, 2.0]; 5];
        assert_eq!(pca_fit(&same, 1).unwrap_err(), Error::DegeneratePca);
        assert!(matches!(pca_fit(&[vec![1.0, 2.0]], 1), Err(Error::TooFewPoints { .. })));
    }
}
