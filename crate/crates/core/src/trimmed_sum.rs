//! The trimmed sum of a gradient batch and its local sensitivity.
//!
//! `TSUM_F` adds up all but the `F` largest-norm vectors. After `r`
//! adversarial edits its local sensitivity is the norm of the
//! `(m - F + 1 + r)`-th smallest vector while `r < F`, and the global
//! sensitivity (the clip bound) afterwards, so the safety margin is found by
//! a scan over at most `F` order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{PtrError, Result};
use crate::ptr::{SafetyMargin, SensitivityOracle};

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` by `min(1, bound / ||v||)`.
pub fn clip(v: &[f64], bound: f64) -> Vec<f64> {
    let norm = l2_norm(v);
    if norm <= bound {
        v.to_vec()
    } else {
        let c = bound / norm;
        v.iter().map(|x| x * c).collect()
    }
}

/// Gradient vectors of one dimension, each with norm at most `clip_bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBatch {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    clip_bound: f64,
}

impl GradientBatch {
    /// Clips every vector to `clip_bound`.
    pub fn clipped(vectors: Vec<Vec<f64>>, dim: usize, clip_bound: f64) -> Result<Self> {
        check_bound(clip_bound)?;
        let vectors = vectors.iter().map(|v| clip(v, clip_bound)).collect();
        Self::checked(vectors, dim, clip_bound)
    }

    /// Accepts vectors already within the clip bound.
    pub fn new(vectors: Vec<Vec<f64>>, dim: usize, clip_bound: f64) -> Result<Self> {
        check_bound(clip_bound)?;
        if let Some(v) = vectors.iter().find(|v| l2_norm(v) > clip_bound * (1.0 + 1e-12)) {
            return Err(PtrError::param(
                "vectors",
                format!("norm {} exceeds the clip bound {clip_bound}", l2_norm(v)),
            ));
        }
        Self::checked(vectors, dim, clip_bound)
    }

    fn checked(vectors: Vec<Vec<f64>>, dim: usize, clip_bound: f64) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(PtrError::param(
                "vectors",
                format!("expected dimension {dim}, got {}", v.len()),
            ));
        }
        Ok(Self {
            vectors,
            dim,
            clip_bound,
        })
    }

    /// One-dimensional batch from scalars.
    pub fn from_scalars(values: &[f64], clip_bound: f64) -> Result<Self> {
        Self::new(values.iter().map(|&x| vec![x]).collect(), 1, clip_bound)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    /// Indices ordered by increasing norm, ties kept in insertion order.
    pub fn norm_order(&self) -> Vec<usize> {
        let norms: Vec<f64> = self.vectors.iter().map(|v| l2_norm(v)).collect();
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
        idx
    }

    /// Norms sorted increasingly.
    pub fn sorted_norms(&self) -> Vec<f64> {
        let mut norms: Vec<f64> = self.vectors.iter().map(|v| l2_norm(v)).collect();
        norms.sort_by(f64::total_cmp);
        norms
    }

    pub fn sum(&self) -> Vec<f64> {
        sum_of(self.dim, self.vectors.iter())
    }
}

fn check_bound(bound: f64) -> Result<()> {
    if bound > 0.0 && bound.is_finite() {
        Ok(())
    } else {
        Err(PtrError::param("clip_bound", format!("must be positive, got {bound}")))
    }
}

fn sum_of<'a>(dim: usize, vectors: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out
}

/// Trim count, proposed sensitivity bound, and global sensitivity of the
/// trimmed sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub trim: usize,
    pub tau: f64,
    pub gs: f64,
}

impl SensitivityProfile {
    pub fn new(trim: usize, tau: f64, gs: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(PtrError::param("tau", format!("must be positive, got {tau}")));
        }
        check_bound(gs)?;
        Ok(Self { trim, tau, gs })
    }
}

/// Sum of the `m - trim` smallest-norm vectors; zero when `m <= trim`.
pub fn tsum(batch: &GradientBatch, trim: usize) -> Vec<f64> {
    let keep = batch.len().saturating_sub(trim);
    let order = batch.norm_order();
    sum_of(batch.dim(), order[..keep].iter().map(|&i| &batch.vectors[i]))
}

/// Local sensitivity of `TSUM_F` after `r` edits, from the sorted norms.
fn local_sensitivity_sorted(norms: &[f64], trim: usize, gs: f64, r: usize) -> f64 {
    if trim == 0 || r > trim - 1 {
        return gs;
    }
    let m = norms.len();
    // 1-based index m - F + 1 + r; below 1 every edited dataset still has at
    // most F points, so the trimmed sum stays zero
    let index = m + 1 + r;
    if index <= trim {
        return 0.0;
    }
    match norms.get(index - trim - 1) {
        Some(&norm) => norm,
        None => gs,
    }
}

pub fn local_sensitivity_r(batch: &GradientBatch, profile: &SensitivityProfile, r: usize) -> f64 {
    local_sensitivity_sorted(&batch.sorted_norms(), profile.trim, profile.gs, r)
}

/// Local sensitivities `LS^(0), ..., LS^(F)`.
pub fn local_sensitivity_profile(batch: &GradientBatch, profile: &SensitivityProfile) -> Vec<f64> {
    let norms = batch.sorted_norms();
    (0..=profile.trim)
        .map(|r| local_sensitivity_sorted(&norms, profile.trim, profile.gs, r))
        .collect()
}

/// Smallest `r` with `LS^(r) > tau`; infinite when `tau >= gs`.
pub fn safety_margin(batch: &GradientBatch, profile: &SensitivityProfile) -> SafetyMargin {
    margin_from_sorted(&batch.sorted_norms(), profile)
}

fn margin_from_sorted(norms: &[f64], profile: &SensitivityProfile) -> SafetyMargin {
    if profile.tau >= profile.gs {
        return SafetyMargin::Infinite;
    }
    let r = (0..profile.trim)
        .find(|&r| local_sensitivity_sorted(norms, profile.trim, profile.gs, r) > profile.tau)
        .unwrap_or(profile.trim);
    SafetyMargin::Finite(r as u64)
}

/// PTR oracle for sum vs. trimmed sum over clipped vectors. Inputs are
/// clipped on the fly, so the global sensitivity of both statistics is the
/// clip bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimmedSumOracle {
    pub clip_bound: f64,
    pub trim: usize,
}

impl TrimmedSumOracle {
    fn batch(&self, data: &[Vec<f64>]) -> GradientBatch {
        let dim = data.first().map_or(1, Vec::len);
        GradientBatch::clipped(data.to_vec(), dim, self.clip_bound).expect("oracle inputs share one dimension")
    }
}

impl SensitivityOracle<Vec<f64>> for TrimmedSumOracle {
    fn target(&self, data: &[Vec<f64>]) -> Vec<f64> {
        self.batch(data).sum()
    }

    fn robust(&self, data: &[Vec<f64>]) -> Vec<f64> {
        tsum(&self.batch(data), self.trim)
    }

    fn safety_margin(&self, data: &[Vec<f64>], tau: f64) -> SafetyMargin {
        let profile = SensitivityProfile {
            trim: self.trim,
            tau,
            gs: self.clip_bound,
        };
        safety_margin(&self.batch(data), &profile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five() -> GradientBatch {
        GradientBatch::from_scalars(&[1.0, 2.0, 3.0, 4.0, 5.0], 10.0).unwrap()
    }

    #[test]
    fn clipping() {
        assert_eq!(clip(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        let c = clip(&[4.0, 0.0], 1.0);
        assert_eq!(c, vec![1.0, 0.0]);
        assert_eq!(clip(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
        let v = [3.0, -4.0, 12.0];
        assert_eq!(clip(&clip(&v, 2.0), 2.0), clip(&v, 2.0));
    }

    #[test]
    fn batch_validation() {
        assert!(GradientBatch::new(vec![vec![2.0]], 1, 1.0).is_err());
        assert!(GradientBatch::new(vec![vec![0.5, 0.1]], 1, 1.0).is_err());
        assert!(GradientBatch::new(vec![vec![0.5]], 1, 0.0).is_err());
    }

    #[test]
    fn trimmed_sums() {
        assert_eq!(tsum(&five(), 2), vec![6.0]);
        assert_eq!(tsum(&five(), 0), vec![15.0]);
        let three = GradientBatch::from_scalars(&[1.0, 2.0, 3.0], 10.0).unwrap();
        assert_eq!(tsum(&three, 5), vec![0.0]);
        // signs do not matter for the norm order
        let signed = GradientBatch::from_scalars(&[-5.0, 1.0, -2.0], 10.0).unwrap();
        assert_eq!(tsum(&signed, 1), vec![-1.0]);
    }

    #[test]
    fn ties_keep_insertion_order() {
        let b = GradientBatch::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], 2, 1.0).unwrap();
        assert_eq!(b.norm_order(), vec![0, 1, 2]);
        assert_eq!(tsum(&b, 1), vec![1.0, 1.0]);
    }

    #[test]
    fn local_sensitivity_examples() {
        let p = SensitivityProfile::new(2, 4.5, 10.0).unwrap();
        assert_eq!(local_sensitivity_r(&five(), &p, 0), 4.0);
        assert_eq!(local_sensitivity_r(&five(), &p, 1), 5.0);
        assert_eq!(local_sensitivity_r(&five(), &p, 2), 10.0);
        assert_eq!(local_sensitivity_profile(&five(), &p), vec![4.0, 5.0, 10.0]);
    }

    #[test]
    fn safety_margin_examples() {
        let margin = |tau| safety_margin(&five(), &SensitivityProfile::new(2, tau, 10.0).unwrap());
        assert_eq!(margin(4.5), SafetyMargin::Finite(1));
        assert_eq!(margin(3.0), SafetyMargin::Finite(0));
        assert_eq!(margin(7.0), SafetyMargin::Finite(2));
        assert_eq!(margin(10.0), SafetyMargin::Infinite);
        let no_trim = SensitivityProfile::new(0, 4.5, 10.0).unwrap();
        assert_eq!(safety_margin(&five(), &no_trim), SafetyMargin::Finite(0));
    }

    #[test]
    fn tiny_batches_have_zero_sensitivity_until_enough_points() {
        let b = GradientBatch::from_scalars(&[0.5], 1.0).unwrap();
        let p = SensitivityProfile::new(3, 0.2, 1.0).unwrap();
        // m = 1, F = 3: after one edit plus the probing edit there are at
        // most 3 points, all trimmed
        assert_eq!(local_sensitivity_profile(&b, &p), vec![0.0, 0.0, 0.5, 1.0]);
        assert_eq!(safety_margin(&b, &p), SafetyMargin::Finite(2));
    }

    #[test]
    fn oracle_clips() {
        let o = TrimmedSumOracle { clip_bound: 1.0, trim: 1 };
        let data = vec![vec![3.0], vec![0.5], vec![0.25]];
        assert_eq!(o.target(&data), vec![1.75]);
        assert_eq!(o.robust(&data), vec![0.75]);
        assert_eq!(o.safety_margin(&data, 0.6), SafetyMargin::Finite(0));
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut values in prop::collection::vec(-1.0f64..1.0, 0..12), trim in 0usize..5, seed in any::<u64>()) {
            let before = tsum(&GradientBatch::from_scalars(&values, 1.0).unwrap(), trim);
            let n = values.len();
            if n > 1 {
                values.swap((seed as usize) % n, (seed as usize / 7) % n);
            }
            let after = tsum(&GradientBatch::from_scalars(&values, 1.0).unwrap(), trim);
            prop_assert!((before[0] - after[0]).abs() < 1e-12);
        }

        #[test]
        fn margin_is_bounded_by_trim(values in prop::collection::vec(0.0f64..1.0, 0..12), trim in 0usize..5, tau in 0.01f64..0.99) {
            let b = GradientBatch::from_scalars(&values, 1.0).unwrap();
            let m = safety_margin(&b, &SensitivityProfile::new(trim, tau, 1.0).unwrap());
            prop_assert!(m <= SafetyMargin::Finite(trim as u64));
        }

        #[test]
        fn sensitivity_profile_nondecreasing(values in prop::collection::vec(0.0f64..1.0, 0..12), trim in 0usize..5) {
            let b = GradientBatch::from_scalars(&values, 1.0).unwrap();
            let ls = local_sensitivity_profile(&b, &SensitivityProfile::new(trim, 0.5, 1.0).unwrap());
            prop_assert!(ls.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
