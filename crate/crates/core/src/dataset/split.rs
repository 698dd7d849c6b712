//! Stratified training split over (lesion, severity) strata.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cascade::CaseLabel;

use super::{DatasetError, RoiId, RoiImage};

/// Training and evaluation membership. The evaluation set is every ROI, so it
/// contains the training set; held-out cases are `eval_ids` minus `train_ids`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_ids: Vec<RoiId>,
    pub eval_ids: Vec<RoiId>,
    /// Positions of the training ROIs in the input collection, ascending.
    pub train_indices: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn is_train(&self, index: usize) -> bool {
        self.train_indices.binary_search(&index).is_ok()
    }
}

/// Stratum sizes allotted to a sample of `n_train`: one per stratum, the rest
/// by largest remainder in proportion to what each stratum has left.
pub(crate) fn stratum_quotas(sizes: &[usize], n_train: usize) -> Vec<usize> {
    let extra = (n_train - sizes.len()) as u128;
    let capacity: Vec<u128> = sizes.iter().map(|&s| (s - 1) as u128).collect();
    let total: u128 = capacity.iter().sum();
    if total == 0 {
        return vec![1; sizes.len()];
    }
    let mut quotas: Vec<usize> = capacity.iter().map(|&c| 1 + (extra * c / total) as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (extra * capacity[a] % total, extra * capacity[b] % total);
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().take(n_train - assigned) {
        quotas[i] += 1;
    }
    quotas
}

/// Draws `n_train` ROIs covering every (lesion, severity) stratum. All
/// randomness comes from `seed`.
pub fn split_dataset(rois: &[RoiImage], n_train: usize, seed: u64) -> Result<DatasetSplit, DatasetError> {
    let mut strata: BTreeMap<CaseLabel, Vec<usize>> = BTreeMap::new();
    for (i, roi) in rois.iter().enumerate() {
        strata.entry(roi.label).or_default().push(i);
    }
    if n_train < strata.len() {
        return Err(DatasetError::Split(format!(
            "{n_train} training cases cannot cover {} strata",
            strata.len()
        )));
    }
    if n_train > rois.len() {
        return Err(DatasetError::Split(format!(
            "{n_train} training cases requested from {} ROIs",
            rois.len()
        )));
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = stratum_quotas(&sizes, n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::with_capacity(n_train);
    for (members, quota) in strata.values().zip(quotas) {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        train_indices.extend_from_slice(&members[..quota]);
    }
    train_indices.sort_unstable();

    Ok(DatasetSplit {
        train_ids: train_indices.iter().map(|&i| rois[i].id.clone()).collect(),
        eval_ids: rois.iter().map(|r| r.id.clone()).collect(),
        train_indices,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{Lesion, Severity};
    use crate::plane::GrayImage;

    fn roi(i: usize, label: CaseLabel) -> RoiImage {
        RoiImage {
            pixels: GrayImage::zeros(1, 1),
            label,
            id: RoiId {
                source_id: format!("mdb{i:03}"),
                roi_index: 0,
            },
        }
    }

    /// Case counts per stratum of the MIAS archive.
    fn mias_like() -> Vec<RoiImage> {
        use Lesion::*;
        use Severity::*;
        let mut counts = vec![(CaseLabel::NORMAL, 207)];
        for (lesion, b, m) in [
            (Arch, 9, 10),
            (Asym, 6, 6),
            (Calc, 12, 13),
            (Circ, 19, 4),
            (Misc, 6, 8),
            (Spic, 11, 8),
        ] {
            counts.push((CaseLabel::abnormal(lesion, Benign).unwrap(), b));
            counts.push((CaseLabel::abnormal(lesion, Malignant).unwrap(), m));
        }
        let mut rois = Vec::new();
        for (label, n) in counts {
            for _ in 0..n {
                rois.push(roi(rois.len(), label));
            }
        }
        rois
    }

    #[test]
    fn covers_all_thirteen_strata() {
        let rois = mias_like();
        // The per-stratum counts add up to 319 (the archive has 322 images).
        assert_eq!(rois.len(), 319);
        let split = split_dataset(&rois, 150, 4).unwrap();
        assert_eq!(split.train_ids.len(), 150);
        assert_eq!(split.eval_ids.len(), 319);
        let covered: std::collections::BTreeSet<_> = split.train_indices.iter().map(|&i| rois[i].label).collect();
        assert_eq!(covered.len(), 13);
        assert_eq!(split, split_dataset(&rois, 150, 4).unwrap());
        assert_ne!(split.train_indices, split_dataset(&rois, 150, 5).unwrap().train_indices);
    }

    #[test]
    fn full_split_takes_everything() {
        let rois = mias_like();
        let split = split_dataset(&rois, rois.len(), 0).unwrap();
        assert_eq!(split.train_indices, (0..rois.len()).collect::<Vec<_>>());
        assert!(split.is_train(17));
    }

    #[test]
    fn too_few_training_cases() {
        let err = split_dataset(&mias_like(), 5, 0).unwrap_err();
        assert!(matches!(err, DatasetError::Split(_)));
        assert!(split_dataset(&mias_like(), 400, 0).is_err());
    }

    #[test]
    fn quotas_sum_and_bounds() {
        assert_eq!(stratum_quotas(&[1, 1, 1], 3), vec![1, 1, 1]);
        assert_eq!(stratum_quotas(&[10, 4], 5), vec![3, 2]);
        let q = stratum_quotas(&[207, 9, 10, 6, 6, 12, 13, 19, 4, 6, 8, 11, 8], 150);
        assert_eq!(q.iter().sum::<usize>(), 150);
        assert!(q.iter().all(|&x| x >= 1));
    }
}
