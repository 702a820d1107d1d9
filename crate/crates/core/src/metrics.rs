//! Panoptic quality (PQ = SQ · RQ) of a predicted panoptic map against
//! ground truth, and the re-projection evaluation protocol built on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::raster::rasterize_scene;
use crate::scalar::Scalar;
use crate::scene::Scene3D;
use crate::segmentation::{PanopticMap, VOID_ID};

pub const DEFAULT_TAUS: [f64; 3] = [0.5, 0.4, 0.3];

/// Matching counts and the derived qualities for one group of segments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quality {
    #[serde(rename = "PQ")]
    pub pq: f64,
    #[serde(rename = "SQ")]
    pub sq: f64,
    #[serde(rename = "RQ")]
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_sum: f64,
}

impl Quality {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, iou_sum: f64) -> Self {
        let denom = tp as f64 + 0.5 * fp as f64 + 0.5 * fn_ as f64;
        let (pq, rq) = if denom > 0.0 {
            (iou_sum / denom, tp as f64 / denom)
        } else {
            (0.0, 0.0)
        };
        let sq = if tp > 0 { iou_sum / tp as f64 } else { 0.0 };
        Self {
            pq,
            sq,
            rq,
            tp,
            fp,
            fn_,
            iou_sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassQuality {
    pub category_id: u32,
    pub is_thing: bool,
    /// Whether the category occurs in ground truth (and so in the class average).
    pub in_gt: bool,
    #[serde(flatten)]
    pub quality: Quality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatch {
    pub pred_id: u32,
    pub gt_id: u32,
    pub iou: f64,
}

/// Scores at one IoU threshold. The headline PQ/SQ/RQ are averaged over
/// categories present in ground truth; `pooled` counts every segment once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanopticMetrics {
    pub tau: f64,
    #[serde(rename = "PQ")]
    pub pq: f64,
    #[serde(rename = "SQ")]
    pub sq: f64,
    #[serde(rename = "RQ")]
    pub rq: f64,
    pub pooled: Quality,
    pub per_class: Vec<ClassQuality>,
    pub matches: Vec<SegmentMatch>,
}

/// Pixel statistics shared by every threshold.
pub struct OverlapTable {
    /// `(pred_id, gt_id) → IoU` for same-category pairs with overlap.
    pub ious: Vec<(u32, u32, f64)>,
    /// Ground-truth segment ids by category.
    pub gt_by_cat: BTreeMap<u32, Vec<u32>>,
    /// Predicted segment ids with evaluable (non-void) area, by category.
    pub pred_by_cat: BTreeMap<u32, Vec<u32>>,
    pub is_thing: BTreeMap<u32, bool>,
    pub in_gt: BTreeSet<u32>,
}

impl OverlapTable {
    pub fn new(pred: &PanopticMap, gt: &PanopticMap) -> Result<Self> {
        Error::check_dims(gt.dims(), pred.dims())?;
        let mut gt_area: HashMap<u32, usize> = HashMap::new();
        let mut pred_area: HashMap<u32, usize> = HashMap::new();
        let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
        for (&p, &g) in pred.ids().iter().zip(gt.ids()) {
            if g == VOID_ID {
                continue;
            }
            *gt_area.entry(g).or_insert(0) += 1;
            if p != VOID_ID {
                *pred_area.entry(p).or_insert(0) += 1;
                *inter.entry((p, g)).or_insert(0) += 1;
            }
        }

        let mut gt_by_cat: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut pred_by_cat: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut is_thing = BTreeMap::new();
        for s in gt.segments() {
            gt_by_cat.entry(s.category_id).or_default().push(s.segment_id);
            is_thing.insert(s.category_id, s.is_thing);
        }
        for s in pred.segments() {
            // segments lying entirely on ground-truth void have nothing to score
            if pred_area.contains_key(&s.segment_id) {
                pred_by_cat.entry(s.category_id).or_default().push(s.segment_id);
                is_thing.entry(s.category_id).or_insert(s.is_thing);
            }
        }

        let mut ious: Vec<(u32, u32, f64)> = inter
            .into_iter()
            .filter(|&((p, g), _)| {
                pred.segment(p).map(|s| s.category_id) == gt.segment(g).map(|s| s.category_id)
            })
            .map(|((p, g), i)| {
                let union = pred_area[&p] + gt_area[&g] - i;
                (p, g, i as f64 / union as f64)
            })
            .collect();
        ious.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let in_gt = gt_by_cat.keys().copied().collect();
        Ok(Self {
            ious,
            gt_by_cat,
            pred_by_cat,
            is_thing,
            in_gt,
        })
    }

    /// Greedy one-to-one matching by descending IoU over pairs with
    /// IoU > `tau`; ties go to the lower (gt, pred) id pair.
    pub fn greedy_matches(&self, tau: f64) -> Vec<SegmentMatch> {
        let mut cands: Vec<&(u32, u32, f64)> = self.ious.iter().filter(|c| c.2 > tau).collect();
        cands.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.0.cmp(&b.0))
        });
        let mut used_pred = BTreeSet::new();
        let mut used_gt = BTreeSet::new();
        let mut out = Vec::new();
        for &&(p, g, iou) in &cands {
            if used_pred.contains(&p) || used_gt.contains(&g) {
                continue;
            }
            used_pred.insert(p);
            used_gt.insert(g);
            out.push(SegmentMatch {
                pred_id: p,
                gt_id: g,
                iou,
            });
        }
        out
    }

    pub fn score(&self, tau: f64, matches: Vec<SegmentMatch>, gt: &PanopticMap) -> PanopticMetrics {
        let mut per_cat: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
        for m in &matches {
            let cat = gt.segment(m.gt_id).expect("matched gt exists").category_id;
            let e = per_cat.entry(cat).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += m.iou;
        }
        let cats: BTreeSet<u32> = self
            .gt_by_cat
            .keys()
            .chain(self.pred_by_cat.keys())
            .copied()
            .collect();
        let mut per_class = Vec::new();
        let (mut tp, mut fp, mut fn_, mut iou_sum) = (0, 0, 0, 0.0);
        for cat in cats {
            let (ctp, csum) = per_cat.get(&cat).copied().unwrap_or((0, 0.0));
            let n_gt = self.gt_by_cat.get(&cat).map_or(0, Vec::len);
            let n_pred = self.pred_by_cat.get(&cat).map_or(0, Vec::len);
            let q = Quality::from_counts(ctp, n_pred - ctp, n_gt - ctp, csum);
            tp += q.tp;
            fp += q.fp;
            fn_ += q.fn_;
            iou_sum += q.iou_sum;
            per_class.push(ClassQuality {
                category_id: cat,
                is_thing: self.is_thing[&cat],
                in_gt: self.in_gt.contains(&cat),
                quality: q,
            });
        }
        let averaged: Vec<&Quality> = per_class
            .iter()
            .filter(|c| c.in_gt)
            .map(|c| &c.quality)
            .collect();
        let mean = |f: fn(&Quality) -> f64| {
            if averaged.is_empty() {
                0.0
            } else {
                averaged.iter().map(|q| f(q)).sum::<f64>() / averaged.len() as f64
            }
        };
        PanopticMetrics {
            tau,
            pq: mean(|q| q.pq),
            sq: mean(|q| q.sq),
            rq: mean(|q| q.rq),
            pooled: Quality::from_counts(tp, fp, fn_, iou_sum),
            per_class,
            matches,
        }
    }
}

pub fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("IoU threshold must be in (0, 1], got {tau}")))
    }
}

/// PQ/SQ/RQ at IoU threshold `tau` (strict `IoU > tau`). Ground-truth void
/// pixels are excluded from every IoU.
pub fn panoptic_quality(pred: &PanopticMap, gt: &PanopticMap, tau: f64) -> Result<PanopticMetrics> {
    check_tau(tau)?;
    let table = OverlapTable::new(pred, gt)?;
    let matches = table.greedy_matches(tau);
    Ok(table.score(tau, matches, gt))
}

/// Scores one prediction at several thresholds, sharing the overlap pass.
pub fn panoptic_quality_multi(
    pred: &PanopticMap,
    gt: &PanopticMap,
    taus: &[f64],
) -> Result<Vec<PanopticMetrics>> {
    for &t in taus {
        check_tau(t)?;
    }
    let table = OverlapTable::new(pred, gt)?;
    Ok(taus
        .iter()
        .map(|&t| table.score(t, table.greedy_matches(t), gt))
        .collect())
}

/// Renders the scene into the camera and scores it at each threshold.
pub fn evaluate_reprojection<T: Scalar>(
    scene: &Scene3D<T>,
    gt: &PanopticMap,
    k: &CameraIntrinsics<T>,
    taus: &[f64],
) -> Result<Vec<PanopticMetrics>> {
    Error::check_dims(k.dims(), gt.dims())?;
    let (pred, _) = rasterize_scene(scene, k)?;
    panoptic_quality_multi(&pred, gt, taus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::SegmentInfo;

    fn seg(id: u32, cat: u32) -> SegmentInfo {
        SegmentInfo { segment_id: id, category_id: cat, is_thing: true, score: None }
    }

    #[test]
    fn identical_maps_score_one() {
        let gt = PanopticMap::new(4, 1, vec![1, 1, 2, 0], vec![seg(1, 5), seg(2, 6)]).unwrap();
        let m = panoptic_quality(&gt, &gt, 0.5).unwrap();
        assert_eq!((m.pq, m.sq, m.rq), (1.0, 1.0, 1.0));
        assert_eq!((m.pooled.tp, m.pooled.fp, m.pooled.fn_), (2, 0, 0));
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let gt = PanopticMap::new(2, 1, vec![1, 1], vec![seg(1, 5)]).unwrap();
        let m = panoptic_quality(&PanopticMap::empty(2, 1), &gt, 0.5).unwrap();
        assert_eq!(m.pq, 0.0);
        assert_eq!((m.pooled.tp, m.pooled.fn_), (0, 1));
    }

    #[test]
    fn third_iou_matches_only_below_half() {
        // pred covers pixels {0,1}, gt covers {1,2}: IoU = 1/3
        let pred = PanopticMap::new(3, 1, vec![1, 1, 0], vec![seg(1, 5)]).unwrap();
        let gt = PanopticMap::new(3, 1, vec![3, 2, 2], vec![seg(2, 5), seg(3, 9)]).unwrap();
        let m = panoptic_quality(&pred, &gt, 0.5).unwrap();
        assert_eq!(m.pq, 0.0);
        assert_eq!((m.pooled.fp, m.pooled.fn_), (1, 2));
        let m = panoptic_quality(&pred, &gt, 0.3).unwrap();
        let c5 = m.per_class.iter().find(|c| c.category_id == 5).unwrap().quality;
        assert!((c5.pq - 1.0 / 3.0).abs() < 1e-15);
        assert!((c5.sq - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c5.rq, 1.0);
    }

    #[test]
    fn categories_must_agree() {
        let pred = PanopticMap::new(2, 1, vec![1, 1], vec![seg(1, 5)]).unwrap();
        let gt = PanopticMap::new(2, 1, vec![1, 1], vec![seg(1, 6)]).unwrap();
        let m = panoptic_quality(&pred, &gt, 0.5).unwrap();
        assert_eq!(m.pooled.tp, 0);
        // class average covers only category 6
        assert_eq!(m.per_class.iter().filter(|c| c.in_gt).count(), 1);
    }

    #[test]
    fn void_is_excluded_from_iou() {
        // pred spills over two gt-void pixels; IoU stays 1
        let pred = PanopticMap::new(4, 1, vec![1, 1, 1, 1], vec![seg(1, 5)]).unwrap();
        let gt = PanopticMap::new(4, 1, vec![0, 3, 3, 0], vec![seg(3, 5)]).unwrap();
        let m = panoptic_quality(&pred, &gt, 0.5).unwrap();
        assert_eq!(m.pq, 1.0);
    }

    #[test]
    fn pred_entirely_on_void_is_not_a_false_positive() {
        let pred = PanopticMap::new(3, 1, vec![1, 2, 2], vec![seg(1, 5), seg(2, 5)]).unwrap();
        let gt = PanopticMap::new(3, 1, vec![4, 0, 0], vec![seg(4, 5)]).unwrap();
        let m = panoptic_quality(&pred, &gt, 0.5).unwrap();
        assert_eq!((m.pooled.tp, m.pooled.fp, m.pooled.fn_), (1, 0, 0));
    }

    #[test]
    fn rejects_bad_tau_and_dims() {
        let a = PanopticMap::empty(2, 2);
        assert!(panoptic_quality(&a, &a, 0.0).is_err());
        assert!(panoptic_quality(&a, &a, 1.5).is_err());
        assert!(matches!(
            panoptic_quality(&a, &PanopticMap::empty(2, 3), 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn metrics_json_shape() {
        let gt = PanopticMap::new(2, 1, vec![1, 1], vec![seg(1, 5)]).unwrap();
        let m = panoptic_quality(&gt, &gt, 0.5).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["tau"], 0.5);
        assert_eq!(v["PQ"], 1.0);
        assert_eq!(v["per_class"][0]["category_id"], 5);
        assert_eq!(v["per_class"][0]["fn"], 0);
    }
}
