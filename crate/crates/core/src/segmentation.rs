//! Masks, panoptic maps and the fusion of instance and semantic predictions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Segment id reserved for unlabeled pixels.
pub const VOID_ID: u32 = 0;

/// Row-major bitset occupancy mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    /// Mask covering the inclusive pixel rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.get_index(y * self.width + x)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.set_index(y * self.width + x, value)
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_area(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn union_area(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    /// Row-major iterator over set pixel coordinates.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
            .map(move |i| (i % w, i / w))
        })
    }
}

/// Inclusive pixel-index bounding box. `h = y_max - y_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn h(&self) -> usize {
        self.y_max - self.y_min
    }

    pub fn w(&self) -> usize {
        self.x_max - self.x_min
    }

    /// Height of the covered pixel span, `h + 1`.
    pub fn pixel_height(&self) -> usize {
        self.h() + 1
    }

    pub fn pixel_width(&self) -> usize {
        self.w() + 1
    }

    /// Center of the covered pixel span in continuous pixel coordinates.
    pub fn center<T: Scalar>(&self) -> (T, T) {
        let half = T::lit(0.5);
        (
            T::from_usize(self.x_min + self.x_max + 1).unwrap() * half,
            T::from_usize(self.y_min + self.y_max + 1).unwrap() * half,
        )
    }
}

pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Error::check_dims(a.dims(), b.dims())?;
    let union = a.union_area(b);
    if union == 0 {
        return Ok(0.0);
    }
    Ok(a.intersection_area(b) as f64 / union as f64)
}

pub fn bbox_of_mask(m: &BinaryMask) -> Result<BBox> {
    let mut it = m.iter_set();
    let (x0, y0) = it.next().ok_or(Error::EmptyMask)?;
    let mut b = BBox {
        x_min: x0,
        y_min: y0,
        x_max: x0,
        y_max: y0,
    };
    for (x, y) in it {
        b.x_min = b.x_min.min(x);
        b.x_max = b.x_max.max(x);
        // row-major order: y never decreases
        b.y_max = y;
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub segment_id: u32,
    pub category_id: u32,
    pub is_thing: bool,
    /// Prediction confidence; absent for ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Per-pixel segment ids plus per-segment metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    segments: Vec<SegmentInfo>,
}

impl PanopticMap {
    /// Validates that ids are unique, every labeled pixel is described and
    /// every described segment owns at least one pixel. Segments are stored
    /// sorted by id.
    pub fn new(
        width: usize,
        height: usize,
        ids: Vec<u32>,
        mut segments: Vec<SegmentInfo>,
    ) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::invalid(format!(
                "raster has {} pixels, expected {}x{}",
                ids.len(),
                width,
                height
            )));
        }
        segments.sort_by_key(|s| s.segment_id);
        for pair in segments.windows(2) {
            if pair[0].segment_id == pair[1].segment_id {
                return Err(Error::invalid(format!(
                    "duplicate segment id {}",
                    pair[0].segment_id
                )));
            }
        }
        if segments.iter().any(|s| s.segment_id == VOID_ID) {
            return Err(Error::invalid("segment id 0 is reserved for void"));
        }
        let mut seen = vec![false; segments.len()];
        let mut last: Option<(u32, usize)> = None;
        for &id in &ids {
            if id == VOID_ID {
                continue;
            }
            let idx = match last {
                Some((l, idx)) if l == id => idx,
                _ => {
                    let idx = segments
                        .binary_search_by_key(&id, |s| s.segment_id)
                        .map_err(|_| Error::invalid(format!("pixel id {id} has no segment info")))?;
                    last = Some((id, idx));
                    idx
                }
            };
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "segment {} covers no pixels",
                segments[i].segment_id
            )));
        }
        Ok(Self {
            width,
            height,
            ids,
            segments,
        })
    }

    /// Builds a map from a raster, keeping only the infos whose ids occur.
    pub fn from_raster_pruned(
        width: usize,
        height: usize,
        ids: Vec<u32>,
        segments: impl IntoIterator<Item = SegmentInfo>,
    ) -> Result<Self> {
        let present: BTreeSet<u32> = ids.iter().copied().filter(|&i| i != VOID_ID).collect();
        let segments = segments
            .into_iter()
            .filter(|s| present.contains(&s.segment_id))
            .collect();
        Self::new(width, height, ids, segments)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ids: vec![VOID_ID; width * height],
            segments: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    pub fn segments(&self) -> &[SegmentInfo] {
        &self.segments
    }

    pub fn segment(&self, id: u32) -> Option<&SegmentInfo> {
        self.segments
            .binary_search_by_key(&id, |s| s.segment_id)
            .ok()
            .map(|i| &self.segments[i])
    }

    pub fn mask_of(&self, id: u32) -> BinaryMask {
        let mut m = BinaryMask::new(self.width, self.height);
        for (i, &p) in self.ids.iter().enumerate() {
            if p == id {
                m.set_index(i, true);
            }
        }
        m
    }

    pub fn areas(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &id in &self.ids {
            if id != VOID_ID {
                *out.entry(id).or_insert(0) += 1;
            }
        }
        out
    }
}

/// One detected "thing" as produced by upstream networks.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceObservation<T> {
    pub class: u32,
    pub score: T,
    pub modal_mask: BinaryMask,
    pub amodal_mask: BinaryMask,
    pub mesh_ref: String,
    /// Scale-normalized depth extent, when a head predicted it.
    pub dz_norm: Option<T>,
    /// Inverse z-center in 1/m, when a head predicted it.
    pub inv_zc: Option<T>,
    pub centered: bool,
}

/// Per-pixel semantic category raster; `None` is unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<u32>>,
}

impl SemanticMap {
    pub fn unlabeled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![None; width * height],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Minimum fraction of an instance's modal mask that must be unclaimed.
    pub overlap_thresh: f64,
    /// Stuff segments smaller than this (pixels) become void.
    pub stuff_min_area: usize,
    /// Semantic categories that are things; never emitted as stuff.
    pub thing_categories: BTreeSet<u32>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            overlap_thresh: 0.5,
            stuff_min_area: 4096,
            thing_categories: BTreeSet::new(),
        }
    }
}

/// Heuristic panoptic fusion.
///
/// Instances are claimed by descending score (ties: lower index first) on
/// their modal masks and receive ids `1..` in claim order. Stuff segments
/// follow, one per semantic category in ascending category order.
pub fn fuse_panoptic<T: Scalar>(
    instances: &[InstanceObservation<T>],
    semantic: &SemanticMap,
    config: &FusionConfig,
) -> Result<PanopticMap> {
    let dims = (semantic.width, semantic.height);
    if semantic.labels.len() != dims.0 * dims.1 {
        return Err(Error::invalid("semantic raster size does not match its dimensions"));
    }
    for inst in instances {
        Error::check_dims(dims, inst.modal_mask.dims())?;
    }
    if !(0.0..=1.0).contains(&config.overlap_thresh) {
        return Err(Error::invalid("overlap_thresh must be in [0, 1]"));
    }

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        instances[b]
            .score
            .partial_cmp(&instances[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut ids = vec![VOID_ID; dims.0 * dims.1];
    let mut segments = Vec::new();
    let mut next_id = 1u32;
    for idx in order {
        let inst = &instances[idx];
        let area = inst.modal_mask.area();
        if area == 0 {
            continue;
        }
        let free = inst
            .modal_mask
            .iter_set()
            .filter(|&(x, y)| ids[y * dims.0 + x] == VOID_ID)
            .count();
        if (free as f64) / (area as f64) < config.overlap_thresh {
            continue;
        }
        for (x, y) in inst.modal_mask.iter_set() {
            let p = &mut ids[y * dims.0 + x];
            if *p == VOID_ID {
                *p = next_id;
            }
        }
        segments.push(SegmentInfo {
            segment_id: next_id,
            category_id: inst.class,
            is_thing: true,
            score: Some(inst.score.to_f64_lossy()),
        });
        next_id += 1;
    }

    let mut stuff_pixels: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, label) in semantic.labels.iter().enumerate() {
        if let Some(cat) = label {
            if ids[i] == VOID_ID && !config.thing_categories.contains(cat) {
                stuff_pixels.entry(*cat).or_default().push(i);
            }
        }
    }
    for (cat, pixels) in stuff_pixels {
        if pixels.len() < config.stuff_min_area {
            continue;
        }
        for i in pixels {
            ids[i] = next_id;
        }
        segments.push(SegmentInfo {
            segment_id: next_id,
            category_id: cat,
            is_thing: false,
            score: None,
        });
        next_id += 1;
    }
    PanopticMap::from_raster_pruned(dims.0, dims.1, ids, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(mask: BinaryMask, class: u32, score: f64) -> InstanceObservation<f64> {
        InstanceObservation {
            class,
            score,
            amodal_mask: mask.clone(),
            modal_mask: mask,
            mesh_ref: String::new(),
            dz_norm: None,
            inv_zc: None,
            centered: true,
        }
    }

    #[test]
    fn iou_examples() {
        let a = BinaryMask::rect(5, 5, 1, 1, 3, 3);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let b = BinaryMask::rect(5, 5, 4, 4, 4, 4);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.0);

        let mut p = BinaryMask::new(2, 2);
        p.set(0, 0, true);
        p.set(0, 1, true);
        let mut q = BinaryMask::new(2, 2);
        q.set(0, 1, true);
        q.set(1, 1, true);
        assert!((mask_iou(&p, &q).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let e = BinaryMask::new(3, 3);
        assert_eq!(mask_iou(&e, &e).unwrap(), 0.0);
        assert!(matches!(
            mask_iou(&e, &BinaryMask::new(3, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bbox_examples() {
        let mut m = BinaryMask::new(10, 10);
        m.set(3, 5, true);
        assert_eq!(
            bbox_of_mask(&m).unwrap(),
            BBox { x_min: 3, y_min: 5, x_max: 3, y_max: 5 }
        );
        let full = BinaryMask::from_fn(7, 4, |_, _| true);
        assert_eq!(
            bbox_of_mask(&full).unwrap(),
            BBox { x_min: 0, y_min: 0, x_max: 6, y_max: 3 }
        );
        let mut m = BinaryMask::new(10, 10);
        m.set(1, 2, true);
        m.set(4, 7, true);
        assert_eq!(
            bbox_of_mask(&m).unwrap(),
            BBox { x_min: 1, y_min: 2, x_max: 4, y_max: 7 }
        );
        assert!(matches!(bbox_of_mask(&BinaryMask::new(4, 4)), Err(Error::EmptyMask)));
    }

    #[test]
    fn bitset_spans_word_boundaries() {
        let m = BinaryMask::from_fn(13, 11, |x, y| (x * 7 + y * 3) % 5 == 0);
        let expected: Vec<_> = (0..11)
            .flat_map(|y| (0..13).map(move |x| (x, y)))
            .filter(|&(x, y)| (x * 7 + y * 3) % 5 == 0)
            .collect();
        assert_eq!(m.iter_set().collect::<Vec<_>>(), expected);
        assert_eq!(m.area(), expected.len());
    }

    #[test]
    fn fuse_single_instance() {
        let m = BinaryMask::rect(8, 8, 2, 2, 4, 4);
        let pan = fuse_panoptic(
            &[obs(m.clone(), 7, 0.9)],
            &SemanticMap::unlabeled(8, 8),
            &FusionConfig::default(),
        )
        .unwrap();
        assert_eq!(pan.segments().len(), 1);
        assert_eq!(pan.segments()[0].category_id, 7);
        assert_eq!(pan.mask_of(1), m);
    }

    #[test]
    fn fuse_suppresses_duplicate() {
        let m = BinaryMask::rect(8, 8, 2, 2, 4, 4);
        let pan = fuse_panoptic(
            &[obs(m.clone(), 1, 0.8), obs(m, 2, 0.9)],
            &SemanticMap::unlabeled(8, 8),
            &FusionConfig::default(),
        )
        .unwrap();
        assert_eq!(pan.segments().len(), 1);
        assert_eq!(pan.segments()[0].category_id, 2);
        assert_eq!(pan.segments()[0].score, Some(0.9));
    }

    #[test]
    fn fuse_equal_scores_prefers_lower_index() {
        let m = BinaryMask::rect(8, 8, 0, 0, 3, 3);
        let pan = fuse_panoptic(
            &[obs(m.clone(), 5, 0.5), obs(m, 6, 0.5)],
            &SemanticMap::unlabeled(8, 8),
            &FusionConfig::default(),
        )
        .unwrap();
        assert_eq!(pan.segments()[0].category_id, 5);
    }

    #[test]
    fn fuse_small_stuff_is_void_and_partition_holds() {
        let mut sem = SemanticMap::unlabeled(4, 4);
        sem.labels[0] = Some(30);
        for l in sem.labels.iter_mut().skip(1) {
            *l = Some(31);
        }
        let cfg = FusionConfig {
            stuff_min_area: 2,
            ..FusionConfig::default()
        };
        let pan = fuse_panoptic::<f64>(&[], &sem, &cfg).unwrap();
        assert_eq!(pan.ids()[0], VOID_ID);
        assert_eq!(pan.segments().len(), 1);
        assert_eq!(pan.areas().values().sum::<usize>(), 15);
    }

    #[test]
    fn fuse_paints_only_unclaimed_pixels() {
        let a = BinaryMask::rect(10, 1, 0, 0, 5, 0);
        let b = BinaryMask::rect(10, 1, 4, 0, 9, 0);
        let pan = fuse_panoptic(
            &[obs(a, 1, 0.9), obs(b, 2, 0.8)],
            &SemanticMap::unlabeled(10, 1),
            &FusionConfig::default(),
        )
        .unwrap();
        assert_eq!(pan.ids(), &[1, 1, 1, 1, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn panoptic_map_validation() {
        let info = |id| SegmentInfo { segment_id: id, category_id: 1, is_thing: false, score: None };
        assert!(PanopticMap::new(2, 1, vec![1, 0], vec![info(1)]).is_ok());
        assert!(PanopticMap::new(2, 1, vec![1, 2], vec![info(1)]).is_err());
        assert!(PanopticMap::new(2, 1, vec![1, 0], vec![info(1), info(2)]).is_err());
        assert!(PanopticMap::new(2, 1, vec![1, 1], vec![info(1), info(1)]).is_err());
        assert!(PanopticMap::new(3, 1, vec![1, 1], vec![info(1)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
            proptest::collection::vec(any::<bool>(), 35).prop_map(|bits| {
                let mut m = BinaryMask::new(7, 5);
                for (i, b) in bits.into_iter().enumerate() {
                    m.set_index(i, b);
                }
                m
            })
        }

        proptest! {
            #[test]
            fn iou_symmetric_and_unit_only_for_identity(a in mask_strategy(), b in mask_strategy()) {
                let ab = mask_iou(&a, &b).unwrap();
                prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
                prop_assert!((0.0..=1.0).contains(&ab));
                prop_assert_eq!(ab == 1.0, a == b && !a.is_empty());
            }
        }
    }
}
