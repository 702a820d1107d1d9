//! House-level train/test split with cross-split model invalidation, and
//! the COCO panoptic PNG + `segments_info` annotation format.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::{PanopticMap, SegmentInfo, VOID_ID};

/// Exclusive upper bound on ids representable in an RGB panoptic PNG.
pub const MAX_PANOPTIC_ID: u32 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: u64,
    pub model_id: String,
    pub category_id: u32,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub house_id: String,
    pub instances: Vec<InstanceRecord>,
}

/// An instance after the split, with its mesh-supervision validity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInstance {
    #[serde(flatten)]
    pub record: InstanceRecord,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitImage {
    pub image_id: String,
    pub house_id: String,
    pub instances: Vec<SplitInstance>,
}

impl SplitImage {
    pub fn valid_count(&self) -> usize {
        self.instances.iter().filter(|i| i.valid).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitResult {
    pub train: Vec<SplitImage>,
    pub test: Vec<SplitImage>,
    pub invalidated_models: BTreeSet<String>,
    /// Image ids removed for having no valid centered thing.
    pub dropped_images: Vec<String>,
}

/// Splits images by house: the first `train_count` houses of `house_order`
/// are train, the rest test. Models used on both sides are invalidated
/// everywhere; an instance is valid when its model is not invalidated and
/// it is centered; images without a valid instance are dropped.
pub fn split_and_filter(
    records: &[ImageRecord],
    house_order: &[String],
    train_count: usize,
) -> Result<SplitResult> {
    if records.is_empty() && house_order.is_empty() {
        return Ok(SplitResult::default());
    }
    if train_count >= house_order.len() {
        return Err(Error::invalid(format!(
            "train_count {} must be smaller than the number of houses {}",
            train_count,
            house_order.len()
        )));
    }
    let mut rank: HashMap<&str, usize> = HashMap::new();
    for (i, h) in house_order.iter().enumerate() {
        if rank.insert(h.as_str(), i).is_some() {
            return Err(Error::invalid(format!("house {h} listed twice")));
        }
    }
    let mut is_train = Vec::with_capacity(records.len());
    for r in records {
        let i = *rank
            .get(r.house_id.as_str())
            .ok_or_else(|| Error::invalid(format!("unknown house {}", r.house_id)))?;
        let mut ids = BTreeSet::new();
        if let Some(dup) = r.instances.iter().find(|x| !ids.insert(x.instance_id)) {
            return Err(Error::invalid(format!(
                "instance id {} repeated in image {}",
                dup.instance_id, r.image_id
            )));
        }
        is_train.push(i < train_count);
    }

    let mut models: [BTreeSet<&str>; 2] = Default::default();
    for (r, &train) in records.iter().zip(&is_train) {
        let side = &mut models[usize::from(!train)];
        side.extend(r.instances.iter().map(|x| x.model_id.as_str()));
    }
    let invalidated_models: BTreeSet<String> = models[0]
        .intersection(&models[1])
        .map(|m| m.to_string())
        .collect();

    let mut out = SplitResult {
        invalidated_models,
        ..SplitResult::default()
    };
    for (r, &train) in records.iter().zip(&is_train) {
        let image = SplitImage {
            image_id: r.image_id.clone(),
            house_id: r.house_id.clone(),
            instances: r
                .instances
                .iter()
                .map(|x| SplitInstance {
                    valid: x.centered && !out.invalidated_models.contains(&x.model_id),
                    record: x.clone(),
                })
                .collect(),
        };
        if image.valid_count() == 0 {
            out.dropped_images.push(image.image_id);
        } else if train {
            out.train.push(image);
        } else {
            out.test.push(image);
        }
    }
    Ok(out)
}

/// Houses in order of first appearance.
pub fn house_order_of(records: &[ImageRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.house_id.as_str()))
        .map(|r| r.house_id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanopticCategory {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub isthing: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanopticSegmentJson {
    pub id: u32,
    pub category_id: u32,
    #[serde(default)]
    pub iscrowd: u8,
    /// Ignored on decode.
    #[serde(default)]
    pub area: u64,
    /// `[x, y, width, height]` in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[u64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// COCO-style annotation accompanying a panoptic PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanopticAnnotation {
    pub width: usize,
    pub height: usize,
    pub categories: Vec<PanopticCategory>,
    pub segments_info: Vec<PanopticSegmentJson>,
}

pub fn id_to_rgb(id: u32) -> Result<[u8; 3]> {
    if id >= MAX_PANOPTIC_ID {
        return Err(Error::Encoding(format!("segment id {id} does not fit in 24 bits")));
    }
    Ok([id as u8, (id >> 8) as u8, (id >> 16) as u8])
}

pub fn rgb_to_id(rgb: [u8; 3]) -> u32 {
    u32::from(rgb[0]) | u32::from(rgb[1]) << 8 | u32::from(rgb[2]) << 16
}

/// Encodes with `id = R + 256·G + 256²·B`; void is black.
pub fn encode_panoptic_png(pan: &PanopticMap) -> Result<(RgbImage, PanopticAnnotation)> {
    let (w, h) = pan.dims();
    let mut img = RgbImage::new(w as u32, h as u32);
    let mut bounds: BTreeMap<u32, (u64, [usize; 4])> = BTreeMap::new();
    for (i, (&id, px)) in pan.ids().iter().zip(img.pixels_mut()).enumerate() {
        px.0 = id_to_rgb(id)?;
        if id != VOID_ID {
            let (x, y) = (i % w, i / w);
            let e = bounds.entry(id).or_insert((0, [x, y, x, y]));
            e.0 += 1;
            e.1 = [e.1[0].min(x), e.1[1].min(y), e.1[2].max(x), e.1[3].max(y)];
        }
    }
    let mut categories: BTreeMap<u32, u8> = BTreeMap::new();
    let mut segments_info = Vec::new();
    for s in pan.segments() {
        id_to_rgb(s.segment_id)?;
        let isthing = u8::from(s.is_thing);
        if *categories.entry(s.category_id).or_insert(isthing) != isthing {
            return Err(Error::Encoding(format!(
                "category {} has both thing and stuff segments",
                s.category_id
            )));
        }
        let (area, b) = bounds[&s.segment_id];
        segments_info.push(PanopticSegmentJson {
            id: s.segment_id,
            category_id: s.category_id,
            iscrowd: 0,
            area,
            bbox: Some([b[0] as u64, b[1] as u64, (b[2] - b[0] + 1) as u64, (b[3] - b[1] + 1) as u64]),
            score: s.score,
        });
    }
    let annotation = PanopticAnnotation {
        width: w,
        height: h,
        categories: categories
            .into_iter()
            .map(|(id, isthing)| PanopticCategory {
                id,
                name: String::new(),
                isthing,
            })
            .collect(),
        segments_info,
    };
    Ok((img, annotation))
}

pub fn decode_panoptic_png(img: &RgbImage, ann: &PanopticAnnotation) -> Result<PanopticMap> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    Error::check_dims((ann.width, ann.height), (w, h))?;
    let is_thing: HashMap<u32, bool> = ann
        .categories
        .iter()
        .map(|c| (c.id, c.isthing != 0))
        .collect();
    let mut known = HashMap::new();
    let mut segments = Vec::with_capacity(ann.segments_info.len());
    for s in &ann.segments_info {
        let thing = *is_thing.get(&s.category_id).ok_or_else(|| {
            Error::Decode(format!("segment {} has unknown category {}", s.id, s.category_id))
        })?;
        known.insert(s.id, ());
        segments.push(SegmentInfo {
            segment_id: s.id,
            category_id: s.category_id,
            is_thing: thing,
            score: s.score,
        });
    }
    let mut ids = Vec::with_capacity(w * h);
    for px in img.pixels() {
        let id = rgb_to_id(px.0);
        if id != VOID_ID && !known.contains_key(&id) {
            return Err(Error::Decode(format!(
                "color {:?} (id {id}) is not listed in segments_info",
                px.0
            )));
        }
        ids.push(id);
    }
    PanopticMap::new(w, h, ids, segments).map_err(|e| Error::Decode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: u64, model: &str, centered: bool) -> InstanceRecord {
        InstanceRecord { instance_id: id, model_id: model.into(), category_id: 1, centered }
    }

    fn image(id: &str, house: &str, instances: Vec<InstanceRecord>) -> ImageRecord {
        ImageRecord { image_id: id.into(), house_id: house.into(), instances }
    }

    fn houses(h: &[&str]) -> Vec<String> {
        h.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn category_cannot_be_thing_and_stuff() {
        let seg = |id, is_thing| SegmentInfo { segment_id: id, category_id: 4, is_thing, score: None };
        let pan = PanopticMap::new(2, 1, vec![1, 2], vec![seg(1, true), seg(2, false)]).unwrap();
        assert!(matches!(encode_panoptic_png(&pan), Err(Error::Encoding(_))));
    }

    #[test]
    fn minimal_annotation_decodes() {
        let ann: PanopticAnnotation = serde_json::from_str(
            r#"{"width":2,"height":1,"categories":[{"id":3,"isthing":0}],"segments_info":[{"id":5,"category_id":3}]}"#,
        )
        .unwrap();
        let img = RgbImage::from_raw(2, 1, vec![5, 0, 0, 0, 0, 0]).unwrap();
        let pan = decode_panoptic_png(&img, &ann).unwrap();
        assert_eq!(pan.ids(), &[5, 0]);
        assert!(!pan.segments()[0].is_thing);
    }

    #[test]
    fn disjoint_models_keep_everything() {
        let recs = vec![
            image("a0", "A", vec![inst(1, "m1", true)]),
            image("b0", "B", vec![inst(1, "m2", true)]),
        ];
        let s = split_and_filter(&recs, &houses(&["A", "B"]), 1).unwrap();
        assert!(s.invalidated_models.is_empty());
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn shared_model_is_invalidated_on_both_sides() {
        let recs = vec![
            image("a0", "A", vec![inst(1, "M", true)]),
            image("a1", "A", vec![inst(1, "M", true), inst(2, "x", true)]),
            image("b0", "B", vec![inst(1, "M", true), inst(2, "y", true)]),
        ];
        let s = split_and_filter(&recs, &houses(&["A", "B"]), 1).unwrap();
        assert_eq!(s.invalidated_models, BTreeSet::from(["M".to_string()]));
        assert_eq!(s.dropped_images, vec!["a0".to_string()]);
        assert_eq!(s.train.len(), 1);
        assert!(!s.train[0].instances[0].valid);
        assert!(!s.test[0].instances[0].valid);
        assert!(s.test[0].instances[1].valid);
    }

    #[test]
    fn boundary_only_image_is_dropped() {
        let recs = vec![
            image("a0", "A", vec![inst(1, "m1", false)]),
            image("b0", "B", vec![inst(1, "m2", true)]),
        ];
        let s = split_and_filter(&recs, &houses(&["A", "B"]), 1).unwrap();
        assert!(s.train.is_empty());
        assert_eq!(s.dropped_images, vec!["a0".to_string()]);
    }

    #[test]
    fn argument_errors() {
        let recs = vec![image("a0", "A", vec![inst(1, "m", true)])];
        assert!(split_and_filter(&recs, &houses(&["A"]), 1).is_err());
        assert!(split_and_filter(&recs, &houses(&["B", "C"]), 1).is_err());
        assert!(split_and_filter(&recs, &houses(&["A", "A"]), 1).is_err());
        let dup = vec![image("a0", "A", vec![inst(1, "m", true), inst(1, "n", true)])];
        assert!(split_and_filter(&dup, &houses(&["A", "B"]), 1).is_err());
        assert_eq!(split_and_filter(&[], &[], 0).unwrap(), SplitResult::default());
    }

    #[test]
    fn house_order_is_first_appearance() {
        let recs = vec![image("1", "B", vec![]), image("2", "A", vec![]), image("3", "B", vec![])];
        assert_eq!(house_order_of(&recs), houses(&["B", "A"]));
    }

    #[test]
    fn color_encoding() {
        assert_eq!(id_to_rgb(0).unwrap(), [0, 0, 0]);
        assert_eq!(id_to_rgb(300).unwrap(), [44, 1, 0]);
        assert_eq!(id_to_rgb(MAX_PANOPTIC_ID - 1).unwrap(), [255, 255, 255]);
        assert!(matches!(id_to_rgb(MAX_PANOPTIC_ID), Err(Error::Encoding(_))));
        assert_eq!(rgb_to_id([44, 1, 0]), 300);
    }

    #[test]
    fn png_round_trip_and_metadata() {
        let segs = vec![
            SegmentInfo { segment_id: 300, category_id: 7, is_thing: true, score: Some(0.25) },
            SegmentInfo { segment_id: 5, category_id: 2, is_thing: false, score: None },
        ];
        let pan = PanopticMap::new(3, 2, vec![300, 300, 0, 5, 5, 300], segs).unwrap();
        let (img, ann) = encode_panoptic_png(&pan).unwrap();
        assert_eq!(img.get_pixel(0, 0).0, [44, 1, 0]);
        let s300 = ann.segments_info.iter().find(|s| s.id == 300).unwrap();
        assert_eq!((s300.area, s300.bbox), (3, Some([0, 0, 3, 2])));
        assert_eq!(decode_panoptic_png(&img, &ann).unwrap(), pan);
    }

    #[test]
    fn decode_rejects_unknown_color() {
        let pan = PanopticMap::new(1, 1, vec![1], vec![SegmentInfo { segment_id: 1, category_id: 1, is_thing: false, score: None }]).unwrap();
        let (mut img, ann) = encode_panoptic_png(&pan).unwrap();
        img.get_pixel_mut(0, 0).0 = [9, 0, 0];
        assert!(matches!(decode_panoptic_png(&img, &ann), Err(Error::Decode(_))));
    }
}
