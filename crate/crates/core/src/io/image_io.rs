use std::fs;
use std::io::Write as _;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dataset::{decode_panoptic_png, encode_panoptic_png, PanopticAnnotation};
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::segmentation::{BinaryMask, PanopticMap};

/// Default 16-bit PNG depth scale: stored value / 1000 = meters.
pub const DEFAULT_DEPTH_SCALE: f64 = 1000.0;

fn is_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Reads a depth map from PFM (by extension) or a 16-bit grayscale PNG,
/// where `value / scale` is meters and 0 marks invalid pixels.
pub fn read_depth<T: Scalar>(path: &Path, scale: f64) -> Result<DepthMap<T>> {
    if is_ext(path, "pfm") {
        return decode_pfm(&fs::read(path)?);
    }
    if !(scale > 0.0) {
        return Err(Error::invalid(format!("depth scale must be positive, got {scale}")));
    }
    let img = image::open(path)?;
    let img = match img {
        image::DynamicImage::ImageLuma16(i) => i,
        other => {
            return Err(Error::Parse(format!(
                "{}: expected 16-bit grayscale PNG, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img
        .pixels()
        .map(|p| T::lit(f64::from(p.0[0]) / scale))
        .collect();
    DepthMap::from_values(w, h, values)
}

pub fn write_depth_png16<T: Scalar>(depth: &DepthMap<T>, path: &Path, scale: f64) -> Result<()> {
    let (w, h) = depth.dims();
    let mut img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::new(w as u32, h as u32);
    for (i, px) in img.pixels_mut().enumerate() {
        let v = depth
            .get_index(i)
            .map_or(0.0, |d| (d.to_f64_lossy() * scale).round().clamp(0.0, 65535.0));
        px.0 = [v as u16];
    }
    img.save(path)?;
    Ok(())
}

/// Parses a single-channel PFM (`Pf`). Non-positive or non-finite samples
/// become invalid pixels.
pub fn decode_pfm<T: Scalar>(bytes: &[u8]) -> Result<DepthMap<T>> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PFM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "Pf" {
        return Err(Error::Parse(format!("unsupported PFM type {magic:?}; expected Pf")));
    }
    let parse_usize = |s: String| s.parse::<usize>().map_err(|e| Error::Parse(format!("PFM size: {e}")));
    let w = parse_usize(token()?)?;
    let h = parse_usize(token()?)?;
    let scale: f64 = token()?
        .parse()
        .map_err(|e| Error::Parse(format!("PFM scale: {e}")))?;
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let data = bytes
        .get(pos..)
        .filter(|d| d.len() >= w * h * 4)
        .ok_or_else(|| Error::Parse("PFM raster is truncated".into()))?;
    let little = scale < 0.0;
    let mut values = vec![T::zero(); w * h];
    for row in 0..h {
        // PFM stores rows bottom to top
        let dst = (h - 1 - row) * w;
        for col in 0..w {
            let o = (row * w + col) * 4;
            let raw = [data[o], data[o + 1], data[o + 2], data[o + 3]];
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            values[dst + col] = T::lit(f64::from(v));
        }
    }
    DepthMap::from_values(w, h, values)
}

/// Little-endian PFM; invalid pixels are written as 0.
pub fn encode_pfm<T: Scalar>(depth: &DepthMap<T>) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            let v = depth.get(col, row).map_or(0.0, |d| d.to_f64_lossy()) as f32;
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm<T: Scalar>(depth: &DepthMap<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_pfm(depth))?;
    Ok(())
}

/// COCO uncompressed RLE: column-major run lengths starting with a run of
/// zeros; `size` is `[height, width]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoRle {
    pub size: [usize; 2],
    pub counts: Vec<u64>,
}

impl CocoRle {
    pub fn encode(mask: &BinaryMask) -> Self {
        let (w, h) = mask.dims();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for x in 0..w {
            for y in 0..h {
                let v = mask.get(x, y);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            size: [h, w],
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        let [h, w] = self.size;
        let total: u64 = self.counts.iter().sum();
        if total != (w * h) as u64 {
            return Err(Error::Decode(format!(
                "RLE counts sum to {total}, expected {}",
                w * h
            )));
        }
        let mut mask = BinaryMask::new(w, h);
        let mut i = 0usize;
        for (k, &run) in self.counts.iter().enumerate() {
            if k % 2 == 1 {
                for j in i..i + run as usize {
                    mask.set(j / h, j % h, true);
                }
            }
            i += run as usize;
        }
        Ok(mask)
    }
}

/// Reads a mask from RLE JSON (by extension) or an 8-bit PNG (nonzero = set).
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    if is_ext(path, "json") {
        let rle: CocoRle = serde_json::from_slice(&fs::read(path)?)?;
        return rle.decode();
    }
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut m = BinaryMask::new(w, h);
    for (i, p) in img.pixels().enumerate() {
        if p.0[0] != 0 {
            m.set_index(i, true);
        }
    }
    Ok(m)
}

pub fn write_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let (w, h) = mask.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}

pub fn read_panoptic(png: &Path, json: &Path) -> Result<PanopticMap> {
    let img: RgbImage = image::open(png)?.into_rgb8();
    let ann: PanopticAnnotation = serde_json::from_slice(&fs::read(json)?)?;
    decode_panoptic_png(&img, &ann)
}

pub fn write_panoptic(pan: &PanopticMap, png: &Path, json: &Path) -> Result<()> {
    let (img, ann) = encode_panoptic_png(pan)?;
    img.save(png)?;
    let mut f = fs::File::create(json)?;
    serde_json::to_writer_pretty(&mut f, &ann)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::SegmentInfo;

    #[test]
    fn rle_known_encoding() {
        // 2x3 (h=2, w=3), set pixels (x=0,y=1) and (x=1,y=0): column-major 0 1 1 0 0 0
        let mut m = BinaryMask::new(3, 2);
        m.set(0, 1, true);
        m.set(1, 0, true);
        let rle = CocoRle::encode(&m);
        assert_eq!(rle.size, [2, 3]);
        assert_eq!(rle.counts, vec![1, 2, 3]);
        assert_eq!(rle.decode().unwrap(), m);
        let starts_set = CocoRle::encode(&BinaryMask::from_fn(2, 2, |_, _| true));
        assert_eq!(starts_set.counts, vec![0, 4]);
        assert!(CocoRle { size: [2, 2], counts: vec![1, 2] }.decode().is_err());
    }

    #[test]
    fn pfm_round_trip_with_invalid() {
        let mut d = DepthMap::from_values(3, 2, vec![1.5, 2.0, 0.0, 4.25, 5.0, 6.0]).unwrap();
        d.invalidate(1, 1);
        let back: DepthMap<f64> = decode_pfm(&encode_pfm(&d)).unwrap();
        assert_eq!(back.get(0, 0), Some(1.5));
        assert_eq!(back.get(2, 0), None);
        assert_eq!(back.get(1, 1), None);
        assert_eq!(back.get(2, 1), Some(6.0));
        assert_eq!(back.valid_count(), 4);
    }

    #[test]
    fn pfm_big_endian_and_errors() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode_pfm::<f64>(&bytes).unwrap().get(0, 0), Some(2.5));
        assert!(decode_pfm::<f64>(b"PF\n1 1\n-1.0\n").is_err());
        assert!(decode_pfm::<f64>(b"Pf\n2 2\n-1.0\n\0\0").is_err());
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = DepthMap::from_values(2, 2, vec![1.234, 0.0, 65.535, 2.0]).unwrap();
        let p = dir.path().join("d.png");
        write_depth_png16(&d, &p, 1000.0).unwrap();
        let back: DepthMap<f64> = read_depth(&p, 1000.0).unwrap();
        assert_eq!(back.get(0, 0), Some(1.234));
        assert_eq!(back.get(1, 0), None);
        assert_eq!(back.get(0, 1), Some(65.535));

        let m = BinaryMask::rect(5, 4, 1, 1, 3, 2);
        let mp = dir.path().join("m.png");
        write_mask_png(&m, &mp).unwrap();
        assert_eq!(read_mask(&mp).unwrap(), m);
        let rp = dir.path().join("m.json");
        fs::write(&rp, serde_json::to_string(&CocoRle::encode(&m)).unwrap()).unwrap();
        assert_eq!(read_mask(&rp).unwrap(), m);

        let pan = PanopticMap::new(
            2,
            1,
            vec![70000, 0],
            vec![SegmentInfo { segment_id: 70000, category_id: 3, is_thing: true, score: None }],
        )
        .unwrap();
        let (pp, pj) = (dir.path().join("p.png"), dir.path().join("p.json"));
        write_panoptic(&pan, &pp, &pj).unwrap();
        assert_eq!(read_panoptic(&pp, &pj).unwrap(), pan);
    }

    #[test]
    fn eight_bit_png_is_not_a_depth_map() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        write_mask_png(&BinaryMask::new(2, 2), &p).unwrap();
        assert!(matches!(read_depth::<f64>(&p, 1000.0), Err(Error::Parse(_))));
    }
}
