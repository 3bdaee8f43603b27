//! COCO-style instance files (COCO, LVIS, PACO), referring-expression refs and
//! image descriptions, folded into per-image region lists.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regionkit_core::forge::{BoxEntry, ImageContext, PartAttributes, RegionAnnotation};
use regionkit_core::mask::{rasterize_polygons, Polygon};
use regionkit_core::RleMask;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
pub struct CocoFile {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
    /// PACO attribute vocabulary.
    #[serde(default)]
    pub attributes: Vec<CocoAttribute>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    #[serde(default)]
    pub file_name: Option<String>,
    /// LVIS names images by URL.
    #[serde(default)]
    pub coco_url: Option<String>,
    pub height: usize,
    pub width: usize,
}

impl CocoImage {
    pub fn image_ref(&self) -> String {
        if let Some(f) = &self.file_name {
            return f.clone();
        }
        if let Some(name) = self.coco_url.as_deref().and_then(|u| u.rsplit('/').next()) {
            return name.to_string();
        }
        format!("{:012}.jpg", self.id)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle(RleMask),
}

#[derive(Debug, Clone, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub attribute_ids: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CocoAttribute {
    pub id: u64,
    pub name: String,
}

/// One image with its regions, ordered by annotation id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRegions {
    pub image_ref: String,
    pub height: usize,
    pub width: usize,
    pub regions: Vec<RegionAnnotation>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn normalized_box([x, y, w, h]: [f64; 4], width: usize, height: usize) -> [f64; 4] {
    let (fw, fh) = (width as f64, height as f64);
    let c = |v: f64| v.clamp(0.0, 1.0);
    [c(x / fw), c(y / fh), c((x + w) / fw), c((y + h) / fh)]
}

fn annotation_mask(ann: &CocoAnnotation, img: &CocoImage) -> std::result::Result<RleMask, String> {
    match &ann.segmentation {
        Segmentation::Polygons(polys) => {
            let polys = polys
                .iter()
                .map(|p| Polygon::from_flat(p))
                .collect::<regionkit_core::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let mask = rasterize_polygons(&polys, img.height, img.width).map_err(|e| e.to_string())?;
            Ok(mask.to_rle())
        }
        Segmentation::Rle(rle) => {
            if (rle.height, rle.width) != (img.height, img.width) {
                return Err(format!(
                    "rle size {}x{} differs from image {}x{}",
                    rle.height, rle.width, img.height, img.width
                ));
            }
            rle.validate().map_err(|e| e.to_string())?;
            Ok(rle.clone())
        }
    }
}

/// Regions of every image that has at least one annotation, images in id order.
///
/// `captions` maps annotation ids to referring expressions.
pub fn load_regions(
    coco: &CocoFile,
    captions: &HashMap<u64, Vec<String>>,
    source: &Path,
) -> Result<Vec<ImageRegions>> {
    let cats: HashMap<u64, &str> = coco.categories.iter().map(|c| (c.id, c.name.as_str())).collect();
    let attrs: HashMap<u64, &str> = coco.attributes.iter().map(|a| (a.id, a.name.as_str())).collect();
    let images: HashMap<u64, &CocoImage> = coco.images.iter().map(|i| (i.id, i)).collect();
    let mut per_image: BTreeMap<u64, Vec<&CocoAnnotation>> = BTreeMap::new();
    for ann in &coco.annotations {
        per_image.entry(ann.image_id).or_default().push(ann);
    }
    let mut out = Vec::new();
    for (image_id, mut anns) in per_image {
        let img = images
            .get(&image_id)
            .ok_or_else(|| Error::format(source, format!("annotation refers to unknown image {image_id}")))?;
        anns.sort_by_key(|a| a.id);
        let mut regions = Vec::with_capacity(anns.len());
        for ann in anns {
            let category = cats
                .get(&ann.category_id)
                .ok_or_else(|| Error::format(source, format!("annotation {} has unknown category {}", ann.id, ann.category_id)))?;
            let mask = annotation_mask(ann, img)
                .map_err(|m| Error::format(source, format!("annotation {}: {m}", ann.id)))?;
            let id = u32::try_from(ann.id)
                .map_err(|_| Error::format(source, format!("annotation id {} exceeds 32 bits", ann.id)))?;
            let mut region = RegionAnnotation::new(id, *category, mask, normalized_box(ann.bbox, img.width, img.height));
            if let Some(c) = captions.get(&ann.id) {
                region = region.with_captions(c.clone());
            }
            if !ann.attribute_ids.is_empty() {
                let names = ann
                    .attribute_ids
                    .iter()
                    .map(|a| attrs.get(a).copied().ok_or_else(|| Error::format(source, format!("unknown attribute id {a}"))))
                    .collect::<Result<Vec<_>>>()?;
                region = region.with_attributes(PartAttributes::from_flat(&names)?);
            }
            regions.push(region);
        }
        out.push(ImageRegions {
            image_ref: img.image_ref(),
            height: img.height,
            width: img.width,
            regions,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
pub struct RefEntry {
    pub ann_id: u64,
    #[serde(default)]
    pub sentences: Vec<RefSentence>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RefSentence {
    #[serde(default)]
    pub raw: Option<String>,
    #[serde(default)]
    pub sent: Option<String>,
}

/// Referring expressions per annotation id from a refs file exported to JSON.
/// Duplicate expressions are kept once, in file order.
pub fn load_ref_captions(path: &Path) -> Result<HashMap<u64, Vec<String>>> {
    let refs: Vec<RefEntry> = read_json(path)?;
    let mut out: HashMap<u64, Vec<String>> = HashMap::new();
    for r in refs {
        let list = out.entry(r.ann_id).or_default();
        for s in r.sentences {
            let Some(text) = s.raw.or(s.sent) else { continue };
            let text = text.trim().to_string();
            if !text.is_empty() && !list.contains(&text) {
                list.push(text);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
struct DescriptionEntry {
    #[serde(alias = "file_name", alias = "image_ref")]
    image: String,
    #[serde(default, alias = "caption")]
    description: Option<String>,
    #[serde(default)]
    conversations: Vec<LlavaTurn>,
}

#[derive(Debug, Clone, Deserialize)]
struct LlavaTurn {
    from: String,
    value: String,
}

/// Image descriptions keyed by image file name. Accepts entries carrying a
/// `description` (or `caption`) field, or LLaVA-style `conversations` whose
/// assistant turns are joined.
pub fn load_descriptions(path: &Path) -> Result<HashMap<String, String>> {
    let entries: Vec<DescriptionEntry> = read_json(path)?;
    let mut out = HashMap::new();
    for e in entries {
        let text = match e.description {
            Some(d) => d,
            None => e
                .conversations
                .iter()
                .filter(|t| t.from == "gpt" || t.from == "assistant")
                .map(|t| t.value.trim())
                .collect::<Vec<_>>()
                .join("\n"),
        };
        let key = e.image.rsplit('/').next().unwrap_or(&e.image).to_string();
        out.insert(key, text.trim().to_string());
    }
    Ok(out)
}

/// Prompt context of one image: every region contributes a box, the
/// captioned ones (up to `max_regions`) become `<regionN>`.
pub fn image_context(image: &ImageRegions, description: &str, max_regions: usize) -> ImageContext {
    ImageContext {
        image_ref: image.image_ref.clone(),
        description: description.to_string(),
        boxes: image
            .regions
            .iter()
            .map(|r| BoxEntry {
                category: r.category.clone(),
                bbox_norm: r.bbox_norm,
            })
            .collect(),
        regions: image
            .regions
            .iter()
            .filter(|r| !r.captions.is_empty())
            .take(max_regions)
            .cloned()
            .collect(),
    }
}

/// Part-level prompt context: regions with attributes, up to `max_regions`.
pub fn part_context(image: &ImageRegions, max_regions: usize) -> ImageContext {
    ImageContext {
        image_ref: image.image_ref.clone(),
        description: String::new(),
        boxes: Vec::new(),
        regions: image
            .regions
            .iter()
            .filter(|r| r.attributes.is_some())
            .take(max_regions)
            .cloned()
            .collect(),
    }
}
