use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataError, Mask, RgbImage};
use crate::numeric::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One image (or cube) with its image-level label and optional pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem<T> {
    /// Path relative to the class root, e.g. `test/hole/000.png`.
    pub name: String,
    pub data: T,
    pub label: u8,
    pub mask: Option<Mask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    pub split: Split,
    pub items: Vec<LabeledItem<T>>,
}

impl<T> LabeledDataset<T> {
    pub fn new(split: Split) -> Self {
        Self { split, items: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.items.iter().filter(|i| i.label == 1).count();
        pos > 0 && pos < self.items.len()
    }

    /// Applies `f` to every payload, keeping names, labels and masks.
    pub fn try_map<U, E>(self, mut f: impl FnMut(T) -> Result<U, E>) -> Result<LabeledDataset<U>, E> {
        let items = self
            .items
            .into_iter()
            .map(|it| Ok(LabeledItem { name: it.name, data: f(it.data)?, label: it.label, mask: it.mask }))
            .collect::<Result<_, E>>()?;
        Ok(LabeledDataset { split: self.split, items })
    }
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>, DataError> {
    if !dir.is_dir() {
        return Err(DataError::MissingDirectory(dir.to_path_buf()));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() == want_dirs {
            if !want_dirs && !is_image(&path) {
                continue;
            }
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg" | "bmp" | "tif" | "tiff")
    )
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn find_mask(gt_dir: &Path, stem: &str) -> Option<PathBuf> {
    ["png", "PNG"]
        .iter()
        .flat_map(|ext| [gt_dir.join(format!("{stem}_mask.{ext}")), gt_dir.join(format!("{stem}.{ext}"))])
        .find(|p| p.is_file())
}

/// Loads one class from an MVTec AD style tree:
///
/// ```text
/// <root>/<class>/train/good/*.png
/// <root>/<class>/test/<defect>/*.png
/// <root>/<class>/ground_truth/<defect>/<stem>_mask.png
/// ```
///
/// Directories and files are visited in lexicographic order. Test images
/// under `good` are normal; any other defect directory must provide a mask
/// per image, and the image label is whether that mask has a set pixel.
pub fn load_mvtec_class(
    root: &Path,
    class_name: &str,
) -> Result<(LabeledDataset<RgbImage>, LabeledDataset<RgbImage>), DataError> {
    let class_root = root.join(class_name);
    if !class_root.is_dir() {
        return Err(DataError::MissingDirectory(class_root));
    }

    let mut train = LabeledDataset::new(Split::Train);
    for path in sorted_entries(&class_root.join("train").join("good"), false)? {
        let data = RgbImage::open(&path)?;
        train.items.push(LabeledItem { name: relative(&class_root, &path), data, label: 0, mask: None });
    }

    let mut test = LabeledDataset::new(Split::Test);
    for defect_dir in sorted_entries(&class_root.join("test"), true)? {
        let defect = defect_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let gt_dir = class_root.join("ground_truth").join(&defect);
        for path in sorted_entries(&defect_dir, false)? {
            let data = RgbImage::open(&path)?;
            let name = relative(&class_root, &path);
            if defect == "good" {
                test.items.push(LabeledItem { name, data, label: 0, mask: None });
                continue;
            }
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let mask_path = find_mask(&gt_dir, &stem).ok_or_else(|| DataError::MissingMask(path.clone()))?;
            let mask = Mask::open(&mask_path)?;
            if mask.height() != data.height() || mask.width() != data.width() {
                return Err(DataError::MaskShape {
                    path: mask_path,
                    want_h: data.height(),
                    want_w: data.width(),
                    got_h: mask.height(),
                    got_w: mask.width(),
                });
            }
            let label = u8::from(mask.any());
            test.items.push(LabeledItem { name, data, label, mask: Some(mask) });
        }
    }
    Ok((train, test))
}

/// Moves a seeded fraction of the anomalous test items into the training set
/// so a supervised scorer sees both classes. Returns the moved item names.
///
/// At least one anomalous item stays in the test set whenever the fraction is
/// below one, and the relative order of both sets is preserved.
pub fn move_anomalies_to_train<T>(
    train: &mut LabeledDataset<T>,
    test: &mut LabeledDataset<T>,
    fraction: f64,
    rng: &mut RngStream,
) -> Vec<String> {
    let anomalous: Vec<usize> = (0..test.items.len()).filter(|&i| test.items[i].label == 1).collect();
    let mut take = ((anomalous.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    if fraction < 1.0 && take == anomalous.len() && take > 0 {
        take -= 1;
    }
    let mut chosen = anomalous;
    rng.shuffle(&mut chosen);
    chosen.truncate(take);
    chosen.sort_unstable();

    let mut moved = Vec::with_capacity(take);
    let mut kept = Vec::with_capacity(test.items.len() - take);
    for (i, item) in std::mem::take(&mut test.items).into_iter().enumerate() {
        if chosen.binary_search(&i).is_ok() {
            moved.push(item.name.clone());
            train.items.push(item);
        } else {
            kept.push(item);
        }
    }
    test.items = kept;
    moved
}
