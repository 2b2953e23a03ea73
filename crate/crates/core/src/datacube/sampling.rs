use super::{DataError, LabeledDataset, SpectralCube};
use crate::numeric::{Matrix, RngStream};

// Draws `k` distinct entries of `pool` by partial Fisher–Yates.
fn draw(pool: &mut [usize], k: usize, rng: &mut RngStream) -> Vec<usize> {
    for i in 0..k {
        let j = i + rng.index(pool.len() - i);
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

// Spreads `target` positives over images with per-image caps, as evenly as
// the caps allow; earlier images absorb the remainder.
fn positive_quotas(caps: &[usize], target: usize) -> Vec<usize> {
    let mut quota = vec![0; caps.len()];
    let mut remaining = target;
    loop {
        let open: Vec<usize> = (0..caps.len()).filter(|&i| quota[i] < caps[i]).collect();
        if remaining == 0 || open.is_empty() {
            return quota;
        }
        let share = (remaining / open.len()).max(1);
        for i in open {
            let add = share.min(caps[i] - quota[i]).min(remaining);
            quota[i] += add;
            remaining -= add;
            if remaining == 0 {
                break;
            }
        }
    }
}

/// Samples `per_image` pixels (without replacement) from every cube and
/// returns their spectra as rows of `X` with mask-derived labels.
///
/// With `balance`, the positive count is targeted at half of all rows: it is
/// spread over the images that have anomalous pixels, capped by what each
/// image has, and every image fills its remaining slots with normal pixels.
/// Image `i` draws from `rng.substream(i)`, so results depend only on the
/// stream seed.
pub fn sample_pixels(
    dataset: &LabeledDataset<SpectralCube>,
    per_image: usize,
    balance: bool,
    rng: &RngStream,
) -> Result<(Matrix, Vec<u8>), DataError> {
    let Some(first) = dataset.items.first() else {
        return Err(DataError::EmptyTrainingSet);
    };
    let grid = first.data.grid();
    let channels = first.data.channels();

    let mut pixel_classes = Vec::with_capacity(dataset.len());
    for item in &dataset.items {
        let cube = &item.data;
        if **cube.grid() != **grid {
            return Err(DataError::GridMismatch);
        }
        let n = cube.height() * cube.width();
        if per_image > n {
            return Err(DataError::PerImageTooLarge { requested: per_image, available: n });
        }
        let (mut neg, mut pos) = (Vec::new(), Vec::new());
        match &item.mask {
            Some(mask) => {
                if mask.height() != cube.height() || mask.width() != cube.width() {
                    return Err(DataError::ShapeMismatch {
                        channels: 1,
                        height: cube.height(),
                        width: cube.width(),
                        len: mask.values().len(),
                    });
                }
                for (p, &m) in mask.values().iter().enumerate() {
                    if m == 1 { pos.push(p) } else { neg.push(p) }
                }
            }
            None if item.label == 1 => return Err(DataError::MissingMask(item.name.clone().into())),
            None => neg.extend(0..n),
        }
        pixel_classes.push((neg, pos));
    }

    let quotas = if balance {
        let caps: Vec<usize> = pixel_classes.iter().map(|(_, pos)| pos.len().min(per_image)).collect();
        if caps.iter().all(|&c| c == 0) {
            return Err(DataError::NoAnomalousPixels);
        }
        let target = per_image * dataset.len() / 2;
        let mut q = positive_quotas(&caps, target);
        // An image without enough normal pixels must take more positives.
        for (qi, (neg, pos)) in q.iter_mut().zip(&pixel_classes) {
            *qi = (*qi).max(per_image.saturating_sub(neg.len())).min(pos.len());
        }
        Some(q)
    } else {
        None
    };

    let mut values = Vec::with_capacity(per_image * dataset.len() * channels);
    let mut labels = Vec::with_capacity(per_image * dataset.len());
    for (i, (item, (neg, pos))) in dataset.items.iter().zip(pixel_classes).enumerate() {
        let mut sub = rng.substream(i as u64);
        let chosen: Vec<(usize, u8)> = match &quotas {
            Some(q) => {
                let (mut neg, mut pos) = (neg, pos);
                let n_pos = q[i];
                let mut picked: Vec<(usize, u8)> = draw(&mut pos, n_pos, &mut sub).into_iter().map(|p| (p, 1)).collect();
                picked.extend(draw(&mut neg, per_image - n_pos, &mut sub).into_iter().map(|p| (p, 0)));
                picked
            }
            None => {
                let mut all: Vec<usize> = (0..item.data.height() * item.data.width()).collect();
                let mask = item.mask.as_ref();
                draw(&mut all, per_image, &mut sub)
                    .into_iter()
                    .map(|p| (p, mask.map_or(0, |m| m.values()[p])))
                    .collect()
            }
        };
        let features = item.data.features();
        for (p, label) in chosen {
            values.extend(features.spectrum(p).map(f64::from));
            labels.push(label);
        }
    }
    let x = Matrix::from_vec(labels.len(), channels, values).expect("row-major sample table");
    Ok((x, labels))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::datacube::{FeatureCube, LabeledItem, Mask, Split, WavelengthGrid};

    fn dataset(anomalous: &[bool]) -> LabeledDataset<SpectralCube> {
        let grid = Arc::new(WavelengthGrid::new(vec![400.0, 500.0, 700.0], [450.0, 550.0, 650.0]).unwrap());
        let (h, w) = (4, 4);
        let items = anomalous
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let values = (0..3 * h * w).map(|v| ((v + i) % 17) as f32 / 16.0).collect();
                let cube = SpectralCube::new(FeatureCube::new(3, h, w, values).unwrap(), Arc::clone(&grid)).unwrap();
                let mask = a.then(|| Mask::new(h, w, (0..h * w).map(|p| u8::from(p < 3)).collect()).unwrap());
                LabeledItem { name: format!("{i}"), data: cube, label: u8::from(a), mask }
            })
            .collect();
        LabeledDataset { split: Split::Train, items }
    }

    #[test]
    fn normal_images_give_zero_labels() {
        let (x, y) = sample_pixels(&dataset(&[false]), 5, false, &RngStream::new(0)).unwrap();
        assert_eq!(x.rows(), 5);
        assert!(y.iter().all(|&l| l == 0));
    }

    #[test]
    fn cardinality() {
        let (x, y) = sample_pixels(&dataset(&[false, true, false]), 10, false, &RngStream::new(0)).unwrap();
        assert_eq!((x.rows(), x.cols(), y.len()), (30, 3, 30));
    }

    #[test]
    fn deterministic_for_seed() {
        let ds = dataset(&[true, false, true]);
        let a = sample_pixels(&ds, 6, true, &RngStream::new(9)).unwrap();
        let b = sample_pixels(&ds, 6, true, &RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balanced_up_to_availability() {
        // Two anomalous images with 3 positive pixels each: 6 positives of a
        // target of 8 (half of 16 rows).
        let ds = dataset(&[true, true]);
        let (_, y) = sample_pixels(&ds, 8, true, &RngStream::new(2)).unwrap();
        assert_eq!(y.iter().filter(|&&l| l == 1).count(), 6);
        let ds = dataset(&[true, true, true, true]);
        let (_, y) = sample_pixels(&ds, 4, true, &RngStream::new(2)).unwrap();
        assert_eq!(y.iter().filter(|&&l| l == 1).count(), 8);
    }

    #[test]
    fn errors() {
        let ds = dataset(&[false]);
        assert!(matches!(sample_pixels(&ds, 17, false, &RngStream::new(0)), Err(DataError::PerImageTooLarge { .. })));
        assert!(matches!(sample_pixels(&ds, 4, true, &RngStream::new(0)), Err(DataError::NoAnomalousPixels)));
    }

    #[test]
    fn sampled_rows_are_pixel_spectra() {
        let ds = dataset(&[true]);
        let (x, y) = sample_pixels(&ds, 16, false, &RngStream::new(4)).unwrap();
        let cube = ds.items[0].data.features();
        let mut seen = vec![false; 16];
        for r in 0..16 {
            let p = (0..16).find(|&p| cube.spectrum(p).map(f64::from).eq(x.row(r).iter().copied()) && !seen[p]).unwrap();
            seen[p] = true;
            assert_eq!(y[r], u8::from(p < 3));
        }
    }
}
