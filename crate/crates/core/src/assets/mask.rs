use std::path::Path;

use super::image::decode_png;
use super::{AssetError, RasterImage};

/// Values strictly above this are foreground.
pub const MASK_THRESHOLD: u8 = 127;

/// Binarize a raster into a {0, 255} single-channel mask.
///
/// Gray input is thresholded directly; RGB input uses the brightest channel;
/// RGBA input uses alpha.
pub fn binarize(image: &RasterImage) -> Result<RasterImage, AssetError> {
    if image.pixel_count() == 0 {
        return Err(AssetError::ZeroArea);
    }
    let c = image.channels() as usize;
    let data = image
        .data()
        .chunks_exact(c)
        .map(|p| {
            let v = match c {
                1 => p[0],
                3 => p[0].max(p[1]).max(p[2]),
                _ => p[3],
            };
            if v > MASK_THRESHOLD {
                255
            } else {
                0
            }
        })
        .collect();
    RasterImage::new(image.width(), image.height(), 1, data)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<RasterImage, AssetError> {
    let img = decode_png(path.as_ref())?;
    if img.width() == 0 || img.height() == 0 {
        return Err(AssetError::ZeroArea);
    }
    let raster = match (img.color().has_alpha(), img.color().has_color()) {
        (true, _) => super::image::from_dynamic(img, 4),
        (false, true) => super::image::from_dynamic(img, 3),
        (false, false) => super::image::from_dynamic(img, 1),
    };
    binarize(&raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::save_png;

    #[test]
    fn all_white_is_all_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_png(&RasterImage::filled(5, 3, &[255]), &p).unwrap();
        let m = load_mask(&p).unwrap();
        assert_eq!(m.channels(), 1);
        assert!(m.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn ramp_thresholds_at_127() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ramp.png");
        let ramp = RasterImage::new(256, 1, 1, (0..=255u8).collect()).unwrap();
        save_png(&ramp, &p).unwrap();
        let m = load_mask(&p).unwrap();
        for (i, &v) in m.data().iter().enumerate() {
            assert_eq!(v, if i > 127 { 255 } else { 0 }, "pixel {i}");
        }
    }

    #[test]
    fn zero_area_rejected() {
        let empty = RasterImage::new(0, 0, 1, vec![]).unwrap();
        assert!(matches!(binarize(&empty), Err(AssetError::ZeroArea)));
    }

    #[test]
    fn rgb_and_alpha_rules() {
        let rgb = RasterImage::new(2, 1, 3, vec![200, 0, 0, 100, 100, 100]).unwrap();
        assert_eq!(binarize(&rgb).unwrap().data(), &[255, 0]);
        let rgba = RasterImage::new(2, 1, 4, vec![0, 0, 0, 255, 255, 255, 255, 0]).unwrap();
        assert_eq!(binarize(&rgba).unwrap().data(), &[255, 0]);
    }

    #[test]
    fn missing_file_is_distinct() {
        assert!(matches!(
            load_mask("/nonexistent/mask.png"),
            Err(AssetError::MissingFile(_))
        ));
    }
}
