//! Mask-weighted compositing of a rendered foreground onto a background plate.
//!
//! Soft masks are kept as integer weights over a common denominator so the
//! blend `fg ⊙ m + bg ⊙ (1 − m)` is exact in 8-bit arithmetic with
//! round-half-up.

use super::{SynthesisError, SynthesizedView};
use crate::assets::RasterImage;

/// Per-pixel weight `weights[i] / denom` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoftMask {
    pub width: u32,
    pub height: u32,
    pub weights: Vec<u32>,
    pub denom: u32,
}

impl SoftMask {
    pub fn value(&self, i: usize) -> f64 {
        f64::from(self.weights[i]) / f64::from(self.denom)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Box-blur a binary mask with a `(2r+1)²` kernel and edge replication.
/// Radius 0 returns the binary mask as weights over denominator 1.
pub fn feather_edges(mask: &RasterImage, radius: u32) -> SoftMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let c = mask.channels() as usize;
    let binary: Vec<u32> = mask
        .data()
        .chunks_exact(c)
        .map(|p| u32::from(p[0] != 0))
        .collect();
    if radius == 0 || w == 0 || h == 0 {
        return SoftMask {
            width: mask.width(),
            height: mask.height(),
            weights: binary,
            denom: 1,
        };
    }
    let r = radius as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut horizontal = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            horizontal[y * w + x] = (-r..=r)
                .map(|d| binary[y * w + clamp(x as i64 + d, w)])
                .sum();
        }
    }
    let mut weights = vec![0u32; w * h];
    for y in 0..h {
        for x in 0..w {
            weights[y * w + x] = (-r..=r)
                .map(|d| horizontal[clamp(y as i64 + d, h) * w + x])
                .sum();
        }
    }
    let side = 2 * radius + 1;
    SoftMask {
        width: mask.width(),
        height: mask.height(),
        weights,
        denom: side * side,
    }
}

/// `out = fg ⊙ m + bg ⊙ (1 − m)` per channel, rounded half up.
pub fn blend(fg: &RasterImage, mask: &SoftMask, bg: &RasterImage) -> Result<RasterImage, SynthesisError> {
    for img in [fg, bg] {
        if img.channels() != 3 {
            return Err(SynthesisError::Channels {
                expected: 3,
                actual: img.channels(),
            });
        }
    }
    if fg.dims() != bg.dims() {
        return Err(SynthesisError::DimensionMismatch(fg.dims(), bg.dims()));
    }
    if fg.dims() != mask.dims() {
        return Err(SynthesisError::DimensionMismatch(fg.dims(), mask.dims()));
    }
    let den = u64::from(mask.denom);
    let data = fg
        .data()
        .chunks_exact(3)
        .zip(bg.data().chunks_exact(3))
        .zip(&mask.weights)
        .flat_map(|((f, b), &wt)| {
            let wt = u64::from(wt);
            [0, 1, 2].map(|k| {
                let num = u64::from(f[k]) * wt + u64::from(b[k]) * (den - wt);
                ((2 * num + den) / (2 * den)) as u8
            })
        })
        .collect();
    RasterImage::new(fg.width(), fg.height(), 3, data).map_err(|_| SynthesisError::EmptyImage)
}

/// Paste a synthesized foreground onto `background` using its own
/// silhouette, feathered by `feather_radius` pixels.
pub fn composite(
    fg: &SynthesizedView,
    background: &RasterImage,
    feather_radius: u32,
) -> Result<RasterImage, SynthesisError> {
    let mask = feather_edges(&fg.fg_mask, feather_radius);
    blend(&fg.image, &mask, background)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::ViewSource;

    fn view(fg: RasterImage, mask: RasterImage) -> SynthesizedView {
        SynthesizedView {
            image: fg,
            fg_mask: mask,
            delta_theta: 0.0,
            delta_phi: 0.0,
            source: ViewSource::default(),
        }
    }

    #[test]
    fn feather_radius_zero_is_identity() {
        let mut m = RasterImage::filled(5, 4, &[0]);
        m.data_mut()[7] = 255;
        let s = feather_edges(&m, 0);
        assert_eq!(s.denom, 1);
        assert_eq!(s.weights.iter().filter(|&&w| w == 1).count(), 1);
        assert_eq!(s.weights[7], 1);
    }

    #[test]
    fn all_foreground_stays_one() {
        let s = feather_edges(&RasterImage::filled(6, 5, &[255]), 3);
        assert!((0..30).all(|i| s.value(i) == 1.0));
    }

    #[test]
    fn isolated_pixel_spreads_to_ninths() {
        let mut m = RasterImage::filled(7, 7, &[0]);
        m.data_mut()[3 * 7 + 3] = 255;
        let s = feather_edges(&m, 1);
        for y in 0..7 {
            for x in 0..7 {
                let expected = if (2..=4).contains(&x) && (2..=4).contains(&y) { 1.0 / 9.0 } else { 0.0 };
                assert_eq!(s.value(y * 7 + x), expected, "({x},{y})");
            }
        }
    }

    #[test]
    fn full_and_empty_masks() {
        let fg = RasterImage::filled(4, 3, &[200, 10, 99]);
        let bg = RasterImage::filled(4, 3, &[1, 2, 3]);
        let full = composite(&view(fg.clone(), RasterImage::filled(4, 3, &[255])), &bg, 0).unwrap();
        assert_eq!(full, fg);
        let none = composite(&view(fg, RasterImage::filled(4, 3, &[0])), &bg, 0).unwrap();
        assert_eq!(none, bg);
    }

    #[test]
    fn single_pixel_changes_only_itself() {
        let fg = RasterImage::filled(5, 5, &[250, 250, 250]);
        let bg = RasterImage::filled(5, 5, &[5, 6, 7]);
        let mut m = RasterImage::filled(5, 5, &[0]);
        m.data_mut()[12] = 255;
        let out = composite(&view(fg, m), &bg, 0).unwrap();
        for i in 0..25 {
            let expected: &[u8] = if i == 12 { &[250, 250, 250] } else { &[5, 6, 7] };
            assert_eq!(&out.data()[3 * i..3 * i + 3], expected);
        }
    }

    #[test]
    fn half_weights_round_up() {
        let fg = RasterImage::filled(1, 1, &[1, 2, 255]);
        let bg = RasterImage::filled(1, 1, &[0, 1, 0]);
        let mask = SoftMask { width: 1, height: 1, weights: vec![1], denom: 2 };
        assert_eq!(blend(&fg, &mask, &bg).unwrap().data(), &[1, 2, 128]);
    }

    #[test]
    fn mismatched_background_rejected() {
        let v = view(RasterImage::filled(4, 3, &[0, 0, 0]), RasterImage::filled(4, 3, &[255]));
        assert!(matches!(
            composite(&v, &RasterImage::filled(3, 4, &[0, 0, 0]), 0),
            Err(SynthesisError::DimensionMismatch(..))
        ));
    }
}
