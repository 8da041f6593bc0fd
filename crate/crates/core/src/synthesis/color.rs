//! Global statistical color transfer in a log-opponent (lαβ) space.
//!
//! RGB is mapped to LMS cone space, log-compressed, then decorrelated into
//! one achromatic and two opponent channels. Matching per-channel mean and
//! standard deviation there moves the overall tint and contrast of a
//! composite toward a real reference photo.

use nalgebra::{Matrix3, Vector3};

use super::SynthesisError;
use crate::assets::RasterImage;

// Offset inside the logarithm keeps black pixels finite and invertible.
const LOG_OFFSET: f64 = 1.0;
const ZERO_SIGMA: f64 = 1e-12;

fn rgb_to_lms() -> Matrix3<f64> {
    Matrix3::new(
        0.3811, 0.5783, 0.0402, //
        0.1967, 0.7244, 0.0782, //
        0.0241, 0.1288, 0.8444,
    )
}

fn lms_to_opponent() -> Matrix3<f64> {
    let s3 = 1.0 / 3f64.sqrt();
    let s6 = 1.0 / 6f64.sqrt();
    let s2 = 1.0 / 2f64.sqrt();
    Matrix3::from_diagonal(&Vector3::new(s3, s6, s2))
        * Matrix3::new(
            1.0, 1.0, 1.0, //
            1.0, 1.0, -2.0, //
            1.0, -1.0, 0.0,
        )
}

struct Transforms {
    forward_lms: Matrix3<f64>,
    inverse_lms: Matrix3<f64>,
    forward_opp: Matrix3<f64>,
    inverse_opp: Matrix3<f64>,
}

fn transforms() -> &'static Transforms {
    static CELL: std::sync::OnceLock<Transforms> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let forward_lms = rgb_to_lms();
        let forward_opp = lms_to_opponent();
        Transforms {
            inverse_lms: forward_lms.try_inverse().expect("LMS matrix is invertible"),
            inverse_opp: forward_opp.try_inverse().expect("opponent matrix is invertible"),
            forward_lms,
            forward_opp,
        }
    })
}

/// Three planar f64 channels (l, α, β).
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentImage {
    pub width: u32,
    pub height: u32,
    pub channels: [Vec<f64>; 3],
}

pub fn rgb_to_opponent(img: &RasterImage) -> Result<OpponentImage, SynthesisError> {
    if img.channels() != 3 {
        return Err(SynthesisError::Channels {
            expected: 3,
            actual: img.channels(),
        });
    }
    let t = transforms();
    let n = img.pixel_count();
    let mut channels = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for p in img.data().chunks_exact(3) {
        let rgb = Vector3::new(f64::from(p[0]), f64::from(p[1]), f64::from(p[2]));
        let lms = (t.forward_lms * rgb).map(|v| (v.max(0.0) + LOG_OFFSET).log10());
        let opp = t.forward_opp * lms;
        for k in 0..3 {
            channels[k].push(opp[k]);
        }
    }
    Ok(OpponentImage {
        width: img.width(),
        height: img.height(),
        channels,
    })
}

/// Back to 8-bit RGB, rounding half up and clamping to `[0, 255]`.
pub fn opponent_to_rgb(img: &OpponentImage) -> RasterImage {
    let t = transforms();
    let n = img.channels[0].len();
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        let opp = Vector3::new(img.channels[0][i], img.channels[1][i], img.channels[2][i]);
        let lms = (t.inverse_opp * opp).map(|v| 10f64.powf(v) - LOG_OFFSET);
        let rgb = t.inverse_lms * lms;
        data.extend(rgb.iter().map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8));
    }
    RasterImage::new(img.width, img.height, 3, data).expect("sized buffer")
}

/// Per-channel `(mean, population standard deviation)`.
pub fn channel_stats(img: &OpponentImage) -> [(f64, f64); 3] {
    img.channels.each_ref().map(|c| {
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    })
}

/// Affine per-channel map `x ↦ (x − μ_in)·σ_ref/σ_in + μ_ref`; a constant
/// input channel maps to `μ_ref`.
pub fn transfer_statistics(input: &OpponentImage, reference: &OpponentImage) -> OpponentImage {
    let src = channel_stats(input);
    let dst = channel_stats(reference);
    let mut out = input.clone();
    for k in 0..3 {
        let (mu_in, sigma_in) = src[k];
        let (mu_ref, sigma_ref) = dst[k];
        if sigma_in <= ZERO_SIGMA {
            out.channels[k].iter_mut().for_each(|x| *x = mu_ref);
        } else {
            let gain = sigma_ref / sigma_in;
            out.channels[k]
                .iter_mut()
                .for_each(|x| *x = (*x - mu_in) * gain + mu_ref);
        }
    }
    out
}

/// Match the global lαβ statistics of `composite` to those of `reference`.
pub fn color_align(composite: &RasterImage, reference: &RasterImage) -> Result<RasterImage, SynthesisError> {
    if composite.pixel_count() == 0 || reference.pixel_count() == 0 {
        return Err(SynthesisError::EmptyImage);
    }
    let input = rgb_to_opponent(composite)?;
    let reference = rgb_to_opponent(reference)?;
    Ok(opponent_to_rgb(&transfer_statistics(&input, &reference)))
}

/// The style-alignment stage of the synthesis pipeline.
pub trait StyleAligner: Send + Sync {
    fn align(&self, composite: &RasterImage, reference: &RasterImage) -> Result<RasterImage, SynthesisError>;
}

/// [`color_align`] as a [`StyleAligner`].
#[derive(Debug, Clone, Copy, Default)]
pub struct StatisticalColorTransfer;

impl StyleAligner for StatisticalColorTransfer {
    fn align(&self, composite: &RasterImage, reference: &RasterImage) -> Result<RasterImage, SynthesisError> {
        color_align(composite, reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_rgb(seed: u64, w: u32, h: u32, lo: u8, hi: u8) -> RasterImage {
        let mut r = crate::rng::stream(seed, &["color-test".into()]);
        let data = (0..w * h * 3).map(|_| r.gen_range(lo..=hi)).collect();
        RasterImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn opponent_round_trip_is_lossless() {
        let img = random_rgb(1, 32, 16, 0, 255);
        assert_eq!(opponent_to_rgb(&rgb_to_opponent(&img).unwrap()), img);
    }

    #[test]
    fn self_reference_is_identity_within_one_level() {
        let img = random_rgb(2, 40, 20, 0, 255);
        let out = color_align(&img, &img).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn output_statistics_match_reference() {
        let a = rgb_to_opponent(&random_rgb(3, 30, 30, 10, 120)).unwrap();
        let b = rgb_to_opponent(&random_rgb(4, 20, 25, 90, 250)).unwrap();
        let out = channel_stats(&transfer_statistics(&a, &b));
        let want = channel_stats(&b);
        for k in 0..3 {
            assert!((out[k].0 - want[k].0).abs() <= 1e-3 * want[k].0.abs().max(1e-6));
            assert!((out[k].1 - want[k].1).abs() <= 1e-3 * want[k].1.abs().max(1e-6));
        }
    }

    #[test]
    fn constant_input_takes_reference_color() {
        let gray = RasterImage::filled(8, 8, &[128, 128, 128]);
        let blue = RasterImage::filled(5, 3, &[20, 40, 220]);
        let out = color_align(&gray, &blue).unwrap();
        assert_eq!(out, RasterImage::filled(8, 8, &[20, 40, 220]));
    }

    #[test]
    fn idempotent_within_one_level() {
        let x = random_rgb(5, 24, 24, 40, 200);
        let reference = random_rgb(6, 24, 24, 60, 190);
        let once = color_align(&x, &reference).unwrap();
        let twice = color_align(&once, &reference).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn rejects_non_rgb_and_empty() {
        let mask = RasterImage::filled(2, 2, &[255]);
        assert!(color_align(&mask, &mask).is_err());
        let empty = RasterImage::new(0, 0, 3, vec![]).unwrap();
        assert!(matches!(color_align(&empty, &empty), Err(SynthesisError::EmptyImage)));
    }
}
