use std::path::Path;

use image::{DynamicImage, ImageBuffer};

use super::AssetError;

/// An 8-bit, row-major raster with 1 (mask), 3 (RGB) or 4 (RGBA) channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, AssetError> {
        if !matches!(channels, 1 | 3 | 4) {
            return Err(AssetError::InvalidRaster(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(AssetError::InvalidRaster(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// A raster filled with one pixel value; `pixel.len()` is the channel count.
    pub fn filled(width: u32, height: u32, pixel: &[u8]) -> Self {
        let n = width as usize * height as usize;
        let data = pixel.iter().copied().cycle().take(n * pixel.len()).collect();
        Self::new(width, height, pixel.len() as u8, data).expect("fill pixel has 1, 3 or 4 channels")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    /// Drop the alpha channel of an RGBA raster or expand a mask to gray RGB.
    pub fn to_rgb(&self) -> RasterImage {
        match self.channels {
            3 => self.clone(),
            4 => {
                let data = self
                    .data
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                RasterImage::new(self.width, self.height, 3, data).unwrap()
            }
            _ => {
                let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
                RasterImage::new(self.width, self.height, 3, data).unwrap()
            }
        }
    }

    /// Bilinear resize to exactly `width`×`height`.
    pub fn resize(&self, width: u32, height: u32) -> RasterImage {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let resized = image::imageops::resize(
            &self.to_dynamic(),
            width,
            height,
            image::imageops::FilterType::Triangle,
        );
        from_dynamic(DynamicImage::ImageRgba8(resized), self.channels)
    }

    /// Nearest-neighbour resize; keeps binary masks binary.
    pub fn resize_nearest(&self, width: u32, height: u32) -> RasterImage {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let c = self.channels as usize;
        let mut data = Vec::with_capacity(width as usize * height as usize * c);
        for y in 0..height {
            let sy = ((u64::from(y) * 2 + 1) * u64::from(self.height) / (2 * u64::from(height)))
                .min(u64::from(self.height) - 1) as u32;
            for x in 0..width {
                let sx = ((u64::from(x) * 2 + 1) * u64::from(self.width) / (2 * u64::from(width)))
                    .min(u64::from(self.width) - 1) as u32;
                data.extend_from_slice(self.pixel(sx, sy));
            }
        }
        RasterImage::new(width, height, self.channels, data).unwrap()
    }

    pub(crate) fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = self.dims();
        let data = self.data.clone();
        match self.channels {
            1 => DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, data).unwrap()),
            3 => DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, data).unwrap()),
            _ => DynamicImage::ImageRgba8(ImageBuffer::from_raw(w, h, data).unwrap()),
        }
    }
}

pub(crate) fn from_dynamic(img: DynamicImage, channels: u8) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let data = match channels {
        1 => img.into_luma8().into_raw(),
        3 => img.into_rgb8().into_raw(),
        _ => img.into_rgba8().into_raw(),
    };
    RasterImage::new(w, h, channels, data).unwrap()
}

pub(crate) fn decode_png(path: &Path) -> Result<DynamicImage, AssetError> {
    if !path.exists() {
        return Err(AssetError::MissingFile(path.to_path_buf()));
    }
    let reader = image::ImageReader::open(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = reader.with_guessed_format().map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    reader.decode().map_err(|e| AssetError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Load an image file as RGB (3 channels) or RGBA when `keep_alpha` is set
/// and the file carries an alpha channel.
pub fn load_png(path: impl AsRef<Path>, keep_alpha: bool) -> Result<RasterImage, AssetError> {
    let img = decode_png(path.as_ref())?;
    if img.width() == 0 || img.height() == 0 {
        return Err(AssetError::ZeroArea);
    }
    let channels = if keep_alpha && img.color().has_alpha() { 4 } else { 3 };
    Ok(from_dynamic(img, channels))
}

pub fn save_png(image: &RasterImage, path: impl AsRef<Path>) -> Result<(), AssetError> {
    let path = path.as_ref();
    let (w, h) = image.dims();
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        _ => image::ExtendedColorType::Rgba8,
    };
    image::save_buffer_with_format(path, image.data(), w, h, color, image::ImageFormat::Png)
        .map_err(|e| AssetError::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
