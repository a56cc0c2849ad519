use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelId {
    Gray,
    Red,
    Green,
    Blue,
}

impl ChannelId {
    pub const ALL: [ChannelId; 4] = [ChannelId::Gray, ChannelId::Red, ChannelId::Green, ChannelId::Blue];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Gray => "gray",
            ChannelId::Red => "red",
            ChannelId::Green => "green",
            ChannelId::Blue => "blue",
        }
    }
}

/// Single 8-bit projection of an input image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelImage {
    width: u32,
    height: u32,
    channel: ChannelId,
    data: Vec<u8>,
}

impl ChannelImage {
    pub fn new(width: u32, height: u32, channel: ChannelId, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "channel image must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "channel data has {} bytes, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        Ok(ChannelImage {
            width,
            height,
            channel,
            data,
        })
    }

    pub fn from_gray(img: &GrayImage, channel: ChannelId) -> Result<Self> {
        Self::new(img.width(), img.height(), channel, img.as_raw().clone())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channel(&self) -> ChannelId {
        self.channel
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn inverted(&self) -> ChannelImage {
        ChannelImage {
            data: self.data.iter().map(|v| 255 - v).collect(),
            ..self.clone()
        }
    }
}

/// Luma with 0.299/0.587/0.114 weights, rounded half away from zero.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Gray, red, green and blue projections of an RGB image.
pub fn project_rgb(img: &RgbImage) -> Vec<ChannelImage> {
    let n = img.width() as usize * img.height() as usize;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in img.pixels() {
        let [r, g, b] = px.0;
        planes[0].push(luma(r, g, b));
        planes[1].push(r);
        planes[2].push(g);
        planes[3].push(b);
    }
    ChannelId::ALL
        .iter()
        .zip(planes)
        .map(|(&id, data)| ChannelImage {
            width: img.width(),
            height: img.height(),
            channel: id,
            data,
        })
        .collect()
}

/// Channel projections of a decoded image: four for color input, only the
/// gray channel for grayscale input. Alpha is ignored.
pub fn project_channels(image: &DynamicImage) -> Result<Vec<ChannelImage>> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::Decode("image has zero extent".into()));
    }
    match image {
        DynamicImage::ImageLuma8(g) => Ok(vec![ChannelImage::from_gray(g, ChannelId::Gray)?]),
        DynamicImage::ImageLumaA8(_) => Ok(vec![ChannelImage::from_gray(
            &image.to_luma8(),
            ChannelId::Gray,
        )?]),
        DynamicImage::ImageRgb8(rgb) => Ok(project_rgb(rgb)),
        DynamicImage::ImageRgba8(_) => Ok(project_rgb(&image.to_rgb8())),
        other => Err(Error::Decode(format!(
            "unsupported pixel format {:?}; expected 8-bit gray or RGB",
            other.color()
        ))),
    }
}

/// Which projections feed region extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelSet {
    Gray,
    /// Gray plus the red, green and blue planes.
    #[default]
    Mserpp,
}

/// Projections of `image` restricted to `set`.
pub fn select_channels(image: &DynamicImage, set: ChannelSet) -> Result<Vec<ChannelImage>> {
    let mut all = project_channels(image)?;
    if set == ChannelSet::Gray {
        all.truncate(1);
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn white_image_gives_four_white_channels() {
        let img = RgbImage::from_pixel(5, 4, Rgb([255, 255, 255]));
        let ch = project_channels(&DynamicImage::ImageRgb8(img)).unwrap();
        assert_eq!(ch.len(), 4);
        for c in &ch {
            assert!(c.data().iter().all(|&v| v == 255));
        }
    }

    #[test]
    fn pure_red_separates() {
        let img = RgbImage::from_pixel(3, 3, Rgb([255, 0, 0]));
        let ch = project_rgb(&img);
        assert_eq!(ch[1].channel(), ChannelId::Red);
        assert!(ch[1].data().iter().all(|&v| v == 255));
        assert!(ch[2].data().iter().all(|&v| v == 0));
        assert!(ch[3].data().iter().all(|&v| v == 0));
    }

    #[test]
    fn luma_of_sample_pixel() {
        assert_eq!(luma(30, 120, 200), 102);
    }

    #[test]
    fn gray_input_gives_one_channel() {
        let img = GrayImage::from_pixel(4, 4, image::Luma([9]));
        let ch = project_channels(&DynamicImage::ImageLuma8(img)).unwrap();
        assert_eq!(ch.len(), 1);
        assert_eq!(ch[0].channel(), ChannelId::Gray);
    }

    #[test]
    fn sixteen_bit_is_rejected() {
        let img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(2, 2);
        let err = project_channels(&DynamicImage::ImageLuma16(img)).unwrap_err();
        assert!(matches!(err, Error::Decode(_)));
    }
}
