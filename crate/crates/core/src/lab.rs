//! CIE-Lab image representation and sRGB conversion (D65 white point).

use image::RgbImage;

use crate::error::{Error, Result};

pub type Lab = [f64; 3];

/// An image in CIE-Lab, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: u32,
    height: u32,
    pixels: Vec<Lab>,
}

impl LabImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Lab>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DegenerateImage(format!("{width}x{height} has no pixels")));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::DegenerateImage(format!(
                "expected {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        if pixels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateImage("non-finite pixel value".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_rgb(img: &RgbImage) -> Result<Self> {
        let pixels = img.pixels().map(|p| srgb_to_lab(p.0)).collect();
        Self::new(img.width(), img.height(), pixels)
    }

    /// Every pixel set to the same Lab value.
    pub fn uniform(width: u32, height: u32, value: Lab) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Lab] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Lab {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn srgb_to_lab(rgb: [u8; 3]) -> Lab {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let fx = lab_f(x / WHITE_D65[0]);
    let fy = lab_f(y / WHITE_D65[1]);
    let fz = lab_f(z / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}
