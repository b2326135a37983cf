//! Raster containers and the four-stage preprocessing chain: enhancement,
//! binarization, segmentation and thinning.

mod enhance;
mod pgm;
mod segment;
mod thin;

pub use enhance::enhance_fft_blocks;
pub use pgm::{load_pgm, save_pgm};
pub use segment::segment_gradient;
pub use thin::thin;

use thiserror::Error;

/// Errors raised by image I/O and preprocessing stages.
#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("{path}: {kind} at byte offset {offset}")]
    PgmFormat {
        path: String,
        kind: String,
        offset: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("image {width}x{height} too small for the pipeline (minimum 32x32)")]
    TooSmall { width: usize, height: usize },
    #[error("segmentation failed: no foreground blocks above the gradient threshold")]
    SegmentationFailed,
}

/// 8-bit grayscale raster, row-major, 0 = black and 255 = white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

/// Binary raster: `true` = ridge, `false` = valley. Carries the optional
/// region-of-interest mask produced by segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    pub roi: Option<RoiMask>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "bit buffer size mismatch");
        Self {
            width,
            height,
            bits,
            roi: None,
        }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Ridge pixel count.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Clears every ridge bit outside the mask.
    pub fn apply_roi(&mut self, roi: &RoiMask) {
        assert_eq!((self.width, self.height), (roi.width, roi.height));
        for (bit, &inside) in self.bits.iter_mut().zip(roi.inside.iter()) {
            *bit &= inside;
        }
        self.roi = Some(roi.clone());
    }

    /// Renders ridge pixels as 0 (black) on a 255 background.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = self.bits.iter().map(|&b| if b { 0 } else { 255 }).collect();
        GrayImage::new(self.width, self.height, pixels)
    }
}

/// Pixel-resolution foreground mask: `true` = inside the fingerprint area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    pub width: usize,
    pub height: usize,
    pub inside: Vec<bool>,
}

impl RoiMask {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            inside: vec![true; width * height],
        }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.inside[y * self.width + x]
    }
}

/// Histogram equalization: each intensity maps to `round(255 * CDF(v))`.
/// The mapping is monotone non-decreasing by construction.
pub fn equalize_histogram(img: &GrayImage) -> GrayImage {
    let mut hist = [0u64; 256];
    for &p in &img.pixels {
        hist[p as usize] += 1;
    }
    let total = img.pixels.len() as f64;
    let mut map = [0u8; 256];
    let mut cum = 0u64;
    for v in 0..256 {
        cum += hist[v];
        map[v] = (255.0 * cum as f64 / total).round().min(255.0) as u8;
    }
    let pixels = img.pixels.iter().map(|&p| map[p as usize]).collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// Adaptive block-mean binarization. Intensities are inverted first so that
/// dark ridges become high values; a pixel is ridge iff its inverted value is
/// strictly greater than the mean inverted value of its block. Constant
/// blocks therefore binarize to all-valley.
pub fn binarize_adaptive(img: &GrayImage, block: usize) -> BinaryImage {
    assert!(block > 0);
    let mut out = BinaryImage::empty(img.width, img.height);
    let mut by = 0;
    while by < img.height {
        let bh = block.min(img.height - by);
        let mut bx = 0;
        while bx < img.width {
            let bw = block.min(img.width - bx);
            let mut sum = 0u64;
            for y in by..by + bh {
                for x in bx..bx + bw {
                    sum += 255 - img.get(x, y) as u64;
                }
            }
            let mean = sum as f64 / (bw * bh) as f64;
            for y in by..by + bh {
                for x in bx..bx + bw {
                    let inv = (255 - img.get(x, y) as u64) as f64;
                    out.set(x, y, inv > mean);
                }
            }
            bx += block;
        }
        by += block;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equalize_constant_image_saturates() {
        let img = GrayImage::filled(8, 8, 100);
        let eq = equalize_histogram(&img);
        assert!(eq.pixels.iter().all(|&p| p == 255));
    }

    #[test]
    fn equalize_two_level_image() {
        // Half zeros, half 255s: CDF(0) = 0.5 so zeros map to round(127.5) = 128.
        let mut pixels = vec![0u8; 32];
        pixels.extend(vec![255u8; 32]);
        let eq = equalize_histogram(&GrayImage::new(8, 8, pixels));
        assert!(eq.pixels[..32].iter().all(|&p| p == 128));
        assert!(eq.pixels[32..].iter().all(|&p| p == 255));
    }

    #[test]
    fn equalize_uniform_histogram_is_near_identity() {
        // One pixel per level 0..=255: level v has CDF (v+1)/256, so the
        // mapped value differs from v by at most one intensity step.
        let pixels: Vec<u8> = (0..256).map(|v| v as u8).collect();
        let eq = equalize_histogram(&GrayImage::new(16, 16, pixels));
        for v in 0..256usize {
            let expected = (255.0 * (v as f64 + 1.0) / 256.0).round() as i32;
            assert_eq!(eq.pixels[v] as i32, expected);
            assert!((eq.pixels[v] as i32 - v as i32).abs() <= 1);
        }
    }

    #[test]
    fn equalize_mapping_is_monotone() {
        let pixels: Vec<u8> = (0..4096).map(|i| ((i * 37 + 11) % 256) as u8).collect();
        let img = GrayImage::new(64, 64, pixels);
        let eq = equalize_histogram(&img);
        // Reconstruct the per-level mapping and check monotonicity.
        let mut map = [None::<u8>; 256];
        for (i, &p) in img.pixels.iter().enumerate() {
            map[p as usize] = Some(eq.pixels[i]);
        }
        let mut last = 0u8;
        for m in map.iter().flatten() {
            assert!(*m >= last);
            last = *m;
        }
    }

    #[test]
    fn binarize_constant_block_is_all_zero() {
        let img = GrayImage::filled(16, 16, 77);
        let bin = binarize_adaptive(&img, 16);
        assert_eq!(bin.count_ones(), 0);
    }

    #[test]
    fn binarize_two_level_block() {
        // Half pixels 0 (ridge, inverts to 255), half 200 (inverts to 55):
        // mean inverted = 155, so only the dark half exceeds it.
        let mut img = GrayImage::filled(16, 16, 200);
        for y in 0..16 {
            for x in 0..8 {
                img.set(x, y, 0);
            }
        }
        let bin = binarize_adaptive(&img, 16);
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(bin.get(x, y), x < 8, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn binarize_dark_stripe_on_white() {
        let mut img = GrayImage::filled(32, 32, 255);
        for y in 0..32 {
            for x in 14..18 {
                img.set(x, y, 10);
            }
        }
        let bin = binarize_adaptive(&img, 16);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(bin.get(x, y), (14..18).contains(&x));
            }
        }
    }
}
