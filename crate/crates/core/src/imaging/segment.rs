//! Gradient-based foreground segmentation: blocks with enough gradient
//! activity are foreground, and the largest connected block region becomes
//! the region of interest.

use super::{GrayImage, ImagingError, RoiMask};

/// Segments the fingerprint area from the background.
///
/// A block is foreground iff its mean Sobel gradient magnitude is positive
/// and at least `tau`. When `tau` is `None` it defaults to 0.35 times the
/// global mean block gradient, which is scale-free across contrast levels.
/// Only the largest 4-connected foreground block region is kept; the mask is
/// returned at pixel resolution.
pub fn segment_gradient(
    img: &GrayImage,
    block: usize,
    tau: Option<f64>,
) -> Result<RoiMask, ImagingError> {
    assert!(block > 0);
    let cols = img.width.div_ceil(block);
    let rows = img.height.div_ceil(block);

    let grad = sobel_magnitude(img);
    let mut block_mean = vec![0.0f64; cols * rows];
    for br in 0..rows {
        for bc in 0..cols {
            let x0 = bc * block;
            let y0 = br * block;
            let x1 = (x0 + block).min(img.width);
            let y1 = (y0 + block).min(img.height);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += grad[y * img.width + x];
                }
            }
            block_mean[br * cols + bc] = sum / ((x1 - x0) * (y1 - y0)) as f64;
        }
    }

    let global_mean = block_mean.iter().sum::<f64>() / block_mean.len() as f64;
    let tau = tau.unwrap_or(0.35 * global_mean);
    let foreground: Vec<bool> = block_mean.iter().map(|&m| m > 0.0 && m >= tau).collect();
    if !foreground.iter().any(|&f| f) {
        return Err(ImagingError::SegmentationFailed);
    }

    let keep = largest_component(&foreground, cols, rows);

    let mut inside = vec![false; img.width * img.height];
    for br in 0..rows {
        for bc in 0..cols {
            if keep[br * cols + bc] {
                let x1 = ((bc + 1) * block).min(img.width);
                let y1 = ((br + 1) * block).min(img.height);
                for y in br * block..y1 {
                    for x in bc * block..x1 {
                        inside[y * img.width + x] = true;
                    }
                }
            }
        }
    }
    Ok(RoiMask {
        width: img.width,
        height: img.height,
        inside,
    })
}

/// Per-pixel Sobel gradient magnitude; the one-pixel border is zero.
pub(crate) fn sobel_magnitude(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let mut out = vec![0.0f64; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| {
                img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as f64
            };
            let gx = p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
            let gy = p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
            out[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Keeps only the largest 4-connected true region (ties: first in scan order).
fn largest_component(cells: &[bool], cols: usize, rows: usize) -> Vec<bool> {
    let mut label = vec![0usize; cells.len()];
    let mut sizes = vec![0usize]; // label 0 = background
    for start in 0..cells.len() {
        if !cells[start] || label[start] != 0 {
            continue;
        }
        let id = sizes.len();
        sizes.push(0);
        let mut stack = vec![start];
        label[start] = id;
        while let Some(i) = stack.pop() {
            sizes[id] += 1;
            let (r, c) = (i / cols, i % cols);
            let mut push = |j: usize| {
                if cells[j] && label[j] == 0 {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < cols {
                push(i + 1);
            }
            if r > 0 {
                push(i - cols);
            }
            if r + 1 < rows {
                push(i + cols);
            }
        }
    }
    let best = (1..sizes.len()).max_by_key(|&id| (sizes[id], usize::MAX - id));
    let best = best.unwrap_or(0);
    label.iter().map(|&l| l == best && l != 0).collect()
}
