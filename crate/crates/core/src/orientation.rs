//! Block orientation field from squared gradients, consistency smoothing,
//! core point detection and the 10-bit core location code.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::{GrayImage, RoiMask};

/// Coherence below which a block does not count as valid.
pub const COHERENCE_VALID: f64 = 0.1;
/// Coherence below which smoothing replaces a block by its neighbors.
pub const COHERENCE_SMOOTH: f64 = 0.25;

#[derive(Debug, Error)]
pub enum OrientationError {
    #[error("core detection failed: orientation field has no valid blocks")]
    NoValidBlocks,
}

/// Per-block ridge orientation map. `theta` is the ridge tangent direction
/// in `[0, pi)`, not the gradient direction. `wavelength` holds the dominant
/// inter-ridge period estimate where one could be measured.
#[derive(Debug, Clone)]
pub struct OrientationField {
    pub block: usize,
    pub cols: usize,
    pub rows: usize,
    pub theta: Vec<f64>,
    pub coherence: Vec<f64>,
    pub valid: Vec<bool>,
    pub wavelength: Vec<Option<f64>>,
}

impl OrientationField {
    pub fn invalid(block: usize, cols: usize, rows: usize) -> Self {
        let n = cols * rows;
        Self {
            block,
            cols,
            rows,
            theta: vec![0.0; n],
            coherence: vec![0.0; n],
            valid: vec![false; n],
            wavelength: vec![None; n],
        }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Pixel width/height the field spans.
    pub fn pixel_dims(&self) -> (usize, usize) {
        (self.cols * self.block, self.rows * self.block)
    }

    /// Marks blocks invalid when their center lies outside the mask.
    pub fn restrict_to_roi(&mut self, roi: &RoiMask) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let cx = c * self.block + self.block / 2;
                let cy = r * self.block + self.block / 2;
                if !roi.contains(cx, cy) {
                    let i = self.idx(r, c);
                    self.valid[i] = false;
                }
            }
        }
    }
}

/// Detected reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct CorePoint {
    pub x: f64,
    pub y: f64,
    pub curvature: f64,
    pub kind: CoreKind,
    pub bits: CoreBits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreKind {
    /// A positive singular point of the orientation field.
    Singular,
    /// No singularity found (plain arch); the point is the block with the
    /// smallest inter-ridge period.
    ArchFallback,
}

/// 10-bit Morton code of the quantized core location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CoreBits(pub u16);

impl CoreBits {
    pub fn hamming(self, other: CoreBits) -> u32 {
        ((self.0 ^ other.0) & 0x3ff).count_ones()
    }
}

impl fmt::Display for CoreBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:010b}", self.0 & 0x3ff)
    }
}

impl FromStr for CoreBits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 10 || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(format!("expected 10 binary digits, got {s:?}"));
        }
        Ok(CoreBits(u16::from_str_radix(s, 2).unwrap()))
    }
}

/// Wraps an angle difference into `(-pi/2, pi/2]` (orientation space).
#[inline]
pub fn wrap_half(d: f64) -> f64 {
    let mut d = d % PI;
    if d > PI / 2.0 {
        d -= PI;
    } else if d <= -PI / 2.0 {
        d += PI;
    }
    d
}

/// Estimates the block orientation field by averaging squared Sobel
/// gradients: `theta = atan2(sum 2GxGy, sum Gx^2-Gy^2) / 2 + pi/2`, with
/// coherence the resultant length of the squared-gradient vectors.
pub fn estimate_orientation(img: &GrayImage, block: usize) -> OrientationField {
    assert!(block > 0);
    let cols = img.width.div_ceil(block);
    let rows = img.height.div_ceil(block);
    let mut field = OrientationField::invalid(block, cols, rows);

    // Per-pixel Sobel gradients, zero on the one-pixel border.
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    if w >= 3 && h >= 3 {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let p = |dx: isize, dy: isize| {
                    img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as f64
                };
                gx[y * w + x] =
                    p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
                gy[y * w + x] =
                    p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
            }
        }
    }

    for r in 0..rows {
        for c in 0..cols {
            let x1 = ((c + 1) * block).min(w);
            let y1 = ((r + 1) * block).min(h);
            let mut vx = 0.0; // sum of Gx^2 - Gy^2
            let mut vy = 0.0; // sum of 2 Gx Gy
            let mut energy = 0.0; // sum of Gx^2 + Gy^2
            for y in r * block..y1 {
                for x in c * block..x1 {
                    let (a, b) = (gx[y * w + x], gy[y * w + x]);
                    vx += a * a - b * b;
                    vy += 2.0 * a * b;
                    energy += a * a + b * b;
                }
            }
            let i = field.idx(r, c);
            if energy > 0.0 {
                let coherence = (vx * vx + vy * vy).sqrt() / energy;
                let theta = (0.5 * vy.atan2(vx) + PI / 2.0).rem_euclid(PI);
                field.theta[i] = theta;
                field.coherence[i] = coherence;
                field.valid[i] = coherence >= COHERENCE_VALID;
            }
        }
    }

    for r in 0..rows {
        for c in 0..cols {
            let i = field.idx(r, c);
            if field.valid[i] {
                field.wavelength[i] = block_wavelength(img, &field, r, c);
            }
        }
    }
    field
}

/// Estimates the dominant inter-ridge period around a block by projecting a
/// window of intensities onto the ridge normal and counting mean crossings.
fn block_wavelength(img: &GrayImage, field: &OrientationField, r: usize, c: usize) -> Option<f64> {
    let theta = field.theta[field.idx(r, c)];
    let normal = theta + PI / 2.0;
    let (nx, ny) = (normal.cos(), normal.sin());
    let half = field.block as isize; // window = 2 blocks wide
    let cx = (c * field.block + field.block / 2) as isize;
    let cy = (r * field.block + field.block / 2) as isize;

    // 1-D signature: mean intensity per unit distance along the normal.
    let span = (2 * half + 1) as usize;
    let mut sums = vec![0.0f64; 2 * span];
    let mut counts = vec![0u32; 2 * span];
    for dy in -half..=half {
        for dx in -half..=half {
            let x = cx + dx;
            let y = cy + dy;
            if x < 0 || y < 0 || x as usize >= img.width || y as usize >= img.height {
                continue;
            }
            let s = dx as f64 * nx + dy as f64 * ny;
            let bin = (s + span as f64 / 2.0).floor();
            if bin >= 0.0 && (bin as usize) < sums.len() {
                sums[bin as usize] += img.get(x as usize, y as usize) as f64;
                counts[bin as usize] += 1;
            }
        }
    }
    let sig: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| s / c as f64)
        .collect();
    if sig.len() < 6 {
        return None;
    }
    let mean = sig.iter().sum::<f64>() / sig.len() as f64;
    let mut crossings = 0u32;
    let mut first = None;
    let mut last = 0usize;
    for i in 1..sig.len() {
        if (sig[i - 1] - mean) * (sig[i] - mean) < 0.0 {
            crossings += 1;
            first.get_or_insert(i);
            last = i;
        }
    }
    if crossings >= 2 {
        // Each crossing marks half a period.
        Some(2.0 * (last - first.unwrap()) as f64 / (crossings - 1).max(1) as f64)
    } else {
        None
    }
}

/// Replaces every block whose coherence is below [`COHERENCE_SMOOTH`] by the
/// coherence-weighted doubled-angle average of its valid 3×3 neighbors.
/// Blocks at or above the threshold pass through untouched.
pub fn smooth_orientation(field: &OrientationField) -> OrientationField {
    let mut out = field.clone();
    for r in 0..field.rows {
        for c in 0..field.cols {
            let i = field.idx(r, c);
            if field.coherence[i] >= COHERENCE_SMOOTH {
                continue;
            }
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut wsum = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr as usize >= field.rows || nc as usize >= field.cols {
                        continue;
                    }
                    let j = field.idx(nr as usize, nc as usize);
                    if field.valid[j] {
                        let w = field.coherence[j];
                        sx += w * (2.0 * field.theta[j]).cos();
                        sy += w * (2.0 * field.theta[j]).sin();
                        wsum += w;
                    }
                }
            }
            if wsum > 0.0 {
                let norm = (sx * sx + sy * sy).sqrt();
                if norm > 0.0 {
                    out.theta[i] = (0.5 * sy.atan2(sx)).rem_euclid(PI);
                    out.coherence[i] = norm / wsum;
                    out.valid[i] = out.coherence[i] >= COHERENCE_VALID;
                }
            }
        }
    }
    out
}

/// Poincaré index of the 2×2 block cell whose top-left block is `(r, c)`,
/// in turns: +0.5 for a core, -0.5 for a delta, ~0 elsewhere.
pub fn poincare_index(field: &OrientationField, r: usize, c: usize) -> Option<f64> {
    let cells = [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)];
    if cells
        .iter()
        .any(|&(rr, cc)| !field.valid[field.idx(rr, cc)])
    {
        return None;
    }
    let mut total = 0.0;
    for k in 0..4 {
        let a = field.theta[field.idx(cells[k].0, cells[k].1)];
        let b = field.theta[field.idx(cells[(k + 1) % 4].0, cells[(k + 1) % 4].1)];
        total += wrap_half(b - a);
    }
    Some(total / (2.0 * PI))
}

/// Sum of absolute doubled-angle differences between a block and its valid
/// 8-neighbors; high values flag high ridge curvature.
fn block_curvature(field: &OrientationField, r: usize, c: usize) -> f64 {
    let i = field.idx(r, c);
    let mut sum = 0.0;
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr as usize >= field.rows || nc as usize >= field.cols {
                continue;
            }
            let j = field.idx(nr as usize, nc as usize);
            if field.valid[j] {
                sum += wrap_half(field.theta[j] - field.theta[i]).abs();
            }
        }
    }
    sum
}

/// Finds the core/reference point of the field.
///
/// Every interior 2×2 cell with a clearly positive Poincaré index (at least
/// a quarter turn, which covers both half-core loops and full whorl centers)
/// is a candidate; the candidate with maximum local curvature wins, ties
/// going to the smallest (row, col). Without any candidate the field is
/// treated as a plain arch and the center of the block with the smallest
/// inter-ridge period is returned (falling back to maximum curvature when no
/// period estimates exist).
pub fn find_core(field: &OrientationField) -> Result<CorePoint, OrientationError> {
    if !field.valid.iter().any(|&v| v) {
        return Err(OrientationError::NoValidBlocks);
    }
    let (width, height) = field.pixel_dims();

    let mut best: Option<(f64, usize, usize)> = None;
    if field.rows >= 2 && field.cols >= 2 {
        for r in 0..field.rows - 1 {
            for c in 0..field.cols - 1 {
                let Some(pi) = poincare_index(field, r, c) else {
                    continue;
                };
                if pi < 0.25 {
                    continue;
                }
                let curvature = block_curvature(field, r, c)
                    + block_curvature(field, r, c + 1)
                    + block_curvature(field, r + 1, c)
                    + block_curvature(field, r + 1, c + 1);
                let better = match best {
                    None => true,
                    Some((bc, br_, bc_)) => {
                        curvature > bc || (curvature == bc && (r, c) < (br_, bc_))
                    }
                };
                if better {
                    best = Some((curvature, r, c));
                }
            }
        }
    }

    if let Some((curvature, r, c)) = best {
        // Shared corner of the four blocks in the cell.
        let x = ((c + 1) * field.block) as f64;
        let y = ((r + 1) * field.block) as f64;
        return Ok(CorePoint {
            x,
            y,
            curvature,
            kind: CoreKind::Singular,
            bits: core_bit_code(x, y, width, height),
        });
    }

    // Plain arch: smallest inter-ridge period, ties topmost-leftmost.
    let mut pick: Option<(f64, usize, usize)> = None;
    for r in 0..field.rows {
        for c in 0..field.cols {
            let i = field.idx(r, c);
            if !field.valid[i] {
                continue;
            }
            if let Some(wl) = field.wavelength[i] {
                let better = match pick {
                    None => true,
                    Some((bw, _, _)) => wl < bw,
                };
                if better {
                    pick = Some((wl, r, c));
                }
            }
        }
    }
    let (r, c) = match pick {
        Some((_, r, c)) => (r, c),
        None => {
            // No period estimates (e.g. a synthetic field): use curvature.
            let mut fallback = (f64::MIN, 0usize, 0usize);
            for r in 0..field.rows {
                for c in 0..field.cols {
                    if field.valid[field.idx(r, c)] {
                        let k = block_curvature(field, r, c);
                        if k > fallback.0 {
                            fallback = (k, r, c);
                        }
                    }
                }
            }
            (fallback.1, fallback.2)
        }
    };
    let x = (c * field.block + field.block / 2) as f64;
    let y = (r * field.block + field.block / 2) as f64;
    Ok(CorePoint {
        x,
        y,
        curvature: block_curvature(field, r, c),
        kind: CoreKind::ArchFallback,
        bits: core_bit_code(x, y, width, height),
    })
}

/// Encodes a pixel position as a 10-bit Morton code: both coordinates are
/// quantized to 5 bits on a 32×32 grid and interleaved x-before-y, so the
/// bit string reads `x4 y4 x3 y3 x2 y2 x1 y1 x0 y0`.
pub fn core_bit_code(x: f64, y: f64, width: usize, height: usize) -> CoreBits {
    let qx = ((32.0 * x / width as f64).floor() as i64).clamp(0, 31) as u16;
    let qy = ((32.0 * y / height as f64).floor() as i64).clamp(0, 31) as u16;
    let mut bits = 0u16;
    for b in (0..5).rev() {
        bits = bits << 1 | (qx >> b & 1);
        bits = bits << 1 | (qy >> b & 1);
    }
    CoreBits(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn horizontal_stripes_give_theta_zero() {
        let img = synth::stripe_image(96, 96, 0.0, 9.0);
        let field = estimate_orientation(&img, 16);
        for i in 0..field.theta.len() {
            assert!(field.valid[i]);
            assert!(
                wrap_half(field.theta[i]).abs() < 0.02,
                "theta {}",
                field.theta[i]
            );
        }
    }

    #[test]
    fn diagonal_stripes_give_quarter_pi() {
        let img = synth::stripe_image(96, 96, PI / 4.0, 9.0);
        let field = estimate_orientation(&img, 16);
        for i in 0..field.theta.len() {
            assert!(field.valid[i]);
            assert!(wrap_half(field.theta[i] - PI / 4.0).abs() < 0.02);
        }
    }

    #[test]
    fn constant_block_is_invalid() {
        let img = GrayImage::filled(32, 32, 128);
        let field = estimate_orientation(&img, 16);
        assert!(field.valid.iter().all(|&v| !v));
    }

    #[test]
    fn rotated_stripes_track_angle() {
        for phi in [PI / 6.0, PI / 3.0] {
            let img = synth::stripe_image(128, 128, phi, 10.0);
            let field = estimate_orientation(&img, 16);
            for i in 0..field.theta.len() {
                if field.valid[i] {
                    assert!(
                        wrap_half(field.theta[i] - phi).abs() < 0.03,
                        "phi {phi}: got {}",
                        field.theta[i]
                    );
                }
            }
        }
    }

    fn uniform_field(theta: f64, coherence: f64) -> OrientationField {
        let mut f = OrientationField::invalid(16, 6, 6);
        for i in 0..36 {
            f.theta[i] = theta;
            f.coherence[i] = coherence;
            f.valid[i] = coherence >= COHERENCE_VALID;
        }
        f
    }

    #[test]
    fn smoothing_leaves_coherent_field_alone() {
        let f = uniform_field(PI / 3.0, 1.0);
        let s = smooth_orientation(&f);
        assert_eq!(s.theta, f.theta);
        assert_eq!(s.coherence, f.coherence);
    }

    #[test]
    fn smoothing_repairs_noisy_block() {
        let mut f = uniform_field(PI / 3.0, 1.0);
        let i = f.idx(3, 3);
        f.theta[i] = 2.9;
        f.coherence[i] = 0.05;
        f.valid[i] = false;
        let s = smooth_orientation(&f);
        assert!(wrap_half(s.theta[i] - PI / 3.0).abs() < 1e-9);
        assert!(s.valid[i]);
    }

    #[test]
    fn smoothing_never_touches_blocks_at_threshold() {
        let mut f = uniform_field(PI / 3.0, 1.0);
        let i = f.idx(2, 4);
        f.theta[i] = 0.1;
        f.coherence[i] = COHERENCE_SMOOTH;
        let s = smooth_orientation(&f);
        assert_eq!(s.theta[i], 0.1);
    }

    #[test]
    fn isolated_block_with_no_valid_neighbors_unchanged() {
        let mut f = OrientationField::invalid(16, 5, 5);
        let i = f.idx(2, 2);
        f.theta[i] = 1.0;
        f.coherence[i] = 0.2;
        f.valid[i] = true;
        let s = smooth_orientation(&f);
        assert_eq!(s.theta[i], 1.0);
        assert_eq!(s.coherence[i], 0.2);
        assert!(s.coherence[i] < COHERENCE_SMOOTH);
    }

    #[test]
    fn whorl_core_found_near_center() {
        let (field, truth) = synth::generate_field(crate::ClassLabel::Whorl, 320, 320, 5);
        let core = find_core(&field).unwrap();
        assert_eq!(core.kind, CoreKind::Singular);
        let dx = (core.x - truth[0].x).abs();
        let dy = (core.y - truth[0].y).abs();
        assert!(
            dx <= field.block as f64 && dy <= field.block as f64,
            "core ({}, {}) vs truth ({}, {})",
            core.x,
            core.y,
            truth[0].x,
            truth[0].y
        );
    }

    #[test]
    fn loop_core_found() {
        let (field, truth) = synth::generate_field(crate::ClassLabel::LeftLoop, 320, 320, 9);
        let core = find_core(&field).unwrap();
        assert_eq!(core.kind, CoreKind::Singular);
        let core_truth = truth
            .iter()
            .find(|s| s.kind == synth::SingularKind::Core)
            .unwrap();
        assert!((core.x - core_truth.x).abs() <= field.block as f64 + 1.0);
        assert!((core.y - core_truth.y).abs() <= field.block as f64 + 1.0);
    }

    #[test]
    fn arch_falls_back() {
        let (field, truth) = synth::generate_field(crate::ClassLabel::Arch, 320, 320, 3);
        assert!(truth.is_empty());
        let core = find_core(&field).unwrap();
        assert_eq!(core.kind, CoreKind::ArchFallback);
    }

    #[test]
    fn poincare_indices_sum_to_zero_with_core_and_delta() {
        let cores = [(160.0, 120.0)];
        let deltas = [(160.0, 220.0)];
        let field = synth::field_from_singularities(320, 320, 16, &cores, &deltas, 0.0);
        let mut sum = 0.0;
        for r in 0..field.rows - 1 {
            for c in 0..field.cols - 1 {
                sum += poincare_index(&field, r, c).unwrap_or(0.0);
            }
        }
        assert!(sum.abs() < 0.01, "index sum {sum}");
    }

    #[test]
    fn empty_field_is_an_error() {
        let f = OrientationField::invalid(16, 4, 4);
        assert!(find_core(&f).is_err());
    }

    #[test]
    fn morton_code_examples() {
        assert_eq!(core_bit_code(0.0, 0.0, 320, 320).to_string(), "0000000000");
        assert_eq!(
            core_bit_code(319.0, 319.0, 320, 320).to_string(),
            "1111111111"
        );
        assert_eq!(
            core_bit_code(160.0, 160.0, 320, 320).to_string(),
            "1100000000"
        );
    }

    #[test]
    fn morton_top_left_quadrant_clears_leading_bits() {
        for x in [1.0, 40.0, 159.0] {
            for y in [2.0, 77.0, 158.0] {
                let code = core_bit_code(x, y, 320, 320);
                assert_eq!(code.0 >> 8, 0, "({x},{y}) -> {code}");
            }
        }
    }

    #[test]
    fn core_bits_parse_roundtrip() {
        let bits: CoreBits = "0110101010".parse().unwrap();
        assert_eq!(bits.to_string(), "0110101010");
        assert!("011010101".parse::<CoreBits>().is_err());
        assert!("011010101x".parse::<CoreBits>().is_err());
    }
}
