//! Seeded synthetic data: labeled code records for clustering and search
//! tests, and zero-pole orientation fields rendered to ridge images for
//! full-pipeline tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::GrayImage;
use crate::orientation::{core_bit_code, CoreBits, OrientationField};
use crate::rfpcode::{ClassLabel, MetaBase, RidgeFlowPattern, RFP_LEN};
use crate::search::QueryTuple;

/// Generation parameters. `noise` is the per-position probability that a
/// code is replaced by a different random code.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub classes: Vec<ClassLabel>,
    pub per_class: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: ClassLabel::ALL.to_vec(),
            per_class: 100,
            noise: 0.1,
            seed: 42,
        }
    }
}

/// A query with its true database identity.
pub type LabeledQuery = (String, QueryTuple);

#[derive(Debug, Clone)]
pub struct SynthData {
    pub meta: MetaBase,
    pub queries: Vec<LabeledQuery>,
}

/// Hand-designed 32-code flow sketch of each class. Any two templates
/// disagree in at least 20 positions (checked by test).
pub fn class_template(class: ClassLabel) -> [u8; RFP_LEN] {
    let mut out = [0u8; RFP_LEN];
    let pattern: &[u8] = match class {
        // Gentle rise and fall around the horizontal codes.
        ClassLabel::Arch => &[6, 5, 5, 6, 6, 7, 7, 6],
        // The same crest shape over the leftward codes.
        ClassLabel::TentedArch => &[2, 1, 1, 2, 2, 3, 3, 2],
        // Slow counter-clockwise sweep.
        ClassLabel::LeftLoop => &[2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 0, 0, 1, 1],
        // Slow clockwise sweep.
        ClassLabel::RightLoop => &[6, 6, 5, 5, 4, 4, 3, 3, 2, 2, 1, 1, 0, 0, 7, 7],
        // Fast full rotations.
        ClassLabel::Whorl => &[0, 1, 2, 3, 4, 5, 6, 7],
        // Opposing sweeps.
        ClassLabel::TwinLoop => &[2, 3, 4, 5, 6, 7, 0, 1, 1, 0, 7, 6, 5, 4, 3, 2],
    };
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = pattern[i % pattern.len()];
    }
    out
}

/// Typical core quadrant of each class, as the 10-bit location code.
pub fn class_delta(class: ClassLabel) -> CoreBits {
    let (qx, qy) = match class {
        ClassLabel::Arch => (16.0, 20.0),
        ClassLabel::TentedArch => (16.0, 14.0),
        ClassLabel::LeftLoop => (11.0, 13.0),
        ClassLabel::RightLoop => (21.0, 13.0),
        ClassLabel::Whorl => (16.0, 12.0),
        ClassLabel::TwinLoop => (16.0, 18.0),
    };
    core_bit_code(qx, qy, 32, 32)
}

/// Typical feature ranges per class (inclusive).
fn class_ranges(class: ClassLabel) -> ((u32, u32), (u32, u32)) {
    match class {
        ClassLabel::Arch => ((20, 30), (8, 12)),
        ClassLabel::TentedArch => ((25, 35), (10, 14)),
        ClassLabel::LeftLoop => ((30, 40), (12, 16)),
        ClassLabel::RightLoop => ((32, 42), (14, 18)),
        ClassLabel::Whorl => ((40, 50), (16, 22)),
        ClassLabel::TwinLoop => ((38, 48), (15, 20)),
    }
}

/// Generates a labeled meta-base plus one exact query tuple per record.
/// Everything is a pure function of the spec (seeded).
pub fn generate_codes(spec: &SynthSpec) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut meta = MetaBase::default();
    let mut queries = Vec::new();
    for &class in &spec.classes {
        let template = class_template(class);
        let ((a_lo, a_hi), (b_lo, b_hi)) = class_ranges(class);
        for i in 0..spec.per_class {
            let id = format!("{}-{i:04}", class.name());
            let mut codes = template.to_vec();
            for slot in codes.iter_mut() {
                if rng.gen::<f64>() < spec.noise {
                    *slot = replace_code(&mut rng, *slot);
                }
            }
            let alpha = rng.gen_range(a_lo..=a_hi);
            let beta = rng.gen_range(b_lo..=b_hi);
            let mut delta = class_delta(class).0;
            for _ in 0..rng.gen_range(0..=2u32) {
                delta ^= 1 << rng.gen_range(0..10);
            }
            let mut record = RidgeFlowPattern::new(id.clone(), codes.clone());
            record.class_label = Some(class);
            record.alpha = alpha;
            record.beta = beta;
            record.delta = CoreBits(delta);
            meta.records.push(record);
            queries.push((
                id,
                QueryTuple {
                    alpha,
                    beta,
                    gamma: codes,
                    delta: CoreBits(delta),
                },
            ));
        }
    }
    SynthData { meta, queries }
}

/// A different code, uniform over the remaining seven.
fn replace_code(rng: &mut ChaCha8Rng, old: u8) -> u8 {
    let delta = rng.gen_range(1..8u8);
    (old + delta) % 8
}

/// Derives noisy query tuples from database records: each gamma position is
/// replaced by a different code with probability `noise`; the other tuple
/// components stay exact.
pub fn noisy_queries(meta: &MetaBase, noise: f64, seed: u64) -> Vec<LabeledQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    meta.records
        .iter()
        .map(|r| {
            let mut gamma = r.codes.clone();
            for slot in gamma.iter_mut() {
                if rng.gen::<f64>() < noise {
                    *slot = replace_code(&mut rng, *slot);
                }
            }
            (
                r.image_id.clone(),
                QueryTuple {
                    alpha: r.alpha,
                    beta: r.beta,
                    gamma,
                    delta: r.delta,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularKind {
    Core,
    Delta,
}

/// Ground-truth singularity of a generated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub x: f64,
    pub y: f64,
    pub kind: SingularKind,
}

/// Zero-pole orientation field: `theta(z) = phi0 + (sum of core angles -
/// sum of delta angles) / 2`, sampled at block centers. Every block is
/// valid with coherence 1.
pub fn field_from_singularities(
    width: usize,
    height: usize,
    block: usize,
    cores: &[(f64, f64)],
    deltas: &[(f64, f64)],
    phi0: f64,
) -> OrientationField {
    let cols = width.div_ceil(block);
    let rows = height.div_ceil(block);
    let mut field = OrientationField::invalid(block, cols, rows);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 + 0.5) * block as f64;
            let y = (r as f64 + 0.5) * block as f64;
            let mut angle = phi0;
            for &(cx, cy) in cores {
                angle += 0.5 * (y - cy).atan2(x - cx);
            }
            for &(dx, dy) in deltas {
                angle -= 0.5 * (y - dy).atan2(x - dx);
            }
            let i = field.idx(r, c);
            field.theta[i] = angle.rem_euclid(PI);
            field.coherence[i] = 1.0;
            field.valid[i] = true;
        }
    }
    field
}

/// Smooth arch field: no singularities, the orientation tilts up on one
/// side of the crest and down on the other.
fn arch_field(width: usize, height: usize, block: usize, crest_x: f64, tilt: f64) -> OrientationField {
    let cols = width.div_ceil(block);
    let rows = height.div_ceil(block);
    let mut field = OrientationField::invalid(block, cols, rows);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 + 0.5) * block as f64;
            let theta = -tilt * ((x - crest_x) / (0.25 * width as f64)).tanh();
            let i = field.idx(r, c);
            field.theta[i] = theta.rem_euclid(PI);
            field.coherence[i] = 1.0;
            field.valid[i] = true;
        }
    }
    field
}

/// Generates a class-shaped orientation field with randomized singularity
/// placement, returning the ground-truth singular points (empty for arch).
/// Left and right loops mirror each other exactly for equal seeds.
pub fn generate_field(
    class: ClassLabel,
    width: usize,
    height: usize,
    seed: u64,
) -> (OrientationField, Vec<SingularPoint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = 16;
    let (w, h) = (width as f64, height as f64);
    let jx = rng.gen_range(-0.05..0.05) * w;
    let jy = rng.gen_range(-0.05..0.05) * h;

    let core = |x: f64, y: f64| SingularPoint {
        x,
        y,
        kind: SingularKind::Core,
    };
    let delta = |x: f64, y: f64| SingularPoint {
        x,
        y,
        kind: SingularKind::Delta,
    };

    match class {
        ClassLabel::Arch => {
            let tilt = rng.gen_range(PI / 6.0..PI / 4.0);
            let field = arch_field(width, height, block, w / 2.0 + jx, tilt);
            (field, Vec::new())
        }
        ClassLabel::Whorl => {
            let (cx, cy) = (w / 2.0 + jx, h / 2.0 + jy);
            let field =
                field_from_singularities(width, height, block, &[(cx, cy), (cx, cy)], &[], PI / 2.0);
            (field, vec![core(cx, cy)])
        }
        ClassLabel::LeftLoop | ClassLabel::RightLoop => {
            let dx = rng.gen_range(0.12..0.2) * w;
            let dy = rng.gen_range(0.15..0.25) * h;
            let (cx, cy, dxs) = if class == ClassLabel::LeftLoop {
                (w / 2.0 + jx, h / 2.0 - 0.1 * h + jy, -dx)
            } else {
                (w / 2.0 - jx, h / 2.0 - 0.1 * h + jy, dx)
            };
            let (px, py) = (cx + dxs, cy + dy);
            let field =
                field_from_singularities(width, height, block, &[(cx, cy)], &[(px, py)], 0.0);
            (field, vec![core(cx, cy), delta(px, py)])
        }
        ClassLabel::TentedArch => {
            let dy = rng.gen_range(0.2..0.3) * h;
            let (cx, cy) = (w / 2.0 + jx, h / 2.0 - 0.1 * h + jy);
            let field = field_from_singularities(
                width,
                height,
                block,
                &[(cx, cy)],
                &[(cx, cy + dy)],
                0.0,
            );
            (field, vec![core(cx, cy), delta(cx, cy + dy)])
        }
        ClassLabel::TwinLoop => {
            let dx = rng.gen_range(0.1..0.15) * w;
            let dy = rng.gen_range(0.08..0.12) * h;
            let (cx, cy) = (w / 2.0 + jx, h / 2.0 + jy);
            let cores = [(cx - dx, cy - dy), (cx + dx, cy + dy)];
            let deltas = [(cx - dx, cy + 2.5 * dy), (cx + dx, cy - 2.5 * dy)];
            let field = field_from_singularities(width, height, block, &cores, &deltas, 0.0);
            (
                field,
                vec![
                    core(cores[0].0, cores[0].1),
                    core(cores[1].0, cores[1].1),
                    delta(deltas[0].0, deltas[0].1),
                    delta(deltas[1].0, deltas[1].1),
                ],
            )
        }
    }
}

/// Renders a field as a periodic ridge pattern aligned with theta:
/// `intensity = 127.5 + 127.5 * cos(2*pi*phase/period)` where the phase
/// integrates the (sign-continuous) ridge normal along the first column and
/// then along each row. Orientation is bilinearly interpolated between
/// block centers in doubled-angle space.
pub fn render_ridges(field: &OrientationField, period: f64) -> GrayImage {
    let (width, height) = field.pixel_dims();
    let normal_at = |x: usize, y: usize| -> (f64, f64) {
        let theta = interp_theta(field, x as f64, y as f64);
        let n = theta + PI / 2.0;
        (n.cos(), n.sin())
    };

    let mut phase = vec![0.0f64; width * height];
    let mut chosen = vec![(0.0f64, 0.0f64); width * height];
    for y in 0..height {
        for x in 0..width {
            let mut n = normal_at(x, y);
            let reference = if x > 0 {
                Some(chosen[y * width + x - 1])
            } else if y > 0 {
                Some(chosen[(y - 1) * width])
            } else {
                None
            };
            if let Some(prev) = reference {
                if n.0 * prev.0 + n.1 * prev.1 < 0.0 {
                    n = (-n.0, -n.1);
                }
            }
            chosen[y * width + x] = n;
            phase[y * width + x] = if x > 0 {
                phase[y * width + x - 1] + n.0
            } else if y > 0 {
                phase[(y - 1) * width] + n.1
            } else {
                0.0
            };
        }
    }

    let pixels = phase
        .iter()
        .map(|&p| {
            let v = 127.5 + 127.5 * (2.0 * PI * p / period).cos();
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(width, height, pixels)
}

/// Orientation at a pixel, bilinearly interpolated between the four nearest
/// block centers in doubled-angle space.
fn interp_theta(field: &OrientationField, x: f64, y: f64) -> f64 {
    let b = field.block as f64;
    let fc = ((x / b - 0.5).max(0.0)).min(field.cols as f64 - 1.0);
    let fr = ((y / b - 0.5).max(0.0)).min(field.rows as f64 - 1.0);
    let c0 = fc.floor() as usize;
    let r0 = fr.floor() as usize;
    let c1 = (c0 + 1).min(field.cols - 1);
    let r1 = (r0 + 1).min(field.rows - 1);
    let tx = fc - c0 as f64;
    let ty = fr - r0 as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (r, cth, wy) in [(r0, c0, (1.0 - ty) * (1.0 - tx)), (r0, c1, (1.0 - ty) * tx),
                         (r1, c0, ty * (1.0 - tx)), (r1, c1, ty * tx)]
    {
        let th = field.theta[field.idx(r, cth)];
        sx += wy * (2.0 * th).cos();
        sy += wy * (2.0 * th).sin();
    }
    0.5 * sy.atan2(sx)
}

/// Sinusoidal stripe image with ridges along `angle` and the given period.
pub fn stripe_image(width: usize, height: usize, angle: f64, period: f64) -> GrayImage {
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let s = -(x as f64) * angle.sin() + y as f64 * angle.cos();
            let v = 127.5 + 127.5 * (2.0 * PI * s / period).cos();
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::{estimate_orientation, poincare_index, wrap_half};

    #[test]
    fn templates_are_well_separated() {
        for (i, a) in ClassLabel::ALL.iter().enumerate() {
            for b in ClassLabel::ALL.iter().skip(i + 1) {
                let (ta, tb) = (class_template(*a), class_template(*b));
                let hamming = ta.iter().zip(&tb).filter(|(x, y)| x != y).count();
                assert!(hamming >= 20, "{a:?} vs {b:?}: {hamming}");
            }
        }
    }

    #[test]
    fn zero_noise_reproduces_templates() {
        let data = generate_codes(&SynthSpec {
            classes: vec![ClassLabel::Whorl],
            per_class: 5,
            noise: 0.0,
            seed: 1,
        });
        for r in &data.meta.records {
            assert_eq!(r.codes, class_template(ClassLabel::Whorl).to_vec());
        }
    }

    #[test]
    fn same_seed_is_identical() {
        let spec = SynthSpec::default();
        let a = generate_codes(&SynthSpec {
            per_class: 10,
            ..spec.clone()
        });
        let b = generate_codes(&SynthSpec {
            per_class: 10,
            ..spec
        });
        assert_eq!(a.meta, b.meta);
    }

    #[test]
    fn noise_rate_matches_binomial_expectation() {
        let data = generate_codes(&SynthSpec {
            classes: vec![ClassLabel::Arch],
            per_class: 1000,
            noise: 0.1,
            seed: 4242,
        });
        let template = class_template(ClassLabel::Arch);
        let total: usize = data
            .meta
            .records
            .iter()
            .map(|r| r.codes.iter().zip(&template).filter(|(a, b)| a != b).count())
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 3.2).abs() < 0.5, "mean flips {mean}");
    }

    #[test]
    fn delta_stays_within_two_flips() {
        let data = generate_codes(&SynthSpec {
            classes: vec![ClassLabel::LeftLoop],
            per_class: 200,
            noise: 0.1,
            seed: 7,
        });
        let base = class_delta(ClassLabel::LeftLoop);
        for r in &data.meta.records {
            assert!(r.delta.hamming(base) <= 2);
        }
    }

    #[test]
    fn whorl_center_has_unit_poincare_index() {
        let (field, truth) = generate_field(ClassLabel::Whorl, 320, 320, 11);
        let (cx, cy) = (truth[0].x, truth[0].y);
        let r = (cy / 16.0 - 0.5).floor() as usize;
        let c = (cx / 16.0 - 0.5).floor() as usize;
        let pi_val = poincare_index(&field, r, c).unwrap();
        assert!((pi_val - 1.0).abs() < 0.1, "index {pi_val}");
    }

    #[test]
    fn arch_has_no_singularities() {
        let (field, truth) = generate_field(ClassLabel::Arch, 320, 320, 11);
        assert!(truth.is_empty());
        for r in 0..field.rows - 1 {
            for c in 0..field.cols - 1 {
                let pi_val = poincare_index(&field, r, c).unwrap();
                assert!(pi_val.abs() < 0.05, "cell ({r},{c}) index {pi_val}");
            }
        }
    }

    #[test]
    fn loops_mirror_under_x_flip() {
        let (left, _) = generate_field(ClassLabel::LeftLoop, 320, 320, 23);
        let (right, _) = generate_field(ClassLabel::RightLoop, 320, 320, 23);
        for r in 0..left.rows {
            for c in 0..left.cols {
                let a = left.theta[left.idx(r, c)];
                let b = right.theta[right.idx(r, left.cols - 1 - c)];
                let diff = wrap_half(a + b).abs(); // mirror: theta -> pi - theta
                assert!(diff < 1e-9, "({r},{c}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn uniform_field_renders_horizontal_stripes() {
        let mut field = OrientationField::invalid(16, 6, 6);
        for i in 0..36 {
            field.theta[i] = 0.0;
            field.coherence[i] = 1.0;
            field.valid[i] = true;
        }
        let img = render_ridges(&field, 9.0);
        // Constant along rows, periodic down columns.
        for y in 0..img.height {
            for x in 1..img.width {
                assert_eq!(img.get(x, y), img.get(0, y));
            }
        }
        let col: Vec<u8> = (0..img.height).map(|y| img.get(0, y)).collect();
        assert!(col.iter().any(|&v| v > 200) && col.iter().any(|&v| v < 55));
    }

    #[test]
    fn rendered_period_matches_spectrum_peak() {
        let img = stripe_image(96, 96, 0.0, 9.0);
        // Dominant vertical frequency via a direct DFT down one column.
        let n = img.height;
        let mut best = (0usize, 0.0f64);
        for f in 1..n / 2 {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for y in 0..n {
                let v = img.get(10, y) as f64 - 127.5;
                let ang = -2.0 * PI * (f * y) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let mag = (re * re + im * im).sqrt();
            if mag > best.1 {
                best = (f, mag);
            }
        }
        let measured_period = n as f64 / best.0 as f64;
        assert!((measured_period - 9.0).abs() <= 1.0, "{measured_period}");
    }

    #[test]
    fn render_estimate_roundtrip_recovers_field() {
        for class in [ClassLabel::Arch, ClassLabel::LeftLoop, ClassLabel::Whorl] {
            let (field, _) = generate_field(class, 320, 320, 31);
            let img = render_ridges(&field, 9.0);
            let est = estimate_orientation(&img, 16);
            let mut checked = 0;
            let mut good = 0;
            for r in 0..field.rows {
                for c in 0..field.cols {
                    let i = field.idx(r, c);
                    if est.valid[i] && est.coherence[i] >= 0.5 {
                        checked += 1;
                        if wrap_half(est.theta[i] - field.theta[i]).abs() < 0.05 {
                            good += 1;
                        }
                    }
                }
            }
            assert!(checked > 100, "{class:?}: only {checked} blocks checked");
            assert!(
                good as f64 >= 0.95 * checked as f64,
                "{class:?}: {good}/{checked} within tolerance"
            );
        }
    }
}
