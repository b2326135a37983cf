//! Ridge-flow coding: walks the skeleton from the core point and emits the
//! 32-symbol direction-code sequence (one meta-base row per image).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::imaging::BinaryImage;
use crate::orientation::{wrap_half, CoreBits, CorePoint, OrientationField};

/// Number of control points per record.
pub const RFP_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum RfpError {
    #[error("no movement: step (0,0) has no direction code")]
    NoMovement,
    #[error("no ridge pixel within {0} pixels of the core")]
    NoRidgeNearCore(usize),
    #[error("code sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// The six pattern classes a record may be labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    Arch,
    TentedArch,
    LeftLoop,
    RightLoop,
    Whorl,
    TwinLoop,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 6] = [
        ClassLabel::Arch,
        ClassLabel::TentedArch,
        ClassLabel::LeftLoop,
        ClassLabel::RightLoop,
        ClassLabel::Whorl,
        ClassLabel::TwinLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Arch => "arch",
            ClassLabel::TentedArch => "tented-arch",
            ClassLabel::LeftLoop => "left-loop",
            ClassLabel::RightLoop => "right-loop",
            ClassLabel::Whorl => "whorl",
            ClassLabel::TwinLoop => "twin-loop",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown class {s:?}"))
    }
}

/// One meta-base record: the 32-code ridge flow pattern plus the features
/// used by identification search (alpha = true minutiae count, beta =
/// recurrence ridge count, delta = 10-bit core code). `alpha`/`beta` are 0
/// until enrollment fills them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RidgeFlowPattern {
    pub image_id: String,
    pub codes: Vec<u8>,
    pub class_label: Option<ClassLabel>,
    pub alpha: u32,
    pub beta: u32,
    pub delta: CoreBits,
}

impl RidgeFlowPattern {
    pub fn new(image_id: impl Into<String>, codes: Vec<u8>) -> Self {
        assert_eq!(codes.len(), RFP_LEN, "a record holds exactly 32 codes");
        assert!(codes.iter().all(|&c| c < 8), "codes are in 0..8");
        Self {
            image_id: image_id.into(),
            codes,
            class_label: None,
            alpha: 0,
            beta: 0,
            delta: CoreBits::default(),
        }
    }
}

/// The ordered collection of enrolled records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetaBase {
    pub records: Vec<RidgeFlowPattern>,
}

impl MetaBase {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn find(&self, image_id: &str) -> Option<&RidgeFlowPattern> {
        self.records.iter().find(|r| r.image_id == image_id)
    }
}

/// Direction code for a unit step: `Z = 4(dx+2) + (dy+2)` selects one of the
/// eight codes. x grows rightward, y grows downward.
pub fn direction_code(dx: i32, dy: i32) -> Result<u8, RfpError> {
    debug_assert!((-1..=1).contains(&dx) && (-1..=1).contains(&dy));
    let z = 4 * (dx + 2) + (dy + 2);
    match z {
        11 => Ok(0),
        7 => Ok(1),
        6 => Ok(2),
        5 => Ok(3),
        9 => Ok(4),
        13 => Ok(5),
        14 => Ok(6),
        15 => Ok(7),
        _ => Err(RfpError::NoMovement),
    }
}

/// Inverse of [`direction_code`]: the unit step for a code.
pub fn code_step(code: u8) -> (i32, i32) {
    match code {
        0 => (0, 1),
        1 => (-1, 1),
        2 => (-1, 0),
        3 => (-1, -1),
        4 => (0, -1),
        5 => (1, -1),
        6 => (1, 0),
        7 => (1, 1),
        _ => panic!("code out of range: {code}"),
    }
}

/// Walk parameters: `n` codes are emitted, moving `stride` pixels between
/// control points.
#[derive(Debug, Clone, Copy)]
pub struct ExtractParams {
    pub n: usize,
    pub stride: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            n: RFP_LEN,
            stride: 4,
        }
    }
}

/// Result of a ridge-flow walk: the emitted codes and how many tail
/// positions had to be padded because the ridge ran out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfpExtraction {
    pub codes: Vec<u8>,
    pub padded: usize,
}

/// Extracts the ridge-flow code sequence.
///
/// The walk starts at the ridge pixel nearest the core and repeatedly steps
/// `stride` pixels in the 8-neighbor direction that lands on an unvisited
/// ridge pixel while deviating least from the local block orientation.
/// Equal deviations prefer the direction that continues the previous code,
/// then the smaller code value. When no step is possible the walk resumes at
/// the nearest unvisited ridge pixel within two blocks of the current
/// position; if none exists the remaining codes repeat the last emitted one.
pub fn extract_rfp(
    skeleton: &BinaryImage,
    field: &OrientationField,
    core: &CorePoint,
    params: &ExtractParams,
) -> Result<RfpExtraction, RfpError> {
    let reach = 2 * field.block;
    let start = nearest_ridge_pixel(skeleton, core.x, core.y, reach, |_, _| true)
        .ok_or(RfpError::NoRidgeNearCore(reach))?;

    let mut visited = vec![false; skeleton.width * skeleton.height];
    let mark_radius = (params.stride / 2).max(1);
    mark_segment(&mut visited, skeleton.width, start, start, mark_radius);

    let mut codes = Vec::with_capacity(params.n);
    let mut padded = 0usize;
    let mut pos = start;
    let mut prev: Option<u8> = None;

    while codes.len() < params.n {
        let choice = best_step(skeleton, field, &visited, pos, prev, params.stride);
        if let Some((code, target)) = choice {
            mark_segment(&mut visited, skeleton.width, pos, target, mark_radius);
            codes.push(code);
            prev = Some(code);
            pos = target;
            continue;
        }
        // Ridge ended: resume at the nearest unvisited ridge pixel nearby.
        let resume = nearest_ridge_pixel(skeleton, pos.0 as f64, pos.1 as f64, reach, |x, y| {
            !visited[y * skeleton.width + x]
        });
        match resume {
            Some(p) => {
                mark_segment(&mut visited, skeleton.width, p, p, mark_radius);
                pos = p;
            }
            None => {
                let pad = prev.unwrap_or(0);
                padded = params.n - codes.len();
                codes.resize(params.n, pad);
            }
        }
    }
    Ok(RfpExtraction { codes, padded })
}

/// Best stride step from `pos`, if any: `(code, target)`.
fn best_step(
    skeleton: &BinaryImage,
    field: &OrientationField,
    visited: &[bool],
    pos: (usize, usize),
    prev: Option<u8>,
    stride: usize,
) -> Option<(u8, (usize, usize))> {
    let mut best: Option<(f64, u8, (usize, usize))> = None;
    for code in 0..8u8 {
        let (dx, dy) = code_step(code);
        let tx = pos.0 as isize + dx as isize * stride as isize;
        let ty = pos.1 as isize + dy as isize * stride as isize;
        if tx < 0 || ty < 0 || tx as usize >= skeleton.width || ty as usize >= skeleton.height {
            continue;
        }
        let target = (tx as usize, ty as usize);
        if !skeleton.get(target.0, target.1) || visited[target.1 * skeleton.width + target.0] {
            continue;
        }
        let deviation = step_deviation(field, target, pos, dx, dy);
        let better = match &best {
            None => true,
            Some((bd, bc, _)) => {
                if (deviation - bd).abs() <= 1e-9 {
                    // Tie: prefer continuing the previous code, then the
                    // smaller code value.
                    let cand_cont = prev == Some(code);
                    let best_cont = prev == Some(*bc);
                    cand_cont && !best_cont || (cand_cont == best_cont && code < *bc)
                } else {
                    deviation < *bd
                }
            }
        };
        if better {
            best = Some((deviation, code, target));
        }
    }
    best.map(|(_, code, target)| (code, target))
}

/// Angular deviation of a step from the local orientation, folded into
/// `[0, pi/2]`. Uses the target block's theta, falling back to the current
/// block's; zero when neither is valid.
fn step_deviation(
    field: &OrientationField,
    target: (usize, usize),
    pos: (usize, usize),
    dx: i32,
    dy: i32,
) -> f64 {
    let theta_at = |p: (usize, usize)| {
        let r = (p.1 / field.block).min(field.rows.saturating_sub(1));
        let c = (p.0 / field.block).min(field.cols.saturating_sub(1));
        let i = field.idx(r, c);
        field.valid[i].then_some(field.theta[i])
    };
    let theta = theta_at(target).or_else(|| theta_at(pos));
    match theta {
        Some(t) => {
            let step_angle = (dy as f64).atan2(dx as f64);
            wrap_half(step_angle - t).abs()
        }
        None => 0.0,
    }
}

/// Nearest ridge pixel to `(x, y)` within Chebyshev distance `reach`
/// satisfying `accept`; Euclidean nearest, ties in scan order.
fn nearest_ridge_pixel(
    skeleton: &BinaryImage,
    x: f64,
    y: f64,
    reach: usize,
    accept: impl Fn(usize, usize) -> bool,
) -> Option<(usize, usize)> {
    let x0 = (x.round() as isize - reach as isize).max(0) as usize;
    let y0 = (y.round() as isize - reach as isize).max(0) as usize;
    let x1 = ((x.round() as isize + reach as isize) as usize).min(skeleton.width - 1);
    let y1 = ((y.round() as isize + reach as isize) as usize).min(skeleton.height - 1);
    let mut best: Option<(f64, (usize, usize))> = None;
    for py in y0..=y1 {
        for px in x0..=x1 {
            if !skeleton.get(px, py) || !accept(px, py) {
                continue;
            }
            let d = (px as f64 - x).powi(2) + (py as f64 - y).powi(2);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, (px, py)));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Marks every pixel within Chebyshev distance `radius` of the straight
/// segment `from`→`to` as visited.
fn mark_segment(
    visited: &mut [bool],
    width: usize,
    from: (usize, usize),
    to: (usize, usize),
    radius: usize,
) {
    let height = visited.len() / width;
    let steps = (from.0 as isize - to.0 as isize)
        .abs()
        .max((from.1 as isize - to.1 as isize).abs()) as usize;
    for s in 0..=steps {
        let t = if steps == 0 { 0.0 } else { s as f64 / steps as f64 };
        let cx = (from.0 as f64 + t * (to.0 as f64 - from.0 as f64)).round() as isize;
        let cy = (from.1 as f64 + t * (to.1 as f64 - from.1 as f64)).round() as isize;
        for dy in -(radius as isize)..=radius as isize {
            for dx in -(radius as isize)..=radius as isize {
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && py >= 0 && (px as usize) < width && (py as usize) < height {
                    visited[py as usize * width + px as usize] = true;
                }
            }
        }
    }
}

/// A per-image enrollment failure, collected without aborting the batch.
#[derive(Debug, Clone)]
pub struct EnrollFailure {
    pub image_id: String,
    pub reason: String,
}

/// Runs the full image pipeline over a batch and assembles the meta-base.
/// Records keep the input order; failures are reported per image.
pub fn build_metabase(
    images: &[(String, crate::imaging::GrayImage)],
    config: &crate::pipeline::PipelineConfig,
) -> (MetaBase, Vec<EnrollFailure>) {
    let mut meta = MetaBase::default();
    let mut failures = Vec::new();
    for (id, img) in images {
        match crate::pipeline::enroll_image(id, img, config) {
            Ok(record) => meta.records.push(record),
            Err(e) => failures.push(EnrollFailure {
                image_id: id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (meta, failures)
}

/// Categorical item-set view of a record: `(position, code)` pairs. This is
/// the representation the clustering similarity is defined over.
pub fn encode_binary(codes: &[u8]) -> BTreeSet<(u16, u8)> {
    codes
        .iter()
        .enumerate()
        .map(|(i, &c)| ((i + 1) as u16, c))
        .collect()
}

/// Maps a code sequence into Euclidean space: each code becomes a unit
/// vector at angle `2*pi*c/8`, the whole vector scaled by `1/sqrt(n)` so a
/// full record has unit norm. Neighboring codes (7 and 0 included) stay
/// close, unlike raw integer distance.
pub fn angular_embedding(codes: &[u8]) -> Vec<f64> {
    let scale = 1.0 / (codes.len() as f64).sqrt();
    let mut out = Vec::with_capacity(codes.len() * 2);
    for &c in codes {
        let a = 2.0 * PI * c as f64 / 8.0;
        out.push(scale * a.cos());
        out.push(scale * a.sin());
    }
    out
}
