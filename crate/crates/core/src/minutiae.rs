//! Single-pass 5×5-window minutiae detection over the ridge skeleton with
//! positional validation and false-minutiae removal.

use std::f64::consts::PI;

use thiserror::Error;

use crate::imaging::{BinaryImage, RoiMask};

#[derive(Debug, Error)]
pub enum MinutiaeError {
    #[error("classify_window requires a ridge pixel at the window center")]
    CenterNotRidge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinutiaKind {
    Termination,
    Bifurcation,
}

impl MinutiaKind {
    pub fn name(self) -> &'static str {
        match self {
            MinutiaKind::Termination => "termination",
            MinutiaKind::Bifurcation => "bifurcation",
        }
    }
}

/// A detected ridge event. `angle` is the direction of the leaving ridge
/// (termination) or the bisector of the two closest branches (bifurcation),
/// in `[0, 2*pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Minutia {
    pub kind: MinutiaKind,
    pub x: usize,
    pub y: usize,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Border,
    BrokenRidge,
    Spur,
}

impl RejectReason {
    pub fn name(self) -> &'static str {
        match self {
            RejectReason::Border => "border",
            RejectReason::BrokenRidge => "broken-ridge",
            RejectReason::Spur => "spur",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedMinutia {
    pub x: usize,
    pub y: usize,
    pub reason: RejectReason,
}

/// Accepted and rejected detections of one skeleton.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MinutiaeSet {
    pub accepted: Vec<Minutia>,
    pub rejected: Vec<RejectedMinutia>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowClass {
    Termination,
    Bifurcation,
    None,
}

/// 5×5 binary patch, row-major, indexed `[row][col]` with the candidate
/// pixel at `[2][2]`.
pub type Window5 = [[bool; 5]; 5];

/// Classifies a 5×5 window around a ridge pixel.
///
/// With `P` the number of unit pixels excluding the center: `P = 2` is a
/// termination; `P = 6` with exactly three connected runs of unit pixels on
/// the window perimeter is a bifurcation (the run check rejects blobs and
/// delta-like triangles that merely happen to have six pixels); anything
/// else is not a minutia.
pub fn classify_window(win: &Window5) -> Result<WindowClass, MinutiaeError> {
    if !win[2][2] {
        return Err(MinutiaeError::CenterNotRidge);
    }
    let mut count = 0u32;
    for (r, row) in win.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v && (r, c) != (2, 2) {
                count += 1;
            }
        }
    }
    Ok(match count {
        2 => WindowClass::Termination,
        6 if perimeter_runs(win) == 3 => WindowClass::Bifurcation,
        _ => WindowClass::None,
    })
}

/// Perimeter cells of the 5×5 window in cyclic order, starting top-left.
fn perimeter_cells() -> [(usize, usize); 16] {
    let mut cells = [(0usize, 0usize); 16];
    let mut i = 0;
    for c in 0..5 {
        cells[i] = (0, c);
        i += 1;
    }
    for r in 1..5 {
        cells[i] = (r, 4);
        i += 1;
    }
    for c in (0..4).rev() {
        cells[i] = (4, c);
        i += 1;
    }
    for r in (1..4).rev() {
        cells[i] = (r, 0);
        i += 1;
    }
    cells
}

/// Number of maximal runs of unit pixels along the cyclic window perimeter.
fn perimeter_runs(win: &Window5) -> u32 {
    let ring: Vec<bool> = perimeter_cells()
        .iter()
        .map(|&(r, c)| win[r][c])
        .collect();
    let mut runs = 0;
    for i in 0..ring.len() {
        if ring[i] && !ring[(i + ring.len() - 1) % ring.len()] {
            runs += 1;
        }
    }
    runs
}

/// Extracts minutiae by sliding the 5×5 window over every ridge pixel at
/// least two pixels from the border. Same-kind detections within Chebyshev
/// distance 2 merge into the first-scanned position.
pub fn extract_minutiae(skeleton: &BinaryImage) -> MinutiaeSet {
    let mut set = MinutiaeSet::default();
    if skeleton.width < 5 || skeleton.height < 5 {
        return set;
    }
    for y in 2..skeleton.height - 2 {
        for x in 2..skeleton.width - 2 {
            if !skeleton.get(x, y) {
                continue;
            }
            let win = window_at(skeleton, x, y);
            let class = classify_window(&win).expect("center checked above");
            let kind = match class {
                WindowClass::Termination => MinutiaKind::Termination,
                WindowClass::Bifurcation => MinutiaKind::Bifurcation,
                WindowClass::None => continue,
            };
            let duplicate = set.accepted.iter().any(|m| {
                m.kind == kind
                    && m.x.abs_diff(x) <= 2
                    && m.y.abs_diff(y) <= 2
            });
            if !duplicate {
                set.accepted.push(Minutia {
                    kind,
                    x,
                    y,
                    angle: minutia_angle(&win, kind),
                });
            }
        }
    }
    set
}

fn window_at(skeleton: &BinaryImage, x: usize, y: usize) -> Window5 {
    let mut win = [[false; 5]; 5];
    for (r, row) in win.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = skeleton.get(x + c - 2, y + r - 2);
        }
    }
    win
}

/// Best-effort direction estimate from the window content.
fn minutia_angle(win: &Window5, kind: MinutiaKind) -> f64 {
    match kind {
        MinutiaKind::Termination => {
            // Mean offset of the branch pixels points along the ridge.
            let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0u32);
            for (r, row) in win.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v && (r, c) != (2, 2) {
                        sx += c as f64 - 2.0;
                        sy += r as f64 - 2.0;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                0.0
            } else {
                sy.atan2(sx).rem_euclid(2.0 * PI)
            }
        }
        MinutiaKind::Bifurcation => {
            // Branch directions = angles of the perimeter run centers; the
            // bifurcation direction bisects the two closest branches.
            let cells = perimeter_cells();
            let ring: Vec<bool> = cells.iter().map(|&(r, c)| win[r][c]).collect();
            let mut branches = Vec::new();
            let mut i = 0;
            while i < 16 {
                if ring[i] && !ring[(i + 15) % 16] {
                    let mut j = i;
                    let (mut sx, mut sy) = (0.0f64, 0.0f64);
                    while ring[j % 16] && j < i + 16 {
                        let (r, c) = cells[j % 16];
                        sx += c as f64 - 2.0;
                        sy += r as f64 - 2.0;
                        j += 1;
                    }
                    branches.push(sy.atan2(sx));
                }
                i += 1;
            }
            if branches.len() < 2 {
                return branches.first().copied().unwrap_or(0.0).rem_euclid(2.0 * PI);
            }
            let mut best = (f64::MAX, 0.0f64);
            for a in 0..branches.len() {
                for b in a + 1..branches.len() {
                    let mut d = (branches[a] - branches[b]).rem_euclid(2.0 * PI);
                    if d > PI {
                        d = 2.0 * PI - d;
                    }
                    if d < best.0 {
                        let bisector = branches[b] + (branches[a] - branches[b]).rem_euclid(2.0 * PI) / 2.0;
                        best = (d, bisector);
                    }
                }
            }
            best.1.rem_euclid(2.0 * PI)
        }
    }
}

/// Validation pass: rejects border minutiae, facing termination pairs
/// (broken ridges) and termination–bifurcation spurs.
///
/// * any minutia within `margin` of the ROI boundary (or image border when
///   no mask is given) is rejected;
/// * both members of a termination pair closer than `d_min` whose angles
///   oppose within 30° are rejected;
/// * a termination closer than `d_min` to a bifurcation is rejected.
pub fn remove_false(
    set: &MinutiaeSet,
    roi: Option<&RoiMask>,
    width: usize,
    height: usize,
    d_min: f64,
    margin: usize,
) -> MinutiaeSet {
    let mut out = MinutiaeSet {
        accepted: Vec::new(),
        rejected: set.rejected.clone(),
    };

    let near_boundary = |m: &Minutia| -> bool {
        let (x, y) = (m.x as isize, m.y as isize);
        let mg = margin as isize;
        for dy in -mg..=mg {
            for dx in -mg..=mg {
                let (px, py) = (x + dx, y + dy);
                let outside = px < 0
                    || py < 0
                    || px as usize >= width
                    || py as usize >= height
                    || roi.map_or(false, |r| !r.contains(px as usize, py as usize));
                if outside {
                    return true;
                }
            }
        }
        false
    };

    let mut interior: Vec<Minutia> = Vec::new();
    for m in &set.accepted {
        if near_boundary(m) {
            out.rejected.push(RejectedMinutia {
                x: m.x,
                y: m.y,
                reason: RejectReason::Border,
            });
        } else {
            interior.push(m.clone());
        }
    }

    let dist = |a: &Minutia, b: &Minutia| {
        let dx = a.x as f64 - b.x as f64;
        let dy = a.y as f64 - b.y as f64;
        (dx * dx + dy * dy).sqrt()
    };
    let opposed = |a: f64, b: f64| {
        let mut d = (a - b).rem_euclid(2.0 * PI);
        if d > PI {
            d = 2.0 * PI - d;
        }
        (d - PI).abs() <= PI / 6.0
    };

    // Broken ridges: evaluate all pairs on a snapshot so chains are stable.
    let mut broken = vec![false; interior.len()];
    for a in 0..interior.len() {
        for b in a + 1..interior.len() {
            let (ma, mb) = (&interior[a], &interior[b]);
            if ma.kind == MinutiaKind::Termination
                && mb.kind == MinutiaKind::Termination
                && dist(ma, mb) < d_min
                && opposed(ma.angle, mb.angle)
            {
                broken[a] = true;
                broken[b] = true;
            }
        }
    }
    let survivors: Vec<Minutia> = interior
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            if broken[i] {
                out.rejected.push(RejectedMinutia {
                    x: m.x,
                    y: m.y,
                    reason: RejectReason::BrokenRidge,
                });
                None
            } else {
                Some(m.clone())
            }
        })
        .collect();

    // Spurs: a termination too close to a bifurcation loses.
    for m in &survivors {
        let is_spur = m.kind == MinutiaKind::Termination
            && survivors
                .iter()
                .any(|o| o.kind == MinutiaKind::Bifurcation && dist(m, o) < d_min);
        if is_spur {
            out.rejected.push(RejectedMinutia {
                x: m.x,
                y: m.y,
                reason: RejectReason::Spur,
            });
        } else {
            out.accepted.push(m.clone());
        }
    }
    out
}

/// Number of accepted minutiae after validation (the search feature alpha).
pub fn true_minutiae_count(set: &MinutiaeSet) -> u32 {
    set.accepted.len() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_from(pixels: &[(i32, i32)]) -> Window5 {
        let mut win = [[false; 5]; 5];
        win[2][2] = true;
        for &(dx, dy) in pixels {
            win[(dy + 2) as usize][(dx + 2) as usize] = true;
        }
        win
    }

    #[test]
    fn termination_window() {
        let win = window_from(&[(-1, 0), (-2, 0)]);
        assert_eq!(classify_window(&win).unwrap(), WindowClass::Termination);
    }

    #[test]
    fn bifurcation_window() {
        let win = window_from(&[(-1, 0), (-2, 0), (1, -1), (2, -2), (1, 1), (2, 2)]);
        assert_eq!(classify_window(&win).unwrap(), WindowClass::Bifurcation);
    }

    #[test]
    fn through_ridge_is_nothing() {
        let win = window_from(&[(-1, 0), (-2, 0), (1, 0), (2, 0)]);
        assert_eq!(classify_window(&win).unwrap(), WindowClass::None);
    }

    #[test]
    fn six_pixels_without_three_runs_is_nothing() {
        // Two branches only: a thick L, six pixels but two perimeter runs.
        let win = window_from(&[(-1, 0), (-2, 0), (-2, -1), (0, 1), (0, 2), (1, 2)]);
        assert_eq!(classify_window(&win).unwrap(), WindowClass::None);
    }

    #[test]
    fn empty_center_is_error() {
        let mut win = [[false; 5]; 5];
        win[0][0] = true;
        assert!(classify_window(&win).is_err());
    }

    #[test]
    fn empty_skeleton_yields_nothing() {
        let set = extract_minutiae(&BinaryImage::empty(32, 32));
        assert!(set.accepted.is_empty() && set.rejected.is_empty());
    }

    #[test]
    fn straight_segment_has_two_terminations() {
        let mut skel = BinaryImage::empty(40, 11);
        for x in 5..35 {
            skel.set(x, 5, true);
        }
        let set = extract_minutiae(&skel);
        let terms: Vec<_> = set
            .accepted
            .iter()
            .filter(|m| m.kind == MinutiaKind::Termination)
            .collect();
        let bifs = set
            .accepted
            .iter()
            .filter(|m| m.kind == MinutiaKind::Bifurcation)
            .count();
        assert_eq!(terms.len(), 2, "{set:?}");
        assert_eq!(bifs, 0);
    }

    #[test]
    fn delta_triangle_not_a_bifurcation() {
        // A small filled triangle: a 3×3 crossing-number test would flag its
        // corners, but the 5×5 window sees too many pixels.
        let mut skel = BinaryImage::empty(20, 20);
        let tri = [
            (10, 8),
            (9, 9),
            (10, 9),
            (11, 9),
            (8, 10),
            (9, 10),
            (10, 10),
            (11, 10),
            (12, 10),
        ];
        for (x, y) in tri {
            skel.set(x, y, true);
        }
        let set = extract_minutiae(&skel);
        assert!(set
            .accepted
            .iter()
            .all(|m| m.kind != MinutiaKind::Bifurcation));
    }

    #[test]
    fn border_minutia_rejected() {
        let set = MinutiaeSet {
            accepted: vec![Minutia {
                kind: MinutiaKind::Termination,
                x: 3,
                y: 20,
                angle: 0.0,
            }],
            rejected: vec![],
        };
        let cleaned = remove_false(&set, None, 64, 64, 6.0, 8);
        assert!(cleaned.accepted.is_empty());
        assert_eq!(cleaned.rejected[0].reason, RejectReason::Border);
    }

    #[test]
    fn facing_terminations_rejected() {
        let set = MinutiaeSet {
            accepted: vec![
                Minutia {
                    kind: MinutiaKind::Termination,
                    x: 30,
                    y: 30,
                    angle: PI,
                },
                Minutia {
                    kind: MinutiaKind::Termination,
                    x: 34,
                    y: 30,
                    angle: 0.0,
                },
            ],
            rejected: vec![],
        };
        let cleaned = remove_false(&set, None, 64, 64, 6.0, 8);
        assert!(cleaned.accepted.is_empty());
        assert!(cleaned
            .rejected
            .iter()
            .all(|r| r.reason == RejectReason::BrokenRidge));
    }

    #[test]
    fn isolated_bifurcation_retained() {
        let set = MinutiaeSet {
            accepted: vec![Minutia {
                kind: MinutiaKind::Bifurcation,
                x: 30,
                y: 30,
                angle: 1.0,
            }],
            rejected: vec![],
        };
        let cleaned = remove_false(&set, None, 64, 64, 6.0, 8);
        assert_eq!(true_minutiae_count(&cleaned), 1);
    }

    #[test]
    fn removal_never_grows_accepted() {
        let mut skel = BinaryImage::empty(64, 64);
        for x in 10..50 {
            skel.set(x, 30, true);
        }
        for i in 0..12 {
            skel.set(30 + i, 30 - i, true);
        }
        let set = extract_minutiae(&skel);
        let cleaned = remove_false(&set, None, 64, 64, 6.0, 8);
        assert!(cleaned.accepted.len() <= set.accepted.len());
    }

    #[test]
    fn translation_moves_minutiae_exactly() {
        let build = |ox: usize, oy: usize| {
            let mut skel = BinaryImage::empty(80, 80);
            for x in 0..30 {
                skel.set(ox + x, oy, true);
            }
            for i in 1..10 {
                skel.set(ox + 15 + i, oy + i, true);
            }
            extract_minutiae(&skel)
        };
        let a = build(10, 10);
        let b = build(16, 13);
        assert_eq!(a.accepted.len(), b.accepted.len());
        for (ma, mb) in a.accepted.iter().zip(b.accepted.iter()) {
            assert_eq!(ma.kind, mb.kind);
            assert_eq!((ma.x + 6, ma.y + 3), (mb.x, mb.y));
        }
    }
}
