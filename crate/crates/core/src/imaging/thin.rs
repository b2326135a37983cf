//! Two-subiteration parallel thinning of binary ridge maps down to a
//! one-pixel-wide skeleton.

use super::BinaryImage;

/// Neighbor order P2..P9: N, NE, E, SE, S, SW, W, NW.
const NEIGHBORS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

#[inline]
fn neighbor_bits(img: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (i, (dx, dy)) in NEIGHBORS.iter().enumerate() {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx >= 0 && ny >= 0 && (nx as usize) < img.width && (ny as usize) < img.height {
            n[i] = img.get(nx as usize, ny as usize);
        }
    }
    n
}

/// Number of 0→1 transitions in the cyclic neighbor sequence.
#[inline]
fn transitions(n: &[bool; 8]) -> u32 {
    let mut count = 0;
    for i in 0..8 {
        if !n[i] && n[(i + 1) % 8] {
            count += 1;
        }
    }
    count
}

/// One parallel subiteration; `second` selects the second condition set.
/// Returns the number of deleted pixels.
fn subiteration(img: &mut BinaryImage, second: bool) -> usize {
    let mut marked = Vec::new();
    for y in 0..img.height {
        for x in 0..img.width {
            if !img.get(x, y) {
                continue;
            }
            let n = neighbor_bits(img, x, y);
            let b: u32 = n.iter().map(|&v| v as u32).sum();
            if !(2..=6).contains(&b) || transitions(&n) != 1 {
                continue;
            }
            // Indices into n: 0=N(P2), 2=E(P4), 4=S(P6), 6=W(P8).
            let ok = if !second {
                (!n[0] || !n[2] || !n[4]) && (!n[2] || !n[4] || !n[6])
            } else {
                (!n[0] || !n[2] || !n[6]) && (!n[0] || !n[4] || !n[6])
            };
            if ok {
                marked.push((x, y));
            }
        }
    }
    for &(x, y) in &marked {
        img.set(x, y, false);
    }
    marked.len()
}

/// Sequentially deletes one simple pixel from each remaining 2×2 all-ones
/// square. A pixel is simple when its foreground neighbors form a single
/// cyclic run, so deleting it cannot split a component. Returns deletions.
fn collapse_squares(img: &mut BinaryImage) -> usize {
    let mut removed = 0;
    if img.width < 2 || img.height < 2 {
        return 0;
    }
    for y in 0..img.height - 1 {
        for x in 0..img.width - 1 {
            if !(img.get(x, y) && img.get(x + 1, y) && img.get(x, y + 1) && img.get(x + 1, y + 1)) {
                continue;
            }
            for (px, py) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                let n = neighbor_bits(img, px, py);
                let b: u32 = n.iter().map(|&v| v as u32).sum();
                if transitions(&n) == 1 && b >= 2 {
                    img.set(px, py, false);
                    removed += 1;
                    break;
                }
            }
        }
    }
    removed
}

/// Thins a binary ridge map to a one-pixel-wide skeleton.
///
/// Runs the two parallel subiterations to a fixpoint, then collapses any
/// surviving 2×2 all-ones squares by sequential simple-point deletion, and
/// repeats until nothing changes at all. The combined fixpoint makes the
/// operation idempotent and leaves no 2×2 all-ones square.
pub fn thin(img: &BinaryImage) -> BinaryImage {
    let mut out = img.clone();
    loop {
        let mut changed = 0;
        loop {
            let pass = subiteration(&mut out, false) + subiteration(&mut out, true);
            changed += pass;
            if pass == 0 {
                break;
            }
        }
        changed += collapse_squares(&mut out);
        if changed == 0 {
            break;
        }
    }
    out
}

/// True if any 2×2 all-ones square exists (skeleton violation).
pub fn has_thick_square(img: &BinaryImage) -> bool {
    if img.width < 2 || img.height < 2 {
        return false;
    }
    for y in 0..img.height - 1 {
        for x in 0..img.width - 1 {
            if img.get(x, y) && img.get(x + 1, y) && img.get(x, y + 1) && img.get(x + 1, y + 1) {
                return true;
            }
        }
    }
    false
}

/// Number of 8-connected foreground components.
pub fn count_components(img: &BinaryImage) -> usize {
    let mut seen = vec![false; img.width * img.height];
    let mut count = 0;
    for start in 0..seen.len() {
        if !img.bits[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % img.width, i / img.width);
            for (dx, dy) in NEIGHBORS {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx as usize >= img.width || ny as usize >= img.height {
                    continue;
                }
                let j = ny as usize * img.width + nx as usize;
                if img.bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&str]) -> BinaryImage {
        let h = rows.len();
        let w = rows[0].len();
        let mut img = BinaryImage::empty(w, h);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                img.set(x, y, c == '1');
            }
        }
        img
    }

    #[test]
    fn empty_image_is_fixpoint() {
        let img = BinaryImage::empty(16, 16);
        assert_eq!(thin(&img), img);
    }

    #[test]
    fn diagonal_line_unchanged() {
        let mut img = BinaryImage::empty(20, 20);
        for i in 2..18 {
            img.set(i, i, true);
        }
        assert_eq!(thin(&img), img);
    }

    #[test]
    fn thick_bar_becomes_line() {
        // 3-wide horizontal bar of length 20.
        let mut img = BinaryImage::empty(26, 9);
        for y in 3..6 {
            for x in 3..23 {
                img.set(x, y, true);
            }
        }
        let skel = thin(&img);
        assert!(!has_thick_square(&skel));
        assert_eq!(count_components(&skel), 1);
        // Every column of the original bar interior keeps exactly one pixel,
        // and the surviving endpoints sit within one pixel of the bar ends.
        let xs: Vec<usize> = (0..skel.width)
            .filter(|&x| (0..skel.height).any(|y| skel.get(x, y)))
            .collect();
        assert!(*xs.first().unwrap() <= 4);
        assert!(*xs.last().unwrap() >= 21);
        for x in xs {
            let count = (0..skel.height).filter(|&y| skel.get(x, y)).count();
            assert_eq!(count, 1, "column {x} not one pixel wide");
        }
    }

    #[test]
    fn idempotent_on_blob() {
        let img = from_rows(&[
            "0000000000000000",
            "0011111111100000",
            "0011111111110000",
            "0011111111111000",
            "0001111111111000",
            "0001111111110000",
            "0000111111100000",
            "0000000000000000",
        ]);
        let once = thin(&img);
        let twice = thin(&once);
        assert_eq!(once, twice);
        assert!(!has_thick_square(&once));
    }

    #[test]
    fn components_never_increase_on_two_blobs() {
        let mut img = BinaryImage::empty(40, 20);
        for y in 4..9 {
            for x in 4..16 {
                img.set(x, y, true);
            }
        }
        for y in 10..16 {
            for x in 24..36 {
                img.set(x, y, true);
            }
        }
        let before = count_components(&img);
        let skel = thin(&img);
        assert!(count_components(&skel) <= before);
    }
}
