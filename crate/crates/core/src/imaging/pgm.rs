//! Binary PGM (P5) reading and writing, 8-bit maxval 255 only.

use std::fs;
use std::path::Path;

use super::{GrayImage, ImagingError};

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: &str) -> ImagingError {
        ImagingError::PgmFormat {
            path: self.path.to_string(),
            kind: kind.to_string(),
            offset: self.pos,
        }
    }

    /// Skips whitespace and `#` comment lines between header tokens.
    fn skip_separators(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self) -> Result<usize, ImagingError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected decimal header field"));
        }
        let text = std::str::from_utf8(&self.data[start..self.pos]).unwrap();
        text.parse()
            .map_err(|_| self.err("header field out of range"))
    }
}

/// Loads a binary PGM (P5) file with maxval 255.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let data = fs::read(path).map_err(|source| ImagingError::Io {
        path: path_str.clone(),
        source,
    })?;
    parse_pgm(&data, &path_str)
}

fn parse_pgm(data: &[u8], path: &str) -> Result<GrayImage, ImagingError> {
    let mut cur = Cursor { data, pos: 0, path };
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(cur.err("not a binary PGM (expected magic P5)"));
    }
    cur.pos = 2;
    let width = cur.read_number()?;
    let height = cur.read_number()?;
    let maxval_at = {
        cur.skip_separators();
        cur.pos
    };
    let maxval = cur.read_number()?;
    if maxval != 255 {
        cur.pos = maxval_at;
        return Err(cur.err("unsupported maxval (expected 255)"));
    }
    if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("missing whitespace after maxval"));
    }
    cur.pos += 1; // single separator byte before the payload
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let payload = &data[cur.pos..];
    if payload.len() < expected {
        cur.pos = data.len();
        return Err(cur.err("truncated pixel payload"));
    }
    Ok(GrayImage::new(width, height, payload[..expected].to_vec()))
}

/// Writes `img` as binary PGM (P5), maxval 255.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let bytes = encode_pgm(img);
    fs::write(path, bytes).map_err(|source| ImagingError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn decode_small_file() {
        let img = parse_pgm(b"P5\n2 2\n255\n\x00\xff\x0a\x14", "mem").unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.pixels, vec![0, 255, 10, 20]);
    }

    #[test]
    fn roundtrip_random_image() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pixels: Vec<u8> = (0..64 * 64).map(|_| rng.gen()).collect();
        let img = GrayImage::new(64, 64, pixels);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.pgm");
        save_pgm(&img, &path).unwrap();
        let back = load_pgm(&path).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn ascii_pgm_rejected() {
        let err = parse_pgm(b"P2\n2 2\n255\n0 1 2 3\n", "mem").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("P5"), "{msg}");
        assert!(msg.contains("offset 0"), "{msg}");
    }

    #[test]
    fn wrong_maxval_rejected() {
        let err = parse_pgm(b"P5\n2 2\n65535\n\x00\x00\x00\x00", "mem").unwrap_err();
        assert!(err.to_string().contains("maxval"), "{err}");
    }

    #[test]
    fn truncated_payload_names_offset() {
        let err = parse_pgm(b"P5\n4 4\n255\n\x00\x01", "mem").unwrap_err();
        match err {
            ImagingError::PgmFormat { kind, .. } => assert!(kind.contains("truncated")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn header_comments_skipped() {
        let img = parse_pgm(b"P5\n# a comment\n2 1 255\n\x05\x06", "mem").unwrap();
        assert_eq!(img.pixels, vec![5, 6]);
    }
}
