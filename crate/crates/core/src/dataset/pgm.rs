//! Binary (P5) PGM reading and writing, 8-bit only.

use std::io::{self, Write};

use thiserror::Error;

use crate::plane::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum PgmError {
    #[error("not a binary PGM (magic {0:?})")]
    BadMagic(String),
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("maxval {0} is above 255")]
    MaxvalTooLarge(u32),
    #[error("PGM payload truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::BadHeader(format!("missing {what}")))
    }
}

/// Parses a P5 image with maxval ≤ 255.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PgmError::BadMagic(magic));
    }
    let mut h = Header { bytes, pos: 2 };
    if !h.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PgmError::BadHeader("no separator after magic".into()));
    }
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if maxval == 0 {
        return Err(PgmError::BadHeader("maxval is zero".into()));
    }
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !h.bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::BadHeader("no separator before raster".into()));
    }
    let payload = &bytes[h.pos + 1..];
    let expected = width * height;
    if payload.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            actual: payload.len(),
        });
    }
    Ok(GrayImage::from_vec(height, width, payload[..expected].to_vec()).expect("sized above"))
}

/// Serializes as P5 with maxval 255.
pub fn write_pgm<W: Write>(mut out: W, image: &GrayImage) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", image.cols(), image.rows())?;
    out.write_all(image.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_small_image() {
        let mut bytes = b"P5 4 4 255 ".to_vec();
        bytes.extend(0u8..16);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!(img.dims(), (4, 4));
        assert_eq!(img.as_slice(), &(0u8..16).collect::<Vec<_>>()[..]);
        assert_eq!(img.get(1, 2), 6);
    }

    #[test]
    fn header_comments_and_non_square() {
        let mut bytes = b"P5\n# made by hand\n3 # width\n2\n# max\n200\n".to_vec();
        bytes.extend([1, 2, 3, 4, 5, 6]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!(img.dims(), (2, 3));
        assert_eq!(img.get(1, 0), 4);
    }

    #[test]
    fn raster_may_start_with_whitespace_byte() {
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend(*b" \n");
        assert_eq!(load_pgm(&bytes).unwrap().as_slice(), b" \n");
    }

    #[test]
    fn errors() {
        assert_eq!(load_pgm(b"P2 1 1 255 1"), Err(PgmError::BadMagic("P2".into())));
        let mut bytes = b"P5 1024 1024 255\n".to_vec();
        bytes.extend([0u8; 10]);
        assert_eq!(
            load_pgm(&bytes),
            Err(PgmError::Truncated {
                expected: 1024 * 1024,
                actual: 10
            })
        );
        assert_eq!(load_pgm(b"P5 1 1 65535\n\0\0"), Err(PgmError::MaxvalTooLarge(65535)));
        assert!(matches!(load_pgm(b"P5 x 1 255\n\0"), Err(PgmError::BadHeader(_))));
    }

    #[test]
    fn write_then_read() {
        let img = GrayImage::from_fn(5, 7, |r, c| (r * 7 + c) as u8 * 3);
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert_eq!(load_pgm(&buf).unwrap(), img);
    }
}
