//! PBM reading and writing (P1 plain and P4 raw). A set bit is black.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error)]
pub enum PbmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PBM header: {0}")]
    Header(String),
    #[error("truncated or malformed pixel data: {0}")]
    Data(String),
    #[error("only square images are supported, got {width}x{height}")]
    NotSquare { width: usize, height: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PbmFormat {
    /// `P1`, ASCII digits.
    Plain,
    /// `P4`, rows packed MSB-first and padded to whole bytes.
    #[default]
    Raw,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PbmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PbmError::Header(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| PbmError::Header(format!("{what} out of range")))
    }
}

pub fn decode(data: &[u8]) -> Result<Image, PbmError> {
    if data.len() < 2 || data[0] != b'P' || !matches!(data[1], b'1' | b'4') {
        return Err(PbmError::Header("magic number must be P1 or P4".into()));
    }
    let raw = data[1] == b'4';
    let mut cur = Cursor { data, pos: 2 };
    if cur.pos < data.len() && !data[cur.pos].is_ascii_whitespace() && data[cur.pos] != b'#' {
        return Err(PbmError::Header("missing whitespace after magic number".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(PbmError::Header("zero dimension".into()));
    }
    if width != height {
        return Err(PbmError::NotSquare { width, height });
    }
    let side = width;
    let mut bits = Vec::with_capacity(side * side);

    if raw {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
            return Err(PbmError::Header("missing whitespace before raster".into()));
        }
        cur.pos += 1;
        let row_bytes = side.div_ceil(8);
        let raster = &data[cur.pos..];
        if raster.len() < row_bytes * side {
            return Err(PbmError::Data(format!(
                "expected {} raster bytes, found {}",
                row_bytes * side,
                raster.len()
            )));
        }
        for row in raster.chunks_exact(row_bytes).take(side) {
            for x in 0..side {
                bits.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
            }
        }
    } else {
        while bits.len() < side * side {
            cur.skip_space_and_comments();
            match data.get(cur.pos) {
                Some(b'0') => bits.push(false),
                Some(b'1') => bits.push(true),
                Some(&c) => return Err(PbmError::Data(format!("unexpected byte {c:#04x}"))),
                None => return Err(PbmError::Data(format!("{} of {} pixels present", bits.len(), side * side))),
            }
            cur.pos += 1;
        }
    }
    Ok(Image::from_bits(bits).expect("square raster"))
}

pub fn encode(img: &Image, format: PbmFormat) -> Vec<u8> {
    let side = img.side();
    let mut out = match format {
        PbmFormat::Raw => format!("P4\n{side} {side}\n").into_bytes(),
        PbmFormat::Plain => format!("P1\n{side} {side}\n").into_bytes(),
    };
    match format {
        PbmFormat::Raw => {
            let row_bytes = side.div_ceil(8);
            for y in 0..side {
                let mut row = vec![0u8; row_bytes];
                for x in 0..side {
                    if img.get(x, y) {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
        }
        PbmFormat::Plain => {
            for y in 0..side {
                // plain PBM lines should stay under 70 characters
                for (i, x) in (0..side).enumerate() {
                    if i > 0 {
                        out.push(if i % 34 == 0 { b'\n' } else { b' ' });
                    }
                    out.push(if img.get(x, y) { b'1' } else { b'0' });
                }
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn read(mut reader: impl Read) -> Result<Image, PbmError> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    decode(&data)
}

pub fn write(mut writer: impl Write, img: &Image, format: PbmFormat) -> Result<(), PbmError> {
    writer.write_all(&encode(img, format))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_with_comments() {
        let src = b"P1\n# a comment\n3 3\n1 0 0\n0 1 0\n0 0 1\n";
        let img = decode(src).unwrap();
        assert_eq!(img, Image::from_ascii(&["#..", ".#.", "..#"]));
    }

    #[test]
    fn raw_rows_are_padded() {
        let img = Image::from_fn(9, |x, y| x == 8 || y == 0);
        let bytes = encode(&img, PbmFormat::Raw);
        let header = b"P4\n9 9\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 9 * 2);
        // row 1 has only x = 8 set: second byte MSB
        assert_eq!(&bytes[header.len() + 2..header.len() + 4], &[0x00, 0x80]);
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn rejects_malformed_headers() {
        assert!(matches!(decode(b"P2\n2 2\n"), Err(PbmError::Header(_))));
        assert!(matches!(decode(b"P1\n2\n"), Err(PbmError::Header(_))));
        assert!(matches!(decode(b"P1\n0 0\n"), Err(PbmError::Header(_))));
        assert!(matches!(decode(b"P1\n2 3\n"), Err(PbmError::NotSquare { .. })));
        assert!(matches!(decode(b"P1\n2 2\n1 0 1"), Err(PbmError::Data(_))));
        assert!(matches!(decode(b"P1\n2 2\n1 0 2 1"), Err(PbmError::Data(_))));
        assert!(matches!(decode(b"P4\n9 9\n\x00"), Err(PbmError::Data(_))));
        assert!(matches!(decode(b"P4x 1 1\n\x00"), Err(PbmError::Header(_))));
    }

    proptest! {
        #[test]
        fn both_formats_roundtrip(side in 1usize..20, seed in any::<u64>()) {
            let img = Image::from_fn(side, |x, y| (seed >> ((x * 31 + y * 17) % 64)) & 1 == 1);
            for format in [PbmFormat::Raw, PbmFormat::Plain] {
                prop_assert_eq!(&decode(&encode(&img, format)).unwrap(), &img);
            }
        }
    }
}
