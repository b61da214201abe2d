use crate::error::{Error, Result};
use crate::image::ImageGrid;

const MAXVAL: u32 = 65535;

/// Binary 16-bit PGM, intensities `[0, 1]` mapped linearly onto `[0, 65535]`
/// with round-to-nearest. Values above 1 saturate.
pub fn encode_pgm(img: &ImageGrid) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{MAXVAL}\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + 2 * img.len());
    out.extend_from_slice(header.as_bytes());
    for &v in img.as_slice() {
        let q = (v.clamp(0.0, 1.0) * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos).filter(|b| b.is_ascii_digit()) {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u32))
                .ok_or_else(|| Error::format(start as u64, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(start as u64, format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Reads a binary PGM. Any maxval in `1..=65535` is accepted (one byte per
/// sample below 256, big-endian pairs otherwise) and scaled to `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let at = bytes.iter().zip(b"P5").take_while(|(a, b)| a == b).count();
        return Err(Error::format(at as u64, "not a binary PGM (P5)"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::format(2, "expected whitespace after P5"));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(2, format!("empty image {width}x{height}")));
    }
    if !(1..=MAXVAL).contains(&maxval) {
        return Err(Error::format(maxval_at as u64, format!("maxval {maxval} outside 1..=65535")));
    }
    if !bytes.get(cur.pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::format(cur.pos as u64, "expected one whitespace byte before the raster"));
    }
    let start = cur.pos + 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| Error::format(2, "dimensions overflow"))?;
    let raster = &bytes[start..];
    if raster.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("raster truncated: {} of {need} bytes", raster.len()),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    for (i, px) in raster[..need].chunks_exact(depth).enumerate() {
        let v = if depth == 1 { px[0] as u32 } else { u16::from_be_bytes([px[0], px[1]]) as u32 };
        if v > maxval {
            return Err(Error::format((start + i * depth) as u64, format!("sample {v} exceeds maxval {maxval}")));
        }
        data.push(v as f64 * scale);
    }
    ImageGrid::new(height, width, data)
}
