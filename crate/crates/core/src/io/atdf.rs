use crate::error::{Error, Result};
use crate::image::{DecayMap, ImageGrid};
use crate::inference::FlowField;

const MAGIC: &[u8] = b"ATDF1\n";
/// The dimension line never needs more than this many bytes.
const MAX_HEADER_LINE: usize = 64;

/// `h × w × c` tensor of 32-bit floats, channel-interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl FrameTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || !(1..=2).contains(&channels) {
            return Err(Error::InvalidParameter(format!(
                "tensor must be non-empty with 1 or 2 channels, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension {
                expected: format!("{} values", height * width * channels),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_image(img: &ImageGrid) -> Self {
        Self::single(img.height(), img.width(), img.as_slice())
    }

    pub fn from_decay(lam: &DecayMap) -> Self {
        Self::single(lam.height(), lam.width(), lam.as_slice())
    }

    fn single(height: usize, width: usize, values: &[f64]) -> Self {
        Self {
            height,
            width,
            channels: 1,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    /// Two channels `(dx, dy)` per sample.
    pub fn from_flow(flow: &FlowField) -> Self {
        let data = flow
            .dx
            .iter()
            .zip(&flow.dy)
            .flat_map(|(&x, &y)| [x as f32, y as f32])
            .collect();
        Self {
            height: flow.height,
            width: flow.width,
            channels: 2,
            data,
        }
    }

    fn single_channel(&self) -> Result<Vec<f64>> {
        if self.channels != 1 {
            return Err(Error::format(
                0,
                format!("expected a single-channel tensor, got {} channels", self.channels),
            ));
        }
        Ok(self.data.iter().map(|&v| v as f64).collect())
    }

    /// Byte offset of value `i` in an encoded file.
    fn value_offset(&self, i: usize) -> u64 {
        (MAGIC.len() + header_line(self.height, self.width, self.channels).len() + 4 * i) as u64
    }

    pub fn to_image(&self) -> Result<ImageGrid> {
        let data = self.single_channel()?;
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::format(
                self.value_offset(i),
                format!("pixel value {} is not a finite non-negative intensity", data[i]),
            ));
        }
        ImageGrid::new(self.height, self.width, data)
    }

    pub fn to_decay(&self) -> Result<DecayMap> {
        let data = self.single_channel()?;
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::format(
                self.value_offset(i),
                format!("decay value {} is outside [0, 1]", data[i]),
            ));
        }
        DecayMap::new(self.height, self.width, data)
    }
}

fn header_line(h: usize, w: usize, c: usize) -> String {
    format!("{h} {w} {c}\n")
}

pub fn encode_atdf(t: &FrameTensor) -> Vec<u8> {
    let header = header_line(t.height, t.width, t.channels);
    let mut out = Vec::with_capacity(MAGIC.len() + header.len() + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(header.as_bytes());
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_atdf(bytes: &[u8]) -> Result<FrameTensor> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let at = bytes.iter().zip(MAGIC).take_while(|(a, b)| a == b).count();
        return Err(Error::format(at as u64, "missing ATDF1 magic"));
    }
    let start = MAGIC.len();
    let rest = &bytes[start..];
    let end = rest
        .iter()
        .take(MAX_HEADER_LINE)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(start as u64, "dimension line is missing or too long"))?;
    let line = std::str::from_utf8(&rest[..end])
        .map_err(|e| Error::format((start + e.valid_up_to()) as u64, "dimension line is not ASCII"))?;
    let mut dims = [0usize; 3];
    let mut fields = line.split(' ');
    let mut offset = start;
    for (i, d) in dims.iter_mut().enumerate() {
        let field = fields
            .next()
            .ok_or_else(|| Error::format((start + end) as u64, "expected 'h w c'"))?;
        if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) || (field.len() > 1 && field.starts_with('0')) {
            return Err(Error::format(offset as u64, format!("dimension {i} '{field}' is not an unsigned integer without leading zeros")));
        }
        *d = field
            .parse()
            .map_err(|_| Error::format(offset as u64, format!("dimension {i} '{field}' overflows")))?;
        offset += field.len() + 1;
    }
    if fields.next().is_some() {
        return Err(Error::format(offset as u64, "trailing fields after 'h w c'"));
    }
    let [h, w, c] = dims;
    if h == 0 || w == 0 || !(1..=2).contains(&c) {
        return Err(Error::format(
            start as u64,
            format!("bad dimensions {h}x{w}x{c} (need h, w >= 1 and c in 1..=2)"),
        ));
    }
    let payload_at = start + end + 1;
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(start as u64, "dimensions overflow"))?;
    let payload = &bytes[payload_at..];
    if payload.len() != 4 * count {
        let at = payload_at + payload.len().min(4 * count);
        let msg = if payload.len() < 4 * count {
            format!("payload truncated: {} of {} bytes", payload.len(), 4 * count)
        } else {
            format!("{} trailing bytes after payload", payload.len() - 4 * count)
        };
        return Err(Error::format(at as u64, msg));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(FrameTensor {
        height: h,
        width: w,
        channels: c,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn random_image_round_trips_bit_exactly() {
        let data: Vec<f32> = (0..35).map(|i| ((i * 7919) % 101) as f32 / 97.0).collect();
        let t = FrameTensor::new(7, 5, 1, data).unwrap();
        let bytes = encode_atdf(&t);
        assert_eq!(bytes.len(), 6 + "7 5 1\n".len() + 4 * 35);
        assert_eq!(decode_atdf(&bytes).unwrap(), t);
    }

    #[test]
    fn errors_carry_byte_offsets() {
        let t = FrameTensor::new(2, 2, 1, vec![0.5; 4]).unwrap();
        let good = encode_atdf(&t);
        let offset = |b: &[u8]| match decode_atdf(b) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };
        assert_eq!(offset(b"ATDX1\n2 2 1\n"), 3);
        assert_eq!(offset(&good[..good.len() - 3]), 12 + 13);
        let mut long = good.clone();
        long.push(0);
        assert_eq!(offset(&long), 12 + 16);
        assert_eq!(offset(b"ATDF1\n2 x 1\n"), 8);
        assert_eq!(offset(b"ATDF1\n2 2 3\n"), 6);
        assert_eq!(offset(b"ATDF1\n2 2"), 6);
        assert_eq!(offset(b"ATDF1\n2 02 1\n"), 8);
    }

    #[test]
    fn negative_pixel_reports_its_offset() {
        let t = FrameTensor::new(1, 3, 1, vec![0.1, -0.2, 0.3]).unwrap();
        match t.to_image() {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 6 + 6 + 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flow_is_channel_interleaved() {
        let flow = FlowField {
            height: 1,
            width: 2,
            stride: 1,
            dx: vec![1.0, 2.0],
            dy: vec![-1.0, -2.0],
        };
        assert_eq!(FrameTensor::from_flow(&flow).data, vec![1.0, -1.0, 2.0, -2.0]);
    }

    proptest! {
        #[test]
        fn any_tensor_round_trips(h in 1usize..6, w in 1usize..6, c in 1usize..=2, seed in any::<u32>()) {
            let data: Vec<f32> = (0..h * w * c)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 40503)))
                .collect();
            let t = FrameTensor::new(h, w, c, data).unwrap();
            let back = decode_atdf(&encode_atdf(&t)).unwrap();
            let same = back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same && back.height == h && back.width == w && back.channels == c);
        }

        #[test]
        fn decoded_tensors_reencode_to_the_same_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..48)) {
            let mut framed = b"ATDF1\n1 2 1\n".to_vec();
            framed.extend_from_slice(&bytes);
            if let Ok(t) = decode_atdf(&framed) {
                prop_assert_eq!(encode_atdf(&t), framed);
            }
        }

        #[test]
        fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_atdf(&bytes);
            let mut framed = b"ATDF1\n".to_vec();
            framed.extend_from_slice(&bytes);
            let _ = decode_atdf(&framed);
        }
    }
}
