//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.
//!
//! Pixel values in `[0, 1]` quantize as `round(v * 255)`.

use crate::error::{Error, Result};
use crate::image::Plane;

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize(q: u8) -> f64 {
    f64::from(q) / 255.0
}

pub fn encode_pgm(plane: &Plane) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width(), plane.height()).into_bytes();
    out.extend(plane.data().iter().map(|&v| quantize(v)));
    out
}

/// Interleaves three equally sized planes as R, G, B.
pub fn encode_ppm(r: &Plane, g: &Plane, b: &Plane) -> Result<Vec<u8>> {
    if r.dims() != g.dims() || r.dims() != b.dims() {
        return Err(Error::dims(
            format!("{:?}", r.dims()),
            format!("{:?} / {:?}", g.dims(), b.dims()),
        ));
    }
    let mut out = format!("P6\n{} {}\n255\n", r.width(), r.height()).into_bytes();
    out.reserve(3 * r.data().len());
    for ((&rv, &gv), &bv) in r.data().iter().zip(g.data()).zip(b.data()) {
        out.extend_from_slice(&[quantize(rv), quantize(gv), quantize(bv)]);
    }
    Ok(out)
}

/// Decoded netpbm raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub samples: Vec<u8>,
}

impl Pnm {
    /// Channel `c` as a plane of dequantized values.
    pub fn channel(&self, c: usize) -> Result<Plane> {
        if c >= self.channels {
            return Err(Error::Input(format!(
                "channel {c} out of range for {}-channel image",
                self.channels
            )));
        }
        let data = self
            .samples
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&q| dequantize(q))
            .collect();
        Plane::new(self.width, self.height, data)
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("pnm", format!("expected a number at byte {start}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pnm> {
    if bytes.len() < 2 {
        return Err(Error::format("pnm", "truncated header"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        m => {
            return Err(Error::format(
                "pnm",
                format!("unsupported magic {:?}", String::from_utf8_lossy(m)),
            ))
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval != 255 {
        return Err(Error::format("pnm", format!("maxval {maxval} unsupported")));
    }
    // exactly one whitespace byte before the raster
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::format("pnm", "missing whitespace after maxval")),
    }
    let expected = width * height * channels;
    let raster = &bytes[h.pos..];
    if raster.len() != expected {
        return Err(Error::format(
            "pnm",
            format!("expected {expected} raster bytes, found {}", raster.len()),
        ));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        samples: raster.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_header_and_quantization_are_exact() {
        let p = Plane::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let bytes = encode_pgm(&p);
        assert_eq!(&bytes[..11], b"P5\n3 1\n255\n");
        // 0.5 * 255 = 127.5 rounds away from zero
        assert_eq!(&bytes[11..], &[0, 128, 255]);
    }

    #[test]
    fn ppm_interleaves_rgb() {
        let r = Plane::new(2, 1, vec![1.0, 0.0]).unwrap();
        let g = Plane::new(2, 1, vec![0.0, 1.0]).unwrap();
        let b = Plane::new(2, 1, vec![0.2, 0.0]).unwrap();
        let bytes = encode_ppm(&r, &g, &b).unwrap();
        assert_eq!(&bytes[..11], b"P6\n2 1\n255\n");
        assert_eq!(&bytes[11..], &[255, 0, 51, 0, 255, 0]);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.channels, 3);
        assert_eq!(back.channel(1).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(decode(b"P3\n1 1\n255\n0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn decode_skips_comments() {
        let d = decode(b"P5\n# hi\n1 1\n255\n\x07").unwrap();
        assert_eq!(d.samples, vec![7]);
    }

    proptest! {
        #[test]
        fn quantization_round_trip_is_idempotent(vals in proptest::collection::vec(0.0f64..=1.0, 1..64)) {
            let n = vals.len();
            let p = Plane::new(n, 1, vals).unwrap();
            let once = decode(&encode_pgm(&p)).unwrap().channel(0).unwrap();
            let twice = decode(&encode_pgm(&once)).unwrap().channel(0).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in p.data().iter().zip(once.data()) {
                prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
