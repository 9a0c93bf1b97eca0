//! Binary Netpbm: P6 (RGB) and P5 (gray), 8-bit samples, plus a 16-bit P5
//! variant used for label rasters.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("{channels} channels, expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dim(format!(
                "{} samples for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn_rgb(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for i in 0..height {
            for j in 0..width {
                data.extend_from_slice(&f(i, j));
            }
        }
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Samples of pixel `(row, col)`.
    pub fn pixel(&self, i: usize, j: usize) -> &[u8] {
        let at = (i * self.width + j) * self.channels;
        &self.data[at..at + self.channels]
    }

    /// Gray images replicated to three channels.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (header, payload) = parse_header(bytes)?;
        let channels = match header.magic {
            b'6' => 3,
            b'5' => 1,
            _ => unreachable!(),
        };
        if header.maxval != 255 {
            return Err(Error::Format(format!(
                "maxval {} unsupported, expected 255",
                header.maxval
            )));
        }
        let need = header.width * header.height * channels;
        if payload.len() < need {
            return Err(Error::Format(format!(
                "truncated payload: expected {need} bytes, found {}",
                payload.len()
            )));
        }
        Image::new(header.width, header.height, channels, payload[..need].to_vec())
    }
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Image::decode(&bytes)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, img.encode()).map_err(|e| Error::io(path, e))
}

/// Encodes a label field as P5 with maxval 65535 (two big-endian bytes per
/// sample).
pub fn encode_label_pgm16(width: usize, height: usize, labels: &[usize]) -> Result<Vec<u8>> {
    if labels.len() != width * height {
        return Err(Error::dim("label count does not match raster size"));
    }
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &l in labels {
        let v = u16::try_from(l)
            .map_err(|_| Error::invalid(format!("label {l} exceeds 16 bits")))?;
        out.extend_from_slice(&v.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_label_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<usize>)> {
    let (header, payload) = parse_header(bytes)?;
    if header.magic != b'5' || header.maxval != 65535 {
        return Err(Error::Format("expected 16-bit P5 label raster".into()));
    }
    let need = header.width * header.height * 2;
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated payload: expected {need} bytes, found {}",
            payload.len()
        )));
    }
    let labels = payload[..need]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as usize)
        .collect();
    Ok((header.width, header.height, labels))
}

struct Header {
    magic: u8,
    width: usize,
    height: usize,
    maxval: usize,
}

fn parse_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'6') {
        return Err(Error::Format("malformed header: not a binary P5/P6 file".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed header: expected a number".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed header: number out of range".into()))?;
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("malformed header: missing raster separator".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Format("malformed header: zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("malformed header: maxval {maxval}")));
    }
    Ok((
        Header {
            magic: bytes[1],
            width,
            height,
            maxval,
        },
        &bytes[pos..],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_pixel() {
        let img = Image::decode(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (1, 1, 3));
        assert_eq!(img.data(), &[255, 0, 0]);
    }

    #[test]
    fn gray_ramp() {
        let img = Image::decode(b"P5 2 2 255\n\x00\x55\xaa\xff").unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data(), &[0, 85, 170, 255]);
    }

    #[test]
    fn comments_are_skipped() {
        let img = Image::decode(b"P5\n# made by hand\n1 1\n# max\n255\n\x07").unwrap();
        assert_eq!(img.data(), &[7]);
    }

    #[test]
    fn truncated_payload() {
        let err = Image::decode(b"P6\n2 2\n255\n\x00\x00\x00\x00\x00\x00\x00\x00\x00").unwrap_err();
        assert!(err.to_string().contains("truncated payload"), "{err}");
    }

    #[test]
    fn bad_headers() {
        assert!(Image::decode(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(Image::decode(b"P6\n1\n").is_err());
        assert!(Image::decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(Image::decode(b"P5\n0 1\n255\n").is_err());
    }

    #[test]
    fn label_raster_roundtrip() {
        let labels = vec![0, 1, 300, 65535, 2, 2];
        let bytes = encode_label_pgm16(3, 2, &labels).unwrap();
        assert_eq!(decode_label_pgm16(&bytes).unwrap(), (3, 2, labels));
        assert!(encode_label_pgm16(1, 1, &[70000]).is_err());
    }
}
