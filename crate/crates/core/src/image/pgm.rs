//! Netpbm reading and writing: P2/P5 graymaps and P6 pixmaps.
//!
//! 16-bit samples are big-endian. Only maxval 255 and 65535 are accepted
//! on read.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::GrayImage;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported PGM maxval {0} (expected 255 or 65535)")]
    UnsupportedMaxval(u32),
    #[error("PGM sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },
}

/// Raw samples as stored in the file, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmRaster {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub samples: Vec<u16>,
}

impl PgmRaster {
    pub fn to_image(&self) -> GrayImage {
        let scale = f64::from(self.maxval);
        let data = self.samples.iter().map(|&s| f64::from(s) / scale).collect();
        GrayImage::new(self.width, self.height, data).expect("raster is validated on parse")
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, PgmError> {
    Ok(parse_pgm(&fs::read(path)?)?.to_image())
}

pub fn read_pgm_raw(path: impl AsRef<Path>) -> Result<PgmRaster, PgmError> {
    parse_pgm(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        let tok = self
            .token()
            .ok_or_else(|| PgmError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                PgmError::MalformedHeader(format!(
                    "invalid {what}: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Parses a P2 or P5 graymap from memory.
pub fn parse_pgm(bytes: &[u8]) -> Result<PgmRaster, PgmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let binary = match cur.token() {
        Some(b"P5") => true,
        Some(b"P2") => false,
        Some(other) => {
            return Err(PgmError::MalformedHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
        None => return Err(PgmError::MalformedHeader("empty file".into())),
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 && maxval != 65535 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    let expected = width * height;
    let mut samples = Vec::with_capacity(expected);

    if binary {
        // exactly one whitespace byte separates the header from the payload
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(PgmError::TruncatedPayload { expected, found: 0 });
        }
        let payload = &bytes[cur.pos + 1..];
        if maxval == 255 {
            if payload.len() < expected {
                return Err(PgmError::TruncatedPayload {
                    expected,
                    found: payload.len(),
                });
            }
            samples.extend(payload[..expected].iter().map(|&b| u16::from(b)));
        } else {
            if payload.len() < 2 * expected {
                return Err(PgmError::TruncatedPayload {
                    expected,
                    found: payload.len() / 2,
                });
            }
            samples.extend(
                payload[..2 * expected]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]])),
            );
        }
    } else {
        while samples.len() < expected {
            let Some(tok) = cur.token() else {
                return Err(PgmError::TruncatedPayload {
                    expected,
                    found: samples.len(),
                });
            };
            let value: u32 = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| {
                    PgmError::MalformedHeader(format!(
                        "invalid sample {:?}",
                        String::from_utf8_lossy(tok)
                    ))
                })?;
            samples.push(value.min(u32::from(u16::MAX)) as u16);
            if value > maxval {
                return Err(PgmError::SampleOutOfRange { value, maxval });
            }
        }
    }
    if let Some(&s) = samples.iter().find(|&&s| u32::from(s) > maxval) {
        return Err(PgmError::SampleOutOfRange {
            value: u32::from(s),
            maxval,
        });
    }
    Ok(PgmRaster {
        width,
        height,
        maxval,
        samples,
    })
}

/// Encodes an image as 8-bit P5, mapping `[0, 1]` onto `0..=255`.
pub fn write_pgm(img: &GrayImage, mut out: impl Write) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> io::Result<()> {
    let mut buf = Vec::new();
    write_pgm(img, &mut buf)?;
    fs::write(path, buf)
}

/// Writes raw 8-bit levels (label maps) without any rescaling.
pub fn save_pgm_levels(
    width: usize,
    height: usize,
    levels: &[u8],
    path: impl AsRef<Path>,
) -> io::Result<()> {
    assert_eq!(levels.len(), width * height);
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend_from_slice(levels);
    fs::write(path, buf)
}

pub fn save_ppm(
    width: usize,
    height: usize,
    rgb: &[[u8; 3]],
    path: impl AsRef<Path>,
) -> io::Result<()> {
    assert_eq!(rgb.len(), width * height);
    let mut buf = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        buf.extend_from_slice(px);
    }
    fs::write(path, buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_8bit_normalizes() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128, 64]);
        let img = parse_pgm(&bytes).unwrap().to_image();
        let expected = [0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0];
        for (a, b) in img.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((img.data()[2] - 0.50196).abs() < 1e-5);
        assert!((img.data()[3] - 0.25098).abs() < 1e-5);
    }

    #[test]
    fn p5_truncated() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 255, 128]);
        assert!(matches!(
            parse_pgm(&bytes),
            Err(PgmError::TruncatedPayload {
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn p2_16bit() {
        let img = parse_pgm(b"P2\n# comment\n1 1\n65535\n65535\n")
            .unwrap()
            .to_image();
        assert_eq!(img.data(), &[1.0]);
    }

    #[test]
    fn p5_16bit_big_endian() {
        let mut bytes = b"P5 2 1 65535\n".to_vec();
        bytes.extend([0x80, 0x00, 0xff, 0xff]);
        let r = parse_pgm(&bytes).unwrap();
        assert_eq!(r.samples, vec![0x8000, 0xffff]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            parse_pgm(b"P7\n1 1\n255\n"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_pgm(b"P2\n1 x\n255\n"),
            Err(PgmError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_pgm(b"P2\n1 1\n1023\n5\n"),
            Err(PgmError::UnsupportedMaxval(1023))
        ));
        assert!(matches!(
            parse_pgm(b"P2\n2 1\n255\n5\n"),
            Err(PgmError::TruncatedPayload { .. })
        ));
        assert!(matches!(
            parse_pgm(b"P2\n1 1\n255\n300\n"),
            Err(PgmError::SampleOutOfRange { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let img = GrayImage::from_fn(5, 3, |x, y| ((x * 3 + y * 7) % 256) as f64 / 255.0);
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        let back = parse_pgm(&buf).unwrap().to_image();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
