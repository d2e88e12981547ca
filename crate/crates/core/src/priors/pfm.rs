use std::io::Write;
use std::path::Path;

use crate::geometry::{DepthMap, InverseDepthMap};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ParseBytes {
            path: self.path.to_path_buf(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::ParseBytes {
            path: self.path.to_path_buf(),
            offset: start,
            message: "header is not ASCII".into(),
        })
    }
}

/// Parses a single-channel PFM image into a depth map (meters).
///
/// The sign of the scale field selects endianness (negative: little).
/// Rows are stored bottom to top. Non-positive or non-finite samples are
/// marked invalid.
pub fn parse_pfm(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let mut cur = Cursor { bytes, pos: 0, path };
    let magic = cur.token()?;
    if magic != "Pf" {
        let msg = if magic == "PF" {
            "three-channel PFM is not supported".to_string()
        } else {
            format!("bad magic {magic:?}")
        };
        return Err(Error::ParseBytes {
            path: path.to_path_buf(),
            offset: 0,
            message: msg,
        });
    }
    let start = cur.pos;
    let width: usize = cur
        .token()?
        .parse()
        .map_err(|_| Error::ParseBytes { path: path.to_path_buf(), offset: start, message: "bad width".into() })?;
    let start = cur.pos;
    let height: usize = cur
        .token()?
        .parse()
        .map_err(|_| Error::ParseBytes { path: path.to_path_buf(), offset: start, message: "bad height".into() })?;
    let start = cur.pos;
    let scale: f64 = cur
        .token()?
        .parse()
        .map_err(|_| Error::ParseBytes { path: path.to_path_buf(), offset: start, message: "bad scale".into() })?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ParseBytes {
            path: path.to_path_buf(),
            offset: start,
            message: format!("scale must be non-zero, got {scale}"),
        });
    }
    // exactly one whitespace byte separates the header from the payload
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(cur.err("missing header terminator"));
    }
    cur.pos += 1;

    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < needed {
        return Err(Error::ParseBytes {
            path: path.to_path_buf(),
            offset: bytes.len(),
            message: format!("payload has {} bytes, expected {needed}", payload.len()),
        });
    }
    let little = scale < 0.0;
    let mut values = vec![0.0; width * height];
    for (k, chunk) in payload[..needed].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let file_row = k / width;
        let col = k % width;
        let row = height - 1 - file_row;
        values[row * width + col] = v as f64;
    }
    DepthMap::from_values(width, height, values)
}

pub fn load_pfm(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes, path)
}

/// Loads a PFM depth map and converts it to inverse depth.
pub fn load_depth_map(path: &Path) -> Result<InverseDepthMap> {
    Ok(load_pfm(path)?.to_inverse())
}

/// Writes a depth map as PFM; invalid entries are written as 0.
pub fn write_pfm<W: Write>(out: &mut W, depth: &DepthMap, endianness: Endianness) -> std::io::Result<()> {
    let (w, h) = depth.dims();
    let scale = match endianness {
        Endianness::Little => "-1.0",
        Endianness::Big => "1.0",
    };
    let mut buf = format!("Pf\n{w} {h}\n{scale}\n").into_bytes();
    buf.reserve(w * h * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            let i = row * w + col;
            let v = if depth.is_valid(i) { depth.value(i) as f32 } else { 0.0 };
            match endianness {
                Endianness::Little => buf.extend_from_slice(&v.to_le_bytes()),
                Endianness::Big => buf.extend_from_slice(&v.to_be_bytes()),
            }
        }
    }
    out.write_all(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test.pfm")
    }

    #[test]
    fn depths_invert_on_load() {
        // rows are stored bottom to top: file order is [1, 0], [2, 4]
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [1.0f32, 0.0, 2.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let inv = parse_pfm(&bytes, p()).unwrap().to_inverse();
        assert_eq!(inv.get(0, 0), Some(0.5));
        assert_eq!(inv.get(1, 0), Some(0.25));
        assert_eq!(inv.get(0, 1), Some(1.0));
        assert_eq!(inv.get(1, 1), None);
    }

    #[test]
    fn big_endian_matches_little_endian() {
        let depth = DepthMap::from_values(2, 2, vec![2.0, 4.0, 1.0, 0.0]).unwrap();
        let mut le = Vec::new();
        write_pfm(&mut le, &depth, Endianness::Little).unwrap();
        assert!(le.starts_with(b"Pf\n2 2\n-1.0\n"));
        assert_eq!(le.len(), 12 + 16);
        let mut be = Vec::new();
        write_pfm(&mut be, &depth, Endianness::Big).unwrap();
        assert!(be.starts_with(b"Pf\n2 2\n1.0\n"));
        let a = parse_pfm(&le, p()).unwrap();
        let b = parse_pfm(&be, p()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values(), depth.values());
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 15]);
        match parse_pfm(&bytes, p()) {
            Err(Error::ParseBytes { offset, .. }) => assert_eq!(offset, 27),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(parse_pfm(b"P5\n2 2\n-1.0\n", p()), Err(Error::ParseBytes { offset: 0, .. })));
        assert!(matches!(parse_pfm(b"PF\n2 2\n-1.0\n", p()), Err(Error::ParseBytes { .. })));
        assert!(matches!(parse_pfm(b"Pf\nx 2\n-1.0\n", p()), Err(Error::ParseBytes { offset: 2, .. })));
        assert!(matches!(parse_pfm(b"Pf\n2 2\n0\n", p()), Err(Error::ParseBytes { .. })));
        assert!(matches!(parse_pfm(b"Pf\n2 2", p()), Err(Error::ParseBytes { .. })));
    }

    proptest! {
        #[test]
        fn write_read_roundtrip(w in 1usize..9, h in 1usize..9, seed in any::<u64>(), little in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.1f32..100.0) as f64).collect();
            let depth = DepthMap::from_values(w, h, vals).unwrap();
            let mut buf = Vec::new();
            let e = if little { Endianness::Little } else { Endianness::Big };
            write_pfm(&mut buf, &depth, e).unwrap();
            let back = parse_pfm(&buf, p()).unwrap();
            for (a, b) in back.values().iter().zip(depth.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
