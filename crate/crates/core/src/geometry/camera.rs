use std::path::Path;

use nalgebra::{Vector2, Vector3};

use crate::{Error, Result};

/// Slack on the image bounds so round-tripped border pixels stay inside.
pub const BOUNDS_EPS: f64 = 1e-9;

/// Pinhole intrinsics. Integer pixel coordinates address pixel centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Config(format!(
                "focal lengths must be finite and positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be non-zero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> PixelGrid {
        PixelGrid {
            width: self.width,
            height: self.height,
        }
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    /// True when `(u, v)` lies within the span of pixel centers,
    /// `[0, width - 1] x [0, height - 1]`, up to [`BOUNDS_EPS`].
    pub fn contains(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= -BOUNDS_EPS
            && uv.y >= -BOUNDS_EPS
            && uv.x <= self.width as f64 - 1.0 + BOUNDS_EPS
            && uv.y <= self.height as f64 - 1.0 + BOUNDS_EPS
    }

    /// Parses the one-line `fx fy cx cy width height` format.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut found = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if found.is_some() {
                return Err(Error::ParseLine {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: "unexpected second record".into(),
                });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |message: String| Error::ParseLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let mut vals = [0.0f64; 4];
            for (slot, tok) in vals.iter_mut().zip(&fields[..4]) {
                *slot = tok
                    .parse()
                    .map_err(|_| err(format!("not a number: {tok:?}")))?;
            }
            let width: usize = fields[4]
                .parse()
                .map_err(|_| err(format!("not an image width: {:?}", fields[4])))?;
            let height: usize = fields[5]
                .parse()
                .map_err(|_| err(format!("not an image height: {:?}", fields[5])))?;
            found = Some(Self::new(vals[0], vals[1], vals[2], vals[3], width, height)?);
        }
        found.ok_or_else(|| Error::ParseLine {
            path: path.to_path_buf(),
            line: 0,
            message: "no intrinsics record".into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        format!(
            "# fx fy cx cy width height\n{} {} {} {} {} {}\n",
            self.fx, self.fy, self.cx, self.cy, self.width, self.height
        )
    }
}

/// Row-major lattice of pixel centers covering `[0, width) x [0, height)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
}

impl PixelGrid {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, index: usize) -> Vector2<f64> {
        Vector2::new((index % self.width) as f64, (index / self.width) as f64)
    }

    pub fn iter(&self) -> impl Iterator<Item = Vector2<f64>> + '_ {
        (0..self.len()).map(|i| self.coord(i))
    }
}

pub fn project(k: &CameraIntrinsics, p: &Vector3<f64>) -> Result<Vector2<f64>> {
    if p.z <= 0.0 {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(project_unchecked(k, p))
}

pub fn backproject(k: &CameraIntrinsics, pixel: &Vector2<f64>, inv_depth: f64) -> Result<Vector3<f64>> {
    if !(inv_depth > 0.0) || !inv_depth.is_finite() {
        return Err(Error::InvalidDepth { value: inv_depth });
    }
    Ok(backproject_unchecked(k, pixel, inv_depth))
}

#[inline]
pub(crate) fn project_unchecked(k: &CameraIntrinsics, p: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)
}

#[inline]
pub(crate) fn ray(k: &CameraIntrinsics, pixel: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0)
}

#[inline]
pub(crate) fn backproject_unchecked(
    k: &CameraIntrinsics,
    pixel: &Vector2<f64>,
    inv_depth: f64,
) -> Vector3<f64> {
    ray(k, pixel) / inv_depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn project_hand_evaluated() {
        let uv = project(&k100(), &Vector3::new(1.0, 2.0, 10.0)).unwrap();
        assert_eq!(uv, Vector2::new(60.0, 70.0));
    }

    #[test]
    fn principal_ray_hits_principal_point() {
        for z in [0.1, 1.0, 37.5] {
            assert_eq!(project(&k100(), &Vector3::new(0.0, 0.0, z)).unwrap(), Vector2::new(50.0, 50.0));
        }
    }

    #[test]
    fn project_rejects_zero_depth() {
        assert!(matches!(
            project(&k100(), &Vector3::new(1.0, 1.0, 0.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn backproject_principal_point() {
        let p = backproject(&k100(), &Vector2::new(50.0, 50.0), 0.25).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 4.0));
    }

    #[test]
    fn backproject_rejects_zero_inverse_depth() {
        assert!(matches!(
            backproject(&k100(), &Vector2::new(3.0, 4.0), 0.0),
            Err(Error::InvalidDepth { .. })
        ));
    }

    #[test]
    fn intrinsics_file_parsing() {
        let k = CameraIntrinsics::parse("# camera\n 20 21 11.5 7.5 24 16 # trailing\n\n", Path::new("k.txt")).unwrap();
        assert_eq!(k, CameraIntrinsics::new(20.0, 21.0, 11.5, 7.5, 24, 16).unwrap());
        let again = CameraIntrinsics::parse(&k.to_text(), Path::new("k.txt")).unwrap();
        assert_eq!(again, k);
        assert!(CameraIntrinsics::parse("20 21 11.5 7.5 24", Path::new("k.txt")).is_err());
        assert!(CameraIntrinsics::parse("20 21 30 7.5 24 16", Path::new("k.txt")).is_err());
        assert!(CameraIntrinsics::parse("-1 21 3 7.5 24 16", Path::new("k.txt")).is_err());
    }

    proptest! {
        #[test]
        fn project_backproject_roundtrip(
            fx in 10.0f64..500.0, fy in 10.0f64..500.0,
            u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.01f64..10.0,
        ) {
            let k = CameraIntrinsics::new(fx, fy, 320.0, 240.0, 640, 480).unwrap();
            let q = Vector2::new(u, v);
            let back = project(&k, &backproject(&k, &q, d).unwrap()).unwrap();
            prop_assert!((back - q).amax() < 1e-10);
        }
    }
}
