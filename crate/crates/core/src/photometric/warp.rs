use nalgebra::{Vector2, Vector3};

use super::Image;
use crate::geometry::{camera_ray, project_unchecked, CameraIntrinsics, DepthMap, Pose, MIN_DEPTH};
use crate::{Error, Result};

/// Where a target pixel lands in the context frame.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    pub xy: Vector2<f64>,
    /// Target-frame point before the pose is applied.
    pub point: Vector3<f64>,
    /// Context-frame point.
    pub transformed: Vector3<f64>,
}

impl Sample {
    /// Top-left corner and fractional offsets.
    pub fn cell(&self) -> (usize, usize, f64, f64) {
        let (x0, y0) = (self.xy.x.floor(), self.xy.y.floor());
        (x0 as usize, y0 as usize, self.xy.x - x0, self.xy.y - y0)
    }
}

pub(crate) fn check_inputs(context: &Image, depth_t: &DepthMap, k: &CameraIntrinsics) -> Result<()> {
    depth_t.check_dims(k.width, k.height)?;
    if (context.width(), context.height()) != (k.width, k.height) {
        return Err(Error::Shape {
            expected: format!("{}x{}", k.width, k.height),
            actual: format!("{}x{}", context.width(), context.height()),
        });
    }
    Ok(())
}

pub(crate) fn samples(depth_t: &DepthMap, x_t_to_c: &Pose, k: &CameraIntrinsics) -> Vec<Option<Sample>> {
    let (w, h) = (k.width as f64, k.height as f64);
    k.grid()
        .iter()
        .enumerate()
        .map(|(i, uv)| {
            if !depth_t.is_valid(i) || depth_t.value(i) <= 0.0 {
                return None;
            }
            let point = depth_t.value(i) * camera_ray(k, &uv);
            let transformed = x_t_to_c.transform_point(&point);
            if transformed.z <= MIN_DEPTH {
                return None;
            }
            let xy = project_unchecked(k, &transformed);
            let (x0, y0) = (xy.x.floor(), xy.y.floor());
            let inside = x0 >= 0.0 && y0 >= 0.0 && x0 + 1.0 <= w - 1.0 && y0 + 1.0 <= h - 1.0;
            inside.then_some(Sample { xy, point, transformed })
        })
        .collect()
}

pub(crate) fn bilinear(img: &Image, s: &Sample, c: usize) -> f64 {
    let (x0, y0, fx, fy) = s.cell();
    let p = |du: usize, dv: usize| img.get(x0 + du, y0 + dv, c);
    (1.0 - fy) * ((1.0 - fx) * p(0, 0) + fx * p(1, 0)) + fy * ((1.0 - fx) * p(0, 1) + fx * p(1, 1))
}

/// Resamples `context` into the target view. Pixels whose sample is behind
/// the camera or needs an out-of-bounds corner are zero and masked out.
pub fn warp_image(
    context: &Image,
    depth_t: &DepthMap,
    x_t_to_c: &Pose,
    k: &CameraIntrinsics,
) -> Result<(Image, Vec<bool>)> {
    check_inputs(context, depth_t, k)?;
    let ch = context.channels();
    let samples = samples(depth_t, x_t_to_c, k);
    let mut data = vec![0.0; k.num_pixels() * ch];
    for (i, s) in samples.iter().enumerate() {
        if let Some(s) = s {
            for c in 0..ch {
                data[i * ch + c] = bilinear(context, s, c).clamp(0.0, 1.0);
            }
        }
    }
    let mask = samples.iter().map(Option::is_some).collect();
    Ok((Image::new(k.width, k.height, ch, data)?, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(20.0, 20.0, 7.5, 5.5, 16, 12).unwrap()
    }

    fn texture() -> Image {
        Image::from_fn(16, 12, 3, |u, v, c| {
            0.5 + 0.4 * (0.7 * u as f64 + 0.3 * c as f64).sin() * (0.5 * v as f64).cos()
        })
        .unwrap()
    }

    #[test]
    fn identity_pose_reproduces_interior() {
        let ctx = texture();
        let depth = DepthMap::constant(16, 12, 3.0);
        let (out, mask) = warp_image(&ctx, &depth, &Pose::identity(), &k()).unwrap();
        for v in 1..11 {
            for u in 1..15 {
                assert!(mask[v * 16 + u]);
                for c in 0..3 {
                    assert!((out.get(u, v, c) - ctx.get(u, v, c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn integer_disparity_shifts_columns() {
        let ctx = texture();
        let depth = DepthMap::constant(16, 12, 4.0);
        // x-translation tx moves a pixel by fx·tx/z = 20·0.6/4 = 3 columns.
        let pose = Pose::from_translation(Vector3::new(0.6, 0.0, 0.0));
        let (out, mask) = warp_image(&ctx, &depth, &pose, &k()).unwrap();
        let mut checked = 0;
        for v in 0..12 {
            for u in 0..16 {
                if mask[v * 16 + u] {
                    for c in 0..3 {
                        assert!((out.get(u, v, c) - ctx.get(u + 3, v, c)).abs() < 1e-9);
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked >= 10 * 11);
    }

    #[test]
    fn outside_frustum_is_masked() {
        let depth = DepthMap::constant(16, 12, 2.0);
        let far = Pose::from_translation(Vector3::new(50.0, 0.0, 0.0));
        let (_, mask) = warp_image(&texture(), &depth, &far, &k()).unwrap();
        assert!(mask.iter().all(|m| !m));
        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, -5.0));
        let (_, mask) = warp_image(&texture(), &depth, &behind, &k()).unwrap();
        assert!(mask.iter().all(|m| !m));
    }

    #[test]
    fn shape_mismatch() {
        let depth = DepthMap::constant(15, 12, 2.0);
        assert!(matches!(
            warp_image(&texture(), &depth, &Pose::identity(), &k()),
            Err(Error::Shape { .. })
        ));
    }
}
