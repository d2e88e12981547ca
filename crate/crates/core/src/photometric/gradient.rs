use nalgebra::{Matrix2x3, Matrix3x6, Vector2, Vector6};

use super::loss::photometric_loss;
use super::ssim::{box_filter_adjoint, SsimTerms, SSIM_C1, SSIM_C2};
use super::warp::{check_inputs, samples, warp_image};
use super::{Image, LossConfig};
use crate::geometry::{camera_ray, hat, CameraIntrinsics, DepthMap, Pose};
use crate::Result;

/// Photometric loss of a warped context image with its gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotometricGradient {
    pub loss: f64,
    /// With respect to `ξ` in `x_t_to_c · exp(ξ)`, rotation first.
    pub pose: Vector6<f64>,
    /// With respect to each target depth; zero where the warp is masked.
    pub depth: Vec<f64>,
}

/// Reverse-mode derivative of `photometric_loss(i_t, warp_image(context, ...))`.
pub fn photometric_gradient(
    i_t: &Image,
    context: &Image,
    depth_t: &DepthMap,
    x_t_to_c: &Pose,
    k: &CameraIntrinsics,
    config: &LossConfig,
) -> Result<PhotometricGradient> {
    check_inputs(context, depth_t, k)?;
    i_t.check_shape(context)?;
    let (i_hat, mask) = warp_image(context, depth_t, x_t_to_c, k)?;
    let (loss, _) = photometric_loss(i_t, &i_hat, &mask, config)?;
    let grad_hat = loss_wrt_image(i_t, &i_hat, &mask, config);

    let ch = context.channels();
    let r = x_t_to_c.rotation_matrix();
    let mut pose = Vector6::zeros();
    let mut depth = vec![0.0; k.num_pixels()];
    for (q, s) in samples(depth_t, x_t_to_c, k).into_iter().enumerate() {
        let Some(s) = s else { continue };
        let (x0, y0, fx, fy) = s.cell();
        let mut g = Vector2::zeros();
        for c in 0..ch {
            let p = |du: usize, dv: usize| context.get(x0 + du, y0 + dv, c);
            let dx = (1.0 - fy) * (p(1, 0) - p(0, 0)) + fy * (p(1, 1) - p(0, 1));
            let dy = (1.0 - fx) * (p(0, 1) - p(0, 0)) + fx * (p(1, 1) - p(1, 0));
            g += grad_hat[q * ch + c] * Vector2::new(dx, dy);
        }
        let z = s.transformed;
        let j_proj = Matrix2x3::new(
            k.fx / z.z, 0.0, -k.fx * z.x / (z.z * z.z),
            0.0, k.fy / z.z, -k.fy * z.y / (z.z * z.z),
        );
        let row = g.transpose() * j_proj * r;
        let mut j_xi = Matrix3x6::zeros();
        j_xi.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hat(&s.point)));
        j_xi.fixed_view_mut::<3, 3>(0, 3).copy_from(&nalgebra::Matrix3::identity());
        pose += (row * j_xi).transpose();
        depth[q] = (row * camera_ray(k, &k.grid().coord(q)))[0];
    }
    Ok(PhotometricGradient { loss, pose, depth })
}

/// `∂L/∂Î` per pixel and channel.
fn loss_wrt_image(i_t: &Image, i_hat: &Image, mask: &[bool], config: &LossConfig) -> Vec<f64> {
    let (w, h, ch) = (i_t.width(), i_t.height(), i_t.channels());
    let n = w * h;
    let valid = mask.iter().filter(|&&m| m).count() as f64;
    let mut out = vec![0.0; n * ch];
    for c in 0..ch {
        let a = i_t.plane(c);
        let b = i_hat.plane(c);
        let l1 = (1.0 - config.alpha) / (ch as f64 * valid);
        for i in (0..n).filter(|&i| mask[i]) {
            let d = b[i] - a[i];
            if d != 0.0 {
                out[i * ch + c] += l1 * d.signum();
            }
        }
        if config.alpha == 0.0 {
            continue;
        }
        let t = SsimTerms::new(&a, &b, w, h, config.ssim_window);
        let g_s = -config.alpha / (2.0 * ch as f64 * valid);
        let mut g_mu = vec![0.0; n];
        let mut g_bb = vec![0.0; n];
        let mut g_ab = vec![0.0; n];
        for i in (0..n).filter(|&i| mask[i]) {
            let (ma, mb) = (t.mu_a[i], t.mu_b[i]);
            let a1 = 2.0 * ma * mb + SSIM_C1;
            let a2 = 2.0 * t.cov[i] + SSIM_C2;
            let b1 = ma * ma + mb * mb + SSIM_C1;
            let b2 = t.var_a[i] + t.var_b[i] + SSIM_C2;
            let s = a1 * a2 / (b1 * b2);
            let d_mu = 2.0 * ma * a2 / (b1 * b2) - s * 2.0 * mb / b1;
            let d_var = -s / b2;
            let d_cov = 2.0 * a1 / (b1 * b2);
            // Raw moments: var_b = E[b²] − μb², cov = E[ab] − μa·μb.
            g_mu[i] = g_s * (d_mu - 2.0 * mb * d_var - ma * d_cov);
            g_bb[i] = g_s * d_var;
            g_ab[i] = g_s * d_cov;
        }
        let win = config.ssim_window;
        let (adj_mu, adj_bb, adj_ab) = (
            box_filter_adjoint(&g_mu, w, h, win),
            box_filter_adjoint(&g_bb, w, h, win),
            box_filter_adjoint(&g_ab, w, h, win),
        );
        for i in 0..n {
            out[i * ch + c] += adj_mu[i] + 2.0 * b[i] * adj_bb[i] + a[i] * adj_ab[i];
        }
    }
    out
}

impl From<PhotometricGradient> for Vector6<f64> {
    fn from(g: PhotometricGradient) -> Self {
        g.pose
    }
}
