use super::ssim::ssim;
use super::{Image, LossConfig};
use crate::geometry::InverseDepthMap;
use crate::{Error, Result};

/// Per-pixel `α(1 − SSIM)/2 + (1 − α)·L1` and its mean over `mask`.
pub fn photometric_loss(
    i_t: &Image,
    i_hat: &Image,
    mask: &[bool],
    config: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    i_t.check_shape(i_hat)?;
    let n = i_t.width() * i_t.height();
    if mask.len() != n {
        return Err(Error::shape(n, mask.len()));
    }
    let s = if config.alpha > 0.0 { ssim(i_t, i_hat, config.ssim_window)? } else { vec![1.0; n] };
    let c = i_t.channels();
    let per_pixel: Vec<f64> = (0..n)
        .map(|i| {
            let l1 = (0..c)
                .map(|ch| (i_t.data()[i * c + ch] - i_hat.data()[i * c + ch]).abs())
                .sum::<f64>()
                / c as f64;
            let structural = if config.alpha > 0.0 { config.alpha * (1.0 - s[i]) / 2.0 } else { 0.0 };
            structural + (1.0 - config.alpha) * l1
        })
        .collect();
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(Error::NoValidPixels);
    }
    let total: f64 = per_pixel.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
    Ok((total / valid as f64, per_pixel))
}

/// Edge-aware smoothness of the mean-normalized inverse depth.
pub fn smoothness_loss(inv_depth: &InverseDepthMap, image: &Image, lambda: f64) -> Result<f64> {
    let (w, h) = (image.width(), image.height());
    inv_depth.check_dims(w, h)?;
    let d = inv_depth.values();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    if mean == 0.0 {
        return Err(Error::DegenerateFit("mean inverse depth is zero".into()));
    }
    let c = image.channels();
    let grad_i = |a: usize, b: usize| {
        (0..c).map(|ch| (image.data()[a * c + ch] - image.data()[b * c + ch]).abs()).sum::<f64>() / c as f64
    };
    let term = |a: usize, b: usize| ((d[b] - d[a]) / mean).abs() * (-grad_i(a, b)).exp();
    let mean_of = |pairs: Vec<(usize, usize)>| {
        if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().map(|&(a, b)| term(a, b)).sum::<f64>() / pairs.len() as f64
        }
    };
    let xs = (0..h).flat_map(|v| (0..w.saturating_sub(1)).map(move |u| (v * w + u, v * w + u + 1)));
    let ys = (0..h.saturating_sub(1)).flat_map(|v| (0..w).map(move |u| (v * w + u, (v + 1) * w + u)));
    Ok(lambda * (mean_of(xs.collect()) + mean_of(ys.collect())))
}
