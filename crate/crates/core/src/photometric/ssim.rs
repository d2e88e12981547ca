use super::Image;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Window mean with replicated borders, separable.
pub(crate) fn box_filter(x: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut rows = vec![0.0; x.len()];
    for v in 0..height {
        for u in 0..width {
            rows[v * width + u] = (-r..=r).map(|o| x[v * width + clamp(u as isize + o, width)]).sum();
        }
    }
    let norm = (window * window) as f64;
    let mut out = vec![0.0; x.len()];
    for v in 0..height {
        for u in 0..width {
            out[v * width + u] =
                (-r..=r).map(|o| rows[clamp(v as isize + o, height) * width + u]).sum::<f64>() / norm;
        }
    }
    out
}

/// Transpose of [`box_filter`]: scatters each output gradient back onto the
/// input pixels it averaged.
pub(crate) fn box_filter_adjoint(g: &[f64], width: usize, height: usize, window: usize) -> Vec<f64> {
    let r = (window / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let norm = (window * window) as f64;
    let mut cols = vec![0.0; g.len()];
    for v in 0..height {
        for u in 0..width {
            for o in -r..=r {
                cols[clamp(v as isize + o, height) * width + u] += g[v * width + u] / norm;
            }
        }
    }
    let mut out = vec![0.0; g.len()];
    for v in 0..height {
        for u in 0..width {
            for o in -r..=r {
                out[v * width + clamp(u as isize + o, width)] += cols[v * width + u];
            }
        }
    }
    out
}

/// Local statistics of one channel pair.
pub(crate) struct SsimTerms {
    pub mu_a: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub var_a: Vec<f64>,
    pub var_b: Vec<f64>,
    pub cov: Vec<f64>,
}

impl SsimTerms {
    pub fn new(a: &[f64], b: &[f64], width: usize, height: usize, window: usize) -> Self {
        let f = |x: &[f64]| box_filter(x, width, height, window);
        let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
        let (mu_a, mu_b) = (f(a), f(b));
        let (aa, bb, ab) = (f(&sq(a, a)), f(&sq(b, b)), f(&sq(a, b)));
        let n = a.len();
        Self {
            var_a: (0..n).map(|i| aa[i] - mu_a[i] * mu_a[i]).collect(),
            var_b: (0..n).map(|i| bb[i] - mu_b[i] * mu_b[i]).collect(),
            cov: (0..n).map(|i| ab[i] - mu_a[i] * mu_b[i]).collect(),
            mu_a,
            mu_b,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        let (ma, mb) = (self.mu_a[i], self.mu_b[i]);
        (2.0 * ma * mb + SSIM_C1) * (2.0 * self.cov[i] + SSIM_C2)
            / ((ma * ma + mb * mb + SSIM_C1) * (self.var_a[i] + self.var_b[i] + SSIM_C2))
    }
}

/// Per-pixel structural similarity, averaged over channels.
pub fn ssim(a: &Image, b: &Image, window: usize) -> crate::Result<Vec<f64>> {
    a.check_shape(b)?;
    let (w, h, c) = (a.width(), a.height(), a.channels());
    let mut out = vec![0.0; w * h];
    for ch in 0..c {
        let t = SsimTerms::new(&a.plane(ch), &b.plane(ch), w, h, window);
        for (i, o) in out.iter_mut().enumerate() {
            *o += t.value(i) / c as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> Image {
        Image::from_fn(w, h, c, |_, _, _| rng.random_range(0.0..1.0)).unwrap()
    }

    /// Direct sliding-window evaluation.
    fn ssim_loop(a: &Image, b: &Image) -> Vec<f64> {
        let (w, h) = (a.width() as isize, a.height() as isize);
        let mut out = Vec::new();
        for v in 0..h {
            for u in 0..w {
                let mut acc = 0.0;
                for c in 0..a.channels() {
                    let mut pa = Vec::new();
                    let mut pb = Vec::new();
                    for dv in -1..=1 {
                        for du in -1..=1 {
                            let uu = (u + du).clamp(0, w - 1) as usize;
                            let vv = (v + dv).clamp(0, h - 1) as usize;
                            pa.push(a.get(uu, vv, c));
                            pb.push(b.get(uu, vv, c));
                        }
                    }
                    let ma = pa.iter().sum::<f64>() / 9.0;
                    let mb = pb.iter().sum::<f64>() / 9.0;
                    let va = pa.iter().map(|x| x * x).sum::<f64>() / 9.0 - ma * ma;
                    let vb = pb.iter().map(|x| x * x).sum::<f64>() / 9.0 - mb * mb;
                    let cab = pa.iter().zip(&pb).map(|(x, y)| x * y).sum::<f64>() / 9.0 - ma * mb;
                    acc += (2.0 * ma * mb + SSIM_C1) * (2.0 * cab + SSIM_C2)
                        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                }
                out.push(acc / a.channels() as f64);
            }
        }
        out
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(&mut rng, 10, 7, 3);
        assert!(ssim(&a, &a, 3).unwrap().iter().all(|s| (s - 1.0).abs() < 1e-9));
    }

    #[test]
    fn inverted_checkerboard_is_negative() {
        let a = Image::from_fn(8, 8, 1, |u, v, _| ((u + v) % 2) as f64).unwrap();
        let b = Image::from_fn(8, 8, 1, |u, v, _| 1.0 - ((u + v) % 2) as f64).unwrap();
        assert!(ssim(&a, &b, 3).unwrap().iter().all(|&s| s < 0.0));
    }

    #[test]
    fn matches_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for c in [1, 3] {
            let a = random_image(&mut rng, 8, 8, c);
            let b = random_image(&mut rng, 8, 8, c);
            for (x, y) in ssim(&a, &b, 3).unwrap().iter().zip(ssim_loop(&a, &b)) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (7, 5);
        let x: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
        for win in [1, 3, 5] {
            let lhs: f64 = box_filter(&x, w, h, win).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = box_filter_adjoint(&y, w, h, win).iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
