use crate::geometry::DepthMap;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleMode {
    None,
    Median,
    ShiftAndScale,
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScaleMode::None),
            "median" => Ok(ScaleMode::Median),
            "shift_and_scale" => Ok(ScaleMode::ShiftAndScale),
            other => Err(Error::Config(format!("unknown scale mode {other:?}"))),
        }
    }
}

/// Fitted affine correction `s·pred + t` of a predicted depth map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleAlignment {
    pub mode: ScaleMode,
    pub scale: f64,
    pub shift: f64,
}

impl ScaleAlignment {
    pub fn fit(mode: ScaleMode, pred: &DepthMap, reference: &DepthMap) -> Result<Self> {
        let (scale, shift) = match mode {
            ScaleMode::None => (1.0, 0.0),
            ScaleMode::Median => (median_scale(pred, reference)?, 0.0),
            ScaleMode::ShiftAndScale => shift_and_scale(pred, reference)?,
        };
        Ok(Self { mode, scale, shift })
    }

    pub fn apply(&self, pred: &DepthMap) -> DepthMap {
        let values = pred.values().iter().map(|v| self.scale * v + self.shift).collect();
        DepthMap::with_mask(pred.width(), pred.height(), values, pred.mask().to_vec())
            .expect("sizes agree by construction")
    }
}

fn joint(pred: &DepthMap, reference: &DepthMap) -> Result<Vec<(f64, f64)>> {
    reference.check_dims(pred.width(), pred.height())?;
    Ok((0..pred.len())
        .filter(|&i| pred.is_valid(i) && reference.is_valid(i))
        .map(|i| (pred.value(i), reference.value(i)))
        .collect())
}

fn lower_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[(v.len() - 1) / 2]
}

/// `median(reference) / median(pred)` over jointly valid pixels, using the
/// lower median for even counts.
pub fn median_scale(pred: &DepthMap, reference: &DepthMap) -> Result<f64> {
    let pairs = joint(pred, reference)?;
    if pairs.is_empty() {
        return Err(Error::NoOverlap("median scaling needs a jointly valid pixel".into()));
    }
    let (p, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(lower_median(r) / lower_median(p))
}

/// Least-squares `(s, t)` minimizing `Σ (s·pred + t − ref)²` in depth space.
pub fn shift_and_scale(pred: &DepthMap, reference: &DepthMap) -> Result<(f64, f64)> {
    let pairs = joint(pred, reference)?;
    if pairs.len() < 2 {
        return Err(Error::NoOverlap(format!(
            "shift-and-scale needs two jointly valid pixels, found {}",
            pairs.len()
        )));
    }
    let (lo, hi) = pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| (lo.min(*p), hi.max(*p)));
    if lo == hi {
        return Err(Error::DegenerateFit("prediction is constant over the mask".into()));
    }
    let n = pairs.len() as f64;
    let mean_p = pairs.iter().map(|(p, _)| p).sum::<f64>() / n;
    let mean_r = pairs.iter().map(|(_, r)| r).sum::<f64>() / n;
    let (cov, var) = pairs.iter().fold((0.0, 0.0), |(c, v), (p, r)| {
        let dp = p - mean_p;
        (c + dp * (r - mean_r), v + dp * dp)
    });
    let s = cov / var;
    Ok((s, mean_r - s * mean_p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn map(values: Vec<f64>) -> DepthMap {
        let n = values.len();
        DepthMap::from_values(n, 1, values).unwrap()
    }

    #[test]
    fn identical_maps_scale_one() {
        let d = map(vec![1.0, 5.0, 3.0, 2.0]);
        assert_eq!(median_scale(&d, &d).unwrap(), 1.0);
        assert_eq!(shift_and_scale(&d, &d).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn doubled_prediction_halves() {
        let r = map(vec![1.0, 5.0, 3.0, 2.0, 7.5]);
        assert_eq!(median_scale(&r.scaled(2.0), &r).unwrap(), 0.5);
    }

    #[test]
    fn exact_affine_recovered() {
        let r = map(vec![4.0, 9.0, 5.5, 13.0]);
        let p = map(r.values().iter().map(|v| (v - 3.0) / 2.0).collect());
        let (s, t) = shift_and_scale(&p, &r).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_overlap_and_degenerate() {
        let p = DepthMap::from_values(2, 1, vec![1.0, 0.0]).unwrap();
        let r = DepthMap::from_values(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(median_scale(&p, &r), Err(Error::NoOverlap(_))));
        let c = map(vec![2.0, 2.0, 2.0]);
        let r = map(vec![1.0, 2.0, 3.0]);
        assert!(matches!(shift_and_scale(&c, &r), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn median_is_scale_equivariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = map((0..51).map(|_| rng.random_range(0.5..20.0)).collect());
            let r = map((0..51).map(|_| rng.random_range(0.5..20.0)).collect());
            let c = rng.random_range(0.1..10.0);
            let a = median_scale(&p.scaled(c), &r).unwrap();
            let b = median_scale(&p, &r).unwrap() / c;
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn shift_and_scale_beats_candidate_grid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let p = map((0..64).map(|_| rng.random_range(1.0..10.0)).collect());
        let r = map(p.values().iter().map(|v| 1.7 * v + 0.4 + rng.random_range(-0.5..0.5)).collect());
        let cost = |s: f64, t: f64| -> f64 {
            p.values().iter().zip(r.values()).map(|(a, b)| (s * a + t - b).powi(2)).sum()
        };
        let (s, t) = shift_and_scale(&p, &r).unwrap();
        let best = cost(s, t);
        for a in 0..100 {
            for b in 0..100 {
                let cs = 1.0 + 1.4 * a as f64 / 99.0;
                let ct = -1.0 + 3.0 * b as f64 / 99.0;
                assert!(best <= cost(cs, ct) + 1e-9);
            }
        }
    }
}
