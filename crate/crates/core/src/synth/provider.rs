use std::str::FromStr;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SyntheticSequence;
use crate::dba::{ConfidenceWeights, Edge, FlowRevisionProvider, Revision};
use crate::geometry::FlowField;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProviderKind {
    Oracle,
    Bounded,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "bounded" => Ok(Self::Bounded),
            other => Err(Error::Config(format!("unknown provider kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Oracle => "oracle",
            Self::Bounded => "bounded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Gaussian target noise, pixels.
    pub noise_sigma: f64,
    pub outlier_fraction: f64,
    /// Offset of outlier targets, pixels.
    pub outlier_magnitude: f64,
    /// Largest revision the bounded kind returns, pixels.
    pub search_radius: f64,
    /// Weight reported where the ground-truth target is invalid.
    pub weight_floor: f64,
    pub rng_seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Oracle,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_magnitude: 0.0,
            search_radius: 8.0,
            weight_floor: 0.0,
            rng_seed: 0,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !(self.outlier_magnitude >= 0.0) {
            return Err(Error::Config("provider noise must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) || !(0.0..=1.0).contains(&self.weight_floor) {
            return Err(Error::Config("outlier_fraction and weight_floor must lie in [0, 1]".into()));
        }
        if self.kind == ProviderKind::Bounded && !(self.search_radius > 0.0) {
            return Err(Error::Config("bounded provider needs search_radius > 0".into()));
        }
        Ok(())
    }
}

/// Ground-truth-backed revision source.
pub struct SyntheticProvider<'a> {
    seq: &'a SyntheticSequence,
    config: ProviderConfig,
    frames: Option<Vec<usize>>,
    period: f64,
}

pub fn make_provider(seq: &SyntheticSequence, config: ProviderConfig) -> Result<SyntheticProvider<'_>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seq.texture_seed);
    Ok(SyntheticProvider { seq, config, frames: None, period: rng.random_range(5.0..7.0) })
}

fn edge_stream(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}

impl SyntheticProvider<'_> {
    /// Maps optimizer keyframe indices to sequence frames.
    pub fn with_keyframes(mut self, frames: Vec<usize>) -> Self {
        self.frames = Some(frames);
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Spacing of the texture-ambiguous false-target lattice, pixels.
    pub fn ambiguity_period(&self) -> f64 {
        self.period
    }

    fn frame_edge(&self, (a, b): Edge) -> Result<Edge> {
        match &self.frames {
            None => Ok((a, b)),
            Some(f) => match (f.get(a), f.get(b)) {
                (Some(&i), Some(&j)) => Ok((i, j)),
                _ => Err(Error::Coverage(a, b)),
            },
        }
    }

    /// Per-edge offset of the false-target lattice, kept at least a quarter
    /// period away from the true target in each axis.
    fn lattice_offset(&self, (i, j): Edge) -> Vector2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seq.texture_seed ^ 0x5eed_1a77_1ce0_0000);
        rng.set_stream(edge_stream(i, j));
        let t = self.period;
        Vector2::new(rng.random_range(0.25 * t..0.75 * t), rng.random_range(0.25 * t..0.75 * t))
    }

    fn false_target(&self, gt: &Vector2<f64>, current: &Vector2<f64>, offset: &Vector2<f64>) -> Vector2<f64> {
        let base = gt + offset;
        let k = ((current - base) / self.period).map(f64::round);
        base + self.period * k
    }
}

impl FlowRevisionProvider for SyntheticProvider<'_> {
    fn query(&self, edge: Edge, current: &FlowField) -> Result<Revision> {
        let (i, j) = self.frame_edge(edge)?;
        let gt = self.seq.gt_flow((i, j)).ok_or(Error::Coverage(i, j))?;
        if (current.width(), current.height()) != (gt.width(), gt.height()) {
            return Err(Error::shape(
                format!("{}x{} flow", gt.width(), gt.height()),
                format!("{}x{}", current.width(), current.height()),
            ));
        }
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(edge_stream(i, j));
        let offset = self.lattice_offset((i, j));
        let w_dyn = self.seq.dynamic_region.as_ref().map_or(1.0, |r| r.weight);
        let n = gt.len();
        let mut revision = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for idx in 0..n {
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            let is_outlier = rng.random::<f64>() < cfg.outlier_fraction;
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            if !gt.is_valid(idx) || !current.is_valid(idx) {
                revision.push(Vector2::zeros());
                weights.push(Vector2::repeat(cfg.weight_floor));
                continue;
            }
            let g = gt.values()[idx];
            let mut target = g + cfg.noise_sigma * Vector2::new(nx, ny);
            if is_outlier {
                target += cfg.outlier_magnitude * Vector2::new(angle.cos(), angle.sin());
            }
            let p = current.values()[idx];
            let r = match cfg.kind {
                ProviderKind::Oracle => target - p,
                ProviderKind::Bounded => {
                    let aim = if (g - p).norm() <= cfg.search_radius { target } else { self.false_target(&g, &p, &offset) };
                    let r = aim - p;
                    let norm = r.norm();
                    if norm > cfg.search_radius { r * (cfg.search_radius / norm) } else { r }
                }
            };
            revision.push(r);
            let w = if self.seq.is_dynamic(idx) { w_dyn } else { 1.0 };
            weights.push(Vector2::repeat(w));
        }
        Ok(Revision { revision, weights: ConfidenceWeights::new(gt.width(), gt.height(), weights)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, DepthModel, DynamicRegion, Motion, SceneConfig};
    use crate::geometry::CameraIntrinsics;
    use nalgebra::Vector3;

    fn seq(dynamic: Option<DynamicRegion>, size: (usize, usize)) -> SyntheticSequence {
        let (w, h) = size;
        generate_scene(&SceneConfig {
            intrinsics: CameraIntrinsics::new(w as f64, w as f64, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h).unwrap(),
            num_frames: 3,
            motion: Motion::ConstantVelocity { velocity: Vector3::new(0.5, 0.0, 0.1), angular: Vector3::zeros() },
            depth_model: DepthModel::HeightField { base: 6.0, amplitude: 1.0, seed: 2 },
            dynamic_region: dynamic,
            texture_seed: 3,
            flow_window: 1,
        })
        .unwrap()
    }

    #[test]
    fn oracle_at_truth_is_zero() {
        let s = seq(None, (24, 16));
        let p = make_provider(&s, ProviderConfig::default()).unwrap();
        let gt = s.gt_flow((0, 1)).unwrap();
        let r = p.query((0, 1), gt).unwrap();
        for (idx, rv) in r.revision.iter().enumerate() {
            assert_eq!(*rv, Vector2::zeros());
            if gt.is_valid(idx) {
                assert_eq!(r.weights.get(idx), Vector2::repeat(1.0));
            }
        }
    }

    #[test]
    fn dynamic_weight_reported() {
        let region = DynamicRegion { u0: 2, v0: 3, u1: 8, v1: 9, velocity: Vector3::new(0.2, 0.0, 0.0), weight: 0.1 };
        let s = seq(Some(region.clone()), (24, 16));
        let p = make_provider(&s, ProviderConfig::default()).unwrap();
        let identity = FlowField::identity(24, 16);
        let r = p.query((1, 0), &identity).unwrap();
        let gt = s.gt_flow((1, 0)).unwrap();
        for idx in 0..24 * 16 {
            if region.contains(idx % 24, idx / 24) && gt.is_valid(idx) {
                assert_eq!(r.weights.get(idx), Vector2::repeat(0.1));
            }
        }
    }

    #[test]
    fn noise_level_matches_sigma() {
        let s = seq(None, (96, 64));
        let cfg = ProviderConfig { noise_sigma: 0.5, rng_seed: 11, ..Default::default() };
        let p = make_provider(&s, cfg).unwrap();
        let gt = s.gt_flow((0, 1)).unwrap();
        let r = p.query((0, 1), gt).unwrap();
        let xs: Vec<f64> = (0..gt.len()).filter(|&i| gt.is_valid(i)).map(|i| r.revision[i].x).collect();
        assert!(xs.len() >= 4000);
        let pooled: Vec<f64> = (0..gt.len())
            .filter(|&i| gt.is_valid(i))
            .flat_map(|i| [r.revision[i].x, r.revision[i].y])
            .take(10_000)
            .collect();
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let sd = (pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.45..=0.55).contains(&sd), "{sd}");
    }

    #[test]
    fn deterministic_answers() {
        let s = seq(None, (24, 16));
        let cfg = ProviderConfig { kind: ProviderKind::Bounded, noise_sigma: 0.3, outlier_fraction: 0.1, outlier_magnitude: 5.0, rng_seed: 4, ..Default::default() };
        let p = make_provider(&s, cfg).unwrap();
        let cur = FlowField::identity(24, 16);
        assert_eq!(p.query((0, 1), &cur).unwrap(), p.query((0, 1), &cur).unwrap());
    }

    #[test]
    fn bounded_equals_oracle_within_radius() {
        let s = seq(None, (24, 16));
        let gt = s.gt_flow((0, 1)).unwrap();
        let cur = FlowField::identity(24, 16);
        let gap = (0..gt.len()).filter(|&i| gt.is_valid(i)).map(|i| (gt.values()[i] - cur.values()[i]).norm()).fold(0.0, f64::max);
        let base = ProviderConfig { noise_sigma: 0.2, rng_seed: 1, ..Default::default() };
        let oracle = make_provider(&s, base).unwrap().query((0, 1), &cur).unwrap();
        let bounded = make_provider(&s, ProviderConfig { kind: ProviderKind::Bounded, search_radius: gap + 10.0, ..base })
            .unwrap()
            .query((0, 1), &cur)
            .unwrap();
        assert_eq!(oracle, bounded);
    }

    #[test]
    fn bounded_locks_onto_false_target_when_far() {
        let s = seq(None, (24, 16));
        let cfg = ProviderConfig { kind: ProviderKind::Bounded, search_radius: 2.0, ..Default::default() };
        let p = make_provider(&s, cfg).unwrap();
        let gt = s.gt_flow((0, 1)).unwrap();
        let far = FlowField::new(24, 16, gt.values().iter().map(|v| v + Vector2::new(30.0, 0.0)).collect(), gt.mask().to_vec()).unwrap();
        let r = p.query((0, 1), &far).unwrap();
        let t = p.ambiguity_period();
        for idx in (0..gt.len()).filter(|&i| gt.is_valid(i)) {
            assert!(r.revision[idx].norm() <= 2.0 + 1e-12);
            // The target lies on the lattice, never on the truth.
            let aim = far.values()[idx] + r.revision[idx];
            assert!((aim - gt.values()[idx]).norm() > 0.2 * t);
        }
    }

    #[test]
    fn unknown_edge() {
        let s = seq(None, (24, 16));
        let p = make_provider(&s, ProviderConfig::default()).unwrap();
        let cur = FlowField::identity(24, 16);
        assert!(matches!(p.query((0, 2), &cur), Err(Error::Coverage(0, 2))));
        let mapped = make_provider(&s, ProviderConfig::default()).unwrap().with_keyframes(vec![0, 2]);
        assert!(matches!(mapped.query((0, 1), &cur), Err(Error::Coverage(0, 2))));
    }
}
