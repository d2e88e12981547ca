use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DepthModel, DynamicRegion, Motion, SceneConfig, FRAME_INTERVAL, MIN_SCENE_DEPTH};
use crate::dba::Edge;
use crate::eval::Trajectory;
use crate::geometry::{
    camera_ray, project_unchecked, relative, reproject_flow, se3_exp, CameraIntrinsics, DepthMap,
    FlowField, InverseDepthMap, Pose, Twist, MIN_DEPTH,
};
use crate::init::PriorBundle;
use crate::photometric::Image;
use crate::{Error, Result};

/// Sum of seeded sinusoids over the world `(X, Y)` plane.
#[derive(Clone, Debug, PartialEq)]
struct Waves {
    terms: Vec<(f64, Vector2<f64>, f64)>,
}

impl Waves {
    fn new(seed: u64, count: usize, freq: (f64, f64), total_amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<(f64, Vector2<f64>, f64)> = (0..count)
            .map(|_| {
                let a = rng.random_range(0.5..1.0);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let f = rng.random_range(freq.0..freq.1);
                (a, f * Vector2::new(theta.cos(), theta.sin()), rng.random_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let norm: f64 = raw.iter().map(|t| t.0).sum();
        Self {
            terms: raw.into_iter().map(|(a, k, p)| (total_amplitude * a / norm, k, p)).collect(),
        }
    }

    fn value(&self, xy: &Vector2<f64>) -> f64 {
        self.terms.iter().map(|(a, k, p)| a * (k.dot(xy) + p).sin()).sum()
    }

    fn gradient(&self, xy: &Vector2<f64>) -> Vector2<f64> {
        self.terms.iter().map(|(a, k, p)| a * (k.dot(xy) + p).cos() * k).sum()
    }
}

enum Surface {
    Plane(f64),
    Field { base: f64, waves: Waves },
}

impl Surface {
    fn new(model: &DepthModel) -> Self {
        match *model {
            DepthModel::Plane { z } => Surface::Plane(z),
            DepthModel::HeightField { base, amplitude, seed } => Surface::Field {
                base,
                waves: Waves::new(seed, 3, (0.2, 0.6), amplitude),
            },
        }
    }

    /// Camera-frame depth along `ray` (unit z) from camera-to-world `t_wc`.
    fn cast(&self, t_wc: &Pose, ray: &Vector3<f64>) -> Option<f64> {
        let o = t_wc.translation;
        let d = t_wc.rotation * ray;
        if d.z <= 0.0 {
            return None;
        }
        match self {
            Surface::Plane(z) => Some((z - o.z) / d.z),
            Surface::Field { base, waves } => {
                let mut s = (base - o.z) / d.z;
                for _ in 0..100 {
                    let xy = Vector2::new(o.x + s * d.x, o.y + s * d.y);
                    let f = o.z + s * d.z - base - waves.value(&xy);
                    let df = d.z - waves.gradient(&xy).dot(&Vector2::new(d.x, d.y));
                    if df <= 0.0 {
                        return None;
                    }
                    let step = f / df;
                    s -= step;
                    if step.abs() < 1e-13 * s.abs().max(1.0) {
                        return Some(s);
                    }
                }
                None
            }
        }
    }
}

/// Ground truth for a generated or loaded sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world.
    pub gt_trajectory: Trajectory,
    pub gt_depths: Vec<InverseDepthMap>,
    /// Empty for sequences rebuilt from files without images.
    pub images: Vec<Image>,
    pub dynamic_region: Option<DynamicRegion>,
    pub texture_seed: u64,
    flows: BTreeMap<Edge, FlowField>,
}

/// Perturbation of ground truth used to synthesize priors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorNoise {
    /// Per-relative-pose rotation noise, radians.
    pub rotation_sigma: f64,
    /// Per-relative-pose translation noise, meters.
    pub translation_sigma: f64,
    /// Relative per-pixel depth noise.
    pub depth_sigma: f64,
    pub seed: u64,
}

impl PriorNoise {
    pub fn none() -> Self {
        Self { rotation_sigma: 0.0, translation_sigma: 0.0, depth_sigma: 0.0, seed: 0 }
    }
}

fn camera_to_world(motion: &Motion, n: usize) -> Vec<Pose> {
    let mut poses = vec![Pose::identity()];
    for k in 1..n {
        let step = match motion {
            Motion::Static => Twist::zero(),
            Motion::ConstantVelocity { velocity, angular } => Twist::new(*angular, *velocity),
            Motion::Scripted(steps) => steps[k - 1],
        };
        poses.push(poses[k - 1].compose(&se3_exp(&step)));
    }
    poses
}

pub fn generate_scene(config: &SceneConfig) -> Result<SyntheticSequence> {
    config.validate()?;
    let k = config.intrinsics;
    let surface = Surface::new(&config.depth_model);
    let texture = Waves::new(config.texture_seed, 4, (2.5, 5.0), 0.4);
    let t_wc = camera_to_world(&config.motion, config.num_frames);

    let mut gt_depths = Vec::with_capacity(t_wc.len());
    let mut images = Vec::with_capacity(t_wc.len());
    for (frame, pose) in t_wc.iter().enumerate() {
        let mut depth = Vec::with_capacity(k.num_pixels());
        let mut shade = Vec::with_capacity(k.num_pixels());
        for uv in k.grid().iter() {
            let ray = camera_ray(&k, &uv);
            let z = surface.cast(pose, &ray).filter(|z| *z >= MIN_SCENE_DEPTH).ok_or_else(|| {
                Error::Config(format!(
                    "frame {frame} pixel ({}, {}) sees no surface at least {MIN_SCENE_DEPTH} m away",
                    uv.x, uv.y
                ))
            })?;
            let w = pose.transform_point(&(z * ray));
            depth.push(z);
            shade.push((0.5 + texture.value(&w.xy())).clamp(0.0, 1.0));
        }
        gt_depths.push(DepthMap::from_values(k.width, k.height, depth)?.to_inverse());
        images.push(Image::new(k.width, k.height, 1, shade)?);
    }
    let gt_trajectory = Trajectory::uniform(t_wc, FRAME_INTERVAL)?;
    SyntheticSequence::assemble(
        k,
        gt_trajectory,
        gt_depths,
        images,
        config.dynamic_region.clone(),
        config.texture_seed,
        config.flow_window,
    )
}

impl SyntheticSequence {
    /// Rebuilds ground truth from stored trajectory and depths.
    pub fn from_ground_truth(
        intrinsics: CameraIntrinsics,
        gt_trajectory: Trajectory,
        gt_depths: Vec<InverseDepthMap>,
        texture_seed: u64,
        flow_window: usize,
    ) -> Result<Self> {
        Self::assemble(intrinsics, gt_trajectory, gt_depths, Vec::new(), None, texture_seed, flow_window)
    }

    fn assemble(
        intrinsics: CameraIntrinsics,
        gt_trajectory: Trajectory,
        gt_depths: Vec<InverseDepthMap>,
        images: Vec<Image>,
        dynamic_region: Option<DynamicRegion>,
        texture_seed: u64,
        flow_window: usize,
    ) -> Result<Self> {
        if gt_depths.len() != gt_trajectory.len() {
            return Err(Error::shape(
                format!("{} depth maps", gt_trajectory.len()),
                gt_depths.len().to_string(),
            ));
        }
        for d in &gt_depths {
            d.check_dims(intrinsics.width, intrinsics.height)?;
        }
        let mut seq = Self {
            intrinsics,
            gt_trajectory,
            gt_depths,
            images,
            dynamic_region,
            texture_seed,
            flows: BTreeMap::new(),
        };
        let n = seq.num_frames();
        for i in 0..n {
            for j in 0..n {
                if i != j && i.abs_diff(j) <= flow_window {
                    let f = seq.compute_flow(i, j)?;
                    seq.flows.insert((i, j), f);
                }
            }
        }
        Ok(seq)
    }

    pub fn num_frames(&self) -> usize {
        self.gt_depths.len()
    }

    /// World-to-camera poses.
    pub fn gt_poses(&self) -> Vec<Pose> {
        self.gt_trajectory.poses().iter().map(Pose::inverse).collect()
    }

    pub fn gt_flow(&self, edge: Edge) -> Option<&FlowField> {
        self.flows.get(&edge)
    }

    pub fn cached_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.flows.keys().copied()
    }

    pub fn is_dynamic(&self, index: usize) -> bool {
        let w = self.intrinsics.width;
        self.dynamic_region.as_ref().is_some_and(|r| r.contains(index % w, index / w))
    }

    fn compute_flow(&self, i: usize, j: usize) -> Result<FlowField> {
        let t = self.gt_trajectory.poses();
        let g_ij = relative(&t[i].inverse(), &t[j].inverse());
        let mut flow = reproject_flow(&self.intrinsics, &g_ij, &self.gt_depths[i])?;
        let Some(region) = &self.dynamic_region else {
            return Ok(flow);
        };
        let k = &self.intrinsics;
        let mut values = flow.values().to_vec();
        let mut mask = flow.mask().to_vec();
        let shift = region.velocity * (j as f64 - i as f64);
        for (idx, uv) in k.grid().iter().enumerate() {
            if !self.is_dynamic(idx) || !self.gt_depths[i].is_valid(idx) {
                continue;
            }
            let x_i = camera_ray(k, &uv) / self.gt_depths[i].value(idx);
            let x_w = t[i].transform_point(&x_i) + shift;
            let x_j = t[j].inverse().transform_point(&x_w);
            if x_j.z <= MIN_DEPTH {
                mask[idx] = false;
                continue;
            }
            let y = project_unchecked(k, &x_j);
            values[idx] = y;
            mask[idx] = k.contains(&y);
        }
        flow = FlowField::new(k.width, k.height, values, mask)?;
        Ok(flow)
    }

    /// Relative-pose and depth priors derived from ground truth.
    pub fn priors(&self, noise: &PriorNoise) -> Result<PriorBundle> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let g = self.gt_poses();
        let relatives = g
            .windows(2)
            .map(|w| {
                let xi = Twist::new(
                    Vector3::from_fn(|_, _| noise.rotation_sigma * normal()),
                    Vector3::from_fn(|_, _| noise.translation_sigma * normal()),
                );
                se3_exp(&xi).compose(&relative(&w[0], &w[1]))
            })
            .collect();
        let depths = self
            .gt_depths
            .iter()
            .map(|d| {
                let values = d
                    .values()
                    .iter()
                    .map(|v| v / (1.0 + noise.depth_sigma * normal()).max(0.2))
                    .collect();
                InverseDepthMap::with_mask(d.width(), d.height(), values, d.mask().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        PriorBundle::new(depths, relatives)
    }
}
