//! Flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use sginit_core::init::InitMode;
use sginit_core::synth::{ProviderConfig, ProviderKind};
use sginit_core::{AlignmentMode, Error, InitPolicy, Result, SolverConfig};

/// Synthetic dataset options read by `synth`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneOptions {
    /// Multiplier on the pinned large-motion camera motion; 0 is static.
    pub motion_scale: f64,
    pub num_frames: usize,
    /// Multiplier on the scenario's prior noise; 0 writes exact priors.
    pub prior_noise: f64,
}

/// Sweep grid read by `ablate-init`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub motion_scales: Vec<f64>,
    pub providers: Vec<ProviderKind>,
    pub policies: Vec<InitMode>,
    /// Also run the pinned large-motion scenario.
    pub large_motion: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub init: InitPolicy,
    pub solver: SolverConfig,
    pub graph_window: usize,
    pub mean_flow_threshold: f64,
    pub provider: ProviderConfig,
    pub alignment: AlignmentMode,
    pub failure_threshold: f64,
    pub seed: u64,
    pub scene: SceneOptions,
    pub sweep: SweepOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            init: InitPolicy::geometry_guided(),
            solver: SolverConfig::default(),
            graph_window: 2,
            mean_flow_threshold: 0.0,
            provider: ProviderConfig::default(),
            alignment: AlignmentMode::Similarity,
            failure_threshold: 1.0,
            seed: 0,
            scene: SceneOptions { motion_scale: 1.0, num_frames: 8, prior_noise: 1.0 },
            sweep: SweepOptions {
                motion_scales: vec![0.0, 0.5, 1.0],
                providers: vec![ProviderKind::Oracle, ProviderKind::Bounded],
                policies: vec![InitMode::Naive, InitMode::GeometryGuided],
                large_motion: true,
            },
        }
    }
}

fn list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    let items: Vec<T> = value
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| format!("bad list item {:?}", v.trim())))
        .collect::<std::result::Result<_, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn scalar<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected a boolean, got {other:?}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let err = |message: String| Error::ParseLine { path: path.to_path_buf(), line: lineno + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key}")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "init.mode" => self.init.mode = value.parse().map_err(|e: Error| e.to_string())?,
            "init.chain_limit" => self.init.chain_limit = scalar(value)?,
            "solver.max_iterations" => self.solver.max_iterations = scalar(value)?,
            "solver.damping" => self.solver.damping = scalar(value)?,
            "solver.depth_floor" => self.solver.depth_floor = scalar(value)?,
            "solver.convergence_tol" => self.solver.convergence_tol = scalar(value)?,
            "graph.window" => self.graph_window = scalar(value)?,
            "keyframe.mean_flow_threshold" => self.mean_flow_threshold = scalar(value)?,
            "provider.kind" => self.provider.kind = value.parse().map_err(|e: Error| e.to_string())?,
            "provider.noise_sigma" => self.provider.noise_sigma = scalar(value)?,
            "provider.search_radius" => self.provider.search_radius = scalar(value)?,
            "eval.alignment" => self.alignment = value.parse().map_err(|e: Error| e.to_string())?,
            "eval.failure_threshold" => self.failure_threshold = scalar(value)?,
            "seed" => self.seed = scalar(value)?,
            "scene.motion_scale" => self.scene.motion_scale = scalar(value)?,
            "scene.num_frames" => self.scene.num_frames = scalar(value)?,
            "scene.prior_noise" => self.scene.prior_noise = scalar(value)?,
            "ablate.motion_scales" => self.sweep.motion_scales = list(value)?,
            "ablate.providers" => self.sweep.providers = list(value)?,
            "ablate.policies" => self.sweep.policies = list(value)?,
            "ablate.large_motion" => self.sweep.large_motion = flag(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.init.validate()?;
        self.solver.validate()?;
        self.provider.validate()?;
        if self.graph_window == 0 {
            return Err(Error::Config("graph.window must be >= 1".into()));
        }
        if !(self.mean_flow_threshold >= 0.0 && self.mean_flow_threshold.is_finite()) {
            return Err(Error::Config("keyframe.mean_flow_threshold must be finite and >= 0".into()));
        }
        if !(self.failure_threshold >= 0.0) {
            return Err(Error::Config("eval.failure_threshold must be >= 0".into()));
        }
        let s = &self.scene;
        if !(s.motion_scale >= 0.0 && s.motion_scale.is_finite()) || !(s.prior_noise >= 0.0 && s.prior_noise.is_finite()) {
            return Err(Error::Config("scene.motion_scale and scene.prior_noise must be finite and >= 0".into()));
        }
        if s.num_frames < 2 {
            return Err(Error::Config("scene.num_frames must be >= 2".into()));
        }
        if self.sweep.motion_scales.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(Error::Config("ablate.motion_scales must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Reads `path` when given, defaults otherwise, then applies the
    /// command-line overrides.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        cfg.provider.rng_seed = cfg.seed;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("run.cfg"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn every_documented_key_parses() {
        let text = "init.mode = naive\ninit.chain_limit = 4\nsolver.max_iterations = 7\nsolver.damping = 1e-6\n\
                    solver.depth_floor = 1e-3\nsolver.convergence_tol = 1e-9\ngraph.window = 3\n\
                    keyframe.mean_flow_threshold = 2.5\nprovider.kind = bounded\nprovider.noise_sigma = 0.5\n\
                    provider.search_radius = 6\neval.alignment = scale_only\neval.failure_threshold = 2\nseed = 42\n";
        let c = parse(text).unwrap();
        assert_eq!(c.init.mode, InitMode::Naive);
        assert_eq!(c.init.chain_limit, 4);
        assert_eq!(c.solver.max_iterations, 7);
        assert_eq!(c.solver.damping, 1e-6);
        assert_eq!(c.solver.depth_floor, 1e-3);
        assert_eq!(c.solver.convergence_tol, 1e-9);
        assert_eq!(c.graph_window, 3);
        assert_eq!(c.mean_flow_threshold, 2.5);
        assert_eq!(c.provider.kind, ProviderKind::Bounded);
        assert_eq!(c.provider.noise_sigma, 0.5);
        assert_eq!(c.provider.search_radius, 6.0);
        assert_eq!(c.alignment, AlignmentMode::ScaleOnly);
        assert_eq!(c.failure_threshold, 2.0);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn sweep_lists_parse() {
        let c = parse("ablate.motion_scales = 0, 2\nablate.providers = bounded\nablate.policies = naive\nablate.large_motion = no").unwrap();
        assert_eq!(c.sweep.motion_scales, vec![0.0, 2.0]);
        assert_eq!(c.sweep.providers, vec![ProviderKind::Bounded]);
        assert_eq!(c.sweep.policies, vec![InitMode::Naive]);
        assert!(!c.sweep.large_motion);
    }

    #[test]
    fn unknown_key_names_line() {
        match parse("seed = 1\nsolver.dampign = 3\n") {
            Err(Error::ParseLine { line: 2, message, .. }) => assert!(message.contains("solver.dampign")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(matches!(parse("seed 3"), Err(Error::ParseLine { line: 1, .. })));
        assert!(matches!(parse("seed = x"), Err(Error::ParseLine { line: 1, .. })));
        assert!(matches!(parse("seed = 1\nseed = 2"), Err(Error::ParseLine { line: 2, .. })));
        assert!(matches!(parse("init.mode = lazy"), Err(Error::ParseLine { .. })));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(parse("init.chain_limit = 1"), Err(Error::Config(_))));
        assert!(matches!(parse("graph.window = 0"), Err(Error::Config(_))));
        assert!(matches!(parse("solver.max_iterations = 0"), Err(Error::Config(_))));
    }

    #[test]
    fn command_line_seed_wins() {
        let c = RunConfig::resolve(None, Some(9)).unwrap();
        assert_eq!((c.seed, c.provider.rng_seed), (9, 9));
    }
}
