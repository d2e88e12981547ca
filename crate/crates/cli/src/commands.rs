use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;
use sginit_core::dba::optimize;
use sginit_core::eval::{ate_report, classify_failure, depth_metrics};
use sginit_core::geometry::relative;
use sginit_core::init::{build_keyframe_graph, initialize_state, select_keyframes, InitMode};
use sginit_core::priors::{load_pfm, load_tum, write_tum, ScaleAlignment, ScaleMode};
use sginit_core::synth::{
    generate_scene, large_motion_scenario, make_provider, motion_scenario, run_scenario, AblationRow, SyntheticSequence,
};
use sginit_core::{AlignmentMode, Error, InitPolicy, Pose, PriorBundle, Result, Trajectory};

use crate::config::RunConfig;
use crate::dataset::{
    create_dir, numbered_files, write_dataset, write_depth_dir, write_file, Dataset, DatasetContents, GT_DEPTH_DIR,
    GT_TRAJ, REL_POSES,
};

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut s = motion_scenario(cfg.scene.motion_scale, cfg.provider.kind, cfg.seed);
    s.scene.num_frames = cfg.scene.num_frames;
    let m = cfg.scene.prior_noise;
    s.prior_noise.rotation_sigma *= m;
    s.prior_noise.translation_sigma *= m;
    s.prior_noise.depth_sigma *= m;
    let seq = generate_scene(&s.scene)?;
    let priors = seq.priors(&s.prior_noise)?;
    write_dataset(
        out,
        &DatasetContents {
            intrinsics: &seq.intrinsics,
            gt_trajectory: &seq.gt_trajectory,
            gt_depths: &seq.gt_depths,
            depth_priors: &priors.depth_priors,
            relative_poses: &priors.relative_poses,
            images: &seq.images,
        },
    )?;
    log::info!("wrote {} frames to {}", seq.num_frames(), out.display());
    Ok(())
}

/// Fills in non-keyframe poses by chaining relative priors forward from the
/// preceding frame, or by repeating the last motion when there are none.
fn complete_trajectory(n: usize, keyframes: &[usize], kf_poses: &[Pose], relatives: Option<&[Pose]>) -> Vec<Pose> {
    let mut poses: Vec<Pose> = Vec::with_capacity(n);
    let mut next_kf = 0;
    for t in 0..n {
        if keyframes.get(next_kf) == Some(&t) {
            poses.push(kf_poses[next_kf]);
            next_kf += 1;
            continue;
        }
        let step = match relatives {
            Some(r) => r[t - 1],
            None if t >= 2 => relative(&poses[t - 2], &poses[t - 1]),
            None => Pose::identity(),
        };
        poses.push(step.compose(&poses[t - 1]));
    }
    poses
}

pub fn cmd_run(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<()> {
    let ds = Dataset::load(dataset)?;
    let k = ds.intrinsics;
    let n = ds.num_frames();
    if ds.relative_poses.is_none() && cfg.init.mode == InitMode::GeometryGuided {
        return Err(Error::Config(format!(
            "{} is required by init.mode=geometry_guided",
            dataset.join(REL_POSES).display()
        )));
    }
    let relatives = ds.relative_poses.clone();
    let priors = PriorBundle::new(
        ds.depth_priors.clone(),
        relatives.clone().unwrap_or_else(|| vec![Pose::identity(); n - 1]),
    )?;
    let keyframes = match &relatives {
        Some(_) => select_keyframes(&priors, &k, cfg.mean_flow_threshold)?,
        None => (0..n).collect(),
    };
    let graph = build_keyframe_graph(keyframes.len(), cfg.graph_window)?;

    let (Some(gt), Some(gt_depths)) = (&ds.gt_trajectory, &ds.gt_depths) else {
        return Err(Error::Config(format!(
            "provider.kind={} reads flow targets from ground truth; {} needs {GT_TRAJ} and {GT_DEPTH_DIR}/",
            cfg.provider.kind,
            dataset.display()
        )));
    };
    let reach = graph.edges().iter().map(|&(a, b)| keyframes[a].abs_diff(keyframes[b])).max().unwrap_or(1);
    let seq = SyntheticSequence::from_ground_truth(k, gt.clone(), gt_depths.clone(), cfg.seed.wrapping_add(1000), reach)?;
    let provider = make_provider(&seq, cfg.provider)?.with_keyframes(keyframes.clone());

    let state = initialize_state(&priors, &keyframes, &cfg.init, &k)?;
    log::info!("{} keyframes, {} edges, init {}", keyframes.len(), graph.edges().len(), cfg.init.mode);
    let (state, report) = optimize(&state, &graph, &provider, &cfg.solver)?;

    create_dir(out)?;
    let poses = complete_trajectory(n, &keyframes, &state.poses, relatives.as_deref());
    let c2w: Vec<Pose> = poses.iter().map(Pose::inverse).collect();
    let stamps = ds.timestamps();
    write_tum(&out.join("est_traj.txt"), &stamps, &c2w)?;
    let depths: Vec<_> = keyframes.iter().zip(&state.inv_depths).map(|(&f, d)| (f, d.to_depth())).collect();
    write_depth_dir(&out.join("est_depth"), &depths)?;

    let mut lines = String::new();
    for (i, it) in report.iterations.iter().enumerate() {
        let rec = json!({
            "iteration": i,
            "residual_norm": it.residual_norm,
            "update_norm": it.update_norm,
            "clamped": it.clamped,
        });
        writeln!(lines, "{rec}").expect("write to string");
    }
    let est = Trajectory::new(stamps, c2w)?;
    let accuracy = match ate_report(&est, gt, cfg.alignment) {
        Ok(r) => {
            let f = classify_failure(r.ate, gt, cfg.failure_threshold);
            json!({"ate": r.ate, "alignment": cfg.alignment.to_string(), "is_failure": f.is_failure})
        }
        Err(e) => {
            log::warn!("trajectory accuracy unavailable: {e}");
            json!(null)
        }
    };
    let summary = json!({
        "summary": true,
        "frames": n,
        "keyframes": keyframes,
        "init_mode": cfg.init.mode.to_string(),
        "iterations": report.num_iterations(),
        "converged": report.converged,
        "final_residual_norm": report.final_residual_norm,
        "clamped": report.total_clamped(),
        "accuracy": accuracy,
    });
    writeln!(lines, "{summary}").expect("write to string");
    write_file(&out.join("report.jsonl"), lines)?;
    eprintln!(
        "{} keyframes, {} iterations, converged {}, residual {:.3e}",
        keyframes.len(),
        report.num_iterations(),
        report.converged,
        report.final_residual_norm
    );
    Ok(())
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let rec = load_tum(path)?;
    Trajectory::new(rec.timestamps, rec.poses)
}

pub fn cmd_eval_traj(cfg: &RunConfig, est: &Path, gt: &Path, mode: AlignmentMode) -> Result<()> {
    let est = load_trajectory(est)?;
    let gt = load_trajectory(gt)?;
    let r = ate_report(&est, &gt, mode).map_err(|e| match e {
        Error::Association(msg) => Error::NoOverlap(msg),
        other => other,
    })?;
    let f = classify_failure(r.ate, &gt, cfg.failure_threshold);
    let rec = json!({
        "ate": r.ate,
        "alignment": mode.to_string(),
        "scale": r.alignment.scale,
        "matched": r.matched,
        "unmatched_pred": r.unmatched_pred,
        "unmatched_gt": r.unmatched_gt,
        "is_failure": f.is_failure,
        "path_length": f.path_length,
        "max_step_translation": f.max_step_translation,
        "total_forward_displacement": f.total_forward_displacement,
        "large_motion_flag": f.large_motion_flag,
    });
    println!("{rec}");
    eprintln!(
        "ATE {:.6} m ({mode}, {} matched) -> {}{}",
        r.ate,
        r.matched,
        if f.is_failure { "failure" } else { "success" },
        if f.large_motion_flag { ", large motion" } else { "" }
    );
    Ok(())
}

pub fn cmd_eval_depth(est: &Path, gt: &Path, cap: f64, mode: ScaleMode) -> Result<()> {
    if !(cap > 0.0) {
        return Err(Error::Config(format!("depth cap must be > 0 (got {cap})")));
    }
    let est_files = numbered_files(est, "pfm")?;
    let gt_files = numbered_files(gt, "pfm")?;
    let (mut frames, mut sums) = (0usize, [0.0f64; 4]);
    for (index, path) in &est_files {
        let Some(gt_path) = gt_files.get(index) else {
            log::warn!("{}: no ground truth for frame {index}", path.display());
            continue;
        };
        let pred = load_pfm(path)?;
        let reference = load_pfm(gt_path)?;
        let m = ScaleAlignment::fit(mode, &pred, &reference)
            .and_then(|s| depth_metrics(&s.apply(&pred), &reference, cap).map(|m| (s, m)));
        let (s, m) = match m {
            Ok(v) => v,
            Err(Error::NoOverlap(msg)) => {
                log::warn!("frame {index}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let rec = json!({
            "frame": index,
            "abs_rel": m.abs_rel,
            "sq_rel": m.sq_rel,
            "rmse": m.rmse,
            "delta_1_25": m.delta_1_25,
            "count": m.count,
            "scale": s.scale,
            "shift": s.shift,
        });
        println!("{rec}");
        frames += 1;
        for (acc, v) in sums.iter_mut().zip([m.abs_rel, m.sq_rel, m.rmse, m.delta_1_25]) {
            *acc += v;
        }
    }
    if frames == 0 {
        return Err(Error::NoOverlap(format!("no frame of {} has valid ground truth in {}", est.display(), gt.display())));
    }
    let mean = sums.map(|s| s / frames as f64);
    let rec = json!({
        "summary": true,
        "frames": frames,
        "abs_rel": mean[0],
        "sq_rel": mean[1],
        "rmse": mean[2],
        "delta_1_25": mean[3],
    });
    println!("{rec}");
    eprintln!(
        "{frames} frames: AbsRel {:.4}  SqRel {:.4}  RMSE {:.4}  d<1.25 {:.4}",
        mean[0], mean[1], mean[2], mean[3]
    );
    Ok(())
}

pub fn cmd_ablate_init(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut scenarios = Vec::new();
    for &scale in &cfg.sweep.motion_scales {
        for &kind in &cfg.sweep.providers {
            scenarios.push(motion_scenario(scale, kind, cfg.seed));
        }
    }
    if cfg.sweep.large_motion {
        scenarios.push(large_motion_scenario(cfg.seed));
    }
    let policies: Vec<InitPolicy> =
        cfg.sweep.policies.iter().map(|&mode| InitPolicy { mode, ..cfg.init }).collect();

    let mut results: Vec<(String, Vec<AblationRow>)> = Vec::new();
    for s in &scenarios {
        let rows = run_scenario(s, &policies)?;
        for r in &rows {
            if let Some(e) = &r.solver_error {
                log::warn!("{} / {}: solver stopped early: {e}", s.name, r.policy.mode);
            }
        }
        results.push((s.name.clone(), rows));
    }

    create_dir(out)?;
    let csv_path = out.join("ablation.csv");
    let io = |e: csv::Error| Error::Io { path: csv_path.clone(), source: std::io::Error::other(e) };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "policy", "ate", "abs_rel", "iterations", "converged"]).map_err(io)?;
    for (name, rows) in &results {
        for r in rows {
            w.write_record([
                name.clone(),
                r.policy.mode.to_string(),
                r.ate.to_string(),
                r.abs_rel.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| io(e.into_error().into()))?;
    write_file(&csv_path, bytes)?;

    // one gnuplot data block per scenario, selectable with `index`
    let mut dat = String::from("# policy_index ate abs_rel iterations converged\n");
    for (name, rows) in &results {
        writeln!(dat, "\n\n# {name}").expect("write to string");
        for (i, r) in rows.iter().enumerate() {
            writeln!(dat, "{i} {} {} {} {} # {}", r.ate, r.abs_rel, r.iterations, u8::from(r.converged), r.policy.mode)
                .expect("write to string");
        }
    }
    write_file(&out.join("ablation.dat"), dat)?;

    for (name, rows) in &results {
        for r in rows {
            eprintln!("{name:<24} {:<16} ATE {:>12.6e}  AbsRel {:>10.4e}  iters {:>2}  converged {}", r.policy.mode.to_string(), r.ate, r.abs_rel, r.iterations, r.converged);
        }
    }
    Ok(())
}
