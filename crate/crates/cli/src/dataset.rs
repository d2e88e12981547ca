//! On-disk dataset layout.
//!
//! ```text
//! intrinsics.txt          fx fy cx cy width height
//! depth_prior/%06d.pfm    depth priors, meters
//! rel_poses.txt           TUM relatives, line t maps camera t to camera t+1
//! gt_traj.txt             optional TUM camera-to-world ground truth
//! gt_depth/%06d.pfm       optional ground-truth depth
//! images/%06d.png         optional 8-bit images
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sginit_core::geometry::{DepthMap, InverseDepthMap};
use sginit_core::photometric::Image;
use sginit_core::priors::{load_pfm, load_relative_poses, load_tum, write_pfm, write_tum, Endianness};
use sginit_core::{CameraIntrinsics, Error, Pose, Result, Trajectory};

pub const INTRINSICS: &str = "intrinsics.txt";
pub const DEPTH_PRIOR_DIR: &str = "depth_prior";
pub const REL_POSES: &str = "rel_poses.txt";
pub const GT_TRAJ: &str = "gt_traj.txt";
pub const GT_DEPTH_DIR: &str = "gt_depth";
pub const IMAGE_DIR: &str = "images";

/// Frame spacing assumed when no ground-truth trajectory supplies stamps.
pub const DEFAULT_FRAME_INTERVAL: f64 = 0.1;

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn frame_name(index: usize, ext: &str) -> String {
    format!("{index:06}.{ext}")
}

/// Files named `%06d.<ext>` in `dir`, keyed by frame index.
pub fn numbered_files(dir: &Path, ext: &str) -> Result<BTreeMap<usize, PathBuf>> {
    let mut found = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
            found.insert(stem.parse::<usize>().expect("six digits"), path);
        }
    }
    Ok(found)
}

/// Like [`numbered_files`], but the frames must be numbered 0, 1, 2, ...
pub fn indexed_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let found = numbered_files(dir, ext)?;
    for (expect, (index, path)) in found.iter().enumerate() {
        if *index != expect {
            return Err(Error::Config(format!(
                "{}: frame indices must be contiguous from 0, expected {} before {}",
                dir.display(),
                frame_name(expect, ext),
                path.display()
            )));
        }
    }
    if found.is_empty() {
        return Err(Error::Config(format!("{}: no {} files", dir.display(), ext)));
    }
    Ok(found.into_values().collect())
}

/// Depth maps from `%06d.pfm` files, checked against the intrinsics.
pub fn load_depth_dir(dir: &Path, k: &CameraIntrinsics) -> Result<Vec<DepthMap>> {
    indexed_files(dir, "pfm")?
        .iter()
        .map(|p| {
            let d = load_pfm(p)?;
            d.check_dims(k.width, k.height)?;
            Ok(d)
        })
        .collect()
}

pub fn write_depth_dir(dir: &Path, maps: &[(usize, DepthMap)]) -> Result<()> {
    create_dir(dir)?;
    for (index, map) in maps {
        let mut buf = Vec::new();
        write_pfm(&mut buf, map, Endianness::Little).expect("writing to memory");
        write_file(&dir.join(frame_name(*index, "pfm")), buf)?;
    }
    Ok(())
}

fn write_png(path: &Path, image: &Image) -> Result<()> {
    let color = match image.channels() {
        1 => image::ExtendedColorType::L8,
        _ => image::ExtendedColorType::Rgb8,
    };
    image::save_buffer(path, &image.to_u8(), image.width() as u32, image.height() as u32, color)
        .map_err(|e| io_err(path, std::io::Error::other(e)))
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub intrinsics: CameraIntrinsics,
    /// Inverse depth priors, one per frame.
    pub depth_priors: Vec<InverseDepthMap>,
    pub relative_poses: Option<Vec<Pose>>,
    pub gt_trajectory: Option<Trajectory>,
    pub gt_depths: Option<Vec<InverseDepthMap>>,
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self> {
        let intrinsics = CameraIntrinsics::load(&root.join(INTRINSICS))?;
        let depth_priors: Vec<InverseDepthMap> = load_depth_dir(&root.join(DEPTH_PRIOR_DIR), &intrinsics)?
            .iter()
            .map(DepthMap::to_inverse)
            .collect();
        let n = depth_priors.len();

        let rel_path = root.join(REL_POSES);
        let relative_poses = if rel_path.exists() {
            let poses = load_relative_poses(&rel_path)?;
            if poses.len() + 1 != n {
                return Err(Error::Config(format!(
                    "{}: {} relative poses for {n} frames (expected {})",
                    rel_path.display(),
                    poses.len(),
                    n - 1
                )));
            }
            Some(poses)
        } else {
            None
        };

        let gt_path = root.join(GT_TRAJ);
        let gt_trajectory = if gt_path.exists() {
            let rec = load_tum(&gt_path)?;
            if rec.poses.len() != n {
                return Err(Error::Config(format!(
                    "{}: {} poses for {n} frames",
                    gt_path.display(),
                    rec.poses.len()
                )));
            }
            Some(Trajectory::new(rec.timestamps, rec.poses)?)
        } else {
            None
        };

        let gt_dir = root.join(GT_DEPTH_DIR);
        let gt_depths = if gt_dir.is_dir() {
            let maps = load_depth_dir(&gt_dir, &intrinsics)?;
            if maps.len() != n {
                return Err(Error::Config(format!("{}: {} maps for {n} frames", gt_dir.display(), maps.len())));
            }
            Some(maps.iter().map(DepthMap::to_inverse).collect())
        } else {
            None
        };

        Ok(Self { intrinsics, depth_priors, relative_poses, gt_trajectory, gt_depths })
    }

    pub fn num_frames(&self) -> usize {
        self.depth_priors.len()
    }

    /// Ground-truth stamps when available, uniform spacing otherwise.
    pub fn timestamps(&self) -> Vec<f64> {
        match &self.gt_trajectory {
            Some(t) => t.timestamps().to_vec(),
            None => (0..self.num_frames()).map(|i| i as f64 * DEFAULT_FRAME_INTERVAL).collect(),
        }
    }
}

/// Everything `synth` writes.
pub struct DatasetContents<'a> {
    pub intrinsics: &'a CameraIntrinsics,
    pub gt_trajectory: &'a Trajectory,
    pub gt_depths: &'a [InverseDepthMap],
    pub depth_priors: &'a [InverseDepthMap],
    pub relative_poses: &'a [Pose],
    pub images: &'a [Image],
}

pub fn write_dataset(root: &Path, c: &DatasetContents<'_>) -> Result<()> {
    create_dir(root)?;
    write_file(&root.join(INTRINSICS), c.intrinsics.to_text())?;
    let stamps = c.gt_trajectory.timestamps();
    write_tum(&root.join(GT_TRAJ), stamps, c.gt_trajectory.poses())?;
    write_tum(&root.join(REL_POSES), &stamps[..c.relative_poses.len()], c.relative_poses)?;
    let indexed = |maps: &[InverseDepthMap]| maps.iter().map(|m| m.to_depth()).enumerate().collect::<Vec<_>>();
    write_depth_dir(&root.join(DEPTH_PRIOR_DIR), &indexed(c.depth_priors))?;
    write_depth_dir(&root.join(GT_DEPTH_DIR), &indexed(c.gt_depths))?;
    if !c.images.is_empty() {
        let dir = root.join(IMAGE_DIR);
        create_dir(&dir)?;
        for (i, img) in c.images.iter().enumerate() {
            write_png(&dir.join(frame_name(i, "png")), img)?;
        }
    }
    Ok(())
}
