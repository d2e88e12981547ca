use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::geometry::Pose;
use crate::{Error, Result};

/// Quaternions whose norm deviates more than this are reported.
const QUATERNION_NORM_WARN: f64 = 1e-3;

/// Records of a `timestamp tx ty tz qx qy qz qw` file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TumRecords {
    pub timestamps: Vec<f64>,
    pub poses: Vec<Pose>,
    /// Non-fatal diagnostics, e.g. renormalized quaternions.
    pub warnings: Vec<String>,
}

pub fn parse_tum(text: &str, path: &Path) -> Result<TumRecords> {
    let mut out = TumRecords::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::ParseLine {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 8];
        for (slot, tok) in v.iter_mut().zip(&fields) {
            *slot = tok
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| err(format!("not a finite number: {tok:?}")))?;
        }
        let [t, tx, ty, tz, qx, qy, qz, qw] = v;
        let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        if norm == 0.0 {
            return Err(err("zero quaternion".into()));
        }
        if (norm - 1.0).abs() > QUATERNION_NORM_WARN {
            let msg = format!(
                "{}:{}: quaternion norm {norm:.6} renormalized",
                path.display(),
                lineno + 1
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
        out.timestamps.push(t);
        out.poses
            .push(Pose::from_components(qw, qx, qy, qz, Vector3::new(tx, ty, tz)));
    }
    Ok(out)
}

pub fn load_tum(path: &Path) -> Result<TumRecords> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tum(&text, path)
}

/// Loads consecutive relative transforms `τ → τ+1`.
pub fn load_relative_poses(path: &Path) -> Result<Vec<Pose>> {
    Ok(load_tum(path)?.poses)
}

/// Formats records with shortest round-trip float representation.
pub fn format_tum(timestamps: &[f64], poses: &[Pose]) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, p) in timestamps.iter().zip(poses) {
        let q = p.rotation.quaternion();
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            t, p.translation.x, p.translation.y, p.translation.z, q.i, q.j, q.k, q.w
        );
    }
    s
}

pub fn write_tum(path: &Path, timestamps: &[f64], poses: &[Pose]) -> Result<()> {
    std::fs::write(path, format_tum(timestamps, poses)).map_err(|e| Error::io(path, e))
}
