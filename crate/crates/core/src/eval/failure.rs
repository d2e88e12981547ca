use super::Trajectory;

/// Ground-truth displacement at or above which a sequence counts as large motion.
pub const LARGE_MOTION_DISPLACEMENT: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FailureReport {
    pub ate_value: f64,
    pub is_failure: bool,
    pub path_length: f64,
    pub max_step_translation: f64,
    pub total_forward_displacement: f64,
    pub large_motion_flag: bool,
}

pub fn classify_failure(ate_value: f64, gt: &Trajectory, threshold: f64) -> FailureReport {
    let t: Vec<_> = gt.translations().collect();
    let steps: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let displacement = (t[t.len() - 1] - t[0]).norm();
    FailureReport {
        ate_value,
        is_failure: ate_value > threshold,
        path_length: steps.iter().sum(),
        max_step_translation: steps.iter().copied().fold(0.0, f64::max),
        total_forward_displacement: displacement,
        large_motion_flag: displacement >= LARGE_MOTION_DISPLACEMENT,
    }
}
