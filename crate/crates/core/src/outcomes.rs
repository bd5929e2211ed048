//! Tumor-volume response summaries: best average response (BAR) and time to
//! tumor doubling (TTD).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// BAR only considers measurements strictly after this day.
pub const BAR_MIN_DAY: f64 = 10.0;

/// Ellipsoid volume approximation `l * w^2 * pi / 6` in mm³.
pub fn tumor_volume(major: f64, minor: f64) -> Result<f64> {
    if !(major.is_finite() && minor.is_finite()) {
        return Err(Error::NonFinite("tumor axes".into()));
    }
    if major <= 0.0 || minor <= 0.0 {
        return Err(Error::InvalidInput("tumor axes must be positive".into()));
    }
    if minor > major {
        return Err(Error::InvalidInput("minor axis exceeds major axis".into()));
    }
    Ok(major * minor * minor * core::f64::consts::PI / 6.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeTrajectory {
    days: Vec<f64>,
    volumes: Vec<f64>,
}

impl VolumeTrajectory {
    pub fn new(days: Vec<f64>, volumes: Vec<f64>) -> Result<Self> {
        if days.len() != volumes.len() {
            return Err(Error::WidthMismatch {
                expected: days.len(),
                got: volumes.len(),
            });
        }
        if days.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: days.len(),
            });
        }
        if days[0] != 0.0 {
            return Err(Error::InvalidInput("trajectory must start at day 0".into()));
        }
        if days.windows(2).any(|w| !(w[1] > w[0])) || days.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput(
                "measurement days must be strictly increasing".into(),
            ));
        }
        if volumes.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("volumes must be positive".into()));
        }
        Ok(Self { days, volumes })
    }

    /// Builds a trajectory from caliper axes (major, minor) per measurement.
    pub fn from_axes(days: Vec<f64>, axes: &[(f64, f64)]) -> Result<Self> {
        let volumes = axes
            .iter()
            .map(|&(l, w)| tumor_volume(l, w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(days, volumes)
    }

    pub fn days(&self) -> &[f64] {
        &self.days
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }
}

/// Returns -BAR in percent, so larger values mean better response.
///
/// BAR is the minimum, over measurements `t` taken after day 10, of the
/// running mean of relative volume change `(V_l - V_0) / V_0` for
/// `l = 0..=t` (the baseline term is zero but counts in the divisor).
pub fn compute_bar(traj: &VolumeTrajectory) -> Result<f64> {
    let v0 = traj.volumes[0];
    let mut running = 0.0;
    let mut best: Option<f64> = None;
    for (t, (&day, &v)) in traj.days.iter().zip(&traj.volumes).enumerate() {
        running += (v - v0) / v0;
        if day > BAR_MIN_DAY {
            let avg = running / (t + 1) as f64 * 100.0;
            best = Some(best.map_or(avg, |b: f64| b.min(avg)));
        }
    }
    best.map(|bar| -bar)
        .ok_or(Error::InsufficientFollowUp { threshold: BAR_MIN_DAY })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtdOutcome {
    /// Natural log of the doubling (or censoring) day.
    pub log_days: f64,
    pub days: f64,
    /// True when the tumor never reached twice its baseline volume and the
    /// value is the last observed day.
    pub censored: bool,
}

/// Time to tumor doubling: the first measurement day with `V >= 2 V_0`.
pub fn compute_ttd(traj: &VolumeTrajectory) -> Result<TtdOutcome> {
    let target = 2.0 * traj.volumes[0];
    let hit = traj
        .days
        .iter()
        .zip(&traj.volumes)
        .skip(1)
        .find(|(_, &v)| v >= target)
        .map(|(&d, _)| d);
    let (days, censored) = match hit {
        Some(d) => (d, false),
        None => (*traj.days.last().expect("length >= 2"), true),
    };
    Ok(TtdOutcome {
        log_days: math::ln(days),
        days,
        censored,
    })
}
