//! Planar serial-link arm: configurations and forward kinematics.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Segment};

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        JointConfig(angles)
    }

    pub fn zeros(n: usize) -> Self {
        JointConfig(vec![0.0; n])
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        JointConfig(v)
    }
}

/// Geometry of the arm: link lengths and per-joint limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_lengths: Vec<f64>,
    pub joint_limits: Vec<[f64; 2]>,
}

impl Default for ArmModel {
    fn default() -> Self {
        ArmModel {
            link_lengths: vec![0.4, 0.3, 0.2],
            joint_limits: vec![[-PI, PI]; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub ee: Point,
    pub links: Vec<Segment>,
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.is_empty() {
            return Err(Error::Config("arm needs at least one link".into()));
        }
        if self.link_lengths.len() != self.joint_limits.len() {
            return Err(Error::Config(format!(
                "{} link lengths but {} joint limits",
                self.link_lengths.len(),
                self.joint_limits.len()
            )));
        }
        if self.link_lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        if self
            .joint_limits
            .iter()
            .any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi))
        {
            return Err(Error::Config("joint limits must satisfy lo < hi".into()));
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn check_limits(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.n_joints() {
            return Err(Error::Dimension {
                expected: self.n_joints(),
                got: q.len(),
            });
        }
        for (joint, (&value, &[lo, hi])) in q.angles().iter().zip(&self.joint_limits).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::JointLimit { joint, value, lo, hi });
            }
        }
        Ok(())
    }

    pub fn clip(&self, angles: &mut [f64]) {
        for (a, &[lo, hi]) in angles.iter_mut().zip(&self.joint_limits) {
            *a = a.clamp(lo, hi);
        }
    }

    /// Forward kinematics with limit checking.
    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Kinematics> {
        self.check_limits(q)?;
        let links = self.link_segments(q);
        let ee = links.last().map(|s| s.p1).unwrap_or([0.0, 0.0]);
        Ok(Kinematics { ee, links })
    }

    /// Link segments of the cumulative-angle chain rooted at the origin.
    /// No limit checks; callers on hot paths have already validated `q`.
    pub fn link_segments(&self, q: &JointConfig) -> Vec<Segment> {
        let mut links = Vec::with_capacity(self.n_joints());
        let mut p = [0.0, 0.0];
        let mut theta = 0.0;
        for (len, angle) in self.link_lengths.iter().zip(q.angles()) {
            theta += angle;
            let next = [p[0] + len * theta.cos(), p[1] + len * theta.sin()];
            links.push(Segment::new(p, next));
            p = next;
        }
        links
    }

    pub fn end_effector(&self, q: &JointConfig) -> Point {
        let mut p = [0.0, 0.0];
        let mut theta = 0.0;
        for (len, angle) in self.link_lengths.iter().zip(q.angles()) {
            theta += angle;
            p[0] += len * theta.cos();
            p[1] += len * theta.sin();
        }
        p
    }

    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> JointConfig {
        JointConfig(
            self.joint_limits
                .iter()
                .map(|&[lo, hi]| rng.random_range(lo..=hi))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn straight_arm() {
        let arm = ArmModel::default();
        let k = arm.forward_kinematics(&JointConfig::new(vec![0.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(k.ee[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(k.ee[1], 0.0, epsilon = 1e-15);
        assert_eq!(k.links.len(), 3);
    }

    #[test]
    fn rotated_straight_arm() {
        let arm = ArmModel::default();
        let k = arm.forward_kinematics(&JointConfig::new(vec![PI / 2.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(k.ee[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.ee[1], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn right_angle_chain() {
        let arm = ArmModel::default();
        let k = arm
            .forward_kinematics(&JointConfig::new(vec![PI / 2.0, -PI / 2.0, 0.0]))
            .unwrap();
        assert_abs_diff_eq!(k.ee[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k.ee[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(k.links[0].p1[1], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn out_of_limits_is_rejected() {
        let arm = ArmModel::default();
        let err = arm.forward_kinematics(&JointConfig::new(vec![4.0, 0.0, 0.0]));
        assert!(matches!(err, Err(Error::JointLimit { joint: 0, .. })));
        let err = arm.forward_kinematics(&JointConfig::new(vec![0.0, 0.0]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = arm.forward_kinematics(&JointConfig::new(vec![f64::NAN, 0.0, 0.0]));
        assert!(err.is_err());
    }

    #[test]
    fn end_effector_matches_link_tip() {
        let arm = ArmModel::default();
        let q = JointConfig::new(vec![0.3, -1.2, 2.0]);
        let tip = arm.link_segments(&q)[2].p1;
        assert_eq!(arm.end_effector(&q), tip);
    }
}
