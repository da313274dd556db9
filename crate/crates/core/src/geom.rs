//! Exact collision predicates for a planar link chain against a single
//! axis-aligned box.
//!
//! Links are zero-width segments; the obstacle is inflated by the arm radius
//! instead. These predicates are the ground truth for the environment, the
//! roadmap edge checks and the labels of the learned collision model.

use serde::{Deserialize, Serialize};

use crate::arm::{ArmModel, JointConfig};

/// A task-space point in meters.
pub type Point = [f64; 2];

/// Default arm radius used to inflate obstacles.
pub const DEFAULT_INFLATE: f64 = 0.02;

/// Default joint-space subdivision step for edge checks, in radians.
pub const DEFAULT_STEP_SIZE: f64 = 0.05;

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    /// Builds a box, reordering corners so that `min <= max` holds.
    pub fn new(a: Point, b: Point) -> Self {
        Aabb {
            min: [a[0].min(b[0]), a[1].min(b[1])],
            max: [a[0].max(b[0]), a[1].max(b[1])],
        }
    }

    pub fn from_center(center: Point, size: [f64; 2]) -> Self {
        let h = [size[0] / 2.0, size[1] / 2.0];
        Aabb {
            min: [center[0] - h[0], center[1] - h[1]],
            max: [center[0] + h[0], center[1] + h[1]],
        }
    }

    pub fn center(&self) -> Point {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.min[0] <= self.max[0] && self.min[1] <= self.max[1]
    }

    pub fn inflated(&self, by: f64) -> Self {
        Aabb {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// `[xmin, xmax, ymin, ymax]`, the layout used in state features.
    pub fn to_features(&self) -> [f64; 4] {
        [self.min[0], self.max[0], self.min[1], self.max[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p0: Point,
    pub p1: Point,
}

impl Segment {
    pub fn new(p0: Point, p1: Point) -> Self {
        Segment { p0, p1 }
    }

    pub fn point_at(&self, t: f64) -> Point {
        [
            self.p0[0] + t * (self.p1[0] - self.p0[0]),
            self.p0[1] + t * (self.p1[1] - self.p0[1]),
        ]
    }
}

/// Slab clipping of the segment parameter range against the inflated box.
/// Endpoints inside the box count as an intersection; a degenerate segment
/// is tested as a point.
pub fn segment_intersects_aabb(seg: &Segment, bx: &Aabb, inflate: f64) -> bool {
    let b = bx.inflated(inflate);
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for axis in 0..2 {
        let origin = seg.p0[axis];
        let delta = seg.p1[axis] - origin;
        if delta == 0.0 {
            if origin < b.min[axis] || origin > b.max[axis] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / delta;
        let mut ta = (b.min[axis] - origin) * inv;
        let mut tb = (b.max[axis] - origin) * inv;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// True iff any link of the arm at `q` touches the inflated obstacle.
pub fn config_in_collision(arm: &ArmModel, q: &JointConfig, bx: &Aabb, inflate: f64) -> bool {
    arm.link_segments(q)
        .iter()
        .any(|seg| segment_intersects_aabb(seg, bx, inflate))
}

/// Number of interpolation intervals so that no joint moves more than
/// `step_size` between consecutive interpolants.
///
/// The count is rounded up to a power of two: a finer step then always
/// yields a superset of the coarser interpolants.
pub fn subdivisions(qa: &JointConfig, qb: &JointConfig, step_size: f64) -> usize {
    let max_delta = qa
        .angles()
        .iter()
        .zip(qb.angles())
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max);
    if max_delta == 0.0 {
        0
    } else {
        ((max_delta / step_size).ceil().max(1.0) as usize).next_power_of_two()
    }
}

/// Linear joint-space interpolants from `qa` to `qb`, both endpoints included.
///
/// Interpolants are computed symmetrically (each from its nearer endpoint) so
/// that swapping `qa` and `qb` yields the same point set in reverse order.
pub fn interpolate(qa: &JointConfig, qb: &JointConfig, step_size: f64) -> Vec<JointConfig> {
    let n = subdivisions(qa, qb, step_size);
    if n == 0 {
        return vec![qa.clone()];
    }
    (0..=n)
        .map(|k| {
            if k == 0 {
                return qa.clone();
            }
            if k == n {
                return qb.clone();
            }
            let angles = qa
                .angles()
                .iter()
                .zip(qb.angles())
                .map(|(&a, &b)| {
                    if 2 * k == n {
                        0.5 * (a + b)
                    } else if 2 * k < n {
                        a + (b - a) * (k as f64 / n as f64)
                    } else {
                        b + (a - b) * ((n - k) as f64 / n as f64)
                    }
                })
                .collect();
            JointConfig::new(angles)
        })
        .collect()
}

/// Subdivision check of the straight joint-space edge between `qa` and `qb`.
pub fn edge_collision_free(
    arm: &ArmModel,
    qa: &JointConfig,
    qb: &JointConfig,
    bx: &Aabb,
    inflate: f64,
    step_size: f64,
) -> bool {
    interpolate(qa, qb, step_size)
        .iter()
        .all(|q| !config_in_collision(arm, q, bx, inflate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit_box() -> Aabb {
        Aabb::new([-0.5, -0.5], [0.5, 0.5])
    }

    fn dense_segment_oracle(seg: &Segment, bx: &Aabb, inflate: f64, n: usize) -> bool {
        let b = bx.inflated(inflate);
        (0..n).any(|i| b.contains(seg.point_at(i as f64 / (n - 1) as f64)))
    }

    #[test]
    fn segment_through_center() {
        let seg = Segment::new([-1.0, 0.0], [1.0, 0.0]);
        assert!(segment_intersects_aabb(&seg, &unit_box(), 0.0));
    }

    #[test]
    fn disjoint_segment() {
        let seg = Segment::new([-1.0, 1.0], [1.0, 1.0]);
        assert!(!segment_intersects_aabb(&seg, &unit_box(), 0.0));
    }

    #[test]
    fn inflation_makes_near_miss_collide() {
        let seg = Segment::new([-1.0, 0.51], [1.0, 0.51]);
        assert!(!segment_intersects_aabb(&seg, &unit_box(), 0.0));
        assert!(segment_intersects_aabb(&seg, &unit_box(), 0.02));
    }

    #[test]
    fn endpoint_inside_counts() {
        let seg = Segment::new([0.0, 0.0], [3.0, 3.0]);
        assert!(segment_intersects_aabb(&seg, &unit_box(), 0.0));
        let point = Segment::new([0.1, 0.1], [0.1, 0.1]);
        assert!(segment_intersects_aabb(&point, &unit_box(), 0.0));
        let outside = Segment::new([0.9, 0.1], [0.9, 0.1]);
        assert!(!segment_intersects_aabb(&outside, &unit_box(), 0.0));
    }

    #[test]
    fn grazing_diagonal_matches_dense_oracle() {
        let seg = Segment::new([-1.0, -0.48], [1.0, 0.52]);
        let oracle = dense_segment_oracle(&seg, &unit_box(), 0.0, 10_000);
        assert_eq!(segment_intersects_aabb(&seg, &unit_box(), 0.0), oracle);
        assert!(oracle);
    }

    #[test]
    fn random_segments_match_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bx = Aabb::new([0.2, -0.1], [0.5, 0.3]);
        let mut disagreements = 0;
        for _ in 0..2000 {
            let p0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let p1 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let seg = Segment::new(p0, p1);
            if segment_intersects_aabb(&seg, &bx, 0.02) != dense_segment_oracle(&seg, &bx, 0.02, 10_000) {
                disagreements += 1;
            }
        }
        // sampling can only miss a tangential clip shorter than the sample spacing
        assert!(disagreements <= 2, "{disagreements} disagreements");
    }

    #[test]
    fn far_obstacle_never_collides() {
        let arm = ArmModel::default();
        let bx = Aabb::from_center([10.0, 10.0], [0.2, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let q = arm.random_config(&mut rng);
            assert!(!config_in_collision(&arm, &q, &bx, DEFAULT_INFLATE));
        }
    }

    #[test]
    fn straight_arm_hits_box_on_axis() {
        let arm = ArmModel::default();
        let q = JointConfig::new(vec![0.0, 0.0, 0.0]);
        let bx = Aabb::from_center([0.45, 0.0], [0.2, 0.3]);
        assert!(config_in_collision(&arm, &q, &bx, DEFAULT_INFLATE));
    }

    #[test]
    fn config_collision_matches_per_link_sampling() {
        let arm = ArmModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agree = 0;
        let trials = 10_000;
        for _ in 0..trials {
            let q = arm.random_config(&mut rng);
            let c = [rng.random_range(0.2..0.7), rng.random_range(-0.4..0.4)];
            let bx = Aabb::from_center(c, [0.2, 0.3]);
            let inflated = bx.inflated(DEFAULT_INFLATE);
            let oracle = arm.link_segments(&q).iter().any(|seg| {
                (0..100).any(|i| inflated.contains(seg.point_at(i as f64 / 99.0)))
            });
            if oracle == config_in_collision(&arm, &q, &bx, DEFAULT_INFLATE) {
                agree += 1;
            }
        }
        assert!(agree as f64 / trials as f64 >= 0.999, "agreement {agree}/{trials}");
    }

    #[test]
    fn single_point_edge() {
        let arm = ArmModel::default();
        let q = JointConfig::new(vec![1.0, 0.5, -0.5]);
        let bx = Aabb::from_center([-0.5, -0.5], [0.2, 0.3]);
        assert!(edge_collision_free(&arm, &q, &q, &bx, DEFAULT_INFLATE, DEFAULT_STEP_SIZE));
    }

    #[test]
    fn swept_edge_through_box_detected() {
        // Straight arm sweeping from -60 to +60 degrees passes a box on the x-axis
        // at radius 0.75 while both endpoints clear it.
        let arm = ArmModel::default();
        let qa = JointConfig::new(vec![-PI / 3.0, 0.0, 0.0]);
        let qb = JointConfig::new(vec![PI / 3.0, 0.0, 0.0]);
        let bx = Aabb::from_center([0.75, 0.0], [0.1, 0.1]);
        assert!(!config_in_collision(&arm, &qa, &bx, DEFAULT_INFLATE));
        assert!(!config_in_collision(&arm, &qb, &bx, DEFAULT_INFLATE));
        assert!(!edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, DEFAULT_STEP_SIZE));
        assert!(!edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, DEFAULT_STEP_SIZE / 10.0));
    }

    #[test]
    fn interpolation_is_symmetric() {
        let qa = JointConfig::new(vec![0.1, -0.7, 0.3]);
        let qb = JointConfig::new(vec![-0.4, 0.2, 1.1]);
        let fwd = interpolate(&qa, &qb, 0.05);
        let mut bwd = interpolate(&qb, &qa, 0.05);
        bwd.reverse();
        assert_eq!(fwd, bwd);
        let max_step = fwd
            .windows(2)
            .flat_map(|w| {
                w[0].angles()
                    .iter()
                    .zip(w[1].angles())
                    .map(|(a, b)| (b - a).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        assert!(max_step <= 0.05 + 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn angles() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-PI..PI, 3)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn edge_check_symmetric(a in angles(), b in angles(), cx in 0.2..0.7f64, cy in -0.4..0.4f64) {
                let arm = ArmModel::default();
                let qa = JointConfig::new(a);
                let qb = JointConfig::new(b);
                let bx = Aabb::from_center([cx, cy], [0.2, 0.3]);
                prop_assert_eq!(
                    edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, DEFAULT_STEP_SIZE),
                    edge_collision_free(&arm, &qb, &qa, &bx, DEFAULT_INFLATE, DEFAULT_STEP_SIZE)
                );
            }

            #[test]
            fn refinement_never_clears_a_collision(a in angles(), b in angles(), cx in 0.2..0.7f64, cy in -0.4..0.4f64) {
                let arm = ArmModel::default();
                let qa = JointConfig::new(a);
                let qb = JointConfig::new(b);
                let bx = Aabb::from_center([cx, cy], [0.2, 0.3]);
                let coarse = edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, 0.1);
                let fine = edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, 0.07);
                let finer = edge_collision_free(&arm, &qa, &qb, &bx, DEFAULT_INFLATE, 0.013);
                if !coarse { prop_assert!(!fine); }
                if !fine { prop_assert!(!finer); }
            }
        }
    }
}
