//! Oriented-rectangle separation by the separating-axis test.

use crate::geometry::{IntersectionParams, Point, Pose};

/// Vehicle footprint centred at a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: Point,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Footprint {
    pub fn at(pose: Pose, params: &IntersectionParams) -> Self {
        Self {
            center: pose.point(),
            heading: pose.heading,
            length: params.vehicle_length,
            width: params.vehicle_width,
        }
    }

    fn axes(&self) -> [Point; 2] {
        let (s, c) = self.heading.sin_cos();
        [Point::new(c, s), Point::new(-s, c)]
    }

    /// Projection interval of the rectangle onto a unit axis.
    fn project(&self, axis: Point) -> (f64, f64) {
        let [u, w] = self.axes();
        let mid = self.center.x * axis.x + self.center.y * axis.y;
        let reach = 0.5 * self.length * (u.x * axis.x + u.y * axis.y).abs()
            + 0.5 * self.width * (w.x * axis.x + w.y * axis.y).abs();
        (mid - reach, mid + reach)
    }
}

/// Largest gap between the projections over the four candidate axes.
///
/// Positive values separate the rectangles by at least that much. When every
/// axis overlaps the result is minus the smallest penetration depth.
pub fn clearance(a: &Footprint, b: &Footprint) -> f64 {
    a.axes()
        .into_iter()
        .chain(b.axes())
        .map(|axis| {
            let (a0, a1) = a.project(axis);
            let (b0, b1) = b.project(axis);
            (b0 - a1).max(a0 - b1)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum pairwise clearance and the pairs that touch or overlap.
pub fn collision_check(poses: &[Pose], params: &IntersectionParams) -> (f64, Vec<(usize, usize)>) {
    let prints: Vec<Footprint> = poses.iter().map(|p| Footprint::at(*p, params)).collect();
    let mut min = f64::INFINITY;
    let mut colliding = Vec::new();
    for i in 0..prints.len() {
        for j in (i + 1)..prints.len() {
            let c = clearance(&prints[i], &prints[j]);
            min = min.min(c);
            if c <= 0.0 {
                colliding.push((i, j));
            }
        }
    }
    (min, colliding)
}
