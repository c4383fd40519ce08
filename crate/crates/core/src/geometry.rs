//! Intersection layout, arc-length parameterized maneuver paths and the
//! pairwise crossing/merge conflict indicators.
//!
//! The intersection center is the origin. Approaches are indexed
//! West, South, East, North; traffic keeps right, so the in-lane of an
//! approach sits `lane_center_offset` to the right of the road axis and the
//! out-lane the same distance to the left. The intersection box is the
//! square of half-width `2 * lane_center_offset`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform arc-length step used when sampling paths.
pub const SAMPLE_STEP: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectionParams {
    /// Outer radius of the zone where opinions evolve (m).
    pub evolution_radius: f64,
    /// Radius of the decision zone, which is also the intersection core (m).
    pub decision_radius: f64,
    /// Lateral distance of a lane centerline from the road axis (m).
    pub lane_center_offset: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Right-turn arc radius (m). When absent the arc spans the box corner,
    /// giving `box_half_width - lane_center_offset`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right_turn_radius: Option<f64>,
    /// Left-turn arc radius (m), `box_half_width + lane_center_offset` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_turn_radius: Option<f64>,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        Self {
            evolution_radius: 15.0,
            decision_radius: 5.0,
            lane_center_offset: 1.75,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            right_turn_radius: None,
            left_turn_radius: None,
        }
    }
}

impl IntersectionParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.evolution_radius,
            self.decision_radius,
            self.lane_center_offset,
            self.vehicle_length,
            self.vehicle_width,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("intersection", "all values must be finite"));
        }
        if !(self.evolution_radius > self.decision_radius && self.decision_radius > 0.0) {
            return Err(Error::invalid(
                "intersection",
                "evolution_radius > decision_radius > 0",
            ));
        }
        if !(self.vehicle_length > self.vehicle_width && self.vehicle_width > 0.0) {
            return Err(Error::invalid(
                "intersection",
                "vehicle_length > vehicle_width > 0",
            ));
        }
        if !(self.lane_center_offset > 0.0 && self.lane_center_offset < self.decision_radius) {
            return Err(Error::invalid(
                "intersection",
                "0 < lane_center_offset < decision_radius",
            ));
        }
        let (r, l) = (
            self.turn_radius(ManeuverKind::Right),
            self.turn_radius(ManeuverKind::Left),
        );
        if !(r.is_finite() && l.is_finite() && 0.0 < r && r < l) {
            return Err(Error::invalid(
                "intersection",
                "0 < right_turn_radius < left_turn_radius",
            ));
        }
        Ok(())
    }

    /// Half-width of the square intersection box.
    pub fn box_half_width(&self) -> f64 {
        2.0 * self.lane_center_offset
    }

    /// Arc radius of a turn; infinite for straight travel.
    pub fn turn_radius(&self, kind: ManeuverKind) -> f64 {
        let half = self.box_half_width();
        match kind {
            ManeuverKind::Right => self
                .right_turn_radius
                .unwrap_or(half - self.lane_center_offset),
            ManeuverKind::Left => self
                .left_turn_radius
                .unwrap_or(half + self.lane_center_offset),
            ManeuverKind::Straight => f64::INFINITY,
        }
    }
}

/// Lane label 1..=8. Odd labels are in-lanes (W, S, E, N), even labels
/// out-lanes (2 = south, 4 = east, 6 = north, 8 = west departure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LaneId(u8);

impl LaneId {
    pub fn new(id: u8) -> Result<Self> {
        if (1..=8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::InvalidLane(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_in_lane(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn is_out_lane(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// Travel heading of vehicles on this lane.
    fn heading(self) -> f64 {
        let quarter = if self.is_in_lane() {
            (self.0 - 1) / 2
        } else {
            (self.0 / 2 + 2) % 4
        };
        f64::from(quarter) * FRAC_PI_2
    }
}

impl TryFrom<u8> for LaneId {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<LaneId> for u8 {
    fn from(value: LaneId) -> Self {
        value.0
    }
}

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManeuverKind {
    Right,
    Straight,
    Left,
}

impl ManeuverKind {
    pub const ALL: [ManeuverKind; 3] = [
        ManeuverKind::Right,
        ManeuverKind::Straight,
        ManeuverKind::Left,
    ];

    /// Out-lane reached from `in_lane` with this maneuver.
    pub fn out_lane_from(self, in_lane: LaneId) -> Result<LaneId> {
        if !in_lane.is_in_lane() {
            return Err(Error::InvalidManeuver {
                in_lane: in_lane.get(),
                out_lane: 0,
            });
        }
        let offset = match self {
            ManeuverKind::Right => 1,
            ManeuverKind::Straight => 3,
            ManeuverKind::Left => 5,
        };
        LaneId::new((in_lane.get() - 1 + offset) % 8 + 1)
    }

    fn turn_sign(self) -> f64 {
        match self {
            ManeuverKind::Right => -1.0,
            ManeuverKind::Straight => 0.0,
            ManeuverKind::Left => 1.0,
        }
    }
}

impl fmt::Display for ManeuverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ManeuverKind::Right => "RIGHT",
            ManeuverKind::Straight => "STRAIGHT",
            ManeuverKind::Left => "LEFT",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Maneuver {
    pub kind: ManeuverKind,
    pub in_lane: LaneId,
    pub out_lane: LaneId,
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} ({})", self.in_lane, self.out_lane, self.kind)
    }
}

/// Classifies an (in-lane, out-lane) intention by its offset modulo 8.
pub fn classify_maneuver(in_lane: LaneId, out_lane: LaneId) -> Result<Maneuver> {
    let invalid = Error::InvalidManeuver {
        in_lane: in_lane.get(),
        out_lane: out_lane.get(),
    };
    if !in_lane.is_in_lane() || !out_lane.is_out_lane() {
        return Err(invalid);
    }
    let offset = (8 + out_lane.get() - in_lane.get()) % 8;
    let kind = match offset {
        1 => ManeuverKind::Right,
        3 => ManeuverKind::Straight,
        5 => ManeuverKind::Left,
        _ => return Err(invalid),
    };
    Ok(Maneuver {
        kind,
        in_lane,
        out_lane,
    })
}

/// Shorthand for classifying raw lane labels.
pub fn maneuver(in_lane: u8, out_lane: u8) -> Result<Maneuver> {
    classify_maneuver(LaneId::new(in_lane)?, LaneId::new(out_lane)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// A maneuver path sampled uniformly in arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub maneuver: Maneuver,
    pub total_length: f64,
    pub samples: Vec<PathSample>,
    step: f64,
    /// Arc length of the point nearest the intersection center.
    pub s_center: f64,
    /// Arc length where the path joins its out-lane centerline at the box edge.
    pub s_merge: f64,
}

fn unit(heading: f64) -> Point {
    Point::new(heading.cos(), heading.sin())
}

fn right_normal(heading: f64) -> Point {
    Point::new(heading.sin(), -heading.cos())
}

/// Wraps an angle into (-PI, PI].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

enum Piece {
    Line {
        start: Point,
        heading: f64,
        length: f64,
    },
    Arc {
        center: Point,
        radius: f64,
        start_heading: f64,
        sign: f64,
        length: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Line { length, .. } | Piece::Arc { length, .. } => length,
        }
    }

    fn eval(&self, u: f64) -> (Point, f64) {
        match *self {
            Piece::Line { start, heading, .. } => (start.add(unit(heading).scale(u)), heading),
            Piece::Arc {
                center,
                radius,
                start_heading,
                sign,
                ..
            } => {
                let heading = start_heading + sign * u / radius;
                // center lies on the turning side of the tangent
                let p = center.add(right_normal(heading).scale(sign * radius));
                (p, heading)
            }
        }
    }
}

/// Builds the sampled path of `maneuver`, starting `approach_length` from the
/// center on the in-lane and ending the same distance out on the out-lane.
pub fn build_path(
    maneuver: Maneuver,
    params: &IntersectionParams,
    approach_length: f64,
) -> Result<PathSpec> {
    params.validate()?;
    if !approach_length.is_finite() || approach_length < params.evolution_radius {
        return Err(Error::Geometry(format!(
            "approach_length {approach_length} must be at least the evolution radius {}",
            params.evolution_radius
        )));
    }
    let off = params.lane_center_offset;
    let half = params.box_half_width();
    if approach_length <= half + off {
        return Err(Error::Geometry(
            "approach shorter than the intersection box".into(),
        ));
    }

    let h_in = maneuver.in_lane.heading();
    let h_out = maneuver.out_lane.heading();
    let e_in = unit(h_in);
    let r_in = right_normal(h_in);
    let e_out = unit(h_out);
    let r_out = right_normal(h_out);
    // along-lane coordinate at which the centerline is `approach_length` from the center
    let t_far = (approach_length * approach_length - off * off).sqrt();

    let mut pieces = Vec::with_capacity(3);
    match maneuver.kind {
        ManeuverKind::Straight => {
            pieces.push(Piece::Line {
                start: e_in.scale(-t_far).add(r_in.scale(off)),
                heading: h_in,
                length: 2.0 * t_far,
            });
        }
        kind => {
            let sign = kind.turn_sign();
            // the in-lane and out-lane centerlines meet at the tangent corner,
            // +-off along the in-lane; the arc is tangent to both lines
            let corner_t = sign * off;
            let radius = params.turn_radius(kind);
            let entry_len = t_far + corner_t - radius;
            // distance along the out-lane from the center to the arc end
            let exit_u = radius - corner_t;
            if entry_len <= 0.0 || exit_u >= t_far {
                return Err(Error::Geometry(format!(
                    "turn radius {radius} does not fit an approach of {approach_length} m"
                )));
            }
            let arc_start = e_in.scale(corner_t - radius).add(r_in.scale(off));
            let center = arc_start.add(r_in.scale(-sign * radius));
            pieces.push(Piece::Line {
                start: e_in.scale(-t_far).add(r_in.scale(off)),
                heading: h_in,
                length: entry_len,
            });
            pieces.push(Piece::Arc {
                center,
                radius,
                start_heading: h_in,
                sign,
                length: radius * FRAC_PI_2,
            });
            pieces.push(Piece::Line {
                start: e_out.scale(exit_u).add(r_out.scale(off)),
                heading: h_out,
                length: t_far - exit_u,
            });
        }
    }

    let total: f64 = pieces.iter().map(Piece::length).sum();
    let n = (total / SAMPLE_STEP).ceil().max(1.0) as usize;
    let step = total / n as f64;
    let mut samples = Vec::with_capacity(n + 1);
    let mut piece_idx = 0;
    let mut piece_start = 0.0;
    for k in 0..=n {
        let s = if k == n { total } else { k as f64 * step };
        while piece_idx + 1 < pieces.len() && s > piece_start + pieces[piece_idx].length() {
            piece_start += pieces[piece_idx].length();
            piece_idx += 1;
        }
        let u = (s - piece_start).clamp(0.0, pieces[piece_idx].length());
        let (p, heading) = pieces[piece_idx].eval(u);
        samples.push(PathSample {
            s,
            x: p.x,
            y: p.y,
            heading: wrap_angle(heading),
        });
    }

    let s_merge = match maneuver.kind {
        ManeuverKind::Straight => t_far + half,
        _ => pieces[0].length() + pieces[1].length(),
    };
    let s_center = samples
        .iter()
        .min_by(|a, b| a.x.hypot(a.y).total_cmp(&b.x.hypot(b.y)))
        .map(|p| p.s)
        .unwrap_or(0.0);

    Ok(PathSpec {
        maneuver,
        total_length: total,
        samples,
        step,
        s_center,
        s_merge,
    })
}

impl PathSpec {
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Pose at arc length `s`, clamped to the path ends.
    pub fn pose_clamped(&self, s: f64) -> Pose {
        let s = s.clamp(0.0, self.total_length);
        let last = self.samples.len() - 1;
        let idx = ((s / self.step).floor() as usize).min(last.saturating_sub(1));
        let a = &self.samples[idx];
        let b = &self.samples[(idx + 1).min(last)];
        let span = b.s - a.s;
        let w = if span > 0.0 {
            ((s - a.s) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dh = wrap_angle(b.heading - a.heading);
        Pose {
            x: a.x + w * (b.x - a.x),
            y: a.y + w * (b.y - a.y),
            heading: wrap_angle(a.heading + w * dh),
        }
    }

    /// Pose at arc length `s`, continuing straight along the final heading
    /// beyond the end of the path.
    pub fn pose_extended(&self, s: f64) -> Pose {
        if s <= self.total_length {
            return self.pose_clamped(s);
        }
        let end = self.pose_clamped(self.total_length);
        let extra = s - self.total_length;
        Pose {
            x: end.x + extra * end.heading.cos(),
            y: end.y + extra * end.heading.sin(),
            heading: end.heading,
        }
    }

    /// Arc length, past the center, at which the path leaves `radius`.
    pub fn s_leaving(&self, radius: f64) -> f64 {
        self.samples
            .iter()
            .find(|p| p.s > self.s_center && p.x.hypot(p.y) > radius)
            .map(|p| p.s)
            .unwrap_or(self.total_length)
    }

    /// Arc length, before the center, at which the path first comes within
    /// `radius`. Distance to the center only shrinks along the approach, so
    /// bisection converges to the crossing.
    pub fn s_entering(&self, radius: f64) -> f64 {
        let dist = |s: f64| self.pose_clamped(s).point().norm();
        if dist(0.0) <= radius {
            return 0.0;
        }
        if dist(self.s_center) > radius {
            return self.s_center;
        }
        let (mut lo, mut hi) = (0.0, self.s_center);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dist(mid) > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Position of the point where this path joins its out-lane.
    pub fn merge_point(&self) -> Point {
        self.pose_clamped(self.s_merge).point()
    }
}

/// Linearly interpolated pose at arc length `s`.
pub fn position_on_path(path: &PathSpec, s: f64) -> Result<Pose> {
    if !(0.0..=path.total_length).contains(&s) {
        return Err(Error::OutOfRange {
            s,
            total_length: path.total_length,
        });
    }
    Ok(path.pose_clamped(s))
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0) && !(d1 == 0.0 && d2 == 0.0 && d3 == 0.0 && d4 == 0.0)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

fn segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Segments of the interior part of `path` (up to its out-lane entry) that lie
/// within `radius` of the center.
fn interior_segments(path: &PathSpec, radius: f64) -> Vec<(Point, Point)> {
    path.samples
        .windows(2)
        .filter(|w| w[1].s <= path.s_merge + 1e-9)
        .map(|w| (Point::new(w[0].x, w[0].y), Point::new(w[1].x, w[1].y)))
        .filter(|(a, b)| a.norm() <= radius && b.norm() <= radius)
        .collect()
}

/// 1 when the two paths cross (or pass within a vehicle width of each other)
/// inside the intersection neighborhood, else 0.
///
/// Both polylines are cut at their out-lane entry. Paths sharing an out-lane
/// converge at a common merge point; contacts within a vehicle length plus a
/// vehicle width of that point are the merge itself and are left to
/// [`merge_indicator`].
pub fn crossing_indicator(a: &PathSpec, b: &PathSpec, params: &IntersectionParams) -> u8 {
    let radius = params.decision_radius + params.vehicle_length;
    let seg_a = interior_segments(a, radius);
    let seg_b = interior_segments(b, radius);
    let shared = (a.maneuver.out_lane == b.maneuver.out_lane).then(|| a.merge_point());
    let reach = params.vehicle_length + params.vehicle_width;
    let near_merge = |p: Point, q: Point| match shared {
        Some(m) => p.distance(m) <= reach && q.distance(m) <= reach,
        None => false,
    };
    for &(p1, p2) in &seg_a {
        for &(q1, q2) in &seg_b {
            if segment_distance(p1, p2, q1, q2) < params.vehicle_width
                && !(near_merge(p1, q1) && near_merge(p2, q2))
            {
                return 1;
            }
        }
    }
    0
}

/// 1 when both maneuvers leave on the same out-lane.
pub fn merge_indicator(a: &Maneuver, b: &Maneuver) -> u8 {
    u8::from(a.out_lane == b.out_lane)
}
