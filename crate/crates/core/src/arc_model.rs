//! Variable-length arc-shaped joint model.
//!
//! The robot is a chain of `N` circular arcs. Arc `i` lies between joint unit `i-1` and
//! joint unit `i`; units `1..N-1` carry two motors each and can travel along the body,
//! unit `N` is fixed at the rear and drives both racks with one motor. Every motor feeds a
//! signed length of flexible rack (`d`, positive for counterclockwise rotation), and the
//! arc lengths `L_i` and angles `theta_i` follow from the `2N` rack extensions.
//!
//! Indices in the public API are 1-based wherever they name a motor, a sideline, a segment
//! or a joint unit, so error messages line up with the usual `d_1 ... d_2N` numbering.

use serde::Serialize;

use crate::error::{Error, LengthKind, Result};

/// Tolerance on `sum(L_i) == total_length`.
pub const LENGTH_BUDGET_TOL: f64 = 1e-9;

/// Below this arc angle the chord uses its series expansion instead of `L / theta`.
pub const SMALL_ANGLE: f64 = 1e-9;

/// Default cap on `|theta|` of a single segment.
pub const DEFAULT_MAX_ARC_ANGLE: f64 = 2.0 * std::f64::consts::PI;

/// Allowed mismatch between the two virtual rear motors when a state is built from raw values.
pub const MIRROR_TOL: f64 = 1e-12;

/// Global constants of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobotGeometry {
    total_length: f64,
    segment_count: usize,
    body_width: f64,
}

impl RobotGeometry {
    pub fn new(total_length: f64, segment_count: usize, body_width: f64) -> Result<Self> {
        if !(total_length.is_finite() && total_length > 0.0) {
            return Err(Error::invalid(format!(
                "total length must be positive, got {total_length}"
            )));
        }
        if !(body_width.is_finite() && body_width > 0.0) {
            return Err(Error::invalid(format!(
                "body width must be positive, got {body_width}"
            )));
        }
        if segment_count < 2 {
            return Err(Error::invalid(format!(
                "segment count must be at least 2, got {segment_count}"
            )));
        }
        Ok(Self {
            total_length,
            segment_count,
            body_width,
        })
    }

    /// Same robot with a different number of joint units.
    pub fn with_segment_count(&self, segment_count: usize) -> Result<Self> {
        Self::new(self.total_length, segment_count, self.body_width)
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    pub fn body_width(&self) -> f64 {
        self.body_width
    }

    /// Per-segment length of the straight, evenly spaced initial configuration.
    pub fn nominal_segment_length(&self) -> f64 {
        self.total_length / self.segment_count as f64
    }

    /// Number of entries in a [`MotorState`], counting the rear motor twice.
    pub fn motor_count(&self) -> usize {
        2 * self.segment_count
    }

    /// Number of physical motors: two per repositionable unit plus the rear one.
    pub fn physical_motor_count(&self) -> usize {
        2 * self.segment_count - 1
    }

    /// Distance along the centerline from the head to joint unit `unit` when the units are
    /// evenly spaced.
    pub fn nominal_unit_position(&self, unit: usize) -> f64 {
        unit as f64 * self.nominal_segment_length()
    }
}

/// Rack extensions `d_1 ... d_2N`.
///
/// The rear unit is stored as two mirrored virtual motors, so `d_2N-1 == d_2N` always holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotorState {
    extensions: Vec<f64>,
}

impl MotorState {
    pub fn new(geom: &RobotGeometry, extensions: Vec<f64>) -> Result<Self> {
        let n = geom.motor_count();
        if extensions.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} rack extensions, got {}",
                extensions.len()
            )));
        }
        if let Some(k) = extensions.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "rack extension d_{} is not finite",
                k + 1
            )));
        }
        let (a, b) = (extensions[n - 2], extensions[n - 1]);
        if (a - b).abs() > MIRROR_TOL {
            return Err(Error::invalid(format!(
                "rear motor mirror violated: d_{} = {a}, d_{} = {b}",
                n - 1,
                n
            )));
        }
        Ok(Self::mirrored(extensions))
    }

    /// Builds a state from the `2N-1` physical motor values.
    pub fn from_physical(geom: &RobotGeometry, physical: &[f64]) -> Result<Self> {
        if physical.len() != geom.physical_motor_count() {
            return Err(Error::invalid(format!(
                "expected {} physical motor values, got {}",
                geom.physical_motor_count(),
                physical.len()
            )));
        }
        let mut ext = physical.to_vec();
        ext.push(*physical.last().expect("at least three motors"));
        Self::new(geom, ext)
    }

    pub fn zeros(geom: &RobotGeometry) -> Self {
        Self {
            extensions: vec![0.0; geom.motor_count()],
        }
    }

    // Copies d_2N-1 into d_2N.
    pub(crate) fn mirrored(mut extensions: Vec<f64>) -> Self {
        let n = extensions.len();
        extensions[n - 1] = extensions[n - 2];
        Self { extensions }
    }

    pub fn extensions(&self) -> &[f64] {
        &self.extensions
    }

    pub fn len(&self) -> usize {
        self.extensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extensions.is_empty()
    }

    /// `d_k` with the virtual boundary `d_{-1} = d_0 = 0`.
    pub fn get(&self, k: isize) -> f64 {
        if k <= 0 {
            0.0
        } else {
            self.extensions[(k - 1) as usize]
        }
    }

    fn check_geometry(&self, geom: &RobotGeometry) -> Result<()> {
        if self.extensions.len() != geom.motor_count() {
            return Err(Error::invalid(format!(
                "motor state has {} entries, robot needs {}",
                self.extensions.len(),
                geom.motor_count()
            )));
        }
        Ok(())
    }
}

/// One arc of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcSegment {
    /// Centerline length `L_i` in meters.
    pub length: f64,
    /// Arc angle `theta_i` in radians, counterclockwise positive.
    pub angle: f64,
}

impl ArcSegment {
    pub fn new(length: f64, angle: f64) -> Self {
        Self { length, angle }
    }

    pub fn curvature(&self) -> f64 {
        self.angle / self.length
    }

    /// Left and right sideline lengths for a body of width `h`.
    pub fn sidelines(&self, body_width: f64) -> (f64, f64) {
        let half = 0.5 * self.angle * body_width;
        (self.length + half, self.length - half)
    }
}

/// The robot's shape: ordered arcs from head to tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcChain {
    segments: Vec<ArcSegment>,
}

impl ArcChain {
    pub fn new(geom: &RobotGeometry, segments: Vec<ArcSegment>) -> Result<Self> {
        let chain = Self { segments };
        chain.validate(geom)?;
        Ok(chain)
    }

    pub fn from_parts(geom: &RobotGeometry, lengths: &[f64], angles: &[f64]) -> Result<Self> {
        if lengths.len() != angles.len() {
            return Err(Error::invalid(format!(
                "{} lengths but {} angles",
                lengths.len(),
                angles.len()
            )));
        }
        let segs = lengths
            .iter()
            .zip(angles)
            .map(|(&l, &a)| ArcSegment::new(l, a))
            .collect();
        Self::new(geom, segs)
    }

    /// Evenly spaced units, zero bending.
    pub fn straight(geom: &RobotGeometry) -> Self {
        let l = geom.nominal_segment_length();
        Self {
            segments: vec![ArcSegment::new(l, 0.0); geom.segment_count()],
        }
    }

    pub fn validate(&self, geom: &RobotGeometry) -> Result<()> {
        if self.segments.len() != geom.segment_count() {
            return Err(Error::invalid(format!(
                "chain has {} segments, robot has {}",
                self.segments.len(),
                geom.segment_count()
            )));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !s.length.is_finite() || !s.angle.is_finite() {
                return Err(Error::invalid(format!("segment {} is not finite", i + 1)));
            }
            if s.length <= 0.0 {
                return Err(Error::RackOverdraw {
                    kind: LengthKind::Segment,
                    index: i + 1,
                    length: s.length,
                });
            }
        }
        let sum = self.total_length();
        if (sum - geom.total_length()).abs() > LENGTH_BUDGET_TOL {
            return Err(Error::LengthBudget {
                sum,
                expected: geom.total_length(),
            });
        }
        Ok(())
    }

    pub fn segments(&self) -> &[ArcSegment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.length).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.angle).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Centerline distance from the head to joint unit `unit` (1-based; unit `N` is the tail).
    pub fn unit_position(&self, unit: usize) -> f64 {
        self.segments[..unit].iter().map(|s| s.length).sum()
    }
}

/// Position and heading in the plane. Heading is not wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn distance(&self, other: &PlanarPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Sampled centerline polyline, head first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BodyShape {
    pub points: Vec<PlanarPose>,
    pub sample_spacing: f64,
}

impl BodyShape {
    pub fn head(&self) -> PlanarPose {
        self.points[0]
    }

    pub fn tail(&self) -> PlanarPose {
        *self.points.last().expect("body shape is never empty")
    }

    pub fn polyline_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// Sideline lengths `l_1 ... l_2N` (left sideline of segment `i` is `l_2i-1`).
pub fn sideline_lengths(geom: &RobotGeometry, d: &MotorState) -> Result<Vec<f64>> {
    d.check_geometry(geom)?;
    let base = geom.nominal_segment_length();
    let mut out = Vec::with_capacity(geom.motor_count());
    for i in 1..=geom.segment_count() as isize {
        out.push(base + (d.get(2 * i - 3) - d.get(2 * i - 1)));
        out.push(base - (d.get(2 * i - 2) - d.get(2 * i)));
    }
    if let Some(k) = out.iter().position(|&l| l <= 0.0) {
        return Err(Error::RackOverdraw {
            kind: LengthKind::Sideline,
            index: k + 1,
            length: out[k],
        });
    }
    Ok(out)
}

/// Converts rack extensions into the arc chain they produce.
pub fn motors_to_arcs(geom: &RobotGeometry, d: &MotorState) -> Result<ArcChain> {
    d.check_geometry(geom)?;
    let base = geom.nominal_segment_length();
    let h = geom.body_width();
    let mut segments = Vec::with_capacity(geom.segment_count());
    for i in 1..=geom.segment_count() as isize {
        let (a, b, c, e) = (
            d.get(2 * i - 3),
            d.get(2 * i - 2),
            d.get(2 * i - 1),
            d.get(2 * i),
        );
        let length = (a - b - c + e) / 2.0 + base;
        if length <= 0.0 {
            return Err(Error::RackOverdraw {
                kind: LengthKind::Segment,
                index: i as usize,
                length,
            });
        }
        segments.push(ArcSegment::new(length, (a + b - c - e) / h));
    }
    Ok(ArcChain { segments })
}

/// Rack extensions that realize `chain`, via prefix sums over the segments.
pub fn arcs_to_motors(geom: &RobotGeometry, chain: &ArcChain) -> Result<MotorState> {
    chain.validate(geom)?;
    let base = geom.nominal_segment_length();
    let half_h = 0.5 * geom.body_width();
    let mut ext = Vec::with_capacity(geom.motor_count());
    let (mut left, mut right) = (0.0, 0.0);
    for s in chain.segments() {
        let bend = s.angle * half_h;
        left += -s.length - bend + base;
        right += s.length - bend - base;
        ext.push(left);
        ext.push(right);
    }
    // The budget check bounds d_2N - d_2N-1 = 2 (sum L - L_all) by 2e-9; the physical rear
    // motor is d_2N-1.
    Ok(MotorState::mirrored(ext))
}

// Chord of an arc of length `length` turning by `angle`.
fn chord(length: f64, angle: f64) -> f64 {
    if angle.abs() < SMALL_ANGLE {
        length * (1.0 - angle * angle / 24.0)
    } else {
        2.0 * (length / angle) * (0.5 * angle).sin()
    }
}

fn check_arc(length: f64, angle: f64, max_angle: f64) -> Result<()> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!(
            "arc length must be positive, got {length}"
        )));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("arc angle is not finite"));
    }
    if angle.abs() > max_angle {
        return Err(Error::invalid(format!(
            "arc angle {angle} rad exceeds the cap of {max_angle} rad"
        )));
    }
    Ok(())
}

// Pose reached after `u` meters along an arc with curvature `angle / length`.
fn advance(start: &PlanarPose, u: f64, turn: f64) -> PlanarPose {
    let c = chord(u, turn);
    let dir = start.heading + 0.5 * turn;
    PlanarPose::new(
        start.x + c * dir.cos(),
        start.y + c * dir.sin(),
        start.heading + turn,
    )
}

/// End pose of a constant-curvature arc, with the default angle cap.
pub fn arc_endpoint(start: &PlanarPose, length: f64, angle: f64) -> Result<PlanarPose> {
    arc_endpoint_capped(start, length, angle, DEFAULT_MAX_ARC_ANGLE)
}

pub fn arc_endpoint_capped(
    start: &PlanarPose,
    length: f64,
    angle: f64,
    max_angle: f64,
) -> Result<PlanarPose> {
    check_arc(length, angle, max_angle)?;
    Ok(advance(start, length, angle))
}

/// Start pose of the arc that ends at `end`; inverse of [`arc_endpoint`].
pub fn arc_start_from_end(end: &PlanarPose, length: f64, angle: f64) -> Result<PlanarPose> {
    check_arc(length, angle, DEFAULT_MAX_ARC_ANGLE)?;
    let heading = end.heading - angle;
    let c = chord(length, angle);
    let dir = heading + 0.5 * angle;
    Ok(PlanarPose::new(
        end.x - c * dir.cos(),
        end.y - c * dir.sin(),
        heading,
    ))
}

/// Head pose found by walking backward from the pose of joint unit `unit` (the end of
/// segment `unit`).
pub fn head_from_unit_pose(
    chain: &ArcChain,
    unit: usize,
    unit_pose: &PlanarPose,
) -> Result<PlanarPose> {
    let mut pose = *unit_pose;
    for s in chain.segments()[..unit].iter().rev() {
        pose = arc_start_from_end(&pose, s.length, s.angle)?;
    }
    Ok(pose)
}

/// Pose of joint unit `unit` (the end of segment `unit`) when the head sits at `head`.
pub fn unit_pose(chain: &ArcChain, head: &PlanarPose, unit: usize) -> Result<PlanarPose> {
    let mut pose = *head;
    for s in &chain.segments()[..unit] {
        pose = arc_endpoint(&pose, s.length, s.angle)?;
    }
    Ok(pose)
}

// Residual of an m-chord approximation of one arc, L - m * chord(L/m, theta/m), which is
// about L theta^2 / (24 m^2).
fn chord_count_for_accuracy(seg: &ArcSegment, budget: f64) -> usize {
    let need = seg.angle.abs() * (seg.length / (24.0 * budget)).sqrt();
    need.ceil() as usize
}

/// Samples the chain as a polyline starting at `base`, which is the head pose.
pub fn chain_shape(
    geom: &RobotGeometry,
    chain: &ArcChain,
    base: &PlanarPose,
    sample_spacing: f64,
) -> Result<BodyShape> {
    if !(sample_spacing.is_finite() && sample_spacing > 0.0) {
        return Err(Error::invalid(format!(
            "sample spacing must be positive, got {sample_spacing}"
        )));
    }
    chain.validate(geom)?;
    // Total chord deficit stays under 1e-7 m.
    let budget = 1e-7 / chain.len() as f64;
    let mut points = vec![*base];
    let mut start = *base;
    for s in chain.segments() {
        check_arc(s.length, s.angle, DEFAULT_MAX_ARC_ANGLE)?;
        let by_spacing = (s.length / sample_spacing - 1e-9).ceil().max(1.0) as usize;
        let steps = by_spacing.max(chord_count_for_accuracy(s, budget));
        for k in 1..=steps {
            let frac = k as f64 / steps as f64;
            points.push(advance(&start, s.length * frac, s.angle * frac));
        }
        start = *points.last().expect("just pushed");
    }
    Ok(BodyShape {
        points,
        sample_spacing,
    })
}

/// Points at ascending centerline distances `stations` from the head, in one pass.
pub(crate) fn chain_points_at(
    chain: &ArcChain,
    head: &PlanarPose,
    stations: &[f64],
) -> Vec<PlanarPose> {
    let segs = chain.segments();
    let mut out = Vec::with_capacity(stations.len());
    let mut idx = 0;
    let mut seg_start = 0.0;
    let mut start = *head;
    for &u in stations {
        while idx + 1 < segs.len() && u > seg_start + segs[idx].length {
            start = advance(&start, segs[idx].length, segs[idx].angle);
            seg_start += segs[idx].length;
            idx += 1;
        }
        let s = &segs[idx];
        let r = (u - seg_start).clamp(0.0, s.length);
        out.push(advance(&start, r, s.angle * r / s.length));
    }
    out
}

/// Moves repositionable unit `unit` rearward by `travel` meters (frontward if negative)
/// without changing any arc angle.
pub fn reposition_increment(
    geom: &RobotGeometry,
    d: &MotorState,
    unit: usize,
    travel: f64,
) -> Result<MotorState> {
    d.check_geometry(geom)?;
    if unit == 0 || unit >= geom.segment_count() {
        return Err(Error::invalid(format!(
            "unit {unit} is not repositionable (valid: 1..={})",
            geom.segment_count() - 1
        )));
    }
    if !travel.is_finite() {
        return Err(Error::invalid("travel is not finite"));
    }
    let mut ext = d.extensions().to_vec();
    ext[2 * unit - 2] -= travel;
    ext[2 * unit - 1] += travel;
    let next = MotorState { extensions: ext };
    sideline_lengths(geom, &next)?;
    motors_to_arcs(geom, &next)?;
    Ok(next)
}
