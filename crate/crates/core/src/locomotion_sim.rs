//! Idealized planar kinematic simulation of the two locomotion modes.
//!
//! Serpentine frames assume no lateral slip: the body lies on the static path traced by the
//! serpenoid wave and slides along it at the wave speed. Obstacle frames assume rigid
//! contact: while the shape is held, the held section stays fixed in the world and the rest
//! of the body is laid out from it; during a reset the head stays put.

use serde::Serialize;

use crate::arc_model::{
    arcs_to_motors, chain_shape, head_from_unit_pose, motors_to_arcs, sideline_lengths, unit_pose,
    ArcChain, BodyShape, PlanarPose, RobotGeometry,
};
use crate::error::{Error, Result};
use crate::obstacle_gait::{HoldRange, SchedulePhase, VelocitySchedule};
use crate::segmentation_fit::{PhaseObjective, ShapeObjective};
use crate::serpenoid::{serpenoid_chain, Segmentation, SerpenoidParams};

/// Largest step when integrating the world path.
const PATH_STEP: f64 = 1e-4;

/// Held angles may move this much before the simulation gives up.
pub const HOLD_DRIFT_TOL: f64 = 1e-6;

/// Radius of the obstacle circles placed against the held section.
const OBSTACLE_RADIUS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorRule {
    PathFollowing,
    PinnedHold,
}

/// Which end of the body is placed tangent to the path in serpentine frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathAlignment {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub anchor_rule: AnchorRule,
    /// Polyline spacing of the recorded body shapes, in meters.
    pub sample_spacing: f64,
    /// Comparison points for the per-frame serpentine RMSE.
    pub rmse_samples: usize,
    pub alignment: PathAlignment,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, anchor_rule: AnchorRule) -> Self {
        Self {
            dt,
            duration,
            anchor_rule,
            sample_spacing: 0.005,
            rmse_samples: 200,
            alignment: PathAlignment::Head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "sim dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::invalid(format!(
                "sim duration must be at least dt = {}, got {}",
                self.dt, self.duration
            )));
        }
        if !(self.sample_spacing.is_finite() && self.sample_spacing > 0.0) {
            return Err(Error::invalid("sample spacing must be positive"));
        }
        if self.rmse_samples < 2 {
            return Err(Error::invalid("need at least 2 RMSE samples"));
        }
        Ok(())
    }

    /// Frame times `0, dt, ..., <= duration`.
    pub fn frame_times(&self) -> Vec<f64> {
        let steps = (self.duration / self.dt + 1e-9).floor() as usize;
        (0..=steps).map(|k| k as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitKind {
    Serpentine,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub gait: GaitKind,
    pub anchor_rule: AnchorRule,
    pub dt: f64,
    pub duration: f64,
    pub serpenoid: Option<SerpenoidParams>,
    pub segmentation: Option<Vec<f64>>,
    pub hold: Option<HoldRange>,
    /// World-fixed contacts of the held section, if any.
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub t: f64,
    pub head: PlanarPose,
    pub chain: ArcChain,
    pub shape: BodyShape,
    /// Head-aligned chain-vs-curve RMSE (serpentine frames).
    pub rmse: Option<f64>,
    /// Path arclength at the head (serpentine frames).
    pub path_arclength: Option<f64>,
    /// Active schedule phase (obstacle frames; `None` once the schedule has ended).
    pub phase: Option<SchedulePhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    frames: Vec<Frame>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Head position change from the first frame to the last.
    pub fn head_displacement(&self) -> (f64, f64) {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => (b.head.x - a.head.x, b.head.y - a.head.y),
            _ => (0.0, 0.0),
        }
    }

    /// Every `factor`-th frame, starting with the first.
    pub fn subsample(&self, factor: usize) -> Trajectory {
        let factor = factor.max(1);
        Trajectory {
            frames: self.frames.iter().step_by(factor).cloned().collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Head speeds over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    /// Net straight-line head displacement over elapsed time.
    pub straight_line: f64,
    /// Length of the head's polyline track over elapsed time.
    pub path_length: f64,
}

pub fn speed_estimate(traj: &Trajectory, window: (f64, f64)) -> Result<SpeedEstimate> {
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::invalid(format!("empty speed window [{t0}, {t1}]")));
    }
    let (first, last) = match (traj.frames.first(), traj.frames.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::invalid("trajectory has no frames")),
    };
    let slack = |t: f64| 1e-9 * t.abs().max(1.0);
    if t0 < first - slack(first) || t1 > last + slack(last) {
        return Err(Error::invalid(format!(
            "speed window [{t0}, {t1}] is outside the trajectory span [{first}, {last}]"
        )));
    }
    let inside: Vec<&Frame> = traj
        .frames
        .iter()
        .filter(|f| f.t >= t0 - slack(t0) && f.t <= t1 + slack(t1))
        .collect();
    if inside.len() < 2 {
        return Err(Error::invalid(format!(
            "speed window [{t0}, {t1}] contains fewer than two frames"
        )));
    }
    let (a, b) = (inside[0], inside[inside.len() - 1]);
    let elapsed = b.t - a.t;
    let track: f64 = inside
        .windows(2)
        .map(|w| w[0].head.distance(&w[1].head))
        .sum();
    Ok(SpeedEstimate {
        straight_line: a.head.distance(&b.head) / elapsed,
        path_length: track / elapsed,
    })
}

/// Heading of the static serpentine path at path arclength `sigma`.
pub fn path_heading(p: &SerpenoidParams, sigma: f64) -> f64 {
    p.alpha0() * (std::f64::consts::PI * sigma / (2.0 * p.quarter_length())).cos()
}

/// Running position on the static serpentine path.
#[derive(Debug, Clone, Copy)]
struct PathCursor {
    sigma: f64,
    x: f64,
    y: f64,
}

impl PathCursor {
    fn origin() -> Self {
        Self {
            sigma: 0.0,
            x: 0.0,
            y: 0.0,
        }
    }

    // Simpson steps of (cos psi, sin psi) in either direction.
    fn advance_to(&mut self, p: &SerpenoidParams, target: f64) {
        let span = target - self.sigma;
        if span == 0.0 {
            return;
        }
        let n = (span.abs() / PATH_STEP - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for k in 0..n {
            let s = self.sigma + k as f64 * h;
            let (a0, am, a1) = (
                path_heading(p, s),
                path_heading(p, s + 0.5 * h),
                path_heading(p, s + h),
            );
            self.x += h / 6.0 * (a0.cos() + 4.0 * am.cos() + a1.cos());
            self.y += h / 6.0 * (a0.sin() + 4.0 * am.sin() + a1.sin());
        }
        self.sigma = target;
    }

    fn pose(&self, p: &SerpenoidParams) -> PlanarPose {
        PlanarPose::new(self.x, self.y, path_heading(p, self.sigma))
    }
}

/// Samples of the static serpentine path at `sigma0, sigma0 + step, ..., sigma1`.
pub fn serpentine_path(
    p: &SerpenoidParams,
    sigma0: f64,
    sigma1: f64,
    step: f64,
) -> Result<Vec<PlanarPose>> {
    if !(step.is_finite() && step > 0.0 && sigma0.is_finite() && sigma1.is_finite()) {
        return Err(Error::invalid(
            "path sampling needs a positive step and finite bounds",
        ));
    }
    let mut cursor = PathCursor::origin();
    cursor.advance_to(p, sigma0);
    let n = ((sigma1 - sigma0).abs() / step - 1e-9).ceil().max(1.0) as usize;
    let mut out = vec![cursor.pose(p)];
    for k in 1..=n {
        cursor.advance_to(p, sigma0 + (sigma1 - sigma0) * k as f64 / n as f64);
        out.push(cursor.pose(p));
    }
    Ok(out)
}

/// Plays the serpenoid gait with the given segmentation along its own static path.
pub fn simulate_serpentine(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    seg: &Segmentation,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.anchor_rule != AnchorRule::PathFollowing {
        return Err(Error::invalid(
            "serpentine simulation needs the path_following anchor rule",
        ));
    }
    p.check_period(geom)?;
    if seg.len() != geom.segment_count() {
        return Err(Error::invalid(format!(
            "segmentation has {} lengths, robot has {} segments",
            seg.len(),
            geom.segment_count()
        )));
    }
    let total = geom.total_length();
    let mut head_cursor = PathCursor::origin();
    let mut tail_cursor = PathCursor::origin();
    let mut frames = Vec::new();
    for t in cfg.frame_times() {
        let chain = serpenoid_chain(geom, p, t, seg)
            .and_then(|chain| {
                let d = arcs_to_motors(geom, &chain)?;
                sideline_lengths(geom, &d)?;
                Ok(chain)
            })
            .map_err(|e| e.at_time(t))?;
        let sigma = p.wave_speed() * t;
        let head = match cfg.alignment {
            PathAlignment::Head => {
                head_cursor.advance_to(p, sigma);
                let at = head_cursor.pose(p);
                PlanarPose::new(at.x, at.y, at.heading + std::f64::consts::PI)
            }
            PathAlignment::Tail => {
                tail_cursor.advance_to(p, sigma - total);
                let at = tail_cursor.pose(p);
                let tail = PlanarPose::new(at.x, at.y, at.heading + std::f64::consts::PI);
                head_from_unit_pose(&chain, chain.len(), &tail)?
            }
        };
        let rmse = ShapeObjective::new(geom, p, t, cfg.rmse_samples, PhaseObjective::Single)?
            .evaluate(seg.lengths())?;
        let shape = chain_shape(geom, &chain, &head, cfg.sample_spacing)?;
        frames.push(Frame {
            t,
            head,
            chain,
            shape,
            rmse: Some(rmse),
            path_arclength: Some(sigma),
            phase: None,
        });
    }
    Ok(Trajectory {
        frames,
        meta: TrajectoryMeta {
            gait: GaitKind::Serpentine,
            anchor_rule: cfg.anchor_rule,
            dt: cfg.dt,
            duration: cfg.duration,
            serpenoid: Some(*p),
            segmentation: Some(seg.lengths().to_vec()),
            hold: None,
            obstacles: Vec::new(),
        },
    })
}

// Every row must either hold units j..k or move a single repositionable unit.
fn check_schedule(
    geom: &RobotGeometry,
    schedule: &VelocitySchedule,
    range: &HoldRange,
) -> Result<()> {
    if schedule.motor_count() != geom.motor_count() {
        return Err(Error::invalid(format!(
            "schedule has {} motors, robot has {}",
            schedule.motor_count(),
            geom.motor_count()
        )));
    }
    for (r, row) in schedule.rows().iter().enumerate() {
        let ok = match row.phase {
            SchedulePhase::Hold => {
                let (vl, vr) = (row.rates[2 * range.j() - 2], row.rates[2 * range.j() - 1]);
                (1..=geom.segment_count()).all(|u| {
                    let (l, rt) = (row.rates[2 * u - 2], row.rates[2 * u - 1]);
                    if (range.j()..=range.k()).contains(&u) {
                        l == vl && rt == vr
                    } else {
                        l == 0.0 && rt == 0.0
                    }
                })
            }
            SchedulePhase::Reset => {
                let moving: Vec<usize> = (1..=geom.segment_count())
                    .filter(|&u| row.rates[2 * u - 2] != 0.0 || row.rates[2 * u - 1] != 0.0)
                    .collect();
                match moving.as_slice() {
                    [] => true,
                    [u] => {
                        *u < geom.segment_count() && row.rates[2 * u - 2] == -row.rates[2 * u - 1]
                    }
                    _ => false,
                }
            }
        };
        if !ok {
            return Err(Error::invalid(format!(
                "schedule row {} is not a valid {:?} row for units {}..{}",
                r + 1,
                row.phase,
                range.j(),
                range.k()
            )));
        }
    }
    Ok(())
}

// Contacts on the convex side of each bent held segment, at the midpoint.
fn place_obstacles(
    geom: &RobotGeometry,
    chain: &ArcChain,
    head: &PlanarPose,
    range: &HoldRange,
) -> Result<Vec<Obstacle>> {
    let mut start = unit_pose(chain, head, range.j())?;
    let mut out = Vec::new();
    for i in range.held_segments() {
        let s = chain.segments()[i - 1];
        let mid = crate::arc_model::arc_endpoint(&start, 0.5 * s.length, 0.5 * s.angle)?;
        if s.angle.abs() > 1e-6 {
            // Curvature center is to the left for positive angles.
            let side = if s.angle > 0.0 { -1.0 } else { 1.0 };
            let off = 0.5 * geom.body_width() + OBSTACLE_RADIUS;
            let nx = -mid.heading.sin() * side;
            let ny = mid.heading.cos() * side;
            out.push(Obstacle {
                x: mid.x + off * nx,
                y: mid.y + off * ny,
                radius: OBSTACLE_RADIUS,
            });
        }
        start = crate::arc_model::arc_endpoint(&start, s.length, s.angle)?;
    }
    Ok(out)
}

/// Plays a hold/reset schedule against world-fixed contacts.
///
/// The head starts at the origin facing +x with the body trailing along -x.
pub fn simulate_obstacle(
    geom: &RobotGeometry,
    chain0: &ArcChain,
    schedule: &VelocitySchedule,
    range: &HoldRange,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.anchor_rule != AnchorRule::PinnedHold {
        return Err(Error::invalid(
            "obstacle simulation needs the pinned_hold anchor rule",
        ));
    }
    chain0.validate(geom)?;
    let range = HoldRange::new(geom, range.j(), range.k())?;
    check_schedule(geom, schedule, &range)?;
    let d0 = arcs_to_motors(geom, chain0)?;

    // Phase intervals: (start time, phase) with consecutive equal phases merged.
    let mut intervals: Vec<(f64, SchedulePhase)> = Vec::new();
    for row in schedule.rows() {
        if intervals.last().is_none_or(|&(_, ph)| ph != row.phase) {
            intervals.push((row.t, row.phase));
        }
    }
    let head0 = PlanarPose::new(0.0, 0.0, std::f64::consts::PI);
    let anchor_for = |phase: SchedulePhase, chain: &ArcChain, head: &PlanarPose| match phase {
        SchedulePhase::Hold => unit_pose(chain, head, range.j()),
        SchedulePhase::Reset => Ok(*head),
    };
    let head_for = |phase: SchedulePhase, chain: &ArcChain, anchor: &PlanarPose| match phase {
        SchedulePhase::Hold => head_from_unit_pose(chain, range.j(), anchor),
        SchedulePhase::Reset => Ok(*anchor),
    };

    let first_phase = intervals
        .first()
        .map_or(SchedulePhase::Reset, |&(_, ph)| ph);
    let mut current = 0usize;
    let mut anchor = anchor_for(first_phase, chain0, &head0)?;
    let held0: Vec<f64> = range
        .held_segments()
        .map(|i| chain0.angles()[i - 1])
        .collect();
    let end = schedule.end_time();

    let mut frames = Vec::new();
    for t in cfg.frame_times() {
        while current + 1 < intervals.len() && intervals[current + 1].0 <= t {
            let ts = intervals[current + 1].0;
            let chain =
                motors_to_arcs(geom, &schedule.state_at(&d0, ts)).map_err(|e| e.at_time(ts))?;
            let head = head_for(intervals[current].1, &chain, &anchor)?;
            current += 1;
            anchor = anchor_for(intervals[current].1, &chain, &head)?;
        }
        let d = schedule.state_at(&d0, t);
        let chain = sideline_lengths(geom, &d)
            .and_then(|_| motors_to_arcs(geom, &d))
            .map_err(|e| e.at_time(t))?;
        for (i, &a0) in range.held_segments().zip(&held0) {
            let drift = (chain.angles()[i - 1] - a0).abs();
            if drift > HOLD_DRIFT_TOL {
                return Err(Error::HoldDrift {
                    t,
                    segment: i,
                    drift,
                });
            }
        }
        let phase_now = intervals.get(current).map_or(first_phase, |&(_, ph)| ph);
        let head = head_for(phase_now, &chain, &anchor)?;
        let shape = chain_shape(geom, &chain, &head, cfg.sample_spacing)?;
        let phase = (!schedule.is_empty() && t < end).then_some(phase_now);
        frames.push(Frame {
            t,
            head,
            chain,
            shape,
            rmse: None,
            path_arclength: None,
            phase,
        });
    }
    let obstacles = place_obstacles(geom, chain0, &head0, &range)?;
    Ok(Trajectory {
        frames,
        meta: TrajectoryMeta {
            gait: GaitKind::Obstacle,
            anchor_rule: cfg.anchor_rule,
            dt: cfg.dt,
            duration: cfg.duration,
            serpenoid: None,
            segmentation: None,
            hold: Some(range),
            obstacles,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle_gait::{reset_plan, shift_plan};
    use crate::segmentation_fit::{cycle_step, fit_segmentation, FitConfig};
    use crate::serpenoid::curve_points;
    use approx::assert_abs_diff_eq;

    fn reference_params(omega: f64) -> SerpenoidParams {
        SerpenoidParams::new(0.7, 0.15, omega).unwrap()
    }

    fn geom(n: usize) -> RobotGeometry {
        RobotGeometry::new(0.6, n, 0.1).unwrap()
    }

    fn hold_chain(g: &RobotGeometry) -> ArcChain {
        ArcChain::from_parts(g, &[0.15; 4], &[0.0, 0.9, -0.9, 0.3]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0.0, 1.0, AnchorRule::PinnedHold)
            .validate()
            .is_err());
        assert!(SimConfig::new(0.5, 0.1, AnchorRule::PinnedHold)
            .validate()
            .is_err());
        let cfg = SimConfig::new(0.1, 1.0, AnchorRule::PinnedHold);
        assert_eq!(cfg.frame_times().len(), 11);
    }

    #[test]
    fn serpentine_static_when_omega_zero() {
        let g = geom(3);
        let traj = simulate_serpentine(
            &g,
            &reference_params(0.0),
            &Segmentation::equal(&g),
            &SimConfig::new(1.0, 5.0, AnchorRule::PathFollowing),
        )
        .unwrap();
        let f0 = &traj.frames()[0];
        for f in traj.frames() {
            assert_eq!(f.head, f0.head);
            assert_eq!(f.shape, f0.shape);
        }
        assert_eq!(traj.head_displacement(), (0.0, 0.0));
        let v = speed_estimate(&traj, (0.0, 5.0)).unwrap();
        assert_eq!(v.straight_line, 0.0);
        assert_eq!(v.path_length, 0.0);
    }

    #[test]
    fn serpentine_speeds() {
        let g = geom(3);
        let p = reference_params(0.1);
        assert_abs_diff_eq!(p.wave_speed(), 0.0095493, epsilon = 5e-8);
        let cycle = p.cycle_time().unwrap();
        let cfg = SimConfig::new(cycle / 64.0, cycle, AnchorRule::PathFollowing);
        let traj = simulate_serpentine(&g, &p, &Segmentation::equal(&g), &cfg).unwrap();
        let v = speed_estimate(&traj, (0.0, cycle)).unwrap();
        assert!((v.path_length / p.wave_speed() - 1.0).abs() < 0.01);

        // One full wave period of the path: chord of the body curve over 4l.
        let curve = curve_points(&p, 0.0, 0.6, 1e-4).unwrap();
        let last = curve.last().unwrap();
        let ratio = last.x.hypot(last.y) / 0.6;
        assert!((v.straight_line / (p.wave_speed() * ratio) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn serpentine_body_on_path() {
        let g = geom(3);
        let p = reference_params(0.3);
        let cfg = SimConfig::new(0.5, 3.0, AnchorRule::PathFollowing);
        let seg = Segmentation::new(&g, vec![0.149, 0.32, 0.131]).unwrap();
        let traj = simulate_serpentine(&g, &p, &seg, &cfg).unwrap();
        let stations: Vec<f64> = (0..200).map(|k| 0.6 * k as f64 / 199.0).collect();
        for f in traj.frames() {
            let sigma = f.path_arclength.unwrap();
            // Path samples walking back from the head, one per body station.
            let path = serpentine_path(&p, sigma, sigma - 0.6, 0.6 / 199.0).unwrap();
            let body = crate::arc_model::chain_points_at(&f.chain, &f.head, &stations);
            let world = crate::segmentation_fit::rmse(&body, &path).unwrap();
            assert_abs_diff_eq!(world, f.rmse.unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(f.head.x, path[0].x, epsilon = 1e-12);
            assert_abs_diff_eq!(f.chain.total_length(), 0.6, epsilon = 1e-9);
        }
    }

    #[test]
    fn serpentine_tail_alignment_puts_tail_on_path() {
        let g = geom(3);
        let p = reference_params(0.3);
        let mut cfg = SimConfig::new(0.5, 2.0, AnchorRule::PathFollowing);
        cfg.alignment = PathAlignment::Tail;
        let traj = simulate_serpentine(&g, &p, &Segmentation::equal(&g), &cfg).unwrap();
        for f in traj.frames() {
            let sigma = f.path_arclength.unwrap() - 0.6;
            let at = serpentine_path(&p, sigma, sigma + 0.01, 0.01).unwrap()[0];
            let tail = f.shape.tail();
            assert!(tail.distance(&at) < 1e-6);
        }
    }

    #[test]
    fn serpentine_rmse_bounded_by_cycle_fit() {
        let g = geom(3);
        let p = reference_params(0.1);
        let phases = 16;
        let cfg = FitConfig {
            phase_objective: PhaseObjective::CycleMax { phases },
            ..FitConfig::default()
        };
        let fit = fit_segmentation(&g, &p, 3, 0.0, &cfg).unwrap();
        let dt = cycle_step(&p, phases).unwrap();
        let sim = SimConfig::new(dt, 2.0 * p.cycle_time().unwrap(), AnchorRule::PathFollowing);
        let traj = simulate_serpentine(&g, &p, &fit.segmentation, &sim).unwrap();
        for f in traj.frames() {
            assert!(f.rmse.unwrap() <= fit.rmse + 1e-9);
        }
    }

    #[test]
    fn obstacle_zero_schedule_static() {
        let g = geom(4);
        let chain = hold_chain(&g);
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let sched = shift_plan(&g, &chain, &range, 0.0, 2.0, 0.1).unwrap();
        let traj = simulate_obstacle(
            &g,
            &chain,
            &sched,
            &range,
            &SimConfig::new(0.1, 2.0, AnchorRule::PinnedHold),
        )
        .unwrap();
        for f in traj.frames() {
            assert_eq!(f.shape, traj.frames()[0].shape);
        }
        assert_eq!(traj.meta().obstacles.len(), 2);
    }

    #[test]
    fn obstacle_head_advances_at_feed_rate() {
        let g = geom(4);
        let chain = hold_chain(&g);
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let sched = shift_plan(&g, &chain, &range, 0.005, 10.0, 0.1).unwrap();
        let cfg = SimConfig::new(0.1, 10.0, AnchorRule::PinnedHold);
        let traj = simulate_obstacle(&g, &chain, &sched, &range, &cfg).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for f in traj.frames() {
            assert!(f.head.x > prev);
            prev = f.head.x;
        }
        let v = speed_estimate(&traj, (0.0, 10.0)).unwrap();
        assert_abs_diff_eq!(v.straight_line, 0.005, epsilon = 1e-12);
        // Held segments do not move in the world.
        let anchor = |f: &Frame| unit_pose(&f.chain, &f.head, 1).unwrap();
        let a0 = anchor(&traj.frames()[0]);
        for f in traj.frames() {
            assert!(anchor(f).distance(&a0) < 1e-12);
        }
    }

    #[test]
    fn obstacle_reversal_symmetric() {
        let g = geom(4);
        let chain =
            ArcChain::from_parts(&g, &[0.2, 0.15, 0.15, 0.1], &[0.4, 0.9, -0.9, 0.3]).unwrap();
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let cfg = SimConfig::new(0.1, 4.0, AnchorRule::PinnedHold);
        let run = |v: f64| {
            let s = shift_plan(&g, &chain, &range, v, 4.0, 0.1).unwrap();
            simulate_obstacle(&g, &chain, &s, &range, &cfg)
                .unwrap()
                .head_displacement()
        };
        let (fx, fy) = run(0.005);
        let (bx, by) = run(-0.005);
        assert!(fx.hypot(fy) > 0.01);
        assert_abs_diff_eq!(fx, -bx, epsilon = 1e-12);
        assert_abs_diff_eq!(fy, -by, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_shift_then_reset() {
        let g = geom(4);
        let chain = hold_chain(&g);
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let mut sched = shift_plan(&g, &chain, &range, 0.005, 6.0, 0.1).unwrap();
        let d0 = arcs_to_motors(&g, &chain).unwrap();
        let shifted = motors_to_arcs(&g, &sched.integrate(&d0)).unwrap();
        sched
            .extend(&reset_plan(&g, &shifted, &[3, 2, 1], 0.01, 0.1).unwrap())
            .unwrap();
        let cfg = SimConfig::new(0.1, sched.end_time() + 1.0, AnchorRule::PinnedHold);
        let traj = simulate_obstacle(&g, &chain, &sched, &range, &cfg).unwrap();
        let last = traj.frames().last().unwrap();
        assert_eq!(last.phase, None);
        for (a, b) in last.chain.lengths().iter().zip(chain.lengths()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        // Head stays put through the reset and the net gain is the shift travel.
        assert_abs_diff_eq!(traj.head_displacement().0, 0.03, epsilon = 1e-9);
        let resets: Vec<&Frame> = traj
            .frames()
            .iter()
            .filter(|f| f.phase == Some(SchedulePhase::Reset))
            .collect();
        assert!(!resets.is_empty());
        for f in resets {
            assert!(f.head.distance(&last.head) < 1e-12);
        }
    }

    #[test]
    fn obstacle_rejects_foreign_rows() {
        let g = geom(4);
        let chain = hold_chain(&g);
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let other = HoldRange::new(&g, 2, 3).unwrap();
        let sched = shift_plan(&g, &chain, &other, 0.005, 1.0, 0.1).unwrap();
        let cfg = SimConfig::new(0.1, 1.0, AnchorRule::PinnedHold);
        assert!(matches!(
            simulate_obstacle(&g, &chain, &sched, &range, &cfg),
            Err(Error::Invalid(_))
        ));
        let path = SimConfig::new(0.1, 1.0, AnchorRule::PathFollowing);
        assert!(simulate_obstacle(&g, &chain, &sched, &other, &path).is_err());
    }

    #[test]
    fn speed_subsampling_invariant() {
        let g = geom(4);
        let chain = hold_chain(&g);
        let range = HoldRange::new(&g, 1, 3).unwrap();
        let sched = shift_plan(&g, &chain, &range, 0.004, 8.0, 0.1).unwrap();
        let cfg = SimConfig::new(0.1, 8.0, AnchorRule::PinnedHold);
        let traj = simulate_obstacle(&g, &chain, &sched, &range, &cfg).unwrap();
        let a = speed_estimate(&traj, (0.0, 8.0)).unwrap();
        let b = speed_estimate(&traj.subsample(2), (0.0, 8.0)).unwrap();
        assert_abs_diff_eq!(a.straight_line, b.straight_line, epsilon = 1e-12);
        assert_abs_diff_eq!(a.path_length, b.path_length, epsilon = 1e-12);
        assert!(speed_estimate(&traj, (3.0, 3.0)).is_err());
        assert!(speed_estimate(&traj, (0.0, 9.0)).is_err());
    }
}
