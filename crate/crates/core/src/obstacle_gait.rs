//! Shape-hold velocity constraints, shape-shift schedules and joint-unit resets for
//! obstacle-aided locomotion.
//!
//! Holding units `j..k` means every left motor of those units turns at one rate and every
//! right motor at another. Differentiating the motor-to-arc conversion shows that segments
//! `j+1..k` (the ones bounded by held units on both sides) then keep their length and angle
//! exactly; segment `j` in front and segment `k+1` behind absorb the motion.

use serde::Serialize;

use crate::arc_model::{
    arcs_to_motors, motors_to_arcs, sideline_lengths, ArcChain, MotorState, RobotGeometry,
};
use crate::error::{Error, LengthKind, Result};

/// Held joint units `j..=k`, 1-based, `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HoldRange {
    j: usize,
    k: usize,
}

impl HoldRange {
    pub fn new(geom: &RobotGeometry, j: usize, k: usize) -> Result<Self> {
        if !(1 <= j && j < k && k <= geom.segment_count()) {
            return Err(Error::invalid(format!(
                "hold range needs 1 <= j < k <= {}, got j = {j}, k = {k}",
                geom.segment_count()
            )));
        }
        Ok(Self { j, k })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Segments whose shape is exactly invariant under the hold, `j+1..=k`.
    pub fn held_segments(&self) -> std::ops::RangeInclusive<usize> {
        self.j + 1..=self.k
    }

    fn check(&self, geom: &RobotGeometry) -> Result<()> {
        Self::new(geom, self.j, self.k).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulePhase {
    /// Rates obey the hold constraint for the schedule's range.
    Hold,
    /// A single unit travels along the body.
    Reset,
}

/// Constant motor rates over `[t, t + dt)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub t: f64,
    pub dt: f64,
    pub rates: Vec<f64>,
    pub phase: SchedulePhase,
}

/// Piecewise-constant rack velocities, rows back to back in time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocitySchedule {
    motor_count: usize,
    rows: Vec<ScheduleRow>,
}

impl VelocitySchedule {
    pub fn new(geom: &RobotGeometry) -> Self {
        Self {
            motor_count: geom.motor_count(),
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[ScheduleRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn motor_count(&self) -> usize {
        self.motor_count
    }

    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t + r.dt)
    }

    /// Appends a row starting where the schedule currently ends.
    pub fn push(&mut self, dt: f64, rates: Vec<f64>, phase: SchedulePhase) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!(
                "row duration must be positive, got {dt}"
            )));
        }
        if rates.len() != self.motor_count {
            return Err(Error::invalid(format!(
                "row has {} rates, robot has {} motors",
                rates.len(),
                self.motor_count
            )));
        }
        if let Some(i) = rates.iter().position(|r| !r.is_finite()) {
            return Err(Error::invalid(format!(
                "rate of motor {} is not finite",
                i + 1
            )));
        }
        let n = self.motor_count;
        if rates[n - 2] != rates[n - 1] {
            return Err(Error::invalid(format!(
                "rear motor mirror violated: rate {} = {}, rate {} = {}",
                n - 1,
                rates[n - 2],
                n,
                rates[n - 1]
            )));
        }
        let t = self.end_time();
        self.rows.push(ScheduleRow {
            t,
            dt,
            rates,
            phase,
        });
        Ok(())
    }

    /// Appends all rows of `other`, shifted to start at the current end time.
    pub fn extend(&mut self, other: &VelocitySchedule) -> Result<()> {
        if other.motor_count != self.motor_count {
            return Err(Error::invalid("schedules are for different robots"));
        }
        for row in &other.rows {
            self.push(row.dt, row.rates.clone(), row.phase)?;
        }
        Ok(())
    }

    /// Row active at time `t`; the last row also covers its own end point.
    pub fn row_at(&self, t: f64) -> Option<&ScheduleRow> {
        let idx = self.rows.partition_point(|r| r.t <= t);
        if idx == 0 {
            return None;
        }
        let row = &self.rows[idx - 1];
        (t <= row.t + row.dt || idx < self.rows.len()).then_some(row)
    }

    /// Rack extensions at time `t`, integrating the rows exactly from `start` at time 0.
    pub fn state_at(&self, start: &MotorState, t: f64) -> MotorState {
        let mut ext = start.extensions().to_vec();
        for row in &self.rows {
            if row.t >= t {
                break;
            }
            let span = (t - row.t).min(row.dt);
            for (d, r) in ext.iter_mut().zip(&row.rates) {
                *d += r * span;
            }
        }
        MotorState::mirrored(ext)
    }

    /// Rack extensions after the last row.
    pub fn integrate(&self, start: &MotorState) -> MotorState {
        self.state_at(start, self.end_time())
    }
}

/// Motor rates that hold the shape over units `j..k`: left motors at `v_left`, right motors
/// at `v_right`, every other motor still.
///
/// When the range includes the rear unit and `v_left != v_right` the returned rates break the
/// rear mirror; such a vector is rejected by [`VelocitySchedule::push`].
pub fn hold_velocities(
    geom: &RobotGeometry,
    range: &HoldRange,
    v_left: f64,
    v_right: f64,
) -> Result<Vec<f64>> {
    range.check(geom)?;
    if !(v_left.is_finite() && v_right.is_finite()) {
        return Err(Error::invalid("hold velocities must be finite"));
    }
    let mut rates = vec![0.0; geom.motor_count()];
    for unit in range.j..=range.k {
        rates[2 * unit - 2] = v_left;
        rates[2 * unit - 1] = v_right;
    }
    Ok(rates)
}

/// Earliest `t` in `[0, horizon]` at which a sideline reaches zero when the racks move
/// linearly from `start` at `rates`.
fn first_overdraw(
    geom: &RobotGeometry,
    start: &MotorState,
    rates: &[f64],
    horizon: f64,
) -> Option<(f64, usize)> {
    let rate = |k: isize| if k <= 0 { 0.0 } else { rates[(k - 1) as usize] };
    let base = geom.nominal_segment_length();
    let mut first: Option<(f64, usize)> = None;
    for i in 1..=geom.segment_count() as isize {
        let left = (
            base + start.get(2 * i - 3) - start.get(2 * i - 1),
            rate(2 * i - 3) - rate(2 * i - 1),
        );
        let right = (
            base - start.get(2 * i - 2) + start.get(2 * i),
            -rate(2 * i - 2) + rate(2 * i),
        );
        for (offset, (l0, r)) in [(1, left), (0, right)] {
            let hit = if l0 <= 0.0 {
                Some(0.0)
            } else if r < 0.0 && -l0 / r <= horizon {
                Some(-l0 / r)
            } else {
                None
            };
            if let Some(t) = hit {
                let index = (2 * i - offset) as usize;
                if first.is_none_or(|(tf, _)| t < tf) {
                    first = Some((t, index));
                }
            }
        }
    }
    first
}

fn overdraw_error(t: f64, index: usize) -> Error {
    Error::RackOverdraw {
        kind: LengthKind::Sideline,
        index,
        length: 0.0,
    }
    .at_time(t)
}

fn row_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}

// Appends `duration` seconds of constant `rates` in rows of `dt`, the last one shortened.
fn push_constant(
    schedule: &mut VelocitySchedule,
    rates: &[f64],
    duration: f64,
    dt: f64,
    phase: SchedulePhase,
) -> Result<()> {
    let n = row_count(duration, dt);
    for r in 0..n {
        let span = if r + 1 == n {
            duration - (n - 1) as f64 * dt
        } else {
            dt
        };
        schedule.push(span, rates.to_vec(), phase)?;
    }
    Ok(())
}

fn check_timing(duration: f64, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok(())
}

/// Constant hold rates for `duration` seconds starting from `chain`.
pub fn hold_plan(
    geom: &RobotGeometry,
    chain: &ArcChain,
    range: &HoldRange,
    v_left: f64,
    v_right: f64,
    duration: f64,
    dt: f64,
) -> Result<VelocitySchedule> {
    check_timing(duration, dt)?;
    let rates = hold_velocities(geom, range, v_left, v_right)?;
    let start = arcs_to_motors(geom, chain)?;
    if let Some((t, index)) = first_overdraw(geom, &start, &rates, duration) {
        return Err(overdraw_error(t, index));
    }
    let mut schedule = VelocitySchedule::new(geom);
    push_constant(&mut schedule, &rates, duration, dt, SchedulePhase::Hold)?;
    Ok(schedule)
}

/// Slides the held units `j..k` rearward along the body at `shift_speed` (frontward if
/// negative), carrying the held shape with them while no arc angle changes.
///
/// Every held unit runs its left motor at `-shift_speed` and its right motor at
/// `+shift_speed`; segment `j` grows and segment `k+1` shrinks at that rate. The fixed rear
/// unit cannot travel, so `k` must be below `N` unless the speed is zero.
pub fn shift_plan(
    geom: &RobotGeometry,
    chain: &ArcChain,
    range: &HoldRange,
    shift_speed: f64,
    duration: f64,
    dt: f64,
) -> Result<VelocitySchedule> {
    range.check(geom)?;
    if shift_speed != 0.0 && range.k == geom.segment_count() {
        return Err(Error::invalid(format!(
            "unit {} is the fixed rear unit and cannot be shifted",
            range.k
        )));
    }
    hold_plan(geom, chain, range, -shift_speed, shift_speed, duration, dt)
}

/// Moves the listed units back to their evenly spaced positions, one after another, at
/// `travel_speed`.
pub fn reset_plan(
    geom: &RobotGeometry,
    chain: &ArcChain,
    unit_order: &[usize],
    travel_speed: f64,
    dt: f64,
) -> Result<VelocitySchedule> {
    let moves: Vec<(usize, f64)> = unit_order
        .iter()
        .map(|&u| (u, geom.nominal_unit_position(u)))
        .collect();
    reset_plan_to(geom, chain, &moves, travel_speed, dt)
}

/// Moves each `(unit, target)` unit to centerline distance `target` from the head, in the
/// given order.
pub fn reset_plan_to(
    geom: &RobotGeometry,
    chain: &ArcChain,
    moves: &[(usize, f64)],
    travel_speed: f64,
    dt: f64,
) -> Result<VelocitySchedule> {
    chain.validate(geom)?;
    let mut schedule = VelocitySchedule::new(geom);
    if moves.is_empty() {
        return Ok(schedule);
    }
    if !(travel_speed.is_finite() && travel_speed > 0.0) {
        return Err(Error::invalid(format!(
            "travel speed must be positive, got {travel_speed}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut d = arcs_to_motors(geom, chain)?;
    let mut current = chain.clone();
    for &(unit, target) in moves {
        if unit == 0 || unit >= geom.segment_count() {
            return Err(Error::invalid(format!(
                "unit {unit} is not repositionable (valid: 1..={})",
                geom.segment_count() - 1
            )));
        }
        if !target.is_finite() {
            return Err(Error::invalid("reset target is not finite"));
        }
        let frontward = current.unit_position(unit) - target;
        if frontward == 0.0 {
            continue;
        }
        let v = travel_speed.copysign(frontward);
        let mut rates = vec![0.0; geom.motor_count()];
        rates[2 * unit - 2] = v;
        rates[2 * unit - 1] = -v;
        let duration = frontward.abs() / travel_speed;
        if let Some((t, index)) = first_overdraw(geom, &d, &rates, duration) {
            return Err(overdraw_error(schedule.end_time() + t, index));
        }
        push_constant(&mut schedule, &rates, duration, dt, SchedulePhase::Reset)?;
        d = crate::arc_model::reposition_increment(geom, &d, unit, -frontward)?;
        current = motors_to_arcs(geom, &d)?;
    }
    Ok(schedule)
}

/// Sum of segment-length rates for one row of motor rates; zero whenever the rear mirror holds.
pub fn total_length_rate(rates: &[f64]) -> f64 {
    let n = rates.len();
    0.5 * (rates[n - 1] - rates[n - 2])
}

/// Checks that a motor state is still drivable (all sidelines positive).
pub fn check_drivable(geom: &RobotGeometry, d: &MotorState) -> Result<()> {
    sideline_lengths(geom, d).map(|_| ())
}
