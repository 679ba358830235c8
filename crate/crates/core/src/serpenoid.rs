//! Serpenoid curve and the serpentine gait built on it.
//!
//! Curvature is `kappa(t, s) = (pi a0 / 2l) sin(w t - pi s / 2l)`, a wave travelling toward
//! the tail at `2 l w / pi`. The body must span exactly one period (`L_all = 4 l`) for the
//! closed-form segment angles to hold.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::arc_model::{
    arcs_to_motors, sideline_lengths, ArcChain, ArcSegment, MotorState, PlanarPose, RobotGeometry,
    LENGTH_BUDGET_TOL,
};
use crate::error::{Error, Result};

/// Default arclength step for [`curve_points`].
pub const DEFAULT_CURVE_STEP: f64 = 1e-3;

/// Parameters of the serpenoid curve and gait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SerpenoidParams {
    alpha0: f64,
    quarter_length: f64,
    omega: f64,
}

impl SerpenoidParams {
    pub fn new(alpha0: f64, quarter_length: f64, omega: f64) -> Result<Self> {
        if !alpha0.is_finite() {
            return Err(Error::invalid("winding amplitude is not finite"));
        }
        if !(quarter_length.is_finite() && quarter_length > 0.0) {
            return Err(Error::invalid(format!(
                "quarter length must be positive, got {quarter_length}"
            )));
        }
        if !omega.is_finite() {
            return Err(Error::invalid("angular frequency is not finite"));
        }
        Ok(Self {
            alpha0,
            quarter_length,
            omega,
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn quarter_length(&self) -> f64 {
        self.quarter_length
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Same curve with a different angular frequency.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.alpha0, self.quarter_length, omega)
    }

    /// Arclength of one full curvature period, `4 l`.
    pub fn period_length(&self) -> f64 {
        4.0 * self.quarter_length
    }

    /// Speed at which the curvature wave travels along the body, `2 l w / pi`.
    pub fn wave_speed(&self) -> f64 {
        2.0 * self.quarter_length * self.omega / PI
    }

    /// Time of one gait cycle, `2 pi / w`. `None` when `w == 0`.
    pub fn cycle_time(&self) -> Option<f64> {
        (self.omega != 0.0).then(|| 2.0 * PI / self.omega.abs())
    }

    /// Peak curvature magnitude `pi a0 / 2l`.
    pub fn peak_curvature(&self) -> f64 {
        PI * self.alpha0 / (2.0 * self.quarter_length)
    }

    fn wavenumber(&self) -> f64 {
        FRAC_PI_2 / self.quarter_length
    }

    pub fn check_period(&self, geom: &RobotGeometry) -> Result<()> {
        if (geom.total_length() - self.period_length()).abs() > LENGTH_BUDGET_TOL {
            return Err(Error::PeriodMismatch {
                robot_length: geom.total_length(),
                period: self.period_length(),
            });
        }
        Ok(())
    }
}

/// Segment lengths `L_1 ... L_N`, held fixed during the serpentine gait.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segmentation {
    lengths: Vec<f64>,
}

impl Segmentation {
    pub fn new(geom: &RobotGeometry, lengths: Vec<f64>) -> Result<Self> {
        if lengths.len() != geom.segment_count() {
            return Err(Error::invalid(format!(
                "segmentation has {} lengths, robot has {} segments",
                lengths.len(),
                geom.segment_count()
            )));
        }
        if let Some(i) = lengths.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid(format!(
                "segment length L_{} must be positive, got {}",
                i + 1,
                lengths[i]
            )));
        }
        let sum: f64 = lengths.iter().sum();
        if (sum - geom.total_length()).abs() > LENGTH_BUDGET_TOL {
            return Err(Error::LengthBudget {
                sum,
                expected: geom.total_length(),
            });
        }
        Ok(Self { lengths })
    }

    pub fn equal(geom: &RobotGeometry) -> Self {
        Self {
            lengths: vec![geom.nominal_segment_length(); geom.segment_count()],
        }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

pub fn curvature(p: &SerpenoidParams, t: f64, s: f64) -> f64 {
    p.peak_curvature() * (p.omega * t - p.wavenumber() * s).sin()
}

/// Tangent heading at arclength `s` relative to the tangent at `s = 0`.
pub fn winding_angle(p: &SerpenoidParams, t: f64, s: f64) -> f64 {
    let phase = p.omega * t;
    p.alpha0 * ((phase - p.wavenumber() * s).cos() - phase.cos())
}

// One Simpson step of (cos a, sin a) over [s, s + h]. The integrand depends on s alone, so
// this is exactly the classic fourth-order Runge-Kutta step.
fn rk4_step(p: &SerpenoidParams, t: f64, s: f64, h: f64) -> (f64, f64) {
    let a0 = winding_angle(p, t, s);
    let am = winding_angle(p, t, s + 0.5 * h);
    let a1 = winding_angle(p, t, s + h);
    (
        h / 6.0 * (a0.cos() + 4.0 * am.cos() + a1.cos()),
        h / 6.0 * (a0.sin() + 4.0 * am.sin() + a1.sin()),
    )
}

/// Curve poses at `s = 0, ds, 2 ds, ..., s_max`, starting at the origin with heading 0.
///
/// When `s_max` is not a multiple of `ds` the last step is shortened to land on `s_max`.
pub fn curve_points(p: &SerpenoidParams, t: f64, s_max: f64, ds: f64) -> Result<Vec<PlanarPose>> {
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::invalid(format!(
            "curve length must be positive, got {s_max}"
        )));
    }
    if !(ds.is_finite() && ds > 0.0 && ds <= s_max) {
        return Err(Error::invalid(format!(
            "step must be in (0, {s_max}], got {ds}"
        )));
    }
    let full = (s_max / ds * (1.0 + 1e-12)).floor() as usize;
    let mut stations: Vec<f64> = (0..=full).map(|k| k as f64 * ds).collect();
    if s_max - stations[full] > 1e-12 * s_max {
        stations.push(s_max);
    } else {
        stations[full] = s_max;
    }
    Ok(curve_points_at(p, t, &stations, ds))
}

/// Curve poses at ascending arclength `stations` (the first must be 0), integrating each
/// interval in equal substeps no longer than `max_step`.
pub fn curve_points_at(
    p: &SerpenoidParams,
    t: f64,
    stations: &[f64],
    max_step: f64,
) -> Vec<PlanarPose> {
    let mut out = Vec::with_capacity(stations.len());
    let (mut x, mut y) = (0.0, 0.0);
    let mut s = 0.0;
    for &target in stations {
        let span = target - s;
        if span > 0.0 {
            let n = (span / max_step - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for k in 0..n {
                let (dx, dy) = rk4_step(p, t, s + k as f64 * h, h);
                x += dx;
                y += dy;
            }
            s = target;
        }
        out.push(PlanarPose::new(x, y, winding_angle(p, t, target)));
    }
    out
}

/// Arc angle of each segment: the integral of the curvature over that segment.
pub fn segment_angles(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    t: f64,
    seg: &Segmentation,
) -> Result<Vec<f64>> {
    p.check_period(geom)?;
    if seg.len() != geom.segment_count() {
        return Err(Error::invalid(format!(
            "segmentation has {} lengths, robot has {} segments",
            seg.len(),
            geom.segment_count()
        )));
    }
    let total = geom.total_length();
    let phase = p.omega * t;
    let mut start = 0.0;
    Ok(seg
        .lengths()
        .iter()
        .map(|&len| {
            let mid = start + 0.5 * len;
            start += len;
            2.0 * p.alpha0 * (PI * len / total).sin() * (phase - 2.0 * PI / total * mid).sin()
        })
        .collect())
}

/// The arc chain that approximates the curve at time `t` with the given segmentation.
pub fn serpenoid_chain(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    t: f64,
    seg: &Segmentation,
) -> Result<ArcChain> {
    let angles = segment_angles(geom, p, t, seg)?;
    let segments = seg
        .lengths()
        .iter()
        .zip(angles)
        .map(|(&l, a)| ArcSegment::new(l, a))
        .collect();
    ArcChain::new(geom, segments)
}

/// Motor commands sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotorTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MotorState>,
}

impl MotorTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Rack extensions that make the robot follow the serpenoid gait at each time in `times`.
pub fn serpentine_motor_trajectory(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    seg: &Segmentation,
    times: &[f64],
) -> Result<MotorTrajectory> {
    p.check_period(geom)?;
    if let Some(w) = times
        .windows(2)
        .position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::invalid(format!(
            "time grid must be strictly increasing (entry {})",
            w + 1
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid contains a non-finite entry"));
    }
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let row = serpenoid_chain(geom, p, t, seg)
            .and_then(|chain| arcs_to_motors(geom, &chain))
            .and_then(|d| sideline_lengths(geom, &d).map(|_| d))
            .map_err(|e| e.at_time(t))?;
        states.push(row);
    }
    Ok(MotorTrajectory {
        times: times.to_vec(),
        states,
    })
}

/// Uniform grid `0, dt, 2 dt, ...` up to and including `t_end` (with a relative slack of
/// 1e-9 steps so `t_end = k dt` lands on the last row).
pub fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid(format!(
            "end time must be non-negative, got {t_end}"
        )));
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference_params() -> SerpenoidParams {
        SerpenoidParams::new(0.7, 0.15, 1.0).unwrap()
    }

    fn geom() -> RobotGeometry {
        RobotGeometry::new(0.6, 3, 0.1).unwrap()
    }

    // Composite Simpson quadrature of the curvature over [a, b].
    fn curvature_integral(p: &SerpenoidParams, t: f64, a: f64, b: f64, step: f64) -> f64 {
        let n = (((b - a) / step).ceil() as usize).max(1) * 2;
        let h = (b - a) / n as f64;
        let mut acc = curvature(p, t, a) + curvature(p, t, b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * curvature(p, t, a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn params_validation() {
        assert!(SerpenoidParams::new(0.7, 0.0, 1.0).is_err());
        assert!(SerpenoidParams::new(f64::NAN, 0.15, 1.0).is_err());
        assert!(SerpenoidParams::new(0.7, 0.15, f64::INFINITY).is_err());
        assert_eq!(
            SerpenoidParams::new(0.7, 0.15, 0.0).unwrap().cycle_time(),
            None
        );
    }

    #[test]
    fn curvature_examples() {
        let p = reference_params();
        assert_eq!(curvature(&p, 0.0, 0.0), 0.0);
        assert_abs_diff_eq!(curvature(&p, FRAC_PI_2, 0.0), 7.33038, epsilon = 1e-5);
        assert_abs_diff_eq!(curvature(&p, 0.0, 0.15), -7.33038, epsilon = 1e-5);
    }

    #[test]
    fn winding_angle_examples() {
        let p = reference_params();
        assert_eq!(winding_angle(&p, 0.37, 0.0), 0.0);
        assert_abs_diff_eq!(winding_angle(&p, 0.0, 0.15), -0.7, epsilon = 1e-15);
        for (t, s) in [(0.3, 0.41), (2.0, 0.6), (-1.0, 0.05), (5.5, 0.33)] {
            let q = curvature_integral(&p, t, 0.0, s, 1e-5);
            assert_abs_diff_eq!(winding_angle(&p, t, s), q, epsilon = 1e-9);
        }
    }

    #[test]
    fn straight_curve_for_zero_amplitude() {
        let p = SerpenoidParams::new(0.0, 0.15, 1.0).unwrap();
        let pts = curve_points(&p, 0.4, 0.6, 0.1).unwrap();
        assert_eq!(pts.len(), 7);
        for (k, q) in pts.iter().enumerate() {
            assert_abs_diff_eq!(q.x, 0.1 * k as f64, epsilon = 1e-15);
            assert_eq!(q.y, 0.0);
        }
    }

    #[test]
    fn curve_points_converge() {
        let p = reference_params();
        let fine = curve_points(&p, 0.0, 0.6, 1e-5).unwrap();
        let coarse = curve_points(&p, 0.0, 0.6, 1e-3).unwrap();
        assert_eq!(coarse.len(), 601);
        let (a, b) = (fine.last().unwrap(), coarse.last().unwrap());
        assert!(a.distance(b) < 1e-6);
        // The chord sum falls short of the arclength by about s_max kappa_rms^2 ds^2 / 24,
        // 1.1e-6 s_max at ds = 1e-3 for these parameters.
        let half = curve_points(&p, 0.0, 0.6, 5e-4).unwrap();
        let len: f64 = half.windows(2).map(|w| w[0].distance(&w[1])).sum();
        assert!((len - 0.6).abs() < 1e-6 * 0.6);
        for (k, q) in coarse.iter().enumerate() {
            assert_abs_diff_eq!(
                q.heading,
                winding_angle(&p, 0.0, k as f64 * 1e-3),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn curve_points_partial_last_step() {
        let p = reference_params();
        let pts = curve_points(&p, 0.0, 0.25, 0.1).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(curve_points(&p, 0.0, 0.25, 0.3).is_err());
        assert!(curve_points(&p, 0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn segment_angles_example() {
        let g = geom();
        let p = reference_params();
        let th = segment_angles(&g, &p, FRAC_PI_2, &Segmentation::equal(&g)).unwrap();
        let want = [0.60622, -1.21244, 0.60622];
        for (a, b) in th.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-5);
        }
        // Quadrature of the curvature over each third, step 1e-6.
        for (i, a) in th.iter().enumerate() {
            let q = curvature_integral(&p, FRAC_PI_2, 0.2 * i as f64, 0.2 * (i + 1) as f64, 1e-6);
            assert_abs_diff_eq!(*a, q, epsilon = 1e-9);
        }
    }

    #[test]
    fn segment_angles_zero_amplitude() {
        let g = geom();
        let p = SerpenoidParams::new(0.0, 0.15, 1.0).unwrap();
        let seg = Segmentation::new(&g, vec![0.1, 0.3, 0.2]).unwrap();
        assert!(segment_angles(&g, &p, 0.9, &seg)
            .unwrap()
            .iter()
            .all(|&a| a == 0.0));
    }

    #[test]
    fn endpoint_phase_fails_quadrature() {
        let g = geom();
        let p = reference_params();
        let seg = [0.15, 0.32, 0.13];
        let mut start = 0.0;
        let mut worst: f64 = 0.0;
        for len in seg {
            let end = start + len;
            let wrong =
                2.0 * 0.7 * (PI * len / 0.6).sin() * (FRAC_PI_2 - 2.0 * PI / 0.6 * end).sin();
            let q = curvature_integral(&p, FRAC_PI_2, start, end, 1e-5);
            worst = worst.max((wrong - q).abs());
            start = end;
        }
        assert!(
            worst > 1e-2,
            "endpoint phase should be far off, got {worst}"
        );
        let seg = Segmentation::new(&g, seg.to_vec()).unwrap();
        assert!(segment_angles(&g, &p, FRAC_PI_2, &seg).is_ok());
    }

    #[test]
    fn period_mismatch_rejected() {
        let g = geom();
        let p = SerpenoidParams::new(0.7, 0.2, 1.0).unwrap();
        assert!(matches!(
            segment_angles(&g, &p, 0.0, &Segmentation::equal(&g)),
            Err(Error::PeriodMismatch { .. })
        ));
    }

    #[test]
    fn segmentation_validation() {
        let g = geom();
        assert!(Segmentation::new(&g, vec![0.2, 0.2]).is_err());
        assert!(Segmentation::new(&g, vec![0.3, 0.3, 0.0]).is_err());
        assert!(matches!(
            Segmentation::new(&g, vec![0.2, 0.2, 0.3]),
            Err(Error::LengthBudget { .. })
        ));
    }

    #[test]
    fn trajectory_zero_amplitude_is_zero() {
        let g = geom();
        let p = SerpenoidParams::new(0.0, 0.15, 0.1).unwrap();
        let tr = serpentine_motor_trajectory(&g, &p, &Segmentation::equal(&g), &[0.0, 1.0, 2.0])
            .unwrap();
        assert!(tr
            .states
            .iter()
            .all(|d| d.extensions().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn trajectory_row_is_composition() {
        let g = geom();
        let p = SerpenoidParams::new(0.7, 0.15, 1.0).unwrap();
        let seg = Segmentation::equal(&g);
        let tr = serpentine_motor_trajectory(&g, &p, &seg, &[FRAC_PI_2]).unwrap();
        let th = segment_angles(&g, &p, FRAC_PI_2, &seg).unwrap();
        let chain = ArcChain::from_parts(&g, seg.lengths(), &th).unwrap();
        assert_eq!(tr.states[0], arcs_to_motors(&g, &chain).unwrap());
    }

    #[test]
    fn trajectory_is_periodic() {
        let g = geom();
        let p = SerpenoidParams::new(0.7, 0.15, 0.1).unwrap();
        let period = p.cycle_time().unwrap();
        let times: Vec<f64> = (0..200).map(|k| k as f64 * period / 100.0).collect();
        let tr = serpentine_motor_trajectory(&g, &p, &Segmentation::equal(&g), &times).unwrap();
        for k in 0..100 {
            for (a, b) in tr.states[k]
                .extensions()
                .iter()
                .zip(tr.states[k + 100].extensions())
            {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn trajectory_errors() {
        let g = geom();
        let p = SerpenoidParams::new(0.7, 0.15, 0.1).unwrap();
        let seg = Segmentation::equal(&g);
        assert!(serpentine_motor_trajectory(&g, &p, &seg, &[0.0, 0.0]).is_err());
        // A body width this large makes the inner sidelines collapse.
        let wide = RobotGeometry::new(0.6, 3, 1.0).unwrap();
        let err = serpentine_motor_trajectory(&wide, &p, &Segmentation::equal(&wide), &[0.0, 15.0])
            .unwrap_err();
        assert!(matches!(err, Error::AtTime { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn grid_includes_endpoint() {
        assert_eq!(time_grid(62.83, 0.1).unwrap().len(), 629);
        assert_eq!(time_grid(1.0, 0.1).unwrap().len(), 11);
        assert_eq!(time_grid(0.0, 0.1).unwrap(), vec![0.0]);
    }
}
