use approx::assert_abs_diff_eq;

use arcsnake::arc_model::{arcs_to_motors, motors_to_arcs, ArcChain, RobotGeometry};
use arcsnake::locomotion_sim::{
    simulate_obstacle, simulate_serpentine, speed_estimate, AnchorRule, SimConfig,
};
use arcsnake::obstacle_gait::{reset_plan, shift_plan, HoldRange, SchedulePhase};
use arcsnake::segmentation_fit::{fit_segmentation, FitConfig};
use arcsnake::serpenoid::{
    serpenoid_chain, serpentine_motor_trajectory, time_grid, Segmentation, SerpenoidParams,
};
use arcsnake::Error;

fn geom(n: usize) -> RobotGeometry {
    RobotGeometry::new(0.6, n, 0.1).unwrap()
}

#[test]
fn fitted_gait_commands_reproduce_the_chain() {
    let g = geom(3);
    let p = SerpenoidParams::new(0.7, 0.15, 0.1).unwrap();
    let fit =
        fit_segmentation(&g, &p, 3, 5.0 * std::f64::consts::PI, &FitConfig::default()).unwrap();
    let times = time_grid(20.0, 0.5).unwrap();
    let traj = serpentine_motor_trajectory(&g, &p, &fit.segmentation, &times).unwrap();
    for (t, d) in traj.times.iter().zip(&traj.states) {
        let want = serpenoid_chain(&g, &p, *t, &fit.segmentation).unwrap();
        let got = motors_to_arcs(&g, d).unwrap();
        for (a, b) in want.segments().iter().zip(got.segments()) {
            assert_abs_diff_eq!(a.length, b.length, epsilon = 1e-12);
            assert_abs_diff_eq!(a.angle, b.angle, epsilon = 1e-12);
        }
    }
}

#[test]
fn motor_trajectory_is_periodic_over_one_cycle() {
    let g = geom(3);
    let p = SerpenoidParams::new(0.7, 0.15, 0.1).unwrap();
    let cycle = p.cycle_time().unwrap();
    let times = time_grid(cycle, cycle / 628.0).unwrap();
    assert_eq!(times.len(), 629);
    let traj = serpentine_motor_trajectory(&g, &p, &Segmentation::equal(&g), &times).unwrap();
    let (first, last) = (&traj.states[0], &traj.states[628]);
    for (a, b) in first.extensions().iter().zip(last.extensions()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn overdraw_reports_the_failing_time() {
    // A narrow segment cannot take the serpenoid bend once the body gets wide.
    let g = RobotGeometry::new(0.6, 3, 0.3).unwrap();
    let p = SerpenoidParams::new(1.5, 0.15, 1.0).unwrap();
    let seg = Segmentation::new(&g, vec![0.05, 0.5, 0.05]).unwrap();
    let times = time_grid(6.0, 0.1).unwrap();
    match serpentine_motor_trajectory(&g, &p, &seg, &times) {
        Err(Error::AtTime { t, source }) => {
            assert!(source.is_numerical());
            assert!(times.contains(&t));
        }
        other => panic!("expected a timed overdraw, got {other:?}"),
    }
}

#[test]
fn shift_reset_cycle_advances_the_head() {
    let g = geom(4);
    let range = HoldRange::new(&g, 1, 3).unwrap();
    let chain = ArcChain::from_parts(&g, &[0.15; 4], &[0.0, 0.9, -0.9, 0.0]).unwrap();
    let d0 = arcs_to_motors(&g, &chain).unwrap();
    let mut schedule = shift_plan(&g, &chain, &range, 0.005, 8.0, 0.1).unwrap();
    let shifted = motors_to_arcs(&g, &schedule.integrate(&d0)).unwrap();
    schedule
        .extend(&reset_plan(&g, &shifted, &[1, 2, 3], 0.01, 0.1).unwrap())
        .unwrap();
    assert!(schedule.rows().iter().all(|r| r.rates[6] == r.rates[7]));
    let cfg = SimConfig::new(0.1, schedule.end_time(), AnchorRule::PinnedHold);
    let traj = simulate_obstacle(&g, &chain, &schedule, &range, &cfg).unwrap();
    let hold_end = traj
        .frames()
        .iter()
        .rposition(|f| f.phase == Some(SchedulePhase::Hold))
        .unwrap();
    let v = speed_estimate(&traj, (0.0, traj.frames()[hold_end].t)).unwrap();
    assert_abs_diff_eq!(v.straight_line, 0.005, epsilon = 1e-12);
    let (dx, dy) = traj.head_displacement();
    assert_abs_diff_eq!(dx, 0.04, epsilon = 1e-9);
    assert_abs_diff_eq!(dy, 0.0, epsilon = 1e-12);
    // Back at even spacing with the same shape.
    let end = &traj.frames().last().unwrap().chain;
    for (a, b) in end.segments().iter().zip(chain.segments()) {
        assert_abs_diff_eq!(a.length, b.length, epsilon = 1e-9);
        assert_abs_diff_eq!(a.angle, b.angle, epsilon = 1e-12);
    }
}

#[test]
fn simulations_are_deterministic() {
    let g = geom(3);
    let p = SerpenoidParams::new(0.7, 0.15, 0.2).unwrap();
    let cfg = SimConfig::new(0.5, 10.0, AnchorRule::PathFollowing);
    let a = simulate_serpentine(&g, &p, &Segmentation::equal(&g), &cfg).unwrap();
    let b = simulate_serpentine(&g, &p, &Segmentation::equal(&g), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn serpentine_speed_does_not_depend_on_segmentation() {
    let g = geom(3);
    let p = SerpenoidParams::new(0.7, 0.15, 0.1).unwrap();
    let cycle = p.cycle_time().unwrap();
    let cfg = SimConfig::new(cycle / 64.0, cycle, AnchorRule::PathFollowing);
    let speeds: Vec<f64> = [vec![0.2, 0.2, 0.2], vec![0.1, 0.35, 0.15]]
        .into_iter()
        .map(|l| {
            let seg = Segmentation::new(&g, l).unwrap();
            let traj = simulate_serpentine(&g, &p, &seg, &cfg).unwrap();
            speed_estimate(&traj, (0.0, cycle)).unwrap().path_length
        })
        .collect();
    assert_eq!(speeds[0], speeds[1]);
}
