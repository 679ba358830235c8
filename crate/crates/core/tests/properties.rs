use proptest::prelude::*;

use arcsnake::arc_model::{
    arcs_to_motors, chain_shape, motors_to_arcs, reposition_increment, ArcChain, MotorState,
    PlanarPose, RobotGeometry,
};
use arcsnake::obstacle_gait::{hold_velocities, total_length_rate, HoldRange};
use arcsnake::segmentation_fit::rmse;
use arcsnake::serpenoid::{segment_angles, winding_angle, Segmentation, SerpenoidParams};

const L_ALL: f64 = 0.6;
const H: f64 = 0.1;

// Segment count, then per-segment (weight, angle fraction) pairs.
fn chain_strategy() -> impl Strategy<Value = (RobotGeometry, ArcChain)> {
    (2usize..=8)
        .prop_flat_map(|n| prop::collection::vec((0.2f64..1.0, -0.95f64..0.95), n))
        .prop_map(|parts| {
            let n = parts.len();
            let g = RobotGeometry::new(L_ALL, n, H).unwrap();
            let sum: f64 = parts.iter().map(|p| p.0).sum();
            let mut lengths: Vec<f64> = parts.iter().map(|p| L_ALL * p.0 / sum).collect();
            let head: f64 = lengths[..n - 1].iter().sum();
            lengths[n - 1] = L_ALL - head;
            let angles: Vec<f64> = lengths
                .iter()
                .zip(&parts)
                .map(|(&l, p)| p.1 * (2.0 * l / H).min(3.0))
                .collect();
            let chain = ArcChain::from_parts(&g, &lengths, &angles).unwrap();
            (g, chain)
        })
}

fn seg_strategy() -> impl Strategy<Value = (RobotGeometry, Segmentation)> {
    prop::collection::vec(0.1f64..1.0, 2..=7).prop_map(|w| {
        let n = w.len();
        let g = RobotGeometry::new(L_ALL, n, H).unwrap();
        let sum: f64 = w.iter().sum();
        let mut lengths: Vec<f64> = w.iter().map(|v| L_ALL * v / sum).collect();
        let head: f64 = lengths[..n - 1].iter().sum();
        lengths[n - 1] = L_ALL - head;
        let seg = Segmentation::new(&g, lengths).unwrap();
        (g, seg)
    })
}

proptest! {
    #[test]
    fn arcs_motors_round_trip((g, chain) in chain_strategy()) {
        let back = motors_to_arcs(&g, &arcs_to_motors(&g, &chain).unwrap()).unwrap();
        for (a, b) in chain.segments().iter().zip(back.segments()) {
            prop_assert!((a.length - b.length).abs() <= 1e-12);
            prop_assert!((a.angle - b.angle).abs() <= 1e-12);
        }
    }

    #[test]
    fn lengths_always_sum_to_robot_length(
        n in 2usize..=6,
        raw in prop::collection::vec(-1.0f64..1.0, 11),
    ) {
        let g = RobotGeometry::new(L_ALL, n, H).unwrap();
        let reach = 0.3 * g.nominal_segment_length();
        let phys: Vec<f64> = raw[..2 * n - 1].iter().map(|v| v * reach).collect();
        let d = MotorState::from_physical(&g, &phys).unwrap();
        let chain = motors_to_arcs(&g, &d).unwrap();
        prop_assert!((chain.total_length() - L_ALL).abs() <= 1e-12);
    }

    #[test]
    fn reposition_keeps_every_angle((g, chain) in chain_strategy(), pick in 0.0f64..1.0, frac in -0.5f64..0.5) {
        let unit = 1 + ((g.segment_count() - 1) as f64 * pick) as usize % (g.segment_count() - 1);
        let room = chain.segments()[unit - 1].length.min(chain.segments()[unit].length);
        let d = arcs_to_motors(&g, &chain).unwrap();
        if let Ok(moved) = reposition_increment(&g, &d, unit, frac * room) {
            let c = motors_to_arcs(&g, &moved).unwrap();
            for (a, b) in c.angles().iter().zip(chain.angles()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((c.unit_position(unit) - chain.unit_position(unit) - frac * room).abs() <= 1e-12);
        }
    }

    #[test]
    fn hold_rates_keep_interior_segments(
        (g, chain) in chain_strategy(),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
        vl in -0.01f64..0.01,
        vr in -0.01f64..0.01,
        dt in 0.0f64..0.5,
    ) {
        let n = g.segment_count();
        let j = 1 + (a * (n - 1) as f64) as usize % (n - 1);
        let k = j + 1 + (b * (n - j) as f64) as usize % (n - j);
        let range = HoldRange::new(&g, j, k).unwrap();
        let vr = if k == n { vl } else { vr };
        let rates = hold_velocities(&g, &range, vl, vr).unwrap();
        prop_assert_eq!(total_length_rate(&rates), 0.0);
        let d = arcs_to_motors(&g, &chain).unwrap();
        let ext: Vec<f64> = d.extensions().iter().zip(&rates).map(|(x, r)| x + r * dt).collect();
        if let Ok(c) = MotorState::new(&g, ext).and_then(|m| motors_to_arcs(&g, &m)) {
            for i in range.held_segments() {
                prop_assert!((c.angles()[i - 1] - chain.angles()[i - 1]).abs() <= 1e-12);
                prop_assert!((c.lengths()[i - 1] - chain.lengths()[i - 1]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rmse_symmetric_and_zero_on_self(pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..50)) {
        let a: Vec<PlanarPose> = pts.iter().map(|p| PlanarPose::new(p.0, p.1, 0.0)).collect();
        let b: Vec<PlanarPose> = pts.iter().map(|p| PlanarPose::new(p.2, p.3, 0.0)).collect();
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn shape_polyline_matches_chain_length((g, chain) in chain_strategy(), spacing in 0.002f64..0.05) {
        let shape = chain_shape(&g, &chain, &PlanarPose::new(0.3, -0.2, 1.0), spacing).unwrap();
        let len = shape.polyline_length();
        prop_assert!(len <= L_ALL + 1e-12);
        prop_assert!(L_ALL - len < 1e-7);
    }

    #[test]
    fn segment_angles_sum_to_tail_winding((g, seg) in seg_strategy(), t in -20.0f64..20.0, omega in -3.0f64..3.0) {
        let p = SerpenoidParams::new(0.7, 0.15, omega).unwrap();
        let total: f64 = segment_angles(&g, &p, t, &seg).unwrap().iter().sum();
        prop_assert!((total - winding_angle(&p, t, L_ALL)).abs() <= 1e-12);
    }
}
