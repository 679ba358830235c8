//! Invariant suite run by `arcsnake check` on built-in fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arcsnake::arc_model::{
    arcs_to_motors, motors_to_arcs, reposition_increment, ArcChain, MotorState, RobotGeometry,
};
use arcsnake::locomotion_sim::{simulate_serpentine, speed_estimate, AnchorRule, SimConfig};
use arcsnake::obstacle_gait::{hold_velocities, reset_plan, HoldRange};
use arcsnake::segmentation_fit::{sweep_segments, FitConfig};
use arcsnake::serpenoid::{curvature, segment_angles, Segmentation, SerpenoidParams};

const BODY_WIDTH: f64 = 0.1;
const LENGTH: f64 = 0.6;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn random_chain(rng: &mut ChaCha8Rng) -> (RobotGeometry, ArcChain) {
    let n = rng.gen_range(2..=6);
    let geom = RobotGeometry::new(LENGTH, n, BODY_WIDTH).expect("fixture geometry");
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.0)).collect();
    let sum: f64 = w.iter().sum();
    let mut lengths: Vec<f64> = w.iter().map(|v| LENGTH * v / sum).collect();
    let head: f64 = lengths[..n - 1].iter().sum();
    lengths[n - 1] = LENGTH - head;
    let angles: Vec<f64> = lengths
        .iter()
        .map(|&l| {
            let cap = (1.8 * l / BODY_WIDTH).min(1.5);
            rng.gen_range(-cap..cap)
        })
        .collect();
    let chain = ArcChain::from_parts(&geom, &lengths, &angles).expect("fixture chain");
    (geom, chain)
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (geom, chain) = random_chain(&mut rng);
        let back = arcs_to_motors(&geom, &chain)
            .and_then(|d| motors_to_arcs(&geom, &d))
            .map_err(|e| e.to_string())?;
        for (a, b) in chain.segments().iter().zip(back.segments()) {
            worst = worst
                .max((a.length - b.length).abs())
                .max((a.angle - b.angle).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max error {worst:e}"))
    } else {
        Err(format!("max error {worst:e} > 1e-12"))
    }
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(2..=5);
        let geom = RobotGeometry::new(LENGTH, n, BODY_WIDTH).expect("fixture geometry");
        let phys: Vec<f64> = (0..2 * n - 1).map(|_| rng.gen_range(-0.04..0.04)).collect();
        let d = MotorState::from_physical(&geom, &phys).map_err(|e| e.to_string())?;
        let chain = motors_to_arcs(&geom, &d).map_err(|e| e.to_string())?;
        worst = worst.max((chain.total_length() - LENGTH).abs());
    }
    if worst <= 1e-12 {
        Ok(format!("max error {worst:e}"))
    } else {
        Err(format!("max error {worst:e} > 1e-12"))
    }
}

fn angles_vs_quadrature() -> Outcome {
    let geom = RobotGeometry::new(LENGTH, 3, BODY_WIDTH).expect("fixture geometry");
    let p = SerpenoidParams::new(0.7, 0.15, 1.0).expect("fixture params");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = rng.gen_range(0.0..7.0);
        let a = rng.gen_range(0.05..0.4);
        let b = rng.gen_range(0.05..(0.55 - a));
        let seg =
            Segmentation::new(&geom, vec![a, b, LENGTH - a - b]).map_err(|e| e.to_string())?;
        let angles = segment_angles(&geom, &p, t, &seg).map_err(|e| e.to_string())?;
        let mut s0 = 0.0;
        for (&len, &ang) in seg.lengths().iter().zip(&angles) {
            let m = 2000;
            let h = len / m as f64;
            let mut acc = curvature(&p, t, s0) + curvature(&p, t, s0 + len);
            for k in 1..m {
                acc += curvature(&p, t, s0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            worst = worst.max((acc * h / 3.0 - ang).abs());
            s0 += len;
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max error {worst:e}"))
    } else {
        Err(format!("max error {worst:e} > 1e-9"))
    }
}

fn shape_hold() -> Outcome {
    let geom = RobotGeometry::new(LENGTH, 4, BODY_WIDTH).expect("fixture geometry");
    let range = HoldRange::new(&geom, 1, 3).expect("fixture range");
    let chain =
        ArcChain::from_parts(&geom, &[0.15; 4], &[0.0, 0.9, -0.9, 0.3]).expect("fixture chain");
    let rates = hold_velocities(&geom, &range, -0.005, 0.005).map_err(|e| e.to_string())?;
    let d0 = arcs_to_motors(&geom, &chain).map_err(|e| e.to_string())?;
    let mut ext = d0.extensions().to_vec();
    for _ in 0..10_000 {
        for (d, r) in ext.iter_mut().zip(&rates) {
            *d += r * 1e-3;
        }
    }
    let d = MotorState::new(&geom, ext).map_err(|e| e.to_string())?;
    let end = motors_to_arcs(&geom, &d).map_err(|e| e.to_string())?;
    let worst = range
        .held_segments()
        .map(|i| (end.angles()[i - 1] - chain.angles()[i - 1]).abs())
        .fold(0.0, f64::max);
    if worst < 1e-9 {
        Ok(format!("max drift {worst:e} rad"))
    } else {
        Err(format!("max drift {worst:e} rad >= 1e-9"))
    }
}

fn reset_neutrality() -> Outcome {
    let geom = RobotGeometry::new(LENGTH, 4, BODY_WIDTH).expect("fixture geometry");
    let chain = ArcChain::from_parts(&geom, &[0.21, 0.17, 0.12, 0.10], &[0.4, -0.8, 0.5, 0.2])
        .expect("fixture chain");
    let d0 = arcs_to_motors(&geom, &chain).map_err(|e| e.to_string())?;
    let moved = reposition_increment(&geom, &d0, 2, 0.03).map_err(|e| e.to_string())?;
    let schedule = reset_plan(&geom, &chain, &[1, 2, 3], 0.01, 0.05).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for d in [moved, schedule.integrate(&d0)] {
        let c = motors_to_arcs(&geom, &d).map_err(|e| e.to_string())?;
        for (a, b) in c.angles().iter().zip(chain.angles()) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max angle change {worst:e} rad"))
    } else {
        Err(format!("max angle change {worst:e} rad > 1e-12"))
    }
}

fn sweep_ordering() -> Outcome {
    let geom = RobotGeometry::new(LENGTH, 3, BODY_WIDTH).expect("fixture geometry");
    let p = SerpenoidParams::new(0.7, 0.15, 1.0).expect("fixture params");
    let rows = sweep_segments(
        &geom,
        &p,
        2..=5,
        std::f64::consts::FRAC_PI_2,
        &FitConfig::default(),
    );
    let mut rmse = Vec::new();
    for (n, r) in rows {
        let fit = r.map_err(|e| format!("N = {n}: {e}"))?;
        if !fit.converged {
            return Err(format!("N = {n} did not converge"));
        }
        rmse.push(fit.rmse);
    }
    let decreasing = rmse.windows(2).all(|w| w[1] < w[0]);
    let listing = rmse
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(" ");
    if decreasing && rmse[1] < rmse[0] / 2.0 {
        Ok(format!("rmse {listing}"))
    } else {
        Err(format!("rmse {listing} not ordered"))
    }
}

fn serpentine_speed() -> Outcome {
    let geom = RobotGeometry::new(LENGTH, 3, BODY_WIDTH).expect("fixture geometry");
    let p = SerpenoidParams::new(0.7, 0.15, 0.1).expect("fixture params");
    let cycle = p.cycle_time().expect("non-zero frequency");
    let cfg = SimConfig::new(cycle / 64.0, cycle, AnchorRule::PathFollowing);
    let traj = simulate_serpentine(&geom, &p, &Segmentation::equal(&geom), &cfg)
        .map_err(|e| e.to_string())?;
    let v = speed_estimate(&traj, (0.0, cycle)).map_err(|e| e.to_string())?;
    let rel = (v.path_length / p.wave_speed() - 1.0).abs();
    if rel < 0.01 {
        Ok(format!(
            "path speed {:.7} m/s, relative error {rel:.2e}",
            v.path_length
        ))
    } else {
        Err(format!("path speed {} m/s off by {rel:.2e}", v.path_length))
    }
}

/// Prints one line per check and returns whether all passed.
pub fn run_suite() -> bool {
    let checks: [Check; 7] = [
        ("round_trip", round_trip),
        ("length_conservation", conservation),
        ("segment_angles_vs_quadrature", angles_vs_quadrature),
        ("shape_hold", shape_hold),
        ("reset_neutrality", reset_neutrality),
        ("sweep_ordering", sweep_ordering),
        ("serpentine_speed", serpentine_speed),
    ];
    let mut all = true;
    for (name, f) in checks {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                all = false;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    all
}
