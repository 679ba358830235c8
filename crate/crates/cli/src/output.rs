use std::fmt::Write as _;
use std::io::Write;

use arcsnake::arc_model::PlanarPose;
use arcsnake::locomotion_sim::{serpentine_path, Frame, GaitKind, Trajectory};
use arcsnake::obstacle_gait::VelocitySchedule;
use arcsnake::segmentation_fit::FitResult;
use arcsnake::serpenoid::MotorTrajectory;

/// Shortest `%.9g`-style rendering: 9 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-5, 1e9)`. Negative zero prints as `0`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant), exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: Write>(w: csv::Writer<W>) -> std::io::Result<()> {
    w.into_inner().map_err(|e| e.into_error())?.flush()
}

/// `N, L_1 ... L_Nmax, rmse_m, evaluations, converged`; shorter rows are blank-padded.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[(usize, FitResult)]) -> std::io::Result<()> {
    let n_max = rows.iter().map(|(n, _)| *n).max().unwrap_or(0);
    let mut w = writer(out);
    let mut header = vec!["N".to_string()];
    header.extend((1..=n_max).map(|i| format!("L_{i}")));
    header.extend(["rmse_m", "evaluations", "converged"].map(String::from));
    w.write_record(&header)?;
    for (n, fit) in rows {
        let mut rec = vec![n.to_string()];
        let lengths = fit.segmentation.lengths();
        rec.extend((0..n_max).map(|i| lengths.get(i).map_or(String::new(), |&v| fmt_num(v))));
        rec.push(fmt_num(fit.rmse));
        rec.push(fit.evaluations.to_string());
        rec.push(fit.converged.to_string());
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `t_s, d1_m ... d2N_m`.
pub fn write_motor_csv<W: Write>(out: W, traj: &MotorTrajectory) -> std::io::Result<()> {
    let mut w = writer(out);
    let motors = traj.states.first().map_or(0, |s| s.len());
    let mut header = vec!["t_s".to_string()];
    header.extend((1..=motors).map(|k| format!("d{k}_m")));
    w.write_record(&header)?;
    for (t, d) in traj.times.iter().zip(&traj.states) {
        let mut rec = vec![fmt_num(*t)];
        rec.extend(d.extensions().iter().map(|&v| fmt_num(v)));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `t_s, d1_dot ... d2N_dot`. Each row holds from its time until the next; a final all-zero
/// row marks the end of the schedule.
pub fn write_schedule_csv<W: Write>(out: W, schedule: &VelocitySchedule) -> std::io::Result<()> {
    let mut w = writer(out);
    let motors = schedule.motor_count();
    let mut header = vec!["t_s".to_string()];
    header.extend((1..=motors).map(|k| format!("d{k}_dot")));
    w.write_record(&header)?;
    for row in schedule.rows() {
        let mut rec = vec![fmt_num(row.t)];
        rec.extend(row.rates.iter().map(|&v| fmt_num(v)));
        w.write_record(&rec)?;
    }
    let mut stop = vec![fmt_num(schedule.end_time())];
    stop.extend(std::iter::repeat_n("0".to_string(), motors));
    w.write_record(&stop)?;
    finish(w)
}

/// `t_s, head_x_m, head_y_m, head_heading_rad, L_1 ... L_N, theta_1 ... theta_N`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> std::io::Result<()> {
    let mut w = writer(out);
    let n = traj.frames().first().map_or(0, |f| f.chain.len());
    let mut header: Vec<String> = ["t_s", "head_x_m", "head_y_m", "head_heading_rad"]
        .map(String::from)
        .to_vec();
    header.extend((1..=n).map(|i| format!("L_{i}")));
    header.extend((1..=n).map(|i| format!("theta_{i}")));
    w.write_record(&header)?;
    for f in traj.frames() {
        let mut rec = vec![
            fmt_num(f.t),
            fmt_num(f.head.x),
            fmt_num(f.head.y),
            fmt_num(f.head.heading),
        ];
        rec.extend(f.chain.segments().iter().map(|s| fmt_num(s.length)));
        rec.extend(f.chain.segments().iter().map(|s| fmt_num(s.angle)));
        w.write_record(&rec)?;
    }
    finish(w)
}

struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Bounds {
    fn new() -> Self {
        Self {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, x: f64, y: f64, pad: f64) {
        self.min_x = self.min_x.min(x - pad);
        self.min_y = self.min_y.min(y - pad);
        self.max_x = self.max_x.max(x + pad);
        self.max_y = self.max_y.max(y + pad);
    }
}

fn polyline(points: &[PlanarPose]) -> String {
    let mut s = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", fmt_num(p.x), fmt_num(-p.y));
    }
    s
}

// Path under the body in a serpentine frame.
fn target_curve(traj: &Trajectory, frame: &Frame) -> Option<Vec<PlanarPose>> {
    let p = traj.meta().serpenoid.as_ref()?;
    let sigma = frame.path_arclength?;
    let length = frame.chain.total_length();
    serpentine_path(p, sigma, sigma - length, 0.005).ok()
}

/// One SVG document per frame, all sharing a viewport that covers the whole run.
pub fn trajectory_svgs(traj: &Trajectory, body_width: f64) -> Vec<String> {
    let mut b = Bounds::new();
    for f in traj.frames() {
        for p in &f.shape.points {
            b.add(p.x, -p.y, body_width);
        }
    }
    for o in &traj.meta().obstacles {
        b.add(o.x, -o.y, o.radius + body_width);
    }
    let (w, h) = (b.max_x - b.min_x, b.max_y - b.min_y);
    let stroke = fmt_num(body_width * 0.6);
    traj.frames()
        .iter()
        .map(|f| {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"800\" height=\"{}\">",
                fmt_num(b.min_x),
                fmt_num(b.min_y),
                fmt_num(w),
                fmt_num(h),
                (800.0 * h / w).round().max(1.0)
            );
            let _ = writeln!(s, "<title>t = {} s</title>", fmt_num(f.t));
            if traj.meta().gait == GaitKind::Serpentine {
                if let Some(curve) = target_curve(traj, f) {
                    let _ = writeln!(
                        s,
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"#999\" stroke-width=\"{}\" stroke-dasharray=\"{} {}\"/>",
                        polyline(&curve),
                        fmt_num(body_width * 0.1),
                        fmt_num(body_width * 0.3),
                        fmt_num(body_width * 0.2)
                    );
                }
            }
            for o in &traj.meta().obstacles {
                let _ = writeln!(
                    s,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#c63\"/>",
                    fmt_num(o.x),
                    fmt_num(-o.y),
                    fmt_num(o.radius)
                );
            }
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#246\" stroke-width=\"{stroke}\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>",
                polyline(&f.shape.points)
            );
            let head = f.shape.head();
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#e33\"/>",
                fmt_num(head.x),
                fmt_num(-head.y),
                fmt_num(body_width * 0.4)
            );
            s.push_str("</svg>\n");
            s
        })
        .collect()
}
