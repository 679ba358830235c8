//! Fitting the arc chain to a serpenoid curve by choosing the segment lengths.
//!
//! Both shapes start at the same head point with the same tangent and are sampled at equal
//! arclength fractions; the fit minimizes the RMSE between corresponding samples over the
//! lengths `L_1 ... L_N` subject to `sum L_i = L_all` and per-segment bounds. The search is a
//! coarse grid over the length simplex followed by a bounded Nelder-Mead refinement.

use std::f64::consts::FRAC_PI_2;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arc_model::{chain_points_at, ArcChain, ArcSegment, PlanarPose, RobotGeometry};
use crate::error::{Error, Result};
use crate::serpenoid::{curve_points_at, segment_angles, Segmentation, SerpenoidParams};

/// Largest integration substep used when sampling the target curve.
const CURVE_SUBSTEP: f64 = 1e-4;

/// Value assigned to candidates outside the bounds, plus their violation.
const INFEASIBLE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Grid stage only.
    Grid,
    /// Grid stage, then Nelder-Mead refinement from the best cell.
    NelderMead,
}

/// Which gait phases enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseObjective {
    /// The single time passed to the fit.
    Single,
    /// Mean RMSE over `phases` equally spaced times covering one gait cycle.
    CycleMean { phases: usize },
    /// Worst RMSE over `phases` equally spaced times covering one gait cycle.
    CycleMax { phases: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    /// Comparison points per curve, equally spaced in arclength.
    pub n_samples: usize,
    /// Per-segment `(min, max)` length in meters.
    pub length_bounds: (f64, f64),
    pub optimizer: OptimizerKind,
    /// Grid step in meters.
    pub grid_resolution: f64,
    /// Nelder-Mead stops once the simplex diameter is below this many meters.
    pub simplex_tolerance: f64,
    pub max_iterations: usize,
    /// Extra Nelder-Mead runs from randomly rotated simplices around the incumbent.
    pub restarts: usize,
    pub random_seed: u64,
    pub phase_objective: PhaseObjective,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            length_bounds: (0.02, 0.58),
            optimizer: OptimizerKind::NelderMead,
            grid_resolution: 0.02,
            simplex_tolerance: 1e-9,
            max_iterations: 4000,
            restarts: 2,
            random_seed: 0,
            phase_objective: PhaseObjective::Single,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, geom: &RobotGeometry) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 comparison samples, got {}",
                self.n_samples
            )));
        }
        let (lo, hi) = self.length_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi && hi <= geom.total_length()) {
            return Err(Error::invalid(format!(
                "length bounds must satisfy 0 < min < max <= {}, got ({lo}, {hi})",
                geom.total_length()
            )));
        }
        if !(self.grid_resolution.is_finite() && self.grid_resolution > 0.0) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        if !(self.simplex_tolerance.is_finite() && self.simplex_tolerance > 0.0) {
            return Err(Error::invalid("simplex tolerance must be positive"));
        }
        match self.phase_objective {
            PhaseObjective::CycleMean { phases } | PhaseObjective::CycleMax { phases }
                if phases == 0 =>
            {
                Err(Error::invalid("cycle objective needs at least one phase"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub segmentation: Segmentation,
    pub rmse: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Root mean square distance between corresponding points.
pub fn rmse(a: &[PlanarPose], b: &[PlanarPose]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "point lists differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("point lists are empty"));
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| {
            let (dx, dy) = (p.x - q.x, p.y - q.y);
            dx * dx + dy * dy
        })
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Equally spaced arclength stations `0 ... length`, `n` of them.
fn stations(length: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|k| length * k as f64 / last).collect()
}

/// Gait times entering the objective, starting at `t`.
pub fn objective_times(p: &SerpenoidParams, t: f64, objective: PhaseObjective) -> Result<Vec<f64>> {
    match objective {
        PhaseObjective::Single => Ok(vec![t]),
        PhaseObjective::CycleMean { phases } | PhaseObjective::CycleMax { phases } => {
            let step = cycle_step(p, phases)?;
            Ok((0..phases).map(|m| t + m as f64 * step).collect())
        }
    }
}

/// Time between `phases` equally spaced samples of one gait cycle.
pub fn cycle_step(p: &SerpenoidParams, phases: usize) -> Result<f64> {
    let cycle = p
        .cycle_time()
        .ok_or_else(|| Error::invalid("cycle objectives need a non-zero angular frequency"))?;
    Ok(cycle / phases as f64)
}

/// Default fit time: the phase `w t = pi / 2`.
pub fn default_fit_time(p: &SerpenoidParams) -> Result<f64> {
    if p.omega() == 0.0 {
        return Err(Error::invalid(
            "fit time needs a non-zero angular frequency",
        ));
    }
    Ok(FRAC_PI_2 / p.omega())
}

/// Chain-vs-curve RMSE as a function of the segment lengths, with the target curve samples
/// computed once.
pub struct ShapeObjective<'a> {
    geom: &'a RobotGeometry,
    params: &'a SerpenoidParams,
    times: Vec<f64>,
    stations: Vec<f64>,
    targets: Vec<Vec<PlanarPose>>,
    aggregate: PhaseObjective,
}

impl<'a> ShapeObjective<'a> {
    pub fn new(
        geom: &'a RobotGeometry,
        params: &'a SerpenoidParams,
        t: f64,
        n_samples: usize,
        aggregate: PhaseObjective,
    ) -> Result<Self> {
        params.check_period(geom)?;
        if n_samples < 2 {
            return Err(Error::invalid("need at least 2 comparison samples"));
        }
        let times = objective_times(params, t, aggregate)?;
        let stations = stations(geom.total_length(), n_samples);
        let targets = times
            .iter()
            .map(|&tm| curve_points_at(params, tm, &stations, CURVE_SUBSTEP))
            .collect();
        Ok(Self {
            geom,
            params,
            times,
            stations,
            targets,
            aggregate,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn rmse_at(&self, lengths: &[f64], idx: usize) -> Result<f64> {
        let seg = Segmentation::new(self.geom, lengths.to_vec())?;
        let angles = segment_angles(self.geom, self.params, self.times[idx], &seg)?;
        let segments = lengths
            .iter()
            .zip(angles)
            .map(|(&l, a)| ArcSegment::new(l, a))
            .collect();
        let chain = ArcChain::new(self.geom, segments)?;
        let pts = chain_points_at(&chain, &PlanarPose::default(), &self.stations);
        rmse(&pts, &self.targets[idx])
    }

    /// Objective value for a full length vector.
    pub fn evaluate(&self, lengths: &[f64]) -> Result<f64> {
        match self.aggregate {
            PhaseObjective::Single => self.rmse_at(lengths, 0),
            PhaseObjective::CycleMean { .. } => {
                let mut acc = 0.0;
                for k in 0..self.times.len() {
                    acc += self.rmse_at(lengths, k)?;
                }
                Ok(acc / self.times.len() as f64)
            }
            PhaseObjective::CycleMax { .. } => {
                let mut worst: f64 = 0.0;
                for k in 0..self.times.len() {
                    worst = worst.max(self.rmse_at(lengths, k)?);
                }
                Ok(worst)
            }
        }
    }
}

/// RMSE between the arc chain for `seg` at time `t` and the serpenoid curve trimmed to the
/// robot length, both head-aligned. The configured phase objective is applied.
pub fn chain_vs_curve_rmse(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    seg: &Segmentation,
    t: f64,
    cfg: &FitConfig,
) -> Result<f64> {
    ShapeObjective::new(geom, p, t, cfg.n_samples, cfg.phase_objective)?.evaluate(seg.lengths())
}

/// Best cell of the grid stage.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBest {
    pub lengths: Vec<f64>,
    pub rmse: f64,
    pub evaluations: usize,
}

// Lists every grid cell: the first N-1 lengths are multiples of the resolution inside the
// bounds, and the last takes what is left of the budget.
fn grid_cells(geom: &RobotGeometry, n: usize, cfg: &FitConfig) -> Vec<Vec<f64>> {
    let (lo, hi) = cfg.length_bounds;
    let res = cfg.grid_resolution;
    let total = geom.total_length();
    let k_lo = ((lo / res) - 1e-9).ceil().max(1.0) as usize;
    let k_hi = ((hi / res) + 1e-9).floor() as usize;
    let mut cells = Vec::new();
    if k_lo > k_hi {
        return cells;
    }
    let mut ks = vec![k_lo; n - 1];
    loop {
        let head: Vec<f64> = ks.iter().map(|&k| k as f64 * res).collect();
        let last = total - head.iter().sum::<f64>();
        if last >= lo - 1e-12 && last <= hi + 1e-12 && last > 0.0 {
            let mut cell = head;
            cell.push(last);
            cells.push(cell);
        }
        // Odometer increment, last digit fastest.
        let mut pos = n - 1;
        loop {
            if pos == 0 {
                return cells;
            }
            pos -= 1;
            if ks[pos] < k_hi {
                ks[pos] += 1;
                for k in ks.iter_mut().skip(pos + 1) {
                    *k = k_lo;
                }
                break;
            }
        }
    }
}

/// Exhaustive search over the length grid. Ties keep the first cell in odometer order.
pub fn grid_search(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    n: usize,
    t: f64,
    cfg: &FitConfig,
) -> Result<GridBest> {
    let geom = geom.with_segment_count(n)?;
    cfg.validate(&geom)?;
    check_feasible(&geom, cfg)?;
    let objective = ShapeObjective::new(&geom, p, t, cfg.n_samples, cfg.phase_objective)?;
    let mut best: Option<GridBest> = None;
    let mut evaluations = 0;
    for cell in grid_cells(&geom, n, cfg) {
        evaluations += 1;
        let value = objective.evaluate(&cell)?;
        if best.as_ref().is_none_or(|b| value < b.rmse) {
            best = Some(GridBest {
                lengths: cell,
                rmse: value,
                evaluations: 0,
            });
        }
    }
    let mut best = best.ok_or_else(|| {
        Error::invalid(format!(
            "no grid cell at resolution {} fits the bounds",
            cfg.grid_resolution
        ))
    })?;
    best.evaluations = evaluations;
    Ok(best)
}

fn check_feasible(geom: &RobotGeometry, cfg: &FitConfig) -> Result<()> {
    let n = geom.segment_count() as f64;
    let (lo, hi) = cfg.length_bounds;
    let total = geom.total_length();
    if n * lo > total + 1e-12 || n * hi < total - 1e-12 {
        return Err(Error::invalid(format!(
            "bounds ({lo}, {hi}) cannot partition {total} m into {n} segments"
        )));
    }
    Ok(())
}

struct Bounded<'o, 'a> {
    objective: &'o ShapeObjective<'a>,
    total: f64,
    bounds: (f64, f64),
    evaluations: usize,
}

impl Bounded<'_, '_> {
    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(self.total - x.iter().sum::<f64>());
        v
    }

    fn value(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let lengths = self.full(x);
        let (lo, hi) = self.bounds;
        let violation: f64 = lengths
            .iter()
            .map(|&l| (lo - l).max(0.0) + (l - hi).max(0.0))
            .sum();
        if violation > 0.0 {
            return INFEASIBLE + violation;
        }
        self.objective.evaluate(&lengths).unwrap_or(INFEASIBLE)
    }
}

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.points.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    fn diameter(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(best)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn affine(a: &[f64], b: &[f64], coeff: f64) -> Vec<f64> {
    // a + coeff (b - a)
    a.iter().zip(b).map(|(x, y)| x + coeff * (y - x)).collect()
}

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
fn nelder_mead(
    f: &mut Bounded<'_, '_>,
    start: Vec<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, bool) {
    let values = start.iter().map(|p| f.value(p)).collect();
    let mut s = Simplex {
        points: start,
        values,
    };
    let n = s.points.len() - 1;
    for _ in 0..max_iter {
        s.order();
        if s.diameter() <= tol {
            return (s.points[0].clone(), s.values[0], true);
        }
        let mut centroid = vec![0.0; n];
        for p in &s.points[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let worst = s.points[n].clone();
        let reflected = affine(&centroid, &worst, -1.0);
        let fr = f.value(&reflected);
        if fr < s.values[0] {
            let expanded = affine(&centroid, &worst, -2.0);
            let fe = f.value(&expanded);
            if fe < fr {
                s.points[n] = expanded;
                s.values[n] = fe;
            } else {
                s.points[n] = reflected;
                s.values[n] = fr;
            }
            continue;
        }
        if fr < s.values[n - 1] {
            s.points[n] = reflected;
            s.values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < s.values[n] {
            let c = affine(&centroid, &worst, -0.5);
            let v = f.value(&c);
            (c, v)
        } else {
            let c = affine(&centroid, &worst, 0.5);
            let v = f.value(&c);
            (c, v)
        };
        if fc < s.values[n].min(fr) {
            s.points[n] = contracted;
            s.values[n] = fc;
            continue;
        }
        let best = s.points[0].clone();
        for k in 1..=n {
            s.points[k] = affine(&best, &s.points[k], 0.5);
            s.values[k] = f.value(&s.points[k]);
        }
    }
    s.order();
    let done = s.diameter() <= tol;
    (s.points[0].clone(), s.values[0], done)
}

// Axis-aligned simplex around `center`, or a randomly rotated one when `rng` is given.
fn initial_simplex(center: &[f64], step: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut pts = vec![center.to_vec()];
    match rng {
        None => {
            for k in 0..n {
                let mut p = center.to_vec();
                p[k] += step;
                pts.push(p);
            }
        }
        Some(rng) => {
            // Gram-Schmidt on random directions keeps the simplex non-degenerate.
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
            while basis.len() < n {
                let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= dot * y;
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    basis.push(v.into_iter().map(|x| x / norm).collect());
                }
            }
            for b in basis {
                pts.push(center.iter().zip(&b).map(|(c, d)| c + step * d).collect());
            }
        }
    }
    pts
}

/// Fits `n` segment lengths to the serpenoid curve at time `t`.
pub fn fit_segmentation(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    n: usize,
    t: f64,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let geom = geom.with_segment_count(n)?;
    let grid = grid_search(&geom, p, n, t, cfg)?;
    let mut evaluations = grid.evaluations;
    if cfg.optimizer == OptimizerKind::Grid {
        return Ok(FitResult {
            segmentation: Segmentation::new(&geom, grid.lengths)?,
            rmse: grid.rmse,
            evaluations,
            converged: true,
        });
    }

    let objective = ShapeObjective::new(&geom, p, t, cfg.n_samples, cfg.phase_objective)?;
    let mut f = Bounded {
        objective: &objective,
        total: geom.total_length(),
        bounds: cfg.length_bounds,
        evaluations: 0,
    };
    let mut best_x = grid.lengths[..n - 1].to_vec();
    let mut best_v = grid.rmse;
    let step = 0.5 * cfg.grid_resolution;
    let (x, v, mut converged) = nelder_mead(
        &mut f,
        initial_simplex(&best_x, step, None),
        cfg.simplex_tolerance,
        cfg.max_iterations,
    );
    if v < best_v {
        best_x = x;
        best_v = v;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.random_seed.wrapping_add(n as u64));
    for _ in 0..cfg.restarts {
        let start = initial_simplex(&best_x, step, Some(&mut rng));
        let (x, v, ok) = nelder_mead(&mut f, start, cfg.simplex_tolerance, cfg.max_iterations);
        converged &= ok;
        if v < best_v {
            best_x = x;
            best_v = v;
        }
    }
    evaluations += f.evaluations;
    let lengths = f.full(&best_x);
    Ok(FitResult {
        segmentation: Segmentation::new(&geom, lengths)?,
        rmse: best_v,
        evaluations,
        converged,
    })
}

/// One independent fit per segment count. Fits run on separate threads; the output is
/// ordered by `N`.
pub fn sweep_segments(
    geom: &RobotGeometry,
    p: &SerpenoidParams,
    n_range: RangeInclusive<usize>,
    t: f64,
    cfg: &FitConfig,
) -> Vec<(usize, Result<FitResult>)> {
    let ns: Vec<usize> = n_range.collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = ns
            .iter()
            .map(|&n| scope.spawn(move || fit_segmentation(geom, p, n, t, cfg)))
            .collect();
        ns.iter()
            .zip(handles)
            .map(|(&n, h)| (n, h.join().expect("fit thread panicked")))
            .collect()
    })
}
