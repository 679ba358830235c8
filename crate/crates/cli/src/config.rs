//! Run configuration: a JSON file with optional blocks, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use arcsnake::arc_model::{ArcChain, RobotGeometry};
use arcsnake::locomotion_sim::{AnchorRule, PathAlignment, SimConfig};
use arcsnake::obstacle_gait::HoldRange;
use arcsnake::segmentation_fit::{default_fit_time, FitConfig, OptimizerKind, PhaseObjective};
use arcsnake::serpenoid::{Segmentation, SerpenoidParams};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "ARCSNAKE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "arcsnake_out";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotBlock {
    #[serde(rename = "L_all_m")]
    pub l_all_m: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub h_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SerpenoidBlock {
    pub alpha0_rad: Option<f64>,
    pub l_m: Option<f64>,
    pub omega_rad_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitBlock {
    pub bounds: Option<[f64; 2]>,
    pub optimizer: Option<String>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub grid_resolution_m: Option<f64>,
    pub restarts: Option<usize>,
    pub t_s: Option<f64>,
    /// `single`, `cycle_mean` or `cycle_max`.
    pub phase_objective: Option<String>,
    pub phases: Option<usize>,
    /// Skips fitting in the gait and simulate commands.
    pub lengths_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub dt_s: Option<f64>,
    pub duration_s: Option<f64>,
    pub anchor_rule: Option<String>,
    pub sample_spacing_m: Option<f64>,
    /// `head` or `tail`.
    pub alignment: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoldBlock {
    pub j: Option<usize>,
    pub k: Option<usize>,
    pub v_left_m_s: Option<f64>,
    pub v_right_m_s: Option<f64>,
    /// When set, the hold is followed by resetting every unit to its even spacing.
    pub reset_speed_m_s: Option<f64>,
    /// Starting arc angles, one per segment, at even spacing.
    pub initial_angles_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub robot: RobotBlock,
    pub serpenoid: SerpenoidBlock,
    pub fit: FitBlock,
    pub sim: SimBlock,
    pub hold: HoldBlock,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("malformed config {}: {e}", path.display())))
    }

    pub fn geometry(&self) -> Result<RobotGeometry, CliError> {
        let h = self
            .robot
            .h_m
            .ok_or_else(|| CliError::Validation("body width robot.h_m is required (--h)".into()))?;
        Ok(RobotGeometry::new(
            self.robot.l_all_m.unwrap_or(0.6),
            self.robot.n.unwrap_or(3),
            h,
        )?)
    }

    pub fn omega(&self) -> Option<f64> {
        self.serpenoid.omega_rad_s
    }

    /// Serpenoid parameters. Without a frequency the shape alone is used (`omega = 1`).
    pub fn serpenoid(&self) -> Result<SerpenoidParams, CliError> {
        Ok(SerpenoidParams::new(
            self.serpenoid.alpha0_rad.unwrap_or(0.7),
            self.serpenoid.l_m.unwrap_or(0.15),
            self.serpenoid.omega_rad_s.unwrap_or(1.0),
        )?)
    }

    pub fn require_omega(&self) -> Result<SerpenoidParams, CliError> {
        if self.omega().is_none() {
            return Err(CliError::Validation(
                "angular frequency serpenoid.omega_rad_s is required (--omega)".into(),
            ));
        }
        self.serpenoid()
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        let mut cfg = FitConfig::default();
        let f = &self.fit;
        if let Some([lo, hi]) = f.bounds {
            cfg.length_bounds = (lo, hi);
        }
        if let Some(name) = &f.optimizer {
            cfg.optimizer = match name.as_str() {
                "grid" => OptimizerKind::Grid,
                "nelder_mead" => OptimizerKind::NelderMead,
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown optimizer {other:?} (grid, nelder_mead)"
                    )))
                }
            };
        }
        if let Some(v) = f.samples {
            cfg.n_samples = v;
        }
        if let Some(v) = f.seed {
            cfg.random_seed = v;
        }
        if let Some(v) = f.grid_resolution_m {
            cfg.grid_resolution = v;
        }
        if let Some(v) = f.restarts {
            cfg.restarts = v;
        }
        let phases = f.phases.unwrap_or(16);
        cfg.phase_objective = match f.phase_objective.as_deref() {
            None | Some("single") => PhaseObjective::Single,
            Some("cycle_mean") => PhaseObjective::CycleMean { phases },
            Some("cycle_max") => PhaseObjective::CycleMax { phases },
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "unknown phase objective {other:?} (single, cycle_mean, cycle_max)"
                )))
            }
        };
        Ok(cfg)
    }

    /// Gait time the fit is made at.
    pub fn fit_time(&self, p: &SerpenoidParams, cfg: &FitConfig) -> Result<f64, CliError> {
        if let Some(t) = self.fit.t_s {
            return Ok(t);
        }
        match cfg.phase_objective {
            PhaseObjective::Single => Ok(default_fit_time(p)?),
            _ => Ok(0.0),
        }
    }

    pub fn fixed_segmentation(
        &self,
        geom: &RobotGeometry,
    ) -> Result<Option<Segmentation>, CliError> {
        match &self.fit.lengths_m {
            None => Ok(None),
            Some(v) => Ok(Some(Segmentation::new(geom, v.clone())?)),
        }
    }

    pub fn sim_config(&self, anchor_rule: AnchorRule) -> Result<SimConfig, CliError> {
        let s = &self.sim;
        if let Some(rule) = &s.anchor_rule {
            let wanted = match anchor_rule {
                AnchorRule::PathFollowing => "path_following",
                AnchorRule::PinnedHold => "pinned_hold",
            };
            if rule != wanted {
                return Err(CliError::Validation(format!(
                    "sim.anchor_rule {rule:?} does not match this command ({wanted})"
                )));
            }
        }
        let mut cfg = SimConfig::new(
            s.dt_s.unwrap_or(0.1),
            s.duration_s.unwrap_or(10.0),
            anchor_rule,
        );
        if let Some(v) = s.sample_spacing_m {
            cfg.sample_spacing = v;
        }
        cfg.alignment = match s.alignment.as_deref() {
            None | Some("head") => PathAlignment::Head,
            Some("tail") => PathAlignment::Tail,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "unknown alignment {other:?} (head, tail)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hold_range(&self, geom: &RobotGeometry) -> Result<HoldRange, CliError> {
        let n = geom.segment_count();
        let j = self.hold.j.unwrap_or(1);
        let k = self.hold.k.unwrap_or(n.saturating_sub(1).max(j + 1));
        Ok(HoldRange::new(geom, j, k)?)
    }

    /// Rates for the held units; the default slides the held section rearward at 5 mm/s.
    pub fn hold_rates(&self) -> (f64, f64) {
        (
            self.hold.v_left_m_s.unwrap_or(-0.005),
            self.hold.v_right_m_s.unwrap_or(0.005),
        )
    }

    /// Starting chain at even spacing. By default the held segments alternate +-0.9 rad
    /// and the rest are straight.
    pub fn initial_chain(
        &self,
        geom: &RobotGeometry,
        range: &HoldRange,
    ) -> Result<ArcChain, CliError> {
        let n = geom.segment_count();
        let angles = match &self.hold.initial_angles_rad {
            Some(a) => a.clone(),
            None => (1..=n)
                .map(|i| {
                    if range.held_segments().contains(&i) {
                        if (i - range.j()) % 2 == 1 {
                            0.9
                        } else {
                            -0.9
                        }
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let lengths = vec![geom.nominal_segment_length(); n];
        Ok(ArcChain::from_parts(geom, &lengths, &angles)?)
    }

    /// Output directory: flag, then environment, then config file, then the default.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
