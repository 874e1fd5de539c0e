//! Closed-loop exploration missions and their metrics.

mod report;
mod run;

pub use report::{HomingTrigger, MissionOutcome, MissionPhase, MissionReport, RepositionEvent, TickRecord};
pub use run::{explored_volume, run_mission, run_mission_in, trigger_homing, MissionObserver, SelectionSnapshot, TickView};

use serde::{Deserialize, Serialize};

use crate::apf::ApfConfig;
use crate::control::{EnvParams, ModelParams, NmpcConfig, RotorParams};
use crate::error::{invalid, Result};
use crate::frontier::ExplorationConfig;
use crate::map::OccupancyConfig;
use crate::planner::{PlannerConfig, RiskConfig};
use crate::world::{SensorSpec, TubeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    /// Seeds world generation and sensor noise.
    pub seed: u64,
    /// Exploration time budget (s); homing starts once it is exceeded.
    pub budget_s: f64,
    /// Speed limit (m/s).
    pub v_max: f64,
    pub loop_hz: f64,
    /// Extra time allowed for the return flight (s).
    pub homing_timeout_s: f64,
    /// Homing ends once the vehicle is this close to spawn (m).
    pub home_radius: f64,
    /// Mission aborts after this long without map growth or goal progress (s).
    pub stuck_timeout_s: f64,
    /// A goal is dropped after this long without getting closer (s).
    pub goal_timeout_s: f64,
    /// Waypoints closer than this are treated as reached (m).
    pub lookahead: f64,
    /// Yaw slew limit (rad/s).
    pub yaw_rate_max: f64,
    /// Plant integration steps per control tick.
    pub physics_substeps: u32,
    /// Planning attempts per tick before holding position.
    pub max_plan_attempts: u32,
    pub world: TubeParams,
    pub sensor: SensorSpec,
    pub map: OccupancyConfig,
    pub exploration: ExplorationConfig,
    pub risk: RiskConfig,
    pub planner: PlannerConfig,
    pub apf: ApfConfig,
    pub model: ModelParams<f64>,
    pub rotor: RotorParams<f64>,
    pub env: EnvParams,
    pub nmpc: NmpcConfig<f64>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget_s: 600.0,
            v_max: 1.5,
            loop_hz: 20.0,
            homing_timeout_s: 600.0,
            home_radius: 1.0,
            stuck_timeout_s: 30.0,
            goal_timeout_s: 8.0,
            lookahead: 1.5,
            yaw_rate_max: 0.5,
            physics_substeps: 10,
            max_plan_attempts: 8,
            world: TubeParams::default(),
            sensor: SensorSpec::default(),
            map: OccupancyConfig::default(),
            exploration: ExplorationConfig::default(),
            risk: RiskConfig::default(),
            planner: PlannerConfig {
                search_margin: 8,
                max_expansions: 400_000,
            },
            apf: ApfConfig::default(),
            model: ModelParams::default(),
            rotor: RotorParams::default(),
            env: EnvParams::default(),
            nmpc: NmpcConfig {
                v_max: Some(1.5),
                ..NmpcConfig::default()
            },
        }
    }
}

impl MissionConfig {
    /// Slower preset used for the cautious missions.
    pub fn slow_preset() -> Self {
        let mut c = Self::default();
        c.set_v_max(0.8);
        c
    }

    /// Sets the speed limit and the matching controller speed penalty.
    pub fn set_v_max(&mut self, v_max: f64) {
        self.v_max = v_max;
        self.nmpc.v_max = Some(v_max);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_s > 0.0) {
            return Err(invalid("budget_s", "must be positive"));
        }
        if !(self.v_max > 0.0) {
            return Err(invalid("v_max", "must be positive"));
        }
        if !(self.loop_hz > 0.0) {
            return Err(invalid("loop_hz", "must be positive"));
        }
        if !(self.homing_timeout_s >= 0.0) {
            return Err(invalid("homing_timeout_s", "must be non-negative"));
        }
        if !(self.home_radius > 0.0) {
            return Err(invalid("home_radius", "must be positive"));
        }
        if !(self.stuck_timeout_s > 0.0) {
            return Err(invalid("stuck_timeout_s", "must be positive"));
        }
        if !(self.goal_timeout_s > 0.0) {
            return Err(invalid("goal_timeout_s", "must be positive"));
        }
        if !(self.lookahead > 0.0) {
            return Err(invalid("lookahead", "must be positive"));
        }
        if !(self.yaw_rate_max > 0.0) {
            return Err(invalid("yaw_rate_max", "must be positive"));
        }
        if self.physics_substeps == 0 {
            return Err(invalid("physics_substeps", "must be at least 1"));
        }
        if self.max_plan_attempts == 0 {
            return Err(invalid("max_plan_attempts", "must be at least 1"));
        }
        let sections = [
            ("world", self.world.validate()),
            ("sensor", self.sensor.validate()),
            ("map", self.map.validate()),
            ("exploration", self.exploration.validate(self.sensor.max_range)),
            ("risk", self.risk.validate()),
            ("planner", self.planner.validate()),
            ("apf", self.apf.validate()),
            ("model", self.model.validate()),
            ("nmpc", self.nmpc.validate()),
        ];
        for (section, r) in sections {
            r.map_err(|e| e.in_section(section))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        MissionConfig::default().validate().unwrap();
        MissionConfig::slow_preset().validate().unwrap();
    }

    #[test]
    fn v_max_sets_controller_cap() {
        let c = MissionConfig::slow_preset();
        assert_eq!(c.v_max, 0.8);
        assert_eq!(c.nmpc.v_max, Some(0.8));
    }

    #[test]
    fn bad_budget_names_field() {
        let c = MissionConfig { budget_s: 0.0, ..MissionConfig::default() };
        assert!(c.validate().unwrap_err().to_string().contains("budget_s"));
        let mut c = MissionConfig::default();
        c.risk.c_occupied = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("`risk.c_occupied`"));
    }

    #[test]
    fn partial_config_fills_defaults_and_rejects_unknown_keys() {
        let c: MissionConfig = serde_json::from_str(r#"{"seed": 3, "risk": {"c_unknown": 3.0}}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.risk.c_unknown, 3.0);
        assert!(serde_json::from_str::<MissionConfig>(r#"{"sede": 3}"#).is_err());
    }
}
