//! Simulated plant: a velocity-limited end effector, a gripper, and the
//! registered jigs, integrated at a fixed step with optional latency,
//! actuation delay, and observation noise.
//!
//! Determinism contract: given the same config (including seed) and the same
//! command sequence, every observation and every recorded state is
//! bit-identical. To keep that promise specifiable, observation noise uses a
//! splitmix64 counter generator with the Box-Muller transform rather than a
//! library distribution:
//!
//! * splitmix64: `state += 0x9E3779B97F4A7C15`, then `z = state`,
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, output `z ^ (z >> 31)`
//!   (wrapping arithmetic, state seeded with the config seed).
//! * uniform: `(u64 >> 11) as f64 * 2^-53`, in `[0, 1)`.
//! * gaussian: exactly two uniforms per draw, `u1` mapped to `(0, 1]` as
//!   `1 - u`, result `sqrt(-2 ln u1) * cos(2 pi u2)` (the sine twin is
//!   discarded so each draw has a fixed cost of two counter steps).
//! * each `observe` call consumes exactly four gaussians (three position
//!   axes, one gripper), regardless of the configured stddevs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControlCommand;
use crate::jig::{JigError, JigRegistry, JigRuntime};
use crate::model::{GripperState, JigStateVector, ModelError, Pose};
use crate::{Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Integration step in seconds; the default matches the control rate.
    pub dt: f64,
    /// Linear speed saturation, m/s (Euclidean norm).
    pub v_max: f64,
    /// Angular speed saturation, rad/s (rotation-vector norm).
    pub w_max: f64,
    /// Gripper speed saturation, mm/s (absolute value).
    pub g_max: f64,
    /// Motion commands take effect this many ticks late.
    pub command_latency_ticks: u32,
    /// Jig commands take effect this many seconds after issue.
    pub jig_actuation_delay_s: f64,
    /// Observation noise stddev on each position axis, meters.
    pub noise_stddev_pos_m: f64,
    /// Observation noise stddev on the gripper width, millimeters.
    pub noise_stddev_gripper_mm: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 20.0,
            v_max: 0.25,
            w_max: 1.0,
            g_max: 50.0,
            command_latency_ticks: 0,
            jig_actuation_delay_s: 0.0,
            noise_stddev_pos_m: 0.0,
            noise_stddev_gripper_mm: 0.0,
            seed: 0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("g_max", self.g_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let non_negative = [
            ("jig_actuation_delay_s", self.jig_actuation_delay_s),
            ("noise_stddev_pos_m", self.noise_stddev_pos_m),
            ("noise_stddev_gripper_mm", self.noise_stddev_gripper_mm),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlantError::Config(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("plant config: {0}")]
    Config(String),
    #[error(transparent)]
    Jig(#[from] JigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("command contains non-finite values")]
    NonFiniteCommand,
}

/// What the controller sees each tick: a possibly noisy pose and gripper,
/// and the exact visible jig states.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pose: Pose,
    pub gripper: GripperState,
    pub jig_states: JigStateVector,
}

/// splitmix64 counter generator; see the module docs for the exact spec.
#[derive(Debug, Clone)]
struct NoiseGenerator {
    state: u64,
}

impl NoiseGenerator {
    fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1], keeps ln finite
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[derive(Debug, Clone, Copy)]
struct MotionPart {
    linear: Vec3,
    angular: Vec3,
    gripper_rate: f64,
}

impl MotionPart {
    fn zero() -> Self {
        Self {
            linear: Vec3::zeros(),
            angular: Vec3::zeros(),
            gripper_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    registry: JigRegistry,
    pose: Pose,
    gripper: GripperState,
    jigs: Vec<JigRuntime>,
    /// Motion commands awaiting their latency window, oldest first.
    motion_queue: VecDeque<MotionPart>,
    /// Jig commands awaiting actuation: (apply at, jig index, command).
    jig_queue: VecDeque<(f64, usize, String)>,
    sim_time: f64,
    rng: NoiseGenerator,
}

impl Plant {
    pub fn new(
        config: PlantConfig,
        registry: JigRegistry,
        start_pose: Pose,
        start_gripper: GripperState,
    ) -> Result<Self, PlantError> {
        config.validate()?;
        start_pose.validate()?;
        let rng = NoiseGenerator::new(config.seed);
        Ok(Self {
            jigs: registry.runtimes(0.0),
            config,
            registry,
            pose: start_pose,
            gripper: start_gripper,
            motion_queue: VecDeque::new(),
            jig_queue: VecDeque::new(),
            sim_time: 0.0,
            rng,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn registry(&self) -> &JigRegistry {
        &self.registry
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn true_pose(&self) -> Pose {
        self.pose
    }

    pub fn true_gripper(&self) -> GripperState {
        self.gripper
    }

    /// Exact visible jig states, registry order.
    pub fn jig_states(&self) -> JigStateVector {
        JigStateVector::new(
            self.jigs
                .iter()
                .map(|rt| (rt.jig_id().to_string(), rt.visible_state().to_string()))
                .collect(),
        )
        .expect("registry ids are unique")
    }

    /// Instantaneous exact repositioning (workspace relocation). Clears any
    /// in-flight motion so stale velocity does not bleed across workspaces.
    pub fn set_pose(&mut self, pose: Pose) -> Result<(), PlantError> {
        pose.validate()?;
        self.pose = pose;
        self.motion_queue.clear();
        Ok(())
    }

    /// Samples an observation. Position and gripper carry Gaussian noise per
    /// the configured stddevs (gripper readings clamp to the mechanical
    /// range); orientation and jig states are exact.
    pub fn observe(&mut self) -> Observation {
        let n = [
            self.rng.gaussian(),
            self.rng.gaussian(),
            self.rng.gaussian(),
            self.rng.gaussian(),
        ];
        let sp = self.config.noise_stddev_pos_m;
        let sg = self.config.noise_stddev_gripper_mm;
        let position = self.pose.position + Vec3::new(n[0] * sp, n[1] * sp, n[2] * sp);
        Observation {
            pose: Pose {
                position,
                orientation: self.pose.orientation,
            },
            gripper: GripperState::clamped(self.gripper.width_mm() + n[3] * sg),
            jig_states: self.jig_states(),
        }
    }

    /// Advances one step: applies the motion part (after latency) with
    /// per-channel saturation and explicit Euler integration, advances the
    /// clock, actuates queued jig commands whose delay has elapsed, then
    /// ticks every jig timer at the new time.
    pub fn apply_command(&mut self, cmd: &ControlCommand) -> Result<(), PlantError> {
        if !(cmd.linear_velocity.is_finite()
            && cmd.angular_velocity.is_finite()
            && cmd.gripper_rate_mm_s.is_finite())
        {
            return Err(PlantError::NonFiniteCommand);
        }

        for jc in &cmd.jig_commands {
            let idx = self
                .jigs
                .iter()
                .position(|rt| rt.jig_id() == jc.jig_id)
                .ok_or_else(|| JigError::UnknownJig {
                    id: jc.jig_id.clone(),
                })?;
            let def = self.registry.get(&jc.jig_id).expect("index resolved");
            if !def.commands.contains(&jc.command) {
                return Err(JigError::UnknownCommand {
                    jig: jc.jig_id.clone(),
                    command: jc.command.clone(),
                }
                .into());
            }
            self.jig_queue.push_back((
                self.sim_time + self.config.jig_actuation_delay_s,
                idx,
                jc.command.clone(),
            ));
        }

        self.motion_queue.push_back(MotionPart {
            linear: cmd.linear_velocity,
            angular: cmd.angular_velocity,
            gripper_rate: cmd.gripper_rate_mm_s,
        });
        let effective = if self.motion_queue.len() > self.config.command_latency_ticks as usize {
            self.motion_queue.pop_front().unwrap()
        } else {
            MotionPart::zero()
        };

        let dt = self.config.dt;
        let v = saturate_norm(effective.linear, self.config.v_max);
        self.pose.position += v * dt;
        let w = saturate_norm(effective.angular, self.config.w_max);
        if w.norm_squared() > 0.0 {
            self.pose.orientation = Quat::exp_vector(w * dt)
                .mul(&self.pose.orientation)
                .renormalized();
        }
        let g = effective
            .gripper_rate
            .clamp(-self.config.g_max, self.config.g_max);
        self.gripper = GripperState::clamped(self.gripper.width_mm() + g * dt);

        self.sim_time += dt;

        while let Some(&(apply_at, idx, _)) = self.jig_queue.front() {
            if apply_at > self.sim_time {
                break;
            }
            let (_, _, command) = self.jig_queue.pop_front().unwrap();
            self.jigs[idx].step(&command, apply_at)?;
        }
        for rt in &mut self.jigs {
            rt.tick(self.sim_time);
        }
        Ok(())
    }
}

fn saturate_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControlCommand;
    use crate::jig::{builtin_registry, JigCommand};
    use crate::math::Vector3;

    fn plant_with(config: PlantConfig) -> Plant {
        Plant::new(
            config,
            builtin_registry(),
            Pose::new(Vec3::zeros(), Quat::identity()).unwrap(),
            GripperState::new(50.0).unwrap(),
        )
        .unwrap()
    }

    fn motion(linear: Vec3) -> ControlCommand {
        ControlCommand {
            linear_velocity: linear,
            angular_velocity: Vec3::zeros(),
            gripper_rate_mm_s: 0.0,
            jig_commands: vec![],
        }
    }

    #[test]
    fn zero_command_only_advances_time() {
        let mut plant = plant_with(PlantConfig::default());
        let before = plant.true_pose();
        plant.apply_command(&ControlCommand::zero()).unwrap();
        assert_eq!(plant.true_pose(), before);
        assert_eq!(plant.sim_time(), 0.05);
    }

    #[test]
    fn linear_velocity_saturates_at_v_max() {
        let mut plant = plant_with(PlantConfig::default());
        plant
            .apply_command(&motion(Vector3::new(0.5, 0.0, 0.0)))
            .unwrap();
        // 0.5 m/s clipped to 0.25, integrated over 0.05 s.
        assert!((plant.true_pose().position.x - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn gripper_clamps_to_mechanical_range() {
        let mut plant = plant_with(PlantConfig::default());
        for _ in 0..60 {
            let cmd = ControlCommand {
                gripper_rate_mm_s: 1e3, // clipped to g_max = 50 mm/s
                ..ControlCommand::zero()
            };
            plant.apply_command(&cmd).unwrap();
        }
        assert_eq!(plant.true_gripper().width_mm(), 106.0);
    }

    #[test]
    fn jig_command_with_zero_delay_applies_this_step() {
        let mut plant = plant_with(PlantConfig::default());
        let cmd = ControlCommand {
            jig_commands: vec![JigCommand {
                jig_id: "bottle_mounter".into(),
                command: "toggle".into(),
            }],
            ..ControlCommand::zero()
        };
        plant.apply_command(&cmd).unwrap();
        assert_eq!(plant.jig_states().get("bottle_mounter"), Some("locked"));
    }

    #[test]
    fn jig_command_with_delay_applies_after_it_elapses() {
        let mut plant = plant_with(PlantConfig {
            jig_actuation_delay_s: 0.1,
            ..PlantConfig::default()
        });
        let cmd = ControlCommand {
            jig_commands: vec![JigCommand {
                jig_id: "bottle_mounter".into(),
                command: "toggle".into(),
            }],
            ..ControlCommand::zero()
        };
        plant.apply_command(&cmd).unwrap();
        assert_eq!(plant.jig_states().get("bottle_mounter"), Some("unlocked"));
        plant.apply_command(&ControlCommand::zero()).unwrap();
        // Two steps after issue: 0.10 s elapsed >= 0.1 s delay.
        assert_eq!(plant.jig_states().get("bottle_mounter"), Some("locked"));
    }

    #[test]
    fn ejector_timer_runs_on_the_plant_clock() {
        let mut plant = plant_with(PlantConfig::default());
        let cmd = ControlCommand {
            jig_commands: vec![JigCommand {
                jig_id: "tip_ejector".into(),
                command: "press".into(),
            }],
            ..ControlCommand::zero()
        };
        plant.apply_command(&cmd).unwrap();
        assert_eq!(plant.jig_states().get("tip_ejector"), Some("button_pressed"));
        // 3.0 s at dt = 0.05 is 60 further ticks; the press landed at t = 0.
        for _ in 0..59 {
            plant.apply_command(&ControlCommand::zero()).unwrap();
        }
        assert_eq!(plant.jig_states().get("tip_ejector"), Some("button_pressed"));
        plant.apply_command(&ControlCommand::zero()).unwrap();
        assert_eq!(plant.jig_states().get("tip_ejector"), Some("button_released"));
    }

    #[test]
    fn command_latency_delays_motion() {
        let mut plant = plant_with(PlantConfig {
            command_latency_ticks: 2,
            ..PlantConfig::default()
        });
        plant
            .apply_command(&motion(Vector3::new(0.1, 0.0, 0.0)))
            .unwrap();
        plant.apply_command(&ControlCommand::zero()).unwrap();
        assert_eq!(plant.true_pose().position.x, 0.0);
        plant.apply_command(&ControlCommand::zero()).unwrap();
        assert!((plant.true_pose().position.x - 0.005).abs() < 1e-15);
    }

    #[test]
    fn observation_noise_is_deterministic_and_has_the_right_scale() {
        let config = PlantConfig {
            noise_stddev_pos_m: 1e-4,
            seed: 7,
            ..PlantConfig::default()
        };
        let mut a = plant_with(config.clone());
        let mut b = plant_with(config);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let n = 20_000;
        for _ in 0..n {
            let oa = a.observe();
            let ob = b.observe();
            assert_eq!(oa, ob);
            let e = oa.pose.position.x;
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 3e-6, "mean {mean}");
        assert!((std - 1e-4).abs() < 5e-6, "std {std}");
        // Orientation stays exact.
        assert_eq!(a.observe().pose.orientation, a.true_pose().orientation);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let mut plant = plant_with(PlantConfig::default());
        let obs = plant.observe();
        assert_eq!(obs.pose, plant.true_pose());
        assert_eq!(obs.gripper, plant.true_gripper());
    }

    #[test]
    fn quaternion_norm_survives_a_million_steps() {
        let mut plant = plant_with(PlantConfig::default());
        let cmd = ControlCommand {
            angular_velocity: Vector3::new(0.3, 0.71, -0.22),
            ..ControlCommand::zero()
        };
        for _ in 0..1_000_000 {
            plant.apply_command(&cmd).unwrap();
        }
        assert!(plant.true_pose().orientation.unit_norm_error() < 1e-9);
    }

    #[test]
    fn identical_seeds_and_commands_reproduce_state_bit_exactly() {
        let config = PlantConfig {
            noise_stddev_pos_m: 1e-3,
            noise_stddev_gripper_mm: 0.1,
            seed: 99,
            ..PlantConfig::default()
        };
        let mut a = plant_with(config.clone());
        let mut b = plant_with(config);
        let cmd = ControlCommand {
            linear_velocity: Vector3::new(0.02, -0.01, 0.005),
            angular_velocity: Vector3::new(0.1, 0.0, -0.2),
            gripper_rate_mm_s: 3.0,
            jig_commands: vec![],
        };
        for _ in 0..500 {
            assert_eq!(a.observe(), b.observe());
            a.apply_command(&cmd).unwrap();
            b.apply_command(&cmd).unwrap();
        }
        assert_eq!(a.true_pose(), b.true_pose());
        assert_eq!(a.true_gripper(), b.true_gripper());
    }

    #[test]
    fn config_validation_rejects_nonpositive_saturations() {
        let bad = PlantConfig {
            v_max: 0.0,
            ..PlantConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
