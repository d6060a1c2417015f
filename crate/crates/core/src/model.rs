//! Core data model: poses, gripper state, jig state vectors, demonstrations,
//! and executed trajectories.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::QuaternionError;
use crate::{Quat, Vec3};

/// Capture rate of the reference recording pipeline.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 120.0;
/// Mechanical gripper range in millimeters.
pub const GRIPPER_MIN_MM: f64 = 0.0;
pub const GRIPPER_MAX_MM: f64 = 106.0;
/// Demonstration recordings come from a hand-held interface that only opens
/// this far, so loaded demonstrations are validated against it.
pub const DEMO_GRIPPER_MAX_MM: f64 = 80.0;
/// Orientation unit-norm tolerance applied when loading from disk.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("demonstration must contain at least one point")]
    Empty,
    #[error("timestamp at index {index} is {t}, must be non-negative")]
    NegativeTime { index: usize, t: f64 },
    #[error("timestamps must be strictly increasing: t[{index}] = {t} after {prev}")]
    NonMonotonicTime { index: usize, t: f64, prev: f64 },
    #[error("{what} must be finite")]
    NonFinite { what: String },
    #[error("gripper width {width} mm outside [{min}, {max}] mm ({context})")]
    GripperRange {
        width: f64,
        min: f64,
        max: f64,
        context: String,
    },
    #[error(transparent)]
    Quaternion(#[from] QuaternionError),
    #[error("jig state vector at index {index} does not match the first point's jig ids")]
    InconsistentJigIds { index: usize },
    #[error("duplicate jig id {id:?} in state vector")]
    DuplicateJigId { id: String },
    #[error("sample rate {rate} Hz is not a positive finite number")]
    BadSampleRate { rate: f64 },
    #[error("relocation index {at_index} out of range (demonstration has {len} points)")]
    RelocationIndex { at_index: usize, len: usize },
    #[error("relocation indices must be strictly increasing")]
    RelocationOrder,
    #[error("jig event at t = {t} outside sample range [{first}, {last}]")]
    EventOutOfRange { t: f64, first: f64, last: f64 },
}

/// End-effector pose: position in meters plus a unit orientation quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Result<Self, ModelError> {
        if !position.is_finite() {
            return Err(ModelError::NonFinite {
                what: "pose position".into(),
            });
        }
        Ok(Self {
            position,
            orientation,
        })
    }

    /// Builds from raw components, normalizing the quaternion. For loading
    /// already-normalized data verbatim use [`Pose::validate`] instead.
    pub fn from_parts(position: [f64; 3], orientation_wxyz: [f64; 4]) -> Result<Self, ModelError> {
        let [w, x, y, z] = orientation_wxyz;
        let q = Quat::try_new_unit(w, x, y, z)?;
        Self::new(Vec3::from_array(position), q)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.position.is_finite() {
            return Err(ModelError::NonFinite {
                what: "pose position".into(),
            });
        }
        self.orientation.validate_unit(UNIT_NORM_TOLERANCE)?;
        Ok(())
    }

    /// Interpolates between two poses: linear in position, spherical in
    /// orientation. Exact at `u = 0` and `u = 1`.
    pub fn interpolate(&self, other: &Self, u: f64) -> Self {
        Self {
            position: self.position.lerp(&other.position, u),
            orientation: self.orientation.slerp(&other.orientation, u),
        }
    }
}

/// Gripper opening in millimeters, within the mechanical range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    width_mm: f64,
}

impl GripperState {
    pub fn new(width_mm: f64) -> Result<Self, ModelError> {
        if !width_mm.is_finite() {
            return Err(ModelError::NonFinite {
                what: "gripper width".into(),
            });
        }
        if !(GRIPPER_MIN_MM..=GRIPPER_MAX_MM).contains(&width_mm) {
            return Err(ModelError::GripperRange {
                width: width_mm,
                min: GRIPPER_MIN_MM,
                max: GRIPPER_MAX_MM,
                context: "mechanical range".into(),
            });
        }
        Ok(Self { width_mm })
    }

    /// Clamps into the mechanical range; used by the plant integrator.
    pub fn clamped(width_mm: f64) -> Self {
        Self {
            width_mm: width_mm.clamp(GRIPPER_MIN_MM, GRIPPER_MAX_MM),
        }
    }

    pub fn width_mm(&self) -> f64 {
        self.width_mm
    }

    pub fn lerp(&self, other: &Self, u: f64) -> Self {
        if u == 0.0 {
            return *self;
        }
        if u == 1.0 {
            return *other;
        }
        Self {
            width_mm: self.width_mm + (other.width_mm - self.width_mm) * u,
        }
    }
}

/// Discrete state of every registered jig, as `(jig id, state name)` pairs in
/// registry order.
///
/// Order is part of the representation (it mirrors the registry and the
/// on-disk column order), so equality is order-sensitive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JigStateVector {
    entries: Vec<(String, String)>,
}

impl JigStateVector {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.clone()) {
                return Err(ModelError::DuplicateJigId { id: id.clone() });
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn get(&self, jig_id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(id, _)| id == jig_id)
            .map(|(_, s)| s.as_str())
    }

    /// Replaces the state of an existing entry; `false` if the id is unknown.
    pub fn set(&mut self, jig_id: &str, state: impl Into<String>) -> bool {
        for (id, s) in &mut self.entries {
            if id == jig_id {
                *s = state.into();
                return true;
            }
        }
        false
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(id, s)| (id.as_str(), s.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn same_ids(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, _), (b, _))| a == b)
    }
}

/// One synchronized sample: timestamp, pose, gripper, and jig states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPoint {
    pub t: f64,
    pub pose: Pose,
    pub gripper: GripperState,
    pub jig_state: JigStateVector,
}

/// Instantaneous workspace change: when a replay's target index reaches
/// `at_index`, the executing plant is repositioned to `pose` exactly
/// (modeling base navigation between workspaces, which is out of scope for
/// the arm controller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelocationEvent {
    pub at_index: usize,
    pub workspace: String,
    pub pose: Pose,
}

/// A recorded demonstration: a dense, uniformly captured sample stream plus
/// bookkeeping metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub points: Vec<DemoPoint>,
    pub sample_rate_hz: f64,
    pub metadata: BTreeMap<String, String>,
    pub relocations: Vec<RelocationEvent>,
}

impl Demonstration {
    pub fn new(points: Vec<DemoPoint>, sample_rate_hz: f64) -> Result<Self, ModelError> {
        let demo = Self {
            points,
            sample_rate_hz,
            metadata: BTreeMap::new(),
            relocations: Vec::new(),
        };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(ModelError::BadSampleRate {
                rate: self.sample_rate_hz,
            });
        }
        validate_points(&self.points, DEMO_GRIPPER_MAX_MM, "demonstration recording")?;
        let mut prev: Option<usize> = None;
        for rel in &self.relocations {
            if rel.at_index >= self.points.len() {
                return Err(ModelError::RelocationIndex {
                    at_index: rel.at_index,
                    len: self.points.len(),
                });
            }
            if let Some(p) = prev {
                if rel.at_index <= p {
                    return Err(ModelError::RelocationOrder);
                }
            }
            prev = Some(rel.at_index);
            rel.pose.validate()?;
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(f), Some(l)) => l.t - f.t,
            _ => 0.0,
        }
    }

    /// Jig ids in registry order, taken from the first point.
    pub fn jig_ids(&self) -> Vec<String> {
        self.points
            .first()
            .map(|p| p.jig_state.ids().map(str::to_owned).collect())
            .unwrap_or_default()
    }
}

/// Command issued to a jig during execution, with the end-effector pose at
/// the moment of issue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JigEvent {
    pub t: f64,
    pub jig_id: String,
    pub command: String,
    pub pose: Pose,
}

/// An executed replay: the plant's sampled state stream plus the jig
/// commands that were issued along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<DemoPoint>,
    pub jig_events: Vec<JigEvent>,
    pub metadata: BTreeMap<String, String>,
}

impl Trajectory {
    pub fn new(samples: Vec<DemoPoint>, jig_events: Vec<JigEvent>) -> Result<Self, ModelError> {
        let traj = Self {
            samples,
            jig_events,
            metadata: BTreeMap::new(),
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        validate_points(&self.samples, GRIPPER_MAX_MM, "executed trajectory")?;
        let first = self.samples.first().map(|p| p.t).unwrap_or(0.0);
        let last = self.samples.last().map(|p| p.t).unwrap_or(0.0);
        for ev in &self.jig_events {
            if ev.t < first || ev.t > last {
                return Err(ModelError::EventOutOfRange {
                    t: ev.t,
                    first,
                    last,
                });
            }
            ev.pose.validate()?;
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(f), Some(l)) => l.t - f.t,
            _ => 0.0,
        }
    }

    pub fn jig_ids(&self) -> Vec<String> {
        self.samples
            .first()
            .map(|p| p.jig_state.ids().map(str::to_owned).collect())
            .unwrap_or_default()
    }
}

fn validate_points(
    points: &[DemoPoint],
    gripper_max: f64,
    context: &str,
) -> Result<(), ModelError> {
    if points.is_empty() {
        return Err(ModelError::Empty);
    }
    let first_jigs = &points[0].jig_state;
    let mut prev_t = f64::NEG_INFINITY;
    for (index, p) in points.iter().enumerate() {
        if !p.t.is_finite() || p.t < 0.0 {
            return Err(ModelError::NegativeTime { index, t: p.t });
        }
        if p.t <= prev_t {
            return Err(ModelError::NonMonotonicTime {
                index,
                t: p.t,
                prev: prev_t,
            });
        }
        prev_t = p.t;
        p.pose.validate()?;
        let w = p.gripper.width_mm();
        if !(GRIPPER_MIN_MM..=gripper_max).contains(&w) {
            return Err(ModelError::GripperRange {
                width: w,
                min: GRIPPER_MIN_MM,
                max: gripper_max,
                context: context.into(),
            });
        }
        if !p.jig_state.same_ids(first_jigs) {
            return Err(ModelError::InconsistentJigIds { index });
        }
    }
    Ok(())
}

/// Resamples a demonstration onto a uniform grid at `rate_hz`.
///
/// Positions and gripper widths interpolate linearly, orientations
/// spherically, and jig states hold the value of the latest original sample
/// at or before each grid time. Both endpoints are preserved exactly: the
/// grid starts at the first timestamp, and if `duration * rate` is not
/// integral a final sample at the last timestamp is appended.
pub fn resample(demo: &Demonstration, rate_hz: f64) -> Result<Demonstration, ModelError> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(ModelError::BadSampleRate { rate: rate_hz });
    }
    demo.validate()?;
    let t0 = demo.points[0].t;
    let t_last = demo.points[demo.points.len() - 1].t;
    let duration = t_last - t0;
    let steps = (duration * rate_hz + 1e-9).floor() as usize;

    let mut points = Vec::with_capacity(steps + 2);
    for k in 0..=steps {
        let t = t0 + k as f64 / rate_hz;
        points.push(sample_at(demo, t.min(t_last)));
    }
    if points.last().map(|p| p.t) != Some(t_last) {
        points.push(demo.points[demo.points.len() - 1].clone());
    }

    let mut relocations = Vec::with_capacity(demo.relocations.len());
    for rel in &demo.relocations {
        let t_rel = demo.points[rel.at_index].t;
        let at_index = points.partition_point(|p| p.t < t_rel);
        if at_index < points.len() {
            relocations.push(RelocationEvent {
                at_index,
                ..rel.clone()
            });
        }
    }

    let mut out = Demonstration::new(points, rate_hz)?;
    out.metadata = demo.metadata.clone();
    out.relocations = relocations;
    out.validate()?;
    Ok(out)
}

/// Interpolated demonstration state at time `t` (clamped to the sample range).
fn sample_at(demo: &Demonstration, t: f64) -> DemoPoint {
    let points = &demo.points;
    // Rightmost original sample with timestamp <= t.
    let i = points.partition_point(|p| p.t <= t).saturating_sub(1);
    let left = &points[i];
    if t == left.t || i + 1 == points.len() {
        let mut p = left.clone();
        p.t = t;
        return p;
    }
    let right = &points[i + 1];
    let u = (t - left.t) / (right.t - left.t);
    DemoPoint {
        t,
        pose: left.pose.interpolate(&right.pose, u),
        gripper: left.gripper.lerp(&right.gripper, u),
        jig_state: left.jig_state.clone(),
    }
}
