//! Line-delimited on-disk format (`.dr`) for demonstrations and executed
//! trajectories.
//!
//! The first line is a header object carrying the schema version, the kind
//! of stream, the jig registry reference (ordered id list), the sample rate
//! (demonstrations only), and free-form metadata. Every following line is
//! one record: a sample, a jig event (trajectories), or a relocation marker
//! (demonstrations). Floating-point numbers are written in decimal with 17
//! significant digits, which round-trips every finite binary64 value
//! bit-exactly; `load(save(x)) == x` down to the bits.
//!
//! ```text
//! {"schema":"dr/1","kind":"demonstration","sample_rate_hz":1.2e2,"jigs":["bottle_mounter"],"metadata":{}}
//! {"t":0.0e0,"p":[...],"q":[...],"g":6.0e1,"s":["unlocked"]}
//! {"rel":{"at":120,"ws":"workspace_2","p":[...],"q":[...]}}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jig::{JigError, JigRegistry};
use crate::model::{
    Demonstration, DemoPoint, GripperState, JigEvent, JigStateVector, ModelError, Pose,
    RelocationEvent, Trajectory, UNIT_NORM_TOLERANCE,
};
use crate::{Quat, Vec3};

pub const SCHEMA: &str = "dr/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported schema {found:?}, this build reads {SCHEMA:?}")]
    UnsupportedSchema { found: String },
    #[error("expected a {expected} stream, found {found:?}")]
    WrongKind { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Jig(#[from] JigError),
}

/// serde_json formatter that writes every float in decimal scientific
/// notation with 17 significant digits (1 + 16), enough for exact binary64
/// round-trips.
struct SigDigits17;

impl serde_json::ser::Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

fn write_json_line<T: Serialize>(out: &mut impl Write, value: &T) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(256);
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits17);
    value.serialize(&mut ser).map_err(|e| FormatError::Parse {
        line: 0,
        message: format!("serialization failed: {e}"),
    })?;
    buf.push(b'\n');
    out.write_all(&buf)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    schema: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_rate_hz: Option<f64>,
    jigs: Vec<String>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    t: f64,
    p: [f64; 3],
    q: [f64; 4],
    g: f64,
    s: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EventBody {
    t: f64,
    jig: String,
    cmd: String,
    p: [f64; 3],
    q: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct RelocationBody {
    at: usize,
    ws: String,
    p: [f64; 3],
    q: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BodyLine {
    Event { ev: EventBody },
    Relocation { rel: RelocationBody },
    Sample(SampleLine),
}

fn sample_line(point: &DemoPoint) -> SampleLine {
    let q = point.pose.orientation;
    SampleLine {
        t: point.t,
        p: point.pose.position.to_array(),
        q: [q.w, q.x, q.y, q.z],
        g: point.gripper.width_mm(),
        s: point.jig_state.iter().map(|(_, s)| s.to_string()).collect(),
    }
}

/// Rebuilds a pose from raw parts without renormalizing, so that values we
/// wrote come back bit-identical. Hand-edited non-canonical quaternions get
/// their sign flipped (exact) and anything beyond the norm tolerance is
/// rejected.
fn pose_from_raw(p: [f64; 3], q: [f64; 4], line: usize) -> Result<Pose, FormatError> {
    let quat = Quat {
        w: q[0],
        x: q[1],
        y: q[2],
        z: q[3],
    }
    .canonicalized();
    quat.validate_unit(UNIT_NORM_TOLERANCE)
        .map_err(|e| FormatError::Parse {
            line,
            message: e.to_string(),
        })?;
    Pose::new(Vec3::from_array(p), quat).map_err(|e| FormatError::Parse {
        line,
        message: e.to_string(),
    })
}

fn point_from_line(
    s: SampleLine,
    jigs: &[String],
    line: usize,
) -> Result<DemoPoint, FormatError> {
    if s.s.len() != jigs.len() {
        return Err(FormatError::Parse {
            line,
            message: format!(
                "record carries {} jig states but the header registers {} jigs",
                s.s.len(),
                jigs.len()
            ),
        });
    }
    Ok(DemoPoint {
        t: s.t,
        pose: pose_from_raw(s.p, s.q, line)?,
        gripper: GripperState::new(s.g).map_err(|e| FormatError::Parse {
            line,
            message: e.to_string(),
        })?,
        jig_state: JigStateVector::new(
            jigs.iter().cloned().zip(s.s).collect::<Vec<_>>(),
        )?,
    })
}

/// Checks that every jig id in the header is registered and every state name
/// appearing in the stream is declared by its definition.
fn validate_states(
    jigs: &[String],
    points: &[DemoPoint],
    registry: &JigRegistry,
) -> Result<(), FormatError> {
    for id in jigs {
        if registry.get(id).is_none() {
            return Err(JigError::UnknownJig { id: id.clone() }.into());
        }
    }
    for point in points {
        for (id, state) in point.jig_state.iter() {
            registry.validate_state(id, state)?;
        }
    }
    Ok(())
}

pub fn write_demonstration(
    out: &mut impl Write,
    demo: &Demonstration,
) -> Result<(), FormatError> {
    demo.validate()?;
    let header = HeaderLine {
        schema: SCHEMA.into(),
        kind: "demonstration".into(),
        sample_rate_hz: Some(demo.sample_rate_hz),
        jigs: demo.jig_ids(),
        metadata: demo.metadata.clone(),
    };
    write_json_line(out, &header)?;
    for point in &demo.points {
        write_json_line(out, &sample_line(point))?;
    }
    for rel in &demo.relocations {
        let q = rel.pose.orientation;
        write_json_line(
            out,
            &BodyLine::Relocation {
                rel: RelocationBody {
                    at: rel.at_index,
                    ws: rel.workspace.clone(),
                    p: rel.pose.position.to_array(),
                    q: [q.w, q.x, q.y, q.z],
                },
            },
        )?;
    }
    Ok(())
}

pub fn write_trajectory(out: &mut impl Write, traj: &Trajectory) -> Result<(), FormatError> {
    traj.validate()?;
    let header = HeaderLine {
        schema: SCHEMA.into(),
        kind: "trajectory".into(),
        sample_rate_hz: None,
        jigs: traj.jig_ids(),
        metadata: traj.metadata.clone(),
    };
    write_json_line(out, &header)?;
    for point in &traj.samples {
        write_json_line(out, &sample_line(point))?;
    }
    for ev in &traj.jig_events {
        let q = ev.pose.orientation;
        write_json_line(
            out,
            &BodyLine::Event {
                ev: EventBody {
                    t: ev.t,
                    jig: ev.jig_id.clone(),
                    cmd: ev.command.clone(),
                    p: ev.pose.position.to_array(),
                    q: [q.w, q.x, q.y, q.z],
                },
            },
        )?;
    }
    Ok(())
}

struct RawStream {
    header: HeaderLine,
    points: Vec<DemoPoint>,
    events: Vec<JigEvent>,
    relocations: Vec<RelocationEvent>,
}

fn read_stream(input: impl BufRead, expected_kind: &str) -> Result<RawStream, FormatError> {
    let mut lines = input.lines().enumerate();
    let header: HeaderLine = loop {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| FormatError::Parse {
                line: 1,
                message: "empty file, expected a header line".into(),
            })?;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            line: idx + 1,
            message: format!("invalid header: {e}"),
        })?;
    };
    if header.schema != SCHEMA {
        return Err(FormatError::UnsupportedSchema {
            found: header.schema,
        });
    }
    if header.kind != expected_kind {
        return Err(FormatError::WrongKind {
            expected: expected_kind.into(),
            found: header.kind,
        });
    }

    let mut points = Vec::new();
    let mut events = Vec::new();
    let mut relocations = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let body: BodyLine = serde_json::from_str(&line).map_err(|e| FormatError::Parse {
            line: line_no,
            message: format!("invalid record: {e}"),
        })?;
        match body {
            BodyLine::Sample(s) => points.push(point_from_line(s, &header.jigs, line_no)?),
            BodyLine::Event { ev } => events.push(JigEvent {
                t: ev.t,
                jig_id: ev.jig,
                command: ev.cmd,
                pose: pose_from_raw(ev.p, ev.q, line_no)?,
            }),
            BodyLine::Relocation { rel } => relocations.push(RelocationEvent {
                at_index: rel.at,
                workspace: rel.ws,
                pose: pose_from_raw(rel.p, rel.q, line_no)?,
            }),
        }
    }
    Ok(RawStream {
        header,
        points,
        events,
        relocations,
    })
}

pub fn read_demonstration(
    input: impl BufRead,
    registry: &JigRegistry,
) -> Result<Demonstration, FormatError> {
    let raw = read_stream(input, "demonstration")?;
    let sample_rate_hz = raw.header.sample_rate_hz.ok_or(FormatError::Parse {
        line: 1,
        message: "demonstration header is missing sample_rate_hz".into(),
    })?;
    validate_states(&raw.header.jigs, &raw.points, registry)?;
    let demo = Demonstration {
        points: raw.points,
        sample_rate_hz,
        metadata: raw.header.metadata,
        relocations: raw.relocations,
    };
    demo.validate()?;
    Ok(demo)
}

pub fn read_trajectory(
    input: impl BufRead,
    registry: &JigRegistry,
) -> Result<Trajectory, FormatError> {
    let raw = read_stream(input, "trajectory")?;
    validate_states(&raw.header.jigs, &raw.points, registry)?;
    let traj = Trajectory {
        samples: raw.points,
        jig_events: raw.events,
        metadata: raw.header.metadata,
    };
    traj.validate()?;
    Ok(traj)
}

pub fn save_demonstration(demo: &Demonstration, path: &Path) -> Result<(), FormatError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_demonstration(&mut out, demo)?;
    out.flush()?;
    Ok(())
}

pub fn load_demonstration(
    path: &Path,
    registry: &JigRegistry,
) -> Result<Demonstration, FormatError> {
    read_demonstration(BufReader::new(File::open(path)?), registry)
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<(), FormatError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_trajectory(&mut out, traj)?;
    out.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path, registry: &JigRegistry) -> Result<Trajectory, FormatError> {
    read_trajectory(BufReader::new(File::open(path)?), registry)
}
