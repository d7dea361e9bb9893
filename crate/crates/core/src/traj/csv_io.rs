//! Trajectory CSV: header `t,x,y,z,qw,qx,qy,qz`, one sample per row.

use super::{Pose, Quat, Sample, TrajError, Trajectory};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const HEADER: [&str; 8] = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"];

#[derive(Serialize, Deserialize)]
struct Row {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

fn parse_err(line: usize, msg: impl Into<String>) -> TrajError {
    TrajError::Parse { line, msg: msg.into() }
}

/// Parse a trajectory from CSV text. Non-uniform sampling is accepted.
pub fn read_csv<R: Read>(reader: R) -> Result<Trajectory, TrajError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "empty file"));
    }
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(parse_err(1, format!("expected header {}", HEADER.join(","))));
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: Row = rec.deserialize(None).map_err(|e| parse_err(line, e.to_string()))?;
        let q = Quat::new(row.qw, row.qx, row.qy, row.qz);
        if !(q.norm() > 0.0) || !q.norm().is_finite() {
            return Err(parse_err(line, "quaternion has zero or non-finite norm"));
        }
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if !(row.t > prev) {
                return Err(TrajError::NonMonotoneTime { line });
            }
        }
        samples.push(Sample { t: row.t, pose: Pose::new([row.x, row.y, row.z], q) });
    }
    Trajectory::new(samples)
}

pub fn write_csv<W: Write>(traj: &Trajectory, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for s in traj.samples() {
        let p = s.pose.position;
        let q = s.pose.orientation;
        w.serialize(Row { t: s.t, x: p[0], y: p[1], z: p[2], qw: q.w, qx: q.x, qy: q.y, qz: q.z })?;
    }
    if traj.is_empty() {
        w.write_record(HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<Trajectory, TrajError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|source| TrajError::Io { path: path.display().to_string(), source })?;
    read_csv(std::io::BufReader::new(file))
}

pub fn export_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), TrajError> {
    let path = path.as_ref();
    let io_err = |source| TrajError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(traj, std::io::BufWriter::new(file)).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(source),
        other => TrajError::Parse { line: 0, msg: format!("{other:?}") },
    })
}
