//! File formats.
//!
//! - Dataset: CSV `fx,fy,fz,vx,vy,vz` plus a `<stem>.meta.json` sidecar with
//!   `{rho, mu, sigma, seed, support}`.
//! - Model: JSON, see [`ModelFile`].
//! - Trajectory: CSV `t,x,y,theta,vx,vy,omega,Fx,Fy,Fz` with physical `omega`.
//! - Stable-push sweep: CSV `cx,cy,sense,stable,margin`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::applications::sliding::Trajectory;
use crate::error::{invalid, Result};
use crate::poly_model::{ModelFile, ModelKind, PolyModel};
use crate::support_oracle::{DataPair, Dataset, DatasetMeta};
use crate::wrench_space::{GeneralizedLoad, GeneralizedVelocity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PairRow {
    fx: f64,
    fy: f64,
    fz: f64,
    vx: f64,
    vy: f64,
    vz: f64,
}

pub fn write_pairs<W: Write>(writer: W, pairs: &[DataPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in pairs {
        let (f, v) = (p.load.0, p.twist.0);
        w.serialize(PairRow {
            fx: f.x,
            fy: f.y,
            fz: f.z,
            vx: v.x,
            vy: v.y,
            vz: v.z,
        })?;
    }
    if pairs.is_empty() {
        w.write_record(["fx", "fy", "fz", "vx", "vy", "vz"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<DataPair>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut pairs = Vec::new();
    for row in r.deserialize() {
        let row: PairRow = row?;
        pairs.push(DataPair::new(
            GeneralizedLoad(Vector3::new(row.fx, row.fy, row.fz)),
            GeneralizedVelocity(Vector3::new(row.vx, row.vy, row.vz)),
        ));
    }
    Ok(pairs)
}

/// `data.csv -> data.meta.json`.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn write_dataset(csv_path: &Path, ds: &Dataset) -> Result<()> {
    write_pairs(BufWriter::new(File::create(csv_path)?), &ds.pairs)?;
    write_json(&metadata_path(csv_path), &ds.metadata)
}

/// Reads a dataset; without a sidecar the data is taken as sensor data with `rho = 1`.
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let pairs = read_pairs(BufReader::new(File::open(csv_path)?))?;
    let meta_path = metadata_path(csv_path);
    let metadata = if meta_path.exists() {
        read_json(&meta_path)?
    } else {
        DatasetMeta::sensor(1.0)
    };
    Ok(Dataset::new(pairs, metadata))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_model(path: &Path, model: &PolyModel, kind: Option<ModelKind>) -> Result<()> {
    write_json(path, &ModelFile::from_model(model, kind))
}

pub fn read_model(path: &Path) -> Result<(PolyModel, Option<ModelKind>)> {
    let file: ModelFile = read_json(path)?;
    let kind = file.kind;
    Ok((file.into_model()?, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    #[serde(rename = "Fx")]
    pub fx: f64,
    #[serde(rename = "Fy")]
    pub fy: f64,
    #[serde(rename = "Fz")]
    pub fz: f64,
}

pub fn trajectory_rows(trajectory: &Trajectory, rho: f64) -> Vec<TrajectoryRow> {
    trajectory
        .samples
        .iter()
        .zip(&trajectory.loads)
        .map(|(s, f)| TrajectoryRow {
            t: s.time,
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
            vx: s.twist.vx(),
            vy: s.twist.vy(),
            omega: s.twist.vz() / rho,
            fx: f.x,
            fy: f.y,
            fz: f.z,
        })
        .collect()
}

pub fn write_trajectory<W: Write>(writer: W, trajectory: &Trajectory, rho: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(invalid("rho must be positive"));
    }
    write_rows(writer, &trajectory_rows(trajectory, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableRow {
    pub cx: f64,
    pub cy: f64,
    pub sense: i8,
    pub stable: bool,
    pub margin: f64,
}

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}
