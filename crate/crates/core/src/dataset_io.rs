//! Dataset files: a magic line, one line of JSON header, then the arrays as
//! little-endian `f64` in the order listed by the header.
//!
//! Every float of the dataset lives in the payload, so a round trip is
//! bit-exact. Complex values are stored as `(re, im)` pairs, vectors and
//! matrices row-major.

use crate::geometry::{MeshShape, SurfaceMesh};
use crate::spectral::{BoundaryDataset, Provenance};
use crate::{Error, Point, Result, CVec3, C64};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &str = "EMSOURCE-DATASET";
pub const SCHEMA_VERSION: u32 = 1;

/// One named array of the payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub name: String,
    pub len: usize,
}

/// Self-describing header: everything except the numeric payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub schema_version: u32,
    pub n_freq: usize,
    pub n_nodes: usize,
    pub mesh_shape: MeshShape,
    pub has_gradients: bool,
    pub provenance: Provenance,
    pub arrays: Vec<ArraySpec>,
}

impl DatasetHeader {
    pub fn payload_len(&self) -> usize {
        self.arrays.iter().map(|a| a.len).sum()
    }
}

fn layout(nf: usize, nn: usize, gradients: bool) -> Vec<ArraySpec> {
    let mut specs = vec![
        ("band_limit", 1),
        ("omegas", nf),
        ("omega_weights", nf),
        ("alpha", nn),
        ("mesh_nodes", 3 * nn),
        ("mesh_normals", 3 * nn),
        ("mesh_weights", nn),
        ("mesh_tangents", 6 * nn),
        ("tangential", 6 * nf * nn),
        ("absorbing", 6 * nf * nn),
    ];
    if gradients {
        specs.push(("gradients", 18 * nf * nn));
    }
    specs
        .into_iter()
        .map(|(name, len)| ArraySpec { name: name.into(), len })
        .collect()
}

fn header_of(ds: &BoundaryDataset) -> DatasetHeader {
    DatasetHeader {
        schema_version: SCHEMA_VERSION,
        n_freq: ds.n_freq(),
        n_nodes: ds.n_nodes(),
        mesh_shape: ds.mesh.shape(),
        has_gradients: ds.gradients.is_some(),
        provenance: ds.provenance.clone(),
        arrays: layout(ds.n_freq(), ds.n_nodes(), ds.gradients.is_some()),
    }
}

fn flatten(ds: &BoundaryDataset) -> Vec<f64> {
    let mut out = vec![ds.band_limit];
    out.extend(&ds.omegas);
    out.extend(&ds.omega_weights);
    out.extend(&ds.alpha);
    let push_pts = |out: &mut Vec<f64>, pts: &[Point]| {
        for p in pts {
            out.extend(p.iter());
        }
    };
    push_pts(&mut out, &ds.mesh.nodes);
    push_pts(&mut out, &ds.mesh.normals);
    out.extend(&ds.mesh.weights);
    for (a, b) in &ds.mesh.tangents {
        out.extend(a.iter().chain(b.iter()));
    }
    for arr in [&ds.tangential, &ds.absorbing] {
        for v in arr.iter().flatten() {
            for c in v.iter() {
                out.extend([c.re, c.im]);
            }
        }
    }
    if let Some(g) = &ds.gradients {
        for m in g.iter().flatten() {
            for j in 0..3 {
                for k in 0..3 {
                    out.extend([m[(j, k)].re, m[(j, k)].im]);
                }
            }
        }
    }
    out
}

pub fn write_dataset<W: Write>(ds: &BoundaryDataset, mut w: W) -> Result<()> {
    ds.validate()?;
    let header = header_of(ds);
    let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{json}")?;
    let data = flatten(ds);
    debug_assert_eq!(data.len(), header.payload_len());
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &BoundaryDataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(ds, BufWriter::new(File::create(path)?))
}

fn read_header_from<R: BufRead>(r: &mut R) -> Result<DatasetHeader> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Format(format!("not a dataset file (first line {:?})", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let header: DatasetHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("dataset header: {e}")))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "dataset schema version {} is not supported (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    if header.arrays != layout(header.n_freq, header.n_nodes, header.has_gradients) {
        return Err(Error::Format("dataset header lists an unexpected array layout".into()));
    }
    Ok(header)
}

/// Header and provenance only; the payload is not read.
pub fn read_header(path: impl AsRef<Path>) -> Result<DatasetHeader> {
    read_header_from(&mut BufReader::new(File::open(path)?))
}

pub fn read_dataset<R: Read>(r: R) -> Result<BoundaryDataset> {
    let mut r = BufReader::new(r);
    let header = read_header_from(&mut r)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expected = 8 * header.payload_len();
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "dataset payload has {} bytes, header requires {expected}",
            bytes.len()
        )));
    }
    let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
    let (nf, nn) = (header.n_freq, header.n_nodes);
    let band_limit = take(1)[0];
    let omegas = take(nf);
    let omega_weights = take(nf);
    let alpha = take(nn);
    let points = |v: Vec<f64>| -> Vec<Point> { v.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])).collect() };
    let nodes = points(take(3 * nn));
    let normals = points(take(3 * nn));
    let weights = take(nn);
    let tangents = take(6 * nn)
        .chunks_exact(6)
        .map(|c| (Point::new(c[0], c[1], c[2]), Point::new(c[3], c[4], c[5])))
        .collect();
    let traces = |v: Vec<f64>| -> Vec<Vec<CVec3>> {
        let vecs: Vec<CVec3> = v
            .chunks_exact(6)
            .map(|c| CVec3::new(C64::new(c[0], c[1]), C64::new(c[2], c[3]), C64::new(c[4], c[5])))
            .collect();
        vecs.chunks(nn.max(1)).map(|c| c.to_vec()).collect()
    };
    let tangential = if nn == 0 { vec![vec![]; nf] } else { traces(take(6 * nf * nn)) };
    let absorbing = if nn == 0 { vec![vec![]; nf] } else { traces(take(6 * nf * nn)) };
    let gradients = if header.has_gradients {
        let mats: Vec<Matrix3<C64>> = take(18 * nf * nn)
            .chunks_exact(18)
            .map(|c| Matrix3::from_fn(|j, k| C64::new(c[6 * j + 2 * k], c[6 * j + 2 * k + 1])))
            .collect();
        Some(if nn == 0 { vec![vec![]; nf] } else { mats.chunks(nn).map(|c| c.to_vec()).collect() })
    } else {
        None
    };
    let ds = BoundaryDataset {
        mesh: SurfaceMesh::from_parts(nodes, normals, weights, tangents, header.mesh_shape)?,
        band_limit,
        omegas,
        omega_weights,
        alpha,
        tangential,
        absorbing,
        gradients,
        provenance: header.provenance,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<BoundaryDataset> {
    read_dataset(File::open(path)?)
}
