//! Data pipelines: comet orbital elements, DTI eigenvector files, JSONL
//! point sets and synthetic mixtures.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langevin::{ml_sample, MlParams};
use crate::stiefel::{validate, StiefelPoint};

/// Orbit orientation angles, in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub name: Option<String>,
    /// Inclination `i`.
    pub inclination: f64,
    /// Longitude of the ascending node `Ω`.
    pub node: f64,
    /// Argument of perihelion `ω`.
    pub peri: f64,
}

/// Below this `r²` the orbit normal is undefined.
const DEGENERATE_R2: f64 = 1e-12;

/// `[x1 x2]`: the perihelion direction and the unit normal of the orbit.
///
/// With `sin θ = sin i sin ω` and `L = Ω + atan2(sin ω cos i, cos ω)`,
/// `x1 = (cos θ cos L, cos θ sin L, sin θ)` and
/// `x2 = (sin θ sin Ω, -sin θ cos Ω, -cos θ sin(Ω - L)) / r`.
pub fn neo_to_stiefel(el: &OrbitalElements) -> Result<StiefelPoint> {
    let (i, node, w) = (el.inclination, el.node, el.peri);
    if !(i.is_finite() && node.is_finite() && w.is_finite()) {
        return Err(Error::Domain(format!("non-finite orbital angles {el:?}")));
    }
    let theta = (i.sin() * w.sin()).clamp(-1.0, 1.0).asin();
    let l = node + (w.sin() * i.cos()).atan2(w.cos());
    let (st, ct) = theta.sin_cos();
    let r2 = st * st + ct * ct * (node - l).sin().powi(2);
    if r2 <= DEGENERATE_R2 {
        return Err(Error::DegenerateOrbit { r2 });
    }
    let r = r2.sqrt();
    let x = DMatrix::from_column_slice(
        3,
        2,
        &[
            ct * l.cos(),
            ct * l.sin(),
            st,
            st * node.sin() / r,
            -st * node.cos() / r,
            -ct * (node - l).sin() / r,
        ],
    );
    validate(x)
}

#[derive(Deserialize)]
struct NeoRow {
    name: String,
    i_deg: f64,
    node_deg: f64,
    peri_deg: f64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn check_header(rdr: &mut csv::Reader<File>, want: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if got != want {
        return Err(Error::Parse { line: 1, message: format!("expected header {}, got {}", want.join(","), got.join(",")) });
    }
    Ok(())
}

/// Reads `name,i_deg,node_deg,peri_deg` rows (angles in degrees).
pub fn load_neo_csv(path: &Path) -> Result<Vec<OrbitalElements>> {
    let mut rdr = csv_reader(path)?;
    check_header(&mut rdr, &["name", "i_deg", "node_deg", "peri_deg"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<NeoRow>() {
        let row = row?;
        out.push(OrbitalElements {
            name: (!row.name.is_empty()).then_some(row.name),
            inclination: row.i_deg.to_radians(),
            node: row.node_deg.to_radians(),
            peri: row.peri_deg.to_radians(),
        });
    }
    Ok(out)
}

/// One voxel's two leading eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoxelRecord {
    pub x: i64,
    pub y: i64,
    pub z: i64,
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

#[derive(Deserialize)]
struct DtiRow {
    x: i64,
    y: i64,
    z: i64,
    e1x: f64,
    e1y: f64,
    e1z: f64,
    e2x: f64,
    e2y: f64,
    e2z: f64,
}

/// Correction beyond which a loaded voxel is reported.
pub const DTI_WARN_CORRECTION: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct DtiData {
    /// Records after re-orthonormalization.
    pub records: Vec<VoxelRecord>,
    pub points: Vec<StiefelPoint>,
    /// Largest entrywise change made by re-orthonormalization.
    pub max_correction: f64,
    /// `(line, correction)` for rows corrected by more than [`DTI_WARN_CORRECTION`].
    pub warnings: Vec<(usize, f64)>,
}

/// Reads `x,y,z,e1x,e1y,e1z,e2x,e2y,e2z` rows; `E1` is normalized and `E2`
/// orthonormalized against it.
pub fn load_dti_csv(path: &Path) -> Result<DtiData> {
    let mut rdr = csv_reader(path)?;
    check_header(&mut rdr, &["x", "y", "z", "e1x", "e1y", "e1z", "e2x", "e2y", "e2z"])?;
    let mut data = DtiData { records: Vec::new(), points: Vec::new(), max_correction: 0.0, warnings: Vec::new() };
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: DtiRow = rec.deserialize(Some(&headers))?;
        let raw1 = Vector3::new(row.e1x, row.e1y, row.e1z);
        let raw2 = Vector3::new(row.e2x, row.e2y, row.e2z);
        let n1 = raw1.norm();
        if !(n1 > 1e-8) || !n1.is_finite() {
            return Err(Error::Parse { line, message: "first eigenvector has zero or invalid length".into() });
        }
        let e1 = raw1 / n1;
        let mut e2 = raw2 - e1 * e1.dot(&raw2);
        let n2 = e2.norm();
        if !(n2 > 1e-8) || !n2.is_finite() {
            return Err(Error::Parse { line, message: "eigenvectors are parallel or invalid".into() });
        }
        e2 /= n2;
        let corr = (e1 - raw1).amax().max((e2 - raw2).amax());
        data.max_correction = data.max_correction.max(corr);
        if corr > DTI_WARN_CORRECTION {
            data.warnings.push((line, corr));
        }
        let x = DMatrix::from_column_slice(3, 2, &[e1.x, e1.y, e1.z, e2.x, e2.y, e2.z]);
        data.points.push(validate(x)?);
        data.records.push(VoxelRecord { x: row.x, y: row.y, z: row.z, e1: e1.into(), e2: e2.into() });
    }
    Ok(data)
}

/// `x` in scientific notation with 17 significant digits (exact round trip).
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no infinities; callers only pass finite values
        "null".into()
    }
}

pub(crate) fn fmt17_list(xs: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = xs.into_iter().map(fmt17).collect();
    format!("[{}]", parts.join(","))
}

/// Row-major entries of a matrix.
pub fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = x.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| x[(i, j)])).collect()
}

#[derive(Deserialize)]
struct PointLine {
    n: usize,
    p: usize,
    x: Vec<f64>,
    #[serde(default)]
    label: Option<usize>,
}

/// Writes one JSON object per point: `{"n":..,"p":..,"x":[row-major],"label":..}`.
pub fn write_points_jsonl(path: &Path, points: &[StiefelPoint], labels: Option<&[usize]>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, pt) in points.iter().enumerate() {
        let label = labels.map(|l| format!(",\"label\":{}", l[k])).unwrap_or_default();
        writeln!(w, "{{\"n\":{},\"p\":{},\"x\":{}{label}}}", pt.n(), pt.p(), fmt17_list(row_major(pt.matrix())))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSONL point file; labels are returned when every line has one.
pub fn read_points_jsonl(path: &Path) -> Result<(Vec<StiefelPoint>, Option<Vec<usize>>)> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PointLine =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?;
        if rec.x.len() != rec.n * rec.p {
            return Err(Error::Parse { line: k + 1, message: format!("expected {} entries", rec.n * rec.p) });
        }
        let x = DMatrix::from_row_slice(rec.n, rec.p, &rec.x);
        points.push(validate(x).map_err(|e| Error::Parse { line: k + 1, message: e.to_string() })?);
        labels.push(rec.label);
    }
    let labels = if !labels.is_empty() && labels.iter().all(Option::is_some) {
        Some(labels.into_iter().map(Option::unwrap).collect())
    } else {
        None
    };
    Ok((points, labels))
}

/// Draws `n` labelled points: `z_i ~ Categorical(π)`, `X_i ~ ML(θ_{z_i})`.
/// Labels are 0-based.
pub fn simulate_mixture<R: Rng + ?Sized>(
    params: &[MlParams],
    pi: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<(Vec<StiefelPoint>, Vec<usize>)> {
    if params.is_empty() || params.len() != pi.len() {
        return Err(Error::Shape { expected: format!("{} weights", params.len()), got: format!("{}", pi.len()) });
    }
    let shape = (params[0].n(), params[0].p());
    if params.iter().any(|p| (p.n(), p.p()) != shape) {
        return Err(Error::Domain("components live on different Stiefel manifolds".into()));
    }
    let cat = WeightedIndex::new(pi).map_err(|e| Error::Domain(format!("mixture weights: {e}")))?;
    let mut data = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = cat.sample(rng);
        data.push(ml_sample(&params[c], rng));
        labels.push(c);
    }
    Ok((data, labels))
}

/// Synthetic benchmark mixtures on `V_{3,2}`.
pub mod scenarios {
    use super::*;

    fn frame(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        let r = nalgebra::Rotation3::from_euler_angles(a, b, c);
        DMatrix::from_iterator(3, 3, r.matrix().iter().copied()).columns(0, 2).into_owned()
    }

    fn component(frame: DMatrix<f64>, d: [f64; 2]) -> MlParams {
        let f = frame * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.to_vec()));
        MlParams::from_natural(&f).expect("well-posed scenario parameters")
    }

    /// Three components with equal weights (the `N = 400` scenario).
    pub fn three_clusters() -> (Vec<MlParams>, Vec<f64>) {
        let params = vec![
            component(frame(0.0, 0.0, 0.0), [12.0, 6.0]),
            component(frame(1.9, 0.4, 0.9), [10.0, 7.0]),
            component(frame(-0.8, 1.7, -2.3), [14.0, 5.0]),
        ];
        (params, vec![1.0 / 3.0; 3])
    }

    /// Four components with equal weights (the `N = 500` scenario).
    pub fn four_clusters() -> (Vec<MlParams>, Vec<f64>) {
        let (mut params, _) = three_clusters();
        params.push(component(frame(2.6, -1.2, 2.0), [8.0, 5.0]));
        (params, vec![0.25; 4])
    }
}
