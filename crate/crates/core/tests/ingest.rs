use std::io::Write;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiefelmix::ingest::*;
use stiefelmix::stiefel::max_ortho_deviation;
use stiefelmix::Error;

fn elements(i: f64, node: f64, peri: f64) -> OrbitalElements {
    OrbitalElements { name: None, inclination: i.to_radians(), node: node.to_radians(), peri: peri.to_radians() }
}

/// Perihelion direction by composing rotations, and the orbit normal.
fn rotation_oracle(el: &OrbitalElements) -> (Vector3<f64>, Vector3<f64>) {
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), el.node)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), el.inclination)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), el.peri);
    (r * Vector3::x(), r * Vector3::z())
}

fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
    path
}

#[test]
fn polar_orbit_worked_example() {
    let x = neo_to_stiefel(&elements(90.0, 0.0, 45.0)).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let want = [h, 0.0, h, 0.0, -1.0, 0.0];
    for (g, w) in x.matrix().iter().zip(want) {
        assert!((g - w).abs() < 1e-15, "{g} vs {w}");
    }
}

#[test]
fn transform_matches_rotation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let el = elements(rng.random_range(1.0..179.0), rng.random_range(0.0..360.0), rng.random_range(0.0..360.0));
        let x = neo_to_stiefel(&el).unwrap();
        let m = x.matrix();
        assert!(max_ortho_deviation(m) < 1e-12);
        let (peri, normal) = rotation_oracle(&el);
        for k in 0..3 {
            assert!((m[(k, 0)] - peri[k]).abs() < 1e-12);
        }
        let x2 = Vector3::new(m[(0, 1)], m[(1, 1)], m[(2, 1)]);
        assert!((x2.dot(&normal).abs() - 1.0).abs() < 1e-12);
        let node_dir = Vector3::new(el.node.cos(), el.node.sin(), 0.0);
        assert!(x2.dot(&node_dir).abs() < 1e-12);
    }
}

#[test]
fn degenerate_orbit_is_rejected() {
    assert!(matches!(neo_to_stiefel(&elements(0.0, 30.0, 0.0)), Err(Error::DegenerateOrbit { .. })));
    assert!(neo_to_stiefel(&OrbitalElements { name: None, inclination: f64::NAN, node: 0.0, peri: 0.0 }).is_err());
}

#[test]
fn neo_csv_parsing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_file(&dir, "empty.csv", "name,i_deg,node_deg,peri_deg\n");
    assert!(load_neo_csv(&empty).unwrap().is_empty());

    let bad = write_file(&dir, "bad.csv", "name,i_deg,node_deg,peri_deg\nA,10,20,30\nB,ten,20,30\n");
    match load_neo_csv(&bad) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let header = write_file(&dir, "header.csv", "name,inc,node,peri\nA,1,2,3\n");
    assert!(matches!(load_neo_csv(&header), Err(Error::Parse { line: 1, .. })));
    assert!(matches!(load_neo_csv(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}

#[test]
fn five_row_golden_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_file(
        &dir,
        "neo.csv",
        "name,i_deg,node_deg,peri_deg\n\
         1P/Halley,162.26,58.42,111.33\n\
         2P/Encke,11.78,334.57,186.55\n\
         C/polar,90,0,45\n\
         D/low,5.5,120,300\n\
         E/retro,140.1,250.25,10.5\n",
    );
    let els = load_neo_csv(&csv).unwrap();
    assert_eq!(els.len(), 5);
    assert_eq!(els[0].name.as_deref(), Some("1P/Halley"));
    assert_eq!(els[2].inclination, 90f64.to_radians());
    let pts: Vec<_> = els.iter().map(|e| neo_to_stiefel(e).unwrap()).collect();
    let out = dir.path().join("neo.jsonl");
    write_points_jsonl(&out, &pts, None).unwrap();
    let (back, labels) = read_points_jsonl(&out).unwrap();
    assert!(labels.is_none());
    // 17 significant digits round-trip every f64 exactly
    assert_eq!(back, pts);
    // golden value: polar orbit row
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((back[2].matrix()[(0, 0)] - h).abs() < 1e-15);
}

#[test]
fn dti_rows_are_reorthonormalized() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(
        &dir,
        "dti.csv",
        "x,y,z,e1x,e1y,e1z,e2x,e2y,e2z\n\
         1,2,3,1,0,0,0,1,0\n\
         4,5,6,2,0,0,0.01,1,0\n\
         7,8,9,0,0,1,1,0,0.0000001\n",
    );
    let d = load_dti_csv(&path).unwrap();
    assert_eq!(d.points.len(), 3);
    for p in &d.points {
        assert!(max_ortho_deviation(p.matrix()) < 1e-14);
    }
    assert_eq!(d.records[1].e1, [1.0, 0.0, 0.0]);
    assert_eq!((d.records[2].x, d.records[2].y, d.records[2].z), (7, 8, 9));
    // row 2 needed a unit-length fix; it is reported with its line number
    assert_eq!(d.warnings.len(), 1);
    assert_eq!(d.warnings[0].0, 3);
    assert!((d.max_correction - 1.0).abs() < 1e-12);

    let parallel = write_file(&dir, "par.csv", "x,y,z,e1x,e1y,e1z,e2x,e2y,e2z\n0,0,0,1,0,0,2,0,0\n");
    assert!(matches!(load_dti_csv(&parallel), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn simulated_label_frequencies() {
    let (params, _) = scenarios::three_clusters();
    let pi = [0.5, 0.3, 0.2];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 4000;
    let (x, z) = simulate_mixture(&params, &pi, n, &mut rng).unwrap();
    assert_eq!(x.len(), n);
    for (k, &p) in pi.iter().enumerate() {
        let got = z.iter().filter(|&&l| l == k).count() as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((got - n as f64 * p).abs() < 3.0 * sd, "component {k}: {got}");
    }

    let (_, z1) = simulate_mixture(&params[..1], &[1.0], 50, &mut rng).unwrap();
    assert!(z1.iter().all(|&l| l == 0));
    assert!(simulate_mixture(&params, &[0.5, 0.5], 10, &mut rng).is_err());
}

#[test]
fn labelled_points_round_trip() {
    let (params, pi) = scenarios::four_clusters();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (x, z) = simulate_mixture(&params, &pi, 40, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.jsonl");
    write_points_jsonl(&path, &x, Some(&z)).unwrap();
    let (back, labels) = read_points_jsonl(&path).unwrap();
    assert_eq!(back, x);
    assert_eq!(labels.unwrap(), z);

    let broken = write_file(&dir, "broken.jsonl", "{\"n\":3,\"p\":2,\"x\":[1,0,0,1,0,0]}\n{\"n\":3,\"p\":2,\"x\":[1,0]}\n");
    assert!(matches!(read_points_jsonl(&broken), Err(Error::Parse { line: 2, .. })));
}
