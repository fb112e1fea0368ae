use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcm_icp_cli::io::{encode_cloud, read_cloud, write_cloud, CloudFormat};
use tcm_icp_cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};
use tcm_icp_core::eval::{synth_scene, SceneParams};
use tcm_icp_core::{Point3, PointCloud, RigidTransform};

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-1e3..1e3),
                rng.random_range(-1e-3..1e-3),
                rng.random::<f64>() * 7.0,
            )
        })
        .collect();
    PointCloud::new("r", pts).unwrap()
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn register(args: &[&str]) -> i32 {
    let mut argv = vec!["tcm-icp", "register"];
    argv.extend_from_slice(args);
    run(argv)
}

/// Parses the transforms CSV into (input, 12 values) rows.
fn read_transforms(path: &Path) -> Vec<(String, [f64; 12])> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "input,r00,r01,r02,r10,r11,r12,r20,r21,r22,t0,t1,t2"
    );
    lines
        .map(|l| {
            let mut f = l.split(',');
            let id = f.next().unwrap().to_string();
            let v: Vec<f64> = f.map(|x| x.parse().unwrap()).collect();
            (id, v.try_into().unwrap())
        })
        .collect()
}

#[test]
fn xyz_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.xyz");
    fs::write(&p, "0 0 0\n1 2 3\n").unwrap();
    assert_eq!(read_cloud(&p).unwrap().len(), 2);

    fs::write(&p, "# header\n0 0 0 # origin\n\n1 2 3 255 0 0\n").unwrap();
    assert_eq!(
        read_cloud(&p).unwrap().points()[1],
        Point3::new(1.0, 2.0, 3.0)
    );

    fs::write(&p, "0 0 abc\n").unwrap();
    let e = read_cloud(&p).unwrap_err().to_string();
    assert!(e.contains(":1:") && e.contains("abc"), "{e}");

    fs::write(&p, "# only a comment\n").unwrap();
    assert!(read_cloud(&p).is_err());
    assert!(read_cloud(&dir.path().join("missing.xyz")).is_err());
}

#[test]
fn ply_ascii_ignores_extra_properties() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.ply");
    fs::write(
        &p,
        "ply\nformat ascii 1.0\ncomment colored\nelement vertex 3\nproperty float x\nproperty float y\n\
         property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
         element face 1\nproperty list uchar int vertex_indices\nend_header\n\
         0 0 0 255 0 0\n1 0 0 0 255 0\n0 1 0.5 0 0 255\n3 0 1 2\n",
    )
    .unwrap();
    let c = read_cloud(&p).unwrap();
    assert_eq!(c.len(), 3);
    assert_eq!(c.points()[2], Point3::new(0.0, 1.0, 0.5));

    fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 zz 0\n").unwrap();
    let e = read_cloud(&p).unwrap_err().to_string();
    assert!(e.contains(":8:"), "{e}");
}

#[test]
fn ply_binary_skips_leading_elements_and_reads_floats() {
    let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement camera 1\nproperty list uchar float k\n\
element vertex 2\nproperty uchar flag\nproperty float x\nproperty float y\nproperty double z\nend_header\n"
        .to_vec();
    bytes.push(2);
    bytes.extend_from_slice(&1.5f32.to_le_bytes());
    bytes.extend_from_slice(&2.5f32.to_le_bytes());
    for (x, y, z) in [(1.0f32, 2.0f32, 3.0f64), (-1.0, 0.25, 1e-9)] {
        bytes.push(7);
        bytes.extend_from_slice(&x.to_le_bytes());
        bytes.extend_from_slice(&y.to_le_bytes());
        bytes.extend_from_slice(&z.to_le_bytes());
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.ply");
    fs::write(&p, &bytes).unwrap();
    let c = read_cloud(&p).unwrap();
    assert_eq!(
        c.points(),
        &[Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.25, 1e-9)]
    );

    fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
    assert!(read_cloud(&p).is_err());
}

#[test]
fn round_trips_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let c = random_cloud(1000, 1);
    for (name, format) in [
        ("c.xyz", CloudFormat::Xyz),
        ("c.ply", CloudFormat::PlyBinary),
        ("d.ply", CloudFormat::PlyAscii),
    ] {
        let p = dir.path().join(name);
        write_cloud(&c, &p, format).unwrap();
        assert_eq!(read_cloud(&p).unwrap().points(), c.points(), "{name}");
    }
    assert!(
        encode_cloud(&c, CloudFormat::PlyBinary).len() < encode_cloud(&c, CloudFormat::Xyz).len()
    );
}

#[test]
fn writing_into_a_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("no/such/dir/c.xyz");
    let e = write_cloud(&random_cloud(3, 2), &p, CloudFormat::Xyz)
        .unwrap_err()
        .to_string();
    assert!(e.contains("no/such/dir"), "{e}");
}

#[test]
fn register_two_copies_gives_identity() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth_scene(&SceneParams::default()).unwrap();
    let a = dir.path().join("a.xyz");
    let b = dir.path().join("b.xyz");
    write_cloud(&scene.scans[0], &a, CloudFormat::Xyz).unwrap();
    fs::copy(&a, &b).unwrap();
    let out = dir.path().join("merged.ply");
    let csv = dir.path().join("t.csv");
    let code = register(&[
        "--inputs",
        &path_str(&a),
        &path_str(&b),
        "--output",
        &path_str(&out),
        "--transforms",
        &path_str(&csv),
    ]);
    assert_eq!(code, EXIT_OK);
    let rows = read_transforms(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].0, path_str(&a));
    let identity = RigidTransform::identity().to_row_major();
    for (_, v) in &rows {
        for (x, y) in v.iter().zip(identity) {
            assert!((x - y).abs() <= 1e-6, "{v:?}");
        }
    }
    assert!(read_cloud(&out).unwrap().len() > scene.scans[0].len());
}

#[test]
fn register_recovers_a_synthetic_pair() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth_scene(&SceneParams {
        rng_seed: 3,
        ..Default::default()
    })
    .unwrap();
    let inputs: Vec<PathBuf> = (0..2)
        .map(|i| dir.path().join(format!("s{i}.ply")))
        .collect();
    for (c, p) in scene.scans.iter().zip(&inputs) {
        write_cloud(c, p, CloudFormat::PlyBinary).unwrap();
    }
    let out = dir.path().join("m.xyz");
    let csv = dir.path().join("t.csv");
    let code = register(&[
        "--inputs",
        &path_str(&inputs[0]),
        &path_str(&inputs[1]),
        "--output",
        &path_str(&out),
        "--transforms",
        &path_str(&csv),
        "--seed",
        "4",
    ]);
    assert_eq!(code, EXIT_OK);
    let rows = read_transforms(&csv);
    let identity = RigidTransform::identity().to_row_major();
    let reference = rows
        .iter()
        .position(|(_, v)| *v == identity)
        .expect("reference row is exactly identity");
    let other = 1 - reference;
    let expected = scene.expected_transform(other, reference).to_row_major();
    let diameter = scene.diameter();
    for k in 0..9 {
        assert!(
            (rows[other].1[k] - expected[k]).abs() <= 1e-3,
            "{:?} vs {expected:?}",
            rows[other].1
        );
    }
    for k in 9..12 {
        assert!(
            (rows[other].1[k] - expected[k]).abs() <= 1e-3 * diameter,
            "{:?} vs {expected:?}",
            rows[other].1
        );
    }
}

#[test]
fn register_usage_and_failure_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.xyz");
    fs::write(&a, "0 0 0\n1 0 0\n0 1 0\n1 1 1\n").unwrap();
    let out = path_str(&dir.path().join("m.xyz"));
    let csv = path_str(&dir.path().join("t.csv"));
    assert_eq!(
        register(&[
            "--inputs",
            &path_str(&a),
            "--output",
            &out,
            "--transforms",
            &csv
        ]),
        EXIT_USAGE
    );
    assert_eq!(register(&["--bogus"]), EXIT_USAGE);
    let missing = path_str(&dir.path().join("missing.xyz"));
    assert_eq!(
        register(&[
            "--inputs",
            &path_str(&a),
            &missing,
            "--output",
            &out,
            "--transforms",
            &csv
        ]),
        EXIT_USAGE
    );

    let bad_cfg = dir.path().join("bad.cfg");
    fs::write(&bad_cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(register(&["--config", &path_str(&bad_cfg)]), EXIT_USAGE);

    // Two points cannot be aligned.
    let tiny = dir.path().join("tiny.xyz");
    fs::write(&tiny, "0 0 0\n5 5 5\n").unwrap();
    let code = register(&[
        "--inputs",
        &path_str(&a),
        &path_str(&tiny),
        "--output",
        &out,
        "--transforms",
        &csv,
        "--method",
        "icp",
    ]);
    assert_eq!(code, EXIT_FAILED);
    assert!(!Path::new(&csv).exists());
}

#[test]
fn register_reads_settings_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth_scene(&SceneParams::default()).unwrap();
    let a = dir.path().join("a.xyz");
    let b = dir.path().join("b.xyz");
    write_cloud(&scene.scans[0], &a, CloudFormat::Xyz).unwrap();
    write_cloud(&scene.scans[1], &b, CloudFormat::Xyz).unwrap();
    let out = dir.path().join("m.xyz");
    let csv = dir.path().join("t.csv");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# baseline run\nmethod = icp\ninputs = {}, {}\noutput = {}\ntransforms = {}\n",
            path_str(&a),
            path_str(&b),
            path_str(&out),
            path_str(&csv)
        ),
    )
    .unwrap();
    assert_eq!(register(&["--config", &path_str(&cfg)]), EXIT_OK);
    // The baseline keeps the first input fixed.
    assert_eq!(
        read_transforms(&csv)[0].1,
        RigidTransform::identity().to_row_major()
    );
}

#[test]
fn evaluate_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let code = run([
        "tcm-icp",
        "evaluate",
        "--levels",
        "0",
        "--kinds",
        "noise",
        "--points",
        "600",
        "--out",
        &path_str(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("tcm-icp,noise,0,"));

    assert_eq!(run(["tcm-icp", "evaluate", "--kinds", "rain"]), EXIT_USAGE);
    assert_eq!(
        run([
            "tcm-icp",
            "evaluate",
            "--levels",
            "120",
            "--out",
            &path_str(&out)
        ]),
        EXIT_USAGE
    );
    assert_eq!(
        run([
            "tcm-icp",
            "evaluate",
            "--scans",
            "1",
            "--out",
            &path_str(&out)
        ]),
        EXIT_USAGE
    );
    assert_eq!(run(["tcm-icp", "--help"]), EXIT_OK);
}
