use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn meshrecon(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshrecon"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = meshrecon(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const CONFIG: &str = r#"
seed = 4
output_dir = "run"
[graph]
nodes = 3
[dataset]
count = 10
[cae]
epochs = 1
batch_size = 5
[heads]
epochs = 2
batch_size = 5
[metrics]
samples = 200
voxel_resolution = 8
"#;

#[test]
fn every_subcommand_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), CONFIG).unwrap();
    let cfg = ["--config", "run.toml"];
    let with = |rest: &[&'static str]| [&cfg[..], rest].concat();

    assert!(ok(dir, &with(&["gen-graph"])).contains("3 nodes"));
    assert!(dir.join("run/graph/graph.txt").exists());
    assert!(ok(dir, &with(&["gen-data"])).contains("7 train, 3 test"));
    ok(dir, &with(&["train"]));
    for f in ["bundle.toml", "cae.ckpt", "classifier.ckpt", "regressor.ckpt", "latent_norm.txt"] {
        assert!(dir.join("run/bundle").join(f).exists(), "{f}");
    }
    assert!(ok(dir, &with(&["evaluate"])).contains("dist3D"));
    assert!(dir.join("run/eval/report.toml").exists() && dir.join("run/eval/records.txt").exists());

    ok(
        dir,
        &with(&[
            "reconstruct",
            "run/data/images/rec_00008.pgm",
            "--bundle",
            "run/bundle",
            "--graph",
            "run/graph/graph.txt",
            "--out",
            "out.obj",
            "--dump-stages",
        ]),
    );
    for f in ["out.obj", "out.selected.obj", "out.ffd.obj"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    ok(dir, &with(&["export-voxels", "out.obj", "--resolution", "12", "--out", "vox.txt"]));
    let vox = fs::read_to_string(dir.join("vox.txt")).unwrap();
    assert!(vox.starts_with("12 "));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.toml"), CONFIG).unwrap();
    ok(dir, &["--config", "run.toml", "gen-graph", "--out", "a/g.txt"]);
    ok(dir, &["--config", "run.toml", "gen-graph", "--out", "b/g.txt"]);
    ok(dir, &["--config", "run.toml", "--seed", "5", "gen-graph", "--out", "c/g.txt"]);
    let read = |p: &str| fs::read(dir.join(p)).unwrap();
    assert_eq!(read("a/nodes/node_000.obj"), read("b/nodes/node_000.obj"));
    assert_ne!(read("a/nodes/node_000.obj"), read("c/nodes/node_000.obj"));
}

#[test]
fn bad_input_fails_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = meshrecon(dir, &["export-voxels", "missing.obj", "--out", "v.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.obj"));

    fs::write(dir.join("bad.toml"), "seed = \"x\"\n").unwrap();
    let out = meshrecon(dir, &["--config", "bad.toml", "gen-graph"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    fs::write(dir.join("broken.pgm"), b"P5\n2 2\n255\n").unwrap();
    let out = meshrecon(dir, &["reconstruct", "broken.pgm", "--bundle", "nowhere", "--graph", "g.txt"]);
    assert!(!out.status.success());
}
