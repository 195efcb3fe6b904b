use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_threefield"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const SMALL: &str = r#"
[geometry]
n = 4

[coefficients]
forcing = 1.0

[boundary]
top = "neumann"

[[segments]]
a = [-0.5, -0.3, -0.6]
b = [0.4, 0.5, 0.7]
radius = 0.02
line_diffusivity = 10.0
line_forcing = 1.0
start = { dirichlet = 0.0 }

[[segments]]
a = [-0.55, 0.6, 0.05]
b = [0.45, -0.4, 0.05]
radius = 0.02
"#;

#[test]
fn solve_is_deterministic_and_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run(&["solve", "--config", config.to_str().unwrap(), "--output-dir", dir.to_str().unwrap(), "--solver", "reduced-cg"]);
    }
    for name in ["results.csv", "diagnostics.csv", "field.vtk", "config.toml", "segments/segment_000.csv", "segments/segment_003.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between runs");
    }
    let results = read(&a, "results.csv");
    assert!(results.starts_with("solver,n,h,"));
    assert!(results.lines().nth(1).unwrap().starts_with("reduced-cg,4,"));
    let summary = threefield::postproc::read_vtk(&a.join("field.vtk")).unwrap();
    assert_eq!(summary.points, 125);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let (first, second) = (tmp.path().join("first"), tmp.path().join("second"));
    run(&["solve", "--config", config.to_str().unwrap(), "--output-dir", first.to_str().unwrap(), "--psi", "0.75", "--alpha", "2"]);
    let echo = first.join("config.toml");
    let text = read(&first, "config.toml");
    assert!(text.contains("psi = 0.75"));
    assert!(text.contains("alpha = 2.0"));
    run(&["solve", "--config", echo.to_str().unwrap(), "--output-dir", second.to_str().unwrap()]);
    for name in ["config.toml", "results.csv", "field.vtk", "segments/segment_001.csv"] {
        assert_eq!(read(&first, name), read(&second, name), "{name} differs after reparsing");
    }
}

#[test]
fn output_dir_is_required() {
    let out = Command::new(env!("CARGO_BIN_EXE_threefield")).arg("solve").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--output-dir"));
}

#[test]
fn invalid_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[solver]\nmethod = \"newton\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_threefield"))
        .args(["solve", "--config", config.to_str().unwrap(), "--output-dir", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn experiment_commands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();

    run(&["tp1", "--meshes", "3,4", "--output-dir", &dir("tp1")]);
    let conv = read(&tmp.path().join("tp1"), "convergence.csv");
    assert_eq!(conv.lines().count(), 3);
    assert!(conv.starts_with("n,h,N,N_hat,E_L2,E_H1,E_hat_L2,E_hat_H1,J,indicator"));

    run(&["tp2", "--n", "4", "--output-dir", &dir("tp2")]);
    let tp2 = read(&tmp.path().join("tp2"), "results.csv");
    assert_eq!(tp2.lines().count(), 4);
    assert!(read(&tmp.path().join("tp2"), "profiles.csv").lines().count() > 3);

    let bundled = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/mi.toml");
    run(&["mi", "--config", bundled, "--n", "4", "--meshes", "4,5", "--output-dir", &dir("mi")]);
    let mi = tmp.path().join("mi");
    assert_eq!(read(&mi, "mi_ratios.csv").lines().count(), 10);
    assert_eq!(read(&mi, "mi_refinement.csv").lines().count(), 9);
    assert_eq!(mi.join("segments").read_dir().unwrap().count(), 19);

    let sweep = tmp.path().join("sweep.toml");
    fs::write(&sweep, "[sweep]\nn = 3\nu_hat = [0.6, 1.0]\nphi = [0.5, 1.0]\npsi = [0.5]\n").unwrap();
    run(&["cond-sweep", "--config", sweep.to_str().unwrap(), "--output-dir", &dir("cond")]);
    let cond = read(&tmp.path().join("cond"), "conditioning.csv");
    assert_eq!(cond.lines().count(), 5);
    for line in cond.lines().skip(1) {
        let value: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value.is_finite() && value > 1.0);
    }
}
