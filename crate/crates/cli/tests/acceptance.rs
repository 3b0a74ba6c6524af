//! CLI contract tests plus acceptance criterion 13 (worker-count
//! determinism), printed as a verdict line like the core gate.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn meclab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meclab"))
        .args(args)
        .current_dir(dir)
        .env_remove("MECLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const MEASURES: &str = "\
[map]
variant = mane
bump_radius = 0.05
[experiment]
name = measures
rng_seed = 13
[params]
n_seeds = 40
n_transient = 200
n_avg = 20000
epsilon = 0.05
";

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut failures = 0usize;

    // list: 10 experiments, stable order
    let out = meclab(&["list"], dir);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success());
    assert_eq!(text.lines().count(), 10, "list prints 10 experiments");
    assert!(text.starts_with("lyapunov"));

    // unknown experiment name: exit 2, message lists valid names
    let cfg = write_config(dir, "bad_name.cfg", &MEASURES.replace("measures", "measurez"));
    let out = meclab(&["run", &cfg], dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("valid names") && err.contains("sweep"), "lists names: {err}");

    // unknown key: exit 2
    let cfg = write_config(dir, "bad_key.cfg", &MEASURES.replace("n_seeds", "n_seedz"));
    let out = meclab(&["run", &cfg], dir);
    assert_eq!(out.status.code(), Some(2));

    // det = 2 matrix: exit 3, message names the determinant invariant
    let det2 = "[map]\nvariant = anosov\nmatrix = 2 0 0; 0 1 0; 0 0 1\n\
                [experiment]\nname = lyapunov\n";
    let cfg = write_config(dir, "det2.cfg", det2);
    let out = meclab(&["run", &cfg], dir);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("det"), "names the determinant invariant: {err}");

    // lyapunov on the default linear map: exit 0, manifest records pass
    let lyap = "[experiment]\nname = lyapunov\nrng_seed = 1\n";
    let cfg = write_config(dir, "lyap.cfg", lyap);
    let out_dir = dir.join("lyap-out");
    let out = meclab(&["run", &cfg, "--out", out_dir.to_str().unwrap()], dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"pass\": true"));
    assert!(fs::read_to_string(out_dir.join("ftle.csv")).unwrap().starts_with("lambda1,"));

    // criterion 13: identical config and seed at workers 1 vs 8, plus a
    // rerun, all produce byte-identical CSV data
    let started = Instant::now();
    let cfg = write_config(dir, "measures.cfg", MEASURES);
    let mut data = Vec::new();
    for (label, workers) in [("w1", "1"), ("w8", "8"), ("w1-rerun", "1")] {
        let out_dir = dir.join(format!("m-{label}"));
        let out = meclab(
            &["run", &cfg, "--workers", workers, "--out", out_dir.to_str().unwrap()],
            dir,
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        data.push(fs::read(out_dir.join("fingerprints.csv")).unwrap());
    }
    let pass = data[0] == data[1] && data[0] == data[2];
    println!(
        "criterion 13 [{}] ({:6.2}s) determinism: workers 1 vs 8 and rerun give byte-identical CSVs",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    if !pass {
        failures += 1;
    }

    if failures > 0 {
        std::process::exit(1);
    }
}
