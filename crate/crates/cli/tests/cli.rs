use std::fs;
use std::path::Path;
use std::process::Command;

fn weakkam(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_weakkam")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn example1_run_succeeds_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = example1\ngrid.n = 256\ndiscount.a = cos2pix\ndiscount.class = 0\n");
    let out = dir.path().join("out");
    let (code, stdout, stderr) = weakkam(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("PASS selection"));
    let conv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    // last schedule row precedes the appended small-rate row
    let rows: Vec<&str> = conv.lines().skip(1).collect();
    let final_error: f64 = rows[rows.len() - 2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(final_error <= 0.1);
}

#[test]
fn example2_flipped_sign_selects_second_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "preset = example2\ngrid.n = 128\ndiscount.a = neg_cos2pix\ndiscount.class = near(0.5)\ndiscount.A = 1\noutput.dir = res\n",
    );
    let (code, _, stderr) = weakkam(&["run", &cfg]);
    assert_eq!(code, 0, "{stderr}");
    let report = fs::read_to_string(dir.path().join("res/report.txt")).unwrap();
    assert!(report.contains("PASS closed form"));
}

#[test]
fn constant_coefficient_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = example1\ngrid.n = 64\ndiscount.a = const(1)\n");
    let (code, _, stderr) = weakkam(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(stderr.contains("offending nodes"));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "preset = example1\ngrid.size = 64\n");
    let (code, _, stderr) = weakkam(&["run", &cfg]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 2"));
    let (code, _, _) = weakkam(&["run", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn sampled_coefficient_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let n = 64;
    let samples: Vec<String> =
        (0..n).map(|i| format!("{}", (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())).collect();
    fs::write(dir.path().join("a.txt"), samples.join("\n")).unwrap();
    let cfg = write_config(dir.path(), &format!("grid.n = {n}\ndiscount.a = samples(a.txt)\ndiscount.A = 1\n"));
    let (code, _, stderr) = weakkam(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");

    fs::write(dir.path().join("a.txt"), "1 2 3").unwrap();
    let (code, _, _) = weakkam(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn custom_tilted_lagrangian_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "preset = custom\ncustom.lagrangian = tilted\ncustom.omega = 0\ngrid.n = 64\ndiscount.A = 1\n",
    );
    let (code, _, stderr) = weakkam(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
}

#[test]
fn oracle_subcommand_passes() {
    let (code, stdout, _) = weakkam(&["oracle", "--seed", "5"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.n = 64\ndiscount.A = 1\n");
    let run = |threads: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_weakkam"))
            .env("WEAKKAM_THREADS", threads)
            .args(["run", &cfg, "--out", dir.path().join(out).to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("1", "one");
    run("4", "four");
    for f in ["profiles.csv", "convergence.csv", "report.txt"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(f)).unwrap(),
            fs::read(dir.path().join("four").join(f)).unwrap()
        );
    }
}
