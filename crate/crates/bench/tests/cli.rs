use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
# small hyperbolic instance
manifold = hyperbolic
d = 2
radius = 1.0
anchor_count = 4
solver = axgd
epsilon = 1e-4
seed = 5
";

fn bench(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn bench")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn run_writes_the_csv_and_a_summary() {
    let dir = setup();
    let out = bench(&["run", "--config", "run.cfg", "--output", "trace.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("solver=axgd"));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("iter,grad_evals,f_gap,dist_to_opt,lambda,gamma_hat,wall_ns\n"));
    let last = csv.lines().last().unwrap();
    let gap: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((0.0..=1e-4).contains(&gap));
}

#[test]
fn flags_override_the_file() {
    let dir = setup();
    let out = bench(
        &["run", "--config", "run.cfg", "--solver", "rgd", "--epsilon", "1e-3", "--seed", "6"],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("solver=rgd"));
    assert!(stdout.contains("epsilon=1e-3"));
}

#[test]
fn same_seed_gives_identical_bytes_and_other_seeds_differ() {
    let dir = setup();
    for (name, seed) in [("a.csv", "5"), ("b.csv", "5"), ("c.csv", "6")] {
        assert!(bench(&["run", "--config", "run.cfg", "--seed", seed, "--output", name], dir.path())
            .status
            .success());
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn config_errors_are_one_machine_readable_line() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.cfg"), "manifold = hyperbolic\nd = 2\nradius = 1\nepsilon = -1\n").unwrap();
    let out = bench(&["run", "--config", "bad.cfg"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error kind=config line=4 field=epsilon "), "{stderr}");

    std::fs::write(dir.path().join("typo.cfg"), "manifold = hyperbolic\nd = 2\nradious = 1\n").unwrap();
    let stderr = String::from_utf8(bench(&["run", "--config", "typo.cfg"], dir.path()).stderr).unwrap();
    assert!(stderr.starts_with("error kind=config line=3 field=radious"), "{stderr}");

    let out = bench(&["run", "--config", "run.cfg", "--solver", "newton"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("field=solver"));

    let out = bench(&["run", "--config", "missing.cfg"], dir.path());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error kind=io "));
}

#[test]
fn sweep_fits_an_exponent() {
    let dir = setup();
    let out = bench(
        &["sweep", "--config", "run.cfg", "--epsilons", "1e-2,1e-3,1e-4,1e-5", "--output-dir", "sweep"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let p: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("exponent="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(p > 0.2 && p < 0.8, "{p}");
    assert!(dir.path().join("sweep/summary.csv").exists());
    assert!(dir.path().join("sweep/eps_1e-3.csv").exists());
}

#[test]
fn verify_prints_every_check() {
    let dir = setup();
    let out = bench(&["verify", "--samples", "50", "--fd-samples", "5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.contains("worst_slack=")).count(), 18 * 13);
}
