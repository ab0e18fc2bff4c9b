use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdfit_cli::output::LOCK_NAME;

const SMALL_NET: &str = "[network]\nwidth = 16\ndepth = 2\n";

fn sdfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdfit")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn circle(path: &Path, r: f64) {
    let text: String = (0..64)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 64.0;
            format!("{} {} {} {}\n", r * t.cos(), r * t.sin(), t.cos(), t.sin())
        })
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn malformed_point_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.xy");
    fs::write(&input, "0 0 1 0\nabc 1 0 1\n").unwrap();
    let o = sdfit(&["--out", p(&dir.path().join("out")), "reconstruct", p(&input)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdfit(&[
        "--out",
        p(&dir.path().join("out")),
        "reconstruct",
        "/nonexistent/cloud.xyz",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_shape_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdfit(&["--out", p(&dir.path().join("out")), "sdf-probe", "torus"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown shape 'torus'"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[loss]\nlamda = 0.1\n");
    let o = sdfit(&[
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("out")),
        "theory-verify",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lamda"));
}

#[test]
fn normals_required_when_tau_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bare.xy");
    fs::write(&input, "0 0\n1 0\n0 1\n").unwrap();
    let o = sdfit(&["--out", p(&dir.path().join("out")), "reconstruct", p(&input)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(LOCK_NAME), "").unwrap();
    let o = sdfit(&["--out", p(&out), "theory-verify"]);
    assert_eq!(code(&o), 2);
    assert!(out.join(LOCK_NAME).exists());

    fs::remove_file(out.join(LOCK_NAME)).unwrap();
    let cfg = config(dir.path(), "[theory]\nruns = 3\n");
    let o = sdfit(&["--config", p(&cfg), "--out", p(&out), "theory-verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!out.join(LOCK_NAME).exists());
}

#[test]
fn theory_verify_reports_all_global() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), "[theory]\nruns = 20\nliapunov_samples = 100\n");
    let o = sdfit(&["--config", p(&cfg), "--out", p(&out), "theory-verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("20/20 runs reached a global minimum"), "{text}");
    assert!(
        text.contains("flags: warn=0 degenerate=0 non_monotone=0 liapunov_violations=0"),
        "{text}"
    );
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert!(runs.starts_with("seed,label,iterations,final_loss\n"));
    assert_eq!(runs.lines().count(), 21);
    let liapunov = fs::read_to_string(out.join("liapunov.csv")).unwrap();
    assert!(liapunov.starts_with("q0,q1,q2,h,dhdt_closed,dhdt_chain\n"));
    assert_eq!(
        fs::read_to_string(out.join("perturbation.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
}

#[test]
fn theory_verify_warns_without_a_global_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(dir.path(), "[theory]\neigvals = [0.5, 1.0]\nlambda = 0.1\nruns = 5\n");
    let o = sdfit(&["--config", p(&cfg), "--out", p(&out), "theory-verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("warning:"), "{text}");
    assert!(text.contains("flags: warn=1"), "{text}");
    let crit = fs::read_to_string(out.join("critical_points.csv")).unwrap();
    assert_eq!(crit.lines().count(), 2);
    assert!(crit.lines().nth(1).unwrap().starts_with("global-min,"));
}

#[test]
fn reconstruct_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = config(
        dir.path(),
        &format!("{SMALL_NET}[reconstruct]\nresolution = 32\n[reconstruct.schedule]\niters = 30\nbatch_size = 64\n"),
    );
    let o = sdfit(&[
        "--config",
        p(&cfg),
        "--out",
        p(&out),
        "reconstruct",
        p(&fixture("circle.xyn")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert!(trace.starts_with("iter,data,normal,eikonal,latent,total\n"));
    assert_eq!(trace.lines().count(), 31);
    for f in ["checkpoint.json", "contour.csv", "contour.svg", "report.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("{SMALL_NET}[reconstruct]\nresolution = 24\n[reconstruct.schedule]\niters = 20\nbatch_size = 32\n"),
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = sdfit(&[
            "--config",
            p(&cfg),
            "--seed",
            seed,
            "--out",
            p(&out),
            "reconstruct",
            p(&fixture("lshape.xyn")),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (
            fs::read(out.join("loss.csv")).unwrap(),
            fs::read(out.join("contour.csv")).unwrap(),
        )
    };
    let a = run("a", "3");
    assert_eq!(a, run("b", "3"));
    assert_ne!(a.0, run("c", "4").0);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("{SMALL_NET}[reconstruct]\nresolution = 24\n[reconstruct.schedule]\niters = 10\nbatch_size = 300\n"),
    );
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = sdfit(&[
            "--config",
            p(&cfg),
            "--threads",
            threads,
            "--out",
            p(&out),
            "reconstruct",
            p(&fixture("circle.xyn")),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(out.join("loss.csv")).unwrap()
    };
    assert_eq!(run("one", "1"), run("three", "3"));
}

#[test]
fn shape_space_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("small.xyn"), dir.path().join("large.xyn"));
    circle(&a, 0.3);
    circle(&b, 0.7);
    let cfg = config(
        dir.path(),
        &format!(
            "{SMALL_NET}[shape_space]\nlatent_dim = 4\nresolution = 24\n[shape_space.schedule]\nepochs = 5\nshapes_per_batch = 2\npoints_per_shape = 32\n[infer]\nresolution = 24\n[infer.schedule]\niters = 5\n[interpolate]\nresolution = 24\n"
        ),
    );
    let train = dir.path().join("train");
    let o = sdfit(&["--config", p(&cfg), "--out", p(&train), "shape-space", p(&a), p(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let latents = fs::read_to_string(train.join("latents.csv")).unwrap();
    assert_eq!(latents.lines().count(), 3);
    assert!(fs::read_to_string(train.join("shapes.csv"))
        .unwrap()
        .starts_with("shape,data,normal,eikonal,latent,total\n"));

    let ck = train.join("checkpoint.json");
    let lt = train.join("latents.csv");
    let blend = dir.path().join("blend");
    let o = sdfit(&[
        "--config",
        p(&cfg),
        "--out",
        p(&blend),
        "interpolate",
        "--checkpoint",
        p(&ck),
        "--latents",
        p(&lt),
        "--ids",
        "small,large",
        "--weights",
        "1,0",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(blend.join("blend.csv")).unwrap(),
        fs::read(train.join("shape_small.csv")).unwrap()
    );

    let held = dir.path().join("mid.xyn");
    circle(&held, 0.5);
    let infer = dir.path().join("infer");
    let o = sdfit(&[
        "--config",
        p(&cfg),
        "--out",
        p(&infer),
        "infer",
        "--checkpoint",
        p(&ck),
        p(&held),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(infer.join("latents.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("mid,"));
    assert!(infer.join("shape_mid.csv").exists());
}

#[test]
fn interpolate_rejects_mismatched_latent_table() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.xyn"), dir.path().join("b.xyn"));
    circle(&a, 0.3);
    circle(&b, 0.6);
    let cfg = config(
        dir.path(),
        &format!("{SMALL_NET}[shape_space]\nlatent_dim = 4\nresolution = 8\n[shape_space.schedule]\nepochs = 1\npoints_per_shape = 16\n"),
    );
    let train = dir.path().join("train");
    let o = sdfit(&["--config", p(&cfg), "--out", p(&train), "shape-space", p(&a), p(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "shape,z0,z1\na,0,0\nb,1,1\n").unwrap();
    let o = sdfit(&[
        "--out",
        p(&dir.path().join("x")),
        "interpolate",
        "--checkpoint",
        p(&train.join("checkpoint.json")),
        "--latents",
        p(&wrong),
        "--ids",
        "a,b",
        "--weights",
        "0.5,0.5",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dimension"), "{}", stderr(&o));
}

#[test]
fn shape_space_needs_two_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdfit(&[
        "--out",
        p(&dir.path().join("out")),
        "shape-space",
        p(&fixture("circle.xyn")),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn divergent_learning_rate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("{SMALL_NET}[reconstruct]\nresolution = 8\n[reconstruct.schedule]\niters = 200\nbatch_size = 32\nlr = 1e300\n"),
    );
    let o = sdfit(&[
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("out")),
        "reconstruct",
        p(&fixture("circle.xyn")),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}
