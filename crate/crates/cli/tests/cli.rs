use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wnood_core::scoring::{SampleLabel, ScoreTable, TestKind};
use wnood_core::synthetic::{sample_process, ProcessKind, ProcessSpec};
use wnood_core::tensor_io::{write_container_as, write_vector, Dtype};
use wnood_core::{ImageGeometry, SampleMatrix, ValueRange};

fn wnood(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wnood"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

/// 8×8×3 images whose pixel values follow `kind`, mapped onto bytes.
fn byte_images(kind: ProcessKind, n: usize, seed: u64) -> SampleMatrix {
    let g = ImageGeometry::new(8, 8, 3).unwrap();
    let x = sample_process(&ProcessSpec::new(kind, g.dim(), seed), n).unwrap();
    let bytes = x
        .values()
        .iter()
        .map(|v| (128.0 + 30.0 * v).round().clamp(0.0, 255.0))
        .collect();
    SampleMatrix::new(g, bytes, ValueRange::RawBytes).unwrap()
}

fn seasonal(phi: f64, lag: usize) -> ProcessKind {
    ProcessKind::Ar1 {
        phi,
        lag,
        innovation_sd: 1.0,
    }
}

struct Fixture {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Fixture {
    /// Inliers: lag-1 AR images. Outliers: `vertical` correlates pixels one
    /// image row apart (lag 24), `noise` is IID.
    fn images() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let p = |name: &str| dir.path().join(name);
        let save =
            |name: &str, m: &SampleMatrix| write_container_as(&p(name), m, Dtype::U8).unwrap();
        save("train.oodt", &byte_images(ProcessKind::ar1(0.5), 600, 1));
        save("test.oodt", &byte_images(ProcessKind::ar1(0.5), 150, 2));
        save("vertical.oodt", &byte_images(seasonal(0.6, 24), 150, 3));
        save("noise.oodt", &byte_images(ProcessKind::IidGaussian, 150, 4));
        let config = p("run.cfg");
        fs::write(
            &config,
            format!(
                "# toy run\n\
                 inlier_train = {}\n\
                 inlier_test = {}\n\
                 outlier.vertical = {}\n\
                 outlier.noise = {}\n\
                 tests = wn, lh, lh2s, lr\n\
                 L = 100\n\
                 bootstrap_trials = 200\n\
                 out = {}\n",
                s(&p("train.oodt")),
                s(&p("test.oodt")),
                s(&p("vertical.oodt")),
                s(&p("noise.oodt")),
                s(&p("out")),
            ),
        )
        .unwrap();
        Fixture { dir, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, verb: &str, extra: &[&str]) -> Output {
        let mut args = vec![verb, "--config", self.config.to_str().unwrap()];
        args.extend_from_slice(extra);
        wnood(&args)
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn fit_on_one_sample_fails() {
    let f = Fixture::images();
    write_container_as(
        &f.path("one.oodt"),
        &byte_images(ProcessKind::ar1(0.5), 1, 9),
        Dtype::U8,
    )
    .unwrap();
    let out = f.run(
        "fit",
        &["--set", &format!("inlier_train={}", s(&f.path("one.oodt")))],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("at least 2"));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn refit_is_bit_identical() {
    let f = Fixture::images();
    let a = f.path("model-a");
    let b = f.path("model-b");
    for dir in [&a, &b] {
        let out = f.run("fit", &["--set", &format!("model_dir={}", s(dir))]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["mu.oodt", "chol.oodt", "meta.txt"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name}");
    }
}

#[test]
fn full_pipeline_is_deterministic_and_separates_vertical_outliers() {
    let f = Fixture::images();
    assert_eq!(code(&f.run("fit", &[])), 0);
    let out = f.run("score", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let scores = f.path("out/scores/vertical.csv");
    let first_scores = read(&scores);

    let out = f.run("eval", &["--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let names = [
        "report.csv",
        "ranks.csv",
        "report.txt",
        "metadata.txt",
        "intersections.csv",
    ];
    let first: Vec<Vec<u8>> = names.iter().map(|n| read(&f.path("out").join(n))).collect();

    assert_eq!(code(&f.run("score", &[])), 0);
    assert_eq!(read(&scores), first_scores);
    assert_eq!(code(&f.run("eval", &["--seed", "7"])), 0);
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&read(&f.path("out").join(n)), bytes, "{n} changed on rerun");
    }

    let report = String::from_utf8(first[0].clone()).unwrap();
    let auroc = |setting: &str, test: &str| -> f64 {
        report
            .lines()
            .find(|l| l.starts_with(&format!("{setting},{test},")))
            .unwrap_or_else(|| panic!("no {setting}/{test} row in\n{report}"))
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(auroc("vertical", "wn") > 0.95, "{report}");
    assert!(auroc("vertical", "wn") > auroc("vertical", "lh"));
    assert_eq!(report.lines().count(), 1 + 2 * 4);

    let meta = String::from_utf8(first[3].clone()).unwrap();
    for key in [
        "compressor=png",
        "eps=0.001",
        "lags=vertical",
        "L=100",
        "seed=7",
        "score.lag_set=24 48 72 96",
    ] {
        assert!(meta.contains(key), "{key} missing from\n{meta}");
    }
    let ranks = String::from_utf8(first[1].clone()).unwrap();
    assert!(ranks.starts_with("test,average_rank\n"));
    assert_eq!(ranks.lines().count(), 5);
}

#[test]
fn empty_test_list_is_a_config_error() {
    let f = Fixture::images();
    for extra in [&["--tests", ""][..], &["--set", "tests= , "][..]] {
        let out = f.run("score", extra);
        assert_eq!(code(&out), 2, "{}", stderr(&out));
        assert!(stderr(&out).contains("empty"));
    }
}

#[test]
fn missing_data_and_model_errors() {
    let f = Fixture::images();
    let out = f.run("score", &[]);
    assert_eq!(code(&out), 2, "score before fit: {}", stderr(&out));
    assert!(stderr(&out).contains("wnood fit"));

    let out = f.run("fit", &["--set", "inlier_train=/nonexistent/train.oodt"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    fs::write(f.path("junk.oodt"), b"not a container").unwrap();
    let out = f.run(
        "fit",
        &[
            "--set",
            &format!("inlier_train={}", s(&f.path("junk.oodt"))),
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    let out = f.run("eval", &[]);
    assert_eq!(code(&out), 2, "eval without scores: {}", stderr(&out));
}

#[test]
fn geometry_mismatch_between_model_and_data() {
    let f = Fixture::images();
    assert_eq!(code(&f.run("fit", &[])), 0);
    let other = SampleMatrix::new(
        ImageGeometry::new(4, 4, 3).unwrap(),
        vec![7.0; 5 * 48],
        ValueRange::RawBytes,
    )
    .unwrap();
    write_container_as(&f.path("small.oodt"), &other, Dtype::U8).unwrap();
    let out = f.run(
        "score",
        &[
            "--set",
            &format!("inlier_test={}", s(&f.path("small.oodt"))),
        ],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("geometry"));
}

#[test]
fn constant_residual_sequence_scores_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let g = ImageGeometry::new(8, 8, 3).unwrap();
    let iid = sample_process(&ProcessSpec::new(ProcessKind::IidGaussian, g.dim(), 5), 20)
        .unwrap()
        .with_geometry(g)
        .unwrap();
    let flat =
        SampleMatrix::new(g, vec![0.25; 3 * g.dim()], ValueRange::UnboundedResidual).unwrap();
    write_container_as(&dir.path().join("r_test.oodt"), &iid, Dtype::F32).unwrap();
    write_container_as(&dir.path().join("r_flat.oodt"), &flat, Dtype::F32).unwrap();
    let out_dir = dir.path().join("out");
    let out = wnood(&[
        "score",
        "--tests",
        "wn",
        "--L",
        "48",
        "--out",
        &s(&out_dir),
        "--set",
        &format!(
            "residual.inlier_test={}",
            s(&dir.path().join("r_test.oodt"))
        ),
        "--set",
        "outlier.flat=unused",
        "--set",
        &format!("residual.flat={}", s(&dir.path().join("r_flat.oodt"))),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = ScoreTable::read_csv(&out_dir.join("scores/flat.csv")).unwrap();
    let outl = table.scores(TestKind::Wn, SampleLabel::Outlier);
    assert_eq!(outl, vec![f64::INFINITY; 3]);
    assert!(fs::read_to_string(out_dir.join("scores/flat.csv"))
        .unwrap()
        .contains(",outlier,wn,inf\n"));
    assert!(table
        .scores(TestKind::Wn, SampleLabel::InlierTest)
        .iter()
        .all(|v| v.is_finite()));
}

#[test]
fn imported_logliks_drive_the_likelihood_tests() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    write_vector(&p("ll_train.oodt"), &[-10.0, -12.0, -11.0], Dtype::F32).unwrap();
    write_vector(&p("ll_test.oodt"), &[-10.5, -13.0], Dtype::F32).unwrap();
    write_vector(&p("ll_out.oodt"), &[-4.0, -30.0, -11.0], Dtype::F32).unwrap();
    let cfg = p("ll.cfg");
    fs::write(
        &cfg,
        format!(
            "tests = lh, lh-2s\noutlier.dgm = unused\nloglik.inlier_train = {}\nloglik.inlier_test = {}\nloglik.dgm = {}\nout = {}\nbootstrap_trials = 200\n",
            s(&p("ll_train.oodt")),
            s(&p("ll_test.oodt")),
            s(&p("ll_out.oodt")),
            s(&p("out")),
        ),
    )
    .unwrap();
    let out = wnood(&["score", "--config", &s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let t = ScoreTable::read_csv(&p("out/scores/dgm.csv")).unwrap();
    assert_eq!(
        t.scores(TestKind::Lh, SampleLabel::InlierTest),
        vec![10.5, 13.0]
    );
    assert_eq!(
        t.scores(TestKind::Lh, SampleLabel::Outlier),
        vec![4.0, 30.0, 11.0]
    );
    // training median is -11
    assert_eq!(
        t.scores(TestKind::Lh2s, SampleLabel::Outlier),
        vec![7.0, 19.0, 0.0]
    );
    let meta = fs::read_to_string(p("out/scores/metadata.txt")).unwrap();
    assert!(meta.contains("lh2s_inlier_median=-11.0"), "{meta}");

    let out = wnood(&["eval", "--config", &s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // LH: outliers {4,30,11} vs inliers {10.5,13} → (0+0) + (1+1) + (1+0) = 3/6
    let report = fs::read_to_string(p("out/report.csv")).unwrap();
    assert!(report.contains("dgm,lh,0.500000,"), "{report}");
}

fn write_scores(path: &Path, tests: &[(TestKind, Vec<f64>)]) {
    let inliers = [0.0, 1.0, 2.0, 3.0];
    let mut t = ScoreTable::default();
    for (test, outl) in tests {
        t.push_all(*test, SampleLabel::InlierTest, &inliers)
            .unwrap();
        t.push_all(*test, SampleLabel::Outlier, outl).unwrap();
    }
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    t.write_csv(path).unwrap();
}

#[test]
fn eval_reproduces_hand_computed_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let high = vec![10.0; 4]; // AUROC 1
    let mid = vec![1.5; 4]; // AUROC 0.5
    let low = vec![-1.0; 4]; // AUROC 0
    write_scores(
        &out.join("scores/a.csv"),
        &[
            (TestKind::Wn, high.clone()),
            (TestKind::Lh, mid.clone()),
            (TestKind::Lh2s, low.clone()),
        ],
    );
    write_scores(
        &out.join("scores/b.csv"),
        &[
            (TestKind::Wn, mid),
            (TestKind::Lh, high),
            (TestKind::Lh2s, low),
        ],
    );
    let common = [
        "--out",
        out.to_str().unwrap(),
        "--tests",
        "wn,lh,lh2s",
        "--set",
        "bootstrap_trials=200",
    ];
    let mut args = vec!["eval"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--set", "outlier.a=x", "--set", "outlier.b=x"]);
    let o = wnood(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // a: wn 1, lh 2, lh2s 3; b: lh 1, wn 2, lh2s 3
    assert_eq!(
        fs::read_to_string(out.join("ranks.csv")).unwrap(),
        "test,average_rank\nwn,1.5000\nlh,1.5000\nlh2s,3.0000\n"
    );

    // a single setting ranks exactly as within that setting
    let mut args = vec!["eval"];
    args.extend_from_slice(&common);
    args.extend_from_slice(&["--set", "outlier.b=x"]);
    assert_eq!(code(&wnood(&args)), 0);
    assert_eq!(
        fs::read_to_string(out.join("ranks.csv")).unwrap(),
        "test,average_rank\nwn,2.0000\nlh,1.0000\nlh2s,3.0000\n"
    );
}

/// 32×32×3 residuals: IID inliers and outliers with a seasonal AR at the
/// image-row lag, consumed directly by the WN test.
fn residual_fixture(dir: &Path) -> Vec<String> {
    let g = ImageGeometry::cifar10();
    let make = |kind, seed| {
        sample_process(&ProcessSpec::new(kind, g.dim(), seed), 300)
            .unwrap()
            .with_geometry(g)
            .unwrap()
    };
    write_container_as(
        &dir.join("inl.oodt"),
        &make(ProcessKind::IidGaussian, 1),
        Dtype::F32,
    )
    .unwrap();
    write_container_as(
        &dir.join("out.oodt"),
        &make(seasonal(0.15, 96), 2),
        Dtype::F32,
    )
    .unwrap();
    vec![
        "--out".into(),
        s(&dir.join("out")),
        "--set".into(),
        format!("residual.inlier_test={}", s(&dir.join("inl.oodt"))),
        "--set".into(),
        "outlier.seasonal=unused".into(),
        "--set".into(),
        format!("residual.seasonal={}", s(&dir.join("out.oodt"))),
    ]
}

fn sweep(extra: &[String], values: &[&str]) -> Output {
    let mut args: Vec<&str> = vec!["sweep-l"];
    args.extend(extra.iter().map(String::as_str));
    args.extend_from_slice(values);
    wnood(&args)
}

#[test]
fn sweep_over_maximum_lag() {
    let dir = tempfile::tempdir().unwrap();
    let extra = residual_fixture(dir.path());

    let out = sweep(&extra, &["96"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.starts_with("L,setting,auroc\n96,seasonal,"));

    assert_eq!(code(&sweep(&extra, &[])), 2);
    assert_eq!(code(&sweep(&extra, &["95"])), 2);

    let out = sweep(&extra, &["300", "600", "1200", "2400"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let aurocs: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(aurocs.len(), 4);
    eprintln!("sweep AUROCs over L: {aurocs:?}");
    let spread = aurocs.iter().cloned().fold(f64::MIN, f64::max)
        - aurocs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(aurocs.iter().all(|&a| a > 0.6), "{aurocs:?}");
    assert!(spread < 0.1, "{aurocs:?}");
    assert_eq!(
        fs::read_to_string(dir.path().join("out/sweep_l.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn demos_report_known_answers() {
    let dir = tempfile::tempdir().unwrap();
    let out = wnood(&[
        "demo",
        "circle",
        "--d",
        "512",
        "--n",
        "200",
        "--k",
        "20",
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(field("max_abs_typicality_minus_one") <= 1e-12);
    assert!(field("max_p_value") < 1e-9);
    assert_eq!(
        fs::read_to_string(dir.path().join("demo_circle.txt")).unwrap(),
        text
    );

    let out = wnood(&[
        "demo",
        "null-calibration",
        "--d",
        "1000",
        "--k",
        "12",
        "--trials",
        "500",
    ]);
    assert_eq!(code(&out), 2, "trials below 1000 is an argument error");
    let out = wnood(&["demo", "typicality", "--d", "64", "--n", "500"]);
    assert_eq!(code(&out), 0);
}
