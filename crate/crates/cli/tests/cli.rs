use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abcs_core::image::encode_pgm;
use abcs_core::PixelImage;
use tempfile::TempDir;

fn abcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abcs"))
        .args(args)
        .output()
        .expect("run abcs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/set256")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_scene(dir: &Path, name: &str, h: usize, w: usize) -> String {
    let img = PixelImage::from_fn(h, w, |r, c| {
        (128.0 + 80.0 * ((r as f64) * 0.11).sin() * ((c as f64) * 0.07).cos()).round()
    });
    let path = dir.join(name);
    std::fs::write(&path, encode_pgm(&img)).unwrap();
    path.to_string_lossy().into_owned()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn reported_psnr(out: &str) -> f64 {
    let line = out
        .lines()
        .find(|l| l.starts_with("PSNR"))
        .expect("quality line");
    let v = line.split_whitespace().nth(1).unwrap();
    if v == "inf" {
        f64::INFINITY
    } else {
        v.parse().unwrap()
    }
}

#[test]
fn sense_reports_budget() {
    let dir = TempDir::new().unwrap();
    let img = write_scene(dir.path(), "s.pgm", 128, 96);
    let out = abcs(&[
        "sense",
        "-i",
        &img,
        "-o",
        &p(&dir, "s.abcs"),
        "--algo",
        "dd",
        "--cr",
        "0.1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("M_target 1228"), "{text}");
    assert!(text.contains("M_actual 1228"), "{text}");
    assert!(Path::new(&p(&dir, "s.abcs")).exists());
}

#[test]
fn out_of_range_ratio_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let img = write_scene(dir.path(), "s.pgm", 64, 64);
    let out = abcs(&["sense", "-i", &img, "--cr", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = abcs(&["sense", "-i", &img, "--cr", "0.1", "--algo", "fancy"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bbv_reverts_when_stride_exceeds_block() {
    let dir = TempDir::new().unwrap();
    let img = write_scene(dir.path(), "s.pgm", 256, 256);
    let out = abcs(&[
        "sense",
        "-i",
        &img,
        "-o",
        &p(&dir, "b.abcs"),
        "--algo",
        "bbv",
        "--cr",
        "0.02",
        "--block",
        "32",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("reverts to zz"), "{}", stderr(&out));
    assert!(stdout(&out).contains("algorithm zz"));
}

#[test]
fn full_rate_decode_is_lossless() {
    let dir = TempDir::new().unwrap();
    let img = write_scene(dir.path(), "s.pgm", 80, 72);
    let c = p(&dir, "f.abcs");
    assert!(
        abcs(&["sense", "-i", &img, "-o", &c, "--cr", "1", "--block", "8"])
            .status
            .success()
    );
    let out = abcs(&[
        "reconstruct",
        "-i",
        &c,
        "-o",
        &p(&dir, "f.pgm"),
        "--ref",
        &img,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(reported_psnr(&stdout(&out)), f64::INFINITY);
    assert_eq!(
        std::fs::read(&img).unwrap(),
        std::fs::read(p(&dir, "f.pgm")).unwrap()
    );
}

#[test]
fn ida_improves_on_direct_decode_for_the_fixture() {
    let dir = TempDir::new().unwrap();
    let src = fixture("camera.pgm");
    let c = p(&dir, "cam.abcs");
    assert!(
        abcs(&["sense", "-i", &src, "-o", &c, "--algo", "dd", "--cr", "0.1"])
            .status
            .success()
    );
    let direct = abcs(&[
        "reconstruct",
        "-i",
        &c,
        "-o",
        &p(&dir, "a.png"),
        "--ref",
        &src,
    ]);
    let ida = abcs(&[
        "reconstruct",
        "-i",
        &c,
        "-o",
        &p(&dir, "b.png"),
        "--ref",
        &src,
        "--method",
        "ida",
        "--df",
        "2",
        "--trace",
        &p(&dir, "t.csv"),
    ]);
    assert!(ida.status.success(), "{}", stderr(&ida));
    let (a, b) = (
        reported_psnr(&stdout(&direct)),
        reported_psnr(&stdout(&ida)),
    );
    assert!(b > a + 0.5, "{a} -> {b}");
    let trace = std::fs::read_to_string(p(&dir, "t.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 16);
    assert!(trace.starts_with("iteration,residual,sigma,psnr_db"));
}

#[test]
fn trace_requires_reference() {
    let dir = TempDir::new().unwrap();
    let img = write_scene(dir.path(), "s.pgm", 64, 64);
    let c = p(&dir, "s.abcs");
    assert!(abcs(&["sense", "-i", &img, "-o", &c, "--cr", "0.2"])
        .status
        .success());
    let out = abcs(&[
        "reconstruct",
        "-i",
        &c,
        "-o",
        &p(&dir, "o.pgm"),
        "--trace",
        &p(&dir, "t.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = abcs(&["sense", "-i", &p(&dir, "missing.pgm"), "--cr", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(p(&dir, "junk.abcs"), b"ABCSnope").unwrap();
    let out = abcs(&[
        "reconstruct",
        "-i",
        &p(&dir, "junk.abcs"),
        "-o",
        &p(&dir, "o.pgm"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("container"), "{}", stderr(&out));
}

#[test]
fn divergence_names_the_iteration() {
    let dir = TempDir::new().unwrap();
    let src = fixture("camera.pgm");
    let c = p(&dir, "cam.abcs");
    assert!(abcs(&["sense", "-i", &src, "-o", &c, "--cr", "0.02"])
        .status
        .success());
    let out = abcs(&[
        "reconstruct",
        "-i",
        &c,
        "-o",
        &p(&dir, "o.pgm"),
        "--method",
        "damp",
        "--denoiser",
        "identity",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("diverged at iteration"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn bench_rejects_empty_directory() {
    let dir = TempDir::new().unwrap();
    let out = abcs(&["bench", "--dir", &dir.path().to_string_lossy()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_is_deterministic_and_skips_bad_files() {
    let dir = TempDir::new().unwrap();
    write_scene(dir.path(), "a.pgm", 64, 64);
    write_scene(dir.path(), "b.pgm", 96, 64);
    std::fs::write(dir.path().join("broken.pgm"), b"P5 nonsense").unwrap();
    let d = dir.path().to_string_lossy().into_owned();
    let args = |out: &str| {
        vec![
            "bench".to_owned(),
            "--dir".into(),
            d.clone(),
            "--block".into(),
            "16".into(),
            "--crs".into(),
            "0.04,0.1,0.2".into(),
            "--methods".into(),
            "idct,ida".into(),
            "--iters".into(),
            "3".into(),
            "--no-timing".into(),
            "--out".into(),
            out.to_owned(),
        ]
    };
    let (o1, o2) = (p(&dir, "one.csv"), p(&dir, "two.csv"));
    let run = |out: &str| {
        let a = args(out);
        abcs(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let first = run(&o1);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).contains("skipping"), "{}", stderr(&first));
    assert!(run(&o2).status.success());
    let (a, b) = (std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    // 2 images x 3 algorithms x 3 ratios x 2 methods, then 3x2 per-ratio and 2 band rows per (algo, method)
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 36 + 3 * 2 * (3 + 2));
    assert!(lines[0].starts_with("image,algorithm,cr,method"));
    assert!(text.contains("band-mean,dd,0.01-0.04,ida"));
    assert!(text.contains("band-mean,zz,0.10-0.50,idct"));
}

#[test]
fn bench_default_grid_covers_the_table_rows() {
    let dir = TempDir::new().unwrap();
    write_scene(dir.path(), "a.pgm", 64, 64);
    let out = abcs(&[
        "bench",
        "--dir",
        &dir.path().to_string_lossy(),
        "--block",
        "16",
        "--algos",
        "zz",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let crs: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("mean,"))
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(
        crs,
        ["0.01", "0.02", "0.04", "0.1", "0.2", "0.3", "0.4", "0.5"]
    );
}
