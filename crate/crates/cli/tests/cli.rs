//! Behavior of the `mkf` binary: exit statuses, diagnostics and outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mkf_core::baseline::pipeline_denoise;
use mkf_core::bench::bench_entry;
use mkf_core::experiment::{psnr_table, render_psnr_table};
use mkf_core::io::{read_mask, read_volume, read_volume_with_header, write_volume, Dtype};
use mkf_core::model::{RoiSpec, Volume};

fn mkf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkf"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, entry: &str) -> PathBuf {
    let hdr = dir.join(format!("{entry}.hdr"));
    let o = mkf(&["synth", "--entry", entry, "--output", s(&hdr)]);
    assert!(o.status.success(), "{}", stderr(&o));
    hdr
}

#[test]
fn synth_writes_the_entry_and_its_truth() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "two-stick");
    let e = bench_entry("two-stick").unwrap();
    let sv = e.generate().unwrap();
    assert_eq!(read_volume(&hdr).unwrap(), sv.volume);
    assert_eq!(
        read_volume(&dir.path().join("two-stick_background.hdr")).unwrap(),
        sv.background
    );
    assert_eq!(
        read_volume(&dir.path().join("two-stick_clean.hdr")).unwrap(),
        sv.clean
    );
    assert_eq!(
        read_mask(&dir.path().join("two-stick_mask.csv")).unwrap(),
        e.mask
    );
}

#[test]
fn denoise_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "phantom-L");
    let bg = dir.path().join("phantom-L_background.hdr");
    let out = dir.path().join("out.hdr");
    let o = mkf(&[
        "denoise",
        "--input",
        s(&hdr),
        "--background",
        s(&bg),
        "--q",
        "1e-4",
        "--noise-window",
        "26",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let vol = read_volume(&hdr).unwrap();
    let bgv = read_volume(&bg).unwrap();
    let expect = pipeline_denoise(&vol, Some(&bgv), 1e-4, 26).unwrap();
    assert_eq!(read_volume(&out).unwrap(), expect);
}

#[test]
fn output_is_f64_unless_f32_is_requested() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let a = dir.path().join("a.hdr");
    let b = dir.path().join("b.hdr");
    assert!(mkf(&[
        "baseline",
        "--input",
        s(&hdr),
        "--output",
        s(&a),
        "--dtype",
        "f32le"
    ])
    .status
    .success());
    assert!(mkf(&["baseline", "--input", s(&a), "--output", s(&b)])
        .status
        .success());
    assert_eq!(read_volume_with_header(&a).unwrap().1.dtype, Dtype::F32Le);
    assert_eq!(read_volume_with_header(&b).unwrap().1.dtype, Dtype::F64Le);
}

#[test]
fn metrics_prints_the_psnr_table() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let o = mkf(&["metrics", "--input", s(&hdr), "--roi", "176:336"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let vol = read_volume(&hdr).unwrap();
    let expect = render_psnr_table(&psnr_table(&vol, RoiSpec::new(176, 336).unwrap()).unwrap());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), expect);
}

#[test]
fn compare_writes_report_summary_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "phantom-L");
    let out = dir.path().join("cmp");
    let o = mkf(&[
        "compare",
        "--input",
        s(&hdr),
        "--background",
        s(&dir.path().join("phantom-L_background.hdr")),
        "--truth",
        s(&dir.path().join("phantom-L_mask.csv")),
        "--roi",
        "176:336",
        "--seed",
        "3",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("q_source = auto"));
    assert!(summary.contains("masked_traces = 13"));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 16 * 8);
    for name in ["raw.pgm", "baseline.pgm", "pipeline.pgm", "qselect.csv"] {
        assert!(out.join(name).is_file(), "{name}");
    }
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "q = 1e-3\nroi = 176:336\n").unwrap();
    let a = dir.path().join("a.hdr");
    let b = dir.path().join("b.hdr");
    assert!(mkf(&[
        "denoise",
        "--config",
        s(&cfg),
        "--input",
        s(&hdr),
        "--output",
        s(&a)
    ])
    .status
    .success());
    let o = mkf(&[
        "denoise",
        "--config",
        s(&cfg),
        "--q",
        "1e-5",
        "--input",
        s(&hdr),
        "--output",
        s(&b),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let vol = read_volume(&hdr).unwrap();
    assert_eq!(
        read_volume(&a).unwrap(),
        pipeline_denoise(&vol, None, 1e-3, 26).unwrap()
    );
    assert_eq!(
        read_volume(&b).unwrap(),
        pipeline_denoise(&vol, None, 1e-5, 26).unwrap()
    );
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let out = dir.path().join("o.hdr");
    for args in [
        vec!["frobnicate"],
        vec!["denoise", "--input", s(&hdr)],
        vec!["denoise", "--input", s(&hdr), "--output", s(&out)],
        vec![
            "denoise",
            "--input",
            s(&hdr),
            "--output",
            s(&out),
            "--q",
            "-1",
        ],
        vec![
            "denoise",
            "--input",
            s(&hdr),
            "--output",
            s(&out),
            "--q",
            "zero",
        ],
        vec!["metrics", "--input", s(&hdr), "--roi", "300:100"],
        vec!["synth", "--entry", "nope", "--output", s(&out)],
    ] {
        let o = mkf(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_input_is_a_data_error_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.hdr");
    let o = mkf(&[
        "reconstruct",
        "--input",
        s(&missing),
        "--output",
        s(&dir.path().join("i.pgm")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("absent.hdr"), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn malformed_header_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hdr");
    std::fs::write(&bad, "PAVOL1\nnx = two\n").unwrap();
    let o = mkf(&[
        "reconstruct",
        "--input",
        s(&bad),
        "--output",
        s(&dir.path().join("i.pgm")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.hdr"), "{}", stderr(&o));
}

#[test]
fn mismatched_background_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let small = dir.path().join("small.hdr");
    write_volume(
        &Volume::new(1, 1, 512, 1e-8, vec![0.0; 512]).unwrap(),
        &small,
        Dtype::F64Le,
        None,
    )
    .unwrap();
    let o = mkf(&[
        "denoise",
        "--input",
        s(&hdr),
        "--background",
        s(&small),
        "--q",
        "1e-4",
        "--output",
        s(&dir.path().join("o.hdr")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("small.hdr"));
}

#[test]
fn noiseless_volume_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.hdr");
    write_volume(
        &Volume::new(2, 2, 512, 1e-8, vec![0.0; 4 * 512]).unwrap(),
        &flat,
        Dtype::F64Le,
        None,
    )
    .unwrap();
    let o = mkf(&[
        "qselect",
        "--input",
        s(&flat),
        "--roi",
        "176:336",
        "--output",
        s(&dir.path().join("q.csv")),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn edge_roi_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = synth(dir.path(), "noise-only");
    let o = mkf(&["metrics", "--input", s(&hdr), "--roi", "0:100"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("WARN"), "{}", stderr(&o));
}
