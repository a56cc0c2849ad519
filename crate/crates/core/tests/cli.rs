use std::ffi::OsString;
use std::path::Path;

use hiertext::cli::run;
use hiertext::training::Corpus;
use image::{GrayImage, Luma, Rgb, RgbImage};

fn call(args: &[&dyn AsRef<std::ffi::OsStr>]) -> i32 {
    let mut argv: Vec<OsString> = vec!["hiertext".into()];
    argv.extend(args.iter().map(|a| a.as_ref().to_os_string()));
    run(argv)
}

fn listing(root: &Path) -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    out.sort();
    out
}

#[test]
fn extract_on_blank_image() {
    let dir = tempfile::tempdir().unwrap();
    let blank = dir.path().join("blank.png");
    RgbImage::from_pixel(160, 120, Rgb([255, 255, 255])).save(&blank).unwrap();
    let out = dir.path().join("out");
    assert_eq!(call(&[&"extract", &"--out", &out, &"--overlay", &blank]), 0);
    let mask = image::open(out.join("blank_mask.png")).unwrap().to_luma8();
    assert_eq!(mask.dimensions(), (160, 120));
    assert!(mask.pixels().all(|p| p[0] == 0));
    assert_eq!(std::fs::read_to_string(out.join("blank_rects.jsonl")).unwrap(), "");
    assert_eq!(
        listing(&out),
        ["blank_mask.png", "blank_overlay.png", "blank_rects.jsonl", "blank_timing.json"]
    );
    // Nothing besides the input and the output directory.
    assert_eq!(listing(dir.path()), ["blank.png", "out"]);
}

#[test]
fn gen_synthetic_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(call(&[&"gen-synthetic", &"--seed", &"7", &"--count", &"10", &"--out", d]), 0);
    }
    let files = listing(&a);
    assert_eq!(files, listing(&b));
    assert_eq!(files.len(), 31);
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(Corpus::open(&a).unwrap().len(), 10);
}

#[test]
fn evaluate_rejects_mismatched_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    assert_eq!(call(&[&"gen-synthetic", &"--count", &"2", &"--out", &corpus]), 0);
    let outputs = dir.path().join("outputs");
    std::fs::create_dir(&outputs).unwrap();
    for id in ["00000", "00001"] {
        GrayImage::from_pixel(10, 10, Luma([0])).save(outputs.join(format!("{id}_mask.png"))).unwrap();
    }
    let report = dir.path().join("report");
    assert_eq!(
        call(&[&"evaluate", &"--outputs", &outputs, &"--corpus", &corpus, &"--out", &report]),
        3
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(call(&[]), 1);
    assert_eq!(call(&[&"extract", &"--out", &out]), 1);
    assert_eq!(call(&[&"extract", &"--level", &"page", &"--out", &out, &"x.png"]), 1);
    assert_eq!(call(&[&"extract", &"--out", &out, &dir.path().join("none.png")]), 2);
    assert_eq!(call(&[&"train-classifier", &"--corpus", &dir.path().join("none"), &"--out", &out]), 2);

    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(call(&[&"extract", &"--out", &out, &junk]), 3);

    let model = dir.path().join("model.json");
    std::fs::write(&model, r#"{"rounds": 3, "accept_threshold": 0.0, "stumps": []}"#).unwrap();
    let img = dir.path().join("img.png");
    RgbImage::new(8, 8).save(&img).unwrap();
    assert_eq!(call(&[&"extract", &"--model", &model, &"--out", &out, &img]), 3);
    assert!(!out.join("img_mask.png").exists());
}

#[test]
fn train_and_sweep_write_into_out() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    assert_eq!(call(&[&"gen-synthetic", &"--seed", &"1", &"--count", &"3", &"--out", &corpus]), 0);
    let search = dir.path().join("search.json");
    std::fs::write(&search, r#"{"max_units": 20, "coarse_step": 10}"#).unwrap();
    let w = dir.path().join("w");
    assert_eq!(
        call(&[&"train-weights", &"--corpus", &corpus, &"--search", &search, &"--diversify", &"2", &"--out", &w]),
        0
    );
    let weights = hiertext::cli::read_weights(&w.join("weights.json")).unwrap();
    assert!(!weights.is_empty() && weights.len() <= 2);

    let m = dir.path().join("m");
    assert_eq!(
        call(&[&"train-classifier", &"--corpus", &corpus, &"--weights", &w.join("weights.json"), &"--rounds", &"20", &"--out", &m]),
        0
    );
    let s = dir.path().join("s");
    assert_eq!(
        call(&[&"sweep", &"--corpus", &corpus, &"--model", &m.join("model.json"), &"--steps", &"3", &"--out", &s]),
        0
    );
    let csv = std::fs::read_to_string(s.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(listing(dir.path()), ["corpus", "m", "s", "search.json", "w"]);
}
