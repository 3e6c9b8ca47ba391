use std::fs;
use std::path::Path;

use memmaps_core::evaluation::window_ground_truth;
use memmaps_core::io::{load_dataset, save_png};
use memmaps_core::{GrayImage, Role};

fn write_frames(dir: &Path, names: &[&str]) {
    fs::create_dir_all(dir).unwrap();
    for (i, n) in names.iter().enumerate() {
        save_png(&GrayImage::filled(8, 6, 10 * i as u8), &dir.join(n)).unwrap();
    }
}

fn manifest(root: &Path, gt: &str) -> std::path::PathBuf {
    let p = root.join("manifest.json");
    fs::write(
        &p,
        format!(r#"{{"dataset_id":"t","query_dir":"q","reference_dir":"r","ground_truth":{gt}}}"#),
    )
    .unwrap();
    p
}

#[test]
fn three_plus_three_in_filename_order() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(&dir.path().join("q"), &["0002.png", "0000.png", "0001.png"]);
    write_frames(&dir.path().join("r"), &["0001.png", "0002.png", "0000.png"]);
    fs::write(dir.path().join("q/notes.txt"), "not a frame").unwrap();
    let ds = load_dataset(&manifest(dir.path(), r#"{"scheme":"exact"}"#)).unwrap();
    let ids = |v: &[memmaps_core::FrameRef]| v.iter().map(|f| f.frame_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&ds.queries), ["0000", "0001", "0002"]);
    assert_eq!(ids(&ds.references), ["0000", "0001", "0002"]);
    assert!(ds.queries.iter().all(|f| f.role == Role::Query));
    assert!(ds.references.iter().all(|f| f.role == Role::Reference));
    assert_eq!(ds.all_frames().len(), 6);
}

#[test]
fn empty_reference_dir_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(&dir.path().join("q"), &["0000.png"]);
    fs::create_dir_all(dir.path().join("r")).unwrap();
    let err = load_dataset(&manifest(dir.path(), r#"{"scheme":"exact"}"#)).unwrap_err();
    assert!(err.to_string().contains("no frames"), "{err}");
    assert!(err.is_data_error());
}

#[test]
fn window_manifest_matches_window_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["0.png", "1.png", "2.png", "3.png", "4.png"];
    write_frames(&dir.path().join("q"), &names);
    write_frames(&dir.path().join("r"), &names);
    let ds = load_dataset(&manifest(dir.path(), r#"{"scheme":"window","k":1}"#)).unwrap();
    assert_eq!(ds.ground_truth().unwrap(), window_ground_truth(5, 1));
}

#[test]
fn file_ground_truth_resolves_against_manifest_dir() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(&dir.path().join("q"), &["a.png", "b.png"]);
    write_frames(&dir.path().join("r"), &["x.png", "y.png"]);
    fs::write(dir.path().join("gt.csv"), "query_id,reference_ids\na,x;y\nb,y\n").unwrap();
    let ds = load_dataset(&manifest(dir.path(), r#"{"scheme":"file","path":"gt.csv"}"#)).unwrap();
    let gt = ds.ground_truth().unwrap();
    assert_eq!(gt.references_for("a").unwrap().len(), 2);
    assert!(gt.references_for("b").unwrap().contains("y"));
}

#[test]
fn window_without_k_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_frames(&dir.path().join("q"), &["0.png"]);
    write_frames(&dir.path().join("r"), &["0.png"]);
    let ds = load_dataset(&manifest(dir.path(), r#"{"scheme":"window"}"#)).unwrap();
    assert!(ds.ground_truth().is_err());
}

#[test]
fn missing_manifest_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dataset(&dir.path().join("nope.json")).is_err());
}
