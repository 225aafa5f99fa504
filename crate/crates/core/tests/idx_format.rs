use std::path::PathBuf;

use robcomp::data::LabelMap;
use robcomp::io::parse_idx;
use robcomp::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn recovers_fixture_pixels_and_labels() {
    let d = parse_idx(&fixture("tiny-images.idx"), &fixture("tiny-labels.idx"), None).unwrap();
    let expected: [[u8; 4]; 3] = [[0, 255, 128, 64], [1, 2, 3, 4], [255, 255, 0, 0]];
    assert_eq!(d.len(), 3);
    assert_eq!(d.dim(), 4);
    for (x, e) in d.inputs.iter().zip(expected) {
        let want: Vec<f64> = e.iter().map(|&p| p as f64 / 255.0).collect();
        assert_eq!(x, &want);
    }
    assert_eq!(d.labels, vec![3, 7, 4]);
}

#[test]
fn digit_map_splits_at_five() {
    let d = parse_idx(&fixture("tiny-images.idx"), &fixture("tiny-labels.idx"), Some(LabelMap::DIGITS)).unwrap();
    assert_eq!(d.labels, vec![0, 1, 0]);
    assert_eq!(d.num_classes, 2);
}

#[test]
fn wrong_magic_names_expected_constant() {
    // Images and labels swapped: each file carries the other's magic.
    let err = parse_idx(&fixture("tiny-labels.idx"), &fixture("tiny-images.idx"), None).unwrap_err();
    match err {
        Error::Format(msg) => assert!(msg.contains("0x00000803"), "{msg}"),
        other => panic!("unexpected error {other:?}"),
    }
}

#[test]
fn truncated_payload_is_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = std::fs::read(fixture("tiny-images.idx")).unwrap();
    let cut = dir.path().join("cut.idx");
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let err = parse_idx(&cut, &fixture("tiny-labels.idx"), None).unwrap_err();
    assert!(matches!(err, Error::Format(ref m) if m.contains("truncated")), "{err:?}");

    let header_only = dir.path().join("header.idx");
    std::fs::write(&header_only, &bytes[..6]).unwrap();
    let err = parse_idx(&header_only, &fixture("tiny-labels.idx"), None).unwrap_err();
    assert!(matches!(err, Error::Format(_)));
}

#[test]
fn missing_file_is_io_error() {
    let err = parse_idx(&fixture("absent.idx"), &fixture("tiny-labels.idx"), None).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
    assert!(err.is_io_or_format());
}
