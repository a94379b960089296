use std::fs;

use rescascade_core::datasets::{
    load_cifar10_binary, load_idx, write_idx, LabeledDataset, CIFAR10_CLASSES,
};
use rescascade_core::{ErrorKind, Image};

#[test]
fn idx_files_round_trip() {
    let images: Vec<Image> = (0..5)
        .map(|i| {
            Image::new(
                4,
                3,
                1,
                (0..12).map(|j| ((i * 40 + j * 7) % 256) as f64).collect(),
            )
            .unwrap()
        })
        .collect();
    let ds = LabeledDataset::new(images, vec![0, 9, 3, 3, 1], 10, (4, 3, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    write_idx(&ds, &ip, &lp).unwrap();
    let back = load_idx(&ip, &lp).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn missing_and_mismatched_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_idx(dir.path().join("nope"), dir.path().join("nope2")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);

    let ds = LabeledDataset::new(
        vec![Image::filled(2, 2, 1, 1.0).unwrap(); 3],
        vec![0, 1, 2],
        10,
        (2, 2, 1),
    )
    .unwrap();
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    write_idx(&ds, &ip, &lp).unwrap();
    let short = ds.head(2);
    write_idx(&short, dir.path().join("i2"), dir.path().join("l2")).unwrap();
    let err = load_idx(&ip, dir.path().join("l2")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(
        err.to_string().contains("3") && err.to_string().contains("2"),
        "{err}"
    );
}

#[test]
fn cifar_batches_concatenate() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for batch in 0..2u8 {
        let mut bytes = Vec::new();
        for rec in 0..3u8 {
            bytes.push(rec + batch);
            for plane in 0..3u8 {
                bytes.extend(std::iter::repeat_n(plane * 100 + rec, 1024));
            }
        }
        let p = dir.path().join(format!("data_batch_{batch}.bin"));
        fs::write(&p, bytes).unwrap();
        paths.push(p);
    }
    let ds = load_cifar10_binary(&paths).unwrap();
    assert_eq!(ds.len(), 6);
    assert_eq!(ds.shape(), (32, 32, 3));
    assert_eq!(ds.labels(), &[0, 1, 2, 1, 2, 3]);
    let img = &ds.images()[4];
    assert_eq!(
        (img.get(0, 5, 5), img.get(1, 0, 0), img.get(2, 31, 31)),
        (1.0, 101.0, 201.0)
    );
    assert_eq!(ds.class_names().unwrap()[0], CIFAR10_CLASSES[0]);

    fs::write(&paths[0], vec![0u8; 3000]).unwrap();
    assert_eq!(
        load_cifar10_binary(&paths).unwrap_err().kind(),
        ErrorKind::Data
    );
}
