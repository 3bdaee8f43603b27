use std::path::{Path, PathBuf};

use proptest::prelude::*;
use regionkit::ospt::{Tensor, TensorContainer};
use regionkit::{ospe, Error};
use regionkit_core::extractor::{ExtractorDims, ExtractorWeights};
use regionkit_core::EmbeddingTable;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// value written by the fixture generator
fn feature_value(k: usize, level: usize, ch: usize, y: usize, x: usize) -> f64 {
    (0.37 * ch as f64 + 0.11 * y as f64 - 0.23 * x as f64 + 1.7 * k as f64 + 0.5 * level as f64).sin()
}

#[test]
fn feature_fixture_loads_as_pyramids() {
    let c = TensorContainer::read(&fixture("features.ospt")).unwrap();
    assert_eq!(c.image_indices(), vec![0, 1]);
    for k in 0..2 {
        let p = c.pyramid(k).unwrap();
        assert_eq!(p.input_dims(), (64, 64));
        assert_eq!(p.channels(), [4, 6, 8, 10]);
        for (j, level) in p.levels().iter().enumerate() {
            let m = &level.map;
            assert_eq!(m.height(), 64 >> (j + 2));
            for ch in 0..m.channels() {
                for y in 0..m.height() {
                    for x in 0..m.width() {
                        let got = m.data()[(ch * m.height() + y) * m.width() + x] as f64;
                        assert!((got - feature_value(k, j, ch, y, x)).abs() < 1e-4);
                    }
                }
            }
        }
    }
    assert!(c.pyramid(2).is_err());
}

#[test]
fn exported_container_has_expected_strides() {
    let c = TensorContainer::read(&fixture("export_512.ospt")).unwrap();
    assert_eq!(c.image_indices(), vec![0]);
    let p = c.pyramid(0).unwrap();
    assert_eq!(p.input_dims(), (512, 512));
    let sizes: Vec<(usize, usize)> = p.levels().iter().map(|l| (l.map.height(), l.stride)).collect();
    assert_eq!(sizes, vec![(128, 4), (64, 8), (32, 16), (16, 32)]);
}

#[test]
fn embedding_fixture_loads() {
    let t = ospe::read(&fixture("embeddings.ospe")).unwrap();
    assert_eq!((t.len(), t.dim()), (40, 16));
    assert_eq!(t.labels()[0], "cat");
    assert!(t.position("teddy bear").is_some());
    let n = t.normalized();
    for l in n.labels() {
        assert!((n.cosine(l, l).unwrap() - 1.0).abs() < 1e-6);
    }
    let back = ospe::from_bytes(&ospe::to_bytes(&t)).unwrap();
    assert_eq!(back.labels(), t.labels());
    assert_eq!(back.vector("dog").unwrap(), t.vector("dog").unwrap());
}

#[test]
fn ospe_rejects_bad_input() {
    let t = EmbeddingTable::new(vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])]).unwrap();
    let bytes = ospe::to_bytes(&t);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(ospe::from_bytes(&bad).is_err());
    assert!(ospe::from_bytes(&bytes[..bytes.len() - 2]).is_err());
    let mut nan = bytes.clone();
    let n = nan.len();
    nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(ospe::from_bytes(&nan).is_err());
    match ospe::read(Path::new("/definitely/missing.ospe")) {
        Err(Error::Io { path, .. }) => assert!(path.ends_with("missing.ospe")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn ospt_rejects_bad_input() {
    let mut c = TensorContainer::default();
    c.push(Tensor::new("a", vec![2, 3], vec![0.5; 6]).unwrap()).unwrap();
    assert!(c.push(Tensor::new("a", vec![1], vec![1.0]).unwrap()).is_err());
    assert!(Tensor::new("b", vec![2, 2], vec![0.0; 3]).is_err());
    let bytes = c.to_bytes();
    assert_eq!(&bytes[..4], b"OSPT");
    assert_eq!(TensorContainer::from_bytes(&bytes).unwrap(), c);

    let mut version = bytes.clone();
    version[4] = 2;
    assert!(TensorContainer::from_bytes(&version).is_err());
    assert!(TensorContainer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(TensorContainer::from_bytes(&trailing).is_err());
    // dtype field follows count, name length and the one-byte name
    let mut dtype = bytes.clone();
    dtype[4 + 4 + 4 + 4 + 1] = 1;
    assert!(TensorContainer::from_bytes(&dtype).is_err());
    // same tensor twice
    let mut dup = bytes.clone();
    dup[8] = 2;
    dup.extend_from_slice(&bytes[12..]);
    assert!(TensorContainer::from_bytes(&dup).is_err());
}

#[test]
fn weights_round_trip() {
    let dims = ExtractorDims { level_channels: [4, 6, 8, 10], hidden: 12, out: 5 };
    let w = ExtractorWeights::init(7, dims).unwrap();
    let c = TensorContainer::from_weights(&w).unwrap();
    for name in ["proj1.weight", "proj4.bias", "mlp.0.weight", "mlp.2.bias", "spatial.weight", "spatial.bias"] {
        assert!(c.get(name).is_some(), "{name}");
    }
    assert_eq!(c.get("spatial.weight").unwrap().dims, vec![5, 224 * 224]);
    let back = TensorContainer::from_bytes(&c.to_bytes()).unwrap().weights().unwrap();
    assert_eq!(back, w);
}

proptest! {
    #[test]
    fn ospt_round_trip(shapes in prop::collection::vec(prop::collection::vec(1u64..5, 0..4), 0..6), seed in any::<u32>()) {
        let mut c = TensorContainer::default();
        for (i, dims) in shapes.iter().enumerate() {
            let n: u64 = dims.iter().product();
            let data = (0..n).map(|j| (seed as f32) * 1e-3 - j as f32 * 0.25).collect();
            c.push(Tensor::new(format!("t{i}/x"), dims.clone(), data).unwrap()).unwrap();
        }
        let back = TensorContainer::from_bytes(&c.to_bytes()).unwrap();
        prop_assert_eq!(back, c);
    }
}
