use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use reid::image_io::{decode_image, decode_ppm, encode_png, encode_ppm, DecodeError};
use reid::{load_image, CacheRecord, FeatureCache, ImageError, SavedModel};
use reid_core::{Geometry, MetricKind, MetricModel, PcaModel, RgbImage, XqdaModel};

fn label() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_é-]{0,12}"
}

fn cache_strategy() -> impl Strategy<Value = FeatureCache> {
    (0usize..6, 1usize..400, 1usize..400, any::<[u8; 32]>()).prop_flat_map(|(dim, w, h, digest)| {
        prop::collection::vec(
            (label(), label(), prop::collection::vec(any::<f32>(), dim)),
            0..6,
        )
        .prop_map(move |rows| FeatureCache {
            geometry: Geometry::new(w, h),
            digest,
            dim,
            records: rows
                .into_iter()
                .map(|(person_id, camera_id, values)| CacheRecord { person_id, camera_id, values })
                .collect(),
        })
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1e6f64..1e6, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn xqda_strategy() -> impl Strategy<Value = SavedModel> {
    (1usize..7, 1usize..4).prop_flat_map(|(d, r)| {
        (matrix(d, r), matrix(r, r), prop::collection::vec(0.0f64..100.0, r), 0.0f64..1.0).prop_map(
            |(w, m, eig, reg)| SavedModel::Xqda(XqdaModel::from_parts(w, m, eig, reg).unwrap()),
        )
    })
}

fn metric_strategy() -> impl Strategy<Value = SavedModel> {
    (1usize..7, 1usize..4, any::<bool>(), any::<bool>()).prop_flat_map(|(d, k, with_pca, kissme)| {
        let k = if with_pca { k } else { d };
        (matrix(d, 1), matrix(d, k), prop::collection::vec(0.0f64..10.0, k), matrix(k, k), 0.0f64..1.0).prop_map(
            move |(mean, basis, variances, m, regularizer)| {
                let pca = with_pca.then(|| PcaModel { mean: DVector::from_column_slice(mean.as_slice()), basis, variances });
                let kind = if kissme { MetricKind::Kissme } else { MetricKind::MahalanobisGenuine };
                SavedModel::Metric(MetricModel { kind, pca, m, regularizer })
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cache_round_trips(cache in cache_strategy()) {
        let mut bytes = Vec::new();
        cache.write_to(&mut bytes).unwrap();
        let back = FeatureCache::read_from(&bytes[..]).unwrap();
        // Compare values bitwise so NaN payloads count too.
        prop_assert_eq!(back.geometry, cache.geometry);
        prop_assert_eq!(back.digest, cache.digest);
        prop_assert_eq!(back.records.len(), cache.records.len());
        for (a, b) in back.records.iter().zip(&cache.records) {
            prop_assert_eq!(&a.person_id, &b.person_id);
            prop_assert_eq!(&a.camera_id, &b.camera_id);
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.values), bits(&b.values));
        }
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn models_round_trip(model in prop_oneof![xqda_strategy(), metric_strategy()]) {
        let mut bytes = Vec::new();
        model.write_to(&mut bytes).unwrap();
        prop_assert_eq!(&bytes[..4], b"XQDA");
        prop_assert_eq!(SavedModel::read_from(&bytes[..]).unwrap(), model);
        for cut in [5, bytes.len() / 2, bytes.len() - 1] {
            prop_assert!(SavedModel::read_from(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn images_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let bytes: Vec<u8> = (0..w * h * 3).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 17) as u8).collect();
        let img = RgbImage::from_rgb8(w, h, &bytes).unwrap();
        prop_assert_eq!(decode_image(&encode_ppm(&img)).unwrap(), img.clone());
        prop_assert_eq!(decode_image(&encode_png(&img)).unwrap(), img);
    }
}

#[test]
fn single_red_pixel_ppm() {
    let img = decode_ppm(b"P6\n1 1\n255\n\xff\x00\x00").unwrap();
    assert_eq!(img, RgbImage::new(1, 1, vec![[255.0, 0.0, 0.0]]).unwrap());
}

#[test]
fn truncated_ppm_is_corrupt_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.ppm");
    std::fs::write(&path, b"P6\n2 2\n255\n\x01\x02\x03\x04").unwrap();
    let err = load_image(&path).unwrap_err();
    assert!(matches!(err, ImageError::Corrupt { .. }), "{err:?}");
    assert!(err.to_string().contains("short.ppm"), "{err}");
    assert!(matches!(decode_ppm(b"P6\n2 2\n255\n\x01"), Err(DecodeError::Corrupt(_))));
}

#[test]
fn unreadable_and_unsupported_files_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.png");
    let err = load_image(&missing).unwrap_err();
    assert!(matches!(err, ImageError::Unreadable { .. }));
    assert!(err.to_string().contains("absent.png"));

    let jpeg = dir.path().join("photo.jpg");
    std::fs::write(&jpeg, b"\xff\xd8\xff\xe0JFIF").unwrap();
    let err = load_image(&jpeg).unwrap_err();
    assert!(matches!(err, ImageError::Unsupported { .. }));
    assert!(err.to_string().contains("photo.jpg"));
}

#[test]
fn png_dimensions_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wide.png");
    let img = RgbImage::filled(128, 48, [10.0, 200.0, 30.0]).unwrap();
    std::fs::write(&path, encode_png(&img)).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!((back.width(), back.height()), (128, 48));
    assert_eq!(back, img);
}
