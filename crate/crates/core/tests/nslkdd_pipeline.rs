use c2bnvae_core::nslkdd::fixture::{generate, to_text, Split};
use c2bnvae_core::nslkdd::{fit_schema, parse_records, read_records, ClassTaxonomy, EncodingSchema};
use c2bnvae_core::Error;

#[test]
fn full_scale_fixture_encodes_like_the_real_files() {
    let train = generate(Split::Train, 1.0, 0);
    let test = generate(Split::Test, 1.0, 0);
    assert_eq!(train.len(), 125_973);
    assert_eq!(test.len(), 22_544);

    let tax = ClassTaxonomy::bundled();
    let schema = fit_schema(&train, &test, Some(123)).unwrap();
    assert_eq!(schema.natural_dim(), 122);
    assert_eq!(schema.feature_dim(), 123);
    assert_eq!(schema.column_names()[122], "pad0");

    let enc = schema.transform(&train, &tax).unwrap();
    assert_eq!(enc.class_counts(), vec![67_343, 45_927, 11_656, 995, 52]);
    assert!(enc.features.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(enc.features.iter_rows().all(|r| r[122] == 0.0));
    let enc_test = schema.transform(&test, &tax).unwrap();
    assert_eq!(enc_test.class_counts(), vec![9_711, 7_458, 2_421, 2_754, 200]);
    assert_eq!(enc_test.fingerprint, enc.fingerprint);
}

#[test]
fn encode_decode_round_trip() {
    let train = generate(Split::Train, 0.01, 3);
    let schema = fit_schema(&train, &[], None).unwrap();
    for r in train.iter().take(200) {
        let mut row = Vec::new();
        schema.encode_features(&r.features, &mut row).unwrap();
        let back = schema.inverse_transform(&row).unwrap();
        assert_eq!(back.categorical, r.features.categorical);
        for (a, b) in back.numeric.iter().zip(&r.features.numeric) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn argmax_decodes_soft_one_hot_block() {
    let train = generate(Split::Train, 0.01, 4);
    let schema = fit_schema(&train, &[], None).unwrap();
    assert_eq!(schema.vocab[0], ["icmp", "tcp", "udp"]);
    let mut row = vec![0.0; schema.feature_dim()];
    row[1..4].copy_from_slice(&[0.2, 0.7, 0.1]);
    assert_eq!(schema.inverse_transform(&row).unwrap().categorical[0], "tcp");
    row[1..4].copy_from_slice(&[0.4, 0.4, 0.2]);
    assert_eq!(schema.inverse_transform(&row).unwrap().categorical[0], "icmp");
}

#[test]
fn schema_survives_disk_and_detects_tampering() {
    let train = generate(Split::Train, 0.01, 5);
    let schema = fit_schema(&train, &[], Some(130)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("schema.json");
    schema.save(&path).unwrap();
    assert_eq!(EncodingSchema::load(&path).unwrap(), schema);

    let tampered = schema.to_json().replacen("\"tcp\"", "\"tcq\"", 1);
    assert!(matches!(
        EncodingSchema::from_json(&tampered),
        Err(Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn files_parse_back_from_disk() {
    let recs = generate(Split::Test, 0.005, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("KDDTest+.txt");
    std::fs::write(&path, to_text(&recs)).unwrap();
    assert_eq!(read_records(&path).unwrap(), recs);

    let bad = "0,tcp,http,SF,1\n";
    match parse_records(bad.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected parse error, got {other:?}"),
    }
    std::fs::write(&path, format!("{}{bad}", to_text(&recs[..2]))).unwrap();
    match read_records(&path) {
        Err(Error::Parse { line, message }) => {
            assert_eq!(line, 3);
            assert!(message.contains("KDDTest+.txt"));
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn unseen_category_and_attack_are_errors() {
    let train = generate(Split::Train, 0.01, 7);
    let test = generate(Split::Test, 0.05, 7);
    let tax = ClassTaxonomy::bundled();
    let schema = fit_schema(&train, &[], None).unwrap();
    let mut odd = train[0].clone();
    odd.features.categorical[1] = "no_such_service".into();
    assert!(matches!(
        schema.transform(&[odd], &tax),
        Err(Error::UnknownCategory { column: "service", .. })
    ));
    let mut odd = train[0].clone();
    odd.attack_name = "mystery".into();
    assert!(matches!(
        schema.transform(&[odd], &tax),
        Err(Error::UnknownAttack { .. })
    ));
    // test-only services need the vocabulary to include the test file
    let with_test = fit_schema(&train, &test, None).unwrap();
    assert!(with_test.transform(&test, &tax).is_ok());
}
