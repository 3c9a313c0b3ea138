use std::collections::HashSet;
use std::path::{Path, PathBuf};

use approx::assert_abs_diff_eq;
use image::RgbImage;
use proptest::prelude::*;
use selnet_tongue::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn uniform(w: u32, h: u32, px: Rgb) -> RgbImage {
    RgbImage::from_pixel(w, h, image::Rgb(px))
}

fn full(w: u32, h: u32) -> Mask {
    Mask::from_fn(w, h, |_, _| true)
}

fn obs(img: RgbImage, mask: Mask) -> TongueObservation {
    TongueObservation::new(img, mask).unwrap()
}

fn fixture_obs(id: &str) -> TongueObservation {
    let dir = fixtures();
    load_observation(&dir.join(format!("images/{id}.png")), &dir.join(format!("masks/{id}.png"))).unwrap()
}

fn physio(height: f64, weight: f64) -> PhysioRecord {
    PhysioRecord {
        id: "x".into(),
        gender: Some(1.0),
        age: Some(40.0),
        height: Some(height),
        weight: Some(weight),
        waist: Some(80.0),
        hip: Some(100.0),
        ..PhysioRecord::default()
    }
}

#[test]
fn coat_rule_examples() {
    assert!(is_coat([100, 120, 130]));
    assert!(!is_coat([150, 80, 70]));
    assert!(is_coat([200, 120, 125]));
    assert!(!is_coat([200, 120, 124]));
}

#[test]
fn observation_validation() {
    let err = TongueObservation::new(uniform(4, 3, [0; 3]), full(3, 4)).unwrap_err();
    assert!(matches!(err, TongueError::DimensionMismatch { .. }));
    let err = TongueObservation::new(uniform(2, 2, [0; 3]), Mask::from_fn(2, 2, |_, _| false)).unwrap_err();
    assert!(matches!(err, TongueError::EmptyMask));
}

#[test]
fn achromatic_and_reference_white() {
    let [h, s, i] = rgb_to_hsi([128, 128, 128]);
    assert_eq!((h, s), (0.0, 0.0));
    assert_abs_diff_eq!(i, 128.0 / 255.0, epsilon = 1e-15);
    assert_eq!(rgb_to_lab([255, 255, 255]), [100.0, 0.0, 0.0]);
    assert_eq!(rgb_to_lab([0, 0, 0]), [0.0, 0.0, 0.0]);
}

#[test]
fn red_in_ycrcb() {
    // Y = 0.299 R, Cr = 128 + 0.5 R (clamped), Cb = 128 - 0.168736 R
    let [y, cr, cb] = rgb_to_ycrcb([255, 0, 0]);
    assert_abs_diff_eq!(y, 76.245, epsilon = 1e-12);
    assert_eq!(cr, 255.0);
    assert_abs_diff_eq!(cb, 84.97232, epsilon = 1e-12);
    let [y, cr, cb] = rgb_to_ycrcb([255, 255, 255]);
    assert_abs_diff_eq!(y, 255.0, epsilon = 1e-12);
    assert_abs_diff_eq!(cr, 128.0, epsilon = 1e-9);
    assert_abs_diff_eq!(cb, 128.0, epsilon = 1e-9);
}

#[test]
fn hsi_primary_hues() {
    assert_abs_diff_eq!(rgb_to_hsi([255, 0, 0])[0], 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rgb_to_hsi([0, 255, 0])[0], 120.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rgb_to_hsi([0, 0, 255])[0], 240.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rgb_to_hsi([255, 0, 0])[1], 1.0, epsilon = 1e-15);
}

#[test]
fn lab_of_primaries_matches_published_values() {
    let [l, a, b] = rgb_to_lab([255, 0, 0]);
    assert_abs_diff_eq!(l, 53.24, epsilon = 0.01);
    assert_abs_diff_eq!(a, 80.09, epsilon = 0.01);
    assert_abs_diff_eq!(b, 67.20, epsilon = 0.01);
}

#[test]
fn region_means() {
    let o = obs(uniform(3, 2, [10, 20, 30]), full(3, 2));
    assert_eq!(region_color_stats(&o, &o.mask).unwrap().rgb, [10.0, 20.0, 30.0]);

    let mut img = uniform(2, 1, [100, 0, 0]);
    img.put_pixel(1, 0, image::Rgb([200, 0, 0]));
    let o = obs(img, full(2, 1));
    assert_eq!(region_color_stats(&o, &o.mask).unwrap().rgb[0], 150.0);

    let empty = Mask::from_fn(2, 1, |_, _| false);
    assert!(matches!(region_color_stats(&o, &empty), Err(TongueError::EmptyRegion)));
}

#[test]
fn coat_ratio_examples() {
    let tongue = Mask::from_fn(10, 10, |_, _| true);
    let quarter = Mask::from_fn(10, 10, |x, y| x < 5 && y < 5);
    assert_eq!(coat_ratio(&quarter, &tongue).unwrap(), 0.25);
    assert_eq!(coat_ratio(&Mask::from_fn(10, 10, |_, _| false), &tongue).unwrap(), 0.0);
    assert_eq!(coat_ratio(&tongue, &tongue).unwrap(), 1.0);
}

#[test]
fn morphology_examples() {
    let o = obs(uniform(200, 200, [0; 3]), Mask::from_fn(200, 200, |x, y| x < 40 && y < 100));
    assert_eq!(morphology(&o, AspectRule::default()).unwrap().area_ratio, 0.1);

    let o = obs(uniform(200, 200, [0; 3]), Mask::from_fn(200, 200, |x, y| (10..110).contains(&x) && (5..55).contains(&y)));
    assert_eq!(morphology(&o, AspectRule::HeightOverWidth).unwrap().aspect_ratio, 0.5);
    assert_eq!(morphology(&o, AspectRule::WidthOverHeight).unwrap().aspect_ratio, 2.0);

    let o = obs(uniform(40, 30, [0; 3]), full(40, 30));
    let m = morphology(&o, AspectRule::default()).unwrap();
    assert_eq!((m.area_ratio, m.aspect_ratio), (1.0, 0.75));
}

#[test]
fn constant_region_glcm() {
    // luma 128 -> level 32 of 64
    let o = obs(uniform(6, 5, [128, 128, 128]), full(6, 5));
    let t = glcm_texture(&o, &o.mask, &GlcmConfig::default()).unwrap();
    assert_eq!(t.values(), [0.0, 1.0, 0.0, 32.0]);
}

#[test]
fn checkerboard_glcm() {
    let (w, h) = (6, 4);
    let gray: Vec<usize> = (0..h).flat_map(|y| (0..w).map(move |x| (x + y) % 2)).collect();
    let g = glcm_from_levels(&gray, w as u32, &full(w as u32, h as u32), &GlcmConfig::horizontal(2)).unwrap();
    assert_eq!((g.get(0, 1), g.get(1, 0), g.get(0, 0), g.get(1, 1)), (0.5, 0.5, 0.0, 0.0));
    let t = g.stats();
    assert_eq!(t.con, 1.0);
    assert_eq!(t.asm, 0.5);
    assert_abs_diff_eq!(t.ent, std::f64::consts::LN_2, epsilon = 1e-15);
}

#[test]
fn glcm_needs_a_pair() {
    let o = obs(uniform(3, 3, [1, 2, 3]), Mask::from_fn(3, 3, |x, y| x == 1 && y == 1));
    assert!(matches!(glcm_texture(&o, &o.mask, &GlcmConfig::default()), Err(TongueError::NoPairs)));
    // diagonal neighbours only see each other along 45 or 135 degrees
    let diag = Mask::from_fn(3, 3, |x, y| (x, y) == (0, 0) || (x, y) == (1, 1));
    assert!(glcm_texture(&o, &diag, &GlcmConfig::default()).is_ok());
    assert!(glcm_texture(&o, &diag, &GlcmConfig::horizontal(64)).is_err());
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn glcm_matches_brute_force_reference() {
    let (_, rows) = read_csv(&fixtures().join("glcm.csv"));
    assert_eq!(rows.len(), 5);
    for row in rows {
        let o = fixture_obs(&row[0]);
        let (coat, body) = split_coat_body(&o);
        let region = match row[1].as_str() {
            "tongue" => o.mask.clone(),
            "body" => body,
            _ => coat,
        };
        let got = glcm_texture(&o, &region, &GlcmConfig::default()).unwrap().values();
        for (k, g) in got.iter().enumerate() {
            let want: f64 = row[2 + k].parse().unwrap();
            assert!((g - want).abs() <= 1e-12, "{} {} {k}: {g} vs {want}", row[0], row[1]);
        }
    }
}

#[test]
fn schema_shape() {
    let s = FeatureSchema::canonical();
    assert_eq!(s.len(), 52);
    assert_eq!(s.names.iter().collect::<HashSet<_>>().len(), 52);
    assert_eq!(s.names[..9], PHYSIO_NAMES.map(String::from));
    assert_eq!(s.names[9], "body_R");
    assert_eq!(s.names[33], "coat_ratio");
    assert_eq!(s.names[51], "tooth_mark_area");
}

#[test]
fn derived_indicators() {
    let v = physio(170.0, 68.0).indicators().unwrap();
    assert_abs_diff_eq!(v[8], 23.529411764705884, epsilon = 1e-12);
    assert_eq!(v[6], 0.8);
    assert_abs_diff_eq!(v[7], 80.0 / 170.0, epsilon = 1e-15);

    let given = PhysioRecord {
        bmi: Some(30.0),
        ..physio(170.0, 68.0)
    };
    assert_eq!(given.indicators().unwrap()[8], 30.0);

    let missing = PhysioRecord {
        hip: None,
        ..physio(170.0, 68.0)
    };
    let err = missing.indicators().unwrap_err();
    assert!(err.to_string().contains("Hip Circumference"), "{err}");
}

#[test]
fn detection_summary() {
    let tongue = Mask::from_fn(10, 10, |x, _| x < 5);
    let boxes = [
        DetectionBox {
            class: DetectionClass::Crack,
            x_min: 0.0,
            y_min: 0.0,
            x_max: 10.0,
            y_max: 2.0,
        },
        DetectionBox {
            class: DetectionClass::Crack,
            x_min: 0.0,
            y_min: 1.0,
            x_max: 1.0,
            y_max: 3.0,
        },
    ];
    let d = DetectionInput::from_boxes(&boxes, &tongue);
    let c = d.get(DetectionClass::Crack);
    // rows 0..2 across 5 tongue columns, plus (0, 2)
    assert_eq!((c.count, c.area_ratio), (2, 11.0 / 50.0));
    assert_eq!(d.get(DetectionClass::Spot), ClassSummary::default());
    assert!("Tooth Mark".parse::<DetectionClass>().is_ok());
    assert!("scar".parse::<DetectionClass>().is_err());
}

fn extract_fixture() -> Vec<FeatureRow> {
    let dir = fixtures();
    let physio = read_physio(&dir.join("physio.csv")).unwrap();
    let det = read_detections(&dir.join("detections.csv")).unwrap();
    extract_all(
        &dir.join("images"),
        &dir.join("masks"),
        &physio,
        &det,
        &FeatureSchema::canonical(),
        &ExtractConfig::default(),
    )
    .unwrap()
}

#[test]
fn fixture_features_match_reference_exactly() {
    let rows = extract_fixture();
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &FeatureSchema::canonical(), &rows).unwrap();
    let mut ours = csv::Reader::from_reader(buf.as_slice());
    let (want_header, want_rows) = read_csv(&fixtures().join("features.csv"));
    let got_header: Vec<String> = ours.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(got_header, want_header);
    let got_rows: Vec<csv::StringRecord> = ours.records().map(Result::unwrap).collect();
    assert_eq!(got_rows.len(), want_rows.len());
    for (got, want) in got_rows.iter().zip(&want_rows) {
        assert_eq!(&got[0], want[0].as_str());
        for (k, (g, w)) in got.iter().zip(want).enumerate().skip(1) {
            let (g, w): (f64, f64) = (g.parse().unwrap(), w.parse().unwrap());
            assert_eq!(g.to_bits(), w.to_bits(), "{} column {}: {g} vs {w}", &got[0], want_header[k]);
        }
    }
    // the second subject has no coat pixels
    assert_eq!(rows[1].features.flags, [true, true, false, false]);
}

#[test]
fn extraction_is_deterministic() {
    let render = || {
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &FeatureSchema::canonical(), &extract_fixture()).unwrap();
        buf
    };
    assert_eq!(render(), render());
}

#[test]
fn custom_schema_reorders_and_rejects_unknown_names() {
    let o = fixture_obs("p001");
    let det = DetectionInput::default();
    let p = physio(170.0, 68.0);
    let cfg = ExtractConfig::default();
    let full = extract_features(&o, &p, &det, &FeatureSchema::canonical(), &cfg).unwrap();
    let schema = FeatureSchema {
        names: vec!["BMI".into(), "coat_ratio".into()],
    };
    let v = extract_features(&o, &p, &det, &schema, &cfg).unwrap();
    assert_eq!(v.values, [full.values[8], full.values[33]]);
    let bad = FeatureSchema {
        names: vec!["tongue_colour".into()],
    };
    assert!(matches!(extract_features(&o, &p, &det, &bad, &cfg), Err(TongueError::SchemaWidth { .. })));
}

fn arb_observation() -> impl Strategy<Value = TongueObservation> {
    (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            proptest::collection::vec(any::<[u8; 3]>(), n),
            proptest::collection::vec(any::<bool>(), n),
            0..n,
        )
            .prop_map(move |(px, mut mask, forced)| {
                mask[forced] = true;
                let mut img = RgbImage::new(w, h);
                for (p, v) in img.pixels_mut().zip(px) {
                    p.0 = v;
                }
                TongueObservation::new(img, Mask::new(w, h, mask)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn coat_and_body_partition_the_tongue(o in arb_observation()) {
        let (coat, body) = split_coat_body(&o);
        for i in 0..o.mask.data().len() {
            prop_assert_eq!(coat.data()[i] || body.data()[i], o.mask.data()[i]);
            prop_assert!(!(coat.data()[i] && body.data()[i]));
        }
    }

    #[test]
    fn region_stats_respect_ranges(o in arb_observation()) {
        let s = region_color_stats(&o, &o.mask).unwrap();
        for v in s.rgb.iter().chain(&s.ycrcb) {
            prop_assert!((0.0..=255.0).contains(v));
        }
        prop_assert!((0.0..360.0).contains(&s.hsi[0]));
        prop_assert!((0.0..=1.0).contains(&s.hsi[1]) && (0.0..=1.0).contains(&s.hsi[2]));
        prop_assert!((0.0..=100.0).contains(&s.lab[0]));
    }

    #[test]
    fn per_pixel_ranges(px in any::<[u8; 3]>()) {
        let [h, s, i] = rgb_to_hsi(px);
        prop_assert!((0.0..360.0).contains(&h));
        prop_assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&i));
        prop_assert!(rgb_to_ycrcb(px).iter().all(|v| (0.0..=255.0).contains(v)));
        prop_assert!((0.0..=100.0).contains(&rgb_to_lab(px)[0]));
    }

    #[test]
    fn glcm_is_a_distribution(o in arb_observation()) {
        let cfg = GlcmConfig::default();
        let gray = quantize(&o, cfg.levels);
        match glcm_from_levels(&gray, o.image.width(), &o.mask, &cfg) {
            Ok(g) => {
                let total: f64 = g.p.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                let t = g.stats();
                let nonzero = g.p.iter().filter(|&&p| p > 0.0).count();
                prop_assert!(t.asm > 0.0 && t.asm <= 1.0);
                prop_assert_eq!(t.asm == 1.0, nonzero == 1);
                prop_assert!(t.ent >= 0.0 && t.con >= 0.0);
            }
            Err(e) => prop_assert!(matches!(e, TongueError::NoPairs)),
        }
    }
}
