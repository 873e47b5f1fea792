mod common;

use lidar_sr::eval::{render_scene, SceneSpec};
use lidar_sr::rangeview::{pixel_of, project, unproject, ProjectionConfig, RangeImage};
use proptest::prelude::*;
use rand::Rng;

fn assert_round_trip(img: &RangeImage) {
    let cloud = unproject(img);
    assert_eq!(cloud.len(), img.occupancy());
    let valid: Vec<usize> = (0..img.ranges().len()).filter(|&u| img.mask()[u]).collect();
    for (p, &u) in cloud.points.iter().zip(&valid) {
        let r = img.ranges()[u];
        assert!((p.range() - r).abs() <= 1e-9, "pixel {u}: {} vs {r}", p.range());
        let (row, col) = pixel_of(p, img.config()).unwrap();
        assert_eq!(row * img.width() + col, u);
    }
    let back = project(&cloud, img.config());
    assert_eq!(back.mask(), img.mask());
    for &u in &valid {
        assert_eq!(back.ranges()[u], img.ranges()[u], "pixel {u}");
    }
}

#[test]
fn scene_renders_survive_the_round_trip() {
    for cfg in [ProjectionConfig::high_res(), ProjectionConfig::low_res()] {
        for seed in 0..5 {
            let (img, _) = render_scene(&SceneSpec::urban(seed, 0.02), &cfg);
            assert!(img.occupancy() > 0);
            assert_round_trip(&img);
        }
    }
}

#[test]
fn dense_random_ranges_survive_the_round_trip() {
    let mut rng = common::rng(11);
    let cfg = ProjectionConfig::high_res();
    let ranges = (0..cfg.len()).map(|_| rng.random_range(0.05..600.0)).collect();
    assert_round_trip(&RangeImage::from_ranges(cfg, ranges).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sparse_random_images_survive_the_round_trip(seed in any::<u64>(), h in 1usize..40, w in 1usize..300, fill in 0.0f64..1.0) {
        let mut rng = common::rng(seed);
        let cfg = ProjectionConfig::new(h, w, 10.0, -30.0).unwrap();
        let valid: Vec<bool> = (0..cfg.len()).map(|_| rng.random_bool(fill)).collect();
        let ranges = (0..cfg.len()).map(|_| rng.random_range(0.05..300.0)).collect();
        assert_round_trip(&RangeImage::from_parts(cfg, ranges, valid, None).unwrap());
    }
}
