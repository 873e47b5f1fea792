use lidar_sr::eval::bench_throughput;
use lidar_sr::segment::SegmenterConfig;
use lidar_sr::solver::SolverConfig;

#[test]
fn zero_scans_is_an_error() {
    assert!(bench_throughput(0, &SolverConfig::default(), &SegmenterConfig::default()).is_err());
}

#[test]
fn deeper_unrolling_is_slower() {
    let seg = SegmenterConfig::default();
    let run = |iterations| {
        let cfg = SolverConfig {
            iterations,
            ..Default::default()
        };
        bench_throughput(4, &cfg, &seg).unwrap()
    };
    let (k5, k10) = (run(5), run(10));
    assert!(k10.fps < k5.fps, "K=10 {} fps, K=5 {} fps", k10.fps, k5.fps);
    for r in [&k5, &k10] {
        assert_eq!(r.scans, 4);
        assert!((r.fps - 4.0 / r.wall_time_s).abs() < 1e-9 * r.fps);
        for stage in ["project", "superresolve", "segment", "labels_to_cloud"] {
            assert!(r.stages.contains_key(stage), "{stage}");
        }
    }
}
