use super::*;
use crate::acoustics::LeafBeampatternParams;
use crate::lsystem::{expand, interpret_trunk, LSystemSpec};
use crate::scene::{Intensity, Placement, Rect};
use crate::treegen::{LeafDisk, RandomizationParams, ReferenceTree, TreeGeometry, TreeTemplate};
use std::collections::BTreeMap;

fn source() -> TreeSource<f64> {
    let spec = LSystemSpec::default();
    let layout = interpret_trunk(&expand(&spec).unwrap(), &spec.turtle).unwrap();
    TreeSource {
        template: TreeTemplate::new(&ReferenceTree::bundled()).unwrap(),
        attachments: layout.attachments,
        params: RandomizationParams::default(),
    }
}

fn circle(points: usize, interval: Option<f64>, bw: f64) -> TrajectorySpec<f64> {
    TrajectorySpec::Circle(CircleSpec {
        center: CircleCenter::Auto(AutoCenter::Auto),
        radius: 6.2,
        height: None,
        points,
        interval_deg: interval,
        beamwidth_deg: bw,
    })
}

fn one_tree_scene(seed: u64) -> Scene<f64> {
    build_scene(&[Vec2::new(0.0, 0.0)], &source(), seed).unwrap()
}

#[test]
fn circle_poses_at_regular_intervals() {
    let scene = one_tree_scene(1);
    let poses = poses_from_spec(&circle(15, Some(24.0), 20.0), &scene).unwrap();
    assert_eq!(poses.len(), 15);
    let h = scene.mean_tree_height().unwrap() / 2.0;
    for (i, p) in poses.iter().enumerate() {
        let expect = (24.0 * i as f64).to_radians();
        let mut angle = p.position.y.atan2(p.position.x);
        if angle < -1e-12 {
            angle += std::f64::consts::TAU;
        }
        assert!((angle - expect).abs() < 1e-12, "pose {i}");
        assert!((p.position.xy().norm() - 6.2).abs() < 1e-12);
        assert_eq!(p.position.z, h);
        // Horizontal, unit, aimed at the centre.
        assert_eq!(p.boresight.z, 0.0);
        assert!((p.boresight.norm() - 1.0).abs() < 1e-12);
        let to_center = (Vec3::new(0.0, 0.0, h) - p.position).normalize();
        assert!(p.boresight.distance(to_center) < 1e-12);
        p.validate().unwrap();
    }
    let last = poses[14].position;
    assert!((last.y.atan2(last.x).to_degrees() + 24.0).abs() < 1e-9);
}

#[test]
fn default_interval_spreads_full_circle() {
    let poses = poses_from_spec(&circle(8, None, 20.0), &one_tree_scene(0)).unwrap();
    for (i, p) in poses.iter().enumerate() {
        let expect = (45.0 * i as f64).to_radians();
        assert!(p.position.x.hypot(p.position.y) > 6.0);
        assert!((p.position.x - 6.2 * expect.cos()).abs() < 1e-12);
        assert!((p.position.y - 6.2 * expect.sin()).abs() < 1e-12);
    }
}

#[test]
fn auto_center_is_tree_mean() {
    let scene = build_scene(&[Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0)], &source(), 0).unwrap();
    let mut spec = circle(4, Some(90.0), 20.0);
    if let TrajectorySpec::Circle(c) = &mut spec {
        c.height = Some(1.5);
    }
    let poses = poses_from_spec(&spec, &scene).unwrap();
    assert!(poses[0].position.distance(Vec3::new(8.2, 0.0, 1.5)) < 1e-12);
    assert!(poses[2].position.distance(Vec3::new(2.0 - 6.2, 0.0, 1.5)) < 1e-12);
    let frozen = freeze_trajectory(&spec, &scene).unwrap();
    match frozen {
        TrajectorySpec::Circle(c) => {
            assert_eq!(c.center, CircleCenter::Fixed([2.0, 0.0]));
            assert_eq!(c.height, Some(1.5));
        }
        _ => unreachable!(),
    }
}

#[test]
fn auto_center_needs_trees() {
    assert!(matches!(
        poses_from_spec(&circle(3, None, 20.0), &Scene::empty()),
        Err(TrajectoryError::EmptyScene(_))
    ));
    let fixed = TrajectorySpec::Circle(CircleSpec {
        center: CircleCenter::Fixed([0.0, 0.0]),
        radius: 2.0,
        height: Some(1.0),
        points: 3,
        interval_deg: None,
        beamwidth_deg: 20.0,
    });
    assert_eq!(poses_from_spec(&fixed, &Scene::empty()).unwrap().len(), 3);
}

#[test]
fn invalid_specs_rejected() {
    let scene = one_tree_scene(0);
    for (spec, field) in [
        (circle(0, None, 20.0), "points"),
        (circle(3, None, 0.0), "beamwidth_deg"),
        (circle(3, None, 180.0), "beamwidth_deg"),
    ] {
        match poses_from_spec(&spec, &scene) {
            Err(TrajectoryError::InvalidSpec { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{other:?}"),
        }
    }
    let mut neg = circle(3, None, 20.0);
    if let TrajectorySpec::Circle(c) = &mut neg {
        c.radius = -1.0;
    }
    assert!(poses_from_spec(&neg, &scene).is_err());
    let degenerate = TrajectorySpec::Line(LineSpec {
        start: Vec3::new(1.0, 1.0, 1.0),
        end: Vec3::new(1.0, 1.0, 1.0),
        points: 2,
        beamwidth_deg: 20.0,
    });
    assert!(poses_from_spec(&degenerate, &scene).is_err());
}

#[test]
fn line_poses() {
    let line = |points| {
        TrajectorySpec::Line(LineSpec {
            start: Vec3::new(0.0, 0.0, 1.0),
            end: Vec3::new(10.0, 0.0, 1.0),
            points,
            beamwidth_deg: 20.0,
        })
    };
    let one = poses_from_spec(&line(1), &Scene::empty()).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].position, Vec3::new(0.0, 0.0, 1.0));
    assert_eq!(one[0].boresight, Vec3::new(1.0, 0.0, 0.0));
    let five = poses_from_spec(&line(5), &Scene::empty()).unwrap();
    for (i, p) in five.iter().enumerate() {
        assert!((p.position.x - 2.5 * i as f64).abs() < 1e-12);
        assert_eq!(p.boresight, Vec3::new(1.0, 0.0, 0.0));
    }
}

fn default_run(spec: &TrajectorySpec<f64>, scene: &Scene<f64>, exec: Execution) -> RunReport<f64> {
    run_trajectory(
        spec,
        scene,
        &AcousticConfig::default(),
        &LeafBeampatternParams::default(),
        exec,
    )
    .unwrap()
}

#[test]
fn lobe_missing_foliage_gives_silence() {
    let scene = one_tree_scene(3);
    // Fly past the tree looking away from it.
    let spec = TrajectorySpec::Line(LineSpec {
        start: Vec3::new(-10.0, -8.0, 2.0),
        end: Vec3::new(-10.0, -20.0, 2.0),
        points: 6,
        beamwidth_deg: 50.0,
    });
    let report = default_run(&spec, &scene, Execution::Parallel);
    assert_eq!(report.points.len(), 6);
    for p in &report.points {
        assert_eq!(p.facet_count, 0);
        assert!(p.impulse.is_silent());
    }
}

#[test]
fn circle_around_one_tree_has_echoes() {
    let scene = one_tree_scene(0);
    let report = default_run(&circle(15, Some(24.0), 20.0), &scene, Execution::Parallel);
    assert_eq!(report.points.len(), 15);
    assert_eq!(report.tree_count, 1);
    assert!(report.points.iter().all(|p| p.facet_count > 0));
    assert!(report.points.iter().any(|p| !p.impulse.is_silent()));
    let max = report
        .points
        .iter()
        .map(|p| p.wall_time_s)
        .fold(0.0, f64::max);
    assert!(report.total_wall_time_s >= max);
    for p in &report.points {
        assert_eq!(p.impulse.len(), 16384);
        assert!(p.impulse.samples.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn runs_are_deterministic_across_execution_modes() {
    let scene = one_tree_scene(5);
    let spec = circle(6, Some(60.0), 50.0);
    let a = default_run(&spec, &scene, Execution::Parallel);
    let b = default_run(&spec, &scene, Execution::Sequential);
    for (x, y) in a.points.iter().zip(&b.points) {
        assert_eq!(x.pose, y.pose);
        assert_eq!(x.facet_count, y.facet_count);
        assert_eq!(x.impulse, y.impulse);
    }
}

#[test]
fn facet_impulse_matches_direct_pipeline() {
    // One leaf facing the sonar on boresight.
    let leaf = LeafDisk {
        center: Vec3::new(3.0, 0.0, 1.0),
        normal: Vec3::new(-1.0, 0.0, 0.0),
        radius: 0.03,
    };
    let mut trees = BTreeMap::new();
    trees.insert(0, TreeGeometry::new(Vec::new(), vec![leaf]));
    let placement = Placement {
        tree_id: 0,
        position: Vec2::new(0.0, 0.0),
        yaw: 0.0,
        seed: 0,
    };
    let scene = Scene::from_parts(vec![placement], trees).unwrap();
    let pose = SonarPose::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 20.0);
    let cfg = AcousticConfig::default();
    let report = run_poses(
        &[pose],
        &scene,
        &cfg,
        &LeafBeampatternParams::default(),
        Execution::Sequential,
    )
    .unwrap();
    let imp = &report.points[0].impulse;
    let env = crate::acoustics::envelope(&imp.samples);
    let peak = env
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    assert!(peak.abs_diff((6.0 * 400e3 / 343.0f64).round() as usize) <= 1);
}

fn sweep_setup() -> SweepSetup<f64> {
    SweepSetup {
        ipp: IppConfig {
            domain: Rect::new(Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)),
            intensity: Intensity::Constant(0.1),
            lambda_max: 0.1,
            seed: 11,
        },
        source: source(),
        master_seed: 11,
        trajectory: circle(15, Some(24.0), 50.0),
        repetitions: 1,
    }
}

#[test]
fn sweep_table_shape_and_workload() {
    let cfg = AcousticConfig::default();
    let leaf = LeafBeampatternParams::default();
    let table = timing_sweep(&[1, 3], &[1, 2, 3], &sweep_setup(), &cfg, &leaf).unwrap();
    assert_eq!(table.seconds.len(), 2);
    assert!(table
        .seconds
        .iter()
        .all(|r| r.len() == 3 && r.iter().all(|s| *s > 0.0)));
    assert!(table.facets_monotone());
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "points,T=1,T=2,T=3");
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("3,"));
    assert_eq!(lines.len(), 3);

    let single = timing_sweep(&[1], &[1], &sweep_setup(), &cfg, &leaf).unwrap();
    assert_eq!(single.to_csv().lines().count(), 2);
    assert!(timing_sweep(&[], &[1], &sweep_setup(), &cfg, &leaf).is_err());
}

#[test]
fn monotonicity_flags() {
    let t = TimingTable {
        point_counts: vec![1, 5],
        tree_counts: vec![1, 2],
        seconds: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        facets: vec![vec![1, 2], vec![3, 4]],
    };
    assert!(t.monotone_in_points() && t.monotone_in_trees() && t.facets_monotone());
    let u = TimingTable {
        seconds: vec![vec![1.0, 0.5], vec![3.0, 4.0]],
        facets: vec![vec![1, 2], vec![0, 4]],
        ..t.clone()
    };
    assert!(u.monotone_in_points() && !u.monotone_in_trees() && !u.facets_monotone());
    assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
}
