//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`; exits nonzero if any check fails.

use foliage_echo::acoustics::{
    assemble_spectrum, echo_amplitude, sonar_beampattern, AcousticConfig, LeafBeampatternParams,
    SonarBeampatternParams, Spectrum, Synthesizer,
};
use foliage_echo::cli::{self, RunConfig};
use foliage_echo::geom::{Vec2, Vec3};
use foliage_echo::lsystem::{expand, interpret_trunk, LSystemSpec};
use foliage_echo::scene::{
    build_scene, facets_brute_force, facets_in_main_lobe, sample_ipp, FacetObservation, Intensity,
    IppConfig, Placement, Rect, Scene, TreeSource,
};
use foliage_echo::seed;
use foliage_echo::trajectory::{
    run_poses, run_trajectory, timing_sweep, AutoCenter, CircleCenter, CircleSpec, Execution,
    LineSpec, SonarPose, SweepSetup, TrajectorySpec,
};
use foliage_echo::treegen::{
    LeafDisk, RandomizationParams, ReferenceTree, TreeGeometry, TreeTemplate,
};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn source() -> TreeSource<f64> {
    let spec = LSystemSpec::default();
    let layout = interpret_trunk(&expand(&spec).unwrap(), &spec.turtle).unwrap();
    TreeSource {
        template: TreeTemplate::new(&ReferenceTree::bundled()).unwrap(),
        attachments: layout.attachments,
        params: RandomizationParams::default(),
    }
}

fn single_leaf_scene(leaves: Vec<LeafDisk<f64>>) -> Scene<f64> {
    let mut trees = BTreeMap::new();
    trees.insert(0, TreeGeometry::new(Vec::new(), leaves));
    let p = Placement {
        tree_id: 0,
        position: Vec2::new(0.0, 0.0),
        yaw: 0.0,
        seed: 0,
    };
    Scene::from_parts(vec![p], trees).unwrap()
}

fn circle(points: usize, center: CircleCenter<f64>, bw: f64) -> TrajectorySpec<f64> {
    TrajectorySpec::Circle(CircleSpec {
        center,
        radius: 6.2,
        height: None,
        points,
        interval_deg: Some(24.0),
        beamwidth_deg: bw,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn within(limit: Duration, t0: Instant) -> Result<f64, String> {
    let s = t0.elapsed().as_secs_f64();
    ensure!(
        s < limit.as_secs_f64(),
        "took {s:.2} s, limit {:.0} s",
        limit.as_secs_f64()
    );
    Ok(s)
}

fn empty_lobe_nullity() -> Result<String, String> {
    let t0 = Instant::now();
    let scene = build_scene(&[Vec2::new(0.0, 0.0)], &source(), 1).unwrap();
    let cfg = AcousticConfig::default();
    let leaf = LeafBeampatternParams::default();
    let away = TrajectorySpec::Line(LineSpec {
        start: Vec3::new(-10.0, -8.0, 2.0),
        end: Vec3::new(-10.0, -20.0, 2.0),
        points: 15,
        beamwidth_deg: 50.0,
    });
    // Level flight well above the canopy: the tree sits far below the lobe.
    let sky = TrajectorySpec::Circle(CircleSpec {
        center: CircleCenter::Fixed([0.0, 0.0]),
        radius: 6.2,
        height: Some(40.0),
        points: 15,
        interval_deg: Some(24.0),
        beamwidth_deg: 20.0,
    });
    let mut poses = 0;
    for spec in [away, sky] {
        let report = run_trajectory(&spec, &scene, &cfg, &leaf, Execution::Parallel).unwrap();
        for p in &report.points {
            ensure!(p.facet_count == 0, "pose with {} facets", p.facet_count);
            ensure!(
                p.impulse.samples.iter().all(|x| *x == 0.0),
                "non-zero sample"
            );
        }
        poses += report.points.len();
    }
    let s = within(Duration::from_secs(5), t0)?;
    Ok(format!(
        "{poses} poses, all impulses identically zero, {s:.2} s"
    ))
}

fn single_facet_range_law() -> Result<String, String> {
    let t0 = Instant::now();
    let cfg = AcousticConfig::default();
    let leaf = LeafBeampatternParams::default();
    let mut detail = Vec::new();
    for r in [0.5, 1.0, 2.0, 4.0, 6.0] {
        let disk = LeafDisk {
            center: Vec3::new(r, 0.0, 1.0),
            normal: Vec3::new(-1.0, 0.0, 0.0),
            radius: 0.03,
        };
        let scene = single_leaf_scene(vec![disk]);
        let pose = SonarPose::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0), 20.0);
        let report = run_poses(&[pose], &scene, &cfg, &leaf, Execution::Sequential).unwrap();
        let imp = &report.points[0].impulse;
        let peak = argmax(&foliage_echo::acoustics::envelope(&imp.samples));
        let expect = (2.0 * r * cfg.sample_rate / cfg.speed_of_sound).round() as usize;
        ensure!(
            peak.abs_diff(expect) <= 1,
            "r = {r}: peak {peak}, expected {expect}"
        );
        detail.push(format!("{r}m->{peak}"));
    }
    let s = within(Duration::from_secs(5), t0)?;
    Ok(format!(
        "{} (expected round(2r fs/v) +-1), {s:.2} s",
        detail.join(" ")
    ))
}

fn inverse_square() -> Result<String, String> {
    let mut worst = 0.0f64;
    for r in [0.1, 0.5, 1.0, 2.0, 3.3, 6.2] {
        for f in [60e3, 70e3, 80e3] {
            let a: f64 = echo_amplitude(1.0, 1.0, f, r, 343.0);
            let b = echo_amplitude(1.0, 1.0, f, 2.0 * r, 343.0);
            worst = worst.max(((b / a) - 0.25).abs() / 0.25);
        }
    }
    ensure!(worst <= 1e-12, "worst relative error {worst:e}");
    Ok(format!("A(2r)/A(r) = 0.25, worst relative error {worst:e}"))
}

fn random_observations(rng: &mut seed::SimRng, n: usize) -> Vec<FacetObservation<f64>> {
    (0..n)
        .map(|i| FacetObservation {
            leaf: i,
            range: rng.random_range(0.3..6.5),
            azimuth: rng.random_range(-0.15..0.15),
            elevation: rng.random_range(-0.15..0.15),
            incidence: rng.random_range(0.0..0.06),
            radius: rng.random_range(0.01..0.04),
        })
        .collect()
}

fn band_support() -> Result<String, String> {
    let cfg = AcousticConfig::default();
    let sonar = SonarBeampatternParams::from_beamwidth(20f64.to_radians(), 1.0);
    let leaf = LeafBeampatternParams::default();
    let synth = Synthesizer::new(&cfg).unwrap();
    let n = cfg.n_samples;
    let df = cfg.sample_rate / n as f64;
    let mut rng = seed::rng(77);
    let mut worst_imag = 0.0f64;
    for trial in 0..20 {
        let obs = random_observations(&mut rng, 1 + trial * 5);
        let spec = assemble_spectrum(&obs, &cfg, &sonar, &leaf);
        for (k, z) in spec.coeffs.iter().enumerate() {
            let f = k.min(n - k) as f64 * df;
            let in_band = (60e3..=80e3).contains(&f) && k != 0;
            if !in_band {
                ensure!(z.re == 0.0 && z.im == 0.0, "bin {k} ({f} Hz) is {z}");
            }
        }
        let x = synth.inverse_complex(&spec).unwrap();
        let peak = x.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let imag = x.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        ensure!(peak > 0.0, "trial {trial}: silent");
        worst_imag = worst_imag.max(imag / peak);
    }
    ensure!(
        worst_imag < 1e-9,
        "imaginary residue {worst_imag:e} of peak"
    );
    Ok(format!(
        "zero outside 60-80 kHz and mirror, imaginary residue {worst_imag:e} of peak"
    ))
}

fn superposition() -> Result<String, String> {
    let cfg = AcousticConfig::default();
    let sonar = SonarBeampatternParams::from_beamwidth(50f64.to_radians(), 1.0);
    let leaf = LeafBeampatternParams::default();
    let synth = Synthesizer::new(&cfg).unwrap();
    let mut rng = seed::rng(5);
    let (mut worst_spec, mut worst_imp) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let obs = random_observations(&mut rng, 2);
        let a = assemble_spectrum(&obs[..1], &cfg, &sonar, &leaf);
        let b = assemble_spectrum(&obs[1..], &cfg, &sonar, &leaf);
        let ab = assemble_spectrum(&obs, &cfg, &sonar, &leaf);
        let sum = a.add(&b);
        let scale = sum.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = ab
            .coeffs
            .iter()
            .zip(&sum.coeffs)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        worst_spec = worst_spec.max(err / scale);
        let ia = synth.synthesize(&a).unwrap();
        let ib = synth.synthesize(&b).unwrap();
        let isum = synth
            .synthesize(&Spectrum {
                coeffs: sum.coeffs.clone(),
            })
            .unwrap();
        let peak = isum.samples.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let err = ia
            .samples
            .iter()
            .zip(&ib.samples)
            .zip(&isum.samples)
            .map(|((x, y), z)| (x + y - z).abs())
            .fold(0.0, f64::max);
        worst_imp = worst_imp.max(err / peak);
    }
    ensure!(worst_spec <= 1e-12, "spectrum error {worst_spec:e}");
    ensure!(worst_imp <= 1e-9, "impulse error {worst_imp:e}");
    Ok(format!(
        "spectrum error {worst_spec:e}, impulse error {worst_imp:e}"
    ))
}

fn half_power() -> Result<String, String> {
    let mut worst = 0.0f64;
    for bw in [10.0f64, 20.0, 50.0] {
        let p = SonarBeampatternParams::from_beamwidth(bw.to_radians(), 1.0);
        let h = bw.to_radians() / 2.0;
        for (az, el) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h * 0.6, h * 0.8)] {
            worst = worst.max((sonar_beampattern(az, el, &p) - 0.5).abs());
        }
    }
    ensure!(worst <= 1e-9, "worst deviation {worst:e}");
    Ok(format!(
        "gain A1/2 at BW/2 for 10/20/50 deg, worst deviation {worst:e}"
    ))
}

fn ipp_statistics() -> Result<String, String> {
    let t0 = Instant::now();
    let cfg = |lambda: f64, seed: u64| IppConfig {
        domain: Rect::new(Vec2::new(0.0, 0.0), Vec2::new(20.0, 20.0)),
        intensity: Intensity::Constant(lambda),
        lambda_max: 0.05,
        seed,
    };
    let seeds = 10_000u64;
    let total: usize = (0..seeds)
        .map(|s| sample_ipp(&cfg(0.05, s)).unwrap().len())
        .sum();
    let mean = total as f64 / seeds as f64;
    let tol = 3.0 * 20f64.sqrt() / 100.0;
    ensure!((mean - 20.0).abs() <= tol, "mean {mean}, tolerance {tol}");
    // With lambda = lambda_max every candidate of the replayed stream survives.
    let (mut candidates, mut kept) = (0, 0);
    for s in 0..1000 {
        let pts = sample_ipp(&cfg(0.05, s)).unwrap();
        let mut rng = seed::rng(s);
        let n = Poisson::new(20.0).unwrap().sample(&mut rng) as usize;
        candidates += n;
        kept += pts.len();
        ensure!(pts.len() == n, "seed {s}: kept {} of {n}", pts.len());
    }
    let s = within(Duration::from_secs(60), t0)?;
    Ok(format!(
        "mean {mean:.4} (20 +- {tol:.4}); lambda = lambda_max kept {kept}/{candidates}; {s:.2} s"
    ))
}

fn cone_oracle() -> Result<String, String> {
    let src = source();
    let mut rng = seed::rng(8);
    let mut facets = 0;
    for i in 0..1000u64 {
        let n = rng.random_range(1..4);
        let positions: Vec<_> = (0..n)
            .map(|_| Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)))
            .collect();
        let scene = build_scene(&positions, &src, i).unwrap();
        let pos = Vec3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(0.0..5.0),
        );
        let target = Vec3::new(
            rng.random_range(-4.0..4.0),
            rng.random_range(-4.0..4.0),
            rng.random_range(0.0..5.0),
        );
        let dir = (target - pos).try_normalize().unwrap_or(Vec3::unit_x());
        let bw = [10.0, 20.0, 50.0][i as usize % 3];
        let pose = SonarPose::new(pos, dir, bw);
        let fast = facets_in_main_lobe(&scene, &pose);
        let slow = facets_brute_force(&scene, &pose);
        ensure!(
            fast == slow,
            "pair {i}: {} vs {} facets",
            fast.len(),
            slow.len()
        );
        facets += fast.len();
    }
    Ok(format!(
        "1000 pairs identical to brute force ({facets} facets total)"
    ))
}

fn circle_scenario() -> Result<String, String> {
    let scene = build_scene(&[Vec2::new(0.0, 0.0)], &source(), 0).unwrap();
    let spec = circle(15, CircleCenter::Auto(AutoCenter::Auto), 20.0);
    let report = run_trajectory(
        &spec,
        &scene,
        &AcousticConfig::default(),
        &LeafBeampatternParams::default(),
        Execution::Parallel,
    )
    .unwrap();
    ensure!(report.points.len() == 15, "{} poses", report.points.len());
    let echoing = report
        .points
        .iter()
        .filter(|p| p.facet_count > 0 && p.impulse.samples.iter().any(|x| *x != 0.0))
        .count();
    ensure!(echoing > 0, "no pose produced an echo");
    let t = report.total_wall_time_s;
    ensure!(t < 10.0, "pipeline took {t:.2} s");
    let m: usize = report.points.iter().map(|p| p.facet_count).sum();
    Ok(format!(
        "15 poses, {echoing} with echoes, {m} facets, pipeline {t:.3} s"
    ))
}

fn timing_trends() -> Result<String, String> {
    let t0 = Instant::now();
    // Dense stand: every tree can reach every lobe, so each extra tree adds work.
    let setup = SweepSetup {
        ipp: IppConfig {
            domain: Rect::new(Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)),
            intensity: Intensity::Constant(0.1),
            lambda_max: 0.1,
            seed: seed::derive(0, "ipp", 0),
        },
        source: source(),
        master_seed: 0,
        trajectory: circle(15, CircleCenter::Fixed([0.0, 0.0]), 50.0),
        repetitions: 5,
    };
    let table = timing_sweep(
        &[1, 5, 10, 15],
        &[1, 2, 3, 4, 5],
        &setup,
        &AcousticConfig::default(),
        &LeafBeampatternParams::default(),
    )
    .unwrap();
    let rows: Vec<String> = table.to_csv().lines().map(str::to_owned).collect();
    ensure!(
        table.monotone_in_points() && table.monotone_in_trees(),
        "points monotone {}, trees monotone {}; table {}",
        table.monotone_in_points(),
        table.monotone_in_trees(),
        rows.join(" | ")
    );
    let s = within(Duration::from_secs(600), t0)?;
    Ok(format!(
        "monotone in both axes; {}; {s:.1} s",
        rows.join(" | ")
    ))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::from_toml(
        r#"
seed = 21
[ipp]
domain_min = [-4, -4]
domain_max = [4, 4]
intensity = 0.05
lambda_max = 0.05
[trajectory]
kind = "circle"
center = "auto"
radius = 6.2
points = 15
interval_deg = 24
beamwidth_deg = 20
"#,
    )
    .map_err(|e| e.to_string())?;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cli::cmd_run(&cfg, &a, 0).map_err(|e| format!("{e:#}"))?;
    cli::cmd_run(&cfg, &b, 1).map_err(|e| format!("{e:#}"))?;
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("impulse_") && n.ends_with(".csv"))
        .collect();
    names.sort();
    ensure!(names.len() == 15, "{} impulse files", names.len());
    for n in &names {
        ensure!(
            fs::read(a.join(n)).unwrap() == fs::read(b.join(n)).unwrap(),
            "{n} differs"
        );
    }
    Ok(format!(
        "{} impulse CSVs byte-identical across two runs",
        names.len()
    ))
}

fn lsystem_growth() -> Result<String, String> {
    let mut lengths = Vec::new();
    for iterations in 0..=5 {
        let spec = LSystemSpec::<f64> {
            axiom: "A".into(),
            rules: [('A', "AB".to_string()), ('B', "A".to_string())]
                .into_iter()
                .collect(),
            iterations,
            turtle: Default::default(),
        };
        lengths.push(expand(&spec).map_err(|e| e.to_string())?.chars().count());
    }
    ensure!(lengths == [1, 2, 3, 5, 8, 13], "lengths {lengths:?}");
    Ok(format!("lengths {lengths:?}"))
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 12] = [
        ("empty-lobe nullity", empty_lobe_nullity),
        ("single-facet range law", single_facet_range_law),
        ("inverse-square amplitude", inverse_square),
        ("band support and realness", band_support),
        ("superposition and linearity", superposition),
        ("beampattern half-power", half_power),
        ("IPP statistics", ipp_statistics),
        ("cone query vs brute force", cone_oracle),
        ("15-pose circle around one tree", circle_scenario),
        ("timing trends", timing_trends),
        ("run determinism", determinism),
        ("L-system growth", lsystem_growth),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
