//! Configuration file and the command implementations behind the binary.
//!
//! The config is a single TOML file; unknown keys are errors. Relative paths
//! inside it resolve against the config file's directory. One master `seed`
//! drives every random stream through [`crate::seed::derive`].

use crate::acoustics::{self, AcousticConfig, LeafBeampatternParams};
use crate::export;
use crate::geom::Vec2;
use crate::lsystem::{expand, interpret_trunk, LSystemSpec};
use crate::scene::{
    build_scene, sample_ipp, Intensity, IntensityGrid, IppConfig, Rect, Scene, SceneFile,
    TreeSource,
};
use crate::seed;
use crate::trajectory::{
    run_trajectory, timing_sweep, AutoCenter, CircleCenter, CircleSpec, Execution, RunReport,
    SweepSetup, TimingTable, TrajectorySpec,
};
use crate::treegen::{RandomizationParams, ReferenceTree, TreeGeometry, TreeTemplate};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const THREADS_ENV: &str = "FOLIAGE_ECHO_THREADS";
pub const TREE_FILE: &str = "tree.json";
pub const SCENE_FILE: &str = "scene.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const POSE_TIMING_FILE: &str = "timing.csv";
pub const TIMING_TABLE_FILE: &str = "timing_table.csv";
pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IppSection {
    pub domain_min: [f64; 2],
    pub domain_max: [f64; 2],
    /// Constant intensity, trees per square meter.
    #[serde(default)]
    pub intensity: Option<f64>,
    /// CSV of `x,y,lambda` grid nodes.
    #[serde(default)]
    pub intensity_csv: Option<PathBuf>,
    pub lambda_max: f64,
}

impl Default for IppSection {
    fn default() -> Self {
        Self {
            domain_min: [0.0, 0.0],
            domain_max: [20.0, 20.0],
            intensity: Some(0.05),
            intensity_csv: None,
            lambda_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub point_counts: Vec<usize>,
    pub tree_counts: Vec<usize>,
    pub repetitions: usize,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            point_counts: vec![1, 5, 10, 15],
            tree_counts: vec![1, 2, 3, 4, 5],
            repetitions: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Reference tree file; the bundled tree when absent.
    #[serde(default)]
    pub reference_tree: Option<PathBuf>,
    /// Previously generated scene to use instead of placing new trees.
    #[serde(default)]
    pub scene_file: Option<PathBuf>,
    /// Explicit tree positions; overrides `[ipp]` placement.
    #[serde(default)]
    pub tree_positions: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub ipp: IppSection,
    #[serde(default)]
    pub lsystem: LSystemSpec<f64>,
    /// Randomization parameters; the per-tree seed is always derived from `seed`.
    #[serde(default)]
    pub tree: RandomizationParams<f64>,
    #[serde(default)]
    pub acoustics: AcousticConfig<f64>,
    #[serde(default)]
    pub leaf_pattern: LeafBeampatternParams<f64>,
    #[serde(default)]
    pub trajectory: Option<TrajectorySpec<f64>>,
    #[serde(default)]
    pub timing: TimingSection,
    /// Directory relative paths resolve against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

/// Circle of radius 6.2 m around the tree mean, 15 poses 24 degrees apart, 20 degree beam.
pub fn default_trajectory() -> TrajectorySpec<f64> {
    TrajectorySpec::Circle(CircleSpec {
        center: CircleCenter::Auto(AutoCenter::Auto),
        radius: 6.2,
        height: None,
        points: 15,
        interval_deg: Some(24.0),
        beamwidth_deg: 20.0,
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_owned).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Resolves `p` against the config file's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `output_dir`, resolved like every other path in the config.
    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.lsystem
            .validate()
            .context("config section `lsystem`")?;
        self.tree.validate().context("config section `tree`")?;
        self.acoustics
            .validate()
            .context("config section `acoustics`")?;
        self.leaf_pattern
            .validate()
            .context("config section `leaf_pattern`")?;
        Ok(())
    }

    pub fn reference(&self) -> Result<ReferenceTree<f64>> {
        match &self.reference_tree {
            None => Ok(ReferenceTree::bundled()),
            Some(p) => {
                let path = self.resolve(p);
                ReferenceTree::load(&path)
                    .with_context(|| format!("config field `reference_tree` ({})", path.display()))
            }
        }
    }

    pub fn tree_source(&self) -> Result<TreeSource<f64>> {
        let reference = self.reference()?;
        let template = TreeTemplate::new(&reference).context("config field `reference_tree`")?;
        if template.skipped_leaf_groups > 0 {
            eprintln!(
                "warning: {} zero-area leaf group(s) skipped in the reference tree",
                template.skipped_leaf_groups
            );
        }
        let expanded = expand(&self.lsystem).context("config section `lsystem`")?;
        let layout =
            interpret_trunk(&expanded, &self.lsystem.turtle).context("config section `lsystem`")?;
        Ok(TreeSource {
            template,
            attachments: layout.attachments,
            params: self.tree.clone(),
        })
    }

    pub fn ipp_config(&self) -> Result<IppConfig<f64>> {
        let s = &self.ipp;
        let intensity = match (&s.intensity, &s.intensity_csv) {
            (Some(v), None) => Intensity::Constant(*v),
            (None, Some(p)) => {
                let path = self.resolve(p);
                let file = fs::File::open(&path).with_context(|| {
                    format!("config field `ipp.intensity_csv` ({})", path.display())
                })?;
                Intensity::Grid(IntensityGrid::from_csv(file).with_context(|| {
                    format!("config field `ipp.intensity_csv` ({})", path.display())
                })?)
            }
            (Some(_), Some(_)) => {
                bail!("config section `ipp`: set only one of `intensity` and `intensity_csv`")
            }
            (None, None) => {
                bail!("config section `ipp`: one of `intensity` or `intensity_csv` is required")
            }
        };
        let cfg = IppConfig {
            domain: Rect::new(
                Vec2::new(s.domain_min[0], s.domain_min[1]),
                Vec2::new(s.domain_max[0], s.domain_max[1]),
            ),
            intensity,
            lambda_max: s.lambda_max,
            seed: seed::derive(self.seed, "ipp", 0),
        };
        cfg.validate().context("config section `ipp`")?;
        Ok(cfg)
    }

    pub fn positions(&self) -> Result<Vec<Vec2<f64>>> {
        match &self.tree_positions {
            Some(p) => Ok(p.iter().map(|&[x, y]| Vec2::new(x, y)).collect()),
            None => Ok(sample_ipp(&self.ipp_config()?).context("config section `ipp`")?),
        }
    }

    pub fn scene(&self) -> Result<Scene<f64>> {
        if let Some(p) = &self.scene_file {
            let path = self.resolve(p);
            let text = fs::read_to_string(&path)
                .with_context(|| format!("config field `scene_file` ({})", path.display()))?;
            let file: SceneFile<f64> = serde_json::from_str(&text)
                .with_context(|| format!("config field `scene_file` ({})", path.display()))?;
            return Ok(Scene::from_file(file)?);
        }
        let positions = self.positions()?;
        let source = self.tree_source()?;
        Ok(build_scene(&positions, &source, self.seed)?)
    }
}

/// Runs `f` on a rayon pool of `threads` workers (0 = one per CPU).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub version: u32,
    pub seed: u64,
    pub params: RandomizationParams<f64>,
    pub lsystem: LSystemSpec<f64>,
    pub geometry: TreeGeometry<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSummary {
    pub branches: usize,
    pub leaves: usize,
    pub bounding_radius: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn cmd_gen_tree(cfg: &RunConfig, out_dir: &Path) -> Result<TreeSummary> {
    cfg.validate()?;
    let source = cfg.tree_source()?;
    let tree_seed = seed::derive(cfg.seed, "tree", 0);
    let params = source.params.clone().with_seed(tree_seed);
    let geometry = source.template.randomize(&source.attachments, &params)?;
    let summary = TreeSummary {
        branches: geometry.branches.len(),
        leaves: geometry.leaves.len(),
        bounding_radius: geometry.bounding_sphere.radius,
    };
    create_dir(out_dir)?;
    let file = TreeFile {
        version: OUTPUT_FORMAT_VERSION,
        seed: tree_seed,
        params,
        lsystem: cfg.lsystem.clone(),
        geometry,
    };
    write_json(&out_dir.join(TREE_FILE), &file)?;
    Ok(summary)
}

pub fn cmd_gen_scene(cfg: &RunConfig, out_dir: &Path) -> Result<Scene<f64>> {
    cfg.validate()?;
    let scene = cfg.scene()?;
    create_dir(out_dir)?;
    let mut params = cfg.tree.clone();
    params.seed = 0;
    write_json(
        &out_dir.join(SCENE_FILE),
        &scene.to_file(cfg.seed, Some(params)),
    )?;
    Ok(scene)
}

#[derive(Debug, Serialize)]
struct PoseEntry {
    index: usize,
    csv: String,
    wav: String,
    position: [f64; 3],
    boresight: [f64; 3],
    beamwidth_deg: f64,
    facet_count: usize,
    peak_index: Option<usize>,
    wall_time_s: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: u32,
    master_seed: u64,
    tree_count: usize,
    leaf_count: usize,
    tree_seeds: Vec<u64>,
    max_unaliased_range_m: f64,
    config: &'a RunConfig,
    trajectory: &'a TrajectorySpec<f64>,
    poses: Vec<PoseEntry>,
    total_wall_time_s: f64,
}

pub fn pose_stem(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(3);
    format!("impulse_{index:0width$}")
}

pub fn cmd_run(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<RunReport<f64>> {
    cfg.validate()?;
    let spec = cfg
        .trajectory
        .clone()
        .context("config section `trajectory` is required for `run`")?;
    let scene = cfg.scene()?;
    let report = with_threads(threads, || {
        run_trajectory(
            &spec,
            &scene,
            &cfg.acoustics,
            &cfg.leaf_pattern,
            Execution::Parallel,
        )
    })?
    .context("config section `trajectory`")?;

    create_dir(out_dir)?;
    let n = report.points.len();
    let mut poses = Vec::with_capacity(n);
    let mut timing = String::from("index,facet_count,wall_time_s\n");
    for (i, p) in report.points.iter().enumerate() {
        let stem = pose_stem(i, n);
        let csv = format!("{stem}.csv");
        let wav = format!("{stem}.wav");
        export::write_impulse_csv(&out_dir.join(&csv), &p.impulse)?;
        export::write_impulse_wav(&out_dir.join(&wav), &p.impulse)?;
        let _ = writeln!(timing, "{i},{},{:.6}", p.facet_count, p.wall_time_s);
        let pos = p.pose.position;
        let b = p.pose.boresight;
        poses.push(PoseEntry {
            index: i,
            csv,
            wav,
            position: [pos.x, pos.y, pos.z],
            boresight: [b.x, b.y, b.z],
            beamwidth_deg: p.pose.beamwidth_deg,
            facet_count: p.facet_count,
            peak_index: p.impulse.peak().filter(|(_, v)| *v != 0.0).map(|(i, _)| i),
            wall_time_s: p.wall_time_s,
        });
    }
    let _ = writeln!(
        timing,
        "total,{},{:.6}",
        report.points.iter().map(|p| p.facet_count).sum::<usize>(),
        report.total_wall_time_s
    );
    fs::write(out_dir.join(POSE_TIMING_FILE), timing).context("writing pose timing table")?;
    let manifest = Manifest {
        version: OUTPUT_FORMAT_VERSION,
        master_seed: cfg.seed,
        tree_count: scene.placements().len(),
        leaf_count: scene.leaves().len(),
        tree_seeds: scene.placements().iter().map(|p| p.seed).collect(),
        max_unaliased_range_m: cfg.acoustics.max_unaliased_range(),
        config: cfg,
        trajectory: &spec,
        poses,
        total_wall_time_s: report.total_wall_time_s,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(report)
}

pub fn cmd_timing(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<TimingTable> {
    cfg.validate()?;
    ensure!(
        cfg.tree_positions.is_none() && cfg.scene_file.is_none(),
        "`timing` regenerates scenes from `[ipp]`; remove `tree_positions`/`scene_file`"
    );
    let setup = SweepSetup {
        ipp: cfg.ipp_config()?,
        source: cfg.tree_source()?,
        master_seed: cfg.seed,
        trajectory: cfg.trajectory.clone().unwrap_or_else(default_trajectory),
        repetitions: cfg.timing.repetitions,
    };
    let t = &cfg.timing;
    let table = with_threads(threads, || {
        timing_sweep(
            &t.point_counts,
            &t.tree_counts,
            &setup,
            &cfg.acoustics,
            &cfg.leaf_pattern,
        )
    })?
    .context("config section `timing`")?;
    create_dir(out_dir)?;
    fs::write(out_dir.join(TIMING_TABLE_FILE), table.to_csv()).context("writing timing table")?;
    Ok(table)
}

/// Converts every `impulse_*.csv` in `run_dir` into `plot_*.dat` in `out_dir`.
pub fn cmd_plot_data(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut inputs: Vec<PathBuf> = fs::read_dir(run_dir)
        .with_context(|| format!("reading run directory {}", run_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("impulse_"))
        })
        .collect();
    inputs.sort();
    ensure!(
        !inputs.is_empty(),
        "no impulse_*.csv files in {}",
        run_dir.display()
    );
    create_dir(out_dir)?;
    let mut written = Vec::with_capacity(inputs.len());
    for input in inputs {
        let (times, amps) = export::read_impulse_csv(&input)?;
        let env = acoustics::envelope(&amps);
        let name = input
            .file_stem()
            .and_then(|s| s.to_str())
            .expect("filtered to utf-8 names")
            .replacen("impulse_", "plot_", 1);
        let out = out_dir.join(format!("{name}.dat"));
        export::write_plot_data(&out, &times, &amps, &env)?;
        written.push(out);
    }
    Ok(written)
}
