//! Sonar paths, the per-pose echo pipeline, and timing sweeps.

use crate::acoustics::{
    assemble_spectrum, AcousticConfig, AcousticsError, ImpulseResponse, LeafBeampatternParams,
    SonarBeampatternParams, Synthesizer,
};
use crate::geom::{Vec2, Vec3};
use crate::num::Real;
use crate::scene::{
    build_scene, facets_in_main_lobe, sample_ipp_with_count, IppConfig, Scene, SceneError,
    TreeSource,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invalid trajectory `{field}`: {reason}")]
    InvalidSpec {
        field: &'static str,
        reason: &'static str,
    },
    #[error("{0} requires a non-empty scene")]
    EmptyScene(&'static str),
    #[error(transparent)]
    Acoustics(#[from] AcousticsError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonarPose<T> {
    pub position: Vec3<T>,
    /// Unit aiming direction.
    pub boresight: Vec3<T>,
    /// Full main-lobe width, degrees, in `(0, 180)`.
    pub beamwidth_deg: T,
}

impl<T: Real> SonarPose<T> {
    pub fn new(position: Vec3<T>, boresight: Vec3<T>, beamwidth_deg: T) -> Self {
        Self {
            position,
            boresight,
            beamwidth_deg,
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if (self.boresight.norm() - T::one()).abs() > T::lit(1e-9) {
            return Err(TrajectoryError::InvalidSpec {
                field: "boresight",
                reason: "must be a unit vector",
            });
        }
        validate_beamwidth(self.beamwidth_deg)
    }
}

fn validate_beamwidth<T: Real>(bw: T) -> Result<(), TrajectoryError> {
    if bw > T::zero() && bw < T::lit(180.0) {
        Ok(())
    } else {
        Err(TrajectoryError::InvalidSpec {
            field: "beamwidth_deg",
            reason: "must lie in (0, 180)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoCenter {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CircleCenter<T> {
    /// Mean of the tree positions.
    Auto(AutoCenter),
    Fixed([T; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct CircleSpec<T> {
    pub center: CircleCenter<T>,
    /// Meters.
    pub radius: T,
    /// Sonar height, meters; defaults to half the mean tree height.
    #[serde(default)]
    pub height: Option<T>,
    pub points: usize,
    /// Angular step, degrees; defaults to `360 / points`.
    #[serde(default)]
    pub interval_deg: Option<T>,
    pub beamwidth_deg: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct LineSpec<T> {
    pub start: Vec3<T>,
    pub end: Vec3<T>,
    pub points: usize,
    pub beamwidth_deg: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "T: Real")]
pub enum TrajectorySpec<T> {
    /// Horizontal circle, boresight aimed at the centre.
    Circle(CircleSpec<T>),
    /// Straight path, boresight along the direction of travel.
    Line(LineSpec<T>),
}

impl<T: Real> TrajectorySpec<T> {
    pub fn points(&self) -> usize {
        match self {
            TrajectorySpec::Circle(c) => c.points,
            TrajectorySpec::Line(l) => l.points,
        }
    }

    pub fn with_points(&self, points: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            TrajectorySpec::Circle(c) => c.points = points,
            TrajectorySpec::Line(l) => l.points = points,
        }
        s
    }

    pub fn beamwidth_deg(&self) -> T {
        match self {
            TrajectorySpec::Circle(c) => c.beamwidth_deg,
            TrajectorySpec::Line(l) => l.beamwidth_deg,
        }
    }
}

pub fn poses_from_spec<T: Real>(
    spec: &TrajectorySpec<T>,
    scene: &Scene<T>,
) -> Result<Vec<SonarPose<T>>, TrajectoryError> {
    validate_beamwidth(spec.beamwidth_deg())?;
    if spec.points() == 0 {
        return Err(TrajectoryError::InvalidSpec {
            field: "points",
            reason: "must be at least 1",
        });
    }
    match spec {
        TrajectorySpec::Circle(c) => {
            if !(c.radius > T::zero()) {
                return Err(TrajectoryError::InvalidSpec {
                    field: "radius",
                    reason: "must be positive",
                });
            }
            let center = match c.center {
                CircleCenter::Fixed([x, y]) => Vec2::new(x, y),
                CircleCenter::Auto(_) => scene
                    .mean_position()
                    .ok_or(TrajectoryError::EmptyScene("center = \"auto\""))?,
            };
            let height = match c.height {
                Some(h) => h,
                None => {
                    scene
                        .mean_tree_height()
                        .ok_or(TrajectoryError::EmptyScene("default sonar height"))?
                        / T::lit(2.0)
                }
            };
            let interval = c
                .interval_deg
                .unwrap_or_else(|| T::lit(360.0) / T::from_usize_lossy(c.points));
            Ok((0..c.points)
                .map(|i| {
                    let angle = (interval * T::from_usize_lossy(i)).to_radians();
                    let (s, co) = angle.sin_cos();
                    SonarPose::new(
                        Vec3::new(center.x + c.radius * co, center.y + c.radius * s, height),
                        Vec3::new(-co, -s, T::zero()),
                        c.beamwidth_deg,
                    )
                })
                .collect())
        }
        TrajectorySpec::Line(l) => {
            let dir = (l.end - l.start)
                .try_normalize()
                .ok_or(TrajectoryError::InvalidSpec {
                    field: "end",
                    reason: "must differ from start",
                })?;
            Ok((0..l.points)
                .map(|i| {
                    let t = if l.points == 1 {
                        T::zero()
                    } else {
                        T::from_usize_lossy(i) / T::from_usize_lossy(l.points - 1)
                    };
                    SonarPose::new(l.start.lerp(l.end, t), dir, l.beamwidth_deg)
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult<T> {
    pub pose: SonarPose<T>,
    /// Facets in the main lobe (`m`).
    pub facet_count: usize,
    pub impulse: ImpulseResponse<T>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<T> {
    pub points: Vec<PointResult<T>>,
    /// End-to-end wall time of the impulse pipeline over all poses.
    pub total_wall_time_s: f64,
    pub tree_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Poses fan out over the current rayon pool; results keep pose order.
    #[default]
    Parallel,
}

/// Facet query, spectrum assembly, and inverse transform for one pose.
pub fn simulate_pose<T: Real>(
    scene: &Scene<T>,
    pose: &SonarPose<T>,
    cfg: &AcousticConfig<T>,
    leaf: &LeafBeampatternParams<T>,
    synth: &Synthesizer<T>,
) -> Result<(usize, ImpulseResponse<T>), TrajectoryError> {
    pose.validate()?;
    let sonar = SonarBeampatternParams::from_beamwidth(
        pose.beamwidth_deg.to_radians(),
        cfg.sonar_amplitude,
    );
    let facets = facets_in_main_lobe(scene, pose);
    let spectrum = assemble_spectrum(&facets, cfg, &sonar, leaf);
    Ok((facets.len(), synth.synthesize(&spectrum)?))
}

pub fn run_poses<T: Real>(
    poses: &[SonarPose<T>],
    scene: &Scene<T>,
    cfg: &AcousticConfig<T>,
    leaf: &LeafBeampatternParams<T>,
    execution: Execution,
) -> Result<RunReport<T>, TrajectoryError> {
    leaf.validate()?;
    let synth = Synthesizer::new(cfg)?;
    let one = |pose: &SonarPose<T>| {
        let t0 = Instant::now();
        let (facet_count, impulse) = simulate_pose(scene, pose, cfg, leaf, &synth)?;
        Ok(PointResult {
            pose: *pose,
            facet_count,
            impulse,
            wall_time_s: t0.elapsed().as_secs_f64(),
        })
    };
    let start = Instant::now();
    let points: Result<Vec<_>, TrajectoryError> = match execution {
        Execution::Sequential => poses.iter().map(one).collect(),
        Execution::Parallel => poses.par_iter().map(one).collect(),
    };
    let total_wall_time_s = start.elapsed().as_secs_f64();
    Ok(RunReport {
        points: points?,
        total_wall_time_s,
        tree_count: scene.placements().len(),
    })
}

pub fn run_trajectory<T: Real>(
    spec: &TrajectorySpec<T>,
    scene: &Scene<T>,
    cfg: &AcousticConfig<T>,
    leaf: &LeafBeampatternParams<T>,
    execution: Execution,
) -> Result<RunReport<T>, TrajectoryError> {
    let poses = poses_from_spec(spec, scene)?;
    run_poses(&poses, scene, cfg, leaf, execution)
}

/// Inputs for regenerating scenes of a given tree count.
#[derive(Debug, Clone)]
pub struct SweepSetup<T> {
    pub ipp: IppConfig<T>,
    pub source: TreeSource<T>,
    pub master_seed: u64,
    pub trajectory: TrajectorySpec<T>,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingTable {
    pub point_counts: Vec<usize>,
    pub tree_counts: Vec<usize>,
    /// Median total pipeline time, seconds; `seconds[row = points][col = trees]`.
    pub seconds: Vec<Vec<f64>>,
    /// Sum of facet counts over the trajectory for each cell.
    pub facets: Vec<Vec<usize>>,
}

impl TimingTable {
    pub fn monotone_in_points(&self) -> bool {
        (0..self.tree_counts.len()).all(|c| self.seconds.windows(2).all(|w| w[0][c] <= w[1][c]))
    }

    pub fn monotone_in_trees(&self) -> bool {
        self.seconds
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Whether the facet workload itself grows along both axes.
    pub fn facets_monotone(&self) -> bool {
        let rows = self
            .facets
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1]));
        let cols =
            (0..self.tree_counts.len()).all(|c| self.facets.windows(2).all(|w| w[0][c] <= w[1][c]));
        rows && cols
    }

    /// Rows are point counts, columns `T=<trees>`.
    pub fn to_csv(&self) -> String {
        self.layout(|r, c| format!("{:.6}", self.seconds[r][c]))
    }

    /// Same layout as [`TimingTable::to_csv`] with total facet counts.
    pub fn facets_csv(&self) -> String {
        self.layout(|r, c| self.facets[r][c].to_string())
    }

    fn layout(&self, cell: impl Fn(usize, usize) -> String) -> String {
        let mut out = String::from("points");
        for t in &self.tree_counts {
            let _ = write!(out, ",T={t}");
        }
        out.push('\n');
        for (r, p) in self.point_counts.iter().enumerate() {
            let _ = write!(out, "{p}");
            for c in 0..self.tree_counts.len() {
                let _ = write!(out, ",{}", cell(r, c));
            }
            out.push('\n');
        }
        out
    }
}

/// Resolves scene-dependent circle settings (auto centre, default height)
/// against `scene`, so the same path can be flown through other scenes.
pub fn freeze_trajectory<T: Real>(
    spec: &TrajectorySpec<T>,
    scene: &Scene<T>,
) -> Result<TrajectorySpec<T>, TrajectoryError> {
    let mut spec = spec.clone();
    if let TrajectorySpec::Circle(c) = &mut spec {
        if let CircleCenter::Auto(_) = c.center {
            let m = scene
                .mean_position()
                .ok_or(TrajectoryError::EmptyScene("center = \"auto\""))?;
            c.center = CircleCenter::Fixed([m.x, m.y]);
        }
        if c.height.is_none() {
            let h = scene
                .mean_tree_height()
                .ok_or(TrajectoryError::EmptyScene("default sonar height"))?;
            c.height = Some(h / T::lit(2.0));
        }
    }
    Ok(spec)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median-of-`repetitions` pipeline time for every (points, trees) cell.
///
/// The scene for `T` trees holds the first `T` thinning-accepted positions of
/// the fixed IPP seed, so scenes are nested across columns, and the path is
/// frozen against the largest scene so every column flies the same poses.
/// Poses run sequentially so that cells measure total work, not parallel width.
pub fn timing_sweep<T: Real>(
    point_counts: &[usize],
    tree_counts: &[usize],
    setup: &SweepSetup<T>,
    cfg: &AcousticConfig<T>,
    leaf: &LeafBeampatternParams<T>,
) -> Result<TimingTable, TrajectoryError> {
    if point_counts.is_empty() || tree_counts.is_empty() {
        return Err(TrajectoryError::InvalidSpec {
            field: "timing",
            reason: "point and tree count lists must be non-empty",
        });
    }
    let reps = setup.repetitions.max(1);
    let largest = *tree_counts.iter().max().expect("non-empty");
    let positions = sample_ipp_with_count(&setup.ipp, largest)?;
    let trajectory = {
        let scene = build_scene(&positions, &setup.source, setup.master_seed)?;
        freeze_trajectory(&setup.trajectory, &scene)?
    };
    let mut seconds = vec![vec![0.0; tree_counts.len()]; point_counts.len()];
    let mut facets = vec![vec![0; tree_counts.len()]; point_counts.len()];
    for (c, &trees) in tree_counts.iter().enumerate() {
        let scene = build_scene(&positions[..trees], &setup.source, setup.master_seed)?;
        for (r, &points) in point_counts.iter().enumerate() {
            let spec = trajectory.with_points(points);
            let poses = poses_from_spec(&spec, &scene)?;
            // Warm-up run, not recorded.
            let warm = run_poses(&poses, &scene, cfg, leaf, Execution::Sequential)?;
            facets[r][c] = warm.points.iter().map(|p| p.facet_count).sum();
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                times.push(
                    run_poses(&poses, &scene, cfg, leaf, Execution::Sequential)?.total_wall_time_s,
                );
            }
            seconds[r][c] = median(times);
        }
    }
    Ok(TimingTable {
        point_counts: point_counts.to_vec(),
        tree_counts: tree_counts.to_vec(),
        seconds,
        facets,
    })
}

#[cfg(test)]
mod tests;
