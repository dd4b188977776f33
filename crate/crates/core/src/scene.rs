//! Tree placement by inhomogeneous Poisson sampling and main-lobe facet queries.

use crate::geom::{Vec2, Vec3};
use crate::lsystem::BranchAttachment;
use crate::num::Real;
use crate::seed;
use crate::trajectory::SonarPose;
use crate::treegen::{LeafDisk, RandomizationParams, TreeError, TreeGeometry, TreeTemplate};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::sync::Arc;
use thiserror::Error;

pub const SCENE_FORMAT_VERSION: u32 = 1;

/// Samples per axis when validating a function intensity against `lambda_max`.
const PROBE_GRID: usize = 65;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid IPP config `{field}`: {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    #[error("intensity {value} at ({x}, {y}) exceeds lambda_max {max}")]
    IntensityExceedsMax {
        x: f64,
        y: f64,
        value: f64,
        max: f64,
    },
    #[error("intensity {value} at ({x}, {y}) is negative")]
    NegativeIntensity { x: f64, y: f64, value: f64 },
    #[error("intensity grid: {0}")]
    Grid(String),
    #[error("intensity grid csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("placement references unknown tree {0}")]
    UnknownTree(usize),
    #[error("unsupported scene format version {0}")]
    Version(u32),
    #[error("thinning accepted {accepted} of {wanted} points after {attempts} candidates")]
    ThinningStalled {
        accepted: usize,
        wanted: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(min: Vec2<T>, max: Vec2<T>) -> Self {
        Self { min, max }
    }

    pub fn area(&self) -> T {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Intensity on a rectilinear grid, bilinear between nodes and clamped outside.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    /// Row-major, `values[iy * xs.len() + ix]`.
    values: Vec<T>,
}

impl<T: Real> IntensityGrid<T> {
    /// Parses CSV rows `x,y,lambda`. A header row is accepted and ignored when
    /// its first field is not numeric. Every (x, y) combination must appear once.
    pub fn from_csv(reader: impl Read) -> Result<Self, SceneError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(SceneError::Grid(format!(
                    "row {}: expected 3 fields, got {}",
                    i + 1,
                    rec.len()
                )));
            }
            let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push((v[0], v[1], v[2])),
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(SceneError::Grid(format!(
                        "row {}: non-numeric field",
                        i + 1
                    )))
                }
            }
        }
        Self::from_points(&rows)
    }

    pub fn from_points(rows: &[(f64, f64, f64)]) -> Result<Self, SceneError> {
        if rows.is_empty() {
            return Err(SceneError::Grid("no grid points".into()));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for v in xs.iter().chain(&ys).chain(rows.iter().map(|r| &r.2)) {
            if !v.is_finite() {
                return Err(SceneError::Grid("non-finite value".into()));
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        if xs.len() * ys.len() != rows.len() {
            return Err(SceneError::Grid(format!(
                "{} points do not form a full {}x{} grid",
                rows.len(),
                xs.len(),
                ys.len()
            )));
        }
        let mut values = vec![None; rows.len()];
        for &(x, y, v) in rows {
            let ix = xs.binary_search_by(|p| p.total_cmp(&x)).expect("x present");
            let iy = ys.binary_search_by(|p| p.total_cmp(&y)).expect("y present");
            let slot = &mut values[iy * xs.len() + ix];
            if slot.is_some() {
                return Err(SceneError::Grid(format!("duplicate grid point ({x}, {y})")));
            }
            *slot = Some(T::lit(v));
        }
        Ok(Self {
            xs: xs.into_iter().map(T::lit).collect(),
            ys: ys.into_iter().map(T::lit).collect(),
            values: values
                .into_iter()
                .map(|v| v.expect("grid filled"))
                .collect(),
        })
    }

    fn bracket(axis: &[T], v: T) -> (usize, usize, T) {
        if axis.len() == 1 || v <= axis[0] {
            return (0, 0, T::zero());
        }
        let last = axis.len() - 1;
        if v >= axis[last] {
            return (last, last, T::zero());
        }
        let j = axis.partition_point(|&a| a <= v);
        let t = (v - axis[j - 1]) / (axis[j] - axis[j - 1]);
        (j - 1, j, t)
    }

    pub fn eval(&self, p: Vec2<T>) -> T {
        let (x0, x1, tx) = Self::bracket(&self.xs, p.x);
        let (y0, y1, ty) = Self::bracket(&self.ys, p.y);
        let nx = self.xs.len();
        let v = |ix: usize, iy: usize| self.values[iy * nx + ix];
        let lo = v(x0, y0) + (v(x1, y0) - v(x0, y0)) * tx;
        let hi = v(x0, y1) + (v(x1, y1) - v(x0, y1)) * tx;
        lo + (hi - lo) * ty
    }

    fn nodes(&self) -> impl Iterator<Item = (Vec2<T>, T)> + '_ {
        let nx = self.xs.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (Vec2::new(self.xs[i % nx], self.ys[i / nx]), v))
    }
}

pub type IntensityFn<T> = Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub enum Intensity<T> {
    Constant(T),
    Grid(IntensityGrid<T>),
    Function(IntensityFn<T>),
}

impl<T: Real> Intensity<T> {
    pub fn eval(&self, p: Vec2<T>) -> T {
        match self {
            Intensity::Constant(v) => *v,
            Intensity::Grid(g) => g.eval(p),
            Intensity::Function(f) => f(p),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Intensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Intensity::Grid(g) => f.debug_tuple("Grid").field(g).finish(),
            Intensity::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IppConfig<T> {
    pub domain: Rect<T>,
    pub intensity: Intensity<T>,
    pub lambda_max: T,
    pub seed: u64,
}

impl<T: Real> IppConfig<T> {
    fn check_value(&self, p: Vec2<T>, value: T) -> Result<(), SceneError> {
        if value < T::zero() || value.is_nan() {
            return Err(SceneError::NegativeIntensity {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
                value: value.as_f64(),
            });
        }
        if value > self.lambda_max {
            return Err(SceneError::IntensityExceedsMax {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
                value: value.as_f64(),
                max: self.lambda_max.as_f64(),
            });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.lambda_max > T::zero() && self.lambda_max.is_finite()) {
            return Err(SceneError::InvalidConfig {
                field: "lambda_max",
                reason: "must be positive and finite",
            });
        }
        let d = &self.domain;
        if !(d.max.x > d.min.x && d.max.y > d.min.y && d.area().is_finite()) {
            return Err(SceneError::InvalidConfig {
                field: "domain",
                reason: "must be a non-degenerate finite rectangle",
            });
        }
        match &self.intensity {
            Intensity::Constant(v) => self.check_value(d.min, *v),
            Intensity::Grid(g) => g.nodes().try_for_each(|(p, v)| self.check_value(p, v)),
            Intensity::Function(f) => {
                let step = |lo: T, hi: T, i: usize| {
                    lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(PROBE_GRID - 1)
                };
                for iy in 0..PROBE_GRID {
                    for ix in 0..PROBE_GRID {
                        let p = Vec2::new(step(d.min.x, d.max.x, ix), step(d.min.y, d.max.y, iy));
                        self.check_value(p, f(p))?;
                    }
                }
                Ok(())
            }
        }
    }

    fn uniform_point(&self, rng: &mut seed::SimRng) -> Vec2<T> {
        let d = &self.domain;
        let ux = T::lit(rng.random::<f64>());
        let uy = T::lit(rng.random::<f64>());
        Vec2::new(
            d.min.x + (d.max.x - d.min.x) * ux,
            d.min.y + (d.max.y - d.min.y) * uy,
        )
    }

    /// Keeps candidate `p` with probability `lambda(p) / lambda_max`.
    fn accept(&self, p: Vec2<T>, rng: &mut seed::SimRng) -> Result<bool, SceneError> {
        let value = self.intensity.eval(p);
        self.check_value(p, value)?;
        Ok(T::lit(rng.random::<f64>()) * self.lambda_max < value)
    }
}

/// Thinning: a homogeneous Poisson process of rate `lambda_max` on the domain,
/// each candidate kept independently with probability `lambda(s) / lambda_max`.
pub fn sample_ipp<T: Real>(cfg: &IppConfig<T>) -> Result<Vec<Vec2<T>>, SceneError> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let mean = (cfg.lambda_max * cfg.domain.area()).as_f64();
    let count = Poisson::new(mean)
        .map_err(|_| SceneError::InvalidConfig {
            field: "lambda_max",
            reason: "expected candidate count out of range",
        })?
        .sample(&mut rng) as usize;
    let mut kept = Vec::new();
    for _ in 0..count {
        let p = cfg.uniform_point(&mut rng);
        if cfg.accept(p, &mut rng)? {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// Exactly `n` points distributed as the IPP conditioned on `n` events:
/// candidates are thinned until `n` have been accepted.
pub fn sample_ipp_with_count<T: Real>(
    cfg: &IppConfig<T>,
    n: usize,
) -> Result<Vec<Vec2<T>>, SceneError> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let limit = 1_000_000usize.saturating_mul(n.max(1));
    let mut kept = Vec::with_capacity(n);
    let mut attempts = 0;
    while kept.len() < n {
        if attempts >= limit {
            return Err(SceneError::ThinningStalled {
                accepted: kept.len(),
                wanted: n,
                attempts,
            });
        }
        attempts += 1;
        let p = cfg.uniform_point(&mut rng);
        if cfg.accept(p, &mut rng)? {
            kept.push(p);
        }
    }
    Ok(kept)
}

/// One reflecting leaf as seen from a sonar pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetObservation<T> {
    /// Index of the leaf in `Scene::leaves`.
    pub leaf: usize,
    /// Sonar-to-centre distance, meters.
    pub range: T,
    /// Horizontal off-axis component, radians (positive to the sonar's left).
    pub azimuth: T,
    /// Vertical off-axis component, radians (positive up).
    pub elevation: T,
    /// Angle between the disk normal and the disk-to-sonar direction, folded to `[0, pi/2]`.
    pub incidence: T,
    /// Disk radius, meters.
    pub radius: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement<T> {
    pub tree_id: usize,
    pub position: Vec2<T>,
    pub yaw: T,
    /// Seed the tree's geometry was generated with.
    pub seed: u64,
}

/// Sonar frame: forward (boresight), left, up.
struct SonarFrame<T> {
    origin: Vec3<T>,
    forward: Vec3<T>,
    left: Vec3<T>,
    up: Vec3<T>,
    half_angle: T,
}

impl<T: Real> SonarFrame<T> {
    fn new(pose: &SonarPose<T>) -> Self {
        let forward = pose.boresight.normalize();
        let left = Vec3::unit_z()
            .cross(forward)
            .try_normalize()
            .unwrap_or_else(|| forward.any_orthogonal());
        let up = forward.cross(left);
        Self {
            origin: pose.position,
            forward,
            left,
            up,
            half_angle: pose.beamwidth_deg.to_radians() / T::lit(2.0),
        }
    }

    /// The exact main-lobe test shared by the indexed and brute-force queries.
    fn observe(&self, index: usize, leaf: &LeafDisk<T>) -> Option<FacetObservation<T>> {
        let w = leaf.center - self.origin;
        let range = w.norm();
        if !(range > T::zero()) {
            return None;
        }
        let fwd = w.dot(self.forward);
        let lat = w.dot(self.left);
        let vert = w.dot(self.up);
        let transverse = lat.hypot(vert);
        let off_axis = transverse.atan2(fwd);
        if off_axis > self.half_angle {
            return None;
        }
        let (azimuth, elevation) = if transverse > T::zero() {
            (off_axis * lat / transverse, off_axis * vert / transverse)
        } else {
            (T::zero(), T::zero())
        };
        let cos_incidence = (leaf.normal.dot(w) / range).abs().min(T::one());
        Some(FacetObservation {
            leaf: index,
            range,
            azimuth,
            elevation,
            incidence: cos_incidence.acos(),
            radius: leaf.radius,
        })
    }

    /// Conservative: true whenever some point of the ball may lie in the cone.
    fn may_hit_ball(&self, center: Vec3<T>, radius: T) -> bool {
        let w = center - self.origin;
        let d = w.norm();
        if d <= radius {
            return true;
        }
        let theta = w.cross(self.forward).norm().atan2(w.dot(self.forward));
        let alpha = (radius / d).min(T::one()).asin();
        theta - alpha <= self.half_angle + T::lit(1e-9)
    }
}

fn sort_observations<T: Real>(obs: &mut [FacetObservation<T>]) {
    obs.sort_by(|a, b| {
        a.range
            .partial_cmp(&b.range)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.leaf.cmp(&b.leaf))
    });
}

/// Uniform grid over leaf centres, stored in CSR form.
#[derive(Debug, Clone)]
struct LeafGrid<T> {
    /// Non-empty cells: bounding-ball centre and radius.
    cells: Vec<(Vec3<T>, T)>,
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl<T: Real> LeafGrid<T> {
    const TARGET_PER_CELL: f64 = 6.0;
    const MAX_DIM: usize = 128;

    fn build(leaves: &[LeafDisk<T>]) -> Self {
        if leaves.is_empty() {
            return Self {
                cells: Vec::new(),
                offsets: vec![0],
                items: Vec::new(),
            };
        }
        let mut lo = leaves[0].center;
        let mut hi = lo;
        for l in leaves {
            let c = l.center;
            lo = Vec3::new(lo.x.min(c.x), lo.y.min(c.y), lo.z.min(c.z));
            hi = Vec3::new(hi.x.max(c.x), hi.y.max(c.y), hi.z.max(c.z));
        }
        let pad = T::lit(1e-3);
        let ext = Vec3::new(hi.x - lo.x + pad, hi.y - lo.y + pad, hi.z - lo.z + pad);
        let cells_wanted = (leaves.len() as f64 / Self::TARGET_PER_CELL).max(1.0);
        let volume = (ext.x * ext.y * ext.z).as_f64();
        let size = T::lit((volume / cells_wanted).cbrt());
        let dim = |e: T| ((e / size).ceil().to_usize().unwrap_or(1)).clamp(1, Self::MAX_DIM);
        let dims = [dim(ext.x), dim(ext.y), dim(ext.z)];
        let cell_size = Vec3::new(
            ext.x / T::from_usize_lossy(dims[0]),
            ext.y / T::from_usize_lossy(dims[1]),
            ext.z / T::from_usize_lossy(dims[2]),
        );
        let cell_of = |c: Vec3<T>| {
            let ix = |v: T, o: T, s: T, n: usize| {
                (((v - o) / s).floor().to_usize().unwrap_or(0)).min(n - 1)
            };
            let x = ix(c.x, lo.x, cell_size.x, dims[0]);
            let y = ix(c.y, lo.y, cell_size.y, dims[1]);
            let z = ix(c.z, lo.z, cell_size.z, dims[2]);
            (z * dims[1] + y) * dims[0] + x
        };
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, l) in leaves.iter().enumerate() {
            buckets.entry(cell_of(l.center)).or_default().push(i);
        }
        let mut cells = Vec::with_capacity(buckets.len());
        let mut offsets = vec![0];
        let mut items = Vec::with_capacity(leaves.len());
        for (_, members) in buckets {
            // Ball around the members' own bounding box is tighter than the cell's.
            let mut blo = leaves[members[0]].center;
            let mut bhi = blo;
            for &m in &members {
                let c = leaves[m].center;
                blo = Vec3::new(blo.x.min(c.x), blo.y.min(c.y), blo.z.min(c.z));
                bhi = Vec3::new(bhi.x.max(c.x), bhi.y.max(c.y), bhi.z.max(c.z));
            }
            let center = (blo + bhi) / T::lit(2.0);
            let radius = members
                .iter()
                .map(|&m| leaves[m].center.distance(center))
                .fold(T::zero(), T::max);
            cells.push((center, radius * (T::one() + T::lit(1e-9)) + T::lit(1e-12)));
            items.extend_from_slice(&members);
            offsets.push(items.len());
        }
        Self {
            cells,
            offsets,
            items,
        }
    }
}

/// Placed trees plus world-space leaves and their spatial index. Immutable once built.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    placements: Vec<Placement<T>>,
    trees: BTreeMap<usize, TreeGeometry<T>>,
    leaves: Vec<LeafDisk<T>>,
    leaf_tree: Vec<usize>,
    index: LeafGrid<T>,
}

impl<T: Real> Scene<T> {
    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), BTreeMap::new()).expect("empty scene")
    }

    pub fn from_parts(
        placements: Vec<Placement<T>>,
        trees: BTreeMap<usize, TreeGeometry<T>>,
    ) -> Result<Self, SceneError> {
        let mut leaves = Vec::new();
        let mut leaf_tree = Vec::new();
        for (pi, p) in placements.iter().enumerate() {
            let tree = trees
                .get(&p.tree_id)
                .ok_or(SceneError::UnknownTree(p.tree_id))?;
            let offset = p.position.extend(T::zero());
            for l in &tree.leaves {
                leaves.push(LeafDisk {
                    center: l.center.rotate_z(p.yaw) + offset,
                    normal: l.normal.rotate_z(p.yaw),
                    radius: l.radius,
                });
                leaf_tree.push(pi);
            }
        }
        let index = LeafGrid::build(&leaves);
        Ok(Self {
            placements,
            trees,
            leaves,
            leaf_tree,
            index,
        })
    }

    pub fn placements(&self) -> &[Placement<T>] {
        &self.placements
    }

    pub fn trees(&self) -> &BTreeMap<usize, TreeGeometry<T>> {
        &self.trees
    }

    /// World-space leaf disks.
    pub fn leaves(&self) -> &[LeafDisk<T>] {
        &self.leaves
    }

    /// Placement index owning each leaf.
    pub fn leaf_owner(&self, leaf: usize) -> usize {
        self.leaf_tree[leaf]
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn mean_position(&self) -> Option<Vec2<T>> {
        if self.placements.is_empty() {
            return None;
        }
        let sum = self
            .placements
            .iter()
            .fold(Vec2::zero(), |acc, p| acc + p.position);
        Some(sum / T::from_usize_lossy(self.placements.len()))
    }

    pub fn mean_tree_height(&self) -> Option<T> {
        if self.placements.is_empty() {
            return None;
        }
        let sum = self
            .placements
            .iter()
            .map(|p| self.trees[&p.tree_id].height())
            .fold(T::zero(), |a, b| a + b);
        Some(sum / T::from_usize_lossy(self.placements.len()))
    }

    pub fn to_file(
        &self,
        master_seed: u64,
        params: Option<RandomizationParams<T>>,
    ) -> SceneFile<T> {
        SceneFile {
            version: SCENE_FORMAT_VERSION,
            master_seed,
            params,
            placements: self.placements.clone(),
            trees: self.trees.clone(),
        }
    }

    pub fn from_file(file: SceneFile<T>) -> Result<Self, SceneError> {
        if file.version != SCENE_FORMAT_VERSION {
            return Err(SceneError::Version(file.version));
        }
        Self::from_parts(file.placements, file.trees)
    }
}

/// Serialized scene: placements, seeds and parameters, and embedded geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct SceneFile<T> {
    pub version: u32,
    pub master_seed: u64,
    pub params: Option<RandomizationParams<T>>,
    pub placements: Vec<Placement<T>>,
    pub trees: BTreeMap<usize, TreeGeometry<T>>,
}

/// Everything needed to grow the trees of a scene.
#[derive(Debug, Clone)]
pub struct TreeSource<T> {
    pub template: TreeTemplate<T>,
    pub attachments: Vec<BranchAttachment<T>>,
    /// Base parameters; each tree gets its own derived seed.
    pub params: RandomizationParams<T>,
}

/// One randomized tree per position; tree `i` uses seed `derive(master, "tree", i)`
/// and yaw uniform in `[0, 2 pi)` from `derive(master, "yaw", i)`.
pub fn build_scene<T: Real>(
    positions: &[Vec2<T>],
    source: &TreeSource<T>,
    master_seed: u64,
) -> Result<Scene<T>, SceneError> {
    let mut placements = Vec::with_capacity(positions.len());
    let mut trees = BTreeMap::new();
    for (i, &position) in positions.iter().enumerate() {
        let tree_seed = seed::derive(master_seed, "tree", i as u64);
        let params = source.params.clone().with_seed(tree_seed);
        let tree = source.template.randomize(&source.attachments, &params)?;
        let mut yaw_rng = seed::rng(seed::derive(master_seed, "yaw", i as u64));
        let yaw = T::TAU() * T::lit(yaw_rng.random::<f64>());
        trees.insert(i, tree);
        placements.push(Placement {
            tree_id: i,
            position,
            yaw,
            seed: tree_seed,
        });
    }
    Scene::from_parts(placements, trees)
}

/// Leaves whose centre lies within half the beamwidth of boresight, by ascending range.
pub fn facets_in_main_lobe<T: Real>(
    scene: &Scene<T>,
    pose: &SonarPose<T>,
) -> Vec<FacetObservation<T>> {
    let frame = SonarFrame::new(pose);
    let grid = &scene.index;
    let mut out = Vec::new();
    for (c, &(center, radius)) in grid.cells.iter().enumerate() {
        if !frame.may_hit_ball(center, radius) {
            continue;
        }
        for &i in &grid.items[grid.offsets[c]..grid.offsets[c + 1]] {
            if let Some(o) = frame.observe(i, &scene.leaves[i]) {
                out.push(o);
            }
        }
    }
    sort_observations(&mut out);
    out
}

/// Exhaustive O(N) scan; the reference the indexed query must match.
pub fn facets_brute_force<T: Real>(
    scene: &Scene<T>,
    pose: &SonarPose<T>,
) -> Vec<FacetObservation<T>> {
    let frame = SonarFrame::new(pose);
    let mut out: Vec<_> = scene
        .leaves
        .iter()
        .enumerate()
        .filter_map(|(i, l)| frame.observe(i, l))
        .collect();
    sort_observations(&mut out);
    out
}
