//! Randomized tree geometry built from a reference tree and trunk attachments.
//!
//! A reference tree is a tagged triangle mesh plus a branch skeleton. Each
//! root `branch` chain of the skeleton, with its sub-branches and the leaves
//! nearest to them, forms a branch module. Generation places module
//! `i mod K` at the `i`-th trunk attachment, then perturbs chain lengths,
//! curvature, sub-branch positions, and leaves.

mod format;

pub use format::{parse as parse_reference, write as write_reference};

use crate::geom::{Rotation, Vec3};
use crate::lsystem::BranchAttachment;
use crate::num::Real;
use crate::seed::{self, SimRng};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

/// Bundled procedurally authored reference tree (see `examples/author_reference_tree.rs`).
pub const BUNDLED_REFERENCE: &str = include_str!("../../assets/reference_tree.txt");

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid reference tree: {0}")]
    Validation(String),
    #[error("invalid randomization parameter `{field}`: {reason}")]
    InvalidParams {
        field: &'static str,
        reason: &'static str,
    },
    #[error("no branch attachments to grow branches from")]
    NoAttachments,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartTag {
    Trunk,
    Branch,
    SubBranch,
    Leaf,
}

impl fmt::Display for PartTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartTag::Trunk => "trunk",
            PartTag::Branch => "branch",
            PartTag::SubBranch => "sub-branch",
            PartTag::Leaf => "leaf",
        })
    }
}

impl FromStr for PartTag {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "trunk" => Ok(PartTag::Trunk),
            "branch" => Ok(PartTag::Branch),
            "sub-branch" => Ok(PartTag::SubBranch),
            "leaf" => Ok(PartTag::Leaf),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub indices: [usize; 3],
    pub part: PartTag,
    pub leaf_group: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonChain<T> {
    pub id: u32,
    pub parent: Option<u32>,
    pub part: PartTag,
    pub radius: T,
    pub points: Vec<Vec3<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTree<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<Triangle>,
    pub skeleton: Vec<SkeletonChain<T>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PartCounts {
    pub trunk: usize,
    pub branch: usize,
    pub sub_branch: usize,
    pub leaf: usize,
    pub leaf_groups: usize,
}

impl<T: Real> ReferenceTree<T> {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TreeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TreeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        format::parse(&text)
    }

    pub fn bundled() -> Self {
        format::parse(BUNDLED_REFERENCE).expect("bundled reference tree parses")
    }

    pub fn to_text(&self) -> String {
        format::write(self)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let n = self.vertices.len();
        for (k, t) in self.triangles.iter().enumerate() {
            if let Some(&bad) = t.indices.iter().find(|&&i| i >= n) {
                return Err(TreeError::Validation(format!(
                    "triangle {k} references vertex {bad} but only {n} vertices exist"
                )));
            }
            if (t.part == PartTag::Leaf) != t.leaf_group.is_some() {
                return Err(TreeError::Validation(format!(
                    "triangle {k}: leaf group must be set exactly on leaf triangles"
                )));
            }
        }
        let mut by_id = BTreeMap::new();
        for s in &self.skeleton {
            if by_id.insert(s.id, s).is_some() {
                return Err(TreeError::Validation(format!(
                    "duplicate skeleton chain id {}",
                    s.id
                )));
            }
            if s.points.len() < 2 {
                return Err(TreeError::Validation(format!(
                    "skeleton chain {} has fewer than 2 points",
                    s.id
                )));
            }
            if !(s.radius > T::zero()) {
                return Err(TreeError::Validation(format!(
                    "skeleton chain {} has non-positive radius",
                    s.id
                )));
            }
            if s.part == PartTag::Leaf {
                return Err(TreeError::Validation(format!(
                    "skeleton chain {} tagged leaf",
                    s.id
                )));
            }
        }
        for s in &self.skeleton {
            let mut steps = 0;
            let mut cur = s.parent;
            while let Some(p) = cur {
                let parent = by_id.get(&p).ok_or_else(|| {
                    TreeError::Validation(format!("skeleton chain {} has unknown parent {p}", s.id))
                })?;
                steps += 1;
                if steps > self.skeleton.len() {
                    return Err(TreeError::Validation(format!(
                        "skeleton parent links form a cycle through chain {}",
                        s.id
                    )));
                }
                cur = parent.parent;
            }
        }
        Ok(())
    }

    pub fn part_counts(&self) -> PartCounts {
        let mut c = PartCounts::default();
        let mut groups = std::collections::BTreeSet::new();
        for t in &self.triangles {
            match t.part {
                PartTag::Trunk => c.trunk += 1,
                PartTag::Branch => c.branch += 1,
                PartTag::SubBranch => c.sub_branch += 1,
                PartTag::Leaf => c.leaf += 1,
            }
            if let Some(g) = t.leaf_group {
                groups.insert(g);
            }
        }
        c.leaf_groups = groups.len();
        c
    }
}

/// Circular leaf disk, the reflecting facet of the echo model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafDisk<T> {
    pub center: Vec3<T>,
    pub normal: Vec3<T>,
    pub radius: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafExtraction<T> {
    pub disks: Vec<LeafDisk<T>>,
    /// Leaf-group id of each disk, parallel to `disks`.
    pub groups: Vec<u32>,
    /// Leaf groups dropped for having zero area or no net normal.
    pub skipped: usize,
}

/// Collapses each leaf group to one disk: area-weighted centroid and normal,
/// radius from area equivalence `a = sqrt(area / pi)`.
pub fn leaf_disks_from_mesh<T: Real>(reference: &ReferenceTree<T>) -> LeafExtraction<T> {
    let mut acc: BTreeMap<u32, (T, Vec3<T>, Vec3<T>)> = BTreeMap::new();
    for t in &reference.triangles {
        let Some(g) = t.leaf_group else { continue };
        let [a, b, c] = t.indices.map(|i| reference.vertices[i]);
        let doubled = (b - a).cross(c - a);
        let area = doubled.norm() / T::lit(2.0);
        let centroid = (a + b + c) / T::lit(3.0);
        let e = acc
            .entry(g)
            .or_insert((T::zero(), Vec3::zero(), Vec3::zero()));
        e.0 = e.0 + area;
        e.1 += centroid * area;
        e.2 += doubled / T::lit(2.0);
    }
    let mut out = LeafExtraction {
        disks: Vec::new(),
        groups: Vec::new(),
        skipped: 0,
    };
    for (g, (area, weighted, normal_sum)) in acc {
        let normal = normal_sum.try_normalize();
        match normal {
            Some(normal) if area > T::zero() => {
                out.disks.push(LeafDisk {
                    center: weighted / area,
                    normal,
                    radius: (area / T::PI()).sqrt(),
                });
                out.groups.push(g);
            }
            _ => out.skipped += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Real")]
pub struct RandomizationParams<T> {
    /// Per-chain length multiplier range `[lo, hi]`.
    pub length_scale: [T; 2],
    /// Maximum Bezier control-point offset orthogonal to a chain's chord, meters.
    pub curvature_jitter: T,
    /// Maximum sub-branch slide along its parent, as a fraction of parent length.
    pub subbranch_jitter: T,
    /// Redraw every leaf normal uniformly on the sphere.
    pub resample_leaf_orientation: bool,
    pub leaf_count_scale: T,
    pub seed: u64,
}

impl<T: Real> Default for RandomizationParams<T> {
    fn default() -> Self {
        Self {
            length_scale: [T::lit(0.8), T::lit(1.2)],
            curvature_jitter: T::lit(0.15),
            subbranch_jitter: T::lit(0.1),
            resample_leaf_orientation: true,
            leaf_count_scale: T::one(),
            seed: 0,
        }
    }
}

impl<T: Real> RandomizationParams<T> {
    /// No perturbation at all: generation reproduces the reference modules.
    pub fn identity() -> Self {
        Self {
            length_scale: [T::one(), T::one()],
            curvature_jitter: T::zero(),
            subbranch_jitter: T::zero(),
            resample_leaf_orientation: false,
            leaf_count_scale: T::one(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let [lo, hi] = self.length_scale;
        if !(lo > T::zero() && hi >= lo && hi.is_finite()) {
            return Err(TreeError::InvalidParams {
                field: "length_scale",
                reason: "must satisfy 0 < lo <= hi < inf",
            });
        }
        if !(self.curvature_jitter >= T::zero() && self.curvature_jitter.is_finite()) {
            return Err(TreeError::InvalidParams {
                field: "curvature_jitter",
                reason: "must be finite and >= 0",
            });
        }
        if !(self.subbranch_jitter >= T::zero() && self.subbranch_jitter.is_finite()) {
            return Err(TreeError::InvalidParams {
                field: "subbranch_jitter",
                reason: "must be finite and >= 0",
            });
        }
        if !(self.leaf_count_scale > T::zero() && self.leaf_count_scale.is_finite()) {
            return Err(TreeError::InvalidParams {
                field: "leaf_count_scale",
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSegment<T> {
    pub part: PartTag,
    pub points: Vec<Vec3<T>>,
    pub radius: T,
    /// Index of the parent segment in `TreeGeometry::branches`.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingSphere<T> {
    pub center: Vec3<T>,
    pub radius: T,
}

/// One generated tree in its local frame (trunk base at the origin, +z up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGeometry<T> {
    pub branches: Vec<BranchSegment<T>>,
    pub leaves: Vec<LeafDisk<T>>,
    pub bounding_sphere: BoundingSphere<T>,
}

impl<T: Real> TreeGeometry<T> {
    /// Wraps already placed parts and computes the bounding sphere.
    pub fn new(branches: Vec<BranchSegment<T>>, leaves: Vec<LeafDisk<T>>) -> Self {
        let bounding_sphere = Self::compute_bounds(&branches, &leaves);
        Self {
            branches,
            leaves,
            bounding_sphere,
        }
    }

    /// Highest branch vertex or leaf center.
    pub fn height(&self) -> T {
        self.branches
            .iter()
            .flat_map(|b| b.points.iter().map(|p| p.z))
            .chain(self.leaves.iter().map(|l| l.center.z))
            .fold(T::zero(), T::max)
    }

    fn compute_bounds(branches: &[BranchSegment<T>], leaves: &[LeafDisk<T>]) -> BoundingSphere<T> {
        let pts = || {
            branches
                .iter()
                .flat_map(|b| b.points.iter().copied())
                .chain(leaves.iter().map(|l| l.center))
        };
        let mut lo = Vec3::new(T::infinity(), T::infinity(), T::infinity());
        let mut hi = -lo;
        for p in pts() {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        if !lo.is_finite() {
            return BoundingSphere {
                center: Vec3::zero(),
                radius: T::zero(),
            };
        }
        let center = (lo + hi) / T::lit(2.0);
        let branch_r = branches
            .iter()
            .flat_map(|b| b.points.iter())
            .map(|p| p.distance(center))
            .fold(T::zero(), T::max);
        let leaf_r = leaves
            .iter()
            .map(|l| l.center.distance(center) + l.radius)
            .fold(T::zero(), T::max);
        let radius = branch_r.max(leaf_r);
        BoundingSphere {
            center,
            radius: radius + radius * T::lit(1e-9),
        }
    }
}

/// Arc-length parameterised polyline position: segment index plus local fraction.
#[derive(Debug, Clone, Copy)]
struct PolyParam<T> {
    segment: usize,
    frac: T,
}

#[derive(Debug, Clone)]
struct ModuleChain<T> {
    part: PartTag,
    radius: T,
    /// Index of the parent chain within the module.
    parent: Option<usize>,
    /// Arc-length fraction of the attachment point on the parent.
    attach_u: T,
    /// Points in module coordinates (root chain base at the origin).
    points: Vec<Vec3<T>>,
    /// Normalised cumulative arc length, `arc[0] = 0`, `arc[last] = 1`.
    arc: Vec<T>,
}

impl<T: Real> ModuleChain<T> {
    fn locate(&self, u: T) -> PolyParam<T> {
        let u = u.max(T::zero()).min(T::one());
        let last = self.arc.len() - 2;
        let mut segment = 0;
        while segment < last && self.arc[segment + 1] < u {
            segment += 1;
        }
        let span = self.arc[segment + 1] - self.arc[segment];
        let frac = if span > T::zero() {
            ((u - self.arc[segment]) / span)
                .max(T::zero())
                .min(T::one())
        } else {
            T::zero()
        };
        PolyParam { segment, frac }
    }

    /// Closest point on the polyline to `p`: (distance, arc fraction).
    fn nearest(&self, p: Vec3<T>) -> (T, T) {
        let mut best = (T::infinity(), T::zero());
        for j in 0..self.points.len() - 1 {
            let a = self.points[j];
            let d = self.points[j + 1] - a;
            let len2 = d.norm_squared();
            let t = if len2 > T::zero() {
                ((p - a).dot(d) / len2).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            let dist = p.distance(a + d * t);
            if dist < best.0 {
                best = (dist, self.arc[j] + (self.arc[j + 1] - self.arc[j]) * t);
            }
        }
        best
    }
}

fn eval_at<T: Real>(points: &[Vec3<T>], at: PolyParam<T>) -> Vec3<T> {
    points[at.segment].lerp(points[at.segment + 1], at.frac)
}

#[derive(Debug, Clone)]
struct ModuleLeaf<T> {
    chain: usize,
    u: T,
    offset: Vec3<T>,
    normal: Vec3<T>,
    radius: T,
}

#[derive(Debug, Clone)]
struct BranchModule<T> {
    chains: Vec<ModuleChain<T>>,
    leaves: Vec<ModuleLeaf<T>>,
    /// Chord direction of the root chain in module coordinates.
    axis: Vec3<T>,
}

/// A reference tree preprocessed into branch modules, ready for repeated generation.
#[derive(Debug, Clone)]
pub struct TreeTemplate<T> {
    modules: Vec<BranchModule<T>>,
    trunk_radius: T,
    /// Trunk length left above the highest branch of the reference.
    trunk_top_margin: T,
    /// Leaf groups dropped during disk extraction.
    pub skipped_leaf_groups: usize,
}

fn normalized_arc<T: Real>(points: &[Vec3<T>]) -> Vec<T> {
    let mut arc = Vec::with_capacity(points.len());
    let mut acc = T::zero();
    arc.push(acc);
    for w in points.windows(2) {
        acc = acc + w[0].distance(w[1]);
        arc.push(acc);
    }
    let total = acc;
    let n = arc.len();
    for (j, a) in arc.iter_mut().enumerate() {
        *a = if total > T::zero() {
            *a / total
        } else {
            T::from_usize_lossy(j) / T::from_usize_lossy(n - 1)
        };
    }
    arc
}

impl<T: Real> TreeTemplate<T> {
    pub fn new(reference: &ReferenceTree<T>) -> Result<Self, TreeError> {
        reference.validate()?;
        let by_id: BTreeMap<u32, usize> = reference
            .skeleton
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i))
            .collect();
        let trunk = reference.skeleton.iter().find(|s| s.part == PartTag::Trunk);
        let is_root_branch = |s: &SkeletonChain<T>| {
            s.part != PartTag::Trunk
                && s.parent
                    .and_then(|p| by_id.get(&p))
                    .is_none_or(|&pi| reference.skeleton[pi].part == PartTag::Trunk)
        };

        let mut modules = Vec::new();
        let mut top_base = T::neg_infinity();
        for (root_idx, root) in reference.skeleton.iter().enumerate() {
            if !is_root_branch(root) {
                continue;
            }
            let base = root.points[0];
            top_base = top_base.max(base.z);
            // Breadth-first collection keeps parents before children.
            let mut order = vec![root_idx];
            let mut k = 0;
            while k < order.len() {
                let parent_id = reference.skeleton[order[k]].id;
                for (ci, c) in reference.skeleton.iter().enumerate() {
                    if c.parent == Some(parent_id) {
                        order.push(ci);
                    }
                }
                k += 1;
            }
            let mut chains: Vec<ModuleChain<T>> = Vec::with_capacity(order.len());
            for &si in &order {
                let s = &reference.skeleton[si];
                let points: Vec<Vec3<T>> = s.points.iter().map(|&p| p - base).collect();
                let arc = normalized_arc(&points);
                let parent = if si == root_idx {
                    None
                } else {
                    let pid = s.parent.expect("non-root chain has a parent");
                    order.iter().position(|&o| reference.skeleton[o].id == pid)
                };
                let attach_u =
                    parent.map_or(T::zero(), |pi: usize| chains[pi].nearest(points[0]).1);
                chains.push(ModuleChain {
                    part: s.part,
                    radius: s.radius,
                    parent,
                    attach_u,
                    points,
                    arc,
                });
            }
            let axis = (chains[0].points[chains[0].points.len() - 1] - chains[0].points[0])
                .try_normalize()
                .ok_or_else(|| {
                    TreeError::Validation(format!("branch chain {} has zero length", root.id))
                })?;
            modules.push(BranchModule {
                chains,
                leaves: Vec::new(),
                axis,
            });
        }
        if modules.is_empty() {
            return Err(TreeError::Validation(
                "skeleton has no branch chains".into(),
            ));
        }

        let extraction = leaf_disks_from_mesh(reference);
        let bases: Vec<Vec3<T>> = reference
            .skeleton
            .iter()
            .filter(|s| is_root_branch(s))
            .map(|s| s.points[0])
            .collect();
        for disk in &extraction.disks {
            let mut best: Option<(T, usize, usize, T)> = None;
            for (mi, (m, base)) in modules.iter().zip(&bases).enumerate() {
                let local = disk.center - *base;
                for (ci, c) in m.chains.iter().enumerate() {
                    let (d, u) = c.nearest(local);
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, mi, ci, u));
                    }
                }
            }
            let (_, mi, ci, u) = best.expect("at least one module");
            let local = disk.center - bases[mi];
            let chain = &modules[mi].chains[ci];
            let anchor = eval_at(&chain.points, chain.locate(u));
            modules[mi].leaves.push(ModuleLeaf {
                chain: ci,
                u,
                offset: local - anchor,
                normal: disk.normal,
                radius: disk.radius,
            });
        }

        let (trunk_radius, trunk_top_margin) = match trunk {
            Some(t) => {
                let top = t.points.iter().map(|p| p.z).fold(T::neg_infinity(), T::max);
                (t.radius, (top - top_base).max(T::zero()))
            }
            None => (T::lit(0.1), T::lit(0.3)),
        };
        Ok(Self {
            modules,
            trunk_radius,
            trunk_top_margin,
            skipped_leaf_groups: extraction.skipped,
        })
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    /// Leaves a generated tree carries before leaf-count scaling.
    pub fn base_leaf_count(&self, attachments: usize) -> usize {
        (0..attachments)
            .map(|i| self.modules[i % self.modules.len()].leaves.len())
            .sum()
    }

    /// Grows one randomized tree. Deterministic in `(self, attachments, params)`.
    pub fn randomize(
        &self,
        attachments: &[BranchAttachment<T>],
        params: &RandomizationParams<T>,
    ) -> Result<TreeGeometry<T>, TreeError> {
        params.validate()?;
        if attachments.is_empty() {
            return Err(TreeError::NoAttachments);
        }
        let mut rng = seed::rng(params.seed);
        let mut branches = Vec::new();
        let top = attachments
            .iter()
            .map(|a| a.position.z)
            .fold(T::neg_infinity(), T::max);
        branches.push(BranchSegment {
            part: PartTag::Trunk,
            points: vec![
                Vec3::zero(),
                Vec3::new(T::zero(), T::zero(), top + self.trunk_top_margin),
            ],
            radius: self.trunk_radius,
            parent: None,
        });

        // (module index, output chain indices) per attachment, for leaf placement.
        struct Placed<T> {
            module: usize,
            chains: Vec<Vec<Vec3<T>>>,
            rotation: Rotation<T>,
            origin: Vec3<T>,
        }
        let mut placed = Vec::with_capacity(attachments.len());
        let [lo, hi] = params.length_scale;
        for (i, att) in attachments.iter().enumerate() {
            let mi = i % self.modules.len();
            let module = &self.modules[mi];
            let rotation = Rotation::aligning(module.axis, att.direction);
            let mut out_chains: Vec<Vec<Vec3<T>>> = Vec::with_capacity(module.chains.len());
            let first_branch = branches.len();
            for chain in &module.chains {
                let scale = uniform(&mut rng, lo, hi);
                let bend_mag = params.curvature_jitter * unit(&mut rng);
                let bend_phase = T::TAU() * unit(&mut rng);
                let slide = params.subbranch_jitter * (T::lit(2.0) * unit(&mut rng) - T::one());

                let base0 = chain.points[0];
                let chord = chain.points[chain.points.len() - 1] - base0;
                let chord_len2 = chord.norm_squared();
                let bend = match chord.try_normalize() {
                    Some(dir) => {
                        let e1 = dir.any_orthogonal();
                        let e2 = dir.cross(e1);
                        let (s, c) = bend_phase.sin_cos();
                        (e1 * c + e2 * s) * bend_mag
                    }
                    None => Vec3::zero(),
                };
                let new_base = match chain.parent {
                    None => Vec3::zero(),
                    Some(pi) => {
                        let parent = &module.chains[pi];
                        let u = chain.attach_u + slide;
                        eval_at(&out_chains[pi], parent.locate(u))
                    }
                };
                let points: Vec<Vec3<T>> = chain
                    .points
                    .iter()
                    .map(|&p| {
                        let rel = p - base0;
                        let t = if chord_len2 > T::zero() {
                            (rel.dot(chord) / chord_len2).max(T::zero()).min(T::one())
                        } else {
                            T::zero()
                        };
                        new_base + rel * scale + bend * (T::lit(2.0) * t * (T::one() - t))
                    })
                    .collect();
                let parent_out = match chain.parent {
                    None => 0,
                    Some(pi) => first_branch + pi,
                };
                branches.push(BranchSegment {
                    part: chain.part,
                    points: points
                        .iter()
                        .map(|&p| att.position + rotation.apply(p))
                        .collect(),
                    radius: chain.radius,
                    parent: Some(parent_out),
                });
                out_chains.push(points);
            }
            placed.push(Placed {
                module: mi,
                chains: out_chains,
                rotation,
                origin: att.position,
            });
        }

        let leaf_normal = |rng: &mut SimRng, original: Vec3<T>, rot: &Rotation<T>| {
            if params.resample_leaf_orientation {
                let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
                Vec3::new(T::lit(x), T::lit(y), T::lit(z)).normalize()
            } else {
                rot.apply(original).normalize()
            }
        };

        // (placed index, leaf index within module)
        let mut sources: Vec<(usize, usize)> = Vec::new();
        let mut leaves = Vec::new();
        for (pi, p) in placed.iter().enumerate() {
            let module = &self.modules[p.module];
            for (li, leaf) in module.leaves.iter().enumerate() {
                let chain = &module.chains[leaf.chain];
                let anchor = eval_at(&p.chains[leaf.chain], chain.locate(leaf.u));
                let normal = leaf_normal(&mut rng, leaf.normal, &p.rotation);
                leaves.push(LeafDisk {
                    center: p.origin + p.rotation.apply(anchor + leaf.offset),
                    normal,
                    radius: leaf.radius,
                });
                sources.push((pi, li));
            }
        }

        let base = leaves.len();
        let target = (T::from_usize_lossy(base) * params.leaf_count_scale)
            .round()
            .to_usize()
            .unwrap_or(base);
        if target < base {
            // Partial Fisher-Yates picks the leaves to keep; original order is preserved.
            let mut idx: Vec<usize> = (0..base).collect();
            for k in 0..target {
                let j = rng.random_range(k..base);
                idx.swap(k, j);
            }
            let mut keep = idx[..target].to_vec();
            keep.sort_unstable();
            leaves = keep.into_iter().map(|k| leaves[k]).collect();
        } else if base > 0 {
            for _ in base..target {
                let (pi, li) = sources[rng.random_range(0..base)];
                let p = &placed[pi];
                let module = &self.modules[p.module];
                let leaf = &module.leaves[li];
                let chain = &module.chains[leaf.chain];
                let anchor = eval_at(&p.chains[leaf.chain], chain.locate(unit(&mut rng)));
                let normal = leaf_normal(&mut rng, leaf.normal, &p.rotation);
                leaves.push(LeafDisk {
                    center: p.origin + p.rotation.apply(anchor + leaf.offset),
                    normal,
                    radius: leaf.radius,
                });
            }
        }

        let bounding_sphere = TreeGeometry::compute_bounds(&branches, &leaves);
        Ok(TreeGeometry {
            branches,
            leaves,
            bounding_sphere,
        })
    }
}

fn unit<T: Real>(rng: &mut SimRng) -> T {
    T::lit(rng.random::<f64>())
}

fn uniform<T: Real>(rng: &mut SimRng, lo: T, hi: T) -> T {
    lo + (hi - lo) * unit(rng)
}

/// Convenience wrapper: preprocess `reference` and grow one tree.
pub fn randomize_tree<T: Real>(
    reference: &ReferenceTree<T>,
    attachments: &[BranchAttachment<T>],
    params: &RandomizationParams<T>,
) -> Result<TreeGeometry<T>, TreeError> {
    TreeTemplate::new(reference)?.randomize(attachments, params)
}
