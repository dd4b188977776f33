//! Writes the bundled reference tree asset.
//!
//! Run with: `cargo run --example author_reference_tree > assets/reference_tree.txt`

use foliage_echo::geom::Vec3;
use foliage_echo::seed;
use foliage_echo::treegen::{PartTag, ReferenceTree, SkeletonChain, Triangle};
use rand::Rng;

type V = Vec3<f64>;

struct Builder {
    tree: ReferenceTree<f64>,
    next_group: u32,
}

impl Builder {
    fn vertex(&mut self, p: V) -> usize {
        self.tree.vertices.push(p);
        self.tree.vertices.len() - 1
    }

    fn tri(&mut self, i: [usize; 3], part: PartTag, group: Option<u32>) {
        self.tree.triangles.push(Triangle {
            indices: i,
            part,
            leaf_group: group,
        });
    }

    /// Triangular prism around each polyline segment.
    fn tube(&mut self, points: &[V], radius: f64, part: PartTag, sides: usize) {
        for w in points.windows(2) {
            let axis = (w[1] - w[0]).normalize();
            let e1 = axis.any_orthogonal();
            let e2 = axis.cross(e1);
            let ring = |c: V, b: &mut Builder| -> Vec<usize> {
                (0..sides)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / sides as f64;
                        b.vertex(c + (e1 * a.cos() + e2 * a.sin()) * radius)
                    })
                    .collect()
            };
            let r0 = ring(w[0], self);
            let r1 = ring(w[1], self);
            for k in 0..sides {
                let k1 = (k + 1) % sides;
                self.tri([r0[k], r0[k1], r1[k]], part, None);
                self.tri([r0[k1], r1[k1], r1[k]], part, None);
            }
        }
    }

    /// Diamond leaf: two triangles, length 0.08 m, width 0.05 m.
    fn leaf(&mut self, center: V, along: V, across: V) {
        let g = self.next_group;
        self.next_group += 1;
        let a = self.vertex(center - along * 0.04);
        let b = self.vertex(center + across * 0.025);
        let c = self.vertex(center + along * 0.04);
        let d = self.vertex(center - across * 0.025);
        self.tri([a, b, c], PartTag::Leaf, Some(g));
        self.tri([a, c, d], PartTag::Leaf, Some(g));
    }

    fn chain(&mut self, id: u32, parent: Option<u32>, part: PartTag, radius: f64, points: Vec<V>) {
        self.tree.skeleton.push(SkeletonChain {
            id,
            parent,
            part,
            radius,
            points,
        });
    }
}

fn curve(base: V, dir: V, length: f64, lift: f64, n: usize) -> Vec<V> {
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            base + dir * (length * t) + V::unit_z() * (lift * t * t)
        })
        .collect()
}

fn at(points: &[V], t: f64) -> V {
    let s = t * (points.len() - 1) as f64;
    let j = (s.floor() as usize).min(points.len() - 2);
    points[j].lerp(points[j + 1], s - j as f64)
}

fn main() {
    let mut rng = seed::rng(20_240_917);
    let mut b = Builder {
        tree: ReferenceTree {
            vertices: Vec::new(),
            triangles: Vec::new(),
            skeleton: Vec::new(),
        },
        next_group: 0,
    };

    let trunk = vec![V::zero(), V::new(0.0, 0.0, 4.8)];
    b.tube(&trunk, 0.12, PartTag::Trunk, 6);
    b.chain(0, None, PartTag::Trunk, 0.12, trunk);

    let mut next_id = 1;
    for (m, (height, az_deg)) in [(2.2, 0.0), (3.0, 120.0), (3.8, 240.0)]
        .into_iter()
        .enumerate()
    {
        let az: f64 = f64::to_radians(az_deg);
        let elev = f64::to_radians(30.0 - 5.0 * m as f64);
        let dir = V::new(az.cos() * elev.cos(), az.sin() * elev.cos(), elev.sin());
        let base = V::new(0.0, 0.0, height);
        let main = curve(base, dir, 2.0, 0.25, 6);
        b.tube(&main, 0.05, PartTag::Branch, 3);
        let main_id = next_id;
        next_id += 1;
        b.chain(main_id, Some(0), PartTag::Branch, 0.05, main.clone());

        let side = dir.cross(V::unit_z()).normalize();
        for (s, t) in [0.25, 0.45, 0.65, 0.85].into_iter().enumerate() {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let sub_base = at(&main, t);
            let sub_dir = (dir * 0.6 + side * (0.8 * sign) + V::unit_z() * 0.3).normalize();
            let length = 0.8 - 0.12 * s as f64;
            let sub = curve(sub_base, sub_dir, length, 0.08, 4);
            b.tube(&sub, 0.02, PartTag::SubBranch, 3);
            b.chain(
                next_id,
                Some(main_id),
                PartTag::SubBranch,
                0.02,
                sub.clone(),
            );
            next_id += 1;

            let sub_side = sub_dir.cross(V::unit_z()).normalize();
            for k in 0..8 {
                let p = at(&sub, 0.15 + 0.8 * k as f64 / 7.0);
                for sign in [1.0, -1.0] {
                    let out =
                        (sub_side * sign + V::unit_z() * rng.random_range(-0.3..0.5)).normalize();
                    let across = out.cross(sub_dir).normalize();
                    let tilt = rng.random_range(-0.4..0.4);
                    b.leaf(p + out * 0.06, out, (across + sub_dir * tilt).normalize());
                }
            }
        }
        for k in 0..10 {
            let p = at(&main, 0.5 + 0.5 * k as f64 / 9.0);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let out = (side * sign + V::unit_z() * 0.2).normalize();
            let across = out.cross(dir).normalize();
            b.leaf(p + out * 0.06, out, across);
        }
    }

    println!("# Procedural reference tree: trunk, 3 branch modules, 4 sub-branches each.");
    print!("{}", b.tree.to_text());
}
