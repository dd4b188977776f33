//! Text format for reference trees.
//!
//! ```text
//! foliage-ref 1
//! # comment
//! v <x> <y> <z>
//! t <i> <j> <k> <tag> [<leaf-group>]
//! s <id> <parent-id|-> <tag> <radius> <x1> <y1> <z1> <x2> <y2> <z2> ...
//! ```
//!
//! * The first non-comment line must be the header `foliage-ref 1`.
//! * Vertex indices in `t` records are zero-based, in `v` record order.
//! * `<tag>` is one of `trunk`, `branch`, `sub-branch`, `leaf`. Leaf triangles
//!   must carry a non-negative integer leaf-group id; other tags must not.
//! * `s` records describe the branch skeleton as polylines of at least two
//!   points. Skeleton tags exclude `leaf`; `-` marks a root chain.
//! * Fields are whitespace separated, numbers are decimal ASCII, and `#`
//!   starts a comment anywhere on a line.

use super::{PartTag, ReferenceTree, SkeletonChain, TreeError, Triangle};
use crate::geom::Vec3;
use crate::num::Real;
use std::fmt::Write as _;
use std::str::FromStr;

pub const HEADER: &str = "foliage-ref";
pub const VERSION: u32 = 1;

fn perr(line: usize, message: impl Into<String>) -> TreeError {
    TreeError::Parse {
        line,
        message: message.into(),
    }
}

fn num<V: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<V, TreeError> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| perr(line, format!("invalid {what} `{tok}`")))
}

fn real<T: Real>(tok: Option<&str>, line: usize, what: &str) -> Result<T, TreeError> {
    let v: f64 = num(tok, line, what)?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite {what}")));
    }
    Ok(T::lit(v))
}

fn tag(tok: Option<&str>, line: usize) -> Result<PartTag, TreeError> {
    let tok = tok.ok_or_else(|| perr(line, "missing tag"))?;
    PartTag::from_str(tok).map_err(|_| perr(line, format!("unknown tag `{tok}`")))
}

pub fn parse<T: Real>(text: &str) -> Result<ReferenceTree<T>, TreeError> {
    let mut tree = ReferenceTree {
        vertices: Vec::new(),
        triangles: Vec::new(),
        skeleton: Vec::new(),
    };
    let mut seen_header = false;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut it = content.split_whitespace();
        let kind = it.next().unwrap_or_default();
        if !seen_header {
            if kind != HEADER {
                return Err(perr(line, format!("expected header `{HEADER} {VERSION}`")));
            }
            let version: u32 = num(it.next(), line, "format version")?;
            if version != VERSION {
                return Err(perr(line, format!("unsupported format version {version}")));
            }
            seen_header = true;
            continue;
        }
        match kind {
            "v" => {
                let x = real(it.next(), line, "x")?;
                let y = real(it.next(), line, "y")?;
                let z = real(it.next(), line, "z")?;
                tree.vertices.push(Vec3::new(x, y, z));
            }
            "t" => {
                let a: usize = num(it.next(), line, "vertex index")?;
                let b: usize = num(it.next(), line, "vertex index")?;
                let c: usize = num(it.next(), line, "vertex index")?;
                let part = tag(it.next(), line)?;
                let leaf_group = match it.next() {
                    Some(g) => Some(num::<u32>(Some(g), line, "leaf group")?),
                    None => None,
                };
                match (part, leaf_group) {
                    (PartTag::Leaf, None) => {
                        return Err(perr(line, "leaf triangle without leaf group"))
                    }
                    (p, Some(_)) if p != PartTag::Leaf => {
                        return Err(perr(line, "leaf group on a non-leaf triangle"))
                    }
                    _ => {}
                }
                tree.triangles.push(Triangle {
                    indices: [a, b, c],
                    part,
                    leaf_group,
                });
            }
            "s" => {
                let id: u32 = num(it.next(), line, "chain id")?;
                let parent = match it.next() {
                    Some("-") => None,
                    p => Some(num::<u32>(p, line, "parent id")?),
                };
                let part = tag(it.next(), line)?;
                if part == PartTag::Leaf {
                    return Err(perr(line, "skeleton chains cannot be tagged leaf"));
                }
                let radius = real(it.next(), line, "radius")?;
                let coords: Vec<&str> = it.by_ref().collect();
                if !coords.len().is_multiple_of(3) {
                    return Err(perr(line, "skeleton coordinates must come in triples"));
                }
                let mut points = Vec::with_capacity(coords.len() / 3);
                for xyz in coords.chunks(3) {
                    points.push(Vec3::new(
                        real(Some(xyz[0]), line, "x")?,
                        real(Some(xyz[1]), line, "y")?,
                        real(Some(xyz[2]), line, "z")?,
                    ));
                }
                tree.skeleton.push(SkeletonChain {
                    id,
                    parent,
                    part,
                    radius,
                    points,
                });
            }
            other => return Err(perr(line, format!("unknown record `{other}`"))),
        }
        if it.next().is_some() {
            return Err(perr(line, "trailing fields"));
        }
    }
    if !seen_header {
        return Err(perr(last_line.max(1), "empty reference tree file"));
    }
    tree.validate()?;
    Ok(tree)
}

pub fn write<T: Real>(tree: &ReferenceTree<T>) -> String {
    let mut out = format!("{HEADER} {VERSION}\n");
    for v in &tree.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &tree.triangles {
        let [a, b, c] = t.indices;
        let _ = write!(out, "t {a} {b} {c} {}", t.part);
        if let Some(g) = t.leaf_group {
            let _ = write!(out, " {g}");
        }
        out.push('\n');
    }
    for s in &tree.skeleton {
        let parent = s.parent.map_or_else(|| "-".to_owned(), |p| p.to_string());
        let _ = write!(out, "s {} {} {} {}", s.id, parent, s.part, s.radius);
        for p in &s.points {
            let _ = write!(out, " {} {} {}", p.x, p.y, p.z);
        }
        out.push('\n');
    }
    out
}
