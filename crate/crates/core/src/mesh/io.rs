//! Plain-text mesh format and Gmsh v2 ASCII import.
//!
//! The native format is a header `vertices N / triangles M / boundary K`
//! followed by `N` lines `x y`, `M` lines `i j k` and `K` lines `i j TAG`,
//! all zero-based and whitespace separated.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::geom;
use crate::{Error, Result};

use super::{Mesh, Tag};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "vertices {} / triangles {} / boundary {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.boundary_edges().len()
    );
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag);
    }
    s
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty mesh file"))?;
    let words: Vec<&str> = header.split_whitespace().filter(|w| *w != "/").collect();
    let count = |key: &str| -> Result<usize> {
        let k = words
            .iter()
            .position(|w| *w == key)
            .ok_or_else(|| Error::parse(hline, format!("header lacks '{key}'")))?;
        words
            .get(k + 1)
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| Error::parse(hline, format!("bad count after '{key}'")))
    };
    let (nv, nt, nb) = (count("vertices")?, count("triangles")?, count("boundary")?);

    let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file reading {what}")))?;
        Ok((n, l.split_whitespace().collect()))
    };
    let num = |n: usize, w: Option<&&str>| -> Result<f64> {
        w.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(n, "expected a number"))
    };
    let idx = |n: usize, w: Option<&&str>| -> Result<usize> {
        w.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(n, "expected a vertex index"))
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, f) = next("vertices")?;
        vertices.push([num(n, f.first())?, num(n, f.get(1))?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (n, f) = next("triangles")?;
        triangles.push([idx(n, f.first())?, idx(n, f.get(1))?, idx(n, f.get(2))?]);
    }
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (n, f) = next("boundary edges")?;
        let tag: Tag = f
            .get(2)
            .ok_or_else(|| Error::parse(n, "missing boundary tag"))?
            .parse()
            .map_err(|e: Error| Error::parse(n, e.to_string()))?;
        boundary.push(([idx(n, f.first())?, idx(n, f.get(1))?], tag));
    }
    Mesh::new(vertices, triangles, boundary)
}

/// Reads a Gmsh v2 ASCII mesh.
///
/// `groups` maps physical groups, given either by number or by name, to
/// boundary tags. Line elements in unmapped groups are an error; triangle
/// orientation is normalized to counter-clockwise.
pub fn read_gmsh(text: &str, groups: &BTreeMap<String, Tag>) -> Result<Mesh> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect();
    let section = |name: &str| -> Option<usize> { lines.iter().position(|(_, l)| *l == name) };

    if let Some(k) = section("$MeshFormat") {
        let (n, l) = lines.get(k + 1).copied().unwrap_or((0, ""));
        if !l.starts_with('2') {
            return Err(Error::parse(n, "only Gmsh format version 2 is supported"));
        }
    }
    let mut names: HashMap<i64, String> = HashMap::new();
    if let Some(k) = section("$PhysicalNames") {
        let count: usize = parse_count(&lines, k + 1)?;
        for &(n, l) in &lines[k + 2..k + 2 + count] {
            let f: Vec<&str> = l.split_whitespace().collect();
            let id: i64 = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| Error::parse(n, "bad physical id"))?;
            let name = f.get(2).map(|s| s.trim_matches('"').to_string()).unwrap_or_default();
            names.insert(id, name);
        }
    }

    let k = section("$Nodes").ok_or_else(|| Error::parse(0, "missing $Nodes section"))?;
    let count = parse_count(&lines, k + 1)?;
    let mut node_index = HashMap::new();
    let mut vertices = Vec::with_capacity(count);
    for &(n, l) in lines.get(k + 2..k + 2 + count).ok_or_else(|| Error::parse(0, "truncated $Nodes"))? {
        let f: Vec<f64> = l
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| Error::parse(n, "bad node line")))
            .collect::<Result<_>>()?;
        if f.len() < 3 {
            return Err(Error::parse(n, "bad node line"));
        }
        node_index.insert(f[0] as i64, vertices.len());
        vertices.push([f[1], f[2]]);
    }

    let k = section("$Elements").ok_or_else(|| Error::parse(0, "missing $Elements section"))?;
    let count = parse_count(&lines, k + 1)?;
    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    for &(n, l) in lines.get(k + 2..k + 2 + count).ok_or_else(|| Error::parse(0, "truncated $Elements"))? {
        let f: Vec<i64> = l
            .split_whitespace()
            .map(|s| s.parse::<i64>().map_err(|_| Error::parse(n, "bad element line")))
            .collect::<Result<_>>()?;
        if f.len() < 3 {
            return Err(Error::parse(n, "bad element line"));
        }
        let (kind, ntags) = (f[1], f[2] as usize);
        let physical = if ntags > 0 { f.get(3).copied() } else { None };
        let nodes: Vec<usize> = f
            .get(3 + ntags..)
            .unwrap_or(&[])
            .iter()
            .map(|id| node_index.get(id).copied().ok_or_else(|| Error::parse(n, format!("unknown node {id}"))))
            .collect::<Result<_>>()?;
        match kind {
            1 => {
                let group = physical.ok_or_else(|| Error::parse(n, "boundary line without physical group"))?;
                let tag = groups
                    .get(&group.to_string())
                    .or_else(|| names.get(&group).and_then(|name| groups.get(name)))
                    .ok_or_else(|| Error::parse(n, format!("physical group {group} has no tag mapping")))?;
                boundary.push(([nodes[0], nodes[1]], *tag));
            }
            2 => {
                let mut t = [nodes[0], nodes[1], nodes[2]];
                if geom::signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0.0 {
                    t.swap(1, 2);
                }
                triangles.push(t);
            }
            15 => {}
            other => return Err(Error::parse(n, format!("unsupported element type {other}"))),
        }
    }
    // Drop nodes not referenced by any triangle (e.g. geometry points).
    let mut used = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for t in &triangles {
        for &v in t {
            if used[v] == usize::MAX {
                used[v] = kept.len();
                kept.push(vertices[v]);
            }
        }
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| used[v])).collect();
    let boundary = boundary
        .into_iter()
        .map(|([a, b], tag)| ([used[a], used[b]], tag))
        .collect();
    Mesh::new(kept, triangles, boundary)
}

fn parse_count(lines: &[(usize, &str)], k: usize) -> Result<usize> {
    let (n, l) = lines.get(k).copied().ok_or_else(|| Error::parse(0, "truncated section"))?;
    l.parse().map_err(|_| Error::parse(n, "expected an entry count"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = Mesh::rectangle(0.0, 0.0, 2.0, 1.0, 3, 2).unwrap();
        let text = write_mesh(&m);
        assert!(text.starts_with("vertices 12 / triangles 12 / boundary 10"));
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges(), m.boundary_edges());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "vertices 3 / triangles 1 / boundary 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 WALL\n1 2 BOGUS\n2 0 IN\n";
        match read_mesh(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_mesh("vertices x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn gmsh_import() {
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n1 1 \"inlet\"\n1 2 \"walls\"\n$EndPhysicalNames\n\
$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n$Elements\n6\n\
1 1 2 2 1 4 1\n2 1 2 2 1 1 2\n3 1 2 3 1 2 3\n4 1 2 2 1 3 4\n5 2 2 9 1 1 3 2\n6 2 2 9 1 1 3 4\n$EndElements\n";
        let mut groups = BTreeMap::new();
        groups.insert("inlet".to_string(), Tag::In);
        groups.insert("walls".to_string(), Tag::Wall);
        groups.insert("3".to_string(), Tag::Out);
        let m = read_gmsh(text, &groups).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert!((m.area() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_edges_tagged(Tag::Out).count(), 1);
        groups.remove("3");
        assert!(read_gmsh(text, &groups).is_err());
    }
}
