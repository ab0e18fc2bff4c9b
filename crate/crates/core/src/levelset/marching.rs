use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::tables::TRI_TABLE;
use super::{GridField, GridSpec};
use crate::error::{invalid, Result};

/// Both endpoints this close to the iso value snap the vertex to the edge
/// midpoint.
const SNAP: f64 = 1e-12;

/// Triangle mesh with shared vertices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Flat `x y z` coordinates of all vertices.
    pub fn vertex_coords(&self) -> Vec<f64> {
        self.vertices.iter().flatten().copied().collect()
    }

    fn edges(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// `V − E + F` over the vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let used: BTreeSet<usize> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Edges used by exactly one triangle; zero for a closed surface.
    pub fn boundary_edge_count(&self) -> usize {
        self.edges().values().filter(|&&c| c == 1).count()
    }
}

/// Line segments with shared vertices. Segments are oriented so that the
/// region below the iso value lies to the right.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polyline2D {
    pub vertices: Vec<[f64; 2]>,
    pub segments: Vec<[usize; 2]>,
}

impl Polyline2D {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment(&self, s: usize) -> ([f64; 2], [f64; 2]) {
        let [a, b] = self.segments[s];
        (self.vertices[a], self.vertices[b])
    }

    /// Chains segments head to tail. Each entry is a vertex sequence and
    /// whether it closes on itself.
    pub fn loops(&self) -> Vec<(Vec<usize>, bool)> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut has_prev = vec![false; self.vertices.len()];
        for (s, &[a, b]) in self.segments.iter().enumerate() {
            next.insert(a, s);
            has_prev[b] = true;
        }
        let mut used = vec![false; self.segments.len()];
        let mut out = Vec::new();
        let starts = (0..self.segments.len())
            .filter(|&s| !has_prev[self.segments[s][0]])
            .chain(0..self.segments.len());
        for s0 in starts {
            if used[s0] {
                continue;
            }
            let first = self.segments[s0][0];
            let mut chain = vec![first];
            let mut s = s0;
            let mut closed = false;
            loop {
                used[s] = true;
                let b = self.segments[s][1];
                if b == first {
                    closed = true;
                    break;
                }
                chain.push(b);
                match next.get(&b) {
                    Some(&n) if !used[n] => s = n,
                    _ => break,
                }
            }
            out.push((chain, closed));
        }
        out
    }

    /// Distance from each query point to the nearest segment.
    pub fn point_distances(&self, points: &[f64]) -> Vec<f64> {
        points
            .par_chunks(2)
            .map(|p| {
                (0..self.segments.len())
                    .map(|s| {
                        let (a, b) = self.segment(s);
                        point_segment_distance([p[0], p[1]], a, b)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Interpolates the crossing on the edge between nodes `na` and `nb` whose
/// iso-shifted values are `a` and `b`.
fn crossing(spec: &GridSpec, na: &[usize], nb: &[usize], a: f64, b: f64) -> Vec<f64> {
    let t = if a.abs() < SNAP && b.abs() < SNAP {
        0.5
    } else {
        a / (a - b)
    };
    na.iter()
        .zip(nb)
        .enumerate()
        .map(|(axis, (&i, &j))| {
            let (pa, pb) = (spec.coord(axis, i), spec.coord(axis, j));
            pa + t * (pb - pa)
        })
        .collect()
}

/// Every lattice edge whose endpoints straddle the iso value, keyed by
/// `node · d + axis`, in increasing key order.
fn edge_vertices(field: &GridField, iso: f64) -> (Vec<usize>, Vec<Vec<f64>>) {
    let spec = &field.spec;
    let (d, l) = (spec.dim(), spec.resolution);
    let slab = l.pow(d as u32 - 1);
    let per_slab: Vec<Vec<(usize, Vec<f64>)>> = (0..l)
        .into_par_iter()
        .map(|i0| {
            let mut out = Vec::new();
            for node in i0 * slab..(i0 + 1) * slab {
                let ijk = spec.multi_index(node);
                let a = field.values[node] - iso;
                for axis in 0..d {
                    if ijk[axis] + 1 == l {
                        continue;
                    }
                    let mut nb = ijk.clone();
                    nb[axis] += 1;
                    let b = field.values[spec.index(&nb)] - iso;
                    if (a < 0.0) != (b < 0.0) {
                        out.push((node * d + axis, crossing(spec, &ijk, &nb, a, b)));
                    }
                }
            }
            out
        })
        .collect();
    per_slab.into_iter().flatten().unzip()
}

// Corners as (axis 0, axis 1) offsets; edges as (corner, axis).
const SQUARE_CORNERS: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];
const SQUARE_EDGES: [(usize, usize); 4] = [(0, 0), (1, 1), (3, 0), (0, 1)];
const SQUARE_TABLE: [&[[usize; 2]]; 16] = [
    &[],
    &[[3, 0]],
    &[[0, 1]],
    &[[3, 1]],
    &[[1, 2]],
    &[[3, 0], [1, 2]],
    &[[0, 2]],
    &[[3, 2]],
    &[[2, 3]],
    &[[2, 0]],
    &[[0, 1], [2, 3]],
    &[[2, 1]],
    &[[1, 3]],
    &[[1, 0]],
    &[[0, 3]],
    &[],
];

/// Iso-contour of a 2D field by the 16-case marching squares table.
/// Saddle cells separate the two corners below the iso value.
pub fn marching_squares(field: &GridField, iso: f64) -> Result<Polyline2D> {
    if field.spec.dim() != 2 {
        return invalid("marching squares needs a 2D field");
    }
    let spec = &field.spec;
    let l = spec.resolution;
    let (keys, positions) = edge_vertices(field, iso);
    let lookup: HashMap<usize, usize> = keys.iter().enumerate().map(|(v, &k)| (k, v)).collect();
    let segments: Vec<Vec<[usize; 2]>> = (0..l - 1)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 0..l - 1 {
                let mut case = 0;
                for (c, off) in SQUARE_CORNERS.iter().enumerate() {
                    if field.value(&[i + off[0], j + off[1]]) - iso < 0.0 {
                        case |= 1 << c;
                    }
                }
                for seg in SQUARE_TABLE[case] {
                    let v = seg.map(|e| {
                        let (corner, axis) = SQUARE_EDGES[e];
                        let off = SQUARE_CORNERS[corner];
                        let node = spec.index(&[i + off[0], j + off[1]]);
                        lookup[&(node * 2 + axis)]
                    });
                    out.push(v);
                }
            }
            out
        })
        .collect();
    Ok(Polyline2D {
        vertices: positions.into_iter().map(|p| [p[0], p[1]]).collect(),
        segments: segments.into_iter().flatten().collect(),
    })
}

const CUBE_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];
const CUBE_EDGES: [(usize, usize); 12] = [
    (0, 0),
    (1, 1),
    (3, 0),
    (0, 1),
    (4, 0),
    (5, 1),
    (7, 0),
    (4, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

/// Iso-surface of a 3D field by the canonical 256-case table. Vertices on
/// shared lattice edges are welded, so closed level sets give closed meshes.
pub fn marching_cubes(field: &GridField, iso: f64) -> Result<Mesh> {
    if field.spec.dim() != 3 {
        return invalid("marching cubes needs a 3D field");
    }
    let spec = &field.spec;
    let l = spec.resolution;
    let (keys, positions) = edge_vertices(field, iso);
    let lookup: HashMap<usize, usize> = keys.iter().enumerate().map(|(v, &k)| (k, v)).collect();
    let triangles: Vec<Vec<[usize; 3]>> = (0..l - 1)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 0..l - 1 {
                for k in 0..l - 1 {
                    let mut case = 0;
                    for (c, off) in CUBE_CORNERS.iter().enumerate() {
                        if field.value(&[i + off[0], j + off[1], k + off[2]]) - iso < 0.0 {
                            case |= 1 << c;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let vertex = |e: i8| {
                        let (corner, axis) = CUBE_EDGES[e as usize];
                        let off = CUBE_CORNERS[corner];
                        let node = spec.index(&[i + off[0], j + off[1], k + off[2]]);
                        lookup[&(node * 3 + axis)]
                    };
                    for tri in TRI_TABLE[case].chunks_exact(3).take_while(|t| t[0] >= 0) {
                        out.push([vertex(tri[0]), vertex(tri[2]), vertex(tri[1])]);
                    }
                }
            }
            out
        })
        .collect();
    Ok(Mesh {
        vertices: positions.into_iter().map(|p| [p[0], p[1], p[2]]).collect(),
        triangles: triangles.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
pub(crate) fn edge_vertices_for_tests(field: &GridField, iso: f64) -> (Vec<usize>, Vec<Vec<f64>>) {
    edge_vertices(field, iso)
}
