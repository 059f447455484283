//! Conforming triangulations of the square `(-1,1)^2` with electrode-tagged
//! boundary faces and newest-vertex-bisection (NVB) refinement.
//!
//! Each element stores a refinement edge (the edge opposite its newest
//! vertex). Bisecting an element cuts that edge at its midpoint; recursive
//! closure bisects neighbors whose refinement edge differs, so the result
//! stays conforming without hanging nodes.

use std::collections::HashMap;

use crate::{EitError, Result};

/// Number of electrodes in the fixed boundary layout.
pub const NUM_ELECTRODES: usize = 16;

/// A mesh vertex in the closed square `[-1,1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: [f64; 2],
}

/// A triangle. `refinement_edge` is the local index (0..3) of the edge
/// opposite the designated newest vertex; edge `i` connects vertices
/// `(i+1)%3` and `(i+2)%3`.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub vertex_ids: [usize; 3],
    pub refinement_edge: u8,
    pub generation: u32,
}

impl Element {
    /// Vertex ids of local edge `e`.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        [
            self.vertex_ids[(e + 1) % 3],
            self.vertex_ids[(e + 2) % 3],
        ]
    }
}

/// Label of a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryLabel {
    /// 1-based electrode number in `1..=16`.
    Electrode(u8),
    Insulated,
}

/// An edge on the boundary of the domain.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub vertex_ids: [usize; 2],
    pub label: BoundaryLabel,
}

/// A conforming triangulation of `(-1,1)^2`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub elements: Vec<Element>,
    pub boundary_faces: Vec<BoundaryFace>,
    /// `adjacency[t][e]` is the element sharing edge `e` of element `t`.
    pub adjacency: Vec<[Option<usize>; 3]>,
}

/// Maps entities of a refined mesh back to the mesh it was produced from.
#[derive(Debug, Clone)]
pub struct ParentMap {
    /// Vertex count of the parent mesh; vertices below this id are shared.
    pub n_parent_vertices: usize,
    /// For each new vertex (id >= `n_parent_vertices`, in id order), the
    /// endpoints of the edge whose midpoint it is.
    pub new_vertex_parents: Vec<[usize; 2]>,
    /// For each child element id, the id of its ancestor in the parent mesh.
    pub element_parent: Vec<usize>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn triangle_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

impl Mesh {
    /// Builds a mesh from raw parts, validating conformity, orientation and
    /// boundary tiling, and computing element adjacency.
    pub fn new(
        vertices: Vec<Vertex>,
        elements: Vec<Element>,
        boundary_faces: Vec<BoundaryFace>,
    ) -> Result<Self> {
        for (t, el) in elements.iter().enumerate() {
            let a = triangle_area(
                vertices[el.vertex_ids[0]].x,
                vertices[el.vertex_ids[1]].x,
                vertices[el.vertex_ids[2]].x,
            );
            if a <= 0.0 {
                return Err(EitError::InvalidMesh(format!(
                    "element {t} has non-positive area {a}"
                )));
            }
            if el.refinement_edge > 2 {
                return Err(EitError::InvalidMesh(format!(
                    "element {t} has refinement edge {}",
                    el.refinement_edge
                )));
            }
        }
        // Edge incidence.
        let mut edge_elems: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, el) in elements.iter().enumerate() {
            for e in 0..3 {
                let [a, b] = el.edge(e);
                edge_elems.entry(edge_key(a, b)).or_default().push(t);
            }
        }
        let mut boundary_set: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, bf) in boundary_faces.iter().enumerate() {
            let k = edge_key(bf.vertex_ids[0], bf.vertex_ids[1]);
            if boundary_set.insert(k, f).is_some() {
                return Err(EitError::InvalidMesh(format!(
                    "duplicate boundary face {:?}",
                    bf.vertex_ids
                )));
            }
        }
        for (k, elems) in &edge_elems {
            match elems.len() {
                1 => {
                    if !boundary_set.contains_key(k) {
                        return Err(EitError::InvalidMesh(format!(
                            "edge {k:?} has one incident element but no boundary label"
                        )));
                    }
                }
                2 => {
                    if boundary_set.contains_key(k) {
                        return Err(EitError::InvalidMesh(format!(
                            "interior edge {k:?} carries a boundary label"
                        )));
                    }
                }
                n => {
                    return Err(EitError::InvalidMesh(format!(
                        "edge {k:?} has {n} incident elements"
                    )))
                }
            }
        }
        if boundary_set.len() != boundary_faces.len()
            || boundary_set.keys().any(|k| !edge_elems.contains_key(k))
        {
            return Err(EitError::InvalidMesh(
                "boundary faces do not match mesh edges".into(),
            ));
        }
        let mut adjacency = vec![[None; 3]; elements.len()];
        for (t, el) in elements.iter().enumerate() {
            for e in 0..3 {
                let [a, b] = el.edge(e);
                let elems = &edge_elems[&edge_key(a, b)];
                adjacency[t][e] = elems.iter().copied().find(|&s| s != t);
            }
        }
        Ok(Self {
            vertices,
            elements,
            boundary_faces,
            adjacency,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_area(&self, t: usize) -> f64 {
        let el = &self.elements[t];
        triangle_area(
            self.vertices[el.vertex_ids[0]].x,
            self.vertices[el.vertex_ids[1]].x,
            self.vertices[el.vertex_ids[2]].x,
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|t| self.element_area(t)).sum()
    }

    /// Local mesh sizes: `h_T = |T|^{1/2}` per element.
    pub fn element_sizes(&self) -> Vec<f64> {
        (0..self.elements.len())
            .map(|t| self.element_area(t).sqrt())
            .collect()
    }

    /// Face size `h_F = |F|` for a vertex pair.
    pub fn face_size(&self, v: [usize; 2]) -> f64 {
        let p = self.vertices[v[0]].x;
        let q = self.vertices[v[1]].x;
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    /// Minimum interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for el in &self.elements {
            let p: Vec<[f64; 2]> = el.vertex_ids.iter().map(|&v| self.vertices[v].x).collect();
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let w = [c[0] - a[0], c[1] - a[1]];
                let dot = u[0] * w[0] + u[1] * w[1];
                let cross = u[0] * w[1] - u[1] * w[0];
                min = min.min(cross.atan2(dot).abs());
            }
        }
        min
    }

    /// Element centroid.
    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let el = &self.elements[t];
        let mut c = [0.0, 0.0];
        for &v in &el.vertex_ids {
            c[0] += self.vertices[v].x[0] / 3.0;
            c[1] += self.vertices[v].x[1] / 3.0;
        }
        c
    }
}

/// Electrode layout on the boundary of `(-1,1)^2`: four electrodes of
/// length 1/4 per side, preceded by gaps of length 1/4, numbered
/// counterclockwise starting from the bottom side. In counterclockwise arc
/// length `t in [0,2]` from the side's start corner, electrode `k`
/// (0-based) occupies `[1/4 + k/2, 1/2 + k/2]`, so all endpoints lie on
/// multiples of 1/4 and coincide with grid vertices whenever the number of
/// squares per side is a multiple of 8.
fn electrode_of_arc(t0: f64, t1: f64) -> Option<usize> {
    let eps = 1e-12;
    for k in 0..4 {
        let lo = 0.25 + 0.5 * k as f64;
        let hi = lo + 0.25;
        if t0 >= lo - eps && t1 <= hi + eps {
            return Some(k);
        }
    }
    None
}

/// Arc-length position of a boundary point along its side, measured
/// counterclockwise from the side's start corner, together with the side
/// index (0 bottom, 1 right, 2 top, 3 left).
fn side_and_arc(p: [f64; 2]) -> Option<(usize, f64)> {
    let eps = 1e-12;
    if (p[1] + 1.0).abs() < eps {
        Some((0, p[0] + 1.0))
    } else if (p[0] - 1.0).abs() < eps {
        Some((1, p[1] + 1.0))
    } else if (p[1] - 1.0).abs() < eps {
        Some((2, 1.0 - p[0]))
    } else if (p[0] + 1.0).abs() < eps {
        Some((3, 1.0 - p[1]))
    } else {
        None
    }
}

/// Labels a boundary edge with its electrode number or `Insulated`.
fn label_boundary_edge(p: [f64; 2], q: [f64; 2]) -> BoundaryLabel {
    let (sp, tp) = side_and_arc(p).expect("boundary vertex");
    let (sq, tq) = side_and_arc(q).expect("boundary vertex");
    // A face lies within one side except when one endpoint is a corner,
    // which belongs to both adjacent sides; resolve by the midpoint.
    let side = if sp == sq {
        sp
    } else {
        let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        side_and_arc(m).expect("boundary midpoint").0
    };
    let arc = |s: usize, t: f64, pt: [f64; 2]| -> f64 {
        if s == side {
            t
        } else {
            // corner vertex re-parameterized on `side`
            side_arc_of_corner(side, pt)
        }
    };
    let (mut a, mut b) = (arc(sp, tp, p), arc(sq, tq, q));
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    match electrode_of_arc(a, b) {
        Some(k) => BoundaryLabel::Electrode((side * 4 + k + 1) as u8),
        None => BoundaryLabel::Insulated,
    }
}

fn side_arc_of_corner(side: usize, p: [f64; 2]) -> f64 {
    match side {
        0 => p[0] + 1.0,
        1 => p[1] + 1.0,
        2 => 1.0 - p[0],
        _ => 1.0 - p[1],
    }
}

/// Builds the uniform initial mesh: `n_per_side x n_per_side` squares over
/// `(-1,1)^2`, each split by the diagonal of positive slope, refinement
/// edges on the diagonals, boundary faces labeled by the electrode layout.
pub fn build_initial_mesh(n_per_side: usize) -> Result<Mesh> {
    if n_per_side == 0 || n_per_side % 8 != 0 {
        return Err(EitError::InvalidArgument(format!(
            "n_per_side must be a positive multiple of 8, got {n_per_side}"
        )));
    }
    let n = n_per_side;
    let h = 2.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vertex {
                x: [-1.0 + i as f64 * h, -1.0 + j as f64 * h],
            });
        }
    }
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v11 = idx(i + 1, j + 1);
            let v01 = idx(i, j + 1);
            // diagonal v00-v11 is the refinement edge of both triangles
            elements.push(Element {
                vertex_ids: [v00, v10, v11],
                refinement_edge: 1, // edge opposite v10
                generation: 0,
            });
            elements.push(Element {
                vertex_ids: [v00, v11, v01],
                refinement_edge: 2, // edge opposite v01
                generation: 0,
            });
        }
    }
    let mut boundary_faces = Vec::with_capacity(4 * n);
    let mut push_face = |a: usize, b: usize, vertices: &[Vertex]| {
        boundary_faces.push(BoundaryFace {
            vertex_ids: [a, b],
            label: label_boundary_edge(vertices[a].x, vertices[b].x),
        });
    };
    for i in 0..n {
        push_face(idx(i, 0), idx(i + 1, 0), &vertices);
        push_face(idx(n, i), idx(n, i + 1), &vertices);
        push_face(idx(n - i, n), idx(n - i - 1, n), &vertices);
        push_face(idx(0, n - i), idx(0, n - i - 1), &vertices);
    }
    Mesh::new(vertices, elements, boundary_faces)
}

const CLOSURE_DEPTH_LIMIT: u32 = 64;

struct Refiner {
    vertices: Vec<Vertex>,
    elems: Vec<WorkElem>,
    edge_elems: HashMap<(usize, usize), Vec<usize>>,
    midpoints: HashMap<(usize, usize), usize>,
    new_vertex_parents: Vec<[usize; 2]>,
}

#[derive(Clone, Copy)]
struct WorkElem {
    v: [usize; 3],
    refedge: u8,
    generation: u32,
    origin: usize,
    alive: bool,
}

impl WorkElem {
    fn edge(&self, e: usize) -> (usize, usize) {
        edge_key(self.v[(e + 1) % 3], self.v[(e + 2) % 3])
    }
    fn refinement_edge_key(&self) -> (usize, usize) {
        self.edge(self.refedge as usize)
    }
}

impl Refiner {
    fn new(mesh: &Mesh) -> Self {
        let elems: Vec<WorkElem> = mesh
            .elements
            .iter()
            .enumerate()
            .map(|(t, el)| WorkElem {
                v: el.vertex_ids,
                refedge: el.refinement_edge,
                generation: el.generation,
                origin: t,
                alive: true,
            })
            .collect();
        let mut edge_elems: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, el) in elems.iter().enumerate() {
            for e in 0..3 {
                edge_elems.entry(el.edge(e)).or_default().push(t);
            }
        }
        Self {
            vertices: mesh.vertices.clone(),
            elems,
            edge_elems,
            midpoints: HashMap::new(),
            new_vertex_parents: Vec::new(),
        }
    }

    fn neighbor_across(&self, t: usize, key: (usize, usize)) -> Option<usize> {
        self.edge_elems
            .get(&key)?
            .iter()
            .copied()
            .find(|&s| s != t && self.elems[s].alive)
    }

    fn midpoint(&mut self, key: (usize, usize)) -> usize {
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let p = self.vertices[key.0].x;
        let q = self.vertices[key.1].x;
        let m = self.vertices.len();
        self.vertices.push(Vertex {
            x: [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0],
        });
        self.midpoints.insert(key, m);
        self.new_vertex_parents.push([key.0, key.1]);
        m
    }

    /// Replaces `t` by its two NVB children across its refinement edge.
    fn split(&mut self, t: usize, m: usize) {
        let el = self.elems[t];
        debug_assert!(el.alive);
        let newest = el.refedge as usize;
        let a = el.v[newest]; // vertex opposite the refinement edge
        let b = el.v[(newest + 1) % 3];
        let c = el.v[(newest + 2) % 3];
        // children (a, b, m) and (a, m, c); newest vertex of both is m,
        // so their refinement edges are the parent edges (a,b) and (a,c).
        self.elems[t].alive = false;
        for e in 0..3 {
            let key = el.edge(e);
            if let Some(v) = self.edge_elems.get_mut(&key) {
                v.retain(|&s| s != t);
            }
        }
        let children = [
            WorkElem {
                v: [a, b, m],
                refedge: 2,
                generation: el.generation + 1,
                origin: el.origin,
                alive: true,
            },
            WorkElem {
                v: [a, m, c],
                refedge: 1,
                generation: el.generation + 1,
                origin: el.origin,
                alive: true,
            },
        ];
        for ch in children {
            let id = self.elems.len();
            self.elems.push(ch);
            for e in 0..3 {
                self.edge_elems.entry(ch.edge(e)).or_default().push(id);
            }
        }
    }

    /// Bisects element `t` across its refinement edge, recursively closing
    /// non-conforming neighbors first.
    fn bisect(&mut self, t: usize, depth: u32) -> Result<()> {
        if !self.elems[t].alive {
            return Ok(());
        }
        if depth > CLOSURE_DEPTH_LIMIT {
            return Err(EitError::ClosureDepth(CLOSURE_DEPTH_LIMIT));
        }
        let key = self.elems[t].refinement_edge_key();
        loop {
            match self.neighbor_across(t, key) {
                Some(n) if self.elems[n].refinement_edge_key() != key => {
                    self.bisect(n, depth + 1)?;
                }
                _ => break,
            }
        }
        let m = self.midpoint(key);
        let neighbor = self.neighbor_across(t, key);
        self.split(t, m);
        if let Some(n) = neighbor {
            debug_assert_eq!(self.elems[n].refinement_edge_key(), key);
            self.split(n, m);
        }
        Ok(())
    }
}

/// Bisects every marked element at least once, with recursive conforming
/// closure. Returns the refined mesh and the parent map.
pub fn refine(mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, ParentMap)> {
    if marked.is_empty() {
        return Err(EitError::InvalidArgument("empty marked set".into()));
    }
    let mut marks: Vec<usize> = marked.to_vec();
    marks.sort_unstable();
    marks.dedup();
    if let Some(&bad) = marks.iter().find(|&&t| t >= mesh.elements.len()) {
        return Err(EitError::InvalidArgument(format!(
            "unknown element id {bad}"
        )));
    }
    let mut r = Refiner::new(mesh);
    for &t in &marks {
        r.bisect(t, 0)?;
    }

    // Collect surviving elements in storage order.
    let mut elements = Vec::new();
    let mut element_parent = Vec::new();
    for el in r.elems.iter().filter(|el| el.alive) {
        elements.push(Element {
            vertex_ids: el.v,
            refinement_edge: el.refedge,
            generation: el.generation,
        });
        element_parent.push(el.origin);
    }

    // Split boundary faces along recorded midpoints, inheriting labels.
    let mut boundary_faces = Vec::new();
    let mut stack: Vec<BoundaryFace> = Vec::new();
    for bf in mesh.boundary_faces.iter().rev() {
        stack.push(*bf);
    }
    while let Some(bf) = stack.pop() {
        let key = edge_key(bf.vertex_ids[0], bf.vertex_ids[1]);
        if let Some(&m) = r.midpoints.get(&key) {
            stack.push(BoundaryFace {
                vertex_ids: [m, bf.vertex_ids[1]],
                label: bf.label,
            });
            stack.push(BoundaryFace {
                vertex_ids: [bf.vertex_ids[0], m],
                label: bf.label,
            });
        } else {
            boundary_faces.push(bf);
        }
    }

    let parent_map = ParentMap {
        n_parent_vertices: mesh.vertices.len(),
        new_vertex_parents: r.new_vertex_parents,
        element_parent,
    };
    let mesh = Mesh::new(r.vertices, elements, boundary_faces)?;
    Ok((mesh, parent_map))
}

/// Orientation and incidence data for one face of the triangulation.
#[derive(Debug, Clone, Copy)]
pub struct Face {
    pub vertex_ids: [usize; 2],
    pub kind: FaceKind,
    /// Unit normal; for interior faces it points from `elements.0` into
    /// `elements.1`, on the boundary it is the outward normal.
    pub normal: [f64; 2],
    pub elements: (usize, Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    /// 1-based electrode number.
    Electrode(u8),
    Insulated,
}

/// All faces of a mesh, partitioned by kind, with per-element face lookup.
#[derive(Debug, Clone)]
pub struct FacePartition {
    pub faces: Vec<Face>,
    /// `element_faces[t][e]` is the face id of local edge `e` of element `t`.
    pub element_faces: Vec<[usize; 3]>,
}

impl FacePartition {
    pub fn interior(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.kind == FaceKind::Interior)
    }
}

/// Classifies all faces into interior, electrode and insulated sets, with
/// fixed unit normals and incident elements.
pub fn classify_faces(mesh: &Mesh) -> FacePartition {
    let mut labels: HashMap<(usize, usize), BoundaryLabel> = HashMap::new();
    for bf in &mesh.boundary_faces {
        labels.insert(edge_key(bf.vertex_ids[0], bf.vertex_ids[1]), bf.label);
    }
    let mut face_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut element_faces = vec![[usize::MAX; 3]; mesh.elements.len()];
    for (t, el) in mesh.elements.iter().enumerate() {
        for e in 0..3 {
            let [a, b] = el.edge(e);
            let key = edge_key(a, b);
            if let Some(&fid) = face_ids.get(&key) {
                element_faces[t][e] = fid;
                let f: &mut Face = &mut faces[fid];
                debug_assert!(f.elements.1.is_none());
                f.elements.1 = Some(t);
                continue;
            }
            let fid = faces.len();
            face_ids.insert(key, fid);
            element_faces[t][e] = fid;
            let p = mesh.vertices[a].x;
            let q = mesh.vertices[b].x;
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            // Normal out of element t across this edge: rotate the edge
            // vector so the normal points away from the opposite vertex.
            let opp = mesh.vertices[el.vertex_ids[e]].x;
            let mut n = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
            let to_opp = [opp[0] - p[0], opp[1] - p[1]];
            if n[0] * to_opp[0] + n[1] * to_opp[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            let kind = match labels.get(&key) {
                Some(BoundaryLabel::Electrode(l)) => FaceKind::Electrode(*l),
                Some(BoundaryLabel::Insulated) => FaceKind::Insulated,
                None => FaceKind::Interior,
            };
            faces.push(Face {
                vertex_ids: [a, b],
                kind,
                normal: n,
                elements: (t, None),
            });
        }
    }
    FacePartition {
        faces,
        element_faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangle_square() -> Mesh {
        // unit square split by the diagonal v0-v2, both refinement edges on it
        let vertices = vec![
            Vertex { x: [0.0, 0.0] },
            Vertex { x: [1.0, 0.0] },
            Vertex { x: [1.0, 1.0] },
            Vertex { x: [0.0, 1.0] },
        ];
        let elements = vec![
            Element {
                vertex_ids: [0, 1, 2],
                refinement_edge: 1,
                generation: 0,
            },
            Element {
                vertex_ids: [0, 2, 3],
                refinement_edge: 2,
                generation: 0,
            },
        ];
        let boundary_faces = [[0, 1], [1, 2], [2, 3], [3, 0]]
            .iter()
            .map(|&[a, b]| BoundaryFace {
                vertex_ids: [a, b],
                label: BoundaryLabel::Insulated,
            })
            .collect();
        Mesh::new(vertices, elements, boundary_faces).unwrap()
    }

    #[test]
    fn initial_mesh_counts() {
        let mesh = build_initial_mesh(8).unwrap();
        assert_eq!(mesh.num_vertices(), 81);
        assert_eq!(mesh.elements.len(), 128);
        assert_eq!(mesh.boundary_faces.len(), 32);
    }

    #[test]
    fn initial_mesh_has_sixteen_electrodes_covering_half_the_boundary() {
        let mesh = build_initial_mesh(8).unwrap();
        let mut labels = std::collections::BTreeSet::new();
        let mut total = 0.0;
        for bf in &mesh.boundary_faces {
            if let BoundaryLabel::Electrode(l) = bf.label {
                labels.insert(l);
                total += mesh.face_size(bf.vertex_ids);
            }
        }
        assert_eq!(labels.len(), 16);
        assert_eq!(*labels.iter().next().unwrap(), 1);
        assert_eq!(*labels.iter().last().unwrap(), 16);
        assert!((total - 4.0).abs() < 1e-12, "electrode length {total}");
    }

    #[test]
    fn electrode_layout_is_rotation_symmetric() {
        // 180-degree rotation maps electrode l to l+8 (1-based, mod 16)
        let mesh = build_initial_mesh(16).unwrap();
        let mut spans: HashMap<u8, Vec<[f64; 4]>> = HashMap::new();
        for bf in &mesh.boundary_faces {
            if let BoundaryLabel::Electrode(l) = bf.label {
                let p = mesh.vertices[bf.vertex_ids[0]].x;
                let q = mesh.vertices[bf.vertex_ids[1]].x;
                spans.entry(l).or_default().push([p[0], p[1], q[0], q[1]]);
            }
        }
        for l in 1..=8u8 {
            let a = &spans[&l];
            let b = &spans[&(l + 8)];
            for s in a {
                let rot = [-s[0], -s[1], -s[2], -s[3]];
                let found = b.iter().any(|t| {
                    let fwd = (0..4).all(|i| (t[i] - rot[i]).abs() < 1e-12);
                    let rev = (t[0] - rot[2]).abs() < 1e-12
                        && (t[1] - rot[3]).abs() < 1e-12
                        && (t[2] - rot[0]).abs() < 1e-12
                        && (t[3] - rot[1]).abs() < 1e-12;
                    fwd || rev
                });
                assert!(found, "electrode {l} span {s:?} not mirrored on {}", l + 8);
            }
        }
    }

    #[test]
    fn rejects_bad_subdivision() {
        assert!(build_initial_mesh(0).is_err());
        assert!(build_initial_mesh(12).is_err());
    }

    #[test]
    fn refine_one_of_two_triangles() {
        let mesh = two_triangle_square();
        let (fine, pm) = refine(&mesh, &[0]).unwrap();
        assert_eq!(fine.elements.len(), 4);
        assert_eq!(fine.num_vertices(), 5);
        assert_eq!(pm.new_vertex_parents.len(), 1);
        // other triangle was closed along the shared diagonal
        let parents: std::collections::BTreeSet<usize> =
            pm.element_parent.iter().copied().collect();
        assert_eq!(parents.len(), 2);
    }

    #[test]
    fn mark_all_on_compatible_grid_doubles_elements() {
        let mesh = build_initial_mesh(8).unwrap();
        let all: Vec<usize> = (0..mesh.elements.len()).collect();
        let (fine, _) = refine(&mesh, &all).unwrap();
        assert_eq!(fine.elements.len(), 2 * mesh.elements.len());
        assert!((fine.total_area() - 4.0).abs() < 4.0 * 1e-12);
    }

    #[test]
    fn repeated_refinement_stays_conforming_with_angle_floor() {
        let mut mesh = build_initial_mesh(8).unwrap();
        let floor = mesh.min_angle() / 2.0;
        for _ in 0..10 {
            let all: Vec<usize> = (0..mesh.elements.len()).collect();
            let (fine, pm) = refine(&mesh, &all).unwrap();
            // Mesh::new validated conformity; check nestedness and area
            assert_eq!(pm.n_parent_vertices, mesh.num_vertices());
            for (i, v) in mesh.vertices.iter().enumerate() {
                assert_eq!(fine.vertices[i], *v);
            }
            assert!((fine.total_area() - 4.0).abs() < 4.0 * 1e-12);
            assert!(fine.min_angle() >= floor - 1e-12);
            mesh = fine;
        }
    }

    #[test]
    fn child_size_halves_per_bisection() {
        let mesh = build_initial_mesh(8).unwrap();
        let h0 = mesh.element_sizes();
        let all: Vec<usize> = (0..mesh.elements.len()).collect();
        let (fine, pm) = refine(&mesh, &all).unwrap();
        let h1 = fine.element_sizes();
        for (t, &parent) in pm.element_parent.iter().enumerate() {
            let expect = h0[parent] / 2.0f64.sqrt();
            assert!((h1[t] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn refine_rejects_bad_input() {
        let mesh = two_triangle_square();
        assert!(refine(&mesh, &[]).is_err());
        assert!(refine(&mesh, &[7]).is_err());
    }

    #[test]
    fn mesh_sizes_match_definitions() {
        let mesh = two_triangle_square();
        let h = mesh.element_sizes();
        assert!((h[0] - 0.5f64.sqrt()).abs() < 1e-15);
        let f = mesh.face_size([0, 1]);
        assert!((f - 1.0).abs() < 1e-15);
        let grid = build_initial_mesh(8).unwrap();
        for h in grid.element_sizes() {
            assert!((h - 0.03125f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn face_classification_partition() {
        let mesh = build_initial_mesh(8).unwrap();
        let parts = classify_faces(&mesh);
        let n_interior = parts.interior().count();
        let n_boundary = parts
            .faces
            .iter()
            .filter(|f| f.kind != FaceKind::Interior)
            .count();
        assert_eq!(n_boundary, 32);
        // Euler counting: E = V + T - 1 on a disk-like triangulation
        assert_eq!(
            n_interior + n_boundary,
            mesh.num_vertices() + mesh.elements.len() - 1
        );
        // interior face incidences agree with adjacency
        for f in parts.interior() {
            let (t, s) = (f.elements.0, f.elements.1.unwrap());
            assert!(mesh.adjacency[t].iter().any(|&n| n == Some(s)));
            assert!(mesh.adjacency[s].iter().any(|&n| n == Some(t)));
        }
        // boundary normals point outward
        for f in &parts.faces {
            if f.kind == FaceKind::Interior {
                continue;
            }
            let p = mesh.vertices[f.vertex_ids[0]].x;
            let q = mesh.vertices[f.vertex_ids[1]].x;
            let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
            assert!(mid[0] * f.normal[0] + mid[1] * f.normal[1] > 0.0);
        }
    }

    #[test]
    fn electrode_faces_stay_within_their_segment_after_refinement() {
        let mut mesh = build_initial_mesh(8).unwrap();
        for round in 0..3 {
            let marked: Vec<usize> = (0..mesh.elements.len()).step_by(round + 2).collect();
            let (fine, _) = refine(&mesh, &marked).unwrap();
            mesh = fine;
        }
        for bf in &mesh.boundary_faces {
            let relabel = label_boundary_edge(
                mesh.vertices[bf.vertex_ids[0]].x,
                mesh.vertices[bf.vertex_ids[1]].x,
            );
            assert_eq!(relabel, bf.label);
        }
    }
}
