//! Conforming triangular meshes of rectangles.
//!
//! Every grid cell is split along its bottom-left to top-right diagonal, so
//! an `nx × ny` grid has `2·nx·ny` counter-clockwise triangles. Local edge `l`
//! of a triangle runs from its vertex `l` to vertex `l + 1 (mod 3)`.
//!
//! Each edge stores one or two [`EdgeSide`]s. The side geometry carries the
//! physical start and end point of the edge as seen from that triangle, with
//! the two sides parameterized in the same direction. For interior edges both
//! sides coincide; for periodic pairs the second side is the translated copy
//! on the opposite face of the domain.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Neumann,
    Periodic,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "neumann" => Ok(BoundaryKind::Neumann),
            "periodic" => Ok(BoundaryKind::Periodic),
            other => Err(format!("unknown boundary kind `{other}` (expected neumann|periodic)")),
        }
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidArgument(format!(
                "degenerate domain [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
    PeriodicPair,
}

/// One triangle's view of an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSide {
    pub triangle: usize,
    pub local_edge: usize,
    pub start: Point,
    pub end: Point,
}

impl EdgeSide {
    /// Physical point at parameter `s ∈ [0, 1]` along the edge.
    pub fn point(&self, s: f64) -> Point {
        [
            self.start[0] + s * (self.end[0] - self.start[0]),
            self.start[1] + s * (self.end[1] - self.start[1]),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Vertex indices of the first side.
    pub endpoints: [usize; 2],
    pub length: f64,
    /// Unit normal pointing out of `first.triangle`.
    pub normal: [f64; 2],
    pub first: EdgeSide,
    pub second: Option<EdgeSide>,
    pub kind: EdgeKind,
}

impl Edge {
    /// Interior and periodic-pair edges carry jump terms; boundary edges do not.
    pub fn is_coupling(&self) -> bool {
        self.second.is_some()
    }
}

/// Affine map `x = origin + jacobian · (r, s)` from the reference triangle
/// with vertices (0,0), (1,0), (0,1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub origin: Point,
    /// Column-major: `jacobian[c]` is the image of the `c`-th reference axis.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// Rows of `J^{-T}`, used to push reference gradients forward.
    pub inv_transpose: [[f64; 2]; 2],
}

impl AffineMap {
    fn from_vertices(a: Point, b: Point, c: Point) -> Self {
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - a[0], c[1] - a[1]];
        let det = e1[0] * e2[1] - e2[0] * e1[1];
        // J = [e1 e2]; J^{-1} = 1/det [[e2y, -e2x], [-e1y, e1x]]
        let inv = [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]];
        AffineMap {
            origin: a,
            jacobian: [e1, e2],
            det,
            inv_transpose: [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]],
        }
    }

    pub fn to_physical(&self, r: f64, s: f64) -> Point {
        [
            self.origin[0] + self.jacobian[0][0] * r + self.jacobian[1][0] * s,
            self.origin[1] + self.jacobian[0][1] * r + self.jacobian[1][1] * s,
        ]
    }

    pub fn to_reference(&self, p: Point) -> Point {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        // J^{-1} = (J^{-T})^T
        let it = &self.inv_transpose;
        [it[0][0] * dx + it[1][0] * dy, it[0][1] * dx + it[1][1] * dy]
    }

    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let it = &self.inv_transpose;
        [
            it[0][0] * g[0] + it[0][1] * g[1],
            it[1][0] * g[0] + it[1][1] * g[1],
        ]
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    maps: Vec<AffineMap>,
    bc_kind: BoundaryKind,
    domain: Rect,
    grid: Option<(usize, usize)>,
}

impl Mesh {
    /// Uniform `nx × ny` mesh of `domain`, each cell split along one diagonal.
    pub fn rect(domain: Rect, nx: usize, ny: usize, bc_kind: BoundaryKind) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be positive (nx = {nx}, ny = {ny})"
            )));
        }
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // pin the far faces exactly so periodic matching is exact
                let x = if i == nx { domain.x_max } else { domain.x_min + i as f64 * dx };
                let y = if j == ny { domain.y_max } else { domain.y_min + j as f64 * dy };
                vertices.push([x, y]);
            }
        }
        let v = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
        let mut mesh = Self::assemble(vertices, triangles, domain)?;
        mesh.grid = Some((nx, ny));
        if bc_kind == BoundaryKind::Periodic {
            mesh.pair_periodic_edges()?;
        }
        Ok(mesh)
    }

    /// Mesh from explicit triangles with Neumann (unpaired) boundary edges.
    /// The domain is the bounding box of the vertices.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidArgument("empty mesh".into()));
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &vertices {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let domain = Rect::new(x0, x1, y0, y1)?;
        Self::assemble(vertices, triangles, domain)
    }

    fn assemble(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, domain: Rect) -> Result<Self> {
        let mut maps = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            for &vi in tri {
                if vi >= vertices.len() {
                    return Err(Error::OutOfRange {
                        what: "vertex",
                        index: vi,
                        count: vertices.len(),
                    });
                }
            }
            let map = AffineMap::from_vertices(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            // also rejects NaN
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(map.det > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {k} is not counter-clockwise (det J = {})",
                    map.det
                )));
            }
            maps.push(map);
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (k, tri) in triangles.iter().enumerate() {
            for l in 0..3 {
                let (a, b) = (tri[l], tri[(l + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let side = EdgeSide {
                    triangle: k,
                    local_edge: l,
                    start: vertices[a],
                    end: vertices[b],
                };
                match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.second.is_some() {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({a}, {b}) shared by more than two triangles"
                            )));
                        }
                        // reparameterize to match the first side's direction
                        edge.second = Some(EdgeSide {
                            start: edge.first.start,
                            end: edge.first.end,
                            ..side
                        });
                        edge.kind = EdgeKind::Interior;
                        triangle_edges[k][l] = e;
                    }
                    None => {
                        let d = [side.end[0] - side.start[0], side.end[1] - side.start[1]];
                        let length = d[0].hypot(d[1]);
                        lookup.insert(key, edges.len());
                        triangle_edges[k][l] = edges.len();
                        edges.push(Edge {
                            endpoints: [a, b],
                            length,
                            normal: [d[1] / length, -d[0] / length],
                            first: side,
                            second: None,
                            kind: EdgeKind::Boundary,
                        });
                    }
                }
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            maps,
            bc_kind: BoundaryKind::Neumann,
            domain,
            grid: None,
        })
    }

    fn pair_periodic_edges(&mut self) -> Result<()> {
        let d = self.domain;
        let tol = 1e-12 * d.width().max(d.height());
        let on = |a: f64, b: f64| (a - b).abs() <= tol;

        let boundary: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edges[e].second.is_none())
            .collect();
        let face_edges = |pred: &dyn Fn(&Edge) -> bool| -> Vec<usize> {
            boundary.iter().copied().filter(|&e| pred(&self.edges[e])).collect()
        };
        let left = face_edges(&|e| on(e.first.start[0], d.x_min) && on(e.first.end[0], d.x_min));
        let right = face_edges(&|e| on(e.first.start[0], d.x_max) && on(e.first.end[0], d.x_max));
        let bottom = face_edges(&|e| on(e.first.start[1], d.y_min) && on(e.first.end[1], d.y_min));
        let top = face_edges(&|e| on(e.first.start[1], d.y_max) && on(e.first.end[1], d.y_max));

        let mut merged_into: Vec<Option<usize>> = vec![None; self.edges.len()];
        for (lo, hi, shift) in [
            (&left, &right, [d.width(), 0.0]),
            (&bottom, &top, [0.0, d.height()]),
        ] {
            if lo.len() != hi.len() {
                return Err(Error::InvalidArgument(
                    "opposite faces have different edge counts; cannot pair periodically".into(),
                ));
            }
            for &e in lo.iter() {
                let first = self.edges[e].first;
                let start = [first.start[0] + shift[0], first.start[1] + shift[1]];
                let end = [first.end[0] + shift[0], first.end[1] + shift[1]];
                let same = |p: Point, q: Point| on(p[0], q[0]) && on(p[1], q[1]);
                let partner = hi.iter().copied().find(|&h| {
                    let s = self.edges[h].first;
                    (same(s.start, start) && same(s.end, end)) || (same(s.start, end) && same(s.end, start))
                });
                let Some(h) = partner else {
                    return Err(Error::InvalidArgument(format!(
                        "no periodic partner for boundary edge {e}"
                    )));
                };
                let other = self.edges[h].first;
                self.edges[e].second = Some(EdgeSide {
                    start,
                    end,
                    ..other
                });
                self.edges[e].kind = EdgeKind::PeriodicPair;
                merged_into[h] = Some(e);
            }
        }

        let mut remap = vec![usize::MAX; self.edges.len()];
        let mut kept = Vec::with_capacity(self.edges.len());
        for (e, edge) in self.edges.drain(..).enumerate() {
            if merged_into[e].is_none() {
                remap[e] = kept.len();
                kept.push(edge);
            }
        }
        for (e, target) in merged_into.iter().enumerate() {
            if let Some(t) = target {
                remap[e] = remap[*t];
            }
        }
        for te in &mut self.triangle_edges {
            for e in te.iter_mut() {
                *e = remap[*e];
            }
        }
        self.edges = kept;
        self.bc_kind = BoundaryKind::Periodic;
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edge ids of triangle `k`, indexed by local edge.
    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.triangle_edges[k]
    }

    pub fn map(&self, k: usize) -> &AffineMap {
        &self.maps[k]
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        0.5 * self.maps[k].det
    }

    pub fn bc_kind(&self) -> BoundaryKind {
        self.bc_kind
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// `(nx, ny)` for meshes built by [`Mesh::rect`].
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    pub fn edge(&self, id: usize) -> Result<&Edge> {
        self.edges.get(id).ok_or(Error::OutOfRange {
            what: "edge",
            index: id,
            count: self.edges.len(),
        })
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Rect {
        Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn neumann_counts() {
        let m = Mesh::rect(square(), 4, 4, BoundaryKind::Neumann).unwrap();
        assert_eq!(m.n_triangles(), 32);
        assert_eq!(m.count_edges(EdgeKind::Boundary), 16);
        assert_eq!(m.count_edges(EdgeKind::PeriodicPair), 0);
        // 3 edges per triangle, interior counted twice
        assert_eq!(2 * m.count_edges(EdgeKind::Interior) + 16, 3 * 32);
    }

    #[test]
    fn periodic_counts() {
        let d = Rect::new(0.0, 2.0 * std::f64::consts::PI, 0.0, 2.0 * std::f64::consts::PI).unwrap();
        let m = Mesh::rect(d, 2, 2, BoundaryKind::Periodic).unwrap();
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.count_edges(EdgeKind::Boundary), 0);
        assert_eq!(m.count_edges(EdgeKind::PeriodicPair), 4);
        assert_eq!(m.edges().len(), 12);
    }

    #[test]
    fn single_cell_periodic() {
        let m = Mesh::rect(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1, 1, BoundaryKind::Periodic).unwrap();
        assert_eq!(m.edges().len(), 3);
        assert!(m.edges().iter().all(|e| e.is_coupling()));
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(matches!(
            Mesh::rect(square(), 0, 3, BoundaryKind::Neumann),
            Err(Error::InvalidArgument(_))
        ));
        assert!(Mesh::rect(square(), 3, 0, BoundaryKind::Periodic).is_err());
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn hypotenuse_geometry() {
        let m = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let hyp = m.edge(m.triangle_edges(0)[1]).unwrap();
        assert!((hyp.length - 2f64.sqrt()).abs() < 1e-15);
        let r = 1.0 / 2f64.sqrt();
        assert!((hyp.normal[0] - r).abs() < 1e-15 && (hyp.normal[1] - r).abs() < 1e-15);
        assert!(m.edge(3).is_err());
    }

    #[test]
    fn axis_edge_length() {
        let m = Mesh::rect(Rect::new(0.0, 3.0, 0.0, 1.0).unwrap(), 6, 1, BoundaryKind::Neumann).unwrap();
        let bottom = m.edge(m.triangle_edges(0)[0]).unwrap();
        assert!((bottom.length - 0.5).abs() < 1e-15);
        assert_eq!(bottom.normal, [0.0, -1.0]);
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let r = Mesh::from_triangles(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]);
        assert!(r.is_err());
    }

    #[test]
    fn periodic_partner_on_opposite_face() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let m = Mesh::rect(Rect::new(0.0, two_pi, 0.0, two_pi).unwrap(), 2, 2, BoundaryKind::Periodic).unwrap();
        let mut seen = 0;
        for e in m.edges().iter().filter(|e| e.kind == EdgeKind::PeriodicPair) {
            let a = e.first;
            let b = e.second.unwrap();
            if a.start[0].abs() < 1e-12 && a.end[0].abs() < 1e-12 {
                assert!((b.start[0] - two_pi).abs() < 1e-12 && (b.end[0] - two_pi).abs() < 1e-12);
                assert!((a.start[1] - b.start[1]).abs() < 1e-12 && (a.end[1] - b.end[1]).abs() < 1e-12);
                assert_eq!(e.normal, [-1.0, 0.0]);
                seen += 1;
            }
            let la = (a.end[0] - a.start[0]).hypot(a.end[1] - a.start[1]);
            let lb = (b.end[0] - b.start[0]).hypot(b.end[1] - b.start[1]);
            assert!((la - lb).abs() < 1e-12);
        }
        assert_eq!(seen, 2);
    }

    #[test]
    fn area_tiles_domain() {
        for (nx, ny) in [(1, 1), (3, 5), (16, 16)] {
            let d = Rect::new(-0.5, 0.7, 1.0, 2.3).unwrap();
            let m = Mesh::rect(d, nx, ny, BoundaryKind::Neumann).unwrap();
            let total: f64 = (0..m.n_triangles()).map(|k| m.triangle_area(k)).sum();
            assert!((total - d.area()).abs() <= 1e-12 * d.area());
        }
    }

    #[test]
    fn adjacency_counts() {
        for bc in [BoundaryKind::Neumann, BoundaryKind::Periodic] {
            let m = Mesh::rect(square(), 3, 4, bc).unwrap();
            let mut refs = vec![0usize; m.edges().len()];
            for k in 0..m.n_triangles() {
                for e in m.triangle_edges(k) {
                    refs[e] += 1;
                }
            }
            for (e, edge) in m.edges().iter().enumerate() {
                let expected = if edge.is_coupling() { 2 } else { 1 };
                assert_eq!(refs[e], expected);
                assert!((edge.normal[0].hypot(edge.normal[1]) - 1.0).abs() < 1e-14);
                assert!(edge.length > 0.0);
                let outward = {
                    let map = m.map(edge.first.triangle);
                    let c = map.to_physical(1.0 / 3.0, 1.0 / 3.0);
                    let mid = edge.first.point(0.5);
                    (mid[0] - c[0]) * edge.normal[0] + (mid[1] - c[1]) * edge.normal[1]
                };
                assert!(outward > 0.0);
            }
        }
    }

    #[test]
    fn affine_round_trip() {
        let m = Mesh::rect(square(), 2, 3, BoundaryKind::Neumann).unwrap();
        for k in 0..m.n_triangles() {
            let map = m.map(k);
            let p = map.to_physical(0.2, 0.3);
            let r = map.to_reference(p);
            assert!((r[0] - 0.2).abs() < 1e-14 && (r[1] - 0.3).abs() < 1e-14);
        }
    }
}
