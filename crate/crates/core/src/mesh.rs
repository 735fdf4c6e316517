//! Triangular meshes of the L-shaped model domain and their plain-text,
//! CSV and legacy-VTK representations.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("target edge length must lie in (0, 1], got {0}")]
    InvalidEdgeLength(f64),
    #[error("triangle {0} has non-positive signed area {1}")]
    DegenerateTriangle(usize, f64),
    #[error("triangle {tri} references missing node {node}")]
    MissingNode { tri: usize, node: usize },
    #[error("boundary edges do not form closed loops at node {0}")]
    OpenBoundary(usize),
    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Label carried by every boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Upper-left edge `y = 2`, `0 <= x <= 1`.
    DirichletLeft,
    /// Right edge `x = 2`, `0 <= y <= 1`.
    DirichletRight,
    Neumann,
}

impl BoundaryTag {
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::Neumann)
    }

    fn name(self) -> &'static str {
        match self {
            BoundaryTag::DirichletLeft => "DirichletLeft",
            BoundaryTag::DirichletRight => "DirichletRight",
            BoundaryTag::Neumann => "Neumann",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "DirichletLeft" => Some(BoundaryTag::DirichletLeft),
            "DirichletRight" => Some(BoundaryTag::DirichletRight),
            "Neumann" => Some(BoundaryTag::Neumann),
            _ => None,
        }
    }
}

/// Material region of a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subdomain {
    /// `[0,1] x [0,2]`
    D1,
    /// `[1,2] x [0,0.5]`
    D2,
    /// `[1,2] x [0.5,1]`
    D3,
}

impl Subdomain {
    pub const ALL: [Subdomain; 3] = [Subdomain::D1, Subdomain::D2, Subdomain::D3];

    pub fn index(self) -> usize {
        match self {
            Subdomain::D1 => 0,
            Subdomain::D2 => 1,
            Subdomain::D3 => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Axis-aligned bounding box `(min, max)` of the region.
    pub fn bounding_box(self) -> (Point, Point) {
        match self {
            Subdomain::D1 => ([0.0, 0.0], [1.0, 2.0]),
            Subdomain::D2 => ([1.0, 0.0], [2.0, 0.5]),
            Subdomain::D3 => ([1.0, 0.5], [2.0, 1.0]),
        }
    }

    /// Region containing `x`, or `None` outside the closed L-shape.
    ///
    /// Interface points are assigned to the lower-numbered region.
    pub fn locate(x: Point) -> Option<Self> {
        let eps = 1e-12;
        let [px, py] = x;
        if px < -eps || py < -eps || px > 2.0 + eps || py > 2.0 + eps {
            return None;
        }
        if px > 1.0 + eps && py > 1.0 + eps {
            return None;
        }
        if px <= 1.0 + eps {
            Some(Subdomain::D1)
        } else if py <= 0.5 + eps {
            Some(Subdomain::D2)
        } else {
            Some(Subdomain::D3)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming P1 triangulation. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    subdomains: Vec<Subdomain>,
    boundary: Vec<BoundaryEdge>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Assembles a mesh and checks its invariants.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        subdomains: Vec<Subdomain>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        assert_eq!(triangles.len(), subdomains.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &n in tri {
                if n >= nodes.len() {
                    return Err(MeshError::MissingNode { tri: t, node: n });
                }
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area <= 0.0 {
                return Err(MeshError::DegenerateTriangle(t, area));
            }
        }
        let mut balance: HashMap<usize, i32> = HashMap::new();
        for e in &boundary {
            for &n in &e.nodes {
                if n >= nodes.len() {
                    return Err(MeshError::MissingNode { tri: usize::MAX, node: n });
                }
            }
            *balance.entry(e.nodes[0]).or_default() += 1;
            *balance.entry(e.nodes[1]).or_default() -= 1;
        }
        if let Some((&n, _)) = balance.iter().filter(|(_, &b)| b != 0).min_by_key(|(&n, _)| n) {
            return Err(MeshError::OpenBoundary(n));
        }
        Ok(Self { nodes, triangles, subdomains, boundary })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Dirichlet tag of each node, if it touches a Dirichlet edge.
    pub fn dirichlet_tags(&self) -> Vec<Option<BoundaryTag>> {
        let mut tags = vec![None; self.nodes.len()];
        for e in self.boundary.iter().filter(|e| e.tag.is_dirichlet()) {
            for &n in &e.nodes {
                tags[n].get_or_insert(e.tag);
            }
        }
        tags
    }

    /// Tags that occur on at least one boundary edge.
    pub fn boundary_tags_present(&self) -> Vec<BoundaryTag> {
        let mut tags: Vec<_> = self.boundary.iter().map(|e| e.tag).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// Returns the same mesh with node `i` moved to index `perm[i]`.
    pub fn renumbered(&self, perm: &[usize]) -> Mesh {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = vec![[0.0; 2]; self.nodes.len()];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = self.nodes[old];
        }
        let triangles = self.triangles.iter().map(|t| t.map(|n| perm[n])).collect();
        let boundary = self
            .boundary
            .iter()
            .map(|e| BoundaryEdge { nodes: e.nodes.map(|n| perm[n]), tag: e.tag })
            .collect();
        Mesh { nodes, triangles, subdomains: self.subdomains.clone(), boundary }
    }

    /// Structured right-triangle mesh of `[x0,x1] x [y0,y1]` with `n x m`
    /// cells, all boundary edges carrying `tag` and all triangles in `D1`.
    pub fn rectangle(lo: Point, hi: Point, n: usize, m: usize, tag: BoundaryTag) -> Result<Mesh, MeshError> {
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut nodes = Vec::with_capacity((n + 1) * (m + 1));
        for j in 0..=m {
            for i in 0..=n {
                let x = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
                let y = lo[1] + (hi[1] - lo[1]) * j as f64 / m as f64;
                nodes.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * m);
        for j in 0..m {
            for i in 0..n {
                let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
        let subdomains = vec![Subdomain::D1; triangles.len()];
        let boundary = extract_boundary(&triangles, |_, _| tag);
        Mesh::new(nodes, triangles, subdomains, boundary)
    }
}

/// Boundary edges (those owned by a single triangle), oriented
/// counter-clockwise with respect to the domain.
fn extract_boundary<F>(triangles: &[[usize; 3]], mut tag: F) -> Vec<BoundaryEdge>
where
    F: FnMut(usize, usize) -> BoundaryTag,
{
    let mut count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            count.entry(key).or_insert((0, [a, b])).0 += 1;
        }
    }
    let mut edges: Vec<BoundaryEdge> = count
        .into_values()
        .filter(|(c, _)| *c == 1)
        .map(|(_, [a, b])| BoundaryEdge { nodes: [a, b], tag: tag(a, b) })
        .collect();
    edges.sort_by_key(|e| e.nodes);
    edges
}

/// Builds the L-shape `[0,2]^2 \ (1,2)x(1,2)` with a structured
/// right-triangle mesh of spacing `1/n`, where `n >= 2` is the smallest
/// even integer with `1/n <= h`. Lines `x = 1`, `y = 0.5` and `y = 1`
/// are mesh lines, so the subdomains are resolved exactly.
pub fn build_lshape_mesh(h: f64) -> Result<Mesh, MeshError> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(MeshError::InvalidEdgeLength(h));
    }
    let mut n = (1.0 / h - 1e-9).ceil().max(1.0) as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let cells = 2 * n;
    let inside_node = |i: usize, j: usize| !(i > n && j > n);
    let inside_cell = |i: usize, j: usize| !(i >= n && j >= n);

    let mut index = vec![usize::MAX; (cells + 1) * (cells + 1)];
    let mut nodes = Vec::new();
    for j in 0..=cells {
        for i in 0..=cells {
            if inside_node(i, j) {
                index[j * (cells + 1) + i] = nodes.len();
                nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (cells + 1) + i];

    let mut triangles = Vec::new();
    let mut subdomains = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            if !inside_cell(i, j) {
                continue;
            }
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let sub = if i < n {
                Subdomain::D1
            } else if 2 * j < n {
                Subdomain::D2
            } else {
                Subdomain::D3
            };
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
            subdomains.push(sub);
            subdomains.push(sub);
        }
    }

    let boundary = extract_boundary(&triangles, |a, b| {
        let (pa, pb) = (nodes[a], nodes[b]);
        if pa[1] == 2.0 && pb[1] == 2.0 {
            BoundaryTag::DirichletLeft
        } else if pa[0] == 2.0 && pb[0] == 2.0 {
            BoundaryTag::DirichletRight
        } else {
            BoundaryTag::Neumann
        }
    });
    Mesh::new(nodes, triangles, subdomains, boundary)
}

/// Writes the plain-text listing read back by [`read_mesh`].
pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<(), MeshError> {
    writeln!(w, "nodes {}", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:e} {:e}", p[0], p[1])?;
    }
    writeln!(w, "triangles {}", mesh.num_triangles())?;
    for (t, s) in mesh.triangles().iter().zip(mesh.subdomains()) {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], s.index() + 1)?;
    }
    writeln!(w, "boundary {}", mesh.boundary().len())?;
    for e in mesh.boundary() {
        writeln!(w, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.name())?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh, MeshError> {
    let lines: Vec<(usize, String)> = r
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .collect::<Result<_, _>>()?;
    let mut it = lines.into_iter().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let err = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };

    let n_nodes = section_count(&mut it, "nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, l) = it.next().ok_or_else(|| err(0, "truncated node list"))?;
        let v: Vec<f64> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| err(ln, "bad coordinate"))?;
        if v.len() != 2 {
            return Err(err(ln, "expected two coordinates"));
        }
        nodes.push([v[0], v[1]]);
    }

    let n_tri = section_count(&mut it, "triangles")?;
    let mut triangles = Vec::with_capacity(n_tri);
    let mut subdomains = Vec::with_capacity(n_tri);
    for _ in 0..n_tri {
        let (ln, l) = it.next().ok_or_else(|| err(0, "truncated triangle list"))?;
        let v: Vec<usize> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| err(ln, "bad index"))?;
        if v.len() != 4 {
            return Err(err(ln, "expected three node indices and a subdomain tag"));
        }
        let sub = v[3].checked_sub(1).and_then(Subdomain::from_index).ok_or_else(|| err(ln, "subdomain tag must be 1, 2 or 3"))?;
        triangles.push([v[0], v[1], v[2]]);
        subdomains.push(sub);
    }

    let n_edges = section_count(&mut it, "boundary")?;
    let mut boundary = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, l) = it.next().ok_or_else(|| err(0, "truncated boundary list"))?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err(ln, "expected two node indices and a tag"));
        }
        let a = parts[0].parse().map_err(|_| err(ln, "bad index"))?;
        let b = parts[1].parse().map_err(|_| err(ln, "bad index"))?;
        let tag = BoundaryTag::parse(parts[2]).ok_or_else(|| err(ln, "unknown boundary tag"))?;
        boundary.push(BoundaryEdge { nodes: [a, b], tag });
    }
    Mesh::new(nodes, triangles, subdomains, boundary)
}

/// Writes `node_id,x,y,value` rows.
pub fn write_field_csv<W: Write>(mesh: &Mesh, values: &[f64], w: W) -> Result<(), MeshError> {
    assert_eq!(values.len(), mesh.num_nodes());
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["node_id", "x", "y", "value"]).map_err(csv_io)?;
    for (i, (p, v)) in mesh.nodes().iter().zip(values).enumerate() {
        wtr.write_record(&[i.to_string(), format!("{:e}", p[0]), format!("{:e}", p[1]), format!("{:e}", v)])
            .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a nodal field written by [`write_field_csv`], returning the node
/// coordinates alongside the values.
pub fn read_field_csv<R: std::io::Read>(r: R) -> Result<(Vec<Point>, Vec<f64>), MeshError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_io)?;
        let get = |k: usize| -> Result<f64, MeshError> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or(MeshError::Parse { line: i + 2, msg: format!("bad column {k}") })
        };
        let id = get(0)? as usize;
        if id != i {
            return Err(MeshError::Parse { line: i + 2, msg: "node ids must be consecutive".into() });
        }
        points.push([get(1)?, get(2)?]);
        values.push(get(3)?);
    }
    Ok((points, values))
}

fn section_count<I: Iterator<Item = (usize, String)>>(it: &mut I, name: &str) -> Result<usize, MeshError> {
    let (ln, l) = it.next().ok_or_else(|| MeshError::Parse { line: 0, msg: "unexpected end of file".into() })?;
    let mut parts = l.split_whitespace();
    if parts.next() != Some(name) {
        return Err(MeshError::Parse { line: ln, msg: format!("expected '{name}' section") });
    }
    parts
        .next()
        .and_then(|c| c.parse().ok())
        .ok_or(MeshError::Parse { line: ln, msg: "bad section count".into() })
}

fn csv_io(e: csv::Error) -> MeshError {
    MeshError::Io(std::io::Error::other(e))
}

/// Legacy ASCII VTK unstructured grid with point-data scalars.
pub fn write_vtk<W: Write>(mesh: &Mesh, fields: &[(&str, &[f64])], mut w: W) -> Result<(), MeshError> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "rbf-uq nodal fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:e} {:e} 0", p[0], p[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {nt}")?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for s in mesh.subdomains() {
        writeln!(w, "{}", s.index() + 1)?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, values) in fields {
            assert_eq!(values.len(), mesh.num_nodes());
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    Ok(())
}
