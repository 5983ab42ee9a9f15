//! Triangulated initial surface and its transport by the flow map.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{FlowMap, Point};

pub const MAX_SUBDIVISIONS: u32 = 8;

/// Triangulation of the initial surface. Connectivity never changes; node
/// positions at later times come from [`SurfaceMesh::at_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub nodes0: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

/// Node positions `X(nodes0, t)` of a mesh at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshAtTime<'a> {
    pub mesh: &'a SurfaceMesh,
    pub positions: Vec<Point>,
    pub t: f64,
}

impl SurfaceMesh {
    pub fn new(nodes0: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { nodes0, triangles };
        mesh.check_topology()?;
        Ok(mesh)
    }

    pub fn node_count(&self) -> usize {
        self.nodes0.len()
    }

    pub fn tri_count(&self) -> usize {
        self.triangles.len()
    }

    /// Icosahedron refined `subdivisions` times by edge bisection, with every
    /// node radially projected to the unit sphere.
    pub fn icosphere(subdivisions: u32) -> Result<Self> {
        if subdivisions > MAX_SUBDIVISIONS {
            return Err(Error::TooManySubdivisions(subdivisions));
        }
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut nodes: Vec<Point> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect();
        let mut triangles = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<Point>| {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    nodes.push(((nodes[a] + nodes[b]) * 0.5).normalize());
                    nodes.len() - 1
                })
            };
            let mut refined = Vec::with_capacity(4 * triangles.len());
            for &[a, b, c] in &triangles {
                let ab = midpoint(a, b, &mut nodes);
                let bc = midpoint(b, c, &mut nodes);
                let ca = midpoint(c, a, &mut nodes);
                refined.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = refined;
        }
        Ok(Self { nodes0: nodes, triangles })
    }

    pub fn at_time(&self, flow: &FlowMap, t: f64) -> MeshAtTime<'_> {
        MeshAtTime { mesh: self, positions: self.nodes0.iter().map(|y| flow.position(y, t)).collect(), t }
    }

    /// Each undirected edge must be shared by exactly two triangles, and the
    /// two must traverse it in opposite directions.
    pub fn check_topology(&self) -> Result<()> {
        let n = self.node_count();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidArgument(format!("triangle {k} has invalid vertex indices {tri:?}")));
            }
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                if directed.insert((a, b), k).is_some() {
                    return Err(Error::Orientation(k));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::NotClosed(a.min(b), a.max(b), 1));
            }
        }
        Ok(())
    }

    /// Geometric checks against the initial surface: nodes on the level set,
    /// positive areas and outward orientation.
    pub fn check_geometry(&self, flow: &FlowMap) -> Result<()> {
        let ls = flow.level_set();
        for y in &self.nodes0 {
            let r = ls.value(y, 0.0).abs();
            if r > 1e-12 {
                return Err(Error::OffSurface { point: (*y).into(), t: 0.0, residual: r });
            }
        }
        for (k, &[i, j, l]) in self.triangles.iter().enumerate() {
            let (a, b, c) = (self.nodes0[i], self.nodes0[j], self.nodes0[l]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area < 1e-14 {
                return Err(Error::DegenerateTriangle { tri: k, area });
            }
            let centroid = (a + b + c) / 3.0;
            let outward = flow.normal(&flow.project_initial(&centroid), 0.0)?;
            if cross.dot(&outward) <= 0.0 {
                return Err(Error::Orientation(k));
            }
        }
        Ok(())
    }

    /// Writes the mesh in OFF format with 17 significant digits.
    pub fn save_off(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_off())?;
        Ok(())
    }

    pub fn to_off(&self) -> String {
        let mut s = String::new();
        writeln!(s, "OFF").unwrap();
        writeln!(s, "{} {} 0", self.node_count(), self.tri_count()).unwrap();
        for p in &self.nodes0 {
            writeln!(s, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z).unwrap();
        }
        for t in &self.triangles {
            writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        s
    }

    pub fn load_off(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse_off(&text, path)
    }

    pub fn parse_off(text: &str, path: &Path) -> Result<Self> {
        let raw = Self::parse_off_unchecked(text, path)?;
        raw.check_topology()?;
        Ok(raw)
    }

    /// Parses an OFF file without topology checks.
    pub fn parse_off_unchecked(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        if header != "OFF" {
            return Err(err(ln, format!("expected header \"OFF\", found {header:?}")));
        }
        let (ln, counts) = lines.next().ok_or_else(|| err(ln + 1, "missing element counts".into()))?;
        let counts: Vec<usize> = counts
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(ln, format!("bad element counts: {e}")))?;
        let [nv, nf, _] = counts[..] else {
            return Err(err(ln, "expected \"<nV> <nF> <nE>\"".into()));
        };

        let mut nodes0 = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "unexpected end of file in vertex list".into()))?;
            let xyz: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(ln, format!("bad vertex: {e}")))?;
            let [x, y, z] = xyz[..] else {
                return Err(err(ln, format!("expected 3 coordinates, found {}", xyz.len())));
            };
            nodes0.push(Vector3::new(x, y, z));
        }
        let mut triangles = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "unexpected end of file in face list".into()))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(ln, format!("bad face: {e}")))?;
            match idx[..] {
                [3, i, j, k] => triangles.push([i, j, k]),
                _ => return Err(err(ln, "only triangular faces \"3 i j k\" are supported".into())),
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing data after face list".into()));
        }
        Ok(Self { nodes0, triangles })
    }

    /// Longest edge of the initial mesh.
    pub fn mesh_width(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3])))
            .map(|(a, b)| (self.nodes0[a] - self.nodes0[b]).norm())
            .fold(0.0, f64::max)
    }
}

impl MeshAtTime<'_> {
    pub fn vertices(&self, tri: usize) -> [Point; 3] {
        let [i, j, k] = self.mesh.triangles[tri];
        [self.positions[i], self.positions[j], self.positions[k]]
    }

    pub fn area(&self) -> f64 {
        (0..self.mesh.tri_count())
            .map(|k| {
                let [a, b, c] = self.vertices(k);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Nodal interpolant of an ambient function on the moved nodes.
    pub fn interpolate(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.positions.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn icosphere_counts() {
        for (s, nv, nt) in [(0, 12, 20), (2, 162, 320), (3, 642, 1280)] {
            let m = SurfaceMesh::icosphere(s).unwrap();
            assert_eq!((m.node_count(), m.tri_count()), (nv, nt));
            assert_eq!(m.node_count(), 10 * 4usize.pow(s) + 2);
        }
        assert!(matches!(SurfaceMesh::icosphere(9), Err(Error::TooManySubdivisions(9))));
    }

    #[test]
    fn icosphere_is_valid() {
        let flow = FlowMap::standard_ellipsoid();
        for s in 0..4 {
            let m = SurfaceMesh::icosphere(s).unwrap();
            m.check_topology().unwrap();
            m.check_geometry(&flow).unwrap();
        }
    }

    #[test]
    fn area_converges_quadratically() {
        let flow = FlowMap::stationary_sphere();
        let errs: Vec<f64> = (2..=5)
            .map(|s| {
                let m = SurfaceMesh::icosphere(s).unwrap();
                (m.at_time(&flow, 0.0).area() - 4.0 * PI).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn moving_the_mesh() {
        let m = SurfaceMesh::icosphere(2).unwrap();
        let flow = FlowMap::standard_ellipsoid();
        assert_eq!(m.at_time(&flow, 0.0).positions, m.nodes0);
        let moved = m.at_time(&flow, 0.25);
        for (p, y) in moved.positions.iter().zip(&m.nodes0) {
            assert!((p.x - 1.25f64.sqrt() * y.x).abs() < 1e-15);
            assert_eq!((p.y, p.z), (y.y, y.z));
        }
        let ls = flow.level_set();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            for p in &m.at_time(&flow, t).positions {
                assert!(ls.value(p, t).abs() <= 1e-13);
            }
        }
        let period = m.at_time(&flow, 1.0);
        for (p, y) in period.positions.iter().zip(&m.nodes0) {
            assert!((p - y).norm() < 1e-13);
        }
    }

    #[test]
    fn off_round_trip() {
        let m = SurfaceMesh::icosphere(1).unwrap();
        let path = std::env::temp_dir().join(format!("evolvs-roundtrip-{}.off", std::process::id()));
        m.save_off(&path).unwrap();
        let back = SurfaceMesh::load_off(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_header() {
        let err = SurfaceMesh::parse_off("OFX\n0 0 0\n", Path::new("bad.off")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = SurfaceMesh::parse_off("OFF\n3 1\n", Path::new("bad.off")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = SurfaceMesh::parse_off("OFF\n1 0 0\n1.0 x 2\n", Path::new("bad.off")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn boundary_edge_is_rejected() {
        let mut m = SurfaceMesh::icosphere(1).unwrap();
        m.triangles.pop();
        let err = SurfaceMesh::parse_off(&m.to_off(), Path::new("open.off")).unwrap_err();
        assert!(matches!(err, Error::NotClosed(..)), "{err}");
    }

    #[test]
    fn flipped_triangle_is_rejected() {
        let mut m = SurfaceMesh::icosphere(1).unwrap();
        m.triangles[3].swap(0, 1);
        assert!(m.check_topology().is_err());
    }
}
