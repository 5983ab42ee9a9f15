//! Legacy ASCII VTK output of nodal fields on a triangulated surface.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::MeshAtTime;

/// One `POLYDATA` file with the given scalar point fields.
pub fn to_vtk(m: &MeshAtTime, title: &str, fields: &[(&str, &[f64])]) -> Result<String> {
    let n = m.mesh.node_count();
    for (name, values) in fields {
        if values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid VTK field name {name:?}")));
        }
    }
    let mut s = String::new();
    let title = title.lines().next().unwrap_or("");
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\nPOINTS {n} double");
    for x in &m.positions {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]);
    }
    let tris = &m.mesh.triangles;
    let _ = writeln!(s, "POLYGONS {} {}", tris.len(), 4 * tris.len());
    for [a, b, c] in tris {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, values) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(path: impl AsRef<Path>, m: &MeshAtTime, title: &str, fields: &[(&str, &[f64])]) -> Result<()> {
    std::fs::write(path, to_vtk(m, title, fields)?)?;
    Ok(())
}
