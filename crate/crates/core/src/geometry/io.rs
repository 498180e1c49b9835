//! Plain-text mesh serialisation.
//!
//! Line-oriented format, 0-based indices, `#` comments:
//!
//! ```text
//! # optional header comments
//! radius <mm>
//! v <x> <y> <z>                       one per vertex
//! t <i> <j> <k> <region>              one per triangle
//! f <tri> <fx> <fy> <fz> <sx> <sy> <sz>   fibre and sheet directions
//! h <tri> <thickness_mm>
//! r <vertex>                          rim loop, in order
//! p <vertex>                          vein anchor patch
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so write → read
//! reproduces the mesh bit-for-bit.

use super::{GeometryError, Region, ShellMesh};
use nalgebra::Vector3;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Writes the mesh, preceded by `header_comments` (one `#` line each).
pub fn write_mesh(
    mesh: &ShellMesh,
    out: &mut impl Write,
    header_comments: &[String],
) -> Result<(), GeometryError> {
    for line in header_comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "radius {}", mesh.radius_mm)?;
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        writeln!(
            out,
            "t {} {} {} {}",
            tri[0],
            tri[1],
            tri[2],
            mesh.regions[t].name()
        )?;
    }
    for (t, (f, s)) in mesh.fibers.iter().zip(&mesh.sheets).enumerate() {
        writeln!(out, "f {t} {} {} {} {} {} {}", f.x, f.y, f.z, s.x, s.y, s.z)?;
    }
    for (t, th) in mesh.thickness.iter().enumerate() {
        writeln!(out, "h {t} {th}")?;
    }
    for v in &mesh.rim_vertices {
        writeln!(out, "r {v}")?;
    }
    for v in &mesh.vein_vertices {
        writeln!(out, "p {v}")?;
    }
    Ok(())
}

/// Writes the mesh to a file path.
pub fn write_mesh_path(
    mesh: &ShellMesh,
    path: &Path,
    header_comments: &[String],
) -> Result<(), GeometryError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mesh(mesh, &mut file, header_comments)
}

/// Reads a mesh written by [`write_mesh`].
pub fn read_mesh(input: impl Read) -> Result<ShellMesh, GeometryError> {
    let reader = BufReader::new(input);
    let mut radius_mm = 0.0;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut fibers: Vec<(usize, Vector3<f64>, Vector3<f64>)> = Vec::new();
    let mut thickness: Vec<(usize, f64)> = Vec::new();
    let mut rim_vertices = Vec::new();
    let mut vein_vertices = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_num = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let parse_err = |message: String| GeometryError::Parse {
            line: line_num,
            message,
        };
        let f64_at = |i: usize| -> Result<f64, GeometryError> {
            fields
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| parse_err(format!("expected float in field {i}")))
        };
        let usize_at = |i: usize| -> Result<usize, GeometryError> {
            fields
                .get(i)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| parse_err(format!("expected index in field {i}")))
        };
        match fields[0] {
            "radius" => radius_mm = f64_at(1)?,
            "v" => vertices.push(Vector3::new(f64_at(1)?, f64_at(2)?, f64_at(3)?)),
            "t" => {
                triangles.push([usize_at(1)?, usize_at(2)?, usize_at(3)?]);
                let name = fields
                    .get(4)
                    .ok_or_else(|| parse_err("missing region name".into()))?;
                regions.push(
                    Region::from_name(name)
                        .ok_or_else(|| parse_err(format!("unknown region `{name}`")))?,
                );
            }
            "f" => fibers.push((
                usize_at(1)?,
                Vector3::new(f64_at(2)?, f64_at(3)?, f64_at(4)?),
                Vector3::new(f64_at(5)?, f64_at(6)?, f64_at(7)?),
            )),
            "h" => thickness.push((usize_at(1)?, f64_at(2)?)),
            "r" => rim_vertices.push(usize_at(1)?),
            "p" => vein_vertices.push(usize_at(1)?),
            other => return Err(parse_err(format!("unknown record type `{other}`"))),
        }
    }

    let n_tris = triangles.len();
    if fibers.len() != n_tris || thickness.len() != n_tris {
        return Err(GeometryError::Parse {
            line: 0,
            message: format!(
                "expected {n_tris} fibre and thickness records, got {} and {}",
                fibers.len(),
                thickness.len()
            ),
        });
    }
    let mut fiber_vec = vec![Vector3::zeros(); n_tris];
    let mut sheet_vec = vec![Vector3::zeros(); n_tris];
    for (t, f, s) in fibers {
        if t >= n_tris {
            return Err(GeometryError::Parse {
                line: 0,
                message: format!("fibre record for missing triangle {t}"),
            });
        }
        fiber_vec[t] = f;
        sheet_vec[t] = s;
    }
    let mut thickness_vec = vec![0.0; n_tris];
    for (t, th) in thickness {
        if t >= n_tris {
            return Err(GeometryError::Parse {
                line: 0,
                message: format!("thickness record for missing triangle {t}"),
            });
        }
        thickness_vec[t] = th;
    }

    let mesh = ShellMesh {
        vertices,
        triangles,
        regions,
        fibers: fiber_vec,
        sheets: sheet_vec,
        thickness: thickness_vec,
        rim_vertices,
        vein_vertices,
        radius_mm,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Reads a mesh from a file path.
pub fn read_mesh_path(path: &Path) -> Result<ShellMesh, GeometryError> {
    read_mesh(std::fs::File::open(path)?)
}
