use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Pt3;

use super::TriMesh;

/// Loads an STL (ASCII or binary) or OBJ file as a watertight [`TriMesh`].
/// Only positions and faces are read; coincident positions are welded.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let (positions, faces) = match ext.as_str() {
        "stl" => read_stl(path)?,
        "obj" => read_obj(path)?,
        other => {
            return Err(Error::format(path, 0, format!("unsupported mesh extension {other:?}")));
        }
    };
    let (vertices, faces) = weld(&positions, &faces);
    TriMesh::new(vertices, faces)
}

type RawMesh = (Vec<[f64; 3]>, Vec<[u32; 3]>);

fn read_stl(path: &Path) -> Result<RawMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mesh = stl_io::read_stl(&mut reader).map_err(|e| Error::format(path, 0, e.to_string()))?;
    let positions = mesh
        .vertices
        .iter()
        .map(|v| [v[0] as f64, v[1] as f64, v[2] as f64])
        .collect();
    let faces = mesh.faces.iter().map(|t| t.vertices.map(|i| i as u32)).collect();
    Ok((positions, faces))
}

fn read_obj(path: &Path) -> Result<RawMesh> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| match e {
        tobj::LoadError::OpenFileFailed => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "cannot open file"),
        ),
        other => Error::format(path, 0, other.to_string()),
    })?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for model in models {
        let base = positions.len() as u32;
        positions.extend(model.mesh.positions.chunks_exact(3).map(|p| [p[0], p[1], p[2]]));
        faces.extend(
            model
                .mesh
                .indices
                .chunks_exact(3)
                .map(|t| [base + t[0], base + t[1], base + t[2]]),
        );
    }
    Ok((positions, faces))
}

fn weld(positions: &[[f64; 3]], faces: &[[u32; 3]]) -> (Vec<Pt3>, Vec<[u32; 3]>) {
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = positions
        .iter()
        .map(|p| {
            let key = p.map(|c| (c + 0.0).to_bits());
            *index.entry(key).or_insert_with(|| {
                vertices.push(Pt3::new(p[0], p[1], p[2]));
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    let faces = faces
        .iter()
        .filter(|f| f.iter().all(|&i| (i as usize) < remap.len()))
        .map(|f| f.map(|i| remap[i as usize]))
        .collect();
    (vertices, faces)
}

/// Writes positions and faces as a Wavefront OBJ file.
pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    const UNIT_CUBE_STL: &str = "solid cube
facet normal 0 0 -1
 outer loop
  vertex 0 0 0
  vertex 1 1 0
  vertex 1 0 0
 endloop
endfacet
facet normal 0 0 -1
 outer loop
  vertex 0 0 0
  vertex 0 1 0
  vertex 1 1 0
 endloop
endfacet
facet normal 0 0 1
 outer loop
  vertex 0 0 1
  vertex 1 0 1
  vertex 1 1 1
 endloop
endfacet
facet normal 0 0 1
 outer loop
  vertex 0 0 1
  vertex 1 1 1
  vertex 0 1 1
 endloop
endfacet
facet normal 0 -1 0
 outer loop
  vertex 0 0 0
  vertex 1 0 0
  vertex 1 0 1
 endloop
endfacet
facet normal 0 -1 0
 outer loop
  vertex 0 0 0
  vertex 1 0 1
  vertex 0 0 1
 endloop
endfacet
facet normal 0 1 0
 outer loop
  vertex 0 1 0
  vertex 1 1 1
  vertex 1 1 0
 endloop
endfacet
facet normal 0 1 0
 outer loop
  vertex 0 1 0
  vertex 0 1 1
  vertex 1 1 1
 endloop
endfacet
facet normal -1 0 0
 outer loop
  vertex 0 0 0
  vertex 0 0 1
  vertex 0 1 1
 endloop
endfacet
facet normal -1 0 0
 outer loop
  vertex 0 0 0
  vertex 0 1 1
  vertex 0 1 0
 endloop
endfacet
facet normal 1 0 0
 outer loop
  vertex 1 0 0
  vertex 1 1 0
  vertex 1 1 1
 endloop
endfacet
facet normal 1 0 0
 outer loop
  vertex 1 0 0
  vertex 1 1 1
  vertex 1 0 1
 endloop
endfacet
endsolid cube
";

    #[test]
    fn ascii_stl_unit_cube() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.stl");
        std::fs::write(&path, UNIT_CUBE_STL).unwrap();
        let m = load_mesh(&path).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.faces().len(), 12);
        assert!((m.com() - Pt3::new(0.5, 0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn open_stl_reports_defects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("open.stl");
        let cut = UNIT_CUBE_STL.rsplit_once("facet normal 1 0 0").unwrap().0;
        std::fs::write(&path, format!("{cut}endsolid cube\n")).unwrap();
        assert!(matches!(load_mesh(&path), Err(Error::NotWatertight { .. })));
    }

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.obj");
        let m = primitives::icosphere(0.05, 2).build().unwrap();
        write_obj(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.faces().len(), m.faces().len());
        assert!(back.com().coords.norm() < 1e-6);
    }

    #[test]
    fn garbage_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.stl");
        std::fs::write(&path, b"solid x\nfacet normal nope\n").unwrap();
        assert!(matches!(load_mesh(&path), Err(Error::Format { .. })));
        assert!(matches!(load_mesh(dir.path().join("x.ply")), Err(Error::Format { .. })));
    }
}
