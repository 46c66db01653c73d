//! Minimal Wavefront OBJ reader: `v` and `f` records, polygons fan-triangulated.

use std::path::Path;

use crate::error::{Error, Result};

pub struct ObjData {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn read_obj(path: &Path) -> Result<ObjData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for c in v.iter_mut() {
                    *c = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::parse(path, format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(v);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let raw: i64 = t
                        .split('/')
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::parse(path, format!("line {}: bad face index", lineno + 1)))?;
                    let idx = if raw > 0 { raw - 1 } else { vertices.len() as i64 + raw };
                    if idx < 0 {
                        return Err(Error::parse(
                            path,
                            format!("line {}: face index out of range", lineno + 1),
                        ));
                    }
                    poly.push(idx as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(
                        path,
                        format!("line {}: face with < 3 vertices", lineno + 1),
                    ));
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(ObjData { vertices, triangles })
}

/// Writes vertices and triangles as OBJ.
pub fn write_obj(path: &Path, vertices: &[[f64; 3]], triangles: &[[usize; 3]]) -> Result<()> {
    use std::fmt::Write as _;
    let mut s = String::new();
    for v in vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
