//! PLY reader (ASCII and binary little-endian) and vertex-only writer.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug, Clone)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug, Clone)]
struct ElementHeader {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

/// Parsed contents relevant to clouds and meshes.
#[derive(Debug, Clone, Default)]
pub struct PlyData {
    /// Vertex positions in file order, non-finite entries included.
    pub vertices: Vec<[f64; 3]>,
    /// Per-vertex normals when the file has `nx, ny, nz`.
    pub normals: Option<Vec<[f64; 3]>>,
    /// Faces as vertex index lists.
    pub faces: Vec<Vec<usize>>,
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |m: &str| Error::parse(path, m.to_string());

    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<std::fs::File>| -> Result<String> {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::parse(path, "unexpected end of header"));
        }
        Ok(line.trim().to_string())
    };

    if next_line(&mut reader)? != "ply" {
        return Err(Error::UnsupportedFormat(format!(
            "{}: missing ply magic",
            path.display()
        )));
    }
    let mut format = None;
    let mut elements: Vec<ElementHeader> = Vec::new();
    loop {
        let l = next_line(&mut reader)?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens.first().copied() {
            Some("format") => {
                format = Some(match tokens.get(1).copied() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    other => {
                        return Err(Error::UnsupportedFormat(format!(
                            "{}: ply format {:?}",
                            path.display(),
                            other
                        )))
                    }
                })
            }
            Some("element") => {
                let name = tokens.get(1).ok_or_else(|| bad("element without name"))?;
                let count = tokens
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad("element without count"))?;
                elements.push(ElementHeader {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let prop = if tokens.get(1) == Some(&"list") {
                    let count = tokens.get(2).and_then(|t| ScalarType::parse(t));
                    let item = tokens.get(3).and_then(|t| ScalarType::parse(t));
                    let name = tokens.get(4);
                    match (count, item, name) {
                        (Some(count), Some(item), Some(name)) => Property {
                            name: name.to_string(),
                            kind: PropertyKind::List { count, item },
                        },
                        _ => return Err(bad("malformed list property")),
                    }
                } else {
                    match (tokens.get(1).and_then(|t| ScalarType::parse(t)), tokens.get(2)) {
                        (Some(t), Some(name)) => Property {
                            name: name.to_string(),
                            kind: PropertyKind::Scalar(t),
                        },
                        _ => return Err(bad("malformed property")),
                    }
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(bad(&format!("unknown header keyword {other}"))),
        }
    }
    let format = format.ok_or_else(|| bad("missing format line"))?;

    let mut body = Vec::new();
    reader.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;

    let mut out = PlyData::default();
    let mut ascii_tokens = if format == Format::Ascii {
        Some(
            std::str::from_utf8(&body)
                .map_err(|_| bad("ascii body is not utf-8"))?
                .split_ascii_whitespace(),
        )
    } else {
        None
    };
    let mut offset = 0usize;
    let mut read_scalar = |t: ScalarType| -> Result<f64> {
        match ascii_tokens.as_mut() {
            Some(tokens) => {
                let tok = tokens.next().ok_or_else(|| bad("truncated ascii body"))?;
                parse_ascii_number(tok).ok_or_else(|| bad(&format!("bad number {tok:?}")))
            }
            None => {
                let n = t.size();
                if offset + n > body.len() {
                    return Err(bad("truncated binary body"));
                }
                let v = t.read_le(&body[offset..offset + n]);
                offset += n;
                Ok(v)
            }
        }
    };

    for element in &elements {
        let idx = |name: &str| element.properties.iter().position(|p| p.name == name);
        let xyz = [idx("x"), idx("y"), idx("z")];
        let nxyz = [idx("nx"), idx("ny"), idx("nz")];
        let has_normals = nxyz.iter().all(|i| i.is_some());
        let face_prop = element
            .properties
            .iter()
            .position(|p| p.name == "vertex_indices" || p.name == "vertex_index");
        if element.name == "vertex" && xyz.iter().any(|i| i.is_none()) {
            return Err(bad("vertex element lacks x, y or z"));
        }
        if element.name == "vertex" && has_normals {
            out.normals = Some(Vec::with_capacity(element.count));
        }
        let mut scalars = vec![0.0; element.properties.len()];
        for _ in 0..element.count {
            let mut face = Vec::new();
            for (pi, prop) in element.properties.iter().enumerate() {
                match prop.kind {
                    PropertyKind::Scalar(t) => scalars[pi] = read_scalar(t)?,
                    PropertyKind::List { count, item } => {
                        let n = read_scalar(count)?;
                        if !(n >= 0.0) {
                            return Err(bad("negative list length"));
                        }
                        for _ in 0..n as usize {
                            let v = read_scalar(item)?;
                            if Some(pi) == face_prop {
                                face.push(v as usize);
                            }
                        }
                    }
                }
            }
            if element.name == "vertex" {
                out.vertices.push([
                    scalars[xyz[0].unwrap()],
                    scalars[xyz[1].unwrap()],
                    scalars[xyz[2].unwrap()],
                ]);
                if let Some(normals) = out.normals.as_mut() {
                    normals.push([
                        scalars[nxyz[0].unwrap()],
                        scalars[nxyz[1].unwrap()],
                        scalars[nxyz[2].unwrap()],
                    ]);
                }
            } else if element.name == "face" && face_prop.is_some() {
                out.faces.push(face);
            }
        }
    }
    Ok(out)
}

fn parse_ascii_number(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "nan" | "-nan" => Some(f64::NAN),
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

/// Encoding for [`write_vertices`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

/// Writes `points` as a vertex-only PLY with 32-bit float coordinates.
pub fn write_vertices(path: &Path, points: &[[f64; 3]], encoding: PlyEncoding) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let write = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            points.len()
        )?;
        for p in points {
            match encoding {
                PlyEncoding::Ascii => writeln!(w, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?,
                PlyEncoding::BinaryLittleEndian => {
                    for c in p {
                        w.write_all(&(*c as f32).to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_mesh_with_faces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\nproperty float x\nproperty float y\n\
             property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n\
             end_header\n0 0 0 255\n1 0 0 0\n0 1 0 7\n3 0 1 2\n",
        )
        .unwrap();
        let data = read_ply(&path).unwrap();
        assert_eq!(data.vertices.len(), 3);
        assert_eq!(data.faces, vec![vec![0, 1, 2]]);
        assert!(data.normals.is_none());
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.ply");
        let pts = vec![[0.25, -1.5, 3.0], [1e-3, 2e-3, 3e-3]];
        write_vertices(&path, &pts, PlyEncoding::BinaryLittleEndian).unwrap();
        let data = read_ply(&path).unwrap();
        assert_eq!(data.vertices.len(), 2);
        for (a, b) in data.vertices.iter().zip(&pts) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn big_endian_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.ply");
        std::fs::write(
            &path,
            "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n",
        )
        .unwrap();
        assert!(matches!(read_ply(&path), Err(Error::UnsupportedFormat(_))));
    }
}
