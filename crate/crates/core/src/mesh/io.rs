//! PLY (ASCII and binary little-endian) and Wavefront OBJ reading and writing.
//!
//! Per-vertex labels live in a PLY integer vertex property named `label`.
//! OBJ has no per-vertex scalar channel, so labels travel in a JSON sidecar
//! `<stem>.labels.json` of the form `{"labels": [0, 3, ...]}`. The sidecar is
//! also honoured for PLY files that lack a `label` property.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{bounding_box, face_cross, MeshStats, TriangleMesh};
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(Error::InvalidConfig(format!("unknown mesh format `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    #[default]
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug)]
pub struct PlyWriteOptions<'a> {
    pub encoding: PlyEncoding,
    /// Per-vertex RGB written as `red green blue` uchar properties.
    pub colors: Option<&'a [[u8; 3]]>,
}

impl Default for PlyWriteOptions<'_> {
    fn default() -> Self {
        PlyWriteOptions {
            encoding: PlyEncoding::BinaryLittleEndian,
            colors: None,
        }
    }
}

/// A mesh fresh from disk, with the number of degenerate triangles dropped.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    pub dropped_triangles: usize,
}

impl LoadedMesh {
    pub fn stats(&self) -> MeshStats {
        MeshStats {
            dropped_triangle_count: self.dropped_triangles,
            ..self.mesh.stats()
        }
    }
}

/// Sidecar path for OBJ labels: `dir/scan.obj` -> `dir/scan.labels.json`.
pub fn labels_sidecar_path(mesh_path: &Path) -> PathBuf {
    let stem = mesh_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    mesh_path.with_file_name(format!("{stem}.labels.json"))
}

#[derive(Serialize, Deserialize)]
struct LabelsFile {
    labels: Vec<u32>,
}

pub fn read_labels_json(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: LabelsFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(None, format!("{}: {e}", path.display())))?;
    file.labels.into_iter().map(label_from_u32).collect()
}

pub fn write_labels_json(path: &Path, labels: &[u8]) -> Result<()> {
    let file = LabelsFile {
        labels: labels.iter().map(|&l| l as u32).collect(),
    };
    let text = serde_json::to_string(&file).expect("labels serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn label_from_u32(l: u32) -> Result<u8> {
    if l > crate::MAX_LABEL as u32 {
        Err(Error::InvalidClass(l))
    } else {
        Ok(l as u8)
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<LoadedMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = match format {
        MeshFormat::Ply => parse_ply(&bytes)?,
        MeshFormat::Obj => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::parse(None, "OBJ file is not valid UTF-8"))?;
            parse_obj(text)?
        }
    };
    let sidecar = labels_sidecar_path(path);
    let sidecar_labels = if raw.labels.is_none() && sidecar.exists() {
        Some(read_labels_json(&sidecar)?)
    } else {
        None
    };
    raw.finish(sidecar_labels)
}

/// Writes `mesh` in `format`. PLY output is binary little-endian; OBJ labels
/// go to the sidecar next to `path`.
pub fn save_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<()> {
    match format {
        MeshFormat::Ply => write_ply(mesh, path, &PlyWriteOptions::default()),
        MeshFormat::Obj => {
            fs::write(path, obj_string(mesh)).map_err(|e| Error::io(path, e))?;
            if let Some(labels) = mesh.labels() {
                write_labels_json(&labels_sidecar_path(path), labels)?;
            }
            Ok(())
        }
    }
}

pub fn write_ply(mesh: &TriangleMesh, path: &Path, options: &PlyWriteOptions<'_>) -> Result<()> {
    let bytes = ply_bytes(mesh, options)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn ply_bytes(mesh: &TriangleMesh, options: &PlyWriteOptions<'_>) -> Result<Vec<u8>> {
    if let Some(colors) = options.colors {
        if colors.len() != mesh.vertex_count() {
            return Err(Error::LengthMismatch {
                expected: mesh.vertex_count(),
                actual: colors.len(),
            });
        }
    }
    let normals = mesh.normals();
    let labels = mesh.labels();

    let mut header = String::from("ply\n");
    header.push_str(match options.encoding {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(header, "element vertex {}", mesh.vertex_count());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if options.colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    if labels.is_some() {
        header.push_str("property uchar label\n");
    }
    let _ = writeln!(header, "element face {}", mesh.triangle_count());
    header.push_str("property list uchar int vertex_indices\nend_header\n");

    let mut out = header.into_bytes();
    match options.encoding {
        PlyEncoding::Ascii => {
            let mut body = String::new();
            for (i, v) in mesh.vertices().iter().enumerate() {
                let _ = write!(body, "{} {} {}", v.x, v.y, v.z);
                if let Some(n) = normals {
                    let _ = write!(body, " {} {} {}", n[i].x, n[i].y, n[i].z);
                }
                if let Some(c) = options.colors {
                    let _ = write!(body, " {} {} {}", c[i][0], c[i][1], c[i][2]);
                }
                if let Some(l) = labels {
                    let _ = write!(body, " {}", l[i]);
                }
                body.push('\n');
            }
            for t in mesh.triangles() {
                let _ = writeln!(body, "3 {} {} {}", t[0], t[1], t[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            for (i, v) in mesh.vertices().iter().enumerate() {
                for c in v.iter() {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                if let Some(n) = normals {
                    for c in n[i].iter() {
                        out.extend_from_slice(&c.to_le_bytes());
                    }
                }
                if let Some(c) = options.colors {
                    out.extend_from_slice(&c[i]);
                }
                if let Some(l) = labels {
                    out.push(l[i]);
                }
            }
            for t in mesh.triangles() {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    if let Some(normals) = mesh.normals() {
        for n in normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
        for t in mesh.triangles() {
            let _ = writeln!(
                s,
                "f {a}//{a} {b}//{b} {c}//{c}",
                a = t[0] + 1,
                b = t[1] + 1,
                c = t[2] + 1
            );
        }
    } else {
        for t in mesh.triangles() {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
    }
    s
}

/// Parsed geometry before validation and degenerate-triangle removal.
#[derive(Debug, Default)]
pub(crate) struct RawMesh {
    vertices: Vec<Vec3>,
    polygons: Vec<Vec<u32>>,
    normals: Option<Vec<Vec3>>,
    labels: Option<Vec<u8>>,
}

impl RawMesh {
    fn finish(self, sidecar_labels: Option<Vec<u8>>) -> Result<LoadedMesh> {
        let n = self.vertices.len();
        let diag2 = bounding_box(&self.vertices)
            .map(|(lo, hi)| (hi - lo).norm_squared())
            .unwrap_or(0.0);
        let area_floor = f64::EPSILON * diag2;

        let mut triangles = Vec::with_capacity(self.polygons.len());
        let mut dropped = 0;
        for poly in &self.polygons {
            if let Some(&bad) = poly.iter().find(|&&i| i as usize >= n) {
                return Err(Error::parse(None, format!("face index {bad} out of range 0..{n}")));
            }
            // fan triangulation for polygons with more than three corners
            for k in 1..poly.len().saturating_sub(1) {
                let tri = [poly[0], poly[k], poly[k + 1]];
                let distinct = tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2];
                let corners = tri.map(|i| self.vertices[i as usize]);
                if !distinct || face_cross(&corners).norm() <= area_floor {
                    dropped += 1;
                    continue;
                }
                triangles.push(tri);
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles while loading");
        }

        let mut mesh = TriangleMesh::new(self.vertices, triangles)?;
        if let Some(labels) = self.labels.or(sidecar_labels) {
            mesh = mesh.with_labels(labels)?;
        }
        if let Some(normals) = self.normals {
            // off-unit normals are renormalized; a zero normal invalidates the set
            let unit: Option<Vec<Vec3>> = normals
                .iter()
                .map(|v| {
                    let len = v.norm();
                    if (len - 1.0).abs() <= super::NORMAL_TOLERANCE {
                        Some(*v)
                    } else {
                        (len > 1e-12 && len.is_finite()).then(|| v / len)
                    }
                })
                .collect();
            if let Some(unit) = unit {
                mesh = mesh.with_normals(unit)?;
            }
        }
        Ok(LoadedMesh {
            mesh,
            dropped_triangles: dropped,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }
}

#[derive(Debug)]
enum PropertyKind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse(None, "PLY header has no end_header"))?;
    let mut body_offset = end + END.len();
    // the header terminator line ends with \n or \r\n
    if bytes.get(body_offset) == Some(&b'\r') {
        body_offset += 1;
    }
    if bytes.get(body_offset) == Some(&b'\n') {
        body_offset += 1;
    }
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::parse(None, "PLY header is not ASCII"))?;

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(1, "missing `ply` magic")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                encoding = Some(match tok.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::BinaryLe,
                    Some(other) => {
                        return Err(Error::parse(lineno, format!("unsupported PLY format {other}")))
                    }
                    None => return Err(Error::parse(lineno, "format line without encoding")),
                });
            }
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(lineno, "element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(lineno, "property before any element"))?;
                let first = tok
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "property without type"))?;
                let kind = if first == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) if count.is_integer() => {
                            PropertyKind::List { count, item }
                        }
                        _ => return Err(Error::parse(lineno, "malformed list property")),
                    }
                } else {
                    PropertyKind::Scalar(
                        Scalar::parse(first)
                            .ok_or_else(|| Error::parse(lineno, format!("unknown type {first}")))?,
                    )
                };
                let name = tok
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "property without name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    kind,
                });
            }
            Some(other) => {
                return Err(Error::parse(lineno, format!("unexpected header keyword {other}")))
            }
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse(None, "PLY header lacks a format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_offset,
    })
}

/// Uniform access to the PLY body in either encoding.
trait ValueSource {
    fn next(&mut self, ty: Scalar) -> Result<f64>;
}

struct AsciiSource<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl ValueSource for AsciiSource<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| Error::parse(None, "PLY body ended early"))?;
        if ty.is_integer() {
            tok.parse::<i64>()
                .map(|v| v as f64)
                .map_err(|_| Error::parse(None, format!("bad integer `{tok}`")))
        } else {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(None, format!("bad number `{tok}`")))
        }
    }
}

struct BinarySource<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl ValueSource for BinarySource<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        let chunk = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::parse(None, "PLY body ended early"))?;
        self.pos += n;
        Ok(match ty {
            Scalar::I8 => chunk[0] as i8 as f64,
            Scalar::U8 => chunk[0] as f64,
            Scalar::I16 => i16::from_le_bytes([chunk[0], chunk[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([chunk[0], chunk[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(chunk.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(chunk.try_into().unwrap()),
        })
    }
}

pub(crate) fn parse_ply(bytes: &[u8]) -> Result<RawMesh> {
    let header = parse_ply_header(bytes)?;
    let body = &bytes[header.body_offset..];
    match header.encoding {
        Encoding::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::parse(None, "ASCII PLY body is not UTF-8"))?;
            read_ply_body(
                &header,
                &mut AsciiSource {
                    tokens: text.split_ascii_whitespace(),
                },
            )
        }
        Encoding::BinaryLe => read_ply_body(&header, &mut BinarySource { bytes: body, pos: 0 }),
    }
}

fn read_ply_body(header: &Header, src: &mut dyn ValueSource) -> Result<RawMesh> {
    let mut raw = RawMesh::default();
    let mut saw_vertices = false;
    for element in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                saw_vertices = true;
                read_vertices(element, src, &mut raw)?;
            }
            "face" => read_faces(element, src, &mut raw)?,
            _ => {
                for _ in 0..element.count {
                    for p in &element.properties {
                        skip_property(p, src)?;
                    }
                }
            }
        }
    }
    if !saw_vertices {
        return Err(Error::parse(None, "PLY has no vertex element"));
    }
    Ok(raw)
}

fn skip_property(p: &Property, src: &mut dyn ValueSource) -> Result<()> {
    match p.kind {
        PropertyKind::Scalar(ty) => {
            src.next(ty)?;
        }
        PropertyKind::List { count, item } => {
            let n = src.next(count)? as usize;
            for _ in 0..n {
                src.next(item)?;
            }
        }
    }
    Ok(())
}

fn read_vertices(element: &Element, src: &mut dyn ValueSource, raw: &mut RawMesh) -> Result<()> {
    let slot = |name: &str| element.properties.iter().position(|p| p.name == name);
    let (Some(ix), Some(iy), Some(iz)) = (slot("x"), slot("y"), slot("z")) else {
        return Err(Error::parse(None, "vertex element lacks x/y/z"));
    };
    let normal_slots = match (slot("nx"), slot("ny"), slot("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let label_slot = slot("label");
    if let Some(l) = label_slot {
        match element.properties[l].kind {
            PropertyKind::Scalar(ty) if ty.is_integer() => {}
            _ => return Err(Error::parse(None, "`label` must be an integer scalar property")),
        }
    }

    let mut values = vec![0.0; element.properties.len()];
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    raw.vertices.reserve(element.count);
    for _ in 0..element.count {
        for (k, p) in element.properties.iter().enumerate() {
            match p.kind {
                PropertyKind::Scalar(ty) => values[k] = src.next(ty)?,
                PropertyKind::List { .. } => skip_property(p, src)?,
            }
        }
        raw.vertices.push(Vec3::new(values[ix], values[iy], values[iz]));
        if let Some([a, b, c]) = normal_slots {
            normals.push(Vec3::new(values[a], values[b], values[c]));
        }
        if let Some(l) = label_slot {
            let v = values[l];
            if v < 0.0 {
                return Err(Error::InvalidClass(u32::MAX));
            }
            labels.push(label_from_u32(v as u32)?);
        }
    }
    if normal_slots.is_some() {
        raw.normals = Some(normals);
    }
    if label_slot.is_some() {
        raw.labels = Some(labels);
    }
    Ok(())
}

fn read_faces(element: &Element, src: &mut dyn ValueSource, raw: &mut RawMesh) -> Result<()> {
    let index_slot = element
        .properties
        .iter()
        .position(|p| {
            matches!(p.kind, PropertyKind::List { .. })
                && (p.name == "vertex_indices" || p.name == "vertex_index")
        })
        .ok_or_else(|| Error::parse(None, "face element lacks vertex_indices"))?;
    raw.polygons.reserve(element.count);
    for _ in 0..element.count {
        for (k, p) in element.properties.iter().enumerate() {
            if k != index_slot {
                skip_property(p, src)?;
                continue;
            }
            let PropertyKind::List { count, item } = p.kind else {
                unreachable!()
            };
            let n = src.next(count)? as usize;
            let mut poly = Vec::with_capacity(n);
            for _ in 0..n {
                let i = src.next(item)?;
                if i < 0.0 {
                    return Err(Error::parse(None, "negative face index"));
                }
                poly.push(i as u32);
            }
            if n < 3 {
                return Err(Error::parse(None, "face with fewer than 3 vertices"));
            }
            raw.polygons.push(poly);
        }
    }
    Ok(())
}

pub(crate) fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut raw = RawMesh::default();
    let mut vn: Vec<Vec3> = Vec::new();
    let mut corner_normals: Vec<(u32, u32)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        match kind {
            "v" | "vn" => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    *c = tok
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::parse(lineno, format!("malformed `{kind}` line")))?;
                }
                let v = Vec3::from(xyz);
                if kind == "v" {
                    raw.vertices.push(v);
                } else {
                    vn.push(v);
                }
            }
            "f" => {
                let mut poly = Vec::new();
                for corner in tok {
                    let mut parts = corner.split('/');
                    let vi = resolve_obj_index(parts.next(), raw.vertices.len(), lineno)?
                        .ok_or_else(|| Error::parse(lineno, "face corner without vertex index"))?;
                    let _texcoord = parts.next();
                    if let Some(ni) = resolve_obj_index(parts.next(), vn.len(), lineno)? {
                        corner_normals.push((vi, ni));
                    }
                    poly.push(vi);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(lineno, "face with fewer than 3 vertices"));
                }
                raw.polygons.push(poly);
            }
            _ => {}
        }
    }

    if !corner_normals.is_empty() {
        let mut normals = vec![None; raw.vertices.len()];
        for (vi, ni) in corner_normals {
            normals[vi as usize] = Some(vn[ni as usize]);
        }
        raw.normals = normals.into_iter().collect();
    } else if !vn.is_empty() && vn.len() == raw.vertices.len() {
        raw.normals = Some(vn);
    }
    Ok(raw)
}

/// OBJ indices are 1-based, negative values count back from the end.
fn resolve_obj_index(tok: Option<&str>, len: usize, lineno: usize) -> Result<Option<u32>> {
    let Some(tok) = tok.filter(|t| !t.is_empty()) else {
        return Ok(None);
    };
    let i: i64 = tok
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad index `{tok}`")))?;
    let resolved = match i {
        0 => return Err(Error::parse(lineno, "OBJ indices are 1-based; found 0")),
        i if i > 0 => i - 1,
        i => len as i64 + i,
    };
    if resolved < 0 || resolved as usize >= len {
        return Err(Error::parse(lineno, format!("index {i} out of range")));
    }
    Ok(Some(resolved as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str) -> Result<LoadedMesh> {
        parse_obj(text)?.finish(None)
    }

    #[test]
    fn single_triangle_obj() {
        let m = load_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap().mesh;
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_zero_index_is_parse_error() {
        let err = load_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: Some(4), .. }), "{err}");
    }

    #[test]
    fn obj_negative_indices_and_quads() {
        let m = load_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf -4/1 -3 -2 -1\n")
            .unwrap()
            .mesh;
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_normals_via_face_refs() {
        let m = load_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nf 1//1 2//1 3//1\n")
            .unwrap()
            .mesh;
        assert_eq!(m.normals().unwrap(), &[Vec3::z(); 3]);
    }

    #[test]
    fn zero_area_triangles_dropped() {
        let loaded = load_str("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n").unwrap();
        assert_eq!(loaded.dropped_triangles, 1);
        assert_eq!(loaded.mesh.triangle_count(), 1);
        assert_eq!(loaded.stats().dropped_triangle_count, 1);
    }

    #[test]
    fn ascii_ply_with_labels_and_extra_element() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\n\
            property float x\nproperty float y\nproperty float z\nproperty int label\n\
            element face 1\nproperty list uchar int vertex_indices\n\
            element edge 1\nproperty int vertex1\nproperty int vertex2\nend_header\n\
            0 0 0 1\n1 0 0 2\n0 1 0 16\n3 0 1 2\n0 1\n";
        let m = parse_ply(text.as_bytes()).unwrap().finish(None).unwrap().mesh;
        assert_eq!(m.labels().unwrap(), &[1, 2, 16]);
        assert_eq!(m.triangle_count(), 1);
    }

    #[test]
    fn ply_label_out_of_range() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
            property float z\nproperty uchar label\nelement face 0\n\
            property list uchar int vertex_indices\nend_header\n0 0 0 1\n1 0 0 20\n0 1 0 3\n";
        let err = parse_ply(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidClass(20)));
    }

    #[test]
    fn binary_ply_truncated_is_parse_error() {
        let m = TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]])
            .unwrap();
        let bytes = ply_bytes(&m, &PlyWriteOptions::default()).unwrap();
        let err = parse_ply(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn missing_format_line() {
        let err = parse_ply(b"ply\nelement vertex 0\nend_header\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn sidecar_path() {
        assert_eq!(
            labels_sidecar_path(Path::new("/a/b/scan.obj")),
            PathBuf::from("/a/b/scan.labels.json")
        );
    }
}
