//! PLY reading (ASCII and binary) and writing (ASCII).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Unit;

use crate::error::IoError;
use crate::geometry::{Point3, UnitVec3, Vec3};

/// Triangle mesh or bare point set; `faces` may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<UnitVec3>>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_offset: usize,
    lines: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header, IoError> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| IoError::parse(path, line_no + 1, "unterminated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| IoError::parse(path, line_no + 1, "header is not text"))?
            .trim();
        pos += end + 1;
        line_no += 1;
        let err = |m: &str| IoError::parse(path, line_no, m.to_string());
        let mut words = line.split_whitespace();
        let Some(key) = words.next() else { continue };
        if line_no == 1 {
            if key != "ply" {
                return Err(err("missing 'ply' magic"));
            }
            continue;
        }
        match key {
            "format" => {
                format = Some(match words.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    Some("binary_big_endian") => Format::BinaryBe,
                    _ => return Err(err("unknown format")),
                });
            }
            "comment" | "obj_info" => {}
            "element" => {
                let name = words.next().ok_or_else(|| err("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err("element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            "property" => {
                let el = elements.last_mut().ok_or_else(|| err("property before element"))?;
                let ty = words.next().ok_or_else(|| err("property without type"))?;
                let prop = if ty == "list" {
                    let count = words.next().and_then(Scalar::parse).ok_or_else(|| err("bad list count type"))?;
                    let item = words.next().and_then(Scalar::parse).ok_or_else(|| err("bad list item type"))?;
                    let name = words.next().ok_or_else(|| err("property without name"))?;
                    Property::List(name.to_string(), count, item)
                } else {
                    let s = Scalar::parse(ty).ok_or_else(|| err("bad property type"))?;
                    let name = words.next().ok_or_else(|| err("property without name"))?;
                    Property::Scalar(name.to_string(), s)
                };
                el.props.push(prop);
            }
            "end_header" => break,
            _ => return Err(err("unexpected header line")),
        }
    }
    let format = format.ok_or_else(|| IoError::parse(path, line_no, "missing format line"))?;
    Ok(Header {
        format,
        elements,
        body_offset: pos,
        lines: line_no,
    })
}

/// Sequential value source over an ASCII or binary body.
trait Body {
    fn next(&mut self, ty: Scalar) -> Result<f64, String>;
    fn end_element(&mut self) -> Result<(), String> {
        Ok(())
    }
    fn location(&self) -> usize;
}

struct AsciiBody<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    current: Vec<&'a str>,
    cursor: usize,
    line: usize,
    first_line: usize,
}

impl<'a> AsciiBody<'a> {
    fn new(text: &'a str, first_line: usize) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
            current: Vec::new(),
            cursor: 0,
            line: first_line,
            first_line,
        }
    }
}

impl Body for AsciiBody<'_> {
    fn next(&mut self, _ty: Scalar) -> Result<f64, String> {
        while self.cursor >= self.current.len() {
            let (k, l) = self.lines.next().ok_or("unexpected end of data")?;
            self.line = self.first_line + k + 1;
            self.current = l.split_whitespace().collect();
            self.cursor = 0;
        }
        let w = self.current[self.cursor];
        self.cursor += 1;
        w.parse::<f64>().map_err(|_| format!("invalid number '{w}'"))
    }

    fn end_element(&mut self) -> Result<(), String> {
        if self.cursor < self.current.len() {
            return Err("trailing values on line".into());
        }
        Ok(())
    }

    fn location(&self) -> usize {
        self.line
    }
}

struct BinaryBody<'a> {
    bytes: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl Body for BinaryBody<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64, String> {
        let n = ty.size();
        let raw = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| format!("unexpected end of data at byte {}", self.pos))?;
        self.pos += n;
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(raw);
        if self.big_endian {
            buf[..n].reverse();
        }
        Ok(match ty {
            Scalar::I8 => buf[0] as i8 as f64,
            Scalar::U8 => buf[0] as f64,
            Scalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(buf),
        })
    }

    fn location(&self) -> usize {
        0
    }
}

fn read_body(path: &Path, header: &Header, body: &mut dyn Body) -> Result<Mesh, IoError> {
    let mut mesh = Mesh::default();
    let fail = |body: &dyn Body, m: String| IoError::parse(path, body.location(), m);
    for el in &header.elements {
        let find = |n: &str| el.props.iter().position(|p| p.name() == n);
        let xyz = [find("x"), find("y"), find("z")];
        let nxyz = [find("nx"), find("ny"), find("nz")];
        let faces = find("vertex_indices").or_else(|| find("vertex_index"));
        let has_normals = nxyz.iter().all(Option::is_some);
        if el.name == "vertex" && xyz.iter().any(Option::is_none) {
            return Err(IoError::parse(path, header.lines, "vertex element lacks x, y or z"));
        }
        let mut normals = Vec::new();
        let mut scalars = vec![0.0; el.props.len()];
        for _ in 0..el.count {
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => scalars[k] = body.next(*ty).map_err(|m| fail(body, m))?,
                    Property::List(_, cty, ity) => {
                        let c = body.next(*cty).map_err(|m| fail(body, m))?;
                        if c < 0.0 || c.fract() != 0.0 {
                            return Err(fail(body, format!("invalid list length {c}")));
                        }
                        let mut items = Vec::with_capacity(c as usize);
                        for _ in 0..c as usize {
                            items.push(body.next(*ity).map_err(|m| fail(body, m))?);
                        }
                        if el.name == "face" && Some(k) == faces {
                            let nv = mesh.points.len() as f64;
                            if items.iter().any(|&v| v < 0.0 || v >= nv || v.fract() != 0.0) {
                                return Err(fail(body, "face index out of range".into()));
                            }
                            for w in 1..items.len().saturating_sub(1) {
                                mesh.faces.push([items[0] as u32, items[w] as u32, items[w + 1] as u32]);
                            }
                        }
                    }
                }
            }
            body.end_element().map_err(|m| fail(body, m))?;
            if el.name == "vertex" {
                let g = |i: Option<usize>| scalars[i.unwrap()];
                let p = Point3::new(g(xyz[0]), g(xyz[1]), g(xyz[2]));
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(fail(body, "non-finite coordinate".into()));
                }
                mesh.points.push(p);
                if has_normals {
                    normals.push(Vec3::new(g(nxyz[0]), g(nxyz[1]), g(nxyz[2])));
                }
            }
        }
        if el.name == "vertex" && has_normals {
            let units: Option<Vec<UnitVec3>> = normals.iter().map(|n| Unit::try_new(*n, 1e-12)).collect();
            mesh.normals = units;
        }
    }
    Ok(mesh)
}

pub fn read_ply(path: &Path) -> Result<Mesh, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::from_io(path, e))?;
    parse_ply(path, &bytes)
}

/// Parses PLY bytes; `path` is used for error messages only.
pub fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Mesh, IoError> {
    let header = parse_header(path, bytes)?;
    let body = &bytes[header.body_offset..];
    match header.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| IoError::parse(path, header.lines + 1, "body is not text"))?;
            read_body(path, &header, &mut AsciiBody::new(text, header.lines))
        }
        Format::BinaryLe | Format::BinaryBe => read_body(
            path,
            &header,
            &mut BinaryBody {
                bytes: body,
                pos: 0,
                big_endian: header.format == Format::BinaryBe,
            },
        ),
    }
}

pub fn write_ply(path: &Path, mesh: &Mesh) -> Result<(), IoError> {
    let mut out = Vec::new();
    write_ply_to(&mut out, mesh).map_err(|e| IoError::from_io(path, e))?;
    fs::write(path, out).map_err(|e| IoError::from_io(path, e))
}

pub fn write_ply_to(w: &mut impl Write, mesh: &Mesh) -> std::io::Result<()> {
    writeln!(w, "ply\nformat ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.points.len())?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if mesh.normals.is_some() {
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
    }
    if !mesh.faces.is_empty() {
        writeln!(w, "element face {}", mesh.faces.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in mesh.points.iter().enumerate() {
        write!(w, "{:?} {:?} {:?}", p.x, p.y, p.z)?;
        if let Some(n) = &mesh.normals {
            write!(w, " {:?} {:?} {:?}", n[i].x, n[i].y, n[i].z)?;
        }
        writeln!(w)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}
