//! Whitespace-separated text files: curves (blank lines separate segments)
//! and point sets with optional normal columns.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Unit;

use crate::differential::{Curve, SurfaceSamples};
use crate::error::IoError;
use crate::geometry::{Point3, Vec3};

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>, IoError> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|w| !w.is_empty())
        .map(|w| {
            w.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IoError::parse(path, line_no, format!("invalid number '{w}'")))
        })
        .collect()
}

/// Strips comments; `None` for lines that separate segments.
fn content(line: &str) -> Option<&str> {
    let body = line.split('#').next().unwrap_or("").trim();
    (!body.is_empty()).then_some(body)
}

pub fn parse_curve(path: &Path, text: &str) -> Result<Curve, IoError> {
    let mut segments: Vec<Vec<Point3>> = Vec::new();
    let mut current = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        match content(line) {
            None => {
                if !current.is_empty() {
                    segments.push(std::mem::take(&mut current));
                }
            }
            Some(body) => {
                let v = parse_row(path, k + 1, body)?;
                if v.len() != 3 {
                    return Err(IoError::parse(path, k + 1, format!("expected 3 values, found {}", v.len())));
                }
                current.push(Point3::new(v[0], v[1], v[2]));
            }
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    Ok(Curve::new(segments))
}

pub fn read_curve(path: &Path) -> Result<Curve, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::from_io(path, e))?;
    parse_curve(path, &text)
}

pub fn format_curve(curve: &Curve) -> String {
    let mut s = String::new();
    for (k, seg) in curve.segments.iter().enumerate() {
        if k > 0 {
            s.push('\n');
        }
        for p in seg {
            let _ = writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
    }
    s
}

pub fn write_curve(path: &Path, curve: &Curve) -> Result<(), IoError> {
    fs::write(path, format_curve(curve)).map_err(|e| IoError::from_io(path, e))
}

/// Point set with 3 columns, or 6 when normals follow the coordinates.
pub fn parse_points(path: &Path, text: &str) -> Result<SurfaceSamples, IoError> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        let Some(body) = content(line) else { continue };
        let v = parse_row(path, k + 1, body)?;
        if v.len() != 3 && v.len() != 6 {
            return Err(IoError::parse(path, k + 1, format!("expected 3 or 6 values, found {}", v.len())));
        }
        if *width.get_or_insert(v.len()) != v.len() {
            return Err(IoError::parse(path, k + 1, "inconsistent column count"));
        }
        points.push(Point3::new(v[0], v[1], v[2]));
        if v.len() == 6 {
            let n = Unit::try_new(Vec3::new(v[3], v[4], v[5]), 1e-12)
                .ok_or_else(|| IoError::parse(path, k + 1, "zero normal"))?;
            normals.push(n);
        }
    }
    Ok(SurfaceSamples {
        points,
        normals: (width == Some(6)).then_some(normals),
    })
}

pub fn read_points(path: &Path) -> Result<SurfaceSamples, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::from_io(path, e))?;
    parse_points(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_point_file() {
        let s = parse_points(Path::new("p.xyz"), "0 0 0\n1 0 0\n0 1 0\n").unwrap();
        assert_eq!(s.points.len(), 3);
        assert!(s.normals.is_none());
        let n = parse_points(Path::new("p.xyz"), "0 0 0 0 0 2\n1 0 0 0 1 0\n").unwrap();
        assert!((n.normals.unwrap()[0].z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_segments_of_five() {
        let mut text = String::from("# curve\n");
        for s in 0..2 {
            for i in 0..5 {
                text += &format!("{} {} {}\n", i, s, 0.5 * i as f64);
            }
            text += "\n";
        }
        let c = parse_curve(Path::new("c.xyz"), &text).unwrap();
        assert_eq!(c.segments.len(), 2);
        assert!(c.segments.iter().all(|s| s.len() == 5));
        let back = parse_curve(Path::new("c.xyz"), &format_curve(&c)).unwrap();
        assert_eq!(back.segments, c.segments);
    }

    #[test]
    fn parse_errors_report_line() {
        match parse_curve(Path::new("c.xyz"), "0 0 0\n1 2\n") {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_points(Path::new("p.xyz"), "0 0 x\n").unwrap_err().is_parse());
        assert!(parse_points(Path::new("p.xyz"), "0 0 0\n0 0 0 1 0 0\n").unwrap_err().is_parse());
    }
}
