//! Binary pair-index files (`CRPI`). Little-endian throughout; the R-tree is
//! rebuilt on load.
//!
//! ```text
//! "CRPI" u32:version
//! f64:d_min f64:d_max u64:subsample_size f64:elevation_margin
//! u64:n   n × (f64 x, y, z, nx, ny, nz)
//! u64:m   m × (f64 x, y, z)                scoring points
//! u64:r   r × (u32 i, u32 j, f64 λ, φp, φq, θq, u8 mirrored)
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Unit;

use crate::error::IoError;
use crate::geometry::{Descriptor, Point3, Vec3};
use crate::matching::{PairIndex, PairIndexConfig, PairRecord};

pub const MAGIC: &[u8; 4] = b"CRPI";
pub const VERSION: u32 = 1;

pub fn encode_index(index: &PairIndex) -> Vec<u8> {
    let mut b = Vec::with_capacity(64 + index.records().len() * 41 + index.points.len() * 48);
    let f = |b: &mut Vec<u8>, x: f64| b.extend_from_slice(&x.to_le_bytes());
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let c = &index.config;
    f(&mut b, c.d_min);
    f(&mut b, c.d_max);
    b.extend_from_slice(&(c.subsample_size as u64).to_le_bytes());
    f(&mut b, c.elevation_margin);
    b.extend_from_slice(&(index.points.len() as u64).to_le_bytes());
    for (p, n) in index.points.iter().zip(&index.normals) {
        for x in [p.x, p.y, p.z, n.x, n.y, n.z] {
            f(&mut b, x);
        }
    }
    b.extend_from_slice(&(index.scoring_points.len() as u64).to_le_bytes());
    for p in &index.scoring_points {
        for x in [p.x, p.y, p.z] {
            f(&mut b, x);
        }
    }
    b.extend_from_slice(&(index.records().len() as u64).to_le_bytes());
    for r in index.records() {
        b.extend_from_slice(&r.i.to_le_bytes());
        b.extend_from_slice(&r.j.to_le_bytes());
        for x in [r.gamma.lambda, r.gamma.phi_p, r.gamma.phi_q, r.gamma.theta_q] {
            f(&mut b, x);
        }
        b.push(r.mirrored as u8);
    }
    b
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, m: impl Into<String>) -> IoError {
        IoError::parse(self.path, 0, format!("byte {}: {}", self.pos, m.into()))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        let s = self
            .bytes
            .get(self.pos..self.pos.saturating_add(n))
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IoError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, IoError> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("non-finite value"))
        }
    }

    /// Element count, checked against the bytes actually left.
    fn count(&mut self, item_size: usize) -> Result<usize, IoError> {
        let n = self.u64()?;
        let left = (self.bytes.len() - self.pos) as u64;
        if n.saturating_mul(item_size as u64) > left {
            return Err(self.err(format!("count {n} exceeds file size")));
        }
        Ok(n as usize)
    }

    fn point(&mut self) -> Result<Point3, IoError> {
        Ok(Point3::new(self.f64()?, self.f64()?, self.f64()?))
    }
}

pub fn decode_index(path: &Path, bytes: &[u8]) -> Result<PairIndex, IoError> {
    let mut r = Reader { path, bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IoError::parse(path, 0, "not a CRPI file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let config = PairIndexConfig {
        d_min: r.f64()?,
        d_max: r.f64()?,
        subsample_size: r.u64()? as usize,
        elevation_margin: r.f64()?,
    };
    let n = r.count(48)?;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        points.push(r.point()?);
        let v = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(r.err("normal is not unit length"));
        }
        normals.push(Unit::new_normalize(v));
    }
    let m = r.count(24)?;
    let scoring = (0..m).map(|_| r.point()).collect::<Result<Vec<_>, _>>()?;
    let k = r.count(41)?;
    let mut records = Vec::with_capacity(k);
    for _ in 0..k {
        let (i, j) = (r.u32()?, r.u32()?);
        if i as usize >= n || j as usize >= n || i == j {
            return Err(r.err(format!("record indices ({i}, {j}) out of range")));
        }
        let gamma = Descriptor::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let mirrored = match r.u8()? {
            0 => false,
            1 => true,
            x => return Err(r.err(format!("invalid mirrored flag {x}"))),
        };
        records.push(PairRecord { i, j, gamma, mirrored });
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes"));
    }
    Ok(PairIndex::from_parts(config, points, normals, scoring, records))
}

pub fn save_index(path: &Path, index: &PairIndex) -> Result<(), IoError> {
    fs::write(path, encode_index(index)).map_err(|e| IoError::from_io(path, e))
}

pub fn load_index(path: &Path) -> Result<PairIndex, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::from_io(path, e))?;
    decode_index(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differential::SurfaceSamples;
    use crate::matching::{build_pair_index, QueryParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_index() -> PairIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<Point3> = (0..60)
            .map(|_| Point3::from(crate::random::random_unit(&mut rng).into_inner() * 10.0))
            .collect();
        let normals = pts.iter().map(|p| Unit::new_normalize(p.coords)).collect();
        let surface = SurfaceSamples {
            points: pts,
            normals: Some(normals),
        };
        let cfg = PairIndexConfig::for_diameter(20.0);
        build_pair_index(&surface, &cfg).unwrap()
    }

    #[test]
    fn round_trip_preserves_queries() {
        let index = small_index();
        let back = decode_index(Path::new("i.crpi"), &encode_index(&index)).unwrap();
        assert_eq!(back.records(), index.records());
        assert_eq!(back.points, index.points);
        assert_eq!(back.scoring_points, index.scoring_points);
        assert_eq!(back.config, index.config);
        let params = QueryParams {
            eps: 0.3,
            angular_slack: 0.1,
            simultaneous_tol: 0.15,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = Descriptor::new(rng.gen_range(1.0..20.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0));
            assert_eq!(back.query(&g, &params), index.query(&g, &params));
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode_index(&small_index());
        let p = Path::new("c.crpi");
        assert!(decode_index(p, &bytes[..bytes.len() - 3]).unwrap_err().is_parse());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_index(p, &bad).unwrap_err().is_parse());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode_index(p, &bad).unwrap_err().is_parse());
        let mut long = bytes;
        long.push(0);
        assert!(decode_index(p, &long).unwrap_err().is_parse());
    }
}
