#![allow(dead_code)]

use curvereg::bench::normalize_diameter;
use curvereg::differential::{Curve, OrientedCloud, SurfaceSamples};
use curvereg::io::Mesh;
use curvereg::matching::{build_pair_index, PairIndex, PairIndexConfig};
use curvereg::synth::{blob_mesh, trace_curves, BlobKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    pub mesh: Mesh,
    pub surface: SurfaceSamples,
    pub curve: Curve,
}

/// Small normalised blob with estimated normals and curves traced on it.
pub fn scene(seed: u64, freq: usize, segments: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = blob_mesh(BlobKind::Bumpy, freq, &mut rng);
    mesh.points = normalize_diameter(&mesh.points, 75.0).unwrap();
    let curve = trace_curves(&mesh, segments, 50.0, &mut rng);
    let mut surface = SurfaceSamples::new(mesh.points.clone());
    surface.estimate_normals(30).unwrap();
    Scene { mesh, surface, curve }
}

pub fn index(s: &Scene, subsample: usize) -> PairIndex {
    let cfg = PairIndexConfig {
        subsample_size: subsample,
        ..PairIndexConfig::for_diameter(75.0)
    };
    build_pair_index(&s.surface, &cfg).unwrap()
}

pub fn oriented(curve: &Curve, window: usize) -> OrientedCloud {
    let mut c = curve.clone();
    c.estimate_tangents(window).unwrap();
    c.oriented().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
