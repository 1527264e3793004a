//! Seeded random geometry: uniform rotations, rigid motions and tuples.

use nalgebra::{Quaternion, Rotation3, Unit, UnitQuaternion};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{Point3, PointVectorTuple, RigidTransform, UnitVec3, Vec3, VectorKind};

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> UnitVec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-9 {
            return Unit::new_unchecked(v / n);
        }
    }
}

/// Uniform over SO(3), from a normalised Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    let q = Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

/// Uniform rotation with a translation uniform in the cube `[-side/2, side/2]³`.
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R, side: f64) -> RigidTransform {
    let h = side / 2.0;
    let t = Vec3::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h), rng.gen_range(-h..=h));
    RigidTransform::new(random_rotation(rng), t)
}

/// Random tuple with baseline in `[0.2·scale, scale]` and vectors kept at
/// least ~3° away from the baseline.
pub fn random_tuple<R: Rng + ?Sized>(rng: &mut R, scale: f64, kind: VectorKind) -> PointVectorTuple {
    loop {
        let p = Point3::from(random_unit(rng).into_inner() * scale * rng.gen::<f64>());
        let d = random_unit(rng).into_inner() * scale * rng.gen_range(0.2..=1.0);
        let a = random_unit(rng);
        let b = random_unit(rng);
        let dn = d.normalize();
        if a.dot(&dn).abs() < 0.998 && b.dot(&dn).abs() < 0.998 {
            return PointVectorTuple::new(p, p + d, a, b, kind);
        }
    }
}
