mod common;

use common::{index, oriented, rng, scene};
use curvereg::geometry::{compute_descriptor, DescriptorGuards, PointVectorTuple, VectorKind};
use curvereg::matching::{
    check_conditions_cc, extract_pairs_cc, query_pair_index, record_matches, CorrespondenceOrder, QueryParams,
};
use curvereg::random::{random_transform, random_unit};
use nalgebra::Unit;
use rand::Rng;

#[test]
fn query_equals_brute_force_filter() {
    let s = scene(1, 10, 4);
    let idx = index(&s, 250);
    let curve = oriented(&s.curve, 0);
    let guards = idx.config.guards();
    let mut r = rng(2);
    let mut checked = 0;
    for params in [
        QueryParams::exact(0.3),
        QueryParams {
            eps: 1.5,
            angular_slack: 0.1,
            simultaneous_tol: 0.15,
        },
    ] {
        let mut done = 0;
        while done < 40 {
            let (i, j) = (r.gen_range(0..curve.len()), r.gen_range(0..curve.len()));
            let t = PointVectorTuple::new(curve.points[i], curve.points[j], curve.dirs[i], curve.dirs[j], VectorKind::Tangents);
            let Ok(g) = compute_descriptor(&t, &guards) else { continue };
            done += 1;
            let got: Vec<_> = query_pair_index(&idx, &g, &params).iter().map(|c| c.key()).collect();
            let mut want: Vec<_> = idx
                .records()
                .iter()
                .filter(|rec| record_matches(&g, rec, &params))
                .map(|rec| {
                    let order = if rec.mirrored {
                        CorrespondenceOrder::Switched
                    } else {
                        CorrespondenceOrder::Direct
                    };
                    (rec.i, rec.j, order)
                })
                .collect();
            want.sort_unstable();
            assert_eq!(got, want);
            checked += got.len();
        }
    }
    assert!(checked > 0, "queries never returned anything");
}

#[test]
fn mirrored_records_describe_the_swapped_tuple() {
    let s = scene(3, 8, 2);
    let idx = index(&s, 120);
    let guards = idx.config.guards();
    let mut mirrored = 0;
    for rec in idx.records() {
        let (a, b) = if rec.mirrored {
            (rec.j as usize, rec.i as usize)
        } else {
            (rec.i as usize, rec.j as usize)
        };
        let t = PointVectorTuple::new(idx.points[a], idx.points[b], idx.normals[a], idx.normals[b], VectorKind::Normals);
        assert_eq!(compute_descriptor(&t, &guards).unwrap(), rec.gamma);
        mirrored += rec.mirrored as usize;
    }
    assert_eq!(2 * mirrored, idx.records().len());
}

/// Tangent in the normal plane of `n` (a true curve on the surface).
fn tangent_on(r: &mut impl Rng, n: &curvereg::geometry::UnitVec3) -> curvereg::geometry::UnitVec3 {
    let v = random_unit(r).into_inner();
    Unit::new_normalize(v - n.as_ref() * v.dot(n))
}

#[test]
fn true_correspondences_are_always_returned() {
    let s = scene(4, 8, 2);
    let idx = index(&s, 150);
    let guards = idx.config.guards();
    let mut r = rng(5);
    let mut done = 0;
    while done < 300 {
        let (a, b) = (r.gen_range(0..idx.points.len()), r.gen_range(0..idx.points.len()));
        if a == b {
            continue;
        }
        let (ta, tb) = (tangent_on(&mut r, &idx.normals[a]), tangent_on(&mut r, &idx.normals[b]));
        let g = random_transform(&mut r, 75.0);
        let curve = PointVectorTuple::new(idx.points[a], idx.points[b], ta, tb, VectorKind::Tangents).transformed(&g);
        let Ok(gamma) = compute_descriptor(&curve, &guards) else { continue };
        let surf = PointVectorTuple::new(idx.points[a], idx.points[b], idx.normals[a], idx.normals[b], VectorKind::Normals);
        if compute_descriptor(&surf, &guards).is_err() || compute_descriptor(&surf.swapped(), &guards).is_err() {
            continue;
        }
        done += 1;
        let found = idx
            .query(&gamma, &QueryParams::exact(1e-6))
            .iter()
            .any(|c| c.target_indices() == (a, b));
        assert!(found, "pair ({a}, {b}) missed");
    }
}

#[test]
fn extraction_equals_quadratic_scan() {
    let s = scene(6, 10, 3);
    let target = oriented(&s.curve, 0);
    let guards = DescriptorGuards::for_diameter(75.0);
    let permissive = DescriptorGuards { d_min: 0.0, ..guards };
    let mut r = rng(7);
    for (tol_len, tol_ang) in [(0.05, 0.02), (1.0, 0.15)] {
        let mut done = 0;
        while done < 20 {
            let (i, j) = (r.gen_range(0..target.len()), r.gen_range(0..target.len()));
            let t = PointVectorTuple::new(target.points[i], target.points[j], target.dirs[i], target.dirs[j], VectorKind::Tangents)
                .transformed(&random_transform(&mut r, 75.0));
            let Ok(g) = compute_descriptor(&t, &guards) else { continue };
            done += 1;
            let got: Vec<_> = extract_pairs_cc(&target, &g, tol_len, tol_ang, &guards).iter().map(|c| c.key()).collect();
            let mut want = Vec::new();
            for a in 0..target.len() {
                for b in a + 1..target.len() {
                    let tt = PointVectorTuple::new(target.points[a], target.points[b], target.dirs[a], target.dirs[b], VectorKind::Tangents);
                    let d = tt.length();
                    if d < g.lambda - tol_len || d > g.lambda + tol_len {
                        continue;
                    }
                    for (tuple, order) in [(tt, CorrespondenceOrder::Direct), (tt.swapped(), CorrespondenceOrder::Switched)] {
                        if let Ok(gh) = compute_descriptor(&tuple, &permissive) {
                            if check_conditions_cc(&g, &gh, tol_len, tol_ang) {
                                want.push((a as u32, b as u32, order));
                            }
                        }
                    }
                }
            }
            want.sort_unstable();
            assert_eq!(got, want);
            assert!(got.iter().any(|&(a, b, o)| {
                let (p, q) = match o {
                    CorrespondenceOrder::Direct => (a as usize, b as usize),
                    CorrespondenceOrder::Switched => (b as usize, a as usize),
                };
                (p, q) == (i, j)
            }));
        }
    }
}
